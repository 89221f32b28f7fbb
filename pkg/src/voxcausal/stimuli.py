"""Stimulus data model: image records, per-concept generation plans, manifests.

A manifest describes one concept's stimulus dataset: positive images of the
concept, semantic negatives depicting correlated counter concepts, and
counterfactual edits paired to the positive they were derived from. Images are
referenced by id only; no pixel data is stored.

Manifests serialize as UTF-8 line-delimited JSON: one header record carrying
the concept and its counter-concept list, then one record per image. Unknown
fields survive a read/write round trip.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable


class Role(str, Enum):
    POSITIVE = "positive"
    SEMANTIC_NEGATIVE = "semantic_negative"
    COUNTERFACTUAL_EDIT = "counterfactual_edit"


class Split(str, Enum):
    TRAIN = "train"
    EVAL = "eval"


class Source(str, Enum):
    GENERATED = "generated"
    RETRIEVED_POOL = "retrieved_pool"
    RETRIEVED_MEASURED = "retrieved_measured"


# Serialized field order for image records.
_IMAGE_FIELDS = (
    "id",
    "role",
    "split",
    "source",
    "concept",
    "counter_concept",
    "parent_positive_id",
    "verified_present",
    "verified_absent",
    "prompt_or_instruction",
)


@dataclass(frozen=True)
class StimulusImage:
    """One stimulus image record.

    ``verified_present`` / ``verified_absent`` are tri-state: ``None`` means
    the check was never run, which is distinct from a failed check.
    """

    id: str
    role: Role
    split: Split
    source: Source
    concept: str
    counter_concept: str | None = None
    parent_positive_id: str | None = None
    verified_present: bool | None = None
    verified_absent: bool | None = None
    prompt_or_instruction: str | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def to_record(self) -> dict:
        rec: dict = {"record": "image"}
        for name in _IMAGE_FIELDS:
            value = getattr(self, name)
            if value is None:
                continue
            rec[name] = value.value if isinstance(value, Enum) else value
        rec.update(self.extra)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "StimulusImage":
        known = {k: rec[k] for k in _IMAGE_FIELDS if k in rec}
        extra = {k: v for k, v in rec.items() if k not in _IMAGE_FIELDS and k != "record"}
        return cls(
            id=str(known["id"]),
            role=Role(known["role"]),
            split=Split(known["split"]),
            source=Source(known["source"]),
            concept=str(known["concept"]),
            counter_concept=known.get("counter_concept"),
            parent_positive_id=known.get("parent_positive_id"),
            verified_present=known.get("verified_present"),
            verified_absent=known.get("verified_absent"),
            prompt_or_instruction=known.get("prompt_or_instruction"),
            extra=extra,
        )

    def with_verification(self, present: bool | None = None, absent: bool | None = None) -> "StimulusImage":
        updates = {}
        if present is not None:
            updates["verified_present"] = present
        if absent is not None:
            updates["verified_absent"] = absent
        return replace(self, **updates)


@dataclass(frozen=True)
class GenerationPlan:
    """Per-concept stimulus generation targets.

    Counts are targets only; attrition during verification is reported by the
    coverage analysis rather than compensated by regeneration.
    """

    concept: str
    n_pos_train: int = 200
    n_pos_eval: int = 100
    n_counter_concepts: int = 10
    n_prompts_per_counter: int = 10
    n_edit_parents_train: int = 50
    n_edit_parents_eval: int = 20
    n_edits_per_parent: int = 10

    def __post_init__(self):
        for name in (
            "n_pos_train",
            "n_pos_eval",
            "n_counter_concepts",
            "n_prompts_per_counter",
            "n_edit_parents_train",
            "n_edit_parents_eval",
            "n_edits_per_parent",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.n_edit_parents_train > self.n_pos_train:
            raise ValueError(
                f"n_edit_parents_train ({self.n_edit_parents_train}) exceeds "
                f"n_pos_train ({self.n_pos_train})"
            )
        if self.n_edit_parents_eval > self.n_pos_eval:
            raise ValueError(
                f"n_edit_parents_eval ({self.n_edit_parents_eval}) exceeds "
                f"n_pos_eval ({self.n_pos_eval})"
            )


@dataclass(frozen=True)
class PlanConfig:
    """Optional overrides for :func:`build_generation_plan`. ``None`` keeps the default."""

    n_pos_train: int | None = None
    n_pos_eval: int | None = None
    n_counter_concepts: int | None = None
    n_prompts_per_counter: int | None = None
    n_edit_parents_train: int | None = None
    n_edit_parents_eval: int | None = None
    n_edits_per_parent: int | None = None


def build_generation_plan(concept: str, config: PlanConfig = PlanConfig()) -> GenerationPlan:
    """Build a generation plan for ``concept``, applying overrides from ``config``.

    Raises ValueError for an empty concept or if the resulting counts violate
    plan invariants (negative counts, more edit parents than positives).
    """
    if not concept:
        raise ValueError("concept must be non-empty")
    overrides = {
        name: value
        for name, value in (
            ("n_pos_train", config.n_pos_train),
            ("n_pos_eval", config.n_pos_eval),
            ("n_counter_concepts", config.n_counter_concepts),
            ("n_prompts_per_counter", config.n_prompts_per_counter),
            ("n_edit_parents_train", config.n_edit_parents_train),
            ("n_edit_parents_eval", config.n_edit_parents_eval),
            ("n_edits_per_parent", config.n_edits_per_parent),
        )
        if value is not None
    }
    return GenerationPlan(concept=concept, **overrides)


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass
class StimulusManifest:
    """A concept's full stimulus catalog (both splits, all sources)."""

    concept: str
    images: list[StimulusImage] = field(default_factory=list)
    counter_concepts: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def select(
        self,
        role: Role | None = None,
        split: Split | None = None,
        source: Source | None = None,
    ) -> list[StimulusImage]:
        """Images filtered by role/split/source, in manifest order."""
        out = []
        for img in self.images:
            if role is not None and img.role != role:
                continue
            if split is not None and img.split != split:
                continue
            if source is not None and img.source != source:
                continue
            out.append(img)
        return out

    def ids(
        self,
        role: Role | None = None,
        split: Split | None = None,
        source: Source | None = None,
    ) -> list[str]:
        return [img.id for img in self.select(role, split, source)]

    def edit_pairs(
        self, split: Split | None = None, source: Source | None = None
    ) -> dict[str, list[str]]:
        """Map parent positive id -> list of edit ids, restricted to a split/source.

        Only parents that exist as positives in the manifest are included;
        parents without edits map to an empty list.
        """
        pairs: dict[str, list[str]] = {
            pid: [] for pid in self.ids(Role.POSITIVE, split, source)
        }
        for img in self.images:
            if img.role != Role.COUNTERFACTUAL_EDIT:
                continue
            if split is not None and img.split != split:
                continue
            if img.parent_positive_id in pairs:
                pairs[img.parent_positive_id].append(img.id)
        return pairs


def validate_manifest(manifest: StimulusManifest) -> ValidationReport:
    """Check every manifest invariant; violations are data, not exceptions."""
    violations: list[Violation] = []
    seen: set[str] = set()
    positives: set[str] = set()
    for img in manifest.images:
        if img.id in seen:
            violations.append(Violation("duplicate_id", f"duplicate id {img.id}"))
        seen.add(img.id)
        if img.role == Role.POSITIVE:
            positives.add(img.id)

    counter_set = set(manifest.counter_concepts)
    for img in manifest.images:
        if img.role == Role.COUNTERFACTUAL_EDIT:
            if not img.parent_positive_id:
                violations.append(
                    Violation("missing_parent", f"edit {img.id} has no parent_positive_id")
                )
            elif img.parent_positive_id not in positives:
                violations.append(
                    Violation(
                        "dangling_parent",
                        f"edit {img.id} dangling parent {img.parent_positive_id}",
                    )
                )
        elif img.parent_positive_id is not None:
            violations.append(
                Violation("unexpected_parent", f"{img.role.value} {img.id} carries a parent id")
            )
        if img.role == Role.SEMANTIC_NEGATIVE:
            if not img.counter_concept:
                violations.append(
                    Violation("missing_counter", f"negative {img.id} has no counter_concept")
                )
            elif img.counter_concept not in counter_set:
                violations.append(
                    Violation(
                        "unlisted_counter",
                        f"negative {img.id} references unlisted counter concept "
                        f"{img.counter_concept!r}",
                    )
                )
        elif img.counter_concept is not None:
            violations.append(
                Violation(
                    "unexpected_counter", f"{img.role.value} {img.id} carries a counter_concept"
                )
            )
    return ValidationReport(tuple(violations))


def write_manifest(manifest: StimulusManifest, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in manifest_lines(manifest):
            fh.write(line + "\n")


def manifest_lines(manifest: StimulusManifest) -> Iterable[str]:
    header = {
        "record": "header",
        "concept": manifest.concept,
        "counter_concepts": list(manifest.counter_concepts),
    }
    header.update(manifest.extra)
    yield json.dumps(header, ensure_ascii=False)
    for img in manifest.images:
        yield json.dumps(img.to_record(), ensure_ascii=False)


def read_manifest(path: str | Path) -> StimulusManifest:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in (raw.strip() for raw in fh) if line]
    if not lines:
        raise ValueError(f"manifest {path} is empty")
    header = json.loads(lines[0])
    if header.get("record") != "header":
        raise ValueError(f"manifest {path} does not start with a header record")
    extra = {
        k: v for k, v in header.items() if k not in ("record", "concept", "counter_concepts")
    }
    manifest = StimulusManifest(
        concept=str(header["concept"]),
        counter_concepts=[str(c) for c in header.get("counter_concepts", [])],
        extra=extra,
    )
    for line in lines[1:]:
        rec = json.loads(line)
        if rec.get("record") != "image":
            raise ValueError(f"unexpected record type {rec.get('record')!r} in {path}")
        manifest.images.append(StimulusImage.from_record(rec))
    return manifest
