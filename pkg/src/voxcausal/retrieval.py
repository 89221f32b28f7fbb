"""Embedding-based retrieval of positives and semantic negatives, plus
coverage accounting over the measured dataset.

Ranking is exact cosine over the whole index (no approximate search).
Semantic negatives use a two-stage procedure: shortlist images most aligned
with the counter concept, then prefer the shortlist entries least aligned
with the target concept, then double-verify (counter present, target absent).
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np

from . import clients
from .matrixio import EmbeddingIndex
from .stimuli import Role, Source, StimulusManifest


class Stage(str, Enum):
    SINGLE_STAGE = "single_stage"
    TWO_STAGE = "two_stage"


class VerificationOutcome(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    UNVERIFIED = "unverified"


@dataclass(frozen=True)
class VerifyMode:
    """What :func:`verify_batch` demands of each retrieved image."""

    kind: str  # require_present | require_absent | double
    counter_concept: str | None = None

    @classmethod
    def require_present(cls) -> "VerifyMode":
        return cls("require_present")

    @classmethod
    def require_absent(cls) -> "VerifyMode":
        return cls("require_absent")

    @classmethod
    def double(cls, counter_concept: str) -> "VerifyMode":
        if not counter_concept:
            raise ValueError("double verification needs a counter concept")
        return cls("double", counter_concept)


@dataclass(frozen=True)
class RetrievalResult:
    query: str
    stage: Stage
    ranked_ids: tuple[str, ...]
    similarities: tuple[float, ...]  # the stage's final ranking criterion
    first_stage_similarities: tuple[float, ...] | None = None
    verification: tuple[VerificationOutcome, ...] | None = None

    def passing_ids(self) -> list[str]:
        if self.verification is None:
            return list(self.ranked_ids)
        return [
            i
            for i, out in zip(self.ranked_ids, self.verification)
            if out == VerificationOutcome.PASS
        ]


def _check_query(query_vec: np.ndarray, index: EmbeddingIndex, name: str) -> np.ndarray:
    q = np.asarray(query_vec, dtype=np.float64).ravel()
    if q.shape[0] != index.dim:
        raise ValueError(f"{name} has dim {q.shape[0]}, index has dim {index.dim}")
    norm = np.linalg.norm(q)
    if abs(norm - 1.0) > 1e-3:
        raise ValueError(f"{name} must be unit-norm (got {norm:.6f})")
    return q


def _similarities(index: EmbeddingIndex, q: np.ndarray) -> np.ndarray:
    return index.vectors.astype(np.float64) @ q


def rank_by_similarity(
    query_vec: np.ndarray, index: EmbeddingIndex, n: int
) -> RetrievalResult:
    """Top-n index entries by cosine similarity, ties broken by ascending id."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    q = _check_query(query_vec, index, "query_vec")
    sims = _similarities(index, q)
    ids = np.array(index.ids)
    order = np.lexsort((ids, -sims))[: min(n, len(index.ids))]
    return RetrievalResult(
        query="",
        stage=Stage.SINGLE_STAGE,
        ranked_ids=tuple(ids[order]),
        similarities=tuple(float(s) for s in sims[order]),
    )


def two_stage_negative_retrieval(
    neg_vec: np.ndarray,
    pos_vec: np.ndarray,
    index: EmbeddingIndex,
    m: int = 100,
    n: int = 10,
) -> RetrievalResult:
    """Shortlist the m images most aligned with the counter concept, then keep
    the n shortlist entries least aligned with the target concept."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n > m:
        raise ValueError(f"n ({n}) must not exceed m ({m})")
    nq = _check_query(neg_vec, index, "neg_vec")
    pq = _check_query(pos_vec, index, "pos_vec")
    neg_sims = _similarities(index, nq)
    pos_sims = _similarities(index, pq)
    ids = np.array(index.ids)
    stage1 = np.lexsort((ids, -neg_sims))[: min(m, len(index.ids))]
    # Re-rank the shortlist by ascending target-concept similarity.
    stage2_order = np.lexsort((ids[stage1], pos_sims[stage1]))
    final = stage1[stage2_order][: min(n, stage1.shape[0])]
    return RetrievalResult(
        query="",
        stage=Stage.TWO_STAGE,
        ranked_ids=tuple(ids[final]),
        similarities=tuple(float(s) for s in pos_sims[final]),
        first_stage_similarities=tuple(float(s) for s in neg_sims[final]),
    )


def verify_batch(
    result: RetrievalResult,
    concept: str,
    mode: VerifyMode,
    client,
    max_in_flight: int = 8,
) -> RetrievalResult:
    """Populate per-item verification outcomes via the verifier client.

    Client failures surface as UNVERIFIED, never as PASS. Calls run with
    bounded parallelism and results are keyed by image id, so completion
    order cannot affect the output.
    """

    def check(image_ref: str) -> VerificationOutcome:
        if mode.kind == "require_present":
            got = clients.verify(image_ref, concept, client)
            return {
                clients.VerifyAnswer.PRESENT: VerificationOutcome.PASS,
                clients.VerifyAnswer.ABSENT: VerificationOutcome.FAIL,
                clients.VerifyAnswer.UNVERIFIED: VerificationOutcome.UNVERIFIED,
            }[got]
        if mode.kind == "require_absent":
            got = clients.verify(image_ref, concept, client)
            return {
                clients.VerifyAnswer.PRESENT: VerificationOutcome.FAIL,
                clients.VerifyAnswer.ABSENT: VerificationOutcome.PASS,
                clients.VerifyAnswer.UNVERIFIED: VerificationOutcome.UNVERIFIED,
            }[got]
        if mode.kind == "double":
            counter = clients.verify(image_ref, mode.counter_concept, client)
            target = clients.verify(image_ref, concept, client)
            if target == clients.VerifyAnswer.PRESENT:
                return VerificationOutcome.FAIL
            if counter == clients.VerifyAnswer.ABSENT:
                return VerificationOutcome.FAIL
            if (
                counter == clients.VerifyAnswer.PRESENT
                and target == clients.VerifyAnswer.ABSENT
            ):
                return VerificationOutcome.PASS
            return VerificationOutcome.UNVERIFIED
        raise ValueError(f"unknown verify mode {mode.kind!r}")

    if max_in_flight < 1:
        raise ValueError("max_in_flight must be >= 1")
    outcomes: dict[str, VerificationOutcome]
    if max_in_flight == 1 or len(result.ranked_ids) <= 1:
        outcomes = {ref: check(ref) for ref in result.ranked_ids}
    else:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            done = pool.map(check, result.ranked_ids)
            outcomes = dict(zip(result.ranked_ids, done))
    return replace(
        result, verification=tuple(outcomes[ref] for ref in result.ranked_ids)
    )


def write_retrieval_csv(
    result: RetrievalResult, path: str | Path, header_comment: str | None = None
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["rank", "id", "similarity", "verification"])
        for rank, ref in enumerate(result.ranked_ids, 1):
            outcome = (
                result.verification[rank - 1].value if result.verification else ""
            )
            writer.writerow([rank, ref, repr(result.similarities[rank - 1]), outcome])


# --- coverage --------------------------------------------------------------


class CoverageLevel(str, Enum):
    HIGH = "high"
    LOW = "low"


@dataclass(frozen=True)
class RequestedCounts:
    """Retrieval targets for the measured dataset."""

    n_positives: int
    per_counter: Mapping[str, int]


@dataclass(frozen=True)
class CounterCoverage:
    requested: int
    verified: int


@dataclass(frozen=True)
class CoverageReport:
    """How much verified measured data exists for a concept.

    ``neg_pair_coverage_ratio`` is the fraction of counter concepts with at
    least one verified measured negative. Unverifiable items never count as
    verified, so coverage understates rather than overstates evidence.
    """

    concept: str
    n_pos_requested: int
    n_pos_verified: int
    per_counter: dict[str, CounterCoverage]
    pos_coverage_ratio: float
    neg_pair_coverage_ratio: float
    coverage_level: CoverageLevel
    tau_pos: float
    tau_neg: float
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "concept": self.concept,
            "n_pos_requested": self.n_pos_requested,
            "n_pos_verified": self.n_pos_verified,
            "per_counter": {
                cc: {"requested": c.requested, "verified": c.verified}
                for cc, c in sorted(self.per_counter.items())
            },
            "pos_coverage_ratio": self.pos_coverage_ratio,
            "neg_pair_coverage_ratio": self.neg_pair_coverage_ratio,
            "coverage_level": self.coverage_level.value,
            "tau_pos": self.tau_pos,
            "tau_neg": self.tau_neg,
            "flags": list(self.flags),
        }


def coverage_report(
    concept: str,
    manifest: StimulusManifest,
    requested: RequestedCounts,
    tau_pos: float = 0.5,
    tau_neg: float = 0.5,
) -> CoverageReport:
    """Compare verified measured-data holdings against the requested counts.

    Verified means the appropriate concept check passed: ``verified_present``
    for positives, ``verified_absent`` (target absent, i.e. the double check)
    for semantic negatives. Only measured-source images count.
    """
    measured = [img for img in manifest.images if img.source == Source.RETRIEVED_MEASURED]
    n_pos_verified = sum(
        1 for img in measured if img.role == Role.POSITIVE and img.verified_present is True
    )
    per_counter: dict[str, CounterCoverage] = {}
    for cc, req in sorted(requested.per_counter.items()):
        verified = sum(
            1
            for img in measured
            if img.role == Role.SEMANTIC_NEGATIVE
            and img.counter_concept == cc
            and img.verified_absent is True
        )
        per_counter[cc] = CounterCoverage(requested=req, verified=verified)

    flags: list[str] = []
    if requested.n_positives > 0:
        pos_ratio = n_pos_verified / requested.n_positives
    else:
        pos_ratio = 0.0
        flags.append("zero_requested_positives")
    if per_counter:
        populated = sum(1 for c in per_counter.values() if c.verified >= 1)
        neg_ratio = populated / len(per_counter)
    else:
        neg_ratio = 0.0
        flags.append("no_counter_concepts_requested")

    level = (
        CoverageLevel.HIGH
        if pos_ratio >= tau_pos and neg_ratio >= tau_neg
        else CoverageLevel.LOW
    )
    return CoverageReport(
        concept=concept,
        n_pos_requested=requested.n_positives,
        n_pos_verified=n_pos_verified,
        per_counter=per_counter,
        pos_coverage_ratio=pos_ratio,
        neg_pair_coverage_ratio=neg_ratio,
        coverage_level=level,
        tau_pos=tau_pos,
        tau_neg=tau_neg,
        flags=tuple(flags),
    )
