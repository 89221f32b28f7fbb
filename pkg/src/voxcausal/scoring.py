"""Voxel- and region-level concept scores.

Scores compare each voxel's response to positive stimuli against its response
to the most confusable alternatives:

* positive score: mean activation over positive images.
* semantic-negative score: positive score minus the mean activation over the
  hardest k semantic negatives (the k negatives that activate the voxel most).
* counterfactual score: mean over edit parents of (parent activation minus
  the single hardest edit of that parent).
* causal score: mean of the semantic-negative and counterfactual scores.

All reductions run in float64 over rows ordered by image id, so results are
invariant to image/voxel permutations of the input matrix. Hardest-set
selection breaks activation ties by ascending image id.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .kernels import grouped_max_gap, topk_col_mean
from .matrixio import Provenance, ResponseMatrix

DEFAULT_HARD_NEGATIVES = 10

# Ranking-signal names: max-activation on generated / measured-retrieved /
# pool-retrieved / filtered-pool positives, semantic-negative causality per
# source, and counterfactual-edit causality on generated data.
COMPONENT_NAMES = ("MAG", "MAM", "MAL", "MALF", "CSG", "CSM", "CSL", "CEG")

# Default combination used for ranking when no explicit weights are given.
DEFAULT_COMBINATION = ("CEG", "CSG", "CSL", "MALF", "CSM")


def _canonical_ids(ids: Iterable[str], label: str) -> list[str]:
    out = sorted(set(ids))
    if not out:
        raise ValueError(f"no {label}")
    return out


def _rows64(m: ResponseMatrix, ids: list[str]) -> np.ndarray:
    return m.values[m.row_index(ids), :].astype(np.float64)


def positive_score(m: ResponseMatrix, positives: Iterable[str]) -> np.ndarray:
    """Mean activation per voxel over the positive image set."""
    ids = _canonical_ids(positives, "positives")
    return _rows64(m, ids).mean(axis=0)


def baseline_max_activation(m: ResponseMatrix, positives: Iterable[str]) -> np.ndarray:
    """Activation-only ranking baseline: identical to :func:`positive_score`."""
    return positive_score(m, positives)


def semantic_negative_score(
    m: ResponseMatrix,
    positives: Iterable[str],
    negatives: Iterable[str],
    k: int = DEFAULT_HARD_NEGATIVES,
) -> np.ndarray:
    """Positive score minus the per-voxel mean of the hardest negatives.

    Each voxel's hardest set is its ``min(k, n_negatives)`` highest-activation
    negatives. Positives and negatives must be disjoint.
    """
    pos_ids = _canonical_ids(positives, "positives")
    neg_ids = _canonical_ids(negatives, "semantic negatives")
    overlap = set(pos_ids) & set(neg_ids)
    if overlap:
        raise ValueError(f"positives and negatives overlap: {sorted(overlap)[:3]}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    neg_vals = _rows64(m, neg_ids)
    k_eff = min(k, len(neg_ids))
    hardest_mean = topk_col_mean(neg_vals, k_eff)
    return _rows64(m, pos_ids).mean(axis=0) - hardest_mean


def hardest_negative_sets(
    m: ResponseMatrix, negatives: Iterable[str], k: int = DEFAULT_HARD_NEGATIVES
) -> list[list[str]]:
    """Per-voxel hardest-negative image ids, activation desc with id-asc ties."""
    neg_ids = _canonical_ids(negatives, "semantic negatives")
    neg_vals = _rows64(m, neg_ids)
    k_eff = min(k, len(neg_ids))
    # Rows are id-ascending, so a stable sort on descending activation breaks
    # ties toward the smaller id.
    order = np.argsort(-neg_vals, axis=0, kind="stable")[:k_eff, :]
    return [[neg_ids[r] for r in order[:, c]] for c in range(m.n_voxels)]


def counterfactual_score(
    m: ResponseMatrix, pairs: Mapping[str, Iterable[str]]
) -> np.ndarray:
    """Mean over edit parents of (parent activation - hardest edit activation).

    ``pairs`` maps each positive image id to its counterfactual edit ids.
    Parents with no edits are excluded from the mean (see
    :func:`count_edit_pairs` for the bookkeeping).
    """
    parents = sorted(pid for pid, edits in pairs.items() if list(edits))
    if not parents:
        raise ValueError("no counterfactual pairs")
    edit_ids: list[str] = []
    offsets = [0]
    for pid in parents:
        block = sorted(set(pairs[pid]))
        edit_ids.extend(block)
        offsets.append(len(edit_ids))
    pos_vals = _rows64(m, parents)
    edit_vals = _rows64(m, edit_ids)
    return grouped_max_gap(pos_vals, edit_vals, np.array(offsets, dtype=np.int64))


def count_edit_pairs(pairs: Mapping[str, Iterable[str]]) -> tuple[int, int]:
    """(parents with >= 1 edit, parents excluded for having none)."""
    used = sum(1 for edits in pairs.values() if list(edits))
    return used, len(pairs) - used


def causal_score(s_neg: np.ndarray, s_edit: np.ndarray) -> np.ndarray:
    """Elementwise mean of the semantic-negative and counterfactual scores."""
    a = np.asarray(s_neg, dtype=np.float64)
    b = np.asarray(s_edit, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"score length mismatch: {a.shape} vs {b.shape}")
    return (a + b) / 2.0


def combined_ranking_score(
    components: Mapping[str, np.ndarray],
    weights: Mapping[str, float] | None = None,
    standardize: bool = False,
) -> np.ndarray:
    """Weighted sum of ranking components (weight 1.0 where unspecified).

    ``standardize`` z-scores each component across voxels before weighting;
    the default is the raw sum.
    """
    if not components:
        raise ValueError("no components to combine")
    if weights:
        unknown = set(weights) - set(components)
        if unknown:
            raise ValueError(f"unknown component name(s) in weights: {sorted(unknown)}")
    names = sorted(components)
    length = np.asarray(components[names[0]]).shape[0]
    out = np.zeros(length, dtype=np.float64)
    for name in names:
        vec = np.asarray(components[name], dtype=np.float64)
        if vec.shape != (length,):
            raise ValueError(f"component {name} has shape {vec.shape}, expected ({length},)")
        if standardize:
            std = vec.std()
            vec = (vec - vec.mean()) / std if std > 0 else vec - vec.mean()
        w = 1.0 if weights is None else float(weights.get(name, 1.0))
        out += w * vec
    return out


@dataclass
class ScoreCounts:
    n_positives: int = 0
    n_negatives_used: int = 0
    n_edit_pairs_used: int = 0
    n_edit_pairs_excluded: int = 0


@dataclass
class VoxelScoreTable:
    """Per-voxel scores for one concept on one data source.

    ``s_neg``/``s_edit`` are ``None`` when that stimulus set was unavailable;
    the causal score then falls back to the available one and
    ``partial_causal`` is set.
    """

    voxel_ids: list[str]
    s_pos: np.ndarray
    s_neg: np.ndarray | None = None
    s_edit: np.ndarray | None = None
    s_causal: np.ndarray | None = None
    components: dict[str, np.ndarray] = field(default_factory=dict)
    counts: ScoreCounts = field(default_factory=ScoreCounts)
    partial_causal: bool = False

    def named_scores(self) -> dict[str, np.ndarray]:
        """All exportable score vectors keyed by name (base scores first)."""
        out: dict[str, np.ndarray] = {"s_pos": self.s_pos}
        for name, vec in (
            ("s_neg", self.s_neg),
            ("s_edit", self.s_edit),
            ("s_causal", self.s_causal),
        ):
            if vec is not None:
                out[name] = vec
        for name in sorted(self.components):
            out[name] = self.components[name]
        return out

    def score(self, name: str) -> np.ndarray:
        scores = self.named_scores()
        if name not in scores:
            raise ValueError(f"unknown score name {name!r}; have {sorted(scores)}")
        return scores[name]


def score_table(
    m: ResponseMatrix,
    positives: Iterable[str],
    negatives: Iterable[str] | None = None,
    pairs: Mapping[str, Iterable[str]] | None = None,
    k: int = DEFAULT_HARD_NEGATIVES,
    components: Mapping[str, np.ndarray] | None = None,
) -> VoxelScoreTable:
    """Assemble the per-voxel score table from whichever stimulus sets exist."""
    pos_ids = _canonical_ids(positives, "positives")
    counts = ScoreCounts(n_positives=len(pos_ids))
    s_pos = positive_score(m, pos_ids)
    s_neg = None
    if negatives is not None:
        neg_ids = _canonical_ids(negatives, "semantic negatives")
        s_neg = semantic_negative_score(m, pos_ids, neg_ids, k=k)
        counts.n_negatives_used = min(k, len(neg_ids))
    s_edit = None
    if pairs is not None and any(list(e) for e in pairs.values()):
        s_edit = counterfactual_score(m, pairs)
        counts.n_edit_pairs_used, counts.n_edit_pairs_excluded = count_edit_pairs(pairs)
    if s_neg is not None and s_edit is not None:
        s_causal = causal_score(s_neg, s_edit)
        partial = False
    elif s_neg is not None or s_edit is not None:
        s_causal = np.array(s_neg if s_neg is not None else s_edit, copy=True)
        partial = True
    else:
        s_causal = None
        partial = False
    return VoxelScoreTable(
        voxel_ids=list(m.voxel_ids),
        s_pos=s_pos,
        s_neg=s_neg,
        s_edit=s_edit,
        s_causal=s_causal,
        components=dict(components) if components else {},
        counts=counts,
        partial_causal=partial,
    )


@dataclass(frozen=True)
class RegionScoreSet:
    """Scores of a voxel set evaluated on its mean signal.

    The hardest-negative and hardest-edit selections are taken on the region
    mean signal, not averaged from per-voxel scores.
    """

    s_pos: float
    s_neg: float | None = None
    s_edit: float | None = None
    s_causal: float | None = None
    partial_causal: bool = False

    def as_dict(self) -> dict:
        return {
            "s_pos": self.s_pos,
            "s_neg": self.s_neg,
            "s_edit": self.s_edit,
            "s_causal": self.s_causal,
            "partial_causal": self.partial_causal,
        }


def region_activation(m: ResponseMatrix, region_voxels: Iterable[str]) -> np.ndarray:
    """Per-image mean activation over the region's voxels (float64)."""
    ids = _canonical_ids(region_voxels, "region voxels")
    cols = m.column_index(ids)
    return m.values[:, cols].astype(np.float64).mean(axis=1)


def region_scores(
    m: ResponseMatrix,
    positives: Iterable[str],
    region_voxels: Iterable[str],
    negatives: Iterable[str] | None = None,
    pairs: Mapping[str, Iterable[str]] | None = None,
    k: int = DEFAULT_HARD_NEGATIVES,
) -> RegionScoreSet:
    """Score the region-mean signal with the same definitions as single voxels."""
    ids = _canonical_ids(region_voxels, "region voxels")
    missing = set(ids) - set(m.voxel_ids)
    if missing:
        raise ValueError(f"region voxels missing from matrix: {sorted(missing)[:3]}")
    a_region = region_activation(m, ids)
    pseudo = _SingleSignal(m.image_ids, a_region)
    s_pos = float(positive_score(pseudo, positives)[0])
    s_neg = None
    if negatives is not None:
        s_neg = float(semantic_negative_score(pseudo, positives, negatives, k=k)[0])
    s_edit = None
    if pairs is not None and any(list(e) for e in pairs.values()):
        s_edit = float(counterfactual_score(pseudo, pairs)[0])
    if s_neg is not None and s_edit is not None:
        s_causal = (s_neg + s_edit) / 2.0
        partial = False
    elif s_neg is not None or s_edit is not None:
        s_causal = s_neg if s_neg is not None else s_edit
        partial = True
    else:
        s_causal = None
        partial = False
    return RegionScoreSet(
        s_pos=s_pos, s_neg=s_neg, s_edit=s_edit, s_causal=s_causal, partial_causal=partial
    )


class _SingleSignal:
    """Adapter presenting a per-image float64 signal as a one-voxel matrix."""

    def __init__(self, image_ids: list[str], signal: np.ndarray):
        self.image_ids = list(image_ids)
        self.voxel_ids = ["__region__"]
        self.values = np.asarray(signal, dtype=np.float64).reshape(-1, 1)
        self.n_voxels = 1

    def row_index(self, image_ids) -> np.ndarray:
        lookup = {im: i for i, im in enumerate(self.image_ids)}
        try:
            return np.array([lookup[i] for i in image_ids], dtype=np.intp)
        except KeyError as exc:
            raise KeyError(f"image id {exc.args[0]!r} not in matrix") from None


# --- export ----------------------------------------------------------------


def write_score_table_csv(
    table: VoxelScoreTable, path: str | Path, header_comment: str | None = None
) -> None:
    """CSV export: one row per voxel, one column per available score."""
    scores = table.named_scores()
    names = list(scores)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["voxel_id", *names])
        for i, vid in enumerate(table.voxel_ids):
            writer.writerow([vid, *(repr(float(scores[n][i])) for n in names)])


def read_score_table_csv(path: str | Path) -> VoxelScoreTable:
    """Read a score-table CSV back (comment lines starting with # are skipped)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    if not rows:
        raise ValueError(f"empty score table {path}")
    header = rows[0]
    if not header or header[0] != "voxel_id":
        raise ValueError(f"{path} is not a score-table CSV")
    names = header[1:]
    voxel_ids = [r[0] for r in rows[1:]]
    columns = {
        name: np.array([float(r[1 + j]) for r in rows[1:]], dtype=np.float64)
        for j, name in enumerate(names)
    }
    return VoxelScoreTable(
        voxel_ids=voxel_ids,
        s_pos=columns.pop("s_pos"),
        s_neg=columns.pop("s_neg", None),
        s_edit=columns.pop("s_edit", None),
        s_causal=columns.pop("s_causal", None),
        components=columns,
    )


def score_table_to_matrix(table: VoxelScoreTable) -> ResponseMatrix:
    """Pack the table into the binary matrix container, one row per score."""
    scores = table.named_scores()
    return ResponseMatrix(
        image_ids=list(scores),
        voxel_ids=list(table.voxel_ids),
        values=np.stack([scores[n] for n in scores]).astype(np.float32),
        provenance=Provenance.PREDICTED,
    )


def write_score_map_csv(
    table: VoxelScoreTable,
    which: str,
    path: str | Path,
    header_comment: str | None = None,
) -> None:
    """CSV of (voxel_id, score) for one named score, sorted by voxel id."""
    vec = table.score(which)
    order = sorted(range(len(table.voxel_ids)), key=lambda i: table.voxel_ids[i])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["voxel_id", "score"])
        for i in order:
            writer.writerow([table.voxel_ids[i], repr(float(vec[i]))])


def read_score_map_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    if not rows or rows[0] != ["voxel_id", "score"]:
        raise ValueError(f"{path} is not a score-map CSV")
    ids = [r[0] for r in rows[1:]]
    return ids, np.array([float(r[1]) for r in rows[1:]], dtype=np.float64)
