"""Candidate-region construction from voxel score tables."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .scoring import VoxelScoreTable


class RegionMode(str, Enum):
    POSITIVE_CAUSAL = "positive_causal"
    TOP_K = "top_k"


@dataclass
class Region:
    """Ordered voxel set representing one concept.

    ``voxel_ids`` are ordered by the selection score descending, ties broken
    by ascending voxel id. ``truncated`` marks a top-k request that exceeded
    the number of available voxels.
    """

    concept: str
    voxel_ids: list[str]
    mode: RegionMode
    selection_score_name: str
    selection_scores: list[float] = field(default_factory=list)
    k: int | None = None
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.voxel_ids)

    @property
    def empty(self) -> bool:
        return not self.voxel_ids


def _ordered(ids: list[str], scores: np.ndarray) -> list[int]:
    return sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))


def select_region_positive_causal(
    scores: VoxelScoreTable, concept: str = ""
) -> Region:
    """All voxels with a strictly positive causal score; may be empty."""
    if scores.s_causal is None:
        raise ValueError("score table has no s_causal")
    order = _ordered(scores.voxel_ids, scores.s_causal)
    picked = [i for i in order if scores.s_causal[i] > 0]
    return Region(
        concept=concept,
        voxel_ids=[scores.voxel_ids[i] for i in picked],
        mode=RegionMode.POSITIVE_CAUSAL,
        selection_score_name="s_causal",
        selection_scores=[float(scores.s_causal[i]) for i in picked],
    )


def select_region_top_k(
    scores: VoxelScoreTable, score_name: str, k: int, concept: str = ""
) -> Region:
    """Top-k voxels by the named score; returns all (flagged) if fewer exist."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    vec = scores.score(score_name)
    order = _ordered(scores.voxel_ids, vec)
    picked = order[:k]
    return Region(
        concept=concept,
        voxel_ids=[scores.voxel_ids[i] for i in picked],
        mode=RegionMode.TOP_K,
        selection_score_name=score_name,
        selection_scores=[float(vec[i]) for i in picked],
        k=k,
        truncated=len(order) < k,
    )


def write_region_csv(region: Region, path: str | Path, header_comment: str | None = None) -> None:
    """CSV export: (rank, voxel_id, score), rank starting at 1."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["rank", "voxel_id", "score"])
        for rank, (vid, score) in enumerate(zip(region.voxel_ids, region.selection_scores), 1):
            writer.writerow([rank, vid, repr(score)])


def read_region_csv(path: str | Path, concept: str = "") -> Region:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    if not rows or rows[0] != ["rank", "voxel_id", "score"]:
        raise ValueError(f"{path} is not a region CSV")
    return Region(
        concept=concept,
        voxel_ids=[r[1] for r in rows[1:]],
        mode=RegionMode.TOP_K,
        selection_score_name="unknown",
        selection_scores=[float(r[2]) for r in rows[1:]],
        k=len(rows) - 1,
    )
