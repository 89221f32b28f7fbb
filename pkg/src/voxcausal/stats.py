"""Empirical significance testing of discovered regions.

Each discovered region is frozen (selected on the training split) and its
held-out score for the target concept is compared against the scores the same
region obtains for a set of baseline concepts. The one-sided empirical
p-value is

    p = (1 + #{baseline >= target}) / (1 + n_baselines)

so ties count against the target and p is never zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence


class Criterion(str, Enum):
    ACTIVATION_GEN = "activation_gen"
    ACTIVATION_MEAS = "activation_meas"
    CAUSAL_GEN = "causal_gen"
    CAUSAL_MEAS = "causal_meas"
    CAUSAL_EDITS = "causal_edits"


ALL_CRITERIA = tuple(Criterion)

# Criteria computable from generated stimuli alone.
GENERATED_CRITERIA = (
    Criterion.ACTIVATION_GEN,
    Criterion.CAUSAL_GEN,
    Criterion.CAUSAL_EDITS,
)

DEFAULT_ALPHA = 0.05


def empirical_p_value(target: float, baselines: Sequence[float]) -> float:
    """One-sided empirical p-value of ``target`` against ``baselines``."""
    n_ge = sum(1 for b in baselines if b >= target)
    return (1 + n_ge) / (1 + len(baselines))


@dataclass(frozen=True)
class SignificanceResult:
    criterion: Criterion
    target_score: float
    baseline_scores: tuple[float, ...]
    p_value: float
    passed: bool

    @property
    def n_baselines(self) -> int:
        return len(self.baseline_scores)


def significance_result(
    criterion: Criterion,
    target: float,
    baselines: Sequence[float],
    alpha: float = DEFAULT_ALPHA,
) -> SignificanceResult:
    p = empirical_p_value(target, baselines)
    return SignificanceResult(
        criterion=Criterion(criterion),
        target_score=float(target),
        baseline_scores=tuple(float(b) for b in baselines),
        p_value=p,
        passed=p <= alpha,
    )


@dataclass(frozen=True)
class GateDecision:
    passed: bool
    alpha: float
    required: tuple[Criterion, ...]
    failing: tuple[Criterion, ...]
    p_values: dict[Criterion, float]


def significance_gate(
    results: Iterable[SignificanceResult],
    alpha: float = DEFAULT_ALPHA,
    required: Iterable[Criterion] = ALL_CRITERIA,
) -> GateDecision:
    """Pass iff every required criterion has p <= alpha (inclusive).

    Raises ValueError if a required criterion is missing or appears more
    than once in ``results``.
    """
    required_set = tuple(dict.fromkeys(Criterion(c) for c in required))
    by_criterion: dict[Criterion, SignificanceResult] = {}
    for res in results:
        if res.criterion in by_criterion and res.criterion in required_set:
            raise ValueError(f"criterion {res.criterion.value} appears more than once")
        by_criterion.setdefault(res.criterion, res)
    missing = [c for c in required_set if c not in by_criterion]
    if missing:
        raise ValueError(
            f"criterion unavailable: {', '.join(c.value for c in missing)}"
        )
    failing = tuple(c for c in required_set if by_criterion[c].p_value > alpha)
    return GateDecision(
        passed=not failing,
        alpha=alpha,
        required=required_set,
        failing=failing,
        p_values={c: by_criterion[c].p_value for c in required_set},
    )


def write_significance_csv(
    concept: str,
    results: Iterable[SignificanceResult],
    path: str | Path,
    header_comment: str | None = None,
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["concept", "criterion", "target", "n_baselines", "p", "passed"])
        for res in results:
            writer.writerow(
                [
                    concept,
                    res.criterion.value,
                    repr(res.target_score),
                    res.n_baselines,
                    repr(res.p_value),
                    res.passed,
                ]
            )
