"""Final verdict: combine causal evidence, significance, and coverage.

The decision is a pure function of two axes. Causal evidence (strong/weak)
summarizes whether the discovered region responds to the concept rather than
to correlated alternatives; coverage (high/low) summarizes whether the
measured dataset can meaningfully confirm that. The four quadrants:

    strong + high coverage -> high-confidence discovery
    weak   + high coverage -> rejected
    strong + low  coverage -> promising, needs follow-up experiments
    weak   + low  coverage -> inconclusive
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .retrieval import CoverageLevel, CoverageReport
from .scoring import RegionScoreSet
from .stats import GateDecision, SignificanceResult
from .stimuli import GenerationPlan, Role


class CausalEvidence(str, Enum):
    STRONG = "strong"
    WEAK = "weak"


class Decision(str, Enum):
    HIGH_CONFIDENCE_DISCOVERY = "high_confidence_discovery"
    REJECTED = "rejected"
    PROMISING_NEEDS_FOLLOWUP = "promising_needs_followup"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class EvidenceThresholds:
    """Cutoffs for calling causal evidence strong; echoed into every report."""

    gen_causal_min: float = 0.0
    meas_causal_min: float = 0.0

    def as_dict(self) -> dict:
        return {
            "gen_causal_min": self.gen_causal_min,
            "meas_causal_min": self.meas_causal_min,
        }


def assess_causal_evidence(
    gen_eval: RegionScoreSet,
    meas_eval: RegionScoreSet | None,
    gate: GateDecision,
    coverage_level: CoverageLevel,
    thresholds: EvidenceThresholds = EvidenceThresholds(),
) -> CausalEvidence:
    """Strong iff the generated-eval causal score clears its threshold, the
    significance gate passes, and the measured-eval causal score agrees
    (waived when coverage is low, where measured evaluation is uninformative).
    """
    if gen_eval.s_causal is None:
        raise ValueError("generated-eval causal score is missing")
    if gen_eval.s_causal <= thresholds.gen_causal_min:
        return CausalEvidence.WEAK
    if not gate.passed:
        return CausalEvidence.WEAK
    if coverage_level == CoverageLevel.LOW:
        return CausalEvidence.STRONG
    if meas_eval is None or meas_eval.s_causal is None:
        return CausalEvidence.WEAK
    if meas_eval.s_causal > thresholds.meas_causal_min:
        return CausalEvidence.STRONG
    return CausalEvidence.WEAK


_DECISION_TABLE = {
    (CausalEvidence.STRONG, CoverageLevel.HIGH): Decision.HIGH_CONFIDENCE_DISCOVERY,
    (CausalEvidence.WEAK, CoverageLevel.HIGH): Decision.REJECTED,
    (CausalEvidence.STRONG, CoverageLevel.LOW): Decision.PROMISING_NEEDS_FOLLOWUP,
    (CausalEvidence.WEAK, CoverageLevel.LOW): Decision.INCONCLUSIVE,
}


def decide(causal_evidence: CausalEvidence, coverage_level: CoverageLevel) -> Decision:
    """Map the (evidence, coverage) quadrant to the final decision."""
    return _DECISION_TABLE[(CausalEvidence(causal_evidence), CoverageLevel(coverage_level))]


@dataclass(frozen=True)
class FollowUpProposal:
    role: Role
    concept: str  # target concept or counter concept, depending on role
    requested_count: int
    rationale: str


@dataclass(frozen=True)
class FollowUpPlan:
    concept: str
    missing_positive_count: int
    missing_negative_pairs: tuple[tuple[str, int], ...]
    proposed_stimuli: tuple[FollowUpProposal, ...]


def propose_followup(
    coverage: CoverageReport,
    plan: GenerationPlan,
    max_proposals: int | None = None,
) -> FollowUpPlan:
    """Turn coverage deficits into follow-up stimulus proposals.

    Proposals only reference deficits present in the coverage report; full
    coverage yields an empty plan.
    """
    if coverage.concept != plan.concept:
        raise ValueError(
            f"coverage is for {coverage.concept!r} but plan is for {plan.concept!r}"
        )
    missing_pos = max(0, coverage.n_pos_requested - coverage.n_pos_verified)
    missing_pairs = tuple(
        (cc, c.requested - c.verified)
        for cc, c in sorted(coverage.per_counter.items())
        if c.requested - c.verified > 0
    )
    proposals: list[FollowUpProposal] = []
    if missing_pos > 0:
        proposals.append(
            FollowUpProposal(
                role=Role.POSITIVE,
                concept=coverage.concept,
                requested_count=missing_pos,
                rationale=(
                    f"only {coverage.n_pos_verified} of {coverage.n_pos_requested} "
                    "requested measured positives were retrieved and verified"
                ),
            )
        )
    for cc, deficit in missing_pairs:
        proposals.append(
            FollowUpProposal(
                role=Role.SEMANTIC_NEGATIVE,
                concept=cc,
                requested_count=deficit,
                rationale=(
                    f"counter concept {cc!r} is short {deficit} verified measured "
                    "negative(s) for causal validation"
                ),
            )
        )
    if max_proposals is not None:
        proposals = proposals[:max_proposals]
    return FollowUpPlan(
        concept=coverage.concept,
        missing_positive_count=missing_pos,
        missing_negative_pairs=missing_pairs,
        proposed_stimuli=tuple(proposals),
    )


@dataclass(frozen=True)
class Verdict:
    """Final per-concept outcome with its supporting evidence."""

    concept: str
    decision: Decision
    causal_evidence: CausalEvidence
    coverage_level: CoverageLevel
    gen_eval: RegionScoreSet | None = None
    meas_eval: RegionScoreSet | None = None
    significance: tuple[SignificanceResult, ...] = ()
    gate: GateDecision | None = None
    coverage: CoverageReport | None = None
    followup: FollowUpPlan | None = None
    thresholds: EvidenceThresholds = field(default_factory=EvidenceThresholds)


def render_verdict(verdict: Verdict, config_hash: str | None = None) -> str:
    """Human-readable verdict report."""
    lines = []
    if config_hash:
        lines.append(f"# config_hash={config_hash}")
    lines.append(f"concept: {verdict.concept}")
    lines.append(f"decision: {verdict.decision.value}")
    lines.append(f"causal_evidence: {verdict.causal_evidence.value}")
    lines.append(f"coverage_level: {verdict.coverage_level.value}")
    lines.append(f"thresholds: {verdict.thresholds.as_dict()}")
    if verdict.gen_eval is not None:
        lines.append(f"generated_eval: {verdict.gen_eval.as_dict()}")
    if verdict.meas_eval is not None:
        lines.append(f"measured_eval: {verdict.meas_eval.as_dict()}")
    if verdict.gate is not None:
        lines.append(
            "significance_gate: passed=%s alpha=%s failing=[%s]"
            % (
                verdict.gate.passed,
                verdict.gate.alpha,
                ", ".join(c.value for c in verdict.gate.failing),
            )
        )
    for res in verdict.significance:
        lines.append(
            f"  p[{res.criterion.value}] = {res.p_value!r} "
            f"(target {res.target_score!r}, n_baselines {res.n_baselines}, "
            f"passed {res.passed})"
        )
    if verdict.coverage is not None:
        cov = verdict.coverage
        lines.append(
            f"coverage: pos {cov.n_pos_verified}/{cov.n_pos_requested} "
            f"(ratio {cov.pos_coverage_ratio!r}), "
            f"neg pairs ratio {cov.neg_pair_coverage_ratio!r}"
        )
    if verdict.followup is not None and verdict.followup.proposed_stimuli:
        lines.append("follow-up proposals:")
        for prop in verdict.followup.proposed_stimuli:
            lines.append(
                f"  - {prop.role.value}: {prop.concept!r} x{prop.requested_count} "
                f"({prop.rationale})"
            )
    return "\n".join(lines) + "\n"
