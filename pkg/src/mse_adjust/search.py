"""Pruned candidate spaces and exact finite-sample comparisons of sets.

The candidate space starts from the power set of the unflagged confounding
and precision variables, drops every set containing a member that the rest
of the set universally separates from the outcome, and finally drops valid
sets strictly larger than the asymptotically optimal one.  The minimum
population MSE over the survivors provably equals the minimum over the full
power set (the soundness property test exercises this).
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from math import lcm

from .classify import VariableClassification
from .errors import EnumerationLimitError, GraphError, SampleSizeError
from .graph import (
    AdjustmentSet,
    CausalDag,
    exists_open_given_some_conditioning,
    is_valid_adjustment_set,
    optimal_adjustment_set,
)
from .scm import (
    LinearGaussianScm,
    PopulationSummary,
    conditional_cov,
    implied_covariance,
    population_summary,
)

logger = logging.getLogger(__name__)

POWER_SET_VARIABLE_LIMIT = 20

RULE_SUBOPTIMAL_PRECISION = "thm2-suboptimal-precision"
RULE_SUBOPTIMAL_CONFOUNDING = "thm2-suboptimal-confounding"
RULE_IRRELEVANT = "thm2-irrelevant"
RULE_FORBIDDEN_COMBINATION = "thm3-forbidden-combination"
RULE_SUBOPTIMAL_VALID = "thm4-suboptimal-valid"


@dataclass(frozen=True)
class PruningEntry:
    """One exclusion: a variable or a whole set, the rule, and the nodes
    justifying it (witness, separated member, or the dominating set)."""

    members: tuple[int, ...]
    rule: str
    justification: tuple[int, ...] = ()


@dataclass(frozen=True)
class CandidateSpace:
    graph: CausalDag
    candidates: tuple[AdjustmentSet, ...]
    pruning_log: tuple[PruningEntry, ...]

    @property
    def initial_count(self) -> int:
        return 2 ** len(self.graph.covariates)

    def __contains__(self, item: AdjustmentSet) -> bool:
        return item in self.candidates


def build_candidate_space(
    g: CausalDag,
    cls: VariableClassification,
    max_retained: int = POWER_SET_VARIABLE_LIMIT,
    force: bool = False,
) -> CandidateSpace:
    """Enumerate the candidate adjustment sets that survive all three screens."""
    log: list[PruningEntry] = []
    for v in cls.irrelevant:
        log.append(PruningEntry((v,), RULE_IRRELEVANT))
    for v, witness in cls.suboptimal_precision:
        log.append(PruningEntry((v,), RULE_SUBOPTIMAL_PRECISION, (witness,)))
    for v, witness in cls.suboptimal_confounding:
        log.append(PruningEntry((v,), RULE_SUBOPTIMAL_CONFOUNDING, (witness,)))

    flagged = cls.suboptimal_precision_vars | cls.suboptimal_confounding_vars
    retained = sorted(
        (set(cls.precision) | set(cls.extended_confounding)) - flagged
    )
    if len(retained) > max_retained:
        raise EnumerationLimitError(
            f"refusing to enumerate 2^{len(retained)} candidate sets "
            f"({len(retained)} retained covariates, limit {max_retained})"
        )

    gp = g.without_treatment_edge
    survivors: list[AdjustmentSet] = []
    for r in range(len(retained) + 1):
        for combo in itertools.combinations(retained, r):
            candidate = AdjustmentSet(combo)
            separated = None
            for member in combo:
                rest = tuple(v for v in combo if v != member)
                if not exists_open_given_some_conditioning(
                    gp, member, g.outcome, forced_in=rest, force=force
                ):
                    separated = member
                    break
            if separated is None:
                survivors.append(candidate)
            else:
                log.append(
                    PruningEntry(combo, RULE_FORBIDDEN_COMBINATION, (separated,))
                )

    optimal = optimal_adjustment_set(g)
    kept: list[AdjustmentSet] = []
    for candidate in survivors:
        if (
            candidate != optimal
            and len(candidate) > len(optimal)
            and is_valid_adjustment_set(g, candidate)
        ):
            log.append(
                PruningEntry(
                    candidate.members, RULE_SUBOPTIMAL_VALID, optimal.members
                )
            )
        else:
            kept.append(candidate)

    if optimal not in kept:  # unreachable: the optimal set survives every screen
        kept.append(optimal)
    kept.sort(key=lambda s: s.members)
    return CandidateSpace(g, tuple(kept), tuple(log))


def _summary_key(s: PopulationSummary) -> tuple:
    return (s.mse, len(s.adjustment), s.adjustment.members)


def mse_optimal_set(
    m: LinearGaussianScm, space: CandidateSpace, n: int
) -> tuple[AdjustmentSet, PopulationSummary]:
    """The candidate with minimal exact population MSE at sample size ``n``.

    Candidates too large to fit at ``n`` are skipped (their finite-sample
    variance is undefined there); ties break toward the smaller, then
    lexicographically earlier, set.
    """
    best: PopulationSummary | None = None
    for candidate in space.candidates:
        if n <= len(candidate) + 3:
            logger.debug(
                "skipping %s at n=%d: set too large", candidate.members, n
            )
            continue
        summary = population_summary(m, candidate, n)
        if best is None or _summary_key(summary) < _summary_key(best):
            best = summary
    if best is None:
        raise SampleSizeError(f"no candidate fits at sample size {n}")
    return best.adjustment, best


def mse_optimal_argmin(
    m: LinearGaussianScm, space: CandidateSpace, n: int
) -> tuple[AdjustmentSet, ...]:
    """Every candidate attaining the minimal population MSE at ``n``."""
    _, best = mse_optimal_set(m, space, n)
    out = []
    for candidate in space.candidates:
        if n <= len(candidate) + 3:
            continue
        if population_summary(m, candidate, n).mse == best.mse:
            out.append(candidate)
    return tuple(out)


@dataclass(frozen=True)
class CriterionResult:
    """Outcome of comparing two sets at a sample size.

    ``holds`` is true when the first set has strictly lower exact MSE.
    ``branch`` records whether the squared-bias precondition held
    ("sample-size") or the comparison fell back to direct MSE ("direct").
    ``bound`` is the sample-size threshold when the main branch ran.
    """

    holds: bool
    branch: str
    mse_k: float
    mse_l: float
    bound: float | None = None


def sample_size_criterion(
    m: LinearGaussianScm,
    k: AdjustmentSet,
    l: AdjustmentSet,
    n: int,
) -> CriterionResult:
    """Does ``k`` give lower expected MSE than ``l`` at sample size ``n``?

    When the squared bias of ``k`` exceeds that of ``l``, the answer is
    equivalent to ``n`` lying below an explicit threshold assembled from the
    two asymptotic variances and squared biases; both routes are evaluated
    and must agree.  Bias ties fall back to the direct comparison and are
    flagged as such.
    """
    k = AdjustmentSet.of(k)
    l = AdjustmentSet.of(l)
    if n - 3 <= len(k) or n - 3 <= len(l):
        raise SampleSizeError(
            f"criterion needs |set| < n - 3; got sizes {len(k)}, {len(l)} at n={n}"
        )
    sk = population_summary(m, k, n)
    sl = population_summary(m, l, n)
    direct = sk.mse < sl.mse
    b2k = sk.bias * sk.bias
    b2l = sl.bias * sl.bias
    if b2k <= b2l:
        return CriterionResult(direct, "direct", sk.mse, sl.mse)
    ratio = (n - len(l) - 3) / (n - len(k) - 3)
    bound = (sl.avar - ratio * sk.avar) / (b2k - b2l) + len(l) + 3
    holds = n < bound
    assert holds == direct, (
        "sample-size threshold and direct MSE comparison disagree: "
        f"n={n}, bound={bound}, mse_k={sk.mse}, mse_l={sl.mse}"
    )
    return CriterionResult(holds, "sample-size", sk.mse, sl.mse, bound)


def crossover_n(
    m: LinearGaussianScm,
    k: AdjustmentSet,
    l: AdjustmentSet,
    horizon: int = 10**6,
) -> int | None:
    """Smallest n at which the lower-MSE set flips relative to n - 1.

    Scans upward from the first n where either set fits, comparing exact
    MSEs in integer arithmetic (the float bias and variance values are
    promoted to exact rationals), so the answer is immune to cancellation at
    large n.  Returns None when the winner never changes up to ``horizon``.
    """
    k = AdjustmentSet.of(k)
    l = AdjustmentSet.of(l)
    if k == l:
        return None
    sk = population_summary(m, k)
    sl = population_summary(m, l)
    b2k = Fraction(sk.bias) ** 2
    b2l = Fraction(sl.bias) ** 2
    avk = Fraction(sk.avar)
    avl = Fraction(sl.avar)
    dk = len(k) + 3
    dl = len(l) + 3
    diff = b2k - b2l
    den = lcm(diff.denominator, avk.denominator, avl.denominator)
    ca = diff.numerator * (den // diff.denominator)
    ck = avk.numerator * (den // avk.denominator)
    cl = avl.numerator * (den // avl.denominator)
    k_first = (len(k), k.members) <= (len(l), l.members)

    def winner(n: int) -> int | None:
        has_k = n > dk
        has_l = n > dl
        if not has_k and not has_l:
            return None
        if has_k and not has_l:
            return 0
        if has_l and not has_k:
            return 1
        # sign of mse_k - mse_l after clearing the positive denominators
        f = ca * (n - dk) * (n - dl) + ck * (n - dl) - cl * (n - dk)
        if f < 0:
            return 0
        if f > 0:
            return 1
        return 0 if k_first else 1

    previous: int | None = None
    for n in range(min(dk, dl) + 1, horizon + 1):
        w = winner(n)
        if previous is not None and w != previous:
            return n
        previous = w
    return None


def precision_inclusion(
    m: LinearGaussianScm,
    k: AdjustmentSet,
    p: AdjustmentSet,
    n: int,
    cls: VariableClassification | None = None,
) -> bool:
    """Whether adding the precision variables ``p`` to ``k`` lowers exact MSE.

    Holds iff |p| / (n - |k| - 3) < 1 - s_yy.akp / s_yy.ak: the relative
    outcome-variance reduction must beat the degrees-of-freedom cost.  The
    result is asserted against the direct MSE comparison.
    """
    from .classify import classify  # local import to avoid a cycle

    k = AdjustmentSet.of(k)
    p = AdjustmentSet.of(p)
    if set(k) & set(p):
        raise GraphError("precision additions must be disjoint from the base set")
    cls = cls or classify(m.dag)
    stray = set(p) - set(cls.precision)
    if stray:
        names = ", ".join(m.dag.label(v) for v in sorted(stray))
        raise GraphError(f"not precision variables: {names}")
    if n - 3 <= len(k) + len(p):
        raise SampleSizeError(f"needs |k| + |p| < n - 3, got {len(k) + len(p)} at n={n}")
    sigma = implied_covariance(m)
    a, y = m.dag.treatment, m.dag.outcome
    syy_ak = conditional_cov(sigma, [y], [y], [a, *k])[0, 0]
    syy_akp = conditional_cov(sigma, [y], [y], [a, *k, *p])[0, 0]
    holds = len(p) / (n - len(k) - 3) < 1.0 - syy_akp / syy_ak
    direct = population_summary(m, k.union(p), n).mse < population_summary(m, k, n).mse
    assert holds == direct, (
        "precision-inclusion condition and direct MSE comparison disagree: "
        f"k={k.members}, p={p.members}, n={n}"
    )
    return holds
