"""Finite-sample estimation: OLS fits, plug-in variance, bootstrap bias,
and the select-and-estimate pipeline.

Every regression includes an intercept.  The plug-in variance estimate is
(RSS_y / (n - |K| - 1)) / RSS_a, with RSS_y from regressing the outcome on
[1, treatment, K] and RSS_a from regressing the treatment on [1, K].

Randomness is counter-based throughout: one stream per (seed, candidate),
derived by hashing, so adding or removing candidates never perturbs the
draws of the others.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np
import scipy.linalg

from . import _backend
from .classify import classify
from .errors import (
    BootstrapDegeneracyError,
    CollinearityError,
    GraphError,
    SampleSizeError,
)
from .graph import AdjustmentSet, CausalDag, optimal_adjustment_set
from .search import CandidateSpace, build_candidate_space

logger = logging.getLogger(__name__)

SVD_RANK_RTOL = 1e-10
BOOTSTRAP_REDRAW_CAP = 100

RULE_MSE_OPTIMAL = "mse-optimal"
RULE_MIN_VARIANCE = "min-variance"

_BOOT_STREAM_TAG = 0xB005


@dataclass(frozen=True, eq=False)
class Dataset:
    """An n x d sample whose columns follow the graph's node order."""

    dag: CausalDag
    values: np.ndarray

    def __post_init__(self) -> None:
        v = self.values
        if v.ndim != 2 or v.shape[1] != self.dag.node_count:
            raise GraphError(
                f"data must be n x {self.dag.node_count}, got shape {v.shape}"
            )
        if v.shape[0] < 1:
            raise GraphError("dataset needs at least one row")
        if not np.all(np.isfinite(v)):
            raise GraphError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def column(self, v: int) -> np.ndarray:
        return self.values[:, v]


@dataclass(frozen=True)
class FitResult:
    adjustment: AdjustmentSet
    tau_hat: float
    rss_a_given_k: float
    rss_y_given_ak: float
    var_hat: float
    bias_hat: float | None = None
    mse_hat: float | None = None


@dataclass(frozen=True)
class SelectionConfig:
    bootstrap: int = 1000
    seed: int = 0
    rule: str = RULE_MSE_OPTIMAL

    def __post_init__(self) -> None:
        if self.bootstrap < 1:
            raise GraphError("bootstrap resample count must be >= 1")
        if self.rule not in (RULE_MSE_OPTIMAL, RULE_MIN_VARIANCE):
            raise GraphError(f"unknown selection rule {self.rule!r}")


@dataclass(frozen=True)
class SelectionResult:
    chosen: AdjustmentSet
    tau_hat: float
    fit: FitResult
    per_candidate: tuple[FitResult, ...]
    skipped: tuple[AdjustmentSet, ...]


def _design_columns(d: Dataset, k: AdjustmentSet):
    a = np.ascontiguousarray(d.column(d.dag.treatment))
    y = np.ascontiguousarray(d.column(d.dag.outcome))
    cov = np.ascontiguousarray(d.values[:, list(k.members)])
    return cov, a, y


def _offending_columns(d: Dataset, k: AdjustmentSet) -> str:
    """Name the design columns past the numerical rank, via pivoted QR."""
    cov, a, _ = _design_columns(d, k)
    x = np.column_stack([np.ones(d.n), a, cov])
    names = ["intercept", d.dag.label(d.dag.treatment)] + [
        d.dag.label(v) for v in k.members
    ]
    _, r, piv = scipy.linalg.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    cut = SVD_RANK_RTOL * (diag.max() if diag.size else 1.0)
    dependent = [names[piv[i]] for i in range(len(diag)) if diag[i] <= cut]
    dependent += [names[p] for p in piv[len(diag):]]
    return ", ".join(dependent) if dependent else "unknown"


def ols_fit(d: Dataset, k: Iterable[int] = ()) -> FitResult:
    """Regress the outcome on [1, treatment, k]; also fit treatment on [1, k].

    Deterministic for identical input bytes.  Rank deficiency (smallest
    singular value below 1e-10 of the largest) raises a collinearity error
    naming the offending columns.
    """
    kset = AdjustmentSet.of(d.dag._check_covariates(k, "adjustment set"))
    n = d.n
    if n <= len(kset) + 2:
        raise SampleSizeError(
            f"need n > |k| + 2 to fit; got n={n} with |k|={len(kset)}"
        )
    cov, a, y = _design_columns(d, kset)
    x = np.column_stack([np.ones(n), a, cov])
    singular = np.linalg.svd(x, compute_uv=False)
    if singular[-1] < SVD_RANK_RTOL * singular[0]:
        raise CollinearityError(
            f"design matrix is rank deficient; dependent columns: "
            f"{_offending_columns(d, kset)}"
        )
    tau, rss_y, rss_a, ok = _backend.ols_tau_rss(cov, a, y)
    if not ok or rss_a <= 0.0:
        raise CollinearityError(
            f"treatment has no residual variation given {{{kset.render(d.dag)}}}"
        )
    var_hat = (rss_y / (n - len(kset) - 1)) / rss_a
    return FitResult(kset, float(tau), float(rss_a), float(rss_y), float(var_hat))


def estimate_variance(d: Dataset, k: Iterable[int] = ()) -> float:
    """Plug-in variance of the adjusted treatment coefficient."""
    return ols_fit(d, k).var_hat


def _bootstrap_stream(seed: int, k: AdjustmentSet) -> np.random.Generator:
    entropy = [int(seed), _BOOT_STREAM_TAG, len(k), *k.members]
    return np.random.Generator(np.random.Philox(seed=np.random.SeedSequence(entropy)))


def bootstrap_bias(
    d: Dataset,
    k: Iterable[int],
    o: Iterable[int],
    b: int = 1000,
    seed: int = 0,
) -> float:
    """Mean over b paired resamples of tau_hat(k) - tau_hat(o).

    Rows are drawn with replacement (size n); both sets are refit on the same
    resample so shared noise cancels.  Resamples failing the rank check are
    redrawn, up to a cap, and the redraw count is logged.
    """
    kset = AdjustmentSet.of(d.dag._check_covariates(k, "candidate set"))
    oset = AdjustmentSet.of(d.dag._check_covariates(o, "reference set"))
    if b < 1:
        raise GraphError("bootstrap resample count must be >= 1")
    n = d.n
    if n <= max(len(kset), len(oset)) + 2:
        raise SampleSizeError("sample too small to fit both sets")
    if kset == oset:
        return 0.0
    cov_k, a, y = _design_columns(d, kset)
    cov_o, _, _ = _design_columns(d, oset)
    rng = _bootstrap_stream(seed, kset)

    diffs = np.empty(b)
    filled = 0
    redraws = 0
    while filled < b:
        want = b - filled
        idx = rng.integers(0, n, size=(want, n), dtype=np.int64)
        counts = np.empty((want, n))
        for i in range(want):
            counts[i] = np.bincount(idx[i], minlength=n)
        tk, ok_k = _backend.boot_taus(cov_k, a, y, counts)
        to, ok_o = _backend.boot_taus(cov_o, a, y, counts)
        good = ok_k & ok_o
        taken = tk[good] - to[good]
        diffs[filled : filled + taken.size] = taken
        filled += taken.size
        bad = want - int(taken.size)
        if bad:
            redraws += bad
            if redraws > BOOTSTRAP_REDRAW_CAP:
                raise BootstrapDegeneracyError(
                    f"{redraws} degenerate resamples for {{{kset.render(d.dag)}}} "
                    f"(cap {BOOTSTRAP_REDRAW_CAP})"
                )
    if redraws:
        logger.warning(
            "redrew %d degenerate bootstrap resamples for {%s}",
            redraws,
            kset.render(d.dag),
        )
    return float(np.mean(diffs))


def select_and_estimate(
    d: Dataset,
    g: CausalDag,
    cfg: SelectionConfig = SelectionConfig(),
    space: CandidateSpace | None = None,
) -> SelectionResult:
    """Pick an adjustment set from the pruned space and estimate the effect.

    Default rule: start from the asymptotically optimal set; for every
    candidate whose variance estimate beats it, bootstrap the bias against
    that set and track the minimal bias^2 + variance.  The "min-variance"
    rule instead takes the smallest variance estimate outright (cheap, but
    bias-dominated at large n).  Candidates that fail to fit are skipped and
    logged.
    """
    if d.dag.labels != g.labels or d.dag.edges != g.edges:
        raise GraphError("dataset columns do not match the graph")
    if space is None:
        space = build_candidate_space(g, classify(g))
    optimal = optimal_adjustment_set(g)
    o_fit = ols_fit(d, optimal)

    fits: dict[AdjustmentSet, FitResult] = {optimal: o_fit}
    per_candidate: list[FitResult] = []
    skipped: list[AdjustmentSet] = []
    best = optimal
    best_score = o_fit.var_hat
    for z in space.candidates:
        if z == optimal:
            per_candidate.append(o_fit)
            continue
        try:
            fit = ols_fit(d, z)
        except (CollinearityError, SampleSizeError) as exc:
            logger.info("skipping {%s}: %s", z.render(d.dag), exc)
            skipped.append(z)
            continue
        if cfg.rule == RULE_MIN_VARIANCE:
            if fit.var_hat < best_score:
                best, best_score = z, fit.var_hat
        elif fit.var_hat < o_fit.var_hat:
            try:
                bias = bootstrap_bias(d, z, optimal, b=cfg.bootstrap, seed=cfg.seed)
            except BootstrapDegeneracyError as exc:
                logger.info("skipping {%s}: %s", z.render(d.dag), exc)
                skipped.append(z)
                continue
            fit = replace(fit, bias_hat=bias, mse_hat=bias * bias + fit.var_hat)
            if fit.mse_hat < best_score:
                best, best_score = z, fit.mse_hat
        fits[z] = fit
        per_candidate.append(fit)

    final = fits[best]
    return SelectionResult(
        chosen=best,
        tau_hat=final.tau_hat,
        fit=final,
        per_candidate=tuple(per_candidate),
        skipped=tuple(skipped),
    )
