"""Linear Gaussian structural model numerics.

The implied covariance matrix is computed exactly from the structural
coefficients, so every population quantity downstream (bias, asymptotic
variance, finite-sample variance, MSE) is an analytic object; Monte Carlo
sampling appears only in tests and the simulation harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DegenerateModelError, GraphError, SampleSizeError
from .graph import AdjustmentSet, CausalDag

# Condition-number threshold above which a covariance block is reported as a
# model defect; positive noise variances cannot produce exact singularity.
SINGULARITY_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class LinearGaussianScm:
    """Edge coefficients and noise variances layered on a causal DAG.

    ``coefficients`` aligns with ``dag.edges``; ``noise_variances`` aligns
    with the node indices.  The coefficient on the treatment->outcome edge is
    the true treatment effect.
    """

    dag: CausalDag
    coefficients: tuple[float, ...]
    noise_variances: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.dag.treatment_edge_removed:
            raise GraphError("a structural model requires the causal graph")
        if len(self.coefficients) != len(self.dag.edges):
            raise GraphError("one coefficient per edge is required")
        if len(self.noise_variances) != self.dag.node_count:
            raise GraphError("one noise variance per node is required")
        for c in self.coefficients:
            if not math.isfinite(c):
                raise GraphError(f"non-finite edge coefficient {c}")
        for s in self.noise_variances:
            if not (math.isfinite(s) and s > 0):
                raise GraphError(f"noise variances must be positive, got {s}")

    @classmethod
    def from_edge_map(
        cls,
        dag: CausalDag,
        coef: Mapping[tuple[str, str], float] | Mapping[tuple[int, int], float],
        noise_var: Mapping[str, float] | Mapping[int, float] | float = 1.0,
    ) -> "LinearGaussianScm":
        def to_index(key) -> tuple[int, int]:
            p, c = key
            if isinstance(p, str):
                p = dag.index(p)
            if isinstance(c, str):
                c = dag.index(c)
            return int(p), int(c)

        by_edge = {to_index(k): float(v) for k, v in coef.items()}
        missing = [e for e in dag.edges if e not in by_edge]
        if missing:
            names = ", ".join(f"{dag.label(p)}->{dag.label(c)}" for p, c in missing)
            raise GraphError(f"missing coefficients for edges: {names}")
        if len(by_edge) != len(dag.edges):
            raise GraphError("coefficient map mentions edges absent from the graph")
        if isinstance(noise_var, Mapping):
            sig = [1.0] * dag.node_count
            for k, v in noise_var.items():
                idx = dag.index(k) if isinstance(k, str) else int(k)
                sig[idx] = float(v)
        else:
            sig = [float(noise_var)] * dag.node_count
        return cls(dag, tuple(by_edge[e] for e in dag.edges), tuple(sig))

    @property
    def tau(self) -> float:
        """The true treatment effect: the treatment->outcome coefficient."""
        idx = self.dag.edges.index((self.dag.treatment, self.dag.outcome))
        return self.coefficients[idx]

    def coefficient(self, parent: int, child: int) -> float:
        try:
            idx = self.dag.edges.index((parent, child))
        except ValueError:
            raise GraphError(
                f"no edge {self.dag.label(parent)}->{self.dag.label(child)}"
            ) from None
        return self.coefficients[idx]


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Symmetric positive-definite covariance of all model variables."""

    order: tuple[int, ...]
    values: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        v = self.values
        if v.shape != (len(self.order), len(self.order)):
            raise GraphError("covariance shape does not match node order")
        scale = float(np.max(np.abs(v))) or 1.0
        if float(np.max(np.abs(v - v.T))) > 1e-12 * scale:
            raise DegenerateModelError("covariance matrix is not symmetric")
        try:
            np.linalg.cholesky(v)
        except np.linalg.LinAlgError:
            raise DegenerateModelError("covariance matrix is not positive definite") from None

    def _positions(self, nodes: Iterable[int]) -> list[int]:
        pos = {node: i for i, node in enumerate(self.order)}
        try:
            return [pos[int(v)] for v in nodes]
        except KeyError as exc:
            raise GraphError(f"unknown node index {exc.args[0]}") from None

    def sub(self, rows: Iterable[int], cols: Iterable[int]) -> np.ndarray:
        return self.values[np.ix_(self._positions(rows), self._positions(cols))]

    def name(self, nodes: Iterable[int]) -> str:
        if self.labels is None:
            return "{" + ", ".join(str(v) for v in nodes) + "}"
        return "{" + ", ".join(self.labels[v] for v in nodes) + "}"


@dataclass(frozen=True)
class PopulationSummary:
    """Exact error profile of the adjusted OLS estimator for one set.

    ``fs_var`` and ``mse`` are present only when a sample size was supplied;
    the finite-sample variance is avar / (n - |set| - 3), the expectation of
    the inverse-chi-squared scaling of the residual treatment variation.
    """

    adjustment: AdjustmentSet
    bias: float
    avar: float
    n: int | None = None
    fs_var: float | None = None
    mse: float | None = None


@lru_cache(maxsize=128)
def implied_covariance(m: LinearGaussianScm) -> CovarianceMatrix:
    """Population covariance of all variables, in node index order.

    With coefficients assembled into B (child row, parent column) the model
    reads (I - B) V = eps, so the covariance is (I - B)^-1 D (I - B)^-T with
    D the diagonal of noise variances.  In topological order I - B is unit
    lower triangular, hence always invertible for a DAG.
    """
    dag = m.dag
    d = dag.node_count
    topo = dag.topological_order
    pos = {node: i for i, node in enumerate(topo)}
    lower = np.eye(d)
    for (p, c), beta in zip(dag.edges, m.coefficients):
        lower[pos[c], pos[p]] = -beta
    assert abs(np.prod(np.diag(lower))) == 1.0
    inv = solve_triangular(lower, np.eye(d), lower=True, unit_diagonal=True)
    noise = np.array([m.noise_variances[node] for node in topo])
    sigma_topo = (inv * noise) @ inv.T
    sigma_topo = 0.5 * (sigma_topo + sigma_topo.T)
    perm = np.argsort(np.array(topo))
    sigma = sigma_topo[np.ix_(perm, perm)]
    return CovarianceMatrix(tuple(range(d)), sigma, dag.labels)


def conditional_cov(
    sigma: CovarianceMatrix,
    x: Iterable[int],
    y: Iterable[int],
    z: Iterable[int] = (),
) -> np.ndarray:
    """Sigma_xy - Sigma_xz Sigma_zz^-1 Sigma_zy; the marginal block when z is empty."""
    xs, ys, zs = list(x), list(y), list(z)
    sxy = sigma.sub(xs, ys)
    if not zs:
        return sxy
    szz = sigma.sub(zs, zs)
    if np.linalg.cond(szz) > SINGULARITY_CONDITION_LIMIT:
        raise DegenerateModelError(
            f"covariance of {sigma.name(zs)} is numerically singular"
        )
    sxz = sigma.sub(xs, zs)
    szy = sigma.sub(zs, ys)
    return sxy - sxz @ np.linalg.solve(szz, szy)


def population_ols_coef(
    sigma: CovarianceMatrix, y: int, regressors: Iterable[int]
) -> np.ndarray:
    """Population regression coefficients of ``y`` on ``regressors``.

    All variables are mean zero, so the coefficients are Sigma_rr^-1 Sigma_ry,
    returned in canonical (ascending index) regressor order.
    """
    regs = sorted({int(v) for v in regressors})
    if not regs:
        raise GraphError("at least one regressor is required")
    srr = sigma.sub(regs, regs)
    if np.linalg.cond(srr) > SINGULARITY_CONDITION_LIMIT:
        raise DegenerateModelError(
            f"covariance of {sigma.name(regs)} is numerically singular"
        )
    sry = sigma.sub(regs, [y]).ravel()
    return np.linalg.solve(srr, sry)


def population_bias(m: LinearGaussianScm, k: Iterable[int] = ()) -> float:
    """Bias of the adjusted OLS treatment coefficient; zero for valid sets."""
    kset = AdjustmentSet.of(m.dag._check_covariates(k, "adjustment set"))
    sigma = implied_covariance(m)
    regs = sorted((m.dag.treatment, *kset.members))
    coefs = population_ols_coef(sigma, m.dag.outcome, regs)
    return float(coefs[regs.index(m.dag.treatment)] - m.tau)


def population_avar(m: LinearGaussianScm, k: Iterable[int] = ()) -> float:
    """Asymptotic variance of the adjusted OLS treatment coefficient."""
    kset = AdjustmentSet.of(m.dag._check_covariates(k, "adjustment set"))
    sigma = implied_covariance(m)
    a, y = m.dag.treatment, m.dag.outcome
    syy = conditional_cov(sigma, [y], [y], [a, *kset.members])[0, 0]
    saa = conditional_cov(sigma, [a], [a], kset.members)[0, 0]
    return float(syy / saa)


def population_summary(
    m: LinearGaussianScm, k: Iterable[int] = (), n: int | None = None
) -> PopulationSummary:
    """Exact bias / variance / MSE profile for one adjustment set.

    A sample size below ``|k| + 4`` is an error, never an approximation: the
    inverse-chi-squared expectation behind the finite-sample variance does
    not exist there.
    """
    kset = AdjustmentSet.of(m.dag._check_covariates(k, "adjustment set"))
    bias = population_bias(m, kset)
    avar = population_avar(m, kset)
    if n is None:
        return PopulationSummary(kset, bias, avar)
    n = int(n)
    if n <= len(kset) + 3:
        raise SampleSizeError(
            f"sample size {n} too small for a set of {len(kset)} covariates "
            f"(needs n > {len(kset) + 3})"
        )
    fs_var = avar / (n - len(kset) - 3)
    return PopulationSummary(kset, bias, avar, n, fs_var, bias * bias + fs_var)
