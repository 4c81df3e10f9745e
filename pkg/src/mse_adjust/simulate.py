"""Ancestral sampling and the experiment harness.

Standard normals are produced by inverse-CDF transform of a counter-based
(Philox) stream, so datasets are bit-stable across platforms and across
thread counts.  Each (rule, sample size, seed) cell owns an independent
stream derived by hashing its coordinates; aggregation order is fixed by
seed index regardless of how many worker threads ran.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtri

from .errors import (
    BootstrapDegeneracyError,
    CollinearityError,
    GraphError,
    SampleSizeError,
)
from .estimate import (
    Dataset,
    SelectionConfig,
    ols_fit,
    select_and_estimate,
)
from .classify import classify
from .graph import AdjustmentSet, CausalDag, optimal_adjustment_set
from .scm import LinearGaussianScm
from .search import CandidateSpace, build_candidate_space, mse_optimal_set

logger = logging.getLogger(__name__)

RULE_FIXED_O = "fixed-O"
RULE_ALGORITHM_1 = "algorithm-1"
RULE_MIN_VARIANCE = "min-variance"
RULE_GROUND_TRUTH = "ground-truth-On"
KNOWN_RULES = (RULE_FIXED_O, RULE_ALGORITHM_1, RULE_MIN_VARIANCE, RULE_GROUND_TRUTH)

_RULE_IDS = {rule: i for i, rule in enumerate(KNOWN_RULES)}
_SET_RULE_TAG = 0x5E7
_DATA_STREAM_TAG = 0xDA7A
_BOOT_SEED_TAG = 0x5EED

# A cell whose failure share exceeds this is flagged invalid.
FAILURE_SHARE_LIMIT = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    scm: LinearGaussianScm
    sample_sizes: tuple[int, ...]
    seeds: int
    bootstrap_b: int = 1000
    rules: tuple[str, ...] = (RULE_FIXED_O, RULE_ALGORITHM_1)
    per_set_curves: bool = False
    output_path: str | None = None

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.sample_sizes, self.sample_sizes[1:])):
            raise GraphError("sample sizes must be strictly increasing")
        if not self.sample_sizes:
            raise GraphError("at least one sample size is required")
        if self.seeds < 1:
            raise GraphError("seed count must be >= 1")
        for rule in self.rules:
            if rule not in KNOWN_RULES:
                raise GraphError(f"unrecognized rule {rule!r}")


@dataclass(frozen=True)
class CellStats:
    rule: str
    n: int
    mean_mse: float
    sd_sq_err: float
    rmse: float
    seeds: int
    failures: int
    valid: bool


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    cells: tuple[CellStats, ...]
    details: tuple[tuple[str, int, int, str, float], ...] = ()

    def cell(self, rule: str, n: int) -> CellStats:
        for c in self.cells:
            if c.rule == rule and c.n == n:
                return c
        raise KeyError((rule, n))


def _standard_normal(rng: np.random.Generator, size: int) -> np.ndarray:
    # Inverse-CDF transform of a strictly interior uniform grid point.
    u = (rng.integers(0, 1 << 53, size=size, dtype=np.int64) + 0.5) * (2.0 ** -53)
    return ndtri(u)


def sample(m: LinearGaussianScm, n: int, seed) -> Dataset:
    """Draw n joint observations by ancestral sampling in topological order."""
    if n < 1:
        raise GraphError("sample size must be >= 1")
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(int(seed))
    rng = np.random.Generator(np.random.Philox(seed=ss))
    dag = m.dag
    coef = {edge: c for edge, c in zip(dag.edges, m.coefficients)}
    data = np.empty((n, dag.node_count))
    for v in dag.topological_order:
        col = math.sqrt(m.noise_variances[v]) * _standard_normal(rng, n)
        for p in dag.parents[v]:
            col += coef[(p, v)] * data[:, p]
        data[:, v] = col
    return Dataset(dag, data)


def _cell_stream(rule_key: tuple[int, ...], n: int, s: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([_DATA_STREAM_TAG, *rule_key, n, s])


def _boot_seed(rule_key: tuple[int, ...], n: int, s: int) -> int:
    ss = np.random.SeedSequence([_BOOT_SEED_TAG, *rule_key, n, s])
    lo, hi = ss.generate_state(2)
    return int(lo) | (int(hi) << 32)


def _make_estimator(
    rule: str,
    m: LinearGaussianScm,
    space: CandidateSpace | None,
    ground_truth: dict[int, AdjustmentSet],
    bootstrap_b: int,
) -> Callable[[Dataset, int, int], tuple[float, AdjustmentSet]]:
    g = m.dag
    optimal = optimal_adjustment_set(g)
    rule_key = (_RULE_IDS[rule],)

    if rule == RULE_FIXED_O:
        def run(d: Dataset, n: int, s: int):
            return ols_fit(d, optimal).tau_hat, optimal

    elif rule == RULE_GROUND_TRUTH:
        def run(d: Dataset, n: int, s: int):
            target = ground_truth[n]
            return ols_fit(d, target).tau_hat, target

    else:
        sel_rule = "min-variance" if rule == RULE_MIN_VARIANCE else "mse-optimal"

        def run(d: Dataset, n: int, s: int):
            cfg = SelectionConfig(
                bootstrap=bootstrap_b, seed=_boot_seed(rule_key, n, s), rule=sel_rule
            )
            result = select_and_estimate(d, g, cfg, space=space)
            return result.tau_hat, result.chosen

    return run


def run_experiment(
    cfg: ExperimentConfig,
    threads: int = 1,
    collect_details: bool = False,
) -> ExperimentResult:
    """Run every (rule, n, seed) cell and aggregate squared errors.

    Per-seed failures (collinearity at tiny n, bootstrap degeneracy) are
    excluded and counted; a cell with more than 1% failures is flagged
    invalid.  Totals are independent of ``threads``.
    """
    m = cfg.scm
    g = m.dag
    tau = m.tau
    needs_space = bool(
        set(cfg.rules) & {RULE_ALGORITHM_1, RULE_MIN_VARIANCE, RULE_GROUND_TRUTH}
    ) or cfg.per_set_curves
    space = build_candidate_space(g, classify(g)) if needs_space else None

    ground_truth: dict[int, AdjustmentSet] = {}
    if RULE_GROUND_TRUTH in cfg.rules:
        for n in cfg.sample_sizes:
            ground_truth[n] = mse_optimal_set(m, space, n)[0]

    jobs: list[tuple[str, tuple[int, ...], Callable]] = []
    for rule in cfg.rules:
        runner = _make_estimator(rule, m, space, ground_truth, cfg.bootstrap_b)
        jobs.append((rule, (_RULE_IDS[rule],), runner))
    if cfg.per_set_curves:
        for cand in space.candidates:
            name = "set:" + (cand.render(g) or "{}")
            rule_key = (_SET_RULE_TAG, *cand.members)

            def runner(d: Dataset, n: int, s: int, _c=cand):
                return ols_fit(d, _c).tau_hat, _c

            jobs.append((name, rule_key, runner))

    cells: list[CellStats] = []
    details: list[tuple[str, int, int, str, float]] = []
    for rule_name, rule_key, runner in jobs:
        for n in cfg.sample_sizes:
            sq_err = np.full(cfg.seeds, np.nan)
            chosen: list[str | None] = [None] * cfg.seeds
            failed = np.zeros(cfg.seeds, dtype=bool)

            def one_seed(s: int) -> None:
                data = sample(m, n, _cell_stream(rule_key, n, s))
                try:
                    tau_hat, picked = runner(data, n, s)
                except (CollinearityError, SampleSizeError, BootstrapDegeneracyError) as exc:
                    logger.debug("seed %d failed at (%s, n=%d): %s", s, rule_name, n, exc)
                    failed[s] = True
                    return
                sq_err[s] = (tau_hat - tau) ** 2
                chosen[s] = picked.render(g)

            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    list(pool.map(one_seed, range(cfg.seeds)))
            else:
                for s in range(cfg.seeds):
                    one_seed(s)

            good = sq_err[~failed]
            failures = int(failed.sum())
            mean_mse = float(np.mean(good)) if good.size else float("nan")
            sd = float(np.std(good, ddof=1)) if good.size > 1 else 0.0
            rmse = math.sqrt(mean_mse) if good.size else float("nan")
            valid = failures <= FAILURE_SHARE_LIMIT * cfg.seeds
            if not valid:
                logger.warning(
                    "cell (%s, n=%d) invalid: %d/%d seeds failed",
                    rule_name, n, failures, cfg.seeds,
                )
            cells.append(
                CellStats(rule_name, n, mean_mse, sd, rmse, cfg.seeds, failures, valid)
            )
            if collect_details:
                for s in range(cfg.seeds):
                    if not failed[s]:
                        details.append((rule_name, n, s, chosen[s], float(sq_err[s])))
    return ExperimentResult(cfg, tuple(cells), tuple(details))


# -- built-in model presets ---------------------------------------------------

def preset(name: str) -> LinearGaussianScm:
    """Built-in models: 'm1' and 'm2' carry their published coefficients,
    'g3-demo' is the larger screening example with unit coefficients."""
    if name == "m1":
        dag = CausalDag(
            labels=("A", "Y", "O1", "O2", "W1", "W2"),
            edges=(
                (0, 1), (2, 1), (3, 0), (3, 1), (4, 0), (4, 2), (5, 0), (5, 2),
            ),
            treatment=0,
            outcome=1,
        )
        coef = {
            ("A", "Y"): 3.0,
            ("O1", "Y"): 5.0,
            ("O2", "A"): 40.0,
            ("O2", "Y"): 0.5,
            ("W1", "A"): -1.0,
            ("W1", "O1"): 2.0,
            ("W2", "A"): 0.1,
            ("W2", "O1"): 2.0,
        }
        return LinearGaussianScm.from_edge_map(dag, coef, 1.0)
    if name == "m2":
        dag = CausalDag(
            labels=("A", "Y", "C1", "O1", "O2", "W1"),
            edges=(
                (0, 1), (3, 1), (3, 2), (4, 0), (4, 1), (5, 0), (5, 2),
            ),
            treatment=0,
            outcome=1,
        )
        coef = {
            ("A", "Y"): 0.29,
            ("O1", "Y"): 0.71,
            ("O1", "C1"): 6.0,
            ("O2", "A"): 1.1,
            ("O2", "Y"): 0.14,
            ("W1", "A"): 0.55,
            ("W1", "C1"): 1.33,
        }
        return LinearGaussianScm.from_edge_map(dag, coef, 1.0)
    if name == "g3-demo":
        dag = CausalDag(
            labels=("A", "Y", "I1", "O1", "O2", "O3", "O4", "P1", "S1", "S2", "S3"),
            edges=(
                (0, 1),   # A -> Y
                (2, 0),   # I1 -> A
                (3, 1),   # O1 -> Y
                (4, 1),   # O2 -> Y
                (5, 1),   # O3 -> Y
                (6, 1),   # O4 -> Y
                (7, 5),   # P1 -> O3
                (7, 6),   # P1 -> O4
                (8, 0),   # S1 -> A
                (8, 3),   # S1 -> O1
                (9, 4),   # S2 -> O2
                (10, 4),  # S3 -> O2
            ),
            treatment=0,
            outcome=1,
        )
        coef = {edge: 1.0 for edge in dag.edges}
        return LinearGaussianScm.from_edge_map(dag, coef, 1.0)
    raise GraphError(f"unknown preset {name!r}; choose m1, m2 or g3-demo")
