import itertools

import numpy as np
import pytest

from mse_adjust import (
    AdjustmentSet,
    CausalDag,
    EnumerationLimitError,
    LinearGaussianScm,
    SampleSizeError,
    build_candidate_space,
    classify,
    crossover_n,
    is_valid_adjustment_set,
    mse_optimal_argmin,
    mse_optimal_set,
    optimal_adjustment_set,
    population_summary,
    precision_inclusion,
    sample_size_criterion,
)
from mse_adjust.search import (
    RULE_FORBIDDEN_COMBINATION,
    RULE_IRRELEVANT,
    RULE_SUBOPTIMAL_CONFOUNDING,
    RULE_SUBOPTIMAL_PRECISION,
    RULE_SUBOPTIMAL_VALID,
)

from .oracles import random_dag, random_scm


def space_for(g, **kwargs):
    return build_candidate_space(g, classify(g), **kwargs)


def rendered(space):
    g = space.graph
    return {c.render(g) for c in space.candidates}


class TestBuildCandidateSpace:
    def test_g1_nine_sets(self, g1):
        space = space_for(g1)
        assert space.initial_count == 16
        assert rendered(space) == {
            "", "O1", "O2", "O1+O2", "O2+W1", "O2+W2", "W1", "W2", "W1+W2",
        }
        rules = {e.rule for e in space.pruning_log}
        assert rules == {RULE_FORBIDDEN_COMBINATION, RULE_SUBOPTIMAL_VALID}

    def test_g2_six_sets(self, g2):
        space = space_for(g2)
        assert space.initial_count == 16
        assert rendered(space) == {"", "O1", "O2", "C1", "C1+O2", "O1+O2"}

    def test_g3_counts(self, g3):
        space = space_for(g3)
        assert space.initial_count == 512
        assert len(space.candidates) == 28

    def test_g3_forbidden_combination_logged(self, g3):
        space = space_for(g3)
        forbidden = [
            set(g3.label(v) for v in e.members)
            for e in space.pruning_log
            if e.rule == RULE_FORBIDDEN_COMBINATION
        ]
        assert {"P1", "O3", "O4"} in forbidden

    def test_g3_thm2_exclusions_logged(self, g3):
        space = space_for(g3)
        by_rule = {}
        for e in space.pruning_log:
            if len(e.members) == 1:
                by_rule.setdefault(e.rule, set()).add(g3.label(e.members[0]))
        assert by_rule[RULE_IRRELEVANT] == {"I1"}
        assert by_rule[RULE_SUBOPTIMAL_PRECISION] == {"S2", "S3"}
        assert by_rule[RULE_SUBOPTIMAL_CONFOUNDING] == {"S1"}

    def test_optimal_set_always_member(self):
        rng = np.random.default_rng(55)
        for _ in range(40):
            g = random_dag(rng, int(rng.integers(0, 6)))
            space = space_for(g)
            assert optimal_adjustment_set(g) in space

    def test_candidates_sorted_and_unique(self, g3):
        space = space_for(g3)
        members = [c.members for c in space.candidates]
        assert members == sorted(members)
        assert len(set(members)) == len(members)

    def test_no_candidate_contains_flagged_variable(self, g3):
        cls = classify(g3)
        space = build_candidate_space(g3, cls)
        banned = (
            set(cls.irrelevant)
            | cls.suboptimal_precision_vars
            | cls.suboptimal_confounding_vars
        )
        for cand in space.candidates:
            assert not (set(cand) & banned)

    def test_strictly_larger_valid_sets_absent(self):
        rng = np.random.default_rng(66)
        for _ in range(40):
            g = random_dag(rng, int(rng.integers(0, 6)))
            space = space_for(g)
            o = optimal_adjustment_set(g)
            for cand in space.candidates:
                if cand != o and len(cand) > len(o):
                    assert not is_valid_adjustment_set(g, cand)

    def test_enumeration_cap(self, g1):
        with pytest.raises(EnumerationLimitError, match="retained"):
            space_for(g1, max_retained=2)


class TestMseOptimalSet:
    def test_m1_small_and_large_n(self, m1):
        g = m1.dag
        space = space_for(g)
        assert mse_optimal_set(m1, space, 50)[0].render(g) == "O1"
        assert mse_optimal_set(m1, space, 1000)[0].render(g) == "W2"

    def test_validity_dominates_asymptotically(self):
        # every invalid candidate carries real bias, so the valid optimum
        # wins once n is large
        dag = CausalDag(("A", "Y", "X0"), ((0, 1), (2, 0), (2, 1)), 0, 1)
        m = LinearGaussianScm.from_edge_map(
            dag, {("A", "Y"): 1.0, ("X0", "A"): 1.5, ("X0", "Y"): 1.5}, 1.0
        )
        space = space_for(dag)
        best, _ = mse_optimal_set(m, space, 10**6)
        assert best == optimal_adjustment_set(dag)

    def test_oversized_candidates_skipped(self, m1):
        g = m1.dag
        space = space_for(g)
        best, _ = mse_optimal_set(m1, space, 5)  # only |K| <= 1 fits
        assert len(best) <= 1

    def test_all_skipped_is_error(self, m1):
        space = space_for(m1.dag)
        with pytest.raises(SampleSizeError):
            mse_optimal_set(m1, space, 3)

    def test_argmin_contains_winner(self, m1):
        space = space_for(m1.dag)
        best, _ = mse_optimal_set(m1, space, 100)
        assert best in mse_optimal_argmin(m1, space, 100)


class TestSampleSizeCriterion:
    def test_m1_biased_singleton_beats_optimal_at_100(self, m1):
        g = m1.dag
        k = AdjustmentSet.from_labels(g, ["O1"])
        o = optimal_adjustment_set(g)
        res = sample_size_criterion(m1, k, o, 100)
        assert res.holds and res.branch == "sample-size"
        assert res.bound is not None and 100 < res.bound

    def test_identical_sets_no_strict_improvement(self, m1):
        o = optimal_adjustment_set(m1.dag)
        res = sample_size_criterion(m1, o, o, 100)
        assert not res.holds and res.branch == "direct"

    def test_agrees_with_direct_comparison(self):
        rng = np.random.default_rng(44)
        done = 0
        while done < 20:
            g = random_dag(rng, int(rng.integers(1, 6)))
            m = random_scm(rng, g)
            cov = list(g.covariates)
            k = AdjustmentSet.of(v for v in cov if rng.random() < 0.4)
            l = AdjustmentSet.of(v for v in cov if rng.random() < 0.4)
            for n in (max(len(k), len(l)) + 4, 30, 100, 10**4):
                sk = population_summary(m, k, n)
                sl = population_summary(m, l, n)
                res = sample_size_criterion(m, k, l, n)
                assert res.holds == (sk.mse < sl.mse)
            done += 1

    def test_too_small_n_rejected(self, m1):
        o = optimal_adjustment_set(m1.dag)
        with pytest.raises(SampleSizeError):
            sample_size_criterion(m1, o, AdjustmentSet(), len(o) + 3)


class TestCrossoverN:
    def test_m1_flip_between_500_and_1000(self, m1):
        g = m1.dag
        k = AdjustmentSet.from_labels(g, ["O1"])
        l = AdjustmentSet.from_labels(g, ["W2"])
        n = crossover_n(m1, k, l)
        assert n is not None and 500 < n <= 1000

    def test_identical_sets_absent(self, m1):
        o = optimal_adjustment_set(m1.dag)
        assert crossover_n(m1, o, o) is None

    def test_counterexample_empty_always_wins(self, nonconverging):
        g = nonconverging.dag
        o = optimal_adjustment_set(g)
        assert crossover_n(nonconverging, AdjustmentSet(), o, horizon=200_000) is None

    def test_flip_matches_direct_comparison(self, m1):
        g = m1.dag
        k = AdjustmentSet.from_labels(g, ["O1"])
        l = AdjustmentSet.from_labels(g, ["W2"])
        n = crossover_n(m1, k, l)
        before = sample_size_criterion(m1, k, l, n - 1)
        after = sample_size_criterion(m1, k, l, n)
        assert before.holds != after.holds


class TestPrecisionInclusion:
    def _model(self, coef):
        dag = CausalDag(("A", "Y", "P"), ((0, 1), (2, 1)), 0, 1)
        return LinearGaussianScm.from_edge_map(
            dag, {("A", "Y"): 1.0, ("P", "Y"): coef}, 1.0
        )

    def test_uninformative_precision_never_helps(self):
        # graphically a precision variable, but its coefficient is zero, so
        # it explains no outcome variance and the inclusion bound is 0
        m = self._model(0.0)
        p = AdjustmentSet((2,))
        for n in (10, 100, 10**4):
            assert not precision_inclusion(m, AdjustmentSet(), p, n)

    def test_strong_precision_helps_at_large_n(self):
        m = self._model(10.0)
        assert precision_inclusion(m, AdjustmentSet(), AdjustmentSet((2,)), 1000)

    def test_weak_precision_hurts_at_tiny_n(self):
        m = self._model(0.1)
        assert not precision_inclusion(m, AdjustmentSet(), AdjustmentSet((2,)), 6)

    def test_agrees_with_direct_mse(self):
        rng = np.random.default_rng(71)
        done = 0
        while done < 15:
            g = random_dag(rng, int(rng.integers(2, 6)))
            cls = classify(g)
            if not cls.precision:
                continue
            m = random_scm(rng, g)
            p = AdjustmentSet.of(
                v for v in cls.precision if rng.random() < 0.6
            ) or AdjustmentSet.of(cls.precision[:1])
            k = AdjustmentSet.of(
                v for v in g.covariates if v not in p and rng.random() < 0.4
            )
            for n in (len(k) + len(p) + 4, 50, 2000):
                direct = (
                    population_summary(m, k.union(p), n).mse
                    < population_summary(m, k, n).mse
                )
                assert precision_inclusion(m, k, p, n, cls=cls) == direct
            done += 1


class TestPruningSoundness:
    def test_pruned_minimum_equals_power_set_minimum(self):
        rng = np.random.default_rng(90)
        for _ in range(15):
            g = random_dag(rng, int(rng.integers(1, 5)))
            m = random_scm(rng, g)
            space = space_for(g)
            for n in (10, 100):
                full_best = min(
                    population_summary(m, z, n).mse
                    for r in range(len(g.covariates) + 1)
                    for z in itertools.combinations(g.covariates, r)
                    if n > r + 3
                )
                _, summary = mse_optimal_set(m, space, n)
                assert summary.mse == pytest.approx(full_best, rel=1e-9)
