"""Covariate adjustment sets optimized for finite-sample mean squared error
in linear Gaussian causal models.

Given a causal DAG with a designated treatment and outcome, this package
classifies covariates, prunes the space of candidate adjustment sets with
purely graphical screens, computes the exact population bias / variance /
MSE of the adjusted least-squares effect estimator for any set and sample
size, predicts which set is best at a given n (and where the winner flips),
and selects a set from finite data via a variance-guarded bootstrap search.
"""

from ._backend import BACKEND, available_backends
from .classify import VariableClassification, classify, suboptimal_confounding, suboptimal_precision
from .errors import (
    BootstrapDegeneracyError,
    CollinearityError,
    DegenerateModelError,
    EnumerationLimitError,
    GraphError,
    MseAdjustError,
    SampleSizeError,
)
from .estimate import (
    Dataset,
    FitResult,
    SelectionConfig,
    SelectionResult,
    bootstrap_bias,
    estimate_variance,
    ols_fit,
    select_and_estimate,
)
from .graph import (
    AdjustmentSet,
    CausalDag,
    d_separated,
    descendants,
    exists_open_given_some_conditioning,
    irreducible_completion,
    is_valid_adjustment_set,
    optimal_adjustment_set,
    remove_treatment_edge,
)
from .io import (
    graph_from_dict,
    graph_to_dict,
    load_dataset_csv,
    load_graph,
    load_scm,
    scm_from_dict,
    write_dataset_csv,
)
from .scm import (
    CovarianceMatrix,
    LinearGaussianScm,
    PopulationSummary,
    conditional_cov,
    implied_covariance,
    population_avar,
    population_bias,
    population_ols_coef,
    population_summary,
)
from .search import (
    CandidateSpace,
    CriterionResult,
    PruningEntry,
    build_candidate_space,
    crossover_n,
    mse_optimal_argmin,
    mse_optimal_set,
    precision_inclusion,
    sample_size_criterion,
)
from .simulate import (
    CellStats,
    ExperimentConfig,
    ExperimentResult,
    preset,
    run_experiment,
    sample,
)

__version__ = "0.1.0"
