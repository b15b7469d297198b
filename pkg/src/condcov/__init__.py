"""Conditional covariance and correlation estimation under environmental
confounders.

Two estimators of the conditional covariance matrix of multivariate
outputs given environmental covariates, sharing one standardization
step:

* :mod:`condcov.kernel` - Nadaraya-Watson smoothing of residual outer
  products, with blocked cross-validation bandwidth selection;
* :mod:`condcov.forest` - a random forest whose splits maximize the
  distance between child sample covariances.

:mod:`condcov.simulate` benchmarks both on synthetic seasonal data,
:mod:`condcov.ingest` and :mod:`condcov.pipeline` run them end to end
on monitoring CSVs, and :mod:`condcov.cli` wraps everything in a
command line tool.
"""

from ._version import __version__
from .core import (
    Dataset,
    QueryGrid,
    SymMatrix,
    cov_to_corr,
    dataset_fingerprint,
    euclidean_dist,
    sample_cov,
)
from .errors import (
    AllCandidatesInfeasible,
    CholeskyFailure,
    CondcovError,
    ConfigError,
    DegenerateColumn,
    DimensionMismatch,
    EmptyAfterFilter,
    NonMonotoneTimestamps,
    NonPositiveDiagonal,
    ParseError,
    TooFewRows,
    UnsupportedGrid,
    ZeroWeightSum,
)
from .forest import (
    CovForest,
    CovTree,
    ForestConfig,
    SplitRule,
    best_split,
    fit_forest,
    split_criterion,
    grow_tree,
    load_forest,
    predict_corr,
    predict_cov,
    predict_cov_batch,
    save_forest,
)
from .ingest import (
    GapReport,
    IngestResult,
    IngestSpec,
    MissingPolicy,
    ingest,
    write_dataset_csv,
)
from .kernel import (
    BandwidthSearch,
    BandwidthSelection,
    CombineRule,
    KernelFamily,
    KernelModel,
    KernelSpec,
    cv_loss,
    fit,
    gaussian_kernel,
    nw_correlation,
    nw_covariance,
    nw_covariance_batch,
    nw_mean,
    select_bandwidth,
)
from .pipeline import (
    FitParams,
    RunResult,
    auto_grid,
    fit_and_export,
    replay,
    run_from_spec,
    support_mask,
)
from .simulate import (
    BenchmarkResult,
    BenchRecord,
    NoiseSpec,
    NWSettings,
    SimConfig,
    SummaryRow,
    TruthParams,
    TruthSurfaces,
    ZetaInterval,
    covariate_bounds,
    gen_covariates,
    gen_outputs,
    rmse_cov12,
    run_benchmark,
    validate_surfaces,
    write_benchmark_meta,
    write_results_csv,
    write_summary_csv,
)

__all__ = [
    "__version__",
    "BandwidthSearch",
    "BandwidthSelection",
    "BenchmarkResult",
    "BenchRecord",
    "CombineRule",
    "CondcovError",
    "AllCandidatesInfeasible",
    "CholeskyFailure",
    "ConfigError",
    "DegenerateColumn",
    "DimensionMismatch",
    "EmptyAfterFilter",
    "NonMonotoneTimestamps",
    "NonPositiveDiagonal",
    "ParseError",
    "TooFewRows",
    "UnsupportedGrid",
    "ZeroWeightSum",
    "CovForest",
    "CovTree",
    "Dataset",
    "FitParams",
    "ForestConfig",
    "GapReport",
    "IngestResult",
    "IngestSpec",
    "KernelFamily",
    "KernelModel",
    "KernelSpec",
    "MissingPolicy",
    "NoiseSpec",
    "NWSettings",
    "QueryGrid",
    "RunResult",
    "SimConfig",
    "SplitRule",
    "SummaryRow",
    "SymMatrix",
    "TruthParams",
    "TruthSurfaces",
    "ZetaInterval",
    "auto_grid",
    "best_split",
    "cov_to_corr",
    "covariate_bounds",
    "cv_loss",
    "dataset_fingerprint",
    "euclidean_dist",
    "fit",
    "fit_and_export",
    "fit_forest",
    "gaussian_kernel",
    "gen_covariates",
    "gen_outputs",
    "grow_tree",
    "ingest",
    "load_forest",
    "nw_correlation",
    "nw_covariance",
    "nw_covariance_batch",
    "nw_mean",
    "predict_corr",
    "predict_cov",
    "predict_cov_batch",
    "replay",
    "rmse_cov12",
    "run_benchmark",
    "run_from_spec",
    "sample_cov",
    "save_forest",
    "select_bandwidth",
    "split_criterion",
    "support_mask",
    "validate_surfaces",
    "write_benchmark_meta",
    "write_dataset_csv",
    "write_results_csv",
    "write_summary_csv",
]
