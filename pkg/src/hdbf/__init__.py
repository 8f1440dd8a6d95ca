"""Tests for equality of mean vectors across k high-dimensional groups
under heteroscedastic covariances, with power/ARE tools and a Monte Carlo
engine."""

__version__ = "0.1.0"

from .core import GroupedData, read_csv, write_csv
from .exceptions import (
    ConfigError,
    DegenerateDenominator,
    DimensionMismatch,
    GroupTooSmall,
    HDBFError,
    InputError,
    MalformedCsv,
    NonPositiveVariance,
    NotPositiveSemidefinite,
    ZeroSignal,
)
from .power import (
    DesignSpec,
    PopulationSpec,
    are,
    are_case_one,
    are_case_two,
    are_lower_bound,
    power_hu,
    power_proposed,
    solve_are_roots,
)
from .sim import (
    Model1Config,
    Model2Config,
    SimConfig,
    estimator_bias_study,
    load_config,
    run_monte_carlo,
)
from .stats import (
    ALL_METHODS,
    TestMethod,
    TestResult,
    VarianceMethod,
    run_test,
    run_tests,
    sigma_hat,
    sigma_hat_H,
    statistic_T,
    statistic_TCH,
    statistic_TS,
)
