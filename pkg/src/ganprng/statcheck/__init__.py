"""A subset of the NIST SP 800-22 statistical test suite."""

from .randtests import (
    TestInstanceResult,
    approximate_entropy,
    block_frequency,
    cumulative_sums,
    dft_spectral,
    longest_run_of_ones,
    monobit,
    runs,
    serial,
)
from .special import erfc, igamc
from .suite import (
    FAMILIES,
    SuiteConfig,
    SuiteReport,
    compare_reports,
    proportion_threshold,
    run_suite,
    uniformity_pvalue,
)

__all__ = [
    "FAMILIES",
    "SuiteConfig",
    "SuiteReport",
    "TestInstanceResult",
    "approximate_entropy",
    "block_frequency",
    "compare_reports",
    "cumulative_sums",
    "dft_spectral",
    "erfc",
    "igamc",
    "longest_run_of_ones",
    "monobit",
    "proportion_threshold",
    "run_suite",
    "runs",
    "serial",
    "uniformity_pvalue",
]
