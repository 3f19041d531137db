"""Epidemic change-set detection for lattice data.

Detects rectangular regions where the marginal distribution of a
d-dimensional random field differs from the rest of the lattice, using
CUSUM-type scans over all rectangles and a dependent wild bootstrap for
critical values.
"""

from .bootstrap import (
    TestConfig,
    TestReport,
    bootstrap_quantile,
    bootstrap_statistic,
    run_test,
)
from .detector import EpidemicChangeDetector
from .errors import ConfigError, FieldFormatError, MemoryCapError
from .gram import (
    GaussianWeight,
    GramMatrix,
    MeanAssignment,
    ObservationField,
    UniformWeight,
    WeightSpec,
    center_gram,
    gram_euclidean,
    gram_indicator_cvm,
    weight_survival,
)
from .lattice import (
    Block,
    LatticeShape,
    PairPrefixTensor,
    PrefixTensor,
    box_sum,
    enumerate_blocks,
    fractional_block,
    pair_box_sum,
)
from .multipliers import (
    KernelSpec,
    MultiplierField,
    empirical_multiplier_cov,
    kernel_value,
    sample_ar_field,
    sample_ma_field,
)
from .scan import (
    ScanResult,
    estimate_change_set,
    evaluate_block_gram,
    lrv_estimate,
    scan_gram,
    scan_mean_change,
)
from .simulate import (
    EXAMPLE_CHANGE_SETS,
    ExperimentConfig,
    RejectionTable,
    Scenario,
    gen_ar_field,
    gen_skewness_change,
    inject_mean_change,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "Block",
    "ConfigError",
    "EpidemicChangeDetector",
    "EXAMPLE_CHANGE_SETS",
    "ExperimentConfig",
    "FieldFormatError",
    "GaussianWeight",
    "GramMatrix",
    "KernelSpec",
    "LatticeShape",
    "MeanAssignment",
    "MemoryCapError",
    "MultiplierField",
    "ObservationField",
    "PairPrefixTensor",
    "PrefixTensor",
    "RejectionTable",
    "ScanResult",
    "Scenario",
    "TestConfig",
    "TestReport",
    "UniformWeight",
    "WeightSpec",
    "bootstrap_quantile",
    "bootstrap_statistic",
    "box_sum",
    "center_gram",
    "empirical_multiplier_cov",
    "enumerate_blocks",
    "estimate_change_set",
    "evaluate_block_gram",
    "fractional_block",
    "gen_ar_field",
    "gen_skewness_change",
    "gram_euclidean",
    "gram_indicator_cvm",
    "inject_mean_change",
    "kernel_value",
    "lrv_estimate",
    "pair_box_sum",
    "run_experiment",
    "run_test",
    "sample_ar_field",
    "sample_ma_field",
    "scan_gram",
    "scan_mean_change",
    "weight_survival",
]
