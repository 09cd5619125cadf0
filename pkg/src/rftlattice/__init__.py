"""
Family-wise error thresholds for lattice-sampled random fields.

Compares Random Field Theory thresholds with Bonferroni correction, finds
the smoothness at which RFT becomes the less conservative of the two, models
the smoothness of published studies, and checks the analytic results with
Monte Carlo fields.
"""

from .comparator import (
    ABOVE_RANGE,
    BELOW_RANGE,
    BRAIN_VOLUME_MM3,
    SweepCell,
    ThresholdPair,
    bonferroni_threshold,
    crossover_smoothness,
    lattice_resels,
    sweep,
    threshold_pair,
    voxel_count,
    write_sweep_csv,
)
from .errors import DomainError, NoBracketError, UnattainableError
from .fieldsim import (
    FweEstimate,
    SimConfig,
    empirical_fwe,
    estimate_fwhm,
    generate_smooth_field,
    generate_t_field,
    realization_maxima,
)
from .rft import (
    FieldSpec,
    LatticeSpec,
    ReselVector,
    ec_density,
    expected_ec,
    resel_count_cuboid,
    resel_count_simplified,
    rft_threshold,
)
from .stats import (
    log_gamma,
    normal_cdf,
    normal_quantile,
    regularized_incomplete_beta,
    t_quantile,
    t_tail,
    welch_t_test,
)
from .survey import (
    RatioModel,
    ResidualQuantiles,
    StudyRecord,
    adjust_model,
    compare_rft_users,
    fail_percentage,
    fit_ratio_model,
    ingest,
    prob_meets_assumption,
    smoothness_ratio,
)

__version__ = "0.1.0"
