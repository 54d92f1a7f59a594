"""ldsignal: signal detection in Gaussian white noise at desk scale.

Quadratic (Neyman-type) and kernel-based test statistics for the
sequence model y_j = theta_j + eps * xi_j, their normal-range and
large-deviation error predictions, exponential tail bounds with the
matching importance-sampling estimators, and the Besov-ball machinery
separating detectable from undetectable families of alternatives.
"""

from .errors import (
    BasisError,
    DegenerateSchemeError,
    LDSignalError,
    NoGapError,
    NotACounterexampleError,
    NumericError,
    ParameterError,
    ResolutionError,
)
from .model import (
    COMPLEX,
    REAL,
    CoefficientVector,
    Observation,
    Seed,
    derive_rng,
    fourier_coefficients,
    l2_norm_sq,
    simulate_observation,
)
from .quadratic import (
    AssumptionReport,
    PowerPrediction,
    WeightScheme,
    WeightSummary,
    check_assumptions,
    custom_scheme,
    flat_cutoff_scheme,
    flat_weights,
    geometric_scheme,
    mean_shift,
    normalized_statistic,
    norm_cdf,
    norm_logcdf,
    norm_logsf,
    norm_sf,
    polynomial_scheme,
    predict_power,
    signal_to_noise,
    statistic,
    threshold_x,
    weight_summary,
)
from .chernoff import (
    ChernoffBound,
    extremal_exponent_closed_form,
    extremal_signal,
    lower_tail_exponent,
    null_upper_tail_exponent,
)
from .kernels import (
    Kernel,
    KernelTestConfig,
    bandwidth,
    epanechnikov_kernel,
    gamma_sq,
    gamma_sq_spectral,
    kernel_statistic,
    predict_power_kernel,
    smoothed_energy,
    spectral_weight_scheme,
    tabulated_kernel,
    uniform_kernel,
)
from .consistency import (
    AlternativeFamily,
    CounterexampleLevel,
    DecompositionResult,
    RateParams,
    besov_seminorm,
    build_inconsistent_family,
    interaction_check,
    k_eps,
    ld_consistency_check,
    orthogonal_decompose,
    power_law_family,
    pure_consistency_check,
    rate_params,
    single_mode_family,
    snr_profile,
    split_mass_family,
    table_family,
)
from .montecarlo import (
    MCConfig,
    MCEstimate,
    SlopeDiagnostic,
    estimate_alpha,
    estimate_beta,
    estimate_rejection,
    slope_diagnostic,
)

__version__ = "0.1.0"
