"""Average SNR and ergodic rate of optical wireless links.

Exponentiated Weibull turbulence, Gaussian pointing error and Beer-Lambert
path loss, evaluated by quadrature, closed-form series, asymptotics and
Monte Carlo simulation.
"""

from .analysis import (
    DEFAULT_ZETA,
    CompatEntry,
    Formula,
    Method,
    MetricResult,
    approx_kernel_error,
    avg_snr_combined_asymp,
    avg_snr_combined_series,
    avg_snr_numeric,
    avg_snr_turb_approx,
    avg_snr_turb_asymp,
    compatibility_report,
    ergodic_rate_combined_asymp,
    ergodic_rate_combined_lb,
    ergodic_rate_numeric,
    ergodic_rate_turb_approx,
    ergodic_rate_turb_asymp,
    mean_log2_snr_numeric,
)
from .channels import (
    EwParams,
    LinkBudget,
    PointingGeometry,
    SeriesControl,
    SnrModel,
    Variant,
    atten_from_visibility,
    beckmann_mgf,
    ew_cdf,
    ew_pdf,
    ew_ppf,
    ew_sample,
    path_loss,
    pointing_cdf,
    pointing_pdf,
    pointing_sample,
    snr_pdf,
)
from .errors import ConvergenceError, DomainError, SeriesConvergenceError
from .simulate import (
    Channel,
    Estimate,
    GgParams,
    Metric,
    MonteCarloConfig,
    compare_models,
    gg_params_from_scintillation,
    gg_sample,
    mc_estimate,
    mc_estimates,
    moment_matched_gg,
)
from .special_math import QuadratureSpec, digamma, gamma_fn, integrate, log_gamma, upper_incomplete_gamma

__version__ = "0.1.0"
