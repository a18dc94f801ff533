"""Secrecy capacity of ergodic Rayleigh block-fading wiretap channels.

Optimal power allocation and ergodic secrecy rates for a transmitter that
knows both channel gains, only the main gain, only the main gain's
threshold crossing (on/off), or nothing (constant power), plus the
constant-rate variant, with Monte Carlo and binned-achievability oracles.
"""

from .config import ConfigError, SolverConfig, load_config
from .fading import ChannelSamples, ChannelState, RayleighFadingPair, cdf, pdf, quantile, sample
from .numerics import (
    BracketError,
    ConvergenceError,
    DomainError,
    IntegrationError,
    Tolerance,
    ein,
    exp_integral_e1,
    exp_scaled_e1,
    find_root_bracketed,
    integrate_1d,
    integrate_2d,
    maximize_scalar,
)
from .policies import (
    ConstantPolicy,
    ConstantRatePolicy,
    FullCsiPolicy,
    MainCsiPolicy,
    OnOffPolicy,
    PowerConstraint,
    SolverError,
    full_csi_power,
    make_onoff,
    optimize_onoff_threshold,
    solve_constant_rate,
    solve_full_csi,
    solve_main_csi,
)
from .rates import (
    SCHEMES,
    ConsistencyError,
    SchemeEvaluation,
    constant_rate_signed,
    evaluate_scheme,
    full_csi_rate,
    high_snr_limit,
    main_csi_rate,
    onoff_rate_closed_form,
    receiver_only_rate,
)
from .validation import McEstimate, QuantizationSpec, mc_rate, quantized_achievable_rate, truncation_mass

__version__ = "0.1.0"
