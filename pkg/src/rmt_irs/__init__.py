"""Ergodic-rate evaluation and optimization for IRS-aided MIMO links over
double-scattering (rank-deficient) channels.

Core surfaces: the channel model (`channel`), Monte Carlo rate evaluation
(`rate`), the deterministic rate approximation and its fixed point
(`det_equiv`), the alternating water-filling / phase-ascent optimizer
(`optimize`), and the experiment harness with CLI (`harness`, `cli`).
"""

from .channel import (
    AngularParams,
    ChannelRealization,
    CorrelationProfile,
    SystemDims,
    build_correlation,
    effective_transforms,
    psd_sqrt,
    sample_channel,
    sample_rayleigh_channel,
)
from .det_equiv import (
    KERNEL,
    DaInputs,
    FixedPoint,
    FixedPointError,
    build_da_inputs,
    da_objective,
    da_rate,
    da_rate_at,
    da_stieltjes,
    fixed_point_rhs,
    phase_coupling,
    solve_fixed_point,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    SweepRecord,
    load_config,
    parse_records,
    preset,
    preset_variants,
    run_sweep,
    save_config,
    write_csv,
)
from .optimize import (
    AoConfig,
    AoStep,
    AoTrace,
    alternating_optimize,
    backtracking_step,
    phase_gradient,
    water_fill,
)
from .rate import (
    Covariance,
    PhaseVector,
    RateEstimate,
    empirical_stieltjes,
    instantaneous_rate,
    mc_ergodic_rate,
)

__version__ = "0.1.0"

__all__ = [
    "AngularParams", "ChannelRealization", "CorrelationProfile", "SystemDims",
    "build_correlation", "effective_transforms", "psd_sqrt", "sample_channel",
    "sample_rayleigh_channel",
    "KERNEL", "DaInputs", "FixedPoint", "FixedPointError", "build_da_inputs",
    "da_objective", "da_rate", "da_rate_at", "da_stieltjes", "fixed_point_rhs",
    "phase_coupling", "solve_fixed_point",
    "ConfigError", "ExperimentConfig", "SweepRecord", "load_config", "parse_records",
    "preset", "preset_variants", "run_sweep", "save_config", "write_csv",
    "AoConfig", "AoStep", "AoTrace", "alternating_optimize", "backtracking_step",
    "phase_gradient", "water_fill",
    "Covariance", "PhaseVector", "RateEstimate", "empirical_stieltjes",
    "instantaneous_rate", "mc_ergodic_rate",
    "__version__",
]
