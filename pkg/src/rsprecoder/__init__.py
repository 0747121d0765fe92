"""Robust rate-splitting precoder design for the MISO downlink."""

from .model import (
    Precoder,
    RateSplit,
    SystemConfig,
    common_rate,
    mmse_equalizers,
    mmse_values,
    mse_pair,
    precoder_power,
    receive_powers,
    sinr_and_rate,
    total_rates,
)
from .uncertainty import (
    ChannelInstance,
    RadiusLaw,
    UncertaintyRegion,
    derived_rng,
    radius_at,
    sample_channel,
    sample_error,
    worst_case_oracle,
)
from .wmse import WmseState, conservative_rate, optimal_weight, wmse
from .ao import AoConfig, DesignResult, DesignSpec, restrict_nors, run_ao

__all__ = [
    "Precoder", "RateSplit", "SystemConfig", "common_rate", "mmse_equalizers",
    "mmse_values", "mse_pair", "precoder_power", "receive_powers",
    "sinr_and_rate", "total_rates", "ChannelInstance", "RadiusLaw",
    "UncertaintyRegion", "derived_rng", "radius_at", "sample_channel",
    "sample_error", "worst_case_oracle", "WmseState", "conservative_rate",
    "optimal_weight", "wmse", "AoConfig", "DesignResult", "DesignSpec",
    "restrict_nors", "run_ao",
]

__version__ = "0.1.0"
