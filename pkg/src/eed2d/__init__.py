"""Energy-efficiency maximization for a wireless-powered D2D pair
underlaying a multi-antenna NOMA downlink."""

from .algorithms import (
    Solution,
    alternating_optimize,
    exhaustive_tau_optimize,
    feasible_initialization,
    oma_baseline_optimize,
    optimize,
)
from .channel import (
    ChannelSet,
    CsiErrorRealization,
    Topology,
    apply_csi_error,
    draw_channels,
    generate_topology,
    trial_rng,
)
from .params import SystemParams, TimeSwitch, dbm_to_watts
from .physics import (
    RatesReport,
    d2d_transmit_power,
    harvested_power,
    imperfect_rates,
    qos_feasible,
    stage_rates,
)

__all__ = [
    "ChannelSet",
    "CsiErrorRealization",
    "RatesReport",
    "Solution",
    "SystemParams",
    "TimeSwitch",
    "Topology",
    "alternating_optimize",
    "apply_csi_error",
    "d2d_transmit_power",
    "dbm_to_watts",
    "draw_channels",
    "exhaustive_tau_optimize",
    "feasible_initialization",
    "generate_topology",
    "harvested_power",
    "imperfect_rates",
    "oma_baseline_optimize",
    "optimize",
    "qos_feasible",
    "stage_rates",
    "trial_rng",
]

__version__ = "0.1.0"
