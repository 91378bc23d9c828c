"""
cfzf - Cell-Free Massive MIMO Uplink with Zero-Forcing Combining

A simulator for the uplink of cell-free massive MIMO networks with two-layer
large-scale fading decoding (local combining at the APs, statistical
weighting at the CPU).

Features:
- Random network drops with pathloss and shadowing
- Random pilot assignment and strong/weak UE grouping per AP
- MR, FZF, PFZF, PWPFZF, LRZF and mLRZF local combining
- Monte-Carlo UatF statistics with deterministic parallel reduction
- Closed-form SE of the ZF family and the mLRZF deterministic equivalent
- Full and fractional uplink power control
- JSON-driven experiments with CSV results and summaries
"""

__version__ = "1.0.0"
__author__ = "cfzf developers"

from .scenario import ScenarioConfig, PathlossModel, NetworkRealization, generate_network, pathloss_db
from .pilots import PilotAssignment, GroupAssignment, assign_pilots_random, group_ues
from .channel import EstimationStats, ChannelWorkspace, estimation_stats, draw_block
from .combining import Scheme, Regularization, CombinerSet, CombinerError, build_combiners
from .lsfd import GMoments, SEReport, Method, LSFDError, accumulate_moments, optimal_lsfd, uatf_sinr, se_from_sinr
from .closedform import ClosedFormInputs, FixedPointState, FixedPointError, closed_form_se
from .power import PowerMode, PowerAllocation, full_power, fractional_power
from .config import ExperimentSpec, ConfigError, load_experiment_spec
from .runner import ExperimentRunner, ValidationFailure

__all__ = [
    "ScenarioConfig",
    "PathlossModel",
    "NetworkRealization",
    "generate_network",
    "pathloss_db",
    "PilotAssignment",
    "GroupAssignment",
    "assign_pilots_random",
    "group_ues",
    "EstimationStats",
    "ChannelWorkspace",
    "estimation_stats",
    "draw_block",
    "Scheme",
    "Regularization",
    "CombinerSet",
    "CombinerError",
    "build_combiners",
    "GMoments",
    "SEReport",
    "Method",
    "LSFDError",
    "accumulate_moments",
    "optimal_lsfd",
    "uatf_sinr",
    "se_from_sinr",
    "ClosedFormInputs",
    "FixedPointState",
    "FixedPointError",
    "closed_form_se",
    "PowerMode",
    "PowerAllocation",
    "full_power",
    "fractional_power",
    "ExperimentSpec",
    "ConfigError",
    "load_experiment_spec",
    "ExperimentRunner",
    "ValidationFailure",
]
