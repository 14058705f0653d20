"""Energy-efficient secure beamforming with an IRS and a cooperative jammer."""
from .alternating import BeamformingSolution
from .baselines import (BaselineKind, solve_mrt, solve_no_angle, solve_no_irs, solve_power_min,
                        solve_rate_max)
from .channel import ChannelSet, generate_channels
from .metrics import energy_efficiency, secrecy_rate, total_power, worst_case_rate_mc
from .perfect import algorithm1
from .robust import algorithm2
from .scenario import Scenario, SolverOptions, default_scenario, load_scenario

__all__ = [
    "BaselineKind", "BeamformingSolution", "ChannelSet", "Scenario", "SolverOptions",
    "algorithm1", "algorithm2", "default_scenario", "energy_efficiency", "generate_channels",
    "load_scenario", "secrecy_rate", "solve_mrt", "solve_no_angle", "solve_no_irs",
    "solve_power_min", "solve_rate_max", "total_power", "worst_case_rate_mc",
]
