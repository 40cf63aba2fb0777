"""Multi-operator cognitive satellite uplink resource allocation.

Scenario generation, channel models, the constrained sum-rate problem,
decentralized / equal-split / exhaustive solvers and Monte Carlo estimators
for the asymptotic decoupling of the interference constraints.
"""
from .errors import (CogSatError, CoincidentNodesError, InvalidConfigError, InvalidInputError,
                     OracleSizeError)
from .scenario import Region, Scenario, ScalingParams, generate_scenario, scaling_from
from .channel import BeamGainModel, ChannelParams, ChannelRealization, sample_channels
from .problem import Assignment, PowerAllocation, Problem, Thresholds, check_feasibility
from .solvers import (OperatorView, Solution, operator_view, solve_centralized_oracle,
                      solve_decentralized, solve_equal_split, solve_all)

__all__ = [
    "CogSatError", "CoincidentNodesError", "InvalidConfigError", "InvalidInputError", "OracleSizeError",
    "Region", "Scenario", "ScalingParams", "generate_scenario", "scaling_from",
    "BeamGainModel", "ChannelParams", "ChannelRealization", "sample_channels",
    "Assignment", "PowerAllocation", "Problem", "Thresholds", "check_feasibility",
    "OperatorView", "Solution", "operator_view", "solve_centralized_oracle", "solve_decentralized",
    "solve_equal_split", "solve_all",
]

__version__ = "0.1.0"
