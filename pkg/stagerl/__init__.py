"""Staged reward guidance for tabular reinforcement learning (stagerl) package.

A package for building multi-stage reward guidances, checking that their
supports and optimal policy sets nest, training under switched rewards and
searching for the critical period of stage transitions.
"""

from stagerl.config import ConfigError, ExperimentConfig
from stagerl.core import Experiment
from stagerl.data_structures import (
    DeterministicPolicy,
    NestingReport,
    PolicySet,
    StageSchedule,
    TabularMDP,
    ValueFunction,
)
from stagerl.guidance import GuidanceStack, SwitchedReward

__version__ = "0.1.0"
__all__ = [
    "ConfigError",
    "DeterministicPolicy",
    "Experiment",
    "ExperimentConfig",
    "GuidanceStack",
    "NestingReport",
    "PolicySet",
    "StageSchedule",
    "SwitchedReward",
    "TabularMDP",
    "ValueFunction",
]
