"""Guidance stacks used as positive and negative controls for the validators."""

from typing import Optional

import numpy as np

from stagerl.data_structures import TabularMDP
from stagerl.gridnav import GridNavEnv, NavModel, canonical_layout, compile_nav
from stagerl.guidance import GuidanceStack, potential_shaping
from stagerl.mdp import value_iteration


def loitering_model(grid_size: int = 5, time_limit: Optional[int] = None) -> NavModel:
    """Level-1 canonical task with a +5 bonus paid on every step inside the goal region.

    Loitering near the goal then outearns reaching it, so the stage-2
    optimal actions near the goal are not optimal at stage 1.
    """
    env = GridNavEnv(canonical_layout(grid_size), time_limit=time_limit, bonus_semantics="per_step")
    return compile_nav(env)


def loitering_stack(grid_size: int = 5, time_limit: Optional[int] = None) -> GuidanceStack:
    """Stage-1 and per-step stage-2 rewards of :func:`loitering_model`."""
    return loitering_model(grid_size, time_limit).guidance_stack((1, 2))


def potential_stack(mdp: TabularMDP, potential: Optional[np.ndarray] = None) -> GuidanceStack:
    """Stack (R, R + gamma Phi(s') - Phi(s)); defaults to Phi = V* of ``mdp``.

    Potential-based shaping shifts each state's Q-values by a constant, so
    the optimal action sets of the two stages coincide.
    """
    if potential is None:
        potential = value_iteration(mdp).values.copy()
        potential[mdp.terminal_mask] = 0.0
    shaped = potential_shaping(mdp.reward, potential, mdp)
    return GuidanceStack(mdp, (mdp.reward, shaped), ("base", "potential"))
