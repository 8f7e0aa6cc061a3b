"""Guidance stacks, reward supports and switched-reward composition."""

from dataclasses import dataclass
from typing import FrozenSet, Iterable, Optional, Sequence, Tuple

import numpy as np

from stagerl.data_structures import StageSchedule, TabularMDP


@dataclass(frozen=True, eq=False)
class GuidanceStack:
    """Ordered reward tables R_1..R_N over one shared (S, A, P, gamma).

    Attributes:
        base: MDP supplying states, actions, dynamics and discount
        rewards: One (S, A) reward table per stage
        labels: Optional stage names, e.g. ("stage-1", "stage-2")
    """
    base: TabularMDP
    rewards: Tuple[np.ndarray, ...]
    labels: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        """Validate stage count and table shapes."""
        if not self.rewards:
            raise ValueError("Guidance stack needs at least one reward table")
        shape = (self.base.n_states, self.base.n_actions)
        tables = []
        for i, table in enumerate(self.rewards):
            array = np.array(table, dtype=float)
            if array.shape != shape:
                raise ValueError(f"Reward {i + 1} has shape {array.shape}, expected {shape}")
            array.setflags(write=False)
            tables.append(array)
        labels = tuple(self.labels) or tuple(f"stage-{i + 1}" for i in range(len(tables)))
        if len(labels) != len(tables):
            raise ValueError(f"Got {len(labels)} labels for {len(tables)} stages")
        object.__setattr__(self, "rewards", tuple(tables))
        object.__setattr__(self, "labels", labels)

    @property
    def n_stages(self) -> int:
        """Number of stages N."""
        return len(self.rewards)

    def stage_mdp(self, index: int) -> TabularMDP:
        """MDP <S, A, P, R_i, gamma> of a 0-based stage index."""
        return self.base.with_reward(self.rewards[index])

    def select(self, indices: Sequence[int]) -> "GuidanceStack":
        """Sub-stack keeping the given 0-based stage indices in order."""
        return GuidanceStack(
            self.base,
            tuple(self.rewards[i] for i in indices),
            tuple(self.labels[i] for i in indices),
        )


def _check_shape(reward: np.ndarray, mdp: TabularMDP) -> np.ndarray:
    array = np.asarray(reward, dtype=float)
    if array.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(
            f"Reward shape {array.shape} does not match MDP {(mdp.n_states, mdp.n_actions)}"
        )
    return array


def support(reward: np.ndarray, mdp: TabularMDP) -> FrozenSet[int]:
    """States with at least one action of nonzero reward (exact comparison)."""
    array = _check_shape(reward, mdp)
    return frozenset(int(s) for s in np.flatnonzero((array != 0.0).any(axis=1)))


class SwitchedReward:
    """Reward source that answers R_i(s, a) for the stage active at a global step."""

    def __init__(self, stack: GuidanceStack, schedule: StageSchedule) -> None:
        """Pair a stack with its schedule.

        Args:
            stack: Guidance stack with N stages
            schedule: Schedule with N transitions

        Raises:
            ValueError: If the lengths differ
        """
        if schedule.n_stages != stack.n_stages:
            raise ValueError(
                f"Schedule has {schedule.n_stages} transitions for {stack.n_stages} stages"
            )
        self.stack = stack
        self.schedule = schedule

    def stage_index(self, step: int) -> int:
        """0-based stage index active at a global step."""
        return self.schedule.stage_index(step)

    def table(self, step: int) -> np.ndarray:
        """Whole reward table active at a global step."""
        return self.stack.rewards[self.stage_index(step)]

    def reward(self, step: int, state: int, action: int) -> float:
        """R~(s, a) at a global step."""
        return float(self.table(step)[state, action])


def compose_switched_reward(stack: GuidanceStack, schedule: StageSchedule) -> SwitchedReward:
    """Compose a stack and schedule into a switched reward source."""
    return SwitchedReward(stack, schedule)


def potential_shaping(
    reward: np.ndarray, potential: np.ndarray, mdp: TabularMDP
) -> np.ndarray:
    """Add a potential-based term: R'(s, a) = R(s, a) + gamma E[Phi(s')] - Phi(s).

    Args:
        reward: Reward table (S, A)
        potential: Potential per state; must be zero on terminal states
        mdp: MDP supplying dynamics and discount

    Returns:
        Shaped reward table

    Raises:
        ValueError: On shape mismatch or nonzero terminal potential
    """
    table = _check_shape(reward, mdp)
    phi = np.asarray(potential, dtype=float)
    if phi.shape != (mdp.n_states,):
        raise ValueError(f"Potential must have length {mdp.n_states}: {phi.shape}")
    if np.any(phi[mdp.terminal_mask] != 0.0):
        raise ValueError("Potential must be zero on terminal states")
    return table + mdp.gamma * mdp.expected(phi) - phi[:, None]


def scaled_stack(
    mdp: TabularMDP,
    factors: Iterable[float],
    reward: Optional[np.ndarray] = None,
) -> GuidanceStack:
    """Reward-scaling guidance R_i = c_i * R with increasing positive factors.

    Args:
        mdp: MDP whose reward is scaled unless ``reward`` is given
        factors: Scale per stage, strictly increasing and positive
        reward: Optional reward table to scale instead of ``mdp.reward``

    Returns:
        Guidance stack sharing the MDP dynamics
    """
    scales = tuple(float(c) for c in factors)
    if not scales or any(c <= 0.0 for c in scales):
        raise ValueError(f"Scale factors must be positive: {scales}")
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise ValueError(f"Scale factors must strictly increase: {scales}")
    table = _check_shape(mdp.reward if reward is None else reward, mdp)
    return GuidanceStack(
        mdp, tuple(c * table for c in scales), tuple(f"x{c:g}" for c in scales)
    )
