"""Core data structures for tabular MDPs, policies, schedules and nesting reports."""

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, NamedTuple, Optional, Sequence, Tuple

import numpy as np

PROBABILITY_TOLERANCE = 1e-9


def _frozen_array(values: Iterable, dtype: type) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """Finite MDP in successor-list form.

    Each (s, a) pair owns ``K`` successor slots; ``next_states[s, a, k]`` is
    reached with probability ``probs[s, a, k]``. Padding slots carry
    probability zero. Rewards follow the convention that ``reward[s, a]`` is
    paid on the step that takes action ``a`` in state ``s``.

    Attributes:
        next_states: Integer array of shape (S, A, K)
        probs: Float array of shape (S, A, K); every (s, a) row sums to 1
        reward: Float array of shape (S, A)
        gamma: Discount factor in [0, 1)
        terminal_states: Absorbing states (self-loop, reward 0)
    """
    next_states: np.ndarray
    probs: np.ndarray
    reward: np.ndarray
    gamma: float
    terminal_states: FrozenSet[int] = frozenset()
    terminal_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        """Validate shapes, probabilities and terminal handling."""
        next_states = _frozen_array(self.next_states, np.int64)
        probs = _frozen_array(self.probs, float)
        reward = _frozen_array(self.reward, float)

        if next_states.ndim != 3:
            raise ValueError(f"next_states must have shape (S, A, K): {next_states.shape}")
        if probs.shape != next_states.shape:
            raise ValueError(
                f"probs shape {probs.shape} does not match next_states {next_states.shape}"
            )
        n_states, n_actions, _ = next_states.shape
        if n_states == 0 or n_actions == 0:
            raise ValueError("MDP needs at least one state and one action")
        if reward.shape != (n_states, n_actions):
            raise ValueError(f"reward must have shape {(n_states, n_actions)}: {reward.shape}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1): {self.gamma}")
        if np.any(next_states < 0) or np.any(next_states >= n_states):
            raise ValueError("next_states references a state outside the MDP")
        if np.any(probs < 0.0):
            raise ValueError("Transition probabilities must be non-negative")
        sums = probs.sum(axis=2)
        if np.any(np.abs(sums - 1.0) > PROBABILITY_TOLERANCE):
            s, a = np.argwhere(np.abs(sums - 1.0) > PROBABILITY_TOLERANCE)[0]
            raise ValueError(f"Probabilities at ({s}, {a}) sum to {sums[s, a]!r}, not 1")
        if not np.all(np.isfinite(reward)):
            raise ValueError("Rewards must be finite")

        terminals = frozenset(int(s) for s in self.terminal_states)
        mask = np.zeros(n_states, dtype=bool)
        for s in sorted(terminals):
            if not 0 <= s < n_states:
                raise ValueError(f"Terminal state {s} outside the MDP")
            self_mass = np.where(next_states[s] == s, probs[s], 0.0).sum(axis=1)
            if np.any(np.abs(self_mass - 1.0) > PROBABILITY_TOLERANCE):
                raise ValueError(f"Terminal state {s} must self-loop under every action")
            if np.any(reward[s] != 0.0):
                raise ValueError(f"Terminal state {s} must carry zero reward")
            mask[s] = True
        mask.setflags(write=False)

        object.__setattr__(self, "next_states", next_states)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "reward", reward)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "terminal_states", terminals)
        object.__setattr__(self, "terminal_mask", mask)

    @classmethod
    def from_dense(
        cls,
        transition: np.ndarray,
        reward: np.ndarray,
        gamma: float,
        terminal_states: Iterable[int] = (),
    ) -> "TabularMDP":
        """Build an MDP from a dense (S, A, S) transition tensor.

        Terminal rows are compiled to zero-reward self-loops whatever the
        input says about them.

        Args:
            transition: Probabilities P(s' | s, a), shape (S, A, S)
            reward: Rewards R(s, a), shape (S, A)
            gamma: Discount factor
            terminal_states: States to make absorbing

        Returns:
            TabularMDP in successor-list form
        """
        dense = np.array(transition, dtype=float)
        rewards = np.array(reward, dtype=float)
        if dense.ndim != 3 or dense.shape[0] != dense.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S): {dense.shape}")
        n_states, n_actions, _ = dense.shape
        terminals = sorted({int(s) for s in terminal_states})
        for s in terminals:
            dense[s] = 0.0
            dense[s, :, s] = 1.0
            rewards[s] = 0.0

        width = max(1, int((dense > 0.0).sum(axis=2).max()))
        next_states = np.zeros((n_states, n_actions, width), dtype=np.int64)
        probs = np.zeros((n_states, n_actions, width), dtype=float)
        for s in range(n_states):
            for a in range(n_actions):
                support = np.flatnonzero(dense[s, a] > 0.0)
                next_states[s, a, :] = s
                next_states[s, a, : len(support)] = support
                probs[s, a, : len(support)] = dense[s, a, support]
        return cls(next_states, probs, rewards, gamma, frozenset(terminals))

    @property
    def n_states(self) -> int:
        """Number of states."""
        return int(self.next_states.shape[0])

    @property
    def n_actions(self) -> int:
        """Number of actions."""
        return int(self.next_states.shape[1])

    @property
    def is_deterministic(self) -> bool:
        """True if every (s, a) pair has a single successor."""
        return bool(np.all(self.probs.max(axis=2) == 1.0))

    def expected(self, values: np.ndarray) -> np.ndarray:
        """Expected next-state value E[V(s') | s, a] for every (s, a)."""
        return (self.probs * np.asarray(values)[self.next_states]).sum(axis=2)

    def transition_vector(self, state: int, action: int) -> np.ndarray:
        """Dense probability vector over next states for one (s, a) pair."""
        vector = np.zeros(self.n_states)
        np.add.at(vector, self.next_states[state, action], self.probs[state, action])
        return vector

    def with_reward(self, reward: np.ndarray) -> "TabularMDP":
        """Same dynamics and discount with a different reward table."""
        return TabularMDP(
            self.next_states, self.probs, reward, self.gamma, self.terminal_states
        )


@dataclass(frozen=True, eq=False)
class ValueFunction:
    """State values V(s) in return units."""
    values: np.ndarray

    def __post_init__(self) -> None:
        """Validate value vector."""
        values = _frozen_array(self.values, float)
        if values.ndim != 1:
            raise ValueError(f"Values must be a vector: {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("Values must be finite")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def __getitem__(self, state: int) -> float:
        return float(self.values[state])

    def max_abs_diff(self, other: "ValueFunction") -> float:
        """Sup-norm distance to another value function."""
        if len(self) != len(other):
            raise ValueError(f"Value functions differ in length: {len(self)} != {len(other)}")
        return float(np.max(np.abs(self.values - other.values)))


@dataclass(frozen=True, eq=False)
class DeterministicPolicy:
    """Stationary deterministic policy, one action id per state."""
    actions: np.ndarray

    def __post_init__(self) -> None:
        """Validate action vector."""
        actions = _frozen_array(self.actions, np.int64)
        if actions.ndim != 1:
            raise ValueError(f"Policy must be a vector of actions: {actions.shape}")
        if np.any(actions < 0):
            raise ValueError("Policy actions must be non-negative")
        object.__setattr__(self, "actions", actions)

    def __len__(self) -> int:
        return int(self.actions.shape[0])

    def __getitem__(self, state: int) -> int:
        return int(self.actions[state])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DeterministicPolicy):
            return NotImplemented
        return bool(np.array_equal(self.actions, other.actions))

    def __hash__(self) -> int:
        return hash(self.actions.tobytes())

    def check(self, mdp: TabularMDP) -> None:
        """Raise ValueError unless the policy fits the MDP."""
        if len(self) != mdp.n_states:
            raise ValueError(f"Policy covers {len(self)} states, MDP has {mdp.n_states}")
        if len(self) and int(self.actions.max()) >= mdp.n_actions:
            raise ValueError(f"Policy uses action {int(self.actions.max())} >= {mdp.n_actions}")


@dataclass(frozen=True, eq=False)
class PolicySet:
    """Product set of deterministic policies, stored as a (S, A) boolean mask."""
    allowed: np.ndarray

    def __post_init__(self) -> None:
        """Validate that every state allows at least one action."""
        allowed = _frozen_array(self.allowed, bool)
        if allowed.ndim != 2:
            raise ValueError(f"Allowed mask must have shape (S, A): {allowed.shape}")
        empty = np.flatnonzero(~allowed.any(axis=1))
        if len(empty):
            raise ValueError(f"State {int(empty[0])} has no allowed action")
        object.__setattr__(self, "allowed", allowed)

    def __len__(self) -> int:
        return int(self.allowed.shape[0])

    def actions(self, state: int) -> FrozenSet[int]:
        """Allowed actions at a state."""
        return frozenset(int(a) for a in np.flatnonzero(self.allowed[state]))

    def contains(self, policy: DeterministicPolicy) -> bool:
        """True if the policy picks an allowed action in every state."""
        if len(policy) != len(self):
            return False
        return bool(np.all(self.allowed[np.arange(len(self)), policy.actions]))


@dataclass(frozen=True)
class StageSchedule:
    """Stage transitions (t_1, ..., t_N) in global training steps; t_0 = 0.

    Stage ``i`` (0-based) is active on ``[t_i, t_{i+1})`` with ``t_0 = 0``;
    the last stage stays active from ``t_{N-1}`` on, including past ``t_N``.
    """
    transitions: Tuple[int, ...]

    def __post_init__(self) -> None:
        """Validate strict monotonicity."""
        transitions = tuple(int(t) for t in self.transitions)
        if not transitions:
            raise ValueError("Schedule needs at least one transition")
        if transitions[0] <= 0:
            raise ValueError(f"First transition must be positive: {transitions[0]}")
        for left, right in zip(transitions, transitions[1:]):
            if right <= left:
                raise ValueError(f"Transitions must strictly increase: {transitions}")
        object.__setattr__(self, "transitions", transitions)

    @property
    def n_stages(self) -> int:
        """Number of stages N."""
        return len(self.transitions)

    @property
    def final_step(self) -> int:
        """Last transition t_N."""
        return self.transitions[-1]

    def stage_index(self, step: int) -> int:
        """0-based index of the stage active at a global step."""
        if step < 0:
            raise ValueError(f"Global step must be non-negative: {step}")
        return min(bisect_right(self.transitions, step), self.n_stages - 1)

    def window(self, index: int) -> Tuple[int, int]:
        """Half-open window [t_{i-1}, t_i) of a 0-based stage index."""
        if not 0 <= index < self.n_stages:
            raise ValueError(f"Stage index {index} outside schedule of {self.n_stages} stages")
        start = 0 if index == 0 else self.transitions[index - 1]
        return start, self.transitions[index]

    @property
    def label(self) -> str:
        """Compact label such as ``10000-30000-50000``."""
        return "-".join(str(t) for t in self.transitions)

    @classmethod
    def from_label(cls, label: str) -> "StageSchedule":
        """Parse a label produced by :attr:`label`."""
        try:
            return cls(tuple(int(part) for part in label.split("-")))
        except ValueError as exc:
            raise ValueError(f"Invalid schedule label: {label!r}") from exc


class SupportViolation(NamedTuple):
    """State in supp(R_stage) missing from supp(R_stage+1); stages are 1-based."""
    stage: int
    state: int


class OptimalityViolation(NamedTuple):
    """Action breaking policy-set inclusion between stage and stage+1."""
    stage: int
    state: int
    action: int
    direction: str


@dataclass(frozen=True)
class NestingReport:
    """Outcome of anti-curriculum nesting checks.

    The ok flags are derived from the violation lists, so a flag is true
    exactly when its list is empty.

    Attributes:
        support_violations: Support-nesting violations
        optimality_violations: Policy-set nesting violations
        checks: Names of the checks that were run ("support", "optimality")
        directions: Inclusion directions checked for optimality
    """
    support_violations: Tuple[SupportViolation, ...] = ()
    optimality_violations: Tuple[OptimalityViolation, ...] = ()
    checks: FrozenSet[str] = frozenset()
    directions: Tuple[str, ...] = ()

    @property
    def support_ok(self) -> bool:
        """True if no support violation was found."""
        return not self.support_violations

    @property
    def optimality_ok(self) -> bool:
        """True if no optimality violation was found."""
        return not self.optimality_violations

    @property
    def ok(self) -> bool:
        """True if every check that ran passed."""
        return self.support_ok and self.optimality_ok

    def combine(self, other: "NestingReport") -> "NestingReport":
        """Merge two report fragments."""
        directions = self.directions + tuple(
            d for d in other.directions if d not in self.directions
        )
        return NestingReport(
            support_violations=self.support_violations + other.support_violations,
            optimality_violations=self.optimality_violations + other.optimality_violations,
            checks=self.checks | other.checks,
            directions=directions,
        )

    def to_text(self, state_labels: Optional[Sequence[str]] = None) -> str:
        """Render a plain-text listing of the report.

        Args:
            state_labels: Optional human-readable name per state

        Returns:
            Multi-line report string
        """
        def name(state: int) -> str:
            return state_labels[state] if state_labels is not None else str(state)

        lines = ["Nesting report", "=" * 40]
        if "support" in self.checks:
            status = "ok" if self.support_ok else f"{len(self.support_violations)} violation(s)"
            lines.append(f"Support nesting: {status}")
            for v in self.support_violations:
                lines.append(f"  - stage {v.stage} -> {v.stage + 1}: state {name(v.state)}")
        if "optimality" in self.checks:
            status = (
                "ok" if self.optimality_ok else f"{len(self.optimality_violations)} violation(s)"
            )
            lines.append(f"Optimality nesting ({', '.join(self.directions)}): {status}")
            for o in self.optimality_violations:
                lines.append(
                    f"  - [{o.direction}] stage {o.stage} -> {o.stage + 1}: "
                    f"state {name(o.state)}, action {o.action}"
                )
        return "\n".join(lines)
