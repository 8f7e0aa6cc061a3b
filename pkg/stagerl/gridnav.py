"""Gridworld analog of a four-object navigation task with staged reward guidance.

The agent starts at the centre of an N x N grid holding four objects, one of
which is the goal. Entering the goal pays +10 and ends the episode, entering
any other object pays -1 and ends it, running out of time pays -0.1, and every
step costs -0.01. Stage 2 adds +5 for entering the goal's proximity region,
stage 3 additionally -5 for entering a non-goal object's region.

Actions:
    0 = UP    (row - 1)
    1 = DOWN  (row + 1)
    2 = LEFT  (col - 1)
    3 = RIGHT (col + 1)

Moves into a wall or off the grid leave the agent in place.
"""

from collections import deque
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Dict, FrozenSet, List, Mapping, NamedTuple, Optional, Tuple, Union

import networkx as nx
import numpy as np

from stagerl.data_structures import TabularMDP
from stagerl.guidance import GuidanceStack

Cell = Tuple[int, int]

UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
ACTION_DELTAS = {
    UP: (-1, 0),
    DOWN: (1, 0),
    LEFT: (0, -1),
    RIGHT: (0, 1),
}
N_ACTIONS = len(ACTION_DELTAS)
N_OBJECTS = 4

GOAL_REWARD = 10.0
NONGOAL_REWARD = -1.0
TIMEOUT_REWARD = -0.1
STEP_REWARD = -0.01
GOAL_PROXIMITY_BONUS = 5.0
NONGOAL_PROXIMITY_PENALTY = -5.0

TIME_LIMITS = {1: 25, 2: 25, 3: 37}
MAP_UNITS = 700.0
PROXIMITY_UNITS = 200.0
DEFAULT_GAMMA = 0.99
DEFAULT_STATE_CAP = 200_000
MAX_LAYOUT_RETRIES = 100

METRICS = ("chebyshev", "manhattan", "euclidean")
BONUS_SEMANTICS = ("once", "per_step")


class LayoutError(ValueError):
    """Raised when a layout cannot be sampled under the given constraints."""


class StateSpaceError(ValueError):
    """Raised when a compiled MDP would exceed the configured state cap."""


class Outcome(str, Enum):
    """How an episode ended."""
    GOAL = "goal"
    NON_GOAL = "non_goal"
    TIMEOUT = "timeout"


TERMINAL_OUTCOMES = (Outcome.GOAL, Outcome.NON_GOAL, Outcome.TIMEOUT)


def proximity(cell_a: Cell, cell_b: Cell, metric: str = "chebyshev") -> float:
    """Distance between two cells in cell units.

    Args:
        cell_a: First cell (row, col)
        cell_b: Second cell (row, col)
        metric: "chebyshev", "manhattan" or "euclidean"

    Returns:
        Distance between the cells
    """
    dr = abs(cell_a[0] - cell_b[0])
    dc = abs(cell_a[1] - cell_b[1])
    if metric == "chebyshev":
        return float(max(dr, dc))
    if metric == "manhattan":
        return float(dr + dc)
    if metric == "euclidean":
        return float(np.hypot(dr, dc))
    raise ValueError(f"Unknown metric: {metric}")


def proximity_radius(grid_size: int) -> int:
    """Proximity radius scaled from 200 units on a 700-unit map."""
    return int(round(grid_size * PROXIMITY_UNITS / MAP_UNITS))


@dataclass(frozen=True)
class LayoutSpec:
    """Placement of the four objects, the goal and any walls.

    Attributes:
        level: Difficulty level (1, 2 or 3)
        grid_size: Odd side length N of the grid
        object_cells: Four distinct object cells
        goal_index: Which object is the goal (0..3)
        wall_cells: Wall cells (level 3)
        seed: Seed the layout was sampled with
    """
    level: int
    grid_size: int
    object_cells: Tuple[Cell, ...]
    goal_index: int = 0
    wall_cells: FrozenSet[Cell] = frozenset()
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate the layout."""
        if self.level not in TIME_LIMITS:
            raise ValueError(f"Level must be 1, 2 or 3: {self.level}")
        if self.grid_size < 3 or self.grid_size % 2 == 0:
            raise ValueError(f"grid_size must be odd and >= 3: {self.grid_size}")
        objects = tuple((int(r), int(c)) for r, c in self.object_cells)
        walls = frozenset((int(r), int(c)) for r, c in self.wall_cells)
        if len(objects) != N_OBJECTS or len(set(objects)) != N_OBJECTS:
            raise ValueError(f"Layout needs {N_OBJECTS} distinct objects: {objects}")
        for cell in objects + tuple(sorted(walls)):
            if not self.in_grid(cell):
                raise ValueError(f"Cell {cell} outside {self.grid_size}x{self.grid_size} grid")
        if self.start in objects or self.start in walls:
            raise ValueError(f"Start cell {self.start} must be free")
        if walls & set(objects):
            raise ValueError("Objects cannot sit on walls")
        if not 0 <= self.goal_index < N_OBJECTS:
            raise ValueError(f"goal_index must be in 0..{N_OBJECTS - 1}: {self.goal_index}")
        object.__setattr__(self, "object_cells", objects)
        object.__setattr__(self, "wall_cells", walls)

    @property
    def start(self) -> Cell:
        """Centre cell where every episode starts."""
        return (self.grid_size // 2, self.grid_size // 2)

    @property
    def goal_cell(self) -> Cell:
        """Cell of the goal object."""
        return self.object_cells[self.goal_index]

    @property
    def nongoal_cells(self) -> Tuple[Cell, ...]:
        """Cells of the three other objects, in layout order."""
        return tuple(c for i, c in enumerate(self.object_cells) if i != self.goal_index)

    def in_grid(self, cell: Cell) -> bool:
        """True if the cell lies on the grid."""
        return 0 <= cell[0] < self.grid_size and 0 <= cell[1] < self.grid_size

    def is_blocked(self, cell: Cell) -> bool:
        """True if moving into the cell is impossible."""
        return not self.in_grid(cell) or cell in self.wall_cells

    def to_text(self) -> str:
        """Render as a text grid: ``.`` empty, ``#`` wall, ``G`` goal, ``O`` other, ``S`` start."""
        rows = []
        for r in range(self.grid_size):
            row = []
            for c in range(self.grid_size):
                cell = (r, c)
                if cell == self.start:
                    row.append("S")
                elif cell == self.goal_cell:
                    row.append("G")
                elif cell in self.object_cells:
                    row.append("O")
                elif cell in self.wall_cells:
                    row.append("#")
                else:
                    row.append(".")
            rows.append("".join(row))
        return "\n".join(rows)


def reachable_cells(layout: LayoutSpec) -> FrozenSet[Cell]:
    """Cells the agent can reach from the start, objects included.

    Objects end the episode, so paths may end on them but never pass through.
    """
    graph = nx.grid_2d_graph(layout.grid_size, layout.grid_size)
    graph.remove_nodes_from(layout.wall_cells)
    passable = graph.subgraph(c for c in graph if c not in layout.object_cells)
    component = nx.node_connected_component(passable, layout.start)
    reached = set(component)
    for cell in layout.object_cells:
        if any(neighbour in component for neighbour in graph.neighbors(cell)):
            reached.add(cell)
    return frozenset(reached)


def goal_reachable(layout: LayoutSpec) -> bool:
    """True if some path from the start ends on the goal."""
    return layout.goal_cell in reachable_cells(layout)


def canonical_layout(grid_size: int) -> LayoutSpec:
    """Fixed level-1 layout: objects at the four diagonal mid-quadrant cells.

    For N = 7 the objects sit at (1, 1), (1, 5), (5, 1), (5, 5) around the
    start (3, 3); the goal is the first of them.
    """
    centre = grid_size // 2
    low, high = centre // 2, grid_size - 1 - centre // 2
    objects = ((low, low), (low, high), (high, low), (high, high))
    return LayoutSpec(level=1, grid_size=grid_size, object_cells=objects, goal_index=0)


def _sample_walls(
    rng: np.random.Generator, grid_size: int, objects: Tuple[Cell, ...], start: Cell
) -> FrozenSet[Cell]:
    length = max(2, grid_size // 2)
    walls = set()
    for _ in range(2):
        horizontal = bool(rng.integers(2))
        fixed = int(rng.integers(grid_size))
        offset = int(rng.integers(grid_size - length + 1))
        for k in range(length):
            cell = (fixed, offset + k) if horizontal else (offset + k, fixed)
            if cell != start and cell not in objects:
                walls.add(cell)
    return frozenset(walls)


def make_level(
    level: int,
    grid_size: int,
    seed: int,
    exclusion_radius: Optional[int] = None,
    max_retries: int = MAX_LAYOUT_RETRIES,
) -> LayoutSpec:
    """Generate a layout for a difficulty level.

    Level 1 is the seed-invariant canonical layout. Levels 2 and 3 sample the
    objects uniformly among cells at least ``exclusion_radius`` from the
    start (default: proximity radius + 1) and a goal among them; level 3 adds
    two wall segments. Candidates whose goal cannot be reached are redrawn.

    Args:
        level: 1, 2 or 3
        grid_size: Odd grid side length, at least 7
        seed: Seed for the layout stream
        exclusion_radius: Minimum object distance from the start
        max_retries: Redraws before giving up

    Returns:
        LayoutSpec

    Raises:
        ValueError: If arguments are out of range
        LayoutError: If no valid layout was found
    """
    if grid_size < 7 or grid_size % 2 == 0:
        raise ValueError(f"grid_size must be odd and >= 7: {grid_size}")
    if level not in TIME_LIMITS:
        raise ValueError(f"Level must be 1, 2 or 3: {level}")
    if level == 1:
        return canonical_layout(grid_size)

    exclusion = proximity_radius(grid_size) + 1 if exclusion_radius is None else exclusion_radius
    start = (grid_size // 2, grid_size // 2)
    candidates = [
        (r, c)
        for r in range(grid_size)
        for c in range(grid_size)
        if (r, c) != start and proximity((r, c), start) >= exclusion
    ]
    if len(candidates) < N_OBJECTS:
        raise LayoutError(
            f"Only {len(candidates)} cells lie outside exclusion radius {exclusion}"
        )

    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        picks = rng.choice(len(candidates), size=N_OBJECTS, replace=False)
        objects = tuple(candidates[int(i)] for i in picks)
        goal_index = int(rng.integers(N_OBJECTS))
        walls = _sample_walls(rng, grid_size, objects, start) if level == 3 else frozenset()
        layout = LayoutSpec(level, grid_size, objects, goal_index, walls, seed)
        if goal_reachable(layout):
            return layout
    raise LayoutError(f"No reachable level-{level} layout after {max_retries} attempts")


def sample_layouts(
    level: int,
    grid_size: int,
    seed: int,
    count: int,
    exclusion_radius: Optional[int] = None,
) -> Tuple[LayoutSpec, ...]:
    """Frozen set of layouts derived from one seed stream.

    Level 1 always yields the single canonical layout.
    """
    if count < 1:
        raise ValueError(f"count must be positive: {count}")
    if level == 1:
        return (canonical_layout(grid_size),)
    seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, size=count)
    return tuple(make_level(level, grid_size, int(s), exclusion_radius) for s in seeds)


@dataclass(frozen=True)
class GridNavEnv:
    """Navigation task on one layout at one guidance stage.

    Attributes:
        layout: Object, goal and wall placement
        stage: Guidance stage (1, 2 or 3)
        time_limit: Steps per episode (default: 25 for levels 1-2, 37 for level 3)
        proximity_radius: Radius of the proximity regions (default: scaled 200/700)
        metric: Distance metric for proximity
        bonus_semantics: "once" (first entry per episode) or "per_step"
        gamma: Discount factor of the compiled MDP
    """
    layout: LayoutSpec
    stage: int = 1
    time_limit: Optional[int] = None
    proximity_radius: Optional[int] = None
    metric: str = "chebyshev"
    bonus_semantics: str = "once"
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self) -> None:
        """Fill level defaults and validate."""
        if self.time_limit is None:
            object.__setattr__(self, "time_limit", TIME_LIMITS[self.layout.level])
        if self.proximity_radius is None:
            object.__setattr__(
                self, "proximity_radius", proximity_radius(self.layout.grid_size)
            )
        if self.stage not in (1, 2, 3):
            raise ValueError(f"Stage must be 1, 2 or 3: {self.stage}")
        if self.time_limit < 1:
            raise ValueError(f"time_limit must be positive: {self.time_limit}")
        if self.proximity_radius < 0:
            raise ValueError(f"proximity_radius must be non-negative: {self.proximity_radius}")
        if self.metric not in METRICS:
            raise ValueError(f"Unknown metric: {self.metric}")
        if self.bonus_semantics not in BONUS_SEMANTICS:
            raise ValueError(f"Unknown bonus semantics: {self.bonus_semantics}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1): {self.gamma}")

    def within(self, cell: Cell, target: Cell) -> bool:
        """True if ``cell`` lies inside the proximity region of ``target``."""
        return proximity(cell, target, self.metric) <= self.proximity_radius


class NavState(NamedTuple):
    """Non-terminal state: position, remaining time and one-time bonus flags."""
    cell: Cell
    steps_left: int
    goal_bonus_taken: bool = False
    nongoal_bonus_taken: Tuple[bool, bool, bool] = (False, False, False)


class RewardTerms(NamedTuple):
    """Additive reward terms of one transition."""
    step: float
    timeout: float
    goal: float
    nongoal: float
    goal_proximity: float
    nongoal_proximity: float

    def stage_total(self, stage: int) -> float:
        """Reward paid at a stage: base terms plus that stage's shaping."""
        total = self.step + self.timeout + self.goal + self.nongoal
        if stage >= 2:
            total += self.goal_proximity
        if stage >= 3:
            total += self.nongoal_proximity
        return total


def _stage_tables(
    terms: np.ndarray,
) -> Tuple[Tuple[np.ndarray, ...], Tuple[np.ndarray, ...], np.ndarray]:
    """Per-stage reward and component tables from a (..., 6) array of reward terms.

    Sums run in the same order as :meth:`RewardTerms.stage_total`, so the
    tables match per-transition evaluation exactly.
    """
    step, timeout, goal, nongoal, goal_prox, nongoal_prox = np.moveaxis(terms, -1, 0)
    base = step + timeout + goal + nongoal
    stage_2 = base + goal_prox
    rewards = (base, stage_2, stage_2 + nongoal_prox)
    arrival = np.abs(goal) + np.abs(nongoal)
    arrival_2 = arrival + np.abs(goal_prox)
    components = (arrival, arrival_2, arrival_2 + np.abs(nongoal_prox))
    return rewards, components, np.abs(step) + np.abs(timeout)


class Move(NamedTuple):
    """Geometry of one action from one cell, independent of time and flags."""
    target: Cell
    arrival: Optional[Outcome]
    in_goal: bool
    in_nongoal: Tuple[bool, ...]


def _move(env: GridNavEnv, cell: Cell, action: int) -> Move:
    layout = env.layout
    dr, dc = ACTION_DELTAS[action]
    target = (cell[0] + dr, cell[1] + dc)
    if layout.is_blocked(target):
        target = cell
    goal_cell = layout.goal_cell
    nongoal_cells = layout.nongoal_cells
    arrival: Optional[Outcome] = None
    if target == goal_cell:
        arrival = Outcome.GOAL
    elif target in nongoal_cells:
        arrival = Outcome.NON_GOAL
    return Move(
        target,
        arrival,
        env.within(target, goal_cell),
        tuple(env.within(target, other) for other in nongoal_cells),
    )


def move_table(env: GridNavEnv) -> Dict[Cell, Tuple[Move, ...]]:
    """Moves of every action from every open cell of the layout."""
    layout = env.layout
    return {
        (r, c): tuple(_move(env, (r, c), action) for action in range(N_ACTIONS))
        for r in range(layout.grid_size)
        for c in range(layout.grid_size)
        if not layout.is_blocked((r, c))
    }


class Transition(NamedTuple):
    """Result of one step: next state (None if terminal), outcome and reward terms."""
    next_state: Optional[NavState]
    outcome: Optional[Outcome]
    terms: RewardTerms


def initial_state(env: GridNavEnv) -> NavState:
    """State at the start of every episode."""
    return NavState(env.layout.start, env.time_limit)


def _tracked_flags(env: GridNavEnv, full_state: bool) -> Tuple[bool, bool]:
    if env.bonus_semantics == "per_step":
        return False, False
    if full_state:
        return True, True
    return env.stage >= 2, env.stage >= 3


def _advance(
    env: GridNavEnv, state: NavState, move: Move, tracked: Tuple[bool, bool]
) -> Transition:
    target, outcome, in_goal, in_nongoal = move
    steps_left = state.steps_left - 1
    if outcome is None and steps_left == 0:
        outcome = Outcome.TIMEOUT

    near_nongoal = any(in_nongoal)
    if env.bonus_semantics == "once":
        goal_entry = in_goal and not state.goal_bonus_taken
        nongoal_entries = 0
        if near_nongoal:
            nongoal_entries = sum(
                1 for inside, taken in zip(in_nongoal, state.nongoal_bonus_taken)
                if inside and not taken
            )
    else:
        goal_entry = in_goal
        nongoal_entries = sum(in_nongoal)

    terms = RewardTerms(
        step=STEP_REWARD,
        timeout=TIMEOUT_REWARD if outcome is Outcome.TIMEOUT else 0.0,
        goal=GOAL_REWARD if outcome is Outcome.GOAL else 0.0,
        nongoal=NONGOAL_REWARD if outcome is Outcome.NON_GOAL else 0.0,
        goal_proximity=GOAL_PROXIMITY_BONUS if goal_entry else 0.0,
        nongoal_proximity=NONGOAL_PROXIMITY_PENALTY * nongoal_entries,
    )
    if outcome is not None:
        return Transition(None, outcome, terms)

    track_goal, track_nongoal = tracked
    goal_flag = (state.goal_bonus_taken or in_goal) if track_goal else False
    nongoal_flags = state.nongoal_bonus_taken if track_nongoal else (False, False, False)
    if track_nongoal and near_nongoal:
        nongoal_flags = tuple(
            taken or inside for taken, inside in zip(nongoal_flags, in_nongoal)
        )
    return Transition(NavState(target, steps_left, goal_flag, nongoal_flags), outcome, terms)


def step_transition(
    env: GridNavEnv, state: NavState, action: int, full_state: bool = False
) -> Transition:
    """Apply one action to a non-terminal state.

    Args:
        env: The task
        state: Current state
        action: Action id 0..3
        full_state: Track every bonus flag regardless of stage

    Returns:
        Transition with next state, outcome and reward terms
    """
    if action not in ACTION_DELTAS:
        raise ValueError(f"Unknown action: {action}")
    if state.steps_left < 1:
        raise ValueError(f"No steps left in state {state}")
    return _advance(
        env, state, _move(env, state.cell, action), _tracked_flags(env, full_state)
    )


def stage_reward(
    env: GridNavEnv,
    state: NavState,
    action: int,
    next_state: Optional[NavState] = None,
) -> float:
    """Reward of a transition under the env's stage.

    Args:
        env: The task (its stage selects the reward terms)
        state: State the action is taken in
        action: Action id
        next_state: Expected successor; checked against the dynamics when given

    Returns:
        Stage reward

    Raises:
        ValueError: If ``next_state`` is not what the dynamics produce
    """
    transition = step_transition(env, state, action, full_state=True)
    if next_state is not None:
        produced = transition.next_state
        if produced is None or produced.cell != next_state.cell:
            raise ValueError(f"Illegal transition {state} --{action}--> {next_state}")
    return transition.terms.stage_total(env.stage)


class GridNavSimulator:
    """Episode rollout over :class:`NavState`, sharing dynamics with the compiler."""

    def __init__(self, env: GridNavEnv, full_state: bool = False) -> None:
        """Create a simulator.

        Args:
            env: The task
            full_state: Track every bonus flag regardless of stage
        """
        self.env = env
        self.full_state = full_state
        self._tracked = _tracked_flags(env, full_state)
        self._moves = move_table(env)
        self.state: Optional[NavState] = None
        self.outcome: Optional[Outcome] = None
        self.steps = 0

    def reset(self) -> NavState:
        """Start a new episode."""
        self.state = initial_state(self.env)
        self.outcome = None
        self.steps = 0
        return self.state

    @property
    def done(self) -> bool:
        """True once the episode has ended."""
        return self.outcome is not None

    def step(self, action: int) -> Tuple[Optional[NavState], float, bool, Optional[Outcome]]:
        """Advance the episode by one action.

        Returns:
            (next state or None, reward, done, outcome)
        """
        if self.state is None or self.done:
            raise ValueError("Call reset() before stepping a finished episode")
        if action not in ACTION_DELTAS:
            raise ValueError(f"Unknown action: {action}")
        move = self._moves[self.state.cell][action]
        transition = _advance(self.env, self.state, move, self._tracked)
        self.steps += 1
        self.state = transition.next_state
        self.outcome = transition.outcome
        return (
            transition.next_state,
            transition.terms.stage_total(self.env.stage),
            self.done,
            transition.outcome,
        )


StateEntry = Union[NavState, Outcome]


@dataclass(frozen=True, eq=False)
class NavModel:
    """Compiled tabular form of a :class:`GridNavEnv`.

    States 0, 1, 2 are the absorbing goal, non-goal and timeout states; the
    start state follows, then states in breadth-first discovery order.

    Attributes:
        env: Source task
        mdp: MDP with the env's stage reward
        states: State entry per index
        index: Map from non-terminal state to index
        start_state: Index of the initial state
        stage_rewards: Reward tables of stages 1, 2, 3
        components: Stage-specific term magnitudes of stages 1, 2, 3
        base_magnitude: Magnitude of the terms common to all stages
    """
    env: GridNavEnv
    mdp: TabularMDP
    states: Tuple[StateEntry, ...]
    index: Mapping[NavState, int]
    start_state: int
    stage_rewards: Tuple[np.ndarray, ...]
    components: Tuple[np.ndarray, ...]
    base_magnitude: np.ndarray

    @property
    def outcomes(self) -> Dict[int, str]:
        """Outcome label of each terminal state."""
        return {i: outcome.value for i, outcome in enumerate(TERMINAL_OUTCOMES)}

    def stage_mdp(self, stage: int) -> TabularMDP:
        """MDP paying the reward of a 1-based stage."""
        return self.mdp.with_reward(self.stage_rewards[stage - 1])

    def guidance_stack(self, stages: Tuple[int, ...] = (1, 2, 3)) -> GuidanceStack:
        """Stack of the given 1-based stage rewards over the shared state space."""
        return GuidanceStack(
            self.stage_mdp(1),
            tuple(self.stage_rewards[s - 1] for s in stages),
            tuple(f"stage-{s}" for s in stages),
        )

    def component_stack(
        self, stages: Tuple[int, ...] = (1, 2, 3), include_base: bool = False
    ) -> GuidanceStack:
        """Stack of shaping-component magnitudes, used for support checks.

        Args:
            stages: 1-based stages to include
            include_base: Add the step and timeout terms common to all stages
        """
        extra = self.base_magnitude if include_base else 0.0
        return GuidanceStack(
            self.stage_mdp(1),
            tuple(self.components[s - 1] + extra for s in stages),
            tuple(f"stage-{s}" for s in stages),
        )

    def state_label(self, index: int) -> str:
        """Readable label of a state index."""
        entry = self.states[index]
        if isinstance(entry, Outcome):
            return entry.value
        flags = "".join("1" if f else "0" for f in entry.nongoal_bonus_taken)
        return (
            f"({entry.cell[0]},{entry.cell[1]}) t={entry.steps_left} "
            f"g={int(entry.goal_bonus_taken)} n={flags}"
        )


def compile_nav(
    env: GridNavEnv, full_state: bool = False, state_cap: int = DEFAULT_STATE_CAP
) -> NavModel:
    """Enumerate the reachable states of a task into an exact tabular MDP.

    Args:
        env: The task
        full_state: Track every bonus flag so all stages share one state space
        state_cap: Largest allowed number of states

    Returns:
        NavModel with the MDP, state index and per-stage reward tables

    Raises:
        StateSpaceError: If the state count exceeds ``state_cap``
    """
    tracked = _tracked_flags(env, full_state)
    n_terminal = len(TERMINAL_OUTCOMES)
    terminal_index = {outcome: i for i, outcome in enumerate(TERMINAL_OUTCOMES)}

    start = initial_state(env)
    states: List[StateEntry] = list(TERMINAL_OUTCOMES) + [start]
    index: Dict[NavState, int] = {start: n_terminal}
    successors: List[List[int]] = []
    terms_table: List[List[RewardTerms]] = []
    moves = move_table(env)
    queue = deque([start])

    while queue:
        state = queue.popleft()
        row_next: List[int] = []
        row_terms: List[RewardTerms] = []
        for action in range(N_ACTIONS):
            transition = _advance(env, state, moves[state.cell][action], tracked)
            if transition.outcome is not None:
                target = terminal_index[transition.outcome]
            else:
                nxt = transition.next_state
                target = index.get(nxt, -1)
                if target < 0:
                    target = len(states)
                    if target >= state_cap:
                        raise StateSpaceError(
                            f"Compiled MDP exceeds state cap of {state_cap} states"
                        )
                    index[nxt] = target
                    states.append(nxt)
                    queue.append(nxt)
            row_next.append(target)
            row_terms.append(transition.terms)
        successors.append(row_next)
        terms_table.append(row_terms)

    n_states = len(states)
    next_states = np.empty((n_states, N_ACTIONS, 1), dtype=np.int64)
    next_states[:n_terminal, :, 0] = np.arange(n_terminal)[:, None]
    next_states[n_terminal:, :, 0] = np.array(successors, dtype=np.int64)
    probs = np.ones((n_states, N_ACTIONS, 1))

    terms = np.zeros((n_states, N_ACTIONS, len(RewardTerms._fields)))
    terms[n_terminal:] = terms_table
    stage_rewards, components, base_magnitude = _stage_tables(terms)

    mdp = TabularMDP(
        next_states,
        probs,
        stage_rewards[env.stage - 1],
        env.gamma,
        frozenset(range(n_terminal)),
    )
    return NavModel(
        env=env,
        mdp=mdp,
        states=tuple(states),
        index=index,
        start_state=n_terminal,
        stage_rewards=stage_rewards,
        components=components,
        base_magnitude=base_magnitude,
    )


def to_tabular(
    env: GridNavEnv, full_state: bool = False, state_cap: int = DEFAULT_STATE_CAP
) -> TabularMDP:
    """Exact finite MDP of a task at its stage."""
    return compile_nav(env, full_state, state_cap).mdp


@dataclass(frozen=True)
class FamilySpec:
    """Recipe for a frozen family of compiled tasks.

    Attributes:
        level: Difficulty level
        grid_size: Grid side length
        seed: Seed of the layout stream
        size: Number of layouts (level 1 always has one)
        time_limit: Override of the level time limit
        proximity_radius: Override of the scaled proximity radius
        exclusion_radius: Override of the object exclusion radius
        metric: Proximity metric
        bonus_semantics: "once" or "per_step"
        gamma: Discount factor
        state_cap: Cap on compiled states per layout
    """
    level: int = 2
    grid_size: int = 7
    seed: int = 0
    size: int = 20
    time_limit: Optional[int] = None
    proximity_radius: Optional[int] = None
    exclusion_radius: Optional[int] = None
    metric: str = "chebyshev"
    bonus_semantics: str = "once"
    gamma: float = DEFAULT_GAMMA
    state_cap: int = DEFAULT_STATE_CAP

    def layouts(self) -> Tuple[LayoutSpec, ...]:
        """Layouts of the family."""
        return sample_layouts(
            self.level, self.grid_size, self.seed, self.size, self.exclusion_radius
        )

    def envs(self, stage: int = 1) -> Tuple[GridNavEnv, ...]:
        """One env per layout at the given stage."""
        return tuple(
            GridNavEnv(
                layout,
                stage=stage,
                time_limit=self.time_limit,
                proximity_radius=self.proximity_radius,
                metric=self.metric,
                bonus_semantics=self.bonus_semantics,
                gamma=self.gamma,
            )
            for layout in self.layouts()
        )


@lru_cache(maxsize=8)
def build_family(spec: FamilySpec) -> Tuple[NavModel, ...]:
    """Compile every layout of a family over the full (all-flags) state space."""
    return tuple(compile_nav(env, full_state=True, state_cap=spec.state_cap) for env in spec.envs())
