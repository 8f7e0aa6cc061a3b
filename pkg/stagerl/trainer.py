"""Tabular learners trained under a switched reward.

Two algorithms are provided: epsilon-greedy Q-learning and one-step
actor-critic with a softmax policy table. Each training task (one compiled
layout) carries its own parameter table; an episode's task is drawn from the
family by the seeded stream.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from stagerl.data_structures import DeterministicPolicy, StageSchedule, TabularMDP, ValueFunction
from stagerl.guidance import compose_switched_reward, GuidanceStack
from stagerl.mdp import is_eps_converged, value_iteration

logger = logging.getLogger(__name__)

ALGORITHMS = ("q_learning", "actor_critic")
ANCHORS = ("first", "final")
GOAL_OUTCOME = "goal"
TRUNCATED_OUTCOME = "truncated"
NOT_CONVERGED: Optional[int] = None


@dataclass(frozen=True)
class TrainerConfig:
    """Hyperparameters of a training run.

    Attributes:
        algorithm: "q_learning" or "actor_critic"
        learning_rate: Q-learning step size
        actor_lr: Actor step size (actor-critic)
        critic_lr: Critic step size (actor-critic)
        epsilon_start: Initial exploration rate (Q-learning)
        epsilon_end: Final exploration rate (Q-learning)
        epsilon_decay_steps: Steps of linear decay (default: a third of training)
        temperature: Softmax temperature (actor-critic)
        total_steps: Environment steps of the run
        snapshot_every: Steps between snapshots (default: total_steps // 200)
        seed: Seed of the run's random stream
        max_episode_steps: Truncate episodes after this many steps
        record_steps: Keep a per-step log of rewards
    """
    algorithm: str = "q_learning"
    learning_rate: float = 0.1
    actor_lr: float = 0.05
    critic_lr: float = 0.01
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: Optional[int] = None
    temperature: float = 1.0
    total_steps: int = 80_000
    snapshot_every: Optional[int] = None
    seed: int = 0
    max_episode_steps: Optional[int] = None
    record_steps: bool = False

    def __post_init__(self) -> None:
        """Fill derived defaults and validate."""
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"Unknown algorithm: {self.algorithm}")
        if self.total_steps < 1:
            raise ValueError(f"total_steps must be positive: {self.total_steps}")
        for name in ("learning_rate", "actor_lr", "critic_lr", "temperature"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive: {getattr(self, name)}")
        for name in ("epsilon_start", "epsilon_end"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]: {getattr(self, name)}")
        if self.epsilon_decay_steps is None:
            object.__setattr__(self, "epsilon_decay_steps", max(1, self.total_steps // 3))
        if self.snapshot_every is None:
            object.__setattr__(self, "snapshot_every", max(1, self.total_steps // 200))
        if self.epsilon_decay_steps < 1:
            raise ValueError(f"epsilon_decay_steps must be positive: {self.epsilon_decay_steps}")
        if self.snapshot_every < 1:
            raise ValueError(f"snapshot_every must be positive: {self.snapshot_every}")
        if self.max_episode_steps is not None and self.max_episode_steps < 1:
            raise ValueError(f"max_episode_steps must be positive: {self.max_episode_steps}")

    def epsilon(self, step: int) -> float:
        """Exploration rate at a global step (linear decay, then constant)."""
        fraction = min(1.0, step / self.epsilon_decay_steps)
        return self.epsilon_start + fraction * (self.epsilon_end - self.epsilon_start)


@dataclass(frozen=True)
class TrainingTask:
    """One environment a trainer can act in.

    Attributes:
        stack: Guidance stack over the task's state space
        start_state: Index of the initial state
        outcomes: Label of each terminal state, e.g. {0: "goal"}
    """
    stack: GuidanceStack
    start_state: int
    outcomes: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Validate the start state."""
        if not 0 <= self.start_state < self.stack.base.n_states:
            raise ValueError(f"start_state out of range: {self.start_state}")

    def outcome(self, state: int) -> str:
        """Outcome label of a terminal state."""
        return self.outcomes.get(state, "terminal")


@dataclass(frozen=True)
class Snapshot:
    """Greedy policies of every task at a global step, with a parameter digest."""
    step: int
    policies: Tuple[DeterministicPolicy, ...]
    digest: str


class EpisodeRecord(NamedTuple):
    """A finished episode."""
    end_step: int
    task: int
    episode_return: float
    outcome: str
    length: int
    stage_index: int


@dataclass(frozen=True, eq=False)
class StepLog:
    """Per-step record of a run, one entry per environment step."""
    step: np.ndarray
    task: np.ndarray
    state: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    stage_index: np.ndarray

    def __len__(self) -> int:
        return int(self.step.shape[0])


@dataclass(frozen=True)
class TrainingTrace:
    """Everything a training run produced.

    Attributes:
        config: Configuration of the run
        schedule: Stage schedule the reward followed
        snapshots: Snapshots in increasing step order
        episodes: Finished episodes in order
        step_log: Per-step log when ``record_steps`` was set
    """
    config: TrainerConfig
    schedule: StageSchedule
    snapshots: Tuple[Snapshot, ...]
    episodes: Tuple[EpisodeRecord, ...]
    step_log: Optional[StepLog] = None

    @property
    def final_policies(self) -> Tuple[DeterministicPolicy, ...]:
        """Greedy policies at the end of training."""
        return self.snapshots[-1].policies

    def outcome_counts(self) -> Dict[str, int]:
        """Number of finished episodes per outcome."""
        counts: Dict[str, int] = {}
        for record in self.episodes:
            counts[record.outcome] = counts.get(record.outcome, 0) + 1
        return counts


def _digest(tables: Sequence[np.ndarray]) -> str:
    sha = hashlib.sha256()
    for table in tables:
        sha.update(np.ascontiguousarray(table).tobytes())
    return sha.hexdigest()


def _snapshot(step: int, tables: Sequence[np.ndarray]) -> Snapshot:
    policies = tuple(DeterministicPolicy(np.argmax(table, axis=1)) for table in tables)
    return Snapshot(step, policies, _digest(tables))


def _check_tasks(tasks: Sequence[TrainingTask], schedule: StageSchedule) -> None:
    if not tasks:
        raise ValueError("Training needs at least one task")
    n_actions = tasks[0].stack.base.n_actions
    for i, task in enumerate(tasks):
        if task.stack.n_stages != schedule.n_stages:
            raise ValueError(
                f"Task {i} has {task.stack.n_stages} stages, schedule has {schedule.n_stages}"
            )
        if task.stack.base.n_actions != n_actions:
            raise ValueError(
                f"Task {i} has {task.stack.base.n_actions} actions, expected {n_actions}"
            )


def _sample_successor(
    rng: np.random.Generator, mdp: TabularMDP, cumulative: np.ndarray, state: int, action: int
) -> int:
    if mdp.next_states.shape[2] == 1:
        return int(mdp.next_states[state, action, 0])
    k = int(np.searchsorted(cumulative[state, action], rng.random(), side="right"))
    k = min(k, mdp.next_states.shape[2] - 1)
    return int(mdp.next_states[state, action, k])


def train(
    tasks: Sequence[TrainingTask], schedule: StageSchedule, config: TrainerConfig
) -> TrainingTrace:
    """Train under the switched reward composed from each task's stack and the schedule.

    At global step ``t`` the reward paid is ``R_i(s, a)`` for the stage
    ``i`` active at ``t``. Snapshots are taken at step 0, every
    ``snapshot_every`` steps and at the end.

    Args:
        tasks: Family of tasks; each episode acts in one, drawn uniformly
        schedule: Stage transitions
        config: Trainer configuration

    Returns:
        Training trace

    Raises:
        ValueError: If tasks, schedule and config are inconsistent
    """
    _check_tasks(tasks, schedule)
    if config.total_steps < schedule.final_step:
        raise ValueError(
            f"total_steps {config.total_steps} is shorter than the schedule ({schedule.final_step})"
        )
    logger.info(
        "Training %s for %d steps on %d task(s), schedule %s, seed %d",
        config.algorithm, config.total_steps, len(tasks), schedule.label, config.seed,
    )

    rng = np.random.default_rng(config.seed)
    switched = [compose_switched_reward(task.stack, schedule) for task in tasks]
    mdps = [task.stack.base for task in tasks]
    cumulative = [np.cumsum(mdp.probs, axis=2) for mdp in mdps]
    n_actions = mdps[0].n_actions
    # Q-table for Q-learning, preference table for actor-critic
    tables = [np.zeros((mdp.n_states, n_actions)) for mdp in mdps]
    critics = [np.zeros(mdp.n_states) for mdp in mdps]
    actor_critic = config.algorithm == "actor_critic"

    snapshots = [_snapshot(0, tables)]
    episodes: List[EpisodeRecord] = []
    log: Optional[Dict[str, List]] = None
    if config.record_steps:
        log = {name: [] for name in ("step", "task", "state", "action", "reward", "stage_index")}

    task_id = int(rng.integers(len(tasks)))
    state = tasks[task_id].start_state
    episode_return, episode_length = 0.0, 0

    for step in range(config.total_steps):
        mdp = mdps[task_id]
        table = tables[task_id]
        if actor_critic:
            logits = table[state] / config.temperature
            probs = np.exp(logits - logits.max())
            probs /= probs.sum()
            action = min(int(np.searchsorted(np.cumsum(probs), rng.random(), side="right")),
                         n_actions - 1)
        elif rng.random() < config.epsilon(step):
            action = int(rng.integers(n_actions))
        else:
            action = int(np.argmax(table[state]))

        stage = switched[task_id].stage_index(step)
        reward = float(switched[task_id].stack.rewards[stage][state, action])
        next_state = _sample_successor(rng, mdp, cumulative[task_id], state, action)
        terminal = bool(mdp.terminal_mask[next_state])

        if actor_critic:
            critic = critics[task_id]
            bootstrap = 0.0 if terminal else mdp.gamma * critic[next_state]
            delta = reward + bootstrap - critic[state]
            critic[state] += config.critic_lr * delta
            gradient = -probs
            gradient[action] += 1.0
            table[state] += config.actor_lr * delta * gradient
        else:
            bootstrap = 0.0 if terminal else mdp.gamma * float(table[next_state].max())
            td_error = reward + bootstrap - table[state, action]
            table[state, action] += config.learning_rate * td_error

        if log is not None:
            for name, value in zip(
                ("step", "task", "state", "action", "reward", "stage_index"),
                (step, task_id, state, action, reward, stage),
            ):
                log[name].append(value)

        episode_return += reward
        episode_length += 1
        truncated = (
            config.max_episode_steps is not None and episode_length >= config.max_episode_steps
        )
        if terminal or truncated:
            outcome = tasks[task_id].outcome(next_state) if terminal else TRUNCATED_OUTCOME
            episodes.append(
                EpisodeRecord(step + 1, task_id, episode_return, outcome, episode_length, stage)
            )
            task_id = int(rng.integers(len(tasks)))
            state = tasks[task_id].start_state
            episode_return, episode_length = 0.0, 0
        else:
            state = next_state

        done = step + 1
        if done % config.snapshot_every == 0 or done == config.total_steps:
            snapshots.append(_snapshot(done, tables))
            logger.debug("Snapshot at step %d (%d episodes)", done, len(episodes))

    step_log = None
    if log is not None:
        step_log = StepLog(
            step=np.asarray(log["step"], dtype=np.int64),
            task=np.asarray(log["task"], dtype=np.int64),
            state=np.asarray(log["state"], dtype=np.int64),
            action=np.asarray(log["action"], dtype=np.int64),
            reward=np.asarray(log["reward"], dtype=float),
            stage_index=np.asarray(log["stage_index"], dtype=np.int64),
        )
    trace = TrainingTrace(config, schedule, tuple(snapshots), tuple(episodes), step_log)
    logger.info(
        "Training finished: %d episodes, outcomes %s", len(episodes), trace.outcome_counts()
    )
    return trace


def _rollout(
    task: TrainingTask,
    cumulative: np.ndarray,
    policy: Optional[DeterministicPolicy],
    rng: np.random.Generator,
    max_steps: int,
) -> str:
    mdp = task.stack.base
    state = task.start_state
    for _ in range(max_steps):
        if policy is None:
            action = int(rng.integers(mdp.n_actions))
        else:
            action = policy[state]
        state = _sample_successor(rng, mdp, cumulative, state, action)
        if mdp.terminal_mask[state]:
            return task.outcome(state)
    return TRUNCATED_OUTCOME


def success_rate(
    policies: Sequence[DeterministicPolicy],
    tasks: Sequence[TrainingTask],
    episodes_per_task: int = 1,
    seed: int = 0,
    max_steps: Optional[int] = None,
) -> float:
    """Fraction of greedy evaluation episodes that end at the goal.

    Args:
        policies: One policy per task
        tasks: Evaluation tasks
        episodes_per_task: Episodes per task (one suffices for deterministic dynamics)
        seed: Seed for stochastic dynamics
        max_steps: Episode cap (default: number of states)

    Returns:
        Success rate in [0, 1]
    """
    if not tasks:
        raise ValueError("Evaluation set is empty")
    if len(policies) != len(tasks):
        raise ValueError(f"Got {len(policies)} policies for {len(tasks)} tasks")
    if episodes_per_task < 1:
        raise ValueError(f"episodes_per_task must be positive: {episodes_per_task}")
    rng = np.random.default_rng(seed)
    successes = 0
    for policy, task in zip(policies, tasks):
        policy.check(task.stack.base)
        cap = task.stack.base.n_states if max_steps is None else max_steps
        cumulative = np.cumsum(task.stack.base.probs, axis=2)
        for _ in range(episodes_per_task):
            successes += _rollout(task, cumulative, policy, rng, cap) == GOAL_OUTCOME
    return successes / (len(tasks) * episodes_per_task)


def random_policy_success(
    tasks: Sequence[TrainingTask], episodes: int = 10_000, seed: int = 0
) -> float:
    """Monte-Carlo success rate of the uniformly random policy.

    Each episode picks its task uniformly from ``tasks``.
    """
    if not tasks:
        raise ValueError("Evaluation set is empty")
    rng = np.random.default_rng(seed)
    cumulative = [np.cumsum(task.stack.base.probs, axis=2) for task in tasks]
    successes = 0
    for _ in range(episodes):
        k = int(rng.integers(len(tasks)))
        task = tasks[k]
        outcome = _rollout(task, cumulative[k], None, rng, task.stack.base.n_states)
        successes += outcome == GOAL_OUTCOME
    return successes / episodes


def success_curve(
    trace: TrainingTrace, tasks: Sequence[TrainingTask]
) -> List[Tuple[int, float]]:
    """Success rate of every snapshot's greedy policies."""
    return [(snap.step, success_rate(snap.policies, tasks)) for snap in trace.snapshots]


def anchor_mdps(tasks: Sequence[TrainingTask], anchor: str = "first") -> Tuple[TabularMDP, ...]:
    """MDPs convergence is measured against: stage 1 ("first") or stage N ("final")."""
    if anchor not in ANCHORS:
        raise ValueError(f"Unknown anchor: {anchor}")
    return tuple(
        task.stack.stage_mdp(0 if anchor == "first" else task.stack.n_stages - 1)
        for task in tasks
    )


def convergence_step(
    trace: TrainingTrace,
    eval_mdps: Sequence[TabularMDP],
    eps: float,
    v_stars: Optional[Sequence[ValueFunction]] = None,
) -> Optional[int]:
    """First snapshot step whose policies are eps-converged on every eval MDP.

    Args:
        trace: Training trace
        eval_mdps: One anchor MDP per task
        eps: Convergence threshold in return units
        v_stars: Precomputed optimal values per MDP

    Returns:
        Step count, or ``NOT_CONVERGED`` (None)

    Raises:
        ValueError: If the trace is empty or sizes disagree
    """
    if not trace.snapshots:
        raise ValueError("Trace has no snapshots")
    if len(eval_mdps) != len(trace.snapshots[0].policies):
        raise ValueError(
            f"Got {len(eval_mdps)} eval MDPs for {len(trace.snapshots[0].policies)} policies"
        )
    if v_stars is None:
        v_stars = [value_iteration(mdp) for mdp in eval_mdps]
    verdicts: Dict[Tuple[int, DeterministicPolicy], bool] = {}

    def converged(k: int, policy: DeterministicPolicy) -> bool:
        key = (k, policy)
        if key not in verdicts:
            verdicts[key] = is_eps_converged(eval_mdps[k], policy, v_stars[k], eps)
        return verdicts[key]

    for snap in trace.snapshots:
        if all(converged(k, policy) for k, policy in enumerate(snap.policies)):
            return snap.step
    return NOT_CONVERGED
