"""Schedule sweeps, critical-period search and the uni- vs multi-stage comparison."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from stagerl.data_structures import StageSchedule, ValueFunction
from stagerl.gridnav import FamilySpec, build_family
from stagerl.guidance import scaled_stack
from stagerl.mdp import value_iteration
from stagerl.trainer import (
    ANCHORS,
    TrainerConfig,
    TrainingTask,
    anchor_mdps,
    convergence_step,
    success_curve,
    train,
)

logger = logging.getLogger(__name__)

GUIDANCE_KINDS = ("proximity", "scaled")
POLICIES = ("strict", "lenient")

# Level-2 success rates of the 3D navigation setting, printed beside comparisons.
REFERENCE_SUCCESS = {"level": 2, "best_multi_success": 0.78, "uni_success": 0.0}


class AllDivergedError(ValueError):
    """Raised when no schedule of a sweep converged."""


@dataclass(frozen=True)
class TaskSpec:
    """How to turn a layout family into training tasks.

    Attributes:
        family: Layout family to compile
        stages: 1-based gridnav stages making up the guidance stack
        kind: "proximity" (the stage rewards) or "scaled" (stage-1 reward times factors)
        scale_factors: Factors of the scaled stack
    """
    family: FamilySpec = field(default_factory=FamilySpec)
    stages: Tuple[int, ...] = (1, 2, 3)
    kind: str = "proximity"
    scale_factors: Tuple[float, ...] = (1.0, 2.0, 4.0)

    def __post_init__(self) -> None:
        """Validate the guidance choice."""
        if self.kind not in GUIDANCE_KINDS:
            raise ValueError(f"Unknown guidance kind: {self.kind}")
        if not self.stages or any(s not in (1, 2, 3) for s in self.stages):
            raise ValueError(f"Stages must be drawn from 1, 2, 3: {self.stages}")

    @property
    def n_stages(self) -> int:
        """Number of stages of the guidance stack."""
        return len(self.scale_factors) if self.kind == "scaled" else len(self.stages)


@lru_cache(maxsize=8)
def build_tasks(spec: TaskSpec) -> Tuple[TrainingTask, ...]:
    """Compile a family and wrap each layout as a training task."""
    tasks = []
    for model in build_family(spec.family):
        if spec.kind == "scaled":
            stack = scaled_stack(model.stage_mdp(1), spec.scale_factors)
        else:
            stack = model.guidance_stack(spec.stages)
        tasks.append(TrainingTask(stack, model.start_state, model.outcomes))
    return tuple(tasks)


@lru_cache(maxsize=8)
def _anchor_values(spec: TaskSpec, anchor: str) -> Tuple[ValueFunction, ...]:
    return tuple(value_iteration(mdp) for mdp in anchor_mdps(build_tasks(spec), anchor))


def uni_stage_tasks(tasks: Sequence[TrainingTask]) -> Tuple[TrainingTask, ...]:
    """Tasks keeping only the richest (last) stage, trained from step 0."""
    return tuple(
        TrainingTask(task.stack.select([task.stack.n_stages - 1]), task.start_state, task.outcomes)
        for task in tasks
    )


@dataclass(frozen=True)
class SweepSpec:
    """A grid of schedules crossed with seeds.

    Attributes:
        schedules: Stage schedules to sweep
        seeds: Trainer seeds, one run per (schedule, seed)
        tasks: Task recipe shared by every run
        trainer: Trainer configuration (its seed is replaced per run)
        eps: Convergence threshold in return units
        anchor: Anchor MDP for convergence, "first" or "final" stage
        baseline: Also run the uni-stage baseline per seed
        policy: "strict" or "lenient" handling of non-converged seeds
    """
    schedules: Tuple[StageSchedule, ...]
    seeds: Tuple[int, ...]
    tasks: TaskSpec = field(default_factory=TaskSpec)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    eps: float = 0.1
    anchor: str = "first"
    baseline: bool = True
    policy: str = "strict"

    def __post_init__(self) -> None:
        """Validate the grid against the task recipe and trainer."""
        if not self.schedules:
            raise ValueError("Schedule grid is empty")
        if not self.seeds:
            raise ValueError("Seed list is empty")
        if not (math.isfinite(self.eps) and self.eps > 0.0):
            raise ValueError(f"eps must be finite and positive: {self.eps}")
        if self.anchor not in ANCHORS:
            raise ValueError(f"Unknown anchor: {self.anchor}")
        if self.policy not in POLICIES:
            raise ValueError(f"Unknown convergence policy: {self.policy}")
        for schedule in self.schedules:
            if schedule.n_stages != self.tasks.n_stages:
                raise ValueError(
                    f"Schedule {schedule.label} has {schedule.n_stages} transitions "
                    f"for {self.tasks.n_stages} stages"
                )
            if schedule.final_step > self.trainer.total_steps:
                raise ValueError(
                    f"Schedule {schedule.label} ends after total_steps {self.trainer.total_steps}"
                )

    @property
    def baseline_schedule(self) -> StageSchedule:
        """Single-stage schedule spanning the whole run."""
        return StageSchedule((self.trainer.total_steps,))


@dataclass(frozen=True)
class RunRecord:
    """Raw result of one (schedule, seed) cell."""
    schedule: StageSchedule
    seed: int
    baseline: bool = False
    convergence_step: Optional[int] = None
    final_success: float = float("nan")
    curve: Tuple[Tuple[int, float], ...] = ()
    outcome_counts: Tuple[Tuple[str, int], ...] = ()
    error: Optional[str] = None

    @property
    def converged(self) -> bool:
        """True if the run reached eps-convergence."""
        return self.convergence_step is not None

    @property
    def sort_key(self) -> Tuple[bool, Tuple[int, ...], int]:
        """Deterministic ordering: multi-stage cells first, then schedule, then seed."""
        return self.baseline, self.schedule.transitions, self.seed


def _run_cell(spec: SweepSpec, schedule: StageSchedule, seed: int, baseline: bool) -> RunRecord:
    try:
        tasks = build_tasks(spec.tasks)
        eval_mdps = anchor_mdps(tasks, spec.anchor)
        train_tasks = uni_stage_tasks(tasks) if baseline else tasks
        trace = train(train_tasks, schedule, replace(spec.trainer, seed=seed))
        step = convergence_step(trace, eval_mdps, spec.eps, _anchor_values(spec.tasks, spec.anchor))
        curve = tuple(success_curve(trace, tasks))
        return RunRecord(
            schedule=schedule,
            seed=seed,
            baseline=baseline,
            convergence_step=step,
            final_success=curve[-1][1],
            curve=curve,
            outcome_counts=tuple(sorted(trace.outcome_counts().items())),
        )
    except Exception as exc:  # recorded per cell, the sweep continues
        logger.warning("Cell %s seed %d failed: %s", schedule.label, seed, exc)
        return RunRecord(schedule=schedule, seed=seed, baseline=baseline, error=repr(exc))


def _run_cell_args(args: Tuple[SweepSpec, StageSchedule, int, bool]) -> RunRecord:
    return _run_cell(*args)


@dataclass(frozen=True)
class ScheduleSummary:
    """Across-seed statistics of one schedule (std with ddof=0)."""
    schedule: StageSchedule
    baseline: bool
    mean_l: float
    std_l: float
    mean_success: float
    std_success: float
    converged: int
    n_seeds: int
    errors: int
    policy: str

    @property
    def label(self) -> str:
        """Schedule label, marked for the baseline."""
        return f"uni:{self.schedule.label}" if self.baseline else self.schedule.label


def summarize(records: Sequence[RunRecord], policy: str = "strict") -> ScheduleSummary:
    """Aggregate the records of one schedule.

    Under the strict policy any non-converged seed makes mean L infinite;
    the lenient policy averages the converged seeds only.
    """
    if not records:
        raise ValueError("Cannot summarize an empty record list")
    if policy not in POLICIES:
        raise ValueError(f"Unknown convergence policy: {policy}")
    steps = [r.convergence_step for r in records if r.convergence_step is not None]
    successes = [r.final_success for r in records if r.error is None]
    if steps and (policy == "lenient" or len(steps) == len(records)):
        mean_l, std_l = float(np.mean(steps)), float(np.std(steps))
    else:
        mean_l, std_l = math.inf, math.nan
    if successes:
        mean_success, std_success = float(np.mean(successes)), float(np.std(successes))
    else:
        mean_success, std_success = math.nan, math.nan
    return ScheduleSummary(
        schedule=records[0].schedule,
        baseline=records[0].baseline,
        mean_l=mean_l,
        std_l=std_l,
        mean_success=mean_success,
        std_success=std_success,
        converged=len(steps),
        n_seeds=len(records),
        errors=sum(1 for r in records if r.error is not None),
        policy=policy,
    )


@dataclass(frozen=True)
class SweepResult:
    """Raw per-cell records of a sweep; aggregates are recomputed on demand."""
    spec: SweepSpec
    records: Tuple[RunRecord, ...]

    def groups(self) -> List[Tuple[StageSchedule, bool, List[RunRecord]]]:
        """Records grouped by (schedule, baseline) in record order."""
        grouped: Dict[Tuple[Tuple[int, ...], bool], List[RunRecord]] = {}
        for record in self.records:
            grouped.setdefault((record.schedule.transitions, record.baseline), []).append(record)
        return [
            (StageSchedule(key[0]), key[1], records) for key, records in grouped.items()
        ]

    def summaries(self, policy: Optional[str] = None) -> List[ScheduleSummary]:
        """Per-schedule summaries, multi-stage schedules first."""
        return [summarize(records, policy or self.spec.policy) for _, _, records in self.groups()]

    def curves(self) -> Dict[str, List[Tuple[int, float, float]]]:
        """Mean and std success per snapshot step, per schedule."""
        result: Dict[str, List[Tuple[int, float, float]]] = {}
        for schedule, baseline, records in self.groups():
            runs = [r.curve for r in records if r.error is None and r.curve]
            if not runs:
                continue
            length = min(len(run) for run in runs)
            values = np.array([[point[1] for point in run[:length]] for run in runs])
            label = f"uni:{schedule.label}" if baseline else schedule.label
            result[label] = [
                (runs[0][i][0], float(values[:, i].mean()), float(values[:, i].std()))
                for i in range(length)
            ]
        return result


def sweep_cells(spec: SweepSpec) -> List[Tuple[StageSchedule, int, bool]]:
    """Every (schedule, seed, baseline) cell a sweep runs."""
    cells = [(schedule, seed, False) for schedule in spec.schedules for seed in spec.seeds]
    if spec.baseline:
        cells.extend((spec.baseline_schedule, seed, True) for seed in spec.seeds)
    return cells


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Train and measure every cell of a sweep.

    Args:
        spec: Sweep specification
        workers: Worker processes; 1 runs in-process

    Returns:
        SweepResult with records sorted by (baseline, schedule, seed)
    """
    if workers < 1:
        raise ValueError(f"workers must be positive: {workers}")
    cells = sweep_cells(spec)
    logger.info("Sweeping %d cells with %d worker(s)", len(cells), workers)
    args = [(spec, schedule, seed, baseline) for schedule, seed, baseline in cells]
    if workers == 1:
        records = [_run_cell_args(a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell_args, args))
    for record in records:
        logger.info(
            "Cell %s seed %d: L=%s success=%.3f",
            record.schedule.label, record.seed, record.convergence_step, record.final_success,
        )
    return SweepResult(spec, tuple(sorted(records, key=lambda r: r.sort_key)))


def critical_period(result: SweepResult) -> StageSchedule:
    """Multi-stage schedule with the smallest mean convergence step.

    Non-converged runs count as infinite; ties, infinite means included, go
    to the lexicographically smallest schedule.

    Raises:
        ValueError: If the result holds no multi-stage schedule
        AllDivergedError: If no run of any multi-stage schedule converged
    """
    summaries = [s for s in result.summaries() if not s.baseline]
    if not summaries:
        raise ValueError("Sweep result holds no multi-stage schedule")
    if all(s.converged == 0 for s in summaries):
        raise AllDivergedError(f"No schedule converged across {len(summaries)} schedules")
    return min(summaries, key=lambda s: (s.mean_l, s.schedule.transitions)).schedule


def critical_window(schedule: StageSchedule) -> Tuple[int, int]:
    """Stage-2 window [t1, t2) of a schedule."""
    if schedule.n_stages < 2:
        raise ValueError(f"Schedule {schedule.label} has no second stage")
    return schedule.transitions[0], schedule.transitions[1]


@dataclass(frozen=True)
class ComparisonReport:
    """Best multi-stage schedule (by mean success) against the uni-stage baseline."""
    uni: ScheduleSummary
    best_multi: Optional[ScheduleSummary]
    uni_per_seed: Tuple[Tuple[int, float], ...]
    multi_per_seed: Tuple[Tuple[int, float], ...]
    reference: Dict[str, float] = field(default_factory=lambda: dict(REFERENCE_SUCCESS))
    level: Optional[int] = None
    random_floor: float = math.nan

    @property
    def degenerate(self) -> bool:
        """True when only the baseline was run."""
        return self.best_multi is None

    @property
    def margin(self) -> float:
        """Best multi mean success minus uni mean success (nan if degenerate)."""
        if self.best_multi is None:
            return math.nan
        return self.best_multi.mean_success - self.uni.mean_success

    def to_text(self) -> str:
        """Plain-text report."""
        lines = [
            f"uni-stage {self.uni.schedule.label}: success "
            f"{self.uni.mean_success:.3f} +/- {self.uni.std_success:.3f}",
        ]
        if self.best_multi is None:
            lines.append("multi-stage: none")
        else:
            lines.append(
                f"best multi-stage {self.best_multi.schedule.label}: success "
                f"{self.best_multi.mean_success:.3f} +/- {self.best_multi.std_success:.3f}"
            )
            lines.append(f"margin: {self.margin:.3f}")
        lines.append("per seed (uni): " + ", ".join(f"{s}={v:.3f}" for s, v in self.uni_per_seed))
        if self.multi_per_seed:
            lines.append(
                "per seed (multi): " + ", ".join(f"{s}={v:.3f}" for s, v in self.multi_per_seed)
            )
        if not math.isnan(self.random_floor):
            lines.append(f"random-policy floor (level {self.level}): {self.random_floor:.3f}")
        lines.append(
            f"reference (level {self.reference['level']:g}): best multi "
            f"{self.reference['best_multi_success']:.2f}, uni {self.reference['uni_success']:.2f}"
        )
        return "\n".join(lines) + "\n"


def compare_uni_multi(result: SweepResult, random_floor: float = math.nan) -> ComparisonReport:
    """Compare the best multi-stage schedule with the uni-stage baseline.

    Args:
        result: Sweep result holding the baseline runs
        random_floor: Success rate of the uniformly random policy on the same tasks

    Raises:
        ValueError: If the sweep ran without the baseline
    """
    groups = result.groups()
    baseline = [records for _, is_base, records in groups if is_base]
    if not baseline:
        raise ValueError("Sweep result has no uni-stage baseline")
    uni = summarize(baseline[0], result.spec.policy)
    multi = [
        (summarize(records, result.spec.policy), records)
        for _, is_base, records in groups
        if not is_base
    ]
    scored = [(s, r) for s, r in multi if not math.isnan(s.mean_success)]
    best = min(scored, key=lambda p: (-p[0].mean_success, p[0].schedule.transitions), default=None)

    def per_seed(records: Sequence[RunRecord]) -> Tuple[Tuple[int, float], ...]:
        return tuple((r.seed, r.final_success) for r in records)

    return ComparisonReport(
        uni=uni,
        best_multi=best[0] if best else None,
        uni_per_seed=per_seed(baseline[0]),
        multi_per_seed=per_seed(best[1]) if best else (),
        level=result.spec.tasks.family.level,
        random_floor=random_floor,
    )
