"""Core Experiment class: validate, solve, train and sweep from one configuration."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from stagerl.config import ExperimentConfig
from stagerl.critical_period import (
    AllDivergedError,
    ComparisonReport,
    SweepResult,
    TaskSpec,
    build_tasks,
    compare_uni_multi,
    critical_period,
    critical_window,
    run_sweep,
)
from stagerl.data_structures import (
    DeterministicPolicy,
    NestingReport,
    PolicySet,
    StageSchedule,
    ValueFunction,
)
from stagerl.exporters import (
    GnuplotCurveExporter,
    GraphMLExporter,
    MdpTextExporter,
    PolicySetCsvExporter,
    PolicyTableExporter,
    SummaryCsvExporter,
    SweepCsvExporter,
    TraceCsvExporter,
    ValuesCsvExporter,
    ViolationsCsvExporter,
)
from stagerl.gridnav import GridNavEnv, LayoutError, NavModel, StateSpaceError, compile_nav
from stagerl.guidance import GuidanceStack, scaled_stack
from stagerl.mdp import greedy_policy, optimal_policy_set, value_iteration
from stagerl.trainer import (
    TrainingTask,
    TrainingTrace,
    anchor_mdps,
    convergence_step,
    random_policy_success,
    success_curve,
    train,
)
from stagerl.validators import NestingValidator
from stagerl.visualizers import GridRenderer

logger = logging.getLogger(__name__)

RESOLVED_CONFIG = "resolved_config.json"
TEXT_EXPORT_MAX_STATES = 500


@dataclass(frozen=True)
class ValidationResult:
    """Nesting reports of every validated layout."""
    models: Tuple[NavModel, ...]
    reports: Tuple[NestingReport, ...]

    @property
    def ok(self) -> bool:
        """True if every layout passed every configured check."""
        return all(report.ok for report in self.reports)


@dataclass(frozen=True)
class SolveResult:
    """Oracle solution of one compiled layout."""
    model: NavModel
    values: ValueFunction
    policy_set: PolicySet
    policy: DeterministicPolicy


@dataclass(frozen=True)
class TrainResult:
    """A single training run with its measurements."""
    tasks: Tuple[TrainingTask, ...]
    trace: TrainingTrace
    convergence_step: Optional[int]
    curve: Tuple[Tuple[int, float], ...]


@dataclass(frozen=True)
class SweepOutcome:
    """A sweep with its critical period and comparison report, where defined."""
    result: SweepResult
    critical: Optional[StageSchedule]
    comparison: Optional[ComparisonReport]

    @property
    def all_diverged(self) -> bool:
        """True if no multi-stage schedule converged."""
        return self.critical is None


class Experiment:
    """An experiment defined by an :class:`ExperimentConfig`.

    Each operation returns an in-memory result; the matching ``write_*``
    method renders it into a run directory together with the resolved
    configuration.
    """

    def __init__(self, config: Optional[ExperimentConfig] = None) -> None:
        """Initialize with a configuration (defaults if omitted)."""
        self.config = config or ExperimentConfig()

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "Experiment":
        """Load the configuration from a JSON file.

        Raises:
            ConfigError: If the file is unreadable or invalid
        """
        return cls(ExperimentConfig.load(path))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Experiment":
        """Create from a configuration dictionary.

        Raises:
            ConfigError: If the dictionary is invalid
        """
        return cls(ExperimentConfig.from_dict(data))

    def _stacks(self, model: NavModel) -> Tuple[GuidanceStack, GuidanceStack]:
        guidance = self.config.guidance
        if guidance.kind == "scaled":
            stack = scaled_stack(model.stage_mdp(1), guidance.scale_factors)
            return stack, stack
        return (
            model.guidance_stack(guidance.stages),
            model.component_stack(guidance.stages, guidance.include_base_terms),
        )

    def validate(self) -> ValidationResult:
        """Check support and optimality nesting on the configured layouts."""
        measurement = self.config.measurement
        family = self.config.family_spec(size=measurement.validate_layouts)
        validator = NestingValidator(measurement.checks, measurement.tie_tol, measurement.direction)
        models = []
        reports = []
        for env in family.envs():
            model = compile_nav(env, full_state=True, state_cap=family.state_cap)
            stack, support_stack = self._stacks(model)
            report = validator.validate(stack, support_stack)
            logger.info(
                "Layout seed %d: %d state(s), support %s, optimality %s",
                env.layout.seed, model.mdp.n_states, report.support_ok, report.optimality_ok,
            )
            models.append(model)
            reports.append(report)
        return ValidationResult(tuple(models), tuple(reports))

    def solve(self) -> SolveResult:
        """Solve the anchor-stage MDP of the first configured layout."""
        guidance = self.config.guidance
        family = self.config.family_spec(size=1)
        stage = 1
        if guidance.kind == "proximity" and self.config.measurement.anchor == "final":
            stage = guidance.stages[-1]
        env: GridNavEnv = family.envs(stage=stage)[0]
        model = compile_nav(env, state_cap=family.state_cap)
        values = value_iteration(model.mdp)
        policy_set = optimal_policy_set(model.mdp, self.config.measurement.tie_tol, values)
        logger.info(
            "Solved stage-%d MDP with %d states: V*(start) = %.6f",
            stage, model.mdp.n_states, values[model.start_state],
        )
        return SolveResult(model, values, policy_set, greedy_policy(model.mdp, values.values))

    def train(self) -> TrainResult:
        """Train once: first configured schedule, first seed."""
        tasks = build_tasks(self.config.task_spec())
        schedule = self.config.schedule.schedules()[0]
        section = self.config.trainer
        trace = train(tasks, schedule, section.trainer_config(section.seeds[0]))
        step = convergence_step(
            trace, anchor_mdps(tasks, self.config.measurement.anchor), self.config.measurement.eps
        )
        curve = tuple(success_curve(trace, tasks))
        logger.info("Convergence step: %s, final success %.3f", step, curve[-1][1])
        return TrainResult(tasks, trace, step, curve)

    def sweep(self) -> SweepOutcome:
        """Run the schedule sweep, locate the critical period and compare with the baseline."""
        result = run_sweep(self.config.sweep_spec(), self.config.output.workers)
        try:
            critical = critical_period(result)
        except AllDivergedError as exc:
            logger.warning("%s", exc)
            critical = None
        comparison = None
        if result.spec.baseline:
            comparison = compare_uni_multi(result, self._random_floor(result.spec.tasks))
        return SweepOutcome(result, critical, comparison)

    def _random_floor(self, spec: TaskSpec) -> float:
        try:
            tasks = build_tasks(spec)
        except (LayoutError, StateSpaceError) as exc:
            logger.warning("No random-policy floor: %s", exc)
            return math.nan
        floor = random_policy_success(tasks, seed=spec.family.seed)
        logger.info("Random-policy success on level %d: %.3f", spec.family.level, floor)
        return floor

    def _prepare(self, out_dir: Union[str, Path, None]) -> Path:
        path = Path(out_dir if out_dir is not None else self.config.output.directory)
        path.mkdir(parents=True, exist_ok=True)
        self.config.dump(path / RESOLVED_CONFIG)
        return path

    def _write(self, path: Path, name: str, content: str, written: List[Path]) -> None:
        target = path / name
        target.write_text(content, encoding="utf-8")
        written.append(target)

    def write_validation(
        self, result: ValidationResult, out_dir: Union[str, Path, None] = None
    ) -> List[Path]:
        """Write ``violations.csv`` and ``nesting_report.txt``."""
        path = self._prepare(out_dir)
        written: List[Path] = []
        labels = [[m.state_label(s) for s in range(m.mdp.n_states)] for m in result.models]
        self._write(
            path,
            "violations.csv",
            ViolationsCsvExporter().export(result.reports, labels),
            written,
        )
        sections = []
        for model, report, state_labels in zip(result.models, result.reports, labels):
            header = f"layout seed {model.env.layout.seed}\n{model.env.layout.to_text()}\n"
            sections.append(header + report.to_text(state_labels))
        summary = f"overall: {'ok' if result.ok else 'violations found'}\n"
        self._write(path, "nesting_report.txt", "\n\n".join(sections) + "\n\n" + summary, written)
        return written

    def write_solution(
        self, result: SolveResult, out_dir: Union[str, Path, None] = None
    ) -> List[Path]:
        """Write values, optimal action sets, layout and policy renders, and MDP exports."""
        path = self._prepare(out_dir)
        written: List[Path] = []
        model = result.model
        labels = [model.state_label(s) for s in range(model.mdp.n_states)]
        renderer = GridRenderer()
        self._write(path, "values.csv", ValuesCsvExporter().export(result.values, labels), written)
        policy_set = PolicySetCsvExporter().export(result.policy_set, labels)
        self._write(path, "policy_set.csv", policy_set, written)
        layout = model.env.layout
        self._write(
            path,
            "layout.txt",
            renderer.render_layout(layout) + "\n\n" + layout.to_text() + "\n",
            written,
        )
        self._write(
            path, "policy.txt", renderer.render_policy(model, result.policy) + "\n", written
        )
        formats = self.config.output.formats
        if "text" in formats and model.mdp.n_states <= TEXT_EXPORT_MAX_STATES:
            self._write(path, "mdp.txt", MdpTextExporter().export(model.mdp), written)
        if "graphml" in formats:
            self._write(path, "mdp.graphml", GraphMLExporter().export(model.mdp, labels), written)
        return written

    def write_training(
        self, result: TrainResult, out_dir: Union[str, Path, None] = None
    ) -> List[Path]:
        """Write ``trace.csv``, ``policy_table.txt`` and ``success_curve.dat``."""
        path = self._prepare(out_dir)
        written: List[Path] = []
        self._write(path, "trace.csv", TraceCsvExporter().export(result.trace), written)
        self._write(
            path,
            "policy_table.txt",
            PolicyTableExporter().export(result.trace.final_policies),
            written,
        )
        curve = {
            result.trace.schedule.label: [(step, rate, 0.0) for step, rate in result.curve]
        }
        self._write(path, "success_curve.dat", GnuplotCurveExporter().export(curve), written)
        return written

    def write_sweep(
        self, outcome: SweepOutcome, out_dir: Union[str, Path, None] = None
    ) -> List[Path]:
        """Write raw records, summaries, the critical-period report and curves."""
        path = self._prepare(out_dir)
        written: List[Path] = []
        result = outcome.result
        summaries = result.summaries()
        self._write(path, "sweep.csv", SweepCsvExporter().export(result), written)
        self._write(path, "summary.csv", SummaryCsvExporter().export(summaries), written)
        self._write(path, "critical_period.txt", self._critical_text(outcome), written)
        if outcome.comparison is not None:
            self._write(path, "comparison.txt", outcome.comparison.to_text(), written)
        self._write(path, "curves.dat", GnuplotCurveExporter().export(result.curves()), written)
        return written

    def _critical_text(self, outcome: SweepOutcome) -> str:
        lines = [f"eps: {outcome.result.spec.eps:g}", f"policy: {outcome.result.spec.policy}"]
        if outcome.critical is None:
            lines.append("critical period: ALL_DIVERGED")
        else:
            lines.append(f"critical period: {outcome.critical.label}")
            if outcome.critical.n_stages >= 2:
                start, end = critical_window(outcome.critical)
                lines.append(f"stage-2 window: [{start}, {end})")
        return "\n".join(lines) + "\n"

    def describe(self) -> str:
        """Short human-readable summary of the configuration."""
        config = self.config
        schedules = ", ".join(s.label for s in config.schedule.schedules())
        return (
            f"level {config.env.level} on {config.env.grid_size}x{config.env.grid_size}, "
            f"{config.guidance.kind} guidance {list(config.guidance.stages)}, "
            f"schedules [{schedules}], seeds {list(config.trainer.seeds)}"
        )
