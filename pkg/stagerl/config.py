"""Experiment configuration: a JSON file parsed into frozen dataclasses.

Unknown keys are rejected, every default is materialized by ``to_dict`` and
the resolved form is written next to each run's outputs.
"""

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type, TypeVar, Union

from stagerl.critical_period import GUIDANCE_KINDS, POLICIES, SweepSpec, TaskSpec
from stagerl.data_structures import StageSchedule
from stagerl.gridnav import BONUS_SEMANTICS, DEFAULT_STATE_CAP, METRICS, FamilySpec
from stagerl.trainer import ALGORITHMS, ANCHORS, TrainerConfig
from stagerl.validators import DIRECTIONS

OUTPUT_FORMATS = ("csv", "text", "graphml")
CHECKS = ("support", "optimality")

T = TypeVar("T")


class ConfigError(ValueError):
    """Raised when a configuration violates the schema."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


@dataclass(frozen=True)
class EnvConfig:
    """Environment block: layout family and task parameters."""
    level: int = 1
    grid_size: int = 7
    seed: int = 0
    eval_size: int = 20
    time_limit: Optional[int] = None
    proximity_radius: Optional[int] = None
    exclusion_radius: Optional[int] = None
    metric: str = "chebyshev"
    gamma: float = 0.99
    state_cap: int = DEFAULT_STATE_CAP

    def __post_init__(self) -> None:
        _require(self.level in (1, 2, 3), f"env.level must be 1, 2 or 3: {self.level}")
        _require(
            self.grid_size >= 3 and self.grid_size % 2 == 1,
            f"env.grid_size must be odd and >= 3: {self.grid_size}",
        )
        _require(
            self.level == 1 or self.grid_size >= 7, "env.grid_size must be >= 7 for levels 2-3"
        )
        _require(self.eval_size >= 1, f"env.eval_size must be positive: {self.eval_size}")
        _require(self.metric in METRICS, f"env.metric must be one of {METRICS}: {self.metric}")
        _require(0.0 <= self.gamma < 1.0, f"env.gamma must lie in [0, 1): {self.gamma}")
        _require(self.state_cap >= 4, f"env.state_cap too small: {self.state_cap}")


@dataclass(frozen=True)
class GuidanceConfig:
    """Guidance block: which stage rewards make up the stack."""
    kind: str = "proximity"
    stages: Tuple[int, ...] = (1, 2, 3)
    bonus_semantics: str = "once"
    scale_factors: Tuple[float, ...] = (1.0, 2.0, 4.0)
    include_base_terms: bool = False

    def __post_init__(self) -> None:
        _require(self.kind in GUIDANCE_KINDS, f"guidance.kind must be one of {GUIDANCE_KINDS}")
        _require(
            bool(self.stages) and all(s in (1, 2, 3) for s in self.stages),
            f"guidance.stages must be drawn from 1, 2, 3: {list(self.stages)}",
        )
        _require(
            self.bonus_semantics in BONUS_SEMANTICS,
            f"guidance.bonus_semantics must be one of {BONUS_SEMANTICS}",
        )
        _require(
            bool(self.scale_factors) and all(c > 0 for c in self.scale_factors),
            f"guidance.scale_factors must be positive: {list(self.scale_factors)}",
        )

    @property
    def n_stages(self) -> int:
        """Number of stages of the configured stack."""
        return len(self.scale_factors) if self.kind == "scaled" else len(self.stages)


@dataclass(frozen=True)
class ScheduleConfig:
    """Schedule block: explicit transitions or a (t1, offsets) grid."""
    transitions: Optional[Tuple[Tuple[int, ...], ...]] = None
    t1: Tuple[int, ...] = (10_000, 20_000, 30_000)
    offsets: Tuple[int, ...] = (20_000, 40_000)
    baseline: bool = True

    def __post_init__(self) -> None:
        try:
            self.schedules()
        except ValueError as exc:
            raise ConfigError(f"schedule: {exc}") from exc

    def schedules(self) -> Tuple[StageSchedule, ...]:
        """Schedules of the grid, in configuration order."""
        if self.transitions is not None:
            if not self.transitions:
                raise ValueError("transitions list is empty")
            return tuple(StageSchedule(tuple(t)) for t in self.transitions)
        if not self.t1:
            raise ValueError("t1 list is empty")
        return tuple(StageSchedule((t,) + tuple(t + o for o in self.offsets)) for t in self.t1)


@dataclass(frozen=True)
class TrainerSection:
    """Trainer block: TrainerConfig fields plus the seed list."""
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
    max_episode_steps: Optional[int] = None
    record_steps: bool = False
    seeds: Tuple[int, ...] = (0, 1, 2)

    def __post_init__(self) -> None:
        _require(self.algorithm in ALGORITHMS, f"trainer.algorithm must be one of {ALGORITHMS}")
        _require(bool(self.seeds), "trainer.seeds must not be empty")
        try:
            self.trainer_config(self.seeds[0])
        except ValueError as exc:
            raise ConfigError(f"trainer: {exc}") from exc

    def trainer_config(self, seed: int) -> TrainerConfig:
        """TrainerConfig for one seed."""
        values = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "seeds"}
        return TrainerConfig(seed=seed, **values)


@dataclass(frozen=True)
class MeasurementConfig:
    """Measurement block: convergence, tie and validation settings."""
    eps: float = 0.1
    anchor: str = "first"
    tie_tol: float = 1e-6
    policy: str = "strict"
    checks: Tuple[str, ...] = CHECKS
    direction: str = "forward"
    validate_layouts: int = 1

    def __post_init__(self) -> None:
        _require(
            math.isfinite(self.eps) and self.eps > 0.0, f"measurement.eps invalid: {self.eps}"
        )
        _require(self.anchor in ANCHORS, f"measurement.anchor must be one of {ANCHORS}")
        _require(self.tie_tol > 0.0, f"measurement.tie_tol must be positive: {self.tie_tol}")
        _require(self.policy in POLICIES, f"measurement.policy must be one of {POLICIES}")
        _require(
            bool(self.checks) and all(c in CHECKS for c in self.checks),
            f"measurement.checks must be drawn from {CHECKS}: {list(self.checks)}",
        )
        _require(
            self.direction in DIRECTIONS + ("both",),
            f"measurement.direction must be forward, reverse or both: {self.direction}",
        )
        _require(self.validate_layouts >= 1, "measurement.validate_layouts must be positive")


@dataclass(frozen=True)
class OutputConfig:
    """Output block: run directory, extra formats and sweep workers."""
    directory: str = "runs"
    formats: Tuple[str, ...] = ("csv", "text")
    workers: int = 1

    def __post_init__(self) -> None:
        _require(
            all(f in OUTPUT_FORMATS for f in self.formats),
            f"output.formats must be drawn from {OUTPUT_FORMATS}: {list(self.formats)}",
        )
        _require(self.workers >= 1, f"output.workers must be positive: {self.workers}")


BLOCKS: Dict[str, Type[Any]] = {
    "env": EnvConfig,
    "guidance": GuidanceConfig,
    "schedule": ScheduleConfig,
    "trainer": TrainerSection,
    "measurement": MeasurementConfig,
    "output": OutputConfig,
}


def _tupled(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


def _listed(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: _listed(v) for key, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_listed(v) for v in value]
    return value


def _build(cls: Type[T], name: str, data: Any) -> T:
    if not isinstance(data, dict):
        raise ConfigError(f"Block '{name}' must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown key(s) in '{name}': {', '.join(unknown)}")
    try:
        return cls(**{key: _tupled(value) for key, value in data.items()})
    except TypeError as exc:
        raise ConfigError(f"Invalid '{name}' block: {exc}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    """A complete experiment: every block with its defaults filled."""
    env: EnvConfig = field(default_factory=EnvConfig)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    trainer: TrainerSection = field(default_factory=TrainerSection)
    measurement: MeasurementConfig = field(default_factory=MeasurementConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self) -> None:
        """Check consistency across blocks."""
        for schedule in self.schedule.schedules():
            _require(
                schedule.n_stages == self.guidance.n_stages,
                f"Schedule {schedule.label} has {schedule.n_stages} transitions "
                f"for {self.guidance.n_stages} guidance stages",
            )
            _require(
                schedule.final_step <= self.trainer.total_steps,
                f"Schedule {schedule.label} ends after trainer.total_steps "
                f"{self.trainer.total_steps}",
            )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """Create from a dictionary.

        Raises:
            ConfigError: On unknown keys or invalid values
        """
        if not isinstance(data, dict):
            raise ConfigError("Configuration must be a JSON object")
        unknown = sorted(set(data) - set(BLOCKS))
        if unknown:
            raise ConfigError(f"Unknown top-level key(s): {', '.join(unknown)}")
        blocks = {name: _build(block, name, data.get(name, {})) for name, block in BLOCKS.items()}
        return cls(**blocks)

    def to_dict(self) -> Dict[str, Any]:
        """Dictionary with every default materialized."""
        return {name: _listed(asdict(getattr(self, name))) for name in BLOCKS}

    def to_json(self) -> str:
        """Resolved configuration as indented JSON."""
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        """Read a configuration file.

        Raises:
            ConfigError: If the file is missing, not JSON, or invalid
        """
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"Cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def dump(self, path: Union[str, Path]) -> None:
        """Write the resolved configuration."""
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def with_overrides(
        self,
        directory: Optional[str] = None,
        workers: Optional[int] = None,
        seeds: Optional[Tuple[int, ...]] = None,
    ) -> "ExperimentConfig":
        """Copy with command-line overrides applied."""
        output = self.output
        if directory is not None:
            output = replace(output, directory=directory)
        if workers is not None:
            output = replace(output, workers=workers)
        trainer = self.trainer if seeds is None else replace(self.trainer, seeds=tuple(seeds))
        return replace(self, output=output, trainer=trainer)

    def family_spec(self, size: Optional[int] = None) -> FamilySpec:
        """Layout family of the env block."""
        return FamilySpec(
            level=self.env.level,
            grid_size=self.env.grid_size,
            seed=self.env.seed,
            size=self.env.eval_size if size is None else size,
            time_limit=self.env.time_limit,
            proximity_radius=self.env.proximity_radius,
            exclusion_radius=self.env.exclusion_radius,
            metric=self.env.metric,
            bonus_semantics=self.guidance.bonus_semantics,
            gamma=self.env.gamma,
            state_cap=self.env.state_cap,
        )

    def task_spec(self) -> TaskSpec:
        """Task recipe for training."""
        return TaskSpec(
            family=self.family_spec(),
            stages=self.guidance.stages,
            kind=self.guidance.kind,
            scale_factors=self.guidance.scale_factors,
        )

    def sweep_spec(self) -> SweepSpec:
        """Sweep over the schedule grid and seed list."""
        return SweepSpec(
            schedules=self.schedule.schedules(),
            seeds=self.trainer.seeds,
            tasks=self.task_spec(),
            trainer=self.trainer.trainer_config(self.trainer.seeds[0]),
            eps=self.measurement.eps,
            anchor=self.measurement.anchor,
            baseline=self.schedule.baseline,
            policy=self.measurement.policy,
        )
