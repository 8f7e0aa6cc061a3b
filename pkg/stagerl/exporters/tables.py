"""CSV and plot-data exporters for values, traces, sweeps and nesting reports.

Every CSV starts with a header row whose first column is ``schema``, carrying
:data:`CSV_SCHEMA_VERSION` on every row. Reals are written with fixed
precision and a decimal point regardless of locale; non-converged steps are
written as ``NA`` and infinite means as ``inf``.
"""

import csv
import io
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from stagerl.critical_period import ScheduleSummary, SweepResult
from stagerl.data_structures import DeterministicPolicy, NestingReport, PolicySet, ValueFunction
from stagerl.trainer import TrainingTrace

CSV_SCHEMA_VERSION = 1
OUTCOME_COLUMNS = ("goal", "non_goal", "timeout", "truncated")


def format_real(value: Optional[float]) -> str:
    """Fixed-precision rendering with ``NA`` for missing values and ``inf`` for infinity."""
    if value is None or math.isnan(value):
        return "NA"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.6f}"


def _write(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["schema", *header])
    for row in rows:
        writer.writerow([CSV_SCHEMA_VERSION, *row])
    return buffer.getvalue()


def _label(labels: Optional[Sequence[str]], state: int) -> str:
    return labels[state] if labels is not None else str(state)


class ValuesCsvExporter:
    """Exporter for state values."""

    def export(self, values: ValueFunction, state_labels: Optional[Sequence[str]] = None) -> str:
        """Export one row per state."""
        return _write(
            ("state", "label", "value"),
            (
                (s, _label(state_labels, s), format_real(values[s]))
                for s in range(len(values))
            ),
        )


class PolicySetCsvExporter:
    """Exporter for optimal action sets."""

    def export(self, policy_set: PolicySet, state_labels: Optional[Sequence[str]] = None) -> str:
        """Export one row per state; actions are joined with ``;``."""
        return _write(
            ("state", "label", "actions"),
            (
                (
                    s,
                    _label(state_labels, s),
                    ";".join(str(a) for a in sorted(policy_set.actions(s))),
                )
                for s in range(len(policy_set))
            ),
        )


class TraceCsvExporter:
    """Exporter for the episode log of a training trace."""

    def export(self, trace: TrainingTrace) -> str:
        """Export one row per finished episode."""
        return _write(
            ("episode", "step", "task", "episode_return", "outcome", "length", "stage_index"),
            (
                (
                    i,
                    record.end_step,
                    record.task,
                    format_real(record.episode_return),
                    record.outcome,
                    record.length,
                    record.stage_index,
                )
                for i, record in enumerate(trace.episodes)
            ),
        )


class PolicyTableExporter:
    """Exporter for greedy policies as a ``task state action`` text table."""

    def export(
        self,
        policies: Sequence[DeterministicPolicy],
        state_labels: Optional[Sequence[Sequence[str]]] = None,
    ) -> str:
        """Export every task's policy, one line per state.

        Args:
            policies: One policy per task
            state_labels: Optional labels per task and state

        Returns:
            Tab-separated text table with a header line
        """
        lines = ["task\tstate\taction\tlabel"]
        for k, policy in enumerate(policies):
            labels = state_labels[k] if state_labels is not None else None
            for s in range(len(policy)):
                lines.append(f"{k}\t{s}\t{policy[s]}\t{_label(labels, s)}")
        return "\n".join(lines) + "\n"


class SweepCsvExporter:
    """Exporter for the raw (schedule, seed) records of a sweep."""

    def export(self, result: SweepResult) -> str:
        """Export one row per cell; transitions are padded to the longest schedule."""
        width = max(record.schedule.n_stages for record in result.records)
        header = (
            ["baseline"]
            + [f"t{i + 1}" for i in range(width)]
            + ["seed", "convergence_step", "final_success"]
            + list(OUTCOME_COLUMNS)
            + ["error"]
        )
        rows: List[List[object]] = []
        for record in result.records:
            transitions = list(record.schedule.transitions)
            transitions += [""] * (width - len(transitions))
            counts = dict(record.outcome_counts)
            rows.append(
                [int(record.baseline)]
                + transitions
                + [
                    record.seed,
                    "NA" if record.convergence_step is None else record.convergence_step,
                    format_real(record.final_success),
                ]
                + [counts.get(name, 0) for name in OUTCOME_COLUMNS]
                + [record.error or ""]
            )
        return _write(header, rows)


class SummaryCsvExporter:
    """Exporter for per-schedule summaries."""

    def export(self, summaries: Sequence[ScheduleSummary]) -> str:
        """Export one row per schedule."""
        return _write(
            (
                "schedule",
                "baseline",
                "mean_l",
                "std_l",
                "mean_success",
                "std_success",
                "converged",
                "n_seeds",
                "errors",
                "policy",
            ),
            (
                (
                    s.schedule.label,
                    int(s.baseline),
                    format_real(s.mean_l),
                    format_real(s.std_l),
                    format_real(s.mean_success),
                    format_real(s.std_success),
                    s.converged,
                    s.n_seeds,
                    s.errors,
                    s.policy,
                )
                for s in summaries
            ),
        )


class ViolationsCsvExporter:
    """Exporter for nesting violations across layouts."""

    def export(
        self,
        reports: Sequence[NestingReport],
        state_labels: Optional[Sequence[Sequence[str]]] = None,
    ) -> str:
        """Export one row per violation; ``layout`` indexes ``reports``."""
        rows: List[Tuple[object, ...]] = []
        for k, report in enumerate(reports):
            labels = state_labels[k] if state_labels is not None else None
            for v in report.support_violations:
                rows.append((k, "support", v.stage, v.state, _label(labels, v.state), "", ""))
            for o in report.optimality_violations:
                rows.append(
                    (
                        k,
                        "optimality",
                        o.stage,
                        o.state,
                        _label(labels, o.state),
                        o.action,
                        o.direction,
                    )
                )
        return _write(("layout", "kind", "stage", "state", "label", "action", "direction"), rows)


class GnuplotCurveExporter:
    """Exporter for success curves as gnuplot data blocks.

    Each curve is a block headed by a ``# label`` comment; blocks are
    separated by two blank lines so ``index N`` selects one.
    """

    def export(self, curves: Dict[str, List[Tuple[int, float, float]]]) -> str:
        """Export ``label -> [(step, mean, std), ...]`` curves."""
        blocks = []
        for label, points in curves.items():
            lines = [f"# {label}", "# step mean std"]
            lines.extend(
                f"{step} {format_real(mean)} {format_real(std)}" for step, mean, std in points
            )
            blocks.append("\n".join(lines))
        return "\n\n\n".join(blocks) + "\n"
