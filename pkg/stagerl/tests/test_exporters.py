"""Tests for the CSV, GraphML, plot-data exporters and grid rendering."""

import csv
import io
import math

import numpy as np
import pytest
from lxml import etree

from stagerl.critical_period import RunRecord, SweepResult, SweepSpec, summarize
from stagerl.data_structures import (
    DeterministicPolicy,
    NestingReport,
    OptimalityViolation,
    PolicySet,
    StageSchedule,
    SupportViolation,
    ValueFunction,
)
from stagerl.examples import chain_mdp
from stagerl.exporters import (
    CSV_SCHEMA_VERSION,
    GnuplotCurveExporter,
    GraphMLExporter,
    PolicySetCsvExporter,
    PolicyTableExporter,
    SummaryCsvExporter,
    SweepCsvExporter,
    ValuesCsvExporter,
    ViolationsCsvExporter,
    format_real,
    transition_graph,
)
from stagerl.gridnav import RIGHT, GridNavEnv, canonical_layout, compile_nav
from stagerl.trainer import TrainerConfig
from stagerl.visualizers import GridRenderer

GRAPHML = "{http://graphml.graphdrawing.org/xmlns}"


def _rows(text: str):
    return list(csv.reader(io.StringIO(text)))


def _sweep_result() -> SweepResult:
    schedule = StageSchedule((10, 20, 30))
    spec = SweepSpec(schedules=(schedule,), seeds=(0, 1), trainer=TrainerConfig(total_steps=100))
    records = (
        RunRecord(schedule, 0, convergence_step=40, final_success=0.75,
                  outcome_counts=(("goal", 3), ("timeout", 1))),
        RunRecord(schedule, 1, convergence_step=None, final_success=0.25),
        RunRecord(StageSchedule((100,)), 0, baseline=True, error="RuntimeError('boom')"),
    )
    return SweepResult(spec, records)


class TestFormatting:
    """Tests for real-number formatting."""

    @pytest.mark.parametrize(
        "value,expected",
        [(None, "NA"), (math.nan, "NA"), (math.inf, "inf"), (-math.inf, "-inf"), (0.5, "0.500000")],
    )
    def test_format_real(self, value, expected) -> None:
        """Test fixed precision and the NA/inf markers."""
        assert format_real(value) == expected


class TestCsvExporters:
    """Tests for the CSV exporters."""

    def test_values(self) -> None:
        """Test the schema column and one row per state."""
        rows = _rows(ValuesCsvExporter().export(ValueFunction(np.array([0.81, 0.9, 0.0]))))
        assert rows[0] == ["schema", "state", "label", "value"]
        assert rows[1] == [str(CSV_SCHEMA_VERSION), "0", "0", "0.810000"]
        assert len(rows) == 4

    def test_policy_set_actions_joined(self) -> None:
        """Test that tied actions are joined with semicolons."""
        policy_set = PolicySet(np.array([[True, True], [False, True]]))
        rows = _rows(PolicySetCsvExporter().export(policy_set, ["a", "b"]))
        assert rows[1][1:] == ["0", "a", "0;1"]
        assert rows[2][1:] == ["1", "b", "1"]

    def test_sweep_rows(self) -> None:
        """Test padding, NA steps, outcome counts and errors."""
        rows = _rows(SweepCsvExporter().export(_sweep_result()))
        header = rows[0]
        assert header[:5] == ["schema", "baseline", "t1", "t2", "t3"]
        first = dict(zip(header, rows[1]))
        assert first["convergence_step"] == "40"
        assert first["goal"] == "3"
        assert first["truncated"] == "0"
        assert dict(zip(header, rows[2]))["convergence_step"] == "NA"
        baseline = dict(zip(header, rows[3]))
        assert (baseline["t1"], baseline["t2"]) == ("100", "")
        assert baseline["final_success"] == "NA"
        assert "boom" in baseline["error"]

    def test_summary_rows(self) -> None:
        """Test infinite means under the strict policy."""
        result = _sweep_result()
        rows = _rows(SummaryCsvExporter().export(result.summaries()))
        header = rows[0]
        multi = dict(zip(header, rows[1]))
        assert multi["schedule"] == "10-20-30"
        assert multi["mean_l"] == "inf"
        assert multi["std_l"] == "NA"
        assert multi["mean_success"] == "0.500000"
        assert dict(zip(header, rows[2]))["errors"] == "1"

    def test_summary_lenient(self) -> None:
        """Test finite means under the lenient policy."""
        records = _sweep_result().records[:2]
        rows = _rows(SummaryCsvExporter().export([summarize(records, "lenient")]))
        assert dict(zip(rows[0], rows[1]))["mean_l"] == "40.000000"

    def test_violations(self) -> None:
        """Test one row per violation across layouts."""
        reports = [
            NestingReport(support_violations=(SupportViolation(1, 4),)),
            NestingReport(optimality_violations=(OptimalityViolation(2, 5, 3, "forward"),)),
        ]
        rows = _rows(ViolationsCsvExporter().export(reports))
        assert rows[1][1:] == ["0", "support", "1", "4", "4", "", ""]
        assert rows[2][1:] == ["1", "optimality", "2", "5", "5", "3", "forward"]

    def test_policy_table(self) -> None:
        """Test the tab-separated policy table."""
        text = PolicyTableExporter().export([DeterministicPolicy([0, 1])], [["s0", "s1"]])
        assert text.splitlines() == ["task\tstate\taction\tlabel", "0\t0\t0\ts0", "0\t1\t1\ts1"]


class TestGnuplotCurveExporter:
    """Tests for plot data."""

    def test_blocks(self) -> None:
        """Test that blocks are separated by two blank lines."""
        text = GnuplotCurveExporter().export(
            {"10-20-30": [(0, 0.0, 0.0), (50, 0.5, 0.1)], "uni:100": [(0, 0.0, 0.0)]}
        )
        blocks = text.rstrip("\n").split("\n\n\n")
        assert len(blocks) == 2
        assert blocks[0].splitlines() == [
            "# 10-20-30",
            "# step mean std",
            "0 0.000000 0.000000",
            "50 0.500000 0.100000",
        ]
        assert blocks[1].startswith("# uni:100")


class TestGraphMLExporter:
    """Tests for GraphML export."""

    def test_transition_graph(self) -> None:
        """Test one edge per positive-probability transition."""
        graph = transition_graph(chain_mdp())
        assert graph.number_of_nodes() == 3
        assert graph.number_of_edges() == 6
        assert graph.nodes[2]["terminal"]

    def test_graphml_parses(self) -> None:
        """Test that the output is GraphML with labelled nodes and weighted edges."""
        text = GraphMLExporter().export(chain_mdp(), ["start", "middle", "end"])
        root = etree.fromstring(text.encode("utf-8"))
        assert root.tag == f"{GRAPHML}graphml"
        nodes = root.findall(f"{GRAPHML}graph/{GRAPHML}node")
        assert [n.find(f"{GRAPHML}data").text for n in nodes] == ["start", "middle", "end"]
        edges = root.findall(f"{GRAPHML}graph/{GRAPHML}edge")
        assert len(edges) == 6
        rewards = {
            (e.get("source"), e.get("target")): float(e.findall(f"{GRAPHML}data")[2].text)
            for e in edges
        }
        assert rewards[("s1", "s2")] == pytest.approx(0.9)


class TestGridRenderer:
    """Tests for layout and policy rendering."""

    def test_render_layout(self) -> None:
        """Test the bordered level-1 layout."""
        lines = GridRenderer().render_layout(canonical_layout(5)).split("\n")
        assert lines[0] == "┌─ level 1 ─┐"
        assert lines[2] == "│ · G · O · │"
        assert lines[3] == "│ · · S · · │"
        assert lines[-1] == "└───────────┘"

    def test_render_policy(self) -> None:
        """Test arrows on free cells and at the start."""
        model = compile_nav(GridNavEnv(canonical_layout(5), time_limit=6))
        policy = DeterministicPolicy(np.full(model.mdp.n_states, RIGHT))
        text = GridRenderer().render_policy(model, policy)
        assert "S→" in text
        assert "↑" not in text
        assert text.startswith("╔")
