"""Exporters for MDPs, traces, sweeps and nesting reports."""

from stagerl.exporters.graphml import GraphMLExporter, transition_graph
from stagerl.exporters.tables import (
    CSV_SCHEMA_VERSION,
    GnuplotCurveExporter,
    PolicySetCsvExporter,
    PolicyTableExporter,
    SummaryCsvExporter,
    SweepCsvExporter,
    TraceCsvExporter,
    ValuesCsvExporter,
    ViolationsCsvExporter,
    format_real,
)
from stagerl.exporters.text import MdpTextExporter

__all__ = [
    "CSV_SCHEMA_VERSION",
    "GnuplotCurveExporter",
    "GraphMLExporter",
    "MdpTextExporter",
    "PolicySetCsvExporter",
    "PolicyTableExporter",
    "SummaryCsvExporter",
    "SweepCsvExporter",
    "TraceCsvExporter",
    "ValuesCsvExporter",
    "ViolationsCsvExporter",
    "format_real",
    "transition_graph",
]
