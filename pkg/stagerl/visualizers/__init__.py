"""Text renderers for grid layouts and policies."""

from stagerl.visualizers.grid import Canvas, GridRenderer

__all__ = ["Canvas", "GridRenderer"]
