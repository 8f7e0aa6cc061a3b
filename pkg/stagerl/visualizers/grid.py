"""Character-canvas rendering of grid layouts and greedy policies."""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple

from stagerl.data_structures import DeterministicPolicy
from stagerl.gridnav import DOWN, LEFT, RIGHT, UP, LayoutSpec, NavModel, NavState

ARROWS = {UP: "↑", DOWN: "↓", LEFT: "←", RIGHT: "→"}


class LineStyle(Enum):
    """Border styles."""
    SINGLE = "single"  # ─ │ ┌ ┐ └ ┘
    DOUBLE = "double"  # ═ ║ ╔ ╗ ╚ ╝


class Layer(Enum):
    """Z-index layers for rendering priority."""
    BACKGROUND = 0
    LINES = 1
    TEXT = 2


@dataclass
class Pixel:
    """A single character of the canvas."""
    char: str = " "
    layer: Layer = Layer.BACKGROUND


class Canvas:
    """2D character canvas with layered writes."""

    BOX_CHARS = {
        LineStyle.SINGLE: {"h": "─", "v": "│", "tl": "┌", "tr": "┐", "bl": "└", "br": "┘"},
        LineStyle.DOUBLE: {"h": "═", "v": "║", "tl": "╔", "tr": "╗", "bl": "╚", "br": "╝"},
    }

    def __init__(self, width: int, height: int):
        """Initialize canvas.

        Args:
            width: Width of canvas in characters
            height: Height of canvas in characters
        """
        self.width = width
        self.height = height
        self.grid: Dict[Tuple[int, int], Pixel] = {}

    def get(self, x: int, y: int) -> Pixel:
        """Get the character at a position."""
        return self.grid.get((x, y), Pixel())

    def set(self, x: int, y: int, char: str, layer: Layer = Layer.TEXT) -> bool:
        """Place a character unless out of bounds or under a higher layer.

        Returns:
            True if the character was placed
        """
        if not (0 <= x < self.width and 0 <= y < self.height):
            return False
        if layer.value >= self.get(x, y).layer.value:
            self.grid[(x, y)] = Pixel(char, layer)
            return True
        return False

    def write_text(self, x: int, y: int, text: str, layer: Layer = Layer.TEXT) -> None:
        """Write text starting at a position."""
        for i, char in enumerate(text):
            self.set(x + i, y, char, layer)

    def draw_box(
        self, x: int, y: int, width: int, height: int, style: LineStyle = LineStyle.SINGLE,
        title: str = "",
    ) -> None:
        """Draw a box with an optional title centred in the top border."""
        chars = self.BOX_CHARS[style]
        right, bottom = x + width - 1, y + height - 1
        self.set(x, y, chars["tl"], Layer.LINES)
        self.set(right, y, chars["tr"], Layer.LINES)
        self.set(x, bottom, chars["bl"], Layer.LINES)
        self.set(right, bottom, chars["br"], Layer.LINES)
        for i in range(x + 1, right):
            self.set(i, y, chars["h"], Layer.LINES)
            self.set(i, bottom, chars["h"], Layer.LINES)
        for i in range(y + 1, bottom):
            self.set(x, i, chars["v"], Layer.LINES)
            self.set(right, i, chars["v"], Layer.LINES)
        if title:
            text = f" {title} "
            self.write_text(x + max(1, (width - len(text)) // 2), y, text)

    def render(self) -> str:
        """Render the canvas to a multi-line string."""
        return "\n".join(
            "".join(self.get(x, y).char for x in range(self.width)) for y in range(self.height)
        )


class GridRenderer:
    """Renders layouts and policy overlays inside a bordered grid.

    Cells are drawn two characters wide: ``S`` start, ``G`` goal, ``O``
    other object, ``##`` wall, ``·`` empty.
    """

    CELL_WIDTH = 2

    def _canvas(self, layout: LayoutSpec, style: LineStyle, title: str) -> Canvas:
        width = layout.grid_size * self.CELL_WIDTH + 3
        canvas = Canvas(max(width, len(title) + 6), layout.grid_size + 2)
        canvas.draw_box(0, 0, width, layout.grid_size + 2, style, title)
        for r in range(layout.grid_size):
            for c in range(layout.grid_size):
                canvas.write_text(*self._position(r, c), self._symbol(layout, (r, c)))
        return canvas

    def _position(self, row: int, col: int) -> Tuple[int, int]:
        return 2 + col * self.CELL_WIDTH, 1 + row

    def _symbol(self, layout: LayoutSpec, cell: Tuple[int, int]) -> str:
        if cell in layout.wall_cells:
            return "##"
        if cell == layout.goal_cell:
            return "G"
        if cell in layout.object_cells:
            return "O"
        if cell == layout.start:
            return "S"
        return "·"

    def render_layout(self, layout: LayoutSpec) -> str:
        """Render a layout."""
        title = f"level {layout.level}"
        return self._canvas(layout, LineStyle.SINGLE, title).render()

    def render_policy(
        self, model: NavModel, policy: DeterministicPolicy, steps_left: Optional[int] = None
    ) -> str:
        """Overlay greedy actions on free cells.

        Each free cell shows the action of the flag-free state at that cell
        with ``steps_left`` remaining (default: the latest reachable time
        slice for that cell). Cells with no such state stay empty.

        Args:
            model: Compiled task the policy belongs to
            policy: Policy over the model's states
            steps_left: Fixed time slice to draw

        Returns:
            Rendered grid
        """
        policy.check(model.mdp)
        layout = model.env.layout
        chosen: Dict[Tuple[int, int], NavState] = {}
        for state in model.index:
            if state.goal_bonus_taken or any(state.nongoal_bonus_taken):
                continue
            if steps_left is not None and state.steps_left != steps_left:
                continue
            best = chosen.get(state.cell)
            if best is None or state.steps_left > best.steps_left:
                chosen[state.cell] = state

        canvas = self._canvas(layout, LineStyle.DOUBLE, "policy")
        for cell, state in chosen.items():
            if cell == layout.start:
                continue
            arrow = ARROWS[policy[model.index[state]]]
            canvas.write_text(*self._position(*cell), arrow + " ")
        start = model.index.get(NavState(layout.start, model.env.time_limit))
        if start is not None and steps_left in (None, model.env.time_limit):
            canvas.write_text(*self._position(*layout.start), "S" + ARROWS[policy[start]])
        return canvas.render()
