"""Parsers for the plain-text MDP format and text-rendered grid layouts."""

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from stagerl.data_structures import TabularMDP
from stagerl.gridnav import Cell, LayoutSpec


@dataclass
class Token:
    """A parsed line of the MDP text format."""
    type: str
    value: Tuple[str, ...]
    line: int


class MdpTextParser:
    """Parser for the plain-text MDP format.

    Format::

        # comment
        states 3
        actions 2
        gamma 0.9
        terminal 2
        0 0 : 0 1 0 | 0
        0 1 : 1 0 0 | 0
        ...

    Header lines come first; each transition line gives ``s a``, the
    probability of every next state and the reward. Missing (s, a) lines
    are an error.
    """

    NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
    PATTERNS = [
        ("STATES", r"states\s+(\d+)"),
        ("ACTIONS", r"actions\s+(\d+)"),
        ("GAMMA", r"gamma\s+(" + NUMBER + r")"),
        ("TERMINAL", r"terminal((?:\s+\d+)*)"),
        ("ROW", r"(\d+)\s+(\d+)\s*:\s*([^|]*)\|\s*(" + NUMBER + r")"),
    ]
    HEADERS = ("STATES", "ACTIONS", "GAMMA", "TERMINAL")

    def tokenize(self, text: str) -> List[Token]:
        """Split text into header and row tokens.

        Raises:
            ValueError: On a line matching no pattern
        """
        tokens = []
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            for token_type, pattern in self.PATTERNS:
                match = re.fullmatch(pattern, line)
                if match:
                    tokens.append(Token(token_type, match.groups(), number))
                    break
            else:
                raise ValueError(f"Invalid line {number}: '{raw.strip()}'")
        return tokens

    def parse(self, text: str) -> TabularMDP:
        """Parse text into a TabularMDP.

        Args:
            text: MDP in the text format

        Returns:
            TabularMDP

        Raises:
            ValueError: If the text is malformed or describes an invalid MDP
        """
        tokens = self.tokenize(text)
        header: Dict[str, Token] = {}
        rows = [t for t in tokens if t.type == "ROW"]
        for token in tokens:
            if token.type in self.HEADERS:
                if token.type in header:
                    raise ValueError(f"Duplicate {token.type.lower()} line {token.line}")
                header[token.type] = token
        for name in ("STATES", "ACTIONS", "GAMMA"):
            if name not in header:
                raise ValueError(f"Missing '{name.lower()}' header")

        n_states = int(header["STATES"].value[0])
        n_actions = int(header["ACTIONS"].value[0])
        gamma = float(header["GAMMA"].value[0])
        terminals = []
        if "TERMINAL" in header:
            terminals = [int(s) for s in header["TERMINAL"].value[0].split()]
        for s in terminals:
            if not 0 <= s < n_states:
                raise ValueError(f"Terminal state {s} outside the MDP")

        transition = np.zeros((n_states, n_actions, n_states))
        reward = np.zeros((n_states, n_actions))
        seen = np.zeros((n_states, n_actions), dtype=bool)
        for token in rows:
            s, a, probs, r = token.value
            s, a = int(s), int(a)
            if not (0 <= s < n_states and 0 <= a < n_actions):
                raise ValueError(f"Line {token.line}: pair ({s}, {a}) outside the MDP")
            if seen[s, a]:
                raise ValueError(f"Line {token.line}: duplicate pair ({s}, {a})")
            values = [float(p) for p in probs.split()]
            if len(values) != n_states:
                raise ValueError(
                    f"Line {token.line}: expected {n_states} probabilities, got {len(values)}"
                )
            transition[s, a] = values
            reward[s, a] = float(r)
            seen[s, a] = True
        missing = np.argwhere(~seen)
        if len(missing):
            s, a = missing[0]
            raise ValueError(f"Missing transition line for pair ({s}, {a})")
        return TabularMDP.from_dense(transition, reward, gamma, terminals)


class LayoutParser:
    """Parser for text-rendered layouts.

    Characters: ``.`` empty, ``#`` wall, ``G`` goal, ``O`` other object,
    ``S`` start (must be the centre cell if present). Objects are numbered
    in reading order.
    """

    CHARACTERS = frozenset(".#GOS")

    def parse(self, text: str, level: int = 1, seed: int = 0) -> LayoutSpec:
        """Parse a text grid into a LayoutSpec.

        Args:
            text: Square grid, one row per line
            level: Level the layout belongs to
            seed: Seed recorded on the layout

        Returns:
            LayoutSpec

        Raises:
            ValueError: If the grid is malformed
        """
        rows = [line.strip() for line in text.strip().splitlines() if line.strip()]
        size = len(rows)
        if size == 0:
            raise ValueError("Layout text is empty")
        objects: List[Cell] = []
        walls: List[Cell] = []
        goal_index: Optional[int] = None
        for r, row in enumerate(rows):
            if len(row) != size:
                raise ValueError(f"Row {r} has length {len(row)}, expected {size}")
            for c, char in enumerate(row):
                if char not in self.CHARACTERS:
                    raise ValueError(f"Invalid character '{char}' at ({r}, {c})")
                if char == "#":
                    walls.append((r, c))
                elif char == "S" and (r, c) != (size // 2, size // 2):
                    raise ValueError(f"Start must be the centre cell, found at ({r}, {c})")
                elif char in "GO":
                    if char == "G":
                        if goal_index is not None:
                            raise ValueError("Layout has more than one goal")
                        goal_index = len(objects)
                    objects.append((r, c))
        if goal_index is None:
            raise ValueError("Layout has no goal")
        return LayoutSpec(
            level=level,
            grid_size=size,
            object_cells=tuple(objects),
            goal_index=goal_index,
            wall_cells=frozenset(walls),
            seed=seed,
        )
