"""Tests for the MDP text and layout parsers."""

import numpy as np
import pytest

from stagerl.examples import chain_mdp
from stagerl.exporters import MdpTextExporter
from stagerl.gridnav import canonical_layout, make_level
from stagerl.parser import LayoutParser, MdpTextParser

CHAIN_TEXT = """
# three-state chain
states 3
actions 2
gamma 0.9
terminal 2
0 0 : 0 1 0 | 0
0 1 : 1 0 0 | 0
1 0 : 0 0 1 | 0.9
1 1 : 0 1 0 | 0
2 0 : 0 0 1 | 0
2 1 : 0 0 1 | 0
"""


class TestMdpTextParser:
    """Tests for MdpTextParser."""

    def test_parse_chain(self) -> None:
        """Test parsing a hand-written chain."""
        mdp = MdpTextParser().parse(CHAIN_TEXT)
        assert mdp.n_states == 3
        assert mdp.n_actions == 2
        assert mdp.gamma == 0.9
        assert mdp.terminal_states == frozenset({2})
        assert mdp.reward[1, 0] == pytest.approx(0.9)
        assert np.array_equal(mdp.transition_vector(0, 0), [0.0, 1.0, 0.0])

    def test_exported_text_parses_back(self) -> None:
        """Test that exporter output is accepted and keeps exact values."""
        original = chain_mdp(0.95)
        parsed = MdpTextParser().parse(MdpTextExporter().export(original))
        assert parsed.gamma == original.gamma
        assert np.array_equal(parsed.reward, original.reward)

    def test_tokenize_skips_comments(self) -> None:
        """Test that comments and blank lines produce no tokens."""
        tokens = MdpTextParser().tokenize("# header\n\nstates 2  # two\n")
        assert [(t.type, t.line) for t in tokens] == [("STATES", 3)]

    @pytest.mark.parametrize(
        "text,message",
        [
            ("states 1\nbogus\n", "Invalid line 2"),
            ("states 1\nactions 1\n0 0 : 1 | 0\n", "Missing 'gamma' header"),
            ("states 1\nstates 1\n", "Duplicate states"),
            ("states 1\nactions 1\ngamma 0.9\nterminal 3\n", "Terminal state 3"),
            ("states 1\nactions 1\ngamma 0.9\n0 1 : 1 | 0\n", "outside the MDP"),
            ("states 2\nactions 1\ngamma 0.9\n0 0 : 1 | 0\n", "expected 2 probabilities"),
            ("states 2\nactions 1\ngamma 0.9\n0 0 : 1 0 | 0\n", r"Missing transition .* \(1, 0\)"),
            (
                "states 1\nactions 1\ngamma 0.9\n0 0 : 1 | 0\n0 0 : 1 | 1\n",
                "duplicate pair",
            ),
        ],
    )
    def test_malformed(self, text, message) -> None:
        """Test error reporting for malformed text."""
        with pytest.raises(ValueError, match=message):
            MdpTextParser().parse(text)


class TestLayoutParser:
    """Tests for LayoutParser."""

    def test_parse_canonical(self) -> None:
        """Test parsing the rendered level-1 layout."""
        layout = LayoutParser().parse(canonical_layout(5).to_text())
        assert layout == canonical_layout(5)

    def test_rendered_level_parses_back(self) -> None:
        """Test that walls and object order survive rendering."""
        original = make_level(3, 7, 4)
        parsed = LayoutParser().parse(original.to_text(), level=3, seed=4)
        assert parsed.wall_cells == original.wall_cells
        assert parsed.goal_cell == original.goal_cell
        assert set(parsed.object_cells) == set(original.object_cells)

    def test_goal_index_in_reading_order(self) -> None:
        """Test that objects are numbered row by row."""
        layout = LayoutParser().parse("O....\n.....\n..S..\n.....\nO.O.G\n")
        assert layout.object_cells == ((0, 0), (4, 0), (4, 2), (4, 4))
        assert layout.goal_index == 3

    @pytest.mark.parametrize(
        "text,message",
        [
            ("", "empty"),
            ("...\n..\n...", "Row 1 has length 2"),
            ("G..\n.X.\n...", "Invalid character 'X'"),
            ("S..\n.G.\n...", "centre cell"),
            ("G.G\n...\n...", "more than one goal"),
            ("O..\n...\n...", "no goal"),
        ],
    )
    def test_malformed(self, text, message) -> None:
        """Test error reporting for malformed grids."""
        with pytest.raises(ValueError, match=message):
            LayoutParser().parse(text)
