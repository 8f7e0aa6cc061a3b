"""Plain-text MDP format exporter."""

from stagerl.data_structures import TabularMDP


class MdpTextExporter:
    """Exporter for the plain-text MDP format read by :class:`~stagerl.parser.MdpTextParser`.

    Numbers are written with ``repr`` so parsing the output recovers the
    exact floats.
    """

    def export(self, mdp: TabularMDP) -> str:
        """Export an MDP to text.

        Args:
            mdp: The MDP to export

        Returns:
            Text format string
        """
        lines = [
            f"states {mdp.n_states}",
            f"actions {mdp.n_actions}",
            f"gamma {mdp.gamma!r}",
            " ".join(["terminal"] + [str(s) for s in sorted(mdp.terminal_states)]),
        ]
        for s in range(mdp.n_states):
            for a in range(mdp.n_actions):
                row = mdp.transition_vector(s, a)
                probs = " ".join(_number(p) for p in row)
                lines.append(f"{s} {a} : {probs} | {_number(mdp.reward[s, a])}")
        return "\n".join(lines) + "\n"


def _number(value: float) -> str:
    value = float(value)
    return "0" if value == 0.0 else repr(value)
