"""GraphML export of a tabular MDP's transition graph."""

from typing import Optional, Sequence

import networkx as nx
from lxml import etree

from stagerl.data_structures import TabularMDP

GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"
XSI_NS = "http://www.w3.org/2001/XMLSchema-instance"


def transition_graph(
    mdp: TabularMDP, state_labels: Optional[Sequence[str]] = None
) -> nx.MultiDiGraph:
    """Directed multigraph with one edge per (s, a, s') of positive probability.

    Args:
        mdp: The MDP
        state_labels: Optional label per state

    Returns:
        Graph with ``label``/``terminal`` node attributes and
        ``action``/``probability``/``reward`` edge attributes
    """
    graph = nx.MultiDiGraph()
    for s in range(mdp.n_states):
        label = state_labels[s] if state_labels is not None else str(s)
        graph.add_node(s, label=label, terminal=bool(mdp.terminal_mask[s]))
    for s in range(mdp.n_states):
        for a in range(mdp.n_actions):
            for target, p in zip(mdp.next_states[s, a], mdp.probs[s, a]):
                if p > 0.0:
                    graph.add_edge(
                        s,
                        int(target),
                        action=a,
                        probability=float(p),
                        reward=float(mdp.reward[s, a]),
                    )
    return graph


class GraphMLExporter:
    """Exporter for GraphML format."""

    def export(self, mdp: TabularMDP, state_labels: Optional[Sequence[str]] = None) -> str:
        """Export an MDP's transition graph to GraphML.

        Args:
            mdp: The MDP to export
            state_labels: Optional label per state

        Returns:
            GraphML format string
        """
        graph = transition_graph(mdp, state_labels)
        graphml = etree.Element("graphml", nsmap={None: GRAPHML_NS, "xsi": XSI_NS})
        graphml.set(
            f"{{{XSI_NS}}}schemaLocation",
            f"{GRAPHML_NS} {GRAPHML_NS}/1.0/graphml.xsd",
        )

        self._add_key(graphml, "d0", "node", "label", "string")
        self._add_key(graphml, "d1", "node", "terminal", "boolean")
        self._add_key(graphml, "d2", "edge", "action", "int")
        self._add_key(graphml, "d3", "edge", "probability", "double")
        self._add_key(graphml, "d4", "edge", "reward", "double")

        root = etree.SubElement(graphml, "graph", id="G", edgedefault="directed")
        for state, attrs in graph.nodes(data=True):
            node = etree.SubElement(root, "node", id=f"s{state}")
            self._add_data(node, "d0", attrs["label"])
            self._add_data(node, "d1", "true" if attrs["terminal"] else "false")

        for edge_id, (source, target, attrs) in enumerate(graph.edges(data=True)):
            edge = etree.SubElement(
                root, "edge", id=f"e{edge_id}", source=f"s{source}", target=f"s{target}"
            )
            self._add_data(edge, "d2", str(attrs["action"]))
            self._add_data(edge, "d3", repr(attrs["probability"]))
            self._add_data(edge, "d4", repr(attrs["reward"]))

        return etree.tostring(
            graphml, pretty_print=True, xml_declaration=True, encoding="UTF-8"
        ).decode("utf-8")

    def _add_key(
        self, parent: etree._Element, id: str, for_type: str, attr_name: str, attr_type: str
    ) -> None:
        etree.SubElement(
            parent,
            "key",
            id=id,
            **{"for": for_type, "attr.name": attr_name, "attr.type": attr_type},
        )

    def _add_data(self, parent: etree._Element, key: str, value: str) -> None:
        data = etree.SubElement(parent, "data", key=key)
        data.text = value
