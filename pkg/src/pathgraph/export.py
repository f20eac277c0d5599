"""Graph-description exports (Graphviz DOT and GraphML).

Each edge is drawn in the two mode colors of its photons.  Edges whose weight
is real and negative carry ``negative="true"`` and a box arrowhead, standing in
for the square marker used on negative-amplitude edges in published graph
drawings.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

from .graph import Graph
from .states import LocationLayout

FORMATS = ("dot", "graphml")

# mode 0 blue, 1 red, 2 green, 3 yellow, then a fallback cycle
MODE_COLORS = ("#1f5fbf", "#d62728", "#2ca02c", "#e5c100", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def mode_color(mode: int) -> str:
    return MODE_COLORS[mode % len(MODE_COLORS)]


def _negative(w: complex) -> bool:
    w = complex(w)
    return w.imag == 0.0 and w.real < 0.0


def _node_info(graph: Graph, layout: LocationLayout | None, v: int) -> tuple[str, str]:
    if layout is None:
        return "vertex", ""
    if v in layout.ancillas:
        return "ancilla", ""
    return "payoff", layout.group_of(v) or ""


def _weight_text(w: complex) -> str:
    w = complex(w)
    if w.imag == 0.0:
        return f"{w.real:.6g}"
    return f"{w.real:.6g}{w.imag:+.6g}j"


def to_dot(graph: Graph, layout: LocationLayout | None = None) -> str:
    lines = ["graph experiment {", "  node [shape=circle];"]
    for v in range(graph.n_vertices):
        role, group = _node_info(graph, layout, v)
        label = f"a{layout.ancillas.index(v) + 1}" if role == "ancilla" else str(v)
        attrs = f'label="{label}", role="{role}"'
        if group:
            attrs += f', group="{group}"'
        if role == "ancilla":
            attrs += ", style=dashed"
        lines.append(f"  {v} [{attrs}];")
    for e in graph.edges:
        attrs = [
            f'color="{mode_color(e.color_u)};0.5:{mode_color(e.color_v)}"',
            f'color_u="{e.color_u}"',
            f'color_v="{e.color_v}"',
            f'weight_re="{complex(e.weight).real!r}"',
            f'weight_im="{complex(e.weight).imag!r}"',
            f'label="{_weight_text(e.weight)}"',
            "penwidth=2",
        ]
        if _negative(e.weight):
            attrs += ['negative="true"', "dir=forward", "arrowhead=box"]
        lines.append(f"  {e.u} -- {e.v} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_graphml(graph: Graph, layout: LocationLayout | None = None) -> str:
    root = ET.Element("graphml", xmlns="http://graphml.graphdrawing.org/xmlns")
    keys = [
        ("role", "node", "string"), ("group", "node", "string"), ("dim", "node", "int"),
        ("color_u", "edge", "int"), ("color_v", "edge", "int"),
        ("weight_re", "edge", "double"), ("weight_im", "edge", "double"),
        ("stroke_u", "edge", "string"), ("stroke_v", "edge", "string"),
        ("negative", "edge", "boolean"),
    ]
    for name, domain, typ in keys:
        ET.SubElement(root, "key", {"id": name, "for": domain, "attr.name": name, "attr.type": typ})
    g = ET.SubElement(root, "graph", id="experiment", edgedefault="undirected")

    def data(parent, key, value):
        ET.SubElement(parent, "data", key=key).text = value

    for v in range(graph.n_vertices):
        role, group = _node_info(graph, layout, v)
        node = ET.SubElement(g, "node", id=f"n{v}")
        data(node, "role", role)
        data(node, "group", group)
        data(node, "dim", str(graph.dims[v]))
    for i, e in enumerate(graph.edges):
        el = ET.SubElement(g, "edge", id=f"e{i}", source=f"n{e.u}", target=f"n{e.v}")
        w = complex(e.weight)
        data(el, "color_u", str(e.color_u))
        data(el, "color_v", str(e.color_v))
        data(el, "weight_re", repr(w.real))
        data(el, "weight_im", repr(w.imag))
        data(el, "stroke_u", mode_color(e.color_u))
        data(el, "stroke_v", mode_color(e.color_v))
        data(el, "negative", "true" if _negative(w) else "false")
    ET.indent(root)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


def export_graph(graph: Graph, fmt: str, layout: LocationLayout | None = None) -> str:
    """Render ``graph`` as ``dot`` or ``graphml`` text; output is deterministic."""
    if fmt == "dot":
        return to_dot(graph, layout)
    if fmt == "graphml":
        return to_graphml(graph, layout)
    raise ValueError(f"unknown export format {fmt!r}; expected one of {', '.join(FORMATS)}")
