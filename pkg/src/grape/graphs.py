"""Property-graph types shared across the pipeline, with JSON and DOT I/O."""

import json
from dataclasses import dataclass, field, replace

VERSIONS = ("fixed", "buggy", "both")
EDGE_TYPES = ("AST", "CFG", "CDG", "DDG")


class GraphValidationError(Exception):
    pass


@dataclass(frozen=True)
class GraphNode:
    id: int
    version: str  # fixed | buggy | both
    line: int
    type: str  # METHOD, CALL, IDENTIFIER, CONTROL_STRUCTURE, ...
    code: str


@dataclass(frozen=True)
class GraphEdge:
    src: int
    dst: int
    type: str  # AST | CFG | CDG | DDG
    in_buggy: bool
    in_fixed: bool


@dataclass
class CodeGraph:
    function: str
    nodes: list[GraphNode] = field(default_factory=list)
    edges: list[GraphEdge] = field(default_factory=list)

    def node_by_id(self) -> dict[int, GraphNode]:
        return {n.id: n for n in self.nodes}

    def edges_of_type(self, edge_type: str) -> list[GraphEdge]:
        return [e for e in self.edges if e.type == edge_type]

    def validate(self) -> None:
        ids = [n.id for n in self.nodes]
        if len(ids) != len(set(ids)):
            raise GraphValidationError("duplicate node ids")
        id_set = set(ids)
        for n in self.nodes:
            if n.id < 0:
                raise GraphValidationError(f"negative node id {n.id}")
            if n.version not in VERSIONS:
                raise GraphValidationError(f"bad node version {n.version!r} on node {n.id}")
        for e in self.edges:
            if e.src not in id_set or e.dst not in id_set:
                raise GraphValidationError(
                    f"edge {e.src}->{e.dst} references a missing node")
            if e.type not in EDGE_TYPES:
                raise GraphValidationError(f"bad edge type {e.type!r}")
            if not (e.in_buggy or e.in_fixed):
                raise GraphValidationError(
                    f"edge {e.src}->{e.dst} has no version flag set")


def renumber(graph: CodeGraph, mapping: dict[int, int]) -> CodeGraph:
    """Return a copy of the graph with node ids rewritten through mapping."""
    nodes = [replace(n, id=mapping[n.id]) for n in graph.nodes]
    edges = [replace(e, src=mapping[e.src], dst=mapping[e.dst]) for e in graph.edges]
    return CodeGraph(graph.function, nodes, edges)


# ---------------------------------------------------------------------------
# JSON interchange (schema shared with external CPG extractors)

_NODE_FIELDS = {"id": int, "version": str, "line": int, "type": str, "code": str}
_EDGE_FIELDS = {"src": int, "dst": int, "type": str, "in_buggy": bool, "in_fixed": bool}


def to_json_dict(graph: CodeGraph) -> dict:
    return {
        "function": graph.function,
        "nodes": [{"id": n.id, "version": n.version, "line": n.line,
                   "type": n.type, "code": n.code} for n in graph.nodes],
        "edges": [{"src": e.src, "dst": e.dst, "type": e.type,
                   "in_buggy": e.in_buggy, "in_fixed": e.in_fixed} for e in graph.edges],
    }


def _check_fields(record: dict, spec: dict, where: str) -> None:
    for name, typ in spec.items():
        if name not in record:
            raise GraphValidationError(f"{where}: missing field {name!r}")
        value = record[name]
        if typ is int:
            ok = isinstance(value, int) and not isinstance(value, bool)
        else:
            ok = isinstance(value, typ)
        if not ok:
            raise GraphValidationError(
                f"{where}: field {name!r} has wrong type {type(value).__name__}")


def from_json_dict(doc: dict) -> CodeGraph:
    if not isinstance(doc, dict):
        raise GraphValidationError("graph document must be a JSON object")
    if "function" not in doc or not isinstance(doc["function"], str):
        raise GraphValidationError("missing or non-string field 'function'")
    for key in ("nodes", "edges"):
        if key not in doc or not isinstance(doc[key], list):
            raise GraphValidationError(f"missing or non-array field {key!r}")
    nodes = []
    for i, rec in enumerate(doc["nodes"]):
        _check_fields(rec, _NODE_FIELDS, f"nodes[{i}]")
        if rec["version"] not in VERSIONS:
            raise GraphValidationError(f"nodes[{i}]: bad version {rec['version']!r}")
        nodes.append(GraphNode(rec["id"], rec["version"], rec["line"],
                               rec["type"], rec["code"]))
    edges = []
    for i, rec in enumerate(doc["edges"]):
        _check_fields(rec, _EDGE_FIELDS, f"edges[{i}]")
        if rec["type"] not in EDGE_TYPES:
            raise GraphValidationError(f"edges[{i}]: bad type {rec['type']!r}")
        edges.append(GraphEdge(rec["src"], rec["dst"], rec["type"],
                               rec["in_buggy"], rec["in_fixed"]))
    graph = CodeGraph(doc["function"], nodes, edges)
    graph.validate()
    return graph


def export_graph_json(graph: CodeGraph, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json_dict(graph), fh, indent=1)
        fh.write("\n")


def import_graph_json(path) -> CodeGraph:
    with open(path) as fh:
        return from_json_dict(json.load(fh))


# ---------------------------------------------------------------------------
# DOT rendering: red = buggy-only, green = fixed-only, black = both

_EDGE_STYLE = {"AST": "solid", "CFG": "bold", "CDG": "dashed", "DDG": "dotted"}


def _color(version_or_flags) -> str:
    return {"buggy": "red", "fixed": "green", "both": "black"}[version_or_flags]


def to_dot(graph: CodeGraph) -> str:
    lines = ["digraph {", '  node [shape=box, fontsize=10];']
    for n in graph.nodes:
        label = f"{n.id}: {n.type}\\n{n.code}".replace('"', '\\"')
        lines.append(f'  n{n.id} [label="{label}", color={_color(n.version)}];')
    for e in graph.edges:
        version = "both" if (e.in_buggy and e.in_fixed) else ("buggy" if e.in_buggy else "fixed")
        lines.append(f'  n{e.src} -> n{e.dst} [label="{e.type}", '
                     f'style={_EDGE_STYLE[e.type]}, color={_color(version)}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
