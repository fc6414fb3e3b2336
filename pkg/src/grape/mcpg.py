"""Merging buggy/fixed CPGs, slicing around changed nodes, simplification.

The merged graph numbers fixed-version nodes first (0..|V_fixed|-1) and
continues with buggy-only nodes.  Matched nodes carry version "both";
cross-version duplicate edges are stored once with both version flags set.
"""

from dataclasses import dataclass, field, replace

from .cpgbuild import build_cpg
from .diffs import PatchDiff
from .graphs import CodeGraph, GraphEdge, GraphNode
from .normalize import NameMap, normalize_names

SLICE_EDGE_TYPES = ("CDG", "DDG", "CFG")


class MergeError(Exception):
    pass


@dataclass
class MergedGraph:
    graph: CodeGraph
    changed_nodes: set[int] = field(default_factory=set)


def _ast_children(graph: CodeGraph) -> tuple[dict[int, list[int]], list[int]]:
    """AST child lists (in edge order) and AST roots (in id order)."""
    children: dict[int, list[int]] = {n.id: [] for n in graph.nodes}
    has_parent = set()
    for e in graph.edges:
        if e.type == "AST":
            children[e.src].append(e.dst)
            has_parent.add(e.dst)
    roots = sorted(n.id for n in graph.nodes if n.id not in has_parent)
    return children, roots


def match_nodes(g_fixed: CodeGraph, g_buggy: CodeGraph) -> dict[int, int]:
    """Correspondence map buggy-id -> fixed-id by top-down AST matching.

    A node matches only if its parent matches and its (type, code) pair is
    equal; equal candidates under one parent are paired in line order.
    """
    f_nodes = g_fixed.node_by_id()
    b_nodes = g_buggy.node_by_id()
    f_children, f_roots = _ast_children(g_fixed)
    b_children, b_roots = _ast_children(g_buggy)
    corr: dict[int, int] = {}

    def pair_lists(f_ids: list[int], b_ids: list[int]) -> None:
        groups: dict[tuple[str, str], list[int]] = {}
        for fid in sorted(f_ids, key=lambda i: (f_nodes[i].line, i)):
            n = f_nodes[fid]
            groups.setdefault((n.type, n.code), []).append(fid)
        for bid in sorted(b_ids, key=lambda i: (b_nodes[i].line, i)):
            n = b_nodes[bid]
            bucket = groups.get((n.type, n.code))
            if bucket:
                fid = bucket.pop(0)
                corr[bid] = fid
                pair_lists(f_children[fid], b_children[bid])

    pair_lists(f_roots, b_roots)
    return corr


def merge(g_fixed: CodeGraph, g_buggy: CodeGraph,
          correspondence: dict[int, int]) -> MergedGraph:
    f_ids = {n.id for n in g_fixed.nodes}
    b_ids = {n.id for n in g_buggy.nodes}
    for bid, fid in correspondence.items():
        if bid not in b_ids or fid not in f_ids:
            raise MergeError(f"dangling correspondence entry {bid}->{fid}")
    if len(set(correspondence.values())) != len(correspondence):
        raise MergeError("correspondence is not injective")

    fixed_map = {old: new for new, old in enumerate(sorted(f_ids))}
    matched_fixed = set(correspondence.values())
    buggy_map: dict[int, int] = {}
    next_id = len(f_ids)
    for bid in sorted(b_ids):
        if bid in correspondence:
            buggy_map[bid] = fixed_map[correspondence[bid]]
        else:
            buggy_map[bid] = next_id
            next_id += 1

    nodes = []
    for n in sorted(g_fixed.nodes, key=lambda n: n.id):
        version = "both" if n.id in matched_fixed else "fixed"
        nodes.append(replace(n, id=fixed_map[n.id], version=version))
    for n in sorted(g_buggy.nodes, key=lambda n: n.id):
        if n.id not in correspondence:
            nodes.append(replace(n, id=buggy_map[n.id], version="buggy"))

    flags: dict[tuple[int, int, str], list[bool]] = {}
    for e in g_fixed.edges:
        key = (fixed_map[e.src], fixed_map[e.dst], e.type)
        flags.setdefault(key, [False, False])[1] = True
    for e in g_buggy.edges:
        key = (buggy_map[e.src], buggy_map[e.dst], e.type)
        flags.setdefault(key, [False, False])[0] = True
    edges = [GraphEdge(s, d, t, in_buggy, in_fixed)
             for (s, d, t), (in_buggy, in_fixed) in sorted(flags.items())]

    name = g_fixed.function or g_buggy.function
    graph = CodeGraph(name, nodes, edges)
    graph.validate()
    return MergedGraph(graph, identify_changed_nodes(graph))


def identify_changed_nodes(graph: CodeGraph) -> set[int]:
    return {n.id for n in graph.nodes if n.version != "both"}


def slice_graph(merged: CodeGraph, v_change: set[int]) -> CodeGraph:
    """One-hop forward/backward slice over CDG/DDG/CFG edges from the changed
    nodes, then a single round of AST-edge collection around the sliced set.
    Changed nodes are retained even when edge-isolated."""
    node_ids = {n.id for n in merged.nodes}
    if not v_change <= node_ids:
        raise MergeError("changed-node set references unknown node ids")
    v_slice = set(v_change)
    e_slice = []
    seen = set()
    for e in merged.edges:
        if e.type in SLICE_EDGE_TYPES and (e.src in v_change or e.dst in v_change):
            v_slice.add(e.src)
            v_slice.add(e.dst)
            key = (e.src, e.dst, e.type)
            if key not in seen:
                seen.add(key)
                e_slice.append(e)
    step1_nodes = set(v_slice)
    for e in merged.edges:
        if e.type == "AST" and (e.src in step1_nodes or e.dst in step1_nodes):
            v_slice.add(e.src)
            v_slice.add(e.dst)
            key = (e.src, e.dst, e.type)
            if key not in seen:
                seen.add(key)
                e_slice.append(e)
    nodes = [n for n in merged.nodes if n.id in v_slice]
    return CodeGraph(merged.function, nodes, e_slice)


def simplify(graph: CodeGraph) -> CodeGraph:
    """Drop empty-code nodes, then isolated nodes, to a fixed point."""
    nodes = list(graph.nodes)
    edges = list(graph.edges)
    while True:
        keep = {n.id for n in nodes if n.code != ""}
        edges2 = [e for e in edges if e.src in keep and e.dst in keep]
        touched = {e.src for e in edges2} | {e.dst for e in edges2}
        nodes2 = [n for n in nodes if n.id in keep and n.id in touched]
        if len(nodes2) == len(nodes) and len(edges2) == len(edges):
            return CodeGraph(graph.function, nodes2, edges2)
        # a removed hub can isolate neighbors; re-run until stable
        final_ids = {n.id for n in nodes2}
        edges = [e for e in edges2 if e.src in final_ids and e.dst in final_ids]
        nodes = nodes2


def union_graphs(graphs: list[CodeGraph], function: str = "") -> CodeGraph:
    """Unite disjoint graphs into one, renumbering ids into a single range."""
    nodes: list[GraphNode] = []
    edges: list[GraphEdge] = []
    offset = 0
    names = []
    for g in graphs:
        mapping = {old: offset + i for i, old in enumerate(sorted(n.id for n in g.nodes))}
        nodes.extend(replace(n, id=mapping[n.id]) for n in g.nodes)
        edges.extend(replace(e, src=mapping[e.src], dst=mapping[e.dst]) for e in g.edges)
        offset += len(g.nodes)
        if g.function:
            names.append(g.function)
    return CodeGraph(function or ",".join(names), nodes, edges)


def merge_graph_lists(fixed_graphs: list[CodeGraph],
                      buggy_graphs: list[CodeGraph]) -> CodeGraph:
    """Pair per-function graphs by function name, merge each pair, and unite
    the merged graphs.  Unpaired graphs enter wholly fixed or wholly buggy."""
    fixed_by_name = {g.function: g for g in fixed_graphs}
    buggy_by_name = {g.function: g for g in buggy_graphs}
    merged = []
    for name, gf in fixed_by_name.items():
        gb = buggy_by_name.get(name)
        if gb is None:
            gb = CodeGraph(name, [], [])
        merged.append(merge(gf, gb, match_nodes(gf, gb)).graph)
    for name, gb in buggy_by_name.items():
        if name not in fixed_by_name:
            merged.append(merge(CodeGraph(name, [], []), gb, {}).graph)
    return union_graphs(merged)


def build_mcpg(merged: CodeGraph) -> CodeGraph:
    return simplify(slice_graph(merged, identify_changed_nodes(merged)))


def _function_spans(graphs: list[CodeGraph]) -> dict[str, tuple[int, int]]:
    spans = {}
    for g in graphs:
        lines = [n.line for n in g.nodes if n.line > 0]
        spans[g.function] = (min(lines), max(lines)) if lines else (0, 0)
    return spans


def build_patch_mcpg(pre_sources: dict[str, str], post_sources: dict[str, str],
                     diff: PatchDiff) -> CodeGraph:
    """Full source-level pipeline for one patch: normalization with a shared
    NameMap, per-function CPGs for both versions, merge of the functions the
    diff touches, slice, and simplification."""
    name_map = NameMap()
    fixed_graphs: list[CodeGraph] = []
    buggy_graphs: list[CodeGraph] = []
    for fc in diff.files:
        post = post_sources.get(fc.path, "")
        pre = pre_sources.get(fc.path, "")
        post_norm, name_map = normalize_names(post, name_map) if post else ("", name_map)
        pre_norm, name_map = normalize_names(pre, name_map) if pre else ("", name_map)
        post_graphs = build_cpg(post_norm, "fixed") if post_norm else []
        pre_graphs = build_cpg(pre_norm, "buggy") if pre_norm else []
        post_spans = _function_spans(post_graphs)
        pre_spans = _function_spans(pre_graphs)

        def touched(name: str) -> bool:
            lo, hi = post_spans.get(name, (0, -1))
            if any(lo <= ln <= hi for ln in fc.added_lines):
                return True
            lo, hi = pre_spans.get(name, (0, -1))
            return any(lo <= ln <= hi for ln in fc.removed_lines)

        names = set(post_spans) | set(pre_spans)
        modified = {n for n in names if touched(n)}
        # a function present in only one version counts as modified outright
        modified |= set(post_spans) ^ set(pre_spans)
        fixed_graphs.extend(g for g in post_graphs if g.function in modified)
        buggy_graphs.extend(g for g in pre_graphs if g.function in modified)
    merged = merge_graph_lists(fixed_graphs, buggy_graphs)
    return build_mcpg(merged)
