"""Build per-function code property graphs from mini-language sources.

Each function yields one graph whose node set is its AST (plus a synthetic
METHOD_RETURN exit) and whose edge set unions AST, CFG, CDG, and DDG edges.
The CFG is statement-level: simple statements, returns, and the condition
nodes of if/while participate; expression subtrees hang off them via AST
edges only.
"""

from dataclasses import dataclass, field

from .graphs import CodeGraph, GraphEdge, GraphNode
from .minilang import Ast, parse_mini

STATEMENT_KINDS = {"LOCAL", "ASSIGNMENT", "CALL", "RETURN", "CONTROL_STRUCTURE"}


@dataclass
class _FnBuild:
    version: str
    nodes: list[GraphNode] = field(default_factory=list)
    ast_edges: list[tuple[int, int]] = field(default_factory=list)
    ids: dict[int, int] = field(default_factory=dict)  # id(Ast) -> node id
    method_id: int = -1
    exit_id: int = -1


def _alloc(build: _FnBuild, ast: Ast, next_id: list[int]) -> int:
    nid = next_id[0]
    next_id[0] += 1
    build.ids[id(ast)] = nid
    build.nodes.append(GraphNode(nid, build.version, ast.line, ast.kind, ast.code))
    return nid


def _walk_ast(build: _FnBuild, ast: Ast, next_id: list[int]) -> int:
    nid = _alloc(build, ast, next_id)
    for child in ast.children:
        cid = _walk_ast(build, child, next_id)
        build.ast_edges.append((nid, cid))
    return nid


def _idents(expr: Ast) -> set[str]:
    names = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if node.kind == "IDENTIFIER":
            names.add(node.name)
        stack.extend(node.children)
    return names


def stmt_defs(ast: Ast) -> set[str]:
    if ast.kind in ("LOCAL", "ASSIGNMENT"):
        return {ast.name}
    return set()


def stmt_uses(ast: Ast) -> set[str]:
    if ast.kind == "LOCAL":
        return _idents(ast.children[0]) if ast.children else set()
    if ast.kind == "ASSIGNMENT":
        return _idents(ast.children[1])
    if ast.kind == "CONTROL_STRUCTURE":
        return _idents(ast.children[0])
    if ast.kind in ("CALL", "RETURN"):
        names = set()
        for child in ast.children:
            names |= _idents(child)
        return names
    return set()


def build_cfg_edges(build: _FnBuild, method: Ast) -> set[tuple[int, int]]:
    edges: set[tuple[int, int]] = set()
    ids = build.ids

    def stmts(node: Ast):
        """Returns (entry id or None, exit frontier ids)."""
        if node.kind == "BLOCK":
            entry, frontier = None, []
            for child in node.children:
                e, x = stmts(child)
                if e is None:
                    continue
                if entry is None:
                    entry = e
                else:
                    for f in frontier:
                        edges.add((f, e))
                frontier = x
            return entry, frontier
        if node.kind == "CONTROL_STRUCTURE":
            cs = ids[id(node)]
            if node.ctrl == "while":
                be, bx = stmts(node.children[1])
                if be is None:
                    edges.add((cs, cs))
                else:
                    edges.add((cs, be))
                    for f in bx:
                        edges.add((f, cs))
                return cs, [cs]
            # if / if-else
            exits = []
            te, tx = stmts(node.children[1])
            if te is None:
                exits.append(cs)
            else:
                edges.add((cs, te))
                exits.extend(tx)
            if len(node.children) > 2:
                ee, ex = stmts(node.children[2])
                if ee is None:
                    exits.append(cs)
                else:
                    edges.add((cs, ee))
                    exits.extend(ex)
            else:
                exits.append(cs)
            return cs, list(dict.fromkeys(exits))
        if node.kind == "RETURN":
            nid = ids[id(node)]
            edges.add((nid, build.exit_id))
            return nid, []
        if node.kind in ("LOCAL", "ASSIGNMENT", "CALL"):
            nid = ids[id(node)]
            return nid, [nid]
        raise AssertionError(f"unexpected statement kind {node.kind}")

    body = method.children[-1]  # the BLOCK; PARAMs precede it
    entry, frontier = stmts(body)
    if entry is None:
        edges.add((build.method_id, build.exit_id))
    else:
        edges.add((build.method_id, entry))
        for f in frontier:
            edges.add((f, build.exit_id))
    return edges


def postdominators(nodes: set[int], cfg: set[tuple[int, int]], exit_id: int) -> dict[int, set[int]]:
    """Iterative set-intersection fixpoint over the reverse CFG."""
    succ = {n: set() for n in nodes}
    for s, d in cfg:
        succ[s].add(d)
    pdom = {n: set(nodes) for n in nodes}
    pdom[exit_id] = {exit_id}
    changed = True
    while changed:
        changed = False
        for n in nodes:
            if n == exit_id:
                continue
            if succ[n]:
                new = set.intersection(*(pdom[s] for s in succ[n])) | {n}
            else:
                new = {n}  # unreachable-from-exit corner; keep it inert
            if new != pdom[n]:
                pdom[n] = new
                changed = True
    return pdom


def build_cdg_edges(nodes: set[int], cfg: set[tuple[int, int]], exit_id: int) -> set[tuple[int, int]]:
    """Control dependence: n depends on p iff some successor of p is
    post-dominated by n while n does not strictly post-dominate p."""
    succ = {n: set() for n in nodes}
    for s, d in cfg:
        succ[s].add(d)
    pdom = postdominators(nodes, cfg, exit_id)
    edges = set()
    for p in nodes:
        if len(succ[p]) < 2:
            continue  # single-successor nodes cannot carry control dependence
        for n in nodes:
            if n == exit_id:
                continue
            if any(n in pdom[s] for s in succ[p]) and not (n in pdom[p] and n != p):
                edges.add((p, n))
    return edges


def build_ddg_edges(build: _FnBuild, method: Ast,
                    cfg: set[tuple[int, int]]) -> set[tuple[int, int]]:
    """Reaching-definitions worklist; edge d->u per def of a variable used at u."""
    ids = build.ids
    nodes = {build.method_id, build.exit_id}
    defs: dict[int, set[str]] = {}
    uses: dict[int, set[str]] = {}

    def collect(ast: Ast):
        if ast.kind in STATEMENT_KINDS:
            nid = ids[id(ast)]
            nodes.add(nid)
            defs[nid] = stmt_defs(ast)
            uses[nid] = stmt_uses(ast)
        if ast.kind == "BLOCK":
            for child in ast.children:
                collect(child)
        elif ast.kind == "CONTROL_STRUCTURE":
            for child in ast.children[1:]:  # branches; condition is part of the node
                collect(child)

    collect(method.children[-1])
    params = {c.name for c in method.children if c.kind == "PARAM"}
    defs[build.method_id] = params
    uses[build.method_id] = set()
    defs[build.exit_id] = set()
    uses[build.exit_id] = set()

    preds = {n: set() for n in nodes}
    for s, d in cfg:
        preds[d].add(s)

    gen = {n: {(v, n) for v in defs[n]} for n in nodes}
    reach_in = {n: set() for n in nodes}
    reach_out = {n: set(gen[n]) for n in nodes}
    work = list(nodes)
    while work:
        n = work.pop()
        new_in = set()
        for p in preds[n]:
            new_in |= reach_out[p]
        survived = {(v, d) for (v, d) in new_in if v not in defs[n]}
        new_out = gen[n] | survived
        if new_in != reach_in[n] or new_out != reach_out[n]:
            reach_in[n] = new_in
            reach_out[n] = new_out
            for s, d in cfg:
                if s == n:
                    work.append(d)
    edges = set()
    for u in nodes:
        for (v, d) in reach_in[u]:
            if v in uses[u]:
                edges.add((d, u))
    return edges


def build_function_cpg(method: Ast, version: str, next_id: list[int]) -> CodeGraph:
    build = _FnBuild(version)
    build.method_id = _walk_ast(build, method, next_id)
    exit_node = GraphNode(next_id[0], version, method.line, "METHOD_RETURN",
                          method.type_name or "")
    build.exit_id = exit_node.id
    next_id[0] += 1
    build.nodes.append(exit_node)
    build.ast_edges.append((build.method_id, build.exit_id))

    cfg = build_cfg_edges(build, method)
    cfg_nodes = {build.method_id, build.exit_id}
    for s, d in cfg:
        cfg_nodes.add(s)
        cfg_nodes.add(d)
    cdg = build_cdg_edges(cfg_nodes, cfg, build.exit_id)
    ddg = build_ddg_edges(build, method, cfg)

    in_buggy = version in ("buggy", "both")
    in_fixed = version in ("fixed", "both")
    edges = [GraphEdge(s, d, "AST", in_buggy, in_fixed) for s, d in build.ast_edges]
    for etype, pairs in (("CFG", cfg), ("CDG", cdg), ("DDG", ddg)):
        edges.extend(GraphEdge(s, d, etype, in_buggy, in_fixed)
                     for s, d in sorted(pairs))
    graph = CodeGraph(method.name or "", build.nodes, edges)
    graph.validate()
    return graph


def build_cpg(source: str, version: str, start_id: int = 0) -> list[CodeGraph]:
    """Parse a source file and build one CodeGraph per function.

    Functions in the same file get disjoint node-id ranges starting at
    ``start_id``.
    """
    methods = parse_mini(source)
    next_id = [start_id]
    return [build_function_cpg(m, version, next_id) for m in methods]
