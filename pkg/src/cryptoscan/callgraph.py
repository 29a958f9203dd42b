"""Call graph construction (class-hierarchy dispatch) and bottom-up SCC order."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

from .cir.model import CallStatic, CallVirtual, Location, Program

ROOT = "<root>"


@dataclass(frozen=True)
class CallEdge:
    site: Location
    caller: str
    callees: tuple[str, ...]


@dataclass(frozen=True)
class ExternEdge:
    site: Location
    caller: str
    extern: Optional[str]  # None when the receiver type is an extern class without this method


@dataclass
class CallGraph:
    nodes: list[str]
    edges: list[CallEdge]
    extern_edges: list[ExternEdge]
    static_inits: list[str] = field(default_factory=list)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.nodes)}

    @cached_property
    def _callees(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {n: [] for n in self.nodes}
        for e in self.edges:
            lst = out.setdefault(e.caller, [])
            for c in e.callees:
                if c in self._index and c not in lst:
                    lst.append(c)
        return out

    @cached_property
    def _callsites(self) -> dict[str, list[CallEdge]]:
        out: dict[str, list[CallEdge]] = {}
        for e in self.edges:
            for c in e.callees:
                out.setdefault(c, []).append(e)
        return out

    def node_index(self, name: str) -> int:
        return self._index[name]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def callees_of(self, name: str) -> list[str]:
        return self._callees.get(name, [])

    def callsites_of(self, name: str) -> list[CallEdge]:
        """Callsites (in program order) that may invoke ``name``."""
        return self._callsites.get(name, [])

    def root_edges(self) -> list[str]:
        return list(self.static_inits)

    def to_dot(self) -> str:
        lines = ["digraph callgraph {", f'  "{ROOT}" [shape=point];']
        for n in self.nodes:
            lines.append(f'  "{n}";')
        for s in self.static_inits:
            lines.append(f'  "{ROOT}" -> "{s}" [style=dashed];')
        done = set()
        for e in self.edges:
            for c in e.callees:
                if (e.caller, c) not in done and c in self:
                    done.add((e.caller, c))
                    lines.append(f'  "{e.caller}" -> "{c}";')
        for x in self.extern_edges:
            if x.extern is not None and (x.caller, x.extern) not in done:
                done.add((x.caller, x.extern))
                lines.append(f'  "{x.caller}" -> "{x.extern}" [style=dotted];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_call_graph(p: Program, include_static_inits: bool = True) -> CallGraph:
    """Deterministic call graph; virtual calls resolve by class-hierarchy analysis
    on the receiver's declared type.

    With ``include_static_inits=False`` class initializers are left out of the
    graph entirely (they are then never summarized nor scanned).
    """
    inits = [c.static_init for c in p.classes if c.static_init and p.function(c.static_init)]
    excluded = set() if include_static_inits else set(inits)
    nodes = [f.name for f in p.functions if f.name not in excluded]
    edges: list[CallEdge] = []
    externs: list[ExternEdge] = []
    for f in p.functions:
        if f.name in excluded:
            continue
        info = p.info(f.name)
        for loc, inst in f.iter_instructions():
            if not isinstance(inst, (CallStatic, CallVirtual)):
                continue
            target = info.call_target(inst)
            callees = tuple(c for c in target.callees if c not in excluded)
            if target.callees:
                edges.append(CallEdge(loc, f.name, callees))
            else:
                externs.append(ExternEdge(loc, f.name, target.extern.name if target.extern else None))
    return CallGraph(nodes, edges, externs, [] if excluded else inits)


@dataclass
class SccOrder:
    components: list[frozenset]
    levels: list[list[int]]
    recursive: list[bool]

    def is_recursive(self, index: int) -> bool:
        return self.recursive[index]

    def component_of(self, name: str) -> int:
        for i, c in enumerate(self.components):
            if name in c:
                return i
        raise KeyError(name)

    def flat(self) -> list[str]:
        return [n for c in self.components for n in sorted(c)]


def scc_bottom_up_order(g: CallGraph) -> SccOrder:
    """Tarjan's algorithm (iterative); components come out callees-first."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    comps: list[frozenset] = []
    counter = 0
    for root in g.nodes:
        if root in index:
            continue
        work: list[tuple[str, int]] = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, i = work[-1]
            succ = g.callees_of(v)
            if i < len(succ):
                work[-1] = (v, i + 1)
                w = succ[i]
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, 0))
                elif w in on_stack:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == v:
                        break
                comps.append(frozenset(comp))
    comp_of = {n: i for i, c in enumerate(comps) for n in c}
    recursive = []
    level_of: list[int] = []
    for i, c in enumerate(comps):
        rec = len(c) > 1 or any(n in g.callees_of(n) for n in c)
        recursive.append(rec)
        lvl = 0
        for n in c:
            for m in g.callees_of(n):
                j = comp_of[m]
                if j != i:
                    assert j < i, "Tarjan order violated"
                    lvl = max(lvl, level_of[j] + 1)
        level_of.append(lvl)
    levels: list[list[int]] = [[] for _ in range(max(level_of, default=-1) + 1)]
    for i, lvl in enumerate(level_of):
        levels[lvl].append(i)
    return SccOrder(comps, levels, recursive)
