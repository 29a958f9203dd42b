"""Exploded-graph reachability for one function body.

Nodes are ``(block, pos, fact)``: ``fact`` holds just before instruction
``pos`` of ``block``.  Transfers are computed lazily and cached, so one
:class:`Explorer` serves any number of origins over the same body.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from ..cir.model import CallStatic, CallVirtual, FunctionInfo, Location, Phi, Program, Ret
from .events import EscapedToEntry, Exhausted, FlowEvent
from .facts import DEFAULT_K, RET, DataFact
from .flow import call_flow, flow, pass_args, phi_flow, return_val
from .summary import SummaryStore
from .witness import Step, Witness, WitnessLike, extend

DEFAULT_BUDGET = 100_000

Node = tuple[str, int, DataFact]
Item = Union[Step, Witness]


class FactBudgetExceeded(RuntimeError):
    def __init__(self, function: str, budget: int) -> None:
        self.function = function
        self.budget = budget
        super().__init__(f"fact budget of {budget} exceeded in @{function}")


@dataclass
class EngineContext:
    program: Program
    rules: object
    store: SummaryStore
    refinements: bool = True
    k: int = DEFAULT_K
    budget: int = DEFAULT_BUDGET


@dataclass
class _Edge:
    target: Union[Node, FlowEvent, DataFact]  # next node, terminal event, or escaped entry fact
    kind: str  # "node" | "event" | "escape"
    items: tuple[Item, ...] = ()


@dataclass
class Reach:
    """Result of one backward exploration from an origin."""

    events: dict[FlowEvent, WitnessLike] = field(default_factory=dict)
    escapes: dict[DataFact, WitnessLike] = field(default_factory=dict)
    visited: int = 0


class Explorer:
    def __init__(self, ctx: EngineContext, fname: str) -> None:
        self.ctx = ctx
        self.fname = fname
        self.info: FunctionInfo = ctx.program.info(fname)
        self.func = self.info.func
        self._edges: dict[Node, list[_Edge]] = {}
        self.entry = self.func.blocks[0].label

    # ---- transfer ------------------------------------------------------

    def edges(self, node: Node) -> list[_Edge]:
        cached = self._edges.get(node)
        if cached is None:
            if len(self._edges) >= self.ctx.budget:
                raise FactBudgetExceeded(self.fname, self.ctx.budget)
            cached = self._compute(node)
            self._edges[node] = cached
        return cached

    @property
    def nodes_built(self) -> int:
        return len(self._edges)

    def _compute(self, node: Node) -> list[_Edge]:
        block, pos, fact = node
        blk = self.func.block(block)
        nphi = blk.phi_count
        if pos > nphi:
            idx = pos - 1
            inst = blk.instructions[idx]
            loc = Location(self.fname, block, idx)
            if isinstance(inst, (CallStatic, CallVirtual)):
                return self._call(inst, fact, loc, block, idx)
            outs, events = flow(inst, fact, loc, self.info, self.ctx.k)
            res = [_Edge((block, idx, o), "node", () if o == fact else (Step(loc, "flow"),)) for o in outs]
            res += [_Edge(ev, "event", (Step(loc, "source" if ev.kind == "ConstantSource" else "flow"),))
                    for ev in events]
            return res
        # Block head: cross to each predecessor through this block's phis.
        res: list[_Edge] = []
        if block == self.entry:
            if fact.is_static or fact.base in self.info.param_names:
                res.append(_Edge(fact, "escape", (Step(Location(self.fname, block, 0), "entry"),)))
            else:
                res.append(_Edge(Exhausted(Location(self.fname, block, 0)), "event"))
            return res
        phis = blk.instructions[:nphi]
        for pred in self.info.preds[block]:
            cur = fact
            items: tuple[Item, ...] = ()
            for i, phi in enumerate(phis):
                assert isinstance(phi, Phi)
                if phi.dest == cur.base and pred in {lbl for _, lbl in phi.arms}:
                    (cur,) = phi_flow(phi, cur, pred, self.ctx.k)
                    items = (Step(Location(self.fname, block, i), "phiFlow"),)
                    break
            plen = len(self.func.block(pred).instructions)
            res.append(_Edge((pred, plen - 1, cur), "node", items))
        return res

    def _call(self, inst, fact: DataFact, loc: Location, block: str, idx: int) -> list[_Edge]:
        target = self.info.call_target(inst)
        ctx = self.ctx
        if target.is_extern:
            outs, events = call_flow(inst, fact, loc, target.extern, ctx.rules, ctx.refinements, ctx.k)
            res = [_Edge((block, idx, o), "node", () if o == fact else (Step(loc, "callFlow"),)) for o in outs]
            res += [_Edge(ev, "event", (Step(loc, "callFlow"),)) for ev in events]
            return res
        res: list[_Edge] = []
        keep = False
        seen_targets: set = set()
        for cname in target.callees:
            callee = ctx.program.function(cname)
            if callee is None or not ctx.store.has(cname):
                # Not summarized (outside the call graph): the call is opaque.
                keep = True
                continue
            exits, keep_here = return_val(inst, fact, callee, ctx.k)
            keep = keep or keep_here
            for ef in exits:
                summ = ctx.store.lookup(cname, ef)
                if summ is None:
                    keep = True
                    continue
                for entry_fact, w in summ.entry.items():
                    caller_fact = pass_args(inst, entry_fact, callee, ctx.k)
                    if caller_fact is None:
                        continue
                    if caller_fact == fact and w is None:
                        items: tuple[Item, ...] = ()
                    else:
                        items = tuple(x for x in (Step(loc, "returnVal"), w, Step(loc, "passArgs")) if x is not None)
                    key = ((block, idx, caller_fact), items)
                    if key in seen_targets:
                        continue
                    seen_targets.add(key)
                    res.append(_Edge((block, idx, caller_fact), "node", items))
                for ev, w in summ.events.items():
                    items = tuple(x for x in (Step(loc, "returnVal"), w) if x is not None)
                    res.append(_Edge(ev, "event", items))
        if keep or not target.callees:
            res.append(_Edge((block, idx, fact), "node"))
        return res

    # ---- reachability --------------------------------------------------

    def explore(self, starts: Iterable[tuple[Node, WitnessLike]]) -> Reach:
        """Breadth-first search from ``starts``; the first witness to reach a
        node, event or escaped fact is the one kept."""
        reach = Reach()
        seen: dict[Node, WitnessLike] = {}
        queue: deque[Node] = deque()
        for node, w in starts:
            if node not in seen:
                seen[node] = w
                queue.append(node)
        while queue:
            node = queue.popleft()
            w = seen[node]
            for e in self.edges(node):
                nw = extend(w, e.items)
                if e.kind == "node":
                    if e.target not in seen:
                        seen[e.target] = nw
                        queue.append(e.target)
                elif e.kind == "event":
                    reach.events.setdefault(e.target, nw)
                else:
                    reach.escapes.setdefault(e.target, nw)
        reach.visited = len(seen)
        return reach

    def exit_starts(self, exit_fact: DataFact) -> list[tuple[Node, WitnessLike]]:
        """Start nodes for an exit-side fact: just before every reachable ret."""
        starts: list[tuple[Node, WitnessLike]] = []
        reachable = set(self.info.reachable())
        for blk in self.func.blocks:
            term = blk.terminator
            if blk.label not in reachable or not isinstance(term, Ret):
                continue
            idx = len(blk.instructions) - 1
            loc = Location(self.fname, blk.label, idx)
            if exit_fact.base == RET:
                if term.value is None:
                    continue
                starts.append(((blk.label, idx, DataFact(term.value, exit_fact.fields)),
                               Witness(None, Step(loc, "returnVal"))))
            else:
                starts.append(((blk.label, idx, exit_fact), None))
        return starts


def solve_backward(ctx: EngineContext, sink: Location, fact: DataFact, via: str = "sink",
                   explorer: Optional[Explorer] = None) -> Reach:
    """Propagate ``fact`` (holding just before ``sink``) back to the function entry."""
    ex = explorer or Explorer(ctx, sink.func)
    start = Witness(None, Step(sink, via))
    return ex.explore([((sink.block, sink.index, fact), start)])


def solve_from_exits(ctx: EngineContext, fname: str, exit_fact: DataFact) -> Reach:
    ex = Explorer(ctx, fname)
    return ex.explore(ex.exit_starts(exit_fact))


def terminal_events(events: Iterable[FlowEvent]) -> set[FlowEvent]:
    return {e for e in events if not isinstance(e, EscapedToEntry)}
