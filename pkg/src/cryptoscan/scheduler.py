"""Layered caller escalation.

Layer 0 solves every seed inside its own function.  A fact that survives to
the function entry becomes an escape node keyed by (function, entry fact);
nodes spawn caller tasks one layer up, one per callsite.  Nodes are shared
between candidates, so two traces that meet in a caller are explored once.
"""

from __future__ import annotations

import itertools
import threading
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .callgraph import CallGraph
from .cir.model import Location
from .detectors.group1 import apply_verifying_rule
from .detectors.rules import SinkRule
from .ifds.engine import EngineContext, FactBudgetExceeded, solve_backward, solve_from_exits
from .ifds.events import EscapedToEntry, FlowEvent
from .ifds.facts import THIS, DataFact
from .ifds.flow import pass_args
from .ifds.witness import Step, WitnessLike, concat

NO_CALLERS, LAYER_CAP, BUDGET = "no-callers", "layer-cap", "budget"


@dataclass(frozen=True)
class LayerTask:
    layer: int
    function: str
    fact: DataFact
    start: Optional[Location]  # fact holds just before this instruction; None for non-solver tasks
    candidate: int
    kind: str = "seed"  # seed | caller | clinit | library


@dataclass(frozen=True)
class Outcome:
    kind: str  # BugVerified | SanitizedNoBug | NeedsCallers | Unresolved
    events: frozenset = frozenset()
    reasons: tuple[str, ...] = ()
    entry_facts: tuple[DataFact, ...] = ()


@dataclass
class SchedulerConfig:
    max_layers: int = 20
    dedup: bool = True
    library_mode: bool = False
    static_init_resolution: bool = True
    workers: int = 1
    fidelity: str = "fixed"

    def __post_init__(self) -> None:
        if self.max_layers < 1:
            raise ValueError("max_layers must be >= 1")


@dataclass
class TaskResult:
    task: LayerTask
    events: dict[FlowEvent, WitnessLike] = field(default_factory=dict)
    escapes: dict[tuple[str, DataFact], WitnessLike] = field(default_factory=dict)
    children: list[tuple] = field(default_factory=list)
    budget_exceeded: bool = False


@dataclass
class EscapeNode:
    key: tuple
    function: str
    fact: DataFact
    layer: int
    tasks: list[TaskResult] = field(default_factory=list)
    unresolved: Optional[str] = None


@dataclass
class CandidateResult:
    candidate: int
    events: dict[FlowEvent, WitnessLike]
    unresolved: tuple[str, ...]
    outcome: Optional[Outcome] = None
    max_layer: int = 0


class Scheduler:
    def __init__(self, ctx: EngineContext, graph: CallGraph, config: Optional[SchedulerConfig] = None) -> None:
        self.ctx = ctx
        self.graph = graph
        self.config = config or SchedulerConfig()
        self.nodes: dict[tuple, EscapeNode] = {}
        self.task_log: list[tuple[int, int, int]] = []  # (layer, start tick, end tick)
        self._tick = itertools.count()
        self._lock = threading.Lock()
        self.tasks_run = 0
        self.max_layer = 0
        self.budget_hits: list[str] = []

    # ---- task execution ------------------------------------------------

    def _run(self, task: LayerTask) -> TaskResult:
        with self._lock:
            t0 = next(self._tick)
        try:
            res = self._execute(task)
        except FactBudgetExceeded as exc:
            res = TaskResult(task, budget_exceeded=True)
            with self._lock:
                self.budget_hits.append(str(exc))
        with self._lock:
            self.task_log.append((task.layer, t0, next(self._tick)))
        return res

    def _execute(self, task: LayerTask) -> TaskResult:
        ctx = self.ctx
        if task.kind in ("seed", "caller"):
            via = "sink" if task.kind == "seed" else "passArgs"
            reach = solve_backward(ctx, task.start, task.fact, via=via)
            escapes = {(task.function, f): w for f, w in reach.escapes.items()}
            return TaskResult(task, dict(reach.events), escapes)
        if task.kind == "clinit":
            return self._resolve_static(task)
        if task.kind == "library":
            res = TaskResult(task)
            for init in self._constructors(task.function):
                reach = solve_from_exits(ctx, init, task.fact)
                for ev, w in reach.events.items():
                    res.events.setdefault(ev, w)
                for f, w in reach.escapes.items():
                    res.escapes.setdefault((init, f), w)
            return res
        raise ValueError(task.kind)

    def _resolve_static(self, task: LayerTask) -> TaskResult:
        """Resolve a static-root fact at a caller-less function through the
        class initializers, latest-declared first."""
        store = self.ctx.store
        res = TaskResult(task)
        facts: dict[DataFact, WitnessLike] = {task.fact: None}
        for init in reversed(self.graph.static_inits):
            if init == task.function:
                continue
            nxt: dict[DataFact, WitnessLike] = {}
            for f, w in facts.items():
                summ = store.lookup(init, f)
                if summ is None:
                    nxt.setdefault(f, w)
                    continue
                hop = Step(Location(init, self.ctx.program.function(init).blocks[0].label, 0), "summary")
                for ev, ew in summ.events.items():
                    res.events.setdefault(ev, concat(w, hop, ew))
                for ef, ew in summ.entry.items():
                    nxt.setdefault(ef, concat(w, hop, ew))
            facts = nxt
        return res

    def _constructors(self, fname: str) -> list[str]:
        owner = self.ctx.program.function(fname).owner
        return [f.name for f in self.ctx.program.functions
                if f.owner == owner and f.simple_name == "<init>" and f.name in self.graph]

    def _map(self, tasks: list[LayerTask]) -> list[TaskResult]:
        if self.config.workers > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(self.config.workers) as pool:
                return list(pool.map(self._run, tasks))
        return [self._run(t) for t in tasks]

    # ---- escalation ----------------------------------------------------

    def _node_key(self, cand: int, function: str, fact: DataFact) -> tuple:
        return (function, fact) if self.config.dedup else (cand, function, fact)

    def _expand(self, node: EscapeNode, cand: int) -> list[LayerTask]:
        """Tasks for the layer above ``node`` (or a terminal classification)."""
        prog = self.ctx.program
        sites = self.graph.callsites_of(node.function)
        layer = node.layer + 1
        if not sites:
            func = prog.function(node.function)
            out: list[LayerTask] = []
            if node.fact.is_static and self.config.static_init_resolution:
                out.append(LayerTask(layer, node.function, node.fact, None, cand, "clinit"))
            elif (self.config.library_mode and node.fact.base == THIS and node.fact.fields
                  and func.simple_name != "<init>" and self._constructors(node.function)):
                out.append(LayerTask(layer, node.function, node.fact, None, cand, "library"))
            else:
                node.unresolved = NO_CALLERS
            if out and layer >= self.config.max_layers:
                node.unresolved = LAYER_CAP
                return []
            return out
        if layer >= self.config.max_layers:
            node.unresolved = LAYER_CAP
            return []
        callee = prog.function(node.function)
        tasks = []
        for site in sites:
            inst = prog.function(site.caller).instruction(site.site)
            mapped = pass_args(inst, node.fact, callee, self.ctx.k)
            if mapped is None:
                continue
            tasks.append(LayerTask(layer, site.caller, mapped, site.site, cand, "caller"))
        if not tasks:
            node.unresolved = NO_CALLERS
        return tasks

    def run(self, seeds: list[LayerTask]) -> dict[int, CandidateResult]:
        roots: dict[int, TaskResult] = {}
        pending: list[tuple[Optional[EscapeNode], LayerTask]] = [(None, t) for t in seeds]
        while pending:
            layer = pending[0][1].layer
            assert all(t.layer == layer for _, t in pending), "layer barrier violated"
            self.max_layer = max(self.max_layer, layer)
            results = self._map([t for _, t in pending])
            self.tasks_run += len(results)
            fresh: list[tuple[EscapeNode, int]] = []
            for (owner, task), res in zip(pending, results):
                if owner is None:
                    roots[task.candidate] = res
                else:
                    owner.tasks.append(res)
                if res.budget_exceeded:
                    continue
                for fn, fact in sorted(res.escapes):
                    key = self._node_key(task.candidate, fn, fact)
                    res.children.append((key, (fn, fact)))
                    if key not in self.nodes:
                        node = EscapeNode(key, fn, fact, task.layer)
                        self.nodes[key] = node
                        fresh.append((node, task.candidate))
            pending = []
            for node, cand in fresh:
                pending.extend((node, t) for t in self._expand(node, cand))
        return {c: self._aggregate(c, r) for c, r in sorted(roots.items())}

    def _aggregate(self, cand: int, root: TaskResult) -> CandidateResult:
        events: dict[FlowEvent, WitnessLike] = {}
        unresolved: set[str] = set()
        max_layer = root.task.layer
        queue: deque[tuple[TaskResult, WitnessLike]] = deque([(root, None)])
        seen_nodes: set[tuple] = set()
        while queue:
            res, prefix = queue.popleft()
            max_layer = max(max_layer, res.task.layer)
            if res.budget_exceeded:
                unresolved.add(BUDGET)
            for ev, w in res.events.items():
                if ev not in events:
                    events[ev] = concat(prefix, w)
            for key, esc in res.children:
                if key in seen_nodes:
                    continue
                seen_nodes.add(key)
                node = self.nodes[key]
                node_prefix = concat(prefix, res.escapes[esc])
                events.setdefault(EscapedToEntry(node.fact, node.function), node_prefix)
                if node.unresolved:
                    unresolved.add(node.unresolved)
                for t in node.tasks:
                    queue.append((t, node_prefix))
        return CandidateResult(cand, events, tuple(sorted(unresolved)), max_layer=max_layer)


def aggregate_outcome(events, rule: SinkRule, rules, program, unresolved: tuple[str, ...] = (),
                      fidelity: str = "fixed") -> Outcome:
    evs = frozenset(events)
    verdict = apply_verifying_rule(evs, rule, rules, program, fidelity)
    if verdict.violation:
        return Outcome("BugVerified", evs)
    if unresolved:
        return Outcome("Unresolved", evs, unresolved,
                       tuple(sorted(e.entry_fact for e in evs if isinstance(e, EscapedToEntry))))
    return Outcome("SanitizedNoBug", evs)


def schedule(seeds: list[LayerTask], ctx: EngineContext, graph: CallGraph,
             config: Optional[SchedulerConfig] = None) -> tuple[dict[int, CandidateResult], Scheduler]:
    s = Scheduler(ctx, graph, config)
    return s.run(seeds), s
