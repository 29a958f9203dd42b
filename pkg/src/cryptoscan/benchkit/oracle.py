"""Naive whole-program flowset analysis with full call inlining.

This is the reference the summary-based solver is checked against.  It
deliberately shares nothing with ``cryptoscan.ifds`` beyond the event
dataclasses: facts are plain ``(base, fields)`` tuples, transfer rules are
written out again below, and internal callees are inlined at every callsite
instead of being summarized.  Recursion is unrolled up to ``max_inline``
frames; deeper non-recursive nesting makes the case inapplicable.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Union

from ..callgraph import build_call_graph
from ..cir.model import (
    BitCast,
    CallStatic,
    CallVirtual,
    ConstInt,
    ConstStr,
    GetField,
    Load,
    Location,
    New,
    Phi,
    Program,
    PutField,
    Ret,
    Store,
    split_qname,
)
from ..detectors.group1 import apply_verifying_rule, classify_prng, match_sinks
from ..detectors.group2 import run_group2
from ..detectors.rules import RuleSet
from ..ifds.events import ConstantSource, Exhausted, Sanitized, VerifierHit
from ..report import Finding, Source

Fact = tuple  # (base, fields)
Frame = tuple  # (caller function, callsite location, callee function)
Event = Union[ConstantSource, Sanitized, VerifierHit, Exhausted]

DEFAULT_MAX_INLINE = 5


class OracleInapplicable(Exception):
    pass


@dataclass
class OracleConfig:
    rules: RuleSet = field(default_factory=RuleSet)
    refinements: bool = True
    fidelity: str = "fixed"
    k: int = 2
    max_inline: int = DEFAULT_MAX_INLINE


@dataclass
class OracleResult:
    findings: list[Finding]
    events: dict[int, frozenset]  # seed index -> terminal events
    truncated: bool = False


def _fact(base: str, fields=(), k: int = 2) -> Fact:
    return (base, tuple(fields)[:k])


def _is_static(f: Fact) -> bool:
    return f[0].startswith("@")


class _Oracle:
    def __init__(self, program: Program, cfg: OracleConfig) -> None:
        self.p = program
        self.cfg = cfg
        self.truncated = False
        self.paper = cfg.fidelity == "paper"
        inits = [c.static_init for c in program.classes if c.static_init and program.function(c.static_init)]
        self.static_inits = [] if self.paper else inits
        skip = set(inits) if self.paper else set()
        self.functions = [f.name for f in program.functions if f.name not in skip]
        self.callers: dict[str, list[tuple[str, Location]]] = {n: [] for n in self.functions}
        self.allocated: dict[str, set[str]] = {}
        for fname in self.functions:
            func = program.function(fname)
            self.allocated[fname] = {i.dest for _, i in func.iter_instructions() if isinstance(i, New)}
            info = program.info(fname)
            for loc, inst in func.iter_instructions():
                if isinstance(inst, (CallStatic, CallVirtual)):
                    for callee in info.call_target(inst).callees:
                        if callee in self.callers and (fname, loc) not in self.callers[callee]:
                            self.callers[callee].append((fname, loc))

    # ---- transfer ------------------------------------------------------

    def _actuals(self, inst) -> list[str]:
        return ([inst.receiver] if isinstance(inst, CallVirtual) else []) + list(inst.args)

    def _formals(self, fname: str) -> list[str]:
        return [n for n, _ in self.p.function(fname).formals()]

    def _step(self, fname: str, inst, fact: Fact, loc: Location) -> tuple[list[Fact], list[Event]]:
        base, fields = fact
        k = self.cfg.k
        if isinstance(inst, ConstStr) or isinstance(inst, ConstInt):
            if base != inst.dest:
                return [fact], []
            if fields:
                return [], []
            return [], [ConstantSource(inst.value, "String" if isinstance(inst, ConstStr) else "int", loc)]
        if isinstance(inst, (Load, BitCast)):
            src = inst.ptr if isinstance(inst, Load) else inst.src
            return [_fact(src, fields, k) if base == inst.dest else fact], []
        if isinstance(inst, Store):
            return [_fact(inst.value, fields, k) if base == inst.ptr else fact], []
        if isinstance(inst, GetField):
            return [_fact(inst.obj, (inst.field,) + fields, k) if base == inst.dest else fact], []
        if isinstance(inst, PutField):
            if base == inst.obj and fields[:1] == (inst.field,):
                written = _fact(inst.value, fields[1:], k)
                return ([written] if inst.obj in self.allocated[fname] else [written, fact]), []
            return [fact], []
        if isinstance(inst, New):
            return ([], [Exhausted(loc)]) if base == inst.dest else ([fact], [])
        return [fact], []

    def _library_call(self, inst, qname: str, fact: Fact, loc: Location) -> tuple[list[Fact], list[Event]]:
        rules = self.cfg.rules
        owner = split_qname(qname)[0]
        recv = inst.receiver if isinstance(inst, CallVirtual) else None
        is_result = inst.dest is not None and fact[0] == inst.dest
        if is_result or fact[0] in inst.args:
            if owner in rules.sanitizer_classes:
                secure = any(qname == s or qname.endswith("." + s) for s in rules.secure_seed_sources)
                return [], [Sanitized(loc, qname, secure)]
            if owner in rules.verifier_classes:
                return [], [VerifierHit(loc, qname)]
        if is_result:
            if not self.cfg.refinements:
                names = ([recv] if recv is not None else []) + list(inst.args)
            else:
                names = [recv] if recv is not None else []
            outs = list(dict.fromkeys((n, ()) for n in names))
            return outs, ([] if outs else [Exhausted(loc)])
        if self.cfg.refinements and recv is not None and fact[0] == recv and inst.dest is None:
            outs = list(dict.fromkeys((n, ()) for n in inst.args))
            return outs, ([] if outs else [Exhausted(loc)])
        return [fact], []

    # ---- propagation ---------------------------------------------------

    def solve(self, fname: str, loc: Location, fact: Fact, entries: Optional[list] = None) -> set:
        """Terminal events for ``fact`` holding just before ``loc``.

        With ``entries`` given, static facts reaching the entry of ``fname``
        are collected there instead of escalating to callers.
        """
        events: set = set()
        seen: set = set()
        escaped: set = set()
        work: deque = deque()

        def push(stack, fn, block, pos, f):
            key = (stack, fn, block, pos, f)
            if key not in seen:
                seen.add(key)
                work.append(key)

        push((), fname, loc.block, loc.index, fact)
        while work:
            stack, fn, block, pos, f = work.popleft()
            func = self.p.function(fn)
            blk = func.block(block)
            nphi = sum(1 for i in blk.instructions if isinstance(i, Phi))
            if pos > nphi:
                idx = pos - 1
                inst = blk.instructions[idx]
                here = Location(fn, block, idx)
                if isinstance(inst, (CallStatic, CallVirtual)):
                    self._at_call(stack, fn, block, idx, inst, f, here, push, events)
                    continue
                outs, evs = self._step(fn, inst, f, here)
                events.update(evs)
                for o in outs:
                    push(stack, fn, block, idx, o)
                continue
            if block == func.blocks[0].label:
                if entries is not None and not stack and fn == fname and _is_static(f):
                    if f not in entries:
                        entries.append(f)
                    continue
                self._at_entry(stack, fn, f, push, events, escaped)
                continue
            info = self.p.info(fn)
            for pred in info.preds[block]:
                cur = f
                for phi in blk.instructions[:nphi]:
                    if phi.dest == cur[0]:
                        arm = [v for v, lbl in phi.arms if lbl == pred]
                        if arm:
                            cur = _fact(arm[0], cur[1], self.cfg.k)
                            break
                push(stack, fn, pred, len(func.block(pred).instructions) - 1, cur)
        return events

    def _at_call(self, stack, fn, block, idx, inst, f, here, push, events) -> None:
        target = self.p.info(fn).call_target(inst)
        if target.is_extern:
            outs, evs = self._library_call(inst, target.extern.name, f, here)
            events.update(evs)
            for o in outs:
                push(stack, fn, block, idx, o)
            return
        if not target.callees:
            push(stack, fn, block, idx, f)
            return
        is_result = inst.dest is not None and f[0] == inst.dest
        if not _is_static(f) and not is_result and not f[1]:
            push(stack, fn, block, idx, f)  # a bare SSA value cannot change across a call
            return
        actuals = self._actuals(inst)
        for callee in target.callees:
            if callee not in self.callers:
                push(stack, fn, block, idx, f)
                continue
            if _is_static(f):
                inner = f
            elif is_result:
                inner = ("$ret", f[1])
            else:
                names = [fm for fm, a in zip(self._formals(callee), actuals) if a == f[0]]
                if not names:
                    push(stack, fn, block, idx, f)
                    continue
                for name in names:
                    self._enter(stack, fn, here, callee, (name, f[1]), push)
                continue
            self._enter(stack, fn, here, callee, inner, push)

    def _enter(self, stack, fn, here, callee, inner, push) -> None:
        on_stack = any(fr[2] == callee for fr in stack) or callee == fn
        if len(stack) >= self.cfg.max_inline:
            if not on_stack:
                raise OracleInapplicable(f"inline depth above {self.cfg.max_inline} at {here}")
            self.truncated = True  # deeper unrolls repeat what shallower frames found
            return
        frame = (fn, here, callee)
        new_stack = stack + (frame,)
        func = self.p.function(callee)
        reach = self.p.info(callee).reachable()
        for blk in func.blocks:
            term = blk.instructions[-1]
            if blk.label not in reach or not isinstance(term, Ret):
                continue
            end = len(blk.instructions) - 1
            if inner[0] == "$ret":
                if term.value is None:
                    continue
                push(new_stack, callee, blk.label, end, (term.value, inner[1]))
            else:
                push(new_stack, callee, blk.label, end, inner)

    def _at_entry(self, stack, fn, f, push, events, escaped) -> None:
        func = self.p.function(fn)
        formals = self._formals(fn)
        if not (_is_static(f) or f[0] in formals):
            events.add(Exhausted(Location(fn, func.blocks[0].label, 0)))
            return
        if stack:
            caller, site, _ = stack[-1]
            if _is_static(f):
                outer = f
            else:
                actual = self._actuals(self.p.function(caller).instruction(site))[formals.index(f[0])]
                outer = _fact(actual, f[1], self.cfg.k)
            push(stack[:-1], caller, site.block, site.index, outer)
            return
        if (fn, f) in escaped:
            return
        escaped.add((fn, f))
        sites = self.callers.get(fn, [])
        if sites:
            for caller, site in sites:
                inst = self.p.function(caller).instruction(site)
                if _is_static(f):
                    push((), caller, site.block, site.index, f)
                    continue
                actual = self._actuals(inst)[formals.index(f[0])]
                push((), caller, site.block, site.index, _fact(actual, f[1], self.cfg.k))
            return
        if _is_static(f) and self.static_inits:
            self._static_init(fn, f, events)

    def _static_init(self, fn: str, f: Fact, events: set) -> None:
        """Walk the class initializers, latest-declared first, carrying the
        static facts that reach each initializer's entry on to the next one."""
        facts = [f]
        for init in reversed(self.static_inits):
            if init == fn:
                continue
            func = self.p.function(init)
            reach = self.p.info(init).reachable()
            carried: list[Fact] = []
            for cur in facts:
                for blk in func.blocks:
                    if blk.label in reach and isinstance(blk.instructions[-1], Ret):
                        at = Location(init, blk.label, len(blk.instructions) - 1)
                        events.update(self.solve(init, at, cur, entries=carried))
            facts = carried


def _source(ev) -> Source:
    if isinstance(ev, ConstantSource):
        return Source(ev.literal, ev.type, ev.location)
    if isinstance(ev, (Sanitized, VerifierHit)):
        return Source(None, ev.by.rpartition(".")[0] or ev.by, ev.location)
    return Source(None, "opaque", ev.location)


def oracle_analyze(program: Program, cfg: Optional[OracleConfig] = None) -> OracleResult:
    cfg = cfg or OracleConfig()
    o = _Oracle(program, cfg)
    rules = cfg.rules
    merged: dict[tuple, Finding] = {}
    per_seed: dict[int, frozenset] = {}

    def add(rule_id, sink, evs):
        cwe, sev = rules.rule_info(rule_id)
        fnd = merged.setdefault((rule_id, sink), Finding(rule_id, cwe, sev, sink))
        for ev in evs:
            src = _source(ev)
            if src not in fnd.sources:
                fnd.sources.append(src)

    for seed in match_sinks(program, rules, o.functions):
        evs = frozenset(o.solve(seed.location.func, seed.location, (seed.fact.base, tuple(seed.fact.fields))))
        per_seed[seed.index] = evs
        verdict = apply_verifying_rule(evs, seed.rule, rules, program, cfg.fidelity)
        if verdict.violation:
            add(seed.rule.rule_id, seed.location, verdict.flagged)
        hits = classify_prng(evs, rules)
        if hits and rules.prng is not None:
            add(rules.prng.rule_id, seed.location, hits)
    for fnd in merged.values():
        fnd.sources.sort(key=Source.sort_key)
    findings = list(merged.values())
    for rep in run_group2(program, rules, o.functions):
        rule = rules.pattern(rep.pattern)
        if rule is not None:
            findings.append(Finding(rule.rule_id, rule.cwe, rule.severity, rep.witness[0], disposition="pattern"))
    findings.sort(key=Finding.sort_key)
    return OracleResult(findings, per_seed, o.truncated)


def oracle_solve(case, max_inline: int = DEFAULT_MAX_INLINE, cfg: Optional[OracleConfig] = None) -> list[Finding]:
    """Findings for one fixture case; raises OracleInapplicable when the case
    needs deeper inlining or recursion had to be cut short."""
    cfg = cfg or OracleConfig()
    cfg = OracleConfig(cfg.rules, cfg.refinements, cfg.fidelity, cfg.k, max_inline)
    res = oracle_analyze(case.program, cfg)
    if res.truncated:
        raise OracleInapplicable(f"{case.name}: recursion unrolled to depth {max_inline}")
    return res.findings


def finding_key(f: Finding) -> tuple:
    """What the differential comparison looks at: rule, sink and source set."""
    return (f.rule_id, f.sink, tuple(sorted((s.literal is None, str(s.literal), s.type, s.location)
                                            for s in f.sources)))


def call_depth(program: Program) -> Optional[int]:
    """Longest acyclic call chain in edges, or None when the graph has a cycle."""
    g = build_call_graph(program, include_static_inits=True)
    succ = {n: set(g.callees_of(n)) for n in g.nodes}
    depth: dict[str, int] = {}
    state: dict[str, int] = {}

    def visit(n: str) -> Optional[int]:
        if state.get(n) == 1:
            return None
        if n in depth:
            return depth[n]
        state[n] = 1
        best = 0
        for m in succ[n]:
            d = visit(m)
            if d is None:
                return None
            best = max(best, d + 1)
        state[n] = 2
        depth[n] = best
        return best

    out = 0
    for n in g.nodes:
        d = visit(n)
        if d is None:
            return None
        out = max(out, d)
    return out
