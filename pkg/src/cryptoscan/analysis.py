"""End-to-end orchestration: call graph, summaries, seeds, escalation, findings."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from .callgraph import build_call_graph, scc_bottom_up_order
from .cir.model import Location, Program
from .detectors.group1 import apply_verifying_rule, classify_prng, match_sinks
from .detectors.group2 import run_group2
from .detectors.rules import RuleSet
from .ifds.engine import DEFAULT_BUDGET, EngineContext
from .ifds.events import ConstantSource, Exhausted, FlowEvent, Sanitized, VerifierHit
from .ifds.facts import DEFAULT_K
from .ifds.summarize import summarize_all
from .ifds.summary import SummaryStore
from .ifds.witness import flatten
from .report import Finding, RunReport, RunStats, Source, TraceStep
from .scheduler import LayerTask, SchedulerConfig, aggregate_outcome, schedule

FIDELITIES = ("fixed", "paper")


@dataclass
class AnalysisConfig:
    rules: RuleSet = field(default_factory=RuleSet)
    refinements: bool = True
    fidelity: str = "fixed"
    library_mode: bool = False
    max_layers: int = 20
    workers: int = 1
    k: int = DEFAULT_K
    budget: int = DEFAULT_BUDGET
    dedup: bool = True

    def __post_init__(self) -> None:
        if self.fidelity not in FIDELITIES:
            raise ValueError(f"fidelity must be one of {FIDELITIES}")
        if self.k < 0:
            raise ValueError("access-path depth must be >= 0")


def _source_of(ev: FlowEvent) -> Source:
    if isinstance(ev, ConstantSource):
        return Source(ev.literal, ev.type, ev.location)
    if isinstance(ev, VerifierHit):
        return Source(None, ev.by.rpartition(".")[0] or ev.by, ev.location)
    if isinstance(ev, Sanitized):
        return Source(None, ev.by.rpartition(".")[0] or ev.by, ev.location)
    assert isinstance(ev, Exhausted)
    return Source(None, "opaque", ev.location or Location("", "", -1))


def analyze(program: Program, config: Optional[AnalysisConfig] = None) -> RunReport:
    cfg = config or AnalysisConfig()
    t0 = time.perf_counter()
    rules = cfg.rules
    graph = build_call_graph(program, include_static_inits=cfg.fidelity == "fixed")
    order = scc_bottom_up_order(graph)
    store = SummaryStore()
    ctx = EngineContext(program, rules, store, cfg.refinements, cfg.k, cfg.budget)
    summarize_all(ctx, order, graph, workers=cfg.workers)

    seeds = match_sinks(program, rules, graph.nodes)
    tasks = [LayerTask(0, s.function, s.fact, s.location, s.index, "seed") for s in seeds]
    sched_cfg = SchedulerConfig(cfg.max_layers, cfg.dedup, cfg.library_mode,
                                static_init_resolution=cfg.fidelity == "fixed", workers=cfg.workers,
                                fidelity=cfg.fidelity)
    results, sched = schedule(tasks, ctx, graph, sched_cfg)

    merged: dict[tuple[str, Location], Finding] = {}

    def add(rule_id: str, sink: Location, evs: list[FlowEvent], witnesses, reasons=()) -> None:
        cwe, severity = rules.rule_info(rule_id)
        key = (rule_id, sink)
        f = merged.get(key)
        if f is None:
            func = program.function(sink.func)
            f = merged[key] = Finding(rule_id, cwe, severity, sink, file=func.source_file,
                                      block_index=program.info(sink.func).block_index[sink.block])
        for ev in evs:
            src = _source_of(ev)
            if src in f.sources:
                continue
            f.sources.append(src)
            f.trace.extend(TraceStep(s.location, s.via) for s in flatten(witnesses.get(ev)))
        f.reasons.extend(r for r in reasons if r not in f.reasons)

    outcomes = {}
    for seed in seeds:
        res = results[seed.index]
        outcome = aggregate_outcome(res.events.keys(), seed.rule, rules, program, res.unresolved, cfg.fidelity)
        res.outcome = outcome
        outcomes[seed.index] = outcome
        verdict = apply_verifying_rule(res.events.keys(), seed.rule, rules, program, cfg.fidelity)
        if verdict.violation:
            add(seed.rule.rule_id, seed.location, list(verdict.flagged), res.events, verdict.reasons)
        hits = classify_prng(res.events.keys(), rules)
        if hits and rules.prng is not None:
            add(rules.prng.rule_id, seed.location, list(hits), res.events, ("weak PRNG java.util.Random",))

    for f in merged.values():
        f.sources.sort(key=Source.sort_key)

    pattern_findings = []
    for rep in run_group2(program, rules, graph.nodes):
        rule = rules.pattern(rep.pattern)
        if rule is None:
            continue
        sink = rep.witness[0]
        func = program.function(sink.func)
        pattern_findings.append(Finding(
            rule.rule_id, rule.cwe, rule.severity, sink, [],
            [TraceStep(loc, "pattern") for loc in rep.witness], "pattern", func.source_file,
            program.info(sink.func).block_index[sink.block], [rep.pattern]))

    findings = sorted([*merged.values(), *pattern_findings], key=Finding.sort_key)
    stats = RunStats(
        functions_analyzed=len(graph.nodes),
        seeds_created=len(seeds),
        layers_used=(sched.max_layer + 1) if seeds else 0,
        summaries_computed=sum(store.explorations.values()),
        unresolved_count=sum(1 for o in outcomes.values() if o.kind == "Unresolved"),
        elapsed=time.perf_counter() - t0,
    )
    report = RunReport(findings, stats, cfg.refinements, cfg.fidelity, cfg.library_mode,
                       incomplete=bool(sched.budget_hits))
    report.details.update(graph=graph, order=order, store=store, seeds=seeds, results=results,
                          outcomes=outcomes, scheduler=sched)
    return report
