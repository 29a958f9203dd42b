"""Findings model and deterministic emission."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Optional, Union

from . import __version__
from .cir.model import Location

SCHEMA_VERSION = 1
TOOL_NAME = "cryptoscan"


@dataclass(frozen=True)
class Source:
    literal: Optional[Union[str, int]]
    type: str
    location: Location

    def sort_key(self) -> tuple:
        return (self.location, str(self.literal), self.type)


@dataclass(frozen=True)
class TraceStep:
    location: Location
    via: str


@dataclass
class Finding:
    rule_id: str
    cwe: str
    severity: str
    sink: Location
    sources: list[Source] = field(default_factory=list)
    trace: list[TraceStep] = field(default_factory=list)
    disposition: str = "verified"  # verified | pattern
    file: str = ""
    block_index: int = 0
    reasons: list[str] = field(default_factory=list)

    def sort_key(self) -> tuple:
        return (self.file, self.sink.func, self.block_index, self.sink.index, rule_sort_key(self.rule_id))

    def to_json(self) -> dict[str, Any]:
        return {
            "ruleId": self.rule_id,
            "cwe": self.cwe,
            "severity": self.severity,
            "sink": _loc(self.sink),
            "sources": [{"literal": s.literal, "type": s.type, "loc": _loc(s.location)} for s in self.sources],
            "trace": [dict(_loc(t.location), via=t.via) for t in self.trace],
            "disposition": self.disposition,
        }


def rule_sort_key(rule_id: str) -> tuple:
    m = re.match(r"^([A-Za-z]*)(\d*)(.*)$", rule_id)
    assert m is not None
    prefix, num, rest = m.groups()
    return (prefix, int(num) if num else -1, rest)


def _loc(loc: Location) -> dict[str, Any]:
    return {"func": loc.func, "block": loc.block, "index": loc.index}


@dataclass
class RunStats:
    functions_analyzed: int = 0
    seeds_created: int = 0
    layers_used: int = 0
    summaries_computed: int = 0
    unresolved_count: int = 0
    elapsed: float = 0.0

    def to_json(self) -> dict[str, Any]:
        return {
            "functionsAnalyzed": self.functions_analyzed,
            "seedsCreated": self.seeds_created,
            "layersUsed": self.layers_used,
            "summariesComputed": self.summaries_computed,
            "unresolvedCount": self.unresolved_count,
            "elapsed": round(self.elapsed, 6),
        }


@dataclass
class RunReport:
    findings: list[Finding]
    stats: RunStats
    refinements: bool = True
    fidelity: str = "fixed"
    library_mode: bool = False
    incomplete: bool = False
    # Engine internals kept for tests and the benchmark harness; not emitted.
    details: dict[str, Any] = field(default_factory=dict, repr=False)

    def to_json(self) -> dict[str, Any]:
        return {
            "schema": SCHEMA_VERSION,
            "tool": {"name": TOOL_NAME, "version": __version__},
            "config": {"refinements": self.refinements, "fidelity": self.fidelity, "libraryMode": self.library_mode},
            "stats": self.stats.to_json(),
            "findings": [f.to_json() for f in self.findings],
        }


def findings_json(findings: list[Finding]) -> str:
    """Canonical serialization of a finding array (byte-comparable)."""
    return json.dumps([f.to_json() for f in findings], sort_keys=True, ensure_ascii=False)


def _fmt_literal(lit) -> str:
    if lit is None:
        return "<non-literal>"
    return json.dumps(lit, ensure_ascii=False) if isinstance(lit, str) else str(lit)


def emit(report: RunReport, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(report.to_json(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    lines: list[str] = []
    for f in report.findings:
        lines.append(f"[{f.rule_id}] CWE-{f.cwe} {f.severity} {f.disposition} at {f.sink}")
        for s in f.sources:
            lines.append(f"  source {_fmt_literal(s.literal)} : {s.type} at {s.location}")
        for r in f.reasons:
            lines.append(f"  reason {r}")
        if f.trace:
            lines.append("  trace " + " <- ".join(f"{t.location}({t.via})" for t in f.trace))
        lines.append("")
    st = report.stats
    cfg = (f"refinements={'on' if report.refinements else 'off'} fidelity={report.fidelity} "
           f"library-mode={'on' if report.library_mode else 'off'}")
    lines.append(f"{len(report.findings)} finding(s); {st.functions_analyzed} functions, {st.seeds_created} seeds, "
                 f"{st.layers_used} layer(s), {st.unresolved_count} unresolved; {cfg}")
    if report.incomplete:
        lines.append("warning: analysis incomplete (fact budget exceeded)")
    return "\n".join(lines) + "\n"
