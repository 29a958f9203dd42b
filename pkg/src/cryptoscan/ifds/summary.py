"""Summary edges and the store that holds them."""

from __future__ import annotations

import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from ..cir.model import Program
from .events import FlowEvent, event_sort_key
from .facts import RET, DataFact, make_fact
from .witness import Witness


@dataclass
class FactSummary:
    """Everything one exit fact of a function reaches at the function entry."""

    entry: dict[DataFact, Optional[Witness]] = field(default_factory=dict)
    events: dict[FlowEvent, Optional[Witness]] = field(default_factory=dict)

    def signature(self) -> tuple[frozenset, frozenset]:
        return frozenset(self.entry), frozenset(self.events)


@dataclass(frozen=True)
class SummaryEdge:
    function: str
    exit_fact: DataFact
    entry_facts: frozenset
    events: frozenset


PENDING, IN_PROGRESS, DONE = "pending", "inProgress", "done"


class SummaryStore:
    def __init__(self) -> None:
        self._summaries: dict[str, dict[DataFact, FactSummary]] = {}
        self.status: dict[str, str] = {}
        self.explorations: Counter = Counter()
        self.in_scc: set[str] = set()
        self.rounds: dict[str, int] = {}
        self._lock = threading.Lock()

    def mark(self, fname: str, status: str) -> None:
        with self._lock:
            self.status[fname] = status

    def count_exploration(self, fname: str) -> None:
        with self._lock:
            self.explorations[fname] += 1

    def put(self, fname: str, table: dict[DataFact, FactSummary]) -> None:
        with self._lock:
            self._summaries[fname] = table

    def has(self, fname: str) -> bool:
        return fname in self._summaries

    def lookup(self, fname: str, exit_fact: DataFact) -> Optional[FactSummary]:
        table = self._summaries.get(fname)
        if table is None:
            return None
        return table.get(exit_fact)

    def table(self, fname: str) -> dict[DataFact, FactSummary]:
        return self._summaries.get(fname, {})

    def edges(self, fname: str) -> list[SummaryEdge]:
        out = []
        for ef, s in sorted(self.table(fname).items()):
            out.append(SummaryEdge(fname, ef, frozenset(s.entry), frozenset(s.events)))
        return out

    def functions(self) -> list[str]:
        return sorted(self._summaries)

    def canonical(self, fname: str) -> list[tuple]:
        """Order-independent rendering of a function's summaries (for tests)."""
        out = []
        for e in self.edges(fname):
            out.append((str(e.exit_fact), sorted(str(f) for f in e.entry_facts),
                        [event_sort_key(ev) for ev in sorted(e.events, key=event_sort_key)]))
        return out


def field_paths(program: Program, type_name: Optional[str], depth: int) -> list[tuple[str, ...]]:
    """Non-empty field chains of length <= depth on a value of ``type_name``."""
    if type_name is None or depth <= 0:
        return []
    out: list[tuple[str, ...]] = []
    for fd in program.instance_fields_of(type_name):
        out.append((fd.name,))
        for rest in field_paths(program, fd.type, depth - 1):
            out.append((fd.name, *rest))
    return out


def exit_universe(program: Program, fname: str, k: int) -> list[DataFact]:
    """Exit-side facts a caller can ask about: the return value and its field
    paths, field paths of every formal (including the receiver), and every
    static-field root with its field paths."""
    func = program.function(fname)
    assert func is not None
    out: list[DataFact] = []
    if func.return_type is not None:
        out.append(DataFact(RET))
        out.extend(make_fact(RET, p, k) for p in field_paths(program, func.return_type, k))
    for name, t in func.formals():
        out.extend(make_fact(name, p, k) for p in field_paths(program, t, k))
    for ref in program.static_fields():
        decl = program.static_field(ref)
        out.append(DataFact(ref))
        out.extend(make_fact(ref, p, k) for p in field_paths(program, decl.type if decl else None, k))
    seen: set[DataFact] = set()
    uniq = []
    for f in out:
        if f not in seen:
            seen.add(f)
            uniq.append(f)
    return uniq
