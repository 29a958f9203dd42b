"""Committed CIR fixture corpus, one directory per benchmark category."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Optional

from ..cir import parse_program
from ..cir.model import Program

CATEGORIES = (
    "basic",
    "multi-method",
    "multi-class",
    "field-sensitivity",
    "path-sensitivity",
    "heuristics",
)
LABELS = ("insecure", "secure")

_HEADER = re.compile(r"^;\s*(case|category|expected|rules|tags):\s*(.*?)\s*$")


class CorpusError(Exception):
    pass


@dataclass
class FixtureCase:
    name: str
    category: str
    expected: str
    text: str
    expected_rules: tuple[str, ...] = ()
    tags: tuple[str, ...] = ()
    path: str = ""

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise CorpusError(f"{self.name}: unknown category {self.category!r}")
        if self.expected not in LABELS:
            raise CorpusError(f"{self.name}: expected must be insecure or secure")
        if self.expected == "insecure" and not self.expected_rules:
            raise CorpusError(f"{self.name}: insecure case without expected rules")

    @property
    def insecure(self) -> bool:
        return self.expected == "insecure"

    @cached_property
    def program(self) -> Program:
        return parse_program(self.text, filename=self.path or self.name)


def parse_case(text: str, path: str = "") -> FixtureCase:
    meta: dict[str, str] = {}
    for line in text.splitlines():
        if not line.startswith(";"):
            break
        m = _HEADER.match(line)
        if m:
            meta[m.group(1)] = m.group(2)
    for key in ("case", "category", "expected"):
        if key not in meta:
            raise CorpusError(f"{path or '<text>'}: missing '; {key}:' header")

    def items(key: str) -> tuple[str, ...]:
        return tuple(x.strip() for x in meta.get(key, "").split(",") if x.strip())

    return FixtureCase(meta["case"], meta["category"], meta["expected"], text,
                       items("rules"), items("tags"), path)


def load_corpus(categories: Optional[tuple[str, ...]] = None, validate: bool = True) -> list[FixtureCase]:
    """All fixtures sorted by (category order, name). Validation failures raise."""
    root = resources.files(__package__).joinpath("corpus")
    cases: list[FixtureCase] = []
    for cat in categories or CATEGORIES:
        d = root.joinpath(cat)
        if not d.is_dir():
            continue
        for entry in sorted(d.iterdir(), key=lambda e: e.name):
            if not entry.name.endswith(".cir"):
                continue
            case = parse_case(entry.read_text(encoding="utf-8"), f"{cat}/{entry.name}")
            if case.category != cat:
                raise CorpusError(f"{case.path}: header category {case.category!r} does not match directory")
            cases.append(case)
    names = [c.name for c in cases]
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        raise CorpusError(f"duplicate case names: {dup}")
    if validate:
        for c in cases:
            c.program  # noqa: B018 - parse and validate eagerly
    cases.sort(key=lambda c: (CATEGORIES.index(c.category), c.name))
    return cases


def by_tag(cases: list[FixtureCase], tag: str) -> FixtureCase:
    hits = [c for c in cases if tag in c.tags]
    if len(hits) != 1:
        raise LookupError(f"expected exactly one case tagged {tag!r}, found {len(hits)}")
    return hits[0]


@dataclass
class CorpusSummary:
    counts: dict[str, dict[str, int]] = field(default_factory=dict)


def summarize(cases: list[FixtureCase]) -> CorpusSummary:
    s = CorpusSummary({c: {"insecure": 0, "secure": 0} for c in CATEGORIES})
    for case in cases:
        s.counts[case.category][case.expected] += 1
    return s
