"""Precision/recall scoring of corpus runs in the benchmark-table layout."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

from ..analysis import AnalysisConfig, analyze
from ..report import Finding, RunReport
from .corpus import CATEGORIES, FixtureCase


@dataclass(frozen=True)
class MetricsRow:
    category: str
    cases: int
    insecure: int
    secure: int
    reported: int
    false_positives: int
    false_negatives: int
    precision: float
    recall: float

    @property
    def true_positives(self) -> int:
        return self.reported - self.false_positives

    def to_json(self) -> dict:
        d = asdict(self)
        return {
            "category": d["category"], "cases": d["cases"], "insecure": d["insecure"], "secure": d["secure"],
            "reported": d["reported"], "falsePositives": d["false_positives"],
            "falseNegatives": d["false_negatives"], "precision": d["precision"], "recall": d["recall"],
        }


def run_corpus(cases: list[FixtureCase], config: Optional[AnalysisConfig] = None,
               parallel: int = 1) -> dict[str, RunReport]:
    """Analyze every case; results are keyed by case name."""
    cfg = config or AnalysisConfig()
    if parallel > 1:
        with ThreadPoolExecutor(parallel) as pool:
            reports = list(pool.map(lambda c: analyze(c.program, cfg), cases))
    else:
        reports = [analyze(c.program, cfg) for c in cases]
    return {c.name: r for c, r in zip(cases, reports)}


def _findings(result) -> list[Finding]:
    return result.findings if isinstance(result, RunReport) else list(result)


def is_reported(case: FixtureCase, findings: list[Finding]) -> bool:
    if case.insecure:
        return any(f.rule_id in case.expected_rules for f in findings)
    return bool(findings)


def _ratio(num: int, den: int) -> float:
    # An empty denominator scores 0, as the path-sensitivity row does for recall.
    return num / den if den else 0.0


def _row(category: str, cases: list[FixtureCase], results) -> MetricsRow:
    insecure = [c for c in cases if c.insecure]
    secure = [c for c in cases if not c.insecure]
    tp = sum(1 for c in insecure if is_reported(c, _findings(results[c.name])))
    fp = sum(1 for c in secure if is_reported(c, _findings(results[c.name])))
    return MetricsRow(category, len(cases), len(insecure), len(secure), tp + fp, fp, len(insecure) - tp,
                      _ratio(tp, tp + fp), _ratio(tp, len(insecure)))


def score(cases: list[FixtureCase], results) -> tuple[list[MetricsRow], MetricsRow]:
    """Per-category rows (in category order, empty categories skipped) and a total row.

    ``results`` maps case name to a RunReport or a list of findings.
    """
    ordered = sorted(cases, key=lambda c: c.name)
    missing = [c.name for c in ordered if c.name not in results]
    if missing:
        raise KeyError(f"no result for cases: {missing}")
    rows = []
    for cat in CATEGORIES:
        members = [c for c in ordered if c.category == cat]
        if members:
            rows.append(_row(cat, members, results))
    return rows, _row("Total", ordered, results)


def fmt_percent(x: float) -> str:
    text = f"{x * 100:.2f}".rstrip("0").rstrip(".")
    return f"{text}%"


_COLUMNS = ("Category", "Cases", "Insecure", "Secure", "Reported", "FPs", "FNs", "Precision", "Recall")


def format_table(rows: list[MetricsRow], total: MetricsRow) -> str:
    body = [[r.category, r.cases, r.insecure, r.secure, r.reported, r.false_positives,
             r.false_negatives, fmt_percent(r.precision), fmt_percent(r.recall)] for r in [*rows, total]]
    cells = [list(_COLUMNS)] + [[str(x) for x in line] for line in body]
    widths = [max(len(line[i]) for line in cells) for i in range(len(_COLUMNS))]
    out = []
    for n, line in enumerate(cells):
        out.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(line, widths))))
        if n == 0 or n == len(cells) - 2:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out) + "\n"


def metrics_json(rows: list[MetricsRow], total: MetricsRow) -> str:
    return json.dumps({"categories": [r.to_json() for r in rows], "total": total.to_json()},
                      indent=2, sort_keys=True) + "\n"
