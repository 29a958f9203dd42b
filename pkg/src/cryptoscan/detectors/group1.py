"""Group 1: parameter-misuse sinks and their verifying rules; Group 3 PRNG scoping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Union

from ..cir.model import NUMERIC, CallStatic, CallVirtual, Location, Program
from ..cir.types import UnresolvedType, is_castable
from ..ifds.events import ConstantSource, Exhausted, FlowEvent, Sanitized, VerifierHit, event_sort_key
from ..ifds.facts import DataFact
from .rules import RuleSet, SinkRule


@dataclass(frozen=True)
class Seed:
    index: int
    rule: SinkRule
    location: Location
    fact: DataFact

    @property
    def function(self) -> str:
        return self.location.func


def match_sinks(p: Program, rules: RuleSet, functions: Optional[Iterable[str]] = None) -> list[Seed]:
    """One seed per (extern callsite, matching sink rule), program order."""
    names = list(functions) if functions is not None else [f.name for f in p.functions]
    seeds: list[Seed] = []
    for fname in names:
        func = p.function(fname)
        info = p.info(fname)
        for loc, inst in func.iter_instructions():
            if not isinstance(inst, (CallStatic, CallVirtual)):
                continue
            target = info.call_target(inst)
            if not target.is_extern:
                continue
            for rule in rules.sinks_for(target.extern.name):
                if rule.arg_index == -1:
                    if not isinstance(inst, CallVirtual):
                        continue
                    value = inst.receiver
                elif rule.arg_index < len(inst.args):
                    value = inst.args[rule.arg_index]
                else:
                    continue
                seeds.append(Seed(len(seeds), rule, loc, DataFact(value)))
    return seeds


@dataclass(frozen=True)
class Verdict:
    violation: bool
    reasons: tuple[str, ...] = ()
    flagged: tuple[FlowEvent, ...] = ()


def _numeric_literal(src: ConstantSource) -> Optional[int]:
    if isinstance(src.literal, int):
        return src.literal
    try:
        return int(str(src.literal).strip())
    except ValueError:
        return None


def type_gate(src: ConstantSource, expected: str, program: Program, fidelity: str = "fixed") -> bool:
    """Whether a constant's type is compatible with the sink argument.

    The base test is :func:`is_castable`.  In ``fixed`` mode a String literal
    that parses as an integer is also accepted for a numeric argument, which
    covers values that reach the sink through a string/char-array round trip.
    """
    try:
        if is_castable(src.type, expected, program):
            return True
    except UnresolvedType:
        return False
    if fidelity == "fixed" and expected in NUMERIC and src.type == "String":
        return _numeric_literal(src) is not None
    return False


def _cipher_violation(spec: str, rules: RuleSet) -> Optional[str]:
    parts = [p.strip() for p in spec.split("/")]
    algo = parts[0].upper()
    if algo in {c.upper() for c in rules.weak_ciphers}:
        return f"weak cipher {parts[0]}"
    if len(parts) > 1 and parts[1].upper() == "ECB":
        return "ECB mode"
    if len(parts) == 1 and algo in {c.upper() for c in rules.block_ciphers}:
        return f"bare block cipher {parts[0]} defaults to ECB"
    return None


def _norm_hash(name: str) -> str:
    return name.replace("-", "").replace("_", "").upper()


def apply_verifying_rule(events: Iterable[FlowEvent], rule: SinkRule, rules: RuleSet, program: Program,
                         fidelity: str = "fixed") -> Verdict:
    """Decide whether the sources that reached a seed violate ``rule``."""
    evs = sorted(set(events), key=event_sort_key)
    flagged: list[FlowEvent] = []
    reasons: list[str] = []
    for ev in evs:
        if isinstance(ev, ConstantSource):
            if not type_gate(ev, rule.expected_type, program, fidelity):
                continue
            why = None
            if rule.check in ("constant", "key-material", "seed-source"):
                why = f"hard-coded {rule.check}"
            elif rule.check == "cipher-spec":
                why = _cipher_violation(str(ev.literal), rules)
            elif rule.check == "hash-spec":
                if _norm_hash(str(ev.literal)) in {_norm_hash(h) for h in rules.weak_hashes}:
                    why = f"weak hash {ev.literal}"
            elif rule.check == "min-int":
                n = _numeric_literal(ev)
                if n is not None and n < rules.min_iteration:
                    why = f"{n} < {rules.min_iteration}"
            if why:
                flagged.append(ev)
                reasons.append(why)
        elif rule.check == "seed-source":
            if isinstance(ev, Exhausted) or (isinstance(ev, Sanitized) and not ev.secure_seed):
                flagged.append(ev)
                reasons.append("seed not from a secure seed source")
    return Verdict(bool(flagged), tuple(reasons), tuple(flagged))


def classify_prng(events: Iterable[FlowEvent], rules: RuleSet) -> tuple[VerifierHit, ...]:
    """VerifierHit events reaching a sink; non-empty means a weak-PRNG finding."""
    if rules.prng is None:
        return ()
    hits = [e for e in set(events) if isinstance(e, VerifierHit)]
    return tuple(sorted(hits, key=event_sort_key))


SourceEvent = Union[ConstantSource, Sanitized, VerifierHit, Exhausted]
