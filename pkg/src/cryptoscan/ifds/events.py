"""Events produced while propagating facts backward."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from ..cir.model import Location
from .facts import DataFact


@dataclass(frozen=True, order=True)
class ConstantSource:
    literal: Union[str, int]
    type: str
    location: Location

    kind = "ConstantSource"


@dataclass(frozen=True, order=True)
class Sanitized:
    location: Location
    by: str = ""
    secure_seed: bool = False

    kind = "Sanitized"


@dataclass(frozen=True, order=True)
class VerifierHit:
    location: Location
    by: str = ""

    kind = "VerifierHit"


@dataclass(frozen=True, order=True)
class EscapedToEntry:
    entry_fact: DataFact
    function: str = ""

    kind = "EscapedToEntry"


@dataclass(frozen=True, order=True)
class Exhausted:
    """A traced value ended at a definition that is neither constant nor
    sanitized (fresh allocation, opaque library result, dropped receiver)."""

    location: Optional[Location] = None

    kind = "Exhausted"


FlowEvent = Union[ConstantSource, Sanitized, VerifierHit, EscapedToEntry, Exhausted]

_KIND_ORDER = {"ConstantSource": 0, "Sanitized": 1, "VerifierHit": 2, "Exhausted": 3, "EscapedToEntry": 4}


def event_sort_key(ev: FlowEvent) -> tuple:
    """Total order across event kinds (used for canonical output)."""
    if isinstance(ev, ConstantSource):
        return (0, ev.location, str(type(ev.literal)), str(ev.literal), ev.type)
    if isinstance(ev, Sanitized):
        return (1, ev.location, ev.by, ev.secure_seed)
    if isinstance(ev, VerifierHit):
        return (2, ev.location, ev.by)
    if isinstance(ev, Exhausted):
        return (3, ev.location or Location("", "", -1))
    return (4, ev.function, ev.entry_fact)


def describe(ev: FlowEvent) -> str:
    if isinstance(ev, ConstantSource):
        lit = f'"{ev.literal}"' if isinstance(ev.literal, str) else str(ev.literal)
        return f"ConstantSource({lit}: {ev.type} @ {ev.location})"
    if isinstance(ev, Sanitized):
        return f"Sanitized({ev.by} @ {ev.location})"
    if isinstance(ev, VerifierHit):
        return f"VerifierHit({ev.by} @ {ev.location})"
    if isinstance(ev, EscapedToEntry):
        return f"EscapedToEntry({ev.entry_fact} in {ev.function})"
    return f"Exhausted(@ {ev.location})"
