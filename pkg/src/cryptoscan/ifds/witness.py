"""Witness paths recorded during propagation.

A witness is a persistent cons list of items.  An item is either a
:class:`Step` or another witness (the callee-side path of an applied summary),
so summaries are shared rather than copied.  :func:`flatten` expands the tree
iteratively, which keeps long call chains cheap and free of recursion limits.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Optional, Union

from ..cir.model import Location

VIAS = ("sink", "flow", "phiFlow", "returnVal", "passArgs", "callFlow", "summary", "source", "entry", "pattern")


class Step(NamedTuple):
    location: Location
    via: str


class Witness:
    __slots__ = ("prev", "item")

    def __init__(self, prev: Optional["Witness"], item: Union[Step, "Witness"]) -> None:
        self.prev = prev
        self.item = item

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Witness({flatten(self)!r})"


WitnessLike = Optional[Witness]


def extend(w: WitnessLike, items: Iterable[Union[Step, Witness, None]]) -> WitnessLike:
    for it in items:
        if it is not None:
            w = Witness(w, it)
    return w


def concat(*parts: WitnessLike) -> WitnessLike:
    """Witness consisting of ``parts`` in order, each kept by reference."""
    return extend(None, parts)


def flatten(w: WitnessLike) -> list[Step]:
    """Steps of ``w`` in recording order, consecutive duplicates removed."""
    out: list[Step] = []
    stack: list[Union[Step, Witness]] = []

    def push_chain(node: WitnessLike) -> None:
        # Walking prev pointers yields newest first; pushing in that order
        # leaves the oldest item on top of the stack.
        while node is not None:
            stack.append(node.item)
            node = node.prev

    push_chain(w)
    while stack:
        item = stack.pop()
        if isinstance(item, Witness):
            push_chain(item)
        elif not out or out[-1] != item:
            out.append(item)
    return out
