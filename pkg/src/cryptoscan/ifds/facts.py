"""Backward data facts: bounded access paths plus the zero fact."""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_K = 2

RET = "$ret"  # exit-side root for a function's return value
THIS = "this"
_ZERO_BASE = "<zero>"


@dataclass(frozen=True, order=True)
class DataFact:
    """An access path ``base.f1...fn`` (n <= K) or the zero fact.

    ``base`` is a local SSA value name, a formal parameter, ``this``, a static
    field root ``@Class.field``, or :data:`RET` in summary exit facts.
    """

    base: str
    fields: tuple[str, ...] = ()

    @property
    def is_zero(self) -> bool:
        return self.base == _ZERO_BASE

    @property
    def is_static(self) -> bool:
        return self.base.startswith("@")

    def rebase(self, base: str, k: int) -> "DataFact":
        return make_fact(base, self.fields, k)

    def __str__(self) -> str:
        if self.is_zero:
            return "Λ"
        head = self.base if self.base.startswith(("@", "$")) else f"%{self.base}"
        return ".".join((head, *self.fields))


ZERO = DataFact(_ZERO_BASE)


def make_fact(base: str, fields: tuple[str, ...] = (), k: int = DEFAULT_K) -> DataFact:
    """Build a fact, collapsing field chains deeper than ``k`` to their prefix."""
    return DataFact(base, tuple(fields[:k]))


def parse_fact(text: str) -> DataFact:
    """Inverse of ``str(fact)`` for ``%v.f.g`` and ``$ret.f``; static roots
    must be given without a field suffix since owners are dotted names."""
    if text == "Λ":
        return ZERO
    if text.startswith("@"):
        return DataFact(text)
    if text.startswith(("%", "$")):
        base, *fields = text.lstrip("%").split(".")
        return DataFact(base, tuple(fields))
    raise ValueError(f"bad fact {text!r}")
