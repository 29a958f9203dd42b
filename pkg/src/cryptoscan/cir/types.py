"""Type compatibility between constant sources and sensitive arguments."""

from __future__ import annotations

from .model import NUMERIC, STRING_CLASS, TEXTUAL, Program


class UnresolvedType(Exception):
    pass


def _canon(name: str) -> str:
    return "String" if name == STRING_CLASS else name


def is_castable(src: str, dst: str, program: Program) -> bool:
    """Whether a value of type ``src`` can be viewed as ``dst`` through a cast.

    Identity, subclass/implementor in either direction, numeric primitive
    widening/narrowing, and the textual pair String/bytes (a ``bytes`` value
    models a Java ``byte[]``/``char[]`` holding text) are compatible.
    """
    src, dst = _canon(src), _canon(dst)
    for t in (src, dst):
        if not program.type_exists(t) and t != "String":
            raise UnresolvedType(t)
    if src == dst:
        return True
    if src in NUMERIC and dst in NUMERIC:
        return True
    if src in TEXTUAL and dst in TEXTUAL:
        return True
    return program.is_subtype(src, dst) or program.is_subtype(dst, src)
