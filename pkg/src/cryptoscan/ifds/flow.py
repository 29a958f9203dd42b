"""The backward flow functions.

Every function maps one fact that holds *after* an instruction to the facts
that must hold *before* it, plus any events fired on the way.  Returned fact
lists are in a deterministic order.
"""

from __future__ import annotations

from typing import Optional

from ..cir.model import (
    BitCast,
    Br,
    CallStatic,
    CallVirtual,
    CondBr,
    ConstInt,
    ConstStr,
    ExternDecl,
    FunctionDef,
    FunctionInfo,
    GetField,
    Instruction,
    Load,
    Location,
    New,
    Phi,
    PutField,
    Ret,
    Store,
    Throw,
    split_qname,
)
from .events import ConstantSource, Exhausted, FlowEvent, Sanitized, VerifierHit
from .facts import DEFAULT_K, RET, THIS, DataFact, make_fact


class FlowContractError(ValueError):
    pass


_IDENTITY = (Ret, Br, CondBr, Throw)


def flow(inst: Instruction, fact: DataFact, loc: Location, info: Optional[FunctionInfo] = None,
         k: int = DEFAULT_K) -> tuple[list[DataFact], list[FlowEvent]]:
    """Transfer across a non-call, non-phi instruction."""
    if isinstance(inst, (Phi, CallStatic, CallVirtual)):
        raise FlowContractError(f"flow() does not handle {type(inst).__name__}")
    if fact.is_zero:
        raise FlowContractError("the zero fact is never propagated")
    base, fields = fact.base, fact.fields
    if isinstance(inst, (ConstStr, ConstInt)):
        if base != inst.dest:
            return [fact], []
        if fields:
            return [], []
        typ = "String" if isinstance(inst, ConstStr) else "int"
        return [], [ConstantSource(inst.value, typ, loc)]
    if isinstance(inst, Load):
        return ([make_fact(inst.ptr, fields, k)] if base == inst.dest else [fact]), []
    if isinstance(inst, Store):
        return ([make_fact(inst.value, fields, k)] if base == inst.ptr else [fact]), []
    if isinstance(inst, BitCast):
        return ([make_fact(inst.src, fields, k)] if base == inst.dest else [fact]), []
    if isinstance(inst, GetField):
        if base == inst.dest:
            return [make_fact(inst.obj, (inst.field, *fields), k)], []
        return [fact], []
    if isinstance(inst, PutField):
        if base == inst.obj and fields and fields[0] == inst.field:
            written = make_fact(inst.value, fields[1:], k)
            strong = info is not None and info.is_local_new(inst.obj)
            return ([written] if strong else [written, fact]), []
        return [fact], []
    if isinstance(inst, New):
        if base == inst.dest:
            return [], [Exhausted(loc)]
        return [fact], []
    if isinstance(inst, _IDENTITY):
        return [fact], []
    raise FlowContractError(f"unknown instruction {inst!r}")  # pragma: no cover


def phi_flow(inst: Phi, fact: DataFact, pred: str, k: int = DEFAULT_K) -> list[DataFact]:
    arms = dict((lbl, v) for v, lbl in inst.arms)
    if pred not in arms:
        raise FlowContractError(f"{pred!r} is not an incoming edge of %{inst.dest}")
    if fact.base != inst.dest:
        return [fact]
    return [make_fact(arms[pred], fact.fields, k)]


def _matches_qname(qname: str, names) -> bool:
    return any(qname == n or qname.endswith("." + n) for n in names)


def call_flow(inst: Instruction, fact: DataFact, loc: Location, extern: ExternDecl, rules,
              refinements: bool = True, k: int = DEFAULT_K) -> tuple[list[DataFact], list[FlowEvent]]:
    """Transfer across a callsite whose callee is a library extern."""
    if not isinstance(inst, (CallStatic, CallVirtual)):
        raise FlowContractError("call_flow() needs a callsite")
    qname = extern.name
    owner = split_qname(qname)[0]
    recv = inst.receiver if isinstance(inst, CallVirtual) else None
    on_result = inst.dest is not None and fact.base == inst.dest
    on_arg = fact.base in inst.args
    if on_result or on_arg:
        if owner in rules.sanitizer_classes:
            secure = _matches_qname(qname, rules.secure_seed_sources)
            return [], [Sanitized(loc, qname, secure)]
        if owner in rules.verifier_classes:
            return [], [VerifierHit(loc, qname)]
    if on_result:
        if not refinements:
            outs = _bare([recv] if recv is not None else [], inst.args)
        elif recv is not None:
            outs = [DataFact(recv)]
        else:
            outs = []
        return outs, ([] if outs else [Exhausted(loc)])
    if recv is not None and fact.base == recv and refinements and inst.dest is None:
        outs = _bare([], inst.args)
        return outs, ([] if outs else [Exhausted(loc)])
    return [fact], []


def _bare(first: list[str], args: tuple[str, ...]) -> list[DataFact]:
    out: list[DataFact] = []
    for v in [*first, *args]:
        f = DataFact(v)
        if f not in out:
            out.append(f)
    return out


def callee_formals(callee: FunctionDef) -> list[str]:
    return [n for n, _ in callee.formals()]


def return_val(inst: Instruction, fact: DataFact, callee: FunctionDef, k: int = DEFAULT_K) -> tuple[list[DataFact], bool]:
    """Caller-side fact at a callsite, phrased as the callee's exit facts.

    Returns ``(exit_facts, keep)`` where ``keep`` says the caller fact also
    survives the call unchanged (values the callee cannot redefine).
    """
    if not isinstance(inst, (CallStatic, CallVirtual)):
        raise FlowContractError("return_val() needs a callsite")
    if fact.is_static:
        return [fact], False
    if inst.dest is not None and fact.base == inst.dest:
        return [make_fact(RET, fact.fields, k)], False
    if not fact.fields:
        return [], True
    actuals = ([inst.receiver] if isinstance(inst, CallVirtual) else []) + list(inst.args)
    formals = callee_formals(callee)
    if len(formals) != len(actuals):
        raise FlowContractError(f"arity mismatch calling {callee.name}")
    exits = [make_fact(f, fact.fields, k) for f, a in zip(formals, actuals) if a == fact.base]
    return exits, not exits


def pass_args(inst: Instruction, entry_fact: DataFact, callee: FunctionDef, k: int = DEFAULT_K) -> Optional[DataFact]:
    """Map a callee entry fact to the caller side of ``inst``."""
    if not isinstance(inst, (CallStatic, CallVirtual)):
        raise FlowContractError("pass_args() needs a callsite")
    if entry_fact.is_static:
        return entry_fact
    actuals = ([inst.receiver] if isinstance(inst, CallVirtual) else []) + list(inst.args)
    formals = callee_formals(callee)
    if len(formals) != len(actuals):
        raise FlowContractError(f"arity mismatch calling {callee.name}")
    for f, a in zip(formals, actuals):
        if f == entry_fact.base:
            return make_fact(a, entry_fact.fields, k)
    return None


__all__ = ["flow", "phi_flow", "call_flow", "return_val", "pass_args", "FlowContractError", "THIS"]
