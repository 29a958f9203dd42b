"""Render a :class:`Program` back to CIR text (inverse of the parser)."""

from __future__ import annotations

import json
from typing import Optional

from .model import (
    BitCast,
    Br,
    CallStatic,
    CallVirtual,
    ClassDecl,
    CondBr,
    ConstInt,
    ConstStr,
    ExternDecl,
    FunctionDef,
    GetField,
    Instruction,
    Load,
    New,
    Phi,
    Program,
    PutField,
    Ret,
    Store,
    Throw,
)


def _ret(t: Optional[str]) -> str:
    return t if t is not None else "void"


def _ptr(p: str) -> str:
    return p if p.startswith("@") else f"%{p}"


def _args(args: tuple[str, ...]) -> str:
    return "(" + ", ".join(f"%{a}" for a in args) + ")"


def format_instruction(inst: Instruction) -> str:
    if isinstance(inst, ConstStr):
        return f"%{inst.dest} = const.str {json.dumps(inst.value)}"
    if isinstance(inst, ConstInt):
        return f"%{inst.dest} = const.int {inst.value}"
    if isinstance(inst, Load):
        return f"%{inst.dest} = load {_ptr(inst.ptr)}"
    if isinstance(inst, Store):
        return f"store %{inst.value} -> {_ptr(inst.ptr)}"
    if isinstance(inst, BitCast):
        return f"%{inst.dest} = bitcast %{inst.src} : {inst.type}"
    if isinstance(inst, Phi):
        arms = ", ".join(f"[%{v}, {lbl}]" for v, lbl in inst.arms)
        return f"%{inst.dest} = phi {inst.type} {arms}"
    if isinstance(inst, GetField):
        return f"%{inst.dest} = getfield %{inst.obj}.{inst.field}"
    if isinstance(inst, PutField):
        return f"putfield %{inst.obj}.{inst.field} <- %{inst.value}"
    if isinstance(inst, New):
        return f"%{inst.dest} = new {inst.type}"
    if isinstance(inst, (CallStatic, CallVirtual)):
        lhs = f"%{inst.dest} = " if inst.dest is not None else ""
        if isinstance(inst, CallStatic):
            return f"{lhs}call @{inst.callee}{_args(inst.args)}"
        return f"{lhs}callv %{inst.receiver}.{inst.method}{_args(inst.args)}"
    if isinstance(inst, Ret):
        return "ret" if inst.value is None else f"ret %{inst.value}"
    if isinstance(inst, Br):
        return f"br {inst.target}"
    if isinstance(inst, CondBr):
        return f"condbr %{inst.cond}, {inst.if_true}, {inst.if_false}"
    if isinstance(inst, Throw):
        return f"throw %{inst.value}"
    raise TypeError(inst)


def _class(c: ClassDecl) -> list[str]:
    head = f"class {c.name}"
    if c.superclass:
        head += f" extends {c.superclass}"
    if c.interfaces:
        head += " implements " + ", ".join(c.interfaces)
    lines = [head + " {"]
    for f in c.fields:
        lines.append(f"  {'static ' if f.static else ''}field {f.name} : {f.type}")
    if c.static_init:
        lines.append(f"  staticinit @{c.static_init}")
    lines.append("}")
    return lines


def _extern(e: ExternDecl) -> str:
    if e.is_class:
        return f"extern class {e.name}"
    params = ", ".join(e.params or ())
    return f"extern func @{e.name}({params}) -> {_ret(e.return_type)}{' static' if e.static else ''}"


def _function(f: FunctionDef) -> list[str]:
    params = ", ".join(f"%{n} : {t}" for n, t in f.params)
    # `static` is spelled out only where the owner-based default would differ.
    lines = [f"func @{f.name}({params}) -> {_ret(f.return_type)}{' static' if f.kind == 'static' else ''} {{"]
    for b in f.blocks:
        lines.append(f"{b.label}:")
        lines.extend(f"  {format_instruction(i)}" for i in b.instructions)
    for h in f.handlers:
        lines.append(f"handler ({h.caught_type}) from {h.start} .. {h.end} to {h.handler}")
    lines.append("}")
    return lines


def print_program(p: Program, *, externs: bool = True) -> str:
    """CIR text for ``p``; set ``externs=False`` to omit extern declarations
    (useful when the output will be re-parsed together with the prelude)."""
    out: list[str] = []
    if externs:
        out.extend(_extern(e) for e in p.externs)
    for c in p.classes:
        out.extend(_class(c))
    for f in p.functions:
        out.extend(_function(f))
    return "\n".join(out) + "\n"
