"""Structural, SSA and type-resolution checks over a parsed program."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .model import (
    TERMINATORS,
    CallStatic,
    CallVirtual,
    FunctionDef,
    FunctionInfo,
    GetField,
    Load,
    Location,
    Phi,
    Program,
    Ret,
    Store,
    defined_value,
    is_static_ref,
    successor_labels,
    used_values,
)


@dataclass(frozen=True)
class Diagnostic:
    message: str
    location: Optional[Location] = None
    where: str = ""

    def __str__(self) -> str:
        at = str(self.location) if self.location else self.where
        return f"{at}: {self.message}" if at else self.message


class ValidationError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]) -> None:
        self.diagnostics = diagnostics
        shown = "; ".join(str(d) for d in diagnostics[:5])
        more = f" (+{len(diagnostics) - 5} more)" if len(diagnostics) > 5 else ""
        super().__init__(f"invalid program: {shown}{more}")


def dominators(info: FunctionInfo) -> dict[str, set[str]]:
    """Block dominator sets over normal and exceptional edges (reachable blocks only)."""
    blocks = info.reachable()
    if not blocks:
        return {}
    entry = info.labels[0]
    dom = {b: set(blocks) for b in blocks}
    dom[entry] = {entry}
    changed = True
    while changed:
        changed = False
        for b in blocks:
            if b == entry:
                continue
            preds = [p for p in info.preds[b] if p in dom]
            new = set.intersection(*(dom[p] for p in preds)) if preds else set()
            new = new | {b}
            if new != dom[b]:
                dom[b] = new
                changed = True
    return dom


def validate_program(p: Program) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    _check_classes(p, diags)
    for f in p.functions:
        _check_function(p, f, diags)
    return diags


def _check_classes(p: Program, diags: list[Diagnostic]) -> None:
    for c in p.classes:
        for sup in ([c.superclass] if c.superclass else []) + list(c.interfaces):
            if p.cls(sup) is None and not p.is_extern_class(sup):
                diags.append(Diagnostic(f"unknown supertype {sup!r}", where=f"class {c.name}"))
        if c.name in p.supertypes(c.name) or _has_cycle(p, c.name):
            diags.append(Diagnostic("cyclic inheritance", where=f"class {c.name}"))
        for fd in c.fields:
            if not p.type_exists(fd.type):
                diags.append(Diagnostic(f"unknown type {fd.type!r}", where=f"field {c.name}.{fd.name}"))
        if c.static_init is not None:
            init = p.function(c.static_init)
            if init is None:
                diags.append(Diagnostic(f"staticinit @{c.static_init} is not defined", where=f"class {c.name}"))
            elif init.params or init.is_instance:
                diags.append(Diagnostic(f"staticinit @{c.static_init} must be static with no parameters",
                                        where=f"class {c.name}"))


def _has_cycle(p: Program, name: str) -> bool:
    todo = [name]
    seen: set[str] = set()
    while todo:
        cur = todo.pop()
        decl = p.cls(cur)
        if decl is None:
            continue
        for sup in ([decl.superclass] if decl.superclass else []) + list(decl.interfaces):
            if sup == name:
                return True
            if sup not in seen:
                seen.add(sup)
                todo.append(sup)
    return False


def _check_function(p: Program, f: FunctionDef, diags: list[Diagnostic]) -> None:
    where = f"@{f.name}"
    if not f.blocks:
        diags.append(Diagnostic("function has no blocks", where=where))
        return
    labels = [b.label for b in f.blocks]
    dup = {lbl for lbl in labels if labels.count(lbl) > 1}
    for lbl in sorted(dup):
        diags.append(Diagnostic(f"duplicate block label {lbl!r}", where=where))
    if dup:
        return
    for name, t in f.params:
        if not p.type_exists(t):
            diags.append(Diagnostic(f"unknown parameter type {t!r}", where=where))
    info = FunctionInfo(p, f)

    for b in f.blocks:
        loc_end = Location(f.name, b.label, max(len(b.instructions) - 1, 0))
        if not b.instructions or not isinstance(b.instructions[-1], TERMINATORS):
            diags.append(Diagnostic("block does not end in a terminator", loc_end))
        extra = [i for i, inst in enumerate(b.instructions[:-1]) if isinstance(inst, TERMINATORS)]
        if extra:
            diags.append(Diagnostic("block has more than one terminator", Location(f.name, b.label, extra[0])))
        seen_non_phi = False
        for i, inst in enumerate(b.instructions):
            if isinstance(inst, Phi):
                if seen_non_phi:
                    diags.append(Diagnostic("phi not at block head", Location(f.name, b.label, i)))
            else:
                seen_non_phi = True
            for tgt in successor_labels(inst):
                if tgt not in info.block_index:
                    diags.append(Diagnostic(f"branch to unknown block {tgt!r}", Location(f.name, b.label, i)))
    for h in f.handlers:
        for lbl in (h.start, h.end, h.handler):
            if lbl not in info.block_index:
                diags.append(Diagnostic(f"handler references unknown block {lbl!r}", where=where))
        if h.start in info.block_index and h.end in info.block_index and \
                info.block_index[h.start] > info.block_index[h.end]:
            diags.append(Diagnostic("handler range is empty", where=where))
        if not p.type_exists(h.caught_type):
            diags.append(Diagnostic(f"unknown handler type {h.caught_type!r}", where=where))

    entry = f.blocks[0].label
    if info.preds[entry]:
        diags.append(Diagnostic("entry block has predecessors", Location(f.name, entry, 0)))
    reach = set(info.reachable())
    for lbl in labels:
        if lbl not in reach:
            diags.append(Diagnostic(f"block {lbl!r} unreachable from entry", Location(f.name, lbl, 0)))

    _check_ssa(p, f, info, diags)
    _check_types(p, f, info, diags)


def _check_ssa(p: Program, f: FunctionDef, info: FunctionInfo, diags: list[Diagnostic]) -> None:
    defs: dict[str, Location] = {}
    param_entry = Location(f.name, f.blocks[0].label, -1)
    for name, _ in f.formals():
        if name in defs:
            diags.append(Diagnostic(f"parameter %{name} declared twice", where=f"@{f.name}"))
        defs[name] = param_entry
    for loc, inst in f.iter_instructions():
        d = defined_value(inst)
        if d is None:
            continue
        if d in defs:
            diags.append(Diagnostic(f"%{d} defined more than once", loc))
        else:
            defs[d] = loc
    dom = dominators(info)

    def dominates(def_loc: Location, block: str, index: int) -> bool:
        if def_loc.index == -1:
            return True
        if def_loc.block == block:
            return def_loc.index < index
        return def_loc.block in dom.get(block, set())

    for b in f.blocks:
        if b.label not in dom:
            continue
        for i, inst in enumerate(b.instructions):
            loc = Location(f.name, b.label, i)
            if isinstance(inst, Phi):
                preds = info.preds[b.label]
                arm_labels = [lbl for _, lbl in inst.arms]
                if sorted(arm_labels) != sorted(preds) or len(set(arm_labels)) != len(arm_labels):
                    diags.append(Diagnostic("phi predecessor mismatch", loc))
                for v, lbl in inst.arms:
                    if v not in defs:
                        diags.append(Diagnostic(f"use of undefined value %{v}", loc))
                    elif lbl in info.block_index and lbl in dom and not (
                            defs[v].index == -1 or defs[v].block == lbl or defs[v].block in dom[lbl]):
                        diags.append(Diagnostic(f"%{v} does not reach predecessor {lbl!r}", loc))
                continue
            for v in used_values(inst):
                if v not in defs:
                    diags.append(Diagnostic(f"use of undefined value %{v}", loc))
                elif not dominates(defs[v], b.label, i):
                    diags.append(Diagnostic(f"use of %{v} before its definition", loc))


def _check_types(p: Program, f: FunctionDef, info: FunctionInfo, diags: list[Diagnostic]) -> None:
    types = info.types
    for loc, inst in f.iter_instructions():
        d = defined_value(inst)
        if isinstance(inst, (Load, Store)) and is_static_ref(inst.ptr):
            if p.static_field(inst.ptr) is None:
                diags.append(Diagnostic(f"unknown static field {inst.ptr}", loc))
        if isinstance(inst, GetField):
            otype = types.get(inst.obj)
            if otype is not None and p.field_decl(otype, inst.field) is None:
                diags.append(Diagnostic(f"unknown field {inst.field!r} on {otype}", loc))
        if isinstance(inst, CallStatic):
            target = info.call_target(inst)
            if not target.resolved:
                diags.append(Diagnostic(f"unresolved callee @{inst.callee}/{len(inst.args)}", loc))
            elif target.callees:
                callee = p.function(target.callees[0])
                assert callee is not None
                if callee.is_instance:
                    diags.append(Diagnostic(f"static call to instance function @{callee.name}", loc))
                elif len(callee.params) != len(inst.args):
                    diags.append(Diagnostic(f"arity mismatch calling @{callee.name}", loc))
            elif target.extern is not None and not target.extern.static:
                diags.append(Diagnostic(f"static call to instance extern @{inst.callee}", loc))
            if d is not None and target.resolved and _ret_of(p, target) is None:
                diags.append(Diagnostic("call to void function defines a value", loc))
        if isinstance(inst, CallVirtual):
            if inst.receiver in types:
                target = info.call_target(inst)
                if not target.resolved:
                    diags.append(Diagnostic(
                        f"unresolved virtual callee {types[inst.receiver]}.{inst.method}/{len(inst.args)}", loc))
                elif d is not None and _ret_of(p, target) is None:
                    diags.append(Diagnostic("call to void function defines a value", loc))
        if isinstance(inst, Ret):
            if inst.value is None and f.return_type is not None:
                diags.append(Diagnostic("ret without value in non-void function", loc))
            if inst.value is not None and f.return_type is None:
                diags.append(Diagnostic("ret with value in void function", loc))
        if d is not None and d not in types and not isinstance(inst, (CallStatic, CallVirtual, GetField)):
            diags.append(Diagnostic(f"cannot determine type of %{d}", loc))


def _ret_of(p: Program, target) -> Optional[str]:
    if target.callees:
        callee = p.function(target.callees[0])
        return callee.return_type if callee else None
    return target.extern.return_type
