"""In-memory model of CIR programs.

Instructions are small frozen dataclasses; a program point is addressed by a
:class:`Location` (function, block label, index within the block).  Derived
information (CFG edges, value types, class hierarchy queries) lives on
:class:`Program` and :class:`FunctionInfo` and is computed lazily.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Optional, Union

PRIMITIVES = frozenset({"int", "long", "bool", "bytes", "String"})
NUMERIC = frozenset({"int", "long"})
TEXTUAL = frozenset({"String", "bytes"})

# Builtin String methods are declared against the Java class name.
STRING_CLASS = "java.lang.String"


def method_namespace(type_name: str) -> str:
    return STRING_CLASS if type_name == "String" else type_name


def split_qname(qname: str) -> tuple[str, str]:
    """``a.b.C.m`` -> (``a.b.C``, ``m``)."""
    owner, _, name = qname.rpartition(".")
    return owner, name


@dataclass(frozen=True, order=True)
class Location:
    func: str
    block: str
    index: int

    def __str__(self) -> str:
        return f"{self.func}:{self.block}#{self.index}"


# --------------------------------------------------------------------------
# Instructions


@dataclass(frozen=True)
class ConstStr:
    dest: str
    value: str


@dataclass(frozen=True)
class ConstInt:
    dest: str
    value: int


@dataclass(frozen=True)
class Load:
    dest: str
    ptr: str  # local value name, or "@Class.field" for a static field


@dataclass(frozen=True)
class Store:
    value: str
    ptr: str


@dataclass(frozen=True)
class BitCast:
    dest: str
    src: str
    type: str


@dataclass(frozen=True)
class Phi:
    dest: str
    type: str
    arms: tuple[tuple[str, str], ...]  # (value, predecessor label)


@dataclass(frozen=True)
class GetField:
    dest: str
    obj: str
    field: str


@dataclass(frozen=True)
class PutField:
    obj: str
    field: str
    value: str


@dataclass(frozen=True)
class New:
    dest: str
    type: str


@dataclass(frozen=True)
class CallStatic:
    dest: Optional[str]
    callee: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class CallVirtual:
    dest: Optional[str]
    receiver: str
    method: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class Ret:
    value: Optional[str] = None


@dataclass(frozen=True)
class Br:
    target: str


@dataclass(frozen=True)
class CondBr:
    cond: str
    if_true: str
    if_false: str


@dataclass(frozen=True)
class Throw:
    value: str


Instruction = Union[
    ConstStr, ConstInt, Load, Store, BitCast, Phi, GetField, PutField, New,
    CallStatic, CallVirtual, Ret, Br, CondBr, Throw,
]
Call = (CallStatic, CallVirtual)
TERMINATORS = (Ret, Br, CondBr, Throw)


def is_static_ref(name: str) -> bool:
    return name.startswith("@")


def defined_value(inst: Instruction) -> Optional[str]:
    return getattr(inst, "dest", None)


def used_values(inst: Instruction) -> list[str]:
    """Local values read by ``inst`` (static field refs excluded)."""
    if isinstance(inst, (ConstStr, ConstInt, New, Br)):
        used: list[str] = []
    elif isinstance(inst, Load):
        used = [inst.ptr]
    elif isinstance(inst, Store):
        used = [inst.value, inst.ptr]
    elif isinstance(inst, BitCast):
        used = [inst.src]
    elif isinstance(inst, Phi):
        used = [v for v, _ in inst.arms]
    elif isinstance(inst, GetField):
        used = [inst.obj]
    elif isinstance(inst, PutField):
        used = [inst.obj, inst.value]
    elif isinstance(inst, CallStatic):
        used = list(inst.args)
    elif isinstance(inst, CallVirtual):
        used = [inst.receiver, *inst.args]
    elif isinstance(inst, Ret):
        used = [inst.value] if inst.value is not None else []
    elif isinstance(inst, CondBr):
        used = [inst.cond]
    elif isinstance(inst, Throw):
        used = [inst.value]
    else:  # pragma: no cover
        raise TypeError(inst)
    return [u for u in used if not is_static_ref(u)]


def successor_labels(inst: Instruction) -> tuple[str, ...]:
    if isinstance(inst, Br):
        return (inst.target,)
    if isinstance(inst, CondBr):
        return (inst.if_true, inst.if_false)
    return ()


# --------------------------------------------------------------------------
# Declarations


@dataclass(frozen=True)
class FieldDecl:
    name: str
    type: str
    static: bool = False


@dataclass(frozen=True)
class ClassDecl:
    name: str
    superclass: Optional[str] = None
    interfaces: tuple[str, ...] = ()
    fields: tuple[FieldDecl, ...] = ()
    static_init: Optional[str] = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ExternDecl:
    """A signature-only library API, or a bare extern class when ``params`` is None."""

    name: str
    params: Optional[tuple[str, ...]] = None
    return_type: Optional[str] = None
    static: bool = False

    @property
    def is_class(self) -> bool:
        return self.params is None

    @property
    def arity(self) -> int:
        return len(self.params or ())


@dataclass(frozen=True)
class HandlerEntry:
    caught_type: str
    start: str
    end: str
    handler: str


@dataclass(frozen=True)
class BasicBlock:
    label: str
    instructions: tuple[Instruction, ...]

    @property
    def terminator(self) -> Optional[Instruction]:
        if self.instructions and isinstance(self.instructions[-1], TERMINATORS):
            return self.instructions[-1]
        return None

    @property
    def phi_count(self) -> int:
        n = 0
        for inst in self.instructions:
            if not isinstance(inst, Phi):
                break
            n += 1
        return n


@dataclass(frozen=True)
class FunctionDef:
    name: str
    params: tuple[tuple[str, str], ...]
    return_type: Optional[str]
    kind: str  # "static" | "instance"
    blocks: tuple[BasicBlock, ...]
    handlers: tuple[HandlerEntry, ...] = ()
    source_file: str = field(default="<input>", compare=False)
    line: int = field(default=0, compare=False)

    @property
    def owner(self) -> str:
        return split_qname(self.name)[0]

    @property
    def simple_name(self) -> str:
        return split_qname(self.name)[1]

    @property
    def is_instance(self) -> bool:
        return self.kind == "instance"

    def formals(self) -> list[tuple[str, str]]:
        """Parameters in call order, receiver first for instance functions."""
        if self.is_instance:
            return [("this", self.owner), *self.params]
        return list(self.params)

    def block(self, label: str) -> BasicBlock:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)

    def instruction(self, loc: Location) -> Instruction:
        return self.block(loc.block).instructions[loc.index]

    def iter_instructions(self) -> Iterator[tuple[Location, Instruction]]:
        for b in self.blocks:
            for i, inst in enumerate(b.instructions):
                yield Location(self.name, b.label, i), inst


@dataclass
class Program:
    classes: list[ClassDecl] = field(default_factory=list)
    functions: list[FunctionDef] = field(default_factory=list)
    externs: list[ExternDecl] = field(default_factory=list)

    # ---- lookups -------------------------------------------------------

    @cached_property
    def _functions(self) -> dict[str, FunctionDef]:
        return {f.name: f for f in self.functions}

    @cached_property
    def _classes(self) -> dict[str, ClassDecl]:
        return {c.name: c for c in self.classes}

    @cached_property
    def _extern_classes(self) -> set[str]:
        return {e.name for e in self.externs if e.is_class}

    @cached_property
    def _extern_funcs(self) -> dict[tuple[str, int], ExternDecl]:
        return {(e.name, e.arity): e for e in self.externs if not e.is_class}

    @cached_property
    def _subclasses(self) -> dict[str, list[str]]:
        direct: dict[str, list[str]] = {}
        for c in self.classes:
            for sup in ([c.superclass] if c.superclass else []) + list(c.interfaces):
                direct.setdefault(sup, []).append(c.name)
        return direct

    @cached_property
    def _infos(self) -> dict[str, "FunctionInfo"]:
        return {}

    def function(self, name: str) -> Optional[FunctionDef]:
        return self._functions.get(name)

    def cls(self, name: str) -> Optional[ClassDecl]:
        return self._classes.get(name)

    def extern_func(self, name: str, arity: int) -> Optional[ExternDecl]:
        return self._extern_funcs.get((name, arity))

    def is_extern_class(self, name: str) -> bool:
        return name in self._extern_classes

    def type_exists(self, name: str) -> bool:
        return name in PRIMITIVES or name in self._classes or name in self._extern_classes

    def info(self, fname: str) -> "FunctionInfo":
        infos = self._infos
        if fname not in infos:
            func = self.function(fname)
            if func is None:
                raise KeyError(fname)
            infos[fname] = FunctionInfo(self, func)
        return infos[fname]

    # ---- hierarchy -----------------------------------------------------

    def supertypes(self, name: str) -> list[str]:
        """All transitive supertypes of ``name`` (excluding itself), BFS order."""
        seen: list[str] = []
        todo = [name]
        while todo:
            cur = todo.pop(0)
            decl = self.cls(cur)
            if decl is None:
                continue
            for sup in ([decl.superclass] if decl.superclass else []) + list(decl.interfaces):
                if sup not in seen and sup != name:
                    seen.append(sup)
                    todo.append(sup)
        return seen

    def subtypes(self, name: str) -> list[str]:
        """``name`` and all declared transitive subtypes, declaration order."""
        found = {name}
        todo = [name]
        while todo:
            cur = todo.pop()
            for sub in self._subclasses.get(cur, []):
                if sub not in found:
                    found.add(sub)
                    todo.append(sub)
        order = [c.name for c in self.classes if c.name in found]
        if name not in order:
            order.insert(0, name)
        return order

    def is_subtype(self, sub: str, sup: str) -> bool:
        return sub == sup or sup in self.supertypes(sub)

    def field_decl(self, class_name: str, field_name: str) -> Optional[FieldDecl]:
        for cname in [class_name, *self.supertypes(class_name)]:
            decl = self.cls(cname)
            if decl is None:
                continue
            for f in decl.fields:
                if f.name == field_name:
                    return f
        return None

    def static_field(self, ref: str) -> Optional[FieldDecl]:
        """Resolve ``@Class.field``."""
        owner, name = split_qname(ref.lstrip("@"))
        decl = self.field_decl(owner, name)
        return decl if decl is not None and decl.static else None

    def static_fields(self) -> list[str]:
        return [f"@{c.name}.{f.name}" for c in self.classes for f in c.fields if f.static]

    def instance_fields_of(self, type_name: str) -> list[FieldDecl]:
        """Instance fields visible on a value of ``type_name``: its own, inherited, and subclass fields."""
        out: dict[str, FieldDecl] = {}
        if self.cls(type_name) is None:
            return []
        for cname in [*self.subtypes(type_name), *self.supertypes(type_name)]:
            decl = self.cls(cname)
            if decl is None:
                continue
            for f in decl.fields:
                if not f.static and f.name not in out:
                    out[f.name] = f
        return list(out.values())

    # ---- call resolution ----------------------------------------------

    def resolve_static_call(self, inst: CallStatic) -> tuple[tuple[str, ...], Optional[ExternDecl]]:
        if inst.callee in self._functions:
            return (inst.callee,), None
        ext = self.extern_func(inst.callee, len(inst.args))
        return (), ext

    def resolve_virtual(self, recv_type: str, method: str, arity: int) -> tuple[tuple[str, ...], Optional[ExternDecl]]:
        """Class-hierarchy resolution of ``recv.method(args)``.

        Returns the defined callees, or (when the hierarchy has none) the extern
        declaration the call binds to.
        """
        if self.cls(recv_type) is None:
            return (), self.extern_func(f"{method_namespace(recv_type)}.{method}", arity)
        callees: list[str] = []
        extern: Optional[ExternDecl] = None
        for sub in self.subtypes(recv_type):
            target, ext = self._lookup_upwards(sub, method, arity)
            if target is not None and target not in callees:
                callees.append(target)
            elif target is None and extern is None:
                extern = ext
        if callees:
            return tuple(callees), None
        return (), extern

    def _lookup_upwards(self, cname: str, method: str, arity: int) -> tuple[Optional[str], Optional[ExternDecl]]:
        chain = [cname, *self.supertypes(cname)]
        for c in chain:
            f = self.function(f"{c}.{method}")
            if f is not None and f.is_instance and len(f.params) == arity:
                return f.name, None
        for c in chain:
            if self.cls(c) is None:
                ext = self.extern_func(f"{method_namespace(c)}.{method}", arity)
                if ext is not None and not ext.static:
                    return None, ext
        return None, None


@dataclass(frozen=True)
class CallTarget:
    """Resolution of one callsite."""

    callees: tuple[str, ...]
    extern: Optional[ExternDecl]

    @property
    def is_extern(self) -> bool:
        return not self.callees and self.extern is not None

    @property
    def resolved(self) -> bool:
        return bool(self.callees) or self.extern is not None


class FunctionInfo:
    """Per-function derived facts: CFG, value types, definition sites."""

    def __init__(self, program: Program, func: FunctionDef) -> None:
        self.program = program
        self.func = func
        self.labels = [b.label for b in func.blocks]
        self.block_index = {lbl: i for i, lbl in enumerate(self.labels)}
        self.succs: dict[str, list[str]] = {}
        self.exc_succs: dict[str, list[str]] = {lbl: [] for lbl in self.labels}
        for b in func.blocks:
            term = b.terminator
            self.succs[b.label] = [s for s in (successor_labels(term) if term else ()) if s in self.block_index]
        for h in func.handlers:
            for lbl in self.protected_blocks(h):
                if h.handler in self.block_index and h.handler not in self.exc_succs[lbl]:
                    self.exc_succs[lbl].append(h.handler)
        self.preds: dict[str, list[str]] = {lbl: [] for lbl in self.labels}
        for lbl in self.labels:
            for s in self.all_succs(lbl):
                if lbl not in self.preds[s]:
                    self.preds[s].append(lbl)
        self.def_site: dict[str, Location] = {}
        self.def_inst: dict[str, Instruction] = {}
        for loc, inst in func.iter_instructions():
            d = defined_value(inst)
            if d is not None and d not in self.def_site:
                self.def_site[d] = loc
                self.def_inst[d] = inst
        self.param_names = [n for n, _ in func.formals()]
        self._types: Optional[dict[str, str]] = None

    def protected_blocks(self, h: HandlerEntry) -> list[str]:
        if h.start not in self.block_index or h.end not in self.block_index:
            return []
        lo, hi = self.block_index[h.start], self.block_index[h.end]
        return self.labels[lo : hi + 1]

    def all_succs(self, label: str) -> list[str]:
        out = list(self.succs.get(label, []))
        for s in self.exc_succs.get(label, []):
            if s not in out:
                out.append(s)
        return out

    def reachable(self) -> list[str]:
        if not self.labels:
            return []
        seen = [self.labels[0]]
        todo = [self.labels[0]]
        while todo:
            cur = todo.pop()
            for s in self.all_succs(cur):
                if s not in seen:
                    seen.append(s)
                    todo.append(s)
        return seen

    def reverse_postorder(self) -> list[str]:
        order: list[str] = []
        seen: set[str] = set()
        if not self.labels:
            return order
        stack: list[tuple[str, int]] = [(self.labels[0], 0)]
        seen.add(self.labels[0])
        while stack:
            lbl, i = stack[-1]
            succs = self.all_succs(lbl)
            if i < len(succs):
                stack[-1] = (lbl, i + 1)
                nxt = succs[i]
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append((nxt, 0))
            else:
                stack.pop()
                order.append(lbl)
        order.reverse()
        return order

    @property
    def types(self) -> dict[str, str]:
        if self._types is None:
            self._types = infer_types(self)
        return self._types

    def type_of(self, value: str) -> Optional[str]:
        if is_static_ref(value):
            decl = self.program.static_field(value)
            return decl.type if decl else None
        return self.types.get(value)

    def is_local_new(self, value: str) -> bool:
        return isinstance(self.def_inst.get(value), New)

    def call_target(self, inst: Instruction) -> CallTarget:
        if isinstance(inst, CallStatic):
            callees, ext = self.program.resolve_static_call(inst)
            return CallTarget(callees, ext)
        if isinstance(inst, CallVirtual):
            rtype = self.type_of(inst.receiver)
            if rtype is None:
                return CallTarget((), None)
            callees, ext = self.program.resolve_virtual(rtype, inst.method, len(inst.args))
            return CallTarget(callees, ext)
        raise TypeError(inst)

    def extern_qname(self, inst: Instruction) -> Optional[str]:
        target = self.call_target(inst)
        return target.extern.name if target.is_extern else None


def infer_types(info: FunctionInfo) -> dict[str, str]:
    """Declared type of every local value; unresolvable values are omitted."""
    types: dict[str, str] = {n: t for n, t in info.func.formals()}
    order = info.reverse_postorder()
    tail = [lbl for lbl in info.labels if lbl not in order]
    changed = True
    while changed:
        changed = _infer_pass(info, types, order + tail)
    return types


def _infer_pass(info: FunctionInfo, types: dict[str, str], labels: list[str]) -> bool:
    program = info.program
    changed = False
    for lbl in labels:
        for inst in info.func.block(lbl).instructions:
            d = defined_value(inst)
            if d is None or d in types:
                continue
            t: Optional[str] = None
            if isinstance(inst, ConstStr):
                t = "String"
            elif isinstance(inst, ConstInt):
                t = "int"
            elif isinstance(inst, Load):
                t = info.type_of(inst.ptr) if is_static_ref(inst.ptr) else types.get(inst.ptr)
            elif isinstance(inst, (BitCast, Phi, New)):
                t = inst.type
            elif isinstance(inst, GetField):
                otype = types.get(inst.obj)
                fd = program.field_decl(otype, inst.field) if otype else None
                t = fd.type if fd else None
            elif isinstance(inst, CallStatic):
                callees, ext = program.resolve_static_call(inst)
                t = _return_type(program, callees, ext)
            elif isinstance(inst, CallVirtual):
                rtype = types.get(inst.receiver)
                if rtype is not None:
                    callees, ext = program.resolve_virtual(rtype, inst.method, len(inst.args))
                    t = _return_type(program, callees, ext)
            if t is not None:
                types[d] = t
                changed = True
    return changed


def _return_type(program: Program, callees: tuple[str, ...], ext: Optional[ExternDecl]) -> Optional[str]:
    if callees:
        f = program.function(callees[0])
        return f.return_type if f else None
    return ext.return_type if ext else None
