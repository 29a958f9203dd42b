"""Parser for the textual CIR format."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Optional

from .model import (
    PRIMITIVES,
    BasicBlock,
    BitCast,
    Br,
    CallStatic,
    CallVirtual,
    ClassDecl,
    CondBr,
    ConstInt,
    ConstStr,
    ExternDecl,
    FieldDecl,
    FunctionDef,
    GetField,
    HandlerEntry,
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


class CIRError(Exception):
    """Base class for CIR parse/resolution failures."""


class ParseError(CIRError):
    def __init__(self, message: str, line: int = 0, column: int = 0, filename: str = "<input>") -> None:
        self.message = message
        self.line = line
        self.column = column
        self.filename = filename
        super().__init__(f"{filename}:{line}:{column}: {message}")


_IDENT_PART = r"(?:[A-Za-z_$][A-Za-z0-9_$]*|<init>|<clinit>)"
_TOKEN_RE = re.compile(
    rf"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>;[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<global>@{_IDENT_PART}(?:\.{_IDENT_PART})*)
  | (?P<value>%[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<int>-?[0-9]+)
  | (?P<arrow>->)
  | (?P<larrow><-)
  | (?P<range>\.\.)
  | (?P<name>{_IDENT_PART}(?:\.{_IDENT_PART})*)
  | (?P<punct>[(){{}}\[\],:=.])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, filename: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1, filename)
        kind = m.lastgroup
        assert kind is not None
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


_INST_KEYWORDS = {"store", "putfield", "call", "callv", "ret", "br", "condbr", "throw"}


class _Parser:
    def __init__(self, text: str, filename: str) -> None:
        self.filename = filename
        self.toks = _tokenize(text, filename)
        self.i = 0

    # ---- token helpers -------------------------------------------------

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, message: str, tok: Optional[_Tok] = None) -> ParseError:
        t = tok or self.tok
        return ParseError(message, t.line, t.col, self.filename)

    def advance(self) -> _Tok:
        t = self.tok
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("name", "punct", "arrow", "larrow", "range")

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            raise self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> _Tok:
        if self.tok.kind != kind:
            raise self.error(f"expected {what}, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def name(self) -> str:
        return self.expect_kind("name", "identifier").text

    def value(self) -> str:
        return self.expect_kind("value", "%value").text[1:]

    def global_ref(self) -> str:
        return self.expect_kind("global", "@name").text[1:]

    def type_name(self) -> str:
        return self.name()

    def pointer(self) -> str:
        if self.tok.kind == "global":
            return "@" + self.global_ref()
        return self.value()

    # ---- top level -----------------------------------------------------

    def parse(self) -> tuple[list[ClassDecl], list[FunctionDef], list[ExternDecl]]:
        classes: list[ClassDecl] = []
        funcs: list[FunctionDef] = []
        externs: list[ExternDecl] = []
        while self.tok.kind != "eof":
            if self.at("class"):
                classes.append(self.classdecl())
            elif self.at("extern"):
                externs.append(self.externdecl())
            elif self.at("func"):
                funcs.append(self.funcdecl())
            else:
                raise self.error(f"expected 'class', 'extern' or 'func', found {self.tok.text!r}")
        return classes, funcs, externs

    def classdecl(self) -> ClassDecl:
        line = self.expect("class").line
        name = self.name()
        sup = None
        ifaces: list[str] = []
        if self.at("extends"):
            self.advance()
            sup = self.name()
        if self.at("implements"):
            self.advance()
            ifaces.append(self.name())
            while self.at(","):
                self.advance()
                ifaces.append(self.name())
        self.expect("{")
        fields: list[FieldDecl] = []
        static_init = None
        while not self.at("}"):
            if self.at("static") or self.at("field"):
                static = False
                if self.at("static"):
                    self.advance()
                    static = True
                self.expect("field")
                fname = self.name()
                self.expect(":")
                fields.append(FieldDecl(fname, self.type_name(), static))
            elif self.at("staticinit"):
                self.advance()
                static_init = self.global_ref()
            else:
                raise self.error(f"unexpected {self.tok.text!r} in class body")
        self.expect("}")
        return ClassDecl(name, sup, tuple(ifaces), tuple(fields), static_init, line=line)

    def externdecl(self) -> ExternDecl:
        self.expect("extern")
        if self.at("class"):
            self.advance()
            return ExternDecl(self.name())
        self.expect("func")
        name = self.global_ref()
        self.expect("(")
        params: list[str] = []
        if not self.at(")"):
            params.append(self.type_name())
            while self.at(","):
                self.advance()
                params.append(self.type_name())
        self.expect(")")
        self.expect("->")
        ret = self.return_type()
        static = False
        if self.at("static"):
            self.advance()
            static = True
        return ExternDecl(name, tuple(params), ret, static)

    def return_type(self) -> Optional[str]:
        t = self.type_name()
        return None if t == "void" else t

    def funcdecl(self) -> FunctionDef:
        line = self.expect("func").line
        name = self.global_ref()
        self.expect("(")
        params: list[tuple[str, str]] = []
        if not self.at(")"):
            params.append(self.param())
            while self.at(","):
                self.advance()
                params.append(self.param())
        self.expect(")")
        self.expect("->")
        ret = self.return_type()
        static = False
        if self.at("static"):
            self.advance()
            static = True
        self.expect("{")
        blocks: list[BasicBlock] = []
        handlers: list[HandlerEntry] = []
        while not self.at("}"):
            if self.at("handler"):
                handlers.append(self.handler())
            elif self.tok.kind == "name" and self.peek().text == ":":
                if handlers:
                    raise self.error("blocks must precede handler entries")
                blocks.append(self.block())
            else:
                raise self.error(f"expected block label, found {self.tok.text!r}")
        self.expect("}")
        if not blocks:
            raise self.error(f"function @{name} has no blocks")
        kind = "static" if static else "pending"
        return FunctionDef(name, tuple(params), ret, kind, tuple(blocks), tuple(handlers),
                           source_file=self.filename, line=line)

    def param(self) -> tuple[str, str]:
        n = self.value()
        self.expect(":")
        return n, self.type_name()

    def handler(self) -> HandlerEntry:
        self.expect("handler")
        self.expect("(")
        t = self.type_name()
        self.expect(")")
        self.expect("from")
        start = self.name()
        self.expect("..")
        end = self.name()
        self.expect("to")
        return HandlerEntry(t, start, end, self.name())

    def block(self) -> BasicBlock:
        label = self.name()
        self.expect(":")
        insts: list[Instruction] = []
        while True:
            t = self.tok
            if t.kind == "value" or (t.kind == "name" and t.text in _INST_KEYWORDS and self.peek().text != ":"):
                insts.append(self.instruction())
            else:
                break
        return BasicBlock(label, tuple(insts))

    def instruction(self) -> Instruction:
        if self.tok.kind == "value":
            dest = self.value()
            self.expect("=")
            return self.defining(dest)
        kw = self.name()
        if kw == "store":
            v = self.value()
            self.expect("->")
            return Store(v, self.pointer())
        if kw == "putfield":
            o = self.value()
            self.expect(".")
            f = self.name()
            self.expect("<-")
            return PutField(o, f, self.value())
        if kw == "call":
            return self.static_call(None)
        if kw == "callv":
            return self.virtual_call(None)
        if kw == "ret":
            if self.tok.kind == "value" and self.peek().text != "=":
                return Ret(self.value())
            return Ret(None)
        if kw == "br":
            return Br(self.name())
        if kw == "condbr":
            c = self.value()
            self.expect(",")
            a = self.name()
            self.expect(",")
            return CondBr(c, a, self.name())
        if kw == "throw":
            return Throw(self.value())
        raise self.error(f"unknown instruction {kw!r}")  # pragma: no cover

    def defining(self, dest: str) -> Instruction:
        op_tok = self.tok
        op = self.name()
        if op == "const.str":
            t = self.expect_kind("string", "string literal")
            return ConstStr(dest, json.loads(t.text))
        if op == "const.int":
            return ConstInt(dest, int(self.expect_kind("int", "integer literal").text))
        if op == "load":
            return Load(dest, self.pointer())
        if op == "bitcast":
            s = self.value()
            self.expect(":")
            return BitCast(dest, s, self.type_name())
        if op == "phi":
            t = self.type_name()
            arms = [self.phi_arm()]
            while self.at(","):
                self.advance()
                arms.append(self.phi_arm())
            return Phi(dest, t, tuple(arms))
        if op == "getfield":
            o = self.value()
            self.expect(".")
            return GetField(dest, o, self.name())
        if op == "new":
            return New(dest, self.type_name())
        if op == "call":
            return self.static_call(dest)
        if op == "callv":
            return self.virtual_call(dest)
        raise self.error(f"unknown operation {op!r}", op_tok)

    def phi_arm(self) -> tuple[str, str]:
        self.expect("[")
        v = self.value()
        self.expect(",")
        lbl = self.name()
        self.expect("]")
        return v, lbl

    def args(self) -> tuple[str, ...]:
        self.expect("(")
        out: list[str] = []
        if not self.at(")"):
            out.append(self.value())
            while self.at(","):
                self.advance()
                out.append(self.value())
        self.expect(")")
        return tuple(out)

    def static_call(self, dest: Optional[str]) -> CallStatic:
        callee = self.global_ref()
        return CallStatic(dest, callee, self.args())

    def virtual_call(self, dest: Optional[str]) -> CallVirtual:
        recv = self.value()
        self.expect(".")
        method = self.name()
        return CallVirtual(dest, recv, method, self.args())


def prelude_text() -> str:
    return resources.files("cryptoscan.cir").joinpath("prelude.cir").read_text(encoding="utf-8")


def parse_sources(
        sources: Iterable[tuple[str, str]],
        *,
        include_prelude: bool = True,
        validate: bool = True,
) -> Program:
    """Parse and link several CIR texts into one :class:`Program`.

    ``sources`` is a sequence of ``(filename, text)``.  Identical extern
    declarations may repeat across files; any other redefinition is an error.
    """
    from .validate import ValidationError, validate_program

    units = list(sources)
    if include_prelude:
        units.insert(0, ("<prelude>", prelude_text()))
    classes: list[ClassDecl] = []
    funcs: list[FunctionDef] = []
    externs: list[ExternDecl] = []
    seen_ext: dict[tuple, ExternDecl] = {}
    seen_names: dict[str, str] = {}
    for filename, text in units:
        p = _Parser(text, filename)
        cls, fns, exts = p.parse()
        for c in cls:
            if c.name in seen_names:
                raise ParseError(f"duplicate definition of class {c.name}", c.line, 1, filename)
            seen_names[c.name] = "class"
            classes.append(c)
        for e in exts:
            key = (e.name, e.arity) if not e.is_class else (e.name, None)
            prev = seen_ext.get(key)
            if prev is not None:
                if prev != e:
                    raise ParseError(f"conflicting extern declaration for {e.name}", 0, 0, filename)
                continue
            seen_ext[key] = e
            externs.append(e)
        for f in fns:
            if f.name in seen_names:
                raise ParseError(f"duplicate definition of @{f.name}", f.line, 1, filename)
            seen_names[f.name] = "func"
            funcs.append(f)
    class_names = {c.name for c in classes}
    ext_classes = {e.name for e in externs if e.is_class}
    for c in classes:
        if c.name in ext_classes:
            raise ParseError(f"class {c.name} declared both extern and defined", c.line, 1)
    funcs = [_settle_kind(f, class_names) for f in funcs]
    program = Program(classes, funcs, externs)
    _check_type_refs(program)
    if validate:
        diags = validate_program(program)
        if diags:
            raise ValidationError(diags)
    return program


def _settle_kind(f: FunctionDef, class_names: set[str]) -> FunctionDef:
    if f.kind != "pending":
        return f
    kind = "instance" if f.owner in class_names and f.simple_name != "<clinit>" else "static"
    return FunctionDef(f.name, f.params, f.return_type, kind, f.blocks, f.handlers, f.source_file, f.line)


def _check_type_refs(p: Program) -> None:
    def check(t: Optional[str], where: str, line: int = 0, filename: str = "<input>") -> None:
        if t is not None and not p.type_exists(t):
            raise ParseError(f"unknown type reference {t!r} in {where}", line, 1, filename)

    for c in p.classes:
        for f in c.fields:
            check(f.type, f"field {c.name}.{f.name}", c.line)
    for e in p.externs:
        if not e.is_class:
            for t in e.params or ():
                check(t, f"extern @{e.name}")
            check(e.return_type, f"extern @{e.name}")
    for fn in p.functions:
        for _, t in fn.params:
            check(t, f"@{fn.name}", fn.line, fn.source_file)
        check(fn.return_type, f"@{fn.name}", fn.line, fn.source_file)
        for h in fn.handlers:
            check(h.caught_type, f"handler in @{fn.name}", fn.line, fn.source_file)
        for loc, inst in fn.iter_instructions():
            t = getattr(inst, "type", None)
            if t is not None:
                check(t, str(loc), fn.line, fn.source_file)


def parse_program(text: str, *, filename: str = "<input>", include_prelude: bool = True,
                  validate: bool = True) -> Program:
    return parse_sources([(filename, text)], include_prelude=include_prelude, validate=validate)


def load_program(paths: Iterable[str], *, include_prelude: bool = True, validate: bool = True) -> Program:
    sources = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            sources.append((str(path), fh.read()))
    return parse_sources(sources, include_prelude=include_prelude, validate=validate)


__all__ = ["CIRError", "ParseError", "parse_program", "parse_sources", "load_program", "prelude_text", "PRIMITIVES"]
