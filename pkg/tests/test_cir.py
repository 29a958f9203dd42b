import itertools
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cryptoscan.cir import ParseError, ValidationError, is_castable, parse_program, print_program, validate_program
from cryptoscan.cir.model import CallStatic, CallVirtual, ConstStr, Location, Phi
from cryptoscan.cir.types import UnresolvedType

MINIMAL = "func @main() -> void { bb0: ret }"


def test_minimal_program():
    p = parse_program(MINIMAL)
    assert [f.name for f in p.functions] == ["main"]
    assert len(p.functions[0].blocks) == 1


def test_key_chain_fixture_parses(corpus):
    case = next(c for c in corpus if "fig4" in c.tags)
    p = case.program
    assert len(p.functions) == 3
    assert validate_program(p) == []


def test_phi_predecessor_mismatch():
    text = """
func @f(%a : int) -> int {
bb0:
  br bb1
bb1:
  %x = phi int [%a, bb9]
  ret %x
}
"""
    with pytest.raises(ValidationError) as err:
        parse_program(text)
    assert any("phi predecessor mismatch" in d.message for d in err.value.diagnostics)


def test_two_terminators_is_one_diagnostic():
    text = "func @f() -> void {\nbb0:\n  ret\n  ret\n}\n"
    p = parse_program(text, validate=False)
    diags = validate_program(p)
    assert len(diags) == 1
    assert "more than one terminator" in diags[0].message
    assert diags[0].location == Location("f", "bb0", 0)


def _def_before_use_scan(text: str) -> int:
    """Independent per-block scan: uses of a value that the same block defines later."""
    bad = 0
    blocks: list[list[str]] = []
    for raw in text.splitlines():
        line = raw.split(";")[0].strip()
        if re.fullmatch(r"\w+:", line):
            blocks.append([])
        elif blocks and line and line != "}":
            blocks[-1].append(line)
    for lines in blocks:
        defs = [re.match(r"%(\w+) =", ln).group(1) if re.match(r"%(\w+) =", ln) else None for ln in lines]
        for i, ln in enumerate(lines):
            rhs = ln.split("=", 1)[1] if defs[i] else ln
            for used in re.findall(r"%(\w+)", rhs):
                if used in defs[i + 1:]:
                    bad += 1
    return bad


def test_use_before_def_is_one_diagnostic():
    text = """
func @f() -> void {
bb0:
  %b = callv %a.trim()
  %a = const.str "x"
  ret
}
"""
    p = parse_program(text, validate=False)
    diags = validate_program(p)
    assert len(diags) == _def_before_use_scan(text) == 1
    assert "before its definition" in diags[0].message


def test_parse_error_has_position():
    with pytest.raises(ParseError) as err:
        parse_program("func @f() -> void {\nbb0:\n  %x = bogus 1\n  ret\n}\n")
    assert err.value.line == 3
    assert err.value.column > 0


def test_duplicate_function_rejected():
    with pytest.raises(ParseError):
        parse_program(MINIMAL + "\n" + MINIMAL)


def test_unknown_type_rejected():
    with pytest.raises((ParseError, ValidationError)):
        parse_program("func @f(%x : NoSuchType) -> void { bb0: ret }")


def test_entry_block_must_be_unique():
    text = "func @f() -> void {\nbb0:\n  br bb0\n}\n"
    with pytest.raises(ValidationError) as err:
        parse_program(text)
    assert any("entry block" in d.message for d in err.value.diagnostics)


def test_unreachable_block():
    text = "func @f() -> void {\nbb0:\n  ret\nbb1:\n  ret\n}\n"
    with pytest.raises(ValidationError):
        parse_program(text)


def test_cyclic_inheritance():
    text = "class A extends B {\n}\nclass B extends A {\n}\n" + MINIMAL
    with pytest.raises(ValidationError) as err:
        parse_program(text)
    assert any("cyclic" in d.message for d in err.value.diagnostics)


def test_staticinit_must_take_no_parameters():
    text = """
class C {
  staticinit @C.init
}
func @C.init(%x : int) -> void static {
bb0:
  ret
}
"""
    with pytest.raises(ValidationError):
        parse_program(text)


def test_handler_unknown_block():
    text = """
func @f() -> void {
bb0:
  ret
handler (java.lang.Exception) from bb0 .. bb0 to bb7
}
"""
    with pytest.raises(ValidationError):
        parse_program(text)


def test_call_kinds_record_result():
    p = parse_program("""
func @g() -> String {
bb0:
  %s = const.str "a"
  ret %s
}
func @f() -> void {
bb0:
  %x = call @g()
  call @g()
  %t = callv %x.trim()
  ret
}
""")
    insts = p.function("f").blocks[0].instructions
    assert isinstance(insts[0], CallStatic) and insts[0].dest == "x"
    assert isinstance(insts[1], CallStatic) and insts[1].dest is None
    assert isinstance(insts[2], CallVirtual) and insts[2].receiver == "x"


def test_instance_function_has_receiver():
    p = parse_program("""
class K {
  field v : String
}
func @K.get() -> String {
bb0:
  %v = getfield %this.v
  ret %v
}
""")
    f = p.function("K.get")
    assert f.is_instance
    assert f.formals()[0] == ("this", "K")


def test_comments_and_string_escapes():
    p = parse_program('; leading comment\nfunc @f() -> void {\nbb0:\n  %s = const.str "a;b\\"c" ; trailing\n  ret\n}\n')
    inst = p.function("f").blocks[0].instructions[0]
    assert isinstance(inst, ConstStr) and inst.value == 'a;b"c'


def test_round_trip_corpus(corpus):
    for case in corpus:
        p = case.program
        again = parse_program(print_program(p, externs=False), filename=case.name)
        assert again.functions == p.functions, case.name
        assert again.classes == p.classes, case.name


# ---- is_castable ----------------------------------------------------------

HIER = parse_program("""
class Base {
}
class Mid extends Base {
}
class Leaf extends Mid {
}
class Other {
}
class SubCipher extends javax.crypto.Cipher {
}
""" + MINIMAL)

TYPES = ["int", "long", "bool", "bytes", "String", "Base", "Mid", "Leaf", "Other", "SubCipher",
         "javax.crypto.Cipher", "java.lang.Object"]


def test_castable_examples():
    assert is_castable("String", "String", HIER)
    assert not is_castable("String", "int", HIER)
    assert is_castable("SubCipher", "javax.crypto.Cipher", HIER)
    assert is_castable("int", "long", HIER)
    assert is_castable("Leaf", "Base", HIER)
    assert is_castable("Base", "Leaf", HIER)
    assert not is_castable("Leaf", "Other", HIER)


def test_castable_unresolved():
    with pytest.raises(UnresolvedType):
        is_castable("Nope", "String", HIER)


def _closure_oracle() -> dict[str, set[str]]:
    """Transitive closure over the declared extends edges, computed independently."""
    direct = {"Mid": {"Base"}, "Leaf": {"Mid"}, "SubCipher": {"javax.crypto.Cipher"}}
    up = {t: {t} for t in TYPES}
    changed = True
    while changed:
        changed = False
        for t in TYPES:
            for s in list(up[t]):
                for nxt in direct.get(s, ()):
                    if nxt not in up[t]:
                        up[t].add(nxt)
                        changed = True
    return up


def test_castable_matches_closure_oracle():
    up = _closure_oracle()
    numeric = {"int", "long"}
    textual = {"String", "bytes"}
    for a, b in itertools.product(TYPES, TYPES):
        if b == "java.lang.Object" or a == "java.lang.Object":
            continue
        expected = (a == b or b in up[a] or a in up[b] or {a, b} <= numeric or {a, b} <= textual)
        assert is_castable(a, b, HIER) == expected, (a, b)


@given(st.sampled_from(TYPES), st.sampled_from(TYPES))
def test_castable_reflexive_and_symmetric(a, b):
    assert is_castable(a, a, HIER)
    assert is_castable(a, b, HIER) == is_castable(b, a, HIER)


# ---- round-trip property over generated straight-line programs -------------

_names = st.text(alphabet="abcdefgh", min_size=1, max_size=4)


@st.composite
def straight_line(draw):
    n = draw(st.integers(1, 8))
    lines = ["func @gen(%p : String) -> String {", "bb0:"]
    live = ["p"]
    for i in range(n):
        kind = draw(st.sampled_from(["str", "int", "trim", "phi"]))
        v = f"v{i}"
        if kind == "str":
            lit = draw(st.text(alphabet="ab \\\"xyz;", max_size=6)).replace("\\", "\\\\").replace('"', '\\"')
            lines.append(f'  %{v} = const.str "{lit}"')
            live.append(v)
        elif kind == "int":
            lines.append(f"  %{v} = const.int {draw(st.integers(-5, 10**6))}")
        else:
            src = draw(st.sampled_from(live))
            lines.append(f"  %{v} = callv %{src}.trim()")
            live.append(v)
    cond = "c0"
    lines += [f"  %{cond} = const.int 1", f"  condbr %{cond}, bb1, bb2", "bb1:", "  br bb3", "bb2:", "  br bb3",
              "bb3:", f"  %m = phi String [%{live[-1]}, bb1], [%p, bb2]", "  ret %m", "}"]
    return "\n".join(lines) + "\n"


@settings(max_examples=60, deadline=None)
@given(straight_line())
def test_print_parse_round_trip(text):
    p = parse_program(text)
    q = parse_program(print_program(p, externs=False))
    assert p.functions == q.functions
    phis = [i for i in q.function("gen").block("bb3").instructions if isinstance(i, Phi)]
    assert len(phis) == 1
