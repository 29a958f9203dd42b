import pytest
from hypothesis import given
from hypothesis import strategies as st

from cryptoscan.analysis import AnalysisConfig, analyze
from cryptoscan.benchkit.oracle import OracleConfig, call_depth, oracle_analyze
from cryptoscan.callgraph import build_call_graph, scc_bottom_up_order
from cryptoscan.cir import parse_program
from cryptoscan.cir.model import Location, Phi, PutField, Store
from cryptoscan.detectors.group1 import match_sinks
from cryptoscan.detectors.rules import RuleSet
from cryptoscan.ifds import (
    ZERO,
    ConstantSource,
    DataFact,
    EngineContext,
    EscapedToEntry,
    Exhausted,
    FactBudgetExceeded,
    FlowContractError,
    Sanitized,
    SummaryStore,
    VerifierHit,
    call_flow,
    exit_universe,
    flow,
    make_fact,
    pass_args,
    phi_flow,
    return_val,
    solve_backward,
    summarize_all,
    terminal_events,
)
from cryptoscan.ifds.witness import Step, Witness, concat, flatten

RULES = RuleSet()
L = Location("f", "bb0", 0)


def ctx_for(p, refinements=True, k=2, budget=100_000):
    ctx = EngineContext(p, RULES, SummaryStore(), refinements, k, budget)
    g = build_call_graph(p)
    summarize_all(ctx, scc_bottom_up_order(g), g)
    return ctx


def one_inst(body: str, params: str = "", extra: str = ""):
    p = parse_program(f"{extra}func @f({params}) -> void {{\nbb0:\n{body}\n  ret\n}}\n")
    return p, p.function("f")


# ---- facts -----------------------------------------------------------------

def test_fact_truncation_and_order():
    f = make_fact("o", ("a", "b", "c"), 2)
    assert f.fields == ("a", "b")
    assert DataFact("o", ("a",)) == make_fact("o", ("a",))
    assert ZERO.is_zero and not DataFact("x").is_zero
    assert DataFact("@C.f").is_static
    assert sorted([DataFact("b"), DataFact("a", ("x",)), DataFact("a")])[0] == DataFact("a")


@given(st.lists(st.sampled_from("abc"), max_size=6), st.integers(0, 4))
def test_fact_universe_is_finite(fields, k):
    f = make_fact("v", tuple(fields), k)
    assert len(f.fields) <= k


# ---- flow ------------------------------------------------------------------

def test_const_emits_source():
    p, f = one_inst('  %kb = const.str "defaultkey"')
    inst = f.blocks[0].instructions[0]
    loc = Location("f", "bb0", 0)
    outs, evs = flow(inst, DataFact("kb"), loc)
    assert outs == [] and evs == [ConstantSource("defaultkey", "String", loc)]


def test_const_int_and_field_fact():
    p, f = one_inst("  %n = const.int 20")
    inst = f.blocks[0].instructions[0]
    assert flow(inst, DataFact("n"), L)[1] == [ConstantSource(20, "int", L)]
    assert flow(inst, DataFact("n", ("x",)), L) == ([], [])


def test_unrelated_fact_identity():
    p, f = one_inst("  store %v -> @C.f", "%v : String", "class C {\n  static field f : String\n}\n")
    inst = f.blocks[0].instructions[0]
    assert isinstance(inst, Store)
    assert flow(inst, DataFact("q"), L) == ([DataFact("q")], [])
    assert flow(inst, DataFact("@C.f"), L) == ([DataFact("v")], [])


def test_load_bitcast_getfield():
    p, f = one_inst("  %d = load @C.f\n  %b = bitcast %d : bytes\n  %h = new H\n  %g = getfield %h.k",
                    extra="class C {\n  static field f : String\n}\nclass H {\n  field k : String\n}\n")
    load, cast, new, get = f.blocks[0].instructions[:4]
    assert flow(load, DataFact("d", ("x",)), L)[0] == [DataFact("@C.f", ("x",))]
    assert flow(cast, DataFact("b"), L)[0] == [DataFact("d")]
    assert flow(get, DataFact("g"), L)[0] == [DataFact("h", ("k",))]
    assert flow(new, DataFact("h", ("k",)), L) == ([], [Exhausted(L)])


def test_putfield_weak_on_formal_strong_on_new():
    p = parse_program("""
class Box {
  field key : String
}
func @f(%o : Box, %v : String) -> void {
bb0:
  putfield %o.key <- %v
  %n = new Box
  putfield %n.key <- %v
  ret
}
""")
    info = p.info("f")
    weak, _, strong = p.function("f").blocks[0].instructions[:3]
    assert isinstance(weak, PutField)
    assert flow(weak, DataFact("o", ("key",)), L, info)[0] == [DataFact("v"), DataFact("o", ("key",))]
    assert flow(strong, DataFact("n", ("key",)), L, info)[0] == [DataFact("v")]
    assert flow(weak, DataFact("o", ("other",)), L, info)[0] == [DataFact("o", ("other",))]


def test_weak_update_matches_oracle_on_two_callers(corpus):
    case = next(c for c in corpus if c.name == "weak_update_two_callers")
    rep = analyze(case.program)
    orc = oracle_analyze(case.program)
    for idx, res in rep.details["results"].items():
        assert terminal_events(res.events) == set(orc.events[idx])
    assert [s.literal for s in rep.findings[0].sources] == ["fixedkey12345678"]


def test_flow_contract_errors():
    p, f = one_inst('  %s = const.str "a"\n  %t = callv %s.trim()')
    call = f.blocks[0].instructions[1]
    with pytest.raises(FlowContractError):
        flow(call, DataFact("t"), L)
    with pytest.raises(FlowContractError):
        flow(f.blocks[0].instructions[0], ZERO, L)


# ---- phi -------------------------------------------------------------------

PHI = parse_program("""
func @f(%c : int) -> String {
bb0:
  condbr %c, bb1, bb2
bb1:
  %c1 = const.str "a"
  br bb3
bb2:
  %c2 = const.str "b"
  br bb3
bb3:
  %k = phi String [%c1, bb1], [%c2, bb2]
  ret %k
}
""")


def test_phi_flow_arms():
    phi = PHI.function("f").block("bb3").instructions[0]
    assert isinstance(phi, Phi)
    assert phi_flow(phi, DataFact("k"), "bb1") == [DataFact("c1")]
    assert phi_flow(phi, DataFact("k"), "bb2") == [DataFact("c2")]
    assert phi_flow(phi, DataFact("z"), "bb1") == [DataFact("z")]
    with pytest.raises(FlowContractError):
        phi_flow(phi, DataFact("k"), "bb0")


def test_choice_key_both_arms_match_flowset_oracle(corpus):
    case = next(c for c in corpus if "listing1" in c.tags)
    rep = analyze(case.program)
    orc = oracle_analyze(case.program)
    evs = terminal_events(rep.details["results"][0].events)
    assert evs == set(orc.events[0])
    kinds = {type(e) for e in evs}
    assert ConstantSource in kinds and Sanitized in kinds
    assert len(rep.findings) == 1 and rep.findings[0].sources[0].literal == "defaultkey"


# ---- call_flow -------------------------------------------------------------

def _call(body, params=""):
    p, f = one_inst(body, params)
    insts = f.blocks[0].instructions
    call = insts[-2] if len(insts) > 1 else insts[0]
    info = p.info("f")
    return call, info.call_target(call).extern


def test_getbytes_utf8_refined():
    call, ext = _call('  %enc = const.str "UTF-8"\n  %kb = callv %key.getBytes(%enc)', "%key : String")
    assert call_flow(call, DataFact("kb"), L, ext, RULES, True) == ([DataFact("key")], [])
    outs, _ = call_flow(call, DataFact("kb"), L, ext, RULES, False)
    assert outs == [DataFact("key"), DataFact("enc")]


def test_keystore_load_refined_drops_receiver():
    call, ext = _call("  callv %ks.load(%stream, %pw)",
                      "%ks : java.security.KeyStore, %stream : java.io.InputStream, %pw : String")
    assert call_flow(call, DataFact("ks"), L, ext, RULES, True) == ([DataFact("stream"), DataFact("pw")], [])
    assert call_flow(call, DataFact("ks"), L, ext, RULES, False) == ([DataFact("ks")], [])


def test_static_result_refined_is_exhausted():
    call, ext = _call('  %n = const.str "X"\n  %v = call @java.lang.System.getenv(%n)')
    assert call_flow(call, DataFact("v"), L, ext, RULES, True) == ([], [Exhausted(L)])
    assert call_flow(call, DataFact("v"), L, ext, RULES, False) == ([DataFact("n")], [])


def test_secure_random_sanitizes_and_random_verifies():
    call, ext = _call("  %n = callv %rnd.nextInt()", "%rnd : java.security.SecureRandom")
    assert call_flow(call, DataFact("n"), L, ext, RULES) == ([], [Sanitized(L, ext.name, False)])
    call, ext = _call("  %n = callv %rnd.nextInt()", "%rnd : java.util.Random")
    assert call_flow(call, DataFact("n"), L, ext, RULES) == ([], [VerifierHit(L, ext.name)])
    call, ext = _call("  %s = callv %rnd.generateSeed(%k)", "%rnd : java.security.SecureRandom, %k : int")
    assert call_flow(call, DataFact("s"), L, ext, RULES) == ([], [Sanitized(L, ext.name, True)])


def test_call_flow_unrelated_identity():
    call, ext = _call("  %t = callv %s.trim()", "%s : String")
    assert call_flow(call, DataFact("zz"), L, ext, RULES) == ([DataFact("zz")], [])


def test_stringbuilder_append_is_a_refinement_miss():
    # The refined virtual-with-result rule keeps only the receiver, so data appended
    # through an argument is not followed; unrefined mode still finds it.
    text = open("tests/fixtures/builder_key.cir").read()
    p = parse_program(text)
    assert analyze(p).findings == []
    (f,) = analyze(p, AnalysisConfig(refinements=False)).findings
    assert [s.literal for s in f.sources] == ["part-one"]


# ---- return_val / pass_args -----------------------------------------------

ID = parse_program("""
class Crypto {
  field defaultKey : String
}
func @id(%p0 : String) -> String {
bb0:
  ret %p0
}
func @Crypto.m() -> void {
bb0:
  ret
}
class C {
  static field count : int
}
func @caller(%x : String, %ks : Crypto) -> void {
bb0:
  %r = call @id(%x)
  callv %ks.m()
  ret
}
""")


def test_identity_function_summary():
    ctx = ctx_for(ID)
    table = ctx.store.table("id")
    assert set(table) == {DataFact("$ret"), DataFact("@C.count")}
    assert set(table[DataFact("$ret")].entry) == {DataFact("p0")}
    assert table[DataFact("$ret")].events == {}
    call = ID.function("caller").blocks[0].instructions[0]
    exits, keep = return_val(call, DataFact("r"), ID.function("id"))
    assert exits == [DataFact("$ret")] and not keep
    assert pass_args(call, DataFact("p0"), ID.function("id")) == DataFact("x")
    reach = solve_backward(ctx, Location("caller", "bb0", 1), DataFact("r"))
    assert set(reach.escapes) == {DataFact("x")}


def test_pass_args_receiver_and_static():
    site = ID.function("caller").blocks[0].instructions[1]
    m = ID.function("Crypto.m")
    assert pass_args(site, DataFact("this", ("defaultKey",)), m) == DataFact("ks", ("defaultKey",))
    assert pass_args(site, DataFact("@C.count"), m) == DataFact("@C.count")
    assert return_val(site, DataFact("ks"), m) == ([], True)
    assert return_val(site, DataFact("ks", ("defaultKey",)), m) == ([DataFact("this", ("defaultKey",))], False)


def test_pass_args_matches_substitution_oracle(corpus):
    for case in corpus:
        p = case.program
        for func in p.functions:
            info = p.info(func.name)
            for loc, inst in func.iter_instructions():
                target = info.call_target(inst) if hasattr(inst, "args") else None
                if target is None or target.is_extern:
                    continue
                actuals = ([inst.receiver] if hasattr(inst, "receiver") else []) + list(inst.args)
                for cname in target.callees:
                    callee = p.function(cname)
                    formals = [n for n, _ in callee.formals()]
                    for i, fname in enumerate(formals):
                        got = pass_args(inst, DataFact(fname, ("x",)), callee)
                        assert got == DataFact(actuals[i], ("x",))


def test_getkey_property_read_is_absorbed(corpus):
    case = next(c for c in corpus if "listing3_nocaller" in c.tags)
    ctx = ctx_for(case.program)
    summ = ctx.store.lookup("PassCryptoKey.getKey", DataFact("$ret"))
    assert not any(isinstance(e, ConstantSource) for e in summ.events)
    assert summ.entry == {}


def test_method1_escapes_key_and_default_key(corpus):
    case = next(c for c in corpus if "listing3_nocaller" in c.tags)
    p = case.program
    ctx = ctx_for(p)
    seed = next(s for s in match_sinks(p, RULES) if s.function == "Crypto.method1" and s.rule.rule_id == "R6")
    reach = solve_backward(ctx, seed.location, seed.fact)
    assert set(reach.escapes) == {DataFact("key"), DataFact("this", ("defaultKey",))}


def test_three_deep_chain_matches_oracle(corpus):
    case = next(c for c in corpus if c.name == "deep_md5_chain")
    assert call_depth(case.program) == 3
    rep = analyze(case.program)
    orc = oracle_analyze(case.program)
    evs = terminal_events(rep.details["results"][0].events)
    assert evs == set(orc.events[0])
    assert [e.literal for e in evs if isinstance(e, ConstantSource)] == ["MD5"]


# ---- summaries ---------------------------------------------------------------

def test_exit_universe_shapes():
    p = parse_program("""
class Inner {
  field iv : bytes
}
class Outer {
  field inner : Inner
  field name : String
}
class G {
  static field flag : String
}
func @Outer.make(%n : String) -> Outer {
bb0:
  %o = new Outer
  ret %o
}
""")
    u = exit_universe(p, "Outer.make", 2)
    assert DataFact("$ret") in u
    assert DataFact("$ret", ("inner", "iv")) in u
    assert DataFact("this", ("name",)) in u
    assert DataFact("n") not in u and DataFact("this") not in u
    assert DataFact("@G.flag") in u


REC = parse_program("""
class Holder {
  field key : String
}
func @R.a(%h : Holder, %d : int) -> void static {
bb0:
  condbr %d, bb1, bb2
bb1:
  call @R.b(%h, %d)
  br bb2
bb2:
  ret
}
func @R.b(%h : Holder, %d : int) -> void static {
bb0:
  %s = const.str "recursive-key-00"
  putfield %h.key <- %s
  call @R.a(%h, %d)
  ret
}
func @R.main() -> void {
bb0:
  %h = new Holder
  %d = const.int 1
  call @R.a(%h, %d)
  %k = getfield %h.key
  %kb = callv %k.getBytes()
  %alg = const.str "AES"
  %spec = new javax.crypto.spec.SecretKeySpec
  callv %spec.<init>(%kb, %alg)
  ret
}
""")


def test_recursive_fixpoint_matches_unrolled_oracle():
    rep = analyze(REC)
    store = rep.details["store"]
    assert store.in_scc == {"R.a", "R.b"}
    assert 1 <= store.rounds["R.a"] <= 64
    assert store.explorations["R.a"] == store.rounds["R.a"]
    orc = oracle_analyze(REC, OracleConfig(max_inline=5))
    assert orc.truncated
    for idx, res in rep.details["results"].items():
        assert terminal_events(res.events) == set(orc.events[idx])
    assert [s.literal for f in rep.findings for s in f.sources] == ["recursive-key-00"]


def test_summaries_are_deterministic(corpus):
    for case in corpus:
        a = ctx_for(case.program).store
        b = ctx_for(case.program).store
        for fn in a.functions():
            assert a.canonical(fn) == b.canonical(fn)


def test_explored_once_on_corpus(corpus):
    for case in corpus:
        store = analyze(case.program).details["store"]
        for fn, n in store.explorations.items():
            if fn in store.in_scc:
                assert n == store.rounds[fn]
            else:
                assert n == 1, (case.name, fn)


def test_fact_budget_is_loud(corpus):
    case = next(c for c in corpus if "fig4" in c.tags)
    with pytest.raises(FactBudgetExceeded):
        analyze(case.program, AnalysisConfig(budget=3))


# ---- solver ----------------------------------------------------------------

def test_key_chain_seed_reaches_defaultkey(corpus):
    case = next(c for c in corpus if "fig4" in c.tags)
    p = case.program
    ctx = ctx_for(p)
    (seed,) = [s for s in match_sinks(p, RULES) if s.rule.rule_id == "R6"]
    reach = solve_backward(ctx, seed.location, seed.fact)
    srcs = [e for e in reach.events if isinstance(e, ConstantSource)]
    assert [e.literal for e in srcs] == ["defaultkey"]
    assert reach.escapes == {}


def test_fresh_extern_value_is_exhausted():
    p = parse_program("""
func @f() -> void {
bb0:
  %n = const.str "K"
  %v = call @java.lang.System.getenv(%n)
  %spec = new javax.crypto.spec.PBEKeySpec
  callv %spec.<init>(%v)
  ret
}
""")
    ctx = ctx_for(p)
    reach = solve_backward(ctx, Location("f", "bb0", 3), DataFact("v"))
    assert list(reach.events) == [Exhausted(Location("f", "bb0", 1))]


def _eligible(case):
    d = call_depth(case.program)
    return d is not None and d <= 5


@pytest.mark.parametrize("fidelity", ["fixed", "paper"])
@pytest.mark.parametrize("refinements", [True, False])
def test_every_seed_matches_oracle_events(corpus, refinements, fidelity):
    checked = 0
    for case in corpus:
        if not _eligible(case):
            continue
        rep = analyze(case.program, AnalysisConfig(refinements=refinements, fidelity=fidelity))
        orc = oracle_analyze(case.program, OracleConfig(refinements=refinements, fidelity=fidelity))
        assert not orc.truncated
        for idx, res in rep.details["results"].items():
            assert terminal_events(res.events) == set(orc.events[idx]), (case.name, idx)
            checked += 1
    assert checked > 50


def test_refinements_only_remove_constants(corpus):
    for case in corpus:
        on = analyze(case.program).details["results"]
        off = analyze(case.program, AnalysisConfig(refinements=False)).details["results"]
        for idx in on:
            c_on = {e for e in on[idx].events if isinstance(e, ConstantSource)}
            c_off = {e for e in off[idx].events if isinstance(e, ConstantSource)}
            if case.name == "map_put_hardcoded":
                continue  # the receiver-to-arguments edge only exists with refinements
            assert c_on <= c_off, case.name


def test_no_events_beyond_sanitizer(corpus):
    # A fact dies at a sanitizer, so no trace may continue past a Sanitized step.
    for case in corpus:
        rep = analyze(case.program)
        for res in rep.details["results"].values():
            for ev, w in res.events.items():
                steps = flatten(w)
                sanit = [s.location for s in steps[:-1] if s.via == "callFlow" and
                         any(isinstance(e, Sanitized) and e.location == s.location for e in res.events)]
                assert not sanit or isinstance(ev, (Sanitized, EscapedToEntry)), case.name


def test_witness_flatten_is_iterative_and_deduplicated():
    w = None
    for i in range(20_000):
        w = Witness(w, Step(Location("f", "bb0", i % 3), "flow"))
    steps = flatten(w)
    assert len(steps) == 20_000
    assert steps[0].location.index == 0 and steps[-1].location.index == 19_999 % 3
    nested = concat(Witness(None, Step(L, "sink")), Witness(None, Step(L, "sink")), Witness(None, Step(L, "flow")))
    assert flatten(nested) == [Step(L, "sink"), Step(L, "flow")]
