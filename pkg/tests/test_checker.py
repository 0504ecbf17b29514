import pytest
from hypothesis import given

from generators import formulas
from traceforge import checker, lp, tableau, tptp
from traceforge.checker import CannotInfer, check_declarations, convertible, infer_type
from traceforge.encoder import Encoder, encode_signature, extract_signature
from traceforge.lp import App, Const, Lam, Let, Pi, Type, Var, lc


@pytest.fixture(scope="module")
def logic():
    return check_declarations(lp.logic_signature(), module="logic")


def sig_context(formulas_, logic_ctx):
    sig = extract_signature(formulas_)
    return check_declarations(encode_signature(sig), logic_ctx, module="sig")


def proof(t):
    return App(lc("Proof"), t)


def test_prelude_checks(logic):
    assert "logic.nnpp" in logic.symbols
    assert logic.modules == {"logic"}


def test_sort_confusion_rejected(logic):
    with pytest.raises(checker.TypeError):
        check_declarations(lp.parse_decl("definition bad : logic.prop := logic.iota"), logic)


def test_symbol_type_must_be_a_sort(logic):
    with pytest.raises(checker.TypeError):
        check_declarations(lp.parse_decl("symbol k : logic.iota"), logic)


def test_unknown_names(logic):
    with pytest.raises(checker.UnboundName):
        check_declarations(lp.parse_decl("symbol k : logic.nope"), logic)
    with pytest.raises(checker.UnboundName):
        check_declarations([lp.RequireDecl("missing")], logic)


def test_rule_checks(logic):
    with pytest.raises(checker.TypeError):
        check_declarations(lp.parse_decl("rule logic.Proof (logic.imp &a &a) --> logic.Proof &a"),
                           logic)
    with pytest.raises(checker.TypeError):
        check_declarations(lp.parse_decl("rule logic.Proof &a --> logic.Proof &b"), logic)


def test_implication_rule(logic):
    a, b = lc("top"), lc("bot")
    assert convertible(proof(lp.app(lc("imp"), a, b)), lp.arrow(proof(a), proof(b)), logic)
    assert not convertible(proof(lp.app(lc("imp"), a, b)), lp.arrow(proof(b), proof(a)), logic)


def test_chain_convertibility(logic, set001_text):
    from traceforge import trace
    from traceforge.subproblem import make_subproblem, split_subproblem
    t = trace.load_trace(set001_text)
    d = trace.build_dag(t)
    ctx = sig_context([s.formula for s in t.steps], logic)
    enc = Encoder("sig")
    sp = make_subproblem(t, d, "c_5")
    premises, conclusion = split_subproblem(sp)
    arrows = lp.arrows(*[proof(enc.formula(p)) for p in premises], proof(enc.formula(conclusion)))
    assert convertible(proof(enc.formula(sp.conjecture)), arrows, ctx)


def test_beta(logic):
    ident = Lam("x", lc("prop"), Var("x"))
    assert convertible(App(ident, lc("top")), lc("top"), logic)
    assert infer_type(App(ident, lc("top")), logic) == lc("prop")


def test_infer_examples(logic):
    assert infer_type(proof(lc("top")), logic) == Type()
    t = Lam("x", lc("prop"), Var("x"))
    assert convertible(infer_type(t, logic), lp.arrow(lc("prop"), lc("prop")), logic)
    with pytest.raises(CannotInfer):
        infer_type(Lam("x", None, Var("x")), logic)


def test_definitions_unfold_lazily(logic):
    ctx = check_declarations(lp.parse_decl(
        "definition T : logic.prop := logic.imp logic.top logic.top\n"
        "definition t : logic.Proof T := \\h : logic.Proof logic.top, h"), logic, module="m")
    assert convertible(Const("m.T"), lp.app(lc("imp"), lc("top"), lc("top")), ctx)


def test_wrong_proof_rejected(logic):
    text = ("definition delta : logic.Proof (logic.imp logic.top logic.bot) := "
            "\\h : logic.Proof logic.top, h")
    with pytest.raises(checker.TypeError):
        check_declarations(lp.parse_decl(text), logic, module="bad")


def test_module_loaded_twice(logic):
    with pytest.raises(checker.CheckError):
        check_declarations([], logic, module="logic")


def reduce_once(t):
    """Contract the leftmost-outermost β or let redex, or return None."""
    if isinstance(t, Let):
        return checker.instantiate(t.var, t.body, t.value)
    if isinstance(t, App):
        if isinstance(t.fn, Lam):
            return checker.instantiate(t.fn.var, t.fn.body, t.arg)
        r = reduce_once(t.fn)
        if r is not None:
            return App(r, t.arg)
        r = reduce_once(t.arg)
        return None if r is None else App(t.fn, r)
    if isinstance(t, Lam):
        r = reduce_once(t.body)
        return None if r is None else Lam(t.var, t.annot, r)
    return None


SAMPLES = [
    "(![X]: (p(X) => q(X))) => p(a) => q(a)",
    "(?[X]: ![Y]: r(X,Y)) => (![Y]: ?[X]: r(X,Y))",
    "(a = b) => p(a) => p(b)",
    "~(p & q) => (~p | ~q)",
]


@pytest.mark.parametrize("text", SAMPLES)
def test_subject_reduction_on_prover_terms(logic, text):
    f = tptp.parse_formula(text)
    ctx = sig_context([f], logic)
    t = tableau.prove(f).term
    ty = infer_type(t, ctx)
    for _ in range(6):
        t = reduce_once(t)
        if t is None:
            break
        assert convertible(infer_type(t, ctx), ty, ctx)


@given(formulas(), formulas(), formulas())
def test_conversion_is_an_equivalence(f, g, h):
    closed = [tableau_close(x) for x in (f, g, h)]
    ctx = sig_context(closed, LOGIC)
    enc = Encoder("sig")
    a, b, c = (proof(enc.formula(x)) for x in closed)
    imp = proof(enc.formula(tptp.Implies(closed[0], closed[1])))
    arr = lp.arrow(a, b)
    assert convertible(a, a, ctx)
    assert convertible(imp, arr, ctx) and convertible(arr, imp, ctx)
    assert convertible(a, b, ctx) == convertible(b, a, ctx)
    if convertible(a, b, ctx) and convertible(b, c, ctx):
        assert convertible(a, c, ctx)


LOGIC = check_declarations(lp.logic_signature(), module="logic")


def tableau_close(f):
    for v in tptp.free_variables(f):
        f = tptp.Forall(v, f)
    return f
