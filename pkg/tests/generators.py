"""Random inputs shared by the property tests."""
from __future__ import annotations

import random
from dataclasses import dataclass

from hypothesis import strategies as st

from traceforge import lp
from traceforge.tptp import (
    And, Atom, Equal, Exists, FalseF, Fn, Forall, Implies, Not, Or, TrueF, Var,
)
from traceforge.trace import Inference, NameRef, Opaque, SourceList

# --------------------------------------------------------------------------
# First-order formulas

VARIABLES = ["X", "Y", "Z", "X1", "Y_2"]
CONSTANTS = ["a", "b", "c0", "'quoted name'"]
FUNCTIONS = {"f": 1, "g": 2}
PREDICATES = {"p": 0, "q": 1, "r": 2, "member": 2}


def terms(max_depth: int = 2):
    leaves = st.one_of(st.sampled_from(VARIABLES).map(Var),
                       st.sampled_from(CONSTANTS).map(lambda c: Fn(c)))
    if max_depth == 0:
        return leaves
    sub = terms(max_depth - 1)
    calls = st.sampled_from(sorted(FUNCTIONS)).flatmap(
        lambda f: st.tuples(*([sub] * FUNCTIONS[f])).map(lambda args, f=f: Fn(f, args)))
    return st.one_of(leaves, calls)


def atoms():
    preds = st.sampled_from(sorted(PREDICATES)).flatmap(
        lambda p: st.tuples(*([terms()] * PREDICATES[p])).map(lambda args, p=p: Atom(p, args)))
    return st.one_of(preds, st.builds(Equal, terms(), terms()),
                     st.just(TrueF()), st.just(FalseF()))


def formulas():
    def extend(sub):
        return st.one_of(
            sub.map(Not),
            st.builds(And, sub, sub),
            st.builds(Or, sub, sub),
            st.builds(Implies, sub, sub),
            st.builds(Forall, st.sampled_from(VARIABLES), sub),
            st.builds(Exists, st.sampled_from(VARIABLES), sub),
        )
    return st.recursive(atoms(), extend, max_leaves=12)


# --------------------------------------------------------------------------
# λΠ declarations

LP_VARS = ["x", "y", "h1", "w_2", "A"]
LP_CONSTS = ["logic.prop", "logic.Proof", "logic.imp", "sig.member", "sig.b", "local", "k0"]


@st.composite
def lp_terms(draw, bound=(), depth=3):
    choices = ["const", "type"] + (["var"] if bound else [])
    if depth > 0:
        choices += ["app", "lam", "pi", "arrow", "let"]
    kind = draw(st.sampled_from(choices))
    if kind == "const":
        return lp.Const(draw(st.sampled_from(LP_CONSTS)))
    if kind == "type":
        return lp.Type()
    if kind == "var":
        return lp.Var(draw(st.sampled_from(sorted(bound))))
    if kind == "app":
        return lp.App(draw(lp_terms(bound, depth - 1)), draw(lp_terms(bound, depth - 1)))
    if kind == "arrow":
        return lp.arrow(draw(lp_terms(bound, depth - 1)), draw(lp_terms(bound, depth - 1)))
    x = draw(st.sampled_from(LP_VARS))
    inner = tuple(bound) + (x,)
    if kind == "lam":
        annot = draw(st.one_of(st.none(), lp_terms(bound, depth - 1)))
        return lp.Lam(x, annot, draw(lp_terms(inner, depth - 1)))
    if kind == "pi":
        return lp.Pi(x, draw(lp_terms(bound, depth - 1)), draw(lp_terms(inner, depth - 1)))
    return lp.Let(x, draw(lp_terms(bound, depth - 1)), draw(lp_terms(inner, depth - 1)))


@st.composite
def lp_decls(draw):
    kind = draw(st.sampled_from(["symbol", "definition", "require", "rule"]))
    if kind == "require":
        return lp.RequireDecl(draw(st.sampled_from(["logic", "SET001_x2D1_sig", "c_5"])))
    if kind == "symbol":
        return lp.SymbolDecl(draw(st.sampled_from(["s", "equal_sets", "and", "k0"])), draw(lp_terms()))
    if kind == "rule":
        pvars = draw(st.lists(st.sampled_from(["a", "b", "c"]), min_size=1, max_size=3, unique=True))
        lhs = lp.app(lp.Const("logic.Proof"), lp.app(lp.Const("logic.imp"), *map(lp.Var, pvars)))
        rhs = draw(lp_terms(tuple(pvars), 2))
        return lp.RuleDecl(lhs, rhs)
    params = []
    bound: tuple = ()
    for name in draw(st.lists(st.sampled_from(["p0", "p1", "hyp_c_0"]), max_size=3, unique=True)):
        params.append((name, draw(lp_terms(bound, 2))))
        bound += (name,)
    return lp.DefinitionDecl(draw(st.sampled_from(["delta", "proof_trace", "d1"])), tuple(params),
                             draw(lp_terms(bound, 2)), draw(lp_terms(bound, 3)))


# --------------------------------------------------------------------------
# Source trees

STEP_NAMES = ["c_0", "c_1", "c_2", "c_10", "'quoted step'", "17", "ax"]


def random_source(rng: random.Random, depth: int):
    roll = rng.random()
    if depth == 0 or roll < 0.35:
        if rng.random() < 0.1:
            return Opaque(rng.choice(["introduced(definition)", "file('SET001-1.p',c_0)",
                                      "theory(equality)"]))
        return NameRef(rng.choice(STEP_NAMES))
    if roll < 0.5:
        return SourceList(tuple(random_source(rng, depth - 1) for _ in range(rng.randint(0, 3))))
    rule = rng.choice(["spm", "rw", "cn", "pm", "'quoted rule'"])
    infos = rng.choice(["[status(thm)]", "[]", "[status(thm),[lit(1)]]"])
    parents = tuple(random_source(rng, depth - 1) for _ in range(rng.randint(0, 3)))
    return Inference(rule, infos, parents)


def render_source(s) -> str:
    if isinstance(s, NameRef):
        return s.name
    if isinstance(s, Opaque):
        return s.raw
    if isinstance(s, SourceList):
        return "[" + ",".join(render_source(x) for x in s.items) + "]"
    return (f"inference({s.rule_name},{s.infos},["
            + ",".join(render_source(p) for p in s.parents) + "])")


def source_depth(s) -> int:
    if isinstance(s, SourceList):
        return 1 + max((source_depth(x) for x in s.items), default=0)
    if isinstance(s, Inference):
        return 1 + max((source_depth(x) for x in s.parents), default=0)
    return 0


def all_leaves_oracle(s) -> list[str]:
    """Every NameRef leaf, left to right, then deduplicated."""
    leaves: list[str] = []

    def walk(node):
        if isinstance(node, NameRef):
            leaves.append(node.name)
        elif isinstance(node, SourceList):
            for x in node.items:
                walk(x)
        elif isinstance(node, Inference):
            for x in node.parents:
                walk(x)

    walk(s)
    seen: list[str] = []
    for x in leaves:
        if x not in seen:
            seen.append(x)
    return seen


# --------------------------------------------------------------------------
# Random refutation traces

TRACE_PREDICATES = {"p": 1, "q": 1, "r": 2, "s": 0}
TRACE_CONSTANTS = ["a", "b", "c"]


@dataclass(frozen=True)
class Lit:
    positive: bool
    atom: tuple  # (predicate, args) with args of str (variables capitalised) or tuples

    def negate(self) -> "Lit":
        return Lit(not self.positive, self.atom)


def _tsubst(t, s):
    if isinstance(t, str):
        if t[0].isupper() and t in s:
            return _tsubst(s[t], s)
        return t
    return (t[0],) + tuple(_tsubst(a, s) for a in t[1:])


def _occurs(v, t, s):
    t = _tsubst(t, s)
    if isinstance(t, str):
        return t == v
    return any(_occurs(v, a, s) for a in t[1:])


def mgu(xs, ys, s=None):
    """Most general unifier of two argument tuples (generator-side copy)."""
    s = dict(s or {})
    stack = list(zip(xs, ys))
    while stack:
        x, y = stack.pop()
        x, y = _tsubst(x, s), _tsubst(y, s)
        if x == y:
            continue
        if isinstance(x, str) and x[0].isupper():
            if _occurs(x, y, s):
                return None
            s[x] = y
        elif isinstance(y, str) and y[0].isupper():
            stack.append((y, x))
        elif isinstance(x, tuple) and isinstance(y, tuple) and x[0] == y[0] and len(x) == len(y):
            stack.extend(zip(x[1:], y[1:]))
        else:
            return None
    return s


def _lit_subst(l: Lit, s) -> Lit:
    pred, args = l.atom
    return Lit(l.positive, (pred, tuple(_tsubst(a, s) for a in args)))


def _rename(clause, suffix):
    def r(t):
        if isinstance(t, str):
            return t + suffix if t[0].isupper() else t
        return (t[0],) + tuple(r(a) for a in t[1:])
    return [Lit(l.positive, (l.atom[0], tuple(r(a) for a in l.atom[1]))) for l in clause]


def _dedupe(clause):
    out = []
    for l in clause:
        if l not in out:
            out.append(l)
    return out


def resolve(c1, c2, i, j):
    c2 = _rename(c2, "b")
    l1, l2 = c1[i], c2[j]
    if l1.positive == l2.positive or l1.atom[0] != l2.atom[0]:
        return None
    s = mgu(l1.atom[1], l2.atom[1])
    if s is None:
        return None
    rest = [l for k, l in enumerate(c1) if k != i] + [l for k, l in enumerate(c2) if k != j]
    return _normalize_vars(_dedupe([_lit_subst(l, s) for l in rest]))


def _normalize_vars(clause):
    names: dict = {}

    def r(t):
        if isinstance(t, str):
            if t[0].isupper():
                names.setdefault(t, f"X{len(names) + 1}")
                return names[t]
            return t
        return (t[0],) + tuple(r(a) for a in t[1:])
    return [Lit(l.positive, (l.atom[0], tuple(r(a) for a in l.atom[1]))) for l in clause]


def _render_term(t):
    if isinstance(t, str):
        return t
    return f"{t[0]}({','.join(_render_term(a) for a in t[1:])})"


def render_clause(clause) -> str:
    if not clause:
        return "$false"
    parts = []
    for l in clause:
        pred, args = l.atom
        atom = pred if not args else f"{pred}({','.join(_render_term(a) for a in args)})"
        parts.append(atom if l.positive else "~ " + atom)
    return " | ".join(parts)


def _random_atom(rng, allow_vars=True):
    pred = rng.choice(sorted(TRACE_PREDICATES))
    args = []
    for _ in range(TRACE_PREDICATES[pred]):
        roll = rng.random()
        if allow_vars and roll < 0.4:
            args.append(rng.choice(["X", "Y"]))
        elif roll < 0.55:
            args.append(("f", rng.choice(TRACE_CONSTANTS)))
        else:
            args.append(rng.choice(TRACE_CONSTANTS))
    return (pred, tuple(args))


def _generalize(lit: Lit, rng) -> Lit:
    pred, args = lit.atom
    new = tuple(rng.choice(["X", "Y"]) if isinstance(a, str) and rng.random() < 0.3 else a for a in args)
    return Lit(lit.positive, (pred, new))


def random_trace(seed: int) -> tuple[str, int] | None:
    """A small CNF refutation with genuine resolution steps.

    Built around a chain ``A1, ~A1 | A2, ..., ~Ak`` with generalised
    variables and extra literals, then refuted by a bounded resolution
    search whose derivation is written out. Returns (text, number of steps)
    or None when the search fails within eight steps.
    """
    rng = random.Random(seed)
    k = rng.randint(1, 3)
    chain = [Lit(True, _random_atom(rng, allow_vars=False)) for _ in range(k)]
    leaves = [[chain[0]]]
    for i in range(1, k):
        leaves.append([_generalize(chain[i - 1].negate(), rng), chain[i]])
    leaves.append([_generalize(chain[-1].negate(), rng)])
    for c in leaves:
        if len(c) < 3 and rng.random() < 0.3:
            extra = Lit(rng.random() < 0.5, _random_atom(rng))
            c.append(extra)
            leaves.append([extra.negate()])
            break
    if rng.random() < 0.5:
        leaves.append([Lit(rng.random() < 0.5, _random_atom(rng)) for _ in range(rng.randint(1, 3))])
    leaves = [_normalize_vars(_dedupe(c)) for c in leaves]
    rng.shuffle(leaves)
    if len(leaves) > 7:
        return None

    # breadth-first resolution within the step budget
    clauses = [(f"c_{i}", c, None) for i, c in enumerate(leaves)]
    budget = 8 - len(clauses)
    found = _refute(clauses, budget, rng)
    if found is None:
        return None
    steps = found
    lines = []
    roles = ["axiom", "hypothesis", "negated_conjecture"]
    used = set()
    goal = steps[-1][0]

    def need(name):
        if name in used:
            return
        used.add(name)
        for n, _, parents in steps:
            if n == name and parents:
                for p in parents:
                    need(p)
    need(goal)
    for name, clause, parents in steps:
        if parents is None:
            role = rng.choice(roles)
            lines.append(f"cnf({name},{role},( {render_clause(clause)} )).")
            continue
        if rng.random() < 0.15 and len(parents) == 2:
            src = (f"inference(cn,[status(thm)],[inference(spm,[status(thm)],"
                   f"[{parents[0]},{parents[1]}])])")
        else:
            src = f"inference({rng.choice(['spm', 'pm', 'rw'])},[status(thm)],[{','.join(parents)}])"
        extra = ",[proof]" if name == goal else ""
        role = "negated_conjecture" if not clause else "plain"
        lines.append(f"cnf({name},{role},( {render_clause(clause)} ),{src}{extra}).")
    return "\n".join(lines) + "\n", len(steps)


def _refute(clauses, budget, rng):
    """Iterative deepening over resolution derivations (tiny sets only)."""
    start = list(clauses)
    counter = [0]
    for depth in range(1, budget + 1):
        out = _search(start, depth, rng, counter)
        if out is not None:
            return out
    return None


def _search(steps, depth, rng, counter):
    if any(c == [] for _, c, _ in steps):
        return steps
    counter[0] += 1
    if depth == 0 or counter[0] > 3000:
        return None
    n = len(steps)
    pairs = [(a, b) for a in range(n) for b in range(n)]
    rng.shuffle(pairs)
    known = [c for _, c, _ in steps]
    for a, b in pairs:
        ca, cb = steps[a][1], steps[b][1]
        for i in range(len(ca)):
            for j in range(len(cb)):
                r = resolve(ca, cb, i, j)
                if r is None or r in known or len(r) > 3:
                    continue
                name = f"c_{n}"
                out = _search(steps + [(name, r, (steps[a][0], steps[b][0]))], depth - 1, rng, counter)
                if out is not None:
                    return out
    return None
