"""Bounded free-variable tableau prover producing λΠ proof terms.

The conjecture ``A1 => ... => An => B`` is proved by introducing the
premises, assuming ``~B`` and refuting the branch. Every formula on a branch
carries a proof variable; expansions let-bind the proof of each new formula
from the natural-deduction constants of the logic prelude, so the final term
is checked by the kernel without trusting the search.

Quantifier instances are rigid meta-variables resolved by unification when a
branch closes; the substitution is only applied once the whole tableau is
closed. Existential witnesses are λ-bound variables (``w<k>``).
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from . import lp
from .encoder import Encoder
from .lp import App, Lam, Let, LpTerm, Var, app, lc
from .tptp import (
    And, Atom, Equal, Exists, FalseF, Fn, Forall, Formula, Implies, Not, Or, TrueF,
)
from .tptp import Var as TVar

DEFAULT_WITNESS = "witness"


@dataclass(frozen=True)
class ProverLimits:
    gamma_bound: int = 4
    node_budget: int = 50_000
    time_budget: float | None = None

    def __post_init__(self):
        if self.gamma_bound < 1 or self.node_budget < 1:
            raise ValueError("prover limits must be positive")
        if self.time_budget is not None and self.time_budget <= 0:
            raise ValueError("prover limits must be positive")


class ProverFailure(Exception):
    """No proof found; ``reason`` is ``exhausted``, ``budget`` or ``timeout``.

    A failure is not a disproof.
    """

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}{': ' + detail if detail else ''}")
        self.reason = reason


class _OutOfBudget(Exception):
    def __init__(self, reason: str):
        self.reason = reason


# --------------------------------------------------------------------------
# Prover-internal terms


@dataclass(frozen=True)
class Meta:
    """Rigid free variable introduced by a universal instance."""
    id: int


@dataclass(frozen=True)
class Eigen:
    """Existential witness; ``args`` are the metas live on the branch."""
    id: int
    args: tuple


@dataclass(frozen=True)
class Hole:
    """Abstracted position in an equality motive."""


# Placeholders embedded in proof terms until the substitution is final.


@dataclass(frozen=True)
class PropSlot:
    formula: Formula


@dataclass(frozen=True)
class TermSlot:
    term: object


@dataclass(frozen=True)
class PredSlot:
    var: str
    body: Formula


@dataclass(frozen=True)
class MotiveSlot:
    formula: Formula


def _c(name: str, *args) -> LpTerm:
    return app(lc(name), *args)


def _pf(f: Formula) -> LpTerm:
    return App(lc("Proof"), PropSlot(f))


_IOTA = lc("iota")
_BOT = lc("bot")


# --------------------------------------------------------------------------
# Substitution and unification


def walk(t, s: dict):
    while isinstance(t, Meta) and t.id in s:
        t = s[t.id]
    return t


def occurs(m: int, t, s: dict) -> bool:
    stack = [t]
    while stack:
        t = walk(stack.pop(), s)
        if isinstance(t, Meta):
            if t.id == m:
                return True
        elif isinstance(t, (Fn, Eigen)):
            stack.extend(t.args)
    return False


def unify(a, b, s: dict) -> dict | None:
    """Extend ``s`` so that ``a`` and ``b`` become equal; returns ``s`` itself
    when no binding was needed."""
    out = s
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x = walk(x, out)
        y = walk(y, out)
        if x == y:
            continue
        if isinstance(y, Meta) and not isinstance(x, Meta):
            x, y = y, x
        if isinstance(x, Meta):
            if occurs(x.id, y, out):
                return None
            out = dict(out)
            out[x.id] = y
        elif isinstance(x, Fn) and isinstance(y, Fn):
            if x.symbol != y.symbol or len(x.args) != len(y.args):
                return None
            stack.extend(zip(x.args, y.args))
        elif isinstance(x, Eigen) and isinstance(y, Eigen):
            if x.id != y.id:
                return None
            stack.extend(zip(x.args, y.args))
        else:
            return None
    return out


def _replace_var(t, name: str, value):
    if isinstance(t, TVar):
        return value if t.name == name else t
    if isinstance(t, Fn) and t.args:
        return Fn(t.symbol, tuple(_replace_var(a, name, value) for a in t.args))
    return t


def instance(f: Formula, name: str, value) -> Formula:
    """``f[name := value]`` for a closed ``value`` (no capture possible)."""
    if isinstance(f, Atom):
        return Atom(f.predicate, tuple(_replace_var(a, name, value) for a in f.args))
    if isinstance(f, Equal):
        return Equal(_replace_var(f.lhs, name, value), _replace_var(f.rhs, name, value))
    if isinstance(f, Not):
        return Not(instance(f.body, name, value))
    if isinstance(f, (And, Or, Implies)):
        return type(f)(instance(f.left, name, value), instance(f.right, name, value))
    if isinstance(f, (Forall, Exists)):
        if f.var == name:
            return f
        return type(f)(f.var, instance(f.body, name, value))
    return f


def _atom_args(f: Formula) -> tuple:
    return (f.lhs, f.rhs) if isinstance(f, Equal) else f.args


def _with_args(f: Formula, args: tuple) -> Formula:
    return Equal(*args) if isinstance(f, Equal) else Atom(f.predicate, args)


def _same_head(a: Formula, b: Formula) -> bool:
    if isinstance(a, Equal) or isinstance(b, Equal):
        return isinstance(a, Equal) and isinstance(b, Equal)
    return a.predicate == b.predicate and len(a.args) == len(b.args)


def unify_atoms(a: Formula, b: Formula, s: dict) -> dict | None:
    if not _same_head(a, b):
        return None
    return unify(Fn("", _atom_args(a)), Fn("", _atom_args(b)), s)


def _positions(args: tuple, prefix=()) -> Iterator[tuple[tuple, object]]:
    for i, t in enumerate(args):
        path = prefix + (i,)
        if isinstance(t, Meta):
            continue
        yield path, t
        if isinstance(t, (Fn, Eigen)):
            yield from _positions(t.args, path)


def _put(args: tuple, path: tuple, value) -> tuple:
    i = path[0]
    if len(path) == 1:
        new = value
    else:
        t = args[i]
        new = type(t)(t.symbol if isinstance(t, Fn) else t.id, _put(t.args, path[1:], value))
    return args[:i] + (new,) + args[i + 1:]


# --------------------------------------------------------------------------
# Branches


@dataclass(frozen=True)
class TableauBranch:
    """Formulas are all asserted; refuted formulas appear negated."""
    pending: tuple = ()
    literals: tuple = ()
    betas: tuple = ()
    gammas: tuple = ()  # (formula, hyp, instantiation count)
    metas: tuple = ()


def _classify(f: Formula) -> str:
    if isinstance(f, (Atom, Equal)):
        return "literal"
    if isinstance(f, TrueF):
        return "drop"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, (And,)):
        return "alpha"
    if isinstance(f, (Or, Implies)):
        return "beta"
    if isinstance(f, Forall):
        return "gamma"
    if isinstance(f, Exists):
        return "delta"
    g = f.body
    if isinstance(g, (Atom, Equal)):
        return "literal"
    if isinstance(g, FalseF):
        return "drop"
    if isinstance(g, TrueF):
        return "nottrue"
    if isinstance(g, (Or, Implies, Not)):
        return "alpha"
    if isinstance(g, And):
        return "beta"
    if isinstance(g, Forall):
        return "delta"
    return "gamma"  # Not(Exists)


class _Search:
    def __init__(self, limits: ProverLimits, deadline: float | None):
        self.limits = limits
        self.deadline = deadline
        self.nodes = 0
        self._names = itertools.count(1)
        self._metas = itertools.count(1)
        self._eigens = itertools.count(1)
        self.bound_hit = False

    def tick(self) -> None:
        self.nodes += 1
        if self.nodes > self.limits.node_budget:
            raise _OutOfBudget("budget")
        if self.deadline is not None and self.nodes % 32 == 0 and time.monotonic() > self.deadline:
            raise _OutOfBudget("timeout")

    def hyp(self) -> str:
        return f"h{next(self._names)}"

    # -- deterministic expansion

    def saturate(self, br: TableauBranch):
        pending = list(br.pending)
        deltas: list = []
        literals = list(br.literals)
        seen = {f for f, _ in literals}
        betas = list(br.betas)
        gammas = list(br.gammas)
        layers: list = []
        closed = None
        while pending or deltas:
            if pending:
                f, h = pending.pop(0)
            else:
                f, h = deltas.pop(0)
                g, hg, layer = self.delta(f, h, br.metas)
                layers.append(layer)
                pending.append((g, hg))
                continue
            kind = _classify(f)
            if kind == "literal":
                if f not in seen:
                    seen.add(f)
                    literals.append((f, h))
            elif kind == "false":
                closed = Var(h)
                break
            elif kind == "nottrue":
                closed = _c("not_elim", lc("top"), Var(h), lc("true_intro"))
                break
            elif kind == "alpha":
                for g, value in self.alpha(f, h):
                    hg = self.hyp()
                    layers.append(_let_layer(hg, value))
                    pending.append((g, hg))
            elif kind == "delta":
                deltas.append((f, h))
            elif kind == "beta":
                betas.append((f, h))
            elif kind == "gamma":
                gammas.append((f, h, 0))
        out = TableauBranch((), tuple(literals), tuple(betas), tuple(gammas), br.metas)
        return out, _compose(layers), closed

    def alpha(self, f: Formula, h: str) -> list:
        hv = Var(h)
        if isinstance(f, And):
            a, b = f.left, f.right
            return [(a, _c("and_elim_l", PropSlot(a), PropSlot(b), hv)),
                    (b, _c("and_elim_r", PropSlot(a), PropSlot(b), hv))]
        g = f.body
        if isinstance(g, Not):
            return [(g.body, _c("nnpp", PropSlot(g.body), hv))]
        a, b = g.left, g.right
        x, y = self.hyp(), self.hyp()
        if isinstance(g, Or):
            return [
                (Not(a), _c("not_intro", PropSlot(a), Lam(x, _pf(a), _c(
                    "not_elim", PropSlot(g), hv, _c("or_intro_l", PropSlot(a), PropSlot(b), Var(x)))))),
                (Not(b), _c("not_intro", PropSlot(b), Lam(y, _pf(b), _c(
                    "not_elim", PropSlot(g), hv, _c("or_intro_r", PropSlot(a), PropSlot(b), Var(y)))))),
            ]
        # ~(a => b) gives a and ~b
        na, z = self.hyp(), self.hyp()
        prove_a = _c("nnpp", PropSlot(a), _c("not_intro", PropSlot(Not(a)), Lam(na, _pf(Not(a)), _c(
            "not_elim", PropSlot(g), hv, Lam(x, _pf(a), _c(
                "false_elim", PropSlot(b), _c("not_elim", PropSlot(a), Var(na), Var(x))))))))
        prove_nb = _c("not_intro", PropSlot(b), Lam(y, _pf(b), _c(
            "not_elim", PropSlot(g), hv, Lam(z, _pf(a), Var(y)))))
        return [(a, prove_a), (Not(b), prove_nb)]

    def delta(self, f: Formula, h: str, metas: tuple):
        k = next(self._eigens)
        w = Eigen(k, tuple(Meta(m) for m in metas))
        wname = f"w{k}"
        hw = self.hyp()
        if isinstance(f, Exists):
            inst = instance(f.body, f.var, w)

            def layer(body, f=f, inst=inst):
                return _c("exists_elim", _IOTA, PredSlot(f.var, f.body), _BOT, Var(h),
                          Lam(wname, lp.TERM_IOTA, Lam(hw, _pf(inst), body)))
            return inst, hw, layer
        q = f.body
        inst = instance(q.body, q.var, w)

        def layer(body, q=q, inst=inst):
            return _c("not_elim", PropSlot(q), Var(h), _c(
                "forall_intro", _IOTA, PredSlot(q.var, q.body), Lam(wname, lp.TERM_IOTA, _c(
                    "nnpp", PropSlot(inst), _c("not_intro", PropSlot(Not(inst)),
                                               Lam(hw, _pf(Not(inst)), body))))))
        return Not(inst), hw, layer

    def beta(self, f: Formula, h: str):
        """Returns (left formula, left hyp, right formula, right hyp, combine)."""
        hv = Var(h)
        hl, hr = self.hyp(), self.hyp()
        if isinstance(f, Or):
            a, b = f.left, f.right

            def combine(left, right):
                return _c("or_elim", PropSlot(a), PropSlot(b), _BOT, hv,
                          Lam(hl, _pf(a), left), Lam(hr, _pf(b), right))
            return a, hl, b, hr, combine
        x = self.hyp()
        if isinstance(f, Implies):
            a, b = f.left, f.right

            def combine(left, right):
                return _c("not_elim", PropSlot(Not(a)),
                          _c("not_intro", PropSlot(Not(a)), Lam(hl, _pf(Not(a)), left)),
                          _c("not_intro", PropSlot(a), Lam(x, _pf(a), Let(hr, App(hv, Var(x)), right))))
            return Not(a), hl, b, hr, combine
        a, b = f.body.left, f.body.right
        y = self.hyp()

        def combine(left, right):
            nb = _c("not_intro", PropSlot(b), Lam(y, _pf(b), _c(
                "not_elim", PropSlot(f.body), hv, _c("and_intro", PropSlot(a), PropSlot(b), Var(x), Var(y)))))
            return _c("not_elim", PropSlot(Not(a)),
                      _c("not_intro", PropSlot(Not(a)), Lam(hl, _pf(Not(a)), left)),
                      _c("not_intro", PropSlot(a), Lam(x, _pf(a), Let(hr, nb, right))))
        return Not(a), hl, Not(b), hr, combine

    def gamma(self, f: Formula, h: str, m: Meta):
        if isinstance(f, Forall):
            inst = instance(f.body, f.var, m)
            return inst, _c("forall_elim", _IOTA, PredSlot(f.var, f.body), Var(h), TermSlot(m))
        q = f.body
        inst = instance(q.body, q.var, m)
        y = self.hyp()
        value = _c("not_intro", PropSlot(inst), Lam(y, _pf(inst), _c(
            "not_elim", PropSlot(q), Var(h),
            _c("exists_intro", _IOTA, PredSlot(q.var, q.body), TermSlot(m), Var(y)))))
        return Not(inst), value

    # -- closure

    def closures(self, br: TableauBranch, s: dict) -> list:
        pos = [(f, h) for f, h in br.literals if not isinstance(f, Not)]
        neg = [(f.body, h) for f, h in br.literals if isinstance(f, Not)]
        out = []
        for a, ha in pos:
            for b, hb in neg:
                s2 = unify_atoms(a, b, s)
                if s2 is not None:
                    out.append((s2, _c("not_elim", PropSlot(b), Var(hb), Var(ha))))
                    if s2 is s:
                        return out
        for b, hb in neg:
            if isinstance(b, Equal):
                s2 = unify(b.lhs, b.rhs, s)
                if s2 is not None:
                    out.append((s2, _c("not_elim", PropSlot(b), Var(hb),
                                       _c("eq_refl", _IOTA, TermSlot(b.lhs)))))
                    if s2 is s:
                        return out
        eqs = [(e, he) for e, he in pos if isinstance(e, Equal)]
        for e, he in eqs:
            for b, hb in neg:
                if not isinstance(b, Equal):
                    continue
                s2 = unify(Fn("", (e.lhs, e.rhs)), Fn("", (b.rhs, b.lhs)), s)
                if s2 is not None:
                    out.append((s2, _c("not_elim", PropSlot(b), Var(hb), _sym(e, Var(he)))))
                    if s2 is s:
                        return out
        for e, he in eqs:
            directions = ((e.lhs, e.rhs, Var(he)), (e.rhs, e.lhs, _sym(e, Var(he))))
            for a, ha in pos:
                args = _atom_args(a)
                for b, hb in neg:
                    if not _same_head(a, b):
                        continue
                    for path, sub in _positions(args):
                        for l, r, heq in directions:
                            s1 = unify(sub, l, s)
                            if s1 is None:
                                continue
                            s2 = unify_atoms(_with_args(a, _put(args, path, r)), b, s1)
                            if s2 is None:
                                continue
                            motive = MotiveSlot(_with_args(a, _put(args, path, Hole())))
                            step = _c("eq_subst", _IOTA, TermSlot(l), TermSlot(r), motive, heq, Var(ha))
                            out.append((s2, _c("not_elim", PropSlot(b), Var(hb), step)))
                            if s2 is s:
                                return out
        return _dedupe(out)

    # -- search

    def refute(self, br: TableauBranch, s: dict, bound: int) -> Iterator[tuple[dict, LpTerm]]:
        self.tick()
        br, wrap, closed = self.saturate(br)
        if closed is not None:
            yield s, wrap(closed)
            return
        closings = self.closures(br, s)
        for s2, proof in closings:
            if s2 is s:
                yield s, wrap(proof)
                return
        for s2, proof in closings:
            yield s2, wrap(proof)
        if br.betas:
            (f, h), rest = br.betas[0], br.betas[1:]
            a, ha, b, hb, combine = self.beta(f, h)
            left = TableauBranch(((a, ha),), br.literals, rest, br.gammas, br.metas)
            right = TableauBranch(((b, hb),), br.literals, rest, br.gammas, br.metas)
            for s1, lproof in self.refute(left, s, bound):
                for s2, rproof in self.refute(right, s1, bound):
                    yield s2, wrap(combine(lproof, rproof))
            return
        candidates = [i for i, (_, _, n) in enumerate(br.gammas) if n < bound]
        if len(candidates) < len(br.gammas):
            self.bound_hit = True
        if not candidates:
            return
        i = min(candidates, key=lambda j: (br.gammas[j][2], j))
        f, h, n = br.gammas[i]
        m = Meta(next(self._metas))
        inst, value = self.gamma(f, h, m)
        hi = self.hyp()
        gammas = br.gammas[:i] + ((f, h, n + 1),) + br.gammas[i + 1:]
        nxt = TableauBranch(((inst, hi),), br.literals, br.betas, gammas, br.metas + (m.id,))
        for s2, proof in self.refute(nxt, s, bound):
            yield s2, wrap(Let(hi, value, proof))


def _sym(e: Equal, he: LpTerm) -> LpTerm:
    """From ``l = r`` derive ``r = l``."""
    return _c("eq_subst", _IOTA, TermSlot(e.lhs), TermSlot(e.rhs),
              MotiveSlot(Equal(Hole(), e.lhs)), he, _c("eq_refl", _IOTA, TermSlot(e.lhs)))


def _dedupe(items: list) -> list:
    out = []
    seen: list = []
    for s2, proof in items:
        if any(s2 == t for t in seen):
            continue
        seen.append(s2)
        out.append((s2, proof))
    return out


def _let_layer(name: str, value: LpTerm):
    return lambda body: Let(name, value, body)


def _compose(layers: list):
    def wrap(body):
        for layer in reversed(layers):
            body = layer(body)
        return body
    return wrap


# --------------------------------------------------------------------------
# Filling placeholders


class _Filler:
    def __init__(self, subst: dict, module: str, default_term: LpTerm):
        self.s = subst
        self.default_term = default_term
        self.enc = Encoder(module, term_hook=self.hook)

    def hook(self, t):
        if isinstance(t, Meta):
            t2 = walk(t, self.s)
            if isinstance(t2, Meta):
                return self.default_term
            return self.enc.term(t2)
        if isinstance(t, Eigen):
            return Var(f"w{t.id}")
        if isinstance(t, Hole):
            return Var("z")
        return None

    def fill(self, t):
        if isinstance(t, PropSlot):
            return self.enc.formula(t.formula)
        if isinstance(t, TermSlot):
            return self.enc.term(t.term)
        if isinstance(t, PredSlot):
            return self.enc.predicate(t.var, t.body)
        if isinstance(t, MotiveSlot):
            return Lam("z", None, self.enc.formula(t.formula))
        if isinstance(t, App):
            return App(self.fill(t.fn), self.fill(t.arg))
        if isinstance(t, Lam):
            return Lam(t.var, None if t.annot is None else self.fill(t.annot), self.fill(t.body))
        if isinstance(t, Let):
            return Let(t.var, self.fill(t.value), self.fill(t.body))
        return t


def _first_constant(f: Formula) -> str | None:
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, (Atom, Equal)):
            terms = list(_atom_args(g))
            while terms:
                t = terms.pop(0)
                if isinstance(t, Fn):
                    if not t.args:
                        return t.symbol
                    terms = list(t.args) + terms
        elif isinstance(g, Not):
            stack.append(g.body)
        elif isinstance(g, (And, Or, Implies)):
            stack += [g.right, g.left]
        elif isinstance(g, (Forall, Exists)):
            stack.append(g.body)
    return None


@dataclass(frozen=True)
class ProofResult:
    term: LpTerm
    nodes: int
    uses_witness: bool


def prove(conjecture: Formula, limits: ProverLimits = ProverLimits(),
          signature_module: str = "sig", deadline: float | None = None) -> ProofResult:
    """Find a proof term of ``Proof (φ conjecture)``.

    Raises ProverFailure when the limits are exhausted.
    """
    if limits.time_budget is not None:
        budget_deadline = time.monotonic() + limits.time_budget
        deadline = budget_deadline if deadline is None else min(deadline, budget_deadline)
    search = _Search(limits, deadline)
    premises = []
    goal = conjecture
    while isinstance(goal, Implies):
        premises.append(goal.left)
        goal = goal.right
    hyps = [search.hyp() for _ in premises]

    subst: dict = {}
    if goal in premises:
        body: LpTerm = Var(hyps[premises.index(goal)])
    elif isinstance(goal, TrueF):
        body = lc("true_intro")
    else:
        start = list(zip(premises, hyps))
        neg_hyp = None
        if not isinstance(goal, FalseF):
            neg_hyp = search.hyp()
            start.append((Not(goal), neg_hyp))
        refutation = None
        try:
            for bound in range(1, limits.gamma_bound + 1):
                search.bound_hit = False
                found = next(search.refute(TableauBranch(tuple(start)), {}, bound), None)
                if found is not None:
                    subst, refutation = found
                    break
                if not search.bound_hit:
                    break
        except _OutOfBudget as e:
            raise ProverFailure(e.reason, f"{search.nodes} nodes") from None
        except RecursionError:
            raise ProverFailure("budget", "search too deep") from None
        if refutation is None:
            raise ProverFailure("exhausted", f"{search.nodes} nodes")
        if neg_hyp is None:
            body = refutation
        else:
            body = _c("nnpp", PropSlot(goal), _c("not_intro", PropSlot(Not(goal)),
                                                 Lam(neg_hyp, _pf(Not(goal)), refutation)))
    for f, h in reversed(list(zip(premises, hyps))):
        body = Lam(h, _pf(f), body)

    const = _first_constant(conjecture)
    if const is not None:
        default = Encoder(signature_module).term(Fn(const))
    else:
        default = lp.Const(DEFAULT_WITNESS)
    term = _Filler(subst, signature_module, default).fill(body)
    uses_witness = DEFAULT_WITNESS in lp.constants(term)
    return ProofResult(term, search.nodes, uses_witness)


# --------------------------------------------------------------------------
# Subproof modules


def subproof_module(conjecture: Formula, term: LpTerm, signature_module: str) -> list:
    """Declarations of a module exporting ``delta : Proof (φ conjecture)``."""
    decls = [lp.RequireDecl(lp.LOGIC), lp.RequireDecl(signature_module)]
    if DEFAULT_WITNESS in lp.constants(term):
        decls.append(lp.SymbolDecl(DEFAULT_WITNESS, lp.TERM_IOTA))
    goal = lp.proof_of(Encoder(signature_module).formula(conjecture))
    decls.append(lp.DefinitionDecl("delta", (), goal, term))
    return decls


def emit_subproof_module(name: str, conjecture: Formula, term: LpTerm, outpath,
                         signature_module: str = "sig") -> Path:
    outpath = Path(outpath)
    text = f"// proof of subproblem {name}\n" + lp.print_module(
        subproof_module(conjecture, term, signature_module))
    outpath.write_text(text, encoding="utf-8")
    return outpath
