"""Translation of first-order terms and formulas into λΠ terms of type ``prop``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

from . import lp
from .names import sanitize
from .lp import App, Const, Lam, LpDecl, LpTerm, SymbolDecl, lc
from .tptp import (
    And, Atom, Equal, Exists, FalseF, Fn, Forall, Formula, Implies, Not, Or, TrueF, Var,
)

PREDICATE = "predicate"
FUNCTION = "function"


class EncodingError(Exception):
    pass


class ArityMismatch(EncodingError):
    def __init__(self, symbol: str, a1: int, a2: int):
        super().__init__(f"symbol {symbol!r} used with arities {a1} and {a2}")
        self.symbol, self.a1, self.a2 = symbol, a1, a2


class KindMismatch(EncodingError):
    def __init__(self, symbol: str):
        super().__init__(f"symbol {symbol!r} used both as predicate and function")
        self.symbol = symbol


class UnknownSymbol(EncodingError):
    pass


@dataclass(frozen=True)
class SymbolInfo:
    kind: str
    arity: int


class ProblemSignature(dict):
    """symbol name -> SymbolInfo"""

    def record(self, symbol: str, kind: str, arity: int) -> None:
        old = self.get(symbol)
        if old is None:
            self[symbol] = SymbolInfo(kind, arity)
        elif old.kind != kind:
            raise KindMismatch(symbol)
        elif old.arity != arity:
            raise ArityMismatch(symbol, old.arity, arity)


def _scan_term(t, sig: ProblemSignature) -> None:
    if isinstance(t, Fn):
        sig.record(t.symbol, FUNCTION, len(t.args))
        for a in t.args:
            _scan_term(a, sig)


def scan_formula(f: Formula, sig: ProblemSignature) -> None:
    stack = [f]
    while stack:
        f = stack.pop()
        if isinstance(f, Atom):
            sig.record(f.predicate, PREDICATE, len(f.args))
            for a in f.args:
                _scan_term(a, sig)
        elif isinstance(f, Equal):
            _scan_term(f.lhs, sig)
            _scan_term(f.rhs, sig)
        elif isinstance(f, Not):
            stack.append(f.body)
        elif isinstance(f, (And, Or, Implies)):
            stack += [f.right, f.left]
        elif isinstance(f, (Forall, Exists)):
            stack.append(f.body)


def extract_signature(formulas: Iterable[Formula]) -> ProblemSignature:
    """Kind and arity of every non-logical symbol.

    Accepts a Trace (its step formulas are scanned) or any iterable of formulas.
    """
    steps = getattr(formulas, "steps", None)
    if steps is not None:
        formulas = [s.formula for s in steps]
    sig = ProblemSignature()
    for f in formulas:
        scan_formula(f, sig)
    return sig


class Encoder:
    """φ: formulas to ``prop`` terms; problem symbols are qualified by ``module``."""

    def __init__(self, module: str, signature: ProblemSignature | None = None,
                 term_hook: Callable[[object], LpTerm | None] | None = None):
        self.module = module
        self.signature = signature
        self.term_hook = term_hook

    def symbol(self, name: str, kind: str, arity: int) -> Const:
        if self.signature is not None:
            info = self.signature.get(name)
            if info is None or info != SymbolInfo(kind, arity):
                raise UnknownSymbol(f"{name}/{arity} is not a declared {kind}")
        return Const(f"{self.module}.{lp_name(name)}")

    def term(self, t) -> LpTerm:
        if self.term_hook is not None:
            out = self.term_hook(t)
            if out is not None:
                return out
        if isinstance(t, Var):
            return lp.Var(t.name)
        if isinstance(t, Fn):
            return lp.app(self.symbol(t.symbol, FUNCTION, len(t.args)),
                          *(self.term(a) for a in t.args))
        raise TypeError(f"not a term: {t!r}")

    def formula(self, f: Formula) -> LpTerm:
        if isinstance(f, Atom):
            return lp.app(self.symbol(f.predicate, PREDICATE, len(f.args)),
                          *(self.term(a) for a in f.args))
        if isinstance(f, Equal):
            return lp.app(lc("eq"), lc("iota"), self.term(f.lhs), self.term(f.rhs))
        if isinstance(f, TrueF):
            return lc("top")
        if isinstance(f, FalseF):
            return lc("bot")
        if isinstance(f, Not):
            return App(lc("not"), self.formula(f.body))
        if isinstance(f, And):
            return lp.app(lc("and"), self.formula(f.left), self.formula(f.right))
        if isinstance(f, Or):
            return lp.app(lc("or"), self.formula(f.left), self.formula(f.right))
        if isinstance(f, Implies):
            return lp.app(lc("imp"), self.formula(f.left), self.formula(f.right))
        if isinstance(f, Forall):
            return lp.app(lc("all"), lc("iota"), self.predicate(f.var, f.body))
        if isinstance(f, Exists):
            return lp.app(lc("ex"), lc("iota"), self.predicate(f.var, f.body))
        raise TypeError(f"not a formula: {f!r}")

    def predicate(self, var: str, body: Formula) -> Lam:
        """``\\var, φ(body)`` - the body of a quantifier as a function."""
        return Lam(var, None, self.formula(body))


def lp_name(symbol: str) -> str:
    return sanitize(symbol)


def encode_formula(f: Formula, module: str = "sig",
                   signature: ProblemSignature | None = None) -> LpTerm:
    return Encoder(module, signature).formula(f)


def encode_term(t, module: str = "sig") -> LpTerm:
    return Encoder(module).term(t)


def encode_signature(sig: ProblemSignature) -> list[LpDecl]:
    decls = []
    for name in sorted(sig):
        info = sig[name]
        result = lc("prop") if info.kind == PREDICATE else lp.TERM_IOTA
        ty = lp.arrows(*([lp.TERM_IOTA] * info.arity), result)
        decls.append(SymbolDecl(lp_name(name), ty))
    return decls
