"""Terms and declarations of the λΠ-calculus modulo rewriting, with a
printer/parser for the textual dialect and the fixed logic prelude.

Dialect summary::

    require logic
    symbol prop : TYPE
    rule Proof (imp &a &b) --> Proof &a => Proof &b
    definition delta (x : A) : B := let y = f x in g y

``!x : A, B`` is a dependent product, ``A => B`` a plain arrow, ``\\x : A, t``
an abstraction. Input also accepts ``∀``, ``λ``, ``⇒`` and ``→``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Union

ARROW_VAR = "_"


@dataclass(frozen=True)
class Kind:
    pass


@dataclass(frozen=True)
class Type:
    pass


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class App:
    fn: "LpTerm"
    arg: "LpTerm"


@dataclass(frozen=True)
class Lam:
    var: str
    annot: "LpTerm | None"
    body: "LpTerm"


@dataclass(frozen=True)
class Pi:
    var: str
    domain: "LpTerm"
    codomain: "LpTerm"


@dataclass(frozen=True)
class Let:
    var: str
    value: "LpTerm"
    body: "LpTerm"


LpTerm = Union[Kind, Type, Const, Var, App, Lam, Pi, Let]


@dataclass(frozen=True)
class SymbolDecl:
    name: str
    type: LpTerm


@dataclass(frozen=True)
class RuleDecl:
    lhs: LpTerm
    rhs: LpTerm


@dataclass(frozen=True)
class DefinitionDecl:
    name: str
    params: tuple  # of (name, LpTerm)
    type: LpTerm
    body: LpTerm


@dataclass(frozen=True)
class RequireDecl:
    module: str


LpDecl = Union[SymbolDecl, RuleDecl, DefinitionDecl, RequireDecl]


class LpError(Exception):
    pass


class IllScoped(LpError):
    pass


class LpSyntaxError(LpError):
    pass


class UnknownQualifier(LpError):
    pass


# --------------------------------------------------------------------------
# Construction helpers


def app(head: LpTerm, *args: LpTerm) -> LpTerm:
    for a in args:
        head = App(head, a)
    return head


def arrow(a: LpTerm, b: LpTerm) -> Pi:
    return Pi(ARROW_VAR, a, b)


def arrows(*types: LpTerm) -> LpTerm:
    out = types[-1]
    for t in reversed(types[:-1]):
        out = arrow(t, out)
    return out


def spine(t: LpTerm) -> tuple[LpTerm, list[LpTerm]]:
    args = []
    while isinstance(t, App):
        args.append(t.arg)
        t = t.fn
    args.reverse()
    return t, args


def free_vars(t: LpTerm) -> set[str]:
    out: set[str] = set()
    _fv(t, frozenset(), out)
    return out


def _fv(t, bound, out):
    while True:
        if isinstance(t, Var):
            if t.name not in bound:
                out.add(t.name)
            return
        if isinstance(t, App):
            _fv(t.fn, bound, out)
            t = t.arg
        elif isinstance(t, Lam):
            if t.annot is not None:
                _fv(t.annot, bound, out)
            bound = bound | {t.var}
            t = t.body
        elif isinstance(t, Pi):
            _fv(t.domain, bound, out)
            bound = bound | {t.var}
            t = t.codomain
        elif isinstance(t, Let):
            _fv(t.value, bound, out)
            bound = bound | {t.var}
            t = t.body
        else:
            return


def constants(t: LpTerm) -> set[str]:
    out = set()
    stack = [t]
    while stack:
        t = stack.pop()
        if isinstance(t, Const):
            out.add(t.name)
        elif isinstance(t, App):
            stack += [t.fn, t.arg]
        elif isinstance(t, Lam):
            stack.append(t.body)
            if t.annot is not None:
                stack.append(t.annot)
        elif isinstance(t, Pi):
            stack += [t.domain, t.codomain]
        elif isinstance(t, Let):
            stack += [t.value, t.body]
    return out


def map_consts(t: LpTerm, f) -> LpTerm:
    """Rename every constant with ``f(name)``."""
    if isinstance(t, Const):
        return Const(f(t.name))
    if isinstance(t, App):
        return App(map_consts(t.fn, f), map_consts(t.arg, f))
    if isinstance(t, Lam):
        annot = None if t.annot is None else map_consts(t.annot, f)
        return Lam(t.var, annot, map_consts(t.body, f))
    if isinstance(t, Pi):
        return Pi(t.var, map_consts(t.domain, f), map_consts(t.codomain, f))
    if isinstance(t, Let):
        return Let(t.var, map_consts(t.value, f), map_consts(t.body, f))
    return t


# --------------------------------------------------------------------------
# Logic prelude

LOGIC = "logic"

_PRELUDE = r"""
symbol sort : TYPE
symbol iota : sort
symbol term : sort => TYPE
symbol prop : TYPE
symbol bot : prop
symbol top : prop
symbol not : prop => prop
symbol and : prop => prop => prop
symbol or : prop => prop => prop
symbol imp : prop => prop => prop
symbol all : !a : sort, (term a => prop) => prop
symbol ex : !a : sort, (term a => prop) => prop
symbol eq : !a : sort, term a => term a => prop
symbol Proof : prop => TYPE
rule Proof (imp &a &b) --> Proof &a => Proof &b

symbol true_intro : Proof top
symbol false_elim : !a : prop, Proof bot => Proof a
symbol and_intro : !a : prop, !b : prop, Proof a => Proof b => Proof (and a b)
symbol and_elim_l : !a : prop, !b : prop, Proof (and a b) => Proof a
symbol and_elim_r : !a : prop, !b : prop, Proof (and a b) => Proof b
symbol or_intro_l : !a : prop, !b : prop, Proof a => Proof (or a b)
symbol or_intro_r : !a : prop, !b : prop, Proof b => Proof (or a b)
symbol or_elim : !a : prop, !b : prop, !c : prop, Proof (or a b) => (Proof a => Proof c) => (Proof b => Proof c) => Proof c
symbol not_intro : !a : prop, (Proof a => Proof bot) => Proof (not a)
symbol not_elim : !a : prop, Proof (not a) => Proof a => Proof bot
symbol forall_intro : !s : sort, !p : (term s => prop), (!x : term s, Proof (p x)) => Proof (all s p)
symbol forall_elim : !s : sort, !p : (term s => prop), Proof (all s p) => !x : term s, Proof (p x)
symbol exists_intro : !s : sort, !p : (term s => prop), !x : term s, Proof (p x) => Proof (ex s p)
symbol exists_elim : !s : sort, !p : (term s => prop), !c : prop, Proof (ex s p) => (!x : term s, Proof (p x) => Proof c) => Proof c
symbol eq_refl : !s : sort, !x : term s, Proof (eq s x x)
symbol eq_subst : !s : sort, !x : term s, !y : term s, !p : (term s => prop), Proof (eq s x y) => Proof (p x) => Proof (p y)
symbol nnpp : !a : prop, Proof (not (not a)) => Proof a
"""


def logic_signature() -> list[LpDecl]:
    """The prelude declarations (unqualified, as they appear in ``logic.lp``)."""
    return parse_decl(_PRELUDE)


def lc(name: str) -> Const:
    """A constant of the logic prelude, qualified for use from other modules."""
    return Const(f"{LOGIC}.{name}")


def proof_of(prop: LpTerm) -> LpTerm:
    return App(lc("Proof"), prop)


TERM_IOTA = App(lc("term"), lc("iota"))


# --------------------------------------------------------------------------
# Printer

KEYWORDS = frozenset({"symbol", "rule", "definition", "require", "let", "in", "TYPE", "KIND"})
_IDENT = re.compile(r"[A-Za-z0-9_]+(\.[A-Za-z0-9_]+)*\Z")


def _check_ident(name: str) -> None:
    if not _IDENT.match(name) or name in KEYWORDS:
        raise IllScoped(f"not a valid identifier: {name!r}")


class _Printer:
    def __init__(self, bound: Iterable[str] = (), patterns: frozenset = frozenset()):
        self.bound = list(bound)
        self.patterns = patterns

    def term(self, t: LpTerm, level: int = 0) -> str:
        # level 0: anything; 1: application or tighter; 2: atomic
        if isinstance(t, Kind):
            return "KIND"
        if isinstance(t, Type):
            return "TYPE"
        if isinstance(t, Const):
            _check_ident(t.name)
            if t.name in self.bound:
                raise IllScoped(f"constant {t.name!r} is shadowed by a binder")
            return t.name
        if isinstance(t, Var):
            if t.name in self.bound:
                return t.name
            if t.name in self.patterns:
                return "&" + t.name
            raise IllScoped(f"unbound variable {t.name!r}")
        if isinstance(t, App):
            head, args = spine(t)
            s = " ".join([self.term(head, 2)] + [self.term(a, 2) for a in args])
            return f"({s})" if level >= 2 else s
        if isinstance(t, Pi) and t.var == ARROW_VAR:
            dom = self.term(t.domain, 1)
            s = f"{dom} => {self.term(t.codomain, 0)}"
        elif isinstance(t, Pi):
            _check_ident(t.var)
            dom = self.term(t.domain, 0)
            s = f"!{t.var} : {dom}, {self.under(t.var, t.codomain)}"
        elif isinstance(t, Lam):
            _check_ident(t.var)
            annot = "" if t.annot is None else " : " + self.term(t.annot, 0)
            s = f"\\{t.var}{annot}, {self.under(t.var, t.body)}"
        elif isinstance(t, Let):
            _check_ident(t.var)
            s = f"let {t.var} = {self.term(t.value, 0)} in {self.under(t.var, t.body)}"
        else:
            raise TypeError(f"not a term: {t!r}")
        return f"({s})" if level >= 1 else s

    def under(self, var: str, body: LpTerm) -> str:
        self.bound.append(var)
        try:
            return self.term(body, 0)
        finally:
            self.bound.pop()


def print_term(t: LpTerm, bound: Iterable[str] = ()) -> str:
    return _Printer(bound).term(t)


def _rule_patterns(lhs: LpTerm) -> frozenset:
    return frozenset(free_vars(lhs))


def print_decl(d: LpDecl) -> str:
    if isinstance(d, RequireDecl):
        _check_ident(d.module)
        return f"require {d.module}\n"
    if isinstance(d, SymbolDecl):
        if not _IDENT.match(d.name) or "." in d.name:
            raise IllScoped(f"not a valid symbol name: {d.name!r}")
        return f"symbol {d.name} : {print_term(d.type)}\n"
    if isinstance(d, RuleDecl):
        pats = _rule_patterns(d.lhs)
        extra = free_vars(d.rhs) - pats
        if extra:
            raise IllScoped(f"rule right-hand side uses unbound {sorted(extra)}")
        p = _Printer(patterns=pats)
        return f"rule {p.term(d.lhs)} --> {p.term(d.rhs)}\n"
    if isinstance(d, DefinitionDecl):
        _check_ident(d.name)
        lines = [f"definition {d.name}"]
        p = _Printer()
        for name, ty in d.params:
            _check_ident(name)
            lines.append(f"  ({name} : {p.term(ty)})")
            p.bound.append(name)
        lines.append(f"  : {p.term(d.type)}")
        lines.append("  :=")
        body = d.body
        while isinstance(body, Let):
            _check_ident(body.var)
            lines.append(f"  let {body.var} = {p.term(body.value)} in")
            p.bound.append(body.var)
            body = body.body
        lines.append(f"  {p.term(body)}")
        return "\n".join(lines) + "\n"
    raise TypeError(f"not a declaration: {d!r}")


def print_module(decls: Iterable[LpDecl]) -> str:
    out = []
    prev = None
    for d in decls:
        if prev is not None and (type(d) is not type(prev) or isinstance(d, DefinitionDecl)):
            out.append("\n")
        out.append(print_decl(d))
        prev = d
    return "".join(out)


# --------------------------------------------------------------------------
# Parser

_LP_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<op>:=|=>|-->|⇒|→|[()\:,=\\λ!∀])
  | (?P<pat>&[A-Za-z0-9_]+)
  | (?P<ident>[A-Za-z0-9_]+(?:\.[A-Za-z0-9_]+)*)
    """,
    re.VERBOSE,
)
_CANON = {"⇒": "=>", "→": "-->", "λ": "\\", "∀": "!"}


class _Parser:
    def __init__(self, text: str, modules: set | None):
        self.text = text
        self.toks = []
        pos = 0
        while pos < len(text):
            m = _LP_TOKEN.match(text, pos)
            if m is None:
                self._fail(f"unexpected character {text[pos]!r}", pos)
            if m.lastgroup not in ("ws", "comment"):
                val = _CANON.get(m.group(), m.group())
                self.toks.append((m.lastgroup, val, pos))
            pos = m.end()
        self.i = 0
        self.modules = modules
        self.bound: list[str] = []
        self.in_rule = False

    def _fail(self, msg: str, pos: int | None = None):
        if pos is None:
            pos = self.toks[self.i][2] if self.i < len(self.toks) else len(self.text)
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        raise LpSyntaxError(f"{line}:{col}: {msg}")

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None, len(self.text))

    def at(self, val: str) -> bool:
        kind, v, _ = self.peek()
        return v == val and kind in ("op", "ident")

    def expect(self, val: str):
        if not self.at(val):
            self._fail(f"expected {val!r}, found {self.peek()[1]!r}")
        self.i += 1

    def name(self) -> str:
        kind, v, _ = self.peek()
        if kind != "ident" or "." in v or v in KEYWORDS:
            self._fail(f"expected a name, found {v!r}")
        self.i += 1
        return v

    def decls(self) -> list[LpDecl]:
        out = []
        while self.peek()[0] is not None:
            kind, v, _ = self.peek()
            self.i += 1
            if v == "require":
                out.append(RequireDecl(self.name()))
            elif v == "symbol":
                # symbol names are positional, so keyword-like names are fine here
                kind, n, _ = self.peek()
                if kind != "ident" or "." in n:
                    self._fail(f"expected a symbol name, found {n!r}")
                self.i += 1
                self.expect(":")
                out.append(SymbolDecl(n, self.term()))
            elif v == "rule":
                self.in_rule = True
                lhs = self.term()
                self.expect("-->")
                rhs = self.term()
                self.in_rule = False
                out.append(RuleDecl(lhs, rhs))
            elif v == "definition":
                n = self.name()
                params = []
                while self.at("("):
                    self.i += 1
                    pn = self.name()
                    self.expect(":")
                    params.append((pn, self.term()))
                    self.expect(")")
                    self.bound.append(pn)
                self.expect(":")
                ty = self.term()
                self.expect(":=")
                body = self.term()
                del self.bound[len(self.bound) - len(params):]
                out.append(DefinitionDecl(n, tuple(params), ty, body))
            else:
                self.i -= 1
                self._fail(f"expected a declaration, found {v!r}")
        return out

    def term(self) -> LpTerm:
        if self.at("!") or self.at("\\"):
            binder = self.peek()[1]
            self.i += 1
            x = self.name()
            annot = None
            if binder == "!" or self.at(":"):
                self.expect(":")
                annot = self.term()
            self.expect(",")
            body = self.scoped(x)
            return Pi(x, annot, body) if binder == "!" else Lam(x, annot, body)
        if self.at("let"):
            self.i += 1
            x = self.name()
            self.expect("=")
            value = self.term()
            self.expect("in")
            return Let(x, value, self.scoped(x))
        head = self.application()
        if self.at("=>"):
            self.i += 1
            return Pi(ARROW_VAR, head, self.term())
        return head

    def scoped(self, x: str) -> LpTerm:
        self.bound.append(x)
        try:
            return self.term()
        finally:
            self.bound.pop()

    def application(self) -> LpTerm:
        t = self.atom()
        if t is None:
            self._fail(f"expected a term, found {self.peek()[1]!r}")
        while True:
            a = self.atom()
            if a is None:
                return t
            t = App(t, a)

    def atom(self) -> LpTerm | None:
        kind, v, _ = self.peek()
        if kind == "pat":
            if not self.in_rule:
                self._fail("pattern variables are only allowed in rules")
            self.i += 1
            return Var(v[1:])
        if kind == "op" and v == "(":
            self.i += 1
            t = self.term()
            self.expect(")")
            return t
        if kind != "ident" or v in ("symbol", "rule", "definition", "require", "let", "in"):
            return None
        self.i += 1
        if v == "TYPE":
            return Type()
        if v == "KIND":
            return Kind()
        if "." in v:
            qual = v.rsplit(".", 1)[0]
            if self.modules is not None and qual not in self.modules:
                self._fail_unknown(qual)
            return Const(v)
        if v in self.bound:
            return Var(v)
        return Const(v)

    def _fail_unknown(self, qual: str):
        raise UnknownQualifier(f"unknown module qualifier {qual!r}")


def parse_decl(text: str, modules: Iterable[str] | None = None) -> list[LpDecl]:
    """Parse a module body. Qualified names are checked against ``modules``
    when it is given."""
    return _Parser(text, None if modules is None else set(modules)).decls()


def parse_term(text: str, bound: Iterable[str] = ()) -> LpTerm:
    p = _Parser(text, None)
    p.bound = list(bound)
    t = p.term()
    if p.peek()[0] is not None:
        p._fail("trailing input")
    return t
