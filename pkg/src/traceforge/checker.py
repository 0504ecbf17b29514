"""A small type checker for the λΠ-calculus modulo rewriting.

Conversion is β, ζ (let), δ (definitions, unfolded lazily) and first-order
rewriting with rules whose left-hand side is a constant applied to patterns.
Bound variables are named; substitution renames binders to avoid capture.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable

from .lp import (
    ARROW_VAR, App, Const, DefinitionDecl, Kind, Lam, Let, LpDecl, LpTerm, Pi,
    RequireDecl, RuleDecl, SymbolDecl, Type, Var, app, constants, free_vars,
    map_consts, print_term, spine,
)


class CheckError(Exception):
    pass


class TypeError(CheckError):  # noqa: A001
    def __init__(self, message: str, decl: str | None = None):
        super().__init__(f"{decl}: {message}" if decl else message)
        self.decl = decl


class UnboundName(CheckError):
    pass


class CannotInfer(TypeError):
    pass


_fresh_ids = itertools.count()


def _fresh(base: str) -> str:
    return f"{base.split('#')[0]}#{next(_fresh_ids)}"


# --------------------------------------------------------------------------
# Substitution


def subst(t: LpTerm, x: str, s: LpTerm, fv_s: set | None = None) -> LpTerm:
    """Capture-avoiding ``t[x := s]``."""
    if fv_s is None:
        fv_s = free_vars(s)
    return _subst(t, x, s, fv_s)


def _subst(t, x, s, fv):
    if isinstance(t, Var):
        return s if t.name == x else t
    if isinstance(t, App):
        fn = _subst(t.fn, x, s, fv)
        arg = _subst(t.arg, x, s, fv)
        if fn is t.fn and arg is t.arg:
            return t
        return App(fn, arg)
    if isinstance(t, (Lam, Pi, Let)):
        first = t.annot if isinstance(t, Lam) else (t.domain if isinstance(t, Pi) else t.value)
        body = t.body if not isinstance(t, Pi) else t.codomain
        new_first = None if first is None else _subst(first, x, s, fv)
        var = t.var
        if var == x:
            new_body = body
        else:
            if var in fv:
                nv = _fresh(var)
                body = _subst(body, var, Var(nv), {nv})
                var = nv
            new_body = _subst(body, x, s, fv)
        if new_first is first and new_body is body and var == t.var:
            return t
        if isinstance(t, Lam):
            return Lam(var, new_first, new_body)
        if isinstance(t, Pi):
            return Pi(var, new_first, new_body)
        return Let(var, new_first, new_body)
    return t


def instantiate(binder_var: str, body: LpTerm, arg: LpTerm) -> LpTerm:
    if binder_var == ARROW_VAR:
        return body
    return subst(body, binder_var, arg)


# --------------------------------------------------------------------------
# Contexts


@dataclass(frozen=True)
class Rule:
    head: str
    patterns: tuple
    rhs: LpTerm


@dataclass
class Context:
    """Global signature: qualified constant -> (type, definition or None)."""
    symbols: dict = field(default_factory=dict)
    rules: dict = field(default_factory=dict)
    modules: set = field(default_factory=set)

    def copy(self) -> "Context":
        return Context(dict(self.symbols), {k: list(v) for k, v in self.rules.items()},
                       set(self.modules))

    def type_of(self, name: str) -> LpTerm:
        try:
            return self.symbols[name][0]
        except KeyError:
            raise UnboundName(f"unknown constant {name!r}") from None

    def value_of(self, name: str) -> LpTerm | None:
        entry = self.symbols.get(name)
        return None if entry is None else entry[1]


class _Locals:
    """Persistent local context (linked list of frames)."""
    __slots__ = ("name", "type", "value", "parent", "names")

    def __init__(self, name=None, type=None, value=None, parent=None):
        self.name = name
        self.type = type
        self.value = value
        self.parent = parent
        self.names = (parent.names | {name}) if parent is not None else frozenset()

    def push(self, name, type, value=None) -> "_Locals":
        return _Locals(name, type, value, self)

    def find(self, name):
        frame = self
        while frame is not None and frame.parent is not None:
            if frame.name == name:
                return frame
            frame = frame.parent
        return None


_EMPTY = _Locals()


# --------------------------------------------------------------------------
# Reduction and conversion


class Checker:
    def __init__(self, ctx: Context):
        self.ctx = ctx

    # -- weak head normalisation

    def whnf(self, t: LpTerm, loc: _Locals = _EMPTY, unfold: bool = False) -> LpTerm:
        while True:
            head, args = spine(t)
            if isinstance(head, Lam) and args:
                t = app(instantiate(head.var, head.body, args[0]), *args[1:])
                continue
            if isinstance(head, Let):
                t = app(subst(head.body, head.var, head.value), *args)
                continue
            if isinstance(head, Const):
                reduct = self._rewrite(head.name, args, loc)
                if reduct is not None:
                    t = reduct
                    continue
                if unfold:
                    val = self.ctx.value_of(head.name)
                    if val is not None:
                        t = app(val, *args)
                        continue
            if unfold and isinstance(head, Var):
                frame = loc.find(head.name)
                if frame is not None and frame.value is not None:
                    t = app(frame.value, *args)
                    continue
            return t

    def _rewrite(self, name: str, args: list, loc: _Locals) -> LpTerm | None:
        for rule in self.ctx.rules.get(name, ()):
            n = len(rule.patterns)
            if len(args) < n:
                continue
            binding: dict = {}
            if all(self._match(p, a, binding, loc) for p, a in zip(rule.patterns, args)):
                rhs = rule.rhs
                for var, val in binding.items():
                    rhs = subst(rhs, var, val)
                return app(rhs, *args[n:])
        return None

    def _match(self, pat: LpTerm, t: LpTerm, binding: dict, loc: _Locals) -> bool:
        if isinstance(pat, Var):
            binding[pat.name] = t
            return True
        phead, pargs = spine(pat)
        head, args = spine(self.whnf(t, loc, unfold=True))
        if not isinstance(head, Const) or not isinstance(phead, Const):
            return False
        if head.name != phead.name or len(args) != len(pargs):
            return False
        return all(self._match(p, a, binding, loc) for p, a in zip(pargs, args))

    def convertible(self, a: LpTerm, b: LpTerm, loc: _Locals = _EMPTY) -> bool:
        if a == b:
            return True
        a = self.whnf(a, loc)
        b = self.whnf(b, loc)
        if a == b:
            return True
        if self._same_shape(a, b, loc):
            return True
        ua = self._unfold_head(a, loc)
        ub = self._unfold_head(b, loc)
        if ua is None and ub is None:
            return False
        return self.convertible(a if ua is None else ua, b if ub is None else ub, loc)

    def _unfold_head(self, t: LpTerm, loc: _Locals) -> LpTerm | None:
        head, args = spine(t)
        val = None
        if isinstance(head, Const):
            val = self.ctx.value_of(head.name)
        elif isinstance(head, Var):
            frame = loc.find(head.name)
            val = frame.value if frame is not None else None
        return None if val is None else app(val, *args)

    def _same_shape(self, a: LpTerm, b: LpTerm, loc: _Locals) -> bool:
        if isinstance(a, (Kind, Type)) or isinstance(b, (Kind, Type)):
            return a == b
        if isinstance(a, Pi) and isinstance(b, Pi):
            if not self.convertible(a.domain, b.domain, loc):
                return False
            x = _fresh("x")
            return self.convertible(instantiate(a.var, a.codomain, Var(x)),
                                    instantiate(b.var, b.codomain, Var(x)), loc)
        if isinstance(a, Lam) and isinstance(b, Lam):
            x = _fresh("x")
            return self.convertible(subst(a.body, a.var, Var(x)),
                                    subst(b.body, b.var, Var(x)), loc)
        if isinstance(a, Lam) or isinstance(b, Lam):
            lam, other = (a, b) if isinstance(a, Lam) else (b, a)
            if isinstance(other, Pi):
                return False
            x = _fresh("x")
            return self.convertible(subst(lam.body, lam.var, Var(x)), App(other, Var(x)), loc)
        if isinstance(a, Pi) or isinstance(b, Pi):
            return False
        ha, aa = spine(a)
        hb, ab = spine(b)
        if ha != hb or len(aa) != len(ab):
            return False
        return all(self.convertible(x, y, loc) for x, y in zip(aa, ab))

    # -- typing

    def infer(self, t: LpTerm, loc: _Locals = _EMPTY) -> LpTerm:
        if isinstance(t, Type):
            return Kind()
        if isinstance(t, Kind):
            raise TypeError("KIND has no type")
        if isinstance(t, Const):
            return self.ctx.type_of(t.name)
        if isinstance(t, Var):
            frame = loc.find(t.name)
            if frame is None:
                raise UnboundName(f"unbound variable {t.name!r}")
            return frame.type
        if isinstance(t, App):
            head, args = spine(t)
            ty = self.infer(head, loc)
            for a in args:
                pi = self.whnf(ty, loc, unfold=True)
                if not isinstance(pi, Pi):
                    raise TypeError(f"applying a non-function of type {_show(ty)}")
                self.check(a, pi.domain, loc)
                ty = instantiate(pi.var, pi.codomain, a)
            return ty
        if isinstance(t, Pi):
            self._expect_sort(t.domain, loc, allowed=(Type,))
            var, body, loc2 = self._enter(t.var, t.codomain, t.domain, loc)
            s = self.whnf(self.infer(body, loc2), loc2, unfold=True)
            if not isinstance(s, (Type, Kind)):
                raise TypeError(f"codomain is not a type: {_show(t.codomain)}")
            return s
        if isinstance(t, Lam):
            if t.annot is None:
                raise CannotInfer(f"cannot infer the type of an unannotated abstraction \\{t.var}")
            self._expect_sort(t.annot, loc, allowed=(Type,))
            var, body, loc2 = self._enter(t.var, t.body, t.annot, loc)
            bt = self.infer(body, loc2)
            if isinstance(bt, Kind):
                raise TypeError("abstraction over a kind")
            return Pi(var, t.annot, bt)
        if isinstance(t, Let):
            vt = self.infer(t.value, loc)
            var, body, loc2 = self._enter(t.var, t.body, vt, loc, t.value)
            bt = self.infer(body, loc2)
            return subst(bt, var, t.value)
        raise TypeError(f"not a term: {t!r}")

    def check(self, t: LpTerm, ty: LpTerm, loc: _Locals = _EMPTY) -> None:
        # let chains are walked iteratively; long proofs nest deeply
        while isinstance(t, Let):
            vt = self.infer(t.value, loc)
            var, body, loc = self._enter(t.var, t.body, vt, loc, t.value)
            t = body
        if isinstance(t, Lam):
            pi = self.whnf(ty, loc, unfold=True)
            if not isinstance(pi, Pi):
                raise TypeError(f"abstraction checked against non-product {_show(ty)}")
            if t.annot is not None:
                self._expect_sort(t.annot, loc, allowed=(Type,))
                if not self.convertible(t.annot, pi.domain, loc):
                    raise TypeError(f"binder {t.var} annotated {_show(t.annot)}, "
                                    f"expected {_show(pi.domain)}")
            var, body, loc2 = self._enter(t.var, t.body, pi.domain, loc)
            self.check(body, instantiate(pi.var, pi.codomain, Var(var)), loc2)
            return
        found = self.infer(t, loc)
        if not self.convertible(found, ty, loc):
            raise TypeError(f"expected {_show(ty)}, found {_show(found)} for {_show(t, 200)}")

    def _enter(self, var, body, ty, loc, value=None):
        if var == ARROW_VAR:
            var = _fresh("_")
        elif var in loc.names:
            nv = _fresh(var)
            body = subst(body, var, Var(nv))
            var = nv
        return var, body, loc.push(var, ty, value)

    def _expect_sort(self, t: LpTerm, loc: _Locals, allowed) -> None:
        s = self.whnf(self.infer(t, loc), loc, unfold=True)
        if not isinstance(s, allowed):
            raise TypeError(f"{_show(t)} is not a type")


def _show(t: LpTerm, limit: int = 400) -> str:
    try:
        s = print_term(t, bound=free_vars(t))
    except Exception:
        s = repr(t)
    return s if len(s) <= limit else s[:limit] + "..."


# --------------------------------------------------------------------------
# Public API


def qualify(decls: Iterable[LpDecl], module: str, ctx: Context) -> list[LpDecl]:
    """Resolve unqualified constants to ``module.name``."""
    local: set[str] = set()
    out = []

    def q(name: str) -> str:
        if "." in name:
            mod = name.rsplit(".", 1)[0]
            if mod not in ctx.modules and mod != module:
                raise UnboundName(f"unknown module {mod!r} in {name!r}")
            return name
        if name not in local:
            raise UnboundName(f"unknown constant {name!r} in module {module}")
        return f"{module}.{name}"

    for d in decls:
        if isinstance(d, SymbolDecl):
            out.append(SymbolDecl(d.name, map_consts(d.type, q)))
            local.add(d.name)
        elif isinstance(d, RuleDecl):
            out.append(RuleDecl(map_consts(d.lhs, q), map_consts(d.rhs, q)))
        elif isinstance(d, DefinitionDecl):
            params = tuple((n, map_consts(t, q)) for n, t in d.params)
            out.append(DefinitionDecl(d.name, params, map_consts(d.type, q), map_consts(d.body, q)))
            local.add(d.name)
        else:
            out.append(d)
    return out


def check_declarations(decls: Iterable[LpDecl], ambient: Context | None = None,
                       module: str = "main") -> Context:
    """Check a module's declarations in order and return the extended context.

    ``ambient`` is not modified.
    """
    ctx = Context() if ambient is None else ambient.copy()
    if module in ctx.modules:
        raise CheckError(f"module {module!r} is already loaded")
    decls = list(decls)
    for d in decls:
        if isinstance(d, RequireDecl) and d.module not in ctx.modules:
            raise UnboundName(f"required module {d.module!r} is not loaded")
    ck = Checker(ctx)
    for d in qualify(decls, module, ctx):
        if isinstance(d, SymbolDecl):
            name = f"{module}.{d.name}"
            if name in ctx.symbols:
                raise TypeError("symbol declared twice", name)
            try:
                ck._expect_sort(d.type, _EMPTY, allowed=(Type, Kind))
            except UnboundName:
                raise
            except CheckError as e:
                raise TypeError(str(e), name) from None
            ctx.symbols[name] = (d.type, None)
        elif isinstance(d, RuleDecl):
            _check_rule(d, ctx)
        elif isinstance(d, DefinitionDecl):
            name = f"{module}.{d.name}"
            if name in ctx.symbols:
                raise TypeError("symbol declared twice", name)
            full_type = d.type
            value = d.body
            for pname, pty in reversed(d.params):
                full_type = Pi(pname, pty, full_type)
                value = Lam(pname, pty, value)
            try:
                ck._expect_sort(full_type, _EMPTY, allowed=(Type, Kind))
                ck.check(value, full_type)
            except UnboundName:
                raise
            except CheckError as e:
                raise TypeError(str(e), name) from None
            ctx.symbols[name] = (full_type, value)
    ctx.modules.add(module)
    return ctx


def _check_rule(d: RuleDecl, ctx: Context) -> None:
    head, args = spine(d.lhs)
    if not isinstance(head, Const) or head.name not in ctx.symbols:
        raise TypeError("rule head must be a declared constant")
    seen: list[str] = []

    def collect(p):
        h, a = spine(p)
        if isinstance(h, Var):
            if a:
                raise TypeError("higher-order patterns are not supported")
            seen.append(h.name)
        elif isinstance(h, Const):
            if h.name not in ctx.symbols:
                raise UnboundName(f"unknown constant {h.name!r} in rule")
            for x in a:
                collect(x)
        else:
            raise TypeError("unsupported pattern")

    for a in args:
        collect(a)
    if len(seen) != len(set(seen)):
        raise TypeError("rule patterns must be linear")
    extra = free_vars(d.rhs) - set(seen)
    if extra:
        raise TypeError(f"rule right-hand side uses unbound {sorted(extra)}")
    for c in constants(d.rhs):
        if c not in ctx.symbols:
            raise UnboundName(f"unknown constant {c!r} in rule")
    ctx.rules.setdefault(head.name, []).append(Rule(head.name, tuple(args), d.rhs))


def convertible(a: LpTerm, b: LpTerm, ctx: Context) -> bool:
    return Checker(ctx).convertible(a, b)


def infer_type(t: LpTerm, ctx: Context) -> LpTerm:
    return Checker(ctx).infer(t)


def check_term(t: LpTerm, ty: LpTerm, ctx: Context) -> None:
    Checker(ctx).check(t, ty)
