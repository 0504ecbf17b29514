"""TPTP syntax: first-order terms and formulas, a parser for ``cnf``/``fof``
declarations, and a printer for FOF problems.

Only the fragment needed for clausal traces and the generated FOF
subproblems is supported. Binary connectives are right-associated when a
chain is parsed (``a | b | c`` is ``Or(a, Or(b, c))``).
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterator, Union


# --------------------------------------------------------------------------
# Terms and formulas


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Fn:
    """Function application; constants have no arguments."""
    symbol: str
    args: tuple = ()

    def __str__(self) -> str:
        return print_term(self)


Term = Union[Var, Fn]


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple = ()


@dataclass(frozen=True)
class Equal:
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class FalseF:
    pass


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


Formula = Union[Atom, Equal, TrueF, FalseF, Not, And, Or, Implies, Forall, Exists]
BINARY = (And, Or, Implies)
QUANTIFIERS = (Forall, Exists)
LITERAL_ATOMS = (Atom, Equal)


class Role(str, enum.Enum):
    AXIOM = "axiom"
    HYPOTHESIS = "hypothesis"
    DEFINITION = "definition"
    ASSUMPTION = "assumption"
    LEMMA = "lemma"
    THEOREM = "theorem"
    CONJECTURE = "conjecture"
    NEGATED_CONJECTURE = "negated_conjecture"
    PLAIN = "plain"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class AnnotatedFormula:
    language: str  # "cnf" or "fof"
    name: str
    role: Role
    formula: Formula
    annotations: str | None = None


def disjunction(literals: list) -> Formula:
    """Right-nested disjunction; the empty clause is ``$false``."""
    if not literals:
        return FalseF()
    out = literals[-1]
    for lit in reversed(literals[:-1]):
        out = Or(lit, out)
    return out


def implication_chain(premises: list, conclusion: Formula) -> Formula:
    out = conclusion
    for p in reversed(premises):
        out = Implies(p, out)
    return out


# --------------------------------------------------------------------------
# Errors


class TPTPError(Exception):
    pass


class SyntaxError(TPTPError):  # noqa: A001 - mirrors the TPTP error name
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{line}:{column}: {message}" if line else message)
        self.line = line
        self.column = column


class DuplicateName(TPTPError):
    pass


class UnsupportedDirective(TPTPError):
    pass


class OpenFormula(TPTPError):
    pass


# --------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>%[^\n]*)
  | (?P<block>/\*.*?\*/)
  | (?P<op><=>|<~>|=>|<=|~\||~&|!=|:=)
  | (?P<punct>[()\[\],.:!?~|&=*+<>@^-])
  | (?P<dollar>\$\$?[a-z][A-Za-z0-9_]*)
  | (?P<upper>[A-Z][A-Za-z0-9_]*)
  | (?P<lower>[a-z][A-Za-z0-9_]*)
  | (?P<number>[0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?(?:/[0-9]+)?)
  | (?P<squote>'(?:[^'\\]|\\.)*')
  | (?P<dquote>"(?:[^"\\]|\\.)*")
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int
    end: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            line, col = line_col(text, pos)
            raise SyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind not in ("ws", "comment", "block"):
            kind = "punct" if kind == "op" else kind
            tokens.append(Token(kind, m.group(), pos, m.end()))
        pos = m.end()
    return tokens


def line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


_PLAIN_NAME = re.compile(r"[a-z][A-Za-z0-9_]*\Z")


def _name_of(tok: Token) -> str:
    if tok.kind == "squote":
        inner = tok.text[1:-1]
        if _PLAIN_NAME.match(inner):
            return inner
        return tok.text
    return tok.text


class TokenStream:
    """Cursor over a token list with error reporting against the source."""

    def __init__(self, text: str, tokens: list[Token] | None = None):
        self.text = text
        self.tokens = tokenize(text) if tokens is None else tokens
        self.i = 0

    def peek(self, k: int = 0) -> Token | None:
        j = self.i + k
        return self.tokens[j] if j < len(self.tokens) else None

    def at(self, text: str, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok is not None and tok.text == text and tok.kind in ("punct", "lower", "dollar")

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            self.error("unexpected end of input")
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok is None or tok.text != text:
            self.error(f"expected {text!r}", tok)
        self.i += 1
        return tok

    def error(self, message: str, tok: Token | None = None):
        pos = tok.pos if tok is not None else len(self.text)
        if tok is not None:
            message = f"{message}, found {tok.text!r}"
        line, col = line_col(self.text, pos)
        raise SyntaxError(message, line, col)

    def skip_general_term(self) -> None:
        """Skip one balanced TPTP general term (used for annotations)."""
        depth = 0
        start = self.i
        while True:
            tok = self.peek()
            if tok is None:
                if depth == 0:
                    break
                self.error("unterminated annotation")
            if tok.text in ("(", "["):
                depth += 1
            elif tok.text in (")", "]"):
                if depth == 0:
                    break
                depth -= 1
            elif tok.text == "," and depth == 0:
                break
            self.i += 1
        if self.i == start:
            self.error("expected a term", self.peek())


# --------------------------------------------------------------------------
# Parser


def parse_file(text: str) -> list[AnnotatedFormula]:
    """Parse a sequence of ``cnf``/``fof`` declarations."""
    ts = TokenStream(text)
    decls: list[AnnotatedFormula] = []
    seen: set[str] = set()
    while ts.peek() is not None:
        tok = ts.next()
        if tok.text == "include":
            line, col = line_col(text, tok.pos)
            raise UnsupportedDirective(f"{line}:{col}: include directives are not supported")
        if tok.text not in ("cnf", "fof"):
            ts.error("expected 'cnf' or 'fof'", tok)
        decl = _parse_declaration(ts, tok.text)
        if decl.name in seen:
            line, col = line_col(text, tok.pos)
            raise DuplicateName(f"{line}:{col}: duplicate formula name {decl.name!r}")
        seen.add(decl.name)
        decls.append(decl)
    return decls


def parse_formula(text: str) -> Formula:
    """Parse a single formula (no surrounding declaration)."""
    ts = TokenStream(text)
    f = _formula(ts)
    if ts.peek() is not None:
        ts.error("trailing input", ts.peek())
    return f


def _parse_declaration(ts: TokenStream, language: str) -> AnnotatedFormula:
    ts.expect("(")
    name_tok = ts.next()
    if name_tok.kind not in ("lower", "number", "squote"):
        ts.error("expected a formula name", name_tok)
    ts.expect(",")
    role_tok = ts.next()
    try:
        role = Role(role_tok.text)
    except ValueError:
        ts.error("unknown role", role_tok)
    ts.expect(",")
    formula = _formula(ts)
    annotations = None
    if ts.at(","):
        ts.next()
        start = ts.peek()
        ts.skip_general_term()
        while ts.at(","):
            ts.next()
            ts.skip_general_term()
        end = ts.tokens[ts.i - 1]
        annotations = ts.text[start.pos:end.end]
    ts.expect(")")
    ts.expect(".")
    return AnnotatedFormula(language, _name_of(name_tok), role, formula, annotations)


def _formula(ts: TokenStream) -> Formula:
    left = _chain(ts)
    if ts.at("=>"):
        ts.next()
        return Implies(left, _formula(ts))
    if ts.at("<="):
        ts.next()
        return Implies(_formula(ts), left)
    tok = ts.peek()
    if tok is not None and tok.text in ("<=>", "<~>", "~|", "~&"):
        ts.error("unsupported connective", tok)
    return left


def _chain(ts: TokenStream) -> Formula:
    first = _unary(ts)
    tok = ts.peek()
    if tok is None or tok.text not in ("|", "&"):
        return first
    op = tok.text
    items = [first]
    while ts.at(op):
        ts.next()
        items.append(_unary(ts))
    tok = ts.peek()
    if tok is not None and tok.text in ("|", "&"):
        ts.error("mixed '|' and '&' need parentheses", tok)
    ctor = Or if op == "|" else And
    out = items[-1]
    for item in reversed(items[:-1]):
        out = ctor(item, out)
    return out


def _unary(ts: TokenStream) -> Formula:
    tok = ts.peek()
    if tok is None:
        ts.error("expected a formula")
    if tok.text == "~":
        ts.next()
        return Not(_unary(ts))
    if tok.text in ("!", "?") and ts.at("[", 1):
        ts.next()
        ts.expect("[")
        names = [_variable(ts)]
        while ts.at(","):
            ts.next()
            names.append(_variable(ts))
        ts.expect("]")
        ts.expect(":")
        body = _unary(ts)
        ctor = Forall if tok.text == "!" else Exists
        for v in reversed(names):
            body = ctor(v, body)
        return body
    if tok.text == "(":
        ts.next()
        f = _formula(ts)
        ts.expect(")")
        return f
    return _atomic(ts)


def _variable(ts: TokenStream) -> str:
    tok = ts.next()
    if tok.kind != "upper":
        ts.error("expected a variable", tok)
    if ts.at(":"):
        ts.error("typed variables are not supported", ts.peek())
    return tok.text


def _atomic(ts: TokenStream) -> Formula:
    tok = ts.peek()
    if tok.kind == "dollar" and tok.text in ("$true", "$false") and not ts.at("(", 1):
        ts.next()
        return TrueF() if tok.text == "$true" else FalseF()
    lhs = _term(ts)
    if ts.at("="):
        ts.next()
        return Equal(lhs, _term(ts))
    if ts.at("!="):
        ts.next()
        return Not(Equal(lhs, _term(ts)))
    if isinstance(lhs, Var):
        ts.error("a variable is not a formula", tok)
    return Atom(lhs.symbol, lhs.args)


def _term(ts: TokenStream) -> Term:
    tok = ts.next()
    if tok.kind == "upper":
        return Var(tok.text)
    if tok.kind not in ("lower", "squote"):
        ts.error("expected a term", tok)
    args: list[Term] = []
    if ts.at("("):
        ts.next()
        args.append(_term(ts))
        while ts.at(","):
            ts.next()
            args.append(_term(ts))
        ts.expect(")")
    return Fn(_name_of(tok), tuple(args))


# --------------------------------------------------------------------------
# Printer


def print_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if not t.args:
        return t.symbol
    return f"{t.symbol}({', '.join(print_term(a) for a in t.args)})"


def _is_unitary(f: Formula) -> bool:
    return isinstance(f, (Atom, Equal, TrueF, FalseF)) or (
        isinstance(f, Not) and isinstance(f.body, (Atom, TrueF, FalseF, Not))
    )


def print_formula(f: Formula) -> str:
    if isinstance(f, Atom):
        return print_term(Fn(f.predicate, f.args))
    if isinstance(f, Equal):
        return f"{print_term(f.lhs)} = {print_term(f.rhs)}"
    if isinstance(f, TrueF):
        return "$true"
    if isinstance(f, FalseF):
        return "$false"
    if isinstance(f, Not):
        if isinstance(f.body, (Atom, TrueF, FalseF, Not)):
            return "~" + print_formula(f.body)
        return f"~({print_formula(f.body)})"
    if isinstance(f, Implies):
        return f"({print_formula(f.left)}) => ({print_formula(f.right)})"
    if isinstance(f, (And, Or)):
        op = " | " if isinstance(f, Or) else " & "
        left = print_formula(f.left)
        if not _is_unitary(f.left):
            left = f"({left})"
        right = print_formula(f.right)
        if not (_is_unitary(f.right) or type(f.right) is type(f)):
            right = f"({right})"
        return left + op + right
    if isinstance(f, QUANTIFIERS):
        kind = type(f)
        names = []
        body = f
        while type(body) is kind:
            names.append(body.var)
            body = body.body
        sym = "!" if kind is Forall else "?"
        return f"{sym}[{', '.join(names)}] : ({print_formula(body)})"
    raise TypeError(f"not a formula: {f!r}")


def print_fof(decl: AnnotatedFormula) -> str:
    """Render a closed FOF declaration as a single TPTP line."""
    if decl.language != "fof":
        raise ValueError(f"print_fof expects a fof declaration, got {decl.language}")
    free = free_variables(decl.formula)
    if free:
        raise OpenFormula(f"{decl.name}: free variables {', '.join(free)}")
    return f"fof({decl.name}, {decl.role.value}, ({print_formula(decl.formula)})).\n"


# --------------------------------------------------------------------------
# Variables


def term_variables(t: Term) -> Iterator[str]:
    if isinstance(t, Var):
        yield t.name
    else:
        for a in t.args:
            yield from term_variables(a)


def _free(f: Formula, bound: frozenset, out: set) -> None:
    if isinstance(f, Atom):
        for a in f.args:
            out.update(v for v in term_variables(a) if v not in bound)
    elif isinstance(f, Equal):
        for side in (f.lhs, f.rhs):
            out.update(v for v in term_variables(side) if v not in bound)
    elif isinstance(f, Not):
        _free(f.body, bound, out)
    elif isinstance(f, BINARY):
        _free(f.left, bound, out)
        _free(f.right, bound, out)
    elif isinstance(f, QUANTIFIERS):
        _free(f.body, bound | {f.var}, out)


def free_variables(f: Formula) -> list[str]:
    """Free variables of ``f``, deduplicated and sorted by name."""
    out: set[str] = set()
    _free(f, frozenset(), out)
    return sorted(out)


def is_clausal(f: Formula) -> bool:
    """True for quantifier-free disjunctions of literals."""
    if isinstance(f, Or):
        return is_clausal(f.left) and is_clausal(f.right)
    if isinstance(f, Not):
        return isinstance(f.body, (Atom, Equal, TrueF, FalseF))
    return isinstance(f, (Atom, Equal, TrueF, FalseF))
