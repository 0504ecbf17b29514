"""TSTP traces: annotation sources, premise extraction and the derivation DAG."""
from __future__ import annotations

import heapq
import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Union

from . import tptp
from .names import sanitize
from .tptp import FalseF, Formula, Role

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# Sources


@dataclass(frozen=True)
class NameRef:
    name: str


@dataclass(frozen=True)
class SourceList:
    items: tuple


@dataclass(frozen=True)
class Inference:
    rule_name: str
    infos: str
    parents: tuple


@dataclass(frozen=True)
class Opaque:
    raw: str


Source = Union[NameRef, SourceList, Inference, Opaque]


class TraceError(Exception):
    pass


class SourceSyntaxError(TraceError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"offset {offset}: {message}")
        self.offset = offset


class UnresolvedPremise(TraceError):
    def __init__(self, name: str, step: str):
        super().__init__(f"step {step!r} cites unknown premise {name!r}")
        self.name = name
        self.step = step


class CyclicTrace(TraceError):
    def __init__(self, cycle: list[str]):
        super().__init__("cyclic derivation: " + " -> ".join(cycle))
        self.cycle = cycle


class NoFalseConclusion(TraceError):
    pass


class MultipleGoals(UserWarning):
    pass


class UnsupportedTrace(TraceError):
    pass


def parse_source(raw: str) -> Source:
    """Parse the annotation text of a declaration into a Source tree.

    Trailing useful-info (``, [proof]``) after the source is ignored.
    """
    try:
        ts = tptp.TokenStream(raw)
    except tptp.SyntaxError as e:
        raise SourceSyntaxError(str(e), 0) from None
    try:
        src = _source(ts)
        if ts.peek() is not None:
            if not ts.at(","):
                ts.error("unexpected text after source", ts.peek())
            ts.next()
            ts.skip_general_term()
            while ts.at(","):
                ts.next()
                ts.skip_general_term()
            if ts.peek() is not None:
                ts.error("unexpected text after useful info", ts.peek())
    except tptp.SyntaxError as e:
        tok = ts.peek()
        raise SourceSyntaxError(str(e), tok.pos if tok else len(raw)) from None
    return src


def _source(ts: tptp.TokenStream) -> Source:
    tok = ts.peek()
    if tok is None:
        ts.error("expected a source")
    if tok.text == "[":
        ts.next()
        items = []
        if not ts.at("]"):
            items.append(_source(ts))
            while ts.at(","):
                ts.next()
                items.append(_source(ts))
        ts.expect("]")
        return SourceList(tuple(items))
    if tok.text == "inference" and ts.at("(", 1):
        ts.next()
        ts.expect("(")
        rule = ts.next()
        ts.expect(",")
        start = ts.peek()
        ts.skip_general_term()
        infos = ts.text[start.pos:ts.tokens[ts.i - 1].end]
        ts.expect(",")
        ts.expect("[")
        parents = []
        if not ts.at("]"):
            parents.append(_source(ts))
            while ts.at(","):
                ts.next()
                parents.append(_source(ts))
        ts.expect("]")
        ts.expect(")")
        return Inference(tptp._name_of(rule), infos, tuple(parents))
    if tok.kind in ("lower", "number", "squote") and not ts.at("(", 1):
        ts.next()
        if ts.at(":"):
            # ``name:[bindings]`` - the bindings are not needed
            ts.next()
            ts.skip_general_term()
        return NameRef(tptp._name_of(tok))
    start = ts.peek()
    ts.skip_general_term()
    return Opaque(ts.text[start.pos:ts.tokens[ts.i - 1].end])


def premises(s: Source) -> list[str]:
    """Leaf names cited by a source, in left-to-right first-occurrence order."""
    out: dict[str, None] = {}
    stack = [s]
    while stack:
        node = stack.pop()
        if isinstance(node, NameRef):
            out.setdefault(node.name)
        elif isinstance(node, SourceList):
            stack.extend(reversed(node.items))
        elif isinstance(node, Inference):
            stack.extend(reversed(node.parents))
    return list(out)


def contains_inference(s: Source | None) -> bool:
    if isinstance(s, Inference):
        return True
    if isinstance(s, SourceList):
        return any(contains_inference(i) for i in s.items)
    return False


# --------------------------------------------------------------------------
# Traces


@dataclass(frozen=True)
class TraceStep:
    name: str
    role: Role
    formula: Formula
    source: Source | None = None

    @property
    def is_inference(self) -> bool:
        # bare name sources are copy steps with a single premise
        return contains_inference(self.source) or isinstance(self.source, NameRef)

    @property
    def ident(self) -> str:
        return sanitize(self.name)


@dataclass(frozen=True)
class Trace:
    steps: tuple
    index: dict = field(compare=False, repr=False)
    order: dict = field(compare=False, repr=False)

    @classmethod
    def from_steps(cls, steps: Iterable[TraceStep]) -> "Trace":
        steps = tuple(steps)
        index = {}
        for s in steps:
            if s.name in index:
                raise tptp.DuplicateName(f"duplicate step name {s.name!r}")
            index[s.name] = s
        return cls(steps, index, {s.name: i for i, s in enumerate(steps)})

    def __getitem__(self, name: str) -> TraceStep:
        return self.index[name]

    def position(self, name: str) -> int:
        return self.order[name]


def build_trace(decls: list[tptp.AnnotatedFormula]) -> Trace:
    steps = []
    for d in decls:
        if d.language != "cnf":
            raise UnsupportedTrace(f"{d.name}: only cnf traces are supported, got {d.language}")
        if not tptp.is_clausal(d.formula):
            raise UnsupportedTrace(f"{d.name}: not a clause")
        source = parse_source(d.annotations) if d.annotations else None
        steps.append(TraceStep(d.name, d.role, d.formula, source))
    return Trace.from_steps(steps)


def load_trace(text: str) -> Trace:
    return build_trace(tptp.parse_file(text))


# --------------------------------------------------------------------------
# Derivation DAG


@dataclass(frozen=True)
class PremiseDag:
    nodes: tuple  # step names, file order
    edges: tuple  # (premise, conclusion)
    roots: tuple  # leaf steps, file order
    goal: str | None
    parents: dict = field(compare=False, repr=False)

    def premises_of(self, name: str) -> list[str]:
        return list(self.parents.get(name, ()))

    def is_leaf(self, name: str) -> bool:
        return name not in self.parents

    @property
    def inference_steps(self) -> list[str]:
        return [n for n in self.nodes if n in self.parents]

    def ancestors(self, name: str) -> set[str]:
        seen = {name}
        stack = [name]
        while stack:
            for p in self.parents.get(stack.pop(), ()):
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def reachable_leaves(self) -> list[str]:
        if self.goal is None:
            return list(self.roots)
        used = self.ancestors(self.goal)
        return [r for r in self.roots if r in used]

    def unreachable(self) -> list[str]:
        """Inference steps that do not contribute to the goal."""
        if self.goal is None:
            return []
        used = self.ancestors(self.goal)
        return [n for n in self.inference_steps if n not in used]

    def to_json(self) -> dict:
        return {
            "nodes": [{"name": n, "id": sanitize(n), "premises": self.premises_of(n),
                       "kind": "leaf" if self.is_leaf(n) else "inference"}
                      for n in self.nodes],
            "edges": [list(e) for e in self.edges],
            "roots": list(self.roots),
            "goal": self.goal,
        }

    def to_dot(self) -> str:
        lines = ["digraph trace {"]
        for n in self.nodes:
            shape = "box" if self.is_leaf(n) else "ellipse"
            extra = ", peripheries=2" if n == self.goal else ""
            lines.append(f"  {json.dumps(n)} [shape={shape}{extra}];")
        for p, c in self.edges:
            lines.append(f"  {json.dumps(p)} -> {json.dumps(c)};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_dag(t: Trace, require_goal: bool = True) -> PremiseDag:
    parents: dict[str, tuple] = {}
    edges = []
    for step in t.steps:
        if not step.is_inference:
            continue
        ps = premises(step.source)
        for p in ps:
            if p not in t.index:
                raise UnresolvedPremise(p, step.name)
            edges.append((p, step.name))
        parents[step.name] = tuple(ps)
        later = [p for p in ps if t.position(p) >= t.position(step.name)]
        if later:
            log.warning("step %s cites later steps %s", step.name, ", ".join(later))

    cycle = _find_cycle([s.name for s in t.steps], parents)
    if cycle:
        raise CyclicTrace(cycle)

    goals = [s.name for s in t.steps
             if s.name in parents and isinstance(s.formula, FalseF)]
    if len(goals) > 1:
        warnings.warn(f"several steps conclude $false ({', '.join(goals)}); using {goals[0]}",
                      MultipleGoals, stacklevel=2)
    if not goals and require_goal:
        raise NoFalseConclusion("no inference step concludes $false")
    roots = tuple(s.name for s in t.steps if s.name not in parents)
    return PremiseDag(tuple(s.name for s in t.steps), tuple(edges), roots,
                      goals[0] if goals else None, parents)


def _find_cycle(nodes: list[str], parents: dict) -> list[str] | None:
    WHITE, GREY, BLACK = 0, 1, 2
    colour = dict.fromkeys(nodes, WHITE)
    for start in nodes:
        if colour[start] != WHITE:
            continue
        path = [start]
        colour[start] = GREY
        iters = [iter(parents.get(start, ()))]
        while iters:
            nxt = next(iters[-1], None)
            if nxt is None:
                colour[path.pop()] = BLACK
                iters.pop()
            elif colour[nxt] == GREY:
                i = path.index(nxt)
                # parents point backwards, so reverse for premise -> conclusion
                return list(reversed(path[i:] + [nxt]))
            elif colour[nxt] == WHITE:
                colour[nxt] = GREY
                path.append(nxt)
                iters.append(iter(parents.get(nxt, ())))
    return None


def topological_order(d: PremiseDag, reachable_only: bool = True) -> list[str]:
    """Inference steps with premises first, ties broken by file order.

    With ``reachable_only`` (and a goal) only the steps the goal depends on
    are returned; see ``PremiseDag.unreachable`` for the rest.
    """
    keep = set(d.inference_steps)
    if reachable_only and d.goal is not None:
        keep &= d.ancestors(d.goal)
    pos = {n: i for i, n in enumerate(d.nodes)}
    pending = {n: sum(1 for p in set(d.parents[n]) if p in keep) for n in keep}
    children: dict[str, list[str]] = {}
    for n in keep:
        for p in set(d.parents[n]):
            if p in keep:
                children.setdefault(p, []).append(n)
    heap = [(pos[n], n) for n, k in pending.items() if k == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        _, n = heapq.heappop(heap)
        out.append(n)
        for c in children.get(n, ()):
            pending[c] -= 1
            if pending[c] == 0:
                heapq.heappush(heap, (pos[c], c))
    return out
