"""One closed FOF conjecture per inference step of a trace."""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from . import tptp
from .names import sanitize
from .tptp import AnnotatedFormula, Forall, Formula, Implies, Role
from .trace import PremiseDag, Trace, topological_order


class NotAnInference(ValueError):
    pass


@dataclass(frozen=True)
class Subproblem:
    conclusion_name: str
    premise_names: tuple
    conjecture: Formula

    @property
    def ident(self) -> str:
        return sanitize(self.conclusion_name)

    def as_declaration(self) -> AnnotatedFormula:
        return AnnotatedFormula("fof", self.conclusion_name, Role.CONJECTURE, self.conjecture)


def universal_closure(f: Formula) -> Formula:
    """Bind every free variable of ``f``, outermost first in name order."""
    for v in reversed(tptp.free_variables(f)):
        f = Forall(v, f)
    return f


def make_subproblem(t: Trace, d: PremiseDag, step: str) -> Subproblem:
    if d.is_leaf(step):
        raise NotAnInference(step)
    names = d.premises_of(step)
    antecedents = [universal_closure(t[p].formula) for p in names]
    conjecture = tptp.implication_chain(antecedents, universal_closure(t[step].formula))
    return Subproblem(step, tuple(names), conjecture)


def split_subproblem(sp: Subproblem) -> tuple[list[Formula], Formula]:
    """Undo the implication chain: ``(closed premises, closed conclusion)``."""
    parts = []
    f = sp.conjecture
    for _ in sp.premise_names:
        assert isinstance(f, Implies)
        parts.append(f.left)
        f = f.right
    return parts, f


def strip_closure(f: Formula) -> Formula:
    while isinstance(f, Forall):
        f = f.body
    return f


def all_subproblems(t: Trace, d: PremiseDag, reachable_only: bool = False) -> list[Subproblem]:
    return [make_subproblem(t, d, n) for n in topological_order(d, reachable_only)]


def emit_subproblem_files(t: Trace, d: PremiseDag, outdir: str | os.PathLike) -> list[Path]:
    """Write ``<step>.p`` for every inference step; paths in topological order."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for sp in all_subproblems(t, d):
        path = outdir / f"{sp.ident}.p"
        path.write_text(tptp.print_fof(sp.as_declaration()), encoding="utf-8")
        paths.append(path)
    return paths
