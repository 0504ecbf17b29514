"""Composition of per-step subproofs into one certificate of ``Proof bot``."""
from __future__ import annotations

import os
from pathlib import Path
from typing import Iterable, Mapping

from . import lp
from .encoder import Encoder
from .lp import Const, DefinitionDecl, Let, Var, lc
from .subproblem import universal_closure
from .trace import PremiseDag, Trace, topological_order
from .tptp import Role

HYPOTHESIS_ROLES = frozenset({
    Role.AXIOM, Role.HYPOTHESIS, Role.DEFINITION, Role.ASSUMPTION,
    Role.NEGATED_CONJECTURE, Role.PLAIN,
})

PROOF_NAME = "proof_trace"


class ReconstructionError(Exception):
    pass


class MissingSubproof(ReconstructionError):
    def __init__(self, step: str):
        super().__init__(f"no subproof for step {step!r}")
        self.step = step


class LeafWithoutRole(ReconstructionError):
    def __init__(self, step: str, role):
        super().__init__(f"leaf {step!r} has role {role.value}, which cannot be assumed")
        self.step = step


class NoGoal(ReconstructionError):
    pass


def hyp_name(ident: str) -> str:
    return f"hyp_{ident}"


def lemma_name(ident: str) -> str:
    return f"lemma_{ident}"


def reconstruct(t: Trace, d: PremiseDag, proofs: Mapping[str, str],
                signature_module: str = "sig") -> DefinitionDecl:
    """``proofs`` maps each step name to the module exporting its ``delta``."""
    if d.goal is None:
        raise NoGoal("the trace has no step concluding $false")
    enc = Encoder(signature_module)
    params = []
    for leaf in d.reachable_leaves():
        step = t[leaf]
        if step.role not in HYPOTHESIS_ROLES:
            raise LeafWithoutRole(leaf, step.role)
        ty = lp.proof_of(enc.formula(universal_closure(step.formula)))
        params.append((hyp_name(step.ident), ty))

    bindings = []
    for name in topological_order(d, reachable_only=True):
        module = proofs.get(name)
        if module is None:
            raise MissingSubproof(name)
        args = [Var(hyp_name(t[p].ident) if d.is_leaf(p) else lemma_name(t[p].ident))
                for p in d.premises_of(name)]
        bindings.append((lemma_name(t[name].ident), lp.app(Const(f"{module}.delta"), *args)))

    body = Var(lemma_name(t[d.goal].ident))
    for var, value in reversed(bindings):
        body = Let(var, value, body)
    return DefinitionDecl(PROOF_NAME, tuple(params), lp.proof_of(lc("bot")), body)


def proof_module(decl: DefinitionDecl, requires: Iterable[str]) -> list:
    return [lp.RequireDecl(m) for m in requires] + [decl]


def emit_proof_file(decl: DefinitionDecl, outpath: str | os.PathLike,
                    requires: Iterable[str]) -> Path:
    """``requires``: logic, the signature, then each subproof module."""
    outpath = Path(outpath)
    outpath.write_text(lp.print_module(proof_module(decl, requires)), encoding="utf-8")
    return outpath


def required_modules(decl: DefinitionDecl, signature_module: str) -> list[str]:
    """Dependency order: logic, signature, subproofs in first-use order."""
    out = [lp.LOGIC, signature_module]
    body = decl.body
    while isinstance(body, Let):
        head, _ = lp.spine(body.value)
        if isinstance(head, Const):
            mod = head.name.rsplit(".", 1)[0]
            if mod not in out:
                out.append(mod)
        body = body.body
    return out
