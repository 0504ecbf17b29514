"""Running subproblem provers: the built-in tableau or an external command.

Every artifact, whoever produced it, is parsed and type-checked against the
expected statement before a step counts as proved.
"""
from __future__ import annotations

import logging
import os
import shlex
import signal
import subprocess
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from . import checker, lp, tableau, tptp
from .encoder import Encoder, encode_signature, extract_signature
from .subproblem import Subproblem

log = logging.getLogger(__name__)

BUILTIN = "builtin"
EXTERNAL = "external"

PROVED = "proved"
FAILED = "failed"
TIMEOUT = "timeout"
BACKEND_ERROR = "backend_error"
STATUSES = (PROVED, FAILED, TIMEOUT, BACKEND_ERROR)

DEFAULT_TIMEOUT = 10.0
TIMEOUT_ENV = "TRACEFORGE_TIMEOUT"
REPORT_SCHEMA = 1

_PASSTHROUGH_ENV = ("PATH", "HOME", "LANG", "LC_ALL", "TMPDIR", "TPTP")
_STDERR_EXCERPT = 2000


def default_timeout() -> float:
    raw = os.environ.get(TIMEOUT_ENV)
    if not raw:
        return DEFAULT_TIMEOUT
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"{TIMEOUT_ENV} must be a number of seconds, got {raw!r}") from None
    if value <= 0:
        raise ValueError(f"{TIMEOUT_ENV} must be positive")
    return value


@dataclass(frozen=True)
class BackendConfig:
    kind: str = BUILTIN
    command_template: str | None = None
    timeout: float = field(default_factory=default_timeout)
    workers: int = 1
    limits: tableau.ProverLimits = tableau.ProverLimits()
    name: str | None = None

    def __post_init__(self):
        if self.kind not in (BUILTIN, EXTERNAL):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == EXTERNAL:
            if not self.command_template or "{input}" not in self.command_template:
                raise ValueError("an external backend needs a command template containing {input}")
            if not shlex.split(self.command_template):
                raise ValueError("empty command template")
        if not self.timeout > 0:
            raise ValueError("timeout must be positive")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @classmethod
    def external(cls, template: str, **kw) -> "BackendConfig":
        return cls(kind=EXTERNAL, command_template=template, **kw)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind == BUILTIN:
            return BUILTIN
        return os.path.basename(shlex.split(self.command_template)[0])


class BackendError(Exception):
    pass


class Timeout(BackendError):
    def __init__(self, seconds: float):
        super().__init__(f"timed out after {seconds:g} s")
        self.seconds = seconds


class NonzeroExit(BackendError):
    def __init__(self, code: int, stderr: str):
        super().__init__(f"exit code {code}" + (f": {stderr}" if stderr else ""))
        self.code = code
        self.stderr = stderr


class InvalidProofArtifact(BackendError):
    pass


@dataclass(frozen=True)
class StepOutcome:
    name: str
    status: str
    proof_path: Path | None = None
    diagnostic: str = ""
    elapsed: float = 0.0
    backend: str = BUILTIN
    attempts: tuple = ()  # (backend label, status) per attempt

    def to_json(self, timings: bool = False) -> dict:
        out = {"name": self.name, "status": self.status, "backend": self.backend}
        if self.diagnostic:
            out["diagnostic"] = self.diagnostic
        if len(self.attempts) > 1:
            out["attempts"] = [{"backend": b, "status": s} for b, s in self.attempts]
        if timings:
            out["elapsed_ms"] = round(self.elapsed * 1000)
        return out


@dataclass
class ProveReport:
    outcomes: list = field(default_factory=list)
    unreachable: list = field(default_factory=list)

    @property
    def counts(self) -> dict:
        c = dict.fromkeys(STATUSES, 0)
        for o in self.outcomes:
            c[o.status] += 1
        return c

    @property
    def attempted(self) -> int:
        return len(self.outcomes)

    @property
    def proved(self) -> int:
        return self.counts[PROVED]

    @property
    def ratio(self) -> float:
        return self.proved / self.attempted if self.outcomes else 1.0

    @property
    def complete(self) -> bool:
        return all(o.status == PROVED for o in self.outcomes)

    def __getitem__(self, name: str) -> StepOutcome:
        for o in self.outcomes:
            if o.name == name:
                return o
        raise KeyError(name)

    def summary(self) -> dict:
        return {"attempted": self.attempted, **self.counts,
                "ratio": round(self.ratio, 6), "complete": self.complete}

    def to_json(self, timings: bool = False) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "steps": [o.to_json(timings) for o in self.outcomes],
            "summary": self.summary(),
            "unreachable": list(self.unreachable),
        }


# --------------------------------------------------------------------------
# Checking artifacts


def signature_context(sps: Iterable[Subproblem], signature_module: str,
                      signature=None) -> checker.Context:
    """Logic prelude plus the problem signature, ready to check subproofs."""
    if signature is None:
        signature = extract_signature(sp.conjecture for sp in sps)
    ctx = checker.check_declarations(lp.logic_signature(), module=lp.LOGIC)
    return checker.check_declarations(encode_signature(signature), ctx, module=signature_module)


def check_artifact(path: Path, sp: Subproblem, ctx: checker.Context,
                   signature_module: str) -> None:
    """Raise InvalidProofArtifact unless ``path`` exports ``delta`` of type
    ``Proof (φ conjecture)`` using only the logic and the signature."""
    module = sp.ident
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise InvalidProofArtifact(f"cannot read {path.name}: {e}") from None
    try:
        decls = lp.parse_decl(text, modules=ctx.modules)
        for d in decls:
            if isinstance(d, lp.RequireDecl) and d.module not in (lp.LOGIC, signature_module):
                raise InvalidProofArtifact(f"unexpected dependency {d.module!r}")
            if isinstance(d, lp.RuleDecl):
                raise InvalidProofArtifact("proof modules may not add rewrite rules")
        checked = checker.check_declarations(decls, ctx, module=module)
        entry = checked.symbols.get(f"{module}.delta")
        if entry is None:
            raise InvalidProofArtifact("no definition named delta")
        if entry[1] is None:
            raise InvalidProofArtifact("delta is declared without a proof")
        expected = lp.proof_of(Encoder(signature_module).formula(sp.conjecture))
        if not checker.convertible(entry[0], expected, checked):
            raise InvalidProofArtifact("delta does not have the expected type")
    except (lp.LpError, checker.CheckError) as e:
        raise InvalidProofArtifact(f"{type(e).__name__}: {e}") from None
    except RecursionError:
        raise InvalidProofArtifact("proof term too deep to check") from None


# --------------------------------------------------------------------------
# Running provers


def _scrubbed_env() -> dict:
    return {k: os.environ[k] for k in _PASSTHROUGH_ENV if k in os.environ}


def _kill_group(pid: int, grace: float = 0.5) -> None:
    """SIGKILL the group, then wait briefly until its members have exited."""
    try:
        os.killpg(pid, signal.SIGKILL)
    except OSError:
        return
    deadline = time.monotonic() + grace
    while time.monotonic() < deadline and _group_alive(pid):
        time.sleep(0.005)


def _group_alive(pgid: int) -> bool:
    """Whether any non-zombie process is left in the group."""
    proc = Path("/proc")
    if not proc.is_dir():
        try:
            os.killpg(pgid, 0)
        except OSError:
            return False
        return True
    for entry in proc.iterdir():
        if not entry.name.isdigit():
            continue
        try:
            fields = (entry / "stat").read_text().rsplit(")", 1)[1].split()
        except (OSError, IndexError):
            continue
        if int(fields[2]) == pgid and fields[0] not in ("Z", "X"):
            return True
    return False


def run_external(template: str, input_path: Path, output_path: Path, timeout: float) -> None:
    """Run the command; its proof ends up in ``output_path``.

    Without an ``{output}`` placeholder the command's stdout is the proof.
    The whole process group is killed on timeout and after exit.
    """
    argv = [a.replace("{input}", str(input_path)).replace("{output}", str(output_path))
            for a in shlex.split(template)]
    capture = "{output}" not in template
    try:
        proc = subprocess.Popen(argv, stdin=subprocess.DEVNULL, stdout=subprocess.PIPE,
                                stderr=subprocess.PIPE, env=_scrubbed_env(),
                                cwd=str(input_path.parent), start_new_session=True)
    except OSError as e:
        raise BackendError(f"cannot start {argv[0]}: {e}") from None
    try:
        try:
            stdout, stderr = proc.communicate(timeout=timeout)
        except subprocess.TimeoutExpired:
            _kill_group(proc.pid)
            proc.communicate()
            raise Timeout(timeout) from None
    finally:
        _kill_group(proc.pid)
        if proc.poll() is None:
            proc.kill()
            proc.wait()
    if proc.returncode != 0:
        excerpt = stderr.decode("utf-8", "replace").strip()[-_STDERR_EXCERPT:]
        raise NonzeroExit(proc.returncode, excerpt)
    if capture:
        output_path.write_bytes(stdout)


def _remove(path: Path) -> None:
    try:
        path.unlink()
    except FileNotFoundError:
        pass


def prove_subproblem(cfg: BackendConfig, sp: Subproblem, outdir, signature_module: str = "sig",
                     context: checker.Context | None = None) -> StepOutcome:
    outdir = Path(outdir)
    if context is None:
        context = signature_context([sp], signature_module)
    out = outdir / f"{sp.ident}.lp"
    _remove(out)
    start = time.monotonic()
    label = cfg.label

    def outcome(status, diagnostic=""):
        if status != PROVED:
            _remove(out)
        return StepOutcome(sp.conclusion_name, status, out if status == PROVED else None,
                           diagnostic, time.monotonic() - start, label, ((label, status),))

    if cfg.kind == BUILTIN:
        try:
            result = tableau.prove(sp.conjecture, cfg.limits, signature_module,
                                   deadline=start + cfg.timeout)
        except tableau.ProverFailure as e:
            if e.reason == "timeout":
                return outcome(TIMEOUT, str(Timeout(cfg.timeout)))
            return outcome(FAILED, f"no proof found ({e.reason})")
        tableau.emit_subproof_module(sp.conclusion_name, sp.conjecture, result.term, out,
                                     signature_module)
    else:
        inp = outdir / f"{sp.ident}.p"
        if not inp.exists():
            inp.write_text(tptp.print_fof(sp.as_declaration()), encoding="utf-8")
        try:
            run_external(cfg.command_template, inp, out, cfg.timeout)
        except Timeout as e:
            return outcome(TIMEOUT, str(e))
        except NonzeroExit as e:
            return outcome(FAILED, str(e))
        except BackendError as e:
            return outcome(BACKEND_ERROR, str(e))
        if not out.exists():
            return outcome(BACKEND_ERROR, "no proof file produced")
    try:
        check_artifact(out, sp, context, signature_module)
    except InvalidProofArtifact as e:
        return outcome(BACKEND_ERROR, f"rejected proof: {e}")
    return outcome(PROVED)


def ensure_deep_stack(limit: int = 200_000, stack_bytes: int = 512 * 1024 * 1024) -> None:
    """Room for the recursive printer, parser and checker on large proofs.

    Only threads started afterwards get the larger stack.
    """
    if sys.getrecursionlimit() < limit:
        sys.setrecursionlimit(limit)
    try:
        if threading.stack_size() < stack_bytes:
            threading.stack_size(stack_bytes)
    except (ValueError, RuntimeError):
        pass


def run_deep(fn, *args):
    """Call ``fn`` on a fresh thread with a large stack and return its result."""
    ensure_deep_stack()
    box: dict = {}

    def target():
        try:
            box["value"] = fn(*args)
        except BaseException as e:  # re-raised in the caller
            box["error"] = e

    t = threading.Thread(target=target, name="traceforge-deep")
    t.start()
    t.join()
    if "error" in box:
        raise box["error"]
    return box["value"]


def prove_all(cfg: BackendConfig, sps: Sequence[Subproblem], outdir, signature_module: str = "sig",
              context: checker.Context | None = None) -> ProveReport:
    """Attempt every subproblem; outcomes follow the input order."""
    sps = list(sps)
    if context is None:
        context = signature_context(sps, signature_module)
    ensure_deep_stack()

    def one(sp):
        try:
            return prove_subproblem(cfg, sp, outdir, signature_module, context)
        except RecursionError:
            return StepOutcome(sp.conclusion_name, BACKEND_ERROR, None, "proof too deep",
                               0.0, cfg.label, ((cfg.label, BACKEND_ERROR),))

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        outcomes = list(pool.map(one, sps))
    return ProveReport(outcomes)


def prove_with_fallback(primary: BackendConfig, fallback: BackendConfig, sps: Sequence[Subproblem],
                        outdir, signature_module: str = "sig",
                        context: checker.Context | None = None) -> ProveReport:
    """Primary on everything, fallback only on what the primary missed."""
    sps = list(sps)
    if context is None:
        context = signature_context(sps, signature_module)
    first = prove_all(primary, sps, outdir, signature_module, context)
    retry = [sp for sp, o in zip(sps, first.outcomes) if o.status != PROVED]
    if not retry:
        return first
    second = prove_all(fallback, retry, outdir, signature_module, context)
    redo = {o.name: o for o in second.outcomes}
    merged = []
    for o in first.outcomes:
        r = redo.get(o.name)
        if r is None:
            merged.append(o)
            continue
        attempts = o.attempts + r.attempts
        best = r if r.status == PROVED else o
        merged.append(replace(best, elapsed=o.elapsed + r.elapsed, attempts=attempts))
    return ProveReport(merged)
