"""Command line: extract, prove, reconstruct, check, pipeline, report."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import backend, checker, lp, reconstruct, tptp, trace
from .backend import BackendConfig
from .encoder import EncodingError, encode_signature, extract_signature
from .names import sanitize
from .subproblem import emit_subproblem_files, make_subproblem
from .tableau import ProverLimits

log = logging.getLogger("traceforge")

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_PARSE = 2
EXIT_DAG = 3
EXIT_UNPROVED = 4
EXIT_COMPOSITION = 5

TRACE_COPY = "trace.s"
DAG_FILE = "dag.json"
REPORT_FILE = "report.json"
LOGIC_FILE = f"{lp.LOGIC}.lp"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class Workspace:
    """An extraction directory and the trace it was built from."""
    outdir: Path
    problem: str
    trace: trace.Trace
    dag: trace.PremiseDag

    @property
    def signature_module(self) -> str:
        return f"{self.problem}_sig"

    @property
    def proof_module(self) -> str:
        return f"proof_{self.problem}"

    def targets(self) -> list[str]:
        """Inference steps to prove: those the goal depends on."""
        return trace.topological_order(self.dag, reachable_only=True)


def _dump_json(data) -> str:
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def _load(text: str, outdir: Path, problem: str) -> Workspace:
    try:
        t = trace.load_trace(text)
    except (tptp.TPTPError, trace.SourceSyntaxError, trace.UnsupportedTrace) as e:
        raise CliError(f"parse error: {e}", EXIT_PARSE) from None
    if not t.steps:
        raise CliError("parse error: the trace contains no steps", EXIT_PARSE)
    try:
        d = trace.build_dag(t, require_goal=False)
    except trace.TraceError as e:
        raise CliError(f"trace error: {e}", EXIT_DAG) from None
    ws = Workspace(outdir, problem, t, d)
    reserved = {lp.LOGIC, ws.signature_module, ws.proof_module}
    for name in d.inference_steps:
        if t[name].ident in reserved:
            raise CliError(f"trace error: step {name!r} clashes with a reserved module name",
                           EXIT_DAG)
    return ws


def _read_trace(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise CliError(f"cannot read {path}: {e}", EXIT_PARSE) from None


def extract(trace_path: Path, outdir: Path) -> Workspace:
    text = _read_trace(trace_path)
    ws = _load(text, outdir, sanitize(trace_path.stem))
    try:
        sig = extract_signature(ws.trace)
    except EncodingError as e:
        raise CliError(f"parse error: {e}", EXIT_PARSE) from None
    outdir.mkdir(parents=True, exist_ok=True)
    emit_subproblem_files(ws.trace, ws.dag, outdir)
    (outdir / LOGIC_FILE).write_text(lp.print_module(lp.logic_signature()), encoding="utf-8")
    sig_decls = [lp.RequireDecl(lp.LOGIC)] + encode_signature(sig)
    (outdir / f"{ws.signature_module}.lp").write_text(lp.print_module(sig_decls), encoding="utf-8")
    (outdir / TRACE_COPY).write_text(text, encoding="utf-8")
    dag = {
        "schema": backend.REPORT_SCHEMA,
        "problem": ws.problem,
        "signature_module": ws.signature_module,
        **ws.dag.to_json(),
        "order": trace.topological_order(ws.dag, reachable_only=False),
        "unreachable": ws.dag.unreachable(),
    }
    (outdir / DAG_FILE).write_text(_dump_json(dag), encoding="utf-8")
    return ws


def open_workspace(outdir: Path) -> Workspace:
    try:
        meta = json.loads((outdir / DAG_FILE).read_text(encoding="utf-8"))
        problem = meta["problem"]
    except (OSError, ValueError, KeyError) as e:
        raise CliError(f"{outdir} is not an extraction directory: {e}", EXIT_PARSE) from None
    return _load(_read_trace(outdir / TRACE_COPY), outdir, problem)


def prove(ws: Workspace, primary: BackendConfig, fallback: BackendConfig | None) -> backend.ProveReport:
    sps = [make_subproblem(ws.trace, ws.dag, n) for n in ws.targets()]
    ctx = backend.signature_context(sps, ws.signature_module, extract_signature(ws.trace))
    if fallback is None:
        report = backend.prove_all(primary, sps, ws.outdir, ws.signature_module, ctx)
    else:
        report = backend.prove_with_fallback(primary, fallback, sps, ws.outdir,
                                             ws.signature_module, ctx)
    report.unreachable = ws.dag.unreachable()
    return report


def compose(ws: Workspace) -> Path:
    if ws.dag.goal is None:
        raise CliError("trace error: no inference step concludes $false", EXIT_DAG)
    proofs = {}
    for name in ws.targets():
        ident = ws.trace[name].ident
        if (ws.outdir / f"{ident}.lp").exists():
            proofs[name] = ident
    try:
        decl = reconstruct.reconstruct(ws.trace, ws.dag, proofs, ws.signature_module)
    except reconstruct.MissingSubproof as e:
        raise CliError(str(e), EXIT_UNPROVED) from None
    except reconstruct.ReconstructionError as e:
        raise CliError(f"trace error: {e}", EXIT_DAG) from None
    path = ws.outdir / f"{ws.proof_module}.lp"
    reconstruct.emit_proof_file(decl, path, reconstruct.required_modules(decl, ws.signature_module))
    return path


# --------------------------------------------------------------------------
# Checking files


class _ParseFailure(Exception):
    pass


def load_module(directory: Path, name: str, ctx: checker.Context, loading: tuple = ()) -> checker.Context:
    """Check ``<name>.lp`` from ``directory`` after its requirements."""
    if name in ctx.modules:
        return ctx
    if name in loading:
        raise checker.CheckError(f"circular requirement through {name!r}")
    path = directory / f"{name}.lp"
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise _ParseFailure(f"cannot read module {name!r}: {e}") from None
    try:
        decls = lp.parse_decl(text)
    except lp.LpError as e:
        raise _ParseFailure(f"{path.name}: {e}") from None
    for d in decls:
        if isinstance(d, lp.RequireDecl):
            ctx = load_module(directory, d.module, ctx, loading + (name,))
    return checker.check_declarations(decls, ctx, module=name)


def check_file(path: Path) -> checker.Context:
    if path.suffix != ".lp":
        raise _ParseFailure(f"{path} is not a .lp file")
    return backend.run_deep(load_module, path.parent, path.stem, checker.Context())


def _check_exit(path: Path) -> tuple[int, str]:
    try:
        check_file(path)
    except _ParseFailure as e:
        return EXIT_PARSE, f"parse error: {e}"
    except checker.CheckError as e:
        return EXIT_REJECTED, f"rejected: {e}"
    except RecursionError:
        return EXIT_REJECTED, "rejected: term too deep"
    return EXIT_OK, f"{path.name}: accepted"


# --------------------------------------------------------------------------
# Reports


def aggregate(reports: list) -> dict:
    """Subproblem and whole-trace success over parsed report objects."""
    steps = proved = traces = certified = 0
    per_backend: dict = {}
    union_used = False
    for r in reports:
        if not isinstance(r, dict) or r.get("schema") != backend.REPORT_SCHEMA:
            raise ValueError("not a schema 1 report")
        entries = r.get("steps")
        if not isinstance(entries, list):
            raise ValueError("report has no step list")
        all_proved = True
        for s in entries:
            if not isinstance(s, dict) or s.get("status") not in backend.STATUSES:
                raise ValueError(f"malformed step record {s!r}")
            steps += 1
            ok = s["status"] == backend.PROVED
            proved += ok
            all_proved &= ok
            attempts = s.get("attempts") or [{"backend": s.get("backend"), "status": s["status"]}]
            if len(attempts) > 1:
                union_used = True
            for a in attempts:
                b = per_backend.setdefault(str(a.get("backend")), [0, 0])
                b[0] += a.get("status") == backend.PROVED
                b[1] += 1
        traces += 1
        cert = r.get("certificate")
        certified += (cert == "checked") if cert is not None else all_proved
    return {
        "reports": traces,
        "subproblems": {"proved": proved, "total": steps},
        "traces": {"certified": certified, "total": traces},
        "backends": {k: {"proved": v[0], "attempted": v[1]} for k, v in sorted(per_backend.items())},
        "union": union_used,
    }


def _pct(a: int, b: int) -> str:
    return f"{100.0 * a / b:.1f}%" if b else "n/a"


def format_aggregate(agg: dict) -> str:
    sub, tr = agg["subproblems"], agg["traces"]
    lines = [
        f"reports: {agg['reports']}",
        f"subproblems: {sub['proved']}/{sub['total']} proved ({_pct(sub['proved'], sub['total'])})",
        f"traces: {tr['certified']}/{tr['total']} certified ({_pct(tr['certified'], tr['total'])})",
    ]
    for name, b in agg["backends"].items():
        lines.append(f"backend {name}: {b['proved']}/{b['attempted']} attempts proved "
                     f"({_pct(b['proved'], b['attempted'])})")
    if agg["union"]:
        lines.append(f"union: {sub['proved']}/{sub['total']} proved "
                     f"({_pct(sub['proved'], sub['total'])})")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# Argument handling


def _backend_config(choice: str, args) -> BackendConfig:
    limits = ProverLimits(gamma_bound=args.gamma_bound, node_budget=args.node_budget)
    kw = dict(workers=args.workers, limits=limits)
    if args.timeout is not None:
        kw["timeout"] = args.timeout
    if choice == backend.BUILTIN:
        return BackendConfig(**kw)
    return BackendConfig.external(choice, **kw)


def _configs(args) -> tuple[BackendConfig, BackendConfig | None]:
    try:
        primary = _backend_config(args.backend_cmd or args.backend, args)
        fallback = _backend_config(args.fallback, args) if args.fallback else None
    except ValueError as e:
        raise CliError(f"invalid backend configuration: {e}", EXIT_PARSE) from None
    return primary, fallback


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--backend", choices=[backend.BUILTIN], default=backend.BUILTIN,
                   help="use the built-in tableau prover (default)")
    g.add_argument("--backend-cmd", metavar="TEMPLATE",
                   help="external prover command with {input} and optional {output}")
    p.add_argument("--fallback", metavar="BACKEND",
                   help="'builtin' or a command template, run on steps the first backend missed")
    p.add_argument("--timeout", type=float, default=None,
                   help=f"seconds per subproblem (default ${backend.TIMEOUT_ENV} or "
                        f"{backend.DEFAULT_TIMEOUT:g})")
    p.add_argument("--workers", type=int, default=1, help="parallel attempts")
    p.add_argument("--gamma-bound", type=int, default=ProverLimits.gamma_bound,
                   help="built-in prover: instances per quantified formula")
    p.add_argument("--node-budget", type=int, default=ProverLimits.node_budget,
                   help="built-in prover: tableau nodes per subproblem")
    p.add_argument("--timings", action="store_true", help="record elapsed time per step")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="traceforge",
                                     description="Certify TSTP refutation traces step by step.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="write one TPTP problem per inference step")
    p.add_argument("trace", type=Path)
    p.add_argument("-o", "--outdir", type=Path, required=True)

    p = sub.add_parser("prove", help="prove the extracted subproblems")
    p.add_argument("dir", type=Path)
    _add_backend_flags(p)

    p = sub.add_parser("reconstruct", help="compose subproofs into the trace certificate")
    p.add_argument("dir", type=Path)

    p = sub.add_parser("check", help="type-check a proof module and its requirements")
    p.add_argument("file", type=Path)

    p = sub.add_parser("pipeline", help="extract, prove, reconstruct and check")
    p.add_argument("trace", type=Path)
    p.add_argument("-o", "--outdir", type=Path, required=True)
    _add_backend_flags(p)

    p = sub.add_parser("report", help="aggregate run reports")
    p.add_argument("reports", type=Path, nargs="+")
    p.add_argument("--json", action="store_true", help="print the aggregate as JSON")
    return parser


def _write_report(ws: Workspace, report: backend.ProveReport, timings: bool,
                  certificate: str | None = None) -> Path:
    data = {"schema": backend.REPORT_SCHEMA, "problem": ws.problem, **report.to_json(timings)}
    if certificate is not None:
        data["certificate"] = certificate
    path = ws.outdir / REPORT_FILE
    path.write_text(_dump_json(data), encoding="utf-8")
    return path


def _print_outcomes(report: backend.ProveReport) -> None:
    for o in report.outcomes:
        extra = f" ({o.diagnostic})" if o.diagnostic and o.status != backend.PROVED else ""
        print(f"  {o.name}: {o.status} [{o.backend}]{extra}")
    print(f"proved {report.proved}/{report.attempted}")


def _run(args) -> int:
    if args.command == "extract":
        ws = extract(args.trace, args.outdir)
        d = ws.dag
        print(f"steps: {len(d.nodes)}, leaves: {len(d.roots)}, "
              f"inferences: {len(d.inference_steps)}, goal: {d.goal or 'none'}")
        return EXIT_OK

    if args.command == "prove":
        primary, fallback = _configs(args)
        ws = open_workspace(args.dir)
        report = prove(ws, primary, fallback)
        _write_report(ws, report, args.timings)
        _print_outcomes(report)
        return EXIT_OK if report.complete else EXIT_UNPROVED

    if args.command == "reconstruct":
        ws = open_workspace(args.dir)
        path = compose(ws)
        print(f"wrote {path}")
        return EXIT_OK

    if args.command == "check":
        code, message = _check_exit(args.file)
        print(message)
        return code

    if args.command == "pipeline":
        primary, fallback = _configs(args)
        ws = extract(args.trace, args.outdir)
        if ws.dag.goal is None:
            raise CliError("trace error: no inference step concludes $false", EXIT_DAG)
        report = prove(ws, primary, fallback)
        _print_outcomes(report)
        if not report.complete:
            _write_report(ws, report, args.timings, "absent")
            return EXIT_UNPROVED
        path = compose(ws)
        code, message = _check_exit(path)
        _write_report(ws, report, args.timings, "checked" if code == EXIT_OK else "failed")
        if code != EXIT_OK:
            print(f"composite proof {message}", file=sys.stderr)
            return EXIT_COMPOSITION
        print(f"certificate {path} checked")
        return EXIT_OK

    if args.command == "report":
        try:
            data = [json.loads(p.read_text(encoding="utf-8")) for p in args.reports]
            agg = aggregate(data)
        except (OSError, ValueError, UnicodeDecodeError) as e:
            print(f"malformed report: {e}", file=sys.stderr)
            return EXIT_PARSE
        print(_dump_json(agg) if args.json else format_aggregate(agg), end="" if args.json else "\n")
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return backend.run_deep(_run, args)
    except CliError as e:
        print(str(e), file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
