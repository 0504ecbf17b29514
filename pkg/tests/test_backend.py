import json
import os
import sys
import time
from pathlib import Path

import pytest

from traceforge import backend, trace
from traceforge.backend import (
    BACKEND_ERROR, FAILED, PROVED, TIMEOUT, BackendConfig, NonzeroExit, Timeout, prove_all,
    prove_subproblem, prove_with_fallback, run_external, signature_context,
)
from traceforge.subproblem import all_subproblems, emit_subproblem_files

DATA = Path(__file__).parent / "data"
HELPER = f"{sys.executable} {DATA / 'ext_prover.py'}"
SIG = "S"


@pytest.fixture
def workdir(tmp_path, set001_text):
    t = trace.load_trace(set001_text)
    d = trace.build_dag(t)
    emit_subproblem_files(t, d, tmp_path)
    return tmp_path, all_subproblems(t, d)


def ctx_for(sps):
    return signature_context(sps, SIG)


def find_processes(marker: str) -> list[int]:
    pids = []
    for entry in os.listdir("/proc"):
        if not entry.isdigit():
            continue
        try:
            cmd = Path(f"/proc/{entry}/cmdline").read_bytes().replace(b"\0", b" ").decode()
            state = Path(f"/proc/{entry}/stat").read_text().rsplit(")", 1)[1].split()[0]
        except OSError:
            continue
        if marker in cmd and state != "Z":
            pids.append(int(entry))
    return pids


def test_config_validation(monkeypatch):
    with pytest.raises(ValueError):
        BackendConfig.external("prover --output {output}")
    with pytest.raises(ValueError):
        BackendConfig(timeout=0)
    with pytest.raises(ValueError):
        BackendConfig(workers=0)
    monkeypatch.setenv(backend.TIMEOUT_ENV, "2.5")
    assert BackendConfig().timeout == 2.5
    monkeypatch.delenv(backend.TIMEOUT_ENV)
    assert BackendConfig().timeout == backend.DEFAULT_TIMEOUT
    assert BackendConfig.external("/opt/bin/zenon {input}").label == "zenon"


def test_builtin_proves_c5(workdir):
    outdir, sps = workdir
    o = prove_subproblem(BackendConfig(), sps[0], outdir, SIG, ctx_for(sps))
    assert o.status == PROVED and o.name == "c_5"
    assert o.proof_path == outdir / "c_5.lp" and o.proof_path.exists()


def test_nonzero_exit(workdir):
    outdir, sps = workdir
    with pytest.raises(NonzeroExit) as e:
        run_external("false {input}", outdir / "c_5.p", outdir / "c_5.lp", 5)
    assert e.value.code == 1
    o = prove_subproblem(BackendConfig.external("false {input}"), sps[0], outdir, SIG, ctx_for(sps))
    assert o.status == FAILED and o.proof_path is None
    assert not (outdir / "c_5.lp").exists()


def test_missing_program(workdir):
    outdir, sps = workdir
    cfg = BackendConfig.external("/nonexistent/prover {input}")
    assert prove_subproblem(cfg, sps[0], outdir, SIG, ctx_for(sps)).status == BACKEND_ERROR


def test_timeout_kills_process_tree(workdir):
    outdir, sps = workdir
    marker = "3599.731"
    cfg = BackendConfig.external(f"sh -c 'sleep {marker} & sleep {marker}; wait' {{input}}",
                                 timeout=1)
    start = time.monotonic()
    o = prove_subproblem(cfg, sps[0], outdir, SIG, ctx_for(sps))
    elapsed = time.monotonic() - start
    assert o.status == TIMEOUT
    assert elapsed < 2.0
    assert find_processes(marker) == []
    with pytest.raises(Timeout):
        run_external(f"sh -c 'sleep {marker}' {{input}}", outdir / "c_5.p", outdir / "x.lp", 0.2)
    assert find_processes(marker) == []


def test_external_proof_with_output_placeholder(workdir):
    outdir, sps = workdir
    cfg = BackendConfig.external(f"{HELPER} {{input}} {{output}} {SIG}")
    report = prove_all(cfg, sps, outdir, SIG, ctx_for(sps))
    assert [o.status for o in report.outcomes] == [PROVED] * 3
    assert report.ratio == 1.0 and report.complete


def test_external_proof_on_stdout(workdir):
    outdir, sps = workdir
    cfg = BackendConfig.external(f"{HELPER} {{input}} - {SIG}")
    o = prove_subproblem(cfg, sps[1], outdir, SIG, ctx_for(sps))
    assert o.status == PROVED and o.proof_path.read_text().startswith("require logic")


@pytest.mark.parametrize("script, reason", [
    ("echo this is not a proof", "LpSyntaxError"),
    ("printf 'require logic\\nrequire S\\ndefinition delta : logic.Proof logic.top := "
     "logic.true_intro\\n'", "expected type"),
    ("printf 'require logic\\nrequire S\\nsymbol delta : logic.Proof logic.bot\\n'",
     "without a proof"),
    ("printf 'require logic\\nrequire S\\nrequire other\\n'", "unexpected dependency"),
])
def test_invalid_artifacts_are_rejected(workdir, script, reason):
    outdir, sps = workdir
    cfg = BackendConfig.external(f"sh -c \"{script}\" {{input}}")
    o = prove_subproblem(cfg, sps[0], outdir, SIG, ctx_for(sps))
    assert o.status == BACKEND_ERROR
    assert reason in o.diagnostic
    assert not (outdir / "c_5.lp").exists()


def test_environment_is_scrubbed(tmp_path, monkeypatch):
    monkeypatch.setenv("TRACEFORGE_SECRET", "x")
    monkeypatch.setenv("TPTP", "/tptp")
    inp = tmp_path / "in.p"
    inp.write_text("")
    run_external("sh -c env {input}", inp, tmp_path / "env.txt", 5)
    env = (tmp_path / "env.txt").read_text()
    assert "TPTP=/tptp" in env and "TRACEFORGE_SECRET" not in env


def test_report_order_and_counts(workdir):
    outdir, sps = workdir
    cfg = BackendConfig.external(f"{HELPER} {{input}} {{output}} {SIG} c_5 c_7", workers=3)
    report = prove_all(cfg, sps, outdir, SIG, ctx_for(sps))
    assert [o.name for o in report.outcomes] == ["c_5", "c_6", "c_7"]
    assert [o.status for o in report.outcomes] == [PROVED, FAILED, PROVED]
    assert sum(report.counts.values()) == report.attempted == 3
    assert report.ratio == pytest.approx(2 / 3) and not report.complete
    data = report.to_json()
    assert data["schema"] == 1 and data["summary"]["proved"] == 2
    assert "elapsed_ms" not in data["steps"][0]
    assert "elapsed_ms" in report.to_json(timings=True)["steps"][0]


def test_timeout_counted(workdir):
    outdir, sps = workdir
    cfg = BackendConfig.external(
        f"sh -c 'case \"$0\" in *c_6.p) sleep 30;; *) exec {HELPER} \"$0\" \"$1\" {SIG};; esac' "
        "{input} {output}", timeout=1)
    report = prove_all(cfg, sps, outdir, SIG, ctx_for(sps))
    assert [o.status for o in report.outcomes] == [PROVED, TIMEOUT, PROVED]
    assert report.ratio == pytest.approx(2 / 3) and not report.complete


def test_worker_bound(workdir, tmp_path_factory):
    outdir, sps = workdir
    log = tmp_path_factory.mktemp("log") / "events"
    probe = (f"{sys.executable} -c \"import sys,time;f=open(sys.argv[1],'a');"
             "f.write('%f +\\n' % time.time());f.flush();time.sleep(0.3);"
             "f.write('%f -\\n' % time.time())\"")
    cfg = BackendConfig.external(f"{probe} {log} {{input}}", workers=2)
    prove_all(cfg, sps * 2, outdir, SIG, ctx_for(sps))
    events = sorted((float(t), s) for t, s in (line.split() for line in log.read_text().splitlines()))
    level = peak = 0
    for _, s in events:
        level += 1 if s == "+" else -1
        peak = max(peak, level)
    assert len(events) == 12 and peak <= 2


def test_workers_do_not_change_reports(workdir):
    outdir, sps = workdir
    one = prove_all(BackendConfig(workers=1), sps, outdir, SIG, ctx_for(sps)).to_json()
    eight = prove_all(BackendConfig(workers=8), sps, outdir, SIG, ctx_for(sps)).to_json()
    assert json.dumps(one) == json.dumps(eight)


def test_fallback_union(workdir):
    outdir, sps = workdir
    primary = BackendConfig.external(f"{HELPER} {{input}} {{output}} {SIG} c_5", name="first")
    fallback = BackendConfig.external(f"{HELPER} {{input}} {{output}} {SIG} c_6", name="second")
    alone_a = prove_all(primary, sps, outdir, SIG, ctx_for(sps))
    alone_b = prove_all(fallback, sps, outdir, SIG, ctx_for(sps))
    union = prove_with_fallback(primary, fallback, sps, outdir, SIG, ctx_for(sps))
    assert [o.status for o in union.outcomes] == [PROVED, PROVED, FAILED]
    assert [o.backend for o in union.outcomes] == ["first", "second", "first"]
    assert union.outcomes[1].attempts == (("first", FAILED), ("second", PROVED))
    assert union.proved >= max(alone_a.proved, alone_b.proved)
    assert (outdir / "c_5.lp").exists() and (outdir / "c_6.lp").exists()
    assert not (outdir / "c_7.lp").exists()


def test_fallback_not_invoked_when_primary_succeeds(workdir, tmp_path_factory):
    outdir, sps = workdir
    marker = tmp_path_factory.mktemp("m") / "called"
    fallback = BackendConfig.external(f"touch {marker} {{input}}")
    report = prove_with_fallback(BackendConfig(), fallback, sps, outdir, SIG, ctx_for(sps))
    assert report.complete and not marker.exists()
