from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from hive.cli import EXIT_EXEC, EXIT_INPUT, EXIT_OK, EXIT_PLAN, main
from hive.config import DATA_DIR
from hive.providers import FixtureProvider

Q = "Transcribe the audio from ./audio_1.wav and find entity tokens"
BENCH = DATA_DIR / "bench"


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for var in ("HIVE_PROVIDER_URL", "HIVE_PROVIDER_TOKEN", "HIVE_OFFLINE"):
        monkeypatch.delenv(var, raising=False)


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# --- run / plan -------------------------------------------------------------------------


def test_run_ok(capsys):
    code, out, _ = _run(capsys, "run", Q)
    assert code == EXIT_OK
    assert "status: Ok" in out
    assert '"United States of America"' in out


def test_run_json_and_trace_out(capsys, tmp_path):
    trace = tmp_path / "trace.json"
    code, out, _ = _run(capsys, "run", Q, "--format", "json", "--trace-out", str(trace))
    assert code == EXIT_OK
    rec = json.loads(out)
    assert rec["plan"] == ["automatic_speech_recognition", "named_entity_recognition"]
    assert trace.read_text() == out


def test_run_is_byte_identical(capsys):
    first = _run(capsys, "run", Q)
    second = _run(capsys, "run", Q)
    assert first == second


def test_plan_license_failure_exit_2(capsys):
    code, out, _ = _run(capsys, "plan", Q, "--licenses", "openrail++,deepseek")
    assert code == EXIT_PLAN
    assert "NoCompliantModel" in out


def test_plan_smallest(capsys):
    code, out, _ = _run(capsys, "plan", Q, "--smallest", "--format", "json")
    assert code == EXIT_OK
    rec = json.loads(out)
    assert "nvidia/parakeet-rnnt-1.1b" in json.dumps(rec["selection"])


def test_benchmark_flags(capsys):
    code, _, err = _run(capsys, "plan", Q, "--metric", "wer")
    assert code == EXIT_INPUT and "--benchmark" in err
    code, _, err = _run(capsys, "plan", Q, "--benchmark", "x")
    assert code == EXIT_INPUT and "--metric" in err
    bench = "speech recognition on common voice english"
    assert _run(capsys, "plan", Q, "--benchmark", bench, "--metric", "wer")[0] == EXIT_PLAN
    code, out, _ = _run(capsys, "plan", Q, "--benchmark", bench, "--metric", "wer",
                        "--benchmark-task", "automatic_speech_recognition")
    assert code == EXIT_OK and "nvidia/parakeet-rnnt-1.1b" in out


def test_execution_failure_exit_3(capsys, tmp_path):
    reg = tmp_path / "registry.json"
    reg.write_text(json.dumps({
        "openai/whisper-large-v2": {"backend": "stub", "stub": "fail"},
        "dslim/bert-base-NER": {"backend": "stub", "stub": "ner_capitalized"},
    }))
    code, out, _ = _run(capsys, "run", Q, "--registry", str(reg))
    assert code == EXIT_EXEC
    assert "[Skipped]" in out and "status: Err" in out


def test_bad_config_exit_1(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("bogus: 1\n")
    code, _, err = _run(capsys, "plan", Q, "--config", str(cfg))
    assert code == EXIT_INPUT and "bogus" in err
    code, _, err = _run(capsys, "plan", Q, "--online")
    assert code == EXIT_INPUT


def test_token_never_printed(capsys):
    code, out, err = _run(capsys, "plan", Q, "--provider-token", "hunter2", "--offline")
    assert code == EXIT_OK
    assert "hunter2" not in out + err
    assert '"***"' in out


def test_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["plan"])
    assert e.value.code == 2


# --- online mode against a local endpoint -------------------------------------------------


@pytest.fixture
def canned_endpoint():
    """Serves the bundled canned replies over HTTP, or 404 for unknown prompts."""
    fixtures = FixtureProvider(DATA_DIR / "provider")

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            path = fixtures.path_for(body["prompt"])
            if path.exists():
                payload, status = json.dumps({"text": path.read_text(encoding="utf-8")}), 200
            else:
                payload, status = "{}", 404
            self.send_response(status)
            self.end_headers()
            self.wfile.write(payload.encode())

        def log_message(self, *a):
            pass

    httpd = HTTPServer(("127.0.0.1", 0), Handler)
    threading.Thread(target=httpd.serve_forever, daemon=True).start()
    yield f"http://127.0.0.1:{httpd.server_port}/complete"
    httpd.shutdown()
    httpd.server_close()


def test_online_matches_offline(capsys, canned_endpoint):
    code, out, _ = _run(capsys, "run", Q, "--provider-url", canned_endpoint, "--format", "json")
    assert code == EXIT_OK
    online = json.loads(out)
    offline = json.loads(_run(capsys, "run", Q, "--format", "json")[1])
    assert online["plan"] == offline["plan"]
    assert online["final_output"] == offline["final_output"]
    assert online["parsed"] == offline["parsed"]


def test_unreachable_provider(capsys):
    url = "http://127.0.0.1:9/none"
    code, out, _ = _run(capsys, "plan", Q, "--provider-url", url)
    assert code == EXIT_OK and "rule-based fallback" in out
    code, out, _ = _run(capsys, "plan", Q, "--provider-url", url, "--no-fallback")
    assert code == EXIT_PLAN and "ProviderError" in out


# --- eval -------------------------------------------------------------------------------------


def test_eval_recorded_outcomes(capsys):
    code, out, _ = _run(capsys, "eval", str(BENCH / "muse100.jsonl"),
                        "--outcomes", str(BENCH / "muse100.outcomes.jsonl"))
    assert code == EXIT_OK
    assert "Overall    0.74   0.73   0.62   3/3/6" in out
    assert "TT=58 TB=10 BT=0 BB=26 Err=6 (N=100)" in out
    assert "accounting: PASS" in out
    assert "eval.couple_fot = true" in out


def test_eval_err_as_zero_json(capsys):
    code, out, _ = _run(capsys, "eval", str(BENCH / "muse100.jsonl"),
                        "--outcomes", str(BENCH / "muse100.outcomes.jsonl"),
                        "--err-as-zero", "--format", "json")
    rec = json.loads(out)
    assert code == EXIT_OK
    assert rec["scores"]["Overall"]["ts"]["mean"] == "0.72"
    assert rec["config"]["eval.err_as_zero"] is True


def test_eval_live_run(capsys, tmp_path):
    outs = tmp_path / "outcomes.jsonl"
    code, out, _ = _run(capsys, "eval", str(BENCH / "sample.jsonl"), "--outcomes-out", str(outs), "--jobs", "3")
    assert code == EXIT_OK
    assert "TT=12" in out
    assert len(outs.read_text().splitlines()) == 12


def test_eval_bad_inputs(capsys, tmp_path):
    assert _run(capsys, "eval", str(tmp_path / "missing.jsonl"))[0] == EXIT_INPUT
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "x"}\n')
    code, _, err = _run(capsys, "eval", str(bad))
    assert code == EXIT_INPUT and err.startswith("error:")


# --- ingest and ckg ---------------------------------------------------------------------------------


def test_ingest_reproduces_bundled_graph(capsys, tmp_path):
    out = tmp_path / "g" / "graph.jsonl"
    code, stdout, _ = _run(capsys, "ingest", str(DATA_DIR / "cards"), str(DATA_DIR / "pwc.jsonl"), str(out))
    assert code == EXIT_OK
    assert "triples: 131" in stdout
    assert out.read_bytes() == (DATA_DIR / "ckg" / "muse.jsonl").read_bytes()
    specs = tmp_path / "g" / "graph.specs.jsonl"
    assert specs.read_bytes() == (DATA_DIR / "ckg" / "muse.specs.jsonl").read_bytes()
    assert sorted(p.name for p in out.parent.iterdir()) == ["graph.jsonl", "graph.specs.jsonl"]


def test_ingest_failure_writes_nothing(capsys, tmp_path):
    out = tmp_path / "graph.jsonl"
    code, _, err = _run(capsys, "ingest", str(tmp_path / "nocards"), str(DATA_DIR / "pwc.jsonl"), str(out))
    assert code == EXIT_INPUT and "does not exist" in err
    bad = tmp_path / "pwc.jsonl"
    bad.write_text("{not json\n")
    assert _run(capsys, "ingest", str(DATA_DIR / "cards"), str(bad), str(out))[0] == EXIT_INPUT
    assert list(tmp_path.iterdir()) == [bad]


def test_ckg_stats(capsys):
    code, out, _ = _run(capsys, "ckg", "stats", "--format", "json")
    assert code == EXIT_OK
    stats = json.loads(out)
    assert stats["models"] == 15 and stats["triples"] == 131


def test_ckg_query(capsys):
    code, out, _ = _run(capsys, "ckg", "query", "--task", "automatic_speech_recognition")
    assert code == EXIT_OK
    lines = out.splitlines()
    assert [line.split("\t")[0] for line in lines] == ["nvidia/parakeet-rnnt-1.1b", "openai/whisper-large-v2"]
    assert "snippet=no" in lines[0]
    code, out, _ = _run(capsys, "ckg", "query", "--task", "juggling")
    assert out.strip() == "no models for task juggling"


def test_ckg_missing_graph(capsys, tmp_path):
    code, _, err = _run(capsys, "ckg", "stats", "--ckg", str(tmp_path / "none.jsonl"))
    assert code == EXIT_INPUT
