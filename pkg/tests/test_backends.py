from __future__ import annotations

import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from hive.backends import (
    CONSTITUTION_TRANSCRIPT,
    STUBS,
    BackendEntry,
    BackendRegistry,
    StubCall,
    capitalized_spans,
    render_command,
)
from hive.errors import BackendError, ProviderError
from hive.providers import FixtureProvider, HttpProvider, ScriptedProvider, prompt_checksum
from hive.snippets import Backend, ExecutionSpec, Param, SemanticType as S


def _spec(model_id="m", *params):
    return ExecutionSpec(model_id, tuple(params) or (Param("text", S.TEXT),), "def run(): ...")


# --- stubs -------------------------------------------------------------------------------


def test_capitalized_spans_constitution():
    spans = capitalized_spans(CONSTITUTION_TRANSCRIPT)
    assert "United States" in spans
    assert "United States of America" in spans
    assert "We" not in spans


def test_capitalized_spans_connectors():
    assert capitalized_spans("we met the Bank of England today.") == ["Bank of England"]
    assert capitalized_spans("Paris is nice. I like Paris a lot") == ["Paris"]
    assert capitalized_spans("") == []


def test_ner_stub_groups():
    out = json.loads(STUBS["ner_capitalized"](StubCall({"text": "I met Dr Smith in Paris"}, {"text": S.TEXT}, "m")))
    assert out == {"LOC": ["Paris"], "PER": ["Dr Smith"]}


def test_asr_stub_needs_audio():
    with pytest.raises(BackendError):
        STUBS["asr_constitution"](StubCall({}, {}, "m"))
    call = StubCall({"a": "./x.wav"}, {"a": S.AUDIO_PATH}, "m")
    assert STUBS["asr_constitution"](call) == CONSTITUTION_TRANSCRIPT


def test_text_stub_needs_text():
    with pytest.raises(BackendError):
        STUBS["echo"](StubCall({"x": "1"}, {"x": S.TABLE}, "m"))


def test_qa_and_classify_stubs():
    qa = StubCall(
        {"q": "Where did the cat sit?", "c": "The dog ran. The cat sat on the mat."},
        {"q": S.QUESTION, "c": S.TEXT}, "m",
    )
    assert STUBS["qa_overlap"](qa) == "The cat sat on the mat."
    cls = StubCall({"t": "great music tonight", "c": '["movie", "music"]'}, {"t": S.TEXT, "c": S.CATEGORIES}, "m")
    assert STUBS["classify_overlap"](cls) == "music"


def test_placeholder_stubs_are_deterministic():
    call = StubCall({"t": "a cat"}, {"t": S.TEXT}, "m")
    assert STUBS["text_to_image_placeholder"](call) == STUBS["text_to_image_placeholder"](call)
    assert STUBS["text_to_image_placeholder"](call).startswith("generated/image_")


# --- registry ----------------------------------------------------------------------------------


def test_registry_entry_errors():
    with pytest.raises(BackendError):
        BackendEntry.from_record("m", {"backend": "carrier-pigeon"})
    with pytest.raises(BackendError):
        BackendEntry.from_record("m", {"backend": "stub"})
    with pytest.raises(BackendError):
        BackendEntry.from_record("m", {"backend": "stub", "stub": "nope"})
    with pytest.raises(BackendError):
        BackendEntry.from_record("m", {"backend": "remote"})
    assert BackendEntry.from_record("m", {"backend": "subprocess", "command": "true"}).backend is Backend.SUBPROCESS


def test_registry_load_errors(tmp_path):
    with pytest.raises(BackendError):
        BackendRegistry.load(tmp_path / "missing.json")
    p = tmp_path / "r.json"
    p.write_text("[1]")
    with pytest.raises(BackendError):
        BackendRegistry.load(p)


def test_unregistered_model():
    with pytest.raises(BackendError, match="no backend registered"):
        BackendRegistry().invoke(_spec(), {"text": "x"})


def test_bundled_registry_covers_graph(data_dir, bundled_graph):
    reg = BackendRegistry.load(data_dir / "registry.json")
    assert {m.local_name for m in bundled_graph.models()} <= set(reg.entries)


# --- subprocess ---------------------------------------------------------------------------------


def test_render_command_fills_each_part():
    argv = render_command("prog --in {text} '{text} twice'", {"text": "a b"})
    assert argv == ["prog", "--in", "a b", "a b twice"]


def test_subprocess_backend():
    cmd = f"{sys.executable} -c 'import sys; print(sys.argv[1].upper())' {{text}}"
    reg = BackendRegistry.from_mapping({"m": {"backend": "subprocess", "command": cmd}})
    assert reg.invoke(_spec(), {"text": "hello world"}) == "HELLO WORLD"


def test_subprocess_failure():
    cmd = f"{sys.executable} -c 'import sys; sys.exit(\"boom\")'"
    reg = BackendRegistry.from_mapping({"m": {"backend": "subprocess", "command": cmd}})
    with pytest.raises(BackendError, match="boom"):
        reg.invoke(_spec(), {"text": "x"})
    reg = BackendRegistry.from_mapping({"m": {"backend": "subprocess", "command": "/no/such/binary"}})
    with pytest.raises(BackendError):
        reg.invoke(_spec(), {"text": "x"})


def test_subprocess_timeout():
    cmd = f"{sys.executable} -c 'import time; time.sleep(5)'"
    reg = BackendRegistry.from_mapping({"m": {"backend": "subprocess", "command": cmd, "timeout": 0.2}})
    with pytest.raises(BackendError):
        reg.invoke(_spec(), {"text": "x"})


# --- HTTP: remote backend and provider ------------------------------------------------------------


class _Server:
    """Local JSON endpoint; ``reply(body, headers)`` returns (status, payload bytes)."""

    def __init__(self, reply):
        self.requests = []
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                outer.requests.append((body, dict(self.headers)))
                status, payload = reply(body)
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *a):
                pass

        self.httpd = HTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_port}/invoke"
        threading.Thread(target=self.httpd.serve_forever, daemon=True).start()

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def server():
    servers = []

    def make(reply):
        servers.append(_Server(reply))
        return servers[-1]

    yield make
    for s in servers:
        s.close()


def test_remote_backend(server):
    srv = server(lambda b: (200, json.dumps({"output": b["args"]["text"][::-1]}).encode()))
    reg = BackendRegistry.from_mapping({"m": {"backend": "remote", "url": srv.url}})
    assert reg.invoke(_spec(), {"text": "abc"}) == "cba"
    body = srv.requests[0][0]
    assert body["model"] == "m" and body["function"] == "run"


def test_remote_backend_bad_reply(server):
    srv = server(lambda b: (200, b'{"nope": 1}'))
    reg = BackendRegistry.from_mapping({"m": {"backend": "remote", "url": srv.url}})
    with pytest.raises(BackendError):
        reg.invoke(_spec(), {"text": "abc"})
    srv = server(lambda b: (500, b"{}"))
    reg = BackendRegistry.from_mapping({"m": {"backend": "remote", "url": srv.url}})
    with pytest.raises(BackendError):
        reg.invoke(_spec(), {"text": "abc"})


def test_http_provider(server):
    srv = server(lambda b: (200, json.dumps({"text": "echo:" + b["prompt"]}).encode()))
    p = HttpProvider(srv.url, token="tok")
    assert p.complete("hi") == "echo:hi"
    body, headers = srv.requests[0]
    assert body == {"prompt": "hi", "temperature": 0.0, "max_tokens": 512}
    assert headers["Authorization"] == "Bearer tok"


def test_http_provider_errors(server):
    with pytest.raises(ProviderError):
        HttpProvider(server(lambda b: (200, b"not json")).url).complete("x")
    with pytest.raises(ProviderError):
        HttpProvider(server(lambda b: (200, b'{"text": 3}')).url).complete("x")
    with pytest.raises(ProviderError):
        HttpProvider("http://127.0.0.1:9/none", timeout=1).complete("x")


# --- offline providers ------------------------------------------------------------------------


def test_fixture_provider(tmp_path):
    (tmp_path / f"{prompt_checksum('hello')}.txt").write_text("canned")
    p = FixtureProvider(tmp_path)
    assert p.complete("hello") == "canned"
    with pytest.raises(ProviderError):
        p.complete("other")
    with pytest.raises(ProviderError):
        FixtureProvider(tmp_path / "missing")


def test_scripted_provider():
    p = ScriptedProvider(["a", ProviderError("down")])
    assert p.complete("1") == "a"
    with pytest.raises(ProviderError):
        p.complete("2")
    with pytest.raises(ProviderError):
        p.complete("3")
    assert p.prompts == ["1", "2", "3"]
    assert ScriptedProvider(str.upper).complete("x") == "X"
