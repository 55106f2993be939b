"""Execution backends and the registry mapping model ids to them.

Registry file (JSON)::

    {"openai/whisper-large-v2": {"backend": "stub", "stub": "asr_constitution"},
     "some/model": {"backend": "subprocess", "command": "python run.py --in {audio_path}"},
     "other/model": {"backend": "remote", "url": "http://host/invoke"}}

Stubs are deterministic in-process transforms standing in for real models.
"""

from __future__ import annotations

import hashlib
import json
import re
import shlex
import subprocess
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .errors import BackendError
from .snippets import Backend, ExecutionSpec, SemanticType


@dataclass(frozen=True)
class StubCall:
    """Arguments handed to a stub, with each parameter's semantic type."""

    args: dict[str, str]
    types: dict[str, SemanticType]
    model_id: str

    def first(self, *kinds: SemanticType) -> str | None:
        for kind in kinds:
            for name, value in self.args.items():
                if self.types.get(name) is kind and value:
                    return value
        return None

    def text(self) -> str:
        value = self.first(SemanticType.TEXT, SemanticType.QUESTION, SemanticType.OTHER)
        if value is None:
            raise BackendError(f"{self.model_id}: no text argument bound")
        return value


StubFn = Callable[[StubCall], str]

CONSTITUTION_TRANSCRIPT = (
    "We, the people of the United States, in order to form a more perfect union, "
    "establish justice, insure domestic tranquility, provide for the common defense, "
    "promote the general welfare, and secure the blessings of liberty to ourselves "
    "and our posterity, do ordain and establish this Constitution for the United "
    "States of America."
)

LOCATION_WORDS = frozenset(
    {
        "states", "america", "europe", "asia", "africa", "france", "paris", "london",
        "germany", "berlin", "england", "spain", "italy", "china", "japan", "india",
        "ireland", "dublin", "canada", "mexico", "kingdom", "city", "river",
    }
)
PERSON_TITLES = frozenset({"mr", "mrs", "ms", "dr", "president", "king", "queen"})
CONNECTORS = frozenset({"of", "de", "the"})


def _short_hash(*parts: str) -> str:
    return hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()[:10]


def capitalized_spans(text: str) -> list[str]:
    """Runs of capitalised words, joined across lowercase "of"-style connectors.

    A single capitalised word that opens a sentence is ignored.
    """
    tokens = re.findall(r"[A-Za-z][A-Za-z'\-]*|[.!?]", text)
    spans: list[str] = []
    current: list[str] = []
    pending: list[str] = []
    sentence_start = True
    start_of_span = False

    def close():
        nonlocal current, pending
        if current and not (start_of_span and len(current) == 1):
            spans.append(" ".join(current))
        current, pending = [], []

    for tok in tokens:
        if tok in ".!?":
            close()
            sentence_start = True
            continue
        if tok[0].isupper():
            if not current:
                start_of_span = sentence_start
            current.extend(pending)
            pending = []
            current.append(tok)
        elif current and tok.lower() in CONNECTORS and not pending:
            pending = [tok]
        else:
            close()
        sentence_start = False
    close()
    return list(dict.fromkeys(spans))


def _entity_label(span: str) -> str:
    words = [w.lower() for w in span.split()]
    if any(w in LOCATION_WORDS for w in words):
        return "LOC"
    if words and words[0] in PERSON_TITLES:
        return "PER"
    return "MISC"


def _stub_ner(call: StubCall) -> str:
    groups: dict[str, list[str]] = {}
    for span in capitalized_spans(call.text()):
        groups.setdefault(_entity_label(span), []).append(span)
    return json.dumps(groups, sort_keys=True)


def _stub_asr(call: StubCall) -> str:
    if call.first(SemanticType.AUDIO_PATH) is None:
        raise BackendError(f"{call.model_id}: no audio argument bound")
    return CONSTITUTION_TRANSCRIPT


def _sentences(text: str) -> list[str]:
    return [s.strip() for s in re.split(r"(?<=[.!?])\s+", text.strip()) if s.strip()]


def _stub_summarise(call: StubCall) -> str:
    sentences = _sentences(call.text())
    if not sentences:
        return ""
    words = sentences[0].split()
    return " ".join(words[:20]) + (" ..." if len(words) > 20 else "")


def _stub_text_to_image(call: StubCall) -> str:
    return f"generated/image_{_short_hash(call.model_id, call.text())}.png"


def _stub_text_to_speech(call: StubCall) -> str:
    return f"generated/speech_{_short_hash(call.model_id, call.text())}.wav"


def _image_arg(call: StubCall) -> str:
    image = call.first(SemanticType.IMAGE_PATH)
    if image is None:
        raise BackendError(f"{call.model_id}: no image argument bound")
    return image


def _stub_caption(call: StubCall) -> str:
    name = Path(_image_arg(call)).stem.replace("_", " ")
    return f"a picture of {name}"


def _stub_detect(call: StubCall) -> str:
    image = _image_arg(call)
    return json.dumps([{"label": "object", "box": [0, 0, 1, 1], "source": Path(image).name}])


def _stub_depth(call: StubCall) -> str:
    return f"generated/depth_{_short_hash(call.model_id, _image_arg(call))}.png"


def _stub_vqa(call: StubCall) -> str:
    _image_arg(call)
    question = call.first(SemanticType.QUESTION) or ""
    return "2" if question.lower().startswith("how many") else "yes"


def _stub_translate(call: StubCall) -> str:
    target = call.args.get("target_lang") or call.args.get("tgt_lang") or "fr"
    return f"[{target}] {call.text()}"


def _words(text: str) -> set[str]:
    return {w.lower() for w in re.findall(r"[A-Za-z0-9]+", text)}


def _stub_qa(call: StubCall) -> str:
    question = call.first(SemanticType.QUESTION) or ""
    context = call.first(SemanticType.TEXT) or ""
    sentences = _sentences(context)
    if not sentences:
        return ""
    q = _words(question)
    return max(sentences, key=lambda s: (len(_words(s) & q), -sentences.index(s)))


def _stub_table_qa(call: StubCall) -> str:
    table = call.first(SemanticType.TABLE) or "{}"
    try:
        data = json.loads(table)
    except json.JSONDecodeError:
        raise BackendError(f"{call.model_id}: table argument is not JSON") from None
    question = _words(call.first(SemanticType.QUESTION) or "")
    for key in sorted(data):
        if key.lower() in question:
            return str(data[key])
    return str(next(iter(data.values()), ""))


def _stub_textgen(call: StubCall) -> str:
    return call.text().rstrip() + " And so the story continues."


def _stub_classify(call: StubCall) -> str:
    raw = call.first(SemanticType.CATEGORIES)
    labels = json.loads(raw) if raw else ["positive", "negative"]
    text = _words(call.text())
    scored = [(len(_words(lab) & text), -i, lab) for i, lab in enumerate(labels)]
    return max(scored)[2] if scored else ""


def _stub_echo(call: StubCall) -> str:
    return call.text()


def _stub_fail(call: StubCall) -> str:
    raise BackendError(f"{call.model_id}: stub configured to fail")


STUBS: dict[str, StubFn] = {
    "asr_constitution": _stub_asr,
    "ner_capitalized": _stub_ner,
    "summarise_lead": _stub_summarise,
    "text_to_image_placeholder": _stub_text_to_image,
    "text_to_speech_placeholder": _stub_text_to_speech,
    "caption_filename": _stub_caption,
    "detect_placeholder": _stub_detect,
    "depth_placeholder": _stub_depth,
    "vqa_count": _stub_vqa,
    "translate_tag": _stub_translate,
    "qa_overlap": _stub_qa,
    "table_qa_lookup": _stub_table_qa,
    "textgen_continue": _stub_textgen,
    "classify_overlap": _stub_classify,
    "echo": _stub_echo,
    "fail": _stub_fail,
}


@dataclass(frozen=True)
class BackendEntry:
    backend: Backend
    stub: str | None = None
    command: str | None = None
    url: str | None = None
    timeout: float = 60.0

    @classmethod
    def from_record(cls, model_id: str, rec: dict) -> "BackendEntry":
        try:
            backend = Backend(rec["backend"])
        except (KeyError, ValueError):
            raise BackendError(f"registry entry for {model_id} has no valid backend") from None
        entry = cls(
            backend,
            stub=rec.get("stub"),
            command=rec.get("command"),
            url=rec.get("url"),
            timeout=float(rec.get("timeout", 60.0)),
        )
        needed = {Backend.STUB: entry.stub, Backend.SUBPROCESS: entry.command, Backend.REMOTE: entry.url}
        if not needed[backend]:
            raise BackendError(f"registry entry for {model_id} lacks its {backend.value} target")
        if backend is Backend.STUB and entry.stub not in STUBS:
            raise BackendError(f"registry entry for {model_id} names unknown stub {entry.stub!r}")
        return entry


def render_command(template: str, args: dict[str, str]) -> list[str]:
    """Split ``template`` into argv and fill ``{param}`` placeholders per argument."""
    argv = []
    for part in shlex.split(template):
        for name, value in args.items():
            part = part.replace("{" + name + "}", value)
        argv.append(part)
    return argv


class BackendRegistry:
    def __init__(self, entries: dict[str, BackendEntry] | None = None):
        self.entries = dict(entries or {})

    @classmethod
    def from_mapping(cls, data: dict) -> "BackendRegistry":
        return cls({mid: BackendEntry.from_record(mid, rec) for mid, rec in data.items()})

    @classmethod
    def load(cls, path: str | Path) -> "BackendRegistry":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise BackendError(f"cannot read registry {path}: {e}") from e
        if not isinstance(data, dict):
            raise BackendError(f"registry {path} must be a JSON object")
        return cls.from_mapping(data)

    def invoke(self, spec: ExecutionSpec, args: dict[str, str]) -> str:
        entry = self.entries.get(spec.model_id)
        if entry is None:
            raise BackendError(f"no backend registered for {spec.model_id}")
        if entry.backend is Backend.STUB:
            types = {p.name: p.semantic_type for p in spec.params}
            return STUBS[entry.stub](StubCall(dict(args), types, spec.model_id))
        if entry.backend is Backend.SUBPROCESS:
            return self._run_subprocess(spec, entry, args)
        return self._run_remote(spec, entry, args)

    @staticmethod
    def _run_subprocess(spec: ExecutionSpec, entry: BackendEntry, args: dict[str, str]) -> str:
        argv = render_command(entry.command, args)
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=entry.timeout)
        except (OSError, subprocess.TimeoutExpired) as e:
            raise BackendError(f"{spec.model_id}: {e}") from e
        if proc.returncode != 0:
            tail = proc.stderr.strip().splitlines()[-1:] or [""]
            raise BackendError(f"{spec.model_id}: exit status {proc.returncode} {tail[0]}".rstrip())
        return proc.stdout.strip()

    @staticmethod
    def _run_remote(spec: ExecutionSpec, entry: BackendEntry, args: dict[str, str]) -> str:
        body = json.dumps({"model": spec.model_id, "function": spec.function_name, "args": args})
        req = urllib.request.Request(
            entry.url,
            data=body.encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=entry.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as e:
            raise BackendError(f"{spec.model_id}: remote call failed: {e}") from e
        if not isinstance(payload, dict) or not isinstance(payload.get("output"), str):
            raise BackendError(f"{spec.model_id}: remote reply has no 'output' string")
        return payload["output"]
