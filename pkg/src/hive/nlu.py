"""Query parsing, domain classification, and action selection.

Every operation goes through a TextCompletion provider and has a
deterministic rule-based fallback so the pipeline keeps working offline.
"""

from __future__ import annotations

import ast
import json
import logging
import re
from dataclasses import dataclass, field

from . import prompts
from .errors import EmptySelection, ProviderError
from .pddl.merge import base_action_name
from .providers import GenerationParams, TextCompletion
from .snippets import AUDIO_EXTENSIONS, IMAGE_EXTENSIONS

log = logging.getLogger(__name__)

PARSE_KEYS = ("instruction", "input_text", "question", "url", "data_dict", "categories")
PARSE_REPAIR = "Do not generate anything other than a parsable JSON"
SELECT_REPAIR = "Do not give any explanations, only return a list and nothing else."
MAX_ACTIONS = 3

DOCUMENT_EXTENSIONS = (".pdf", ".txt", ".csv", ".json", ".docx")
MEDIA_EXTENSIONS = AUDIO_EXTENSIONS + IMAGE_EXTENSIONS + DOCUMENT_EXTENSIONS


@dataclass(frozen=True)
class ParsedQuery:
    instruction: str | None = None
    input_text: str | None = None
    question: str | None = None
    url: str | None = None
    data_dict: dict[str, str] = field(default_factory=dict)
    categories: tuple[str, ...] = ()
    degraded: bool = False  # produced by the rule-based fallback

    def is_empty(self) -> bool:
        return not any(getattr(self, k) for k in PARSE_KEYS)

    def fields(self) -> dict[str, object]:
        """The six parsed fields, absent ones omitted."""
        out: dict[str, object] = {}
        for k in PARSE_KEYS:
            v = getattr(self, k)
            if v:
                out[k] = list(v) if k == "categories" else v
        return out

    def to_record(self) -> dict:
        rec = {k: getattr(self, k) for k in PARSE_KEYS}
        rec["categories"] = list(self.categories)
        rec["data_dict"] = dict(self.data_dict)
        rec["degraded"] = self.degraded
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "ParsedQuery":
        return cls(
            instruction=rec.get("instruction"),
            input_text=rec.get("input_text"),
            question=rec.get("question"),
            url=rec.get("url"),
            data_dict=dict(rec.get("data_dict") or {}),
            categories=tuple(rec.get("categories") or ()),
            degraded=bool(rec.get("degraded", False)),
        )


@dataclass(frozen=True)
class DomainSubset:
    domains: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()
    source: str = "provider"  # or "keywords"

    def __iter__(self):
        return iter(self.domains)

    def __len__(self) -> int:
        return len(self.domains)


# --- reply decoding -----------------------------------------------------------


def _literal(text: str):
    """Decode a JSON object or Python literal, or return None."""
    try:
        return json.loads(text)
    except (json.JSONDecodeError, ValueError):
        pass
    try:
        return ast.literal_eval(text)
    except (ValueError, TypeError, SyntaxError, MemoryError, RecursionError):
        return None


def _first_object(reply: str):
    start = reply.find("{")
    end = reply.rfind("}")
    if start < 0 or end <= start:
        return None
    chunk = reply[start : end + 1]
    # few-shot examples show doubled braces; accept them
    while chunk.startswith("{{") and chunk.endswith("}}"):
        inner = _literal(chunk)
        if isinstance(inner, dict):
            return inner
        chunk = chunk[1:-1]
    return _literal(chunk)


def _clean_str(v) -> str | None:
    if v is None:
        return None
    if not isinstance(v, str):
        raise TypeError("expected a string")
    v = v.strip()
    return v or None


def _decode_parse_reply(reply: str) -> ParsedQuery | None:
    obj = _first_object(reply)
    if not isinstance(obj, dict) or not obj or not set(obj) <= set(PARSE_KEYS):
        return None
    try:
        text_fields = {k: _clean_str(obj.get(k)) for k in ("instruction", "input_text", "question", "url")}
        raw_dict = obj.get("data_dict") or {}
        raw_cats = obj.get("categories") or []
        if not isinstance(raw_dict, dict) or not isinstance(raw_cats, (list, tuple)):
            return None
        data_dict = {str(k): str(v) for k, v in raw_dict.items()}
        categories = tuple(str(c).strip() for c in raw_cats if str(c).strip())
    except TypeError:
        return None
    pq = ParsedQuery(**text_fields, data_dict=data_dict, categories=categories)
    return None if pq.is_empty() else pq


# --- parsing ----------------------------------------------------------------------


def parse_query(
    q: str,
    provider: TextCompletion,
    params: GenerationParams | None = None,
    allow_fallback: bool = True,
) -> ParsedQuery:
    """Structured fields of ``q`` via the parsing prompt, with one repair retry.

    A reply whose url is not a verbatim substring of ``q`` is rejected and
    the rule-based parse is used instead.
    """
    if not q or not q.strip():
        raise ValueError("query must be non-empty")
    prompt = prompts.render(prompts.PARSING, USER_INPUT=q)
    transport_failures = 0
    for attempt in (prompt, prompt + "\n" + PARSE_REPAIR):
        try:
            reply = provider.complete(attempt, params)
        except ProviderError as e:
            log.warning("parse provider call failed: %s", e)
            transport_failures += 1
            continue
        pq = _decode_parse_reply(reply)
        if pq is None:
            log.warning("unparsable parse reply; %s", "retrying" if attempt is prompt else "giving up")
            continue
        if pq.url is not None and pq.url not in q:
            log.warning("provider url %r is not in the query; using rule-based parse", pq.url)
            break
        return pq
    if transport_failures == 2 and not allow_fallback:
        raise ProviderError("both parse attempts failed and fallback is disabled")
    return fallback_parse(q)


_TRAILING = ".,;:!?)]}\"'`”’>"
_LEADING = "([{\"'`“‘<"
_QUOTED_DOUBLE = re.compile(r"\"([^\"]+)\"|“([^”]+)”|`([^`]+)`")
_QUOTED_ANY = re.compile(r"'([^']+)'|\"([^\"]+)\"|‘([^’]+)’|“([^”]+)”")
_ENUM_TRIGGER = re.compile(r"such as|categor(?:y|ies)", re.I)


def _looks_like_path(token: str) -> bool:
    low = token.lower()
    return (
        "://" in token
        or token.startswith(("./", "../"))
        or low.split("?", 1)[0].endswith(MEDIA_EXTENSIONS)
    )


def _find_url(q: str) -> str | None:
    for raw in q.split():
        token = raw.lstrip(_LEADING).rstrip(_TRAILING)
        if token and _looks_like_path(token):
            return token
    return None


def _tidy(text: str) -> str:
    text = " ".join(text.split())
    return re.sub(r"\s+([.,;:!?])", r"\1", text)


def _groups(m: re.Match) -> str:
    return next(g for g in m.groups() if g is not None)


def _find_categories(text: str) -> tuple[str, ...]:
    trigger = _ENUM_TRIGGER.search(text)
    if trigger:
        tail = text[trigger.end():]
        stop = re.search(r"[.!?](\s|$)", tail)
        # a quote may contain the stop character; only cut outside quotes
        items = [_groups(m) for m in _QUOTED_ANY.finditer(tail[: stop.end()] if stop else tail)]
        if not items:
            items = [_groups(m) for m in _QUOTED_ANY.finditer(tail)]
        if items:
            return tuple(i.strip() for i in items if i.strip())
    # "... 'x', 'y' or 'z'" without a trigger word
    m = re.search(r"((?:(['\"‘“])[^'\"‘’“”]+['\"’”],?\s*)+or\s+['\"‘“][^'\"‘’“”]+['\"’”])", text)
    if m:
        items = [_groups(x) for x in _QUOTED_ANY.finditer(m.group(1))]
        if len(items) >= 2:
            return tuple(i.strip() for i in items)
    return ()


def _find_data_dict(q: str) -> tuple[dict[str, str], str | None]:
    """The first ``{...}`` literal in ``q`` as a string map, and its source text."""
    start = q.find("{")
    end = q.rfind("}")
    if start < 0 or end <= start:
        return {}, None
    source = q[start : end + 1]
    obj = _literal(source)
    if not isinstance(obj, dict):
        return {}, None
    return {str(k): str(v) for k, v in obj.items()}, source


def fallback_parse(q: str) -> ParsedQuery:
    """Deterministic pattern-based parse used when the provider cannot help."""
    if not q or not q.strip():
        raise ValueError("query must be non-empty")
    url = _find_url(q)
    rest = q.replace(url, " ", 1) if url else q
    rest = _tidy(rest)
    data_dict, dict_source = _find_data_dict(q)
    searchable = rest.replace(dict_source, " ") if dict_source else rest

    question = None
    input_text = None
    for m in _QUOTED_DOUBLE.finditer(searchable):
        span = _groups(m).strip()
        if question is None and span.endswith("?"):
            question = span
        elif input_text is None and len(span.split()) >= 3:
            input_text = span
    if question is None:
        unquoted = _QUOTED_DOUBLE.sub(" ", searchable)
        for sentence in re.findall(r"[^.?!]*\?", unquoted):
            sentence = _tidy(sentence)
            if sentence and sentence != "?":
                question = sentence
                break

    return ParsedQuery(
        instruction=rest or None,
        input_text=input_text,
        question=question,
        url=url,
        data_dict=data_dict,
        categories=_find_categories(searchable),
        degraded=True,
    )


# --- domain classification ---------------------------------------------------------


def _canon(name: str) -> str:
    name = name.strip().strip("'\"`[]().*-").strip().lower()
    name = re.sub(r"[\s\-]+", "_", name)
    return name.replace("z", "s")  # summarization / summarisation


# stem -> domains, matched against the lowercased instruction
DOMAIN_KEYWORDS: list[tuple[str, tuple[str, ...]]] = [
    ("transcri", ("audio",)),
    ("speech", ("audio",)),
    ("voice", ("audio",)),
    ("audio", ("audio",)),
    ("spoken", ("audio",)),
    ("read aloud", ("audio",)),
    ("summar", ("summarisation",)),
    ("entit", ("token_classification",)),
    ("translat", ("machine_translation",)),
    ("question", ("question_answering",)),
    ("answer", ("question_answering",)),
    ("classif", ("text_classification",)),
    ("sentiment", ("text_classification",)),
    ("generate an image", ("image_generation",)),
    ("draw", ("image_generation",)),
    ("paint", ("image_generation",)),
    ("illustrat", ("image_generation",)),
    ("image", ("image_to_text", "image_to_image")),
    ("picture", ("image_to_text", "image_to_image")),
    ("photo", ("image_to_text", "image_to_image")),
    ("caption", ("image_to_text",)),
    ("depth", ("image_to_image",)),
    ("detect", ("image_to_text",)),
    ("write", ("text_generation",)),
    ("story", ("text_generation",)),
    ("continue", ("text_generation",)),
]


def keyword_domains(instruction: str, registered: list[str]) -> list[str]:
    """Registered domains whose keywords occur in ``instruction``, by first position."""
    low = instruction.lower()
    allowed = set(registered)
    hits: list[tuple[int, int, str]] = []
    for order, (stem, domains) in enumerate(DOMAIN_KEYWORDS):
        pos = low.find(stem)
        if pos < 0:
            continue
        for d in domains:
            if d in allowed:
                hits.append((pos, order, d))
    return list(dict.fromkeys(d for _, _, d in sorted(hits)))


def _split_domain_reply(reply: str) -> list[str]:
    marker = reply.rfind("Domains:")
    text = reply[marker + len("Domains:"):] if marker >= 0 else reply
    return [p for p in re.split(r"[;,\n]", text) if p.strip()]


def classify_domains(
    instruction: str,
    registered: list[str],
    provider: TextCompletion,
    params: GenerationParams | None = None,
    allow_fallback: bool = True,
) -> DomainSubset:
    if not registered:
        raise ValueError("no registered domains")
    prompt = prompts.render(
        prompts.DOMAIN_CLASSIFICATION, domains=json.dumps(list(registered)), query=instruction
    )
    try:
        reply = provider.complete(prompt, params)
    except ProviderError:
        if not allow_fallback:
            raise
        log.warning("domain provider unavailable; using keyword table")
        return DomainSubset(tuple(keyword_domains(instruction, registered)), (), "keywords")

    by_canon = {_canon(r): r for r in registered}
    picked: list[str] = []
    warnings: list[str] = []
    for part in _split_domain_reply(reply):
        name = by_canon.get(_canon(part))
        if name is None:
            warnings.append(f"dropped unregistered domain {part.strip()!r}")
        elif name not in picked:
            picked.append(name)
    for w in warnings:
        log.warning(w)
    if picked:
        return DomainSubset(tuple(picked), tuple(warnings), "provider")
    return DomainSubset(tuple(keyword_domains(instruction, registered)), tuple(warnings), "keywords")


# --- action selection -----------------------------------------------------------


# stem -> action base name
ACTION_KEYWORDS: list[tuple[str, str]] = [
    ("transcri", "automatic_speech_recognition"),
    ("speech to text", "automatic_speech_recognition"),
    ("audio to text", "automatic_speech_recognition"),
    ("text to speech", "text_to_speech"),
    ("read aloud", "text_to_speech"),
    ("generate an image", "text_to_image"),
    ("draw", "text_to_image"),
    ("paint", "text_to_image"),
    ("illustrat", "text_to_image"),
    ("caption", "image_captioning"),
    ("describe the image", "image_captioning"),
    ("detect", "object_detection"),
    ("objects", "object_detection"),
    ("depth", "depth_estimation"),
    ("translat", "machine_translation"),
    ("table", "table_question_answering"),
    ("in the image", "visual_question_answering"),
    ("context", "context_question_answering"),
    ("question", "open_question_answering"),
    ("summar", "abstractive_summarisation"),
    ("classif", "text_classification"),
    ("sentiment", "text_classification"),
    ("entit", "named_entity_recognition"),
    ("write", "text_generation"),
    ("continue", "text_generation"),
    ("story", "text_generation"),
]


def keyword_actions(instruction: str, actions: list[str]) -> list[str]:
    low = instruction.lower()
    by_base: dict[str, list[str]] = {}
    for a in actions:
        by_base.setdefault(base_action_name(a), []).append(a)
    hits: list[tuple[int, int, str]] = []
    for order, (stem, base) in enumerate(ACTION_KEYWORDS):
        pos = low.find(stem)
        if pos >= 0:
            for a in by_base.get(base, ()):
                hits.append((pos, order, a))
    return list(dict.fromkeys(a for _, _, a in sorted(hits)))[:MAX_ACTIONS]


def _decode_action_reply(reply: str, actions: list[str]) -> list[str]:
    items = None
    start, end = reply.find("["), reply.rfind("]")
    if 0 <= start < end:
        decoded = _literal(reply[start : end + 1])
        if isinstance(decoded, (list, tuple)):
            items = [str(x) for x in decoded]
    if items is None:
        items = [p.strip().strip("'\"`") for p in re.split(r"[,\n]", reply)]
    by_lower = {a.lower(): a for a in actions}
    out: list[str] = []
    for item in items:
        name = by_lower.get(item.strip().lower())
        if name is not None and name not in out:
            out.append(name)
    return out[:MAX_ACTIONS]


def select_actions(
    instruction: str,
    actions: list[str],
    provider: TextCompletion,
    params: GenerationParams | None = None,
    allow_fallback: bool = True,
) -> list[str]:
    """At most three of ``actions`` needed for ``instruction``, in reply order."""
    if not actions:
        raise ValueError("no actions to select from")
    prompt = prompts.render(
        prompts.ACTION_SELECTION, user_instruction=instruction, actions=json.dumps(list(actions))
    )
    for attempt in (prompt, prompt + "\n" + SELECT_REPAIR):
        try:
            reply = provider.complete(attempt, params)
        except ProviderError:
            if not allow_fallback:
                raise
            log.warning("action provider unavailable; using keyword table")
            picked = keyword_actions(instruction, actions)
            if not picked:
                raise EmptySelection(f"no keyword matches any of {actions}") from None
            return picked
        picked = _decode_action_reply(reply, actions)
        if picked:
            return picked
    raise EmptySelection("provider reply names none of the available actions")
