"""Build capability-graph content from local model cards and benchmark records.

A card is a markdown file with a YAML front-matter header::

    ---
    model_id: openai/whisper-large-v2
    license: Apache-2.0
    size_bytes: 6170000000
    tasks: [automatic_speech_recognition]
    arxiv_ids: ["2212.04356"]
    ---
    # body ...

Front matter is read with YAML's base loader, so every scalar stays a
string and is converted explicitly here.
"""

from __future__ import annotations

import copy
import json
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

import yaml

from . import prompts
from .ckg import (
    BenchmarkResult,
    CapabilityGraph,
    EdgeKind,
    Kind,
    NodeId,
    Triple,
    direction_for_metric,
    result_triples,
    slug,
)
from .embed import TextEmbedder
from .errors import EmbedderError, ParseError, ProviderError, SpecParseError
from .providers import GenerationParams, TextCompletion
from .snippets import ExecutionSpec, extract_fenced_code, signature_from_code

log = logging.getLogger(__name__)

DEFAULT_KEYWORDS = ("usage", "how to use", "example", "inference", "pipeline", "quickstart")
SPEC_RETRY_SUFFIX = "Return only the python function inside one fenced code block."
ARXIV_RE = re.compile(r"^\d{4}\.\d{4,5}$")
CONTEXT_LINES = 3

INSERT_BAND = (0.8, 0.9)  # [low, high): attach; >= high: already covered; < low: irrelevant


# --- cards -----------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelCard:
    model_id: str
    markdown: str
    declared_tasks: tuple[str, ...] = ()
    license: str | None = None
    size_bytes: int | None = None
    arxiv_ids: tuple[str, ...] = ()
    languages: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.model_id or not self.model_id.strip():
            raise ParseError("card has an empty model_id")
        for a in self.arxiv_ids:
            if not ARXIV_RE.match(a):
                raise ParseError(f"card {self.model_id}: malformed arXiv id {a!r}")


def _as_list(value, field_name: str, source: str) -> tuple[str, ...]:
    if value is None or value == "":
        return ()
    if isinstance(value, str):
        return (value.strip(),)
    if isinstance(value, list) and all(isinstance(x, str) for x in value):
        return tuple(x.strip() for x in value if x.strip())
    raise ParseError(f"{source}: {field_name} must be a string or a list of strings")


def parse_card(text: str, source: str = "<card>") -> ModelCard:
    if not text.startswith("---"):
        raise ParseError(f"{source}: missing front matter")
    parts = text.split("\n")
    try:
        end = next(i for i in range(1, len(parts)) if parts[i].strip() == "---")
    except StopIteration:
        raise ParseError(f"{source}: unterminated front matter") from None
    header = "\n".join(parts[1:end])
    body = "\n".join(parts[end + 1 :])
    try:
        meta = yaml.load(header, Loader=yaml.BaseLoader) or {}
    except yaml.YAMLError as e:
        raise ParseError(f"{source}: bad front matter ({e})") from e
    if not isinstance(meta, dict):
        raise ParseError(f"{source}: front matter must be a mapping")

    size = meta.get("size_bytes")
    size_bytes = None
    if size not in (None, "", "null", "~"):
        try:
            size_bytes = int(str(size).replace("_", ""))
        except ValueError:
            raise ParseError(f"{source}: size_bytes must be an integer, got {size!r}") from None
        if size_bytes < 0:
            raise ParseError(f"{source}: size_bytes must be non-negative")
    license_ = meta.get("license")
    if license_ in ("", "null", "~"):
        license_ = None
    return ModelCard(
        model_id=str(meta.get("model_id", "")).strip(),
        markdown=body,
        declared_tasks=_as_list(meta.get("tasks"), "tasks", source),
        license=license_,
        size_bytes=size_bytes,
        arxiv_ids=_as_list(meta.get("arxiv_ids"), "arxiv_ids", source),
        languages=_as_list(meta.get("languages"), "languages", source),
    )


def load_cards(directory: str | Path) -> list[ModelCard]:
    if not Path(directory).is_dir():
        raise ParseError(f"card directory {directory} does not exist")
    cards = []
    for path in sorted(Path(directory).glob("*.md")):
        cards.append(parse_card(path.read_text(encoding="utf-8"), str(path)))
    ids = [c.model_id for c in cards]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ParseError(f"duplicate model ids in {directory}: {', '.join(dupes)}")
    return cards


# --- code blocks ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CodeBlock:
    language_hint: str | None
    text: str
    source_offset: int


_FENCE_OPEN = re.compile(r"^[ ]{0,3}(`{3,}|~{3,})[ \t]*([^\s`]*)[^\n]*$")


def _fenced_blocks(markdown: str) -> Iterator[tuple[str | None, int, int, int]]:
    """Yield (language, body start, body end, index of opening line)."""
    lines = markdown.splitlines(keepends=True)
    offsets = []
    pos = 0
    for line in lines:
        offsets.append(pos)
        pos += len(line)
    i = 0
    while i < len(lines):
        m = _FENCE_OPEN.match(lines[i].rstrip("\n"))
        if not m:
            i += 1
            continue
        fence = m.group(1)
        lang = m.group(2) or None
        close_re = re.compile(r"^[ ]{0,3}" + re.escape(fence[0]) + "{" + str(len(fence)) + r",}[ \t]*$")
        j = i + 1
        while j < len(lines) and not close_re.match(lines[j].rstrip("\n")):
            j += 1
        body_start = offsets[i + 1] if i + 1 < len(lines) else len(markdown)
        body_end = offsets[j] if j < len(lines) else len(markdown)
        yield lang, body_start, body_end, i
        i = j + 1


def extract_code_blocks(card: ModelCard, keywords: Iterable[str] = DEFAULT_KEYWORDS) -> list[CodeBlock]:
    """Fenced blocks whose body or three preceding lines mention a keyword."""
    kws = [k.lower() for k in keywords]
    if not kws:
        raise ValueError("at least one keyword is required")
    md = card.markdown
    lines = md.splitlines()
    out = []
    for lang, start, end, open_idx in _fenced_blocks(md):
        text = md[start:end]
        if not text.strip():
            continue
        context = "\n".join(lines[max(0, open_idx - CONTEXT_LINES) : open_idx]).lower()
        haystack = context + "\n" + text.lower()
        if any(k in haystack for k in kws):
            out.append(CodeBlock(lang, text, start))
    return out


# --- execution specs --------------------------------------------------------------------------


def usage_prompt(blocks: list[CodeBlock]) -> str:
    code = "\n\n".join(b.text.rstrip("\n") for b in blocks)
    return prompts.render(prompts.USAGE_EXTRACTION, code=code)


def synthesize_execution_spec(
    blocks: list[CodeBlock],
    provider: TextCompletion,
    model_id: str,
    params: GenerationParams | None = None,
) -> ExecutionSpec:
    if not blocks:
        raise ValueError("no code blocks to synthesize from")
    prompt = usage_prompt(blocks)
    last_error: SpecParseError | None = None
    for attempt in (prompt, prompt + "\n" + SPEC_RETRY_SUFFIX):
        reply = provider.complete(attempt, params)
        code = extract_fenced_code(reply)
        if code is None:
            last_error = SpecParseError("reply contains no fenced code")
            continue
        try:
            name, sig = signature_from_code(code, model_id)
        except SpecParseError as e:
            last_error = e
            continue
        return ExecutionSpec(model_id=model_id, params=sig, snippet=code, function_name=name)
    raise SpecParseError(f"{model_id}: {last_error}")


# --- benchmark records -----------------------------------------------------------------------


@dataclass(frozen=True)
class PwcRecord:
    arxiv_id: str
    model_variant: str
    benchmark: str
    metric: str
    value: float


def load_pwc(stream: IO[str] | Iterable[str]) -> list[PwcRecord]:
    out = []
    for line_no, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rec = json.loads(line)
            r = PwcRecord(
                arxiv_id=str(rec["arxiv_id"]),
                model_variant=str(rec["model_variant"]),
                benchmark=str(rec["benchmark"]),
                metric=str(rec["metric"]),
                value=float(rec["value"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise ParseError(f"bad benchmark record: {e}", line_no) from e
        if not math.isfinite(r.value):
            raise ParseError("benchmark value must be finite", line_no)
        out.append(r)
    return out


def _alnum(text: str) -> str:
    return re.sub(r"[^a-z0-9]", "", text.lower())


def variant_matches(variant: str, model_id: str) -> bool:
    return _alnum(variant) == _alnum(model_id.rsplit("/", 1)[-1])


def benchmark_node(name: str) -> NodeId:
    return NodeId(Kind.BENCHMARK, slug(name))


def metric_node(name: str) -> NodeId:
    return NodeId(Kind.METRIC, slug(name))


def align_benchmarks(card: ModelCard, records: Iterable[PwcRecord]) -> list[BenchmarkResult]:
    arxiv = set(card.arxiv_ids)
    out = []
    for r in records:
        if r.arxiv_id in arxiv and variant_matches(r.model_variant, card.model_id):
            out.append(
                BenchmarkResult(
                    benchmark_node(r.benchmark),
                    metric_node(r.metric),
                    r.value,
                    direction_for_metric(r.metric),
                )
            )
    return out


# --- graph assembly ---------------------------------------------------------------------------


@dataclass
class IngestReport:
    graph: CapabilityGraph
    warnings: list[str] = field(default_factory=list)


def snippet_name(model_id: str) -> str:
    return f"{model_id}#usage"


def card_triples(card: ModelCard, results: list[BenchmarkResult]) -> list[Triple]:
    m = NodeId(Kind.MODEL, card.model_id)
    out = [Triple(m, EdgeKind.SUPPORTS_TASK, NodeId(Kind.TASK, t)) for t in card.declared_tasks]
    if card.license:
        out.append(Triple(m, EdgeKind.HAS_LICENSE, NodeId(Kind.LICENSE, card.license)))
    if card.size_bytes is not None:
        out.append(Triple(m, EdgeKind.HAS_SIZE_BYTES, card.size_bytes))
    if "/" in card.model_id:
        org = card.model_id.split("/", 1)[0]
        out.append(Triple(m, EdgeKind.AUTHORED_BY, NodeId(Kind.ORGANIZATION, org)))
    for lang in card.languages:
        out.append(Triple(m, EdgeKind.COVERS_LANGUAGE, NodeId(Kind.LANGUAGE, lang)))
    for r in results:
        name = f"{card.model_id}#{r.benchmark.local_name}#{r.metric.local_name}"
        out.extend(
            result_triples(m, name, r.benchmark.local_name, r.metric.local_name, r.value, r.direction)
        )
    return out


def _card_spec(
    card: ModelCard,
    provider: TextCompletion | None,
    keywords: tuple[str, ...],
    params: GenerationParams | None,
) -> tuple[ExecutionSpec | None, str | None]:
    blocks = extract_code_blocks(card, keywords)
    if not blocks:
        return None, None
    if provider is None:
        return None, f"{card.model_id}: no provider; snippet skipped"
    try:
        return synthesize_execution_spec(blocks, provider, card.model_id, params), None
    except (ProviderError, SpecParseError) as e:
        return None, f"{card.model_id}: no execution spec ({e})"


def build_graph(
    cards: list[ModelCard],
    records: list[PwcRecord],
    provider: TextCompletion | None,
    keywords: Iterable[str] = DEFAULT_KEYWORDS,
    params: GenerationParams | None = None,
    jobs: int = 1,
) -> IngestReport:
    """Graph with metadata, aligned results and execution specs for ``cards``.

    A card whose snippet cannot be synthesized is still ingested, without a
    snippet; the executor's fallback strategy covers it.
    """
    kws = tuple(keywords)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            specs = list(pool.map(lambda c: _card_spec(c, provider, kws, params), cards))
    else:
        specs = [_card_spec(c, provider, kws, params) for c in cards]

    graph = CapabilityGraph()
    warnings = []
    for card, (spec, warning) in zip(cards, specs):
        for t in card_triples(card, align_benchmarks(card, records)):
            graph.add(t)
        if warning:
            warnings.append(warning)
            log.warning(warning)
        if spec is not None:
            name = snippet_name(card.model_id)
            graph.specs[name] = spec
            graph.add(Triple(NodeId(Kind.MODEL, card.model_id), EdgeKind.HAS_SNIPPET, NodeId(Kind.SNIPPET, name)))
    graph.validate()
    return IngestReport(graph, warnings)


# --- taxonomy ----------------------------------------------------------------------------------


@dataclass
class TaxonomyNode:
    label: str
    children: list["TaxonomyNode"] = field(default_factory=list)

    def to_record(self) -> dict:
        rec: dict = {"label": self.label}
        if self.children:
            rec["children"] = [c.to_record() for c in self.children]
        return rec

    @classmethod
    def from_record(cls, rec) -> "TaxonomyNode":
        if isinstance(rec, str):
            return cls(rec)
        if not isinstance(rec, dict) or not isinstance(rec.get("label"), str):
            raise ParseError("taxonomy node needs a string 'label'")
        return cls(rec["label"], [cls.from_record(c) for c in rec.get("children", [])])


@dataclass
class Taxonomy:
    roots: list[TaxonomyNode] = field(default_factory=list)

    def walk(self) -> Iterator[tuple[TaxonomyNode, int]]:
        """Pre-order traversal with depth (roots at depth 1)."""
        stack = [(r, 1) for r in reversed(self.roots)]
        while stack:
            node, depth = stack.pop()
            yield node, depth
            stack.extend((c, depth + 1) for c in reversed(node.children))

    def labels(self) -> list[str]:
        return [n.label for n, _ in self.walk()]

    def depth(self) -> int:
        return max((d for _, d in self.walk()), default=0)

    def to_record(self) -> list:
        return [r.to_record() for r in self.roots]

    @classmethod
    def from_record(cls, rec) -> "Taxonomy":
        if not isinstance(rec, list):
            raise ParseError("taxonomy must be a list of root nodes")
        return cls([TaxonomyNode.from_record(r) for r in rec])


def load_taxonomy(path: str | Path) -> Taxonomy:
    try:
        return Taxonomy.from_record(json.loads(Path(path).read_text(encoding="utf-8")))
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON ({e.msg})") from e


@dataclass(frozen=True)
class PlacementDecision:
    task: str
    similarity: float
    nearest: str
    outcome: str  # "covered", "inserted", "irrelevant"


def build_taxonomy(
    seed: Taxonomy,
    tasks: Iterable[str],
    embedder: TextEmbedder,
    decisions: list[PlacementDecision] | None = None,
) -> Taxonomy:
    """Place each task under its most similar label when similarity is in [0.8, 0.9).

    Tasks at or above 0.9 are already covered; below 0.8 they are unrelated.
    Processing is sequential and order-sensitive: inserted tasks are
    candidates for later ones. ``seed`` is not modified.
    """
    if not seed.roots:
        raise ValueError("seed taxonomy is empty")
    low, high = INSERT_BAND
    tax = copy.deepcopy(seed)
    for t in tasks:
        best: TaxonomyNode | None = None
        best_sim = -math.inf
        for node, _ in tax.walk():
            sim = embedder.similarity(t, node.label)
            if not isinstance(sim, (int, float)) or math.isnan(sim):
                raise EmbedderError(f"embedder returned {sim!r} for {t!r}")
            if sim > best_sim:  # strict: ties keep the first node in pre-order
                best, best_sim = node, sim
        if best_sim >= high:
            outcome = "covered"
        elif best_sim >= low:
            best.children.append(TaxonomyNode(t))
            outcome = "inserted"
        else:
            outcome = "irrelevant"
        if decisions is not None:
            decisions.append(PlacementDecision(t, float(best_sim), best.label, outcome))
    return tax


def flatten_taxonomy(t: Taxonomy, level: int = 3) -> list[str]:
    if level < 1:
        raise ValueError("level must be at least 1")
    return list(dict.fromkeys(n.label for n, d in t.walk() if d <= level))
