"""Capability Knowledge Graph: a typed triple store with model/task/benchmark views.

Triples are stored with set semantics and indexed by subject and by
(predicate, object). The on-disk form is one JSON object per line::

    {"s": "Model:openai/whisper-large-v2", "p": "supports_task",
     "o": "Task:automatic_speech_recognition", "ot": "node"}

Benchmark results are reified: a model ``reports_result`` a Result node which
carries exactly one benchmark, metric, value and direction.
"""

from __future__ import annotations

import json
import math
import re
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Union

from .errors import ArityViolation, IntegrityError, ParseError
from .snippets import ExecutionSpec


class Kind(str, Enum):
    MODEL = "Model"
    TASK = "Task"
    BENCHMARK = "Benchmark"
    METRIC = "Metric"
    LICENSE = "License"
    ORGANIZATION = "Organization"
    LANGUAGE = "Language"
    SNIPPET = "Snippet"
    RESULT = "Result"


class EdgeKind(str, Enum):
    SUPPORTS_TASK = "supports_task"
    HAS_LICENSE = "has_license"
    HAS_SIZE_BYTES = "has_size_bytes"
    AUTHORED_BY = "authored_by"
    COVERS_LANGUAGE = "covers_language"
    HAS_SNIPPET = "has_snippet"
    REPORTS_RESULT = "reports_result"
    RESULT_ON_BENCHMARK = "result_on_benchmark"
    RESULT_METRIC = "result_metric"
    RESULT_VALUE = "result_value"
    RESULT_DIRECTION = "result_direction"


class Direction(str, Enum):
    HIGHER_BETTER = "higher_better"
    LOWER_BETTER = "lower_better"


LOWER_BETTER_METRICS = frozenset({"wer", "cer", "perplexity", "mae", "rmse", "fid"})


def direction_for_metric(metric: str) -> Direction:
    if metric.strip().lower() in LOWER_BETTER_METRICS:
        return Direction.LOWER_BETTER
    return Direction.HIGHER_BETTER


def slug(text: str) -> str:
    """Lowercase, runs of non-alphanumerics collapsed to one hyphen."""
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")


@dataclass(frozen=True, order=True)
class NodeId:
    kind: Kind
    local_name: str

    def __post_init__(self):
        if not isinstance(self.kind, Kind):
            object.__setattr__(self, "kind", Kind(self.kind))
        if not isinstance(self.local_name, str) or not self.local_name.strip():
            raise ValueError("local_name must be a non-empty string")

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.local_name}"

    @classmethod
    def parse(cls, text: str) -> "NodeId":
        kind, sep, local = text.partition(":")
        if not sep:
            raise ValueError(f"node reference {text!r} lacks 'kind:' prefix")
        try:
            return cls(Kind(kind), local)
        except ValueError as exc:
            raise ValueError(f"bad node reference {text!r}: {exc}") from None


def model(name: str) -> NodeId:
    return NodeId(Kind.MODEL, name)


def task(name: str) -> NodeId:
    return NodeId(Kind.TASK, name)


Object = Union[NodeId, str, int, float]

# predicate -> (subject kind, object type tag, object node kind if node)
_SCHEMA: dict[EdgeKind, tuple[Kind, str, Kind | None]] = {
    EdgeKind.SUPPORTS_TASK: (Kind.MODEL, "node", Kind.TASK),
    EdgeKind.HAS_LICENSE: (Kind.MODEL, "node", Kind.LICENSE),
    EdgeKind.HAS_SIZE_BYTES: (Kind.MODEL, "int", None),
    EdgeKind.AUTHORED_BY: (Kind.MODEL, "node", Kind.ORGANIZATION),
    EdgeKind.COVERS_LANGUAGE: (Kind.MODEL, "node", Kind.LANGUAGE),
    EdgeKind.HAS_SNIPPET: (Kind.MODEL, "node", Kind.SNIPPET),
    EdgeKind.REPORTS_RESULT: (Kind.MODEL, "node", Kind.RESULT),
    EdgeKind.RESULT_ON_BENCHMARK: (Kind.RESULT, "node", Kind.BENCHMARK),
    EdgeKind.RESULT_METRIC: (Kind.RESULT, "node", Kind.METRIC),
    EdgeKind.RESULT_VALUE: (Kind.RESULT, "float", None),
    EdgeKind.RESULT_DIRECTION: (Kind.RESULT, "str", None),
}


@dataclass(frozen=True)
class Triple:
    subject: NodeId
    predicate: EdgeKind
    object: Object

    def __post_init__(self):
        if not isinstance(self.predicate, EdgeKind):
            object.__setattr__(self, "predicate", EdgeKind(self.predicate))
        # floats and ints hash equal when numerically equal; keep value types stable
        if self.predicate is EdgeKind.RESULT_VALUE and isinstance(self.object, int) and not isinstance(self.object, bool):
            object.__setattr__(self, "object", float(self.object))

    @property
    def object_tag(self) -> str:
        return _SCHEMA[self.predicate][1]


def check_arity(t: Triple) -> None:
    """Raise ArityViolation unless the subject/object fit the predicate."""
    subject_kind, tag, node_kind = _SCHEMA[t.predicate]
    if not isinstance(t.subject, NodeId) or t.subject.kind is not subject_kind:
        raise ArityViolation(f"{t.predicate.value} needs a {subject_kind.value} subject, got {t.subject}")
    o = t.object
    if tag == "node":
        if not isinstance(o, NodeId) or o.kind is not node_kind:
            raise ArityViolation(f"{t.predicate.value} needs a {node_kind.value} object, got {o!r}")
    elif tag == "int":
        if isinstance(o, bool) or not isinstance(o, int) or o < 0:
            raise ArityViolation(f"{t.predicate.value} needs a non-negative integer, got {o!r}")
    elif tag == "float":
        if isinstance(o, bool) or not isinstance(o, (int, float)) or not math.isfinite(o):
            raise ArityViolation(f"{t.predicate.value} needs a finite number, got {o!r}")
    elif tag == "str":
        if t.predicate is EdgeKind.RESULT_DIRECTION and o not in {d.value for d in Direction}:
            raise ArityViolation(f"result_direction must be higher_better or lower_better, got {o!r}")


@dataclass(frozen=True)
class BenchmarkResult:
    benchmark: NodeId
    metric: NodeId
    value: float
    direction: Direction


@dataclass(frozen=True)
class ModelRecord:
    model: NodeId
    tasks: frozenset[NodeId]
    license: str | None
    size_bytes: int | None
    results: tuple[BenchmarkResult, ...]
    snippet: str | None


class CapabilityGraph:
    """Set of triples plus lookup indexes; optional execution specs keyed by snippet name."""

    def __init__(self, triples: Iterable[Triple] = (), specs: dict[str, ExecutionSpec] | None = None):
        self._triples: dict[Triple, None] = {}
        self._by_subject: dict[NodeId, list[Triple]] = defaultdict(list)
        self._by_pred_obj: dict[tuple[EdgeKind, Object], list[Triple]] = defaultdict(list)
        self.specs: dict[str, ExecutionSpec] = dict(specs or {})
        for t in triples:
            self.add(t)

    def add(self, t: Triple) -> bool:
        """Insert ``t``; returns False when it was already present."""
        check_arity(t)
        if t in self._triples:
            return False
        self._triples[t] = None
        self._by_subject[t.subject].append(t)
        self._by_pred_obj[(t.predicate, t.object)].append(t)
        return True

    def __contains__(self, t: Triple) -> bool:
        return t in self._triples

    def __iter__(self):
        return iter(self._triples)

    def __len__(self) -> int:
        return len(self._triples)

    def triple_set(self) -> frozenset[Triple]:
        return frozenset(self._triples)

    def outgoing(self, subject: NodeId, predicate: EdgeKind | None = None) -> list[Triple]:
        ts = self._by_subject.get(subject, [])
        if predicate is None:
            return list(ts)
        return [t for t in ts if t.predicate is predicate]

    def subjects(self, predicate: EdgeKind, obj: Object) -> list[NodeId]:
        return [t.subject for t in self._by_pred_obj.get((predicate, obj), [])]

    def _values(self, subject: NodeId, predicate: EdgeKind) -> list[Object]:
        return [t.object for t in self.outgoing(subject, predicate)]

    # --- views ------------------------------------------------------------

    def nodes(self, kind: Kind) -> list[NodeId]:
        seen = set()
        for t in self._triples:
            for n in (t.subject, t.object):
                if isinstance(n, NodeId) and n.kind is kind:
                    seen.add(n)
        return sorted(seen, key=lambda n: n.local_name)

    def models(self) -> list[NodeId]:
        return self.nodes(Kind.MODEL)

    def tasks(self) -> list[NodeId]:
        return self.nodes(Kind.TASK)

    def results_for(self, model: NodeId, benchmark: NodeId | None = None) -> list[BenchmarkResult]:
        out = []
        for r in sorted(self._values(model, EdgeKind.REPORTS_RESULT)):
            res = self._materialize_result(r)
            if res is None:
                continue
            if benchmark is not None and res.benchmark != benchmark:
                continue
            out.append(res)
        return out

    def _materialize_result(self, r: NodeId) -> BenchmarkResult | None:
        bench = self._values(r, EdgeKind.RESULT_ON_BENCHMARK)
        metric = self._values(r, EdgeKind.RESULT_METRIC)
        value = self._values(r, EdgeKind.RESULT_VALUE)
        direction = self._values(r, EdgeKind.RESULT_DIRECTION)
        if not (len(bench) == len(metric) == len(value) == len(direction) == 1):
            return None
        return BenchmarkResult(bench[0], metric[0], float(value[0]), Direction(direction[0]))

    def snippet_for(self, model: NodeId) -> str | None:
        snippets = sorted(self._values(model, EdgeKind.HAS_SNIPPET))
        return snippets[0].local_name if snippets else None

    def spec_for(self, model: NodeId) -> ExecutionSpec | None:
        name = self.snippet_for(model)
        return self.specs.get(name) if name is not None else None

    def model_record(self, model: NodeId) -> ModelRecord:
        licenses = sorted(n.local_name for n in self._values(model, EdgeKind.HAS_LICENSE))
        sizes = self._values(model, EdgeKind.HAS_SIZE_BYTES)
        return ModelRecord(
            model=model,
            tasks=frozenset(self._values(model, EdgeKind.SUPPORTS_TASK)),
            license=licenses[0] if licenses else None,
            size_bytes=min(sizes) if sizes else None,
            results=tuple(self.results_for(model)),
            snippet=self.snippet_for(model),
        )

    def models_for_task(self, task_node: NodeId) -> list[ModelRecord]:
        models = set(self.subjects(EdgeKind.SUPPORTS_TASK, task_node))
        return [self.model_record(m) for m in sorted(models, key=lambda n: n.local_name)]

    def stats(self) -> dict[str, int]:
        entities = set()
        for t in self._triples:
            entities.add(t.subject)
            if isinstance(t.object, NodeId):
                entities.add(t.object)
        return {"triples": len(self._triples), "entities": len(entities)}

    def validate(self) -> None:
        """Check result reification and snippet resolution; raise IntegrityError."""
        problems = []
        for t in self._triples:
            if t.predicate is EdgeKind.REPORTS_RESULT:
                r = t.object
                for p in (
                    EdgeKind.RESULT_ON_BENCHMARK,
                    EdgeKind.RESULT_METRIC,
                    EdgeKind.RESULT_VALUE,
                    EdgeKind.RESULT_DIRECTION,
                ):
                    n = len(self.outgoing(r, p))
                    if n != 1:
                        problems.append(f"{r} has {n} {p.value} triples")
            elif t.predicate is EdgeKind.HAS_SNIPPET and t.object.local_name not in self.specs:
                problems.append(f"{t.subject} snippet {t.object.local_name!r} has no execution spec")
        if problems:
            raise IntegrityError("; ".join(sorted(problems)))


def add_triple(graph: CapabilityGraph, t: Triple) -> CapabilityGraph:
    graph.add(t)
    return graph


def result_triples(
    model_node: NodeId,
    result_name: str,
    benchmark: str,
    metric: str,
    value: float,
    direction: Direction | None = None,
) -> list[Triple]:
    """The five triples that attach one reified benchmark result to a model."""
    r = NodeId(Kind.RESULT, result_name)
    d = direction or direction_for_metric(metric)
    return [
        Triple(model_node, EdgeKind.REPORTS_RESULT, r),
        Triple(r, EdgeKind.RESULT_ON_BENCHMARK, NodeId(Kind.BENCHMARK, benchmark)),
        Triple(r, EdgeKind.RESULT_METRIC, NodeId(Kind.METRIC, metric)),
        Triple(r, EdgeKind.RESULT_VALUE, float(value)),
        Triple(r, EdgeKind.RESULT_DIRECTION, d.value),
    ]


# --- line-delimited serialization ---------------------------------------------


def _decode_object(raw, ot: str, line_no: int) -> Object:
    if ot == "node":
        if not isinstance(raw, str):
            raise ParseError("node object must be a 'kind:name' string", line_no)
        try:
            return NodeId.parse(raw)
        except ValueError as exc:
            raise ParseError(str(exc), line_no) from None
    if ot == "str":
        if not isinstance(raw, str):
            raise ArityViolation(f"expected string object, got {raw!r}", line_no)
        return raw
    if ot == "int":
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise ArityViolation(f"expected integer object, got {raw!r}", line_no)
        return raw
    if ot == "float":
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ArityViolation(f"expected float object, got {raw!r}", line_no)
        return float(raw)
    raise ParseError(f"unknown object type tag {ot!r}", line_no)


def parse_triple_line(line: str, line_no: int) -> Triple:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line_no) from None
    if not isinstance(rec, dict):
        raise ParseError("record must be an object", line_no)
    for key in ("s", "p", "o", "ot"):
        if key not in rec:
            raise ParseError(f"missing field {key!r}", line_no)
    try:
        pred = EdgeKind(rec["p"])
    except ValueError:
        raise ParseError(f"unknown predicate {rec['p']!r}", line_no) from None
    if not isinstance(rec["s"], str):
        raise ParseError("subject must be a 'kind:name' string", line_no)
    try:
        subject = NodeId.parse(rec["s"])
    except ValueError as exc:
        raise ParseError(str(exc), line_no) from None
    expected_tag = _SCHEMA[pred][1]
    if rec["ot"] != expected_tag:
        raise ArityViolation(f"{pred.value} expects ot={expected_tag!r}, got {rec['ot']!r}", line_no)
    obj = _decode_object(rec["o"], rec["ot"], line_no)
    t = Triple(subject, pred, obj)
    try:
        check_arity(t)
    except ArityViolation as exc:
        raise ArityViolation(str(exc), line_no) from None
    return t


def iter_triples(stream: IO[str] | IO[bytes] | Iterable) -> Iterable[Triple]:
    for line_no, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield parse_triple_line(stripped, line_no)


def load_graph(stream, specs: dict[str, ExecutionSpec] | None = None) -> CapabilityGraph:
    return CapabilityGraph(iter_triples(stream), specs=specs)


def triple_to_record(t: Triple) -> dict:
    o = t.object
    return {
        "s": str(t.subject),
        "p": t.predicate.value,
        "o": str(o) if isinstance(o, NodeId) else o,
        "ot": t.object_tag,
    }


def dump_graph(graph: CapabilityGraph | Iterable[Triple]) -> str:
    return "".join(json.dumps(triple_to_record(t), ensure_ascii=False) + "\n" for t in graph)


def load_graph_files(path, specs_path=None) -> CapabilityGraph:
    """Load a triple file and, when present, its execution-spec sidecar."""
    from pathlib import Path

    from .snippets import load_specs, specs_path_for

    path = Path(path)
    sp = Path(specs_path) if specs_path else specs_path_for(path)
    specs = {}
    if sp.exists():
        with sp.open(encoding="utf-8") as fh:
            specs = load_specs(fh)
    with path.open(encoding="utf-8") as fh:
        return load_graph(fh, specs=specs)
