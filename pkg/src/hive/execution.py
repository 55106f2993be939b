"""Run a plan step by step and record a trace that doubles as the report.

Artifacts flow between steps through a per-run blackboard. Each plan step
gets exactly one StepRecord, created before anything runs, so the plan
section of the report and the execution section read the same records.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from .backends import BackendRegistry
from .ckg import CapabilityGraph, NodeId, task as task_node
from .embed import TextEmbedder, TrigramEmbedder
from .errors import BackendError, HiveError, UnboundParameter
from .nlu import DomainSubset, ParsedQuery
from .pddl.merge import base_action_name
from .planner import Plan
from .selection import SelectionResult, explain_selection
from .snippets import AUDIO_EXTENSIONS, IMAGE_EXTENSIONS, ExecutionSpec, SemanticType

SIMILARITY_THRESHOLD = 0.5
QUERY_STEP = -1

OK = "Ok"
ERR = "Err"
SKIPPED = "Skipped"

PRODUCES_TYPE = {
    "text": SemanticType.TEXT,
    "audio": SemanticType.AUDIO_PATH,
    "image": SemanticType.IMAGE_PATH,
    "table": SemanticType.TABLE,
}


# --- clocks ---------------------------------------------------------------------


class MonotonicClock:
    def now_ms(self) -> int:
        return time.perf_counter_ns() // 1_000_000


class LogicalClock:
    """Advances one millisecond per reading; makes offline traces reproducible."""

    def __init__(self, start: int = 0):
        self._t = start

    def now_ms(self) -> int:
        self._t += 1
        return self._t


# --- blackboard ---------------------------------------------------------------------


@dataclass(frozen=True)
class Artifact:
    key: str
    semantic_type: SemanticType
    value: str
    producer_step: int


class Blackboard:
    def __init__(self):
        self._items: dict[str, Artifact] = {}

    def put(self, key: str, semantic_type: SemanticType, value: str, producer_step: int) -> Artifact:
        if key in self._items:
            raise KeyError(f"artifact {key!r} already on the blackboard")
        art = Artifact(key, semantic_type, value, producer_step)
        self._items[key] = art
        return art

    def get(self, key: str) -> Artifact | None:
        return self._items.get(key)

    def visible(self, step: int) -> list[Artifact]:
        """Artifacts step ``step`` may read, most recent producer first."""
        arts = [a for a in self._items.values() if a.producer_step < step]
        order = {k: i for i, k in enumerate(self._items)}
        return sorted(arts, key=lambda a: (-a.producer_step, order[a.key]))

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items.values())


def url_semantic_type(url: str) -> SemanticType:
    low = url.lower().split("?", 1)[0]
    if low.endswith(AUDIO_EXTENSIONS):
        return SemanticType.AUDIO_PATH
    if low.endswith(IMAGE_EXTENSIONS):
        return SemanticType.IMAGE_PATH
    return SemanticType.OTHER


def seed_blackboard(pq: ParsedQuery) -> Blackboard:
    bb = Blackboard()
    if pq.instruction:
        bb.put("instruction", SemanticType.OTHER, pq.instruction, QUERY_STEP)
    if pq.input_text:
        bb.put("input_text", SemanticType.TEXT, pq.input_text, QUERY_STEP)
    if pq.question:
        bb.put("question", SemanticType.QUESTION, pq.question, QUERY_STEP)
    if pq.url:
        bb.put("url", url_semantic_type(pq.url), pq.url, QUERY_STEP)
    if pq.data_dict:
        bb.put("data_dict", SemanticType.TABLE, json.dumps(pq.data_dict, sort_keys=True), QUERY_STEP)
    if pq.categories:
        bb.put("categories", SemanticType.CATEGORIES, json.dumps(list(pq.categories)), QUERY_STEP)
    return bb


# --- argument mapping -----------------------------------------------------------------


@dataclass(frozen=True)
class Binding:
    value: str
    tier: int  # 1 name, 2 semantic type, 3 similarity, 4 default
    source: str

    def to_record(self) -> dict:
        return {"value": self.value, "tier": self.tier, "source": self.source}


def _by_type(kind: SemanticType, visible: list[Artifact]) -> Artifact | None:
    if kind in (SemanticType.OTHER, SemanticType.MODEL_PATH):
        return None
    for art in visible:  # most recent producer first
        if art.semantic_type is kind:
            return art
    if kind is SemanticType.TEXT:
        # no text yet: a bare question or request is its own input text
        for key in ("question", "instruction"):
            for art in visible:
                if art.key == key:
                    return art
    return None


def map_arguments(
    spec: ExecutionSpec,
    pq: ParsedQuery,
    bb: Blackboard,
    step: int = 0,
    embedder: TextEmbedder | None = None,
) -> dict[str, Binding]:
    """Bind every parameter of ``spec``; first matching tier wins.

    Tiers: exact name, semantic type, name similarity >= 0.5, default.
    The query's parsed fields are on the blackboard as producer -1.
    """
    embedder = embedder or TrigramEmbedder()
    visible = bb.visible(step)
    present = {a.key for a in visible}
    visible += [a for a in seed_blackboard(pq) if a.key not in present]
    by_key = {a.key: a for a in visible}
    out: dict[str, Binding] = {}
    for p in spec.params:
        art = by_key.get(p.name)
        if art is not None:
            out[p.name] = Binding(art.value, 1, art.key)
            continue
        art = _by_type(p.semantic_type, visible)
        if art is not None:
            out[p.name] = Binding(art.value, 2, art.key)
            continue
        if p.semantic_type is not SemanticType.MODEL_PATH:
            scored = [(embedder.similarity(p.name, a.key), -i, a) for i, a in enumerate(visible)]
            if scored:
                sim, _, best = max(scored, key=lambda x: (x[0], x[1]))
                if sim >= SIMILARITY_THRESHOLD:
                    out[p.name] = Binding(best.value, 3, best.key)
                    continue
        if p.default is not None:
            out[p.name] = Binding(p.default, 4, "default")
            continue
        raise UnboundParameter(p.name)
    return out


# --- spec resolution ----------------------------------------------------------------------


def fallback_spec(model: NodeId, task: NodeId, graph: CapabilityGraph) -> ExecutionSpec | None:
    """A same-task sibling's spec re-targeted at ``model``, or None."""
    for rec in graph.models_for_task(task):
        if rec.model == model:
            continue
        spec = graph.spec_for(rec.model)
        if spec is not None:
            return spec.with_model_path(model.local_name, borrowed_from=rec.model.local_name)
    return None


def resolve_spec(model: NodeId, task: NodeId, graph: CapabilityGraph) -> ExecutionSpec | None:
    spec = graph.spec_for(model)
    if spec is not None:
        return spec
    return fallback_spec(model, task, graph)


# --- trace ----------------------------------------------------------------------------------


@dataclass
class StepRecord:
    index: int
    action: str
    label: str
    produces: str | None
    model: str | None = None
    borrowed_from: str | None = None
    bound_args: dict[str, Binding] = field(default_factory=dict)
    output_key: str | None = None
    output: str | None = None
    duration_ms: int = 0
    status: str = SKIPPED
    error: str | None = None

    def to_record(self) -> dict:
        return {
            "index": self.index,
            "action": self.action,
            "label": self.label,
            "produces": self.produces,
            "model": self.model,
            "borrowed_from": self.borrowed_from,
            "bound_args": {k: v.to_record() for k, v in self.bound_args.items()},
            "output_key": self.output_key,
            "output": self.output,
            "duration_ms": self.duration_ms,
            "status": self.status,
            "error": self.error,
        }


@dataclass
class ExecutionTrace:
    query: str = ""
    parsed: ParsedQuery = field(default_factory=ParsedQuery)
    domains: DomainSubset = field(default_factory=DomainSubset)
    selected_actions: tuple[str, ...] = ()
    steps: list[StepRecord] = field(default_factory=list)
    selection: SelectionResult = field(default_factory=SelectionResult)
    t_parse_ms: int = 0
    t_plan_ms: int = 0
    t_select_ms: int = 0
    t_total_ms: int = 0
    final_status: str = OK
    error: str | None = None
    final_output: str | None = None
    config: dict = field(default_factory=dict)

    @property
    def plan(self) -> list[str]:
        return [s.action for s in self.steps]

    def executed_actions(self) -> list[str]:
        return [s.action for s in self.steps if s.status != SKIPPED]

    def to_record(self) -> dict:
        return {
            "query": self.query,
            "parsed": self.parsed.to_record(),
            "domains": list(self.domains.domains),
            "domain_warnings": list(self.domains.warnings),
            "domain_source": self.domains.source,
            "selected_actions": list(self.selected_actions),
            "plan": self.plan,
            "selection": self.selection.to_record(),
            "steps": [s.to_record() for s in self.steps],
            "t_parse_ms": self.t_parse_ms,
            "t_plan_ms": self.t_plan_ms,
            "t_select_ms": self.t_select_ms,
            "t_total_ms": self.t_total_ms,
            "final_status": self.final_status,
            "error": self.error,
            "final_output": self.final_output,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2, sort_keys=True) + "\n"


def steps_from_plan(plan: Plan) -> list[StepRecord]:
    return [
        StepRecord(
            index=i,
            action=s.name,
            label=s.label,
            produces=s.produces[0] if s.produces else None,
        )
        for i, s in enumerate(plan.steps)
    ]


def execute_plan(
    plan: Plan,
    sel: SelectionResult,
    pq: ParsedQuery,
    graph: CapabilityGraph,
    registry: BackendRegistry,
    clock=None,
    trace: ExecutionTrace | None = None,
    embedder: TextEmbedder | None = None,
) -> ExecutionTrace:
    """Execute ``plan`` in order; failures are recorded, never raised.

    ``trace`` may carry the earlier pipeline stages; its steps are replaced.
    """
    clock = clock or MonotonicClock()
    trace = trace or ExecutionTrace(parsed=pq, selection=sel)
    trace.steps = steps_from_plan(plan)
    embedder = embedder or TrigramEmbedder()

    missing = [s.action for s in trace.steps if s.action not in sel.assignments]
    if missing:
        reasons = {u.action: u.reason for u in sel.unassigned}
        tokens = sorted({reasons.get(a, "Unassigned") for a in missing})
        trace.final_status = ERR
        trace.error = f"{'/'.join(tokens)}: no model for {', '.join(dict.fromkeys(missing))}"
        return trace

    bb = seed_blackboard(pq)
    for step in trace.steps:
        start = clock.now_ms()
        try:
            _run_step(step, sel, pq, graph, registry, bb, embedder)
            step.status = OK
        except (HiveError, ValueError) as e:
            step.status = ERR
            step.error = f"{type(e).__name__}: {e}"
        step.duration_ms = clock.now_ms() - start
        if step.status == ERR:
            trace.final_status = ERR
            trace.error = f"step {step.index + 1} ({step.action}) failed: {step.error}"
            return trace

    if trace.steps:
        trace.final_output = trace.steps[-1].output
    trace.final_status = OK
    return trace


def _run_step(
    step: StepRecord,
    sel: SelectionResult,
    pq: ParsedQuery,
    graph: CapabilityGraph,
    registry: BackendRegistry,
    bb: Blackboard,
    embedder: TextEmbedder,
) -> None:
    chosen = sel.assignments[step.action].model
    step.model = chosen.local_name
    spec = resolve_spec(chosen, task_node(base_action_name(step.action)), graph)
    if spec is None:
        raise BackendError(f"no execution spec for {chosen.local_name} or any same-task model")
    step.borrowed_from = spec.borrowed_from
    step.bound_args = map_arguments(spec, pq, bb, step.index, embedder)
    output = registry.invoke(spec, {k: b.value for k, b in step.bound_args.items()})
    if not isinstance(output, str):
        raise BackendError(f"{spec.model_id} returned {type(output).__name__}, expected text")
    step.output_key = f"step{step.index + 1}.{step.action}"
    kind = PRODUCES_TYPE.get(step.produces or "", SemanticType.OTHER)
    bb.put(step.output_key, kind, output, step.index)
    step.output = output


# --- report ---------------------------------------------------------------------------------


def _clip(text: str, limit: int = 160) -> str:
    text = " ".join(text.split())
    return text if len(text) <= limit else text[: limit - 3] + "..."


def render_report(trace: ExecutionTrace) -> str:
    out: list[str] = []
    out.append(f"query: {trace.query}")
    if trace.config:
        out.append("config:")
        for k in sorted(trace.config):
            out.append(f"  {k} = {json.dumps(trace.config[k], sort_keys=True)}")
    out.append("parsed:" + (" (rule-based fallback)" if trace.parsed.degraded else ""))
    for k, v in trace.parsed.fields().items():
        out.append(f"  {k}: {json.dumps(v, ensure_ascii=False)}")
    out.append(f"domains: {', '.join(trace.domains.domains) or 'none'}")
    for w in trace.domains.warnings:
        out.append(f"  warning: {w}")
    out.append(f"selected actions: {', '.join(trace.selected_actions) or 'none'}")

    out.append(f"plan ({len(trace.steps)} steps):")
    for s in trace.steps:
        out.append(f"  {s.index + 1}. {s.label}")

    out.append("selection:")
    for line in explain_selection(trace.selection).splitlines():
        out.append("  " + line)

    out.append("execution:")
    if not trace.steps:
        out.append("  nothing to execute")
    for s in trace.steps:
        model = s.model or "-"
        if s.borrowed_from:
            model += f" (snippet borrowed from {s.borrowed_from})"
        out.append(f"  step {s.index + 1} {s.action} [{s.status}] model={model} {s.duration_ms} ms")
        for name, b in s.bound_args.items():
            out.append(f"    {name} <- {_clip(b.value, 80)} (tier {b.tier}, {b.source})")
        if s.output_key:
            out.append(f"    -> {s.output_key}: {_clip(s.output or '')}")
        if s.error:
            out.append(f"    error: {s.error}")

    out.append(
        f"timings: t_parse_ms={trace.t_parse_ms} t_plan_ms={trace.t_plan_ms} "
        f"t_select_ms={trace.t_select_ms} t_total_ms={trace.t_total_ms}"
    )
    out.append(f"status: {trace.final_status}")
    if trace.error:
        out.append(f"error: {trace.error}")
    if trace.final_output is not None:
        out.append(f"output: {trace.final_output}")
    return "\n".join(out) + "\n"

