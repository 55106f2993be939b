"""Pick one model per planned action under user constraints.

Selection is filter-then-rank: the license whitelist removes candidates,
then a single ranking rule orders the survivors, with the model's local
name as the final tie-breaker. A model that lacks the attribute a
constraint needs is excluded rather than assumed compliant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ckg import CapabilityGraph, Direction, ModelRecord, NodeId, direction_for_metric, slug, task

RULE_DEFAULT = "most_results"
RULE_SMALLEST = "smallest_size"
RULE_BENCHMARK = "best_benchmark"

UNKNOWN_TASK = "UnknownTask"
NO_COMPLIANT_MODEL = "NoCompliantModel"


@dataclass(frozen=True)
class BenchmarkConstraint:
    """Rank by a reported result. With ``task`` set, only that task's actions
    are ranked this way; the others fall back to the default rule."""

    name: str
    metric: str
    task: str | None = None

    def applies_to(self, task_name: str) -> bool:
        return self.task is None or self.task == task_name


@dataclass(frozen=True)
class ConstraintSet:
    licenses: frozenset[str] | None = None
    minimize_size: bool = False
    benchmark: BenchmarkConstraint | None = None

    def __post_init__(self):
        if self.minimize_size and self.benchmark is not None:
            raise ValueError("choose either size minimisation or a benchmark ranking, not both")
        if self.licenses is not None:
            object.__setattr__(self, "licenses", frozenset(self.licenses))

    @property
    def ranking_rule(self) -> str:
        if self.minimize_size:
            return RULE_SMALLEST
        if self.benchmark is not None:
            return RULE_BENCHMARK
        return RULE_DEFAULT

    def rule_for(self, task_name: str) -> str:
        rule = self.ranking_rule
        if rule == RULE_BENCHMARK and not self.benchmark.applies_to(task_name):
            return RULE_DEFAULT
        return rule

    def to_record(self) -> dict:
        return {
            "licenses": sorted(self.licenses) if self.licenses is not None else None,
            "minimize_size": self.minimize_size,
            "benchmark": (
                {"name": self.benchmark.name, "metric": self.benchmark.metric, "task": self.benchmark.task}
                if self.benchmark is not None
                else None
            ),
        }


@dataclass(frozen=True)
class RationaleRecord:
    candidates_considered: int
    filters_applied: tuple[str, ...]
    ranking_rule: str
    winning_value: float | int | str

    def to_record(self) -> dict:
        return {
            "candidates_considered": self.candidates_considered,
            "filters_applied": list(self.filters_applied),
            "ranking_rule": self.ranking_rule,
            "winning_value": self.winning_value,
        }


@dataclass(frozen=True)
class Assignment:
    model: NodeId
    rationale: RationaleRecord


@dataclass(frozen=True)
class Unassigned:
    action: str
    reason: str
    detail: str = ""


@dataclass
class SelectionResult:
    assignments: dict[str, Assignment] = field(default_factory=dict)
    unassigned: list[Unassigned] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.unassigned

    def to_record(self) -> dict:
        return {
            "assignments": {
                a: {"model": str(x.model), "rationale": x.rationale.to_record()}
                for a, x in self.assignments.items()
            },
            "unassigned": [
                {"action": u.action, "reason": u.reason, "detail": u.detail} for u in self.unassigned
            ],
        }


def _benchmark_value(rec: ModelRecord, bc: BenchmarkConstraint) -> tuple[float, Direction] | None:
    """Best value this model reports on the constrained benchmark and metric."""
    want_bench, want_metric = slug(bc.name), slug(bc.metric)
    hits = [
        r
        for r in rec.results
        if slug(r.benchmark.local_name) == want_bench and slug(r.metric.local_name) == want_metric
    ]
    if not hits:
        return None
    directions = {r.direction for r in hits}
    direction = directions.pop() if len(directions) == 1 else direction_for_metric(bc.metric)
    values = [r.value for r in hits]
    best = min(values) if direction is Direction.LOWER_BETTER else max(values)
    return best, direction


def _select_one(
    action: str, task_name: str, candidates: list[ModelRecord], c: ConstraintSet
) -> Assignment | Unassigned:
    considered = len(candidates)
    filters: list[str] = []
    pool = list(candidates)

    if c.licenses is not None:
        allowed = {x.lower() for x in c.licenses}
        pool = [m for m in pool if m.license is not None and m.license.lower() in allowed]
        filters.append("license in " + ",".join(sorted(c.licenses)))

    rule = c.rule_for(task_name)
    ranked: list[tuple[tuple, ModelRecord, float | int | str]] = []
    if rule == RULE_SMALLEST:
        filters.append("size known")
        for m in pool:
            if m.size_bytes is not None:
                ranked.append(((m.size_bytes, m.model.local_name), m, m.size_bytes))
    elif rule == RULE_BENCHMARK:
        bc = c.benchmark
        filters.append(f"reports {bc.metric} on {bc.name}")
        for m in pool:
            found = _benchmark_value(m, bc)
            if found is None:
                continue
            value, direction = found
            key = value if direction is Direction.LOWER_BETTER else -value
            ranked.append(((key, m.model.local_name), m, value))
    else:
        for m in pool:
            ranked.append(((-len(m.results), m.model.local_name), m, len(m.results)))

    if not ranked:
        detail = f"{considered} candidate(s), none left after: {'; '.join(filters) or 'no filters'}"
        return Unassigned(action, NO_COMPLIANT_MODEL, detail)
    ranked.sort(key=lambda x: x[0])
    _, winner, value = ranked[0]
    return Assignment(winner.model, RationaleRecord(considered, tuple(filters), rule, value))


def select_models(
    plan_tasks: list[tuple[str, str]],
    graph: CapabilityGraph,
    c: ConstraintSet | None = None,
) -> SelectionResult:
    """Assign a model to every ``(action, task)`` pair, or record why not."""
    c = c or ConstraintSet()
    known_tasks = set(graph.tasks())
    result = SelectionResult()
    for action, task_name in plan_tasks:
        if action in result.assignments or any(u.action == action for u in result.unassigned):
            continue
        node = task(task_name)
        if node not in known_tasks:
            result.unassigned.append(Unassigned(action, UNKNOWN_TASK, f"task {task_name!r} not in graph"))
            continue
        outcome = _select_one(action, task_name, graph.models_for_task(node), c)
        if isinstance(outcome, Unassigned):
            result.unassigned.append(outcome)
        else:
            result.assignments[action] = outcome
    return result


def _fmt_value(v) -> str:
    if isinstance(v, float):
        return f"{v:g}"
    return str(v)


def explain_selection(r: SelectionResult) -> str:
    if not r.assignments and not r.unassigned:
        return "no actions\n"
    lines: list[str] = []
    for action, a in r.assignments.items():
        rat = a.rationale
        lines.append(f"action {action}")
        lines.append(f"  candidates: {rat.candidates_considered}")
        lines.append(f"  filters: {'; '.join(rat.filters_applied) or 'none'}")
        lines.append(f"  rule: {rat.ranking_rule}")
        lines.append(f"  selected: {a.model.local_name} ({_fmt_value(rat.winning_value)})")
    for u in r.unassigned:
        lines.append(f"action {u.action}")
        lines.append(f"  unassigned: {u.reason}" + (f" ({u.detail})" if u.detail else ""))
    return "\n".join(lines) + "\n"
