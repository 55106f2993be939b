"""End-to-end orchestration: query -> plan -> model selection -> execution."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .backends import BackendRegistry
from .ckg import CapabilityGraph, load_graph_files
from .config import Config
from .errors import EmptySelection, HiveError
from .evalbench import ERR, BenchRecord, RunOutcome, string_match_judge
from .execution import (
    ERR as STEP_ERR,
    ExecutionTrace,
    LogicalClock,
    MonotonicClock,
    execute_plan,
    steps_from_plan,
)
from .nlu import classify_domains, parse_query, select_actions
from .pddl import DomainFile, base_action_name, ground, load_domain_dir, merge_domains, synthesize_problem
from .planner import Plan, SearchConfig, bfws_plan
from .providers import FixtureProvider, GenerationParams, HttpProvider, TextCompletion
from .selection import ConstraintSet, select_models

log = logging.getLogger(__name__)

# stages, in order; a failure is attributed to the stage that raised
STAGE_PARSE = "parse"
STAGE_DOMAINS = "domains"
STAGE_ACTIONS = "actions"
STAGE_PLAN = "plan"
STAGE_SELECT = "select"


@dataclass
class PlanOutcome:
    trace: ExecutionTrace
    plan: Plan | None = None
    error: HiveError | None = None
    failed_stage: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.trace.selection.complete


def make_provider(cfg: Config) -> TextCompletion:
    if cfg.offline:
        return FixtureProvider(cfg.path("provider.fixtures"))
    return HttpProvider(cfg["provider.url"], cfg["provider.token"], cfg["provider.timeout"])


class Engine:
    def __init__(
        self,
        cfg: Config,
        provider: TextCompletion,
        graph: CapabilityGraph,
        domains: dict[str, DomainFile],
        registry: BackendRegistry | None = None,
    ):
        self.cfg = cfg
        self.provider = provider
        self.graph = graph
        self.domains = domains
        self.registry = registry or BackendRegistry()
        self.params = GenerationParams(0.0, cfg["provider.max_tokens"])
        self.search = SearchConfig(
            max_width=cfg["planner.max_width"], max_expansions=cfg["planner.max_expansions"]
        )

    @classmethod
    def from_config(cls, cfg: Config, with_registry: bool = True) -> "Engine":
        graph = load_graph_files(cfg.path("ckg.path"))
        domains = load_domain_dir(cfg.path("domains.path"))
        if not domains:
            raise HiveError(f"no domain files under {cfg.path('domains.path')}")
        registry = BackendRegistry.load(cfg.path("registry.path")) if with_registry else None
        return cls(cfg, make_provider(cfg), graph, domains, registry)

    def new_clock(self):
        return LogicalClock() if self.cfg.offline else MonotonicClock()

    # --- planning --------------------------------------------------------------

    def plan(self, query: str, constraints: ConstraintSet | None = None, clock=None) -> PlanOutcome:
        clock = clock or self.new_clock()
        constraints = constraints or ConstraintSet()
        fallback = self.cfg["provider.fallback"]
        trace = ExecutionTrace(query=query, config=self.cfg.to_record())
        trace.config["constraints"] = constraints.to_record()
        out = PlanOutcome(trace)
        t0 = clock.now_ms()
        stage = STAGE_PARSE
        try:
            pq = parse_query(query, self.provider, self.params, fallback)
            trace.parsed = pq
            t1 = clock.now_ms()
            trace.t_parse_ms = t1 - t0
            instruction = pq.instruction or query

            stage = STAGE_DOMAINS
            registered = sorted(self.domains)
            subset = classify_domains(instruction, registered, self.provider, self.params, fallback)
            trace.domains = subset

            stage = STAGE_ACTIONS
            plan = Plan()
            if subset.domains:
                merged = merge_domains([self.domains[d] for d in subset.domains])
                selected = select_actions(
                    instruction, merged.action_names, self.provider, self.params, fallback
                )
                trace.selected_actions = tuple(selected)

                stage = STAGE_PLAN
                problem = synthesize_problem(pq, selected, merged)
                task = ground(
                    merged.restrict(selected), problem, max_actions=self.cfg["ground.max_actions"]
                )
                plan = bfws_plan(task, self.search)
            out.plan = plan
            trace.steps = steps_from_plan(plan)
            t2 = clock.now_ms()
            trace.t_plan_ms = t2 - t1

            stage = STAGE_SELECT
            pairs = list(dict.fromkeys((s.name, base_action_name(s.name)) for s in plan.steps))
            trace.selection = select_models(pairs, self.graph, constraints)
            trace.t_select_ms = clock.now_ms() - t0
        except HiveError as e:
            out.error = e
            out.failed_stage = stage
            trace.final_status = STEP_ERR
            trace.error = f"{type(e).__name__}: {e}"
            trace.t_total_ms = clock.now_ms() - t0
            return out
        if not trace.selection.complete:
            trace.final_status = STEP_ERR
            tokens = sorted({u.reason for u in trace.selection.unassigned})
            trace.error = f"{'/'.join(tokens)}: no compliant model for " + ", ".join(
                u.action for u in trace.selection.unassigned
            )
        # run() overwrites this once execution is done
        trace.t_total_ms = clock.now_ms() - t0
        return out

    # --- execution ------------------------------------------------------------------

    def run(self, query: str, constraints: ConstraintSet | None = None) -> PlanOutcome:
        clock = self.new_clock()
        t0 = clock.now_ms()
        out = self.plan(query, constraints, clock)
        if out.error is None and out.trace.selection.complete:
            execute_plan(
                out.plan,
                out.trace.selection,
                out.trace.parsed,
                self.graph,
                self.registry,
                clock,
                trace=out.trace,
            )
        out.trace.t_total_ms = clock.now_ms() - t0
        return out

    def run_record(self, record: BenchRecord) -> RunOutcome:
        """Run one benchmark query and reduce the trace to a scored outcome."""
        out = self.run(record.query)
        trace = out.trace
        if out.failed_stage in (STAGE_PARSE, STAGE_DOMAINS, STAGE_ACTIONS):
            if isinstance(out.error, EmptySelection):
                # selection ran and picked nothing usable: a wrong task set, not a crash
                return RunOutcome(record.id, (), (), 0, None)
            return RunOutcome(record.id, ERR, ERR, ERR, None)
        selected = tuple(base_action_name(a) for a in trace.selected_actions)
        if out.failed_stage == STAGE_PLAN:
            return RunOutcome(record.id, selected, ERR, ERR, None)
        order = tuple(base_action_name(a) for a in trace.plan)
        if trace.final_status == STEP_ERR:
            return RunOutcome(record.id, selected, order, ERR, trace.t_select_ms)
        if record.output_contains is not None:
            verdict = string_match_judge(record, trace.final_output)
        else:
            verdict = record.output_verdict
        return RunOutcome(record.id, selected, order, verdict, trace.t_select_ms)

