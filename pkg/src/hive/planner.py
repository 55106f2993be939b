"""Best-First Width Search over grounded tasks, plus a breadth-first oracle.

Nodes are ranked by (novelty, unsatisfied goals, path cost) with FIFO
tie-breaking. Novelty is the size of the smallest tuple of true atoms not
seen in any previously generated state; nodes whose novelty exceeds
``max_width`` are discarded.

Width-bounded pruning is incomplete: a state can be new while all of its
atom pairs are old. When the pruned search exhausts its open list and
``complete_fallback`` is on, a second pass runs the same ranking without
pruning, which makes the search complete on finite state spaces.
"""

from __future__ import annotations

import heapq
import itertools
import logging
from collections import deque
from dataclasses import dataclass, field

from .errors import BudgetExceeded, NoPlanFound, ScaleGuard
from .pddl.grounding import GroundAction, GroundedTask

log = logging.getLogger(__name__)

ORACLE_MAX_ACTIONS = 2000


@dataclass(frozen=True)
class SearchConfig:
    max_width: int = 2
    max_expansions: int = 1_000_000
    tie_break: str = "fifo"
    complete_fallback: bool = True

    def __post_init__(self):
        if self.max_width not in (1, 2):
            raise ValueError("max_width must be 1 or 2")
        if self.tie_break != "fifo":
            raise ValueError("only FIFO tie-breaking is supported")
        if self.max_expansions < 1:
            raise ValueError("max_expansions must be positive")


@dataclass(frozen=True)
class Plan:
    steps: tuple[GroundAction, ...] = ()

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def action_names(self) -> list[str]:
        return [s.name for s in self.steps]

    def __iter__(self):
        return iter(self.steps)

    def __len__(self) -> int:
        return len(self.steps)


@dataclass
class NoveltyTable:
    singles: set[int] = field(default_factory=set)
    pairs: set[tuple[int, int]] = field(default_factory=set)


def _true_atoms(state: int) -> list[int]:
    out = []
    i = 0
    while state:
        if state & 1:
            out.append(i)
        state >>= 1
        i += 1
    return out


def novelty(state: int, seen: NoveltyTable, max_width: int) -> int:
    """Smallest k <= max_width with an unseen k-tuple in ``state``, else max_width+1.

    Records every tuple of size <= max_width from ``state`` in ``seen``.
    """
    atoms = _true_atoms(state)
    result = max_width + 1
    new_singles = [a for a in atoms if a not in seen.singles]
    if new_singles:
        result = 1
        seen.singles.update(new_singles)
    if max_width >= 2:
        new_pairs = [p for p in itertools.combinations(atoms, 2) if p not in seen.pairs]
        if new_pairs:
            result = min(result, 2)
            seen.pairs.update(new_pairs)
    return result


def _goal_count(task: GroundedTask, state: int) -> int:
    return bin(task.goal & ~state).count("1")


def _extract(parents: dict[int, tuple[int, int] | None], state: int, task: GroundedTask) -> Plan:
    steps = []
    while parents[state] is not None:
        prev, idx = parents[state]
        steps.append(task.actions[idx])
        state = prev
    return Plan(tuple(reversed(steps)))


def _search(task: GroundedTask, cfg: SearchConfig, prune: bool, budget: list[int]) -> Plan | None:
    seen = NoveltyTable()
    counter = itertools.count()
    parents: dict[int, tuple[int, int] | None] = {task.init: None}
    root_nov = novelty(task.init, seen, cfg.max_width)
    open_list = [((root_nov, _goal_count(task, task.init), 0, next(counter)), task.init)]
    while open_list:
        (_, _, cost, _), state = heapq.heappop(open_list)
        budget[0] += 1
        if budget[0] > cfg.max_expansions:
            raise BudgetExceeded(f"more than {cfg.max_expansions} expansions")
        for idx, action in enumerate(task.actions):
            if not action.applicable(state):
                continue
            child = action.apply(state)
            if child in parents:
                continue
            nov = novelty(child, seen, cfg.max_width)
            if prune and nov > cfg.max_width:
                continue
            parents[child] = (state, idx)
            if task.goal_reached(child):
                return _extract(parents, child, task)
            key = (nov, _goal_count(task, child), cost + 1, next(counter))
            heapq.heappush(open_list, (key, child))
    return None


def bfws_plan(task: GroundedTask, cfg: SearchConfig | None = None) -> Plan:
    cfg = cfg or SearchConfig()
    if task.goal_reached(task.init):
        return Plan()
    budget = [0]
    plan = _search(task, cfg, prune=True, budget=budget)
    if plan is None and cfg.complete_fallback:
        log.debug("width-%d search exhausted; retrying without novelty pruning", cfg.max_width)
        plan = _search(task, cfg, prune=False, budget=budget)
    if plan is None:
        raise NoPlanFound("search space exhausted without reaching the goal")
    return plan


def validate_plan(task: GroundedTask, plan: Plan) -> bool:
    state = task.init
    try:
        for step in plan.steps:
            if not step.applicable(state):
                return False
            state = step.apply(state)
    except (AttributeError, TypeError):
        return False
    return task.goal_reached(state)


def bfs_oracle(task: GroundedTask) -> Plan:
    """Shortest plan by breadth-first search; for tests on small tasks."""
    if len(task.actions) > ORACLE_MAX_ACTIONS:
        raise ScaleGuard(f"oracle limited to {ORACLE_MAX_ACTIONS} ground actions")
    parents: dict[int, tuple[int, int] | None] = {task.init: None}
    if task.goal_reached(task.init):
        return Plan()
    queue = deque([task.init])
    while queue:
        state = queue.popleft()
        for idx, action in enumerate(task.actions):
            if not action.applicable(state):
                continue
            child = action.apply(state)
            if child in parents:
                continue
            parents[child] = (state, idx)
            if task.goal_reached(child):
                return _extract(parents, child, task)
            queue.append(child)
    raise NoPlanFound("goal unreachable")
