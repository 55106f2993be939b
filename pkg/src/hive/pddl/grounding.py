"""Instantiate action schemas over typed objects into a propositional task.

States and atom sets are Python ints used as bitsets over the atom universe.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from ..errors import GroundingExplosion
from .model import Atom, DomainFile, ProblemFile, is_subtype, validate_problem

DEFAULT_MAX_ACTIONS = 100_000


@dataclass(frozen=True)
class GroundAction:
    name: str
    args: tuple[str, ...]
    pre: int
    add: int
    dele: int
    produces: tuple[str, ...] = ()

    @property
    def label(self) -> str:
        return f"{self.name}({', '.join(self.args)})"

    def applicable(self, state: int) -> bool:
        return state & self.pre == self.pre

    def apply(self, state: int) -> int:
        return (state & ~self.dele) | self.add


@dataclass(frozen=True)
class GroundedTask:
    atoms: tuple[Atom, ...]
    init: int
    goal: int
    actions: tuple[GroundAction, ...]

    def atoms_of(self, bits: int) -> list[Atom]:
        return [a for i, a in enumerate(self.atoms) if bits >> i & 1]

    def index(self, atom: Atom) -> int:
        return self.atoms.index(atom)

    def bits(self, atoms) -> int:
        out = 0
        for a in atoms:
            out |= 1 << self.index(a)
        return out

    def goal_reached(self, state: int) -> bool:
        return state & self.goal == self.goal


def relaxed_reachable(init: int, actions) -> int:
    """Fixpoint of atoms reachable when delete effects are ignored."""
    reach = init
    changed = True
    while changed:
        changed = False
        for a in actions:
            if reach & a.pre == a.pre and reach | a.add != reach:
                reach |= a.add
                changed = True
    return reach


def _substitute(atom: Atom, binding: dict[str, str]) -> Atom:
    return Atom(atom.predicate, tuple(binding.get(x, x) for x in atom.args))


def ground(
    domain: DomainFile,
    problem: ProblemFile,
    max_actions: int = DEFAULT_MAX_ACTIONS,
    prune_unreachable: bool = True,
) -> GroundedTask:
    validate_problem(domain, problem)
    parents = domain.type_parents()
    typed = dict(domain.constants)
    typed.update(dict(problem.objects))
    names = sorted(typed)

    candidates: list[tuple] = []
    total = 0
    for schema in domain.actions:
        per_param = [[o for o in names if is_subtype(typed[o], t, parents)] for _, t in schema.params]
        count = math.prod(len(c) for c in per_param)
        total += count
        if total > max_actions:
            raise GroundingExplosion(
                f"grounding exceeds {max_actions} actions (at schema {schema.name})"
            )
        candidates.append((schema, per_param))

    lifted: list[tuple[str, tuple[str, ...], list[Atom], list[Atom], list[Atom], tuple]] = []
    for schema, per_param in candidates:
        for combo in itertools.product(*per_param):
            binding = dict(zip(schema.variables, combo))
            lifted.append(
                (
                    schema.name,
                    tuple(combo),
                    [_substitute(a, binding) for a in schema.precondition],
                    [_substitute(a, binding) for a in schema.add_effects],
                    [_substitute(a, binding) for a in schema.del_effects],
                    schema.produces,
                )
            )

    if prune_unreachable:
        reach = set(problem.init)
        changed = True
        while changed:
            changed = False
            for _, _, pre, add, _, _ in lifted:
                if all(p in reach for p in pre):
                    for a in add:
                        if a not in reach:
                            reach.add(a)
                            changed = True
        lifted = [g for g in lifted if all(p in reach for p in g[2])]

    universe = set(problem.init) | set(problem.goal)
    for _, _, pre, add, dele, _ in lifted:
        universe.update(pre, add, dele)
    atoms = tuple(sorted(universe))
    index = {a: i for i, a in enumerate(atoms)}

    def bits(xs) -> int:
        out = 0
        for x in xs:
            out |= 1 << index[x]
        return out

    actions = sorted(
        (GroundAction(name, args, bits(pre), bits(add), bits(dele), produces)
         for name, args, pre, add, dele, produces in lifted),
        key=lambda g: (g.name, g.args),
    )
    return GroundedTask(atoms, bits(problem.init), bits(problem.goal), tuple(actions))
