"""Data model for the supported PDDL subset (:strips + :typing)."""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..errors import PDDLValidationError

ROOT_TYPE = "object"

TypedList = tuple[tuple[str, str], ...]  # ((name, type), ...)


@dataclass(frozen=True, order=True)
class Atom:
    predicate: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return f"({self.predicate})"
        return f"({self.predicate} {' '.join(self.args)})"


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    params: TypedList = ()

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: TypedList = ()
    precondition: tuple[Atom, ...] = ()
    add_effects: tuple[Atom, ...] = ()
    del_effects: tuple[Atom, ...] = ()
    produces: tuple[str, ...] = ()

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.params)

    def signature(self) -> tuple:
        return (self.params, self.precondition, self.add_effects, self.del_effects)


@dataclass(frozen=True)
class DomainFile:
    name: str
    requirements: frozenset[str] = frozenset()
    types: TypedList = ()
    constants: TypedList = ()
    predicates: tuple[PredicateDecl, ...] = ()
    actions: tuple[ActionSchema, ...] = ()

    def action(self, name: str) -> ActionSchema:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)

    @property
    def action_names(self) -> list[str]:
        return [a.name for a in self.actions]

    def predicate(self, name: str) -> PredicateDecl | None:
        for p in self.predicates:
            if p.name == name:
                return p
        return None

    def restrict(self, names) -> "DomainFile":
        """Copy keeping only the named actions (in stored order)."""
        keep = set(names)
        return replace(self, actions=tuple(a for a in self.actions if a.name in keep))

    def type_parents(self) -> dict[str, str]:
        return {t: p for t, p in self.types}


@dataclass(frozen=True)
class ProblemFile:
    name: str
    domain_name: str
    objects: TypedList = ()
    init: frozenset[Atom] = frozenset()
    goal: tuple[Atom, ...] = ()


def is_subtype(t: str, ancestor: str, parents: dict[str, str]) -> bool:
    if ancestor == ROOT_TYPE:
        return True
    seen = set()
    while t not in seen:
        if t == ancestor:
            return True
        seen.add(t)
        if t not in parents:
            return False
        t = parents[t]
    return False


def validate_domain(d: DomainFile) -> None:
    """Check the structural invariants of a domain; raise PDDLValidationError."""
    names = [a.name for a in d.actions]
    if len(names) != len(set(names)):
        raise PDDLValidationError(f"duplicate action names in domain {d.name}")
    declared_types = {ROOT_TYPE} | {t for t, _ in d.types} | {p for _, p in d.types}
    preds = {p.name: p for p in d.predicates}
    constants = dict(d.constants)
    for _, ct in d.constants:
        if ct not in declared_types:
            raise PDDLValidationError(f"constant of undeclared type {ct}")
    for a in d.actions:
        variables = dict(a.params)
        for _, vt in a.params:
            if vt not in declared_types:
                raise PDDLValidationError(f"{a.name}: parameter of undeclared type {vt}")
        for atom in a.precondition + a.add_effects + a.del_effects:
            decl = preds.get(atom.predicate)
            if decl is None:
                raise PDDLValidationError(f"{a.name}: undeclared predicate {atom.predicate}")
            if decl.arity != len(atom.args):
                raise PDDLValidationError(
                    f"{a.name}: {atom.predicate} takes {decl.arity} arguments, got {len(atom.args)}"
                )
            for arg in atom.args:
                if arg.startswith("?"):
                    if arg not in variables:
                        raise PDDLValidationError(f"{a.name}: free variable {arg}")
                elif arg not in constants:
                    raise PDDLValidationError(f"{a.name}: unknown constant {arg}")
        if set(a.add_effects) & set(a.del_effects):
            raise PDDLValidationError(f"{a.name}: atom both added and deleted")


def validate_problem(d: DomainFile, p: ProblemFile) -> None:
    parents = d.type_parents()
    declared_types = {ROOT_TYPE} | set(parents) | set(parents.values())
    typed = dict(d.constants)
    for name, t in p.objects:
        if t not in declared_types:
            raise PDDLValidationError(f"object {name} has undeclared type {t}")
        typed[name] = t
    preds = {pr.name: pr for pr in d.predicates}
    for atom in list(p.init) + list(p.goal):
        decl = preds.get(atom.predicate)
        if decl is None:
            raise PDDLValidationError(f"undeclared predicate {atom.predicate}")
        if decl.arity != len(atom.args):
            raise PDDLValidationError(f"{atom} has wrong arity (expected {decl.arity})")
        for arg, (_, want) in zip(atom.args, decl.params):
            if arg not in typed:
                raise PDDLValidationError(f"{atom}: unknown object {arg}")
            if not is_subtype(typed[arg], want, parents):
                raise PDDLValidationError(f"{atom}: {arg} is not a {want}")
