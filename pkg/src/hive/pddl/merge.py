"""Union of several domains into one, plus ``done_<action>`` goal markers."""

from __future__ import annotations

from dataclasses import replace

from ..errors import PredicateConflict, TypeConflict
from .model import ActionSchema, Atom, DomainFile, PredicateDecl

MERGED_NAME = "merged"
RENAME_SEP = "__"
DONE_PREFIX = "done_"


def done_predicate(action_name: str) -> str:
    return DONE_PREFIX + action_name


def base_action_name(name: str) -> str:
    """Strip a ``<domain>__`` collision prefix, if any."""
    return name.rsplit(RENAME_SEP, 1)[-1]


def _union_typed(pairs_lists, what: str) -> tuple[tuple[str, str], ...]:
    seen: dict[str, str] = {}
    for pairs in pairs_lists:
        for name, typ in pairs:
            if name in seen and seen[name] != typ:
                raise TypeConflict(f"{what} {name!r} declared as both {seen[name]} and {typ}")
            seen.setdefault(name, typ)
    return tuple(seen.items())


def with_done_markers(d: DomainFile) -> DomainFile:
    """Give every action a 0-ary ``done_<name>`` add-effect (idempotent)."""
    preds = list(d.predicates)
    names = {p.name for p in preds}
    actions = []
    for a in d.actions:
        marker = Atom(done_predicate(a.name))
        if done_predicate(a.name) not in names:
            preds.append(PredicateDecl(marker.predicate))
            names.add(marker.predicate)
        if marker not in a.add_effects:
            a = replace(a, add_effects=a.add_effects + (marker,))
        actions.append(a)
    return replace(d, predicates=tuple(preds), actions=tuple(actions))


def merge_domains(ds: list[DomainFile], done_markers: bool = True) -> DomainFile:
    """Merge domains: set-union of declarations, union of actions.

    Identical action schemas deduplicate. Two different schemas sharing a
    name are both kept, renamed ``<domain>__<action>``.
    """
    if not ds:
        raise ValueError("merge_domains needs at least one domain")
    requirements = frozenset().union(*(d.requirements for d in ds))
    types = _union_typed([d.types for d in ds], "type")
    constants = _union_typed([d.constants for d in ds], "constant")

    preds: dict[str, PredicateDecl] = {}
    for d in ds:
        for p in d.predicates:
            prev = preds.get(p.name)
            if prev is None:
                preds[p.name] = p
            elif tuple(t for _, t in prev.params) != tuple(t for _, t in p.params):
                raise PredicateConflict(
                    f"predicate {p.name!r} has incompatible declarations in merged domains"
                )

    # name -> list of (origin domain, schema) with exact duplicates dropped
    groups: dict[str, list[tuple[str, ActionSchema]]] = {}
    for d in ds:
        for a in d.actions:
            bucket = groups.setdefault(a.name, [])
            if not any(existing == a for _, existing in bucket):
                bucket.append((d.name, a))

    actions: list[ActionSchema] = []
    for name, bucket in groups.items():
        if len(bucket) == 1:
            actions.append(bucket[0][1])
            continue
        for origin, a in bucket:
            actions.append(replace(a, name=f"{origin}{RENAME_SEP}{name}"))

    merged = DomainFile(
        name=MERGED_NAME,
        requirements=requirements,
        types=types,
        constants=constants,
        predicates=tuple(preds.values()),
        actions=tuple(actions),
    )
    return with_done_markers(merged) if done_markers else merged
