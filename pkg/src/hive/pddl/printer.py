"""Canonical PDDL text output (2-space indent, lowercase keywords)."""

from __future__ import annotations

from .model import ActionSchema, Atom, DomainFile, ProblemFile


def format_typed_list(pairs) -> str:
    """``a b - t1 c - t2``; consecutive entries sharing a type are grouped."""
    chunks: list[str] = []
    group: list[str] = []
    current = None
    for name, typ in pairs:
        if group and typ != current:
            chunks.append(f"{' '.join(group)} - {current}")
            group = []
        group.append(name)
        current = typ
    if group:
        chunks.append(f"{' '.join(group)} - {current}")
    return " ".join(chunks)


def _conj(atoms: tuple[Atom, ...]) -> str:
    if not atoms:
        return "()"
    return "(and " + " ".join(str(a) for a in atoms) + ")"


def _effect(a: ActionSchema) -> str:
    parts = [str(x) for x in a.add_effects] + [f"(not {x})" for x in a.del_effects]
    if not parts:
        return "()"
    return "(and " + " ".join(parts) + ")"


def print_action(a: ActionSchema, indent: str = "  ") -> str:
    lines = []
    if a.produces:
        lines.append(f"{indent};; produces: {','.join(a.produces)}")
    lines.append(f"{indent}(:action {a.name}")
    lines.append(f"{indent}  :parameters ({format_typed_list(a.params)})")
    lines.append(f"{indent}  :precondition {_conj(a.precondition)}")
    lines.append(f"{indent}  :effect {_effect(a)})")
    return "\n".join(lines)


def print_domain(d: DomainFile) -> str:
    out = [f"(define (domain {d.name})"]
    out.append("  (:requirements" + "".join(" " + r for r in sorted(d.requirements)) + ")")
    if d.types:
        out.append(f"  (:types {format_typed_list(d.types)})")
    if d.constants:
        out.append(f"  (:constants {format_typed_list(d.constants)})")
    if d.predicates:
        out.append("  (:predicates")
        for p in d.predicates:
            params = format_typed_list(p.params)
            out.append(f"    ({p.name}{' ' + params if params else ''})")
        out[-1] += ")"
    for a in d.actions:
        out.append(print_action(a))
    out[-1] += ")"
    return "\n".join(out) + "\n"


def print_problem(p: ProblemFile) -> str:
    out = [f"(define (problem {p.name})", f"  (:domain {p.domain_name})"]
    out.append(f"  (:objects {format_typed_list(p.objects)})" if p.objects else "  (:objects)")
    out.append("  (:init" + "".join(" " + str(a) for a in sorted(p.init)) + ")")
    out.append(f"  (:goal {_conj(p.goal)}))")
    return "\n".join(out) + "\n"
