"""PDDL subset: data model, parser, printer, merging, problem synthesis, grounding."""

from __future__ import annotations

from pathlib import Path

from .grounding import DEFAULT_MAX_ACTIONS, GroundAction, GroundedTask, ground, relaxed_reachable
from .merge import base_action_name, done_predicate, merge_domains, with_done_markers
from .model import (
    ActionSchema,
    Atom,
    DomainFile,
    PredicateDecl,
    ProblemFile,
    validate_domain,
    validate_problem,
)
from .parser import parse_domain, parse_problem
from .printer import print_domain, print_problem
from .problem import input_artifacts, modality_of_url, synthesize_problem


def load_domain_dir(path: str | Path) -> dict[str, DomainFile]:
    """Parse every ``*.pddl`` file in a directory, keyed by domain name."""
    out: dict[str, DomainFile] = {}
    for f in sorted(Path(path).glob("*.pddl")):
        d = parse_domain(f.read_text(encoding="utf-8"))
        validate_domain(d)
        out[d.name] = d
    return out


__all__ = [
    "ActionSchema",
    "Atom",
    "DEFAULT_MAX_ACTIONS",
    "DomainFile",
    "GroundAction",
    "GroundedTask",
    "PredicateDecl",
    "ProblemFile",
    "base_action_name",
    "done_predicate",
    "ground",
    "input_artifacts",
    "load_domain_dir",
    "merge_domains",
    "modality_of_url",
    "parse_domain",
    "parse_problem",
    "print_domain",
    "print_problem",
    "relaxed_reachable",
    "synthesize_problem",
    "validate_domain",
    "validate_problem",
    "with_done_markers",
]
