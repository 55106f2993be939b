"""Build the planning problem for a parsed query and a set of selected actions.

Conventions shared with the shipped domain files: every input artifact is an
object of type ``artifact``; its modality is asserted with
``(available <modality> <object>)`` where the modality is a domain constant;
the goal is the conjunction of the selected actions' ``done_<name>`` markers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from ..errors import NoInputArtifact, UnknownAction
from .grounding import ground, relaxed_reachable
from .merge import done_predicate
from .model import Atom, DomainFile, ProblemFile

if TYPE_CHECKING:
    from ..nlu import ParsedQuery

ARTIFACT_TYPE = "artifact"
AVAILABLE = "available"

EXTENSION_MODALITY = {
    ".wav": "audio",
    ".mp3": "audio",
    ".flac": "audio",
    ".ogg": "audio",
    ".m4a": "audio",
    ".jpg": "image",
    ".jpeg": "image",
    ".png": "image",
    ".gif": "image",
    ".bmp": "image",
    ".webp": "image",
}


def modality_of_url(url: str) -> str:
    path = url.lower().split("?", 1)[0].split("#", 1)[0].rstrip("/")
    for ext, modality in EXTENSION_MODALITY.items():
        if path.endswith(ext):
            return modality
    return "document"


@dataclass(frozen=True)
class InputArtifact:
    name: str  # PDDL object name
    modality: str
    field: str  # which ParsedQuery field it came from


def input_artifacts(pq: "ParsedQuery") -> list[InputArtifact]:
    """One artifact per detected query input, in field order url, text, table.

    A query with no inputs at all contributes its instruction as a text
    artifact, so purely generative requests remain plannable.
    """
    found: list[tuple[str, str]] = []
    if pq.url:
        found.append((modality_of_url(pq.url), "url"))
    if pq.input_text:
        found.append(("text", "input_text"))
    if pq.data_dict:
        found.append(("table", "data_dict"))
    if not found and pq.instruction:
        found.append(("text", "instruction"))
    return [InputArtifact(f"a{i}", m, f) for i, (m, f) in enumerate(found)]


def synthesize_problem(
    pq: "ParsedQuery",
    selected: list[str],
    merged: DomainFile,
    name: str = "query",
    check_reachability: bool = True,
) -> ProblemFile:
    known = set(merged.action_names)
    for a in selected:
        if a not in known:
            raise UnknownAction(a)
    modalities = {c for c, t in merged.constants}
    objects = []
    init = []
    for art in input_artifacts(pq):
        if art.modality not in modalities:
            continue
        objects.append((art.name, ARTIFACT_TYPE))
        init.append(Atom(AVAILABLE, (art.modality, art.name)))
    goal = tuple(Atom(done_predicate(a)) for a in dict.fromkeys(selected))
    problem = ProblemFile(name, merged.name, tuple(objects), frozenset(init), goal)

    if check_reachability and goal:
        task = ground(merged.restrict(selected), problem)
        reach = relaxed_reachable(task.init, task.actions)
        missing = [a for a in task.atoms_of(task.goal & ~reach)]
        if missing:
            blocked = ", ".join(m.predicate[len("done_"):] for m in missing)
            present = sorted({a.args[0] for a in init}) or ["none"]
            raise NoInputArtifact(
                f"no input modality lets these actions run: {blocked} "
                f"(query provides: {', '.join(present)})"
            )
    return problem
