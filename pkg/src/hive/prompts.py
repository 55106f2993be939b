"""Shipped prompt templates and placeholder substitution.

Templates contain literal braces (JSON examples), so placeholders are
replaced by plain string substitution rather than ``str.format``.
"""

from __future__ import annotations

from importlib import resources

USAGE_EXTRACTION = "usage_extraction"
PARSING = "parsing"
DOMAIN_CLASSIFICATION = "domain_classification"
ACTION_SELECTION = "action_selection"

PLACEHOLDERS = {
    USAGE_EXTRACTION: ("code",),
    PARSING: ("USER_INPUT",),
    DOMAIN_CLASSIFICATION: ("domains", "query"),
    ACTION_SELECTION: ("user_instruction", "actions"),
}


def template_text(name: str) -> str:
    if name not in PLACEHOLDERS:
        raise KeyError(f"unknown prompt template {name!r}")
    return resources.files("hive").joinpath("data", "prompts", f"{name}.txt").read_text(encoding="utf-8")


def render(name: str, **values: str) -> str:
    expected = set(PLACEHOLDERS.get(name, ()))
    if set(values) != expected:
        raise KeyError(f"template {name!r} takes {sorted(expected)}, got {sorted(values)}")
    text = template_text(name)
    for key, value in values.items():
        text = text.replace("{" + key + "}", value)
    return text
