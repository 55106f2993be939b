"""Recursive-descent parser for the :strips/:typing PDDL subset.

An action may carry an artifact annotation as a structured comment on the
line directly above it::

    ;; produces: text
    (:action automatic_speech_recognition ...)
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import PDDLSyntaxError, UnsupportedFeature
from .model import ROOT_TYPE, ActionSchema, Atom, DomainFile, PredicateDecl, ProblemFile

SUPPORTED_REQUIREMENTS = frozenset({":strips", ":typing"})

_PRODUCES_RE = re.compile(r"^\s*;+\s*produces\s*:\s*(.*?)\s*$", re.IGNORECASE)

# section keyword -> feature name reported by UnsupportedFeature
_UNSUPPORTED_SECTIONS = {
    ":durative-action": "durative-actions",
    ":functions": "numeric-fluents",
    ":derived": "derived-predicates",
    ":process": "processes",
    ":event": "events",
    ":constraints": "constraints",
}

_UNSUPPORTED_CONNECTIVES = {
    "not": "negative-preconditions",
    "or": "disjunctive-preconditions",
    "imply": "disjunctive-preconditions",
    "exists": "existential-preconditions",
    "forall": "universal-preconditions",
    "when": "conditional-effects",
    "=": "equality",
    "increase": "numeric-fluents",
    "decrease": "numeric-fluents",
    "assign": "numeric-fluents",
    "scale-up": "numeric-fluents",
    "scale-down": "numeric-fluents",
    "<": "numeric-fluents",
    ">": "numeric-fluents",
    "<=": "numeric-fluents",
    ">=": "numeric-fluents",
    "either": "either-types",
}


@dataclass
class Tok:
    text: str
    line: int
    col: int

    @property
    def lower(self) -> str:
        return self.text.lower()


@dataclass
class SList:
    items: list
    line: int
    col: int


def tokenize(text: str) -> tuple[list[Tok], dict[int, tuple[str, ...]]]:
    """Split into tokens; also collect ``;; produces:`` comments by line number."""
    tokens: list[Tok] = []
    produces: dict[int, tuple[str, ...]] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        col = 0
        n = len(line)
        while col < n:
            ch = line[col]
            if ch.isspace():
                col += 1
            elif ch == ";":
                m = _PRODUCES_RE.match(line[col:])
                if m:
                    tags = tuple(t.strip() for t in m.group(1).split(",") if t.strip())
                    produces[line_no] = tags
                break
            elif ch in "()":
                tokens.append(Tok(ch, line_no, col + 1))
                col += 1
            else:
                start = col
                while col < n and not line[col].isspace() and line[col] not in "();":
                    col += 1
                tokens.append(Tok(line[start:col], line_no, start + 1))
    return tokens, produces


def read_sexpr(tokens: list[Tok]) -> SList:
    """Read exactly one top-level list."""
    if not tokens:
        raise PDDLSyntaxError(1, 1, "'('", "end of input")
    pos = 0

    def read() -> SList | Tok:
        nonlocal pos
        tok = tokens[pos]
        if tok.text == ")":
            raise PDDLSyntaxError(tok.line, tok.col, "expression", ")")
        pos += 1
        if tok.text != "(":
            return tok
        items = []
        while True:
            if pos >= len(tokens):
                last = tokens[-1]
                raise PDDLSyntaxError(last.line, last.col + len(last.text), "')'", "end of input")
            if tokens[pos].text == ")":
                pos += 1
                return SList(items, tok.line, tok.col)
            items.append(read())

    first = tokens[0]
    if first.text != "(":
        raise PDDLSyntaxError(first.line, first.col, "'('", first.text)
    expr = read()
    if pos < len(tokens):
        extra = tokens[pos]
        raise PDDLSyntaxError(extra.line, extra.col, "end of input", extra.text)
    return expr


def _pos(x) -> tuple[int, int]:
    return x.line, x.col


def _expect_list(x, what: str) -> SList:
    if not isinstance(x, SList):
        raise PDDLSyntaxError(*_pos(x), what, x.text)
    return x


def _expect_name(x, what: str) -> str:
    if not isinstance(x, Tok) or x.text.startswith((":", "?")):
        found = x.text if isinstance(x, Tok) else "("
        raise PDDLSyntaxError(*_pos(x), what, found)
    return x.text


def _expect_keyword(x, keyword: str) -> None:
    if not isinstance(x, Tok) or x.lower != keyword:
        found = x.text if isinstance(x, Tok) else "("
        raise PDDLSyntaxError(*_pos(x), repr(keyword), found)


def _head(lst: SList) -> str | None:
    if lst.items and isinstance(lst.items[0], Tok):
        return lst.items[0].lower
    return None


def parse_typed_list(items: list, variables: bool, ctx: str) -> tuple[tuple[str, str], ...]:
    out: list[tuple[str, str]] = []
    pending: list[str] = []
    i = 0
    while i < len(items):
        it = items[i]
        if isinstance(it, SList):
            if _head(it) == "either":
                raise UnsupportedFeature("either-types")
            raise PDDLSyntaxError(it.line, it.col, f"name in {ctx}", "(")
        if it.text == "-":
            if not pending or i + 1 >= len(items):
                raise PDDLSyntaxError(it.line, it.col, f"names before and type after '-' in {ctx}", "-")
            nxt = items[i + 1]
            if isinstance(nxt, SList):
                if _head(nxt) == "either":
                    raise UnsupportedFeature("either-types")
                raise PDDLSyntaxError(nxt.line, nxt.col, "type name", "(")
            out.extend((n, nxt.text) for n in pending)
            pending = []
            i += 2
            continue
        if variables != it.text.startswith("?"):
            expected = "variable" if variables else "name"
            raise PDDLSyntaxError(it.line, it.col, f"{expected} in {ctx}", it.text)
        pending.append(it.text)
        i += 1
    out.extend((n, ROOT_TYPE) for n in pending)
    return tuple(out)


def parse_atom(x, ctx: str) -> Atom:
    lst = _expect_list(x, f"atom in {ctx}")
    if not lst.items:
        raise PDDLSyntaxError(lst.line, lst.col, f"predicate name in {ctx}", ")")
    head = lst.items[0]
    if isinstance(head, SList):
        raise PDDLSyntaxError(head.line, head.col, "predicate name", "(")
    if head.lower in _UNSUPPORTED_CONNECTIVES:
        raise UnsupportedFeature(_UNSUPPORTED_CONNECTIVES[head.lower])
    if head.text.startswith((":", "?")):
        raise PDDLSyntaxError(head.line, head.col, "predicate name", head.text)
    args = []
    for a in lst.items[1:]:
        if isinstance(a, SList):
            raise PDDLSyntaxError(a.line, a.col, "term", "(")
        args.append(a.text)
    return Atom(head.text, tuple(args))


def parse_conjunction(x, ctx: str) -> tuple[Atom, ...]:
    """Positive conjunction: ``()``, a single atom, or ``(and atom...)``."""
    lst = _expect_list(x, ctx)
    if not lst.items:
        return ()
    if _head(lst) == "and":
        return tuple(parse_atom(a, ctx) for a in lst.items[1:])
    return (parse_atom(lst, ctx),)


def parse_effect(x, ctx: str) -> tuple[tuple[Atom, ...], tuple[Atom, ...]]:
    lst = _expect_list(x, ctx)
    if not lst.items:
        return (), ()
    parts = lst.items[1:] if _head(lst) == "and" else [lst]
    adds: list[Atom] = []
    dels: list[Atom] = []
    for part in parts:
        p = _expect_list(part, f"literal in {ctx}")
        if _head(p) == "not":
            if len(p.items) != 2:
                raise PDDLSyntaxError(p.line, p.col, "(not <atom>)", "malformed negation")
            dels.append(parse_atom(p.items[1], ctx))
        else:
            adds.append(parse_atom(p, ctx))
    return tuple(adds), tuple(dels)


def _parse_action(lst: SList, produces: dict[int, tuple[str, ...]]) -> ActionSchema:
    if len(lst.items) < 2:
        raise PDDLSyntaxError(lst.line, lst.col, "action name", ")")
    name = _expect_name(lst.items[1], "action name")
    params: tuple = ()
    pre: tuple = ()
    adds: tuple = ()
    dels: tuple = ()
    items = lst.items[2:]
    i = 0
    while i < len(items):
        key = items[i]
        if not isinstance(key, Tok) or not key.text.startswith(":"):
            raise PDDLSyntaxError(*_pos(key), "action keyword", key.text if isinstance(key, Tok) else "(")
        if i + 1 >= len(items):
            raise PDDLSyntaxError(key.line, key.col, f"value after {key.text}", ")")
        val = items[i + 1]
        k = key.lower
        if k == ":parameters":
            params = parse_typed_list(_expect_list(val, "parameter list").items, True, "parameters")
        elif k == ":precondition":
            pre = parse_conjunction(val, f"precondition of {name}")
        elif k == ":effect":
            adds, dels = parse_effect(val, f"effect of {name}")
        elif k in (":duration", ":condition"):
            raise UnsupportedFeature("durative-actions")
        else:
            raise PDDLSyntaxError(key.line, key.col, ":parameters, :precondition or :effect", key.text)
        i += 2
    return ActionSchema(
        name=name,
        params=params,
        precondition=pre,
        add_effects=adds,
        del_effects=dels,
        produces=produces.get(lst.line - 1, ()),
    )


def _parse_header(expr: SList, kind: str) -> tuple[str, list]:
    items = expr.items
    if not items:
        raise PDDLSyntaxError(expr.line, expr.col, "'define'", ")")
    _expect_keyword(items[0], "define")
    if len(items) < 2:
        raise PDDLSyntaxError(expr.line, expr.col, f"({kind} <name>)", ")")
    hdr = _expect_list(items[1], f"({kind} <name>)")
    if len(hdr.items) != 2:
        raise PDDLSyntaxError(hdr.line, hdr.col, f"({kind} <name>)", "malformed header")
    _expect_keyword(hdr.items[0], kind)
    return _expect_name(hdr.items[1], f"{kind} name"), items[2:]


def parse_domain(text: str) -> DomainFile:
    tokens, produces = tokenize(text)
    expr = read_sexpr(tokens)
    name, sections = _parse_header(expr, "domain")
    requirements: set[str] = set()
    types: tuple = ()
    constants: tuple = ()
    predicates: list[PredicateDecl] = []
    actions: list[ActionSchema] = []
    for sec in sections:
        sec = _expect_list(sec, "domain section")
        head = _head(sec)
        if head in _UNSUPPORTED_SECTIONS:
            raise UnsupportedFeature(_UNSUPPORTED_SECTIONS[head])
        if head == ":requirements":
            for r in sec.items[1:]:
                if isinstance(r, SList) or not r.text.startswith(":"):
                    raise PDDLSyntaxError(*_pos(r), "requirement flag", getattr(r, "text", "("))
                if r.lower not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedFeature(r.lower[1:])
                requirements.add(r.lower)
        elif head == ":types":
            types = parse_typed_list(sec.items[1:], False, "types")
        elif head == ":constants":
            constants = parse_typed_list(sec.items[1:], False, "constants")
        elif head == ":predicates":
            for p in sec.items[1:]:
                p = _expect_list(p, "predicate declaration")
                if not p.items:
                    raise PDDLSyntaxError(p.line, p.col, "predicate name", ")")
                pname = _expect_name(p.items[0], "predicate name")
                predicates.append(PredicateDecl(pname, parse_typed_list(p.items[1:], True, pname)))
        elif head == ":action":
            actions.append(_parse_action(sec, produces))
        else:
            found = sec.items[0].text if sec.items and isinstance(sec.items[0], Tok) else "("
            raise PDDLSyntaxError(sec.line, sec.col, "domain section", found)
    return DomainFile(
        name=name,
        requirements=frozenset(requirements),
        types=types,
        constants=constants,
        predicates=tuple(predicates),
        actions=tuple(actions),
    )


def parse_problem(text: str) -> ProblemFile:
    tokens, _ = tokenize(text)
    expr = read_sexpr(tokens)
    name, sections = _parse_header(expr, "problem")
    domain_name = ""
    objects: tuple = ()
    init: list[Atom] = []
    goal: tuple[Atom, ...] = ()
    for sec in sections:
        sec = _expect_list(sec, "problem section")
        head = _head(sec)
        if head == ":domain":
            if len(sec.items) != 2:
                raise PDDLSyntaxError(sec.line, sec.col, "(:domain <name>)", "malformed")
            domain_name = _expect_name(sec.items[1], "domain name")
        elif head == ":objects":
            objects = parse_typed_list(sec.items[1:], False, "objects")
        elif head == ":init":
            init = [parse_atom(a, "init") for a in sec.items[1:]]
        elif head == ":goal":
            if len(sec.items) != 2:
                raise PDDLSyntaxError(sec.line, sec.col, "(:goal <formula>)", "malformed")
            goal = parse_conjunction(sec.items[1], "goal")
        elif head == ":metric":
            raise UnsupportedFeature("numeric-fluents")
        else:
            found = sec.items[0].text if sec.items and isinstance(sec.items[0], Tok) else "("
            raise PDDLSyntaxError(sec.line, sec.col, "problem section", found)
    return ProblemFile(name, domain_name, objects, frozenset(init), goal)
