"""Random grounded tasks and domains shared by the unit tests and the acceptance suite."""

from __future__ import annotations

import random

from hypothesis import strategies as st

from hive.pddl import (
    ActionSchema,
    Atom,
    DomainFile,
    GroundAction,
    GroundedTask,
    PredicateDecl,
    validate_domain,
)


def _subset(rng: random.Random, n: int, p: float) -> int:
    bits = 0
    for i in range(n):
        if rng.random() < p:
            bits |= 1 << i
    return bits


def random_task(seed: int, max_atoms: int = 12, max_actions: int = 10) -> GroundedTask:
    """A task with at most ``max_atoms`` atoms and ``max_actions`` ground actions."""
    rng = random.Random(seed)
    n = rng.randint(2, max_atoms)
    m = rng.randint(1, max_actions)
    actions = []
    for k in range(m):
        pre = _subset(rng, n, 0.25)
        add = _subset(rng, n, 0.25) or 1 << rng.randrange(n)
        dele = _subset(rng, n, 0.2) & ~add
        actions.append(GroundAction(f"a{k}", (), pre, add, dele))
    init = _subset(rng, n, 0.3)
    goal = _subset(rng, n, 0.3) or 1 << rng.randrange(n)
    atoms = tuple(Atom(f"p{i}") for i in range(n))
    return GroundedTask(atoms, init, goal, tuple(actions))


_ident = st.from_regex(r"[a-z][a-z0-9_]{0,6}", fullmatch=True).filter(
    lambda s: s not in {"and", "not", "or", "either", "object", "define", "when", "imply",
                        "exists", "forall", "increase", "decrease", "assign"}
)


@st.composite
def random_domains(draw):
    """Valid domains in the supported subset, with arbitrary structure."""
    type_names = draw(st.lists(_ident, max_size=4, unique=True))
    types = []
    for i, t in enumerate(type_names):
        parent = draw(st.sampled_from(["object"] + type_names[:i]))
        types.append((t, parent))
    all_types = ["object"] + type_names
    taken = set(type_names)
    const_names = draw(st.lists(_ident.filter(lambda s: s not in taken), max_size=3, unique=True))
    constants = tuple((c, draw(st.sampled_from(all_types))) for c in const_names)
    taken |= set(const_names)
    pred_names = draw(st.lists(_ident.filter(lambda s: s not in taken), min_size=1, max_size=4, unique=True))
    preds = []
    for p in pred_names:
        arity = draw(st.integers(0, 2))
        preds.append(PredicateDecl(p, tuple((f"?v{i}", draw(st.sampled_from(all_types))) for i in range(arity))))
    action_names = draw(st.lists(_ident.filter(lambda s: s not in taken), max_size=4, unique=True))
    actions = []
    for name in action_names:
        params = tuple(
            (f"?p{i}", draw(st.sampled_from(all_types))) for i in range(draw(st.integers(0, 2)))
        )
        terms = [v for v, _ in params] + const_names

        usable = [p for p in preds if p.arity == 0 or terms]

        def atoms(most):
            if not usable:
                return ()
            out = []
            for _ in range(draw(st.integers(0, most))):
                decl = draw(st.sampled_from(usable))
                out.append(Atom(decl.name, tuple(draw(st.sampled_from(terms)) for _ in range(decl.arity))))
            return tuple(dict.fromkeys(out))

        pre = atoms(3)
        add = atoms(3)
        dele = tuple(x for x in atoms(2) if x not in add)
        produces = tuple(draw(st.lists(_ident, max_size=2, unique=True)))
        actions.append(ActionSchema(name, params, pre, add, dele, produces))
    reqs = frozenset(draw(st.sets(st.sampled_from([":strips", ":typing"]))))
    d = DomainFile(draw(_ident), reqs, tuple(types), constants, tuple(preds), tuple(actions))
    validate_domain(d)
    return d
