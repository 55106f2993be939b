from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hive.ckg import (
    CapabilityGraph,
    Direction,
    EdgeKind,
    Kind,
    NodeId,
    Triple,
    model,
    result_triples,
    task,
)
from hive.selection import (
    NO_COMPLIANT_MODEL,
    RULE_BENCHMARK,
    RULE_DEFAULT,
    RULE_SMALLEST,
    UNKNOWN_TASK,
    BenchmarkConstraint,
    ConstraintSet,
    explain_selection,
    select_models,
)

ASR = "automatic_speech_recognition"
NER = "named_entity_recognition"
WHISPER = "openai/whisper-large-v2"
PARAKEET = "nvidia/parakeet-rnnt-1.1b"
CV_WER = BenchmarkConstraint("speech recognition on common voice english", "wer")


def _winner(r, action):
    return r.assignments[action].model.local_name


# --- shipped-graph scenarios ---------------------------------------------------------


def test_license_constraint_returns_nothing(bundled_graph):
    c = ConstraintSet(licenses=frozenset({"openrail++", "deepseek"}))
    r = select_models([(ASR, ASR), (NER, NER)], bundled_graph, c)
    assert r.assignments == {}
    assert [(u.action, u.reason) for u in r.unassigned] == [
        (ASR, NO_COMPLIANT_MODEL),
        (NER, NO_COMPLIANT_MODEL),
    ]


def test_smallest_picks_parakeet(bundled_graph):
    r = select_models([(ASR, ASR)], bundled_graph, ConstraintSet(minimize_size=True))
    assert _winner(r, ASR) == PARAKEET
    assert r.assignments[ASR].rationale.winning_value == 4_400_000_000


def test_benchmark_picks_lower_wer(bundled_graph):
    r = select_models([(ASR, ASR)], bundled_graph, ConstraintSet(benchmark=CV_WER))
    assert _winner(r, ASR) == PARAKEET
    assert r.assignments[ASR].rationale.winning_value == 6.0
    assert r.assignments[ASR].rationale.ranking_rule == RULE_BENCHMARK


def test_default_rule_picks_most_results(bundled_graph):
    r = select_models([(ASR, ASR)], bundled_graph)
    assert _winner(r, ASR) == WHISPER
    assert r.assignments[ASR].rationale.winning_value == 2


def test_benchmark_is_strict_across_tasks(bundled_graph):
    r = select_models([(ASR, ASR), (NER, NER)], bundled_graph, ConstraintSet(benchmark=CV_WER))
    assert _winner(r, ASR) == PARAKEET
    assert [u.action for u in r.unassigned] == [NER]


def test_benchmark_scoped_to_task(bundled_graph):
    scoped = BenchmarkConstraint(CV_WER.name, CV_WER.metric, task=ASR)
    r = select_models([(ASR, ASR), (NER, NER)], bundled_graph, ConstraintSet(benchmark=scoped))
    assert r.complete
    assert _winner(r, ASR) == PARAKEET
    assert _winner(r, NER) == "dslim/bert-base-NER"
    assert r.assignments[NER].rationale.ranking_rule == RULE_DEFAULT


def test_unknown_task(bundled_graph):
    r = select_models([("juggle", "juggling")], bundled_graph)
    assert r.unassigned[0].reason == UNKNOWN_TASK


def test_duplicate_actions_selected_once(bundled_graph):
    r = select_models([(ASR, ASR), (ASR, ASR)], bundled_graph)
    assert list(r.assignments) == [ASR] and r.complete


def test_renamed_action_uses_base_task(bundled_graph):
    r = select_models([("audio__" + ASR, ASR)], bundled_graph)
    assert _winner(r, "audio__" + ASR) == WHISPER


def test_constraint_set_exclusive():
    with pytest.raises(ValueError):
        ConstraintSet(minimize_size=True, benchmark=CV_WER)
    assert ConstraintSet().ranking_rule == RULE_DEFAULT
    assert ConstraintSet(minimize_size=True).ranking_rule == RULE_SMALLEST


def test_license_match_is_case_insensitive(bundled_graph):
    r = select_models([(ASR, ASR)], bundled_graph, ConstraintSet(licenses={"cc-by-4.0"}))
    assert _winner(r, ASR) == PARAKEET


# --- explain_selection ---------------------------------------------------------------


def test_explain_empty():
    assert explain_selection(select_models([], CapabilityGraph())) == "no actions\n"


def test_explain_assignment(bundled_graph):
    text = explain_selection(select_models([(ASR, ASR)], bundled_graph, ConstraintSet(minimize_size=True)))
    assert PARAKEET in text
    assert "rule: smallest_size" in text
    assert "candidates: 2" in text


def test_explain_blocked(bundled_graph):
    c = ConstraintSet(licenses={"openrail++", "deepseek"})
    text = explain_selection(select_models([(ASR, ASR)], bundled_graph, c))
    assert "NoCompliantModel" in text


def test_explain_is_deterministic(bundled_graph):
    c = ConstraintSet(benchmark=CV_WER)
    a = select_models([(ASR, ASR)], bundled_graph, c)
    b = select_models([(ASR, ASR)], bundled_graph, c)
    assert a == b and explain_selection(a) == explain_selection(b)


# --- properties over synthetic graphs ------------------------------------------------------

LICENSES = ["MIT", "Apache-2.0", "CC-By-4.0", "openrail++", None]

_model_spec = st.tuples(
    st.sampled_from(LICENSES),
    st.one_of(st.none(), st.integers(1, 10**10)),
    st.one_of(st.none(), st.floats(0.5, 100, allow_nan=False)),
)


def _graph(specs, scale_size=1, scale_value=1.0):
    triples = []
    for i, (lic, size, value) in enumerate(specs):
        m = model(f"org/m{i:02d}")
        triples.append(Triple(m, EdgeKind.SUPPORTS_TASK, task("t")))
        if lic is not None:
            triples.append(Triple(m, EdgeKind.HAS_LICENSE, NodeId(Kind.LICENSE, lic)))
        if size is not None:
            triples.append(Triple(m, EdgeKind.HAS_SIZE_BYTES, size * scale_size))
        if value is not None:
            triples += result_triples(m, f"r{i}", "bench", "wer", value * scale_value)
    return CapabilityGraph(triples)


_constraints = st.builds(
    ConstraintSet,
    licenses=st.one_of(st.none(), st.frozensets(st.sampled_from(LICENSES[:4]), max_size=3)),
    minimize_size=st.booleans(),
)


@settings(max_examples=200)
@given(st.lists(_model_spec, min_size=1, max_size=6), _constraints, st.booleans())
def test_license_compliance(specs, c, by_bench):
    if by_bench and not c.minimize_size:
        c = ConstraintSet(licenses=c.licenses, benchmark=BenchmarkConstraint("bench", "wer"))
    g = _graph(specs)
    r = select_models([("a", "t")], g, c)
    assert len(r.assignments) + len(r.unassigned) == 1
    if r.assignments and c.licenses is not None:
        rec = g.model_record(r.assignments["a"].model)
        assert rec.license is not None
        assert rec.license.lower() in {x.lower() for x in c.licenses}


@settings(max_examples=200)
@given(st.lists(_model_spec, min_size=1, max_size=6), st.integers(2, 1000))
def test_size_rescaling_invariance(specs, k):
    c = ConstraintSet(minimize_size=True)
    a = select_models([("a", "t")], _graph(specs), c)
    b = select_models([("a", "t")], _graph(specs, scale_size=k), c)
    assert {x: y.model for x, y in a.assignments.items()} == {x: y.model for x, y in b.assignments.items()}


@settings(max_examples=200)
@given(st.lists(_model_spec, min_size=1, max_size=6), st.sampled_from([0.25, 0.5, 2.0, 4.0]))
def test_benchmark_rescaling_invariance(specs, k):
    # powers of two keep float ordering exact
    c = ConstraintSet(benchmark=BenchmarkConstraint("bench", "wer"))
    a = select_models([("a", "t")], _graph(specs), c)
    b = select_models([("a", "t")], _graph(specs, scale_value=k), c)
    assert {x: y.model for x, y in a.assignments.items()} == {x: y.model for x, y in b.assignments.items()}


@settings(max_examples=200)
@given(st.lists(_model_spec, min_size=1, max_size=6))
def test_lower_better_winner_is_minimal(specs):
    g = _graph(specs)
    r = select_models([("a", "t")], g, ConstraintSet(benchmark=BenchmarkConstraint("bench", "wer")))
    values = [v for _, _, v in specs if v is not None]
    if not values:
        assert r.unassigned[0].reason == NO_COMPLIANT_MODEL
        return
    won = g.results_for(r.assignments["a"].model)[0]
    assert won.direction is Direction.LOWER_BETTER
    assert won.value == min(values)


@settings(max_examples=100)
@given(st.lists(_model_spec, min_size=1, max_size=6), _constraints)
def test_selection_deterministic(specs, c):
    assert select_models([("a", "t")], _graph(specs), c) == select_models([("a", "t")], _graph(specs), c)


def test_higher_better_direction():
    triples = [Triple(model(f"m{i}"), EdgeKind.SUPPORTS_TASK, task("t")) for i in range(2)]
    triples += result_triples(model("m0"), "r0", "squad", "f1", 80.0)
    triples += result_triples(model("m1"), "r1", "squad", "f1", 90.0)
    r = select_models([("a", "t")], CapabilityGraph(triples), ConstraintSet(benchmark=BenchmarkConstraint("squad", "f1")))
    assert _winner(r, "a") == "m1"


def test_tie_breaks_on_local_name():
    triples = []
    for name in ("zeta", "alpha"):
        triples.append(Triple(model(name), EdgeKind.SUPPORTS_TASK, task("t")))
        triples.append(Triple(model(name), EdgeKind.HAS_SIZE_BYTES, 10))
    r = select_models([("a", "t")], CapabilityGraph(triples), ConstraintSet(minimize_size=True))
    assert _winner(r, "a") == "alpha"
