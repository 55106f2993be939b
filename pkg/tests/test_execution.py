from __future__ import annotations

import json

import pytest

from hive.backends import BackendRegistry
from hive.config import DATA_DIR
from hive.ckg import CapabilityGraph, EdgeKind, Kind, NodeId, Triple, model, task
from hive.errors import UnboundParameter
from hive.evalbench import load_bench
from hive.execution import (
    ERR,
    OK,
    QUERY_STEP,
    SKIPPED,
    Blackboard,
    ExecutionTrace,
    LogicalClock,
    execute_plan,
    map_arguments,
    render_report,
    resolve_spec,
    seed_blackboard,
)
from hive.nlu import ParsedQuery
from hive.pddl import GroundAction
from hive.planner import Plan
from hive.selection import ConstraintSet, select_models
from hive.snippets import ExecutionSpec, Param, SemanticType as S

ASR = "automatic_speech_recognition"
NER = "named_entity_recognition"


def _spec(model_id, *params):
    return ExecutionSpec(model_id, tuple(params), "def run(): ...")


# --- map_arguments --------------------------------------------------------------------


def test_audio_from_url():
    spec = _spec("m", Param("audio_file", S.AUDIO_PATH))
    out = map_arguments(spec, ParsedQuery(url="./a.wav"), Blackboard())
    assert out["audio_file"].value == "./a.wav"
    assert out["audio_file"].tier == 2


def test_image_not_bound_from_audio_url():
    spec = _spec("m", Param("image", S.IMAGE_PATH, "default.png"))
    out = map_arguments(spec, ParsedQuery(url="./a.wav"), Blackboard())
    assert out["image"].value == "default.png" and out["image"].tier == 4


def test_transcript_beats_input_text():
    bb = seed_blackboard(ParsedQuery(input_text="from the query"))
    bb.put("step1.automatic_speech_recognition", S.TEXT, "the transcript", 0)
    spec = _spec("m", Param("text", S.TEXT))
    out = map_arguments(spec, ParsedQuery(input_text="from the query"), bb, step=1)
    assert out["text"].value == "the transcript"
    assert out["text"].source == "step1.automatic_speech_recognition"


def test_most_recent_producer_wins():
    bb = Blackboard()
    bb.put("step1.a", S.TEXT, "first", 0)
    bb.put("step2.b", S.TEXT, "second", 1)
    spec = _spec("m", Param("text", S.TEXT))
    assert map_arguments(spec, ParsedQuery(), bb, step=2)["text"].value == "second"
    # a step cannot read its own or later outputs
    assert map_arguments(spec, ParsedQuery(), bb, step=1)["text"].value == "first"


def test_exact_name_tier():
    spec = _spec("m", Param("question", S.OTHER))
    out = map_arguments(spec, ParsedQuery(question="Why?"), Blackboard())
    assert (out["question"].value, out["question"].tier) == ("Why?", 1)


def test_similarity_tier():
    spec = _spec("m", Param("input_texts", S.OTHER))
    out = map_arguments(spec, ParsedQuery(input_text="hello"), Blackboard())
    assert (out["input_texts"].value, out["input_texts"].tier) == ("hello", 3)


def test_default_tier():
    spec = _spec("m", Param("temperature", S.OTHER, "0.7"))
    out = map_arguments(spec, ParsedQuery(), Blackboard())
    assert (out["temperature"].value, out["temperature"].tier) == ("0.7", 4)


def test_model_path_uses_default():
    spec = _spec("m", Param("model_path", S.MODEL_PATH, "org/m"))
    out = map_arguments(spec, ParsedQuery(instruction="model path please"), Blackboard())
    assert out["model_path"].value == "org/m"


def test_unbound_parameter():
    spec = _spec("m", Param("zzz", S.OTHER))
    with pytest.raises(UnboundParameter) as e:
        map_arguments(spec, ParsedQuery(), Blackboard())
    assert e.value.name == "zzz"


def test_text_falls_back_to_question_then_instruction():
    spec = _spec("m", Param("prompt", S.TEXT))
    assert map_arguments(spec, ParsedQuery(instruction="i", question="q?"), Blackboard())["prompt"].value == "q?"
    assert map_arguments(spec, ParsedQuery(instruction="i"), Blackboard())["prompt"].value == "i"


def test_seed_blackboard_fields():
    pq = ParsedQuery("i", "t", "q?", "./x.png", {"b": "2", "a": "1"}, ("x",))
    bb = seed_blackboard(pq)
    assert {a.key: a.semantic_type for a in bb} == {
        "instruction": S.OTHER, "input_text": S.TEXT, "question": S.QUESTION,
        "url": S.IMAGE_PATH, "data_dict": S.TABLE, "categories": S.CATEGORIES,
    }
    assert all(a.producer_step == QUERY_STEP for a in bb)
    assert bb.get("data_dict").value == '{"a": "1", "b": "2"}'
    with pytest.raises(KeyError):
        bb.put("url", S.OTHER, "x", 0)


# --- fallback spec ---------------------------------------------------------------------


def test_fallback_spec_borrowed(bundled_graph):
    parakeet = model("nvidia/parakeet-rnnt-1.1b")
    assert bundled_graph.spec_for(parakeet) is None
    spec = resolve_spec(parakeet, task(ASR), bundled_graph)
    assert spec.borrowed_from == "openai/whisper-large-v2"
    assert spec.model_id == "nvidia/parakeet-rnnt-1.1b"
    mp = [p for p in spec.params if p.semantic_type is S.MODEL_PATH]
    assert [p.default for p in mp] == ["nvidia/parakeet-rnnt-1.1b"]


def test_no_spec_anywhere():
    g = CapabilityGraph([Triple(model("a"), EdgeKind.SUPPORTS_TASK, task("t"))])
    assert resolve_spec(model("a"), task("t"), g) is None


# --- execute_plan ------------------------------------------------------------------------


def _toy():
    """Two-step toy world: 'echo' then 'shout', each with its own stub."""
    specs = {
        "e#usage": _spec("e", Param("text", S.TEXT)),
        "f#usage": _spec("f", Param("text", S.TEXT)),
    }
    triples = [
        Triple(model("e"), EdgeKind.SUPPORTS_TASK, task("echo")),
        Triple(model("e"), EdgeKind.HAS_SNIPPET, NodeId(Kind.SNIPPET, "e#usage")),
        Triple(model("f"), EdgeKind.SUPPORTS_TASK, task("shout")),
        Triple(model("f"), EdgeKind.HAS_SNIPPET, NodeId(Kind.SNIPPET, "f#usage")),
    ]
    plan = Plan((
        GroundAction("echo", ("a0",), 0, 0, 0, ("text",)),
        GroundAction("shout", ("a0",), 0, 0, 0, ("text",)),
    ))
    return CapabilityGraph(triples, specs), plan


def test_execute_chains_outputs():
    g, plan = _toy()
    reg = BackendRegistry.from_mapping({"e": {"backend": "stub", "stub": "echo"},
                                        "f": {"backend": "stub", "stub": "echo"}})
    sel = select_models([("echo", "echo"), ("shout", "shout")], g)
    trace = execute_plan(plan, sel, ParsedQuery(input_text="hi there"), g, reg, LogicalClock())
    assert trace.final_status == OK
    assert [s.status for s in trace.steps] == [OK, OK]
    assert trace.steps[1].bound_args["text"].source == "step1.echo"
    assert trace.final_output == "hi there"
    assert all(s.duration_ms == 1 for s in trace.steps)


def test_step_failure_skips_rest():
    g, plan = _toy()
    reg = BackendRegistry.from_mapping({"e": {"backend": "stub", "stub": "fail"},
                                        "f": {"backend": "stub", "stub": "echo"}})
    sel = select_models([("echo", "echo"), ("shout", "shout")], g)
    trace = execute_plan(plan, sel, ParsedQuery(input_text="x"), g, reg, LogicalClock())
    assert trace.final_status == ERR
    assert [s.status for s in trace.steps] == [ERR, SKIPPED]
    assert "step 1 (echo) failed" in trace.error
    assert trace.executed_actions() == ["echo"]


def test_unassigned_aborts_before_running():
    g, plan = _toy()
    sel = select_models([("echo", "echo"), ("shout", "shout")], g, ConstraintSet(licenses={"MIT"}))
    trace = execute_plan(plan, sel, ParsedQuery(input_text="x"), g, BackendRegistry(), LogicalClock())
    assert trace.final_status == ERR
    assert trace.error.startswith("NoCompliantModel")
    assert all(s.status == SKIPPED for s in trace.steps)


def test_missing_backend_is_step_error():
    g, plan = _toy()
    sel = select_models([("echo", "echo"), ("shout", "shout")], g)
    trace = execute_plan(plan, sel, ParsedQuery(input_text="x"), g, BackendRegistry(), LogicalClock())
    assert trace.steps[0].status == ERR and "no backend registered" in trace.steps[0].error


# --- pipeline runs over the shipped fixtures ----------------------------------------------


def test_asr_ner_chaining(engine):
    out = engine.run("Transcribe the audio from ./audio_1.wav and find entity tokens")
    t = out.trace
    assert t.final_status == OK
    assert t.plan == [ASR, NER]
    assert t.steps[1].bound_args["text"].source == "step1." + ASR
    entities = json.loads(t.final_output)
    assert "United States" in entities["LOC"]
    assert "United States of America" in entities["LOC"]


def test_fallback_spec_in_run(engine):
    out = engine.run("Transcribe the audio from ./audio_1.wav and find entity tokens",
                     ConstraintSet(minimize_size=True))
    step = out.trace.steps[0]
    assert step.model == "nvidia/parakeet-rnnt-1.1b"
    assert step.borrowed_from == "openai/whisper-large-v2"
    assert out.trace.final_status == OK


SAMPLE = load_bench((DATA_DIR / "bench" / "sample.jsonl").read_text(encoding="utf-8").splitlines())


@pytest.mark.parametrize("rec", SAMPLE, ids=lambda r: r.id)
def test_sample_queries(engine, rec):
    out = engine.run(rec.query)
    assert out.trace.final_status == OK, out.trace.error
    assert [a.rsplit("__", 1)[-1] for a in out.trace.plan] == list(rec.expected_tasks)
    if rec.output_contains:
        assert rec.output_contains in out.trace.final_output


def test_report_and_trace_deterministic(engine):
    q = "Transcribe the audio from ./audio_1.wav and find entity tokens"
    a, b = engine.run(q).trace, engine.run(q).trace
    assert a.to_json() == b.to_json()
    report = render_report(a)
    assert report == render_report(b)
    for needle in ("plan (2 steps):", "selection:", "execution:", "t_select_ms=", "status: Ok"):
        assert needle in report


def test_trace_record_round_trips_json():
    t = ExecutionTrace(query="q")
    assert json.loads(t.to_json())["query"] == "q"
