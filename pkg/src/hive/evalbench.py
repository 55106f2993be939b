"""Benchmark harness: per-record TS/FoT/O scores and the summary tables.

``ERR`` marks a run that crashed before producing the scored quantity. It
is never treated as 0: means exclude it from their denominators unless
``err_as_zero`` is set, and the trustworthiness/failure tables count it
separately.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from fractions import Fraction
from typing import IO, Iterable, Sequence, Union

from .errors import MissingVerdict, SchemaError


class _Err:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Err"

    def __reduce__(self):
        return (_Err, ())


ERR = _Err()
Score = Union[int, _Err]


def is_err(x) -> bool:
    return x is ERR


class Split(str, Enum):
    SINGLE = "Single"
    TWO = "Two"
    THREE = "Three"

    @property
    def size(self) -> int:
        return {"Single": 1, "Two": 2, "Three": 3}[self.value]


MODALITIES = frozenset({"text", "image", "audio"})


@dataclass(frozen=True)
class BenchRecord:
    id: str
    query: str
    expected_tasks: tuple[str, ...]
    split: Split
    modality_in: frozenset[str] = frozenset()
    modality_out: frozenset[str] = frozenset()
    output_verdict: int | None = None
    output_contains: str | None = None  # evidence for the string-match judge

    def __post_init__(self):
        if len(self.expected_tasks) != self.split.size:
            raise SchemaError(
                f"record {self.id}: split {self.split.value} needs {self.split.size} tasks, "
                f"got {len(self.expected_tasks)}"
            )
        bad = (self.modality_in | self.modality_out) - MODALITIES
        if bad:
            raise SchemaError(f"record {self.id}: unknown modalities {sorted(bad)}")
        if self.output_verdict not in (None, 0, 1):
            raise SchemaError(f"record {self.id}: output_verdict must be 0 or 1")


@dataclass(frozen=True)
class RunOutcome:
    record_id: str
    selected_tasks: tuple[str, ...] | _Err
    plan_order: tuple[str, ...] | _Err
    output_ok: Score | None = None
    t_select_ms: int | None = None


@dataclass(frozen=True)
class ScoreRow:
    ts: Score
    fot: Score
    o: Score


# --- per-record scores ------------------------------------------------------------


def score_ts(expected: Sequence[str], selected) -> Score:
    if is_err(selected):
        return ERR
    return int(set(selected) == set(expected))


def score_fot(expected: Sequence[str], plan_order, ts: Score, couple: bool = True) -> Score:
    if is_err(plan_order) or is_err(ts):
        return ERR
    if couple and ts == 0:
        return 0
    return int(list(plan_order) == list(expected))


def score_o(verdict, record_err: bool = False) -> Score:
    if is_err(verdict):
        return ERR
    if verdict is None:
        if record_err:
            return ERR
        raise MissingVerdict("output verdict missing on a record that did not fail")
    if verdict not in (0, 1):
        raise ValueError(f"verdict must be 0, 1 or Err, got {verdict!r}")
    return int(verdict)


def score_outcome(record: BenchRecord, outcome: RunOutcome, couple_fot: bool = True) -> ScoreRow:
    ts = score_ts(record.expected_tasks, outcome.selected_tasks)
    fot = score_fot(record.expected_tasks, outcome.plan_order, ts, couple_fot)
    verdict = outcome.output_ok if outcome.output_ok is not None else record.output_verdict
    o = score_o(verdict, record_err=is_err(ts) or is_err(fot))
    return ScoreRow(ts, fot, o)


def string_match_judge(record: BenchRecord, output: str | None) -> int:
    """1 when the record's expected evidence occurs in the output (case-insensitive)."""
    if record.output_contains is None:
        raise MissingVerdict(f"record {record.id} has no output_contains evidence")
    return int(output is not None and record.output_contains.lower() in output.lower())


# --- aggregates -----------------------------------------------------------------------


def round2(x: Fraction | float) -> str:
    """Two-decimal rendering, halves rounded up."""
    d = Decimal(x.numerator) / Decimal(x.denominator) if isinstance(x, Fraction) else Decimal(str(x))
    return str(d.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


METRICS = ("ts", "fot", "o")
GROUPS = ("Single", "Two", "Three", "Overall")


@dataclass(frozen=True)
class MetricSummary:
    mean: Fraction | None
    n: int  # rows entering the denominator
    errs: int

    def render(self) -> str:
        return "n/a" if self.mean is None else round2(self.mean)


@dataclass
class AggregateTable:
    rows: dict[str, dict[str, MetricSummary]] = field(default_factory=dict)
    err_as_zero: bool = False

    def value(self, group: str, metric: str) -> float | None:
        m = self.rows[group][metric].mean
        return None if m is None else float(m)

    def to_record(self) -> dict:
        return {
            g: {
                k: {"mean": s.render(), "n": s.n, "errs": s.errs}
                for k, s in metrics.items()
            }
            for g, metrics in self.rows.items()
        }

    def render(self) -> str:
        lines = [f"{'split':<8} {'TS':>6} {'FoT':>6} {'O':>6}   Err(TS/FoT/O)"]
        for g, metrics in self.rows.items():
            vals = " ".join(f"{metrics[k].render():>6}" for k in METRICS)
            errs = "/".join(str(metrics[k].errs) for k in METRICS)
            lines.append(f"{g:<8} {vals}   {errs}")
        note = "Err counted as 0" if self.err_as_zero else "Err rows excluded from each mean"
        lines.append(f"({note})")
        return "\n".join(lines) + "\n"


def _summarise(values: list[Score], err_as_zero: bool) -> MetricSummary:
    errs = sum(1 for v in values if is_err(v))
    nums = [0 if is_err(v) else v for v in values] if err_as_zero else [v for v in values if not is_err(v)]
    if not nums:
        return MetricSummary(None, 0, errs)
    return MetricSummary(Fraction(sum(nums), len(nums)), len(nums), errs)


def aggregate(rows: Sequence[tuple[BenchRecord, ScoreRow]], err_as_zero: bool = False) -> AggregateTable:
    if not rows:
        raise ValueError("nothing to aggregate")
    table = AggregateTable(err_as_zero=err_as_zero)
    for g in GROUPS:
        members = [s for r, s in rows if g == "Overall" or r.split.value == g]
        if not members:
            continue
        table.rows[g] = {k: _summarise([getattr(s, k) for s in members], err_as_zero) for k in METRICS}
    return table


# --- trustworthiness and failures -------------------------------------------------------

TOP = "T"
BOTTOM = "B"


def justification(row: ScoreRow) -> str | _Err:
    if is_err(row.ts) or is_err(row.fot):
        return ERR
    return TOP if row.ts == 1 and row.fot == 1 else BOTTOM


@dataclass(frozen=True)
class Quadrants:
    TT: int = 0
    TB: int = 0
    BT: int = 0
    BB: int = 0
    err: int = 0

    @property
    def total(self) -> int:
        return self.TT + self.TB + self.BT + self.BB + self.err

    def to_record(self) -> dict:
        return {"TT": self.TT, "TB": self.TB, "BT": self.BT, "BB": self.BB, "Err": self.err}


def trustworthiness(rows: Iterable[ScoreRow]) -> Quadrants:
    counts = {"TT": 0, "TB": 0, "BT": 0, "BB": 0, "err": 0}
    for row in rows:
        j = justification(row)
        if is_err(j) or is_err(row.o):
            counts["err"] += 1
        else:
            counts[j + (TOP if row.o == 1 else BOTTOM)] += 1
    return Quadrants(**counts)


FAILURE_CELLS = ("(Err,T)", "(T,Err)", "(B,Err)", "(Err,Err)")


def failure_cell(row: ScoreRow) -> str | None:
    """Which failure cell a row falls in, or None when it has no Err.

    A failed justification with a wrong output is filed under (Err,Err):
    the output was not produced by a working pipeline either way.
    """
    j = justification(row)
    if is_err(j):
        return "(Err,T)" if row.o == 1 else "(Err,Err)"
    if is_err(row.o):
        return f"({j},Err)"
    return None


def failure_table(rows: Iterable[ScoreRow]) -> dict[str, int]:
    out = {c: 0 for c in FAILURE_CELLS}
    for row in rows:
        cell = failure_cell(row)
        if cell is not None:
            out[cell] += 1
    return out


# --- latency -------------------------------------------------------------------------------


def latency_summary(rows: Iterable[tuple[BenchRecord, int | None]]) -> dict[str, Fraction | None]:
    """Mean seconds to model selection per split and overall (untimed rows skipped)."""
    buckets: dict[str, list[int]] = {g: [] for g in GROUPS}
    for record, t_ms in rows:
        if t_ms is None:
            continue
        buckets[record.split.value].append(t_ms)
        buckets["Overall"].append(t_ms)
    return {g: (Fraction(sum(v), 1000 * len(v)) if v else None) for g, v in buckets.items()}


def render_latency(lat: dict[str, Fraction | None]) -> str:
    lines = [f"{'split':<8} {'seconds':>8}"]
    for g in GROUPS:
        v = lat.get(g)
        lines.append(f"{g:<8} {('n/a' if v is None else round2(v)):>8}")
    return "\n".join(lines) + "\n"


# --- report ----------------------------------------------------------------------------------


@dataclass
class EvalReport:
    table: AggregateTable
    quadrants: Quadrants
    failures: dict[str, int]
    latency: dict[str, Fraction | None]
    n: int

    @property
    def accounting_ok(self) -> bool:
        return self.quadrants.total == self.n and sum(self.failures.values()) == self.quadrants.err

    def to_record(self) -> dict:
        return {
            "n": self.n,
            "scores": self.table.to_record(),
            "trustworthiness": self.quadrants.to_record(),
            "failures": dict(self.failures),
            "latency_s": {g: (None if v is None else round2(v)) for g, v in self.latency.items()},
            "accounting": "PASS" if self.accounting_ok else "FAIL",
        }

    def render(self) -> str:
        q = self.quadrants
        parts = [
            "== task selection / flow of thought / output ==",
            self.table.render(),
            "== trustworthiness (justification x output) ==",
            f"TT={q.TT} TB={q.TB} BT={q.BT} BB={q.BB} Err={q.err} (N={self.n})\n",
            "== failing cases ==",
            " ".join(f"{c}={n}" for c, n in self.failures.items())
            + f" total={sum(self.failures.values())}\n",
            "== time to model selection ==",
            render_latency(self.latency),
            f"accounting: {'PASS' if self.accounting_ok else 'FAIL'}\n",
        ]
        return "\n".join(parts)


def evaluate(
    records: Sequence[BenchRecord],
    outcomes: Sequence[RunOutcome],
    err_as_zero: bool = False,
    couple_fot: bool = True,
) -> EvalReport:
    by_id = {r.id: r for r in records}
    if len(by_id) != len(records):
        raise SchemaError("duplicate record ids in benchmark")
    seen: set[str] = set()
    pairs: list[tuple[BenchRecord, ScoreRow]] = []
    timings: list[tuple[BenchRecord, int | None]] = []
    for o in outcomes:
        rec = by_id.get(o.record_id)
        if rec is None:
            raise SchemaError(f"outcome for unknown record {o.record_id!r}")
        if o.record_id in seen:
            raise SchemaError(f"duplicate outcome for record {o.record_id!r}")
        seen.add(o.record_id)
        pairs.append((rec, score_outcome(rec, o, couple_fot)))
        timings.append((rec, o.t_select_ms))
    if not pairs:
        raise SchemaError("no outcomes to evaluate")
    scores = [s for _, s in pairs]
    report = EvalReport(
        table=aggregate(pairs, err_as_zero),
        quadrants=trustworthiness(scores),
        failures=failure_table(scores),
        latency=latency_summary(timings),
        n=len(pairs),
    )
    if not report.accounting_ok:  # structural; a failure here is a bug
        raise AssertionError("trustworthiness accounting does not sum to the record count")
    return report


# --- file formats ------------------------------------------------------------------------------


def _lines(stream: IO[str] | Iterable[str]):
    for line_no, line in enumerate(stream, start=1):
        line = line.strip()
        if line and not line.startswith("#"):
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(f"line {line_no}: invalid JSON ({e.msg})") from e


def _str_list(value, what: str, line_no: int) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
        raise SchemaError(f"line {line_no}: {what} must be a list of strings")
    return tuple(value)


def bench_record_from_dict(rec: dict, line_no: int = 0) -> BenchRecord:
    try:
        return BenchRecord(
            id=str(rec["id"]),
            query=str(rec["query"]),
            expected_tasks=_str_list(rec["expected_tasks"], "expected_tasks", line_no),
            split=Split(rec["split"]),
            modality_in=frozenset(_str_list(rec.get("modality_in", []), "modality_in", line_no)),
            modality_out=frozenset(_str_list(rec.get("modality_out", []), "modality_out", line_no)),
            output_verdict=rec.get("output_verdict"),
            output_contains=rec.get("output_contains"),
        )
    except (KeyError, ValueError, TypeError) as e:
        raise SchemaError(f"line {line_no}: bad benchmark record ({e})") from e


def load_bench(stream) -> list[BenchRecord]:
    out = [bench_record_from_dict(rec, n) for n, rec in _lines(stream)]
    if not out:
        raise SchemaError("benchmark file has no records")
    return out


def bench_record_to_dict(r: BenchRecord) -> dict:
    rec = {
        "id": r.id,
        "query": r.query,
        "expected_tasks": list(r.expected_tasks),
        "split": r.split.value,
        "modality_in": sorted(r.modality_in),
        "modality_out": sorted(r.modality_out),
    }
    if r.output_verdict is not None:
        rec["output_verdict"] = r.output_verdict
    if r.output_contains is not None:
        rec["output_contains"] = r.output_contains
    return rec


def _decode_tasks(value, what: str, line_no: int):
    if value == "Err":
        return ERR
    return _str_list(value, what, line_no)


def _decode_verdict(value, line_no: int):
    if value == "Err":
        return ERR
    if value is None or value in (0, 1):
        return value
    raise SchemaError(f"line {line_no}: output_ok must be 0, 1, \"Err\" or null")


def outcome_from_dict(rec: dict, line_no: int = 0) -> RunOutcome:
    try:
        t = rec.get("t_select_ms")
        if t is not None and (not isinstance(t, int) or isinstance(t, bool) or t < 0):
            raise SchemaError(f"line {line_no}: t_select_ms must be a non-negative integer")
        return RunOutcome(
            record_id=str(rec["record_id"]),
            selected_tasks=_decode_tasks(rec["selected_tasks"], "selected_tasks", line_no),
            plan_order=_decode_tasks(rec["plan_order"], "plan_order", line_no),
            output_ok=_decode_verdict(rec.get("output_ok"), line_no),
            t_select_ms=t,
        )
    except KeyError as e:
        raise SchemaError(f"line {line_no}: outcome lacks field {e}") from e


def load_outcomes(stream) -> list[RunOutcome]:
    return [outcome_from_dict(rec, n) for n, rec in _lines(stream)]


def outcome_to_dict(o: RunOutcome) -> dict:
    enc = lambda v: "Err" if is_err(v) else (list(v) if isinstance(v, tuple) else v)  # noqa: E731
    return {
        "record_id": o.record_id,
        "selected_tasks": enc(o.selected_tasks),
        "plan_order": enc(o.plan_order),
        "output_ok": enc(o.output_ok),
        "t_select_ms": o.t_select_ms,
    }
