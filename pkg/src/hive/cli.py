"""Command-line entry point: ``hive ingest|plan|run|eval|ckg``.

Exit codes: 0 ok, 1 input or schema error, 2 planning or selection
failure, 3 execution failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .ckg import dump_graph, load_graph_files, task as task_node
from .config import ConfigError, load_config
from .errors import HiveError, ParseError, SchemaError
from .evalbench import evaluate, load_bench, load_outcomes, outcome_to_dict
from .execution import render_report
from .ingest import build_graph, load_cards, load_pwc
from .pipeline import Engine, make_provider
from .selection import BenchmarkConstraint, ConstraintSet
from .snippets import dump_specs, specs_path_for

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_PLAN = 2
EXIT_EXEC = 3

log = logging.getLogger("hive")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="YAML configuration file")
    g.add_argument("--provider-url", help="text-completion endpoint (implies online mode)")
    g.add_argument("--provider-token", help="bearer token for the endpoint")
    mode = g.add_mutually_exclusive_group()
    mode.add_argument("--offline", dest="offline", action="store_true", default=None,
                      help="answer prompts from the canned-reply fixtures")
    mode.add_argument("--online", dest="offline", action="store_false",
                      help="call the configured provider endpoint")
    g.add_argument("--fixtures", help="canned-reply directory for offline mode")
    g.add_argument("--no-fallback", action="store_true",
                   help="fail instead of using rule-based parsing when the provider is down")
    g.add_argument("--ckg", help="capability graph file (JSONL)")
    g.add_argument("--domains", help="directory of PDDL domain files")
    g.add_argument("--registry", help="backend registry file (JSON)")
    g.add_argument("--max-width", type=int, choices=(1, 2), help="novelty bound for the planner")
    g.add_argument("--format", choices=("text", "json"), default="text", help="output format")
    g.add_argument("-v", "--verbose", action="store_true", help="log warnings and progress")
    return p


def _constraint_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("query", help="natural-language request")
    p.add_argument("--licenses", help="comma-separated license whitelist")
    rank = p.add_mutually_exclusive_group()
    rank.add_argument("--smallest", action="store_true", help="prefer the smallest model")
    rank.add_argument("--benchmark", help="prefer the best model on this benchmark")
    p.add_argument("--metric", help="metric for --benchmark")
    p.add_argument("--benchmark-task", help="rank only this task by --benchmark (default: every task)")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="hive",
        description="Plan, select models for, and run multi-step AI requests.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="build a capability graph from model cards")
    p.add_argument("cards_dir")
    p.add_argument("pwc_file", help="line-delimited benchmark records")
    p.add_argument("out_graph", help="output triple file; specs go to <name>.specs.jsonl")
    p.add_argument("--jobs", type=int, default=1, help="parallel provider calls")
    p.add_argument("--keywords", help="comma-separated snippet keywords")

    p = sub.add_parser("plan", parents=[common], help="plan a request and select models")
    _constraint_args(p)

    p = sub.add_parser("run", parents=[common], help="plan, select and execute a request")
    _constraint_args(p)
    p.add_argument("--trace-out", help="also write the structured trace here")

    p = sub.add_parser("eval", parents=[common], help="score a benchmark")
    p.add_argument("bench_file")
    p.add_argument("--outcomes", help="recorded outcomes; omit to run the benchmark live")
    p.add_argument("--outcomes-out", help="write the live-run outcomes here")
    p.add_argument("--jobs", type=int, default=1, help="parallel live runs")
    p.add_argument("--err-as-zero", action="store_true", default=None,
                   help="count Err as 0 in means instead of excluding it")
    p.add_argument("--no-couple-fot", action="store_true",
                   help="score FoT even when TS is 0")

    p = sub.add_parser("ckg", help="inspect a capability graph")
    ckg_sub = p.add_subparsers(dest="ckg_command", required=True)
    ckg_sub.add_parser("stats", parents=[common], help="triple and entity counts")
    q = ckg_sub.add_parser("query", parents=[common], help="models supporting a task")
    q.add_argument("--task", required=True)
    return parser


def _config_from(args):
    flags = {
        "provider.url": args.provider_url,
        "provider.token": args.provider_token,
        "provider.offline": args.offline,
        "provider.fixtures": args.fixtures,
        "provider.fallback": False if args.no_fallback else None,
        "ckg.path": args.ckg,
        "domains.path": args.domains,
        "registry.path": args.registry,
        "planner.max_width": args.max_width,
    }
    if getattr(args, "err_as_zero", None):
        flags["eval.err_as_zero"] = True
    if getattr(args, "no_couple_fot", False):
        flags["eval.couple_fot"] = False
    return load_config(args.config, os.environ, flags)


def _constraints_from(args) -> ConstraintSet:
    licenses = None
    if args.licenses is not None:
        licenses = frozenset(x.strip() for x in args.licenses.split(",") if x.strip())
    bench = None
    if args.benchmark is not None:
        if not args.metric:
            raise ConfigError("--benchmark needs --metric")
        bench = BenchmarkConstraint(args.benchmark, args.metric, args.benchmark_task)
    elif args.metric or args.benchmark_task:
        raise ConfigError("--metric and --benchmark-task only apply with --benchmark")
    return ConstraintSet(licenses=licenses, minimize_size=args.smallest, benchmark=bench)


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


# --- commands ---------------------------------------------------------------------


def cmd_ingest(args, cfg) -> int:
    out = Path(args.out_graph)
    specs_out = specs_path_for(out)
    try:
        cards = load_cards(args.cards_dir)
        with open(args.pwc_file, encoding="utf-8") as f:
            records = load_pwc(f)
        provider = make_provider(cfg) if cards else None
        keywords = None
        if args.keywords:
            keywords = tuple(k.strip() for k in args.keywords.split(",") if k.strip())
        kwargs = {"keywords": keywords} if keywords else {}
        report = build_graph(cards, records, provider, jobs=max(1, args.jobs), **kwargs)
    except (OSError, HiveError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    out.parent.mkdir(parents=True, exist_ok=True)
    # write both files next to their targets, then rename: no partial output
    written = []
    try:
        for target, text in ((out, dump_graph(report.graph)), (specs_out, dump_specs(report.graph.specs))):
            fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=".hive-", suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                f.write(text)
            written.append((tmp, target))
        for tmp, target in written:
            os.replace(tmp, target)
    except OSError as e:
        for tmp, _ in written:
            Path(tmp).unlink(missing_ok=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    stats = report.graph.stats()
    if args.format == "json":
        _emit(json.dumps({"stats": stats, "warnings": report.warnings}, sort_keys=True))
    else:
        _emit(f"triples: {stats['triples']}\nentities: {stats['entities']}")
    return EXIT_OK


def _engine(cfg, with_registry: bool) -> Engine:
    return Engine.from_config(cfg, with_registry=with_registry)


def cmd_plan(args, cfg) -> int:
    constraints = _constraints_from(args)
    engine = _engine(cfg, with_registry=False)
    out = engine.plan(args.query, constraints)
    if args.format == "json":
        _emit(out.trace.to_json())
    else:
        _emit(render_report(out.trace))
    if out.error is not None or not out.trace.selection.complete:
        return EXIT_PLAN
    return EXIT_OK


def cmd_run(args, cfg) -> int:
    constraints = _constraints_from(args)
    engine = _engine(cfg, with_registry=True)
    out = engine.run(args.query, constraints)
    trace_json = out.trace.to_json()
    if args.trace_out:
        Path(args.trace_out).write_text(trace_json, encoding="utf-8")
    _emit(trace_json if args.format == "json" else render_report(out.trace))
    if out.error is not None or not out.trace.selection.complete:
        return EXIT_PLAN
    return EXIT_EXEC if out.trace.final_status != "Ok" else EXIT_OK


def cmd_eval(args, cfg) -> int:
    try:
        with open(args.bench_file, encoding="utf-8") as f:
            records = load_bench(f)
        if args.outcomes:
            with open(args.outcomes, encoding="utf-8") as f:
                outcomes = load_outcomes(f)
        else:
            engine = _engine(cfg, with_registry=True)
            if args.jobs > 1:
                with ThreadPoolExecutor(max_workers=args.jobs) as pool:
                    outcomes = list(pool.map(engine.run_record, records))
            else:
                outcomes = [engine.run_record(r) for r in records]
            if args.outcomes_out:
                Path(args.outcomes_out).write_text(
                    "".join(json.dumps(outcome_to_dict(o)) + "\n" for o in outcomes), encoding="utf-8"
                )
        report = evaluate(records, outcomes, cfg["eval.err_as_zero"], cfg["eval.couple_fot"])
    except (OSError, SchemaError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    if args.format == "json":
        rec = report.to_record()
        rec["config"] = cfg.to_record()
        _emit(json.dumps(rec, indent=2, sort_keys=True))
    else:
        cfg_lines = "".join(f"  {k} = {json.dumps(v)}\n" for k, v in cfg.to_record().items())
        _emit(report.render() + "\nconfig:\n" + cfg_lines)
    return EXIT_OK


def cmd_ckg(args, cfg) -> int:
    try:
        graph = load_graph_files(cfg.path("ckg.path"))
    except (OSError, HiveError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    if args.ckg_command == "stats":
        stats = graph.stats()
        stats["models"] = len(graph.models())
        stats["tasks"] = len(graph.tasks())
        if args.format == "json":
            _emit(json.dumps(stats, sort_keys=True))
        else:
            _emit("\n".join(f"{k}: {v}" for k, v in stats.items()))
        return EXIT_OK
    recs = graph.models_for_task(task_node(args.task))
    if args.format == "json":
        _emit(json.dumps(
            [
                {
                    "model": r.model.local_name,
                    "license": r.license,
                    "size_bytes": r.size_bytes,
                    "results": len(r.results),
                    "snippet": r.snippet,
                }
                for r in recs
            ],
            indent=2,
        ))
    else:
        if not recs:
            _emit(f"no models for task {args.task}")
        for r in recs:
            size = "?" if r.size_bytes is None else f"{r.size_bytes}"
            _emit(f"{r.model.local_name}\tlicense={r.license or '?'}\tsize_bytes={size}"
                  f"\tresults={len(r.results)}\tsnippet={'yes' if r.snippet else 'no'}")
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "plan": cmd_plan, "run": cmd_run, "eval": cmd_eval, "ckg": cmd_ckg}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.ERROR,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _config_from(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, ParseError, SchemaError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except HiveError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
