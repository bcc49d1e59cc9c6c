"""Command-line front end: ``recsub {check,tree,automaton,fuzz,bench}``.

Exit codes: 0 success; 1 a verdict contradicts its expectation (or engines
disagree); 2 parse or well-formedness error; 3 some engine ran out of budget.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass

from . import automata, coinductive
from .bench import DEFAULT_SIZES, run_bench
from .coinductive import _surface_frees
from .parser import ParseError, parse_query_file, parse_type
from .syntax import (
    GlobalEnv,
    Relation,
    TypeSyntaxError,
    free_names,
    to_core,
    well_formed,
)
from .trees import oracle_check, render_tree, tree_size, tree_to_json, treeof
from .verdict import BudgetExceeded, format_path, verdict_to_json

EXIT_OK, EXIT_MISMATCH, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3
ENGINES = ("coinductive", "automata", "oracle")
MAX_RENDERED_NODES = 100_000


@dataclass(frozen=True)
class RunConfig:
    command: str
    engine: str = "coinductive"
    depth: int = 64
    budget: int = coinductive.DEFAULT_BUDGET
    seed: int = 0
    count: int = 100
    size_max: int = 12
    output: str = "text"
    strict_frees: bool = True
    timing: bool = False

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.budget < 1:
            raise ValueError("budget must be at least 1")


def _emit(obj: dict) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False))


def _input_error(cfg: RunConfig, err: Exception) -> int:
    if cfg.output == "json":
        _emit({"error": type(err).__name__, "message": str(err), "exitCode": EXIT_INPUT})
    else:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
    return EXIT_INPUT


def run_engine(engine: str, env: GlobalEnv, l, r, rel: Relation, cfg: RunConfig):
    if engine == "coinductive":
        return coinductive.check(env, l, r, rel, cfg.budget)
    if engine == "automata":
        return automata.subtype_automata(
            env, automata.automataof(l), automata.automataof(r), rel, cfg.budget
        )
    if engine == "oracle":
        return oracle_check(env, (), l, r, rel, cfg.depth)
    raise ValueError(f"unknown engine {engine!r}")


def cmd_check(cfg: RunConfig, text: str, explain: bool = False) -> int:
    try:
        qf = parse_query_file(text)
        env = coinductive.env_for_file(qf, cfg.strict_frees)
        queries = [(q, *coinductive.core_query(env, q)) for q in qf.queries]
    except (ParseError, TypeSyntaxError) as err:
        return _input_error(cfg, err)

    engines = ENGINES if cfg.engine == "all" else (cfg.engine,)
    records = []
    mismatch = budget_hit = False
    lines = []
    for q, l, r in queries:
        verdicts = {}
        for name in engines:
            t0 = time.perf_counter()
            v = run_engine(name, env, l, r, q.relation, cfg)
            millis = (time.perf_counter() - t0) * 1e3
            verdicts[name] = v
            rec = {"query": str(q), "engine": name, "expected": q.expected,
                   "millis": round(millis, 3) if cfg.timing else None,
                   "promotions": None, "assertions": None}
            rec.update(verdict_to_json(v))
            records.append(rec)
        decided = {n: v for n, v in verdicts.items() if not isinstance(v, BudgetExceeded)}
        if len(decided) < len(verdicts):
            budget_hit = True
        target = True if q.expected is None else q.expected
        kinds = {v.kind for v in decided.values()}
        ok = kinds <= {"yes" if target else "no"}
        mismatch |= not ok
        summary = ", ".join(f"{n}: {v.kind}" for n, v in verdicts.items())
        status = "ok  " if ok and len(decided) == len(verdicts) else ("FAIL" if not ok else "????")
        line = f"{status} {q}  [{summary}]"
        for n, v in decided.items():
            if v.kind == "no":
                line += f"\n       {n}: witness {format_path(v.path)} ({v.clash})"
                break
        lines.append(line)
        if explain:
            _, trace = coinductive.explain(env, l, r, q.relation, cfg.budget)
            lines.extend("       " + str(s) for s in trace)

    code = EXIT_BUDGET if budget_hit else EXIT_MISMATCH if mismatch else EXIT_OK
    if cfg.output == "json":
        _emit({"results": records, "exitCode": code})
    else:
        print("\n".join(lines))
    return code


def _parse_open_type(text: str):
    """Parse a lone type; its free identifiers are taken as unbounded constants."""
    s = parse_type(text)
    t = to_core(s, set(_surface_frees(s)))
    well_formed(t, free_names(t))
    return t


def cmd_tree(cfg: RunConfig, type_text: str) -> int:
    try:
        t = _parse_open_type(type_text)
    except (ParseError, TypeSyntaxError) as err:
        return _input_error(cfg, err)
    if cfg.engine == "automata":
        tr = automata.generate(automata.automataof(t), cfg.depth)
    else:
        tr = treeof(t, cfg.depth)
    n = tree_size(tr)
    if n > MAX_RENDERED_NODES:
        return _input_error(cfg, ValueError(
            f"tree at depth {cfg.depth} has {n} nodes; use a smaller --depth"))
    if cfg.output == "json":
        _emit({"depth": cfg.depth, "tree": tree_to_json(tr)})
    else:
        print(render_tree(tr))
    return EXIT_OK


def cmd_automaton(cfg: RunConfig, type_text: str, dot: bool = False) -> int:
    try:
        t = _parse_open_type(type_text)
    except (ParseError, TypeSyntaxError) as err:
        return _input_error(cfg, err)
    a = automata.automataof(t)
    if dot:
        print(automata.automaton_dot(a))
    elif cfg.output == "json":
        _emit(automata.dump_automaton(a))
    else:
        print(automata.automaton_text(a))
    return EXIT_OK


def cmd_fuzz(cfg: RunConfig, jobs: int = 1) -> int:
    from .fuzz import run_fuzz

    report = run_fuzz(cfg.seed, cfg.count, cfg.size_max, cfg.budget, cfg.depth,
                      jobs=jobs, timing=cfg.timing)
    if cfg.output == "json":
        _emit(report.to_json())
    else:
        print(f"cases: {report.cases_run}  yes: {report.yes}  no: {report.no}  "
              f"budget exceeded: {report.budget_exceeded_count}  "
              f"disagreements: {len(report.disagreements)}")
        if report.elapsed:
            print("elapsed ms: " + ", ".join(f"{k} {v:.1f}" for k, v in report.elapsed.items()))
        for d in report.disagreements:
            print(f"case {d['case']}: {'; '.join(d['problems'])}")
            print(f"  env: {'; '.join(d['env'])}")
            print(f"  query: {d['query']}")
            print(f"  minimized: {'; '.join(d['minimized']['env'])} |- {d['minimized']['query']}")
    return EXIT_OK if not report.disagreements else EXIT_MISMATCH


def cmd_bench(cfg: RunConfig, sizes: list[int], rel: Relation) -> int:
    report = run_bench(sizes, rel, cfg.budget)
    if cfg.output == "json":
        print(report.to_json())
    else:
        print(report.table())
    return EXIT_OK


def _sizes(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}")
    if not out or any(n < 1 for n in out):
        raise argparse.ArgumentTypeError("sizes must be positive")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="recsub",
        description="Equality and subtyping for equirecursive F-bounded types.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--depth", type=int, default=64, help="oracle/tree depth (default 64)")
    common.add_argument("--budget", type=int, default=coinductive.DEFAULT_BUDGET,
                        help="maximum number of assertions per query")
    common.add_argument("--timing", action="store_true",
                        help="include wall-clock timings (makes JSON non-reproducible)")

    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="decide the queries of a file")
    c.add_argument("file", help="query file, or - for stdin")
    c.add_argument("--engine", choices=ENGINES + ("all",), default="coinductive")
    c.add_argument("--strict-frees", action=argparse.BooleanOptionalAction, default=True,
                   help="reject undeclared identifiers (default); --no-strict-frees "
                        "treats them as unbounded constants")
    c.add_argument("--explain", action="store_true", help="print the coinductive derivation")

    t = sub.add_parser("tree", parents=[common], help="print a depth-bounded tree")
    t.add_argument("type")
    t.add_argument("--engine", choices=("oracle", "automata"), default="oracle",
                   help="unroll the type directly, or generate from its automaton")

    a = sub.add_parser("automaton", parents=[common], help="print the automaton of a type")
    a.add_argument("type")
    a.add_argument("--dot", action="store_true", help="Graphviz output")

    f = sub.add_parser("fuzz", parents=[common], help="differential testing of the engines")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--count", type=int, default=1000)
    f.add_argument("--size-max", type=int, default=12)
    f.add_argument("--jobs", type=int, default=1, help="worker processes")

    b = sub.add_parser("bench", parents=[common], help="scaling benchmark of the automata engine")
    b.add_argument("--sizes", type=_sizes, default=list(DEFAULT_SIZES))
    b.add_argument("--relation", choices=("sub", "eq"), default="sub")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(
            command=args.command,
            engine=getattr(args, "engine", "coinductive"),
            depth=args.depth,
            budget=args.budget,
            seed=getattr(args, "seed", 0),
            count=getattr(args, "count", 0),
            size_max=getattr(args, "size_max", 12),
            output="json" if args.json else "text",
            strict_frees=getattr(args, "strict_frees", True),
            timing=args.timing,
        )
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT

    if args.command == "check":
        try:
            text = sys.stdin.read() if args.file == "-" else open(args.file, encoding="utf-8").read()
        except OSError as err:
            return _input_error(cfg, err)
        return cmd_check(cfg, text, args.explain)
    if args.command == "tree":
        return cmd_tree(cfg, args.type)
    if args.command == "automaton":
        return cmd_automaton(cfg, args.type, args.dot)
    if args.command == "fuzz":
        return cmd_fuzz(cfg, args.jobs)
    return cmd_bench(cfg, args.sizes, Relation(args.relation))


if __name__ == "__main__":
    sys.exit(main())
