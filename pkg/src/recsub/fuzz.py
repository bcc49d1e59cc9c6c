"""Seeded random instances and the three-way differential harness.

Generator shape:

* the environment has 1 to 3 constants ``A``, ``B``, ``C``; each is either
  unbounded or bounded by a small type over itself and earlier names;
* types are built top-down with a size budget; every ``rec`` body is
  forced to start with an arrow or a quantifier, so it is contractive;
* 30% of queries compare a type against a single-node mutation of itself
  (leaf swap, subtree replacement, unrolling a ``rec``, swapping arrow
  sides, replacing a variable by its bound); the rest pair two independent
  types.  Relation and orientation are chosen uniformly.

Instance ``i`` of a run seeded with ``s`` only depends on ``(s, i)``, so runs
are reproducible and can be split across worker processes.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator

from . import automata, coinductive
from .parser import print_type
from .syntax import (
    EnvEntry,
    Forall,
    FreeVar,
    Fun,
    GlobalEnv,
    Rec,
    Relation,
    TypeExpr,
    Var,
    WellFormednessError,
    free_indices,
    from_core,
    shift_indices,
    is_well_formed,
    size,
    substitute,
    unfold_rec,
)
from .trees import oracle_check
from .verdict import BudgetExceeded, Verdict, verdict_to_json

NAMES = ("A", "B", "C")
MUTATION_RATE = 0.3


@dataclass(frozen=True)
class Instance:
    env: GlobalEnv
    left: TypeExpr
    right: TypeExpr
    rel: Relation

    def query_text(self) -> str:
        return f"{show(self.left)} {self.rel.symbol} {show(self.right)}"

    def env_text(self) -> list[str]:
        return [
            f"{e.name} <= {e.name if e.bound is None else show(e.bound)}" for e in self.env
        ]


def show(t: TypeExpr) -> str:
    return print_type(from_core(t))


# --- generation -----------------------------------------------------------


def random_type(rng: random.Random, budget: int, names: tuple[str, ...],
                ctx: tuple[str, ...] = ()) -> TypeExpr:
    """A random well-formed type of size at most ``budget``.

    ``ctx`` lists enclosing binders innermost first ('forall' or 'rec').
    """
    if budget <= 1:
        return _leaf(rng, names, ctx)
    roll = rng.random()
    if budget >= 4 and roll < 0.2:
        body = _constructor(rng, budget - 1, names, ("rec",) + ctx)
        return Rec(body)
    if budget >= 3 and roll < 0.45:
        return _forall(rng, budget, names, ctx)
    if budget >= 3 and roll < 0.85:
        return _fun(rng, budget, names, ctx)
    return _leaf(rng, names, ctx)


def _constructor(rng, budget, names, ctx) -> TypeExpr:
    if rng.random() < 0.4:
        return _forall(rng, budget, names, ctx)
    return _fun(rng, budget, names, ctx)


def _fun(rng, budget, names, ctx) -> TypeExpr:
    left = rng.randint(1, budget - 2)
    return Fun(random_type(rng, left, names, ctx), random_type(rng, budget - 1 - left, names, ctx))


def _forall(rng, budget, names, ctx) -> TypeExpr:
    inner = ("forall",) + ctx
    left = rng.randint(1, max(1, min(budget - 2, 3)))
    return Forall(random_type(rng, left, names, inner),
                  random_type(rng, budget - 1 - left, names, inner))


def _leaf(rng, names, ctx) -> TypeExpr:
    if ctx and (not names or rng.random() < 0.6):
        return Var(rng.randrange(len(ctx)))
    return FreeVar(rng.choice(names))


def random_env(rng: random.Random, max_entries: int = 3) -> GlobalEnv:
    n = rng.randint(1, max_entries)
    entries: list[EnvEntry] = []
    for i in range(n):
        name = NAMES[i]
        visible = NAMES[: i + 1]
        bound = None
        if rng.random() < 0.5:
            for _ in range(10):
                cand = random_type(rng, rng.randint(1, 4), visible)
                if cand != FreeVar(name):
                    try:
                        GlobalEnv(entries + [EnvEntry(name, cand)])
                    except WellFormednessError:
                        continue
                    bound = cand
                    break
        entries.append(EnvEntry(name, bound))
    return GlobalEnv(entries)


def subterm_positions(t: TypeExpr) -> list[tuple[tuple[int, ...], tuple[str, ...]]]:
    """All (position, binder context) pairs; a position lists child indices."""
    out = []

    def go(t, pos, ctx):
        out.append((pos, ctx))
        match t:
            case Fun(dom, cod):
                go(dom, pos + (0,), ctx)
                go(cod, pos + (1,), ctx)
            case Forall(bound, body):
                go(bound, pos + (0,), ("forall",) + ctx)
                go(body, pos + (1,), ("forall",) + ctx)
            case Rec(body):
                go(body, pos + (0,), ("rec",) + ctx)

    go(t, (), ())
    return out


def subterm_at(t: TypeExpr, pos: tuple[int, ...]) -> TypeExpr:
    for i in pos:
        match t:
            case Fun(dom, cod):
                t = (dom, cod)[i]
            case Forall(bound, body):
                t = (bound, body)[i]
            case Rec(body):
                t = body
    return t


def replace_at(t: TypeExpr, pos: tuple[int, ...], new: TypeExpr) -> TypeExpr:
    if not pos:
        return new
    i, rest = pos[0], pos[1:]
    match t:
        case Fun(dom, cod):
            return Fun(replace_at(dom, rest, new), cod) if i == 0 else Fun(dom, replace_at(cod, rest, new))
        case Forall(bound, body):
            if i == 0:
                return Forall(replace_at(bound, rest, new), body)
            return Forall(bound, replace_at(body, rest, new))
        case Rec(body):
            return Rec(replace_at(body, rest, new))
    raise ValueError(f"no position {pos} in {t!r}")


_EDITS = (("unfold", 30), ("bound", 20), ("leaf", 20), ("subtree", 15), ("swap", 15))


def mutate(rng: random.Random, t: TypeExpr, env: GlobalEnv, size_max: int) -> TypeExpr:
    """A well-formed single-node edit of ``t`` (``t`` itself if none fits)."""
    names = tuple(e.name for e in env)
    positions = subterm_positions(t)
    applicable = {
        "unfold": [p for p in positions if isinstance(subterm_at(t, p[0]), Rec)],
        "bound": [p for p in positions if _forall_var(subterm_at(t, p[0]), p[1])],
        "leaf": positions,
        "subtree": positions,
        "swap": [p for p in positions if isinstance(subterm_at(t, p[0]), Fun)],
    }
    kinds = [k for k, _ in _EDITS if applicable[k]]
    weights = [w for k, w in _EDITS if applicable[k]]
    for _ in range(20):
        kind = rng.choices(kinds, weights)[0]
        pos, ctx = rng.choice(applicable[kind])
        sub = subterm_at(t, pos)
        if kind == "unfold":
            new = unfold_rec(sub)
        elif kind == "bound":
            new = _bound_in_context(t, pos, sub.index)
        elif kind == "leaf":
            new = _leaf(rng, names, ctx)
        elif kind == "subtree":
            new = random_type(rng, rng.randint(1, 4), names, ctx)
        else:
            new = Fun(sub.cod, sub.dom)
        out = replace_at(t, pos, new)
        if out != t and size(out) <= size_max and is_well_formed(out, env):
            return out
    return t


def _forall_var(t: TypeExpr, ctx: tuple[str, ...]) -> bool:
    return isinstance(t, Var) and ctx[t.index] == "forall"


def _bound_in_context(t: TypeExpr, pos: tuple[int, ...], index: int) -> TypeExpr | None:
    """The bound of the quantifier binding ``Var(index)`` at ``pos``, moved to ``pos``."""
    binders: list[TypeExpr] = []
    cur = t
    for i in pos:
        match cur:
            case Fun(dom, cod):
                cur = (dom, cod)[i]
            case Forall(bound, body):
                binders.append(cur)
                cur = (bound, body)[i]
            case Rec(body):
                binders.append(cur)
                cur = body
    q = binders[len(binders) - 1 - index]
    if not isinstance(q, Forall):
        return None
    return shift_indices(q.bound, 0, index)


def random_instance(seed: int, i: int, size_max: int = 12) -> Instance:
    rng = random.Random(f"recsub:{seed}:{i}")
    env = random_env(rng)
    names = tuple(e.name for e in env)
    rel = rng.choice((Relation.SUB, Relation.EQ))
    left = random_type(rng, rng.randint(1, size_max), names)
    if rng.random() < MUTATION_RATE:
        right = mutate(rng, left, env, size_max)
        if rng.random() < 0.5:
            left, right = right, left
    else:
        right = random_type(rng, rng.randint(1, size_max), names)
    return Instance(env, left, right, rel)


def corpus(seed: int, count: int, size_max: int = 12) -> Iterator[Instance]:
    for i in range(count):
        yield random_instance(seed, i, size_max)


# --- differential run -----------------------------------------------------


@dataclass
class CaseResult:
    index: int
    instance: Instance
    verdicts: dict[str, Verdict | object]
    millis: dict[str, float]
    problems: list[str]

    @property
    def budget_exceeded(self) -> bool:
        return any(isinstance(v, BudgetExceeded) for v in self.verdicts.values())


def compare(inst: Instance, budget: int = 10**6, depth: int = 64
            ) -> tuple[dict[str, object], dict[str, float], list[str]]:
    """Run all engines on one instance; returns verdicts, timings and problems."""
    verdicts: dict[str, object] = {}
    millis: dict[str, float] = {}

    t0 = time.perf_counter()
    verdicts["coinductive"] = coinductive.check(inst.env, inst.left, inst.right, inst.rel, budget)
    t1 = time.perf_counter()
    verdicts["automata"] = automata.subtype_automata(
        inst.env, automata.automataof(inst.left), automata.automataof(inst.right), inst.rel, budget
    )
    t2 = time.perf_counter()
    verdicts["oracle"] = oracle_check(inst.env, (), inst.left, inst.right, inst.rel, depth)
    t3 = time.perf_counter()
    millis.update(coinductive=(t1 - t0) * 1e3, automata=(t2 - t1) * 1e3, oracle=(t3 - t2) * 1e3)

    problems: list[str] = []
    co, au, orc = verdicts["coinductive"], verdicts["automata"], verdicts["oracle"]
    if not isinstance(co, BudgetExceeded) and not isinstance(au, BudgetExceeded):
        if co.kind != au.kind:
            problems.append(f"coinductive says {co.kind}, automata says {au.kind}")
    for name in ("coinductive", "automata"):
        v = verdicts[name]
        if not isinstance(v, BudgetExceeded) and v.kind != orc.kind:
            problems.append(f"{name} says {v.kind}, oracle at depth {depth} says {orc.kind}")
    return verdicts, millis, problems


def disagrees(inst: Instance, budget: int, depth: int) -> bool:
    return bool(compare(inst, budget, depth)[2])


def shrink(inst: Instance, still_bad: Callable[[Instance], bool]) -> Instance:
    """Greedy single-node shrinking: keep any smaller candidate that still fails."""
    improved = True
    while improved:
        improved = False
        for cand in _candidates(inst):
            if _weight(cand) < _weight(inst) and still_bad(cand):
                inst = cand
                improved = True
                break
    return inst


def _weight(inst: Instance) -> tuple[int, int]:
    env_size = sum(1 + (size(e.bound) if e.bound is not None else 0) for e in inst.env)
    return (size(inst.left) + size(inst.right), env_size)


def _candidates(inst: Instance) -> Iterator[Instance]:
    names = tuple(e.name for e in inst.env)
    for side in ("left", "right"):
        t = getattr(inst, side)
        for pos, ctx in subterm_positions(t):
            sub = subterm_at(t, pos)
            if size(sub) == 1:
                continue
            repl: list[TypeExpr] = []
            match sub:
                case Fun(dom, cod):
                    repl += [dom, cod]
                case Forall(_, body) | Rec(body) if 0 not in free_indices(body):
                    repl.append(substitute(body, 0, FreeVar(names[0])))
            repl += [FreeVar(n) for n in names]
            repl += [Var(i) for i in range(len(ctx))]
            for new in repl:
                out = replace_at(t, pos, new)
                if is_well_formed(out, inst.env):
                    yield replace(inst, **{side: out})
    for k, e in enumerate(inst.env):
        if e.bound is not None:
            entries = list(inst.env.entries)
            entries[k] = EnvEntry(e.name, None)
            yield Instance(GlobalEnv(entries), inst.left, inst.right, inst.rel)


@dataclass
class FuzzReport:
    seed: int
    count: int
    size_max: int
    cases_run: int = 0
    yes: int = 0
    no: int = 0
    budget_exceeded_count: int = 0
    disagreements: list[dict] = field(default_factory=list)
    elapsed: dict[str, float] | None = None

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "count": self.count,
            "sizeMax": self.size_max,
            "casesRun": self.cases_run,
            "yes": self.yes,
            "no": self.no,
            "budgetExceededCount": self.budget_exceeded_count,
            "disagreements": self.disagreements,
            "elapsedMillis": self.elapsed,
        }


def _run_case(args: tuple[int, int, int, int, int]) -> CaseResult:
    seed, i, size_max, budget, depth = args
    inst = random_instance(seed, i, size_max)
    verdicts, millis, problems = compare(inst, budget, depth)
    return CaseResult(i, inst, verdicts, millis, problems)


def run_fuzz(seed: int, count: int, size_max: int = 12, budget: int = 10**6,
             depth: int = 64, jobs: int = 1, timing: bool = False,
             on_case: Callable[[CaseResult], None] | None = None) -> FuzzReport:
    report = FuzzReport(seed, count, size_max)
    elapsed = {"coinductive": 0.0, "automata": 0.0, "oracle": 0.0}
    tasks = [(seed, i, size_max, budget, depth) for i in range(count)]
    if jobs > 1 and count > 1:
        from multiprocessing import Pool

        with Pool(jobs) as pool:
            results: Iterator[CaseResult] = pool.imap(_run_case, tasks, chunksize=64)
            _collect(report, results, elapsed, budget, depth, on_case)
    else:
        _collect(report, map(_run_case, tasks), elapsed, budget, depth, on_case)
    if timing:
        report.elapsed = {k: round(v, 3) for k, v in elapsed.items()}
    return report


def _collect(report, results, elapsed, budget, depth, on_case) -> None:
    for res in results:
        report.cases_run += 1
        for k, v in res.millis.items():
            elapsed[k] += v
        co = res.verdicts["coinductive"]
        if res.budget_exceeded:
            report.budget_exceeded_count += 1
        elif co.kind == "yes":
            report.yes += 1
        else:
            report.no += 1
        if on_case is not None:
            on_case(res)
        if res.problems:
            small = shrink(res.instance, lambda c: disagrees(c, budget, depth))
            report.disagreements.append({
                "case": res.index,
                "env": res.instance.env_text(),
                "query": res.instance.query_text(),
                "verdicts": {k: verdict_to_json(v) for k, v in res.verdicts.items()},
                "problems": res.problems,
                "minimized": {"env": small.env_text(), "query": small.query_text()},
            })
