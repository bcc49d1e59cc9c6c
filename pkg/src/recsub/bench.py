"""Scaling benchmark for the automata engine.

Family ``F(n)``: ``m = max(1, (n - 3) // 7)`` layers, layer ``j`` being ::

    rec a_j. forall b_j <= (b_{j-1} -> A). b_j -> <layer j+1>

(the first layer's bound is plain ``A``), closed by the innermost type
``a_1 -> a_h -> b_m`` with ``h = m // 2 + 1``.  The two ``rec`` variables
in the innermost type are back-edges that cross ``m`` and ``m - h + 1``
quantifiers, so the automaton carries long shift chains.  The mutation
replaces the innermost ``b_m`` by ``A``, which is refuted only at the very
bottom of the product walk.  ``F(n)`` has size ``7m + 3 <= n`` for ``n >= 10``.
"""

from __future__ import annotations

import json
import math
import statistics
import time
from dataclasses import asdict, dataclass, field

from .automata import automataof, subtype_automata
from .syntax import Forall, FreeVar, Fun, GlobalEnv, Rec, Relation, TypeExpr, Var, size

DEFAULT_SIZES = (50, 100, 200, 400)
BENCH_ENV = GlobalEnv([("A", None)])


def family(n: int, mutated: bool = False) -> TypeExpr:
    m = max(1, (n - 3) // 7)
    h = m // 2 + 1
    # Inside the innermost type the context, innermost first, is
    # b_m, a_m, b_{m-1}, a_{m-1}, ..., b_1, a_1.
    a = lambda j: Var(2 * (m - j) + 1)  # noqa: E731
    b = lambda j: Var(2 * (m - j))  # noqa: E731
    last: TypeExpr = FreeVar("A") if mutated else b(m)
    t: TypeExpr = Fun(a(1), Fun(a(h), last))
    for j in range(m, 0, -1):
        # Inside layer j's bound, index 0 is b_j and index 2 is b_{j-1}.
        bound = FreeVar("A") if j == 1 else Fun(Var(2), FreeVar("A"))
        t = Rec(Forall(bound, Fun(Var(0), t)))
    return t


@dataclass
class BenchRow:
    n: int
    size: int
    states: int
    shift_states: int
    yes_verdict: str
    no_verdict: str
    goals: int
    seconds_yes: float
    seconds_no: float

    @property
    def seconds(self) -> float:
        return self.seconds_yes + self.seconds_no


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    exponent: float | None = None
    relation: str = "sub"

    @property
    def max_seconds(self) -> float:
        return max((max(r.seconds_yes, r.seconds_no) for r in self.rows), default=0.0)

    def to_json(self) -> str:
        return json.dumps(
            {"relation": self.relation, "exponent": self.exponent,
             "rows": [asdict(r) for r in self.rows]},
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> BenchReport:
        data = json.loads(text)
        return cls([BenchRow(**r) for r in data["rows"]], data["exponent"], data["relation"])

    def table(self) -> str:
        head = f"{'n':>5} {'size':>5} {'states':>7} {'shifts':>7} {'goals':>7} {'yes[s]':>10} {'no[s]':>10}"
        lines = [head]
        for r in self.rows:
            lines.append(
                f"{r.n:>5} {r.size:>5} {r.states:>7} {r.shift_states:>7} {r.goals:>7} "
                f"{r.seconds_yes:>10.5f} {r.seconds_no:>10.5f}"
            )
        if self.exponent is not None:
            lines.append(f"fitted exponent: {self.exponent:.3f}")
        return "\n".join(lines)


def _time(fn, min_total: float = 0.2, min_reps: int = 3) -> tuple[float, object]:
    best = math.inf
    total = 0.0
    reps = 0
    out = None
    while reps < min_reps or total < min_total:
        t0 = time.perf_counter()
        out = fn()
        dt = time.perf_counter() - t0
        best = min(best, dt)
        total += dt
        reps += 1
        if dt > 10.0:
            break
    return best, out


def fit_exponent(ns: list[int], seconds: list[float]) -> float:
    xs = [math.log(n) for n in ns]
    ys = [math.log(max(s, 1e-9)) for s in seconds]
    return statistics.linear_regression(xs, ys).slope


def run_bench(sizes=DEFAULT_SIZES, rel: Relation = Relation.SUB,
              budget: int = 10**6, min_total: float = 0.2) -> BenchReport:
    report = BenchReport(relation=rel.value)
    for n in sizes:
        t = family(n)
        u = family(n, mutated=True)
        at, au = automataof(t), automataof(u)
        stats: dict = {}
        ty, vy = _time(lambda: subtype_automata(BENCH_ENV, at, at, rel, budget), min_total)
        tn, vn = _time(lambda: subtype_automata(BENCH_ENV, at, au, rel, budget, stats), min_total)
        report.rows.append(BenchRow(
            n=n, size=size(t), states=len(at), shift_states=at.shift_count,
            yes_verdict=vy.kind, no_verdict=vn.kind, goals=stats.get("goals", 0),
            seconds_yes=ty, seconds_no=tn,
        ))
    if len(report.rows) >= 2:
        report.exponent = fit_exponent([r.n for r in report.rows], [r.seconds for r in report.rows])
    return report
