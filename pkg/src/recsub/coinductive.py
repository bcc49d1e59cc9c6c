"""Greatest-fixed-point decision procedure on type syntax.

Every assertion has exactly one applicable rule, and all premises of a rule
must hold, so a query fails iff a clash is reachable from it.  The search is
a depth-first walk over canonical assertions: an assertion met again while
still on the current branch is assumed (coinduction), one already finished
is looked up in the memo.  Promotion chains are followed inside a single
assertion so that a cycle of promotions alone can never be assumed true.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Iterable

from .parser import Query, QueryFile
from .syntax import (
    Forall,
    FreeVar,
    Fun,
    GlobalEnv,
    Relation,
    TypeExpr,
    Var,
    free_indices,
    head_normalize,
    map_free,
    shift_indices,
    to_core,
    well_formed,
)
from .trees import describe_head
from .verdict import BudgetExceeded, No, Path, Verdict, Yes

DEFAULT_BUDGET = 10**6

# Entry p of a stack is the bound of the p-th quantifier passed, written in
# the context just inside that quantifier (so it sees p + 1 binders).
Stack = tuple[TypeExpr, ...]


@dataclass(frozen=True)
class Assertion:
    stack: Stack
    left: TypeExpr
    right: TypeExpr
    rel: Relation

    def __str__(self) -> str:
        from .parser import print_type
        from .syntax import from_core

        hints = [f"t{len(self.stack) - 1 - i}" for i in range(len(self.stack))]
        ctx = ", ".join(
            f"t{p} <= {print_type(from_core(b, hints[len(self.stack) - 1 - p:]))}"
            for p, b in enumerate(self.stack)
        )
        lhs = print_type(from_core(self.left, hints))
        rhs = print_type(from_core(self.right, hints))
        return f"{ctx} |- {lhs} {self.rel.symbol} {rhs}" if ctx else f"|- {lhs} {self.rel.symbol} {rhs}"


def canonicalize(a: Assertion) -> Assertion:
    """Drop stack entries no variable can reach and renumber the rest densely."""
    n = len(a.stack)
    todo = [n - 1 - i for i in free_indices(a.left) | free_indices(a.right)]
    live: set[int] = set()
    while todo:
        p = todo.pop()
        if p in live:
            continue
        live.add(p)
        todo.extend(p - j for j in free_indices(a.stack[p]))
    if len(live) == n:
        return a
    kept = sorted(live)
    newpos = {p: q for q, p in enumerate(kept)}
    m = len(kept)
    stack = tuple(
        map_free(a.stack[p], lambda j, p=p, q=q: q - newpos[p - j]) for q, p in enumerate(kept)
    )
    move = lambda i: m - 1 - newpos[n - 1 - i]  # noqa: E731
    return Assertion(stack, map_free(a.left, move), map_free(a.right, move), a.rel)


def _promote(env: GlobalEnv, stack: Stack, t: TypeExpr) -> TypeExpr | None:
    match t:
        case Var(i):
            p = len(stack) - 1 - i
            return shift_indices(stack[p], 0, len(stack) - (p + 1))
        case FreeVar(name) if name in env:
            return env.bound_of(name)
    return None


@dataclass
class _Expansion:
    rule: str
    children: list[tuple[str, Assertion]] = field(default_factory=list)
    clash: str | None = None
    promoted: list[str] = field(default_factory=list)


def _expand(env: GlobalEnv, a: Assertion) -> _Expansion:
    stack, l, r, rel = a.stack, a.left, a.right, a.rel
    promoted: list[str] = []
    fuel = len(stack) + len(env) + 1
    while True:
        match l, r:
            case FreeVar(x), FreeVar(y) if x == y:
                return _Expansion("free", promoted=promoted)
            case Var(i), Var(j) if i == j:
                return _Expansion("var", promoted=promoted)
            case Fun(ld, lc), Fun(rd, rc):
                dom = (rd, ld) if rel is Relation.SUB else (ld, rd)
                return _Expansion("fun", [
                    ("L", _make(stack, *dom, rel)),
                    ("R", _make(stack, lc, rc, rel)),
                ], promoted=promoted)
            case Forall(lb, lbody), Forall(rb, rbody):
                inner = stack + (lb,)
                return _Expansion("all", [
                    ("B", _make(inner, lb, rb, Relation.EQ)),
                    ("D", _make(inner, lbody, rbody, rel)),
                ], promoted=promoted)
        if rel is Relation.SUB and isinstance(l, (Var, FreeVar)):
            bound = _promote(env, stack, l)
            if bound is not None:
                if fuel == 0:
                    return _Expansion("promote", clash="promotion fuel exhausted", promoted=promoted)
                fuel -= 1
                promoted.append(describe_head(l))
                l = head_normalize(bound)
                continue
        clash = f"{describe_head(l)} vs {describe_head(r)}"
        if promoted:
            clash += f" (after promoting {' -> '.join(promoted)})"
        return _Expansion("clash", clash=clash, promoted=promoted)


def _make(stack: Stack, l: TypeExpr, r: TypeExpr, rel: Relation) -> Assertion:
    return canonicalize(Assertion(stack, head_normalize(l), head_normalize(r), rel))


@dataclass(frozen=True)
class TraceStep:
    depth: int
    path: Path
    assertion: str
    rule: str
    promotions: tuple[str, ...] = ()
    clash: str | None = None

    def __str__(self) -> str:
        step = self.path[-1] if self.path else "·"
        extra = f" [promoted {' -> '.join(self.promotions)}]" if self.promotions else ""
        tail = f" !! {self.clash}" if self.clash else ""
        return f"{'  ' * self.depth}{step} {self.rule}{extra}: {self.assertion}{tail}"


_OPEN, _DONE = 0, 1


def _search(env: GlobalEnv, root: Assertion, budget: int,
            trace: list[TraceStep] | None = None) -> Verdict:
    status: dict[Assertion, int] = {root: _OPEN}
    promotions = 0

    def expand(a: Assertion, path: Path) -> _Expansion:
        nonlocal promotions
        ex = _expand(env, a)
        promotions += len(ex.promoted)
        if trace is not None:
            trace.append(TraceStep(len(path), path, str(a), ex.rule, tuple(ex.promoted), ex.clash))
        return ex

    ex = expand(root, ())
    if ex.clash is not None:
        return No((), ex.clash, 1, promotions)
    # Frames: (assertion, children, next child index, path to assertion).
    frames: list[list] = [[root, ex.children, 0, ()]]
    while frames:
        frame = frames[-1]
        a, children, k, path = frame
        if k == len(children):
            status[a] = _DONE
            frames.pop()
            continue
        frame[2] = k + 1
        step, child = children[k]
        child_path = path + (step,)
        seen = status.get(child)
        if seen is not None:
            if trace is not None:
                rule = "assumed (coinduction)" if seen == _OPEN else "memo"
                trace.append(TraceStep(len(child_path), child_path, str(child), rule))
            continue
        if len(status) >= budget:
            return BudgetExceeded(len(status) + 1)
        status[child] = _OPEN
        ex = expand(child, child_path)
        if ex.clash is not None:
            return No(child_path, ex.clash, len(status), promotions)
        frames.append([child, ex.children, 0, child_path])
    return Yes(len(status), promotions)


def _root(l: TypeExpr, r: TypeExpr, rel: Relation) -> Assertion:
    return _make((), l, r, rel)


def check(env: GlobalEnv, l: TypeExpr, r: TypeExpr, rel: Relation,
          budget: int = DEFAULT_BUDGET) -> Verdict:
    """Decide ``l <= r`` (``rel`` SUB) or ``l == r`` (``rel`` EQ) under ``env``."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    return _search(env, _root(l, r, rel), budget)


def explain(env: GlobalEnv, l: TypeExpr, r: TypeExpr, rel: Relation,
            budget: int = DEFAULT_BUDGET) -> tuple[Verdict, list[TraceStep]]:
    trace: list[TraceStep] = []
    verdict = _search(env, _root(l, r, rel), budget, trace)
    return verdict, trace


class Checker:
    """A reusable checker bound to one environment.

    Query results are cached under the canonical root assertion; the cache
    is shared between threads and guarded by a lock.
    """

    def __init__(self, env: GlobalEnv, budget: int = DEFAULT_BUDGET):
        self.env = env
        self.budget = budget
        self._memo: dict[Assertion, Verdict] = {}
        self._lock = threading.Lock()

    def check(self, l: TypeExpr, r: TypeExpr, rel: Relation) -> Verdict:
        root = _root(l, r, rel)
        with self._lock:
            hit = self._memo.get(root)
        if hit is not None:
            return hit
        verdict = _search(self.env, root, self.budget)
        with self._lock:
            return self._memo.setdefault(root, verdict)


# --- query files ----------------------------------------------------------


@dataclass(frozen=True)
class QueryResult:
    query: Query
    verdict: Verdict
    agrees: bool | None


def env_for_file(qf: QueryFile, strict: bool = True) -> GlobalEnv:
    """The environment of a query file.

    In non-strict mode every undeclared identifier used by a query becomes an
    unbounded constant appended to the environment.
    """
    env = GlobalEnv.from_surface(qf.decls)
    if strict:
        return env
    extra: list[str] = []
    for q in qf.queries:
        for side in (q.left, q.right):
            for name in _surface_frees(side):
                if name not in env and name not in extra:
                    extra.append(name)
    for name in extra:
        env = env.extend(name)
    return env


def _surface_frees(s) -> Iterable[str]:
    from .syntax import SFun, SForall, SRec, SVar

    def go(s, bound: frozenset):
        match s:
            case SVar(name):
                if name not in bound:
                    yield name
            case SFun(dom, cod):
                yield from go(dom, bound)
                yield from go(cod, bound)
            case SForall(b, bnd, body):
                yield from go(bnd, bound | {b})
                yield from go(body, bound | {b})
            case SRec(b, body):
                yield from go(body, bound | {b})

    return go(s, frozenset())


def core_query(env: GlobalEnv, q: Query) -> tuple[TypeExpr, TypeExpr]:
    """Convert both sides of a query to checked core types."""
    sides = []
    for s in (q.left, q.right):
        t = to_core(s, env.names)
        well_formed(t, env)
        sides.append(t)
    return sides[0], sides[1]


def check_query_file(qf: QueryFile, budget: int = DEFAULT_BUDGET,
                     strict: bool = True) -> list[QueryResult]:
    env = env_for_file(qf, strict)
    checker = Checker(env, budget)
    results = []
    for q in qf.queries:
        l, r = core_query(env, q)
        v = checker.check(l, r, q.relation)
        agrees = None if q.expected is None or isinstance(v, BudgetExceeded) else (
            (v.kind == "yes") == q.expected
        )
        results.append(QueryResult(q, v, agrees))
    return results

