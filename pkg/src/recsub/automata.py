"""Tree automata for types and the product construction deciding subtyping.

``automataof`` builds one state per syntactic occurrence.  A ``rec`` binder
gets no state of its own: occurrences of its variable become back-edges to
the state of its body.  When such a back-edge leaves ``k`` quantifiers
behind, it is routed through ``k`` shift states, so that the bound-variable
indices read along any run agree with the indices eager unrolling would
produce.

During the product walk a configuration carries a *scope*: the tuple of
correspondence entries that bound-variable index 0, 1, ... currently
resolve to.  A quantifier pushes an entry, a shift state drops the
innermost one.  Entries are created when two quantifiers are entered in
lockstep, and remember where the left quantifier's bound starts, which is
where promotion jumps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from .syntax import Forall, FreeVar, Fun, GlobalEnv, Rec, Relation, TypeExpr, Var
from .trees import CUT, ForallNode, FreeNode, FunNode, TreeApprox, VarNode
from .verdict import BudgetExceeded, No, Path, Verdict, Yes

FUN, FORALL, SHIFT, BVAR, FREE = "fun", "forall", "shift", "bvar", "free"
_STEPS = {FUN: ("L", "R"), FORALL: ("B", "D"), SHIFT: ("S",), BVAR: (), FREE: ()}
_ALIAS = "alias"


class UnresolvableVar(Exception):
    pass


class InvalidRun(Exception):
    pass


@dataclass(frozen=True)
class TreeAutomaton:
    kinds: tuple[str, ...]
    args: tuple[object, ...]  # BoundVar index or FreeVar name; None otherwise
    succ: tuple[tuple[int, ...], ...]
    start: int = 0

    def __len__(self) -> int:
        return len(self.kinds)

    def label(self, q: int) -> str:
        k = self.kinds[q]
        if k == BVAR:
            return f"BoundVar({self.args[q]})"
        if k == FREE:
            return f"FreeVar({self.args[q]})"
        return k.capitalize()

    @property
    def shift_count(self) -> int:
        return self.kinds.count(SHIFT)


def automataof(t: TypeExpr) -> TreeAutomaton:
    kinds: list[str] = []
    args: list[object] = []
    succ: list[list[int]] = []

    def new(kind: str, arg: object = None) -> int:
        kinds.append(kind)
        args.append(arg)
        succ.append([])
        return len(kinds) - 1

    # ctx is innermost-first: None for a quantifier, the alias state for a rec.
    def build(t: TypeExpr, ctx: tuple[int | None, ...]) -> int:
        match t:
            case FreeVar(name):
                return new(FREE, name)
            case Var(i):
                crossed = sum(1 for b in ctx[:i] if b is None)
                target = ctx[i]
                if target is None:
                    return new(BVAR, crossed)
                chain = [new(SHIFT) for _ in range(crossed)]
                for a, b in zip(chain, chain[1:] + [target]):
                    succ[a].append(b)
                return chain[0] if chain else target
            case Fun(dom, cod):
                q = new(FUN)
                succ[q] = [build(dom, ctx), build(cod, ctx)]
                return q
            case Forall(bound, body):
                q = new(FORALL)
                inner = (None,) + ctx
                succ[q] = [build(bound, inner), build(body, inner)]
                return q
            case Rec(body):
                q = new(_ALIAS)
                succ[q] = [build(body, (q,) + ctx)]
                return q
        raise TypeError(f"not a core type: {t!r}")

    root = build(t, ())

    def resolve(q: int) -> int:
        seen = set()
        while kinds[q] == _ALIAS:
            if q in seen:
                raise ValueError("non-contractive recursive type")
            seen.add(q)
            q = succ[q][0]
        return q

    real = [q for q in range(len(kinds)) if kinds[q] != _ALIAS]
    renum = {q: i for i, q in enumerate(real)}
    return TreeAutomaton(
        kinds=tuple(kinds[q] for q in real),
        args=tuple(args[q] for q in real),
        succ=tuple(tuple(renum[resolve(s)] for s in succ[q]) for q in real),
        start=renum[resolve(root)],
    )


def scope_uses(a: TreeAutomaton) -> list[frozenset[int]]:
    """For each state, the scope positions some run from it can consult."""
    uses: list[frozenset[int]] = [frozenset()] * len(a)
    changed = True
    rounds = 0
    while changed:
        changed = False
        rounds += 1
        if rounds > 4 * len(a) + 8:
            raise ValueError("scope analysis does not converge; malformed shift structure")
        for q in reversed(range(len(a))):
            k = a.kinds[q]
            if k == BVAR:
                u = frozenset({a.args[q]})
            elif k == FUN:
                u = uses[a.succ[q][0]] | uses[a.succ[q][1]]
            elif k == FORALL:
                u = frozenset(j - 1 for j in uses[a.succ[q][0]] | uses[a.succ[q][1]] if j > 0)
            elif k == SHIFT:
                u = frozenset(j + 1 for j in uses[a.succ[q][0]])
            else:
                u = frozenset()
            if u != uses[q]:
                uses[q] = u
                changed = True
    return uses


def _needs(a: TreeAutomaton) -> list[int]:
    return [max(u) + 1 if u else 0 for u in scope_uses(a)]


# --- runs and generation --------------------------------------------------


def resolve_binder(a: TreeAutomaton, run: Sequence[int], var_pos: int) -> int | tuple[str, int]:
    """Position in ``run`` of the quantifier binding the variable at ``var_pos``.

    Returns ``("ESCAPES", c)`` when the walk runs off the start of the run.
    """
    if not run or run[0] != a.start:
        raise InvalidRun("run must begin at the start state")
    for x, y in zip(run, run[1:]):
        if y not in a.succ[x]:
            raise InvalidRun(f"no transition {x} -> {y}")
    if not 0 <= var_pos < len(run) or a.kinds[run[var_pos]] != BVAR:
        raise InvalidRun("var_pos does not hold a bound-variable state")
    c = a.args[run[var_pos]]
    for pos in range(var_pos - 1, -1, -1):
        k = a.kinds[run[pos]]
        if k == FORALL:
            if c == 0:
                return pos
            c -= 1
        elif k == SHIFT:
            c += 1
    return ("ESCAPES", c)


def generate(a: TreeAutomaton, d: int) -> TreeApprox:
    """The depth-``d`` tree generated by ``a``.  Shift states are invisible."""
    needs = _needs(a)
    memo: dict[tuple[int, tuple[int, ...], int], TreeApprox] = {}

    # dists[i] is the number of quantifiers between here and the binder of index i.
    def go(q: int, dists: tuple[int, ...], d: int) -> TreeApprox:
        # The scope may already be trimmed to what is still consulted, so a
        # shift past its end is harmless; true escapes surface at BoundVar.
        while a.kinds[q] == SHIFT:
            dists = dists[1:]
            q = a.succ[q][0]
        if d == 0:
            return CUT
        dists = dists[: needs[q]]
        key = (q, dists, d)
        hit = memo.get(key)
        if hit is not None:
            return hit
        k = a.kinds[q]
        if k == FREE:
            out: TreeApprox = FreeNode(a.args[q])
        elif k == BVAR:
            i = a.args[q]
            if i >= len(dists):
                raise UnresolvableVar(f"BoundVar({i}) escapes at state {q}")
            out = VarNode(dists[i])
        elif k == FUN:
            out = FunNode(go(a.succ[q][0], dists, d - 1), go(a.succ[q][1], dists, d - 1))
        else:
            inner = (0,) + tuple(x + 1 for x in dists)
            out = ForallNode(go(a.succ[q][0], inner, d - 1), go(a.succ[q][1], inner, d - 1))
        memo[key] = out
        return out

    return go(a.start, (), d)


# --- product construction -------------------------------------------------


class _Entry:
    """A pair of quantifiers entered in lockstep; ``bound`` is the left bound."""

    __slots__ = ("bound",)

    def __init__(self) -> None:
        self.bound: Config | None = None


@dataclass(frozen=True)
class Config:
    aut: int  # index into the automata of the current product
    state: int
    scope: tuple[_Entry, ...]


@dataclass(frozen=True)
class ProductGoal:
    left: Config
    right: Config
    rel: Relation


class _Product:
    def __init__(self, env: GlobalEnv, a1: TreeAutomaton, a2: TreeAutomaton):
        self.env = env
        self.auts: list[TreeAutomaton] = [a1, a2]
        self.uses: list[list[frozenset[int]]] = [scope_uses(a1), scope_uses(a2)]
        self.needs: list[list[int]] = [_needs(a1), _needs(a2)]
        self.env_aut: dict[str, int] = {}

    def env_config(self, name: str) -> Config | None:
        bound = self.env.bound_of(name)
        if bound is None:
            return None
        idx = self.env_aut.get(name)
        if idx is None:
            aut = automataof(bound)
            idx = len(self.auts)
            self.auts.append(aut)
            self.uses.append(scope_uses(aut))
            self.needs.append(_needs(aut))
            self.env_aut[name] = idx
        return self.norm(Config(idx, self.auts[idx].start, ()))

    def norm(self, c: Config) -> Config:
        aut = self.auts[c.aut]
        q, scope = c.state, c.scope
        while aut.kinds[q] == SHIFT:
            scope = scope[1:]
            q = aut.succ[q][0]
        scope = scope[: self.needs[c.aut][q]]
        if q == c.state and scope is c.scope:
            return c
        return Config(c.aut, q, scope)

    def key(self, g: ProductGoal) -> tuple[tuple, int]:
        """A memo key invariant under renaming of correspondence entries."""
        ids: dict[int, int] = {}
        order: list[_Entry] = []

        def scope_key(c: Config) -> tuple:
            used = self.uses[c.aut][c.state]
            out = []
            for j, e in enumerate(c.scope):
                if j not in used:
                    out.append(-1)
                    continue
                n = ids.get(id(e))
                if n is None:
                    n = ids[id(e)] = len(order)
                    order.append(e)
                out.append(n)
            return tuple(out)

        lk = (g.left.aut, g.left.state, scope_key(g.left))
        rk = (g.right.aut, g.right.state, scope_key(g.right))
        bounds = []
        i = 0
        while i < len(order):
            b = order[i].bound
            bounds.append((b.aut, b.state, scope_key(b)) if g.rel is Relation.SUB else None)
            i += 1
        return (g.rel, lk, rk, tuple(bounds)), len(order)

    def expand(self, g: ProductGoal, fuel: int):
        """Returns (children, clash, promotions)."""
        l, r, rel = g.left, g.right, g.rel
        la, ra = self.auts[l.aut], self.auts[r.aut]
        promoted: list[str] = []
        while True:
            lk, rk = la.kinds[l.state], ra.kinds[r.state]
            if lk == FREE and rk == FREE and la.args[l.state] == ra.args[r.state]:
                return [], None, promoted
            if lk == BVAR and rk == BVAR and (
                l.scope[la.args[l.state]] is r.scope[ra.args[r.state]]
            ):
                return [], None, promoted
            if lk == FUN and rk == FUN:
                ll, lr = (self.norm(Config(l.aut, s, l.scope)) for s in la.succ[l.state])
                rl, rr = (self.norm(Config(r.aut, s, r.scope)) for s in ra.succ[r.state])
                dom = ProductGoal(rl, ll, rel) if rel is Relation.SUB else ProductGoal(ll, rl, rel)
                return [("L", dom), ("R", ProductGoal(lr, rr, rel))], None, promoted
            if lk == FORALL and rk == FORALL:
                e = _Entry()
                lscope = (e,) + l.scope
                rscope = (e,) + r.scope
                lb, ld = (self.norm(Config(l.aut, s, lscope)) for s in la.succ[l.state])
                rb, rd = (self.norm(Config(r.aut, s, rscope)) for s in ra.succ[r.state])
                e.bound = lb
                return [
                    ("B", ProductGoal(lb, rb, Relation.EQ)),
                    ("D", ProductGoal(ld, rd, rel)),
                ], None, promoted
            if rel is Relation.SUB and lk in (BVAR, FREE):
                if lk == BVAR:
                    nxt = l.scope[la.args[l.state]].bound
                    name = f"Var({la.args[l.state]})"
                else:
                    name = la.args[l.state]
                    nxt = self.env_config(name) if name in self.env else None
                if nxt is not None:
                    if fuel == 0:
                        return [], "promotion fuel exhausted", promoted
                    fuel -= 1
                    promoted.append(name)
                    l = nxt
                    la = self.auts[l.aut]
                    continue
            clash = f"{_head(la, l.state)} vs {_head(ra, r.state)}"
            if promoted:
                clash += f" (after promoting {' -> '.join(promoted)})"
            return [], clash, promoted


def _head(a: TreeAutomaton, q: int) -> str:
    k = a.kinds[q]
    if k == FREE:
        return str(a.args[q])
    if k == BVAR:
        return f"Var({a.args[q]})"
    return "arrow" if k == FUN else "forall"


def subtype_automata(env: GlobalEnv, a1: TreeAutomaton, a2: TreeAutomaton,
                     rel: Relation, budget: int = 10**6,
                     stats: dict | None = None) -> Verdict:
    """Decide the relation between the trees generated by ``a1`` and ``a2``.

    Goals are explored depth first; a goal whose key was already created is
    accepted (greatest fixed point).  ``stats``, when given, receives the
    number of goals created and the largest expansion count of any key.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    prod = _Product(env, a1, a2)
    root = ProductGoal(prod.norm(Config(0, a1.start, ())), prod.norm(Config(1, a2.start, ())), rel)
    seen: set[tuple] = set()
    promotions = 0
    expansions = 0

    def visit(g: ProductGoal):
        nonlocal promotions, expansions
        key, live = prod.key(g)
        if key in seen:
            return None
        if len(seen) >= budget:
            raise _Budget()
        seen.add(key)
        expansions += 1
        children, clash, promoted = prod.expand(g, live + len(env) + 1)
        promotions += len(promoted)
        return children, clash

    def done(v: Verdict) -> Verdict:
        if stats is not None:
            stats.update(goals=len(seen), expansions=expansions, promotions=promotions)
        return v

    try:
        children, clash = visit(root)
        if clash is not None:
            return done(No((), clash, len(seen), promotions))
        frames: list[list] = [[children, 0, ()]]
        while frames:
            frame = frames[-1]
            children, k, path = frame
            if k == len(children):
                frames.pop()
                continue
            frame[1] = k + 1
            step, child = children[k]
            out = visit(child)
            if out is None:
                continue
            grand, clash = out
            child_path: Path = path + (step,)
            if clash is not None:
                return done(No(child_path, clash, len(seen), promotions))
            frames.append([grand, 0, child_path])
    except _Budget:
        return done(BudgetExceeded(len(seen) + 1))
    return done(Yes(len(seen), promotions))


class _Budget(Exception):
    pass


# --- rendering ------------------------------------------------------------


def dump_automaton(a: TreeAutomaton) -> dict:
    return {
        "start": a.start,
        "states": [
            {
                "id": q,
                "label": a.label(q),
                "succ": dict(zip(_STEPS[a.kinds[q]], a.succ[q])),
            }
            for q in range(len(a))
        ],
    }


def automaton_text(a: TreeAutomaton) -> str:
    lines = [f"start q{a.start}"]
    for q in range(len(a)):
        edges = " ".join(f"{s}->q{t}" for s, t in zip(_STEPS[a.kinds[q]], a.succ[q]))
        lines.append(f"q{q} {a.label(q)}" + (f" {edges}" if edges else ""))
    return "\n".join(lines)


def automaton_json(a: TreeAutomaton) -> str:
    return json.dumps(dump_automaton(a), indent=2, sort_keys=True)


def automaton_dot(a: TreeAutomaton) -> str:
    lines = ["digraph automaton {", "  rankdir=TB;", "  start [shape=point];",
             f"  start -> q{a.start};"]
    for q in range(len(a)):
        shape = "diamond" if a.kinds[q] == SHIFT else "ellipse"
        label = a.label(q).replace('"', '\\"')
        lines.append(f'  q{q} [label="q{q}: {label}", shape={shape}];')
    for q in range(len(a)):
        for s, t in zip(_STEPS[a.kinds[q]], a.succ[q]):
            lines.append(f'  q{q} -> q{t} [label="{s}"];')
    lines.append("}")
    return "\n".join(lines)
