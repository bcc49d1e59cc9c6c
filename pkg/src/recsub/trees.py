"""Finite approximations of the infinite trees denoted by types.

A type's tree is what remains after unrolling every ``rec`` forever.  Only
quantifiers bind in a tree, so variable leaves carry the number of
quantifier nodes between the leaf and its binder.  Trees are hash-consed:
structurally equal nodes are the same object, which keeps the deep, highly
shared approximations of recursive types cheap to build and compare.

``oracle_check`` reads the subtyping rules at a fixed depth and is the
ground truth the two engines are tested against.
"""

from __future__ import annotations

import threading
import weakref
from dataclasses import dataclass
from typing import Any

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
    shift_indices,
)
from .verdict import No, OracleResult, Path, YesToDepth

_table: weakref.WeakValueDictionary = weakref.WeakValueDictionary()
_lock = threading.Lock()


class TreeApprox:
    __slots__ = ("_key", "_hash", "__weakref__")

    def __new__(cls, *args: Any) -> Any:
        key = (cls, *args)
        with _lock:
            node = _table.get(key)
            if node is None:
                node = object.__new__(cls)
                node._key = key
                node._hash = hash(key)
                _table[key] = node
        return node

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        return self is other

    def __reduce__(self):
        return (type(self), self._key[1:])


class Cut(TreeApprox):
    __slots__ = ()
    __match_args__ = ()

    def __repr__(self) -> str:
        return "Cut()"


class VarNode(TreeApprox):
    __slots__ = ()
    __match_args__ = ("dist",)

    @property
    def dist(self) -> int:
        return self._key[1]

    def __repr__(self) -> str:
        return f"VarNode({self.dist})"


class FreeNode(TreeApprox):
    __slots__ = ()
    __match_args__ = ("name",)

    @property
    def name(self) -> str:
        return self._key[1]

    def __repr__(self) -> str:
        return f"FreeNode({self.name!r})"


class FunNode(TreeApprox):
    __slots__ = ()
    __match_args__ = ("left", "right")

    @property
    def left(self) -> TreeApprox:
        return self._key[1]

    @property
    def right(self) -> TreeApprox:
        return self._key[2]

    def __repr__(self) -> str:
        return f"FunNode({self.left!r}, {self.right!r})"


class ForallNode(TreeApprox):
    __slots__ = ()
    __match_args__ = ("bound", "body")

    @property
    def bound(self) -> TreeApprox:
        return self._key[1]

    @property
    def body(self) -> TreeApprox:
        return self._key[2]

    def __repr__(self) -> str:
        return f"ForallNode({self.bound!r}, {self.body!r})"


CUT = Cut()


def treeof(t: TypeExpr, d: int) -> TreeApprox:
    """The depth-``d`` approximation of the tree of ``t``.

    A node survives when it sits at depth < ``d``; the root is at depth 0.
    """
    memo: dict[tuple[TypeExpr, int], TreeApprox] = {}

    def go(t: TypeExpr, d: int) -> TreeApprox:
        if d == 0:
            return CUT
        key = (t, d)
        hit = memo.get(key)
        if hit is not None:
            return hit
        h = head_normalize(t)
        match h:
            case FreeVar(name):
                out: TreeApprox = FreeNode(name)
            case Var(i):
                out = VarNode(i)
            case Fun(dom, cod):
                out = FunNode(go(dom, d - 1), go(cod, d - 1))
            case Forall(bound, body):
                out = ForallNode(go(bound, d - 1), go(body, d - 1))
            case _:
                raise TypeError(f"not a core type: {h!r}")
        memo[key] = out
        return out

    return go(t, d)


def truncate(tr: TreeApprox, d: int) -> TreeApprox:
    memo: dict[tuple[TreeApprox, int], TreeApprox] = {}

    def go(tr: TreeApprox, d: int) -> TreeApprox:
        if d == 0:
            return CUT
        key = (tr, d)
        if key in memo:
            return memo[key]
        match tr:
            case FunNode(left, right):
                out: TreeApprox = FunNode(go(left, d - 1), go(right, d - 1))
            case ForallNode(bound, body):
                out = ForallNode(go(bound, d - 1), go(body, d - 1))
            case _:
                out = tr
        memo[key] = out
        return out

    return go(tr, d)


def is_prefix_of(t1: TreeApprox, t2: TreeApprox) -> bool:
    """True iff ``t1`` is ``t2`` with some subtrees replaced by ``Cut``."""
    seen: set[tuple[TreeApprox, TreeApprox]] = set()

    def go(a: TreeApprox, b: TreeApprox) -> bool:
        if a is CUT or a is b:
            return True
        if (a, b) in seen:
            return True
        seen.add((a, b))
        match a, b:
            case FunNode(l1, r1), FunNode(l2, r2):
                return go(l1, l2) and go(r1, r2)
            case ForallNode(b1, d1), ForallNode(b2, d2):
                return go(b1, b2) and go(d1, d2)
        return False

    return go(t1, t2)


def tree_size(tr: TreeApprox) -> int:
    """Number of nodes of the fully expanded (unshared) tree."""
    memo: dict[TreeApprox, int] = {}

    def go(tr: TreeApprox) -> int:
        if tr in memo:
            return memo[tr]
        match tr:
            case FunNode(l, r) | ForallNode(l, r):
                n = 1 + go(l) + go(r)
            case _:
                n = 1
        memo[tr] = n
        return n

    return go(tr)


def path_valid(tr: TreeApprox, path: Path) -> bool:
    for step in path:
        match tr, step:
            case FunNode(l, _), "L":
                tr = l
            case FunNode(_, r), "R":
                tr = r
            case ForallNode(b, _), "B":
                tr = b
            case ForallNode(_, d), "D":
                tr = d
            case _:
                return False
    return True


# --- depth-bounded oracle -------------------------------------------------


@dataclass(frozen=True)
class BinderEntry:
    """A quantifier passed while checking.

    ``bound`` is expressed in the context right after the quantifier, so its
    index 0 is the quantifier itself; ``depth_at_bind`` is that context's depth.
    """

    bound: TypeExpr
    depth_at_bind: int


BinderStack = tuple[BinderEntry, ...]


def describe_head(t: TypeExpr) -> str:
    match t:
        case Var(i):
            return f"Var({i})"
        case FreeVar(name):
            return name
        case Fun():
            return "arrow"
        case Forall():
            return "forall"
    return type(t).__name__


def promote(env: GlobalEnv, stack: BinderStack, t: TypeExpr) -> TypeExpr | None:
    """The bound of variable ``t`` moved into the current context, or None."""
    match t:
        case Var(i):
            entry = stack[len(stack) - 1 - i]
            return shift_indices(entry.bound, 0, len(stack) - entry.depth_at_bind)
        case FreeVar(name) if name in env:
            return env.bound_of(name)
    return None


def _live_mask(stack: BinderStack, l: TypeExpr, r: TypeExpr) -> tuple:
    # Entries no variable can reach never influence the answer.
    n = len(stack)
    todo = [n - 1 - i for i in free_indices(l) | free_indices(r)]
    live: set[int] = set()
    while todo:
        p = todo.pop()
        if p in live:
            continue
        live.add(p)
        e = stack[p]
        top = e.depth_at_bind - 1
        todo.extend(top - j for j in free_indices(e.bound))
    return tuple(e if p in live else None for p, e in enumerate(stack))


def oracle_check(
    env: GlobalEnv,
    stack: BinderStack,
    l: TypeExpr,
    r: TypeExpr,
    rel: Relation,
    d: int,
    fuel: int | None = None,
) -> OracleResult:
    """Check ``l`` against ``r`` on trees truncated at depth ``d``.

    Every constructor costs one unit of depth; promoting a variable to its
    bound costs one unit of ``fuel`` instead, which is refilled after each
    structural step.
    """
    memo: dict[tuple, OracleResult] = {}
    yes = YesToDepth(d)

    def go(stack: BinderStack, l: TypeExpr, r: TypeExpr, rel: Relation, d: int,
           path: Path, fuel: int | None) -> OracleResult:
        if d == 0:
            return yes
        if fuel is None:
            fuel = len(stack) + len(env) + 1
        key = (_live_mask(stack, l, r), l, r, rel, d, fuel)
        hit = memo.get(key)
        if hit is not None:
            return _reroot(hit, path)
        res = step(stack, l, r, rel, d, path, fuel)
        memo[key] = _unroot(res, len(path))
        return res

    def step(stack, l, r, rel, d, path, fuel) -> OracleResult:
        l = head_normalize(l)
        r = head_normalize(r)
        promoted: list[str] = []
        while True:
            match l, r:
                case FreeVar(a), FreeVar(b) if a == b:
                    return yes
                case Var(i), Var(j) if i == j:
                    return yes
                case Fun(ld, lc), Fun(rd, rc):
                    if rel is Relation.SUB:
                        first = go(stack, rd, ld, rel, d - 1, path + ("L",), None)
                    else:
                        first = go(stack, ld, rd, rel, d - 1, path + ("L",), None)
                    if isinstance(first, No):
                        return first
                    return go(stack, lc, rc, rel, d - 1, path + ("R",), None)
                case Forall(lb, lbody), Forall(rb, rbody):
                    inner = stack + (BinderEntry(lb, len(stack) + 1),)
                    first = go(inner, lb, rb, Relation.EQ, d - 1, path + ("B",), None)
                    if isinstance(first, No):
                        return first
                    return go(inner, lbody, rbody, rel, d - 1, path + ("D",), None)
            if rel is Relation.SUB and isinstance(l, (Var, FreeVar)):
                bound = promote(env, stack, l)
                if bound is not None:
                    if fuel == 0:
                        return No(path, f"promotion fuel exhausted ({_via(promoted)})")
                    promoted.append(describe_head(l))
                    fuel -= 1
                    l = head_normalize(bound)
                    continue
            clash = f"{describe_head(l)} vs {describe_head(r)}"
            if promoted:
                clash += f" (after promoting {_via(promoted)})"
            return No(path, clash)

    return go(stack, l, r, rel, d, (), fuel)


def _via(promoted: list[str]) -> str:
    return " -> ".join(promoted)


def _unroot(res: OracleResult, prefix: int) -> OracleResult:
    if isinstance(res, No):
        return No(res.path[prefix:], res.clash)
    return res


def _reroot(res: OracleResult, path: Path) -> OracleResult:
    if isinstance(res, No):
        return No(path + res.path, res.clash)
    return res


# --- rendering ------------------------------------------------------------

CUT_TEXT = "‹cut›"


def render_tree(tr: TreeApprox) -> str:
    """Type-like text with every nested arrow parenthesized.

    The quantifier ``k`` levels down binds the name ``t<k>``.
    """

    def go(tr: TreeApprox, depth: int) -> str:
        match tr:
            case Cut():
                return CUT_TEXT
            case VarNode(dist):
                k = depth - 1 - dist
                return f"t{k}" if k >= 0 else f"^{-k}"
            case FreeNode(name):
                return name
            case FunNode(left, right):
                lhs = go(left, depth)
                if isinstance(left, (FunNode, ForallNode)):
                    lhs = f"({lhs})"
                rhs = go(right, depth)
                if isinstance(right, FunNode):
                    rhs = f"({rhs})"
                return f"{lhs} -> {rhs}"
            case ForallNode(bound, body):
                b = go(bound, depth + 1)
                if isinstance(bound, (FunNode, ForallNode)):
                    b = f"({b})"
                return f"forall t{depth} <= {b}. {go(body, depth + 1)}"
        raise TypeError(f"not a tree: {tr!r}")

    return go(tr, 0)


def tree_to_json(tr: TreeApprox) -> dict:
    match tr:
        case Cut():
            return {"node": "cut"}
        case VarNode(dist):
            return {"node": "var", "dist": dist}
        case FreeNode(name):
            return {"node": "free", "name": name}
        case FunNode(left, right):
            return {"node": "fun", "left": tree_to_json(left), "right": tree_to_json(right)}
        case ForallNode(bound, body):
            return {"node": "forall", "bound": tree_to_json(bound), "body": tree_to_json(body)}
    raise TypeError(f"not a tree: {tr!r}")


def tree_from_json(data: dict) -> TreeApprox:
    match data["node"]:
        case "cut":
            return CUT
        case "var":
            return VarNode(data["dist"])
        case "free":
            return FreeNode(data["name"])
        case "fun":
            return FunNode(tree_from_json(data["left"]), tree_from_json(data["right"]))
        case "forall":
            return ForallNode(tree_from_json(data["bound"]), tree_from_json(data["body"]))
    raise ValueError(f"unknown tree node {data['node']!r}")
