"""Core representation of second-order equirecursive types.

Two syntaxes live here. ``SurfaceType`` is the named syntax produced by the
parser; ``TypeExpr`` is the de Bruijn core every engine works on.  Core
indices count both ``Forall`` and ``Rec`` binders.  In ``Forall(bound, body)``
index 0 refers to the quantifier itself inside *both* children, which is
what lets a bound mention the variable it bounds.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence, Union


# --- surface syntax -------------------------------------------------------


@dataclass(frozen=True)
class SVar:
    name: str


@dataclass(frozen=True)
class SFun:
    dom: SurfaceType
    cod: SurfaceType


@dataclass(frozen=True)
class SForall:
    binder: str
    bound: SurfaceType
    body: SurfaceType


@dataclass(frozen=True)
class SRec:
    binder: str
    body: SurfaceType


SurfaceType = Union[SVar, SFun, SForall, SRec]


# --- core syntax ----------------------------------------------------------


@dataclass(frozen=True)
class Var:
    index: int

    def __repr__(self) -> str:
        return f"Var({self.index})"


@dataclass(frozen=True)
class FreeVar:
    name: str

    def __repr__(self) -> str:
        return f"FreeVar({self.name!r})"


@dataclass(frozen=True)
class Fun:
    dom: TypeExpr
    cod: TypeExpr


@dataclass(frozen=True)
class Forall:
    bound: TypeExpr
    body: TypeExpr


@dataclass(frozen=True)
class Rec:
    body: TypeExpr


TypeExpr = Union[Var, FreeVar, Fun, Forall, Rec]


class Relation(enum.Enum):
    SUB = "sub"
    EQ = "eq"

    @property
    def symbol(self) -> str:
        return "<=" if self is Relation.SUB else "=="


# --- errors ---------------------------------------------------------------


class TypeSyntaxError(Exception):
    """Base class for errors raised by the core syntax layer."""


class UnboundVariable(TypeSyntaxError):
    def __init__(self, name: str, position: tuple[str, ...]):
        self.name = name
        self.position = position
        super().__init__(f"unbound variable {name!r} at {_fmt_path(position)}")


class NegativeIndex(TypeSyntaxError):
    pass


class NotARec(TypeSyntaxError):
    pass


class WellFormednessError(TypeSyntaxError):
    pass


class NonContractive(WellFormednessError):
    def __init__(self, path: tuple[str, ...]):
        self.path = path
        super().__init__(f"non-contractive recursive type at {_fmt_path(path)}")


class IndexOutOfRange(WellFormednessError):
    def __init__(self, path: tuple[str, ...], index: int):
        self.path = path
        self.index = index
        super().__init__(f"index {index} out of range at {_fmt_path(path)}")


class UndeclaredFree(WellFormednessError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"undeclared type constant {name!r}")


class DuplicateDeclaration(WellFormednessError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"duplicate declaration of {name!r}")


class InvalidBound(WellFormednessError):
    """An environment bound that is ill-scoped or is (an unrolling of) its own name."""


def _fmt_path(path: Sequence[str]) -> str:
    return "/".join(path) if path else "<root>"


# --- named <-> de Bruijn --------------------------------------------------


def to_core(s: SurfaceType, scope: Iterable[str] = ()) -> TypeExpr:
    """Convert named syntax to de Bruijn form.

    ``scope`` lists identifiers that may occur free; they become ``FreeVar``.
    """
    allowed = frozenset(scope)

    def go(s: SurfaceType, binders: tuple[str, ...], pos: tuple[str, ...]) -> TypeExpr:
        match s:
            case SVar(name):
                for i, b in enumerate(binders):
                    if b == name:
                        return Var(i)
                if name in allowed:
                    return FreeVar(name)
                raise UnboundVariable(name, pos)
            case SFun(dom, cod):
                return Fun(go(dom, binders, pos + ("L",)), go(cod, binders, pos + ("R",)))
            case SForall(binder, bound, body):
                inner = (binder,) + binders
                return Forall(go(bound, inner, pos + ("B",)), go(body, inner, pos + ("D",)))
            case SRec(binder, body):
                return Rec(go(body, (binder,) + binders, pos + ("U",)))
        raise TypeError(f"not a surface type: {s!r}")

    return go(s, (), ())


def _binder_names() -> Iterator[str]:
    letters = "abcdefghijklmnopqrstuvwxyz"
    yield from letters
    n = 1
    while True:
        for c in letters:
            yield f"{c}{n}"
        n += 1


def from_core(t: TypeExpr, hints: Sequence[str] = ()) -> SurfaceType:
    """Convert core syntax back to named syntax.

    ``hints[i]`` names free index ``i``.  Binders get names that differ from
    every free name and from every enclosing binder, so no capture occurs.
    """
    taken = set(free_names(t)) | set(hints)
    pool: list[str] = []
    gen = _binder_names()

    def name_at(depth: int) -> str:
        while len(pool) <= depth:
            n = next(gen)
            if n not in taken and n not in _KEYWORDS:
                pool.append(n)
        return pool[depth]

    def go(t: TypeExpr, names: tuple[str, ...]) -> SurfaceType:
        match t:
            case Var(i):
                if i < len(names):
                    return SVar(names[i])
                j = i - len(names)
                if j < len(hints):
                    return SVar(hints[j])
                raise IndexOutOfRange((), i)
            case FreeVar(name):
                return SVar(name)
            case Fun(dom, cod):
                return SFun(go(dom, names), go(cod, names))
            case Forall(bound, body):
                b = name_at(len(names))
                inner = (b,) + names
                return SForall(b, go(bound, inner), go(body, inner))
            case Rec(body):
                b = name_at(len(names))
                return SRec(b, go(body, (b,) + names))
        raise TypeError(f"not a core type: {t!r}")

    return go(t, ())


_KEYWORDS = frozenset({"rec", "forall", "expect", "yes", "no"})


# --- de Bruijn machinery --------------------------------------------------


def map_free(t: TypeExpr, f: Callable[[int], int], cutoff: int = 0) -> TypeExpr:
    """Rewrite every free index ``i`` (relative to ``cutoff``) to ``f(i)``."""
    match t:
        case Var(i):
            if i < cutoff:
                return t
            j = f(i - cutoff)
            if j < 0:
                raise NegativeIndex(f"index {i} would become {j + cutoff}")
            return t if j == i - cutoff else Var(j + cutoff)
        case FreeVar():
            return t
        case Fun(dom, cod):
            return Fun(map_free(dom, f, cutoff), map_free(cod, f, cutoff))
        case Forall(bound, body):
            return Forall(map_free(bound, f, cutoff + 1), map_free(body, f, cutoff + 1))
        case Rec(body):
            return Rec(map_free(body, f, cutoff + 1))
    raise TypeError(f"not a core type: {t!r}")


def shift_indices(t: TypeExpr, cutoff: int, delta: int) -> TypeExpr:
    if delta == 0:
        return t
    return map_free(t, lambda i: i + delta, cutoff)


def substitute(t: TypeExpr, target: int, s: TypeExpr) -> TypeExpr:
    """Replace ``Var(target)`` by ``s`` and close the gap left by the removed index."""

    def go(t: TypeExpr, depth: int) -> TypeExpr:
        match t:
            case Var(i):
                if i == target + depth:
                    return shift_indices(s, 0, depth)
                if i > target + depth:
                    return Var(i - 1)
                return t
            case FreeVar():
                return t
            case Fun(dom, cod):
                return Fun(go(dom, depth), go(cod, depth))
            case Forall(bound, body):
                return Forall(go(bound, depth + 1), go(body, depth + 1))
            case Rec(body):
                return Rec(go(body, depth + 1))
        raise TypeError(f"not a core type: {t!r}")

    return go(t, 0)


def free_indices(t: TypeExpr, cutoff: int = 0) -> set[int]:
    out: set[int] = set()

    def go(t: TypeExpr, c: int) -> None:
        match t:
            case Var(i):
                if i >= c:
                    out.add(i - c)
            case Fun(dom, cod):
                go(dom, c)
                go(cod, c)
            case Forall(bound, body):
                go(bound, c + 1)
                go(body, c + 1)
            case Rec(body):
                go(body, c + 1)

    go(t, cutoff)
    return out


def free_names(t: TypeExpr) -> set[str]:
    match t:
        case FreeVar(name):
            return {name}
        case Fun(dom, cod):
            return free_names(dom) | free_names(cod)
        case Forall(bound, body):
            return free_names(bound) | free_names(body)
        case Rec(body):
            return free_names(body)
    return set()


def size(t: TypeExpr) -> int:
    match t:
        case Fun(dom, cod):
            return 1 + size(dom) + size(cod)
        case Forall(bound, body):
            return 1 + size(bound) + size(body)
        case Rec(body):
            return 1 + size(body)
    return 1


def quantifier_depth(t: TypeExpr) -> int:
    match t:
        case Fun(dom, cod):
            return max(quantifier_depth(dom), quantifier_depth(cod))
        case Forall(bound, body):
            return 1 + max(quantifier_depth(bound), quantifier_depth(body))
        case Rec(body):
            return quantifier_depth(body)
    return 0


def count_recs(t: TypeExpr) -> int:
    match t:
        case Fun(dom, cod):
            return count_recs(dom) + count_recs(cod)
        case Forall(bound, body):
            return count_recs(bound) + count_recs(body)
        case Rec(body):
            return 1 + count_recs(body)
    return 0


# --- contractivity and well-formedness ------------------------------------


def is_contractive(body: TypeExpr) -> bool:
    """True iff index 0 does not occur on the exposed spine of a ``Rec`` body."""
    k = 0
    while True:
        match body:
            case Var(i):
                return i != k
            case Rec(inner):
                body, k = inner, k + 1
            case _:
                return True


def exposed_head(t: TypeExpr) -> TypeExpr:
    """Walk through ``Rec`` binders without unrolling; returns the spine's end."""
    while isinstance(t, Rec):
        t = t.body
    return t


def well_formed(t: TypeExpr, env: GlobalEnv | Iterable[str] = (), depth: int = 0) -> None:
    """Raise a ``WellFormednessError`` unless ``t`` is well formed.

    ``depth`` is the number of enclosing binders available to free indices.
    ``env`` may be a ``GlobalEnv`` or any collection of declared names.
    """
    declared = env.names if isinstance(env, GlobalEnv) else frozenset(env)

    def go(t: TypeExpr, d: int, path: tuple[str, ...]) -> None:
        match t:
            case Var(i):
                if i >= d:
                    raise IndexOutOfRange(path, i)
            case FreeVar(name):
                if name not in declared:
                    raise UndeclaredFree(name)
            case Fun(dom, cod):
                go(dom, d, path + ("L",))
                go(cod, d, path + ("R",))
            case Forall(bound, body):
                go(bound, d + 1, path + ("B",))
                go(body, d + 1, path + ("D",))
            case Rec(body):
                if not is_contractive(body):
                    raise NonContractive(path)
                go(body, d + 1, path + ("U",))
            case _:
                raise TypeError(f"not a core type: {t!r}")

    go(t, depth, ())


def is_well_formed(t: TypeExpr, env: GlobalEnv | Iterable[str] = (), depth: int = 0) -> bool:
    try:
        well_formed(t, env, depth)
    except WellFormednessError:
        return False
    return True


# --- unrolling ------------------------------------------------------------


def unfold_rec(t: TypeExpr) -> TypeExpr:
    if not isinstance(t, Rec):
        raise NotARec(f"expected a recursive type, got {t!r}")
    return substitute(t.body, 0, t)


def head_normalize(t: TypeExpr) -> TypeExpr:
    while isinstance(t, Rec):
        t = unfold_rec(t)
    return t


# --- global environment ---------------------------------------------------


@dataclass(frozen=True)
class EnvEntry:
    name: str
    bound: TypeExpr | None  # None: an unbounded constant, related only to itself


class GlobalEnv:
    """Ordered declarations ``name <= bound`` of the free type constants.

    A bound may mention its own name and earlier names.  An entry without a
    bound is a constant that no promotion applies to.
    """

    __slots__ = ("entries", "_index", "names")

    def __init__(self, entries: Iterable[EnvEntry | tuple[str, TypeExpr | None]] = ()):
        self.entries: tuple[EnvEntry, ...] = tuple(
            e if isinstance(e, EnvEntry) else EnvEntry(*e) for e in entries
        )
        self._index: dict[str, int] = {}
        for i, e in enumerate(self.entries):
            if e.name in self._index:
                raise DuplicateDeclaration(e.name)
            self._index[e.name] = i
        self.names = frozenset(self._index)
        self._validate()

    def _validate(self) -> None:
        for i, e in enumerate(self.entries):
            if e.bound is None:
                continue
            visible = [x.name for x in self.entries[: i + 1]]
            for n in free_names(e.bound):
                if n not in self._index:
                    raise UndeclaredFree(n)
                if n not in visible:
                    raise InvalidBound(f"bound of {e.name!r} mentions later declaration {n!r}")
            well_formed(e.bound, visible)
            if exposed_head(e.bound) == FreeVar(e.name):
                raise InvalidBound(f"bound of {e.name!r} is the variable itself")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def __iter__(self) -> Iterator[EnvEntry]:
        return iter(self.entries)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GlobalEnv) and self.entries == other.entries

    def __hash__(self) -> int:
        return hash(self.entries)

    def __repr__(self) -> str:
        return f"GlobalEnv({list(self.entries)!r})"

    def bound_of(self, name: str) -> TypeExpr | None:
        return self.entries[self._index[name]].bound

    def extend(self, name: str, bound: TypeExpr | None = None) -> GlobalEnv:
        return GlobalEnv(self.entries + (EnvEntry(name, bound),))

    @classmethod
    def from_surface(cls, decls: Iterable[tuple[str, SurfaceType]]) -> GlobalEnv:
        """Build an environment from parsed ``name <= type`` declarations.

        ``X <= X`` declares an unbounded constant.
        """
        decls = list(decls)
        seen: set[str] = set()
        for name, _ in decls:
            if name in seen:
                raise DuplicateDeclaration(name)
            seen.add(name)
        all_names = [n for n, _ in decls]
        entries = []
        for name, bound in decls:
            if bound == SVar(name):
                entries.append(EnvEntry(name, None))
            else:
                entries.append(EnvEntry(name, to_core(bound, all_names)))
        return cls(entries)
