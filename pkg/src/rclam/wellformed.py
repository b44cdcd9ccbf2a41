"""Free-variable lists and the resource-indexed formation judgment.

The natural-deduction base tracks free variables as an ordered list with
multiplicity; the sequent base only needs the set, which we expose in
first-occurrence order.  A pre-expression is a legal expression of the
calculus selected by a ResourceSet when every node satisfies its formation
rule: abstraction and selection demand their binder occur free in the body
when weakening is explicit, application-like nodes demand disjoint free
variables when contraction is explicit, and the two operators themselves
are only available when their resource is explicit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .syntax import (
    CONTEXT, LJ, ND, TERM,
    Abs, App, Cons, Contr, Cut, Expr, Name, Path, ResourceSet, Sel, Var, Weak,
    children, pretty, sort_of,
)


def fv_list(e: Expr, res: ResourceSet) -> list[Name]:
    """Free variables as an ordered list with multiplicity.

    Weakening contributes its erased name first; a contraction whose bound
    pair does not occur contributes nothing for its source.
    """
    match e:
        case Var(n):
            return [n]
        case Abs(x, b) | Sel(x, b):
            return [n for n in fv_list(b, res) if n != x]
        case App(f, a) | Cut(f, a) | Cons(f, a):
            return fv_list(f, res) + fv_list(a, res)
        case Weak(x, b):
            return [x] + fv_list(b, res)
        case Contr(s, l, r, b):
            inner = fv_list(b, res)
            if l in inner or r in inner:
                return [s] + [n for n in inner if n not in (l, r)]
            return inner
    raise TypeError(e)


def fv_set(e: Expr, res: ResourceSet) -> set[Name]:
    return set(fv_list(e, res))


def fv_ordered(e: Expr, res: ResourceSet) -> list[Name]:
    """Support of the free-variable list in first-occurrence order."""
    seen: set[Name] = set()
    out: list[Name] = []
    for n in fv_list(e, res):
        if n not in seen:
            seen.add(n)
            out.append(n)
    return out


@dataclass(frozen=True)
class Violation:
    """A formation-rule failure at a specific node."""

    path: Path
    clause: str
    detail: str

    def __str__(self) -> str:
        where = "root" if not self.path else "/".join(map(str, self.path))
        return f"{self.clause} at {where}: {self.detail}"


def check(e: Expr, res: ResourceSet, base: str = ND) -> Optional[Violation]:
    """None when e is a legal expression for the calculus (base, res),
    otherwise the first violation in outermost-leftmost order."""
    if base == ND and sort_of(e) != TERM:
        return Violation((), "sort", "natural-deduction base has no contexts")
    return _check(e, res, base, ())


def is_wellformed(e: Expr, res: ResourceSet, base: str = ND) -> bool:
    return check(e, res, base) is None


def _check(e: Expr, res: ResourceSet, base: str, path: Path) -> Optional[Violation]:
    match e:
        case Var(_):
            return None
        case App(f, a):
            if base != ND:
                return Violation(path, "sort", "application is natural-deduction syntax")
            if sort_of(f) != TERM or sort_of(a) != TERM:
                return Violation(path, "sort", "application needs two terms")
            return _disjoint(f, a, res, path, "application") or _sub(e, res, base, path)
        case Cut(h, k):
            if base != LJ:
                return Violation(path, "sort", "cut is sequent-base syntax")
            if sort_of(h) != TERM:
                return Violation(path, "sort", "cut head must be a term")
            if sort_of(k) != CONTEXT:
                return Violation(path, "sort", "cut argument must be a context")
            return _disjoint(h, k, res, path, "cut") or _sub(e, res, base, path)
        case Cons(h, k):
            if base != LJ:
                return Violation(path, "sort", "cons is sequent-base syntax")
            if sort_of(h) != TERM:
                return Violation(path, "sort", "cons head must be a term")
            if sort_of(k) != CONTEXT:
                return Violation(path, "sort", "cons tail must be a context")
            return _disjoint(h, k, res, path, "cons") or _sub(e, res, base, path)
        case Abs(x, b) | Sel(x, b):
            kind = "abstraction" if isinstance(e, Abs) else "selection"
            if isinstance(e, Sel) and base != LJ:
                return Violation(path, "sort", "selection is sequent-base syntax")
            if sort_of(b) != TERM:
                return Violation(path, "sort", f"{kind} body must be a term")
            if res.weakening and x not in fv_set(b, res):
                return Violation(path, f"{kind}-relevance",
                                 f"{x} must occur free in the body when w is explicit")
            return _sub(e, res, base, path)
        case Weak(x, b):
            if not res.weakening:
                return Violation(path, "weakening-availability",
                                 "W[..] requires explicit weakening (w in R)")
            if x in fv_set(b, res):
                return Violation(path, "weakening-freshness",
                                 f"W[{x}] erases a name that occurs free in the body")
            return _sub(e, res, base, path)
        case Contr(s, l, r, b):
            if not res.contraction:
                return Violation(path, "contraction-availability",
                                 "C[..] requires explicit contraction (c in R)")
            if l == r:
                return Violation(path, "contraction-pair", "bound pair must be distinct")
            inner = fv_set(b, res)
            if s in (inner - {l, r}) or s in (l, r):
                return Violation(path, "contraction-source",
                                 f"introduced {s} collides with the body's names")
            if res.weakening and not (l in inner and r in inner):
                return Violation(path, "contraction-relevance",
                                 f"both {l} and {r} must occur free when w is explicit")
            return _sub(e, res, base, path)
    raise TypeError(e)


def _disjoint(f: Expr, a: Expr, res: ResourceSet, path: Path, what: str) -> Optional[Violation]:
    if not res.contraction:
        return None
    shared = fv_set(f, res) & fv_set(a, res)
    if shared:
        names = ", ".join(sorted(map(str, shared)))
        return Violation(path, f"{what}-linearity",
                         f"free variables shared between the two parts: {names}")
    return None


def _sub(e: Expr, res: ResourceSet, base: str, path: Path) -> Optional[Violation]:
    for i, c in enumerate(children(e)):
        v = _check(c, res, base, path + (i,))
        if v is not None:
            return v
    return None


def wellformed_in(e: Expr, base: str) -> list[ResourceSet]:
    """The resource sets under which e is a legal expression."""
    from .syntax import ALL_RESOURCE_SETS

    return [r for r in ALL_RESOURCE_SETS if is_wellformed(e, r, base)]


def assert_wellformed(e: Expr, res: ResourceSet, base: str = ND) -> None:
    v = check(e, res, base)
    if v is not None:
        raise ValueError(f"ill-formed ({base}, R={res}): {v} in {pretty(e)}")
