"""Seeded random generation of well-formed expressions for every calculus.

With explicit weakening the generator maintains the exact set of names the
subtree must use (relevance); with explicit contraction it splits that set
disjointly across two-part nodes.  All draws go through one random.Random,
so corpora are reproducible from their seed.
"""

from __future__ import annotations

import random
from typing import Optional

from .syntax import (
    CONTEXT, LJ, ND, TERM,
    Abs, App, Cons, Contr, Cut, Expr, Name, ResourceSet, Sel, Var, Weak,
)
from .wellformed import assert_wellformed, fv_set


class Gen:
    def __init__(self, base: str, res: ResourceSet, seed: int = 0):
        self.base = base
        self.res = res
        self.rng = random.Random(seed)
        self.counter = 0

    def fresh(self, base: str = "v") -> Name:
        self.counter += 1
        return Name(base, self.counter)

    def term(self, depth: int = 4, free: int = 2) -> Expr:
        """A well-formed term whose free variables come from a fresh pool."""
        pool = [self.fresh("f") for _ in range(free)]
        if self.res.weakening:
            k = self.rng.randint(0, len(pool))
            must = tuple(pool[:k])
            e = self._term(depth, must, ())
        else:
            e = self._term(depth, (), tuple(pool))
        assert_wellformed(e, self.res, self.base)
        return e

    def expr(self, depth: int = 4, free: int = 2) -> Expr:
        """A term or a context (sequent base only)."""
        if self.base == LJ and self.rng.random() < 0.35:
            pool = [self.fresh("f") for _ in range(free)]
            if self.res.weakening:
                k = self.rng.randint(0, len(pool))
                e = self._ctx(depth, tuple(pool[:k]), ())
            else:
                e = self._ctx(depth, (), tuple(pool))
            assert_wellformed(e, self.res, self.base)
            return e
        return self.term(depth, free)

    # --- internals ------------------------------------------------------------

    def _split(self, must: tuple[Name, ...]) -> tuple[tuple, tuple]:
        if self.res.contraction:
            left = tuple(n for n in must if self.rng.random() < 0.5)
            right = tuple(n for n in must if n not in left)
            return left, right
        left, right = [], []
        for n in must:
            where = self.rng.randint(0, 2)
            if where in (0, 2):
                left.append(n)
            if where in (1, 2):
                right.append(n)
        return tuple(left), tuple(right)


    def _pool_split(self, pool: tuple[Name, ...]) -> tuple[tuple, tuple]:
        if not self.res.contraction:
            return pool, pool
        left = tuple(n for n in pool if self.rng.random() < 0.5)
        right = tuple(n for n in pool if n not in left)
        return left, right

    def _term(self, depth: int, must: tuple[Name, ...], pool: tuple[Name, ...]) -> Expr:
        rng = self.rng
        if depth <= 0:
            return self._leaf(must, pool)
        weights = {
            "var": 2 if len(must) <= 1 else 0,
            "abs": 3,
            "app": 3 if self.base == ND else 0,
            "cut": 3 if self.base == LJ else 0,
            "weak": 2 if self.res.weakening and must else 0,
            "contr": 2 if self.res.contraction and (must or pool) else 0,
        }
        choice = self._pick(weights)
        if choice == "var":
            return self._leaf(must, pool)
        if choice == "abs":
            x = self.fresh("x")
            if self.res.weakening:
                body = self._term(depth - 1, must + (x,), pool)
            else:
                body = self._term(depth - 1, must, pool + (x,))
                if x not in fv_set(body, self.res) and rng.random() < 0.5:
                    pass  # vacuous binder is fine without explicit weakening
            return Abs(x, body)
        if choice == "app":
            m1, m2 = self._split(must)
            p1, p2 = self._pool_split(pool)
            return App(self._term(depth - 1, m1, p1), self._term(depth - 1, m2, p2))
        if choice == "cut":
            m1, m2 = self._split(must)
            p1, p2 = self._pool_split(pool)
            return Cut(self._term(depth - 1, m1, p1), self._ctx(depth - 1, m2, p2))
        if choice == "weak":
            z = must[rng.randrange(len(must))]
            rest = tuple(n for n in must if n != z)
            return Weak(z, self._term(depth - 1, rest, pool))
        # contraction: split a name into two bound copies
        if must and (rng.random() < 0.7 or not pool):
            z = must[rng.randrange(len(must))]
            rest = tuple(n for n in must if n != z)
        else:
            z = self.fresh("c")
            rest = must
        l, r = self.fresh(z.base), self.fresh(z.base)
        if self.res.weakening:
            body = self._term(depth - 1, rest + (l, r), pool)
        else:
            body = self._term(depth - 1, rest, pool + (l, r))
            got = fv_set(body, self.res)
            if not ({l, r} & got):
                # keep some vacuous contractions: they exercise gamma0
                pass
        return Contr(z, l, r, body)

    def _ctx(self, depth: int, must: tuple[Name, ...], pool: tuple[Name, ...]) -> Expr:
        rng = self.rng
        weights = {
            "sel": 3,
            "cons": 3 if depth > 0 else 0,
            "weak": 2 if self.res.weakening and must and depth > 0 else 0,
            "contr": 2 if self.res.contraction and (must or pool) and depth > 0 else 0,
        }
        choice = self._pick(weights)
        if choice == "sel":
            x = self.fresh("s")
            if self.res.weakening:
                body = self._term(max(depth - 1, 0), must + (x,), pool)
            else:
                body = self._term(max(depth - 1, 0), must, pool + (x,))
            return Sel(x, body)
        if choice == "cons":
            m1, m2 = self._split(must)
            p1, p2 = self._pool_split(pool)
            return Cons(self._term(depth - 1, m1, p1), self._ctx(depth - 1, m2, p2))
        if choice == "weak":
            z = must[rng.randrange(len(must))]
            rest = tuple(n for n in must if n != z)
            return Weak(z, self._ctx(depth - 1, rest, pool))
        if must and (rng.random() < 0.7 or not pool):
            z = must[rng.randrange(len(must))]
            rest = tuple(n for n in must if n != z)
        else:
            z = self.fresh("c")
            rest = must
        l, r = self.fresh(z.base), self.fresh(z.base)
        if self.res.weakening:
            body = self._ctx(depth - 1, rest + (l, r), pool)
        else:
            body = self._ctx(depth - 1, rest, pool + (l, r))
        return Contr(z, l, r, body)

    def _leaf(self, must: tuple[Name, ...], pool: tuple[Name, ...]) -> Expr:
        rng = self.rng
        if self.res.weakening:
            if len(must) == 1:
                return Var(must[0])
            if not must:
                x = self.fresh("x")
                return Abs(x, Var(x))
            # several obligations at depth zero: consume one per level
            if self.res.contraction or rng.random() < 0.5:
                if self.base == ND:
                    left, right = must[:1], must[1:]
                    return App(self._leaf(left, ()), self._leaf(right, ()))
                s = self.fresh("gs")
                return Cut(self._leaf(must[:1], ()),
                           Cons(self._leaf(must[1:], ()), Sel(s, Var(s))))
            z = must[0]
            return Weak(z, self._leaf(must[1:], pool))
        names = list(must) + list(pool)
        if names and rng.random() < 0.9:
            return Var(names[rng.randrange(len(names))])
        x = self.fresh("x")
        return Abs(x, Var(x))

    def _pick(self, weights: dict[str, int]) -> str:
        total = sum(weights.values())
        if total == 0:
            return "var" if "sel" not in weights else "sel"
        roll = self.rng.randrange(total)
        for key, w in weights.items():
            if roll < w:
                return key
            roll -= w
        raise AssertionError


def corpus(base: str, res: ResourceSet, count: int, seed: int = 0,
           depth: int = 4, free: int = 2, exprs: bool = False) -> list[Expr]:
    g = Gen(base, res, seed)
    out = []
    for _ in range(count):
        out.append(g.expr(depth, free) if exprs else g.term(depth, free))
    return out


def simply_typed_corpus(base: str, res: ResourceSet, count: int, seed: int = 0,
                        depth: int = 3, max_tries: int = 60) -> list[Expr]:
    """Well-formed terms that the simple system types, by filtered generation."""
    from .typecheck import SimpleTyping, infer_simple

    g = Gen(base, res, seed)
    out: list[Expr] = []
    tries = 0
    while len(out) < count and tries < count * max_tries:
        tries += 1
        e = g.term(depth, free=2)
        if isinstance(infer_simple(e, base, res), SimpleTyping):
            out.append(e)
    if len(out) < count:
        raise RuntimeError(f"could not generate {count} simply typed terms "
                           f"({len(out)} after {tries} tries)")
    return out
