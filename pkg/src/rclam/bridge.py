"""Translation from the sequent base into the natural-deduction base, the
size/contraction/weakening measures, and the step classification they drive.

A sequent context maps to a term with one hole; the hole is a reserved
variable and plugging is ordinary substitution, whose weakening clause
implements the set-difference in the context-weakening equation for free.

classify_step reports what the translation actually does to a reduction
step: equal translations, a found reduction sequence, or neither.  The
expectation (identity exactly for gamma6/omega6, a strict sequence
otherwise) is the simulation property stated for these calculi; the
beta and pi cases genuinely fall outside it -- their translations are
joinable permutations, not reducts -- and are reported as Stuck rather
than forced.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .rewrite import (
    ContractError, canon_key, canonical, equiv, redexes, step, subst,
)
from .syntax import (
    CONTEXT, LJ, ND, TERM,
    Abs, App, Cons, Contr, Cut, Expr, Name, NameSupply, ResourceSet, Sel,
    Var, Weak,
    pretty, sort_of, supply_for,
)
from .typecheck import Derivation, Judgment, deriv_arrow_e, deriv_arrow_intro, deriv_weak
from .wellformed import fv_set

HOLE = Name("_", 9999)


def translate_term(t: Expr, res: ResourceSet,
                   supply: Optional[NameSupply] = None) -> Expr:
    """Map a sequent term homomorphically; a cut becomes its context's
    interpretation applied to the translated head."""
    if sort_of(t) != TERM:
        raise ContractError("translate_term expects a term")
    supply = supply or supply_for(t)
    return _tr(t, res, supply)


def _tr(t: Expr, res: ResourceSet, supply: NameSupply) -> Expr:
    match t:
        case Var(_):
            return t
        case Abs(x, b):
            return Abs(x, _tr(b, res, supply))
        case Weak(x, b):
            return Weak(x, _tr(b, res, supply))
        case Contr(s, l, r, b):
            return Contr(s, l, r, _tr(b, res, supply))
        case Cut(h, k):
            return plug(translate_context(k, res, supply), _tr(h, res, supply),
                        res, supply)
        case App(f, a):
            return App(_tr(f, res, supply), _tr(a, res, supply))
    raise ContractError(f"not a term: {pretty(t)}")


@dataclass(frozen=True)
class CtxFun:
    """A natural-deduction term with a single hole variable."""

    template: Expr

    def __str__(self) -> str:
        return pretty(self.template)


def translate_context(k: Expr, res: ResourceSet,
                      supply: Optional[NameSupply] = None) -> CtxFun:
    if sort_of(k) != CONTEXT:
        raise ContractError("translate_context expects a context")
    supply = supply or supply_for(k)
    match k:
        case Sel(x, t):
            return CtxFun(App(Abs(x, _tr(t, res, supply)), Var(HOLE)))
        case Cons(t, tail):
            inner = translate_context(tail, res, supply)
            return CtxFun(plug(inner, App(Var(HOLE), _tr(t, res, supply)),
                               res, supply, keep_hole=True))
        case Weak(x, b):
            inner = translate_context(b, res, supply)
            return CtxFun(Weak(x, inner.template))
        case Contr(s, l, r, b):
            inner = translate_context(b, res, supply)
            return CtxFun(Contr(s, l, r, inner.template))
    raise ContractError(f"not a context: {pretty(k)}")


def plug(ctx: CtxFun, m: Expr, res: ResourceSet,
         supply: Optional[NameSupply] = None, keep_hole: bool = False) -> Expr:
    """Substitute the hole; the weakening clause of substitution realizes the
    set-difference in the context-weakening equation."""
    supply = supply or supply_for(ctx.template, m)
    return subst(ctx.template, m, HOLE, res, supply)


def translate(e: Expr, res: ResourceSet, probe: Optional[Name] = None) -> Expr:
    """Translate an expression; contexts are plugged with a fresh variable
    standing for an arbitrary argument."""
    from .syntax import all_names

    if HOLE in all_names(e):
        raise ContractError("expression uses the reserved hole name")
    if sort_of(e) == TERM:
        return translate_term(e, res)
    supply = supply_for(e)
    probe = probe or supply.fresh("hole")
    return plug(translate_context(e, res, supply), Var(probe), res, supply)


def _translate_pair(e: Expr, e2: Expr, res: ResourceSet) -> tuple[Expr, Expr]:
    """Translate a step's endpoints, plugging contexts with one shared probe."""
    if sort_of(e) == TERM:
        return translate(e, res), translate(e2, res)
    probe = supply_for(e, e2).fresh("hole")
    return translate(e, res, probe), translate(e2, res, probe)


# --- measures -----------------------------------------------------------------


@dataclass(frozen=True)
class Measures:
    size: int
    cnorm: int
    wnorm: int

    def __str__(self) -> str:
        return f"size={self.size} cnorm={self.cnorm} wnorm={self.wnorm}"


def measures(e: Expr) -> Measures:
    """The size, contraction and weakening norms, by their defining clauses."""
    match e:
        case Var(_):
            return Measures(1, 0, 1)
        case Abs(_, b) | Sel(_, b):
            m = measures(b)
            return Measures(1 + m.size, m.cnorm, 1 + m.wnorm)
        case Weak(_, b):
            m = measures(b)
            return Measures(1 + m.size, m.cnorm, 0)
        case Contr(_, _, _, b):
            m = measures(b)
            return Measures(1 + m.size, m.cnorm + m.size, 1 + m.wnorm)
        case Cut(f, a) | Cons(f, a):
            m1, m2 = measures(f), measures(a)
            return Measures(m1.size + m2.size, m1.cnorm + m2.cnorm,
                            1 + m1.wnorm + m2.wnorm)
        case App(f, a):
            m1, m2 = measures(f), measures(a)
            return Measures(m1.size + m2.size, m1.cnorm + m2.cnorm,
                            1 + m1.wnorm + m2.wnorm)
    raise TypeError(e)


# --- simulation classification ---------------------------------------------------


IDENTITY = "identity"
STRICT = "strict"
STUCK = "stuck"


@dataclass(frozen=True)
class SimResult:
    kind: str                       # identity | strict | stuck
    expected: str                   # identity for gamma6/omega6, else strict
    witness: tuple[str, ...]        # rule tags of the found sequence
    note: str = ""

    @property
    def conforms(self) -> bool:
        return self.kind == self.expected


def expected_class(rule: str) -> str:
    return IDENTITY if rule in ("gamma6", "omega6") else STRICT


def classify_step(e: Expr, e2: Expr, rule: str, res: ResourceSet,
                  fuel: int = 50) -> SimResult:
    """Classify one sequent step under the translation.

    identity: the translations are equivalent; strict: a nonempty reduction
    sequence from the first translation to the second was found within fuel;
    stuck: neither (the step is only a permutation of the translation).
    """
    te, te2 = _translate_pair(e, e2, res)
    expected = expected_class(rule)
    if equiv(te, te2):
        return SimResult(IDENTITY, expected, ())
    found = find_reduction(te, te2, res, fuel)
    if found is not None:
        return SimResult(STRICT, expected, tuple(found))
    return SimResult(STUCK, expected, (),
                     note="translations are joinable but not ordered")


def find_reduction(start: Expr, goal: Expr, res: ResourceSet,
                   fuel: int = 50) -> Optional[list[str]]:
    """Bounded breadth-first search for start ->+ goal in the ND base,
    modulo equivalence; returns the rule tags of one shortest sequence."""
    goal_key = canon_key(goal)
    start_c = canonical(start, res)
    seen = {canon_key(start_c)}
    frontier: list[tuple[Expr, list[str]]] = [(start_c, [])]
    expanded = 0
    while frontier and expanded < fuel:
        cur, trail = frontier.pop(0)
        expanded += 1
        supply = supply_for(cur)
        for rx in redexes(cur, ND, res):
            nxt = canonical(step(cur, rx, res, supply.copy()), res)
            key = canon_key(nxt)
            if key == goal_key:
                return trail + [rx.rule]
            if key not in seen:
                seen.add(key)
                frontier.append((nxt, trail + [rx.rule]))
    return None


# --- the lexicographic termination order -------------------------------------------


def gg_compare(e: Expr, e2: Expr, res: ResourceSet, fuel: int = 50) -> bool:
    """The lexicographic product: translation reduction, then the contraction
    norm, then the weakening norm."""
    te, te2 = _translate_pair(e, e2, res)
    if not equiv(te, te2):
        return find_reduction(te, te2, res, fuel) is not None
    m, m2 = measures(e), measures(e2)
    if m.cnorm != m2.cnorm:
        return m.cnorm > m2.cnorm
    return m.wnorm > m2.wnorm


# --- type preservation ---------------------------------------------------------------


def translate_derivation(d: Derivation, res: ResourceSet,
                         supply: Optional[NameSupply] = None) -> Derivation:
    """Map a sequent typing derivation to a natural-deduction one with the
    same basis and type (terms), following the type-preservation argument:
    selections become introduction/elimination pairs, cuts plug the head."""
    supply = supply or supply_for(d.subject)
    if sort_of(d.subject) != TERM:
        raise ContractError("translate_derivation expects a term derivation")
    return _trd(d, res, supply)


def _trd(d: Derivation, res: ResourceSet, supply: NameSupply) -> Derivation:
    match d.rule:
        case "ax_iw" | "ax_ew":
            return d
        case "arrow_r":
            return deriv_arrow_intro(_trd(d.premises[0], res, supply),
                                     d.subject.binder, ND)
        case "weak_t":
            x = d.subject.erased
            return deriv_weak(_trd(d.premises[0], res, supply), x,
                              d.basis.get(x), ND)
        case "cont_t":
            from .typecheck import deriv_cont

            s = d.subject
            return deriv_cont(_trd(d.premises[0], res, supply),
                              s.source, s.left, s.right, ND)
        case "cut":
            dterms = [_trd(p, res, supply) for p in d.premises[:-1]]
            return _trd_ctx(d.premises[-1], dterms, res, supply)
    raise ContractError(f"unexpected sequent term rule {d.rule}")


def _trd_ctx(dk: Derivation, dms: list[Derivation], res: ResourceSet,
             supply: NameSupply) -> Derivation:
    """Interpret a context derivation as a function on plug derivations: dms
    type the plug at every component of dk's stoup."""
    from .typecheck import deriv_cont

    bykey = {}
    for dm in dms:
        bykey.setdefault(_tykey(dm.ty), dm)
    match dk.rule:
        case "sel":
            from .typelemmas import align_group

            x = dk.subject.binder
            body = _trd(dk.premises[0], res, supply)
            lam = deriv_arrow_intro(body, x, ND)
            args = [bykey[_tykey(p)] for p in dk.stoup.parts]
            if len(args) > 1:
                args = align_group(args, supply)
            return deriv_arrow_e(lam, args, res)
        case "arrow_l":
            from .typelemmas import align_group

            terms = [_trd(p, res, supply) for p in dk.premises[:-1]]
            if len(terms) > 1:
                terms = align_group(terms, supply)
            tail = dk.premises[-1]
            inner_args = []
            for comp in dk.stoup.parts:
                dm = bykey[_tykey(comp)]
                inner_args.append(deriv_arrow_e(dm, terms, res))
            return _trd_ctx(tail, inner_args, res, supply)
        case "weak_k":
            x = dk.subject.erased
            inner = _trd_ctx(dk.premises[0], dms, res, supply)
            if inner.basis.get(x) is not None:
                # the erased name is free in the plug: deepen instead of weaken
                from .typelemmas import promote

                old = inner.basis.get(x)
                from .syntax import inter as _inter

                tgt = inner.basis.remove(x).extend(x, _inter(old, dk.basis.get(x)))
                return promote(inner, tgt, res, ND)
            return deriv_weak(inner, x, dk.basis.get(x), ND)
        case "cont_k":
            s = dk.subject
            inner = _trd_ctx(dk.premises[0], dms, res, supply)
            return deriv_cont(inner, s.source, s.left, s.right, ND)
    raise ContractError(f"unexpected sequent context rule {dk.rule}")


def _tykey(t) -> str:
    from .syntax import pretty_type

    return pretty_type(t)
