"""Strong-normalisation oracle, normal-form recognizers, and intersection
derivation synthesis.

is_sn explores the reduction graph over equivalence classes exhaustively:
a cycle is a definitive divergence witness, full acyclic exploration gives
the longest path length, and running out of fuel is reported as
inconclusive, never as a verdict.

synthesize builds an intersection typing for a strongly normalising
expression by the characterisation argument: type the normal form
directly, then walk the reduction trace backwards through head subject
expansion; expressions whose first redex is not at the root are typed
structurally, threading expected argument types down to variable heads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .bridge import translate  # noqa: F401  (re-exported convenience)
from .rewrite import (
    ContractError, Redex, append, canon_key, canonical, redexes, split_chain,
    step, subst,
)
from .syntax import (
    CONTEXT, LJ, ND, TERM,
    Abs, App, Cons, Contr, Cut, Expr, IType, Name, NameSupply, Sel, TAtom,
    TArrow, Var, Weak,
    inter, itype_of, pretty, pretty_type, sort_of, supply_for,
)
from .typecheck import (
    Basis, Derivation, EMPTY, Judgment,
    basis_union_all, check_derivation, deriv_arrow_e, deriv_arrow_intro,
    deriv_arrow_l, deriv_ax, deriv_cont, deriv_cut, deriv_sel, deriv_weak,
)
from .typelemmas import (
    SubjectStepGap, promote, rename_in_derivation, strip_unused, subst_typing,
    append_typing,
)
from .wellformed import fv_ordered, fv_set


class SynthesisGap(ContractError):
    """A shape the synthesis recursion cannot type (reportable)."""


# --- the strong-normalisation oracle -----------------------------------------


@dataclass(frozen=True)
class SnVerdict:
    kind: str                      # "sn" | "cycle" | "inconclusive"
    max_path_len: int = 0
    graph_size: int = 0
    cycle: tuple[str, ...] = ()    # rules along the detected cycle

    @property
    def normalising(self) -> bool:
        return self.kind == "sn"

    @property
    def definitive(self) -> bool:
        return self.kind in ("sn", "cycle")

    def __str__(self) -> str:
        if self.kind == "sn":
            return (f"strongly normalising: longest path {self.max_path_len}, "
                    f"{self.graph_size} classes")
        if self.kind == "cycle":
            return f"diverges: cycle via {' -> '.join(self.cycle) or 'empty'}"
        return f"inconclusive after {self.graph_size} classes"


def successors(e: Expr, base: str, res) -> list[tuple[str, Expr, str]]:
    """Distinct one-step reducts up to equivalence, with one rule tag each."""
    supply = supply_for(e)
    out, seen = [], set()
    for rx in redexes(e, base, res):
        nxt = canonical(step(e, rx, res, supply.copy()), res)
        k = canon_key(nxt)
        if k not in seen:
            seen.add(k)
            out.append((k, nxt, rx.rule))
    return out


def is_sn(e: Expr, base: str, res, fuel: int = 5000) -> SnVerdict:
    """Explore every reduction sequence modulo equivalence.

    Depth-first with an explicit stack; a back edge is a cycle witness and
    the verdict is then definitive divergence.
    """
    start = canonical(e, res)
    key0 = canon_key(start)
    GRAY, BLACK = 1, 2
    color: dict[str, int] = {}
    depth: dict[str, int] = {}
    expanded = 0
    # frame: (key, successor list, next index, rule-from-parent)
    stack: list[list] = [[key0, successors(start, base, res), 0, ""]]
    color[key0] = GRAY
    expanded += 1
    while stack:
        frame = stack[-1]
        key, succs, idx, _ = frame
        if idx == len(succs):
            color[key] = BLACK
            depth[key] = max((1 + depth[s[0]] for s in succs), default=0)
            stack.pop()
            continue
        frame[2] += 1
        skey, sexpr, rule = succs[idx]
        if color.get(skey) == GRAY:
            rules = [f[3] for f in stack if f[3]] + [rule]
            at = next(i for i, f in enumerate(stack) if f[0] == skey)
            return SnVerdict("cycle", cycle=tuple(rules[at:]))
        if color.get(skey) == BLACK:
            continue
        expanded += 1
        if expanded > fuel:
            return SnVerdict("inconclusive", graph_size=expanded)
        color[skey] = GRAY
        stack.append([skey, successors(sexpr, base, res), 0, rule])
    return SnVerdict("sn", max_path_len=depth[key0], graph_size=len(depth))


# --- normal-form grammar recognizers ------------------------------------------


@dataclass(frozen=True)
class NormalFormReport:
    normal: bool            # no redex modulo equivalence
    in_grammar: bool        # member of the published normal-form grammar
    production: str         # grammar category, or "" when not a member

    @property
    def agree(self) -> bool:
        return self.normal == self.in_grammar


def is_normal_form(e: Expr, base: str, res) -> NormalFormReport:
    normal = not redexes(e, base, res)
    if base == ND:
        member, label = (_nd_m_nf(e, res), "M_nf") if _nd_m_nf(e, res) else \
                        (_nd_w_nf(e, res), "W_nf")
    else:
        if sort_of(e) == TERM:
            member, label = (_lj_t_nf(e, res), "t_nf") if _lj_t_nf(e, res) else \
                            (_lj_w_nf(e, res), "w_nf")
        else:
            member, label = (_lj_k_nf(e, res), "k_nf") if _lj_k_nf(e, res) else \
                            (_lj_w_nf(e, res), "w_nf")
    return NormalFormReport(normal, bool(member), label if member else "")


def _weak_run(e: Expr) -> tuple[list[Name], Expr]:
    names = []
    while isinstance(e, Weak):
        names.append(e.erased)
        e = e.body
    return names, e


def _contr_run(e: Expr) -> tuple[list[Contr], Expr]:
    ops = []
    while isinstance(e, Contr):
        ops.append(e)
        e = e.body
    return ops, e


def _spine(e: Expr) -> tuple[Expr, list[Expr]]:
    args = []
    while isinstance(e, App):
        args.append(e.arg)
        e = e.fun
    return e, list(reversed(args))


def _independent_triples(ops: list[Contr]) -> bool:
    sources = {op.source for op in ops}
    for op in ops:
        if op.left in sources or op.right in sources:
            return False
    return True


def _nd_m_nf(e: Expr, res) -> bool:
    match e:
        case Var(_):
            return True
        case Abs(x, Weak(y, b)):
            return y == x and not isinstance(b, Weak) and _nd_m_nf(b, res)
        case Abs(x, b):
            return not isinstance(b, Weak) and _nd_m_nf(b, res)
        case App(_, _):
            head, args = _spine(e)
            return isinstance(head, Var) and all(_nd_m_nf(a, res) for a in args)
        case Contr(_, _, _, _):
            ops, core = _contr_run(e)
            if not isinstance(core, App) or not _independent_triples(ops):
                return False
            if not (_nd_m_nf(core.fun, res) and _nd_m_nf(core.arg, res)):
                return False
            left_fv, right_fv = fv_set(core.fun, res), fv_set(core.arg, res)
            return all(
                (op.left in left_fv and op.right in right_fv)
                or (op.right in left_fv and op.left in right_fv)
                for op in ops
            )
    return False


def _nd_w_nf(e: Expr, res) -> bool:
    names, core = _weak_run(e)
    return bool(names) and _nd_m_nf(core, res)


def _lj_t_nf(e: Expr, res) -> bool:
    match e:
        case Var(_):
            return True
        case Abs(x, Weak(y, b)):
            return y == x and not isinstance(b, Weak) and _lj_t_nf(b, res)
        case Abs(x, b):
            return not isinstance(b, Weak) and _lj_t_nf(b, res)
        case Cut(Var(_), Cons(t, k)):
            return _lj_t_nf(t, res) and _lj_k_nf(k, res)
        case Contr(x, y, z, Cut(Var(h), Cons(t, k))):
            ctx_fv = fv_set(Cons(t, k), res)
            paired = (y == h and z in ctx_fv) or (z == h and y in ctx_fv)
            return paired and _lj_t_nf(t, res) and _lj_k_nf(k, res)
    return False


def _lj_k_nf(e: Expr, res) -> bool:
    match e:
        case Sel(x, Weak(y, b)):
            return y == x and not isinstance(b, Weak) and _lj_t_nf(b, res)
        case Sel(x, b):
            return not isinstance(b, Weak) and _lj_t_nf(b, res)
        case Cons(t, k):
            return _lj_t_nf(t, res) and _lj_k_nf(k, res)
        case Contr(_, _, _, _):
            ops, core = _contr_run(e)
            if not isinstance(core, Cons) or not _independent_triples(ops):
                return False
            if not (_lj_t_nf(core.head, res) and _lj_k_nf(core.tail, res)):
                return False
            head_fv, tail_fv = fv_set(core.head, res), fv_set(core.tail, res)
            return all(
                (op.left in head_fv and op.right in tail_fv)
                or (op.right in head_fv and op.left in tail_fv)
                for op in ops
            )
    return False


def _lj_w_nf(e: Expr, res) -> bool:
    names, core = _weak_run(e)
    if not names:
        return False
    if sort_of(core) == TERM:
        return _lj_t_nf(core, res)
    return _lj_k_nf(core, res)


# --- typing normal forms and synthesis -------------------------------------------


class _Atoms:
    """Deterministic fresh type atoms p1, p2, ... in traversal order."""

    def __init__(self) -> None:
        self.count = 0

    def fresh(self) -> TAtom:
        self.count += 1
        return TAtom(f"p{self.count}")


def type_normal_form(e: Expr, base: str, res) -> Derivation:
    """A valid intersection typing for a redex-free expression, following the
    normal-form structure with fresh atoms at the leaves."""
    report = is_normal_form(e, base, res)
    if not report.normal:
        raise ContractError("type_normal_form expects a normal form")
    return synthesize(e, base, res).derivation


@dataclass(frozen=True)
class SynthesisResult:
    derivation: Optional[Derivation]
    verdict: SnVerdict
    failure: str = ""

    @property
    def ok(self) -> bool:
        return self.derivation is not None


def synthesize(e: Expr, base: str, res, fuel: int = 5000) -> SynthesisResult:
    """Build an intersection typing for a strongly normalising expression.

    Returns a failure (no derivation) when the oracle cannot establish
    termination within fuel; raises SynthesisGap on shapes outside the
    recursion (none are known for well-formed inputs)."""
    verdict = is_sn(e, base, res, fuel)
    if not verdict.normalising:
        return SynthesisResult(None, verdict,
                               "not strongly normalising" if verdict.definitive
                               else "fuel exhausted")
    atoms = _Atoms()
    supply = supply_for(e)
    d = _synth(e, base, res, [], None, atoms, supply)
    return SynthesisResult(d, verdict)


def _synth(e: Expr, base: str, res, wants: list, demand, atoms: _Atoms,
           supply: NameSupply) -> Derivation:
    """wants: expected argument types for a function position (ND); demand:
    an exact strict type this subexpression must receive, or None."""
    rs = redexes(e, base, res)
    if rs:
        rx = rs[0]
        reduct = step(e, rx, res, supply)
        d_reduct = _synth(reduct, base, res, wants, demand, atoms, supply)
        return _expand_at(d_reduct, e, rx, rx.path, res, base, atoms, supply)
    match e:
        case Var(x):
            ty = demand if demand is not None else atoms.fresh()
            for w in reversed(wants):
                ty = TArrow(itype_of(w), ty)
            return deriv_ax(x, ty, ty, res)
        case Abs(x, b):
            if wants:
                raise SynthesisGap("abstraction in an applied head position")
            if demand is not None and not isinstance(demand, TArrow):
                raise SynthesisGap("abstraction demanded at a non-arrow type")
            inner_demand = demand.cod if demand is not None else None
            d_b = _synth(b, base, res, [], inner_demand, atoms, supply)
            if d_b.basis.get(x) is None:
                want_dom = (itype_of(demand.dom) if demand is not None
                            else inter(atoms.fresh()))
                d_b = promote(d_b, d_b.basis.extend(x, want_dom), res, base)
            if demand is not None and d_b.basis.get(x) != itype_of(demand.dom):
                got = d_b.basis.get(x)
                want = itype_of(demand.dom)
                if set(map(pretty_type, got.parts)) <= set(map(pretty_type, want.parts)):
                    d_b = promote(d_b, d_b.basis.remove(x).extend(x, want), res, base)
                else:
                    raise SynthesisGap("binder type does not meet the demanded domain")
            return deriv_arrow_intro(d_b, x, base)
        case App(f, a):
            d_a = _synth(a, base, res, [], None, atoms, supply)
            d_f = _synth(f, base, res, [d_a.ty, *wants], demand, atoms, supply)
            return deriv_arrow_e(d_f, [d_a], res)
        case Weak(x, b):
            d_b = _synth(b, base, res, wants, demand, atoms, supply)
            return deriv_weak(d_b, x, atoms.fresh(), base)
        case Contr(z, l, r, b):
            d_b = _synth(b, base, res, wants, demand, atoms, supply)
            tgt = d_b.basis
            for n in (l, r):
                if tgt.get(n) is None:
                    tgt = tgt.extend(n, atoms.fresh())
            d_b = promote(d_b, tgt, res, base)
            return deriv_cont(d_b, z, l, r, base)
        case Cut(h, k):
            d_k = _synth_ctx(k, base, res, demand, atoms, supply)
            heads = []
            for comp in d_k.stoup.parts:
                if isinstance(h, Var):
                    heads.append(deriv_ax(h.name, comp, comp, res))
                else:
                    heads.append(_synth(h, base, res, [], comp, atoms, supply))
            heads = _level(heads, res, base)
            return deriv_cut(heads, d_k, res)
        case Sel(_, _) | Cons(_, _):
            return _synth_ctx(e, base, res, demand, atoms, supply)
    raise SynthesisGap(f"unhandled shape {pretty(e)}")


def _synth_ctx(k: Expr, base: str, res, answer_demand, atoms: _Atoms,
               supply: NameSupply) -> Derivation:
    rs = redexes(k, base, res)
    if rs:
        rx = rs[0]
        reduct = step(k, rx, res, supply)
        d_reduct = _synth_ctx(reduct, base, res, answer_demand, atoms, supply)
        return _expand_at(d_reduct, k, rx, rx.path, res, base, atoms, supply)
    match k:
        case Sel(x, b):
            d_b = _synth(b, base, res, [], answer_demand, atoms, supply)
            if d_b.basis.get(x) is None:
                d_b = promote(d_b, d_b.basis.extend(x, atoms.fresh()), res, base)
            return deriv_sel(d_b, x)
        case Cons(t, tail):
            d_t = _synth(t, base, res, [], None, atoms, supply)
            d_tail = _synth_ctx(tail, base, res, answer_demand, atoms, supply)
            return deriv_arrow_l([d_t], d_tail, res)
        case Weak(x, b):
            d_b = _synth_ctx(b, base, res, answer_demand, atoms, supply)
            return deriv_weak(d_b, x, atoms.fresh(), base)
        case Contr(z, l, r, b):
            d_b = _synth_ctx(b, base, res, answer_demand, atoms, supply)
            tgt = d_b.basis
            for n in (l, r):
                if tgt.get(n) is None:
                    tgt = tgt.extend(n, atoms.fresh())
            d_b = promote(d_b, tgt, res, base)
            return deriv_cont(d_b, z, l, r, base)
    raise SynthesisGap(f"unhandled context shape {pretty(k)}")


def _ensure_vars(d: Derivation, names, atoms: _Atoms, res, base: str) -> Derivation:
    """Promote missing basis variables in with fresh atoms (implicit
    weakening lets axioms absorb them)."""
    tgt = d.basis
    for n in names:
        if tgt.get(n) is None:
            tgt = tgt.extend(n, atoms.fresh())
    return promote(d, tgt, res, base) if tgt != d.basis else d


def _level(prems: list[Derivation], res, base: str) -> list[Derivation]:
    """Equalize the domains of an argument premise group (implicit weakening
    absorbs the extras; with explicit weakening domains already agree)."""
    from .typelemmas import align_group

    if len(prems) > 1 and any(p.subject != prems[0].subject for p in prems):
        prems = align_group(list(prems), supply_for(*[p.subject for p in prems]))
    doms = [p.basis.dom() for p in prems]
    if all(d == doms[0] for d in doms):
        return prems
    union: dict[Name, IType] = {}
    for p in prems:
        for n, t in p.basis.items:
            union[n] = inter(union[n], t) if n in union else t
    out = []
    for p in prems:
        tgt = p.basis
        for n, t in union.items():
            if tgt.get(n) is None:
                tgt = tgt.extend(n, t)
        out.append(promote(p, tgt, res, base))
    return out


# --- inverse lemmas ------------------------------------------------------------


def inverse_subst_typing(d: Derivation, m: Expr, image: Expr, x: Name, res,
                         base: str, atoms: _Atoms, supply: NameSupply,
                         ) -> tuple[Derivation, list[Derivation]]:
    """Undo a substitution at the typing level: from a derivation of
    m[image/x], recover a derivation of m (with x in the basis) and
    derivations of the image, one per component of x's recovered type."""
    from .rewrite import occurs_for_subst

    if not occurs_for_subst(m, x):
        # the image never landed: m[image/x] == m; type the image separately
        dn = _synth(image, base, res, [], None, atoms, supply)
        dm = _shed_image_extras(d, image, res, base)
        dm = promote(dm, dm.basis.extend(x, dn.ty), res, base) \
            if dm.basis.get(x) is None else dm
        return dm, [dn]
    match m:
        case Var(v) if v == x:
            dm = deriv_ax(x, d.ty, d.ty, res)
            return dm, [_shed_foreign(d, image, res, base)]
        case Abs(y, b) | Sel(y, b):
            sub = d.premises[0]
            yd = d.subject.binder  # substitution may have freshened the binder
            if yd != y:
                b = _plain_copy(b, {y: yd})
                y = yd
            dm_b, dns = inverse_subst_typing(sub, b, image, x, res, base,
                                             atoms, supply)
            if dm_b.basis.get(y) is None:
                old = sub.basis.get(y)
                dm_b = promote(dm_b, dm_b.basis.extend(
                    y, old if old is not None else atoms.fresh()), res, base)
            dm = (deriv_arrow_intro(dm_b, y, base) if isinstance(m, Abs)
                  else deriv_sel(dm_b, y))
            return dm, dns
        case App(f, a) | Cut(f, a) | Cons(f, a):
            return _inverse_multi(d, m, image, x, res, base, atoms, supply)
        case Weak(y, b):
            return _inverse_weak(d, m, image, x, res, base, atoms, supply)
        case Contr(z, l, r, b):
            if z == x:
                return _inverse_cont_source(d, m, image, x, res, base, atoms, supply)
            sub = d.premises[0]
            if isinstance(d.subject, Contr) and (d.subject.left, d.subject.right) != (l, r):
                ren = {l: d.subject.left, r: d.subject.right}
                b = _plain_copy(b, ren)
                l, r = d.subject.left, d.subject.right
            dm_b, dns = inverse_subst_typing(sub, b, image, x, res, base,
                                             atoms, supply)
            dm_b = _ensure_vars(dm_b, (l, r), atoms, res, base)
            return deriv_cont(dm_b, z, l, r, base), dns
    raise SynthesisGap(f"inverse substitution: unhandled {pretty(m)}")


def _inverse_multi(d, m, image, x, res, base, atoms, supply):
    from .rewrite import occurs_for_subst

    kids = [m.fun, m.arg] if isinstance(m, App) else (
        [m.head, m.ctx] if isinstance(m, Cut) else [m.head, m.tail])
    if d.rule == "arrow_e":
        groups = [[0], list(range(1, len(d.premises)))]
    else:
        n = len(d.premises)
        groups = [list(range(n - 1)), [n - 1]]
    prems = list(d.premises)
    all_dns: list[Derivation] = []
    for kid, idxs in zip(kids, groups):
        if not occurs_for_subst(kid, x):
            continue
        for i in idxs:
            dm_i, dns = inverse_subst_typing(prems[i], kid, image, x, res,
                                             base, atoms, supply)
            prems[i] = dm_i
            all_dns.extend(dns)
    prems = _level_group(d.rule, prems, res, base)
    if d.rule == "cut":
        heads, dctx = prems[:-1], prems[-1]
        if dctx.stoup != inter(*[p.ty for p in heads]):
            # restored binder types may have drifted: re-type the recovered
            # head at the components the context still demands
            bykey = {pretty_type(p.ty): p for p in heads}
            heads = [bykey.get(pretty_type(comp))
                     or _synth_at_component(kids[0], comp, res, base, atoms,
                                            supply, x, all_dns)
                     for comp in dctx.stoup.parts]
            prems = heads + [dctx]
    rebuilt = _rebuild(d.rule, prems, res)
    return rebuilt, _dedupe_by_type(all_dns)


def _synth_at_component(head, comp, res, base, atoms, supply, x, dns):
    raise SynthesisGap("inverse substitution: context stoup drift "
                       f"needs head re-typing at {pretty_type(comp)}")


def _inverse_weak(d, m, image, x, res, base, atoms, supply):
    y, b = m.erased, m.body
    if y == x:
        # m[image/x] = W[Fv(image)\Fv(b)] b: strip those weakenings, retype
        news = [z for z in fv_ordered(image, res) if z not in fv_set(b, res)]
        cur = d
        shed: dict[Name, IType] = {}
        while isinstance(cur.subject, Weak) and cur.subject.erased in news:
            shed[cur.subject.erased] = cur.basis.get(cur.subject.erased)
            cur = cur.premises[0]
        dn = _synth(image, base, res, [], None, atoms, supply)
        tgt = dn.basis
        for z, t in shed.items():
            old = tgt.get(z)
            if old is None:
                tgt = tgt.extend(z, t)
            else:
                tgt = tgt.remove(z).extend(z, inter(old, t))
        dn = promote(dn, tgt, res, base)
        dm = deriv_weak(cur, x, dn.ty, base)
        return dm, [dn]
    image_fv = fv_set(image, res)
    if y in image_fv:
        # the weakening vanished: m[image/x] = b[image/x]
        dm_b, dns = inverse_subst_typing(d, b, image, x, res, base, atoms, supply)
        wty = basis_union_all(dn.basis for dn in dns).get(y)
        return deriv_weak(dm_b, y, wty if wty is not None else atoms.fresh(),
                          base), dns
    dm_b, dns = inverse_subst_typing(d.premises[0], b, image, x, res, base,
                                     atoms, supply)
    return deriv_weak(dm_b, y, d.basis.get(y), base), dns


def _inverse_cont_source(d, m, image, x, res, base, atoms, supply):
    """m = C[x<l,r]b and m[image/x] = C-prefix over b[n1/l][n2/r]."""
    l, r = m.left, m.right
    free = fv_ordered(image, res)
    # peel the contraction prefix added by the substitution
    cur = d
    pairs: dict[Name, tuple[Name, Name]] = {}
    for z in free:
        if not isinstance(cur.subject, Contr) or cur.subject.source != z:
            raise SynthesisGap("inverse substitution: prefix mismatch")
        pairs[z] = (cur.subject.left, cur.subject.right)
        cur = cur.premises[0]
    ren1 = {pairs[z][0]: z for z in free}
    ren2 = {pairs[z][1]: z for z in free}
    image1 = _plain_copy(image, {z: pairs[z][0] for z in free})
    image2 = _plain_copy(image, {z: pairs[z][1] for z in free})
    intermediate = subst(m.body, image1, l, res, supply.copy())
    inner2, dns2 = inverse_subst_typing(cur, intermediate, image2, r, res,
                                        base, atoms, supply)
    inner1, dns1 = inverse_subst_typing(inner2, m.body, image1, l, res, base,
                                        atoms, supply)
    # rename both copies' typings back to the image's own names
    dns = [rename_in_derivation(dn, ren1) for dn in dns1] + \
          [rename_in_derivation(dn, ren2) for dn in dns2]
    inner1 = _ensure_vars(inner1, (l, r), atoms, res, base)
    dm = deriv_cont(inner1, x, l, r, base)
    return dm, _dedupe_by_type(dns)


def _plain_copy(e: Expr, mapping: dict[Name, Name]) -> Expr:
    from .typelemmas import _plain_rename

    return _plain_rename(e, mapping)


def _shed_image_extras(d: Derivation, image: Expr, res, base: str) -> Derivation:
    """Drop spurious basis entries for the image's free variables: those
    belong on the image-typing side of the split (implicit weakening only)."""
    if res.weakening:
        return d
    out = d
    for z in sorted(fv_set(image, res), key=str):
        if out.basis.get(z) is not None and z not in fv_set(out.subject, res):
            try:
                out = strip_unused(out, z, res, base)
            except ContractError:
                pass  # pinned (e.g. a ghost contraction source): leave it
    return out


def _shed_foreign(d: Derivation, image: Expr, res, base: str) -> Derivation:
    """Drop basis entries foreign to the image from an image typing: they
    were extras pushed in by enclosing binders on the other side."""
    if res.weakening:
        return d
    keep = fv_set(image, res)
    out = d
    for z in sorted(out.basis.dom() - keep, key=str):
        if z in fv_set(out.subject, res):
            continue
        try:
            out = strip_unused(out, z, res, base)
        except ContractError:
            pass
    return out


def _dedupe_by_type(dns: list[Derivation]) -> list[Derivation]:
    out, seen = [], set()
    for dn in dns:
        key = pretty_type(dn.ty)
        if key not in seen:
            seen.add(key)
            out.append(dn)
    return out


def _level_group(rule: str, prems, res, base: str):
    from .typelemmas import _level_argument_domains

    return _level_argument_domains(rule, prems, res, base)


def _rebuild(rule: str, prems, res) -> Derivation:
    if rule == "arrow_e":
        return deriv_arrow_e(prems[0], prems[1:], res)
    if rule == "cut":
        return deriv_cut(prems[:-1], prems[-1], res)
    if rule == "arrow_l":
        return deriv_arrow_l(prems[:-1], prems[-1], res)
    raise ContractError(f"unexpected rule {rule}")


def inverse_append_typing(d: Derivation, k: Expr, k2: Expr, res, base: str,
                          ) -> tuple[list[Derivation], Derivation]:
    """Undo an append at the typing level: from a derivation of k @ k2,
    recover per-component derivations of k and one of k2."""
    match k:
        case Sel(x, _):
            if d.rule != "sel":
                raise SynthesisGap("inverse append: expected a selection")
            dcut = d.premises[0]
            if dcut.rule != "cut":
                raise SynthesisGap("inverse append: expected a cut under selection")
            dvs, dk2 = list(dcut.premises[:-1]), dcut.premises[-1]
            # the selected variable belongs to the k side of the split
            xt = d.stoup
            if dk2.basis.get(x) is not None and not res.weakening:
                dk2 = strip_unused(dk2, x, res, base)
            fixed = []
            for dv in dvs:
                if dv.basis.get(x) is None:
                    dv = promote(dv, dv.basis.extend(x, xt), res, base)
                fixed.append(dv)
            dks = [deriv_sel(dv, x) for dv in fixed]
            return dks, dk2
        case Cons(u, tail):
            if d.rule != "arrow_l":
                raise SynthesisGap("inverse append: expected a left arrow")
            dus, dtail = list(d.premises[:-1]), d.premises[-1]
            inner_ks, dk2 = inverse_append_typing(dtail, tail, k2, res, base)
            dks = [deriv_arrow_l(dus, ik, res) for ik in inner_ks]
            return dks, dk2
        case Weak(y, b):
            inner_ks, dk2 = inverse_append_typing(d.premises[0], b, k2, res, base)
            wty = d.basis.get(y)
            return [deriv_weak(ik, y, wty, base) for ik in inner_ks], dk2
        case Contr(z, l, r, b):
            inner_ks, dk2 = inverse_append_typing(d.premises[0], b, k2, res, base)
            return [deriv_cont(ik, z, l, r, base) for ik in inner_ks], dk2
    raise SynthesisGap(f"inverse append: unhandled context {pretty(k)}")


# --- head subject expansion -------------------------------------------------------


def _expand_at(d: Derivation, e: Expr, redex: Redex, path, res, base: str,
               atoms: _Atoms, supply: NameSupply) -> Derivation:
    """Expand through congruence positions down to the redex, then apply the
    head expansion there."""
    if not path:
        return expand_head(d, e, redex, res, base, atoms, supply,
                           _at_root=True)
    idx = path[0]
    from .syntax import children as _children

    child = _children(e)[idx]
    prems = list(d.premises)
    idxs = _premise_indices(d.rule, idx, len(prems))
    for i in idxs:
        prems[i] = _expand_at(prems[i], child, redex, path[1:], res, base,
                              atoms, supply)
    return _rebuild_parent(d, prems, idx, res, base, atoms, supply)


def _premise_indices(rule: str, child: int, n: int) -> list[int]:
    if rule in ("arrow_i", "arrow_r", "sel", "cont", "cont_t", "cont_k",
                "weak", "weak_t", "weak_k"):
        return [0]
    if rule == "arrow_e":
        return [0] if child == 0 else list(range(1, n))
    if rule in ("cut", "arrow_l"):
        return list(range(n - 1)) if child == 0 else [n - 1]
    raise ContractError(f"rule {rule} has no premise for child {child}")


def _rebuild_parent(d: Derivation, prems: list, child: int, res, base: str,
                    atoms: Optional[_Atoms] = None,
                    supply: Optional[NameSupply] = None) -> Derivation:
    s = d.subject
    atoms = atoms or _Atoms()

    def restore(p, names):
        # re-add binder entries the expansion shed, keeping their old types
        tgt = p.basis
        for n in names:
            if tgt.get(n) is None:
                old = d.premises[0].basis.get(n)
                tgt = tgt.extend(n, old if old is not None else atoms.fresh())
        return promote(p, tgt, res, base) if tgt != p.basis else p

    match d.rule:
        case "arrow_i" | "arrow_r":
            return deriv_arrow_intro(restore(prems[0], (s.binder,)), s.binder, base)
        case "sel":
            return deriv_sel(restore(prems[0], (s.binder,)), s.binder)
        case "weak" | "weak_t" | "weak_k":
            return deriv_weak(prems[0], s.erased, d.basis.get(s.erased), base)
        case "cont" | "cont_t" | "cont_k":
            return deriv_cont(restore(prems[0], (s.left, s.right)),
                              s.source, s.left, s.right, base)
        case "arrow_e":
            args = _level(prems[1:], res, base)
            return deriv_arrow_e(prems[0], args, res)
        case "cut":
            heads, dctx = prems[:-1], prems[-1]
            if dctx.stoup != inter(*[p.ty for p in heads]):
                # a re-typed context may demand fresh components: re-type the
                # expanded head at whatever the new stoup asks for
                supply2 = supply or supply_for(heads[0].subject)
                bykey = {pretty_type(p.ty): p for p in heads}
                heads = [bykey.get(pretty_type(comp))
                         or _synth(heads[0].subject, base, res, [], comp,
                                   atoms, supply2)
                         for comp in dctx.stoup.parts]
            return deriv_cut(_level(heads, res, base), dctx, res)
        case "arrow_l":
            return deriv_arrow_l(_level(prems[:-1], res, base), prems[-1], res)
    raise ContractError(f"cannot rebuild rule {d.rule}")


def expand_head(d: Derivation, e: Expr, redex: Redex, res, base: str,
                atoms: Optional[_Atoms] = None,
                supply: Optional[NameSupply] = None, _at_root: bool = False) -> Derivation:
    """From a typing of the one-step reduct of e (contracting redex at the
    root region), build a typing of e at the same type."""
    atoms = atoms or _Atoms()
    supply = supply or supply_for(e, d.subject)
    supply.observe(e)
    supply.observe(d.subject)
    if redex.path != () and not _at_root:
        return _expand_at(d, e, redex, redex.path, res, base, atoms, supply)
    node = redex.variant
    for _ in range(redex.depth):
        node = node.body  # type: ignore[attr-defined]
    ops_above = redex.depth
    cur = d
    shed: list[tuple] = []
    for _ in range(ops_above):
        sub = cur.subject
        if isinstance(sub, Weak):
            shed.append(("w", sub.erased, cur.basis.get(sub.erased)))
        elif isinstance(sub, Contr):
            shed.append(("c", sub.source, sub.left, sub.right))
        else:
            raise ContractError("reduct does not carry the expected prefix")
        cur = cur.premises[0]
    inner = _expand_rule(cur, node, redex.rule, res, base, atoms, supply)
    for op in reversed(shed):
        if op[0] == "w":
            inner = deriv_weak(inner, op[1], op[2], base)
        else:
            inner = deriv_cont(inner, op[1], op[2], op[3], base)
    if redex.moves:
        # the epsilon moves are involutions; replaying them in reverse
        # returns the subject to the original arrangement
        from .typelemmas import transport_moves

        inner = transport_moves(inner, tuple(reversed(redex.moves)), base)
    return inner


def _expand_rule(d: Derivation, e: Expr, rule: str, res, base: str,
                 atoms: _Atoms, supply: NameSupply) -> Derivation:
    match rule, e:
        case "beta", App(Abs(x, m), n):
            dm, dns = inverse_subst_typing(d, m, n, x, res, base, atoms, supply)
            dlam = deriv_arrow_intro(dm, x, base)
            dns = _level(dns, res, base)
            return deriv_arrow_e(dlam, dns, res)
        case "beta", Cut(Abs(x, t), Cons(u, k)):
            if d.rule != "cut" or d.premises[-1].rule != "sel":
                raise SynthesisGap("beta expansion: unexpected reduct derivation")
            dus, dsel = list(d.premises[:-1]), d.premises[-1]
            dinner = dsel.premises[0]
            if dinner.rule != "cut":
                raise SynthesisGap("beta expansion: unexpected selection body")
            dts, dk = list(dinner.premises[:-1]), dinner.premises[-1]
            xt = dsel.stoup
            if dk.basis.get(x) is not None:
                dk = strip_unused(dk, x, res, base)  # x belongs to the lambda side
            dus = [strip_unused(du, x, res, base)
                   if du.basis.get(x) is not None else du for du in dus]
            lam_prems = []
            for dt in dts:
                p = dt
                if p.basis.get(x) is None:
                    p = promote(p, p.basis.extend(x, xt), res, base)
                elif p.basis.get(x) != xt:
                    p = promote(p, p.basis.remove(x).extend(x, xt), res, base)
                lam_prems.append(deriv_arrow_intro(p, x, base))
            dcons = deriv_arrow_l(_level(dus, res, base), dk, res)
            return deriv_cut(_level(lam_prems, res, base), dcons, res)
        case "sigma", Cut(t, Sel(x, v)):
            dv, dts = inverse_subst_typing(d, v, t, x, res, base, atoms, supply)
            dsel = deriv_sel(dv, x)
            return deriv_cut(_level(dts, res, base), dsel, res)
        case "pi", Cut(Cut(t, k), k2):
            if d.rule != "cut":
                raise SynthesisGap("pi expansion: expected a cut")
            dts, dapp = list(d.premises[:-1]), d.premises[-1]
            dks, dk2 = inverse_append_typing(dapp, k, k2, res, base)
            heads = [deriv_cut(_level(dts, res, base), dk, res) for dk in dks]
            return deriv_cut(_level(heads, res, base), dk2, res)
        case "mu", Sel(x, Cut(Var(_), k)):
            stp = d.stoup
            axs = [deriv_ax(x, stp, comp, res) for comp in stp.parts]
            dcut = deriv_cut(axs, d, res)
            return deriv_sel(dcut, x)
        case "gamma0", Contr(z, l, r, Var(y)):
            tgt = d.basis
            for n, t in ((l, atoms.fresh()), (r, atoms.fresh())):
                tgt = tgt.extend(n, t)
            return deriv_cont(promote(d, tgt, res, base), z, l, r, base)
        case "gamma0'", Contr(z, l, r, Var(_)):
            # reduct is Var z typed at S; rebuild the erasing contraction
            zty = d.basis.get(z)
            ax = deriv_ax(l, zty, d.ty, res, extra=d.basis.remove(z))
            ax = promote(ax, ax.basis.extend(r, atoms.fresh()), res, base)
            return deriv_cont(ax, z, l, r, base)
        case "gamma1", Contr(z, l, r, Abs(y, _)):
            if d.rule not in ("arrow_i", "arrow_r"):
                raise SynthesisGap("gamma1 expansion: expected an abstraction")
            dc = d.premises[0]
            dm = dc.premises[0]
            return deriv_cont(deriv_arrow_intro(dm, y, base), z, l, r, base)
        case "gamma4", Contr(z, l, r, Sel(y, _)):
            dc = d.premises[0]
            dm = dc.premises[0]
            return deriv_cont(deriv_sel(dm, y), z, l, r, base)
        case ("gamma2" | "gamma3" | "gamma5" | "gamma6"), Contr(z, l, r, _):
            return _expand_push_cont(d, e, rule, res, base)
        case ("omega1" | "omega4"), (Abs(x, Weak(y, _)) | Sel(x, Weak(y, _))):
            dw = d
            if dw.rule not in ("weak", "weak_t", "weak_k"):
                raise SynthesisGap("omega expansion: expected a weakening")
            dinner = dw.premises[0]
            wty = dw.basis.get(y)
            body = dinner.premises[0]
            rebuilt = deriv_weak(body, y, wty, base)
            return (deriv_arrow_intro(rebuilt, x, base) if rule == "omega1"
                    else deriv_sel(rebuilt, x))
        case ("omega2" | "omega3" | "omega5" | "omega6"), _:
            return _expand_push_weak(d, e, rule, res, base, atoms)
        case "gammaomega1", Contr(z, l, r, Weak(y, _)):
            dc = d.premises[0]
            dm = dc.premises[0]
            wty = d.basis.get(y)
            return deriv_cont(deriv_weak(dm, y, wty, base), z, l, r, base)
        case "gammaomega2", Contr(z, l, r, Weak(_, body)):
            ren = rename_in_derivation(d, {z: r})
            dw = deriv_weak(ren, l, atoms.fresh(), base)
            return deriv_cont(dw, z, l, r, base)
    raise SynthesisGap(f"head expansion for {rule} at {pretty(e)}")


def _expand_push_cont(d: Derivation, e: Expr, rule: str, res, base: str) -> Derivation:
    """Invert gamma2/3/5/6: pull the contraction back out of the reduct."""
    z, l, r = e.source, e.left, e.right
    from_first = rule in ("gamma2", "gamma5")
    prems = list(d.premises)
    if d.rule == "arrow_e":
        idxs = [0] if from_first else list(range(1, len(prems)))
    else:
        n = len(prems)
        idxs = list(range(n - 1)) if from_first else [n - 1]
    for i in idxs:
        dc = prems[i]
        if dc.rule not in ("cont", "cont_t", "cont_k"):
            raise SynthesisGap(f"{rule} expansion: expected a contraction premise")
        prems[i] = dc.premises[0]
    inner = _rebuild(d.rule, _level_group(d.rule, prems, res, base), res)
    inner = _ensure_vars(inner, (l, r), _Atoms(), res, base)
    return deriv_cont(inner, z, l, r, base)


def _expand_push_weak(d: Derivation, e: Expr, rule: str, res, base: str,
                      atoms: _Atoms) -> Derivation:
    from_first = rule in ("omega2", "omega5")
    kids = {
        App: lambda m: (m.fun, m.arg), Cut: lambda m: (m.head, m.ctx),
        Cons: lambda m: (m.head, m.tail),
    }[type(e)](e)
    wnode = kids[0] if from_first else kids[1]
    x = wnode.erased
    if d.rule in ("weak", "weak_t", "weak_k") and d.subject.erased == x:
        # non-erasing case: the reduct is W[x](..): unwrap and push back in
        wty = d.basis.get(x)
        dinner = d.premises[0]
        prems = list(dinner.premises)
        idxs = ([0] if from_first else list(range(1, len(prems)))) \
            if dinner.rule == "arrow_e" else (
                list(range(len(prems) - 1)) if from_first else [len(prems) - 1])
        for i in idxs:
            prems[i] = deriv_weak(prems[i], x, wty, base)
        return _rebuild(dinner.rule, prems, res)
    # erasing case: x is free on the other side; weaken with a component of
    # its type there so the union collapses back
    prems = list(d.premises)
    idxs = ([0] if from_first else list(range(1, len(prems)))) \
        if d.rule == "arrow_e" else (
            list(range(len(prems) - 1)) if from_first else [len(prems) - 1])
    other = [i for i in range(len(prems)) if i not in idxs]
    xty = _merged([prems[i] for i in other], x)
    wty = xty if xty is not None else itype_of(atoms.fresh())
    for i in idxs:
        prems[i] = deriv_weak(prems[i], x, wty, base)
    return _rebuild(d.rule, prems, res)


def _merged(prems, x: Name) -> Optional[IType]:
    parts = []
    for p in prems:
        t = p.basis.get(x)
        if t is not None:
            parts.extend(t.parts)
    return inter(*parts) if parts else None
