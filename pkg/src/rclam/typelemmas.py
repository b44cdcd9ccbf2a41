"""Executable typing lemmas: basis surgery, the substitution and append
lemmas as derivation transformers, equivalence transport, and subject
reduction.

Everything here rebuilds derivations out of existing ones; check_derivation
remains the independent oracle.  A SubjectStepGap signals a case where the
stated subject-reduction property cannot be realized for the derivation at
hand (see the pi rule: mixed per-premise context typings have no common
reassembly); it is raised, never papered over.
"""

from __future__ import annotations

from typing import Optional, Sequence

from .rewrite import (
    ContractError, Redex, append, split_chain, subst,
)
from .syntax import (
    CONTEXT, LJ, ND, TERM,
    Abs, App, Cons, Contr, Cut, Expr, IType, Name, NameSupply, Path, Sel,
    TArrow, TypeExpr, Var, Weak,
    alpha_eq, inter, itype_of, pretty, pretty_type, replace_child, sort_of,
    supply_for,
)
from .typecheck import (
    EMPTY, Basis, Derivation, Judgment,
    basis_union_all, deriv_arrow_e, deriv_arrow_intro, deriv_arrow_l,
    deriv_ax, deriv_cont, deriv_cut, deriv_sel, deriv_weak,
)
from .wellformed import fv_ordered, fv_set


class SubjectStepGap(ContractError):
    """Subject reduction has no reassembly for this derivation shape."""


# --- basis surgery ------------------------------------------------------------


def promote(d: Derivation, target: Basis, res, base: str) -> Derivation:
    """Rebuild d so its conclusion basis becomes target.

    target must extend the current basis pointwise (more intersection
    components per variable; brand-new variables only when weakening is
    implicit, where axioms absorb them).
    """
    cur = d.basis
    for n, t in cur.items:
        tt = target.get(n)
        if tt is None or not set(map(str, t.parts)) <= set(map(str, tt.parts)):
            raise ContractError(f"promotion target does not extend the basis at {n}")
    new = [kv for kv in target.items if cur.get(kv[0]) is None]
    if new and res.weakening:
        raise ContractError("cannot add basis variables with explicit weakening")
    if target == cur:
        return d
    return _promote(d, target, res, base)


def _promote(d: Derivation, target: Basis, res, base: str) -> Derivation:
    if d.basis == target:
        return d
    j = d.conclusion
    match d.rule:
        case "ax_iw":
            return Derivation("ax_iw", Judgment(target, None, j.subject, j.ty))
        case "ax_ew":
            x = j.subject.name
            if target.dom() != {x}:
                raise ContractError("singleton axiom basis cannot gain variables")
            return Derivation("ax_ew", Judgment(target, None, j.subject, j.ty))
        case "arrow_i" | "arrow_r":
            x = j.subject.binder
            p = d.premises[0]
            sub = _promote(p, target.extend(x, p.basis.get(x)), res, base)
            return deriv_arrow_intro(sub, x, base)
        case "sel":
            x = j.subject.binder
            p = d.premises[0]
            sub = _promote(p, target.extend(x, p.basis.get(x)), res, base)
            return deriv_sel(sub, x)
        case "weak" | "weak_t" | "weak_k":
            x = j.subject.erased
            p = d.premises[0]
            sub = _promote(p, target.remove(x), res, base)
            return deriv_weak(sub, x, target.get(x), base)
        case "cont" | "cont_t" | "cont_k":
            z, l, r = j.subject.source, j.subject.left, j.subject.right
            p = d.premises[0]
            a, b = p.basis.get(l), p.basis.get(r)
            extra = [s for s in target.get(z).parts
                     if all(s != q for q in inter(a, b).parts)]
            ptarget = target.remove(z).extend(l, inter(a, *extra)).extend(r, b)
            sub = _promote(p, ptarget, res, base)
            return deriv_cont(sub, z, l, r, base)
        case "arrow_e" | "cut" | "arrow_l":
            # deepen a variable at the first premise already carrying it;
            # brand-new variables go to the solo premise so that the aligned
            # argument group keeps its shared domain
            solo = 0 if d.rule == "arrow_e" else len(d.premises) - 1
            prems = list(d.premises)
            ptargets = [p.basis for p in prems]
            for n, t in target.items:
                have = _merged_type(prems, n, skip=None)
                missing = [s for s in t.parts
                           if have is None or all(s != q for q in have.parts)]
                if not missing:
                    continue
                where = solo
                for i, p in enumerate(prems):
                    if p.basis.get(n) is not None:
                        where = i
                        break
                old = ptargets[where].get(n)
                ptargets[where] = ptargets[where].remove(n).extend(
                    n, inter(old, *missing) if old else inter(*missing))
            prems = [_promote(p, t, res, base) if t != p.basis else p
                     for p, t in zip(prems, ptargets)]
            rebuilt = _rebuild_multi(d.rule, prems, res)
            if rebuilt.basis != target:
                raise ContractError("promotion could not reach the target basis")
            return rebuilt
    raise ContractError(f"promotion does not handle rule {d.rule}")


def _merged_type(prems, n: Name, skip: Optional[int] = None) -> Optional[IType]:
    parts = []
    for i, p in enumerate(prems):
        if skip is not None and i == skip:
            continue
        t = p.basis.get(n)
        if t is not None:
            parts.extend(t.parts)
    return inter(*parts) if parts else None


def _rebuild_multi(rule: str, prems, res) -> Derivation:
    if rule == "arrow_e":
        return deriv_arrow_e(prems[0], prems[1:], res)
    if rule == "cut":
        return deriv_cut(prems[:-1], prems[-1], res)
    return deriv_arrow_l(prems[:-1], prems[-1], res)


def strip_unused(d: Derivation, x: Name, res, base: str) -> Derivation:
    """Drop a basis variable that never reaches an axiom (w implicit only)."""
    if res.weakening:
        raise ContractError("bases are rigid with explicit weakening")
    if x in fv_set(d.subject, res):
        raise ContractError(f"{x} occurs in the subject; cannot strip")
    if d.basis.get(x) is None:
        return d
    return _strip(d, x, res, base)


def _strip(d: Derivation, x: Name, res, base: str) -> Derivation:
    if d.basis.get(x) is None:
        return d
    j = d.conclusion
    match d.rule:
        case "ax_iw":
            return Derivation("ax_iw", Judgment(j.basis.remove(x), None, j.subject, j.ty))
        case "arrow_i" | "arrow_r":
            return deriv_arrow_intro(_strip(d.premises[0], x, res, base), j.subject.binder, base)
        case "sel":
            return deriv_sel(_strip(d.premises[0], x, res, base), j.subject.binder)
        case "weak" | "weak_t" | "weak_k":
            if j.subject.erased == x:
                raise ContractError("cannot strip the erased variable itself")
            return deriv_weak(_strip(d.premises[0], x, res, base), j.subject.erased,
                              j.basis.get(j.subject.erased), base)
        case "cont" | "cont_t" | "cont_k":
            if j.subject.source == x:
                raise ContractError("cannot strip a contraction source")
            return deriv_cont(_strip(d.premises[0], x, res, base),
                              j.subject.source, j.subject.left, j.subject.right, base)
        case "arrow_e":
            prems = [_strip(p, x, res, base) for p in d.premises]
            return deriv_arrow_e(prems[0], prems[1:], res)
        case "cut" | "arrow_l":
            prems = [_strip(p, x, res, base) for p in d.premises]
            return _rebuild_multi(d.rule, prems, res)
    raise ContractError(f"strip does not handle rule {d.rule}")


def rename_in_derivation(d: Derivation, mapping: dict[Name, Name]) -> Derivation:
    """Rename free variables throughout a derivation; targets must be fresh."""
    j = d.conclusion
    basis = Basis.of(*[(mapping.get(n, n), t) for n, t in j.basis.items])
    subject = _plain_rename(j.subject, mapping)
    j2 = Judgment(basis, j.stoup, subject, j.ty)
    return Derivation(d.rule, j2, tuple(rename_in_derivation(p, mapping)
                                        for p in d.premises))


def _plain_rename(e: Expr, m: dict[Name, Name]) -> Expr:
    match e:
        case Var(n):
            return Var(m.get(n, n))
        case Abs(x, b):
            return Abs(m.get(x, x), _plain_rename(b, m))
        case Sel(x, b):
            return Sel(m.get(x, x), _plain_rename(b, m))
        case App(f, a):
            return App(_plain_rename(f, m), _plain_rename(a, m))
        case Cut(f, a):
            return Cut(_plain_rename(f, m), _plain_rename(a, m))
        case Cons(f, a):
            return Cons(_plain_rename(f, m), _plain_rename(a, m))
        case Weak(x, b):
            return Weak(m.get(x, x), _plain_rename(b, m))
        case Contr(s, l, r, b):
            return Contr(m.get(s, s), m.get(l, l), m.get(r, r), _plain_rename(b, m))
    raise TypeError(e)


def realign_subject(d: Derivation, target: Expr,
                    supply: Optional[NameSupply] = None) -> Derivation:
    """Rename bound names so d's subject becomes literally target (the two
    must be alpha-equivalent)."""
    if d.subject == target:
        return d
    supply = supply or supply_for(d.subject, target)
    mapping: dict[Name, Name] = {}

    def walk(a: Expr, b: Expr) -> None:
        if type(a) is not type(b):
            raise ContractError("realign: subjects differ structurally")
        match a, b:
            case Var(_), Var(_):
                return
            case (Abs(x, p), Abs(y, q)) | (Sel(x, p), Sel(y, q)):
                if x != y:
                    mapping[x] = y
                walk(p, q)
            case (App(f, u), App(g, v)) | (Cut(f, u), Cut(g, v)) | (Cons(f, u), Cons(g, v)):
                walk(f, g)
                walk(u, v)
            case Weak(_, p), Weak(_, q):
                walk(p, q)
            case Contr(_, l1, r1, p), Contr(_, l2, r2, q):
                if l1 != l2:
                    mapping[l1] = l2
                if r1 != r2:
                    mapping[r1] = r2
                walk(p, q)

    walk(d.subject, target)
    temps = {n: supply.fresh(n.base) for n in mapping}
    out = rename_in_derivation(d, temps)
    out = rename_in_derivation(out, {temps[n]: mapping[n] for n in mapping})
    if out.subject != target:
        raise ContractError("realign: could not match the target subject")
    return out


def align_group(prems: list[Derivation], supply: Optional[NameSupply] = None) -> list[Derivation]:
    """Rename alpha-variant premises so a multi-premise group types one
    literal subject (the first premise's)."""
    target = prems[0].subject
    return [prems[0]] + [
        realign_subject(p, target, supply) if p.subject != target else p
        for p in prems[1:]
    ]


# --- substitution lemma --------------------------------------------------------


def subst_typing(d: Derivation, x: Name, dns: Sequence[Derivation], res, base: str,
                 supply: Optional[NameSupply] = None) -> Derivation:
    r"""From a typing of the subject with x : T1 /\ ... /\ Tn and typings of
    the image at each Ti, build a typing of subject[image/x]."""
    supply = supply or supply_for(d.subject, *[p.subject for p in dns])
    xty = d.basis.get(x)
    if xty is None:
        raise ContractError(f"{x} is not in the basis")
    bykey = {}
    for dn in dns:
        bykey.setdefault(pretty_type(dn.ty), dn)
    missing = [pretty_type(p) for p in xty.parts if pretty_type(p) not in bykey]
    if missing:
        raise ContractError(f"no derivation for components: {', '.join(missing)}")
    target = d.basis.remove(x).union_c(
        basis_union_all(dn.basis for dn in dns), res)
    out = _subst_t(d, x, bykey, res, base, supply)
    return promote(out, target, res, base)


def _pick(bykey: dict, ty: IType) -> list[Derivation]:
    return [bykey[pretty_type(p)] for p in ty.parts]


def _subst_t(d: Derivation, x: Name, bykey: dict, res, base: str,
             supply: NameSupply) -> Derivation:
    """Core recursion; the conclusion basis may undershoot the final target
    (unused image components), promote() levels it at the top."""
    from .rewrite import occurs_for_subst

    j = d.conclusion
    if not occurs_for_subst(j.subject, x):
        return strip_unused(d, x, res, base)
    match d.rule:
        case "ax_iw" | "ax_ew":
            dn = bykey[pretty_type(j.ty)]
            if d.rule == "ax_iw":
                extra = j.basis.remove(x)
                merged = dn.basis.union(extra) if extra.items else dn.basis
                return promote(dn, merged, res, base)
            return dn
        case "arrow_i" | "arrow_r":
            sub = _subst_t(d.premises[0], x, bykey, res, base, supply)
            return deriv_arrow_intro(sub, j.subject.binder, base)
        case "sel":
            sub = _subst_t(d.premises[0], x, bykey, res, base, supply)
            return deriv_sel(sub, j.subject.binder)
        case "weak" | "weak_t" | "weak_k":
            return _subst_weak(d, x, bykey, res, base, supply)
        case "cont" | "cont_t" | "cont_k":
            if j.subject.source == x:
                return _subst_cont_source(d, x, bykey, res, base, supply)
            sub = _subst_t(d.premises[0], x, bykey, res, base, supply)
            return deriv_cont(sub, j.subject.source, j.subject.left,
                              j.subject.right, base)
        case "arrow_e" | "cut" | "arrow_l":
            prems = [
                _subst_t(p, x, _restrict(bykey, p.basis.get(x)), res, base, supply)
                if p.basis.get(x) is not None
                else p
                for p in d.premises
            ]
            prems = _level_argument_domains(d.rule, prems, res, base)
            return _rebuild_multi_any(d.rule, prems, res)
    raise ContractError(f"substitution lemma does not handle rule {d.rule}")


def _restrict(bykey: dict, ty: Optional[IType]) -> dict:
    if ty is None:
        return bykey
    keys = {pretty_type(p) for p in ty.parts}
    return {k: v for k, v in bykey.items() if k in keys}


def _rebuild_multi_any(rule: str, prems, res) -> Derivation:
    if rule == "arrow_e":
        return deriv_arrow_e(prems[0], prems[1:], res)
    if rule == "cut":
        return deriv_cut(prems[:-1], prems[-1], res)
    return deriv_arrow_l(prems[:-1], prems[-1], res)


def _level_argument_domains(rule: str, prems, res, base: str):
    """Multi-premise groups must share a domain; deepen with implicit
    weakening where substitution spread the image bases unevenly."""
    group = prems[1:] if rule == "arrow_e" else prems[:-1]
    doms = [p.basis.dom() for p in group]
    if all(dm == doms[0] for dm in doms):
        return prems
    union: dict[Name, IType] = {}
    for p in group:
        for n, t in p.basis.items:
            union[n] = inter(union[n], t) if n in union else t
    leveled = []
    for p in group:
        tgt = p.basis
        for n, t in union.items():
            if tgt.get(n) is None:
                tgt = tgt.extend(n, t)
        leveled.append(promote(p, tgt, res, base))
    if rule == "arrow_e":
        return [prems[0], *leveled]
    return [*leveled, prems[-1]]


def _subst_weak(d: Derivation, x: Name, bykey: dict, res, base: str,
                supply: NameSupply) -> Derivation:
    j = d.conclusion
    y = j.subject.erased
    p = d.premises[0]
    if y == x:
        # (W[x] m)[n/x]: weaken the untouched body over the image's news
        body_fv = fv_set(p.subject, res)
        image = next(iter(bykey.values())).subject
        delta = basis_union_all(dn.basis for dn in bykey.values())
        out = p
        news = [z for z in fv_ordered(image, res) if z not in body_fv]
        for z in reversed(news):  # first free name ends up outermost
            t = delta.get(z)
            if t is None:
                raise ContractError(f"image variable {z} untyped in its bases")
            out = deriv_weak(out, z, t, base)
        return out
    sub = _subst_t(p, x, bykey, res, base, supply)
    image_fv = set().union(*[fv_set(dn.subject, res) for dn in bykey.values()])
    if y in image_fv:
        return sub  # the weakened name is now genuinely used
    return deriv_weak(sub, y, j.basis.get(y), base)


def _subst_cont_source(d: Derivation, x: Name, bykey: dict, res, base: str,
                       supply: NameSupply) -> Derivation:
    """Substitution at a contraction source: two renamed image copies, then
    a contraction prefix zipped over the image's free variables."""
    j = d.conclusion
    l, r = j.subject.left, j.subject.right
    p = d.premises[0]
    dn0 = next(iter(bykey.values()))
    image = dn0.subject
    free = fv_ordered(image, res)
    ren1 = {z: supply.fresh(z.base) for z in free}
    ren2 = {z: supply.fresh(z.base) for z in free}
    by1 = {k: rename_in_derivation(v, ren1) for k, v in bykey.items()}
    by2 = {k: rename_in_derivation(v, ren2) for k, v in bykey.items()}
    lty, rty = p.basis.get(l), p.basis.get(r)
    step1 = _subst_t(p, l, _restrict(by1, lty), res, base, supply)
    step2 = _subst_t(step1, r, _restrict(by2, rty), res, base, supply)
    out = step2
    for z in reversed(free):
        z1, z2 = ren1[z], ren2[z]
        if out.basis.get(z1) is None or out.basis.get(z2) is None:
            fill = basis_union_all(dv.basis for dv in by1.values()).get(z1)
            fill2 = basis_union_all(dv.basis for dv in by2.values()).get(z2)
            tgt = out.basis
            if out.basis.get(z1) is None:
                tgt = tgt.extend(z1, fill)
            if out.basis.get(z2) is None:
                tgt = tgt.extend(z2, fill2)
            out = promote(out, tgt, res, base)
        out = deriv_cont(out, z, z1, z2, base)
    return out


# --- append lemma --------------------------------------------------------------


def append_typing(dks: Sequence[Derivation], dk2: Derivation, res, base: str = LJ,
                  supply: Optional[NameSupply] = None) -> Derivation:
    """From typings of k at every component of dk2's stoup, build a typing
    of k @ k'.  The k-typings may carry different stoups; they are merged
    structurally (selection bases merge variable types; cons nodes pool
    their head premises under the shared domain)."""
    supply = supply or supply_for(dks[0].subject, dk2.subject)
    if dk2.stoup is None:
        raise ContractError("second derivation must type a context")
    want = [pretty_type(p) for p in dk2.stoup.parts]
    have = [pretty_type(d.ty) for d in dks]
    if sorted(set(want)) != sorted(set(have)):
        raise ContractError("append: k-typings must cover the stoup components")
    return _append_t(list(dks), dk2, res, base, supply)


def _append_t(dks: list[Derivation], dk2: Derivation, res, base: str,
              supply: NameSupply) -> Derivation:
    k = dks[0].subject
    match k:
        case Sel(x, _):
            prems = []
            for dk in dks:
                if dk.rule != "sel":
                    raise ContractError("expected selection derivations")
                prems.append(dk.premises[0])
            prems = _level_argument_domains("cut", prems + [dk2], res, base)[:-1]
            cut = deriv_cut(prems, dk2, res)
            return deriv_sel(cut, x)
        case Cons(_, _):
            heads, tails = [], []
            for dk in dks:
                if dk.rule != "arrow_l":
                    raise ContractError("expected left-arrow derivations")
                heads.extend(dk.premises[:-1])
                tails.append(dk.premises[-1])
            inner = _append_t(tails, dk2, res, base, supply)
            uniq, seen = [], set()
            for h in heads:
                key = pretty_type(h.ty)
                if key not in seen:
                    seen.add(key)
                    uniq.append(h)
            uniq = _level_argument_domains("arrow_l", uniq + [inner], res, base)[:-1]
            return deriv_arrow_l(uniq, inner, res)
        case Weak(y, _):
            subs = [dk.premises[0] for dk in dks]
            inner = _append_t(subs, dk2, res, base, supply)
            ty = inter(*[dk.basis.get(y) for dk in dks])
            return deriv_weak(inner, y, ty, base)
        case Contr(z, l, r, _):
            subs = [dk.premises[0] for dk in dks]
            inner = _append_t(subs, dk2, res, base, supply)
            return deriv_cont(inner, z, l, r, base)
    raise ContractError(f"append lemma does not handle context {pretty(k)}")


# --- equivalence transport -------------------------------------------------------


def transport_moves(d: Derivation, moves, base: str) -> Derivation:
    """Replay an epsilon-move script (from a Redex) on a derivation."""
    by_child: dict[Path, list] = {}
    for rel, m in moves:
        by_child.setdefault(rel, []).append(m)
    out = d
    for rel, ms in sorted(by_child.items()):
        out = _transport_at(out, rel, ms, base)
    return out


def _transport_at(d: Derivation, rel: Path, ms, base: str) -> Derivation:
    if not rel:
        return _apply_chain_moves(d, ms, base)
    idx = rel[0]
    return _map_child(d, idx, lambda p: _transport_at(p, rel[1:], ms, base), base)


def _premises_for_child(d: Derivation, idx: int) -> list[int]:
    rule = d.rule
    if rule in ("arrow_i", "arrow_r", "sel", "cont", "cont_t", "cont_k",
                "weak", "weak_t", "weak_k"):
        if idx != 0:
            raise ContractError("no such child")
        return [0]
    if rule == "arrow_e":
        return [0] if idx == 0 else list(range(1, len(d.premises)))
    if rule in ("cut", "arrow_l"):
        n = len(d.premises)
        return list(range(n - 1)) if idx == 0 else [n - 1]
    raise ContractError(f"rule {rule} has no children")


def _map_child(d: Derivation, idx: int, f, base: str) -> Derivation:
    prems = list(d.premises)
    for i in _premises_for_child(d, idx):
        prems[i] = f(prems[i])
    subject = replace_child(d.subject, idx, prems[_premises_for_child(d, idx)[0]].subject)
    j = Judgment(d.basis, d.stoup, subject, d.ty)
    return Derivation(d.rule, j, tuple(prems))


def _chain_unzip(d: Derivation):
    ops = []
    cur = d
    while cur.rule in ("weak", "weak_t", "weak_k", "cont", "cont_t", "cont_k"):
        s = cur.subject
        if isinstance(s, Weak):
            ops.append(("w", s.erased, cur.basis.get(s.erased)))
        else:
            ops.append(("c", s.source, s.left, s.right))
        cur = cur.premises[0]
    return ops, cur


def _chain_zip(ops, core: Derivation, base: str) -> Derivation:
    d = core
    for op in reversed(ops):
        if op[0] == "w":
            d = deriv_weak(d, op[1], op[2], base)
        else:
            d = deriv_cont(d, op[1], op[2], op[3], base)
    return d


def _apply_chain_moves(d: Derivation, ms, base: str) -> Derivation:
    ops, core = _chain_unzip(d)
    for kind, i in ms:
        if kind == "e2":
            z, l, r = ops[i][1], ops[i][2], ops[i][3]
            ops[i] = ("c", z, r, l)
        elif kind == "e1":
            ops[i], ops[i + 1] = ops[i + 1], ops[i]
        elif kind == "e4":
            ops[i], ops[i + 1] = ops[i + 1], ops[i]
        elif kind == "e3":
            _, x, y, z = ops[i]
            _, y2, u, v = ops[i + 1]
            if y2 != y:
                raise ContractError("invalid e3 transport")
            ops[i] = ("c", x, y, u)
            ops[i + 1] = ("c", y, z, v)
        else:
            raise ContractError(f"unknown move {kind}")
    return _chain_zip(ops, core, base)


# --- subject reduction -----------------------------------------------------------


def subject_step(d: Derivation, redex: Redex, res, base: str,
                 supply: Optional[NameSupply] = None) -> Derivation:
    """Retype the one-step reduct of the derivation's subject: the conclusion
    basis, stoup, and type are preserved."""
    supply = supply or supply_for(d.subject)
    supply.observe(d.subject)
    original = d.conclusion
    out = _step_at(d, redex.path, redex, res, base, supply)
    if out.basis != original.basis or out.ty != original.ty or out.stoup != original.stoup:
        raise SubjectStepGap("conclusion drifted during subject reduction")
    return out


def _step_at(d: Derivation, path: Path, redex: Redex, res, base: str,
             supply: NameSupply) -> Derivation:
    if path:
        return _map_child(d, path[0],
                          lambda p: _step_at(p, path[1:], redex, res, base, supply),
                          base)
    d = transport_moves(d, redex.moves, base)
    if redex.depth:
        ops, core = _chain_unzip(d)
        above, below = ops[:redex.depth], ops[redex.depth:]
        inner = _chain_zip(below, core, base)
        stepped = _fire_typed(inner, redex.rule, res, base, supply)
        return _chain_zip(above, stepped, base)
    return _fire_typed(d, redex.rule, res, base, supply)


def _fire_typed(d: Derivation, rule: str, res, base: str,
                supply: NameSupply) -> Derivation:
    j = d.conclusion
    target = j.basis
    match rule:
        case "beta" if base == ND:
            dfun, dargs = d.premises[0], list(d.premises[1:])
            x = dfun.subject.binder
            body = dfun.premises[0]
            out = subst_typing(body, x, dargs, res, base, supply)
            return promote(out, target, res, base)
        case "beta":
            # (\x.t)(u :: k) -> u (x^. t k): reassemble per the proof tree
            dfun, dcons = d.premises[0], d.premises[-1]
            dus, dtail = list(dcons.premises[:-1]), dcons.premises[-1]
            lam_prems = [p.premises[0] for p in [dfun, *d.premises[1:-1]]]
            dom = itype_of(dfun.ty.dom)
            uty = inter(*[p.ty for p in dus])
            if dom != uty:
                raise SubjectStepGap("beta: argument and domain intersections differ")
            x = dfun.subject.binder
            if dtail.basis.get(x) is not None:
                dtail = strip_unused(dtail, x, res, base)
            dus = [strip_unused(du, x, res, base)
                   if du.basis.get(x) is not None else du for du in dus]
            leveled = _level_argument_domains("cut", lam_prems + [dtail], res, base)[:-1]
            inner_cut = deriv_cut(leveled, dtail, res)
            dsel = deriv_sel(inner_cut, x)
            prems = _level_argument_domains("cut", dus + [dsel], res, base)[:-1]
            out = deriv_cut(prems, dsel, res)
            return promote(out, target, res, base)
        case "sigma":
            dts, dsel = list(d.premises[:-1]), d.premises[-1]
            x = dsel.subject.binder
            out = subst_typing(dsel.premises[0], x, dts, res, base, supply)
            return promote(out, target, res, base)
        case "pi":
            dheads, dk2 = list(d.premises[:-1]), d.premises[-1]
            dks, terms = [], []
            for h in dheads:
                if h.rule != "cut":
                    raise SubjectStepGap("pi: head premises must be cuts")
                terms.extend(h.premises[:-1])
                dks.append(h.premises[-1])
            dapp = append_typing(dks, dk2, res, base, supply)
            bykey = {pretty_type(t.ty): t for t in terms}
            try:
                picked = [bykey[pretty_type(p)] for p in dapp.stoup.parts]
            except KeyError:
                raise SubjectStepGap(
                    "pi: no common reassembly for mixed context typings") from None
            picked = _level_argument_domains("cut", picked + [dapp], res, base)[:-1]
            out = deriv_cut(picked, dapp, res)
            return promote(out, target, res, base)
        case "mu":
            dcut = d.premises[0]
            dk = dcut.premises[-1]
            x = d.subject.binder
            if dk.basis.get(x) is not None:
                raise SubjectStepGap("mu: context basis mentions the selected variable")
            out = dk
            missing = [kv for kv in target.items if out.basis.get(kv[0]) is None]
            if missing:
                tgt = out.basis
                for n, t in missing:
                    tgt = tgt.extend(n, t)
                out = promote(out, tgt, res, base)
            if out.stoup != d.stoup:
                raise SubjectStepGap("mu: stoup mismatch after garbage collection")
            return out
        case "gamma0":
            y = d.premises[0].conclusion.subject.name
            return deriv_ax(y, target.get(y), j.ty, res, extra=target.remove(y))
        case "gamma0'":
            z = d.subject.source
            return deriv_ax(z, target.get(z), j.ty, res, extra=target.remove(z))
        case "gamma1":
            dabs = d.premises[0]
            x = dabs.subject.binder
            inner = deriv_cont(dabs.premises[0], d.subject.source,
                               d.subject.left, d.subject.right, base)
            return deriv_arrow_intro(inner, x, base)
        case "gamma4":
            dsel = d.premises[0]
            x = dsel.subject.binder
            inner = deriv_cont(dsel.premises[0], d.subject.source,
                               d.subject.left, d.subject.right, base)
            return deriv_sel(inner, x)
        case "gamma2" | "gamma3" | "gamma5" | "gamma6":
            return _push_cont(d, rule, res, base)
        case "omega1" | "omega4":
            dweak = d.premises[0]
            y = dweak.subject.erased
            wty = dweak.basis.get(y)
            binder = d.subject.binder
            inner = (deriv_arrow_intro(dweak.premises[0], binder, base)
                     if rule == "omega1" else deriv_sel(dweak.premises[0], binder))
            return deriv_weak(inner, y, wty, base)
        case "omega2" | "omega3" | "omega5" | "omega6":
            return _push_weak(d, rule, res, base)
        case "gammaomega1":
            dweak = d.premises[0]
            y = dweak.subject.erased
            wty = dweak.basis.get(y)
            inner = deriv_cont(dweak.premises[0], d.subject.source,
                               d.subject.left, d.subject.right, base)
            return deriv_weak(inner, y, wty, base)
        case "gammaomega2":
            z, l, r = d.subject.source, d.subject.left, d.subject.right
            dweak = d.premises[0]
            dE = dweak.premises[0]
            out = rename_in_derivation(dE, {r: z})
            tgt = out.basis.remove(z).extend(z, target.get(z))
            return promote(out, tgt, res, base)
    raise ContractError(f"subject reduction does not handle rule {rule}")


def _push_cont(d: Derivation, rule: str, res, base: str) -> Derivation:
    """gamma2/3/5/6: move a contraction into one side of a two-part node."""
    z, l, r = d.subject.source, d.subject.left, d.subject.right
    dinner = d.premises[0]
    into_first = rule in ("gamma2", "gamma5")
    if dinner.rule == "arrow_e":
        group = [dinner.premises[0]] if into_first else list(dinner.premises[1:])
        rest = list(dinner.premises[1:]) if into_first else [dinner.premises[0]]
    else:
        group = list(dinner.premises[:-1]) if into_first else [dinner.premises[-1]]
        rest = [dinner.premises[-1]] if into_first else list(dinner.premises[:-1])
    moved, static = [], []
    for p in group:
        p2 = _ensure_pair(p, l, r, dinner, res, base)
        moved.append(deriv_cont(p2, z, l, r, base))
    static = [_strip_pair(p, l, r, res, base) for p in rest]
    if dinner.rule == "arrow_e":
        prems = [moved[0], *static] if into_first else [static[0], *moved]
        return deriv_arrow_e(prems[0], prems[1:], res)
    if into_first:
        return _rebuild_multi_any(dinner.rule, moved + static, res)
    return _rebuild_multi_any(dinner.rule, static + moved, res)


def _ensure_pair(p: Derivation, l: Name, r: Name, dinner: Derivation, res,
                 base: str) -> Derivation:
    tgt = p.basis
    for n in (l, r):
        if tgt.get(n) is None:
            t = _merged_type(list(dinner.premises), n, skip=-1)
            if t is None:
                raise SubjectStepGap(f"contraction copy {n} untyped in the premises")
            tgt = tgt.extend(n, t)
    return promote(p, tgt, res, base)


def _strip_pair(p: Derivation, l: Name, r: Name, res, base: str) -> Derivation:
    out = p
    for n in (l, r):
        if out.basis.get(n) is not None:
            out = strip_unused(out, n, res, base)
    return out


def _push_weak(d: Derivation, rule: str, res, base: str) -> Derivation:
    """omega2/3/5/6: extract a weakening out of a two-part node."""
    into_first = rule in ("omega2", "omega5")
    if d.rule == "arrow_e":
        group_idx = [0] if into_first else list(range(1, len(d.premises)))
    else:
        n = len(d.premises)
        group_idx = list(range(n - 1)) if into_first else [n - 1]
    prems = list(d.premises)
    wnodes = [prems[i] for i in group_idx]
    x = wnodes[0].subject.erased
    wty = inter(*[w.basis.get(x) for w in wnodes])
    for i, w in zip(group_idx, wnodes):
        prems[i] = w.premises[0]
    other_idx = [i for i in range(len(prems)) if i not in group_idx]
    erased_used = any(prems[i].basis.get(x) is not None for i in other_idx)
    if erased_used:
        # the erased name is genuinely free on the other side: deepen it there
        carrier = other_idx[0]
        p = prems[carrier]
        old = p.basis.get(x)
        tgt = p.basis.remove(x).extend(x, inter(old, wty) if old else wty)
        prems[carrier] = promote(p, tgt, res, base)
        return _rebuild_node(d.rule, prems, res)
    inner = _rebuild_node(d.rule, prems, res)
    return deriv_weak(inner, x, wty, base)


def _rebuild_node(rule: str, prems, res) -> Derivation:
    if rule == "arrow_e":
        return deriv_arrow_e(prems[0], prems[1:], res)
    if rule == "cut":
        return deriv_cut(prems[:-1], prems[-1], res)
    if rule == "arrow_l":
        return deriv_arrow_l(prems[:-1], prems[-1], res)
    raise ContractError(f"unexpected node rule {rule}")
