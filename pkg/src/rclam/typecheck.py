"""Bases, typing derivations, derivation checking, and simple-type inference.

Terms receive strict types only; intersections live in bases, in arrow
domains, and in the stoup of a context judgment.  All systems are
syntax-directed: each node shape has exactly one applicable rule per
calculus, which makes checking (and the generation lemma) a case split.

Derivations are explicit trees.  check_derivation is the oracle everything
else is validated against; the deriv_* constructors build rule instances
from premises and raise ContractError when the schema cannot fire.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from .rewrite import ContractError
from .syntax import (
    CONTEXT, LJ, ND, TERM,
    Abs, App, Cons, Contr, Cut, Expr, IType, Name, ResourceSet, Sel, TAtom,
    TArrow, TypeExpr, Var, Weak,
    inter, itype_of, parse, parse_strict_type, parse_type, pretty,
    pretty_type, sort_of, strict_parts,
)
from .wellformed import fv_set


# --- bases -----------------------------------------------------------------


@dataclass(frozen=True)
class Basis:
    """Finite map from variables to intersection types, all distinct."""

    items: tuple[tuple[Name, IType], ...]

    @staticmethod
    def of(*pairs: tuple[Name, TypeExpr]) -> "Basis":
        seen: dict[Name, IType] = {}
        for n, t in pairs:
            if n in seen:
                raise ContractError(f"duplicate basis variable {n}")
            seen[n] = itype_of(t)
        return Basis(tuple(sorted(seen.items(), key=lambda kv: str(kv[0]))))

    def get(self, n: Name) -> Optional[IType]:
        for k, v in self.items:
            if k == n:
                return v
        return None

    def dom(self) -> set[Name]:
        return {k for k, _ in self.items}

    def extend(self, n: Name, t: TypeExpr) -> "Basis":
        if self.get(n) is not None:
            raise ContractError(f"basis extension clashes on {n}")
        return Basis.of(*self.items, (n, t))

    def remove(self, *names: Name) -> "Basis":
        return Basis(tuple((k, v) for k, v in self.items if k not in names))

    def union(self, other: "Basis") -> "Basis":
        """Pointwise union, intersecting types on the overlap."""
        out: dict[Name, IType] = dict(self.items)
        for k, v in other.items:
            out[k] = inter(out[k], v) if k in out else v
        return Basis(tuple(sorted(out.items(), key=lambda kv: str(kv[0]))))

    def union_c(self, other: "Basis", res: ResourceSet) -> "Basis":
        """The resource-sensitive union: disjoint when c is explicit."""
        if res.contraction and self.dom() & other.dom():
            shared = ", ".join(sorted(map(str, self.dom() & other.dom())))
            raise ContractError(f"disjoint union violated on {shared}")
        return self.union(other)

    def __str__(self) -> str:
        return ", ".join(f"{k}:{pretty_type(v)}" for k, v in self.items) or "(empty)"


EMPTY = Basis(())


def basis_union_all(bases: Iterable[Basis]) -> Basis:
    out = EMPTY
    for b in bases:
        out = out.union(b)
    return out


# --- judgments and derivations ----------------------------------------------


@dataclass(frozen=True)
class Judgment:
    basis: Basis
    stoup: Optional[IType]  # present exactly for context subjects
    subject: Expr
    ty: TypeExpr  # strict

    def __str__(self) -> str:
        st = f"; {pretty_type(self.stoup)} " if self.stoup is not None else " "
        return f"{self.basis}{st}|- {pretty(self.subject)} : {pretty_type(self.ty)}"


@dataclass(frozen=True)
class Derivation:
    rule: str
    conclusion: Judgment
    premises: tuple["Derivation", ...] = ()

    @property
    def basis(self) -> Basis:
        return self.conclusion.basis

    @property
    def subject(self) -> Expr:
        return self.conclusion.subject

    @property
    def ty(self) -> TypeExpr:
        return self.conclusion.ty

    @property
    def stoup(self) -> Optional[IType]:
        return self.conclusion.stoup

    def size(self) -> int:
        return 1 + sum(p.size() for p in self.premises)


ND_RULES = {
    "ax_iw": (False,), "ax_ew": (True,),
    "arrow_i": (), "arrow_e": (), "cont": (), "weak": (),
}
LJ_RULES = {
    "ax_iw": (False,), "ax_ew": (True,),
    "arrow_r": (), "arrow_l": (), "sel": (), "cut": (),
    "cont_t": (), "cont_k": (), "weak_t": (), "weak_k": (),
}


def typing_rules(base: str, res: ResourceSet) -> set[str]:
    ax = "ax_ew" if res.weakening else "ax_iw"
    if base == ND:
        rules = {ax, "arrow_i", "arrow_e"}
        if res.contraction:
            rules.add("cont")
        if res.weakening:
            rules.add("weak")
        return rules
    rules = {ax, "arrow_r", "arrow_l", "sel", "cut"}
    if res.contraction:
        rules.update(("cont_t", "cont_k"))
    if res.weakening:
        rules.update(("weak_t", "weak_k"))
    return rules


# --- the checker ------------------------------------------------------------


@dataclass(frozen=True)
class Invalid:
    path: tuple[int, ...]
    reason: str

    def __str__(self) -> str:
        where = "root" if not self.path else "/".join(map(str, self.path))
        return f"invalid derivation at {where}: {self.reason}"


def check_derivation(d: Derivation, res: ResourceSet, base: str) -> Optional[Invalid]:
    """None when every node instantiates its rule schema for (base, res)."""
    return _check_node(d, res, base, ())


def is_valid(d: Derivation, res: ResourceSet, base: str) -> bool:
    return check_derivation(d, res, base) is None


def _bad(path, reason) -> Invalid:
    return Invalid(path, reason)


def _check_node(d: Derivation, res: ResourceSet, base: str, path) -> Optional[Invalid]:
    allowed = typing_rules(base, res)
    if d.rule not in allowed:
        return _bad(path, f"rule {d.rule} not available in ({base}, R={res})")
    for i, p in enumerate(d.premises):
        sub = _check_node(p, res, base, path + (i,))
        if sub is not None:
            return sub
    j = d.conclusion
    if isinstance(j.ty, IType) and not j.ty.is_strict:
        return _bad(path, "subjects carry strict types only")
    want_stoup = sort_of(j.subject) == CONTEXT
    if (j.stoup is not None) != want_stoup:
        return _bad(path, "stoup present iff the subject is a context")
    checker = _RULE_CHECKS.get(d.rule)
    return checker(d, res, path)


def _expect(cond: bool, path, reason) -> Optional[Invalid]:
    return None if cond else _bad(path, reason)


def _check_ax(d, res, path):
    j = d.conclusion
    if d.premises:
        return _bad(path, "axioms take no premises")
    if not isinstance(j.subject, Var):
        return _bad(path, "axiom subject must be a variable")
    x = j.subject.name
    a = j.basis.get(x)
    if a is None:
        return _bad(path, f"axiom variable {x} missing from the basis")
    if all(part != j.ty for part in a.parts):
        return _bad(path, "axiom type must be a component of the variable's type")
    if d.rule == "ax_ew" and len(j.basis.items) != 1:
        return _bad(path, "with explicit weakening the axiom basis is a singleton")
    return None


def _check_arrow_intro(d, res, path):
    j = d.conclusion
    if len(d.premises) != 1:
        return _bad(path, "arrow introduction takes one premise")
    p = d.premises[0].conclusion
    if not isinstance(j.subject, Abs):
        return _bad(path, "subject must be an abstraction")
    x, body = j.subject.binder, j.subject.body
    if not isinstance(j.ty, TArrow):
        return _bad(path, "conclusion type must be an arrow")
    if p.subject != body or p.ty != j.ty.cod:
        return _bad(path, "premise must type the body at the codomain")
    if p.basis.get(x) != itype_of(j.ty.dom):
        return _bad(path, "premise basis must bind the binder at the domain")
    if p.basis.remove(x) != j.basis or j.basis.get(x) is not None:
        return _bad(path, "conclusion basis must be the premise basis minus the binder")
    return None


def _args_aligned(prems, subject, path, what):
    if not prems:
        return _bad(path, f"{what} needs at least one argument premise")
    doms = {frozenset(p.conclusion.basis.dom()) for p in prems}
    if len(doms) != 1:
        return _bad(path, f"{what} argument premises must share one domain")
    for p in prems:
        if p.conclusion.subject != subject:
            return _bad(path, f"{what} argument premises must type the same subject")
    return None


def _check_arrow_e(d, res, path):
    j = d.conclusion
    if not isinstance(j.subject, App) or len(d.premises) < 2:
        return _bad(path, "arrow elimination: application subject, >= 2 premises")
    fun, args = d.premises[0], d.premises[1:]
    if fun.subject != j.subject.fun:
        return _bad(path, "first premise must type the function")
    err = _args_aligned(args, j.subject.arg, path, "arrow elimination")
    if err:
        return err
    fty = fun.ty
    if not isinstance(fty, TArrow) or fty.cod != j.ty:
        return _bad(path, "function type must be an arrow onto the conclusion type")
    if itype_of(fty.dom) != inter(*[p.ty for p in args]):
        return _bad(path, "arrow domain must be the intersection of the argument types")
    try:
        merged = fun.basis.union_c(basis_union_all(p.basis for p in args), res)
    except ContractError as exc:
        return _bad(path, str(exc))
    if merged != j.basis:
        return _bad(path, "conclusion basis must be the resource union of the premises")
    return None


def _check_cont(d, res, path):
    j = d.conclusion
    if len(d.premises) != 1 or not isinstance(j.subject, Contr):
        return _bad(path, "contraction rule shape")
    p = d.premises[0].conclusion
    z, x, y = j.subject.source, j.subject.left, j.subject.right
    if p.subject != j.subject.body or p.ty != j.ty:
        return _bad(path, "contraction premise must type the body at the same type")
    a, b = p.basis.get(x), p.basis.get(y)
    if a is None or b is None:
        return _bad(path, "premise basis must bind both contraction copies")
    if j.basis.get(z) != inter(a, b):
        return _bad(path, "source must get the intersection of the copies' types")
    if j.basis.remove(z) != p.basis.remove(x, y):
        return _bad(path, "bases must agree away from the contraction variables")
    if d.rule == "cont_k" and p.stoup != j.stoup:
        return _bad(path, "context contraction preserves the stoup")
    return None


def _check_weak(d, res, path):
    j = d.conclusion
    if len(d.premises) != 1 or not isinstance(j.subject, Weak):
        return _bad(path, "weakening rule shape")
    p = d.premises[0].conclusion
    x = j.subject.erased
    if p.subject != j.subject.body or p.ty != j.ty:
        return _bad(path, "weakening premise must type the body at the same type")
    if j.basis.get(x) is None or j.basis.remove(x) != p.basis:
        return _bad(path, "conclusion basis must add exactly the erased variable")
    if p.basis.get(x) is not None:
        return _bad(path, "erased variable must be new")
    if d.rule == "weak_k" and p.stoup != j.stoup:
        return _bad(path, "context weakening preserves the stoup")
    return None


def _check_sel(d, res, path):
    j = d.conclusion
    if len(d.premises) != 1 or not isinstance(j.subject, Sel):
        return _bad(path, "selection rule shape")
    p = d.premises[0].conclusion
    x, body = j.subject.binder, j.subject.body
    if p.subject != body or p.ty != j.ty:
        return _bad(path, "selection premise must type the body at the same type")
    if p.basis.get(x) != j.stoup:
        return _bad(path, "the stoup must be the binder's type in the premise")
    if p.basis.remove(x) != j.basis or j.basis.get(x) is not None:
        return _bad(path, "conclusion basis must drop the bound variable")
    return None


def _check_cut(d, res, path):
    j = d.conclusion
    if not isinstance(j.subject, Cut) or len(d.premises) < 2:
        return _bad(path, "cut: cut subject, term premises then one context premise")
    terms, ctx = d.premises[:-1], d.premises[-1]
    err = _args_aligned(terms, j.subject.head, path, "cut")
    if err:
        return err
    if ctx.subject != j.subject.ctx or ctx.stoup is None:
        return _bad(path, "last premise must type the context")
    if ctx.stoup != inter(*[p.ty for p in terms]):
        return _bad(path, "context stoup must be the intersection of the head types")
    if ctx.ty != j.ty:
        return _bad(path, "cut type comes from the context premise")
    try:
        merged = basis_union_all(p.basis for p in terms).union_c(ctx.basis, res)
    except ContractError as exc:
        return _bad(path, str(exc))
    if merged != j.basis:
        return _bad(path, "conclusion basis must be the resource union of the premises")
    return None


def _check_arrow_l(d, res, path):
    j = d.conclusion
    if not isinstance(j.subject, Cons) or len(d.premises) < 2:
        return _bad(path, "left arrow: cons subject, term premises then context premise")
    terms, ctx = d.premises[:-1], d.premises[-1]
    err = _args_aligned(terms, j.subject.head, path, "left arrow")
    if err:
        return err
    if ctx.subject != j.subject.tail or ctx.stoup is None:
        return _bad(path, "last premise must type the tail context")
    if ctx.ty != j.ty:
        return _bad(path, "conclusion type comes from the context premise")
    dom = inter(*[p.ty for p in terms])
    want = inter(*[TArrow(dom, t) for t in ctx.stoup.parts])
    if j.stoup != want:
        return _bad(path, "stoup must pair the shared domain with each tail component")
    try:
        merged = basis_union_all(p.basis for p in terms).union_c(ctx.basis, res)
    except ContractError as exc:
        return _bad(path, str(exc))
    if merged != j.basis:
        return _bad(path, "conclusion basis must be the resource union of the premises")
    return None


_RULE_CHECKS = {
    "ax_iw": _check_ax, "ax_ew": _check_ax,
    "arrow_i": _check_arrow_intro, "arrow_r": _check_arrow_intro,
    "arrow_e": _check_arrow_e,
    "cont": _check_cont, "cont_t": _check_cont, "cont_k": _check_cont,
    "weak": _check_weak, "weak_t": _check_weak, "weak_k": _check_weak,
    "sel": _check_sel, "cut": _check_cut, "arrow_l": _check_arrow_l,
}


# --- smart constructors ------------------------------------------------------


def deriv_ax(x: Name, a: TypeExpr, component: TypeExpr, res: ResourceSet,
             extra: Basis = EMPTY) -> Derivation:
    """Axiom leaf: basis {x: a} (+ extras when weakening is implicit)."""
    a = itype_of(a)
    if all(p != component for p in a.parts):
        raise ContractError("axiom component must belong to the variable's type")
    if res.weakening:
        if extra.items:
            raise ContractError("no extra assumptions with explicit weakening")
        basis = Basis.of((x, a))
        return Derivation("ax_ew", Judgment(basis, None, Var(x), component))
    basis = extra.remove(x).extend(x, a)
    return Derivation("ax_iw", Judgment(basis, None, Var(x), component))


def deriv_arrow_intro(d: Derivation, x: Name, base: str) -> Derivation:
    a = d.basis.get(x)
    if a is None:
        raise ContractError(f"binder {x} must appear in the premise basis")
    rule = "arrow_i" if base == ND else "arrow_r"
    j = Judgment(d.basis.remove(x), None, Abs(x, d.subject), TArrow(a, d.ty))
    return Derivation(rule, j, (d,))


def deriv_arrow_e(dfun: Derivation, dargs: Sequence[Derivation],
                  res: ResourceSet) -> Derivation:
    fty = dfun.ty
    if not isinstance(fty, TArrow):
        raise ContractError("function premise must have an arrow type")
    if itype_of(fty.dom) != inter(*[p.ty for p in dargs]):
        raise ContractError("argument types must assemble the arrow domain")
    basis = dfun.basis.union_c(basis_union_all(p.basis for p in dargs), res)
    j = Judgment(basis, None, App(dfun.subject, dargs[0].subject), fty.cod)
    return Derivation("arrow_e", j, (dfun, *dargs))


def deriv_cont(d: Derivation, z: Name, x: Name, y: Name, base: str) -> Derivation:
    a, b = d.basis.get(x), d.basis.get(y)
    if a is None or b is None:
        raise ContractError("both contraction copies must be typed in the premise")
    subject = Contr(z, x, y, d.subject)
    if base == ND:
        rule = "cont"
    else:
        rule = "cont_k" if sort_of(subject) == CONTEXT else "cont_t"
    j = Judgment(d.basis.remove(x, y).extend(z, inter(a, b)), d.stoup, subject, d.ty)
    return Derivation(rule, j, (d,))


def deriv_weak(d: Derivation, x: Name, a: TypeExpr, base: str) -> Derivation:
    subject = Weak(x, d.subject)
    if base == ND:
        rule = "weak"
    else:
        rule = "weak_k" if sort_of(subject) == CONTEXT else "weak_t"
    j = Judgment(d.basis.extend(x, itype_of(a)), d.stoup, subject, d.ty)
    return Derivation(rule, j, (d,))


def deriv_sel(d: Derivation, x: Name) -> Derivation:
    a = d.basis.get(x)
    if a is None:
        raise ContractError(f"selected variable {x} must be typed in the premise")
    j = Judgment(d.basis.remove(x), a, Sel(x, d.subject), d.ty)
    return Derivation("sel", j, (d,))


def deriv_cut(dterms: Sequence[Derivation], dctx: Derivation,
              res: ResourceSet) -> Derivation:
    if dctx.stoup is None or dctx.stoup != inter(*[p.ty for p in dterms]):
        raise ContractError("context stoup must match the head types")
    basis = basis_union_all(p.basis for p in dterms).union_c(dctx.basis, res)
    j = Judgment(basis, None, Cut(dterms[0].subject, dctx.subject), dctx.ty)
    return Derivation("cut", j, (*dterms, dctx))


def deriv_arrow_l(dterms: Sequence[Derivation], dctx: Derivation,
                  res: ResourceSet) -> Derivation:
    if dctx.stoup is None:
        raise ContractError("tail premise must be a context judgment")
    dom = inter(*[p.ty for p in dterms])
    stoup = inter(*[TArrow(dom, t) for t in dctx.stoup.parts])
    basis = basis_union_all(p.basis for p in dterms).union_c(dctx.basis, res)
    j = Judgment(basis, stoup, Cons(dterms[0].subject, dctx.subject), dctx.ty)
    return Derivation("arrow_l", j, (*dterms, dctx))


# --- generation --------------------------------------------------------------


@dataclass(frozen=True)
class GenCase:
    """The unique applicable rule and the constraints on its premises."""

    rule: str
    demands: tuple[str, ...]


def generation(j: Judgment, res: ResourceSet, base: str) -> GenCase:
    """Decompose a judgment per the generation lemma: the rule that must have
    produced it, with the premise constraints, or raise ContractError."""
    e = j.subject
    match e:
        case Var(x):
            a = j.basis.get(x)
            if a is None or all(p != j.ty for p in a.parts):
                raise ContractError("variable judgment not generable")
            if res.weakening:
                if len(j.basis.items) != 1:
                    raise ContractError("axiom basis must be exactly the variable")
                return GenCase("ax_ew", (f"basis = {x}:{pretty_type(a)}",))
            return GenCase("ax_iw", (f"{x}:{pretty_type(a)} in basis",))
        case Abs(x, body):
            if not isinstance(j.ty, TArrow):
                raise ContractError("abstraction must have an arrow type")
            rule = "arrow_i" if base == ND else "arrow_r"
            return GenCase(rule, (
                f"premise: {j.basis.extend(x, j.ty.dom)} |- {pretty(body)} : {pretty_type(j.ty.cod)}",
            ))
        case App(f, a):
            return GenCase("arrow_e", (
                "function premise with arrow onto the conclusion type",
                "argument premises intersecting to the arrow domain, equal domains",
            ))
        case Weak(x, _):
            if j.basis.get(x) is None:
                raise ContractError("erased variable must be in the basis")
            rule = "weak" if base == ND else (
                "weak_k" if sort_of(e) == CONTEXT else "weak_t")
            return GenCase(rule, (f"premise basis drops {x}",))
        case Contr(z, x, y, _):
            a = j.basis.get(z)
            if a is None:
                raise ContractError("contraction source must be in the basis")
            rule = "cont" if base == ND else (
                "cont_k" if sort_of(e) == CONTEXT else "cont_t")
            return GenCase(rule, (
                f"premise basis splits {z}:{pretty_type(a)} over {x}, {y}",
            ))
        case Sel(x, body):
            if j.stoup is None:
                raise ContractError("selection needs a stoup")
            return GenCase("sel", (
                f"premise: {j.basis.extend(x, j.stoup)} |- {pretty(body)} : {pretty_type(j.ty)}",
            ))
        case Cut(_, _):
            return GenCase("cut", (
                "head premises with types intersecting to the context stoup",
            ))
        case Cons(_, _):
            if j.stoup is None:
                raise ContractError("cons needs a stoup")
            parts = j.stoup.parts
            doms = {str(itype_of(p.dom)) for p in parts if isinstance(p, TArrow)}
            if len(doms) != 1 or any(not isinstance(p, TArrow) for p in parts):
                raise ContractError("cons stoup must be arrows with one shared domain")
            return GenCase("arrow_l", (
                "head premises at the shared domain; tail at the codomains",
            ))
    raise ContractError(f"no rule generates {pretty(e)}")


# --- simple-type inference ----------------------------------------------------


@dataclass(frozen=True)
class TVar(TypeExpr):
    id: int


@dataclass(frozen=True)
class Untypeable:
    reason: str

    def __str__(self) -> str:
        return f"untypeable: {self.reason}"


def _display(t: TypeExpr) -> str:
    """Print with unsolved unification variables shown as ?n atoms."""
    match t:
        case TVar(i):
            return f"?{i}"
        case TArrow(dom, cod):
            parts = strict_parts(dom)
            d = _display(parts[0]) if len(parts) == 1 else " /\\ ".join(map(_display, parts))
            if len(parts) == 1 and isinstance(parts[0], TArrow):
                d = f"({d})"
            return f"{d} -> {_display(cod)}"
        case IType(parts):
            return " /\\ ".join(map(_display, parts))
    return pretty_type(t)


class _Unifier:
    def __init__(self) -> None:
        self.sub: dict[int, TypeExpr] = {}
        self.count = 0

    def fresh(self) -> TVar:
        self.count += 1
        return TVar(self.count)

    def find(self, t: TypeExpr) -> TypeExpr:
        while isinstance(t, TVar) and t.id in self.sub:
            t = self.sub[t.id]
        return t

    def unify(self, a: TypeExpr, b: TypeExpr) -> None:
        a, b = self.find(a), self.find(b)
        if a == b:
            return
        if isinstance(a, TVar):
            if self._occurs(a, b):
                raise ContractError(f"occurs check: ?{a.id} in {_display(self.resolve(b))}")
            self.sub[a.id] = b
            return
        if isinstance(b, TVar):
            self.unify(b, a)
            return
        if isinstance(a, TArrow) and isinstance(b, TArrow):
            da = a.dom.strict() if isinstance(a.dom, IType) else a.dom
            db = b.dom.strict() if isinstance(b.dom, IType) else b.dom
            self.unify(da, db)
            self.unify(a.cod, b.cod)
            return
        raise ContractError(
            f"cannot unify {_display(self.resolve(a))} with {_display(self.resolve(b))}")

    def _occurs(self, v: TVar, t: TypeExpr) -> bool:
        t = self.find(t)
        if t == v:
            return True
        if isinstance(t, TArrow):
            d = t.dom.strict() if isinstance(t.dom, IType) else t.dom
            return self._occurs(v, d) or self._occurs(v, t.cod)
        return False

    def resolve(self, t: TypeExpr) -> TypeExpr:
        t = self.find(t)
        if isinstance(t, TArrow):
            d = t.dom.strict() if isinstance(t.dom, IType) else t.dom
            return TArrow(itype_of(self.resolve(d)), self.resolve(t.cod))
        return t


@dataclass(frozen=True)
class SimpleTyping:
    basis: Basis
    stoup: Optional[TypeExpr]
    ty: TypeExpr

    def __str__(self) -> str:
        st = f"; {pretty_type(self.stoup)} " if self.stoup is not None else " "
        return f"{self.basis}{st}|- _ : {pretty_type(self.ty)}"


def infer_simple(e: Expr, base: str, res: ResourceSet) -> Union[SimpleTyping, Untypeable]:
    """Principal simple typing by unification over the syntax-directed rules.

    With explicit weakening the leaves consume exactly their variable and
    every binder must be used; with explicit contraction the basis unions
    must be disjoint.  Failures come back as Untypeable with the reason.
    """
    u = _Unifier()
    try:
        basis, stoup, ty = _infer(e, base, res, u)
    except ContractError as exc:
        return Untypeable(str(exc))
    names = sorted(basis, key=str)
    rbasis = Basis.of(*[(n, _rename_vars(u.resolve(basis[n]), u)) for n in names])
    rstoup = _rename_vars(u.resolve(stoup), u) if stoup is not None else None
    return SimpleTyping(rbasis, rstoup, _rename_vars(u.resolve(ty), u))


_ATOM_SUPPLY = "abcdefghijklmnopqrstuvwxyz"


def _rename_vars(t: TypeExpr, u: _Unifier, mapping: Optional[dict] = None) -> TypeExpr:
    if mapping is None:
        mapping = u.__dict__.setdefault("_display", {})
    match t:
        case TVar(i):
            if i not in mapping:
                k = len(mapping)
                name = (_ATOM_SUPPLY[k] if k < 26 else f"a{k}")
                mapping[i] = TAtom(name)
            return mapping[i]
        case TArrow(dom, cod):
            return TArrow(itype_of(_rename_vars(dom.strict(), u, mapping)),
                          _rename_vars(cod, u, mapping))
        case IType(parts):
            return _rename_vars(parts[0], u, mapping)
    return t


def _merge_bases(g1: dict, g2: dict, res: ResourceSet, u: _Unifier) -> dict:
    if res.contraction and set(g1) & set(g2):
        shared = ", ".join(sorted(map(str, set(g1) & set(g2))))
        raise ContractError(f"disjoint basis union violated on {shared}")
    out = dict(g1)
    for n, t in g2.items():
        if n in out:
            u.unify(out[n], t)
        else:
            out[n] = t
    return out


def _infer(e: Expr, base: str, res: ResourceSet, u: _Unifier):
    """Returns (basis: dict Name->TypeExpr, stoup or None, type)."""
    match e:
        case Var(x):
            a = u.fresh()
            return {x: a}, None, a
        case Abs(x, body):
            g, _, t = _infer(body, base, res, u)
            if x in g:
                a = g.pop(x)
            elif res.weakening:
                raise ContractError(f"binder {x} unused under explicit weakening")
            else:
                a = u.fresh()
            return g, None, TArrow(itype_of(a), t)
        case App(f, a):
            g1, _, t1 = _infer(f, base, res, u)
            g2, _, t2 = _infer(a, base, res, u)
            out = u.fresh()
            u.unify(t1, TArrow(itype_of(t2), out))
            return _merge_bases(g1, g2, res, u), None, out
        case Cut(h, k):
            g1, _, t1 = _infer(h, base, res, u)
            g2, st, t2 = _infer(k, base, res, u)
            u.unify(t1, st)
            return _merge_bases(g1, g2, res, u), None, t2
        case Sel(x, body):
            g, _, t = _infer(body, base, res, u)
            if x in g:
                a = g.pop(x)
            elif res.weakening:
                raise ContractError(f"selected {x} unused under explicit weakening")
            else:
                a = u.fresh()
            return g, a, t
        case Cons(h, k):
            g1, _, t1 = _infer(h, base, res, u)
            g2, st, t2 = _infer(k, base, res, u)
            return _merge_bases(g1, g2, res, u), TArrow(itype_of(t1), st), t2
        case Weak(x, body):
            if not res.weakening:
                raise ContractError("weakening operator without explicit weakening")
            g, st, t = _infer(body, base, res, u)
            if x in g:
                raise ContractError(f"erased {x} occurs in the body")
            g = dict(g)
            g[x] = u.fresh()
            return g, st, t
        case Contr(z, x, y, body):
            if not res.contraction:
                raise ContractError("contraction operator without explicit contraction")
            g, st, t = _infer(body, base, res, u)
            g = dict(g)
            a = g.pop(x, None)
            b = g.pop(y, None)
            if res.weakening and (a is None or b is None):
                raise ContractError("contraction copies unused under explicit weakening")
            a = a if a is not None else u.fresh()
            b = b if b is not None else u.fresh()
            u.unify(a, b)  # simple types give both copies one type
            if z in g:
                raise ContractError(f"contraction source {z} already free in the body")
            g[z] = a
            return g, st, t
    raise TypeError(e)


# --- JSON serialization -------------------------------------------------------


def derivation_to_json(d: Derivation, base: str) -> dict:
    j = d.conclusion
    return {
        "rule": d.rule,
        "basis": {str(k): [pretty_type(p) for p in v.parts] for k, v in j.basis.items},
        "stoup": pretty_type(j.stoup) if j.stoup is not None else None,
        "subject": pretty(j.subject),
        "type": pretty_type(j.ty),
        "premises": [derivation_to_json(p, base) for p in d.premises],
    }


def derivation_from_json(node: dict, base: str) -> Derivation:
    from .syntax import name

    basis = Basis.of(*[
        (name(k), inter(*[parse_strict_type(s) for s in parts]))
        for k, parts in node["basis"].items()
    ])
    stoup = node.get("stoup")
    stoup_t = itype_of(parse_type(stoup)) if stoup is not None else None
    j = Judgment(basis, stoup_t, parse(node["subject"], base),
                 parse_strict_type(node["type"]))
    premises = tuple(derivation_from_json(p, base) for p in node.get("premises", []))
    return Derivation(node["rule"], j, premises)


def derivation_dumps(d: Derivation, base: str) -> str:
    return json.dumps(derivation_to_json(d, base), indent=2, sort_keys=True)


def derivation_loads(text: str, base: str) -> Derivation:
    return derivation_from_json(json.loads(text), base)
