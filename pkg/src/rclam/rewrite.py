"""Substitution, reduction, and equivalence handling for both bases.

Reduction is understood modulo the structural equivalences: adjacent
weakenings commute, the pair bound by a contraction commutes, and nested
contractions re-associate and (when independent) commute.  None of those
moves crosses a contraction/weakening boundary, so every equivalence class
of a subexpression is generated by rearranging its maximal leading chain of
C/W operators.  Redex enumeration therefore walks the tree once and, at
every chain head, matches rule patterns against all chain rearrangements.

A Redex records the rearranged subtree it fires on together with the
epsilon-move script that produced it, so later passes (typing transport)
can replay the same moves on a derivation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Union

from .syntax import (
    CONTEXT, LJ, ND, TERM,
    Abs, App, Cons, Contr, Cut, Expr, Name, NameSupply, Path, ResourceSet,
    Sel, Var, Weak,
    alpha_key, at_path, children, pretty, replace_at, sort_of, subexprs,
    supply_for,
)
from .wellformed import assert_wellformed, fv_ordered, fv_set, is_wellformed


class ContractError(ValueError):
    """A meta-operation was invoked outside its preconditions."""


# --- rule availability -----------------------------------------------------

GAMMA = ("gamma1", "gamma2", "gamma3")
GAMMA_LJ = GAMMA + ("gamma4", "gamma5", "gamma6")
OMEGA = ("omega1", "omega2", "omega3")
OMEGA_LJ = OMEGA + ("omega4", "omega5", "omega6")
GAMMA_OMEGA = ("gammaomega1", "gammaomega2")


def rules_for(base: str, res: ResourceSet) -> tuple[str, ...]:
    """The reduction rules of the calculus (base, res), per its table."""
    core = ("beta",) if base == ND else ("beta", "sigma", "pi", "mu")
    gam = GAMMA if base == ND else GAMMA_LJ
    ome = OMEGA if base == ND else OMEGA_LJ
    if res.contraction and res.weakening:
        return core + gam + ome + GAMMA_OMEGA
    if res.contraction:
        # the contraction-erasing rules exist only when R = {c}
        return core + ("gamma0", "gamma0'") + gam
    if res.weakening:
        return core + ome
    return core


RULE_ORDER = (
    "beta", "sigma", "pi", "mu",
    "gamma0", "gamma0'", "gamma1", "gamma2", "gamma3", "gamma4", "gamma5", "gamma6",
    "omega1", "omega2", "omega3", "omega4", "omega5", "omega6",
    "gammaomega1", "gammaomega2",
)


# --- substitution ----------------------------------------------------------


def occurs_for_subst(e: Expr, x: Name) -> bool:
    """Whether substituting for x can change e: x occurs free, is erased by a
    weakening, or is the source of some contraction (even a vacuous one; the
    defining clause rewrites those into a prefix over the image's names)."""
    match e:
        case Var(v):
            return v == x
        case Abs(y, b) | Sel(y, b):
            return y != x and occurs_for_subst(b, x)
        case App(f, a) | Cut(f, a) | Cons(f, a):
            return occurs_for_subst(f, x) or occurs_for_subst(a, x)
        case Weak(y, b):
            return y == x or occurs_for_subst(b, x)
        case Contr(s, l, r, b):
            return s == x or (x not in (l, r) and occurs_for_subst(b, x))
    raise TypeError(e)


def subst(e: Expr, n: Expr, x: Name, res: ResourceSet, supply: NameSupply) -> Expr:
    """Capture-avoiding implicit substitution e[n/x], both bases.

    Follows the defining clauses: substituting at an erased name drops into
    weakenings over the new free names, substituting at a contraction source
    duplicates n under a contraction prefix zipped over its free-variable
    list, and a weakening whose name turns up free in n disappears.
    """
    if not occurs_for_subst(e, x):
        return e
    match e:
        case Var(v):
            return n if v == x else e
        case Abs(y, b) | Sel(y, b):
            cls = type(e)
            if y == x or y in fv_set(n, res):
                y2 = supply.fresh(y.base)
                b = subst(b, Var(y2), y, res, supply)
                y = y2
            return cls(y, subst(b, n, x, res, supply))
        case App(f, a) | Cut(f, a) | Cons(f, a):
            cls = type(e)
            return cls(subst(f, n, x, res, supply), subst(a, n, x, res, supply))
        case Weak(y, b):
            if y == x:
                return weak_over(
                    [z for z in fv_ordered(n, res) if z not in fv_set(b, res)], b)
            b2 = subst(b, n, x, res, supply)
            if y in fv_set(n, res):
                return b2
            return Weak(y, b2)
        case Contr(s, l, r, b):
            if s == x:
                return _subst_at_contraction(e, n, res, supply)
            if l in fv_set(n, res) or r in fv_set(n, res) or x in (l, r):
                l2, r2 = supply.fresh(l.base), supply.fresh(r.base)
                b = subst(subst(b, Var(l2), l, res, supply), Var(r2), r, res, supply)
                l, r = l2, r2
            return Contr(s, l, r, subst(b, n, x, res, supply))
    raise TypeError(e)


def _subst_at_contraction(e: Contr, n: Expr, res: ResourceSet, supply: NameSupply) -> Expr:
    free = fv_ordered(n, res)
    ren1 = {z: supply.fresh(z.base) for z in free}
    ren2 = {z: supply.fresh(z.base) for z in free}
    n1 = rename_free(n, ren1, res, supply)
    n2 = rename_free(n, ren2, res, supply)
    body = subst(e.body, n1, e.left, res, supply)
    body = subst(body, n2, e.right, res, supply)
    for z in reversed(free):
        body = Contr(z, ren1[z], ren2[z], body)
    return body


def rename_free(e: Expr, mapping: dict[Name, Name], res: ResourceSet,
                supply: NameSupply) -> Expr:
    out = e
    for old in fv_ordered(e, res):
        if old in mapping:
            out = subst(out, Var(mapping[old]), old, res, supply)
    return out


def weak_over(names: Iterable[Name], e: Expr) -> Expr:
    names = list(names)
    for z in reversed(names):
        e = Weak(z, e)
    return e


def subst_nd(m: Expr, n: Expr, x: Name, res: ResourceSet,
             supply: Optional[NameSupply] = None) -> Expr:
    """Checked substitution for the natural-deduction base."""
    supply = supply or supply_for(m, n)
    _subst_contract(m, n, x, res, ND)
    return subst(m, n, x, res, supply)


def subst_gtz(e: Expr, t: Expr, x: Name, res: ResourceSet,
              supply: Optional[NameSupply] = None) -> Expr:
    """Checked substitution for the sequent base (t must be a term)."""
    if sort_of(t) != TERM:
        raise ContractError("only terms may be substituted for variables")
    supply = supply or supply_for(e, t)
    _subst_contract(e, t, x, res, LJ)
    return subst(e, t, x, res, supply)


def _subst_contract(m: Expr, n: Expr, x: Name, res: ResourceSet, base: str) -> None:
    from .syntax import bound_names

    if x in bound_names(m):
        raise ContractError(f"substituted variable {x} is bound in the target")
    if res.contraction and fv_set(m, res) & fv_set(n, res):
        raise ContractError("free variables must be disjoint when c is explicit")
    if res.weakening and x not in fv_set(m, res):
        raise ContractError(f"{x} must occur free in the target when w is explicit")


def parallel_subst(m: Expr, bindings: list[tuple[Name, Expr]], res: ResourceSet,
                   supply: Optional[NameSupply] = None) -> Expr:
    """Simultaneous substitution; requires the images pairwise disjoint and
    free of the substituted variables, which makes it order-independent."""
    supply = supply or supply_for(m, *[n for _, n in bindings])
    xs = [x for x, _ in bindings]
    if len(set(xs)) != len(xs):
        raise ContractError("parallel substitution bindings must be distinct")
    for i, (_, ni) in enumerate(bindings):
        for j, (xj, nj) in enumerate(bindings):
            if i != j and fv_set(ni, res) & fv_set(nj, res):
                raise ContractError("parallel substitution images share free variables")
            if xj in fv_set(ni, res):
                raise ContractError("parallel substitution image mentions a substituted variable")
    out = m
    for x, n in bindings:
        out = subst(out, n, x, res, supply)
    return out


# --- append ----------------------------------------------------------------


def append(k: Expr, k2: Expr, res: ResourceSet,
            supply: Optional[NameSupply] = None) -> Expr:
    """Join two contexts: recurse through cons/weakening/contraction and
    splice the second context at the final selection."""
    if sort_of(k) != CONTEXT or sort_of(k2) != CONTEXT:
        raise ContractError("append joins two contexts")
    supply = supply or supply_for(k, k2)
    return _append(k, k2, res, supply)


def _append(k: Expr, k2: Expr, res: ResourceSet, supply: NameSupply) -> Expr:
    match k:
        case Sel(x, t):
            if x in fv_set(k2, res):
                x2 = supply.fresh(x.base)
                t = subst(t, Var(x2), x, res, supply)
                x = x2
            return Sel(x, Cut(t, k2))
        case Cons(u, tail):
            return Cons(u, _append(tail, k2, res, supply))
        case Weak(x, body):
            return Weak(x, _append(body, k2, res, supply))
        case Contr(s, l, r, body):
            return Contr(s, l, r, _append(body, k2, res, supply))
    raise TypeError(k)


# --- operator chains and their epsilon rearrangements ----------------------


@dataclass(frozen=True)
class WOp:
    name: Name


@dataclass(frozen=True)
class COp:
    source: Name
    left: Name
    right: Name


ChainOp = Union[WOp, COp]
Chain = tuple[ChainOp, ...]

MAX_CHAIN_VARIANTS = 4000


def split_chain(e: Expr) -> tuple[Chain, Expr]:
    ops: list[ChainOp] = []
    while True:
        match e:
            case Weak(x, b):
                ops.append(WOp(x))
                e = b
            case Contr(s, l, r, b):
                ops.append(COp(s, l, r))
                e = b
            case _:
                return tuple(ops), e


def wrap_chain(ops: Iterable[ChainOp], core: Expr) -> Expr:
    e = core
    for op in reversed(list(ops)):
        if isinstance(op, WOp):
            e = Weak(op.name, e)
        else:
            e = Contr(op.source, op.left, op.right, e)
    return e


Move = tuple[str, int]  # (kind in {e1,e2,e3,e4}, position in the chain)


def _apply_move(ops: Chain, move: Move) -> Optional[Chain]:
    kind, i = move
    if kind == "e2":
        op = ops[i]
        if isinstance(op, COp):
            return ops[:i] + (COp(op.source, op.right, op.left),) + ops[i + 1:]
        return None
    if i + 1 >= len(ops):
        return None
    a, b = ops[i], ops[i + 1]
    if kind == "e1" and isinstance(a, WOp) and isinstance(b, WOp):
        return ops[:i] + (b, a) + ops[i + 2:]
    if kind == "e3" and isinstance(a, COp) and isinstance(b, COp) and b.source == a.left:
        # C[x<y,z](C[y<u,v] e)  ==  C[x<y,u](C[y<z,v] e)
        a2 = COp(a.source, a.left, b.left)
        b2 = COp(b.source, a.right, b.right)
        return ops[:i] + (a2, b2) + ops[i + 2:]
    if kind == "e4" and isinstance(a, COp) and isinstance(b, COp):
        independent = (b.source not in (a.left, a.right)
                       and a.source not in (b.left, b.right))
        if independent:
            return ops[:i] + (b, a) + ops[i + 2:]
    return None


def chain_variants(ops: Chain) -> list[tuple[Chain, tuple[Move, ...]]]:
    """All chains epsilon-reachable from ops, with one move script each.

    Breadth-first closure of the four structural moves; deterministic order.
    Exponential in chain length; used for cross-validation only, the
    operational paths work on the block/group structure instead.
    """
    if len(ops) <= 1 and not any(isinstance(o, COp) for o in ops):
        return [(ops, ())]
    seen: dict[Chain, tuple[Move, ...]] = {ops: ()}
    queue = [ops]
    while queue:
        cur = queue.pop(0)
        script = seen[cur]
        for i in range(len(cur)):
            for kind in ("e1", "e2", "e3", "e4"):
                nxt = _apply_move(cur, (kind, i))
                if nxt is not None and nxt not in seen:
                    seen[nxt] = script + ((kind, i),)
                    queue.append(nxt)
                    if len(seen) > MAX_CHAIN_VARIANTS:
                        raise RuntimeError("epsilon class too large to enumerate")
    return list(seen.items())


# --- block and group structure of a chain -----------------------------------
#
# No equivalence moves a weakening past a contraction, so a chain splits into
# rigid maximal blocks of one kind.  Within a contraction block the moves
# generate exactly: swapping the bound pair, re-associating a dependency
# chain, and commuting independent triples, so what the block determines is,
# per connected group, its source together with the multiset of leaf names,
# plus the pool of intermediate names (which are bound and interchangeable).


def chain_blocks(ops: Chain) -> list[tuple[str, list[ChainOp]]]:
    blocks: list[tuple[str, list[ChainOp]]] = []
    for op in ops:
        kind = "w" if isinstance(op, WOp) else "c"
        if blocks and blocks[-1][0] == kind:
            blocks[-1][1].append(op)
        else:
            blocks.append((kind, [op]))
    return blocks


@dataclass(frozen=True)
class Group:
    """One connected component of a contraction block."""

    source: Name
    leaves: tuple[Name, ...]          # every non-intermediate child
    intermediates: tuple[Name, ...]   # bound names threading the splits


def block_groups(ops: list[ChainOp]) -> list[Group]:
    """The dependency forest of a contraction block, in source order."""
    by_source = {}
    for op in ops:
        if op.source in by_source:
            raise ContractError("duplicate contraction source in one block")
        by_source[op.source] = op
    consumed = set()
    for op in ops:
        for child in (op.left, op.right):
            if child in by_source:
                consumed.add(child)
    groups = []
    for op in ops:
        if op.source in consumed:
            continue
        leaves: list[Name] = []
        inters: list[Name] = []
        stack = [op]
        while stack:
            cur = stack.pop()
            for child in (cur.left, cur.right):
                if child in by_source:
                    inters.append(child)
                    stack.append(by_source[child])
                else:
                    leaves.append(child)
        groups.append(Group(op.source, tuple(leaves), tuple(inters)))
    return groups


def comb_for_group(source: Name, leaves: list[Name],
                   intermediates: list[Name]) -> list[COp]:
    """A left-comb realization: each step splits off one leaf."""
    assert len(intermediates) == len(leaves) - 2 or len(leaves) <= 2
    ops: list[COp] = []
    cur = source
    for i, leaf in enumerate(leaves[:-2]):
        nxt = intermediates[i]
        ops.append(COp(cur, leaf, nxt))
        cur = nxt
    if len(leaves) == 1:
        # degenerate single-leaf groups cannot arise: a triple has two children
        raise ContractError("group with a single leaf")
    ops.append(COp(cur, leaves[-2], leaves[-1]))
    return ops


def _name_positions(core: Expr) -> dict[Name, int]:
    """First-occurrence index of every name in traversal order."""
    pos: dict[Name, int] = {}
    i = 0
    for _, sub in subexprs(core):
        names: tuple[Name, ...]
        match sub:
            case Var(n):
                names = (n,)
            case Weak(n, _):
                names = (n,)
            case Contr(s, _, _, _):
                names = (s,)
            case Abs(x, _) | Sel(x, _):
                names = (x,)
            case _:
                names = ()
        for n in names:
            if n not in pos:
                pos[n] = i
            i += 1
    return pos


# --- redexes ---------------------------------------------------------------


@dataclass(frozen=True)
class Redex:
    """A reduction opportunity, possibly only visible after epsilon moves.

    path addresses the chain head in the original expression; variant is the
    rearranged subtree there; depth counts the chain operators above the node
    the rule fires at; moves is the epsilon script (relative child position,
    move) that produced variant from the original subtree.
    """

    path: Path
    rule: str
    variant: Expr
    depth: int
    moves: tuple[tuple[Path, Move], ...]

    def describe(self) -> str:
        where = "root" if not self.path else "/".join(map(str, self.path))
        return f"{self.rule} at {where}"


def redexes(e: Expr, base: str, res: ResourceSet) -> list[Redex]:
    """All redexes modulo equivalence, leftmost-outermost first."""
    avail = set(rules_for(base, res))
    found: list[tuple[tuple, Redex]] = []
    probe = supply_for(e)

    def visit(path: Path, sub: Expr, chain_interior: bool) -> None:
        ops, core = split_chain(sub)
        if ops and not chain_interior:
            _match_chain(path, ops, core, res, avail, found, probe)
        if not ops:
            _match_core(path, sub, res, avail, found, probe)
        for i, c in enumerate(children(sub)):
            visit(path + (i,), c, chain_interior=bool(ops) or isinstance(sub, (Weak, Contr)))

    visit((), e, False)
    ordered = sorted(found, key=lambda item: item[0])
    out, seen = [], set()
    for key, rx in ordered:
        k = (rx.path, rx.rule, key[-1])
        if k not in seen:
            seen.add(k)
            out.append(rx)
    return out


def _emit(found, probe, path, rule, variant, depth, moves, res):
    # dedup key uses a provisional reduct computed with a throwaway supply
    reduct = _fire(variant, rule, depth, res, probe.copy())
    key = (path, RULE_ORDER.index(rule), depth, alpha_key(reduct))
    found.append((key, Redex(path, rule, variant, depth, moves)))


def _match_chain(path, ops, core, res, avail, found, probe):
    for chain, script in chain_variants(ops):
        moves = tuple(((), m) for m in script)
        variant = wrap_chain(chain, core)
        for i, op in enumerate(chain):
            if not isinstance(op, COp):
                continue
            below = chain[i + 1:]
            if below:
                nxt = below[0]
                if isinstance(nxt, WOp) and "gammaomega1" in avail and nxt.name not in (op.left, op.right):
                    _emit(found, probe, path, "gammaomega1", variant, i, moves, res)
                if isinstance(nxt, WOp) and "gammaomega2" in avail and nxt.name == op.left:
                    _emit(found, probe, path, "gammaomega2", variant, i, moves, res)
                continue
            body = core
            match body:
                case Var(y):
                    if "gamma0" in avail and y not in (op.left, op.right):
                        _emit(found, probe, path, "gamma0", variant, i, moves, res)
                    if "gamma0'" in avail and y == op.left:
                        _emit(found, probe, path, "gamma0'", variant, i, moves, res)
                case Abs(_, _):
                    if "gamma1" in avail:
                        _emit(found, probe, path, "gamma1", variant, i, moves, res)
                case Sel(_, _):
                    if "gamma4" in avail:
                        _emit(found, probe, path, "gamma4", variant, i, moves, res)
                case App(f, a) | Cut(f, a):
                    pair = fv_set(a, res), fv_set(f, res)
                    if "gamma2" in avail and op.left not in pair[0] and op.right not in pair[0]:
                        _emit(found, probe, path, "gamma2", variant, i, moves, res)
                    if "gamma3" in avail and op.left not in pair[1] and op.right not in pair[1]:
                        _emit(found, probe, path, "gamma3", variant, i, moves, res)
                case Cons(f, a):
                    if "gamma5" in avail and not {op.left, op.right} & fv_set(a, res):
                        _emit(found, probe, path, "gamma5", variant, i, moves, res)
                    if "gamma6" in avail and not {op.left, op.right} & fv_set(f, res):
                        _emit(found, probe, path, "gamma6", variant, i, moves, res)


def _child_chain_variants(child: Expr):
    ops, core = split_chain(child)
    for chain, script in chain_variants(ops):
        yield chain, core, script


def _match_core(path, e, res, avail, found, probe):
    """Rules whose pattern roots at a non-operator node."""
    match e:
        case App(f, a):
            if "beta" in avail and isinstance(f, Abs):
                _emit(found, probe, path, "beta", e, 0, (), res)
            _match_weak_child(path, e, 0, "omega2", res, avail, found, probe)
            _match_weak_child(path, e, 1, "omega3", res, avail, found, probe)
        case Cut(h, k):
            if "beta" in avail and isinstance(h, Abs) and isinstance(k, Cons):
                _emit(found, probe, path, "beta", e, 0, (), res)
            if "sigma" in avail and isinstance(k, Sel):
                _emit(found, probe, path, "sigma", e, 0, (), res)
            if "pi" in avail and isinstance(h, Cut):
                _emit(found, probe, path, "pi", e, 0, (), res)
            _match_weak_child(path, e, 0, "omega2", res, avail, found, probe)
            _match_weak_child(path, e, 1, "omega3", res, avail, found, probe)
        case Cons(h, t):
            _match_weak_child(path, e, 0, "omega5", res, avail, found, probe)
            _match_weak_child(path, e, 1, "omega6", res, avail, found, probe)
        case Abs(x, b):
            _match_binder_weak(path, e, x, "omega1", res, avail, found, probe)
        case Sel(x, b):
            _match_binder_weak(path, e, x, "omega4", res, avail, found, probe)
            if "mu" in avail:
                match b:
                    case Cut(Var(v), k) if v == x and x not in fv_set(k, res):
                        _emit(found, probe, path, "mu", e, 0, (), res)


def _match_weak_child(path, e, idx, rule, res, avail, found, probe):
    if rule not in avail:
        return
    child = children(e)[idx]
    if not isinstance(child, (Weak, Contr)):
        return
    for chain, core, script in _child_chain_variants(child):
        if chain and isinstance(chain[0], WOp):
            from .syntax import replace_child

            variant = replace_child(e, idx, wrap_chain(chain, core))
            moves = tuple(((idx,), m) for m in script)
            _emit(found, probe, path, rule, variant, 0, moves, res)


def _match_binder_weak(path, e, binder, rule, res, avail, found, probe):
    if rule not in avail:
        return
    body = children(e)[0]
    if not isinstance(body, (Weak, Contr)):
        return
    for chain, core, script in _child_chain_variants(body):
        if chain and isinstance(chain[0], WOp) and chain[0].name != binder:
            from .syntax import replace_child

            variant = replace_child(e, 0, wrap_chain(chain, core))
            moves = tuple(((0,), m) for m in script)
            _emit(found, probe, path, rule, variant, 0, moves, res)


# --- firing a rule ---------------------------------------------------------


def step(e: Expr, redex: Redex, res: ResourceSet,
         supply: Optional[NameSupply] = None) -> Expr:
    """Contract one redex; the result is well-formed whenever e was."""
    supply = supply or supply_for(e)
    supply.observe(e)
    sub = at_path(e, redex.path)
    rebuilt = _replay_moves(sub, redex.moves)
    if rebuilt != redex.variant:
        raise ContractError("stale redex: expression does not match")
    reduct = _fire(redex.variant, redex.rule, redex.depth, res, supply)
    return replace_at(e, redex.path, reduct)


def _replay_moves(sub: Expr, moves) -> Expr:
    by_child: dict[Path, list[Move]] = {}
    for rel, m in moves:
        by_child.setdefault(rel, []).append(m)
    out = sub
    for rel, ms in by_child.items():
        target = at_path(out, rel)
        ops, core = split_chain(target)
        for m in ms:
            nxt = _apply_move(ops, m)
            if nxt is None:
                raise ContractError("invalid epsilon move script")
            ops = nxt
        out = replace_at(out, rel, wrap_chain(ops, core))
    return out


def _fire(variant: Expr, rule: str, depth: int, res: ResourceSet,
          supply: NameSupply) -> Expr:
    ops, _ = split_chain(variant)
    above = ops[:depth]
    node = variant
    for _ in range(depth):
        node = children(node)[0]
    return wrap_chain(above, _apply_rule(rule, node, res, supply))


def _apply_rule(rule: str, e: Expr, res: ResourceSet, supply: NameSupply) -> Expr:
    match rule, e:
        case "beta", App(Abs(x, m), n):
            return subst(m, n, x, res, supply)
        case "beta", Cut(Abs(x, t), Cons(u, k)):
            if x in fv_set(u, res) | fv_set(k, res):
                x2 = supply.fresh(x.base)
                t, x = subst(t, Var(x2), x, res, supply), x2
            return Cut(u, Sel(x, Cut(t, k)))
        case "sigma", Cut(t, Sel(x, v)):
            return subst(v, t, x, res, supply)
        case "pi", Cut(Cut(t, k), k2):
            return Cut(t, _append(k, k2, res, supply))
        case "mu", Sel(x, Cut(Var(v), k)) if v == x:
            return k
        case "gamma0", Contr(_, _, _, Var(y)):
            return Var(y)
        case "gamma0'", Contr(s, l, _, Var(y)) if y == l:
            return Var(s)
        case "gamma1", Contr(s, l, r, Abs(y, m)):
            return Abs(y, Contr(s, l, r, m))
        case "gamma2", Contr(s, l, r, App(f, a)):
            return App(Contr(s, l, r, f), a)
        case "gamma2", Contr(s, l, r, Cut(f, a)):
            return Cut(Contr(s, l, r, f), a)
        case "gamma3", Contr(s, l, r, App(f, a)):
            return App(f, Contr(s, l, r, a))
        case "gamma3", Contr(s, l, r, Cut(f, a)):
            return Cut(f, Contr(s, l, r, a))
        case "gamma4", Contr(s, l, r, Sel(y, t)):
            return Sel(y, Contr(s, l, r, t))
        case "gamma5", Contr(s, l, r, Cons(f, a)):
            return Cons(Contr(s, l, r, f), a)
        case "gamma6", Contr(s, l, r, Cons(f, a)):
            return Cons(f, Contr(s, l, r, a))
        case "omega1", Abs(x, Weak(y, m)) if x != y:
            return Weak(y, Abs(x, m))
        case "omega4", Sel(x, Weak(y, m)) if x != y:
            return Weak(y, Sel(x, m))
        case "omega2", (App(Weak(x, m), n) | Cut(Weak(x, m), n)):
            out = App(m, n) if isinstance(e, App) else Cut(m, n)
            return out if x in fv_set(n, res) else Weak(x, out)
        case "omega3", (App(m, Weak(x, n)) | Cut(m, Weak(x, n))):
            out = App(m, n) if isinstance(e, App) else Cut(m, n)
            return out if x in fv_set(m, res) else Weak(x, out)
        case "omega5", Cons(Weak(x, m), n):
            out = Cons(m, n)
            return out if x in fv_set(n, res) else Weak(x, out)
        case "omega6", Cons(m, Weak(x, n)):
            out = Cons(m, n)
            return out if x in fv_set(m, res) else Weak(x, out)
        case "gammaomega1", Contr(s, l, r, Weak(y, b)) if y not in (l, r):
            return Weak(y, Contr(s, l, r, b))
        case "gammaomega2", Contr(s, l, r, Weak(y, b)) if y == l:
            return subst(b, Var(s), r, res, supply)
    raise ContractError(f"rule {rule} does not match {pretty(e)}")


# --- canonical representatives ---------------------------------------------


def canonical(e: Expr, res: ResourceSet | None = None) -> Expr:
    """A deterministic representative of the equivalence class of e.

    Children are canonicalized first; each maximal operator chain is then
    replaced by its rearrangement with the least alpha-normalized print.
    Idempotent, and equivalent to its argument.
    """
    ops, core = split_chain(e)
    core2 = core
    for i, c in enumerate(children(core)):
        from .syntax import replace_child

        core2 = replace_child(core2, i, canonical(c, res))
    if not ops:
        return core2
    best = None
    for chain, _ in chain_variants(ops):
        cand = wrap_chain(chain, core2)
        key = (alpha_key(cand), pretty(cand))
        if best is None or key < best[0]:
            best = (key, cand)
    return best[1]


def canon_key(e: Expr) -> str:
    """A string identifying e up to alpha and epsilon equivalence jointly.

    Bound names are numbered in traversal order, and at every operator chain
    the least rendering over all rearrangements is taken, so the key is
    insensitive both to bound-name choices and to epsilon moves.
    """

    def go(e: Expr, env: dict[Name, str]) -> str:
        ops, core = split_chain(e)
        if ops:
            return min(render_chain(chain, core, env)
                       for chain, _ in chain_variants(ops))
        return render_core(e, env)

    def render_chain(chain: Chain, core: Expr, env: dict[Name, str]) -> str:
        env = dict(env)
        parts = []
        for op in chain:
            if isinstance(op, WOp):
                parts.append(f"W[{env.get(op.name, str(op.name))}]")
            else:
                src = env.get(op.source, str(op.source))
                env[op.left] = f"b{len(env)}"
                env[op.right] = f"b{len(env)}"
                parts.append(f"C[{src}<{env[op.left]},{env[op.right]}]")
        return "".join(parts) + render_core(core, env)

    def render_core(e: Expr, env: dict[Name, str]) -> str:
        match e:
            case Var(n):
                return env.get(n, str(n))
            case Abs(x, b) | Sel(x, b):
                tag = "L" if isinstance(e, Abs) else "S"
                env2 = {**env, x: f"b{len(env)}"}
                return f"{tag}{env2[x]}.{go(b, env2)}"
            case App(f, a) | Cut(f, a) | Cons(f, a):
                tag = {App: "A", Cut: "U", Cons: "N"}[type(e)]
                return f"{tag}({go(f, env)},{go(a, env)})"
            case Weak(_, _) | Contr(_, _, _, _):
                return go(e, env)
        raise TypeError(e)

    return go(e, {})


def equiv(a: Expr, b: Expr) -> bool:
    """Equality modulo alpha and the structural equivalences."""
    return canon_key(a) == canon_key(b)


# --- normalization ---------------------------------------------------------


@dataclass(frozen=True)
class TraceStep:
    redex: Redex
    result: Expr


@dataclass(frozen=True)
class NormalizeResult:
    normal: bool
    expr: Expr
    trace: tuple[TraceStep, ...]

    @property
    def steps(self) -> int:
        return len(self.trace)

    def rules(self) -> list[str]:
        return [s.redex.rule for s in self.trace]


def normalize(e: Expr, base: str, res: ResourceSet, strategy: str = "leftmost",
              fuel: int = 1000, check_wf: bool = False) -> NormalizeResult:
    """Reduce to normal form or until fuel runs out.

    "leftmost" contracts the first redex in leftmost-outermost order;
    "exhaustive" breadth-first-searches the reduction graph and returns a
    shortest path to some normal form if one is reachable within fuel.
    """
    if strategy == "exhaustive":
        return _normalize_exhaustive(e, base, res, fuel)
    supply = supply_for(e)
    trace: list[TraceStep] = []
    cur = canonical(e, res)
    for _ in range(fuel):
        rs = redexes(cur, base, res)
        if not rs:
            return NormalizeResult(True, cur, tuple(trace))
        cur = canonical(step(cur, rs[0], res, supply), res)
        if check_wf:
            assert_wellformed(cur, res, base)
        trace.append(TraceStep(rs[0], cur))
    return NormalizeResult(False, cur, tuple(trace))


def _normalize_exhaustive(e: Expr, base: str, res: ResourceSet, fuel: int) -> NormalizeResult:
    start = canonical(e, res)
    seen = {canon_key(start): (None, None)}
    queue = [start]
    expanded = 0
    while queue and expanded < fuel:
        cur = queue.pop(0)
        expanded += 1
        rs = redexes(cur, base, res)
        if not rs:
            return NormalizeResult(True, cur, _unwind(seen, cur))
        supply = supply_for(cur)
        for rx in rs:
            nxt = canonical(step(cur, rx, res, supply.copy()), res)
            k = canon_key(nxt)
            if k not in seen:
                seen[k] = (cur, TraceStep(rx, nxt))
                queue.append(nxt)
    return NormalizeResult(False, start, ())


def _unwind(seen, final) -> tuple[TraceStep, ...]:
    steps = []
    cur = final
    while True:
        prev, st = seen[canon_key(cur)]
        if prev is None:
            break
        steps.append(st)
        cur = prev
    return tuple(reversed(steps))
