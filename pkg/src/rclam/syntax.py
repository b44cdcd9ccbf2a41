"""Abstract syntax for the resource-control lambda calculi.

Two term languages share one set of node classes:

* the natural-deduction base ("nd"): variables, abstractions, applications,
  plus explicit contraction ``C[x<x1,x2] M`` and weakening ``W[x] M``;
* the sequent base ("lj"): variables, abstractions, cuts ``t k``, and the
  context formers selection ``^x. t`` and cons ``t :: k``, with contraction
  and weakening available on both sorts.

Which resource operators are *legal* is decided elsewhere (wellformed.py);
here live the trees, alpha-equivalence, the deterministic fresh-name supply,
strict/intersection types, and the ASCII parser and printer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Optional, Union

ND = "nd"
LJ = "lj"

TERM = "term"
CONTEXT = "context"


@dataclass(frozen=True, order=True)
class ResourceSet:
    """Which of contraction / weakening are explicit operators."""

    contraction: bool = False
    weakening: bool = False

    @staticmethod
    def parse(text: str) -> "ResourceSet":
        key = text.strip().lower()
        try:
            return _RESOURCE_NAMES[key]
        except KeyError:
            raise ValueError(f"unknown resource set {text!r} (use none/c/w/cw)") from None

    def __str__(self) -> str:
        if self.contraction and self.weakening:
            return "cw"
        if self.contraction:
            return "c"
        if self.weakening:
            return "w"
        return "none"


R_NONE = ResourceSet(False, False)
R_C = ResourceSet(True, False)
R_W = ResourceSet(False, True)
R_CW = ResourceSet(True, True)
ALL_RESOURCE_SETS = (R_NONE, R_C, R_W, R_CW)

_RESOURCE_NAMES = {
    "none": R_NONE, "": R_NONE, "empty": R_NONE,
    "c": R_C, "w": R_W, "cw": R_CW, "wc": R_CW,
}


@dataclass(frozen=True, order=True)
class Name:
    """Variable name: user-written when tag == 0, machine-fresh otherwise."""

    base: str
    tag: int = 0

    def __str__(self) -> str:
        return self.base if self.tag == 0 else f"{self.base}#{self.tag}"


def name(text: str) -> Name:
    if "#" in text:
        base, tag = text.rsplit("#", 1)
        return Name(base, int(tag))
    return Name(text)


# --- AST -------------------------------------------------------------------


class Expr:
    __slots__ = ()

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True)
class Var(Expr):
    name: Name


@dataclass(frozen=True)
class Abs(Expr):
    binder: Name
    body: "Expr"


@dataclass(frozen=True)
class App(Expr):
    fun: "Expr"
    arg: "Expr"


@dataclass(frozen=True)
class Cut(Expr):
    head: "Expr"
    ctx: "Expr"


@dataclass(frozen=True)
class Sel(Expr):
    binder: Name
    body: "Expr"


@dataclass(frozen=True)
class Cons(Expr):
    head: "Expr"
    tail: "Expr"


@dataclass(frozen=True)
class Contr(Expr):
    # C[source<left,right] body: left/right bound in body, source introduced free
    source: Name
    left: Name
    right: Name
    body: "Expr"


@dataclass(frozen=True)
class Weak(Expr):
    # W[erased] body: erased is free, must not occur in body
    erased: Name
    body: "Expr"


def sort_of(e: Expr) -> str:
    """TERM or CONTEXT; contraction/weakening take the sort of their body."""
    while isinstance(e, (Contr, Weak)):
        e = e.body
    return CONTEXT if isinstance(e, (Sel, Cons)) else TERM


def children(e: Expr) -> tuple[Expr, ...]:
    match e:
        case Var():
            return ()
        case Abs(_, b) | Sel(_, b) | Contr(_, _, _, b) | Weak(_, b):
            return (b,)
        case App(f, a):
            return (f, a)
        case Cut(h, k):
            return (h, k)
        case Cons(h, t):
            return (h, t)
    raise TypeError(e)


def replace_child(e: Expr, i: int, new: Expr) -> Expr:
    match e, i:
        case Abs(x, _), 0:
            return Abs(x, new)
        case Sel(x, _), 0:
            return Sel(x, new)
        case Contr(s, l, r, _), 0:
            return Contr(s, l, r, new)
        case Weak(x, _), 0:
            return Weak(x, new)
        case App(_, a), 0:
            return App(new, a)
        case App(f, _), 1:
            return App(f, new)
        case Cut(_, k), 0:
            return Cut(new, k)
        case Cut(h, _), 1:
            return Cut(h, new)
        case Cons(_, t), 0:
            return Cons(new, t)
        case Cons(h, _), 1:
            return Cons(h, new)
    raise IndexError((type(e).__name__, i))


Path = tuple[int, ...]


def at_path(e: Expr, path: Path) -> Expr:
    for i in path:
        e = children(e)[i]
    return e


def replace_at(e: Expr, path: Path, new: Expr) -> Expr:
    if not path:
        return new
    i = path[0]
    return replace_child(e, i, replace_at(children(e)[i], path[1:], new))


def subexprs(e: Expr, path: Path = ()) -> Iterator[tuple[Path, Expr]]:
    """All subexpressions, outermost first, left to right."""
    yield path, e
    for i, c in enumerate(children(e)):
        yield from subexprs(c, path + (i,))


def binders(e: Expr) -> tuple[Name, ...]:
    match e:
        case Abs(x, _) | Sel(x, _):
            return (x,)
        case Contr(_, l, r, _):
            return (l, r)
    return ()


def all_names(e: Expr) -> set[Name]:
    out: set[Name] = set()
    for _, sub in subexprs(e):
        match sub:
            case Var(n):
                out.add(n)
            case Abs(x, _) | Sel(x, _):
                out.add(x)
            case Weak(x, _):
                out.add(x)
            case Contr(s, l, r, _):
                out.update((s, l, r))
    return out


def bound_names(e: Expr) -> set[Name]:
    out: set[Name] = set()
    for _, sub in subexprs(e):
        out.update(binders(sub))
    return out


# --- alpha-equivalence -----------------------------------------------------


def alpha_eq(a: Expr, b: Expr) -> bool:
    """Structural equality up to consistent renaming of bound names.

    The pair bound by a contraction is compared positionally; swapping the
    pair is an epsilon-equivalence, not an alpha one.
    """
    return _alpha(a, b, {}, {})


def _alpha(a: Expr, b: Expr, env_a: dict, env_b: dict) -> bool:
    if type(a) is not type(b):
        return False
    match a, b:
        case Var(n), Var(m):
            return env_a.get(n, n) == env_b.get(m, m) and (n in env_a) == (m in env_b)
        case (Abs(x, p), Abs(y, q)) | (Sel(x, p), Sel(y, q)):
            k = len(env_a)
            return _alpha(p, q, {**env_a, x: k}, {**env_b, y: k})
        case App(f, u), App(g, v):
            return _alpha(f, g, env_a, env_b) and _alpha(u, v, env_a, env_b)
        case (Cut(f, u), Cut(g, v)) | (Cons(f, u), Cons(g, v)):
            return _alpha(f, g, env_a, env_b) and _alpha(u, v, env_a, env_b)
        case Weak(x, p), Weak(y, q):
            if env_a.get(x, x) != env_b.get(y, y) or (x in env_a) != (y in env_b):
                return False
            return _alpha(p, q, env_a, env_b)
        case Contr(s, l, r, p), Contr(t, m, w, q):
            if env_a.get(s, s) != env_b.get(t, t) or (s in env_a) != (t in env_b):
                return False
            k = len(env_a)
            return _alpha(p, q, {**env_a, l: k, r: k + 1}, {**env_b, m: k, w: k + 1})
    return False


def alpha_rename(e: Expr) -> Expr:
    """Canonical bound names (.0, .1, ...), free names untouched."""
    counter = [0]

    def go(e: Expr, env: dict[Name, Name]) -> Expr:
        def bind(x: Name) -> Name:
            counter[0] += 1
            return Name("." + str(counter[0]))

        match e:
            case Var(n):
                return Var(env.get(n, n))
            case Abs(x, b):
                x2 = bind(x)
                return Abs(x2, go(b, {**env, x: x2}))
            case Sel(x, b):
                x2 = bind(x)
                return Sel(x2, go(b, {**env, x: x2}))
            case App(f, a):
                return App(go(f, env), go(a, env))
            case Cut(h, k):
                return Cut(go(h, env), go(k, env))
            case Cons(h, t):
                return Cons(go(h, env), go(t, env))
            case Weak(x, b):
                return Weak(env.get(x, x), go(b, env))
            case Contr(s, l, r, b):
                l2, r2 = bind(l), bind(r)
                return Contr(env.get(s, s), l2, r2, go(b, {**env, l: l2, r: r2}))
        raise TypeError(e)

    return go(e, {})


def alpha_key(e: Expr) -> str:
    """Print-based key identifying e up to alpha."""
    return pretty(alpha_rename(e))


# --- fresh-name supply -----------------------------------------------------


class NameSupply:
    """Deterministic fresh names: per-base counters, bumped by observation.

    Same observation history + same requests => same names, so rewriting
    traces are reproducible byte for byte.
    """

    def __init__(self) -> None:
        self._next: dict[str, int] = {}

    def observe_name(self, n: Name) -> None:
        if n.tag >= self._next.get(n.base, 1):
            self._next[n.base] = n.tag + 1

    def observe(self, e: Expr) -> None:
        for n in all_names(e):
            self.observe_name(n)

    def fresh(self, base: str) -> Name:
        base = base.split("#")[0] or "v"
        tag = self._next.get(base, 1)
        self._next[base] = tag + 1
        return Name(base, tag)

    def copy(self) -> "NameSupply":
        s = NameSupply()
        s._next = dict(self._next)
        return s


def supply_for(*exprs: Expr) -> NameSupply:
    s = NameSupply()
    for e in exprs:
        s.observe(e)
    return s


# --- types -----------------------------------------------------------------


class TypeExpr:
    __slots__ = ()

    def __str__(self) -> str:
        return pretty_type(self)


@dataclass(frozen=True)
class TAtom(TypeExpr):
    name: str


@dataclass(frozen=True)
class TArrow(TypeExpr):
    dom: "IType"
    cod: "TypeExpr"  # strict


@dataclass(frozen=True)
class IType(TypeExpr):
    """Nonempty intersection, kept duplicate-free in a fixed total order.

    Idempotence, commutativity and associativity of the intersection hold
    by construction; a one-element intersection stands for its member.
    """

    parts: tuple[TypeExpr, ...]

    def __post_init__(self):
        assert self.parts, "empty intersection"

    @property
    def is_strict(self) -> bool:
        return len(self.parts) == 1

    def strict(self) -> TypeExpr:
        assert self.is_strict
        return self.parts[0]


StrictType = Union[TAtom, TArrow]


def _strict_key(t: TypeExpr) -> str:
    return pretty_type(t)


def inter(*types: TypeExpr) -> IType:
    """Canonical intersection of strict types and/or intersections."""
    parts: list[TypeExpr] = []
    for t in types:
        if isinstance(t, IType):
            parts.extend(t.parts)
        else:
            parts.append(t)
    uniq = {_strict_key(p): p for p in parts}
    return IType(tuple(uniq[k] for k in sorted(uniq)))


def itype_of(t: TypeExpr) -> IType:
    return t if isinstance(t, IType) else IType((t,))


def strict_parts(t: TypeExpr) -> tuple[TypeExpr, ...]:
    return itype_of(t).parts


def type_eq(a: TypeExpr, b: TypeExpr) -> bool:
    if isinstance(a, IType) or isinstance(b, IType):
        return strict_parts(a) == strict_parts(b)
    return a == b


# --- printer ---------------------------------------------------------------

_PREC_LOW, _PREC_CONS, _PREC_JUXT, _PREC_ATOM = 0, 1, 2, 3


def pretty(e: Expr) -> str:
    return _pp(e, _PREC_LOW)


def _pp(e: Expr, prec: int) -> str:
    match e:
        case Var(n):
            s, p = str(n), _PREC_ATOM
        case Abs(x, b):
            s, p = f"\\{x}. {_pp(b, _PREC_LOW)}", _PREC_LOW
        case Sel(x, b):
            s, p = f"^{x}. {_pp(b, _PREC_LOW)}", _PREC_LOW
        case Weak(x, b):
            s, p = f"W[{x}] {_pp(b, _PREC_LOW)}", _PREC_LOW
        case Contr(src, l, r, b):
            s, p = f"C[{src}<{l},{r}] {_pp(b, _PREC_LOW)}", _PREC_LOW
        case App(f, a):
            s, p = f"{_pp(f, _PREC_JUXT)} {_pp(a, _PREC_ATOM)}", _PREC_JUXT
        case Cut(h, k):
            s, p = f"{_pp(h, _PREC_JUXT)} {_pp(k, _PREC_ATOM)}", _PREC_JUXT
        case Cons(h, t):
            s, p = f"{_pp(h, _PREC_JUXT)} :: {_pp(t, _PREC_CONS)}", _PREC_CONS
        case _:
            raise TypeError(e)
    return f"({s})" if p < prec else s


def pretty_type(t: TypeExpr) -> str:
    match t:
        case TAtom(n):
            return n
        case TArrow(dom, cod):
            parts = strict_parts(dom)
            if len(parts) == 1:
                d = pretty_type(parts[0])
                if isinstance(parts[0], TArrow):
                    d = f"({d})"
            else:
                d = pretty_type(itype_of(dom))
            return f"{d} -> {pretty_type(cod)}"
        case IType(parts):
            if len(parts) == 1:
                return pretty_type(parts[0])
            return " /\\ ".join(
                f"({pretty_type(p)})" if isinstance(p, TArrow) else pretty_type(p)
                for p in parts
            )
    raise TypeError(t)


# --- parser ----------------------------------------------------------------


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line, self.col = line, col


_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<name>[A-Za-z_][A-Za-z0-9_']*(\#[0-9]+)?)
      | (?P<op>::|[\\^().<>,\[\]])
      | (?P<bad>.)""",
    re.VERBOSE,
)

_RESERVED = {"W", "C"}


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.toks: list[tuple[str, str, int]] = []
        for m in _TOKEN_RE.finditer(text):
            if m.lastgroup in (None, "ws"):
                continue
            if m.lastgroup == "bad":
                line, col = _linecol(text, m.start())
                raise ParseError(f"unexpected character {m.group()!r}", line, col)
            self.toks.append((m.lastgroup, m.group(), m.start()))
        self.pos = 0

    def peek(self) -> Optional[tuple[str, str, int]]:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self) -> tuple[str, str, int]:
        t = self.peek()
        if t is None:
            line, col = _linecol(self.text, len(self.text))
            raise ParseError("unexpected end of input", line, col)
        self.pos += 1
        return t

    def expect(self, value: str) -> None:
        t = self.next()
        if t[1] != value:
            self.error(f"expected {value!r}, found {t[1]!r}", t[2])

    def error(self, message: str, offset: Optional[int] = None):
        if offset is None:
            t = self.peek()
            offset = t[2] if t else len(self.text)
        line, col = _linecol(self.text, offset)
        raise ParseError(message, line, col)


def _linecol(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def parse(text: str, base: str = ND) -> Expr:
    """Parse an expression; raises ParseError on syntax or sort errors."""
    toks = _Tokens(text)
    e = _parse_expr(toks, base)
    t = toks.peek()
    if t is not None:
        toks.error(f"trailing input starting at {t[1]!r}")
    return _freshen_builtin_collisions(e)


def parse_term(text: str, base: str = ND) -> Expr:
    e = parse(text, base)
    if sort_of(e) != TERM:
        raise ParseError("expected a term, found a context", 1, 1)
    return e


def _parse_expr(toks: _Tokens, base: str) -> Expr:
    # cons level (lj only): juxt ('::' expr)?  right-assoc
    left = _parse_juxt(toks, base)
    t = toks.peek()
    if t and t[1] == "::":
        if base != LJ:
            toks.error("'::' is sequent-base syntax")
        if sort_of(left) != TERM:
            toks.error("left of '::' must be a term", t[2])
        toks.next()
        tail = _parse_expr(toks, base)
        if sort_of(tail) != CONTEXT:
            toks.error("right of '::' must be a context", t[2])
        return Cons(left, tail)
    return left


def _parse_juxt(toks: _Tokens, base: str) -> Expr:
    e = _parse_atom(toks, base)
    while True:
        t = toks.peek()
        if t is None or t[1] in ("::", ")", "]"):
            return e
        nxt = _parse_atom(toks, base)
        if base == ND:
            for part, what in ((e, "function"), (nxt, "argument")):
                if sort_of(part) != TERM:
                    toks.error(f"{what} of an application must be a term", t[2])
            e = App(e, nxt)
        else:
            if sort_of(e) != TERM:
                toks.error("head of a cut must be a term", t[2])
            if sort_of(nxt) != CONTEXT:
                toks.error("a term can only be applied to a context", t[2])
            e = Cut(e, nxt)


def _parse_atom(toks: _Tokens, base: str) -> Expr:
    t = toks.next()
    kind, val, off = t
    if val == "(":
        e = _parse_expr(toks, base)
        toks.expect(")")
        return e
    if val == "\\":
        x = _parse_name(toks)
        toks.expect(".")
        body = _parse_expr(toks, base)
        if sort_of(body) != TERM:
            toks.error("abstraction body must be a term", off)
        return Abs(x, body)
    if val == "^":
        if base != LJ:
            toks.error("'^' selection is sequent-base syntax", off)
        x = _parse_name(toks)
        toks.expect(".")
        body = _parse_expr(toks, base)
        if sort_of(body) != TERM:
            toks.error("selection body must be a term", off)
        return Sel(x, body)
    if kind == "name" and val in _RESERVED:
        toks.expect("[")
        if val == "W":
            x = _parse_name(toks)
            toks.expect("]")
            return Weak(x, _parse_expr(toks, base))
        src = _parse_name(toks)
        toks.expect("<")
        l = _parse_name(toks)
        toks.expect(",")
        r = _parse_name(toks)
        toks.expect("]")
        if l == r:
            toks.error("contraction must bind two distinct names", off)
        return Contr(src, l, r, _parse_expr(toks, base))
    if kind == "name":
        return Var(name(val))
    toks.error(f"unexpected {val!r}", off)


def _parse_name(toks: _Tokens) -> Name:
    kind, val, off = toks.next()
    if kind != "name" or val in _RESERVED:
        toks.error("expected a variable name", off)
    return name(val)


def _freshen_builtin_collisions(e: Expr) -> Expr:
    """Rename bound names that collide with free ones or with each other.

    Keeps parsed terms under the convention that no name is both free and
    bound and no two binders share a name.
    """
    free = fv_set_raw(e)
    supply = supply_for(e)
    seen: set[Name] = set()

    def go(e: Expr, env: dict[Name, Name]) -> Expr:
        def bind(x: Name) -> Name:
            if x in free or x in seen:
                x2 = supply.fresh(x.base)
            else:
                x2 = x
            seen.add(x2)
            return x2

        match e:
            case Var(n):
                return Var(env.get(n, n))
            case Abs(x, b):
                x2 = bind(x)
                return Abs(x2, go(b, {**env, x: x2}))
            case Sel(x, b):
                x2 = bind(x)
                return Sel(x2, go(b, {**env, x: x2}))
            case App(f, a):
                return App(go(f, env), go(a, env))
            case Cut(h, k):
                return Cut(go(h, env), go(k, env))
            case Cons(h, t):
                return Cons(go(h, env), go(t, env))
            case Weak(x, b):
                return Weak(env.get(x, x), go(b, env))
            case Contr(s, l, r, b):
                l2, r2 = bind(l), bind(r)
                return Contr(env.get(s, s), l2, r2, go(b, {**env, l: l2, r: r2}))
        raise TypeError(e)

    return go(e, {})


def fv_set_raw(e: Expr) -> set[Name]:
    """Free names ignoring the resource-set-sensitive contraction clause.

    Sound overapproximation used for capture avoidance; the honest Fv of
    wellformed.py coincides with this on well-formed expressions except that
    a contraction with unused bound pair drops its source there.
    """
    match e:
        case Var(n):
            return {n}
        case Abs(x, b) | Sel(x, b):
            return fv_set_raw(b) - {x}
        case App(f, a) | Cut(f, a) | Cons(f, a):
            return fv_set_raw(f) | fv_set_raw(a)
        case Weak(x, b):
            return {x} | fv_set_raw(b)
        case Contr(s, l, r, b):
            inner = fv_set_raw(b)
            if inner & {l, r}:
                return {s} | (inner - {l, r})
            return inner
    raise TypeError(e)


# --- type parser -----------------------------------------------------------

_TYPE_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
      | (?P<op>->|/\\|[()])
      | (?P<bad>.)""",
    re.VERBOSE,
)


class _TypeTokens(_Tokens):
    def __init__(self, text: str):
        self.text = text
        self.toks = []
        for m in _TYPE_TOKEN_RE.finditer(text):
            if m.lastgroup in (None, "ws"):
                continue
            if m.lastgroup == "bad":
                line, col = _linecol(text, m.start())
                raise ParseError(f"unexpected character {m.group()!r} in type", line, col)
            self.toks.append((m.lastgroup, m.group(), m.start()))
        self.pos = 0


def parse_type(text: str) -> TypeExpr:
    toks = _TypeTokens(text)
    t = _parse_arrow(toks)
    if toks.peek() is not None:
        toks.error("trailing input in type")
    return t


def parse_strict_type(text: str) -> TypeExpr:
    t = parse_type(text)
    if isinstance(t, IType) and not t.is_strict:
        raise ParseError("expected a strict type, found an intersection", 1, 1)
    return t.strict() if isinstance(t, IType) else t


def _parse_arrow(toks: _TypeTokens) -> TypeExpr:
    left = _parse_inter(toks)
    t = toks.peek()
    if t and t[1] == "->":
        toks.next()
        cod = _parse_arrow(toks)
        if isinstance(cod, IType):
            if not cod.is_strict:
                toks.error("arrow codomain must be strict (no intersection)", t[2])
            cod = cod.strict()
        return TArrow(itype_of(left), cod)
    return left


def _parse_inter(toks: _TypeTokens) -> TypeExpr:
    parts = [_parse_type_atom(toks)]
    while True:
        t = toks.peek()
        if not (t and t[1] == "/\\"):
            break
        toks.next()
        parts.append(_parse_type_atom(toks))
    if len(parts) == 1:
        return parts[0]
    return inter(*parts)


def _parse_type_atom(toks: _TypeTokens) -> TypeExpr:
    kind, val, off = toks.next()
    if val == "(":
        t = _parse_arrow(toks)
        toks.expect(")")
        return t
    if kind == "name":
        return TAtom(val)
    toks.error(f"unexpected {val!r} in type", off)
    raise AssertionError
