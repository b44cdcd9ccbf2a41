import pytest

from rclam.syntax import (
    LJ, ND, R_C, R_CW, R_NONE, R_W,
    alpha_eq, inter, name, parse, pretty, pretty_type, supply_for,
)
from rclam.rewrite import ContractError, redexes, step, subst_nd, subst_gtz, append
from rclam.typecheck import (
    EMPTY, Basis, check_derivation, deriv_arrow_e, deriv_arrow_intro,
    deriv_arrow_l, deriv_ax, deriv_cont, deriv_cut, deriv_sel, deriv_weak,
    infer_simple, SimpleTyping,
)
from rclam.typelemmas import (
    SubjectStepGap, append_typing, promote, strip_unused, subject_step,
    subst_typing, transport_moves,
)
from rclam.syntax import parse_strict_type as ty


def check(d, res, base):
    inv = check_derivation(d, res, base)
    assert inv is None, str(inv)


def test_promote_deepen_and_add():
    x = name("x")
    d = deriv_ax(x, ty("a"), ty("a"), R_NONE)
    tgt = Basis.of((x, inter(ty("a"), ty("b"))), (name("q"), ty("c")))
    d2 = promote(d, tgt, R_NONE, ND)
    check(d2, R_NONE, ND)
    assert d2.basis == tgt and d2.ty == ty("a")


def test_promote_rejects_new_vars_with_weakening():
    x = name("x")
    d = deriv_ax(x, ty("a"), ty("a"), R_W)
    with pytest.raises(ContractError):
        promote(d, Basis.of((x, ty("a")), (name("q"), ty("c"))), R_W, ND)
    # deepening the existing entry is fine
    d2 = promote(d, Basis.of((x, inter(ty("a"), ty("b")))), R_W, ND)
    check(d2, R_W, ND)


def test_strip_unused():
    x, q = name("x"), name("q")
    d = deriv_ax(x, ty("a"), ty("a"), R_NONE, extra=Basis.of((q, ty("b"))))
    d2 = strip_unused(d, q, R_NONE, ND)
    check(d2, R_NONE, ND)
    assert d2.basis.get(q) is None


# --- substitution lemma -------------------------------------------------------


def _typing_of(text, base, res):
    """Simple-typed derivation scaffold via inference + hand assembly is
    overkill here; tests build derivations with the constructors instead."""


def test_subst_typing_variable_case():
    x = name("x")
    d = deriv_ax(x, ty("a -> a"), ty("a -> a"), R_NONE)
    # image: identity at a -> a with empty basis
    z = name("z")
    dz = deriv_arrow_intro(deriv_ax(z, ty("a"), ty("a"), R_NONE), z, ND)
    out = subst_typing(d, x, [dz], R_NONE, ND)
    check(out, R_NONE, ND)
    assert alpha_eq(out.subject, parse("\\z. z", ND))
    assert out.basis == EMPTY


def test_subst_typing_application():
    # M = x y with x:a->s, y:a; N = \z.z for x
    x, y, z = name("x"), name("y"), name("z")
    dx = deriv_ax(x, ty("(a -> s) -> s"), ty("(a -> s) -> s"), R_NONE)
    dy = deriv_ax(y, ty("a -> s"), ty("a -> s"), R_NONE)
    dapp = deriv_arrow_e(dx, [dy], R_NONE)
    dn = deriv_arrow_intro(deriv_ax(z, ty("a -> s"), ty("a -> s"), R_NONE), z, ND)
    # wait: dn : |- \z.z : (a->s) -> (a->s); substitute for y? y : a->s. types differ.
    dn_for_x = None
    out = None
    # substitute for x at its type
    dnx = deriv_arrow_intro(deriv_ax(z, ty("a -> s"), ty("a -> s"), R_NONE), z, ND)
    assert pretty_type(dnx.ty) == "(a -> s) -> a -> s"
    # that is not (a->s)->s either; build an eta-style term of the right type:
    # N = \f. f q with q : a
    f, q = name("f"), name("q")
    dq = deriv_ax(q, ty("a"), ty("a"), R_NONE)
    df = deriv_ax(f, ty("a -> s"), ty("a -> s"), R_NONE)
    dfq = deriv_arrow_e(df, [dq], R_NONE)
    dn = deriv_arrow_intro(dfq, f, ND)
    assert pretty_type(dn.ty) == "(a -> s) -> s"
    out = subst_typing(dapp, x, [dn], R_NONE, ND)
    check(out, R_NONE, ND)
    assert alpha_eq(out.subject, parse("(\\f. f q) y", ND))
    assert out.ty == ty("s")
    assert out.basis == Basis.of((y, ty("a -> s")), (q, ty("a")))


def test_subst_typing_weakening_at_name():
    # M = W[x] y, R = {w}; N = u v introduces new weakened names
    x, y, u, v = name("x"), name("y"), name("u"), name("v")
    dy = deriv_ax(y, ty("b"), ty("b"), R_W)
    d = deriv_weak(dy, x, ty("c"), ND)
    du = deriv_ax(u, ty("c' -> c"), ty("c' -> c"), R_W)
    dv = deriv_ax(v, ty("c'"), ty("c'"), R_W)
    dn = deriv_arrow_e(du, [dv], R_W)
    out = subst_typing(d, x, [dn], R_W, ND)
    check(out, R_W, ND)
    assert alpha_eq(out.subject, parse("W[u] W[v] y", ND))
    assert out.basis.dom() == {y, u, v}


def test_subst_typing_contraction_source():
    # M = C[x<x1,x2](x1 x2), R = {c}: substitute w for x at both components
    x, x1, x2, w = name("x"), name("x1"), name("x2"), name("w")
    arrow, a = ty("a -> s"), ty("a")
    dfun = deriv_ax(x1, arrow, arrow, R_C)
    darg = deriv_ax(x2, a, a, R_C)
    dapp = deriv_arrow_e(dfun, [darg], R_C)
    d = deriv_cont(dapp, x, x1, x2, ND)
    dn1 = deriv_ax(w, arrow, arrow, R_C)
    dn2 = deriv_ax(w, a, a, R_C)
    out = subst_typing(d, x, [dn1, dn2], R_C, ND)
    check(out, R_C, ND)
    expected = subst_nd(parse("C[x<x1,x2] (x1 x2)", ND), parse("w", ND), x, R_C)
    assert alpha_eq(out.subject, expected)
    assert out.basis.dom() == {w}
    assert pretty_type(out.basis.get(w)) == "a /\\ (a -> s)"


def test_subst_typing_lj():
    # t = x (y :: ^z. z), substitute u for x
    x, y, z, u = name("x"), name("y"), name("z"), name("u")
    dz = deriv_ax(z, ty("b"), ty("b"), R_NONE)
    dsel = deriv_sel(dz, z)
    dy = deriv_ax(y, ty("a"), ty("a"), R_NONE)
    dtail = deriv_arrow_l([dy], dsel, R_NONE)
    dx = deriv_ax(x, ty("a -> b"), ty("a -> b"), R_NONE)
    d = deriv_cut([dx], dtail, R_NONE)
    dn = deriv_ax(u, ty("a -> b"), ty("a -> b"), R_NONE)
    out = subst_typing(d, x, [dn], R_NONE, LJ)
    check(out, R_NONE, LJ)
    assert alpha_eq(out.subject, parse("u (y :: ^z. z)", LJ))


# --- append lemma ---------------------------------------------------------------


def test_append_typing_selection():
    # k = ^x. x : a |- , k' = ^y. y, both at matching types
    x, y = name("x"), name("y")
    a = ty("a")
    dk = deriv_sel(deriv_ax(x, a, a, R_NONE), x)
    dk2 = deriv_sel(deriv_ax(y, a, a, R_NONE), y)
    out = append_typing([dk], dk2, R_NONE, LJ)
    check(out, R_NONE, LJ)
    assert alpha_eq(out.subject, append(parse("^x. x", LJ), parse("^y. y", LJ), R_NONE))
    assert out.stoup == inter(a)


def test_append_typing_cons_and_weak():
    x, y, u, q = name("x"), name("y"), name("u"), name("q")
    a, b = ty("a"), ty("b")
    dsel = deriv_sel(deriv_ax(x, b, b, R_CW), x)
    du = deriv_ax(u, a, a, R_CW)
    dk = deriv_arrow_l([du], dsel, R_CW)          # u :: ^x. x
    dkw = deriv_weak(dk, q, ty("c"), LJ)          # W[q] (u :: ^x. x)
    dk2 = deriv_sel(deriv_ax(y, b, b, R_CW), y)   # ^y. y
    out = append_typing([dkw], dk2, R_CW, LJ)
    check(out, R_CW, LJ)
    expected = append(parse("W[q] (u :: ^x. x)", LJ), parse("^y. y", LJ), R_CW)
    assert alpha_eq(out.subject, expected)


# --- subject reduction ------------------------------------------------------------


def _first(e, base, res, rule):
    rs = [r for r in redexes(e, base, res) if r.rule == rule]
    assert rs, f"no {rule} redex in {pretty(e)}"
    return rs[0]


def test_subject_step_beta_nd():
    x, y, z = name("x"), name("y"), name("z")
    # (\x. x) y
    d_id = deriv_arrow_intro(deriv_ax(x, ty("a"), ty("a"), R_NONE), x, ND)
    dy = deriv_ax(y, ty("a"), ty("a"), R_NONE)
    d = deriv_arrow_e(d_id, [dy], R_NONE)
    e = d.subject
    rx = _first(e, ND, R_NONE, "beta")
    out = subject_step(d, rx, R_NONE, ND)
    check(out, R_NONE, ND)
    assert out.conclusion.basis == d.conclusion.basis
    assert out.ty == d.ty
    assert alpha_eq(out.subject, step(e, rx, R_NONE))


def test_subject_step_beta_intersection():
    # (\x. x x) N with N = \z. z z needs a genuine intersection
    x, z = name("x"), name("z")
    arrow = ty("(a -> s) /\\ a -> s")
    sface = ty("a -> s")
    a = ty("a")
    xt = inter(sface, a)
    dfun = deriv_ax(x, xt, sface, R_NONE)
    darg = deriv_ax(x, xt, a, R_NONE)
    dapp = deriv_arrow_e(dfun, [darg], R_NONE)
    dlam = deriv_arrow_intro(dapp, x, ND)
    q = name("q")
    # argument: q at both components, q : (a -> s) /\ a
    dq1 = deriv_ax(q, xt, sface, R_NONE)
    dq2 = deriv_ax(q, xt, a, R_NONE)
    d = deriv_arrow_e(dlam, [dq1, dq2], R_NONE)
    check(d, R_NONE, ND)
    e = d.subject
    rx = _first(e, ND, R_NONE, "beta")
    out = subject_step(d, rx, R_NONE, ND)
    check(out, R_NONE, ND)
    assert out.conclusion.basis == d.conclusion.basis and out.ty == d.ty
    assert alpha_eq(out.subject, step(e, rx, R_NONE))


def test_subject_step_omega_rules():
    # (W[x] m) n  and  m (W[x] n)
    x, m, n = name("x"), name("m"), name("n")
    dm = deriv_ax(m, ty("a -> b"), ty("a -> b"), R_W)
    dwm = deriv_weak(dm, x, ty("c"), ND)
    dn = deriv_ax(n, ty("a"), ty("a"), R_W)
    d = deriv_arrow_e(dwm, [dn], R_W)
    e = d.subject
    rx = _first(e, ND, R_W, "omega2")
    out = subject_step(d, rx, R_W, ND)
    check(out, R_W, ND)
    assert out.conclusion == out.conclusion.__class__(
        d.basis, d.stoup, out.subject, d.ty)
    assert alpha_eq(out.subject, step(e, rx, R_W))


def test_subject_step_omega2_erasing_variant():
    # erased name free in the argument: (W[n] m) n -> m n, R={w}
    x, m, n = name("x"), name("m"), name("n")
    dm = deriv_ax(m, ty("a -> b"), ty("a -> b"), R_W)
    dwm = deriv_weak(dm, n, ty("c"), ND)
    dn = deriv_ax(n, ty("a"), ty("a"), R_W)
    d = deriv_arrow_e(dwm, [dn], R_W)
    e = d.subject
    rx = _first(e, ND, R_W, "omega2")
    out = subject_step(d, rx, R_W, ND)
    check(out, R_W, ND)
    assert out.basis == d.basis and out.ty == d.ty
    assert alpha_eq(out.subject, step(e, rx, R_W))


def test_subject_step_gamma_rules():
    # C[x<a,b] (a b) with gamma2/gamma3 blocked, use \y-version for gamma1
    a, b, x, y = name("a"), name("b"), name("x"), name("y")
    dm = deriv_ax(a, ty("p -> q"), ty("p -> q"), R_C)
    dy = deriv_ax(y, ty("p"), ty("p"), R_C)
    dapp = deriv_arrow_e(dm, [dy], R_C)
    dlam = deriv_arrow_intro(dapp, y, ND)  # \y. a y : p -> q
    # the unused copy b enters as an implicit-weakening extra
    dlam2 = promote(dlam, dlam.basis.extend(b, ty("r")), R_C, ND)
    dc = deriv_cont(dlam2, x, a, b, ND)
    check(dc, R_C, ND)
    e = dc.subject
    rx = _first(e, ND, R_C, "gamma1")
    out = subject_step(dc, rx, R_C, ND)
    check(out, R_C, ND)
    assert out.basis == dc.basis and out.ty == dc.ty
    assert alpha_eq(out.subject, step(e, rx, R_C))


def test_subject_step_gamma0():
    x, y = name("x"), name("y")
    dy = deriv_ax(y, ty("p"), ty("p"), R_C,
                  extra=Basis.of((name("a"), ty("q")), (name("b"), ty("r"))))
    d = deriv_cont(dy, x, name("a"), name("b"), ND)
    check(d, R_C, ND)
    rx = _first(d.subject, ND, R_C, "gamma0")
    out = subject_step(d, rx, R_C, ND)
    check(out, R_C, ND)
    assert out.basis == d.basis and out.ty == d.ty


def test_subject_step_lj_beta_sigma():
    # (\x. x (^w. w)) (u :: ^z. z): beta then sigma, with typing transported
    u, w, x, z = name("u"), name("w"), name("x"), name("z")
    a = ty("a")
    dw = deriv_sel(deriv_ax(w, a, a, R_NONE), w)
    dx = deriv_ax(x, ty("a -> a"), ty("a -> a"), R_NONE)
    # hmm: x (^w. w): cut of x with ^w.w: x : a->a? stoup must equal x's type
    dx = deriv_ax(x, a, a, R_NONE)
    dbody = deriv_cut([dx], dw, R_NONE)          # x (^w. w) : a
    dlam = deriv_arrow_intro(dbody, x, LJ)       # \x. x (^w. w) : a -> a
    du = deriv_ax(u, a, a, R_NONE)
    dz = deriv_sel(deriv_ax(z, a, a, R_NONE), z)
    dcons = deriv_arrow_l([du], dz, R_NONE)      # u :: ^z. z ;a->a
    d = deriv_cut([dlam], dcons, R_NONE)
    check(d, R_NONE, LJ)
    e = d.subject
    rx = _first(e, LJ, R_NONE, "beta")
    out = subject_step(d, rx, R_NONE, LJ)
    check(out, R_NONE, LJ)
    assert out.basis == d.basis and out.ty == d.ty
    assert alpha_eq(out.subject, step(e, rx, R_NONE))
    # run sigma on the result
    e2, d2 = out.subject, out
    rs = [r for r in redexes(e2, LJ, R_NONE) if r.rule == "sigma"]
    assert rs
    out2 = subject_step(d2, rs[0], R_NONE, LJ)
    check(out2, R_NONE, LJ)
    assert out2.basis == d.basis and out2.ty == d.ty


def test_subject_step_pi():
    t, u, x, y = name("t"), name("u"), name("x"), name("y")
    a, b = ty("a"), ty("b")
    # (t (^x. x)) (^y. y): pi joins the two selections
    dx = deriv_sel(deriv_ax(x, a, a, R_NONE), x)
    dt = deriv_ax(t, a, a, R_NONE)
    dhead = deriv_cut([dt], dx, R_NONE)
    dy = deriv_sel(deriv_ax(y, a, a, R_NONE), y)
    d = deriv_cut([dhead], dy, R_NONE)
    check(d, R_NONE, LJ)
    e = d.subject
    rx = _first(e, LJ, R_NONE, "pi")
    out = subject_step(d, rx, R_NONE, LJ)
    check(out, R_NONE, LJ)
    assert out.basis == d.basis and out.ty == d.ty
    assert alpha_eq(out.subject, step(e, rx, R_NONE))


def test_subject_step_mu():
    x, y, u = name("x"), name("y"), name("u")
    a, b = ty("a"), ty("b")
    # ^x. x (u :: ^y. y) -> u :: ^y. y
    dy = deriv_sel(deriv_ax(y, b, b, R_NONE), y)
    du = deriv_ax(u, a, a, R_NONE)
    dk = deriv_arrow_l([du], dy, R_NONE)
    dx = deriv_ax(x, ty("a -> b"), ty("a -> b"), R_NONE)
    dcut = deriv_cut([dx], dk, R_NONE)
    d = deriv_sel(dcut, x)
    check(d, R_NONE, LJ)
    rx = _first(d.subject, LJ, R_NONE, "mu")
    out = subject_step(d, rx, R_NONE, LJ)
    check(out, R_NONE, LJ)
    assert out.basis == d.basis and out.ty == d.ty and out.stoup == d.stoup


def test_subject_step_gammaomega2():
    x, x1, x2, m = name("x"), name("x1"), name("x2"), name("m")
    # C[x<x1,x2] W[x1] x2 -> x
    dm = deriv_ax(x2, ty("a"), ty("a"), R_CW)
    dw = deriv_weak(dm, x1, ty("b"), ND)
    d = deriv_cont(dw, x, x1, x2, ND)
    check(d, R_CW, ND)
    rx = _first(d.subject, ND, R_CW, "gammaomega2")
    out = subject_step(d, rx, R_CW, ND)
    check(out, R_CW, ND)
    assert out.basis == d.basis and out.ty == d.ty
    assert alpha_eq(out.subject, step(d.subject, rx, R_CW))


def test_subject_step_congruence_and_transport():
    # reduction under a weakening run that must be reordered first
    x, y, z = name("x"), name("y"), name("z")
    dm = deriv_arrow_intro(deriv_ax(z, ty("a"), ty("a"), R_W), z, ND)
    dwx = deriv_weak(dm, name("q"), ty("c"), ND)
    dlam = deriv_arrow_intro(deriv_weak(dm, x, ty("b"), ND), x, ND)
    # \x. W[x] (\z. z): normal form; instead test omega1 under abstraction:
    inner = deriv_weak(dm, y, ty("b"), ND)        # W[y] \z.z
    douter = deriv_arrow_intro(promote(inner, inner.basis.extend(x, ty("c")), None or R_W if False else R_W, ND), x, ND) if False else None
    # simpler: \x. W[y] (x-using body) so omega1 applies
    dx = deriv_ax(x, ty("a"), ty("a"), R_W)
    dwy = deriv_weak(dx, y, ty("b"), ND)          # W[y] x
    dabs = deriv_arrow_intro(dwy, x, ND)          # \x. W[y] x
    check(dabs, R_W, ND)
    rx = _first(dabs.subject, ND, R_W, "omega1")
    out = subject_step(dabs, rx, R_W, ND)
    check(out, R_W, ND)
    assert out.basis == dabs.basis and out.ty == dabs.ty
    assert alpha_eq(out.subject, step(dabs.subject, rx, R_W))
