import pytest

from rclam.syntax import (
    LJ, ND, Abs, App, Contr, Cut, Name, Sel, Var, Weak,
    R_C, R_CW, R_NONE, R_W, alpha_eq, name, parse, pretty, supply_for,
)
from rclam.rewrite import (
    ContractError, append, canon_key, canonical, equiv, normalize,
    parallel_subst, redexes, rules_for, step, subst_gtz, subst_nd,
)
from rclam.wellformed import assert_wellformed, is_wellformed


def nd(text):
    return parse(text, ND)


def lj(text):
    return parse(text, LJ)


# --- substitution ----------------------------------------------------------

def test_subst_variable():
    assert subst_nd(nd("x"), nd("\\z. z"), name("x"), R_NONE) == nd("\\z. z")


def test_subst_weakening_at_substituted_name():
    # (W[x] y)[\z.z / x]: the image is closed, so no weakenings remain
    out = subst_nd(nd("W[x] y"), nd("\\z. z"), name("x"), R_W)
    assert out == nd("y")
    # image with free names not free in the body: they get weakened
    out = subst_nd(nd("W[x] y"), nd("u v"), name("x"), R_NONE)
    assert out == nd("W[u] W[v] y")
    # names already free in the body are not re-weakened
    out = subst_nd(nd("W[x] y"), nd("y u"), name("x"), R_NONE)
    assert out == nd("W[u] y")


def test_subst_weakening_other_name():
    # substitution under W[y]: y disappears when it turns up free in the image
    out = subst_nd(nd("W[y] x"), nd("y z"), name("x"), R_NONE)
    assert out == nd("y z")
    out = subst_nd(nd("W[y] x"), nd("z"), name("x"), R_NONE)
    assert out == nd("W[y] z")


def test_subst_contraction_source():
    out = subst_nd(nd("C[x<x1,x2] x1 x2"), nd("w"), name("x"), R_C)
    assert alpha_eq(out, parse("C[w<w#1,w#2] w#1 w#2", ND))
    # deterministic fresh copies
    assert pretty(out) == "C[w<w#1,w#2] w#1 w#2"


def test_subst_contraction_source_closed_image():
    # closed image: no renaming, no contraction prefix
    out = subst_nd(nd("C[x<x1,x2] x1 x2"), nd("\\z. z"), name("x"), R_C)
    assert alpha_eq(out, nd("(\\z. z) (\\z. z)"))


def test_subst_nonfree_is_identity():
    e = nd("C[x<x1,x2] y")
    assert subst_nd(e, nd("u"), name("q"), R_C) == e


def test_subst_contract_errors():
    with pytest.raises(ContractError):
        subst_nd(nd("x y"), nd("y"), name("x"), R_C)  # shared free y with c explicit
    with pytest.raises(ContractError):
        subst_nd(nd("y"), nd("u"), name("x"), R_W)  # x not free with w explicit


def test_subst_capture_avoidance():
    out = subst_nd(nd("\\y. x"), nd("y"), name("x"), R_NONE)
    assert isinstance(out, Abs)
    assert out.binder != name("y")
    assert out.body == Var(name("y"))


def test_parallel_subst():
    out = parallel_subst(nd("x1"), [(name("x1"), nd("a")), (name("x2"), nd("b"))], R_NONE)
    assert out == nd("a")
    out = parallel_subst(nd("x1 x2"), [(name("x1"), nd("a")), (name("x2"), nd("b"))], R_NONE)
    assert out == nd("a b")
    with pytest.raises(ContractError):
        parallel_subst(nd("x1 x2"), [(name("x1"), nd("a c")), (name("x2"), nd("b c"))], R_NONE)


def test_subst_gtz():
    assert subst_gtz(lj("x"), lj("t"), name("x"), R_NONE) == lj("t")
    out = subst_gtz(lj("^y. x"), lj("t"), name("x"), R_NONE)
    assert alpha_eq(out, lj("^y. t"))
    out = subst_gtz(lj("x :: ^q. x"), lj("t (u :: ^z. z)"), name("x"), R_NONE)
    assert alpha_eq(out, lj("(t (u :: ^z. z)) :: ^q. t (u :: ^z. z)"))


# --- append ----------------------------------------------------------------

def test_append_clauses():
    assert alpha_eq(append(lj("^x. x"), lj("^y. y"), R_NONE), lj("^x. x (^y. y)"))
    assert alpha_eq(
        append(lj("u :: ^x. x"), lj("^y. y"), R_NONE),
        lj("u :: ^x. x (^y. y)"),
    )
    assert alpha_eq(
        append(lj("W[z] ^x. x"), lj("^y. y"), R_W),
        lj("W[z] ^x. x (^y. y)"),
    )
    assert alpha_eq(
        append(lj("C[z<a,b] (a :: ^x. x (b :: ^w. w))"), lj("^y. y"), R_C),
        lj("C[z<a,b] (a :: ^x. (x (b :: ^w. w)) (^y. y))"),
    )


# --- redexes and steps -----------------------------------------------------

def test_beta_redex_nd():
    e = nd("(\\x. x) y")
    rz = redexes(e, ND, R_NONE)
    assert [r.rule for r in rz] == ["beta"]
    assert step(e, rz[0], R_NONE) == nd("y")


def test_rule_tables():
    assert rules_for(ND, R_NONE) == ("beta",)
    assert "gamma0" in rules_for(ND, R_C)
    assert "gamma0" not in rules_for(ND, R_CW)
    assert "gamma0" in rules_for(LJ, R_C)
    assert "gamma0" not in rules_for(LJ, R_CW)
    assert "mu" in rules_for(LJ, R_NONE)


def test_omega2_root():
    e = nd("(W[x] m) n")
    rz = redexes(e, ND, R_W)
    assert any(r.rule == "omega2" and r.path == () for r in rz)
    out = step(e, [r for r in rz if r.rule == "omega2"][0], R_W)
    assert out == nd("W[x] m n")


def test_omega2_erasing_case():
    e = nd("(W[x] m) (x y)")
    rz = [r for r in redexes(e, ND, R_NONE | set() if False else R_W) if r.rule == "omega2"]
    out = step(e, rz[0], R_W)
    assert out == nd("m (x y)")


def test_mu_redex():
    e = lj("^x. x (y :: ^z. z)")
    rz = [r for r in redexes(e, LJ, R_NONE) if r.rule == "mu"]
    assert rz and step(e, rz[0], R_NONE) == lj("y :: ^z. z")
    # x free in the context blocks the garbage collection
    e2 = lj("^x. x (x :: ^z. z)")
    assert not [r for r in redexes(e2, LJ, R_NONE) if r.rule == "mu"]


def test_omega1_modulo_equivalence():
    # the binder's own weakening sits outermost, but the run can be reordered
    e = nd("\\x. W[x] W[y] x'")
    e = parse("\\x. W[x] W[y] z", ND)
    rz = [r for r in redexes(e, ND, R_W) if r.rule == "omega1"]
    assert len(rz) == 1
    out = step(e, rz[0], R_W)
    assert alpha_eq(out, parse("W[y] \\x. W[x] z", ND))


def test_gamma0prime_modulo_swap():
    # C[x<a,b] b matches the erasing rule after swapping the bound pair
    e = parse("C[x<a,b] b", ND)
    rz = [r for r in redexes(e, ND, R_C) if r.rule == "gamma0'"]
    assert rz
    assert step(e, rz[0], R_C) == nd("x")


def test_gammaomega2():
    e = parse("C[x<x1,x2] W[x1] x2", ND)
    rz = [r for r in redexes(e, ND, R_CW) if r.rule == "gammaomega2"]
    assert rz
    assert step(e, rz[0], R_CW) == nd("x")


def test_pi_step():
    e = lj("(t (u :: ^x. x)) (^y. y)")
    rz = [r for r in redexes(e, LJ, R_NONE) if r.rule == "pi"]
    out = step(e, rz[0], R_NONE)
    assert alpha_eq(out, lj("t (u :: ^x. x (^y. y))"))


def test_beta_lj():
    e = lj("(\\x. x (^w. w)) (u :: ^z. z)")
    rz = [r for r in redexes(e, LJ, R_NONE) if r.rule == "beta"]
    out = step(e, rz[0], R_NONE)
    assert alpha_eq(out, lj("u (^x. (x (^w. w)) (^z. z))"))


def test_step_preserves_wellformedness():
    cases = [
        (ND, R_W, "(\\x. x (W[x] y)) z"),
        (ND, R_CW, "C[x<a,b] (a b)"),
        (ND, R_C, "C[x<a,b] y"),
        (LJ, R_CW, "\\x. W[x] C[y<y1,y2] y1 (y2 :: ^z. z)"),
        (LJ, R_NONE, "(\\x. x (^w. w)) (u :: ^z. z)"),
    ]
    for base, res, text in cases:
        e = parse(text, base)
        assert_wellformed(e, res, base)
        for rx in redexes(e, base, res):
            out = step(e, rx, res)
            assert_wellformed(out, res, base)


# --- canonical forms -------------------------------------------------------

def test_canonical_weakening_order():
    a = parse("W[x] W[y] m", ND)
    b = parse("W[y] W[x] m", ND)
    assert canonical(a, R_W) == canonical(b, R_W)
    assert equiv(a, b)


def test_canonical_contraction_swap():
    a = parse("C[x<a,b] m", ND)
    b = parse("C[x<b,a] m", ND)
    assert canonical(a, R_C) == canonical(b, R_C)
    assert equiv(a, b)


def test_canonical_idempotent():
    for text in ["W[y] W[x] m", "C[x<b,a] (C[y<d,c] (a (b (c d))))"]:
        e = parse(text, ND)
        c1 = canonical(e, R_CW)
        assert canonical(c1, R_CW) == c1


def test_equiv_nested_contractions():
    # re-association: C[x<y,z](C[y<u,v] m)  ==  C[x<y,u](C[y<z,v] m)
    a = parse("C[x<y,z] C[y<u,v] (u (v z))", ND)
    b = parse("C[x<y,u] C[y<z,v] (u (v z))", ND)
    assert equiv(a, b)
    # bound leaves of one group are interchangeable via swap + alpha
    assert equiv(a, parse("C[x<y,z] C[y<u,v] (u (z v))", ND))
    # but regrouping across distinct sources is not an equivalence
    t1 = parse("C[x<a,b] C[y<c,d] (a (b (c d)))", ND)
    t2 = parse("C[x<a,c] C[y<b,d] (a (b (c d)))", ND)
    assert not equiv(t1, t2)
    assert not equiv(parse("W[x] m", ND), parse("m", ND))


def test_equiv_alpha_insensitive():
    a = parse("\\a. \\b. W[a] W[b] q", ND)
    b = parse("\\b. \\a. W[b] W[a] q", ND)
    assert alpha_eq(a, b)
    assert equiv(a, b)
    # and epsilon + alpha together
    c = parse("\\b. \\a. W[a] W[b] q", ND)
    assert equiv(a, c)


# --- normalization ---------------------------------------------------------

def test_normalize_identity():
    r = normalize(nd("(\\x. x) y"), ND, R_NONE)
    assert r.normal and r.expr == nd("y") and r.steps == 1


def test_normalize_omega_loops():
    r = normalize(nd("(\\x. x x) (\\x. x x)"), ND, R_NONE, fuel=50)
    assert not r.normal


def test_weakening_subtlety_example():
    # both orders reach the same normal form
    e = nd("(\\x. x (W[x] y)) z")
    r = normalize(e, ND, R_W)
    assert r.normal and r.expr == nd("z y")
    assert r.rules() == ["beta", "omega3"]
    # the other order: contract omega3 first
    rz = [r2 for r2 in redexes(e, ND, R_W) if r2.rule == "omega3"]
    e2 = step(e, rz[0], R_W)
    assert alpha_eq(e2, nd("(\\x. x y) z"))
    r2 = normalize(e2, ND, R_W)
    assert r2.normal and r2.expr == nd("z y")
    assert r2.rules() == ["beta"]


def test_normalize_gtz_example():
    e = lj("\\x. x (y :: ^z. z)")
    for res in (R_NONE, R_C, R_W, R_CW):
        r = normalize(e, LJ, res)
        assert r.normal


def test_normalize_exhaustive_finds_nf():
    r = normalize(nd("(\\x. x) ((\\y. y) z)"), ND, R_NONE, strategy="exhaustive")
    assert r.normal and r.expr == nd("z")
