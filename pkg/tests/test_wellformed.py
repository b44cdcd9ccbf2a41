import pytest

from rclam.syntax import LJ, ND, R_C, R_CW, R_NONE, R_W, name, parse
from rclam.wellformed import check, fv_list, fv_ordered, is_wellformed, wellformed_in


def names(*texts):
    return [name(t) for t in texts]


def test_fv_list_clauses():
    assert fv_list(parse("x y", ND), R_NONE) == names("x", "y")
    # neither bound copy occurs: the contraction contributes nothing
    assert fv_list(parse("C[x<x1,x2] y", ND), R_C) == names("y")
    # a bound copy occurs: source first, copies removed
    assert fv_list(parse("C[x<x1,x2] x1 y", ND), R_C) == names("x", "y")
    assert fv_list(parse("W[x] \\y. y", ND), R_W) == names("x")
    assert fv_list(parse("W[x] y y", ND), R_W) == names("x", "y", "y")
    assert fv_ordered(parse("W[x] y y", ND), R_W) == names("x", "y")


# Example 1 of the ND base: each pre-term with the exact resource sets
# under which it is a legal term.
ND_MEMBERSHIP = [
    ("\\x. y", {R_NONE, R_C}),
    ("C[y<y1,y2] x", {R_C}),
    ("\\x. x x", {R_NONE, R_W}),
    ("W[x] \\y. y y", {R_W}),
]

# The seven-expression worked example of the sequent base.
LJ_MEMBERSHIP = [
    ("\\x. x (y :: ^z. z)", {R_NONE, R_C, R_W, R_CW}),
    ("\\x. w (y :: ^z. z)", {R_NONE, R_C}),
    ("\\x. x (x :: ^z. z)", {R_NONE, R_W}),
    ("\\x. y (y :: ^z. z)", {R_NONE}),
    ("\\x. W[x] y (y :: ^z. z)", {R_W}),
    ("\\x. C[y<y1,y2] y1 (y2 :: ^z. z)", {R_C}),
    ("\\x. W[x] C[y<y1,y2] y1 (y2 :: ^z. z)", {R_CW}),
]


@pytest.mark.parametrize("text,expected", ND_MEMBERSHIP)
def test_nd_membership(text, expected):
    assert set(wellformed_in(parse(text, ND), ND)) == expected


@pytest.mark.parametrize("text,expected", LJ_MEMBERSHIP)
def test_lj_membership(text, expected):
    assert set(wellformed_in(parse(text, LJ), LJ)) == expected


def test_violation_pinpoints_node():
    v = check(parse("\\x. y", ND), R_W, ND)
    assert v is not None and v.clause == "abstraction-relevance"
    v = check(parse("\\x. x x", ND), R_C, ND)
    assert v is not None and v.clause == "application-linearity"
    v = check(parse("\\a. (\\x. y) a", ND), R_W, ND)
    assert v is not None and v.path == (0, 0)


def test_weakening_freshness():
    assert not is_wellformed(parse("W[x] x", ND), R_W, ND)
    assert is_wellformed(parse("W[x] y", ND), R_W, ND)


def test_gtz_example_shape():
    e = parse("\\x. W[x] C[y<y1,y2] y1 (y2 :: ^z. z)", LJ)
    assert check(e, R_CW, LJ) is None
