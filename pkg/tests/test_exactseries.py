from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lgcone.exactseries import (CompositionError, GradedSeries, MultiIndex, NotInvertibleError,
                                ProductRuleError, ReversionError, SeriesError, Truncation,
                                Variables, WindowError, ZSeries, dump, dump_lines, format_rational,
                                laurent_residue, negate_z, parse_rational, series_compose,
                                series_invert, series_mul, series_reversion)

RING = Variables.make(u=(0, 1), t=(2,), weight=lambda k: max(k, 1))
TRUNC = Truncation(u_weight=4, t_degree=2)
MONOS = RING.monomials(TRUNC)
U_ONLY = Variables.make(u=(0, 1), weight=lambda k: max(k, 1))

fractions = st.fractions(min_value=-5, max_value=5, max_denominator=6)


@st.composite
def scalar_series(draw, ring=RING, trunc=TRUNC, constant=None):
    monos = ring.monomials(trunc)
    chosen = draw(st.lists(st.sampled_from(monos), max_size=6, unique=True))
    terms = {m: draw(fractions) for m in chosen}
    if constant is not None:
        terms[ring.one] = constant
    return GradedSeries(ring, trunc, terms)


def var(ring, kind, label, trunc=TRUNC):
    return GradedSeries.variable(ring, kind, label, trunc)


# --- rings and truncations

def test_weights_and_grades():
    m = MultiIndex((2, 1), (1,))
    assert RING.grade(m) == (3, 3, 2, 1)
    assert RING.weight(m) == 5


def test_truncation_drops_terms_outside():
    g = GradedSeries(RING, TRUNC, {RING.var("u", 1, 5): 1, RING.var("u", 0): 2})
    assert list(g.terms) == [RING.var("u", 0)]


def test_monomials_respect_truncation():
    assert all(TRUNC.admits(RING.grade(m)) for m in MONOS)
    assert RING.one in MONOS and RING.var("u", 1, 4) in MONOS
    assert RING.var("t", 2, 3) not in MONOS


def test_bad_monomial_rejected():
    with pytest.raises(SeriesError):
        GradedSeries(RING, TRUNC, {MultiIndex((1,), (0,)): 1})


def test_mixed_scalar_vector_rejected():
    with pytest.raises(SeriesError):
        GradedSeries(RING, TRUNC, {RING.one: {None: 1}, RING.var("u", 0): {0: 1}})


def test_meet_and_contains():
    a, b = Truncation(u_weight=3), Truncation(u_weight=5, t_degree=1)
    assert a.meet(b) == Truncation(u_weight=3, t_degree=1)
    assert Truncation(u_weight=5).contains(Truncation(u_weight=3, t_degree=1))
    assert not Truncation(u_weight=3).contains(Truncation(u_weight=5))


# --- products

def test_product_truncates():
    x = var(RING, "u", 0)
    y = var(RING, "u", 1)
    p = series_mul(x + y, x + y)
    assert p.coefficient(MultiIndex((1, 1), (0,))) == 2
    q = series_mul(p, p)          # weight 4 survives, u^1 to the 4th has weight 4
    assert q.coefficient(RING.var("u", 1, 4)) == 1
    assert all(RING.weight(m) <= 4 for m in q.terms)


def test_vector_product_needs_rule():
    a = GradedSeries.constant(RING, 1, TRUNC, component=0)
    with pytest.raises(ProductRuleError):
        series_mul(a, a)
    rule = lambda i, j: ((i + j) % 3, 1)
    assert series_mul(a, a, rule) == GradedSeries.constant(RING, 1, TRUNC, component=0)


@given(scalar_series(), scalar_series(), scalar_series())
@settings(max_examples=60, deadline=None)
def test_ring_axioms(a, b, c):
    assert series_mul(a, b) == series_mul(b, a)
    assert series_mul(series_mul(a, b), c) == series_mul(a, series_mul(b, c))
    assert series_mul(a, b + c) == series_mul(a, b) + series_mul(a, c)
    assert a - a == GradedSeries.zero(RING, TRUNC)


@given(scalar_series(constant=Fraction(3, 2)))
@settings(max_examples=60, deadline=None)
def test_invert_is_inverse(a):
    assert series_mul(a, series_invert(a)) == GradedSeries.constant(RING, 1, TRUNC)


def test_invert_simple():
    x = var(U_ONLY, "u", 0, Truncation(u_weight=2))
    inv = series_invert(GradedSeries.constant(U_ONLY, 1, Truncation(u_weight=2)) + x)
    assert [inv.coefficient(U_ONLY.var("u", 0, p)) for p in range(3)] == [1, -1, 1]


def test_invert_needs_unit():
    with pytest.raises(NotInvertibleError):
        series_invert(var(RING, "u", 0))


# --- derivatives

def test_derivative():
    x, y = var(RING, "u", 0), var(RING, "u", 1)
    f = series_mul(series_mul(x, x), y)
    d = f.derivative("u", 0)
    assert d.coefficient(MultiIndex((1, 1), (0,))) == 2


@given(scalar_series(), scalar_series())
@settings(max_examples=40, deadline=None)
def test_leibniz(a, b):
    lhs = series_mul(a, b).derivative("u", 0)
    rhs = series_mul(a.derivative("u", 0), b) + series_mul(a, b.derivative("u", 0))
    trunc = lhs.truncation.meet(rhs.truncation)
    assert lhs.truncate(trunc) == rhs.truncate(trunc)


# --- composition and reversion

def test_compose_identity():
    f = GradedSeries(RING, TRUNC, {RING.var("u", 0, 2): 3, RING.var("t", 2): 1})
    assert series_compose(f, {}) == f


def test_compose_constant_term_rejected():
    f = var(RING, "u", 0)
    bad = GradedSeries.constant(RING, 1, TRUNC)
    with pytest.raises(CompositionError):
        series_compose(f, {("u", 0): bad})


def test_reversion_catalan():
    T = Truncation(u_weight=5)
    ring = Variables.make(u=(0,))
    x = GradedSeries.variable(ring, "u", 0, T)
    inv = series_reversion({("u", 0): x + series_mul(x, x)})[("u", 0)]
    got = [inv.coefficient(ring.var("u", 0, p)) for p in range(1, 6)]
    assert got == [1, -1, 2, -5, 14]


def test_reversion_rejects_bad_linear_part():
    ring = Variables.make(u=(0,))
    x = GradedSeries.variable(ring, "u", 0, Truncation(u_weight=3))
    with pytest.raises(ReversionError):
        series_reversion({("u", 0): x.scale(2)})


@st.composite
def near_identity(draw):
    T = Truncation(u_weight=5)
    out = {}
    for lab in U_ONLY.u_labels:
        w = U_ONLY.weight(U_ONLY.var("u", lab))
        monos = [m for m in U_ONLY.monomials(T) if m.count >= 2 and U_ONLY.weight(m) >= w]
        chosen = draw(st.lists(st.sampled_from(monos), max_size=4, unique=True))
        g = GradedSeries(U_ONLY, T, {m: draw(fractions) for m in chosen})
        out[("u", lab)] = GradedSeries.variable(U_ONLY, "u", lab, T) + g
    return out


@given(near_identity())
@settings(max_examples=40, deadline=None)
def test_reversion_round_trip(f):
    inv = series_reversion(f)
    for key in f:
        ident = GradedSeries.variable(U_ONLY, key[0], key[1], Truncation(u_weight=5))
        assert series_compose(f[key], inv) == ident
        assert series_compose(inv[key], f) == ident


# --- Laurent series in z

def zs(rows, window=None, ring=RING, trunc=TRUNC):
    return ZSeries.from_terms(ring, trunc, rows, window)


def test_window_violation():
    with pytest.raises(WindowError):
        zs([(3, RING.one, 0, 1)], window=(-1, 1))


def test_negate_and_residue():
    f = zs([(1, RING.one, 0, 1), (-1, RING.var("u", 0), 1, 2), (-2, RING.one, 0, 5)])
    g = negate_z(f)
    assert g.coeff(1).coefficient(RING.one, 0) == -1
    assert g.coeff(-1).coefficient(RING.var("u", 0), 1) == -2
    assert g.coeff(-2).coefficient(RING.one, 0) == 5
    assert laurent_residue(f).coefficient(RING.var("u", 0), 1) == 2


def test_polar_parts_split():
    f = zs([(1, RING.one, 0, 1), (0, RING.one, 1, 1), (-1, RING.one, 0, 3)])
    assert f.positive_part() + f.negative_part() == f
    assert set(f.positive_part().coeffs) == {0, 1}
    assert set(f.negative_part().coeffs) == {-1}


def test_shift_and_window():
    f = zs([(0, RING.one, 0, 1)], window=(-1, 1))
    assert f.shift(2).window == (1, 3)
    assert f.windowed(lo=1).term_count() == 0


def test_mul_adds_windows():
    f = zs([(1, RING.one, None, 1)], window=(-1, 1))
    g = zs([(-2, RING.one, None, 1)], window=(-2, 0))
    p = f.mul(g)
    assert p.window == (-3, 1)
    assert p.coeff(-1).coefficient(RING.one) == 1


# --- text forms

def test_dump_format_and_order():
    f = zs([(1, RING.var("u", 1, 5), 0, Fraction(1, 375000)), (0, RING.one, 0, 1),
            (-1, MultiIndex((1, 1), (1,)), 2, Fraction(-3, 4))], trunc=Truncation())
    assert dump_lines(f) == [
        "z^-1 u^(e_0+e_1) t^(e_2) phi_2 : -3/4",
        "z^0 phi_0 : 1",
        "z^1 u^(5e_1) phi_0 : 1/375000",
    ]
    assert dump(ZSeries.zero(RING, TRUNC)) == ""


def test_rational_text_round_trip():
    for x in (Fraction(0), Fraction(7), Fraction(-3, 8)):
        assert parse_rational(format_rational(x)) == x
    assert format_rational(Fraction(6, 4)) == "3/2"
