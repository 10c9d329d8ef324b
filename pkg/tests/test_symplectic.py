from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lgcone.cone.symplectic import (BroadComponentError, dilaton_shift, omega_pairing,
                                    polarization, undo_dilaton_shift)
from lgcone.exactseries import GradedSeries, Truncation, ZSeries
from lgcone.lgmodel import build_model

QUINTIC = build_model([1] * 5, 5)
SPACE = QUINTIC.space
RING = QUINTIC.variables(u=(0, 1))
TRUNC = Truncation(u_weight=3)
MONOS = RING.monomials(TRUNC)
WINDOW = (-3, 3)


@st.composite
def windowed_series(draw, lo=WINDOW[0], hi=WINDOW[1]):
    rows = draw(st.lists(st.tuples(st.integers(lo, hi), st.sampled_from(MONOS),
                                   st.sampled_from(QUINTIC.narrow),
                                   st.fractions(min_value=-4, max_value=4, max_denominator=5)),
                         max_size=8))
    return ZSeries.from_terms(RING, TRUNC, rows, (lo, hi))


def zero():
    return GradedSeries.zero(RING, TRUNC)


@given(windowed_series(), windowed_series())
@settings(max_examples=200, deadline=None)
def test_antisymmetry(f, g):
    assert omega_pairing(SPACE, f, g) == -omega_pairing(SPACE, g, f)


@given(windowed_series(), windowed_series())
@settings(max_examples=200, deadline=None)
def test_polarization_isotropic(f, g):
    fp, fm = polarization(f)
    gp, gm = polarization(g)
    assert omega_pairing(SPACE, fp, gp) == zero()
    assert omega_pairing(SPACE, fm, gm) == zero()
    assert fp + fm == f


@given(windowed_series())
@settings(max_examples=100, deadline=None)
def test_dilaton_round_trip(t):
    q = dilaton_shift(t)
    assert undo_dilaton_shift(q) == t
    assert q.coeff(1).coefficient(RING.one, 0) == t.coeff(1).coefficient(RING.one, 0) - 1


def test_pairing_value():
    f = ZSeries.from_terms(RING, TRUNC, [(0, RING.one, 1, 1)])
    g = ZSeries.from_terms(RING, TRUNC, [(-1, RING.one, 2, 1)])
    # Res (phi_1, -phi_2 / z) = -1
    assert omega_pairing(SPACE, f, g).coefficient(RING.one) == -1


def test_broad_rejected():
    model = build_model([2, 1], 6)
    ring = model.variables(u=(0,))
    f = ZSeries.from_terms(ring, TRUNC, [(0, ring.one, 2, 1)])
    with pytest.raises(BroadComponentError):
        omega_pairing(model.space, f, f)
