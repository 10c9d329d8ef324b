from __future__ import annotations

import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lgcone.lgmodel import (INFINITY, ZERO, CorrelatorKey, ModelError, Vanishing, build_model,
                            chamber_walls, epsilon_text, load_model_file, pairing, parse_epsilon,
                            stable, trivially_zero, witten_degree)


def test_three_spin():
    m = build_model([1], 3)
    assert m.charges == (Fraction(1, 3),)
    assert m.narrow == (0, 1)
    assert m.deg(1) == Fraction(1, 3)


def test_quintic():
    m = build_model([1] * 5, 5)
    assert m.total_charge == 1
    assert m.narrow == (0, 1, 2, 3)
    assert [m.deg(k) for k in m.narrow] == [0, 1, 2, 3]
    assert m.small_labels() == (0, 1)


def test_two_one_six():
    m = build_model([2, 1], 6)
    assert m.narrow == (0, 1, 3, 4)


@pytest.mark.parametrize("weights,d,invariant", [
    ([2, 2], 4, "gcd(w, d) = 1"),
    ([], 3, "weights nonempty"),
    ([1], 1, "d >= 2"),
    ([0], 3, "positive weights"),
    ([2], 5, "Fermat (w_j | d)"),
    ([3, 1], 4, "Fermat (w_j | d)"),
    ([3, 1], 3, "narrow sector nonempty"),
])
def test_invalid_models(weights, d, invariant):
    with pytest.raises(ModelError) as info:
        build_model(weights, d)
    assert info.value.invariant == invariant


def test_model_file(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"weights": [1], "degree": 4}))
    assert load_model_file(p).narrow == (0, 1, 2)
    p.write_text(json.dumps({"weights": [1]}))
    with pytest.raises(ModelError):
        load_model_file(p)


def test_pairing_is_symmetric_and_dual():
    m = build_model([1] * 5, 5)
    mat = m.space.pairing_matrix()
    assert mat == [list(r) for r in zip(*mat)]
    assert pairing(m.space, 1, 2) == 1 and pairing(m.space, 1, 1) == 0


def test_epsilon_parsing():
    assert parse_epsilon("infinity") is INFINITY
    assert parse_epsilon("zero") is ZERO
    assert parse_epsilon("2") is INFINITY
    assert parse_epsilon("1/2") == Fraction(1, 2)
    assert epsilon_text(Fraction(3, 5)) == "3/5"
    for bad in ("-1", "0", "abc"):
        with pytest.raises(ValueError):
            parse_epsilon(bad)


def test_key_canonical_order():
    a = CorrelatorKey(((1, 0), (0, 2), (0, 0)), (3, 1))
    b = CorrelatorKey(((0, 0), (1, 0), (0, 2)), (1, 3))
    assert a == b and hash(a) == hash(b)
    assert a.text() == "<phi0,phi1,phi0psi^2|phi1,phi3>"


def test_stability():
    assert not stable(CorrelatorKey(((0, 0), (1, 0)), (), INFINITY))
    assert stable(CorrelatorKey(((0, 0), (1, 0)), (1,), ZERO))
    assert not stable(CorrelatorKey(((1, 0),), (1, 1), Fraction(1, 2)))
    assert stable(CorrelatorKey(((1, 0),), (1, 1, 1), Fraction(1, 2)))
    assert not stable(CorrelatorKey(((0, 0), (1, 0)), (1,), INFINITY))


def test_three_spin_selection():
    m = build_model([1], 3)
    key = CorrelatorKey(((0, 0), (0, 0), (1, 0)))
    assert witten_degree(m, key) == 0
    assert trivially_zero(m, key) is None
    assert trivially_zero(m, CorrelatorKey(((0, 0), (0, 0), (0, 0)))) is Vanishing.EMPTY_MODULI
    assert trivially_zero(m, CorrelatorKey(((0, 0), (2, 0), (1, 0)))) is Vanishing.BROAD_INSERTION
    assert trivially_zero(m, CorrelatorKey(((1, 0),) * 4)) is None
    assert trivially_zero(m, CorrelatorKey(((1, 0),) * 3 + ((1, 1),))) is Vanishing.DEGREE_MISMATCH


@given(st.lists(st.integers(0, 4), min_size=1, max_size=5), st.integers(0, 3))
def test_vanishing_reasons_are_consistent(sectors, psi):
    m = build_model([1] * 5, 5)
    heavy = tuple((k, 0) for k in sectors[:-1]) + ((sectors[-1], psi),)
    key = CorrelatorKey(heavy)
    reason = trivially_zero(m, key)
    if reason is None:
        assert (2 + sum(sectors)) % 5 == 0
        assert witten_degree(m, key) == psi
        assert 4 not in sectors


def test_chamber_walls():
    assert chamber_walls(3) == [1, Fraction(1, 2), Fraction(1, 3)]
