from __future__ import annotations

import itertools
import json
from fractions import Fraction

import pytest

from lgcone.cone import (CompletenessError, InconsistentTableError, InvariantTable, Orders,
                         OutOfRangeError, ReconstructionError, big_J, compare_tables,
                         cor4_check, infinity_chamber_check, j_epsilon, mirror_small, reconstruct,
                         regularity_check, routes_check, selection_check, sigma_check,
                         string_dilaton_check, transport_check)
from lgcone.cone.bigj import SigmaError, sigma_extract
from lgcone.cone.pipelines import chamber_label, sweep_keys
from lgcone.exactseries import ZSeries
from lgcone.hyperi import EpsilonChamber, big_I, narrow_part, regular_part_data
from lgcone.lgmodel import INFINITY, ZERO, CorrelatorKey, build_model

from oracles import THREE_SPIN, r_spin_four_point, r_spin_three_point

SPIN3 = build_model([1], 3)
QUINTIC = build_model([1] * 5, 5)


@pytest.mark.parametrize("r", [3, 4, 5, 6])
def test_r_spin_primary_correlators(r):
    model = build_model([1], r)
    table = big_J(model, Orders(t_degree=3)).table
    for n, oracle in ((3, r_spin_three_point), (4, r_spin_four_point)):
        for a in itertools.combinations_with_replacement(model.narrow, n):
            key = CorrelatorKey(tuple((k, 0) for k in a))
            assert table.value(key) == oracle(r, a), key.text()


def test_three_spin_potential():
    table = big_J(SPIN3, Orders(t_degree=4)).table
    for a, v in THREE_SPIN.items():
        assert table.value(CorrelatorKey(tuple((k, 0) for k in a))) == v


def test_big_J_leading_terms():
    point = big_J(SPIN3, Orders(t_degree=2)).point
    ring = point.variables
    assert point.series.coeff(1).terms == {ring.one: {0: 1}}
    assert point.series.coeff(0).coefficient(ring.var("t", 1), 1) == 1


def test_string_and_dilaton_on_big_J():
    for model in (SPIN3, QUINTIC, build_model([1], 5)):
        report = string_dilaton_check(big_J(model, Orders(t_degree=3)).table)
        assert report["status"] == "pass", report["failures"][:3]
        assert report["string_pairs"] > 0


def test_string_pairs_on_quintic_with_psi():
    table = big_J(QUINTIC, Orders(t_degree=3)).table
    for k in QUINTIC.narrow:
        lhs = CorrelatorKey(((0, 0), (1, 0), (1, 0), (k, 1)))
        rhs = CorrelatorKey(((1, 0), (1, 0), (k, 0)))
        assert table.value(lhs) == table.value(rhs)


# tables

def test_table_conflict_and_range():
    table = big_J(SPIN3, Orders(t_degree=2)).table
    key = CorrelatorKey(((0, 0), (0, 0), (1, 0)))
    with pytest.raises(InconsistentTableError):
        table.add(key, Fraction(2), "test")
    with pytest.raises(OutOfRangeError):
        table.value(CorrelatorKey(((1, 0),) * 6))
    assert table.value(CorrelatorKey(((0, 0), (2, 0), (1, 0)))) == 0   # broad


def test_table_exports():
    table = big_J(SPIN3, Orders(t_degree=3)).table
    data = json.loads(table.to_json_text())
    assert data["epsilon"] == "infinity"
    assert {"heavy": [[0, 0], [0, 0], [1, 0]], "light": [], "value": "1",
            "provenance": "big_J"} in data["entries"]
    back = InvariantTable.from_json(data, SPIN3, INFINITY)
    assert back == table.entries
    lines = table.to_csv_text().splitlines()
    assert lines[0] == "heavy,light,value,provenance"
    assert len(lines) == len(table) + 1


def test_permutation_symmetry_of_reads():
    # every key with several psi-free insertions is read off once per choice of slot;
    # add() raises on disagreement, so a built table is symmetric
    table = big_J(build_model([1], 4), Orders(t_degree=4)).table
    key = CorrelatorKey(((1, 0), (1, 0), (2, 0), (2, 0)))
    assert table.value(key) == Fraction(1, 4)


# reconstruction

def _zero_chamber_inputs(model, T_u):
    reg = regular_part_data(model, EpsilonChamber(None), T_u)
    return reg.f.positive_part(), reg.unstable


def test_graph_property():
    f, U = _zero_chamber_inputs(SPIN3, 4)
    base = big_J(SPIN3, Orders(t_degree=6)).point
    a = reconstruct(SPIN3, f, base, Orders(4, 2), unstable=U)
    b = reconstruct(SPIN3, f, base, Orders(4, 2), unstable=U)
    assert a.series == b.series


def test_perturbation_detected_and_located():
    f, U = _zero_chamber_inputs(SPIN3, 4)
    base = big_J(SPIN3, Orders(t_degree=6)).point
    point = reconstruct(SPIN3, f, base, Orders(4, 2), unstable=U)
    assert regularity_check(point).passed
    m = point.variables.var("u", 1)
    bad = point.perturbed(-1, m, 0)
    report = regularity_check(bad)
    assert not report.passed
    assert {(v.r, v.s) for v in report.violations} >= {(1, 1)}


def test_inconsistent_base_raises():
    f, U = _zero_chamber_inputs(SPIN3, 3)
    base = big_J(SPIN3, Orders(t_degree=5)).point
    ring = base.variables
    broken = base.series + ZSeries.from_terms(ring, base.series.truncation,
                                              [(-1, ring.var("t", 1, 3), 1, 1)])
    with pytest.raises(ReconstructionError):
        reconstruct(SPIN3, f, broken, Orders(3, 2))


def test_bad_inputs():
    f, _ = _zero_chamber_inputs(SPIN3, 3)
    base = big_J(SPIN3, Orders(t_degree=2)).point
    with pytest.raises(CompletenessError):
        reconstruct(SPIN3, f, base, Orders(3, 2))
    base = big_J(SPIN3, Orders(t_degree=5)).point
    with pytest.raises(ReconstructionError):
        reconstruct(SPIN3, f.shift(-3), base, Orders(3, 2))


def test_regularity_range_checked():
    je = j_epsilon(SPIN3, "1/2", Orders(3, 1))
    with pytest.raises(CompletenessError):
        regularity_check(je.point, within=Orders(5, 1).region())
    report = regularity_check(je.point, r=0, s=1)
    assert report.passed and report.pairs == [(0, 1)] and report.checked > 0


# chambers

def test_chamber_labels():
    assert chamber_label(EpsilonChamber.of("3")) == "infinity"
    assert chamber_label(EpsilonChamber.of("2/3")) == "1/2"
    assert chamber_label(EpsilonChamber.of(ZERO)) == "zero"


def test_chamber_invariance_three_spin():
    a = j_epsilon(SPIN3, "2/3", Orders(4, 2)).table.to_json_text()
    b = j_epsilon(SPIN3, "3/5", Orders(4, 2)).table.to_json_text()
    assert a == b


def test_light_only_table():
    table = j_epsilon(QUINTIC, "1/2", Orders(4, 0)).table
    assert len(table) > 0
    assert all(k.m == 1 and k.n >= 3 for k in table.entries)


def test_infinity_chamber_three_spin():
    report = infinity_chamber_check(SPIN3, Orders(4, 3))
    assert report["status"] == "pass" and report["compared"] > 0


def test_transport_three_spin():
    same = transport_check(SPIN3, "1/2", "1/2", Orders(4, 2))
    assert same["status"] == "pass"
    report = transport_check(SPIN3, INFINITY, "1/3", Orders(4, 2))
    assert report["status"] == "pass" and report["left_vs_big_J_mismatches"] == 0


def test_cor4_three_spin():
    report = cor4_check(SPIN3, 6)
    assert report["status"] == "pass"
    assert report["round_trip"]["compared"] > 0 and report["identity"]["compared"] > 0


# mirror route and sigma

def test_mirror_small_three_spin():
    table = mirror_small(SPIN3, Orders(4, 0)).table
    assert table.value(CorrelatorKey(((0, 0), (0, 0), (1, 0)))) == 1
    assert compare_tables(table, big_J(SPIN3, Orders(t_degree=4)).table)["mismatches"] == []


def test_mirror_small_at_origin():
    point = mirror_small(QUINTIC, Orders(3, 0)).point
    at0 = [(j, k, v) for j, m, k, v in point.series.terms() if m.is_one()]
    assert at0 == [(1, 0, 1)]


def test_routes_quintic():
    report = routes_check(QUINTIC, 5)
    assert report["status"] == "pass"
    assert report["mirror_vs_big_J"]["compared"] > 0


def test_quintic_three_point_both_routes():
    key = CorrelatorKey(((1, 0),) * 3)
    a = big_J(QUINTIC, Orders(t_degree=3)).table.value(key)
    b = mirror_small(QUINTIC, Orders(5, 0)).table.value(key)
    assert a == b != 0


def test_sigma_two_one_six():
    model = build_model([2, 1], 6)
    report = sigma_check(model, 6)
    assert report["status"] == "pass"
    with pytest.raises(SigmaError):
        sigma_extract(model, narrow_part(model, big_I(model, 6)))
    sig = sigma_extract(model, narrow_part(model, big_I(model, 10)))
    ring = sig.sigma.variables
    for k in model.narrow:
        assert sig.sigma.coefficient(ring.var("u", k), k) == 1


# selection rules

def test_sweep_keys_shape():
    keys = list(sweep_keys(SPIN3, INFINITY, 2, 0, max_psi=1))
    assert CorrelatorKey(((0, 0), (1, 1))) in keys
    assert all(sum(1 for _, j in k.heavy if j) <= 1 for k in keys)


def test_selection_three_spin():
    tables = [big_J(SPIN3, Orders(t_degree=4)).table,
              j_epsilon(SPIN3, "1/2", Orders(4, 2)).table]
    report = selection_check(tables, 5, 4)
    assert report["status"] == "pass"
    assert all(t["covered_keys"] > 0 for t in report["tables"])
