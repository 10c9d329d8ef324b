"""Cone points over (t, u) and the recursion that recovers them from their regular part.

A point is stored in the J-function convention F(t, u, z) = z phi_0 + t + f(u, z)
+ O(1/z); the corresponding point of the cone is F(t, u, -z).  For narrow r
and s the pairing (d/du^r F(z), d/dt^s F(-z)) has no negative powers of z.
Reading that condition at t^m u^n isolates the coefficient of t^m u^(n + e_r)
in the negative part: its pairing with the constant phi_s coming from
d/dt^s of the linear term.  Every other contribution involves coefficients of
lower u-count, or of the same u-monomial with lower t-degree, so solving in
that order determines the whole negative part.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Optional, Union

from ..exactseries import (GradedSeries, MultiIndex, SeriesError, Truncation, Variables,
                           ZSeries, negate_z)
from ..lgmodel import FermatModel


class ReconstructionError(RuntimeError):
    """The regular part and base do not define a point of the cone."""


class CompletenessError(ValueError):
    """A check was requested beyond the range where stored coefficients are complete."""


@dataclass(frozen=True)
class Orders:
    """Requested output orders: weighted u-degree T_u, t-degree T_t, optional u-count cap."""

    u_weight: int = 0
    t_degree: int = 0
    u_degree: Optional[int] = None

    def __post_init__(self):
        if self.u_weight < 0 or self.t_degree < 0 or (self.u_degree is not None and self.u_degree < 0):
            raise ValueError("orders must be nonnegative")

    @property
    def max_u_count(self) -> int:
        # every sector's variable has weight >= 1, and sector 0 has weight exactly 1
        return self.u_weight if self.u_degree is None else min(self.u_weight, self.u_degree)

    @property
    def total(self) -> int:
        """Total (t + u) count the recursion must reach to fill the requested orders."""
        return self.t_degree + self.max_u_count

    def region(self) -> Truncation:
        return Truncation(u_weight=self.u_weight, u_degree=self.u_degree, total_degree=self.total)

    def output_range(self) -> Truncation:
        return Truncation(u_weight=self.u_weight, u_degree=self.u_degree, t_degree=self.t_degree)

    def to_json(self) -> dict:
        out = {"T_u": self.u_weight, "T_t": self.t_degree}
        if self.u_degree is not None:
            out["u_count"] = self.u_degree
        return out


@dataclass(frozen=True)
class ConePoint:
    """A point F(t, u, z) with leading term +z phi_0; ``on_cone()`` gives F(t, u, -z).

    ``region`` is the set of (t, u)-monomials on which every coefficient is
    final.  ``unstable`` is the closed-form unstable sum (in the u-ring) whose
    negative part is not made of invariants.
    """

    model: FermatModel
    series: ZSeries
    region: Truncation
    unstable: Optional[ZSeries] = None
    dilaton_leading: str = "+z phi_0"
    note: str = ""

    @property
    def variables(self) -> Variables:
        return self.series.variables

    def on_cone(self) -> ZSeries:
        return negate_z(self.series)

    @property
    def t_hat(self) -> ZSeries:
        """Regular part without the leading z phi_0."""
        reg = self.series.positive_part()
        lead = GradedSeries.constant(self.variables, 1, self.series.truncation, component=0)
        return reg - ZSeries(self.variables, self.series.truncation, {1: lead}, reg.window)

    def negative_part(self) -> ZSeries:
        return self.series.negative_part()

    def stable_part(self) -> ZSeries:
        """Negative part minus the unstable closed-form terms."""
        neg = self.series.negative_part()
        if self.unstable is None:
            return neg
        u = self.unstable.negative_part().embed(self.variables, self.series.truncation)
        return neg - u

    def perturbed(self, z: int, m: MultiIndex, component: int, delta: Fraction = Fraction(1)) -> ConePoint:
        """A copy with one coefficient shifted by ``delta`` (fault injection)."""
        bump = ZSeries.from_terms(self.variables, self.series.truncation, [(z, m, component, delta)])
        return replace(self, series=self.series + bump, note=f"perturbed at z^{z} {m} phi_{component}")

    def restrict(self, variables: Variables) -> ConePoint:
        unstable = None
        if self.unstable is not None:
            unstable = self.unstable.restrict(self.unstable.variables.sub(u=variables.u_labels))
        return replace(self, series=self.series.restrict(variables), unstable=unstable)


def joint_ring(model: FermatModel, u_labels: Iterable[int]) -> Variables:
    return model.variables(u=tuple(u_labels), t=model.narrow)


class _Coefficients:
    """Mutable coefficient store: monomial -> {(z, sector): value}."""

    def __init__(self, variables: Variables):
        self.variables = variables
        self.data = {}

    @classmethod
    def of(cls, series: ZSeries) -> _Coefficients:
        store = cls(series.variables)
        for j, m, k, v in series.terms():
            store.put(m, j, k, v)
        return store

    def put(self, m: MultiIndex, z: int, k: int, v: Fraction) -> None:
        slot = self.data.setdefault(m, {})
        nv = slot.get((z, k), 0) + v
        if nv:
            slot[(z, k)] = nv
        else:
            slot.pop((z, k), None)
            if not slot:
                del self.data[m]

    def get(self, m: MultiIndex) -> dict:
        return self.data.get(m, {})

    def to_series(self, truncation: Truncation) -> ZSeries:
        rows = [(z, m, k, v) for m, slot in self.data.items() for (z, k), v in slot.items()]
        return ZSeries.from_terms(self.variables, truncation, rows)


def _bump(exps: tuple, i: int, by: int = 1) -> tuple:
    e = list(exps)
    e[i] += by
    return tuple(e)


def _sub_monomials(m: MultiIndex) -> Iterable:
    for u in itertools.product(*(range(e + 1) for e in m.u)):
        for t in itertools.product(*(range(e + 1) for e in m.t)):
            yield MultiIndex(u, t)


def _relation(store: _Coefficients, d: int, r: int, s: int, m: MultiIndex) -> dict:
    """Negative-z coefficients {z: value} of (d/du^r F(z), d/dt^s F(-z)) at monomial m.

    ``r`` and ``s`` are positions in the u- and t-label tuples.
    """
    target = d - 2
    out = {}
    for m2 in _sub_monomials(m):
        b = store.get(MultiIndex(m2.u, _bump(m2.t, s)))
        if not b:
            continue
        m1 = m.over(m2)
        a = store.get(MultiIndex(_bump(m1.u, r), m1.t))
        if not a:
            continue
        factor = (m1.u[r] + 1) * (m2.t[s] + 1)
        by_sector = {}
        for (zb, kb), vb in b.items():
            by_sector.setdefault(kb, []).append((zb, -vb if zb % 2 else vb))
        for (za, ka), va in a.items():
            for zb, vb in by_sector.get(target - ka, ()):
                z = za + zb
                if z < 0:
                    out[z] = out.get(z, 0) + factor * va * vb
    return {z: v for z, v in out.items() if v}


def _regular_seed(model: FermatModel, ring: Variables, region: Truncation,
                  f: ZSeries, base: ZSeries) -> _Coefficients:
    store = _Coefficients(ring)
    one = ring.one
    store.put(one, 1, 0, Fraction(1))
    for k in ring.t_labels:
        store.put(ring.var("t", k), 0, k, Fraction(1))
    f_in = f.embed(ring, region)
    for j, m, k, v in f_in.terms():
        store.put(m, j, k, v)
    b_in = base.embed(ring, region)
    for j, m, k, v in b_in.negative_part().terms():
        store.put(m, j, k, v)
    return store


def _check_inputs(model: FermatModel, f: ZSeries, base: ZSeries, orders: Orders) -> None:
    narrow = set(model.narrow)
    if f.variables.t_labels:
        raise ReconstructionError("f must be a series in u only")
    if not set(f.variables.u_labels) <= narrow:
        raise ReconstructionError("u-labels of f must be narrow sectors")
    if any(j < 0 for j in f.coeffs):
        raise ReconstructionError("f must be polynomial in z (no negative powers)")
    if any(m.is_one() for g in f.coeffs.values() for m in g.terms):
        raise ReconstructionError("f(0, z) must vanish")
    for s in (f, base):
        bad = s.components() - narrow
        if bad:
            raise ReconstructionError(f"components {sorted(bad)} are not narrow; project them out first")
    if base.variables.u_labels or tuple(base.variables.t_labels) != tuple(model.narrow):
        raise ReconstructionError("base must be a series in t over every narrow sector")
    reg = base.positive_part()
    ring = base.variables
    expect = ZSeries.from_terms(ring, base.truncation,
                                [(1, ring.one, 0, 1)] + [(0, ring.var("t", k), k, 1) for k in ring.t_labels])
    if reg != expect:
        raise ReconstructionError("base regular part must be exactly z phi_0 + t")


def reconstruct(model: FermatModel, f: ZSeries, base: Union[ZSeries, ConePoint], orders: Orders,
                unstable: Optional[ZSeries] = None, verify: bool = True) -> ConePoint:
    """The cone point with regular part z phi_0 + t + f(u, z) and u = 0 slice ``base``.

    ``f`` lives in a ring of u-variables (any subset of the narrow sectors);
    ``base`` is the big J-function over all narrow t-variables, complete to
    t-degree ``orders.total``.  With ``verify`` every (r, s) relation is
    re-checked on the complete range and a violation raises
    :class:`ReconstructionError` (the base is then not on the cone).
    """
    base_region = None
    if isinstance(base, ConePoint):
        base_region, base = base.region, base.series
    _check_inputs(model, f, base, orders)
    need = orders.total
    have = (base_region or base.truncation).t_degree
    if have is None or have < need:
        raise CompletenessError(f"base is complete to t-degree {have}, reconstruction needs {need}")
    ring = joint_ring(model, f.variables.u_labels)
    region = orders.region()
    store = _regular_seed(model, ring, region, f, base)
    d = model.d
    nt = len(ring.t_labels)
    t_only = Variables.make(t=ring.t_labels)

    u_monomials = [m for m in ring.sub(t=()).monomials(Truncation(u_weight=orders.u_weight,
                                                                   u_degree=orders.max_u_count))
                   if m.u_count >= 1]
    u_monomials.sort(key=lambda m: (m.u_count, m.u))
    for mu_new in u_monomials:
        r = next(i for i, e in enumerate(mu_new.u) if e)
        mu = _bump(mu_new.u, r, -1)
        t_room = need - mu_new.u_count
        t_monomials = t_only.monomials(Truncation(t_degree=t_room))
        t_monomials.sort(key=lambda m: (m.t_count, m.t))
        for mt in t_monomials:
            m = MultiIndex(mu, mt.t)
            target = MultiIndex(mu_new.u, mt.t)
            solved = []
            for s in range(nt):
                rel = _relation(store, d, r, s, m)
                sector = d - 2 - ring.t_labels[s]
                for z, v in rel.items():
                    solved.append((z, sector, -v / (mu[r] + 1)))
            for z, sector, v in solved:
                store.put(target, z, sector, v)

    series = store.to_series(region)
    point = ConePoint(model, series, region, unstable)
    if verify:
        report = regularity_check(point)
        if not report.passed:
            first = report.violations[0]
            raise ReconstructionError(f"inconsistent input: relation (r={first.r}, s={first.s}) "
                                      f"fails at {first.monomial} z^{first.z}")
    return point


@dataclass(frozen=True)
class Violation:
    r: int
    s: int
    monomial: MultiIndex
    z: int
    value: Fraction


@dataclass
class RegularityReport:
    pairs: list
    checked: int = 0
    violations: list = field(default_factory=list)
    complete_range: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"status": "pass" if self.passed else "fail",
                "pairs": [list(p) for p in self.pairs],
                "relations_checked": self.checked,
                "violations": [{"r": v.r, "s": v.s, "u": list(v.monomial.u), "t": list(v.monomial.t),
                                "z": v.z, "value": str(v.value)} for v in self.violations],
                "complete_range": self.complete_range}


def regularity_check(point: ConePoint, r: Optional[int] = None, s: Optional[int] = None,
                     within: Optional[Truncation] = None) -> RegularityReport:
    """All negative-z coefficients of (d/du^r F(z), d/dt^s F(-z)) on the complete range.

    ``r`` and ``s`` are sector labels (``None`` runs every narrow pair).  The
    relation at t^m u^n is complete when t^m u^(n+e_r) and t^(m+e_s) u^n both
    lie in the point's region.
    """
    ring = point.variables
    region = point.region
    if within is not None:
        if not region.contains(within):
            raise CompletenessError(f"requested range {within} exceeds the complete region {region}")
        region = within
    rs = ring.u_labels if r is None else (r,)
    ss = ring.t_labels if s is None else (s,)
    for lab in rs:
        ring.index("u", lab)
    for lab in ss:
        ring.index("t", lab)
    store = _Coefficients.of(point.series)
    d = point.model.d
    monomials = ring.monomials(region)
    report = RegularityReport(pairs=[(a, b) for a in rs for b in ss],
                              complete_range={"region": region.to_json(),
                                              "rule": "t^m u^(n+e_r) and t^(m+e_s) u^n in region"})
    grade, admits = ring.grade, region.admits
    for rl in rs:
        ri = ring.index("u", rl)
        for sl in ss:
            si = ring.index("t", sl)
            for m in monomials:
                if not admits(grade(MultiIndex(_bump(m.u, ri), m.t))):
                    continue
                if not admits(grade(MultiIndex(m.u, _bump(m.t, si)))):
                    continue
                report.checked += 1
                rel = _relation(store, d, ri, si, m)
                for z, v in sorted(rel.items()):
                    report.violations.append(Violation(rl, sl, m, z, v))
    return report
