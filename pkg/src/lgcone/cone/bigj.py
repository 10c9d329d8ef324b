"""The big J-function from the big I-function.

The point I(u, -z) lies on the cone, so its tangent space there is spanned
over scalar series polynomial in z by z d/du^r I(u, -z), one per narrow r;
for r = 0 this derivative is I itself (up to sign).  A combination with
leading term -z phi_0 and nothing else at positive z-powers is again on the
cone and has the form -z phi_0 + sigma(u) + O(1/z).  Substituting
u = sigma^{-1}(t) turns it into the big J-function J(t, -z).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from ..exactseries import (GradedSeries, MultiIndex, SeriesError, Truncation, Variables, ZSeries,
                           negate_z, series_reversion)
from ..hyperi import big_I, narrow_part
from ..lgmodel import INFINITY, CorrelatorKey, FermatModel, trivially_zero, witten_degree
from .reconstruction import ConePoint, Orders
from .tables import InvariantTable, TableRange, read_off


class SigmaError(SeriesError):
    pass


@dataclass(frozen=True)
class SigmaResult:
    sigma: GradedSeries      # vector-valued: z^0 part of the point
    point: ZSeries           # -z phi_0 + sigma(u) + O(1/z), in the u-ring
    multipliers: dict        # sector r -> scalar ZSeries c_r(u, z)


def _by_weight(series: ZSeries) -> dict:
    """weight -> list of (z, monomial, coefficient dict)."""
    out = {}
    weight = series.variables.weight
    for j, g in series.coeffs.items():
        for m, c in g.terms.items():
            out.setdefault(weight(m), []).append((j, m, c))
    return out


def sigma_extract(model: FermatModel, bigI: ZSeries) -> SigmaResult:
    """Solve for the tangent combination with leading term -z phi_0, weight by weight."""
    ring = bigI.variables
    narrow = set(model.narrow)
    if bigI.components() - narrow:
        raise SigmaError("project the I-function to the narrow sectors first")
    at_zero = {(j, k): v for j, m, k, v in bigI.terms() if m.is_one()}
    if at_zero != {(1, 0): 1}:
        raise SigmaError("I(0, z) must equal z phi_0")
    labels = ring.u_labels
    if 0 not in labels:
        raise SigmaError("the u^0 direction is needed for the leading term")

    tangents = {}
    trunc = bigI.truncation
    for r in labels:
        G = negate_z(bigI.derivative("u", r)).shift(1)
        tangents[r] = G
        trunc = trunc.meet(G.truncation)
    tangents = {r: G.truncate(trunc) for r, G in tangents.items()}
    pieces = {r: _by_weight(G) for r, G in tangents.items()}
    for r in labels:
        lead = {(j, m): dict(c) for j, m, c in pieces[r].get(0, [])}
        if lead != {(1, ring.one): {r: 1}}:
            raise SigmaError(f"tangent direction {r} does not start with z phi_{r}; elimination is singular")

    weight_cap = trunc.u_weight
    if weight_cap is None:
        raise SigmaError("the I-function must be truncated in weighted u-degree")
    top = max(ring.u_weights)
    if weight_cap < top:
        raise SigmaError(f"sigma is complete only to weight {weight_cap}; truncate the I-function "
                         f"at weight >= {2 * top} to reach every linear term")
    grade, admits = ring.grade, trunc.admits
    one = ring.one
    mult = {r: {} for r in labels}              # r -> weight -> [(z, monomial, value)]
    mult[0][0] = [(0, one, Fraction(-1))]
    point = {(1, one): {0: Fraction(-1)}}
    for n in range(1, weight_cap + 1):
        acc = {}
        for r in labels:
            for k, terms in mult[r].items():
                for jg, mg, cg in pieces[r].get(n - k, ()):
                    gg = grade(mg)
                    for jc, mc, vc in terms:
                        gc = grade(mc)
                        if not admits((gg[0] + gc[0], gg[1] + gc[1], gg[2] + gc[2], gg[3] + gc[3])):
                            continue
                        slot = acc.setdefault((jc + jg, mc.times(mg)), {})
                        for sec, v in cg.items():
                            slot[sec] = slot.get(sec, 0) + vc * v
        for (j, m), vec in acc.items():
            vec = {k: v for k, v in vec.items() if v}
            if not vec:
                continue
            if j >= 1:
                for sec, v in vec.items():
                    mult[sec].setdefault(n, []).append((j - 1, m, -v))
            else:
                point[(j, m)] = vec
    rows = [(j, m, k, v) for (j, m), vec in point.items() for k, v in vec.items()]
    P = ZSeries.from_terms(ring, trunc, rows)
    sigma = P.coeff(0)
    _check_sigma(ring, sigma)
    multipliers = {r: ZSeries.from_terms(ring, trunc, [(j, m, None, v) for terms in mult[r].values()
                                                       for j, m, v in terms]) for r in labels}
    return SigmaResult(sigma, P, multipliers)


def _check_sigma(ring: Variables, sigma: GradedSeries) -> None:
    for m, k, v in sigma.items():
        if m.count == 0:
            raise SigmaError("sigma(0) must vanish")
        if m.count == 1:
            lab = next(l for l, e in zip(ring.u_labels, m.u) if e)
            if lab != k or v != 1:
                raise SigmaError(f"linear part of sigma is not the identity (u^{lab} phi_{k}: {v})")
    for lab in ring.u_labels:
        if sigma.coefficient(ring.var("u", lab), lab) != 1:
            raise SigmaError(f"sigma misses the linear term u^{lab}")


def sigma_map(sigma: GradedSeries) -> dict:
    ring = sigma.variables
    return {("u", k): sigma.component(k) for k in ring.u_labels}


def base_weight_bound(model: FermatModel, count: int) -> int:
    """Largest t-weight of a monomial of t-degree <= count carrying a non-vanishing invariant."""
    ring = model.variables(t=model.narrow)
    # the regular part t itself must survive the cutoff
    best = max(ring.t_weights) if count >= 1 else 0
    for m in ring.monomials(Truncation(t_degree=count)):
        heavy = [(k, 0) for k, e in zip(ring.t_labels, m.t) for _ in range(e)]
        w = ring.weight(m)
        if w <= best:
            continue
        for slot in model.narrow:
            key = CorrelatorKey(tuple(heavy) + ((slot, 0),), (), INFINITY)
            wd = witten_degree(model, key)
            if wd.denominator != 1 or wd < 0:
                continue
            if trivially_zero(model, CorrelatorKey(tuple(heavy) + ((slot, int(wd)),), (), INFINITY)) is None:
                best = w
                break
    return best


def u_to_t(series: ZSeries, t_ring: Variables, truncation: Truncation) -> ZSeries:
    """Rename the u-variables of a u-only series to t-variables with the same labels."""
    rows = [(j, MultiIndex((), m.u), k, v) for j, m, k, v in series.terms()]
    return ZSeries.from_terms(t_ring, truncation, rows, series.window)


@dataclass(frozen=True)
class BigJ:
    table: InvariantTable
    point: ConePoint
    sigma: SigmaResult
    weight_bound: int


_CACHE = {}


def big_J(model: FermatModel, orders: Orders) -> BigJ:
    """J(t, z) through t-degree ``orders.t_degree`` and its invariant table."""
    key = (model, orders.t_degree)
    hit = _CACHE.get(key)
    if hit is not None:
        return hit
    count = orders.t_degree
    W = base_weight_bound(model, count)
    max_w = max(model.label_weight(k) for k in model.narrow)
    I = narrow_part(model, big_I(model, W + max_w, u_degree=count + 1))
    sig = sigma_extract(model, I)
    Q = negate_z(sig.point)
    inverse = series_reversion(sigma_map(sig.sigma))
    J_u = Q.compose(inverse)
    t_ring = model.variables(t=model.narrow)
    trunc = Truncation(t_degree=count, t_weight=W)
    J = u_to_t(J_u, t_ring, trunc)
    point = ConePoint(model, J, Truncation(t_degree=count),
                      note=f"weights above {W} vanish by the selection rules")
    table = InvariantTable(model, INFINITY, "infinity",
                           TableRange(count, tuple(model.narrow)),
                           orders={"T_t": count},
                           metadata={"pipeline": "big_J", "d_factor": "included in the read-off values",
                                     "weight_bound": W})
    read_off(model, J, table, "big_J")
    result = BigJ(table, point, sig, W)
    _CACHE[key] = result
    return result
