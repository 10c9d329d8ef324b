"""Closed-form hypergeometric series: the big and small I-functions and the unstable sums.

A term of the big I-function is indexed by exponents ``a`` on the narrow
u-variables.  For every coordinate ``j`` put ``s_j = sum_i a_i <i q_j>``; the
factor contributed by ``j`` is the product of ``(b + q_j) z`` over ``b`` in
``{<s_j>, <s_j> + 1, ...} cap [0, s_j)``, a range of exactly ``s_j - <s_j>``
elements.  Together with ``1/prod a_i!`` and the leading ``z phi_0`` this
gives the coefficient, the z-power ``1 - |a| + sum_j (s_j - <s_j>)`` and the
output sector ``sum_i i a_i mod d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Union

from .exactseries import (SCALAR, GradedSeries, MultiIndex, SeriesError, Truncation,
                          Variables, ZSeries, series_invert, series_mul, series_reversion)
from .lgmodel import (INFINITY, ZERO, Epsilon, EpsilonSymbol, FermatModel, ModelError,
                      epsilon_text, frac_part, group_product, parse_epsilon)


@dataclass(frozen=True)
class EpsilonChamber:
    """A stability chamber, identified by its cap ceil(1/eps); ``cap=None`` is the eps -> 0 limit."""

    cap: Optional[int]
    requested: Epsilon = field(default=ZERO, compare=False)

    @classmethod
    def of(cls, eps: Union[str, Fraction, EpsilonSymbol]) -> EpsilonChamber:
        eps = parse_epsilon(eps)
        if eps is ZERO:
            return cls(None, eps)
        if eps is INFINITY:
            return cls(1, eps)
        return cls(math.ceil(1 / eps), eps)

    @property
    def representative(self) -> Epsilon:
        """The eps used in selection rules for invariants read off this chamber."""
        return ZERO if self.cap is None else Fraction(1, self.cap)

    @property
    def label(self) -> str:
        return epsilon_text(self.requested)

    def interval(self) -> tuple:
        """The eps-interval (1/(cap+1), 1/cap] of the chamber, as texts."""
        if self.cap is None:
            return ("0", "0")
        return (f"1/{self.cap + 1}", "1" if self.cap == 1 else f"1/{self.cap}")


@dataclass(frozen=True)
class ITerm:
    a: tuple  # ((sector, exponent), ...) with positive exponents
    output_sector: int
    z_power: int
    coefficient: Fraction
    broad: bool

    @property
    def count(self) -> int:
        return sum(e for _, e in self.a)


def _as_exponents(model: FermatModel, a) -> dict:
    if isinstance(a, MultiIndex):
        raise TypeError("pass exponents as a mapping sector -> exponent")
    exps = {int(k): int(e) for k, e in dict(a).items() if e}
    for k, e in exps.items():
        if e < 0:
            raise ValueError(f"negative exponent on sector {k}")
        if k not in model.narrow:
            raise ModelError("narrow support", f"sector {k} is broad")
    return exps


def big_I_term(model: FermatModel, a: Mapping) -> ITerm:
    """The single I-function term with exponent vector ``a`` (mapping sector -> exponent)."""
    exps = _as_exponents(model, a)
    coeff = Fraction(1, math.prod(math.factorial(e) for e in exps.values()))
    z_power = 1 - sum(exps.values())
    for q in model.charges:
        s = sum((e * frac_part(k * q) for k, e in exps.items()), Fraction(0))
        f = frac_part(s)
        count = s - f
        if count.denominator != 1 or count < 0:
            raise AssertionError(f"integer-count identity fails for a={exps}, q={q}")
        for b in range(int(count)):
            coeff *= f + b + q
        z_power += int(count)
    sector = 0
    for k, e in exps.items():
        sector = group_product(model.d, sector, k * e)
    return ITerm(tuple(sorted(exps.items())), sector, z_power, coeff,
                 not model.space.is_narrow(sector))


def z_power_bound(model: FermatModel, a: Mapping) -> Fraction:
    """Upper bound 1 + sum a_i (deg phi_i - 1) on the z-power of a term."""
    return 1 + sum((e * (model.deg(k) - 1) for k, e in dict(a).items()), Fraction(0))


def i_ring(model: FermatModel, labels=None) -> Variables:
    return model.variables(u=model.narrow if labels is None else labels)


def _hypergeometric(model: FermatModel, variables: Variables, truncation: Truncation) -> ZSeries:
    rows = []
    lo, hi = 1, 1
    labels = variables.u_labels
    for m in variables.monomials(truncation):
        a = {k: e for k, e in zip(labels, m.u) if e}
        term = big_I_term(model, a)
        rows.append((term.z_power, m, term.output_sector, term.coefficient))
        lo = min(lo, 1 - term.count)
        hi = max(hi, math.floor(z_power_bound(model, a)))
    return ZSeries.from_terms(variables, truncation, rows, (lo, hi))


def big_I(model: FermatModel, T_u: int, u_degree: Optional[int] = None) -> ZSeries:
    """Sum of all terms of weighted u-degree at most ``T_u`` (broad outputs included)."""
    if T_u < 0:
        raise ValueError("T_u must be nonnegative")
    ring = i_ring(model)
    return _hypergeometric(model, ring, Truncation(u_weight=T_u, u_degree=u_degree))


def small_I(model: FermatModel, T_u: int, include_u0: bool = True) -> ZSeries:
    """The I-function on the u^k with deg phi_k <= 1 (optionally also without u^0)."""
    labels = [k for k in model.small_labels() if include_u0 or k != 0]
    return _hypergeometric(model, i_ring(model, labels), Truncation(u_weight=T_u))


def broad_terms(model: FermatModel, series: ZSeries) -> list:
    """(z-power, monomial, sector, value) of every broad-sector term."""
    return [(j, m, k, v) for j, m, k, v in series.terms()
            if k is not None and not model.space.is_narrow(k)]


def narrow_part(model: FermatModel, series: ZSeries) -> ZSeries:
    return series.project(model.narrow)


def I0_I1(I: ZSeries) -> tuple:
    """Split ``I0 z phi_0 + I1 + O(1/z)`` into the scalar I0 and vector I1."""
    high = [j for j in I.coeffs if j >= 2]
    if high:
        raise SeriesError(f"z-powers {sorted(high)} >= 2 present")
    top = I.coeff(1)
    others = top.components() - {0}
    if others:
        raise SeriesError(f"z^1 part has components {sorted(others)} besides phi_0")
    return top.component(0), I.coeff(0)


@dataclass(frozen=True)
class MirrorMap:
    eta: GradedSeries       # vector-valued, components on the small sectors
    inverse: dict           # ("u", k) -> scalar series: eta^{-1}
    I0: GradedSeries
    I1: GradedSeries
    I: ZSeries

    def substitution(self) -> dict:
        return {("u", k): self.eta.component(k) for k in self.eta.variables.u_labels}


def mirror_map(model: FermatModel, T_u: int) -> MirrorMap:
    """eta = I1 / I0 on the degree <= 1 block, with its compositional inverse."""
    I = narrow_part(model, small_I(model, T_u))
    I0, I1 = I0_I1(I)
    eta = series_mul(I1, series_invert(I0))
    ring = I.variables
    stray = eta.components() - set(ring.u_labels)
    if stray:
        raise SeriesError(f"mirror map has components {sorted(stray)} outside the small block")
    images = {("u", k): eta.component(k) for k in ring.u_labels}
    return MirrorMap(eta, series_reversion(images), I0, I1, I)


def unstable_sum(model: FermatModel, chamber: EpsilonChamber, T_u: int) -> ZSeries:
    """Terms of the big I-function with at most ``cap`` factors."""
    return big_I(model, T_u, u_degree=chamber.cap)


@dataclass(frozen=True)
class RegularPart:
    chamber: EpsilonChamber
    J0: GradedSeries        # scalar: z^1 phi_0 coefficient of the unstable sum
    J1: ZSeries             # z >= 0 part of f without its z^1 phi_0 part
    f: ZSeries              # narrow unstable sum minus z phi_0
    unstable: ZSeries       # narrow unstable sum
    broad: list             # broad terms projected out
    flags: list             # z^1 components outside phi_0


def regular_part_data(model: FermatModel, chamber: EpsilonChamber, T_u: int) -> RegularPart:
    raw = unstable_sum(model, chamber, T_u)
    U = narrow_part(model, raw)
    ring, trunc = U.variables, U.truncation
    leading = ZSeries(ring, trunc, {1: GradedSeries.constant(ring, 1, trunc, component=0)}, U.window)
    f = U - leading
    J0 = U.coeff(1).component(0)
    flags = [(1, m, k, v) for m, k, v in U.coeff(1).items() if k != 0]
    z1_phi0 = ZSeries(ring, trunc, {1: f.coeff(1).project([0])}, U.window)
    J1 = (f.positive_part() - z1_phi0).positive_part()
    return RegularPart(chamber, J0, J1, f, U, broad_terms(model, raw), flags)


@dataclass(frozen=True)
class TauChange:
    """The affine substitution t -> J0 t - J1, split by z-power."""

    J0: GradedSeries
    minus_J1: ZSeries
    primary: GradedSeries   # z^0 part of -J1
    descendant: ZSeries     # z >= 1 part of -J1

    def substitution(self, ring: Variables, truncation: Truncation) -> dict:
        """t^k -> J0 t^k + primary_k(u) as scalar series in a (t, u) ring."""
        J0 = self.J0.embed(ring, truncation)
        prim = self.primary.embed(ring, truncation)
        return {("t", k): series_mul(J0, GradedSeries.variable(ring, "t", k, truncation))
                + prim.component(k) for k in ring.t_labels}

    def descendant_support(self) -> list:
        """u-monomials carried by positive z-powers of tau."""
        return sorted({m for g in self.descendant.coeffs.values() for m in g.terms})


def tau_change(model: FermatModel, chamber: EpsilonChamber, T_u: int) -> TauChange:
    reg = regular_part_data(model, chamber, T_u)
    minus = -reg.J1
    descendant = ZSeries(minus.variables, minus.truncation,
                         {j: g for j, g in minus.coeffs.items() if j >= 1}, minus.window)
    return TauChange(reg.J0, minus, minus.coeff(0), descendant)
