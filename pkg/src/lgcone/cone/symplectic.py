"""The symplectic loop space: residue pairing, polarization and the dilaton shift."""

from __future__ import annotations

from ..exactseries import GradedSeries, SeriesError, ZSeries, laurent_residue, negate_z
from ..lgmodel import StateSpace, pairing_rule


class BroadComponentError(SeriesError):
    pass


def _require_narrow(space: StateSpace, *series: ZSeries) -> None:
    for s in series:
        broad = sorted(k for k in s.components() if k is None or not space.is_narrow(k))
        if broad:
            raise BroadComponentError(f"components {broad} are not narrow state-vector components")


def omega_pairing(space: StateSpace, f: ZSeries, g: ZSeries) -> GradedSeries:
    """Res_{z=0} (f(z), g(-z)) with the state-space pairing applied coefficient-wise."""
    _require_narrow(space, f, g)
    return laurent_residue(f.mul(negate_z(g), pairing_rule(space)))


def pairing_series(space: StateSpace, f: ZSeries, g: ZSeries) -> ZSeries:
    """(f(z), g(z)) as a scalar Laurent series."""
    _require_narrow(space, f, g)
    return f.mul(g, pairing_rule(space))


def leading_term(f: ZSeries) -> ZSeries:
    """z phi_0 in the ring and window of ``f``."""
    one = GradedSeries.constant(f.variables, 1, f.truncation, component=0)
    lo, hi = f.window
    return ZSeries(f.variables, f.truncation, {1: one}, (min(lo, 1), max(hi, 1)))


def dilaton_shift(t: ZSeries) -> ZSeries:
    """q(z) = t(z) - phi_0 z."""
    return t - leading_term(t)


def undo_dilaton_shift(q: ZSeries) -> ZSeries:
    """t(z) = q(z) + phi_0 z."""
    return q + leading_term(q)


def polarization(f: ZSeries) -> tuple:
    """(H^+ part, H^- part)."""
    return f.positive_part(), f.negative_part()
