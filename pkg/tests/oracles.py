"""Reference values computed without the package.

Each oracle is frozen here and was written down before the pipelines ran.
"""

from __future__ import annotations

import math
from fractions import Fraction


def r_spin_three_point(r: int, a: tuple) -> Fraction:
    """Genus-zero r-spin 3-point numbers: 1 iff the indices sum to r - 2."""
    return Fraction(1) if sum(a) == r - 2 and all(0 <= x <= r - 2 for x in a) else Fraction(0)


def r_spin_four_point(r: int, a: tuple) -> Fraction:
    """Genus-zero r-spin 4-point numbers (1/r) min_i min(a_i, r - 1 - a_i) on sum a = 2r - 2."""
    if sum(a) != 2 * r - 2 or any(not 0 <= x <= r - 2 for x in a):
        return Fraction(0)
    return Fraction(min(min(x, r - 1 - x) for x in a), r)


# 3-spin genus-zero potential: t0^2 t1 / 2 + t1^4 / 72.  Its third and fourth
# derivatives give the primary correlators.
THREE_SPIN = {
    (0, 0, 1): Fraction(1),
    (1, 1, 1, 1): Fraction(1, 72) * math.factorial(4),
}

# quintic I-function coefficients, by hand from the product formula:
# (u^1)^5 at z^1 phi_0: (1/5)^5 / 5! ; (u^1)^6 at z^0 phi_1: (2/5)^5 / 6!
QUINTIC_U1_5 = Fraction(1, 375000)
QUINTIC_U1_6 = Fraction(2, 5) ** 5 / 720


def fermat_term(weights: tuple, d: int, exps: dict) -> tuple:
    """(z-power, sector, coefficient) of one I-function term, written from scratch.

    The factor of coordinate j is the rising factorial (<s_j> + q_j)_n with
    n = s_j - <s_j>; nothing from the package is used.
    """
    def rising(x: Fraction, n: int) -> Fraction:
        out = Fraction(1)
        for i in range(n):
            out *= x + i
        return out

    coeff = Fraction(1)
    for e in exps.values():
        coeff /= math.factorial(e)
    power = 1 - sum(exps.values())
    for w in weights:
        q = Fraction(w, d)
        s = sum((e * ((k * q) % 1) for k, e in exps.items()), Fraction(0))
        whole = math.floor(s)
        coeff *= rising(s - whole + q, whole)
        power += whole
    sector = sum(k * e for k, e in exps.items()) % d
    return power, sector, coeff
