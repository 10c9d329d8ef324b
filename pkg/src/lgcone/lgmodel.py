"""Combinatorial data of a Fermat potential and the selection rules of its correlators."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Union

from .exactseries import Variables


class ModelError(ValueError):
    """A model violates one of its defining invariants; ``invariant`` names it."""

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


def frac_part(x: Fraction) -> Fraction:
    return x - math.floor(x)


class EpsilonSymbol(enum.Enum):
    INFINITY = "infinity"
    ZERO = "zero"

    def __str__(self) -> str:
        return self.value


INFINITY = EpsilonSymbol.INFINITY
ZERO = EpsilonSymbol.ZERO
Epsilon = Union[Fraction, EpsilonSymbol]


def parse_epsilon(value: Union[str, int, Fraction, EpsilonSymbol]) -> Epsilon:
    """Parse ``"infinity"``, ``"zero"`` or a positive rational; rationals above 1 become infinity."""
    if isinstance(value, EpsilonSymbol):
        return value
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("infinity", "inf", "oo"):
            return INFINITY
        if text in ("zero", "0+"):
            return ZERO
        try:
            value = Fraction(text)
        except ValueError:
            raise ValueError(f"epsilon {value!r} is neither a rational nor infinity/zero") from None
    eps = Fraction(value)
    if eps <= 0:
        raise ValueError(f"epsilon must be positive, got {eps}")
    return INFINITY if eps > 1 else eps


def epsilon_text(eps: Epsilon) -> str:
    if isinstance(eps, EpsilonSymbol):
        return eps.value
    return f"{eps.numerator}/{eps.denominator}" if eps.denominator != 1 else str(eps.numerator)


@dataclass(frozen=True)
class StateSpace:
    """Basis phi_0..phi_{d-1}, its narrow part, degrees and the residue pairing."""

    d: int
    narrow: tuple
    degrees: tuple

    def is_narrow(self, k: int) -> bool:
        return k in self.narrow

    def dual(self, k: int) -> int:
        return self.d - 2 - k

    def degree(self, k: int) -> Fraction:
        return self.degrees[k % self.d]

    def pairing_matrix(self) -> list:
        return [[pairing(self, i, j) for j in self.narrow] for i in self.narrow]


@dataclass(frozen=True)
class FermatModel:
    weights: tuple
    degree: int
    charges: tuple = field(compare=False)
    total_charge: Fraction = field(compare=False)
    space: StateSpace = field(compare=False)

    @property
    def N(self) -> int:
        return len(self.weights)

    @property
    def d(self) -> int:
        return self.degree

    @property
    def narrow(self) -> tuple:
        return self.space.narrow

    def deg(self, k: int) -> Fraction:
        return self.space.degree(k)

    def label_weight(self, k: int) -> int:
        """Weight of the variable attached to sector k in every truncation: max(k, 1)."""
        return max(k, 1)

    def variables(self, u: Optional[Iterable[int]] = None, t: Optional[Iterable[int]] = None) -> Variables:
        """Ring with the given u- and t-labels (``None`` means no variables of that family)."""
        return Variables.make(u=tuple(u or ()), t=tuple(t or ()), weight=self.label_weight)

    def small_labels(self) -> tuple:
        return tuple(k for k in self.narrow if self.deg(k) <= 1)

    def to_json(self) -> dict:
        return {"weights": list(self.weights), "degree": self.degree}

    def describe(self) -> str:
        return f"weights={list(self.weights)}, d={self.degree}"


def build_model(weights: Iterable[int], d: int) -> FermatModel:
    """Validate Fermat data and compute charges, narrow set and degrees."""
    weights = tuple(int(w) for w in weights)
    d = int(d)
    if not weights:
        raise ModelError("weights nonempty", "at least one weight is required")
    if d < 2:
        raise ModelError("d >= 2", f"degree {d} is below 2")
    if any(w <= 0 for w in weights):
        raise ModelError("positive weights", f"weights {list(weights)} must be positive")
    g = math.gcd(d, *weights)
    if g != 1:
        raise ModelError("gcd(w, d) = 1", f"gcd = {g}")
    bad = [w for w in weights if d % w]
    if bad:
        raise ModelError("Fermat (w_j | d)", f"weights {bad} do not divide d = {d}")
    charges = tuple(Fraction(w, d) for w in weights)
    narrow = tuple(k for k in range(d) if all(frac_part(q * (k + 1)) for q in charges))
    if not narrow:
        raise ModelError("narrow sector nonempty", "a charge equal to 1 leaves no narrow sector")
    degrees = tuple(sum((frac_part(q * k) for q in charges), Fraction(0)) for k in range(d))
    space = StateSpace(d, narrow, degrees)
    return FermatModel(weights, d, charges, sum(charges, Fraction(0)), space)


def load_model_file(path: Union[str, Path]) -> FermatModel:
    data = json.loads(Path(path).read_text())
    try:
        return build_model(data["weights"], data["degree"])
    except KeyError as exc:
        raise ModelError("model file fields", f"missing field {exc}") from None


def pairing(space: StateSpace, i: int, j: int) -> Fraction:
    for k in (i, j):
        if k not in space.narrow:
            raise ModelError("narrow pairing", f"sector {k} is broad")
    return Fraction(1) if i + j == space.d - 2 else Fraction(0)


def group_product(d: int, i: int, j: int) -> int:
    return (i + j) % d


def pairing_rule(space: StateSpace):
    """Product rule pairing two state vectors into a scalar."""
    target = space.d - 2

    def rule(i, j):
        return (None, 1) if i + j == target else None

    return rule


def group_rule(d: int):
    def rule(i, j):
        return (i + j) % d, 1

    return rule


@dataclass(frozen=True)
class CorrelatorKey:
    """Insertions of a genus-zero correlator, stored in canonical order.

    ``heavy`` holds (sector, psi-power) pairs sorted by psi-power then
    sector; ``light`` holds sorted sectors.
    """

    heavy: tuple
    light: tuple = ()
    epsilon: Epsilon = INFINITY

    def __post_init__(self):
        heavy = tuple(sorted(((int(k), int(j)) for k, j in self.heavy), key=lambda p: (p[1], p[0])))
        object.__setattr__(self, "heavy", heavy)
        object.__setattr__(self, "light", tuple(sorted(int(l) for l in self.light)))
        object.__setattr__(self, "epsilon", parse_epsilon(self.epsilon))
        if any(j < 0 for _, j in heavy):
            raise ValueError("psi-powers must be nonnegative")

    @property
    def m(self) -> int:
        return len(self.heavy)

    @property
    def n(self) -> int:
        return len(self.light)

    @property
    def psi_total(self) -> int:
        return sum(j for _, j in self.heavy)

    def sectors(self) -> tuple:
        return tuple(k for k, _ in self.heavy) + self.light

    def with_epsilon(self, eps: Epsilon) -> CorrelatorKey:
        return CorrelatorKey(self.heavy, self.light, eps)

    def text(self) -> str:
        def ins(k, j):
            return f"phi{k}" + (f"psi^{j}" if j else "")
        body = ",".join(ins(k, j) for k, j in self.heavy)
        if self.light:
            body += "|" + ",".join(f"phi{l}" for l in self.light)
        return f"<{body}>"


def _check_key(model: FermatModel, key: CorrelatorKey) -> None:
    for k in key.sectors():
        if not 0 <= k < model.d:
            raise ValueError(f"sector {k} outside 0..{model.d - 1}")


def stable(key: CorrelatorKey) -> bool:
    """m + n*eps > 2, with infinity forcing n = 0 and zero meaning the small-eps limit."""
    m, n, eps = key.m, key.n, key.epsilon
    if eps is INFINITY:
        return n == 0 and m > 2
    if eps is ZERO:
        return m > 2 or (m == 2 and n >= 1)
    return m + n * eps > 2


def moduli_nonempty(model: FermatModel, key: CorrelatorKey) -> bool:
    _check_key(model, key)
    return (2 + sum(key.sectors())) % model.d == 0 and stable(key)


def witten_degree(model: FermatModel, key: CorrelatorKey) -> Fraction:
    _check_key(model, key)
    deg = model.deg
    return (model.N - 3 - 2 * model.total_charge + key.m - sum((deg(k) for k, _ in key.heavy), Fraction(0))
            + key.n - sum((deg(l) for l in key.light), Fraction(0)))


class Vanishing(enum.Enum):
    BROAD_INSERTION = "broad-insertion"
    EMPTY_MODULI = "empty-moduli"
    DEGREE_MISMATCH = "degree-mismatch"

    def __str__(self) -> str:
        return self.value


def trivially_zero(model: FermatModel, key: CorrelatorKey) -> Optional[Vanishing]:
    """The first selection rule forcing the correlator to vanish, or None."""
    _check_key(model, key)
    if any(not model.space.is_narrow(k) for k in key.sectors()):
        return Vanishing.BROAD_INSERTION
    if not moduli_nonempty(model, key):
        return Vanishing.EMPTY_MODULI
    wd = witten_degree(model, key)
    if wd.denominator != 1 or wd < 0 or wd != key.psi_total:
        return Vanishing.DEGREE_MISMATCH
    return None


def chamber_walls(count: int) -> list:
    """The first ``count`` chamber walls 1, 1/2, 1/3, ..."""
    return [Fraction(1, n) for n in range(1, count + 1)]
