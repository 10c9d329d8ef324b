"""Exact truncated multivariate series over Q and Laurent series in z built on them.

A :class:`GradedSeries` is a sparse map from monomials in two families of
variables (``u`` and ``t``) to coefficients.  A coefficient is either a scalar
or a state vector; both are stored as ``{component: Fraction}`` where the
scalar component is ``None``.  Every series carries a :class:`Truncation`, and
products are truncated to the meet of the operands' truncations.

A :class:`ZSeries` maps integer powers of ``z`` to graded series and carries an
explicit window of admissible powers.
"""

from __future__ import annotations

import functools
import operator
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple, Optional, Union

Component = Optional[int]
SCALAR: Component = None
Coefficient = dict
ProductRule = Callable[[int, int], Optional[tuple]]
Rational = Union[int, Fraction]


class SeriesError(ValueError):
    """Base class for series arithmetic errors."""


class NotInvertibleError(SeriesError):
    pass


class CompositionError(SeriesError):
    pass


class ReversionError(SeriesError):
    pass


class ProductRuleError(SeriesError):
    pass


class WindowError(SeriesError):
    pass


class MultiIndex(NamedTuple):
    """Exponent vectors of a monomial, ordered like the labels of its :class:`Variables`."""

    u: tuple
    t: tuple

    def times(self, other: MultiIndex) -> MultiIndex:
        return MultiIndex(tuple(map(operator.add, self.u, other.u)),
                          tuple(map(operator.add, self.t, other.t)))

    def divides(self, other: MultiIndex) -> bool:
        return all(a <= b for a, b in zip(self.u, other.u)) and all(
            a <= b for a, b in zip(self.t, other.t))

    def over(self, other: MultiIndex) -> MultiIndex:
        return MultiIndex(tuple(map(operator.sub, self.u, other.u)),
                          tuple(map(operator.sub, self.t, other.t)))

    @property
    def u_count(self) -> int:
        return sum(self.u)

    @property
    def t_count(self) -> int:
        return sum(self.t)

    @property
    def count(self) -> int:
        return sum(self.u) + sum(self.t)

    def is_one(self) -> bool:
        return not any(self.u) and not any(self.t)


@dataclass(frozen=True)
class Variables:
    """The ring's variables: sector labels and positive integer weights per family."""

    u_labels: tuple = ()
    u_weights: tuple = ()
    t_labels: tuple = ()
    t_weights: tuple = ()

    def __post_init__(self):
        for labels, weights, name in ((self.u_labels, self.u_weights, "u"),
                                      (self.t_labels, self.t_weights, "t")):
            if len(labels) != len(weights):
                raise SeriesError(f"{name}: {len(labels)} labels but {len(weights)} weights")
            if len(set(labels)) != len(labels):
                raise SeriesError(f"{name}: repeated label")
            if any(w < 1 for w in weights):
                raise SeriesError(f"{name}: weights must be positive")

    @classmethod
    def make(cls, u: Iterable[int] = (), t: Iterable[int] = (),
             weight: Callable[[int], int] = lambda k: 1) -> Variables:
        u, t = tuple(u), tuple(t)
        return cls(u, tuple(weight(k) for k in u), t, tuple(weight(k) for k in t))

    @property
    def one(self) -> MultiIndex:
        return MultiIndex((0,) * len(self.u_labels), (0,) * len(self.t_labels))

    def labels(self, kind: str) -> tuple:
        return self.u_labels if kind == "u" else self.t_labels

    def index(self, kind: str, label: int) -> int:
        try:
            return self.labels(kind).index(label)
        except ValueError:
            raise SeriesError(f"no variable {kind}^{label} in this ring") from None

    def var(self, kind: str, label: int, power: int = 1) -> MultiIndex:
        i = self.index(kind, label)
        one = self.one
        if kind == "u":
            u = list(one.u)
            u[i] = power
            return MultiIndex(tuple(u), one.t)
        t = list(one.t)
        t[i] = power
        return MultiIndex(one.u, tuple(t))

    @functools.lru_cache(maxsize=None)
    def grade(self, m: MultiIndex) -> tuple:
        """(u-weight, u-count, t-weight, t-count) of a monomial."""
        return (sum(map(operator.mul, m.u, self.u_weights)), sum(m.u),
                sum(map(operator.mul, m.t, self.t_weights)), sum(m.t))

    def weight(self, m: MultiIndex) -> int:
        g = self.grade(m)
        return g[0] + g[2]

    def monomials(self, truncation: Truncation) -> list:
        """All monomials admitted by a truncation (which must bound every variable)."""
        kinds = [("u", w) for w in self.u_weights] + [("t", w) for w in self.t_weights]
        nu = len(self.u_weights)
        out = []

        def rec(i, exps, g):
            if i == len(kinds):
                out.append(MultiIndex(tuple(exps[:nu]), tuple(exps[nu:])))
                return
            kind, w = kinds[i]
            e = 0
            while True:
                gg = (g[0] + e * w, g[1] + e, g[2], g[3]) if kind == "u" else \
                    (g[0], g[1], g[2] + e * w, g[3] + e)
                if not truncation.admits(gg):
                    break
                exps.append(e)
                rec(i + 1, exps, gg)
                exps.pop()
                e += 1
                if e > 10_000:
                    raise SeriesError("truncation does not bound every variable")

        if truncation.admits((0, 0, 0, 0)):
            rec(0, [], (0, 0, 0, 0))
        return out

    def sub(self, u: Iterable[int] = None, t: Iterable[int] = None) -> Variables:
        """The subring on the given labels (defaults keep a family unchanged)."""
        ul = self.u_labels if u is None else tuple(u)
        tl = self.t_labels if t is None else tuple(t)
        return Variables(ul, tuple(self.u_weights[self.index("u", k)] for k in ul),
                         tl, tuple(self.t_weights[self.index("t", k)] for k in tl))


def _min_opt(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


@dataclass(frozen=True)
class Truncation:
    """Upper bounds on the grades of stored monomials; ``None`` means unbounded."""

    u_weight: Optional[int] = None
    t_degree: Optional[int] = None
    u_degree: Optional[int] = None
    t_weight: Optional[int] = None
    total_degree: Optional[int] = None

    def meet(self, other: Truncation) -> Truncation:
        return Truncation(*(_min_opt(a, b) for a, b in zip(self._fields(), other._fields())))

    def _fields(self) -> tuple:
        return (self.u_weight, self.t_degree, self.u_degree, self.t_weight, self.total_degree)

    def admits(self, grade: tuple) -> bool:
        uw, ud, tw, td = grade
        return ((self.u_weight is None or uw <= self.u_weight)
                and (self.u_degree is None or ud <= self.u_degree)
                and (self.t_weight is None or tw <= self.t_weight)
                and (self.t_degree is None or td <= self.t_degree)
                and (self.total_degree is None or ud + td <= self.total_degree))

    def contains(self, other: Truncation) -> bool:
        """True when everything admitted by ``other`` is admitted by ``self``."""
        return all(a is None or (b is not None and b <= a)
                   for a, b in zip(self._fields(), other._fields()))

    def to_json(self) -> dict:
        return {k: v for k, v in zip(
            ("u_weight", "t_degree", "u_degree", "t_weight", "total_degree"), self._fields())
            if v is not None}


NO_TRUNCATION = Truncation()


def _clean(coeff: Mapping) -> dict:
    return {k: Fraction(v) for k, v in coeff.items() if v}


def _add_into(acc: dict, m: MultiIndex, coeff: Mapping, scale: Rational = 1) -> None:
    cur = acc.get(m)
    if cur is None:
        cur = acc[m] = {}
    for k, v in coeff.items():
        nv = cur.get(k, 0) + scale * v
        if nv:
            cur[k] = nv
        else:
            cur.pop(k, None)
    if not cur:
        del acc[m]


def _combine(ka: Component, kb: Component, rule: Optional[ProductRule]):
    if ka is None:
        return kb, 1
    if kb is None:
        return ka, 1
    if rule is None:
        raise ProductRuleError("product of two state vectors needs a product rule")
    return rule(ka, kb)


class GradedSeries:
    """Sparse truncated series in the ``u`` and ``t`` variables of a :class:`Variables`."""

    __slots__ = ("variables", "truncation", "terms")

    def __init__(self, variables: Variables, truncation: Truncation = NO_TRUNCATION,
                 terms: Optional[Mapping] = None):
        self.variables = variables
        self.truncation = truncation
        clean = {}
        nu, nt = len(variables.u_labels), len(variables.t_labels)
        for m, coeff in (terms or {}).items():
            if not isinstance(m, MultiIndex):
                m = MultiIndex(tuple(m[0]), tuple(m[1]))
            if len(m.u) != nu or len(m.t) != nt or min(m.u + m.t, default=0) < 0:
                raise SeriesError(f"monomial {m} does not fit the ring")
            if not truncation.admits(variables.grade(m)):
                continue
            if not isinstance(coeff, Mapping):
                coeff = {SCALAR: coeff}
            c = _clean(coeff)
            if c:
                clean[m] = c
        kinds = {k is None for c in clean.values() for k in c}
        if len(kinds) > 1:
            raise SeriesError("a series is either scalar or state-vector valued, not both")
        self.terms = clean

    # construction helpers
    @classmethod
    def _raw(cls, variables, truncation, terms) -> GradedSeries:
        s = cls.__new__(cls)
        s.variables, s.truncation, s.terms = variables, truncation, terms
        return s

    @classmethod
    def zero(cls, variables: Variables, truncation: Truncation = NO_TRUNCATION) -> GradedSeries:
        return cls._raw(variables, truncation, {})

    @classmethod
    def constant(cls, variables: Variables, value: Rational,
                 truncation: Truncation = NO_TRUNCATION,
                 component: Component = SCALAR) -> GradedSeries:
        return cls(variables, truncation, {variables.one: {component: value}})

    @classmethod
    def variable(cls, variables: Variables, kind: str, label: int,
                 truncation: Truncation = NO_TRUNCATION,
                 component: Component = SCALAR) -> GradedSeries:
        return cls(variables, truncation, {variables.var(kind, label): {component: 1}})

    # inspection
    @property
    def is_scalar(self) -> bool:
        return all(k is None for c in self.terms.values() for k in c)

    def components(self) -> set:
        return {k for c in self.terms.values() for k in c}

    def coefficient(self, m: MultiIndex, component: Component = SCALAR) -> Fraction:
        return self.terms.get(m, {}).get(component, Fraction(0))

    def constant_term(self) -> dict:
        return dict(self.terms.get(self.variables.one, {}))

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def items(self) -> Iterator:
        """Yield (monomial, component, value) triples."""
        for m, c in self.terms.items():
            for k, v in c.items():
                yield m, k, v

    def __eq__(self, other) -> bool:
        if not isinstance(other, GradedSeries):
            return NotImplemented
        return self.variables == other.variables and self.terms == other.terms

    def __hash__(self):
        raise TypeError("GradedSeries is not hashable")

    def __repr__(self) -> str:
        return f"GradedSeries({len(self.terms)} terms, {self.truncation})"

    # linear structure
    def _check_ring(self, other: GradedSeries) -> None:
        if self.variables != other.variables:
            raise SeriesError("series live in different rings")

    def __add__(self, other: GradedSeries) -> GradedSeries:
        return self._lincomb(other, 1)

    def __sub__(self, other: GradedSeries) -> GradedSeries:
        return self._lincomb(other, -1)

    def _lincomb(self, other: GradedSeries, sign: int) -> GradedSeries:
        self._check_ring(other)
        trunc = self.truncation.meet(other.truncation)
        out = {}
        grade, admits = self.variables.grade, trunc.admits
        for src, s in ((self.terms, 1), (other.terms, sign)):
            for m, c in src.items():
                if admits(grade(m)):
                    _add_into(out, m, c, s)
        return GradedSeries(self.variables, trunc, out)

    def __neg__(self) -> GradedSeries:
        return self.scale(-1)

    def scale(self, c: Rational) -> GradedSeries:
        if not c:
            return GradedSeries.zero(self.variables, self.truncation)
        return GradedSeries._raw(self.variables, self.truncation,
                                 {m: {k: c * v for k, v in cf.items()} for m, cf in self.terms.items()})

    def __mul__(self, other) -> GradedSeries:
        if isinstance(other, GradedSeries):
            return series_mul(self, other)
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return NotImplemented

    def __rmul__(self, other) -> GradedSeries:
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return NotImplemented

    # structural operations
    def truncate(self, truncation: Truncation) -> GradedSeries:
        trunc = self.truncation.meet(truncation)
        grade = self.variables.grade
        return GradedSeries._raw(self.variables, trunc,
                                 {m: dict(c) for m, c in self.terms.items() if trunc.admits(grade(m))})

    def with_truncation(self, truncation: Truncation) -> GradedSeries:
        """Re-declare the truncation (terms outside it are dropped)."""
        return GradedSeries(self.variables, truncation, self.terms)

    def select(self, pred: Callable[[MultiIndex], bool]) -> GradedSeries:
        return GradedSeries._raw(self.variables, self.truncation,
                                 {m: dict(c) for m, c in self.terms.items() if pred(m)})

    def homogeneous(self, weight: int) -> GradedSeries:
        w = self.variables.weight
        return self.select(lambda m: w(m) == weight)

    def project(self, components: Iterable[int]) -> GradedSeries:
        keep = set(components)
        out = {}
        for m, c in self.terms.items():
            cc = {k: v for k, v in c.items() if k in keep}
            if cc:
                out[m] = cc
        return GradedSeries._raw(self.variables, self.truncation, out)

    def component(self, k: Component) -> GradedSeries:
        """The scalar series of one component."""
        out = {m: {SCALAR: c[k]} for m, c in self.terms.items() if k in c}
        return GradedSeries._raw(self.variables, self.truncation, out)

    def as_component(self, k: int) -> GradedSeries:
        """A scalar series placed in component ``k``."""
        if not self.is_scalar:
            raise SeriesError("as_component needs a scalar series")
        return GradedSeries._raw(self.variables, self.truncation,
                                 {m: {k: c[SCALAR]} for m, c in self.terms.items()})

    def derivative(self, kind: str, label: int) -> GradedSeries:
        """Formal partial derivative; the truncation is lowered by one step in that variable."""
        i = self.variables.index(kind, label)
        out = {}
        for m, c in self.terms.items():
            e = (m.u if kind == "u" else m.t)[i]
            if e:
                if kind == "u":
                    u = list(m.u)
                    u[i] -= 1
                    mm = MultiIndex(tuple(u), m.t)
                else:
                    t = list(m.t)
                    t[i] -= 1
                    mm = MultiIndex(m.u, tuple(t))
                out[mm] = {k: e * v for k, v in c.items()}
        return GradedSeries._raw(self.variables, self._lowered(kind, label), out)

    def _lowered(self, kind: str, label: int) -> Truncation:
        tr = self.truncation
        w = (self.variables.u_weights if kind == "u" else self.variables.t_weights)[
            self.variables.index(kind, label)]
        dec = lambda x, by: None if x is None else x - by
        if kind == "u":
            return Truncation(dec(tr.u_weight, w), tr.t_degree, dec(tr.u_degree, 1),
                              tr.t_weight, dec(tr.total_degree, 1))
        return Truncation(tr.u_weight, dec(tr.t_degree, 1), tr.u_degree,
                          dec(tr.t_weight, w), dec(tr.total_degree, 1))

    def map_components(self, fn: Callable[[Component, Fraction], Optional[tuple]]) -> GradedSeries:
        """Apply ``fn(component, value) -> (component, value) | None`` termwise."""
        out = {}
        for m, c in self.terms.items():
            for k, v in c.items():
                r = fn(k, v)
                if r is not None:
                    _add_into(out, m, {r[0]: r[1]})
        return GradedSeries(self.variables, self.truncation, out)

    def embed(self, variables: Variables, truncation: Optional[Truncation] = None) -> GradedSeries:
        """Re-express in a ring containing every variable of this one (by label)."""
        upos = [variables.index("u", k) for k in self.variables.u_labels]
        tpos = [variables.index("t", k) for k in self.variables.t_labels]
        nu, nt = len(variables.u_labels), len(variables.t_labels)
        out = {}
        for m, c in self.terms.items():
            u, t = [0] * nu, [0] * nt
            for p, e in zip(upos, m.u):
                u[p] = e
            for p, e in zip(tpos, m.t):
                t[p] = e
            out[MultiIndex(tuple(u), tuple(t))] = dict(c)
        return GradedSeries(variables, truncation or self.truncation, out)

    def restrict(self, variables: Variables) -> GradedSeries:
        """Set every variable absent from ``variables`` to zero and drop it."""
        upos = [self.variables.index("u", k) for k in variables.u_labels]
        tpos = [self.variables.index("t", k) for k in variables.t_labels]
        ukeep, tkeep = set(upos), set(tpos)
        out = {}
        for m, c in self.terms.items():
            if any(e for i, e in enumerate(m.u) if i not in ukeep) or any(
                    e for i, e in enumerate(m.t) if i not in tkeep):
                continue
            out[MultiIndex(tuple(m.u[p] for p in upos), tuple(m.t[p] for p in tpos))] = dict(c)
        return GradedSeries(variables, self.truncation, out)

    def specialize(self, u_zero: Iterable[int] = (), t_zero: Iterable[int] = ()) -> GradedSeries:
        """Set the listed variables to zero, keeping the ring."""
        ui = [self.variables.index("u", k) for k in u_zero]
        ti = [self.variables.index("t", k) for k in t_zero]
        return self.select(lambda m: not any(m.u[i] for i in ui) and not any(m.t[i] for i in ti))


def _mul_terms(a: Mapping, b: Mapping, variables: Variables, trunc: Truncation,
               rule: Optional[ProductRule], out: Optional[dict] = None, scale: Rational = 1) -> dict:
    out = {} if out is None else out
    grade, admits = variables.grade, trunc.admits
    b_items = [(m, grade(m), c) for m, c in b.items()]
    for ma, ca in a.items():
        ga = grade(ma)
        for mb, gb, cb in b_items:
            if not admits((ga[0] + gb[0], ga[1] + gb[1], ga[2] + gb[2], ga[3] + gb[3])):
                continue
            prod = {}
            for ka, va in ca.items():
                for kb, vb in cb.items():
                    r = _combine(ka, kb, rule)
                    if r is None:
                        continue
                    k, f = r
                    prod[k] = prod.get(k, 0) + f * va * vb
            if prod:
                _add_into(out, ma.times(mb), prod, scale)
    return out


def series_mul(a: GradedSeries, b: GradedSeries, rule: Optional[ProductRule] = None) -> GradedSeries:
    """Truncated product; ``rule(i, j) -> (component, factor) | None`` multiplies two state vectors."""
    a._check_ring(b)
    trunc = a.truncation.meet(b.truncation)
    out = _mul_terms(a.terms, b.terms, a.variables, trunc, rule)
    return GradedSeries(a.variables, trunc, out)


def _fixed_point(step: Callable, start, limit: int):
    cur = start
    for _ in range(limit):
        nxt = step(cur)
        if nxt == cur:
            return cur
        cur = nxt
    raise SeriesError("fixed-point iteration did not stabilise; truncation must bound every variable")


def max_count(variables: Variables, trunc: Truncation) -> int:
    """An upper bound on the total count of any monomial admitted by ``trunc``."""
    def family(weights, weight_bound, degree_bound):
        if not weights:
            return 0
        bounds = [b for b in (degree_bound,
                              None if weight_bound is None else weight_bound // min(weights))
                  if b is not None]
        return min(bounds) if bounds else None

    u = family(variables.u_weights, trunc.u_weight, trunc.u_degree)
    t = family(variables.t_weights, trunc.t_weight, trunc.t_degree)
    bounds = [b for b in (trunc.total_degree, None if u is None or t is None else u + t)
              if b is not None]
    if not bounds:
        raise SeriesError("truncation does not bound the total degree")
    return min(bounds)


def _iteration_limit(variables: Variables, trunc: Truncation) -> int:
    return max_count(variables, trunc) + 2


def series_invert(a: GradedSeries) -> GradedSeries:
    """Reciprocal of a scalar series with nonzero constant term."""
    if not a.is_scalar:
        raise NotInvertibleError("only scalar series can be inverted")
    c0 = a.coefficient(a.variables.one)
    if not c0:
        raise NotInvertibleError("constant term is zero")
    one = GradedSeries.constant(a.variables, 1, a.truncation)
    rest = a - GradedSeries.constant(a.variables, c0, a.truncation)
    inv0 = 1 / Fraction(c0)
    # b = (1 - rest*b)/c0, each pass fixes one more order
    step = lambda b: (one - series_mul(rest, b)).scale(inv0)
    return _fixed_point(step, one.scale(inv0), _iteration_limit(a.variables, a.truncation))


Substitution = Mapping  # (kind, label) -> GradedSeries


class _Composer:
    """Evaluates monomials of a source ring under a substitution, memoising shared prefixes."""

    def __init__(self, source: Variables, substitution: Substitution, target: Variables,
                 trunc: Truncation):
        self.source, self.target, self.trunc = source, target, trunc
        self.slots = []
        for kind, labels in (("u", source.u_labels), ("t", source.t_labels)):
            for lab in labels:
                g = substitution.get((kind, lab))
                if g is None:
                    g = GradedSeries.variable(target, kind, lab)
                if g.variables != target:
                    raise CompositionError("substituted series must share the target ring")
                if not g.is_scalar:
                    raise CompositionError(f"substitution for {kind}^{lab} is not scalar")
                if g.coefficient(target.one):
                    raise CompositionError(f"substitution for {kind}^{lab} has a nonzero constant term")
                self.slots.append(g.terms)
        self.nu = len(source.u_labels)
        self.memo = {(0,) * len(self.slots): {target.one: {SCALAR: Fraction(1)}}}

    def value(self, m: MultiIndex) -> dict:
        key = m.u + m.t
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        i = max(j for j, e in enumerate(key) if e)
        prev = list(key)
        prev[i] -= 1
        prev = tuple(prev)
        base = self.value(MultiIndex(prev[:self.nu], prev[self.nu:]))
        val = _mul_terms(base, self.slots[i], self.target, self.trunc, None)
        self.memo[key] = val
        return val

    def apply(self, f: GradedSeries) -> dict:
        out = {}
        for m, c in f.terms.items():
            for mm, v in self.value(m).items():
                s = v[SCALAR]
                _add_into(out, mm, c, s)
        return out


def series_compose(f: GradedSeries, substitution: Substitution,
                   target: Optional[Variables] = None,
                   truncation: Optional[Truncation] = None) -> GradedSeries:
    """Substitute series for variables of ``f``.

    ``substitution`` maps ``(kind, label)`` to a scalar series in the target
    ring; variables not listed are kept (they must exist in the target ring).
    """
    target = target or f.variables
    trunc = truncation or f.truncation
    comp = _Composer(f.variables, substitution, target, trunc)
    return GradedSeries(target, trunc, comp.apply(f))


def series_reversion(f: Mapping) -> dict:
    """Invert a near-identity map given as ``{(kind, label): image series}``.

    The images live in one ring whose variables are exactly the keys.  Returns
    the inverse substitution in the same format, computed by fixed-point
    iteration g = v - h(g) where h = f - identity; each pass fixes one more
    order of the weighted grading.
    """
    if not f:
        return {}
    any_series = next(iter(f.values()))
    variables, trunc = any_series.variables, any_series.truncation
    keys = [("u", k) for k in variables.u_labels] + [("t", k) for k in variables.t_labels]
    if set(f) != set(keys):
        raise ReversionError("the map must give one image per ring variable")
    ident = {key: GradedSeries.variable(variables, key[0], key[1], trunc) for key in keys}
    nonlinear = {}
    for key in keys:
        img = f[key]
        if img.variables != variables or not img.is_scalar:
            raise ReversionError("images must be scalar series in one ring")
        trunc = trunc.meet(img.truncation)
        h = img - ident[key]
        for m, _, v in h.items():
            if m.count == 0:
                raise ReversionError(f"image of {key[0]}^{key[1]} has a constant term")
            if m.count == 1:
                raise ReversionError(f"linear part of {key[0]}^{key[1]} is not the identity")
            w_out = variables.weight(variables.var(*key))
            if variables.weight(m) < w_out:
                raise ReversionError(f"image of {key[0]}^{key[1]} has terms below its weight")
        nonlinear[key] = h

    def step(g):
        comp = _Composer(variables, g, variables, trunc)
        return {key: GradedSeries(variables, trunc, _sub_raw(ident[key].terms, comp.apply(nonlinear[key])))
                for key in keys}

    limit = _iteration_limit(variables, trunc)
    cur = dict(ident)
    for _ in range(limit):
        nxt = step(cur)
        if all(nxt[k] == cur[k] for k in keys):
            return nxt
        cur = nxt
    raise ReversionError("reversion did not stabilise; truncation must bound every variable")


def _sub_raw(a: Mapping, b: Mapping) -> dict:
    out = {m: dict(c) for m, c in a.items()}
    for m, c in b.items():
        _add_into(out, m, c, -1)
    return out


class ZSeries:
    """Laurent polynomial in z with graded-series coefficients and an explicit window."""

    __slots__ = ("variables", "truncation", "coeffs", "window")

    def __init__(self, variables: Variables, truncation: Truncation = NO_TRUNCATION,
                 coeffs: Optional[Mapping] = None, window: Optional[tuple] = None):
        self.variables = variables
        self.truncation = truncation
        clean = {}
        for j, g in (coeffs or {}).items():
            if g.variables != variables:
                raise SeriesError("z-coefficient in a different ring")
            g = g.truncate(truncation) if not truncation.contains(g.truncation) else g
            if g:
                clean[int(j)] = GradedSeries._raw(variables, truncation, g.terms)
        if window is None:
            window = (min(clean), max(clean)) if clean else (0, 0)
        lo, hi = window
        if lo > hi:
            raise WindowError(f"empty window {window}")
        outside = [j for j in clean if not lo <= j <= hi]
        if outside:
            raise WindowError(f"z-powers {sorted(outside)} lie outside the window {window}")
        kinds = {g.is_scalar for g in clean.values()}
        if len(kinds) > 1:
            raise SeriesError("mixed scalar and state-vector coefficients")
        self.coeffs = clean
        self.window = (lo, hi)

    @classmethod
    def from_terms(cls, variables: Variables, truncation: Truncation,
                   terms: Iterable, window: Optional[tuple] = None) -> ZSeries:
        """Build from (z-power, monomial, component, value) tuples."""
        raw = {}
        for j, m, k, v in terms:
            _add_into(raw.setdefault(j, {}), m, {k: v})
        coeffs = {j: GradedSeries(variables, truncation, t) for j, t in raw.items()}
        return cls(variables, truncation, coeffs, window)

    @classmethod
    def zero(cls, variables: Variables, truncation: Truncation = NO_TRUNCATION,
             window: tuple = (0, 0)) -> ZSeries:
        return cls(variables, truncation, {}, window)

    def coeff(self, j: int) -> GradedSeries:
        g = self.coeffs.get(j)
        return g if g is not None else GradedSeries.zero(self.variables, self.truncation)

    def terms(self) -> Iterator:
        """Yield (z-power, monomial, component, value)."""
        for j in sorted(self.coeffs):
            for m, k, v in self.coeffs[j].items():
                yield j, m, k, v

    def term_count(self) -> int:
        return sum(sum(len(c) for c in g.terms.values()) for g in self.coeffs.values())

    @property
    def is_scalar(self) -> bool:
        return all(g.is_scalar for g in self.coeffs.values())

    def components(self) -> set:
        return set().union(*(g.components() for g in self.coeffs.values()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ZSeries):
            return NotImplemented
        return self.variables == other.variables and self.coeffs == other.coeffs

    def __hash__(self):
        raise TypeError("ZSeries is not hashable")

    def __repr__(self) -> str:
        return f"ZSeries({self.term_count()} terms, window={self.window})"

    def _like(self, coeffs: Mapping, window: Optional[tuple] = None,
              truncation: Optional[Truncation] = None) -> ZSeries:
        return ZSeries(self.variables, truncation or self.truncation, coeffs, window or self.window)

    def __add__(self, other: ZSeries) -> ZSeries:
        return self._lincomb(other, 1)

    def __sub__(self, other: ZSeries) -> ZSeries:
        return self._lincomb(other, -1)

    def _lincomb(self, other: ZSeries, sign: int) -> ZSeries:
        if self.variables != other.variables:
            raise SeriesError("series live in different rings")
        trunc = self.truncation.meet(other.truncation)
        coeffs = {}
        for j in set(self.coeffs) | set(other.coeffs):
            a, b = self.coeff(j), other.coeff(j)
            coeffs[j] = a._lincomb(b, sign)
        window = (min(self.window[0], other.window[0]), max(self.window[1], other.window[1]))
        return ZSeries(self.variables, trunc, coeffs, window)

    def __neg__(self) -> ZSeries:
        return self.scale(-1)

    def scale(self, c: Rational) -> ZSeries:
        return self._like({j: g.scale(c) for j, g in self.coeffs.items()})

    def mul(self, other: ZSeries, rule: Optional[ProductRule] = None) -> ZSeries:
        if self.variables != other.variables:
            raise SeriesError("series live in different rings")
        trunc = self.truncation.meet(other.truncation)
        raw = {}
        for i, a in self.coeffs.items():
            for j, b in other.coeffs.items():
                _mul_terms(a.terms, b.terms, self.variables, trunc, rule, raw.setdefault(i + j, {}))
        window = (self.window[0] + other.window[0], self.window[1] + other.window[1])
        return ZSeries(self.variables, trunc,
                       {j: GradedSeries(self.variables, trunc, t) for j, t in raw.items()}, window)

    def times_series(self, g: GradedSeries, rule: Optional[ProductRule] = None) -> ZSeries:
        """Multiply by a z-independent series."""
        trunc = self.truncation.meet(g.truncation)
        return self._like({j: series_mul(c, g, rule) for j, c in self.coeffs.items()},
                          truncation=trunc)

    def shift(self, k: int) -> ZSeries:
        """Multiply by z^k."""
        return self._like({j + k: g for j, g in self.coeffs.items()},
                          (self.window[0] + k, self.window[1] + k))

    def positive_part(self) -> ZSeries:
        return self._like({j: g for j, g in self.coeffs.items() if j >= 0},
                          (max(0, self.window[0]), max(0, self.window[1])))

    def negative_part(self) -> ZSeries:
        return self._like({j: g for j, g in self.coeffs.items() if j < 0},
                          (min(-1, self.window[0]), min(-1, self.window[1])))

    def windowed(self, lo: Optional[int] = None, hi: Optional[int] = None) -> ZSeries:
        lo = self.window[0] if lo is None else lo
        hi = self.window[1] if hi is None else hi
        return self._like({j: g for j, g in self.coeffs.items() if lo <= j <= hi}, (lo, hi))

    def truncate(self, truncation: Truncation) -> ZSeries:
        trunc = self.truncation.meet(truncation)
        return self._like({j: g.truncate(trunc) for j, g in self.coeffs.items()}, truncation=trunc)

    def map_coeffs(self, fn: Callable[[GradedSeries], GradedSeries]) -> ZSeries:
        out = {j: fn(g) for j, g in self.coeffs.items()}
        trunc = self.truncation
        for g in out.values():
            trunc = trunc.meet(g.truncation)
        return self._like(out, truncation=trunc)

    def project(self, components: Iterable[int]) -> ZSeries:
        keep = tuple(components)
        return self.map_coeffs(lambda g: g.project(keep))

    def derivative(self, kind: str, label: int) -> ZSeries:
        coeffs = {j: g.derivative(kind, label) for j, g in self.coeffs.items()}
        trunc = GradedSeries.zero(self.variables, self.truncation)._lowered(kind, label)
        return ZSeries(self.variables, trunc, coeffs, self.window)

    def negate_z(self) -> ZSeries:
        return negate_z(self)

    def residue(self) -> GradedSeries:
        return laurent_residue(self)

    def restrict(self, variables: Variables) -> ZSeries:
        return ZSeries(variables, self.truncation,
                       {j: g.restrict(variables) for j, g in self.coeffs.items()}, self.window)

    def embed(self, variables: Variables, truncation: Optional[Truncation] = None) -> ZSeries:
        trunc = truncation or self.truncation
        return ZSeries(variables, trunc,
                       {j: g.embed(variables, trunc) for j, g in self.coeffs.items()}, self.window)

    def compose(self, substitution: Substitution, target: Optional[Variables] = None,
                truncation: Optional[Truncation] = None) -> ZSeries:
        target = target or self.variables
        trunc = truncation or self.truncation
        comp = _Composer(self.variables, substitution, target, trunc)
        coeffs = {j: GradedSeries(target, trunc, comp.apply(g)) for j, g in self.coeffs.items()}
        return ZSeries(target, trunc, coeffs, self.window)


def negate_z(f: ZSeries) -> ZSeries:
    """The series f(-z): the z^j coefficient is multiplied by (-1)^j."""
    return f._like({j: (g.scale(-1) if j % 2 else g) for j, g in f.coeffs.items()})


def laurent_residue(f: ZSeries) -> GradedSeries:
    """The coefficient of z^-1."""
    return f.coeff(-1)


# debug dump

def _exponent_text(labels: tuple, exps: tuple) -> str:
    parts = []
    for lab, e in zip(labels, exps):
        if e:
            parts.append(f"e_{lab}" if e == 1 else f"{e}e_{lab}")
    return "+".join(parts)


def format_rational(x: Rational) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def parse_rational(text: str) -> Fraction:
    return Fraction(text.strip())


def _term_line(variables: Variables, j: Optional[int], m: MultiIndex, k: Component,
               v: Fraction) -> str:
    parts = []
    if j is not None:
        parts.append(f"z^{j}")
    u = _exponent_text(variables.u_labels, m.u)
    if u:
        parts.append(f"u^({u})")
    t = _exponent_text(variables.t_labels, m.t)
    if t:
        parts.append(f"t^({t})")
    if k is not None:
        parts.append(f"phi_{k}")
    head = " ".join(parts) if parts else "1"
    return f"{head} : {format_rational(v)}"


def dump_lines(series: Union[GradedSeries, ZSeries]) -> list:
    """One line per term, ordered by (z-power, u-exponents, t-exponents, component)."""
    if isinstance(series, ZSeries):
        rows = [(j, m, k, v) for j, m, k, v in series.terms()]
    else:
        rows = [(None, m, k, v) for m, k, v in series.items()]
    rows.sort(key=lambda r: (r[0] if r[0] is not None else 0, r[1].u, r[1].t,
                             -1 if r[2] is None else r[2]))
    return [_term_line(series.variables, j, m, k, v) for j, m, k, v in rows]


def dump(series: Union[GradedSeries, ZSeries]) -> str:
    lines = dump_lines(series)
    return "\n".join(lines) + ("\n" if lines else "")
