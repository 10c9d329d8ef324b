"""Invariant tables read off the negative part of a cone point."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from ..exactseries import ZSeries, format_rational
from ..lgmodel import CorrelatorKey, Epsilon, FermatModel, epsilon_text, trivially_zero


class InconsistentTableError(ValueError):
    """Two read-offs of the same correlator disagree (broken permutation symmetry)."""


class OutOfRangeError(KeyError):
    """A correlator outside the range on which a table is complete."""


@dataclass(frozen=True)
class TableRange:
    """Keys a table is complete for.

    Besides the descendant slot, a key may carry at most ``t_degree`` heavy
    insertions from ``t_labels`` (total weight at most ``t_weight`` when set)
    and light insertions from ``u_labels`` of total weight at most
    ``u_weight``.  Broad sectors are always covered: their value is zero by
    convention.
    """

    t_degree: int
    t_labels: tuple
    u_weight: int = 0
    u_labels: tuple = ()
    u_degree: Optional[int] = None
    t_weight: Optional[int] = None

    def covers(self, model: FermatModel, key: CorrelatorKey) -> bool:
        narrow = model.space.is_narrow
        w = model.label_weight
        if any(not narrow(k) for k in key.sectors()):
            return True
        if any(l not in self.u_labels for l in key.light):
            return False
        if sum(w(l) for l in key.light) > self.u_weight:
            return False
        if self.u_degree is not None and key.n > self.u_degree:
            return False
        if not key.heavy or sum(1 for _, j in key.heavy if j) > 1:
            return False
        for i in range(key.m):
            rest = key.heavy[:i] + key.heavy[i + 1:]
            if any(j for _, j in rest):
                continue
            if len(rest) > self.t_degree or any(k not in self.t_labels for k, _ in rest):
                continue
            if self.t_weight is not None and sum(w(k) for k, _ in rest) > self.t_weight:
                continue
            return True
        return False

    def to_json(self) -> dict:
        out = {"heavy_besides_slot": self.t_degree, "heavy_sectors": list(self.t_labels),
               "light_weight": self.u_weight, "light_sectors": list(self.u_labels)}
        if self.u_degree is not None:
            out["light_count"] = self.u_degree
        if self.t_weight is not None:
            out["heavy_weight"] = self.t_weight
        return out


@dataclass
class InvariantTable:
    model: FermatModel
    epsilon: Epsilon               # the epsilon carried by every key
    label: str                     # chamber label used in exports
    range: TableRange
    orders: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    entries: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def add(self, key: CorrelatorKey, value: Fraction, provenance: str) -> None:
        if key.epsilon != self.epsilon:
            raise ValueError(f"key epsilon {key.epsilon} differs from table epsilon {self.epsilon}")
        old = self.entries.get(key)
        if old is not None and old != value:
            raise InconsistentTableError(f"{key.text()} read off as {old} and as {value}")
        if value:
            self.entries[key] = Fraction(value)
            self.provenance[key] = provenance

    def key(self, heavy: Iterable, light: Iterable = ()) -> CorrelatorKey:
        return CorrelatorKey(tuple(heavy), tuple(light), self.epsilon)

    def covers(self, key: CorrelatorKey) -> bool:
        return key.epsilon == self.epsilon and self.range.covers(self.model, key)

    def value(self, key: CorrelatorKey) -> Fraction:
        if key in self.entries:
            return self.entries[key]
        if not self.covers(key):
            raise OutOfRangeError(key.text())
        return Fraction(0)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.sorted_keys())

    def sorted_keys(self) -> list:
        return sorted(self.entries, key=lambda k: (k.m + k.n, k.m, k.heavy, k.light))

    def vanishing_violations(self) -> list:
        """Stored nonzero entries whose key a selection rule forces to vanish."""
        return [(k, trivially_zero(self.model, k)) for k in self.sorted_keys()
                if trivially_zero(self.model, k) is not None]

    # export
    def to_json(self) -> dict:
        return {
            "model": self.model.to_json(),
            "epsilon": self.label,
            "orders": self.orders,
            "range": self.range.to_json(),
            "metadata": self.metadata,
            "entries": [{"heavy": [list(p) for p in k.heavy], "light": list(k.light),
                         "value": format_rational(self.entries[k]), "provenance": self.provenance[k]}
                        for k in self.sorted_keys()],
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["heavy", "light", "value", "provenance"])
        for k in self.sorted_keys():
            writer.writerow([json.dumps([list(p) for p in k.heavy]), json.dumps(list(k.light)),
                             format_rational(self.entries[k]), self.provenance[k]])
        return buf.getvalue()

    @classmethod
    def from_json(cls, data: dict, model: FermatModel, epsilon: Epsilon) -> dict:
        """Entries of an exported table as {key: value} (for round-trip checks)."""
        return {CorrelatorKey(tuple(tuple(p) for p in e["heavy"]), tuple(e["light"]), epsilon):
                Fraction(e["value"]) for e in data["entries"]}


def read_off(model: FermatModel, stable: ZSeries, table: InvariantTable, provenance: str,
             within=None) -> InvariantTable:
    """Add every invariant encoded in the negative part ``stable`` of a point.

    The coefficient of t^a u^b z^(-1-j) phi_s is the correlator with heavy
    insertions from t^a, light ones from u^b and the slot phi_(d-2-s) psi^j,
    divided by a! b!.
    """
    ring = stable.variables
    d = model.d
    grade = ring.grade
    for j, m, s, v in stable.terms():
        if j >= 0:
            continue
        if within is not None and not within.admits(grade(m)):
            continue
        heavy = [(k, 0) for k, e in zip(ring.t_labels, m.t) for _ in range(e)]
        heavy.append((d - 2 - s, -1 - j))
        light = [k for k, e in zip(ring.u_labels, m.u) for _ in range(e)]
        sym = math.prod(math.factorial(e) for e in m.t + m.u)
        table.add(CorrelatorKey(tuple(heavy), tuple(light), table.epsilon), v * sym, provenance)
    return table


def compare_tables(a: InvariantTable, b: InvariantTable) -> dict:
    """Compare two tables on keys covered by both; report count and mismatches."""
    keys = {k for k in set(a.entries) | set(b.entries) if a.covers(k) and b.covers(k)}
    mismatches = [(k, a.value(k), b.value(k)) for k in sorted(keys, key=lambda k: (k.m, k.heavy, k.light))
                  if a.value(k) != b.value(k)]
    return {"compared": len(keys),
            "mismatches": [{"key": k.text(), "left": format_rational(x), "right": format_rational(y)}
                           for k, x, y in mismatches]}
