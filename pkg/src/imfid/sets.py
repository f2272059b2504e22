"""Exact parameter and auxiliary sets.

Three representations are provided:

* :class:`IntervalSet` -- finite unions of real intervals with open/closed
  endpoint flags, normalised to sorted, disjoint, non-adjacent pieces.
  Endpoints may be ``float`` or :class:`fractions.Fraction`; the algebra
  never rounds, so exact inputs give exact answers.
* :class:`FiniteSet` -- sorted finite collections of points (integers for
  discrete models, tuples for two-dimensional parameters).
* :class:`PredicateSet` -- an opaque membership test, usable only by
  Monte Carlo code paths.

Subset and disjointness tests between the exact representations are exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from numbers import Real
from typing import Callable, Iterable

import numpy as np

INF = math.inf


class SetAlgebraError(ValueError):
    """Raised for operations a representation cannot perform exactly."""


@dataclass(frozen=True, order=True)
class Interval:
    lo: Real
    hi: Real
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        # infinite endpoints are never members
        if self.lo == -INF or self.lo == INF:
            object.__setattr__(self, "lo_closed", False)
        if self.hi == INF or self.hi == -INF:
            object.__setattr__(self, "hi_closed", False)

    @property
    def empty(self) -> bool:
        if self.lo > self.hi:
            return True
        if self.lo == self.hi:
            return not (self.lo_closed and self.hi_closed)
        return False

    def contains(self, x) -> bool:
        if x < self.lo or x > self.hi:
            return False
        if x == self.lo and not self.lo_closed:
            return False
        if x == self.hi and not self.hi_closed:
            return False
        return True

    def __str__(self) -> str:
        return "{}{},{}{}".format(
            "[" if self.lo_closed else "(",
            _fmt(self.lo),
            _fmt(self.hi),
            "]" if self.hi_closed else ")",
        )


def _fmt(x) -> str:
    if x == INF:
        return "inf"
    if x == -INF:
        return "-inf"
    return repr(float(x)) if not isinstance(x, int) else str(x)


def _lo_key(iv: Interval):
    # closed start sorts before open start at the same location
    return (iv.lo, 0 if iv.lo_closed else 1)


def _hi_key(iv: Interval):
    # open end sorts before closed end at the same location
    return (iv.hi, 1 if iv.hi_closed else 0)


class IntervalSet:
    """A finite union of real intervals.

    Instances are immutable and normalised on construction.
    """

    __slots__ = ("intervals",)

    def __init__(self, intervals: Iterable[Interval] = ()):
        object.__setattr__(self, "intervals", tuple(_normalise(intervals)))

    def __setattr__(self, name, value):
        raise AttributeError("IntervalSet is immutable")

    # constructors
    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls(())

    @classmethod
    def real_line(cls) -> "IntervalSet":
        return cls([Interval(-INF, INF, False, False)])

    @classmethod
    def interval(cls, lo, hi, lo_closed=True, hi_closed=True) -> "IntervalSet":
        return cls([Interval(lo, hi, lo_closed, hi_closed)])

    @classmethod
    def point(cls, x) -> "IntervalSet":
        return cls([Interval(x, x, True, True)])

    @classmethod
    def open(cls, lo, hi) -> "IntervalSet":
        return cls([Interval(lo, hi, False, False)])

    @classmethod
    def closed(cls, lo, hi) -> "IntervalSet":
        return cls([Interval(lo, hi, True, True)])

    # queries
    def is_empty(self) -> bool:
        return not self.intervals

    def __bool__(self) -> bool:
        return bool(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def __contains__(self, x) -> bool:
        return self.contains(x)

    def contains(self, x) -> bool:
        return any(iv.contains(x) for iv in self.intervals)

    def contains_array(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.zeros(xs.shape, dtype=bool)
        for iv in self.intervals:
            lo, hi = float(iv.lo), float(iv.hi)
            left = xs >= lo if iv.lo_closed else xs > lo
            right = xs <= hi if iv.hi_closed else xs < hi
            out |= left & right
        return out

    @property
    def bounds(self):
        if not self.intervals:
            return None
        return self.intervals[0].lo, self.intervals[-1].hi

    def measure(self) -> float:
        return sum(iv.hi - iv.lo for iv in self.intervals)

    def is_bounded(self) -> bool:
        b = self.bounds
        return b is None or (math.isfinite(b[0]) and math.isfinite(b[1]))

    def endpoints(self) -> list:
        pts = []
        for iv in self.intervals:
            pts.extend([iv.lo, iv.hi])
        return pts

    # algebra
    def complement(self, universe: "IntervalSet | None" = None) -> "IntervalSet":
        gaps = []
        lo, lo_closed = -INF, False
        for iv in self.intervals:
            gaps.append(Interval(lo, iv.lo, lo_closed, not iv.lo_closed))
            lo, lo_closed = iv.hi, not iv.hi_closed
        gaps.append(Interval(lo, INF, lo_closed, False))
        out = IntervalSet(gaps)
        return out if universe is None else out.intersection(universe)

    def union(self, other) -> "IntervalSet":
        other = _as_interval_set(other)
        return IntervalSet(self.intervals + other.intervals)

    def intersection(self, other):
        if isinstance(other, FiniteSet):
            return other.intersection(self)
        other = _as_interval_set(other)
        out = []
        i = j = 0
        a, b = self.intervals, other.intervals
        while i < len(a) and j < len(b):
            x, y = a[i], b[j]
            lo_iv = max(x, y, key=_lo_key)
            hi_iv = min(x, y, key=_hi_key)
            piece = Interval(lo_iv.lo, hi_iv.hi, lo_iv.lo_closed, hi_iv.hi_closed)
            if not piece.empty:
                out.append(piece)
            if _hi_key(x) < _hi_key(y):
                i += 1
            else:
                j += 1
        return IntervalSet(out)

    def difference(self, other) -> "IntervalSet":
        return self.intersection(_as_interval_set(other).complement())

    def issubset(self, other) -> bool:
        if isinstance(other, PredicateSet):
            raise SetAlgebraError("subset test against a predicate set is not exact")
        if isinstance(other, FiniteSet):
            return all(iv.lo == iv.hi for iv in self.intervals) and all(
                other.contains(iv.lo) for iv in self.intervals
            )
        other = _as_interval_set(other)
        return self.difference(other).is_empty()

    def issuperset(self, other) -> bool:
        return _as_exact(other).issubset(self)

    def isdisjoint(self, other) -> bool:
        if isinstance(other, PredicateSet):
            raise SetAlgebraError("disjointness against a predicate set is not exact")
        return self.intersection(other).is_empty()

    def map_monotone(self, f: Callable, increasing: bool = True) -> "IntervalSet":
        """Image under a continuous strictly monotone map.

        ``f`` must accept endpoint values, including the ends of its domain;
        images that land on ``+-inf`` become open ends.
        """
        out = []
        for iv in self.intervals:
            a, b = f(iv.lo), f(iv.hi)
            if increasing:
                out.append(Interval(a, b, iv.lo_closed, iv.hi_closed))
            else:
                out.append(Interval(b, a, iv.hi_closed, iv.lo_closed))
        return IntervalSet(out)

    __or__ = union
    __and__ = intersection
    __sub__ = difference
    __le__ = issubset

    def __invert__(self):
        return self.complement()

    def __eq__(self, other):
        if isinstance(other, IntervalSet):
            return self.intervals == other.intervals
        if isinstance(other, FiniteSet):
            return self.issubset(other) and other.issubset(self)
        return NotImplemented

    def __hash__(self):
        return hash(self.intervals)

    def __str__(self) -> str:
        if not self.intervals:
            return "{}"
        return "|".join(str(iv) for iv in self.intervals)

    def __repr__(self) -> str:
        return f"IntervalSet({self})"


def _normalise(intervals: Iterable[Interval]) -> list[Interval]:
    items = sorted((iv for iv in intervals if not iv.empty), key=_lo_key)
    out: list[Interval] = []
    for iv in items:
        if out:
            last = out[-1]
            touching = last.hi > iv.lo or (
                last.hi == iv.lo and (last.hi_closed or iv.lo_closed)
            )
            if touching:
                hi_iv = max(last, iv, key=_hi_key)
                out[-1] = Interval(last.lo, hi_iv.hi, last.lo_closed, hi_iv.hi_closed)
                continue
        out.append(iv)
    return out


class FiniteSet:
    """A finite set of parameter (or auxiliary) points.

    Points must be hashable and mutually orderable.  ``universe`` is optional;
    when present it makes :meth:`complement` available.
    """

    __slots__ = ("points", "universe")

    def __init__(self, points: Iterable = (), universe: Iterable | None = None):
        pts = tuple(sorted(set(points)))
        uni = None if universe is None else tuple(sorted(set(universe)))
        if uni is not None and not set(pts) <= set(uni):
            raise SetAlgebraError("points lie outside the declared universe")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "universe", uni)

    def __setattr__(self, name, value):
        raise AttributeError("FiniteSet is immutable")

    def _with(self, points) -> "FiniteSet":
        if self.universe is not None:
            points = [p for p in points if p in set(self.universe)]
        return FiniteSet(points, self.universe)

    def is_empty(self) -> bool:
        return not self.points

    def __bool__(self):
        return bool(self.points)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def contains(self, x) -> bool:
        return x in self._lookup

    __contains__ = contains

    @property
    def _lookup(self) -> frozenset:
        return frozenset(self.points)

    def contains_array(self, xs) -> np.ndarray:
        xs = np.asarray(xs)
        if xs.ndim == 2:
            rows = [tuple(r) for r in xs.tolist()]
            return np.array([r in self._lookup for r in rows], dtype=bool)
        return np.isin(xs, np.array(self.points)) if self.points else np.zeros(xs.shape, bool)

    def complement(self, universe: Iterable | None = None) -> "FiniteSet":
        uni = universe if universe is not None else self.universe
        if uni is None:
            raise SetAlgebraError("complement of a finite set needs a universe")
        uni = tuple(uni)
        return FiniteSet([p for p in uni if p not in self._lookup], uni)

    def union(self, other) -> "FiniteSet":
        if isinstance(other, IntervalSet):
            raise SetAlgebraError("union of finite and interval sets is not representable")
        return FiniteSet(self.points + tuple(other), self.universe or _universe(other))

    def intersection(self, other) -> "FiniteSet":
        if isinstance(other, (IntervalSet, PredicateSet)):
            return FiniteSet([p for p in self.points if other.contains(p)], self.universe)
        keep = set(other)
        return FiniteSet([p for p in self.points if p in keep], self.universe or _universe(other))

    def difference(self, other) -> "FiniteSet":
        return FiniteSet([p for p in self.points if not other.contains(p)], self.universe)

    def issubset(self, other) -> bool:
        if isinstance(other, PredicateSet):
            # pointwise membership is exact for finitely many points
            return all(other.contains(p) for p in self.points)
        return all(other.contains(p) for p in self.points)

    def issuperset(self, other) -> bool:
        return _as_exact(other).issubset(self)

    def isdisjoint(self, other) -> bool:
        return not any(other.contains(p) for p in self.points)

    __or__ = union
    __and__ = intersection
    __sub__ = difference
    __le__ = issubset

    def __eq__(self, other):
        if isinstance(other, FiniteSet):
            return self.points == other.points
        if isinstance(other, IntervalSet):
            return other == self
        if isinstance(other, (set, frozenset)):
            return set(self.points) == other
        return NotImplemented

    def __hash__(self):
        return hash(self.points)

    def __str__(self) -> str:
        return "{" + ",".join(str(p) for p in self.points) + "}"

    def __repr__(self) -> str:
        return f"FiniteSet({self})"


def _universe(other):
    return getattr(other, "universe", None)


class PredicateSet:
    """Membership-only set.  Supports Monte Carlo estimation, nothing exact."""

    def __init__(self, predicate: Callable, description: str = "predicate"):
        self.predicate = predicate
        self.description = description

    def contains(self, x) -> bool:
        return bool(self.predicate(x))

    __contains__ = contains

    def contains_array(self, xs) -> np.ndarray:
        xs = np.asarray(xs)
        if xs.ndim == 2:
            return np.array([self.contains(tuple(r)) for r in xs], dtype=bool)
        return np.array([self.contains(x) for x in xs], dtype=bool)

    def complement(self, universe=None) -> "PredicateSet":
        return PredicateSet(lambda x: not self.predicate(x), f"not({self.description})")

    def intersection(self, other) -> "PredicateSet":
        return PredicateSet(
            lambda x: self.contains(x) and other.contains(x), f"{self.description}&{other}"
        )

    def union(self, other) -> "PredicateSet":
        return PredicateSet(
            lambda x: self.contains(x) or other.contains(x), f"{self.description}|{other}"
        )

    def issubset(self, other):
        raise SetAlgebraError("predicate sets support membership only")

    isdisjoint = issubset

    def __str__(self):
        return f"<{self.description}>"


ParamSet = IntervalSet | FiniteSet | PredicateSet


def _as_interval_set(x) -> IntervalSet:
    if isinstance(x, IntervalSet):
        return x
    if isinstance(x, FiniteSet):
        return IntervalSet(Interval(p, p) for p in x.points)
    if isinstance(x, Interval):
        return IntervalSet([x])
    raise SetAlgebraError(f"cannot treat {type(x).__name__} as an interval set")


def _as_exact(x):
    if isinstance(x, (IntervalSet, FiniteSet)):
        return x
    if isinstance(x, (set, frozenset, list, tuple)):
        return FiniteSet(x)
    raise SetAlgebraError(f"{type(x).__name__} is not an exact set")


_NUM = r"[-+]?(?:inf|\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
_IV_RE = re.compile(rf"^\s*([\[(])\s*({_NUM})\s*,\s*({_NUM})\s*([\])])\s*$")


def _num(tok: str):
    tok = tok.strip()
    if tok.lstrip("+-") == "inf":
        return -INF if tok.startswith("-") else INF
    if re.fullmatch(r"[-+]?\d+", tok):
        return int(tok)
    return float(tok)


def parse_set(text: str, universe: Iterable | None = None):
    """Parse an assertion string.

    ``"(-inf,0]|(2,3)"`` gives an :class:`IntervalSet`, ``"{3,4,5}"`` a
    :class:`FiniteSet`; ``"{}"`` is the empty finite set and ``"R"`` the
    real line.

    >>> str(parse_set("(2,3)|(-inf,0]"))
    '(-inf,0]|(2,3)'
    """
    text = text.strip()
    if text in ("R", "reals"):
        return IntervalSet.real_line()
    if text.startswith("{"):
        if not text.endswith("}"):
            raise ValueError(f"malformed finite set: {text!r}")
        body = text[1:-1].strip()
        pts = [_num(t) for t in body.split(",")] if body else []
        return FiniteSet(pts, universe)
    pieces = []
    for part in text.split("|"):
        m = _IV_RE.match(part)
        if not m:
            raise ValueError(f"malformed interval: {part!r}")
        lb, lo, hi, rb = m.groups()
        pieces.append(Interval(_num(lo), _num(hi), lb == "[", rb == "]"))
    return IntervalSet(pieces)


def format_set(s) -> str:
    return str(s)
