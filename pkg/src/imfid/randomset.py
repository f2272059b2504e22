"""Predictive random sets.

A random set is ``S = S_{U*}`` for a family ``a -> S_a`` indexed by
``U* ~ U(0, 1)``.  Its containment function is ``gamma(u) = P(u in S)``.
For any ``gamma`` the sublevel construction ``S'_a = {u : gamma(u) > 1 - a}``
gives a nested random set with the same ``gamma``; :meth:`RandomSet.level_set`
returns those sets, and the principle nested sets coincide with them up to
boundary points.

Continuous families are defined on the probability scale ``[0, 1]`` of the
auxiliary variable.  Discrete families (auxiliary variable uniform on
``{0..N-1}``) are stored as a finite list of atoms ``(probability,
realisation)`` with exact :class:`~fractions.Fraction` probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from .model import AuxDistribution
from .sets import FiniteSet, Interval, IntervalSet

UNIT = IntervalSet.closed(0.0, 1.0)
GRID_BITS = 12


class UnknownRandomSetError(ValueError):
    pass


def _exact(alpha):
    """Float levels are read as the short decimal they were typed as."""
    if isinstance(alpha, float):
        return Fraction(alpha).limit_denominator(10**9)
    return alpha


class RandomSet:
    """Common interface; see the concrete classes below."""

    name: str
    nested: bool
    discrete: bool = False

    def gamma(self, u):
        raise NotImplementedError

    def level_set(self, alpha, closed: bool = False):
        """``{u : gamma(u) > 1 - alpha}`` (``>=`` when ``closed``)."""
        raise NotImplementedError

    def level_contains(self, u, alpha, closed: bool = False) -> bool:
        g = self.gamma(u)
        return bool(g >= 1 - alpha) if closed else bool(g > 1 - alpha)

    def raw(self, a):
        """The realisation ``S_a`` of the defining family."""
        raise NotImplementedError

    def draw(self, rng: np.random.Generator):
        return self.raw(rng.random())

    def principle_nested_set(self, alpha, closed: bool = False):
        if alpha == 0:
            return self.level_set(0, closed=True)
        return self.level_set(alpha, closed)

    def nesting(self) -> "RandomSet":
        """The nested random set with the same containment function."""
        return self

    def crossings(self, points: Sequence) -> list:
        """Indices ``a`` at which an endpoint of ``S_a`` meets one of ``points``.

        Between consecutive crossings the position of ``S_a`` relative to
        ``points`` does not change; exact integration over ``U*`` relies on it.
        """
        raise NotImplementedError

    @property
    def has_crossings(self) -> bool:
        return False


# continuous families


def _half(a):
    return Fraction(1, 2) if isinstance(a, (Fraction, int)) else 0.5


class IntervalRandomSet(RandomSet):
    """Continuous family whose realisations are single intervals in [0, 1].

    ``bounds(a)`` returns ``(lo, hi, lo_closed, hi_closed)`` and must accept
    scalars (``float`` or ``Fraction``) and numpy arrays.
    """

    discrete = False

    def __init__(self, name, bounds, gamma, level, crossings, nested):
        self.name = name
        self._bounds = bounds
        self._gamma = gamma
        self._level = level
        self._crossings = crossings
        self.nested = nested

    def __repr__(self):
        return f"IntervalRandomSet({self.name!r})"

    def bounds(self, a):
        return self._bounds(a)

    def raw(self, a) -> IntervalSet:
        lo, hi, lc, hc = self._bounds(a)
        return IntervalSet.interval(lo, hi, lc, hc).intersection(UNIT)

    def gamma(self, u):
        u = np.asarray(u, dtype=float)
        inside = (u >= 0) & (u <= 1)
        out = np.where(inside, self._gamma(np.clip(u, 0, 1)), 0.0)
        return float(out) if out.ndim == 0 else out

    def level_set(self, alpha, closed: bool = False) -> IntervalSet:
        if alpha <= 0 and not closed:
            return IntervalSet.empty()
        return self._level(alpha, closed).intersection(UNIT)

    def crossings(self, points):
        out = set()
        for p in points:
            out.update(self._crossings(p))
        return sorted(a for a in out if 0 <= a <= 1)

    @property
    def has_crossings(self) -> bool:
        return True

    def nesting(self) -> RandomSet:
        if self.nested:
            return self
        return IntervalRandomSet(
            f"{self.name}-nested",
            bounds=lambda a: _level_bounds(self._level, a),
            gamma=self._gamma,
            level=self._level,
            # level-set endpoints pass p exactly when a = 1 - gamma(p)
            crossings=lambda p: [1 - self._gamma(p)],
            nested=True,
        )


def _level_bounds(level, a):
    if isinstance(a, np.ndarray):
        out = [_level_bounds(level, x) for x in a]
        lo, hi, lc, hc = zip(*out) if out else ((), (), (), ())
        return np.array(lo), np.array(hi), np.array(lc), np.array(hc)
    s = level(a, False).intersection(UNIT)
    if s.is_empty():
        return 1.0, 0.0, False, False
    iv = s.intervals[0]
    return iv.lo, iv.hi, iv.lo_closed, iv.hi_closed


def _two_sided_bounds(a):
    h = _half(a)
    r = abs(a - h)
    return h - r, h + r, False, False


def _two_sided_level(alpha, closed):
    h = _half(alpha)
    return IntervalSet.interval(h - alpha * h, h + alpha * h, closed, closed)


def _two_sided_gamma(u):
    return 1 - np.abs(2 * u - 1)


def _two_sided_crossings(p):
    return [p, 1 - p, _half(p)]


def _offset_bounds(a):
    h = _half(a)
    return h * a, h + h * a, False, False


def _offset_crossings(p):
    return [2 * p, 2 * p - 1]


def _left_bounds(a):
    zero = 0 * a
    return zero, a, True, True


def _right_bounds(a):
    return a, 0 * a + 1, True, True


def two_sided() -> IntervalRandomSet:
    """``S_a = {u : |u - 1/2| < |a - 1/2|}``; ``gamma(u) = 1 - |2u - 1|``."""
    return IntervalRandomSet(
        "two-sided", _two_sided_bounds, _two_sided_gamma, _two_sided_level,
        _two_sided_crossings, nested=True,
    )


def left() -> IntervalRandomSet:
    """``S_a = [0, a]``; ``gamma(u) = 1 - u``."""
    return IntervalRandomSet(
        "left", _left_bounds, lambda u: 1 - u,
        lambda alpha, closed: IntervalSet.interval(0 * alpha, alpha, True, closed),
        lambda p: [p], nested=True,
    )


def right() -> IntervalRandomSet:
    """``S_a = [a, 1]``; ``gamma(u) = u``."""
    return IntervalRandomSet(
        "right", _right_bounds, lambda u: u,
        lambda alpha, closed: IntervalSet.interval(1 - alpha, 1 + 0 * alpha, closed, True),
        lambda p: [p], nested=True,
    )


def offset() -> IntervalRandomSet:
    """``S_a = (a/2, 1/2 + a/2)``: not nested, same ``gamma`` as two-sided."""
    return IntervalRandomSet(
        "offset", _offset_bounds, _two_sided_gamma, _two_sided_level,
        _offset_crossings, nested=False,
    )


_BUILTINS = {"two-sided": two_sided, "left": left, "right": right, "offset": offset}


def builtin_randomset(name: str) -> IntervalRandomSet:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise UnknownRandomSetError(
            f"unknown random set {name!r}; choose from {sorted(_BUILTINS)}"
        ) from None


def builtin_names() -> list[str]:
    return list(_BUILTINS)


class GammaRandomSet(RandomSet):
    """Nested random set built from a containment function.

    Level sets come from, in order of preference: a closed-form inverter
    ``level(alpha, closed)``, exact piecewise-linear inversion when
    ``knots`` are given, or grid inversion at resolution ``2**-12`` with
    bisection refinement of every crossing.
    """

    discrete = False
    nested = True

    def __init__(self, gamma: Callable, name: str = "gamma", level: Callable | None = None,
                 knots: tuple | None = None, resolution_bits: int = GRID_BITS):
        self.name = name
        self._gamma = gamma
        self._level = level
        self.knots = knots
        self.resolution = 2.0 ** -resolution_bits
        self._grid = np.linspace(0.0, 1.0, 2**resolution_bits + 1)
        self._grid_gamma = np.asarray(self._vec_gamma(self._grid), dtype=float)

    def __repr__(self):
        return f"GammaRandomSet({self.name!r})"

    def _vec_gamma(self, u):
        try:
            out = np.asarray(self._gamma(u), dtype=float)
            if out.shape == np.shape(u):
                return out
        except (TypeError, ValueError):
            pass
        return np.array([float(self._gamma(x)) for x in np.ravel(u)]).reshape(np.shape(u))

    def gamma(self, u):
        out = self._vec_gamma(np.asarray(u, dtype=float))
        return float(out) if out.ndim == 0 else out

    @property
    def method(self) -> str:
        if self._level is not None:
            return "closed-form"
        return "piecewise-linear" if self.knots is not None else "grid"

    def level_set(self, alpha, closed: bool = False) -> IntervalSet:
        if self._level is not None:
            return self._level(alpha, closed).intersection(UNIT)
        c = 1 - float(alpha)
        if self.knots is not None:
            return _pl_level_set(self.knots, c, closed)
        return self._grid_level_set(c, closed)

    def _grid_level_set(self, c: float, closed: bool) -> IntervalSet:
        g, u = self._grid_gamma, self._grid
        mask = g >= c if closed else g > c
        if not mask.any():
            return IntervalSet.empty()
        edges = np.flatnonzero(np.diff(mask.astype(np.int8)))
        starts = [0] if mask[0] else []
        ends = []
        for e in edges:
            if mask[e + 1]:
                starts.append(e + 1)
            else:
                ends.append(e)
        if mask[-1]:
            ends.append(len(u) - 1)
        pieces = []
        for i, j in zip(starts, ends):
            lo, lo_closed = (0.0, True) if i == 0 else (self._refine(u[i - 1], u[i], c, closed), closed)
            hi, hi_closed = (1.0, True) if j == len(u) - 1 else (self._refine(u[j + 1], u[j], c, closed), closed)
            pieces.append(Interval(lo, hi, lo_closed, hi_closed))
        return IntervalSet(pieces)

    def _refine(self, out_pt, in_pt, c, closed):
        # bisect between a grid point outside the level set and one inside
        f = (lambda x: self.gamma(x) >= c) if closed else (lambda x: self.gamma(x) > c)
        a, b = out_pt, in_pt
        for _ in range(60):
            m = 0.5 * (a + b)
            if f(m):
                b = m
            else:
                a = m
            if abs(b - a) < 1e-13:
                break
        return 0.5 * (a + b)

    def raw(self, a):
        return self.level_set(a)

    def crossings(self, points):
        extra = self._grid if self.knots is None else np.asarray(self.knots[0])
        vals = [1 - float(self.gamma(p)) for p in points]
        vals += list(1 - self._vec_gamma(np.asarray(extra, dtype=float)))
        return sorted({v for v in vals if 0 <= v <= 1})

    @property
    def has_crossings(self) -> bool:
        return self._level is None


def _pl_level_set(knots, c: float, closed: bool) -> IntervalSet:
    us, gs = (np.asarray(k, dtype=float) for k in knots)
    # constant extension of the table to the whole of [0, 1]
    if us[0] > 0:
        us, gs = np.r_[0.0, us], np.r_[gs[0], gs]
    if us[-1] < 1:
        us, gs = np.r_[us, 1.0], np.r_[gs, gs[-1]]
    inside = (lambda g: g >= c) if closed else (lambda g: g > c)
    pieces = []
    for u0, u1, g0, g1 in zip(us[:-1], us[1:], gs[:-1], gs[1:]):
        in0, in1 = inside(g0), inside(g1)
        if in0 and in1:
            pieces.append(Interval(u0, u1, True, True))
        elif in0 or in1:
            if g1 == g0:
                continue
            x = u0 + (c - g0) * (u1 - u0) / (g1 - g0)
            if in0:
                pieces.append(Interval(u0, x, True, closed))
            else:
                pieces.append(Interval(x, u1, closed, True))
    return IntervalSet(pieces).intersection(UNIT)


def nested_from_gamma(gamma, name: str = "gamma", level: Callable | None = None,
                      knots: tuple | None = None):
    """Nested random set ``S_a = {u : gamma(u) > 1 - a}``.

    ``gamma`` is a callable on ``[0, 1]`` or, for a discrete auxiliary
    variable, a sequence of containment probabilities indexed by ``u``.
    """
    if isinstance(gamma, (list, tuple)) and not callable(gamma):
        return DiscreteRandomSet.from_gamma(gamma, name=name)
    return GammaRandomSet(gamma, name=name, level=level, knots=knots)


def gamma_table(us: Iterable[float], gs: Iterable[float], name: str = "table") -> GammaRandomSet:
    """Linearly interpolated containment function from ``(u, gamma)`` pairs."""
    us, gs = np.asarray(list(us), dtype=float), np.asarray(list(gs), dtype=float)
    order = np.argsort(us)
    us, gs = us[order], gs[order]
    if np.any((gs < 0) | (gs > 1)):
        raise ValueError("gamma values must lie in [0, 1]")
    return GammaRandomSet(lambda u: np.interp(u, us, gs), name=name, knots=(us, gs))


def read_gamma_csv(path) -> GammaRandomSet:
    import csv

    us, gs = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                u, g = float(row[0]), float(row[1])
            except ValueError:
                continue  # header line
            us.append(u)
            gs.append(g)
    if len(us) < 2:
        raise ValueError(f"{path}: need at least two (u, gamma) rows")
    return gamma_table(us, gs, name=f"table:{path}")


# discrete families


class DiscreteRandomSet(RandomSet):
    """A random subset of ``{0..N-1}`` given by its atoms.

    ``atoms`` is a list of ``(probability, frozenset)``; identical
    realisations are merged and probabilities must sum to one.  The atoms
    are the realisations of ``S_{U*}`` listed in order of their ``U*``
    intervals, so :meth:`draw` is a deterministic function of ``U*``.
    """

    discrete = True

    def __init__(self, n_atoms: int, atoms, name: str = "discrete"):
        merged: dict[frozenset, Fraction] = {}
        order = []
        for p, s in atoms:
            p, s = Fraction(p), frozenset(s)
            if p < 0:
                raise ValueError("negative atom probability")
            if p == 0:
                continue
            if not all(0 <= u < n_atoms for u in s):
                raise ValueError(f"atom {sorted(s)} leaves {{0..{n_atoms - 1}}}")
            if s not in merged:
                order.append(s)
                merged[s] = Fraction(0)
            merged[s] += p
        if sum(merged.values()) != 1:
            raise ValueError(f"atom probabilities sum to {sum(merged.values())}, not 1")
        self.n_atoms = n_atoms
        self.name = name
        self.atoms = [(merged[s], s) for s in order]
        self._cum = np.cumsum([float(p) for p, _ in self.atoms])

    def __repr__(self):
        return f"DiscreteRandomSet({self.name!r}, N={self.n_atoms}, atoms={len(self.atoms)})"

    @property
    def support(self) -> range:
        return range(self.n_atoms)

    @property
    def nested(self) -> bool:
        sets = sorted((s for _, s in self.atoms), key=len)
        return all(a <= b for a, b in zip(sets, sets[1:]))

    def intersecting(self) -> bool:
        """Whether two independent copies intersect with probability one."""
        sets = [s for _, s in self.atoms]
        return all(a & b for a in sets for b in sets)

    def gamma(self, u) -> Fraction:
        return sum((p for p, s in self.atoms if u in s), Fraction(0))

    def gamma_table(self) -> list[Fraction]:
        return [self.gamma(u) for u in self.support]

    def level_set(self, alpha, closed: bool = False) -> FiniteSet:
        c = 1 - _exact(alpha)
        if closed:
            pts = [u for u in self.support if self.gamma(u) >= c]
        else:
            pts = [u for u in self.support if self.gamma(u) > c]
        return FiniteSet(pts, self.support)

    def raw(self, a) -> FiniteSet:
        i = int(np.searchsorted(self._cum, float(a), side="right"))
        return FiniteSet(self.atoms[min(i, len(self.atoms) - 1)][1], self.support)

    def containment_probability(self, target: frozenset) -> Fraction:
        """``P(S subset of target)``."""
        return sum((p for p, s in self.atoms if s <= target), Fraction(0))

    def principle_nested_set(self, alpha, closed: bool = False) -> FiniteSet:
        """Union over ``beta < alpha`` of the intersection of all realisations
        ``R`` with ``P(S subset of R) >= beta``, evaluated on the atoms.

        ``alpha = 0`` gives the intersection of all realisations.  Families
        that are not nested are first replaced by the nested family with the
        same containment function; ``closed`` asks for the right limit
        ``alpha+``.
        """
        if not self.nested:
            return self.nesting().principle_nested_set(alpha, closed)
        alpha = _exact(alpha)
        sets = [s for _, s in self.atoms]
        qs = [self.containment_probability(s) for s in sets]

        def meet(beta):
            chosen = [s for s, q in zip(sets, qs) if q >= beta]
            if not chosen:
                return frozenset(self.support)
            out = chosen[0]
            for s in chosen[1:]:
                out = out & s
            return out

        if closed:
            # right limit alpha+: smallest realisation with containment above alpha
            chosen = [s for s, q in zip(sets, qs) if q > alpha]
            return FiniteSet(min(chosen, key=len) if chosen else self.support, self.support)
        if alpha == 0:
            return FiniteSet(meet(0), self.support)
        below = [q for q in qs if q < alpha]
        # no containment probability lies strictly between max(below) and alpha
        beta = ((max(below) if below else Fraction(0)) + alpha) / 2
        out = frozenset()
        for b in below + [beta]:
            out |= meet(b)
        return FiniteSet(out, self.support)

    def nesting(self) -> "DiscreteRandomSet":
        if self.nested:
            return self
        return DiscreteRandomSet.from_gamma(self.gamma_table(), name=f"{self.name}-nested")

    def crossings(self, points):
        return sorted({float(c) for c in self._cum})

    @classmethod
    def from_gamma(cls, gammas: Sequence, name: str = "gamma-table") -> "DiscreteRandomSet":
        """Nested set ``S_a = {u : gamma(u) > 1 - a}`` for a tabulated ``gamma``."""
        gammas = [_exact(g) if isinstance(g, float) else Fraction(g) for g in gammas]
        if any(g < 0 or g > 1 for g in gammas):
            raise ValueError("gamma values must lie in [0, 1]")
        n = len(gammas)
        # S_a changes where 1 - a crosses a gamma value
        cuts = sorted({Fraction(0), Fraction(1)} | {1 - g for g in gammas})
        atoms = []
        for a0, a1 in zip(cuts, cuts[1:]):
            mid = (a0 + a1) / 2
            atoms.append((a1 - a0, [u for u in range(n) if gammas[u] > 1 - mid]))
        return cls(n, atoms, name=name)

    @classmethod
    def from_continuous(cls, fam: IntervalRandomSet, n: int) -> "DiscreteRandomSet":
        """Outer discretisation: ``u`` is in ``S_a`` when its cell
        ``[u/n, (u+1)/n)`` meets the continuous realisation.

        The containment function can only grow under this map, so the
        validity condition carries over from the continuous family.
        """
        points = [Fraction(k, n) for k in range(n + 1)]
        cuts = sorted({Fraction(0), Fraction(1)} | {Fraction(c) for c in fam.crossings(points)})
        cells = [IntervalSet.interval(Fraction(u, n), Fraction(u + 1, n), True, False)
                 for u in range(n)]
        atoms = []
        for a0, a1 in zip(cuts, cuts[1:]):
            if a1 == a0:
                continue
            s = fam.raw((a0 + a1) / 2)
            atoms.append((a1 - a0, [u for u in range(n) if not cells[u].isdisjoint(s)]))
        # an empty realisation only appears on null sets of U*
        return cls(n, atoms, name=f"{fam.name}/{n}")


def for_aux(fam: RandomSet, aux: AuxDistribution) -> RandomSet:
    """Adapt a family to the auxiliary variable of a model."""
    if aux.discrete and not fam.discrete:
        if not isinstance(fam, IntervalRandomSet):
            raise ValueError("only interval families can be discretised")
        return DiscreteRandomSet.from_continuous(fam, aux.n_atoms)
    if fam.discrete and not aux.discrete:
        raise ValueError("a discrete random set needs a discrete auxiliary variable")
    if fam.discrete and fam.n_atoms != aux.n_atoms:
        raise ValueError("random set and auxiliary variable disagree on the support size")
    return fam


def branching_example(n: int = 4) -> DiscreteRandomSet:
    """A non-nested family: the trunk ``{0..n-3}`` plus one of two branch
    points, each with probability one half.  It satisfies the validity
    condition and any two realisations intersect."""
    if n < 4:
        raise ValueError("need n >= 4")
    trunk = set(range(n - 2))
    atoms = [(Fraction(1, 2), trunk | {n - 2}), (Fraction(1, 2), trunk | {n - 1})]
    return DiscreteRandomSet(n, atoms, name=f"branching/{n}")


# validity condition


@dataclass
class ValidityConditionReport:
    alphas: list
    probabilities: list
    se: list
    violations: list
    uniform: bool
    method: str
    ks_pvalue: float | None = None

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "alphas": [float(a) for a in self.alphas],
            "probabilities": [float(p) for p in self.probabilities],
            "se": [float(s) for s in self.se],
            "violations": [float(a) for a in self.violations],
            "uniform": self.uniform,
            "method": self.method,
            "ks_pvalue": self.ks_pvalue,
            "passed": self.passed,
        }


def check_validity_condition(fam: RandomSet, aux: AuxDistribution, n_mc: int = 10**5,
                             alphas=None, seed: int = 0) -> ValidityConditionReport:
    """Check ``P(gamma(U) <= alpha) <= alpha`` over a grid of levels.

    Discrete families are checked exactly by enumeration; continuous ones by
    Monte Carlo, flagging ``alpha`` when the estimate exceeds
    ``alpha + 3 SE``.  ``uniform`` reports whether ``gamma(U)`` is (discretely)
    uniform, the exactness clause needed for principle assertions.
    """
    if alphas is None:
        alphas = [k / 20 for k in range(1, 20)]
    if fam.discrete:
        fam = for_aux(fam, aux)
        n = fam.n_atoms
        table = fam.gamma_table()
        probs = [Fraction(sum(1 for g in table if g <= _exact(a)), n) for a in alphas]
        viol = [a for a, p in zip(alphas, probs) if p > _exact(a)]
        uniform = all(Fraction(sum(1 for h in table if h <= g), n) == g for g in table)
        return ValidityConditionReport(list(alphas), probs, [0.0] * len(probs), viol,
                                       uniform, "exact")
    if n_mc < 10**4:
        raise ValueError("n_mc must be at least 10^4")
    from .streams import uniforms

    g = np.asarray(fam.gamma(uniforms(seed, n_mc)), dtype=float)
    probs, ses, viol = [], [], []
    for a in alphas:
        p = float(np.mean(g <= a))
        se = math.sqrt(p * (1 - p) / n_mc)
        probs.append(p)
        ses.append(se)
        if p > a + 3 * se:
            viol.append(a)
    ks = stats.kstest(g, "uniform")
    return ValidityConditionReport(list(alphas), probs, ses, viol, bool(ks.pvalue >= 0.01),
                                   "monte-carlo", float(ks.pvalue))
