"""Confidence curves.

A confidence curve ``cc(theta)`` maps the parameter space into ``[0, 1]``
so that ``{theta : cc(theta) <= alpha}`` is an ``alpha``-level confidence
set.  Curves are stored as a function plus an evaluation grid; level sets
are read off the grid and refined at every crossing by root finding.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np
from scipy import optimize, special

from .model import AuxDistribution, Model, NoSolutionError, aux_for
from .randomset import IntervalRandomSet, RandomSet, check_validity_condition, for_aux, left
from .sets import FiniteSet, Interval, IntervalSet, _as_exact

BISECT_TOL = 1e-9
ROOT_TOL = 1e-12
DEFAULT_GRID = 2001
TAIL_LIMIT = 1e12


class NonMonotoneError(ValueError):
    pass


class GridTooCoarseError(RuntimeError):
    pass


class ConfidenceCurve:
    """A curve ``theta -> [0, 1]`` with a stored evaluation grid.

    Parameters
    ----------
    fn : callable
        Scalar evaluator; with ``vectorized=True`` it must also accept arrays.
    grid : array_like
        Evaluation points, sorted.  Values are computed on first use.
    kind : {"exact", "conservative"}
    provenance : {"cd", "im", "fiducial-recalibrated", "fieller", ...}
    domain : tuple
        Closed hull of the parameter space, used when probing beyond the grid.
    discrete : bool
        Integer-valued parameter; level sets are finite sets of grid points.
    """

    def __init__(self, fn: Callable, grid, kind: str = "exact", provenance: str = "cd",
                 domain: tuple = (-math.inf, math.inf), discrete: bool = False,
                 vectorized: bool = False, meta: dict | None = None):
        if kind not in ("exact", "conservative"):
            raise ValueError(f"unknown kind {kind!r}")
        self.fn = fn
        self.grid = np.asarray(sorted(grid), dtype=int if discrete else float)
        self.kind = kind
        self.provenance = provenance
        self.domain = tuple(domain)
        self.discrete = discrete
        self.vectorized = vectorized
        self.meta = dict(meta or {})
        self._values = None

    def __call__(self, theta):
        if np.ndim(theta) == 0:
            return float(self.fn(theta))
        theta = np.asarray(theta)
        if self.vectorized:
            return np.asarray(self.fn(theta), dtype=float)
        return np.array([float(self.fn(t)) for t in theta.ravel()]).reshape(theta.shape)

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = self(self.grid)
        return self._values

    @property
    def minimizer(self):
        """Grid point with the smallest value (first one on ties)."""
        return self.grid[int(np.argmin(self.values))]

    def with_kind(self, kind: str, provenance: str | None = None) -> "ConfidenceCurve":
        return ConfidenceCurve(self.fn, self.grid, kind, provenance or self.provenance,
                               self.domain, self.discrete, self.vectorized, self.meta)

    def rows(self):
        return list(zip(self.grid.tolist(), self.values.tolist()))


# constructors


def default_grid(window: tuple, n: int = DEFAULT_GRID) -> np.ndarray:
    lo, hi = window
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("a finite grid window is required")
    return np.linspace(lo, hi, n)


def cc_from_cd(H: Callable, grid, domain: tuple = (-math.inf, math.inf),
               vectorized: bool = True, kind: str = "exact") -> ConfidenceCurve:
    """``cc(theta) = 2 |H(theta) - 1/2|`` for a confidence distribution ``H``."""
    grid = np.asarray(grid, dtype=float)
    h = np.asarray(H(grid), dtype=float) if vectorized else np.array([H(t) for t in grid])
    if np.any(np.diff(h) < -1e-12):
        raise NonMonotoneError("H must be non-decreasing on the grid")
    if np.any((h < -1e-12) | (h > 1 + 1e-12)):
        raise NonMonotoneError("H must take values in [0, 1]")

    def fn(t):
        return np.abs(2 * np.asarray(H(t), dtype=float) - 1)

    return ConfidenceCurve(fn, grid, kind, "cd", domain, vectorized=vectorized)


def _admissible(model: Model) -> IntervalSet:
    region = model.param_space if model.param_space is not None else IntervalSet.real_line()
    return region.intersection(IntervalSet.closed(*model.window))


def _domain_of(model: Model) -> tuple:
    b = _admissible(model).bounds
    return (b[0], b[1]) if b else (-math.inf, math.inf)


def _gamma_is_uniform(fam: RandomSet, aux: AuxDistribution) -> bool:
    return check_validity_condition(fam, aux, n_mc=10**4, seed=0).uniform


def cc_from_im(model: Model, y, fam: RandomSet, grid=None, uniform: bool | None = None,
               tol: float = BISECT_TOL) -> ConfidenceCurve:
    """``cc(theta) = inf{alpha : theta in A_alpha}`` for the principle assertions.

    Membership of ``theta`` in ``A_alpha`` is decided on the auxiliary side,
    as membership of ``u_{y, theta}`` in the principle nested set.  The
    curve is ``exact`` when ``gamma(U*)`` is uniform, else ``conservative``;
    pass ``uniform`` to skip the check.
    """
    fam = for_aux(fam, model.aux)
    if uniform is None:
        uniform = _gamma_is_uniform(fam, model.aux)
    kind = "exact" if uniform else "conservative"
    admissible = _admissible(model)
    if model.aux.discrete:
        cands = sorted({1 - g for g in fam.gamma_table()} | {Fraction(0), Fraction(1)})

        def fn(theta):
            try:
                u = aux_for(model, y, theta)
            except NoSolutionError:
                return Fraction(1)
            for c in cands:
                # u enters S_alpha just after alpha = c
                if c < 1 and u in fam.principle_nested_set(c, closed=True):
                    return c
            return Fraction(1)

        if grid is None:
            lo, hi = model.window
            if not (math.isfinite(lo) and math.isfinite(hi)):
                # every reachable parameter value
                grid = sorted({y - u for u in model.aux.support()})
            else:
                grid = range(math.ceil(lo), math.floor(hi) + 1)
        return ConfidenceCurve(fn, grid, kind, "im", _domain_of(model), discrete=True,
                               meta={"randomset": fam.name})

    def fn(theta):
        if not admissible.contains(theta):
            return 1.0
        try:
            p = float(model.aux.cdf(aux_for(model, y, theta)))
        except NoSolutionError:
            return 1.0

        def inside(alpha):
            return fam.principle_nested_set(alpha).contains(p)

        if inside(tol):
            return 0.0
        if not inside(1.0):
            return 1.0
        lo, hi = 0.0, 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if inside(mid):
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    if grid is None:
        grid = default_grid(model.window)
    return ConfidenceCurve(fn, grid, kind, "im", _domain_of(model),
                           meta={"randomset": fam.name})


def recalibrate_exact(cc: ConfidenceCurve, model: Model, y, fam: RandomSet, n: int = 10**5,
                      seed: int | None = None, method: str = "auto") -> ConfidenceCurve:
    """Replace each level by the fiducial probability of its principle assertion.

    ``theta`` belongs to ``A_alpha`` exactly for ``alpha > cc(theta)``, so
    the recalibrated value is ``fid_y`` of the right limit ``A_{cc(theta)+}``.
    """
    from .engine import principle_assertion
    from .fiducial import fid_probability, sample_gfd

    if not model.exact_solutions:
        raise ValueError("recalibration needs a model whose association is always solvable")
    fam = for_aux(fam, model.aux)
    exact_fid = model.aux.discrete or (model.theta_map is not None and model.window_is_full)
    if method == "auto":
        method = "exact" if exact_fid else "monte-carlo"
    if method == "exact":
        def fid(S):
            return fid_probability(model, y, S, method="exact").estimate
    else:
        if seed is None:
            raise ValueError("Monte Carlo recalibration needs an explicit seed")
        draws = sample_gfd(model, y, n, 0.0, seed).draws

        def fid(S):
            return float(np.mean(S.contains_array(draws)))

    def fn(theta):
        level = cc.fn(theta)
        if level >= 1:
            return level
        return fid(principle_assertion(model, y, fam, level, closed=True))

    return ConfidenceCurve(fn, cc.grid, "exact", "fiducial-recalibrated", cc.domain,
                           cc.discrete, meta={**cc.meta, "method": method})


def fieller_cc(x: float, y: float, grid=None, window: tuple = (-10.0, 10.0)) -> ConfidenceCurve:
    """Curve for the ratio ``rho = mu_x / mu_y`` from the pivot
    ``(X - rho Y) / sqrt(1 + rho^2) ~ N(0, 1)``."""
    x, y = float(x), float(y)

    def fn(rho):
        rho = np.asarray(rho, dtype=float)
        with np.errstate(invalid="ignore"):
            stat = np.abs(x - rho * y) / np.sqrt(1 + rho * rho)
        # the statistic tends to |y| as rho -> +-inf
        stat = np.where(np.isinf(rho), abs(y), stat)
        return 2 * special.ndtr(stat) - 1

    if grid is None:
        grid = default_grid(window)
    return ConfidenceCurve(fn, grid, "exact", "fieller", vectorized=True,
                           meta={"x": x, "y": y})


def fieller_thresholds(x: float, y: float) -> dict:
    """Levels at which the Fieller set changes shape.

    Below ``unbounded`` the set is a bounded interval; from there on it is
    unbounded (the complement of an interval); from ``whole_line`` on it is
    every real number.  The statistic peaks at ``sqrt(x^2 + y^2)``.
    """
    return {
        "unbounded": float(2 * special.ndtr(abs(y)) - 1),
        "whole_line": float(2 * special.ndtr(math.hypot(x, y)) - 1),
    }


def normal_mean_cc(obs: float, grid=None, window: tuple = (-10.0, 10.0)) -> ConfidenceCurve:
    """Curve for a unit-variance normal mean from the distribution ``N(obs, 1)``."""
    if grid is None:
        grid = default_grid(window)
    return cc_from_cd(lambda t: special.ndtr(np.asarray(t, dtype=float) - obs), grid)


def im_from_cc(cc: ConfidenceCurve) -> tuple[Model, IntervalRandomSet]:
    """An IM reproducing ``cc``: association ``cc(theta) - u`` with ``S = [0, U*]``."""
    if cc.kind != "exact":
        # the conservative case needs an unknown eta(u) <= u in place of u
        raise ValueError("only exact curves embed with eta equal to the identity")
    lo, hi = cc.domain
    model = Model(
        name=f"cc-im:{cc.provenance}",
        param_dim=1,
        aux=AuxDistribution("uniform01"),
        association=lambda y, theta, u: cc.fn(theta) - u,
        aux_solver=lambda y, theta: float(cc.fn(theta)),
        window=(lo, hi),
        discrete_param=cc.discrete,
        meta={"window_is_space": True, "curve": cc},
    )
    return model, left()


# reading curves


def _inf_over(cc: ConfidenceCurve, C) -> float:
    """Infimum of ``cc`` over ``C`` intersected with the curve's domain."""
    if cc.discrete:
        pts = [t for t in cc.grid.tolist() if C.contains(t)]
        return min((cc.fn(t) for t in pts), default=1)
    C = _as_exact(C).intersection(IntervalSet.closed(*cc.domain))
    best = math.inf
    g = cc.grid
    for iv in C:
        lo, hi = float(iv.lo), float(iv.hi)
        cands = [t for t in (lo, hi) if math.isfinite(t)]
        cands += [t for t, inf in ((-TAIL_LIMIT, lo == -math.inf), (TAIL_LIMIT, hi == math.inf)) if inf]
        inner = g[(g > lo) & (g < hi)]
        cands = np.concatenate([np.asarray(cands, dtype=float), inner])
        vals = cc(cands)
        i = int(np.argmin(vals))
        best = min(best, float(vals[i]))
        if len(inner):
            # polish around the best grid point
            j = int(np.searchsorted(g, cands[i]))
            a = max(lo, g[max(j - 1, 0)]) if math.isfinite(lo) else g[max(j - 1, 0)]
            b = min(hi, g[min(j + 1, len(g) - 1)]) if math.isfinite(hi) else g[min(j + 1, len(g) - 1)]
            if b > a:
                best = min(best, _golden_min(cc, a, b))
    return best if math.isfinite(best) else 1.0


def _golden_min(cc: ConfidenceCurve, a: float, b: float) -> float:
    # golden-section search down to float spacing; curves often have a kink
    # at the minimiser, where derivative-based polishing stalls
    ratio = (math.sqrt(5) - 1) / 2
    c, d = b - ratio * (b - a), a + ratio * (b - a)
    fc, fd = float(cc(c)), float(cc(d))
    best = min(fc, fd)
    for _ in range(200):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = float(cc(c))
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = float(cc(d))
        best = min(best, fc, fd)
        if not (a < c < d < b):
            break
    return best


def _complement(cc: ConfidenceCurve, A):
    A = _as_exact(A)
    if cc.discrete:
        return FiniteSet([t for t in cc.grid.tolist() if not A.contains(t)])
    return A.complement()


def cc_belief(cc: ConfidenceCurve, A) -> float:
    """``sup{alpha : {cc <= alpha} subset of A}``, i.e. ``inf`` of ``cc`` off ``A``."""
    return _inf_over(cc, _complement(cc, A))


def cc_plausibility(cc: ConfidenceCurve, A) -> float:
    """``1 - cc_belief(complement of A) = 1 - inf`` of ``cc`` over ``A``."""
    return 1 - _inf_over(cc, _as_exact(A))


def _crossing(cc: ConfidenceCurve, a: float, b: float, alpha: float) -> float:
    f = lambda t: cc(t) - alpha  # noqa: E731
    fa, fb = f(a), f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if fa * fb > 0:
        raise GridTooCoarseError(f"no sign change of cc - {alpha} on [{a}, {b}]")
    return optimize.brentq(f, a, b, xtol=ROOT_TOL, rtol=4 * np.finfo(float).eps, maxiter=500)


def _probe(cc: ConfidenceCurve, start: float, direction: int, alpha: float):
    """Walk outward from a grid edge until the curve exceeds ``alpha``.

    Returns ``(outside, last_inside)`` or ``(None, None)`` if the level set
    runs to the edge of the domain.
    """
    edge = cc.domain[0] if direction < 0 else cc.domain[1]
    prev = start
    step = max(1.0, abs(cc.grid[-1] - cc.grid[0]) / 8)
    while True:
        nxt = prev + direction * step
        if (direction < 0 and nxt <= edge) or (direction > 0 and nxt >= edge):
            if math.isfinite(edge) and cc(edge) > alpha:
                return edge, prev
            return None, None
        if abs(nxt) > TAIL_LIMIT:
            return None, None
        if cc(nxt) > alpha:
            return nxt, prev
        prev, step = nxt, step * 2


def confidence_set(cc: ConfidenceCurve, alpha: float):
    """``{theta : cc(theta) <= alpha}`` as an interval union (or finite set)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    g, v = cc.grid, cc.values
    mask = v <= alpha
    if cc.discrete:
        return FiniteSet(g[mask].tolist())
    pieces = []
    i, n = 0, len(g)
    while i < n:
        if not mask[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and mask[j + 1]:
            j += 1
        if i > 0:
            lo, lo_closed = _crossing(cc, g[i - 1], g[i], alpha), True
        else:
            out, last = _probe(cc, g[0], -1, alpha)
            if out is None:
                lo, lo_closed = cc.domain[0], math.isfinite(cc.domain[0])
            else:
                lo, lo_closed = _crossing(cc, out, last, alpha), True
        if j < n - 1:
            hi, hi_closed = _crossing(cc, g[j], g[j + 1], alpha), True
        else:
            out, last = _probe(cc, g[-1], 1, alpha)
            if out is None:
                hi, hi_closed = cc.domain[1], math.isfinite(cc.domain[1])
            else:
                hi, hi_closed = _crossing(cc, last, out, alpha), True
        pieces.append(Interval(float(lo), float(hi), lo_closed, hi_closed))
        i = j + 1
    return IntervalSet(pieces)


def level_sets(cc: ConfidenceCurve, alphas: Iterable[float]) -> dict:
    return {float(a): confidence_set(cc, a) for a in alphas}


def sup_curve(cc: ConfidenceCurve) -> float:
    """Supremum of the curve over its domain (grid plus tails, refined)."""
    return 1 - _inf_over(
        ConfidenceCurve(lambda t: 1 - cc.fn(t), cc.grid, cc.kind, cc.provenance, cc.domain,
                        cc.discrete, cc.vectorized),
        IntervalSet.real_line() if not cc.discrete else FiniteSet(cc.grid.tolist()),
    )
