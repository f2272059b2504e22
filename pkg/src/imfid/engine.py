"""Combining a random set with the association.

Belief and plausibility of an assertion ``A`` are conditional probabilities
over the random parameter set ``Theta_y(S)`` given that it is non-empty.

Continuous scalar models with a monotone solution map are handled on the
probability scale of the auxiliary variable: ``Theta_y(S)`` lies inside
``A`` exactly when ``S`` (restricted to the preimage ``M`` of the admissible
parameter region) lies inside the preimage ``B`` of ``A``.  Three routes
are available:

* enumeration over atoms for discrete random sets (exact, rational);
* integration over ``U*`` for continuous families, either by splitting
  ``[0, 1]`` at the crossing points of the family (interval families) or
  through the supremum of the containment function over ``M \\ B``
  (nested families built from ``gamma``);
* Monte Carlo over ``U*`` with binomial standard errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import optimize

from .model import Model, NoSolutionError, aux_for, solve_theta
from .randomset import (
    DiscreteRandomSet,
    GammaRandomSet,
    IntervalRandomSet,
    RandomSet,
    for_aux,
)
from .sets import FiniteSet, Interval, IntervalSet, PredicateSet, _as_exact
from .streams import BLOCK, block_sizes, run_blocks

BISECT_TOL = 1e-9
OPEN_UNIT = IntervalSet.open(0.0, 1.0)


class AllEmptyError(RuntimeError):
    """Every realisation of ``Theta_y(S)`` was empty; belief is undefined."""


class UnsupportedModelError(ValueError):
    pass


@dataclass
class BeliefReport:
    belief: float | Fraction
    plausibility: float | Fraction
    se_belief: float = 0.0
    se_plausibility: float = 0.0
    n_empty: int = 0
    method: str = "exact"
    n_mc: int = 0
    p_empty: float | Fraction = 0

    def to_dict(self) -> dict:
        return {
            "belief": float(self.belief),
            "plausibility": float(self.plausibility),
            "se_belief": self.se_belief,
            "se_plausibility": self.se_plausibility,
            "n_empty": self.n_empty,
            "p_empty": float(self.p_empty),
            "method": self.method,
            "n_mc": self.n_mc,
        }


# parameter images


def _admissible(model: Model) -> IntervalSet:
    region = model.param_space if model.param_space is not None else IntervalSet.real_line()
    lo, hi = model.window
    return region.intersection(IntervalSet.closed(lo, hi))


def _check_scalar_continuous(model: Model):
    if model.param_dim != 1 or not model.scalar_aux:
        raise UnsupportedModelError(f"{model.name}: belief needs a scalar parameter and auxiliary")
    if model.theta_map is None:
        raise UnsupportedModelError(
            f"{model.name}: exact parameter images need a monotone solution map"
        )


def _theta_of_p(model: Model, y, p):
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(model.theta_of_p(y, float(p)))


def theta_image(model: Model, y, S):
    """``Theta_y(S)``, the union of the solution sets over ``S``.

    ``S`` is a finite set of auxiliary points for discrete models and an
    interval union on the probability scale ``[0, 1]`` otherwise.
    """
    if model.aux.discrete:
        out = set()
        for u in S:
            out.update(solve_theta(model, y, u))
        return FiniteSet(out)
    _check_scalar_continuous(model)
    inner = S.intersection(OPEN_UNIT)
    if inner.is_empty():
        return IntervalSet.empty()
    image = inner.map_monotone(lambda p: _theta_of_p(model, y, p),
                               increasing=_map_increasing(model, y))
    return image.intersection(_admissible(model))


def _map_increasing(model: Model, y) -> bool:
    # direction of p -> theta on the probability scale
    a, b = _theta_of_p(model, y, 0.25), _theta_of_p(model, y, 0.75)
    return b > a


def _p_of_theta(model: Model, y, t, increasing: bool) -> float:
    t0, t1 = _theta_of_p(model, y, 0.0), _theta_of_p(model, y, 1.0)
    lo_t, hi_t = min(t0, t1), max(t0, t1)
    if t <= lo_t:
        return 0.0 if increasing else 1.0
    if t >= hi_t:
        return 1.0 if increasing else 0.0
    return float(model.aux.cdf(aux_for(model, y, t)))


def preimage(model: Model, y, A: IntervalSet) -> IntervalSet:
    """``{p : Theta_y(p) in A}`` on the probability scale, within ``(0, 1)``."""
    _check_scalar_continuous(model)
    A = A.intersection(_admissible(model))
    inc = _map_increasing(model, y)
    out = A.map_monotone(lambda t: _p_of_theta(model, y, t, inc), increasing=inc)
    return out.intersection(OPEN_UNIT)


def realize_theta_set(model: Model, y, fam: RandomSet, rng: np.random.Generator):
    """Draw ``S`` from ``fam`` and return ``Theta_y(S)``."""
    fam = for_aux(fam, model.aux)
    return theta_image(model, y, fam.draw(rng))


# belief


def _exact_supported(model: Model, fam: RandomSet) -> bool:
    if fam.discrete or model.aux.discrete:
        return True
    return isinstance(fam, (IntervalRandomSet, GammaRandomSet)) and model.theta_map is not None


def belief(model: Model, y, fam: RandomSet, A, n_mc: int = 10**4, method: str = "auto",
           seed: int | None = None, workers: int = 1) -> BeliefReport:
    """Belief and plausibility of ``A`` given data ``y``."""
    fam = for_aux(fam, model.aux)
    if method == "auto":
        method = "exact" if _exact_supported(model, fam) and not isinstance(A, PredicateSet) \
            else "monte-carlo"
    if method == "exact":
        if fam.discrete:
            return _belief_discrete(model, y, fam, A)
        if isinstance(fam, IntervalRandomSet):
            return _belief_crossings(model, y, fam, A)
        if isinstance(fam, GammaRandomSet):
            return _belief_sup_gamma(model, y, fam, A)
        raise UnsupportedModelError(f"no exact route for {fam!r}")
    if method != "monte-carlo":
        raise ValueError(f"unknown method {method!r}")
    if n_mc < 10**4:
        raise ValueError("n_mc must be at least 10^4")
    if seed is None:
        raise ValueError("Monte Carlo belief needs an explicit seed")
    return _belief_mc(model, y, fam, A, n_mc, seed, workers)


def _belief_discrete(model, y, fam: DiscreteRandomSet, A) -> BeliefReport:
    inside = hits = empty = Fraction(0)
    for p, s in fam.atoms:
        T = theta_image(model, y, s)
        if T.is_empty():
            empty += p
            continue
        if T.issubset(A):
            inside += p
        if not T.isdisjoint(A):
            hits += p
    if empty == 1:
        raise AllEmptyError("every realisation of Theta_y(S) is empty")
    norm = 1 - empty
    return BeliefReport(inside / norm, hits / norm, method="exact", p_empty=empty)


def _assertion_regions(model, y, A):
    A = _as_exact(A)
    if not isinstance(A, IntervalSet):
        raise UnsupportedModelError("continuous models need interval-union assertions")
    M = preimage(model, y, IntervalSet.real_line())
    B = preimage(model, y, A)
    return M, B


def _belief_crossings(model, y, fam: IntervalRandomSet, A) -> BeliefReport:
    M, B = _assertion_regions(model, y, A)
    points = {0.0, 1.0}
    for s in (M, B):
        points.update(float(e) for e in s.endpoints() if math.isfinite(e))
    cuts = sorted({0.0, 1.0} | {float(c) for c in fam.crossings(sorted(points))})
    outside = M.difference(B)
    inside = hits = nonempty = 0.0
    for a0, a1 in zip(cuts, cuts[1:]):
        if a1 <= a0:
            continue
        S = fam.raw(0.5 * (a0 + a1))
        w = a1 - a0
        if S.isdisjoint(M):
            continue
        nonempty += w
        if S.isdisjoint(outside):
            inside += w
        if not S.isdisjoint(B):
            hits += w
    if nonempty <= 0:
        raise AllEmptyError("every realisation of Theta_y(S) is empty")
    return BeliefReport(_clip(inside / nonempty), _clip(hits / nonempty),
                        method="exact", p_empty=1 - nonempty)


def _clip(x: float) -> float:
    return min(1.0, max(0.0, x))


def sup_gamma(fam: GammaRandomSet, C: IntervalSet) -> float:
    """Supremum of a continuous containment function over ``C`` in [0, 1]."""
    C = C.intersection(IntervalSet.closed(0.0, 1.0))
    best = 0.0
    grid = fam._grid
    knots = np.asarray(fam.knots[0]) if fam.knots is not None else np.empty(0)
    for iv in C:
        lo, hi = float(iv.lo), float(iv.hi)
        inner = grid[(grid > lo) & (grid < hi)]
        cands = np.concatenate([[lo, hi], inner, knots[(knots > lo) & (knots < hi)]])
        vals = np.asarray(fam.gamma(cands), dtype=float)
        i = int(np.argmax(vals))
        best = max(best, float(vals[i]))
        if fam.knots is None and hi > lo:
            # polish the best grid point; piecewise-linear tables peak on knots
            x = cands[i]
            a, b = max(lo, x - fam.resolution), min(hi, x + fam.resolution)
            if b > a:
                r = optimize.minimize_scalar(lambda t: -float(fam.gamma(t)), bounds=(a, b),
                                             method="bounded", options={"xatol": 1e-12})
                best = max(best, -float(r.fun))
    return best


def _belief_sup_gamma(model, y, fam: GammaRandomSet, A) -> BeliefReport:
    # S_a meets C exactly when a > 1 - sup_C gamma
    M, B = _assertion_regions(model, y, A)
    p_nonempty = sup_gamma(fam, M)
    if p_nonempty <= 0:
        raise AllEmptyError("every realisation of Theta_y(S) is empty")
    p_inside = max(0.0, p_nonempty - sup_gamma(fam, M.difference(B)))
    p_hits = sup_gamma(fam, B)
    return BeliefReport(_clip(p_inside / p_nonempty), _clip(p_hits / p_nonempty),
                        method="exact", p_empty=1 - p_nonempty)


def _overlap(lo, hi, lc, hc, iv: Interval) -> np.ndarray:
    """Vectorised test that each interval ``(lo, hi)`` meets ``iv``."""
    ilo, ihi = float(iv.lo), float(iv.hi)
    left = np.maximum(lo, ilo)
    right = np.minimum(hi, ihi)
    left_closed = np.where(lo > ilo, lc, np.where(lo < ilo, iv.lo_closed, lc & iv.lo_closed))
    right_closed = np.where(hi < ihi, hc, np.where(hi > ihi, iv.hi_closed, hc & iv.hi_closed))
    return (left < right) | ((left == right) & left_closed & right_closed)


def _meets(bounds, C: IntervalSet) -> np.ndarray:
    lo, hi, lc, hc = (np.asarray(b) for b in bounds)
    lc, hc = lc.astype(bool) & np.ones_like(lo, bool), hc.astype(bool) & np.ones_like(lo, bool)
    out = np.zeros(lo.shape, dtype=bool)
    for iv in C:
        out |= _overlap(lo, hi, lc, hc, iv)
    return out


def _belief_mc(model, y, fam, A, n_mc, seed, workers) -> BeliefReport:
    if fam.discrete:
        def block(rng, size):
            k_in = k_hit = k_empty = 0
            for a in rng.random(size):
                T = theta_image(model, y, fam.raw(a))
                if T.is_empty():
                    k_empty += 1
                    continue
                k_in += T.issubset(A)
                k_hit += not T.isdisjoint(A)
            return k_in, k_hit, k_empty
    else:
        _check_scalar_continuous(model)
        M = preimage(model, y, IntervalSet.real_line())
        if isinstance(A, PredicateSet):
            def block(rng, size):
                k_in = k_hit = k_empty = 0
                for a in rng.random(size):
                    T = theta_image(model, y, fam.raw(a))
                    if T.is_empty():
                        k_empty += 1
                        continue
                    # a predicate can only be probed pointwise: use the endpoints
                    pts = [e for e in T.endpoints() if math.isfinite(e)]
                    k_in += all(A.contains(t) for t in pts) and T.is_bounded()
                    k_hit += any(A.contains(t) for t in pts)
                return k_in, k_hit, k_empty
        else:
            B = preimage(model, y, _as_exact(A))
            outside = M.difference(B)
            vectorised = isinstance(fam, IntervalRandomSet)

            def block(rng, size):
                a = rng.random(size)
                if vectorised:
                    bnds = fam.bounds(a)
                    nonempty = _meets(bnds, M)
                    ok_in = ~_meets(bnds, outside)
                    ok_hit = _meets(bnds, B)
                else:
                    sets = [fam.raw(x) for x in a]
                    nonempty = np.array([not s.isdisjoint(M) for s in sets])
                    ok_in = np.array([s.isdisjoint(outside) for s in sets])
                    ok_hit = np.array([not s.isdisjoint(B) for s in sets])
                return (int(np.sum(nonempty & ok_in)), int(np.sum(nonempty & ok_hit)),
                        int(np.sum(~nonempty)))

    parts = run_blocks(block, seed, block_sizes(n_mc, BLOCK), workers)
    k_in = sum(p[0] for p in parts)
    k_hit = sum(p[1] for p in parts)
    k_empty = sum(p[2] for p in parts)
    n = n_mc - k_empty
    if n == 0:
        raise AllEmptyError("every realisation of Theta_y(S) was empty")
    bel, pl = k_in / n, k_hit / n
    return BeliefReport(bel, pl, math.sqrt(bel * (1 - bel) / n), math.sqrt(pl * (1 - pl) / n),
                        n_empty=k_empty, method="monte-carlo", n_mc=n_mc,
                        p_empty=k_empty / n_mc)


# curves and principle assertions


def _singleton(model: Model, theta):
    if model.aux.discrete:
        return FiniteSet([theta])
    return IntervalSet.point(float(theta))


def point_plausibility_curve(model: Model, y, fam: RandomSet, grid, method: str = "auto",
                             n_mc: int = 10**4, seed: int | None = None,
                             workers: int = 1, return_se: bool = False):
    """``pl_y({theta})`` for every ``theta`` in ``grid``."""
    fam = for_aux(fam, model.aux)
    grid = list(grid)
    if method == "auto":
        gamma_route = model.scalar_aux and (model.aux_solver is not None
                                            or model.aux.kind == "uniform01")
        method = "exact" if _exact_supported(model, fam) or gamma_route else "monte-carlo"
    if method == "exact":
        if model.aux.discrete or model.theta_map is not None:
            vals = [float(belief(model, y, fam, _singleton(model, t), method="exact").plausibility)
                    for t in grid]
        else:
            # without a solution map: pl({theta}) = gamma(u_theta), assuming
            # Theta_y(S) is never empty
            vals = [_gamma_at(model, y, fam, t) for t in grid]
        vals = np.array(vals, dtype=float)
        return (vals, np.zeros(len(grid))) if return_se else vals
    if method != "monte-carlo":
        raise ValueError(f"unknown method {method!r}")
    if seed is None:
        raise ValueError("Monte Carlo plausibility needs an explicit seed")
    if not isinstance(fam, IntervalRandomSet) or model.aux.discrete:
        reps = [belief(model, y, fam, _singleton(model, t), n_mc=n_mc, method="monte-carlo",
                       seed=seed, workers=workers) for t in grid]
        vals = np.array([r.plausibility for r in reps])
        ses = np.array([r.se_plausibility for r in reps])
        return (vals, ses) if return_se else vals
    # one set of draws serves every grid point
    M = preimage(model, y, IntervalSet.real_line())
    ps = [preimage(model, y, IntervalSet.point(float(t))) for t in grid]

    def block(rng, size):
        bnds = fam.bounds(rng.random(size))
        nonempty = _meets(bnds, M)
        hits = np.array([int(np.sum(nonempty & _meets(bnds, P))) if P else 0 for P in ps])
        return hits, int(np.sum(nonempty))

    parts = run_blocks(block, seed, block_sizes(n_mc, BLOCK), workers)
    n = sum(p[1] for p in parts)
    if n == 0:
        raise AllEmptyError("every realisation of Theta_y(S) was empty")
    vals = sum(p[0] for p in parts) / n
    ses = np.sqrt(vals * (1 - vals) / n)
    return (vals, ses) if return_se else vals


def _gamma_at(model: Model, y, fam: RandomSet, theta) -> float:
    try:
        u = aux_for(model, y, theta)
    except NoSolutionError:
        return 0.0
    return float(fam.gamma(u if model.aux.discrete else float(model.aux.cdf(u))))


def principle_assertion(model: Model, y, fam: RandomSet, alpha, closed: bool = False):
    """``A_alpha = Theta_y(S_alpha)`` for the principle nested set ``S_alpha``."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    fam = for_aux(fam, model.aux)
    return theta_image(model, y, fam.principle_nested_set(alpha, closed))


def belief_via_principle(model: Model, y, fam: RandomSet, A, tol: float = BISECT_TOL):
    """``sup{alpha : A_alpha subset of A}``; exact for discrete random sets."""
    fam = for_aux(fam, model.aux)
    if not fam.nested:
        raise ValueError(f"{fam.name} is not nested; use its nesting() nesting")
    A = _as_exact(A)

    def inside(alpha, closed=False) -> bool:
        return principle_assertion(model, y, fam, alpha, closed).issubset(A)

    if fam.discrete:
        # A_alpha only grows just after alpha = 1 - gamma(u)
        cands = sorted({1 - g for g in fam.gamma_table()} | {Fraction(0), Fraction(1)})
        cands = [c for c in cands if 0 <= c <= 1]
        if not inside(0):
            return Fraction(0)
        for c in cands:
            if c < 1 and not inside(c, closed=True):
                return c
        return Fraction(1)
    if not inside(0):
        return 0.0
    if inside(1):
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
    return lo
