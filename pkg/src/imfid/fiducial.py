"""Generalized fiducial sampling.

A proposal ``u`` from the auxiliary distribution is mapped to the
pseudo-solution ``Q_y(u) = argmin_theta ||a(y, theta, u)||`` and kept when
the attained residual is at most ``epsilon``.  With ``epsilon = 0`` and an
association that is always solvable, every proposal is kept and the draws
follow the generalized fiducial distribution exactly.

When ``argmin`` is not unique the ``tie_rule`` picks one minimiser;
different rules give different versions of the distribution, so the rule
is recorded in every :class:`FiducialSample`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import optimize

from .model import SOLVER_TOL, Model, NumericSolverError, solve_theta
from .randomset import DiscreteRandomSet
from .sets import FiniteSet, IntervalSet, PredicateSet, _as_exact
from .streams import BLOCK, run_blocks

ACCEPT_FLOOR = 1e-4
GRID_POINTS = 2001


class OptimizerError(RuntimeError):
    pass


class AcceptanceTooLowError(RuntimeError):
    pass


TieRule = str | Callable


def tie_rule_name(rule: TieRule) -> str:
    return rule if isinstance(rule, str) else getattr(rule, "rule_name", getattr(rule, "__name__", "custom"))


def _pick(cands: list, rule: TieRule):
    if not cands:
        raise ValueError("no candidates")
    if rule == "leftmost":
        return min(cands)
    if rule == "rightmost":
        return max(cands)
    if callable(rule):
        return rule(sorted(cands))
    raise ValueError(f"unknown tie rule {rule!r}")


def prefer_outside(A) -> Callable:
    """Tie rule choosing a minimiser outside ``A`` whenever one exists."""
    A = _as_exact(A)

    def rule(cands):
        out = [c for c in cands if not A.contains(c)]
        return min(out) if out else min(cands)

    rule.rule_name = f"prefer-outside:{A}"
    return rule


def _solution_points(sols) -> list:
    if isinstance(sols, FiniteSet):
        return list(sols.points)
    pts = []
    for iv in sols:
        # a solution interval contributes its closure's finite ends
        pts.extend(e for e in (iv.lo, iv.hi) if math.isfinite(e))
    return pts


def _to_window(s, lo, hi):
    """Map ``s`` in a bounded box onto the (possibly infinite) window."""
    if math.isfinite(lo) and math.isfinite(hi):
        return s
    if math.isfinite(lo):
        return lo + s / (1 - s)
    if math.isfinite(hi):
        return hi - s / (1 - s)
    return s / (1 - s * s)


def _search_box(lo, hi):
    if math.isfinite(lo) and math.isfinite(hi):
        return lo, hi
    if math.isfinite(lo) or math.isfinite(hi):
        return 0.0, 1.0 - 1e-9
    return -1.0 + 1e-9, 1.0 - 1e-9


def pseudo_solve(model: Model, y, u, norm: str = "l2", tie_rule: TieRule = "leftmost",
                 window: tuple | None = None):
    """``Q_y(u)``: a minimiser of the association residual over the window."""
    lo, hi = window if window is not None else model.window
    box = IntervalSet.closed(lo, hi)
    exact = None
    if model.theta_solver is not None:
        sols = solve_theta(model, y, u)
        if model.param_dim == 1:
            sols = sols.intersection(box)
        exact = _solution_points(sols)
    elif model.param_dim == 1 and math.isfinite(lo) and math.isfinite(hi):
        exact = _solution_points(solve_theta(model, y, u))
    if exact:
        return _pick(exact, tie_rule)

    if model.param_dim == 2:
        return _minimise_2d(model, y, u, norm)
    if model.discrete_param:
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise OptimizerError("integer parameters need a finite window")
        pts = list(range(math.ceil(lo), math.floor(hi) + 1))
        res = np.array([model.residual(y, t, u, norm) for t in pts])
        best = res.min()
        return _pick([t for t, r in zip(pts, res) if r <= best + SOLVER_TOL], tie_rule)
    return _minimise_1d(model, y, u, norm, tie_rule, lo, hi)


def _minimise_1d(model, y, u, norm, tie_rule, lo, hi):
    a, b = _search_box(lo, hi)
    s = np.linspace(a, b, GRID_POINTS)
    thetas = np.array([_to_window(x, lo, hi) for x in s])
    with np.errstate(all="ignore"):
        res = _grid_residuals(model, y, thetas, u)
    res = np.where(np.isfinite(res), res, np.inf)
    if not np.isfinite(res).any():
        raise OptimizerError("residual is not finite anywhere on the window")
    best = res.min()
    ties = np.flatnonzero(res <= best + 1e-12)
    i = int(_pick(list(ties), tie_rule if isinstance(tie_rule, str) else "leftmost"))
    f = lambda x: model.residual(y, _to_window(x, lo, hi), u, norm)  # noqa: E731
    left, right = s[max(i - 1, 0)], s[min(i + 1, len(s) - 1)]
    theta, val = thetas[i], res[i]
    if right > left:
        r = optimize.minimize_scalar(f, bounds=(left, right), method="bounded",
                                     options={"xatol": 1e-12})
        if not r.success:
            raise OptimizerError(r.message)
        if r.fun <= val:
            theta, val = _to_window(r.x, lo, hi), r.fun
    # a boundary minimiser sits exactly on the window edge
    for edge in (lo, hi):
        if math.isfinite(edge):
            v = model.residual(y, edge, u, norm)
            if v <= val + 1e-12:
                theta, val = edge, v
    return float(theta)


def _grid_residuals(model, y, thetas, u) -> np.ndarray:
    # scalar residual, so both norms reduce to the absolute value
    try:
        res = np.abs(np.asarray(model.association(y, thetas, u), dtype=float))
        if res.shape == thetas.shape:
            return res
    except (TypeError, ValueError):
        pass
    return np.array([abs(float(model.association(y, t, u))) for t in thetas])


def _minimise_2d(model, y, u, norm):
    f = lambda t: model.residual(y, t, u, norm)  # noqa: E731
    r = optimize.minimize(f, x0=np.zeros(2), method="Nelder-Mead",
                          options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
    if not r.success:
        raise OptimizerError(r.message)
    return tuple(float(v) for v in r.x)


@dataclass
class FiducialSample:
    draws: np.ndarray
    epsilon: float
    acceptance_rate: float
    tie_rule: str
    n_proposals: int
    seed: int
    norm: str = "l2"
    meta: dict = field(default_factory=dict)

    def header(self) -> dict:
        return {
            "seed": self.seed,
            "epsilon": self.epsilon,
            "acceptance_rate": self.acceptance_rate,
            "tie_rule": self.tie_rule,
            "norm": self.norm,
            "n_proposals": self.n_proposals,
            "n": int(len(self.draws)),
        }


def _vector_path(model: Model) -> bool:
    if model.theta_map is None or model.param_dim != 1 or model.aux.discrete:
        return False
    return model.window_is_full or model.residual_unimodal


def _block_fn(model: Model, y, epsilon, norm, tie_rule, window):
    tol = max(epsilon, SOLVER_TOL)
    lo, hi = window
    if _vector_path(model):
        clip = not (model.window_is_full and tuple(window) == tuple(model.window))

        def block(rng, size):
            u = model.aux.sample(rng, size)
            with np.errstate(divide="ignore", invalid="ignore"):
                q = np.asarray(model.theta_map(y, u), dtype=float)
                if clip:
                    # a unimodal residual is minimised at the clipped solution
                    q = np.clip(q, lo, hi)
                res = np.abs(np.asarray(model.association(y, q, u), dtype=float))
            keep = np.isfinite(q) & (res <= tol)
            return q[keep]
        return block

    def block(rng, size):
        out = []
        for _ in range(size):
            u = model.aux.sample(rng)
            q = pseudo_solve(model, y, u, norm, tie_rule, window)
            if model.residual(y, q, u, norm) <= tol:
                out.append(q)
        if model.param_dim == 2:
            return np.array(out, dtype=float).reshape(len(out), 2)
        return np.array(out, dtype=int if model.discrete_param else float)
    return block


def sample_gfd(model: Model, y, n: int, epsilon: float = 0.0, seed: int = 0,
               norm: str = "l2", tie_rule: TieRule = "leftmost", window: tuple | None = None,
               accept_floor: float = ACCEPT_FLOOR, workers: int = 1) -> FiducialSample:
    """Draw ``n`` values of ``theta*`` by epsilon-truncated rejection sampling."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    window = tuple(window) if window is not None else model.window
    block = _block_fn(model, y, epsilon, norm, tie_rule, window)
    kept, proposals, offset = [], 0, 0
    n_kept = 0
    while n_kept < n:
        # enough blocks for the remaining draws at the observed rate
        rate = n_kept / proposals if proposals else 1.0
        need = (n - n_kept) / max(rate, accept_floor)
        n_blocks = min(64, max(workers, math.ceil(need / BLOCK)))
        sizes = [BLOCK] * n_blocks
        parts = run_blocks(block, seed, sizes, workers, offset)
        offset += len(sizes)
        for size, part in zip(sizes, parts):
            if n_kept >= n:
                break
            kept.append(part)
            n_kept += len(part)
            proposals += size
        if proposals >= 10 * BLOCK and n_kept / proposals < accept_floor:
            raise AcceptanceTooLowError(
                f"acceptance rate {n_kept / proposals:.2e} below floor {accept_floor:g}"
            )
    draws = np.concatenate(kept)[:n]
    return FiducialSample(draws, float(epsilon), n_kept / proposals, tie_rule_name(tie_rule),
                          proposals, seed, norm)


@dataclass
class FidEstimate:
    estimate: float | Fraction
    se: float
    method: str
    n: int = 0
    acceptance_rate: float | Fraction = 1.0

    def __float__(self):
        return float(self.estimate)


def fid_probability(model: Model, y, A, n: int = 10**5, epsilon: float = 0.0,
                    seed: int | None = None, method: str = "auto", norm: str = "l2",
                    tie_rule: TieRule = "leftmost", window: tuple | None = None,
                    workers: int = 1) -> FidEstimate:
    """``fid_y(A) = P(theta* in A)``; exact for discrete auxiliaries."""
    if method == "auto":
        if model.aux.discrete:
            method = "exact"
        elif _vector_path(model) and model.window_is_full and epsilon == 0 \
                and not isinstance(A, PredicateSet) and window is None:
            method = "exact"
        else:
            method = "monte-carlo"
    if method == "exact":
        if model.aux.discrete:
            return _fid_enumerate(model, y, A, epsilon, norm, tie_rule, window)
        from .engine import preimage

        # theta* = theta(U) with U uniform on the probability scale
        p = preimage(model, y, _as_exact(A)).measure()
        return FidEstimate(min(1.0, max(0.0, float(p))), 0.0, "exact")
    if seed is None:
        raise ValueError("Monte Carlo fiducial probability needs an explicit seed")
    s = sample_gfd(model, y, n, epsilon, seed, norm, tie_rule, window, workers=workers)
    hits = A.contains_array(s.draws)
    est = float(np.mean(hits))
    return FidEstimate(est, math.sqrt(est * (1 - est) / n), "monte-carlo", n, s.acceptance_rate)


def _fid_enumerate(model, y, A, epsilon, norm, tie_rule, window) -> FidEstimate:
    tol = max(epsilon, SOLVER_TOL)
    hit = kept = Fraction(0)
    for u in model.aux.support():
        q = pseudo_solve(model, y, u, norm, tie_rule, window)
        if model.residual(y, q, u, norm) > tol:
            continue
        w = model.aux.pmf(u)
        kept += w
        if A.contains(q):
            hit += w
    if kept == 0:
        raise AcceptanceTooLowError("no auxiliary value is accepted")
    return FidEstimate(hit / kept, 0.0, "exact", acceptance_rate=kept)


def fid_distribution(model: Model, y, norm: str = "l2", tie_rule: TieRule = "leftmost",
                     window: tuple | None = None) -> dict:
    """Exact fiducial masses ``{theta: P(theta* = theta)}`` for a discrete auxiliary."""
    if not model.aux.discrete:
        raise ValueError("exact fiducial masses need a discrete auxiliary variable")
    out: dict = {}
    for u in model.aux.support():
        q = pseudo_solve(model, y, u, norm, tie_rule, window)
        if model.residual(y, q, u, norm) <= SOLVER_TOL:
            out[q] = out.get(q, Fraction(0)) + model.aux.pmf(u)
    total = sum(out.values())
    return {k: v / total for k, v in sorted(out.items())}


def matching_randomset(model: Model, y, A) -> DiscreteRandomSet:
    """Nested random set whose belief of ``A`` at ``y`` equals ``fid_y(A)``.

    Auxiliary values whose whole solution set lies in ``A`` come first, the
    other solvable values next, each adding one atom of equal probability;
    unsolvable values join the largest atom.  The matching fiducial version
    uses :func:`prefer_outside`.
    """
    if not model.aux.discrete:
        raise ValueError("the matching construction needs a discrete auxiliary variable")
    A = _as_exact(A)
    solvable, unsolvable = [], []
    for u in model.aux.support():
        sols = solve_theta(model, y, u)
        (solvable if not sols.is_empty() else unsolvable).append((u, sols))
    if not solvable:
        raise NumericSolverError("no auxiliary value solves the association at this y")
    inside = [u for u, s in solvable if s.issubset(A)]
    rest = [u for u, s in solvable if not s.issubset(A)]
    order = inside + rest
    m = len(order)
    atoms = []
    for j in range(1, m + 1):
        members = set(order[:j])
        if j == m:
            members.update(u for u, _ in unsolvable)
        atoms.append((Fraction(1, m), members))
    return DiscreteRandomSet(model.aux.n_atoms, atoms, name=f"matching:{A}")
