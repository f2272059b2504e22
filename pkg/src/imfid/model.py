"""Statistical models written as association equations ``a(y, theta, u) = 0``.

A :class:`Model` bundles the association with the distribution of the
auxiliary variable, solvers in both directions and a data generating
equation.  Built-in models are addressable by name through
:func:`get_model`.

Random sets always live on the probability scale of the auxiliary
variable: for a continuous auxiliary variable with distribution function
``F`` the set ``S`` of probabilities stands for ``F^{-1}(S)``.  For the
uniform auxiliary variables used by most built-ins the two coincide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import optimize, special

from .sets import FiniteSet, Interval, IntervalSet

SOLVER_TOL = 1e-10


class ModelError(ValueError):
    pass


class NumericSolverError(ModelError):
    """Root bracketing could not isolate the solutions."""


class NoSolutionError(ModelError):
    """No auxiliary value links the given data and parameter."""


@dataclass(frozen=True)
class AuxDistribution:
    """Parameter-free distribution of the auxiliary variable.

    ``kind`` is one of ``"uniform01"``, ``"standard-normal"`` or
    ``"discrete-uniform"`` (on ``{0, ..., n_atoms - 1}``).  ``dim`` > 1 means
    independent copies.
    """

    kind: str
    n_atoms: int | None = None
    dim: int = 1

    def __post_init__(self):
        if self.kind not in ("uniform01", "standard-normal", "discrete-uniform"):
            raise ValueError(f"unknown auxiliary kind {self.kind!r}")
        if self.kind == "discrete-uniform" and (self.n_atoms is None or self.n_atoms < 1):
            raise ValueError("discrete-uniform needs n_atoms >= 1")

    @property
    def discrete(self) -> bool:
        return self.kind == "discrete-uniform"

    def sample(self, rng: np.random.Generator, size=None):
        shape = size if self.dim == 1 else ((size, self.dim) if size is not None else (self.dim,))
        if self.kind == "uniform01":
            return rng.random(shape)
        if self.kind == "standard-normal":
            return rng.standard_normal(shape)
        return rng.integers(0, self.n_atoms, shape)

    def cdf(self, u):
        if self.kind == "uniform01":
            return np.clip(u, 0.0, 1.0)
        if self.kind == "standard-normal":
            return special.ndtr(u)
        return np.clip((np.floor(u) + 1) / self.n_atoms, 0.0, 1.0)

    def quantile(self, p):
        if self.kind == "uniform01":
            return p
        if self.kind == "standard-normal":
            return special.ndtri(p)
        return np.clip(np.ceil(np.asarray(p) * self.n_atoms) - 1, 0, self.n_atoms - 1)

    def in_range(self, u) -> bool:
        u = np.asarray(u)
        if self.kind == "uniform01":
            return bool(np.all((u >= 0) & (u <= 1)))
        if self.kind == "standard-normal":
            return bool(np.all(np.isfinite(u)))
        return bool(np.all((u == np.floor(u)) & (u >= 0) & (u < self.n_atoms)))

    def support(self) -> range:
        if not self.discrete:
            raise ModelError("continuous auxiliary variables have no finite support")
        return range(self.n_atoms)

    def pmf(self, u) -> Fraction:
        return Fraction(1, self.n_atoms) if u in self.support() else Fraction(0)


@dataclass(frozen=True, eq=False)
class Model:
    """An association with its auxiliary distribution.

    ``theta_map(y, u)`` is present for scalar models whose solution set is
    a single point depending strictly monotonically on ``u``; together with
    ``theta_increasing`` it lets set images be computed by mapping
    endpoints.  ``window`` is the declared parameter window for numerical
    work; ``exact_solutions`` records whether ``P(U in M_0) = 1``.
    """

    name: str
    param_dim: int
    aux: AuxDistribution
    association: Callable
    generator: Callable | None = None
    theta_solver: Callable | None = None
    aux_solver: Callable | None = None
    theta_map: Callable | None = None
    theta_increasing: bool = False
    param_space: IntervalSet | None = None
    window: tuple = (-math.inf, math.inf)
    exact_solutions: bool = True
    discrete_param: bool = False
    residual_unimodal: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def scalar_aux(self) -> bool:
        return self.aux.dim == 1

    @property
    def monotone(self) -> bool:
        return self.theta_map is not None and self.window_is_full

    @property
    def window_is_full(self) -> bool:
        return self.window == (-math.inf, math.inf) or self.meta.get("window_is_space", False)

    def residual(self, y, theta, u, norm: str = "l2") -> float:
        r = np.atleast_1d(np.asarray(self.association(y, theta, u), dtype=float))
        if norm == "l2":
            return float(np.sqrt(np.sum(r * r)))
        if norm == "linf":
            return float(np.max(np.abs(r)))
        raise ValueError(f"unknown norm {norm!r}")

    def generate(self, u, theta):
        """Data generating equation ``y = G(u, theta)``."""
        if self.generator is None:
            raise ModelError(f"model {self.name!r} has no data generating equation")
        return self.generator(u, theta)

    # probability-scale helpers for scalar continuous models
    def theta_of_p(self, y, p):
        return self.theta_map(y, self.aux.quantile(p))

    def p_of_theta(self, y, theta):
        return self.aux.cdf(aux_for(self, y, theta))

    def restrict(self, lo: float, hi: float) -> "Model":
        """Same association with the parameter confined to ``[lo, hi]``.

        Exact solutions falling outside the window are discarded, so
        ``P(U in M_0)`` generally drops below one.
        """
        window = (lo, hi)
        box = IntervalSet.closed(lo, hi)
        base_solver = self.theta_solver

        def solver(y, u):
            return base_solver(y, u).intersection(box)

        return replace(
            self,
            name=f"{self.name}[{lo},{hi}]",
            theta_solver=solver if base_solver else None,
            window=window,
            exact_solutions=False,
            meta={**self.meta, "base": self, "window_is_space": False},
        )


def _point(x) -> IntervalSet:
    return IntervalSet.point(float(x)) if math.isfinite(x) else IntervalSet.empty()


# built-in models


def normal_location() -> Model:
    """``Y = theta + Phi^{-1}(U)`` with ``U ~ U(0, 1)``."""

    def association(y, theta, u):
        return y - theta - special.ndtri(u)

    def solver(y, u):
        if not 0.0 < u < 1.0:
            return IntervalSet.empty()
        return _point(y - special.ndtri(u))

    return Model(
        name="normal-location",
        param_dim=1,
        aux=AuxDistribution("uniform01"),
        association=association,
        generator=lambda u, theta: theta + special.ndtri(u),
        theta_solver=solver,
        aux_solver=lambda y, theta: float(special.ndtr(y - theta)),
        theta_map=lambda y, u: y - special.ndtri(u),
        theta_increasing=False,
        param_space=IntervalSet.real_line(),
        residual_unimodal=True,
    )


def normal_location_dge() -> Model:
    """``Y = theta + Z`` with ``Z ~ N(0, 1)``; same model, normal auxiliary."""

    def solver(y, z):
        return _point(y - z) if math.isfinite(z) else IntervalSet.empty()

    return Model(
        name="normal-location-dge",
        param_dim=1,
        aux=AuxDistribution("standard-normal"),
        association=lambda y, theta, z: y - theta - z,
        generator=lambda z, theta: theta + z,
        theta_solver=solver,
        aux_solver=lambda y, theta: float(y - theta),
        theta_map=lambda y, z: y - z,
        theta_increasing=False,
        param_space=IntervalSet.real_line(),
        residual_unimodal=True,
    )


def exp_rate() -> Model:
    """Exponential rate: ``Y = -log(U) / lam``, association ``lam*y + log(u)``."""

    def solver(y, u):
        if y <= 0 or not 0.0 < u < 1.0:
            return IntervalSet.empty()
        return _point(-math.log(u) / y)

    def aux_solver(y, lam):
        if y <= 0 or lam <= 0:
            raise NoSolutionError("exp-rate needs y > 0 and lam > 0")
        return math.exp(-lam * y)

    def theta_map(y, u):
        with np.errstate(divide="ignore"):
            return -np.log(u) / y

    return Model(
        name="exp-rate",
        param_dim=1,
        aux=AuxDistribution("uniform01"),
        association=lambda y, lam, u: lam * y + np.log(u),
        generator=lambda u, lam: -np.log(u) / lam,
        theta_solver=solver,
        aux_solver=aux_solver,
        theta_map=theta_map,
        theta_increasing=False,
        param_space=IntervalSet.open(0.0, math.inf),
        window=(0.0, math.inf),
        residual_unimodal=True,
        meta={"window_is_space": True},
    )


def two_normal() -> Model:
    """Independent ``X ~ N(mu_x, 1)`` and ``Y ~ N(mu_y, 1)``; data ``(x, y)``."""

    def association(data, theta, u):
        (x, y), (mx, my), (u1, u2) = data, theta, u
        return np.array([x - mx - special.ndtri(u1), y - my - special.ndtri(u2)])

    def solver(data, u):
        u1, u2 = u
        if not (0 < u1 < 1 and 0 < u2 < 1):
            return FiniteSet()
        x, y = data
        return FiniteSet([(float(x - special.ndtri(u1)), float(y - special.ndtri(u2)))])

    def generator(u, theta):
        return (
            float(theta[0] + special.ndtri(u[0])),
            float(theta[1] + special.ndtri(u[1])),
        )

    return Model(
        name="two-normal",
        param_dim=2,
        aux=AuxDistribution("uniform01", dim=2),
        association=association,
        generator=generator,
        theta_solver=solver,
        aux_solver=lambda data, theta: (
            float(special.ndtr(data[0] - theta[0])),
            float(special.ndtr(data[1] - theta[1])),
        ),
    )


def discrete_shift(n: int) -> Model:
    """``Y = theta + U`` with integer ``theta`` and ``U`` uniform on ``{0..n-1}``."""

    def solver(y, u):
        return FiniteSet([y - int(u)])

    def aux_solver(y, theta):
        u = y - theta
        if not 0 <= u < n:
            raise NoSolutionError(f"y - theta = {u} is outside {{0..{n - 1}}}")
        return u

    return Model(
        name=f"discrete-shift:{n}",
        param_dim=1,
        aux=AuxDistribution("discrete-uniform", n_atoms=n),
        association=lambda y, theta, u: y - theta - u,
        generator=lambda u, theta: int(theta) + int(u),
        theta_solver=solver,
        aux_solver=aux_solver,
        discrete_param=True,
        residual_unimodal=True,
    )


def from_association(
    name: str,
    association: Callable,
    aux: AuxDistribution,
    window: tuple,
    generator: Callable | None = None,
    discrete_param: bool = False,
) -> Model:
    """A scalar model solved numerically on the declared window."""
    return Model(
        name=name,
        param_dim=1,
        aux=aux,
        association=association,
        generator=generator,
        window=tuple(window),
        discrete_param=discrete_param,
        meta={"window_is_space": True},
    )


_BUILTINS = {
    "normal-location": normal_location,
    "normal-location-dge": normal_location_dge,
    "two-normal": two_normal,
    "exp-rate": exp_rate,
}


def get_model(name: str) -> Model:
    """Look up a built-in model, e.g. ``"discrete-shift:4"``."""
    if name.startswith("discrete-shift:"):
        return discrete_shift(int(name.split(":", 1)[1]))
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ValueError(f"unknown model {name!r}") from None


# operations


def solve_theta(model: Model, y, u, n_grid: int = 2001):
    """All ``theta`` with ``a(y, theta, u) = 0`` (possibly empty)."""
    if not model.aux.in_range(u):
        raise ValueError(f"u={u!r} is outside the auxiliary range")
    if model.theta_solver is not None:
        return model.theta_solver(y, u)
    return _bracket_roots(model, y, u, n_grid)


def _bracket_roots(model: Model, y, u, n_grid: int):
    lo, hi = model.window
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise NumericSolverError("root bracketing needs a finite parameter window")
    if model.discrete_param:
        pts = [t for t in range(math.ceil(lo), math.floor(hi) + 1)
               if abs(model.residual(y, t, u)) <= SOLVER_TOL]
        return FiniteSet(pts)

    grid = np.linspace(lo, hi, n_grid)
    vals = _association_on_grid(model, y, grid, u)
    finite = np.isfinite(vals)
    if not finite.any():
        raise NumericSolverError("association is not finite anywhere on the window")
    roots = list(grid[finite & (np.abs(vals) <= SOLVER_TOL)])
    a_all, b_all = vals[:-1], vals[1:]
    flips = np.flatnonzero(np.isfinite(a_all) & np.isfinite(b_all) & (a_all * b_all < 0))
    for i in flips:
        try:
            r = optimize.brentq(lambda t: float(model.association(y, t, u)),
                                grid[i], grid[i + 1], xtol=SOLVER_TOL, maxiter=200)
        except (ValueError, RuntimeError) as exc:
            raise NumericSolverError(str(exc)) from exc
        roots.append(r)
    return IntervalSet(Interval(float(r), float(r)) for r in roots)


def _association_on_grid(model: Model, y, grid: np.ndarray, u) -> np.ndarray:
    # try one vectorised call first; fall back to a loop
    try:
        with np.errstate(all="ignore"):
            vals = np.asarray(model.association(y, grid, u), dtype=float)
        if vals.shape == grid.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([float(model.association(y, t, u)) for t in grid])


def aux_for(model: Model, y, theta):
    """The auxiliary value ``u_{y, theta}`` solving the association."""
    if model.aux_solver is not None:
        return model.aux_solver(y, theta)
    if model.aux.kind != "uniform01" or model.aux.dim != 1:
        raise NoSolutionError("no auxiliary solver for this model")
    f = lambda u: float(model.association(y, theta, u))  # noqa: E731
    a, b = 1e-15, 1 - 1e-15
    fa, fb = f(a), f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if not (np.isfinite(fa) and np.isfinite(fb)) or fa * fb > 0:
        raise NoSolutionError(f"no u solves the association at theta={theta}")
    return optimize.brentq(f, a, b, xtol=1e-14)


def simulate_data(model: Model, theta, rng: np.random.Generator):
    """Draw ``u`` from the auxiliary distribution and return ``G(u, theta)``."""
    return model.generate(model.aux.sample(rng), theta)
