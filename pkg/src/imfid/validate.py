"""Frequentist checks and the exact enumeration oracle.

Coverage checks simulate data at a fixed true parameter and compare the
empirical distribution of a curve or belief value with its nominal level.
The oracle enumerates every assertion over a small integer window of a
discrete model and records exact belief, plausibility and fiducial
probability as :class:`~fractions.Fraction` values; :func:`check_theorems`
then tests the bounding and attainment results row by row with no
tolerance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .confcurve import ConfidenceCurve
from .engine import belief, principle_assertion
from .fiducial import fid_distribution, matching_randomset
from .model import Model, simulate_data
from .randomset import RandomSet, check_validity_condition, for_aux
from .sets import FiniteSet, _as_exact
from .streams import block_sizes, run_blocks

DEFAULT_ALPHAS = tuple(round(0.05 * k, 2) for k in range(1, 20))
MAX_WINDOW = 12
REP_BLOCK = 512


class ThetaInAssertionError(ValueError):
    pass


class WindowTooLargeError(ValueError):
    pass


@dataclass
class CoverageReport:
    """Per-level empirical probabilities with pass/fail verdicts.

    ``se`` holds the binomial standard errors ``sqrt(p (1 - p) / n_rep)`` of
    the estimates.  Verdicts compare against ``tolerance``, which defaults
    to three null standard errors ``3 sqrt(alpha (1 - alpha) / n_rep)``.
    """

    alphas: list
    empirical: list
    se: list
    n_rep: int
    verdicts: list
    rule: str
    tolerance: list
    target: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts)

    @property
    def failures(self) -> list:
        return [a for a, ok in zip(self.alphas, self.verdicts) if not ok]

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "rule": self.rule,
            "n_rep": self.n_rep,
            "alphas": [float(a) for a in self.alphas],
            "empirical": [float(p) for p in self.empirical],
            "se": [float(s) for s in self.se],
            "tolerance": [float(t) for t in self.tolerance],
            "verdicts": list(self.verdicts),
            "passed": self.passed,
            "meta": self.meta,
        }


def _tolerances(alphas, n_rep, tolerance):
    if tolerance is not None:
        return [float(tolerance)] * len(alphas)
    return [3 * math.sqrt(a * (1 - a) / n_rep) for a in alphas]


def _simulate(fn: Callable, model: Model, theta0, n_rep: int, seed: int, workers: int):
    """``fn(y)`` for ``n_rep`` data sets drawn at ``theta0``, in replication order."""

    def block(rng, size):
        return [fn(simulate_data(model, theta0, rng)) for _ in range(size)]

    parts = run_blocks(block, seed, block_sizes(n_rep, REP_BLOCK), workers)
    return np.array([v for part in parts for v in part], dtype=float)


def cc_coverage_sim(model: Model, theta0, cc_builder: Callable[[object], ConfidenceCurve],
                    n_rep: int = 10**4, alphas: Sequence[float] = DEFAULT_ALPHAS,
                    seed: int = 0, rule: str | None = None, tolerance: float | None = None,
                    workers: int = 1) -> CoverageReport:
    """Empirical ``P(cc_Y(theta0) < alpha)`` under data simulated at ``theta0``.

    The ``exact`` rule asks for ``|p - alpha| <= tol``; the ``conservative``
    rule asks for ``p >= alpha - tol``.  By default the rule follows the
    curve's declared kind.
    """
    if n_rep < 10**3:
        raise ValueError("n_rep must be at least 10^3")
    kinds = []

    def value(y):
        cc = cc_builder(y)
        kinds.append(cc.kind)
        return cc(theta0)

    vals = _simulate(value, model, theta0, n_rep, seed, workers)
    if rule is None:
        rule = "exact" if kinds and all(k == "exact" for k in kinds) else "conservative"
    if rule not in ("exact", "conservative"):
        raise ValueError(f"unknown rule {rule!r}")
    alphas = list(alphas)
    tols = _tolerances(alphas, n_rep, tolerance)
    emp = [float(np.mean(vals < a)) for a in alphas]
    se = [math.sqrt(p * (1 - p) / n_rep) for p in emp]
    if rule == "exact":
        verdicts = [abs(p - a) <= t for p, a, t in zip(emp, alphas, tols)]
    else:
        verdicts = [p >= a - t for p, a, t in zip(emp, alphas, tols)]
    return CoverageReport(alphas, emp, se, n_rep, verdicts, rule, tols,
                          target="P(cc(theta0) < alpha)", meta={"seed": seed})


def belief_validity_sim(model: Model, theta0, fam: RandomSet, A, n_rep: int = 10**4,
                        alphas: Sequence[float] = DEFAULT_ALPHAS, seed: int = 0,
                        tolerance: float | None = None, workers: int = 1) -> CoverageReport:
    """Empirical ``P(bel_Y(A) >= 1 - alpha)`` for an assertion excluding ``theta0``."""
    A = _as_exact(A)
    if A.contains(theta0):
        raise ThetaInAssertionError(f"theta0={theta0} lies in the assertion {A}")
    if n_rep < 10**3:
        raise ValueError("n_rep must be at least 10^3")
    vals = _simulate(lambda y: float(belief(model, y, fam, A).belief), model, theta0, n_rep,
                     seed, workers)
    alphas = list(alphas)
    tols = _tolerances(alphas, n_rep, tolerance)
    emp = [float(np.mean(vals >= 1 - a)) for a in alphas]
    se = [math.sqrt(p * (1 - p) / n_rep) for p in emp]
    verdicts = [p <= a + t for p, a, t in zip(emp, alphas, tols)]
    return CoverageReport(alphas, emp, se, n_rep, verdicts, "conservative", tols,
                          target="P(bel(A) >= 1 - alpha)", meta={"seed": seed})


def belief_validity_exact(model: Model, theta0, fam: RandomSet, A,
                          alphas: Sequence[float] = DEFAULT_ALPHAS) -> CoverageReport:
    """Exact ``P(bel_Y(A) >= 1 - alpha)`` by enumerating the discrete auxiliary."""
    if not model.aux.discrete:
        raise ValueError("exact validity needs a discrete auxiliary variable")
    A = _as_exact(A)
    if A.contains(theta0):
        raise ThetaInAssertionError(f"theta0={theta0} lies in the assertion {A}")
    dist = []
    for u in model.aux.support():
        y = model.generate(u, theta0)
        dist.append((model.aux.pmf(u), belief(model, y, fam, A).belief))
    alphas = list(alphas)
    emp = [sum((p for p, b in dist if b >= 1 - Fraction(a).limit_denominator(10**9)),
               Fraction(0)) for a in alphas]
    verdicts = [p <= Fraction(a).limit_denominator(10**9) for p, a in zip(emp, alphas)]
    return CoverageReport(alphas, emp, [0.0] * len(alphas), 0, verdicts, "conservative",
                          [0.0] * len(alphas), target="P(bel(A) >= 1 - alpha)",
                          meta={"method": "exact"})


# exact oracle


@dataclass
class OracleRow:
    assertion: frozenset
    belief: Fraction
    plausibility: Fraction
    fid: Fraction


@dataclass
class OracleTable:
    model: str
    y: object
    family: str
    window: tuple
    rows: list
    sampled: bool = False
    family_obj: RandomSet | None = None

    def row(self, A) -> OracleRow:
        key = frozenset(A)
        for r in self.rows:
            if r.assertion == key:
                return r
        raise KeyError(sorted(key))

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "y": self.y,
            "family": self.family,
            "window": list(self.window),
            "sampled": self.sampled,
            "rows": [
                {"A": sorted(r.assertion), "bel": str(r.belief), "pl": str(r.plausibility),
                 "fid": str(r.fid)}
                for r in self.rows
            ],
        }


def reachable(model: Model, y) -> list:
    """Parameter values solving the association for some auxiliary value."""
    out = set()
    for u in model.aux.support():
        out.update(model.theta_solver(y, u))
    return sorted(out)


def _assertions(window: tuple, sample: bool, n_sample: int, seed: int):
    k = len(window)
    if not sample:
        for r in range(k + 1):
            for combo in itertools.combinations(window, r):
                yield frozenset(combo)
        return
    rng = np.random.default_rng(seed)
    for _ in range(n_sample):
        mask = rng.random(k) < 0.5
        yield frozenset(t for t, m in zip(window, mask) if m)


def build_oracle(model: Model, y, fams: Sequence[RandomSet], window: Sequence | None = None,
                 allow_sampling: bool = False, n_sample: int = 1000,
                 seed: int = 0) -> list[OracleTable]:
    """Exact belief, plausibility and fiducial probability of every assertion.

    ``window`` defaults to the reachable parameter values and must contain
    them, so that complements taken inside the window are true complements.
    Windows larger than twelve points raise unless ``allow_sampling``, in
    which case ``n_sample`` random assertions are used and the table is
    marked as sampled.
    """
    if not model.aux.discrete:
        raise ValueError("the oracle needs a discrete auxiliary variable")
    reach = reachable(model, y)
    window = tuple(sorted(window)) if window is not None else tuple(reach)
    if not set(reach) <= set(window):
        raise ValueError(f"window {window} misses reachable values {sorted(set(reach) - set(window))}")
    sample = len(window) > MAX_WINDOW
    if sample and not allow_sampling:
        raise WindowTooLargeError(f"window has {len(window)} points; the limit is {MAX_WINDOW}")
    masses = fid_distribution(model, y)
    tables = []
    for fam in fams:
        fam = for_aux(fam, model.aux)
        rows = []
        for A in _assertions(window, sample, n_sample, seed):
            rep = belief(model, y, fam, FiniteSet(A, window))
            fid = sum((m for t, m in masses.items() if t in A), Fraction(0))
            rows.append(OracleRow(A, rep.belief, rep.plausibility, fid))
        tables.append(OracleTable(model.name, y, fam.name, window, rows, sample, fam))
    return tables


@dataclass
class TheoremReport:
    checked: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def count(self, name: str, n: int = 1):
        self.checked[name] = self.checked.get(name, 0) + n

    def flag(self, name: str, **info):
        self.violations.append({"check": name, **{k: _jsonable(v) for k, v in info.items()}})

    def to_dict(self) -> dict:
        return {"checked": self.checked, "violations": self.violations, "passed": self.passed}


def _jsonable(v):
    if isinstance(v, (frozenset, set)):
        return sorted(v)
    if isinstance(v, Fraction):
        return str(v)
    return v


def check_theorems(model: Model, y, tables: Sequence[OracleTable],
                   nested_pairs: Sequence[tuple] | None = None) -> TheoremReport:
    """Row-by-row checks on oracle tables, with no tolerance.

    * sandwich ``bel <= fid <= pl`` for families meeting the validity
      condition (others are counted as skipped);
    * duality ``bel(A) + pl(complement) = 1``;
    * ``bel > 0`` implies ``pl = 1`` for families whose realisations always
      intersect;
    * dominance ``bel <= bel'`` against the nested family with the same
      containment function, whenever its parameter sets are never empty;
    * the matching random set attains ``bel = fid`` and satisfies the
      validity condition;
    * for families with uniform ``gamma(U*)``, ``bel(A_a) = fid(A_a) = a``
      at every attained level ``a``.
    """
    rep = TheoremReport()
    masses = fid_distribution(model, y)
    for table in tables:
        fam = table.family_obj
        window = frozenset(table.window)
        rows = {r.assertion: r for r in table.rows}
        intersecting = fam.intersecting()
        valid = check_validity_condition(fam, model.aux).passed
        if not valid:
            rep.count("sandwich-skipped-invalid-family")
        for r in table.rows:
            if valid:
                rep.count("sandwich")
            if valid and not (r.belief <= r.fid <= r.plausibility):
                rep.flag("sandwich", family=table.family, A=r.assertion, bel=r.belief,
                         fid=r.fid, pl=r.plausibility)
            comp = rows.get(window - r.assertion)
            if comp is not None:
                rep.count("duality")
                if r.belief + comp.plausibility != 1:
                    rep.flag("duality", family=table.family, A=r.assertion)
            if intersecting:
                rep.count("positive-belief-gap")
                if r.belief > 0 and r.plausibility != 1:
                    rep.flag("positive-belief-gap", family=table.family, A=r.assertion,
                             bel=r.belief, pl=r.plausibility)
        _check_uniform_levels(model, y, fam, table, masses, rep)

    pairs = list(nested_pairs) if nested_pairs is not None else \
        [(t.family_obj, t.family_obj.nesting()) for t in tables]
    by_family = {t.family: t for t in tables}
    for fam, nested in pairs:
        fam, nested = for_aux(fam, model.aux), for_aux(nested, model.aux)
        rep.count("nesting-gamma")
        if fam.gamma_table() != nested.gamma_table():
            rep.flag("nesting-gamma", family=fam.name)
        if any(_empty_image(model, y, s) for _, s in nested.atoms):
            continue  # dominance is only claimed when Theta_y(S') is never empty
        table = by_family.get(fam.name)
        rows = table.rows if table is not None else build_oracle(model, y, [fam])[0].rows
        for r in rows:
            rep.count("nesting-dominance")
            b2 = belief(model, y, nested, FiniteSet(r.assertion)).belief
            if r.belief > b2:
                rep.flag("nesting-dominance", family=fam.name, A=r.assertion,
                         bel=r.belief, bel_nested=b2)

    if tables:
        for r in tables[0].rows:
            _check_matching(model, y, r, rep)
    return rep


def _empty_image(model, y, s) -> bool:
    return all(model.theta_solver(y, u).is_empty() for u in s)


def _check_matching(model, y, row: OracleRow, rep: TheoremReport):
    fam = matching_randomset(model, y, FiniteSet(row.assertion))
    rep.count("matching")
    b = belief(model, y, fam, FiniteSet(row.assertion)).belief
    if b != row.fid:
        rep.flag("matching", A=row.assertion, bel=b, fid=row.fid)
    vc = check_validity_condition(fam, model.aux)
    rep.count("matching-validity")
    if not vc.passed:
        rep.flag("matching-validity", A=row.assertion, violations=vc.violations)


def _check_uniform_levels(model, y, fam, table, masses, rep):
    if not fam.nested or not check_validity_condition(fam, model.aux).uniform:
        return
    for a in sorted(set(fam.gamma_table())):
        A = principle_assertion(model, y, fam, a)
        rep.count("principle-level")
        fid = sum((m for t, m in masses.items() if A.contains(t)), Fraction(0))
        bel = belief(model, y, fam, A).belief
        if not (fid == a and bel == a):
            rep.flag("principle-level", family=table.family, alpha=a, fid=fid, bel=bel)


# symbolic check


def normal_halfline_closed_forms():
    """Belief and plausibility of ``(-inf, c]`` for the normal location model
    with the two-sided random set, as sympy expressions in ``d = c - y``.

    ``Theta_y(S)`` is ``y +- W`` with ``W = |Z|``, so containment needs
    ``W <= d`` and intersection needs ``W > -d``.
    """
    import sympy as sp

    d = sp.symbols("d", real=True)
    w = sp.symbols("w", nonnegative=True)
    # density of |Z|
    f = sp.sqrt(2 / sp.pi) * sp.exp(-w**2 / 2)
    bel = sp.Piecewise((sp.integrate(f, (w, 0, d)), d > 0), (0, True))
    pl = sp.Piecewise((1, d >= 0), (sp.integrate(f, (w, -d, sp.oo)), True))
    return d, sp.simplify(bel), sp.simplify(pl)


def positive_belief_gap_symbolic() -> dict:
    """Symbolic check that ``bel > 0`` forces ``pl = 1`` on lower half-lines.

    Returns the belief and plausibility at ``c = y`` and whether the
    implication holds in both sign cases of ``d``.
    """
    import sympy as sp

    d, bel, pl = normal_halfline_closed_forms()
    dp = sp.symbols("dp", positive=True)
    dn = sp.symbols("dn", nonpositive=True)
    at_zero = (sp.simplify(bel.subs(d, 0)), sp.simplify(pl.subs(d, 0)))
    # d > 0: plausibility is one; d <= 0: belief is zero
    pl_pos = sp.simplify(pl.subs(d, dp))
    bel_nonpos = sp.simplify(bel.subs(d, dn))
    return {
        "bel_at_y": at_zero[0],
        "pl_at_y": at_zero[1],
        "pl_when_positive": pl_pos,
        "bel_when_nonpositive": bel_nonpos,
        "holds": bool(pl_pos == 1 and bel_nonpos == 0),
        "bel": bel,
        "pl": pl,
        "d": d,
    }
