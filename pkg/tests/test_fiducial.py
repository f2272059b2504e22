import math
from fractions import Fraction
from statistics import NormalDist

import numpy as np
import pytest
from scipy import stats

from imfid.engine import belief
from imfid.fiducial import (
    AcceptanceTooLowError,
    fid_distribution,
    fid_probability,
    matching_randomset,
    prefer_outside,
    pseudo_solve,
    sample_gfd,
)
from imfid.model import AuxDistribution, discrete_shift, from_association, normal_location
from imfid.randomset import check_validity_condition
from imfid.sets import FiniteSet, IntervalSet

N01 = NormalDist()


def ks_distance(draws, cdf):
    x = np.sort(np.asarray(draws, dtype=float))
    n = len(x)
    f = np.array([cdf(t) for t in x])
    return max(np.max(np.arange(1, n + 1) / n - f), np.max(f - np.arange(n) / n))


def square_model():
    # y = theta^2 + u: two solutions whenever y > u, none otherwise
    return from_association("square", lambda y, t, u: y - t * t - u,
                            AuxDistribution("uniform01"), window=(-3.0, 3.0))


# pseudo_solve


def test_pseudo_solve_examples():
    assert pseudo_solve(normal_location(), 1.0, 0.5) == pytest.approx(1.0, abs=1e-12)
    assert pseudo_solve(discrete_shift(4), 5, 2) == 3
    m = normal_location().restrict(0.0, math.inf)
    # grid-search oracle over the window
    grid = np.linspace(0, 5, 50001)
    want = grid[np.argmin(np.abs(-1.0 - grid - N01.inv_cdf(0.5)))]
    assert pseudo_solve(m, -1.0, 0.5) == pytest.approx(want, abs=1e-8)


def test_pseudo_solve_tie_rules():
    m = square_model()
    r = math.sqrt(0.5)
    assert pseudo_solve(m, 1.0, 0.5, tie_rule="leftmost") == pytest.approx(-r, abs=1e-8)
    assert pseudo_solve(m, 1.0, 0.5, tie_rule="rightmost") == pytest.approx(r, abs=1e-8)
    assert pseudo_solve(m, 1.0, 0.5, tie_rule=prefer_outside(IntervalSet.closed(-1, 0))) \
        == pytest.approx(r, abs=1e-8)
    # no root: the residual |y - u - t^2| is smallest at t = 0
    assert pseudo_solve(m, 0.2, 0.5) == pytest.approx(0.0, abs=1e-6)


def test_pseudo_solve_linf_norm_on_two_normal():
    from imfid.model import two_normal
    sol = pseudo_solve(two_normal(), (2.0, 1.0), (0.5, 0.5), norm="linf")
    assert tuple(sol) == pytest.approx((2.0, 1.0), abs=1e-9)


# sample_gfd


def test_gfd_normal_location_ks():
    s = sample_gfd(normal_location(), 0.0, 2 * 10**4, seed=1)
    assert ks_distance(s.draws, N01.cdf) < 1.63 / math.sqrt(len(s.draws))
    assert s.acceptance_rate == 1.0 and s.epsilon == 0.0


def test_gfd_discrete_shift_uniform():
    s = sample_gfd(discrete_shift(4), 5, 8000, seed=2)
    assert s.draws.dtype.kind == "i"
    values, counts = np.unique(s.draws, return_counts=True)
    assert list(values) == [2, 3, 4, 5]
    assert stats.chisquare(counts).pvalue > 0.001
    assert fid_distribution(discrete_shift(4), 5) == {t: Fraction(1, 4) for t in (2, 3, 4, 5)}


def test_gfd_rejects_bad_arguments():
    with pytest.raises(ValueError):
        sample_gfd(normal_location(), 0.0, 0)
    with pytest.raises(ValueError):
        sample_gfd(normal_location(), 0.0, 10, epsilon=-1)


def test_gfd_truncation_keeps_boundary_atom():
    # theta* = max(0, y - Z) is kept when y - Z >= -eps
    y, eps, n = 0.2, 0.05, 2 * 10**4
    m = normal_location().restrict(0.0, math.inf)
    s = sample_gfd(m, y, n, epsilon=eps, seed=3)
    assert np.all(s.draws >= 0)
    accept = N01.cdf(y + eps)
    assert s.acceptance_rate == pytest.approx(accept, abs=4 * math.sqrt(accept / s.n_proposals))
    atom = (N01.cdf(y + eps) - N01.cdf(y)) / accept
    p_hat = float(np.mean(s.draws == 0))
    assert abs(p_hat - atom) <= 3 * math.sqrt(atom * (1 - atom) / n)


def test_gfd_acceptance_floor():
    m = normal_location().restrict(0.0, math.inf)
    with pytest.raises(AcceptanceTooLowError):
        sample_gfd(m, -6.0, 100, epsilon=0.0, seed=0)


def test_gfd_independent_of_worker_count():
    m = square_model()
    a = sample_gfd(m, 1.0, 300, epsilon=0.02, seed=5, workers=1)
    b = sample_gfd(m, 1.0, 300, epsilon=0.02, seed=5, workers=3)
    assert np.array_equal(a.draws, b.draws)
    c = sample_gfd(normal_location(), 0.0, 10**4, seed=5, workers=1)
    d = sample_gfd(normal_location(), 0.0, 10**4, seed=5, workers=4)
    assert np.array_equal(c.draws, d.draws)


def test_epsilon_consistency_on_restricted_model():
    # at eps > 0 the boundary theta = 0 collects an atom of size about
    # eps * phi(y) / Phi(y); the eps = 0 reference is N(y, 1) truncated to [0, inf)
    y = 0.5
    m = normal_location().restrict(0.0, math.inf)
    mass = 1 - N01.cdf(-y)

    def truncated_cdf(t):
        return 0.0 if t < 0 else (N01.cdf(t - y) - N01.cdf(-y)) / mass

    d = {eps: ks_distance(sample_gfd(m, y, 4 * 10**4, epsilon=eps, seed=11).draws,
                          truncated_cdf)
         for eps in (0.1, 0.01, 0.0)}
    assert d[0.1] > d[0.01] > 0
    assert d[0.0] < 1.63 / math.sqrt(4 * 10**4)


# fid_probability


def test_fid_probability_examples():
    m = normal_location()
    half = fid_probability(m, 0.0, IntervalSet.interval(-math.inf, 0), n=10**5, seed=1,
                           method="monte-carlo")
    assert abs(half.estimate - 0.5) <= 3 * half.se
    mid = fid_probability(m, 0.0, IntervalSet.open(-1.959964, 1.959964), n=10**5, seed=2,
                          method="monte-carlo")
    assert abs(mid.estimate - (2 * N01.cdf(1.959964) - 1)) <= 3 * mid.se
    ex = fid_probability(m, 0.0, IntervalSet.open(-1.959964, 1.959964))
    assert ex.method == "exact"
    assert ex.estimate == pytest.approx(2 * N01.cdf(1.959964) - 1, abs=1e-12)
    assert fid_probability(discrete_shift(4), 5, FiniteSet([3, 4, 5])).estimate == Fraction(3, 4)


# matching_randomset


def test_matching_randomset_examples():
    m = discrete_shift(4)
    window = range(2, 6)
    for pts, want in (([3, 4, 5], Fraction(3, 4)), (list(window), Fraction(1)), ([], Fraction(0))):
        A = FiniteSet(pts, window)
        fam = matching_randomset(m, 5, A)
        assert belief(m, 5, fam, A).belief == want
        assert fid_probability(m, 5, A).estimate == want
        assert check_validity_condition(fam, m.aux).passed
        assert fam.nested
