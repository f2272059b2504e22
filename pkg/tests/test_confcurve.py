import math
from fractions import Fraction
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imfid.confcurve import (
    NonMonotoneError,
    cc_belief,
    cc_from_cd,
    cc_from_im,
    cc_plausibility,
    confidence_set,
    default_grid,
    fieller_cc,
    fieller_thresholds,
    im_from_cc,
    normal_mean_cc,
    recalibrate_exact,
    sup_curve,
)
from imfid.engine import point_plausibility_curve, principle_assertion
from imfid.fiducial import fid_distribution
from imfid.model import discrete_shift, exp_rate, normal_location
from imfid.randomset import DiscreteRandomSet, builtin_randomset, nested_from_gamma, offset
from imfid.sets import IntervalSet

N01 = NormalDist()
Z975 = N01.inv_cdf(0.975)
GAMMA4 = [1, Fraction(3, 4), Fraction(1, 2), Fraction(1, 4)]
GRID = default_grid((-6.0, 6.0), 601)


def normal_cdf(mean):
    return np.vectorize(lambda t: N01.cdf(t - mean))


# cc_from_cd


def test_cc_from_cd_examples():
    cc = cc_from_cd(normal_cdf(1.0), GRID)
    assert cc(1.0) == 0
    assert cc(1 + 1.959964) == pytest.approx(0.95, abs=1e-6)
    step = cc_from_cd(lambda t: (np.asarray(t) >= 0.5).astype(float), GRID)
    assert step(0.3) == 1 and step(0.7) == 1
    with pytest.raises(NonMonotoneError):
        cc_from_cd(lambda t: np.sin(np.asarray(t)), GRID)


# cc_from_im


def test_cc_from_im_normal_location():
    cc = cc_from_im(normal_location(), 1.0, builtin_randomset("two-sided"), grid=GRID)
    want = np.array([abs(2 * N01.cdf(1 - t) - 1) for t in GRID])
    assert np.max(np.abs(cc.values - want)) <= 1e-6
    assert cc(1.0) == pytest.approx(0.0, abs=1e-9)
    assert cc.kind == "exact" and cc.provenance == "im"


def test_cc_from_im_discrete_smallest_level():
    m = discrete_shift(4)
    fam = DiscreteRandomSet.from_gamma(GAMMA4)
    cc = cc_from_im(m, 5, fam)
    # enumeration oracle: theta = 5 - u joins S_alpha once alpha > 1 - gamma(u)
    for u, g in enumerate(GAMMA4):
        assert cc(5 - u) == 1 - g
    assert cc(4) == Fraction(1, 4)
    assert cc(9) == 1


def test_cc_from_im_conservative_family():
    fam = nested_from_gamma(lambda u: math.sqrt(1 - abs(2 * u - 1)))
    cc = cc_from_im(normal_location(), 0.0, fam, grid=GRID)
    assert cc.kind == "conservative"


# recalibrate_exact


def test_recalibrate_identity_when_already_exact():
    model, fam = normal_location(), builtin_randomset("two-sided")
    cc = cc_from_im(model, 0.3, fam, grid=GRID)
    ex = recalibrate_exact(cc, model, 0.3, fam)
    assert ex.kind == "exact" and ex.provenance == "fiducial-recalibrated"
    assert np.max(np.abs(ex.values - cc.values)) <= 1e-9
    n = 10**5
    mc = recalibrate_exact(cc, model, 0.3, fam, n=n, seed=4, method="monte-carlo")
    se = np.sqrt(np.maximum(cc.values * (1 - cc.values), 1e-12) / n)
    assert np.all(np.abs(mc.values - cc.values) <= 3 * se + 1e-9)


def test_recalibrate_dominates_input():
    model = normal_location()
    for fam in (offset(), nested_from_gamma(lambda u: math.sqrt(1 - abs(2 * u - 1)))):
        cc = cc_from_im(model, 0.0, fam, grid=GRID)
        ex = recalibrate_exact(cc, model, 0.0, fam)
        assert np.all(ex.values >= cc.values - 1e-12)
    # the conservative family is strictly raised somewhere
    assert np.max(ex.values - cc.values) > 0.05


def test_recalibrate_discrete_matches_enumeration():
    m = discrete_shift(4)
    fam = DiscreteRandomSet.from_gamma(GAMMA4)
    cc = cc_from_im(m, 5, fam)
    ex = recalibrate_exact(cc, m, 5, fam)
    masses = fid_distribution(m, 5)
    levels = sorted({1 - Fraction(g) for g in GAMMA4})
    for t in cc.grid:
        # fid of the smallest principle assertion containing t
        hits = [a for a in levels if t in set(principle_assertion(m, 5, fam, a, closed=True))]
        A = set(principle_assertion(m, 5, fam, hits[0], closed=True))
        assert ex(t) == sum(masses[s] for s in A)
        assert ex(t) >= cc(t)


# cc_belief / cc_plausibility


def test_cc_belief_and_plausibility():
    cc = cc_from_im(normal_location(), 0.0, builtin_randomset("two-sided"), grid=GRID)
    assert cc_belief(cc, IntervalSet.open(-1.959964, 1.959964)) == \
        pytest.approx(2 * N01.cdf(1.959964) - 1, abs=1e-6)
    assert cc_belief(cc, IntervalSet.real_line()) == 1
    # any set holding the minimiser is fully plausible: 1 - inf_A cc = 1
    assert cc_plausibility(cc, IntervalSet.closed(-0.5, 0.5)) == pytest.approx(1.0, abs=1e-9)
    assert cc_plausibility(cc, IntervalSet.closed(1.959964, 3)) == \
        pytest.approx(2 * (1 - N01.cdf(1.959964)), abs=1e-6)


CUTS = st.sampled_from([-math.inf, -3.0, -1.0, -0.2, 0.5, 1.7, math.inf])


@given(CUTS, CUTS, st.booleans(), st.booleans())
def test_cc_duality(a, b, lc, hc):
    a, b = sorted((a, b))
    A = IntervalSet.interval(a, b, lc, hc)
    cc = normal_mean_cc(0.2, window=(-6, 6))
    assert cc_plausibility(cc, A) == pytest.approx(1 - cc_belief(cc, A.complement()), abs=1e-12)
    assert cc_belief(cc, A) <= cc_plausibility(cc, A) + 1e-12


# confidence_set


def test_confidence_set_examples():
    cc = cc_from_im(normal_location(), 0.0, builtin_randomset("two-sided"), grid=GRID)
    S = confidence_set(cc, 0.95)
    assert S.bounds == pytest.approx((-Z975, Z975), abs=1e-6)
    assert confidence_set(cc, 1e-4).contains(cc.minimizer)
    with pytest.raises(ValueError):
        confidence_set(cc, 1.0)


def test_fieller_set_matches_quadratic_roots():
    x, y, z = 2.0, 1.0, Z975
    a, b, c = y * y - z * z, -2 * x * y, x * x - z * z
    disc = math.sqrt(b * b - 4 * a * c)
    r1, r2 = sorted(((-b - disc) / (2 * a), (-b + disc) / (2 * a)))
    S = confidence_set(fieller_cc(x, y), 0.95)
    assert S.complement() == IntervalSet.open(r1, r2) or \
        S.complement().bounds == pytest.approx((r1, r2), abs=1e-6)


def test_fieller_set_shapes():
    cc = fieller_cc(2.0, 1.0)
    th = fieller_thresholds(2.0, 1.0)
    assert th["unbounded"] == pytest.approx(2 * N01.cdf(1) - 1, abs=1e-12)
    assert th["whole_line"] == pytest.approx(2 * N01.cdf(math.sqrt(5)) - 1, abs=1e-12)
    assert confidence_set(cc, 0.5).is_bounded()
    mid = confidence_set(cc, 0.9)
    assert not mid.is_bounded() and len(mid.intervals) == 2
    assert confidence_set(cc, 0.99) == IntervalSet.real_line()
    assert sup_curve(cc) == pytest.approx(th["whole_line"], abs=1e-9)


@given(st.floats(0.01, 0.98), st.floats(0.01, 0.98))
def test_level_sets_nested(a1, a2):
    a1, a2 = sorted((a1, a2))
    for cc in (fieller_cc(2.0, 1.0), normal_mean_cc(0.4, window=(-6, 6))):
        assert confidence_set(cc, a1).issubset(confidence_set(cc, a2))


# fieller_cc


def test_fieller_cc_examples():
    cc = fieller_cc(2.0, 1.0)
    assert cc(2.0) == 0
    assert cc(math.inf) == pytest.approx(2 * N01.cdf(1) - 1, abs=1e-12)
    assert cc(1e9) == pytest.approx(2 * N01.cdf(1) - 1, abs=1e-6)
    assert cc(-1e9) == pytest.approx(2 * N01.cdf(1) - 1, abs=1e-6)
    flat = fieller_cc(0.0, 0.0)
    assert np.all(flat.values == 0)


# im_from_cc


def test_im_from_cc_round_trips():
    for cc in (normal_mean_cc(1.0, grid=GRID), fieller_cc(2.0, 1.0, grid=GRID)):
        model, fam = im_from_cc(cc)
        back = cc_from_im(model, None, fam, grid=cc.grid)
        assert np.max(np.abs(back.values - cc.values)) <= 1e-6
        pl = point_plausibility_curve(model, None, fam, cc.grid[::50])
        assert np.max(np.abs(pl - (1 - cc.values[::50]))) <= 1e-9


def test_im_from_constant_curve():
    cc = fieller_cc(0.0, 0.0, grid=GRID)
    model, fam = im_from_cc(cc)
    assert np.all(point_plausibility_curve(model, None, fam, GRID[::100]) == 1)


def test_im_from_cc_rejects_conservative():
    cc = normal_mean_cc(0.0, grid=GRID).with_kind("conservative")
    with pytest.raises(ValueError):
        im_from_cc(cc)


# invariants


def test_cd_curve_reproduces_im_curve():
    y = -0.7
    cd = cc_from_cd(normal_cdf(y), GRID)
    im = cc_from_im(normal_location(), y, builtin_randomset("two-sided"), grid=GRID)
    assert np.max(np.abs(cd.values - im.values)) <= 1e-6


@pytest.mark.parametrize("factory,y", [(normal_location, 0.4), (exp_rate, 1.3)])
@pytest.mark.parametrize("name", ["two-sided", "left", "right"])
def test_curve_matches_point_plausibility(factory, y, name):
    model, fam = factory(), builtin_randomset(name)
    grid = np.linspace(0.05, 3.0, 40)
    cc = cc_from_im(model, y, fam, grid=grid)
    pl = point_plausibility_curve(model, y, fam, grid)
    assert np.max(np.abs((1 - cc.values) - pl)) <= 1e-6
    pl_mc, se = point_plausibility_curve(model, y, fam, grid, method="monte-carlo",
                                         n_mc=5 * 10**4, seed=1, return_se=True)
    assert np.all(np.abs((1 - cc.values) - pl_mc) <= np.maximum(3 * se, 1e-9))


def test_curve_values_in_unit_interval():
    for cc in (fieller_cc(-1.0, 0.3), normal_mean_cc(2.0, window=(-6, 6)),
               cc_from_im(exp_rate(), 0.8, builtin_randomset("left"),
                          grid=np.linspace(0.01, 5, 200))):
        assert np.all((cc.values >= 0) & (cc.values <= 1))
