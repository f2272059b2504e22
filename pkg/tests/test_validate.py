import math
from fractions import Fraction
from statistics import NormalDist

import numpy as np
import pytest

from imfid.confcurve import ConfidenceCurve, cc_from_cd, cc_from_im
from imfid.model import discrete_shift, normal_location
from imfid.randomset import (
    AuxDistribution,
    branching_example,
    builtin_randomset,
    check_validity_condition,
    for_aux,
    left,
    nested_from_gamma,
)
from imfid.sets import FiniteSet, IntervalSet
from imfid.validate import (
    ThetaInAssertionError,
    WindowTooLargeError,
    belief_validity_exact,
    belief_validity_sim,
    build_oracle,
    cc_coverage_sim,
    check_theorems,
    positive_belief_gap_symbolic,
)

N01 = NormalDist()
ALPHAS = [round(0.05 * k, 2) for k in range(1, 20)]


def two_sided_builder(model):
    fam = builtin_randomset("two-sided")
    return lambda y: cc_from_im(model, y, fam, grid=[0.0], uniform=True)


# cc_coverage_sim


def test_coverage_exact_curve_passes():
    model = normal_location()
    rep = cc_coverage_sim(model, 0.0, two_sided_builder(model), n_rep=4000, seed=1)
    assert rep.rule == "exact" and rep.passed
    for p, s in zip(rep.empirical, rep.se):
        assert s == pytest.approx(math.sqrt(p * (1 - p) / 4000))


def test_coverage_degenerate_curve_is_conservative():
    zero = lambda y: ConfidenceCurve(lambda t: np.zeros_like(np.asarray(t, dtype=float)),  # noqa: E731
                                     [0.0], "conservative", "cd", vectorized=True)
    rep = cc_coverage_sim(normal_location(), 0.0, zero, n_rep=1000, seed=2)
    assert rep.rule == "conservative" and rep.passed
    assert all(p == 1 for p in rep.empirical)


def test_coverage_miscentred_curve_fails_where_oracle_says():
    # cc(0) = 2|Phi(-Y - 0.5) - 0.5| with Y ~ N(0, 1)
    def oracle(a):
        lo, hi = N01.inv_cdf(0.5 - a / 2), N01.inv_cdf(0.5 + a / 2)
        # lo < -Y - 0.5 < hi  <=>  -hi - 0.5 < Y < -lo - 0.5
        return N01.cdf(-lo - 0.5) - N01.cdf(-hi - 0.5)

    def builder(y):
        return cc_from_cd(np.vectorize(lambda t: N01.cdf(t - y - 0.5)), [0.0])

    n = 10**4
    rep = cc_coverage_sim(normal_location(), 0.0, builder, n_rep=n, alphas=ALPHAS, seed=3,
                          rule="exact")
    for a, p in zip(ALPHAS, rep.empirical):
        want = oracle(a)
        assert abs(p - want) <= 4 * math.sqrt(want * (1 - want) / n) + 1e-12
    assert not rep.passed
    expected_fail = [a for a in ALPHAS if abs(oracle(a) - a) > 3 * math.sqrt(a * (1 - a) / n) + 0.01]
    assert set(expected_fail) <= set(rep.failures)


def test_coverage_same_for_any_worker_count():
    model = normal_location()
    a = cc_coverage_sim(model, 0.0, two_sided_builder(model), n_rep=3000, seed=4, workers=1)
    b = cc_coverage_sim(model, 0.0, two_sided_builder(model), n_rep=3000, seed=4, workers=3)
    assert a.to_dict() == b.to_dict()


def test_coverage_needs_enough_replications():
    model = normal_location()
    with pytest.raises(ValueError):
        cc_coverage_sim(model, 0.0, two_sided_builder(model), n_rep=10)


def test_invalid_gamma_fails_both_checks():
    fam = nested_from_gamma(lambda u: u * u)
    assert not check_validity_condition(fam, AuxDistribution("uniform01"), n_mc=10**4).passed
    model = normal_location()
    rep = cc_coverage_sim(model, 0.0,
                          lambda y: cc_from_im(model, y, fam, grid=[0.0], uniform=False),
                          n_rep=2000, seed=5, rule="conservative")
    assert rep.failures


# belief validity


def test_belief_validity_examples():
    model, fam = normal_location(), builtin_randomset("two-sided")
    rep = belief_validity_sim(model, 0.0, fam, IntervalSet.interval(1, math.inf, False),
                              n_rep=4000, seed=6)
    assert rep.passed
    empty = belief_validity_sim(model, 0.0, fam, IntervalSet.empty(), n_rep=1000, seed=6)
    assert empty.passed and all(p == 0 for p in empty.empirical)
    with pytest.raises(ThetaInAssertionError):
        belief_validity_sim(model, 0.0, fam, IntervalSet.closed(-1, 1), n_rep=1000)


def test_belief_validity_exact_discrete():
    m = discrete_shift(6)
    for name in ("two-sided", "left", "right"):
        fam = for_aux(builtin_randomset(name), m.aux)
        for A in ({-3, -2, -1}, {1, 2}, {1, 2, 3, 4, 5}):
            rep = belief_validity_exact(m, 0, fam, FiniteSet(A))
            assert rep.passed
            assert all(isinstance(p, Fraction) for p in rep.empirical)


# oracle


def test_oracle_rows_examples():
    m = discrete_shift(4)
    fam = for_aux(left(), m.aux)
    (table,) = build_oracle(m, 5, [fam])
    assert len(table.rows) == 16
    row = table.row({3, 4, 5})
    assert row.belief <= Fraction(3, 4) == row.fid <= row.plausibility
    full = table.row({2, 3, 4, 5})
    assert (full.belief, full.fid, full.plausibility) == (1, 1, 1)
    none = table.row(set())
    assert (none.belief, none.fid, none.plausibility) == (0, 0, 0)


def test_oracle_internal_duality():
    m = discrete_shift(6)
    fams = [for_aux(builtin_randomset(n), m.aux) for n in ("two-sided", "offset")]
    for table in build_oracle(m, 7, fams):
        window = frozenset(table.window)
        rows = {r.assertion: r for r in table.rows}
        for A, r in rows.items():
            assert r.belief + rows[window - A].plausibility == 1


def test_oracle_window_limits():
    m = discrete_shift(13)
    with pytest.raises(WindowTooLargeError):
        build_oracle(m, 13, [for_aux(left(), m.aux)])
    (table,) = build_oracle(m, 13, [for_aux(left(), m.aux)], allow_sampling=True, n_sample=50)
    assert table.sampled and len(table.rows) == 50
    with pytest.raises(ValueError):
        build_oracle(discrete_shift(4), 5, [left()], window=[4, 5])


# theorem checks


def test_theorems_hold_for_builtin_analogues():
    m = discrete_shift(4)
    fams = [for_aux(builtin_randomset(n), m.aux) for n in ("two-sided", "left", "right", "offset")]
    rep = check_theorems(m, 5, build_oracle(m, 5, fams))
    assert rep.passed, rep.violations
    for name in ("sandwich", "duality", "matching", "matching-validity"):
        assert rep.checked[name] > 0


def test_branching_family_dominated_by_its_nesting():
    m = discrete_shift(4)
    br = branching_example(4)
    nested = br.nesting()
    tables = build_oracle(m, 5, [br, nested])
    rep = check_theorems(m, 5, tables, nested_pairs=[(br, nested)])
    assert rep.passed, rep.violations
    assert rep.checked["nesting-dominance"] == 16
    by_name = {t.family: {r.assertion: r for r in t.rows} for t in tables}
    strict = [A for A, r in by_name[br.name].items() if r.belief < by_name[nested.name][A].belief]
    assert strict


def test_single_point_window_is_trivial():
    m = discrete_shift(1)
    tables = build_oracle(m, 3, [for_aux(left(), m.aux)])
    rep = check_theorems(m, 3, tables)
    assert rep.passed
    for r in tables[0].rows:
        assert {r.belief, r.plausibility, r.fid} <= {0, 1}


def test_symbolic_gap():
    res = positive_belief_gap_symbolic()
    assert res["holds"] and res["bel_at_y"] == 0 and res["pl_at_y"] == 1
