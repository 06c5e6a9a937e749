import math
from fractions import Fraction

import pytest

from fracperc.connectivity import crosses, gamma_event
from fracperc.estimators import (clopper_pearson, enumerate_exact,
                                 enumeration_size, estimate_crossing,
                                 estimate_gamma, estimate_site_pc, search_kc)
from fracperc.models import (GeneratorSpec, ModelSpec, ParameterError,
                             RetentionSchedule, sample_fat, sample_k)
from fracperc.rng import derive_seed


class TestClopperPearson:
    def test_bounds_bracket_point(self):
        for successes, trials in [(0, 10), (10, 10), (3, 17), (250, 1000)]:
            lo, hi = clopper_pearson(successes, trials)
            assert 0.0 <= lo <= successes / trials <= hi <= 1.0

    def test_degenerate_ends(self):
        lo, hi = clopper_pearson(0, 20)
        assert lo == 0.0 and hi < 0.2
        lo, hi = clopper_pearson(20, 20)
        assert hi == 1.0 and lo > 0.8

    def test_narrower_at_higher_n(self):
        lo1, hi1 = clopper_pearson(5, 10)
        lo2, hi2 = clopper_pearson(500, 1000)
        assert hi2 - lo2 < hi1 - lo1


class TestEstimateCrossing:
    def test_full_model_is_one(self):
        est = estimate_crossing(ModelSpec("k", 2, 2, k=4), 3, 200, seed=1)
        assert est.point == 1.0 and est.ci_high == 1.0

    def test_small_k_level_one_is_zero(self):
        est = estimate_crossing(ModelSpec("k", 3, 2, k=2), 1, 200, seed=1)
        assert est.point == 0.0 and est.ci_low == 0.0

    def test_pair_subsets_near_third(self):
        est = estimate_crossing(ModelSpec("k", 2, 2, k=2), 1, 10_000, seed=4)
        se = math.sqrt(est.point * (1 - est.point) / est.replicates)
        assert abs(est.point - 1 / 3) < 3 * se

    def test_deterministic_and_jobs_invariant(self):
        spec = ModelSpec("mfp", 2, 2, p=0.7)
        a = estimate_crossing(spec, 3, 400, seed=9)
        b = estimate_crossing(spec, 3, 400, seed=9)
        c = estimate_crossing(spec, 3, 400, seed=9, jobs=2)
        assert a == b == c

    def test_non_increasing_in_depth(self):
        spec = ModelSpec("mfp", 2, 2, p=0.75)
        for r in range(80):
            seed = derive_seed(2, r)
            flags = [crosses(spec.sample(n, seed), 1) for n in (1, 2, 3)]
            for a, b in zip(flags, flags[1:]):
                assert a or not b


class TestEnumerateExact:
    def test_level_one_k_values(self):
        want = {1: Fraction(0), 2: Fraction(1, 3), 3: Fraction(1), 4: Fraction(1)}
        for k, value in want.items():
            assert enumerate_exact(ModelSpec("k", 2, 2, k=k), 1) == value

    def test_certain_retention(self):
        assert enumerate_exact(ModelSpec("mfp", 2, 2, p=1.0), 2) == 1

    def test_half_density_level_one_by_hand(self):
        # subsets of the 2x2 grid crossing horizontally: both bottom cells,
        # both top cells, or any superset: 7 of the 16 equally likely sets
        got = enumerate_exact(ModelSpec("mfp", 2, 2, p=0.5), 1)
        assert got == Fraction(7, 16)

    def test_matches_monte_carlo_level_two(self):
        spec = ModelSpec("k", 2, 2, k=3)
        exact = float(enumerate_exact(spec, 2))
        est = estimate_crossing(spec, 2, 10_000, seed=3)
        se = math.sqrt(max(est.point * (1 - est.point), 1e-6) / est.replicates)
        assert abs(est.point - exact) < 3.5 * se

    def test_gfp_and_fat_supported(self):
        gen = GeneratorSpec("pmf", pmf=(0.0, 0.0, 0.5, 0.3, 0.2))
        value = enumerate_exact(ModelSpec("gfp", 2, 2, gen=gen), 1)
        # crossing only via a horizontal pair: size-2 sets cross 2/6 of the
        # time, size-3 sets always, size-4 always
        assert value == Fraction(1, 2) * Fraction(1, 3) + Fraction(3, 10) + Fraction(1, 5)
        sched = RetentionSchedule(prefix=(0.5,), tail=("constant", 1.0))
        assert enumerate_exact(ModelSpec("fat", 2, 2, schedule=sched), 1) == Fraction(7, 16)

    def test_size_guard(self):
        assert enumeration_size(ModelSpec("k", 2, 2, k=2), 2) == 216
        with pytest.raises(ParameterError):
            enumerate_exact(ModelSpec("mfp", 2, 2, p=0.5), 3)


class TestSearchKc:
    def test_level_one_threshold_table(self):
        res = search_kc(2, 2, 1, 10_000, 0.5, seed=6)
        points = [e.point for e in res.estimates]
        assert points[0] == 0.0
        assert abs(points[1] - 1 / 3) < 0.02
        assert points[2] == 1.0 and points[3] == 1.0
        assert res.k_hat == 3

    def test_threshold_below_third(self):
        res = search_kc(2, 2, 1, 10_000, 0.30, seed=6)
        assert res.k_hat == 2

    def test_estimates_non_decreasing(self):
        res = search_kc(3, 2, 2, 300, 0.5, seed=2)
        points = [e.point for e in res.estimates]
        assert all(a <= b for a, b in zip(points, points[1:]))

    def test_jobs_invariant(self):
        a = search_kc(2, 2, 2, 300, 0.5, seed=8)
        b = search_kc(2, 2, 2, 300, 0.5, seed=8, jobs=2)
        assert a == b

    def test_per_replicate_indicators_monotone_in_k(self):
        for r in range(100):
            seed = derive_seed(5, r)
            flags = [crosses(sample_k(k, 2, 2, 2, seed=seed), 1)
                     for k in (1, 2, 3, 4)]
            for a, b in zip(flags, flags[1:]):
                assert b or not a


class TestSitePercolation:
    def test_degenerate_thresholds(self):
        sweep = estimate_site_pc(2, 8, 50, [0.0, 1.0], seed=3)
        assert sweep.estimates[0].point == 0.0
        assert sweep.estimates[1].point == 1.0

    def test_estimates_monotone(self):
        sweep = estimate_site_pc(2, 16, 200, [0.3, 0.5, 0.6, 0.7, 0.9], seed=4)
        points = [e.point for e in sweep.estimates]
        assert all(a <= b for a, b in zip(points, points[1:]))
        assert 0.0 < sweep.crossing_point < 1.0

    def test_unbracketed_curve_gives_nan(self):
        sweep = estimate_site_pc(2, 8, 50, [0.9, 0.95], seed=3)
        assert math.isnan(sweep.crossing_point)

    def test_p_grid_must_be_sorted(self):
        with pytest.raises(ParameterError):
            estimate_site_pc(2, 8, 10, [0.5, 0.3], seed=1)

    def test_jobs_invariant(self):
        a = estimate_site_pc(2, 16, 100, [0.5, 0.6], seed=5)
        b = estimate_site_pc(2, 16, 100, [0.5, 0.6], seed=5, jobs=2)
        assert a.crossing_point == b.crossing_point
        assert [e.point for e in a.estimates] == [e.point for e in b.estimates]


class TestGammaEstimate:
    def test_certain_retention(self):
        sched = RetentionSchedule.constant(1.0)
        est = estimate_gamma(sched, 2, 4, (Fraction(1, 2), Fraction(1, 2)), 1,
                             100, seed=2)
        assert est.point == 1.0

    def test_positive_at_high_density(self):
        sched = RetentionSchedule.constant(0.99)
        est = estimate_gamma(sched, 2, 5, (Fraction(1, 2), Fraction(1, 2)), 1,
                             300, seed=7)
        assert est.point > 0.0

    def test_monotone_under_schedule_coupling(self):
        lo = RetentionSchedule.constant(0.9)
        hi = RetentionSchedule.constant(0.97)
        x = (Fraction(1, 2), Fraction(1, 2))
        for r in range(60):
            seed = derive_seed(9, r)
            glo = sample_fat(lo, 2, 2, 4, seed=seed)
            ghi = sample_fat(hi, 2, 2, 4, seed=seed)
            if gamma_event(glo, x, 1):
                assert gamma_event(ghi, x, 1)
