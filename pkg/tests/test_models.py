import json
import math

import numpy as np
import pytest
from scipy.stats import chi2

from fracperc.models import (GeneratorSpec, Grid, ModelSpec, ParameterError,
                             RetentionSchedule, sample_fat, sample_gfp,
                             sample_k, sample_mfp)
from fracperc.rng import derive_seed

CHI2_99 = lambda df: float(chi2.ppf(0.99, df))


class TestMfp:
    def test_certain_retention(self):
        g = sample_mfp(1.0, 2, 2, 3, seed=1)
        assert g.cells.size == 2 ** (2 * 3)

    def test_certain_discard(self):
        g = sample_mfp(0.0, 2, 2, 3, seed=1)
        assert g.cells.size == 0

    def test_level_one_mean_count(self):
        R = 10_000
        total = 0
        for r in range(R):
            total += sample_mfp(0.7, 2, 2, 1, seed=derive_seed(42, r)).cells.size
        mean = total / R
        se = math.sqrt(4 * 0.7 * 0.3 / R)
        assert abs(mean - 4 * 0.7) < 3 * se

    def test_monotone_in_p(self):
        for r in range(50):
            seed = derive_seed(3, r)
            lo = sample_mfp(0.4, 2, 2, 4, seed=seed)
            hi = sample_mfp(0.8, 2, 2, 4, seed=seed)
            assert np.all(np.isin(lo.cells, hi.cells))

    def test_tree_consistency(self):
        for r in range(30):
            sample_mfp(0.6, 3, 2, 3, seed=derive_seed(8, r)).check_tree()


class TestKModel:
    def test_full_retention(self):
        g = sample_k(4, 2, 2, 3, seed=0)
        assert g.cells.size == 64

    def test_single_lineage(self):
        g = sample_k(1, 2, 2, 3, seed=5)
        assert g.cells.size == 1
        assert [t.size for t in g.tree] == [1, 1, 1, 1]

    def test_counts_are_exact(self):
        for r in range(20):
            g = sample_k(3, 2, 2, 3, seed=derive_seed(1, r))
            for m, cells in enumerate(g.tree):
                assert cells.size == 3 ** m

    def test_two_subsets_uniform(self):
        R = 10_000
        counts = {}
        for r in range(R):
            g = sample_k(2, 2, 2, 1, seed=derive_seed(999, r))
            key = tuple(int(c) for c in g.cells)
            counts[key] = counts.get(key, 0) + 1
        assert len(counts) == 6
        expected = R / 6
        stat = sum((c - expected) ** 2 / expected for c in counts.values())
        assert stat < CHI2_99(5)

    def test_monotone_in_k(self):
        for r in range(50):
            seed = derive_seed(17, r)
            lo = sample_k(2, 2, 2, 3, seed=seed)
            hi = sample_k(3, 2, 2, 3, seed=seed)
            assert np.all(np.isin(lo.cells, hi.cells))

    def test_k_out_of_range(self):
        with pytest.raises(ParameterError):
            sample_k(0, 2, 2, 1, seed=0)
        with pytest.raises(ParameterError):
            sample_k(5, 2, 2, 1, seed=0)


class TestGfp:
    def test_constant_equals_k_model_exactly(self):
        gen = GeneratorSpec("constant", k=3)
        for r in range(20):
            seed = derive_seed(4, r)
            a = sample_gfp(gen, 2, 2, 3, seed=seed)
            b = sample_k(3, 2, 2, 3, seed=seed)
            for ta, tb in zip(a.tree, b.tree):
                assert np.array_equal(ta, tb)

    def test_binomial_level_one_distribution(self):
        gen = GeneratorSpec("binomial", p=0.7)
        R = 10_000
        counts = np.zeros(5)
        for r in range(R):
            g = sample_gfp(gen, 2, 2, 1, seed=derive_seed(31, r))
            counts[g.cells.size] += 1
        pmf = gen.pmf_array(4)
        stat = float((((counts - R * pmf) ** 2) / (R * pmf)).sum())
        assert stat < CHI2_99(4)

    def test_point_mass_full(self):
        gen = GeneratorSpec("pmf", pmf=(0.0, 0.0, 0.0, 0.0, 1.0))
        g = sample_gfp(gen, 2, 2, 2, seed=9)
        assert g.cells.size == 16

    def test_validation(self):
        with pytest.raises(ParameterError):
            GeneratorSpec("pmf", pmf=(0.5, 0.5)).validate(4)
        with pytest.raises(ParameterError):
            GeneratorSpec("pmf", pmf=(0.5, 0.1, 0.1, 0.1, 0.1)).validate(4)
        with pytest.raises(ParameterError):
            GeneratorSpec("binomial", p=1.5).validate(4)
        with pytest.raises(ParameterError):
            GeneratorSpec("constant", k=9).validate(4)

    def test_parse(self):
        assert GeneratorSpec.parse("constant:3").k == 3
        assert GeneratorSpec.parse("binomial:0.5").p == 0.5
        assert GeneratorSpec.parse("pmf:0,0,1").pmf == (0.0, 0.0, 1.0)
        with pytest.raises(ParameterError):
            GeneratorSpec.parse("bogus:1")


class TestFat:
    def test_all_ones_full(self):
        g = sample_fat(RetentionSchedule.constant(1.0), 2, 2, 3, seed=2)
        assert g.cells.size == 64

    def test_constant_schedule_equals_mfp_exactly(self):
        sched = RetentionSchedule.constant(0.7)
        for r in range(20):
            seed = derive_seed(12, r)
            a = sample_fat(sched, 2, 2, 4, seed=seed)
            b = sample_mfp(0.7, 2, 2, 4, seed=seed)
            for ta, tb in zip(a.tree, b.tree):
                assert np.array_equal(ta, tb)

    def test_mean_measure_matches_product(self):
        sched = RetentionSchedule(prefix=(), tail=("geometric-complement", 0.5, 0.5))
        R = 2000
        n = 6
        vals = np.empty(R)
        for r in range(R):
            g = sample_fat(sched, 2, 2, n, seed=derive_seed(10, r))
            vals[r] = g.cells.size / 4 ** n
        target = float(np.prod(sched.values(n)))
        se = vals.std(ddof=1) / math.sqrt(R)
        assert abs(vals.mean() - target) < 3 * se

    def test_schedule_validation(self):
        with pytest.raises(ParameterError):
            RetentionSchedule(prefix=(0.9, 0.5), tail=("constant", 1.0))
        with pytest.raises(ParameterError):
            RetentionSchedule(prefix=(), tail=("constant", 0.0))
        with pytest.raises(ParameterError):
            RetentionSchedule(prefix=(), tail=("geometric-complement", 0.5, 1.5))
        with pytest.raises(ParameterError):
            RetentionSchedule(prefix=(0.99,), tail=("geometric-complement", 0.9, 0.9))

    def test_schedule_parse(self):
        s = RetentionSchedule.parse("0.5,0.75", "constant:0.9")
        assert s.prefix == (0.5, 0.75) and s.tail == ("constant", 0.9)
        assert s.value_at(1) == 0.5 and s.value_at(3) == 0.9
        s = RetentionSchedule.parse("", "geometric-complement:c=0.5,q=0.5")
        assert s.value_at(1) == 0.75 and s.value_at(2) == 0.875
        with pytest.raises(ParameterError):
            RetentionSchedule.parse("", "geometric-complement:c=0.5")


class TestGridSerialization:
    def test_binary_round_trip(self):
        g = sample_mfp(0.6, 3, 2, 3, seed=77)
        back = Grid.from_bytes(g.to_bytes())
        assert (back.N, back.d, back.n, back.seed) == (g.N, g.d, g.n, g.seed)
        assert back.model["model"] == "mfp"
        assert np.array_equal(back.cells, g.cells)

    def test_bytes_reproducible(self):
        a = sample_k(3, 2, 2, 4, seed=123).to_bytes()
        b = sample_k(3, 2, 2, 4, seed=123).to_bytes()
        assert a == b

    def test_empty_and_full_grids(self):
        for p in (0.0, 1.0):
            g = sample_mfp(p, 2, 2, 3, seed=5)
            back = Grid.from_bytes(g.to_bytes())
            assert np.array_equal(back.cells, g.cells)

    def test_json_round_trip(self):
        g = sample_fat(RetentionSchedule.constant(0.8), 2, 2, 3, seed=4)
        back = Grid.from_json_obj(json.loads(json.dumps(g.to_json_obj())))
        assert np.array_equal(back.cells, g.cells)
        assert back.model == g.model

    def test_truncated_payload_rejected(self):
        g = sample_mfp(0.7, 2, 2, 3, seed=6)
        data = g.to_bytes()
        with pytest.raises(ParameterError):
            Grid.from_bytes(data[:4] + b"\x00" * 8)


class TestCubeUniform:
    def test_deterministic_per_address(self):
        from fracperc.index import CubeIndex
        from fracperc.models import cube_uniform

        idx = CubeIndex(((0, 1), (1, 0)), 2, 2)
        assert cube_uniform(3, idx, 0) == cube_uniform(3, idx, 0)
        assert cube_uniform(3, idx, 0) != cube_uniform(3, idx, 1)

    def test_mean_over_random_addresses(self):
        from fracperc.index import CubeIndex
        from fracperc.models import cube_uniform

        rng = np.random.default_rng(0)
        level = 8
        flats = rng.choice(4 ** level, size=20_000, replace=False)
        total = 0.0
        for flat in flats:
            x, y = divmod(int(flat), 2 ** level)
            digits = tuple(((x >> (level - 1 - j)) & 1, (y >> (level - 1 - j)) & 1)
                           for j in range(level))
            total += cube_uniform(7, CubeIndex(digits, 2, 2), 0)
        assert abs(total / len(flats) - 0.5) < 0.01

    def test_matches_sampler_decisions(self):
        # the mfp sampler keeps a child exactly when its stream-0 uniform
        # is below p
        from fracperc.index import CubeIndex
        from fracperc.models import cube_uniform

        p = 0.63
        g = sample_mfp(p, 2, 2, 2, seed=11)
        level1 = set(int(c) for c in g.tree[1])
        for x in range(2):
            for y in range(2):
                idx = CubeIndex(((x, y),), 2, 2)
                kept = cube_uniform(11, idx, 0) < p
                assert ((x * 2 + y) in level1) == kept


class TestModelSpec:
    def test_descriptor_round_trip(self):
        specs = [
            ModelSpec("mfp", 2, 2, p=0.7),
            ModelSpec("k", 3, 2, k=5),
            ModelSpec("gfp", 2, 2, gen=GeneratorSpec("binomial", p=0.4)),
            ModelSpec("fat", 2, 2,
                      schedule=RetentionSchedule(prefix=(0.5,),
                                                 tail=("constant", 0.9))),
        ]
        for spec in specs:
            back = ModelSpec.from_descriptor(spec.descriptor())
            assert back.descriptor() == spec.descriptor()
            g1 = spec.sample(2, 11)
            g2 = back.sample(2, 11)
            assert np.array_equal(g1.cells, g2.cells)

    def test_missing_parameters(self):
        with pytest.raises(ParameterError):
            ModelSpec("mfp", 2, 2)
        with pytest.raises(ParameterError):
            ModelSpec("quantum", 2, 2)
