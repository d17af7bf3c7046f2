import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from issmcmc import (Dataset, InadmissibleSubset, ProbitModel, SamplerConfig, SubsetError, SubsetIndex,
                     make_subset, mean_summary, random_subset)
from issmcmc.models import GaussMixModel
from issmcmc.subsets import delta_n


class TestMakeSubset:
    def test_sorts_general_subset(self):
        U = make_subset([2, 0, 1], 5)
        assert U.indices.tolist() == [0, 1, 2]

    def test_unsorted_run_is_general(self):
        assert make_subset([2, 0, 1], 5).kind == "general"

    def test_duplicate_rejected(self):
        with pytest.raises(SubsetError, match="duplicate"):
            make_subset([0, 0, 1], 5)

    def test_window_detected(self):
        U = make_subset([3, 4, 5], 6)
        assert U.kind == "window" and U.start == 3

    @pytest.mark.parametrize("bad", [[], [5], [-1, 2]])
    def test_empty_or_out_of_range(self, bad):
        with pytest.raises(SubsetError):
            make_subset(bad, 5)

    def test_indices_are_read_only(self):
        U = make_subset([1, 3], 5)
        with pytest.raises(ValueError):
            U.indices[0] = 4

    def test_equality_and_hash(self):
        a = make_subset([1, 3, 4], 6)
        b = SubsetIndex.from_sorted(np.array([1, 3, 4]))
        assert a == b and hash(a) == hash(b)
        assert SubsetIndex.window(1, 3) != SubsetIndex.from_sorted(np.array([1, 2, 3]))

    def test_keys(self):
        assert SubsetIndex.window(17, 5).key == "17"
        g = make_subset([0, 4, 9], 10)
        assert len(g.key) == 16 and g.key == make_subset([9, 0, 4], 10).key


class TestRandomSubset:
    def test_sizes_and_bounds(self, rng):
        U = random_subset(50, 7, rng)
        assert U.n == 7 and len(set(U.indices.tolist())) == 7
        assert U.indices.min() >= 0 and U.indices.max() < 50

    def test_window_kind(self, rng):
        U = random_subset(50, 7, rng, "window")
        assert U.kind == "window" and 0 <= U.start <= 43

    def test_size_checked(self, rng):
        with pytest.raises(SubsetError):
            random_subset(5, 6, rng)


class TestDataset:
    def test_read_only(self):
        d = Dataset(np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            d.y[0] = 3.0

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Dataset(np.array([1.0, np.nan]))

    def test_covariate_shape(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros(3), X=np.zeros((2, 2)))


class TestMeanSummary:
    def test_probit_mean(self):
        d = Dataset(np.array([1.0, 0.0, 1.0, 0.0]), kind="probit")
        assert mean_summary(ProbitModel(), d, SubsetIndex.full(4))[0] == 0.5

    def test_full_equals_none(self, rng):
        m = ProbitModel()
        d = m.simulate([0.3], 40, rng)
        assert np.array_equal(mean_summary(m, d, None), mean_summary(m, d, SubsetIndex.full(40)))

    def test_gaussmix_inadmissible(self, rng):
        m = GaussMixModel()
        d = m.simulate([-1, 1, 0.5, 0.5], 20, rng)
        ones = np.flatnonzero(d.labels == 1)[:3]
        with pytest.raises(InadmissibleSubset):
            mean_summary(m, d, SubsetIndex.from_sorted(np.sort(ones)))

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 30))
    def test_delta_matches_summary_difference(self, seed, n):
        rng = np.random.default_rng(seed)
        m = ProbitModel()
        d = m.simulate([0.5], 60, rng)
        U = random_subset(60, n, rng)
        dv = delta_n(m, d, U)
        assert np.allclose(dv.per_obs, mean_summary(m, d, None) - mean_summary(m, d, U), atol=1e-12, rtol=0)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), half=st.integers(1, 20))
    def test_additive_union_average(self, seed, half):
        rng = np.random.default_rng(seed)
        pm = ProbitModel()
        d = pm.simulate([0.2], 80, rng)
        perm = rng.permutation(80)
        a = SubsetIndex.from_sorted(np.sort(perm[:half]))
        b = SubsetIndex.from_sorted(np.sort(perm[half:2 * half]))
        u = SubsetIndex.from_sorted(np.sort(perm[:2 * half]))
        avg = 0.5 * (mean_summary(pm, d, a) + mean_summary(pm, d, b))
        assert np.allclose(mean_summary(pm, d, u), avg, atol=1e-12, rtol=0)


class TestSamplerConfig:
    @pytest.mark.parametrize("kw", [{"n": 0}, {"n": 5, "epsilon": -1.0}, {"n": 5, "iterations": 0},
                                    {"n": 5, "burn_in": 1.0}, {"n": 5, "subset_proposal": "x"},
                                    {"n": 5, "delta_scale": "x"}, {"n": 5, "window_lambda": 0.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SamplerConfig(**kw)

    def test_n_larger_than_N(self):
        with pytest.raises(ValueError):
            SamplerConfig(n=11).check_dataset(10)
