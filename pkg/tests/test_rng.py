"""Tests for the deterministic random number generator."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from rifle.rng import RngState, rng_substream


class TestDeterminism:
    def test_same_seed_same_stream_repeats(self):
        a = RngState(42, 3).uniforms(1000)
        b = RngState(42, 3).uniforms(1000)
        assert_array_equal(a, b)
        assert_array_equal(RngState(42, 3).normals(1000), RngState(42, 3).normals(1000))

    def test_streams_are_distinct(self):
        base = RngState(42, 0).uniforms(256)
        assert not np.array_equal(base, RngState(42, 1).uniforms(256))
        assert not np.array_equal(base, RngState(43, 0).uniforms(256))

    def test_substream_helper_matches_direct_construction(self):
        assert_array_equal(rng_substream(7, 5).normals(64), RngState(7, 5).normals(64))

    def test_sequential_draws_continue_the_stream(self):
        r = RngState(9, 0)
        first = np.concatenate([r.uniforms(10), r.uniforms(10)])
        assert_array_equal(first, RngState(9, 0).uniforms(20))


class TestDistribution:
    def test_uniforms_in_unit_interval(self):
        u = RngState(1, 0).uniforms(10000)
        assert np.all(u >= 0.0) and np.all(u < 1.0)
        assert abs(np.mean(u) - 0.5) < 0.01

    def test_normal_moments(self):
        z = RngState(12345, 0).normals(100000)
        assert_allclose(np.mean(z), 0.0, atol=0.02)
        assert_allclose(np.var(z), 1.0, atol=0.03)
        assert np.all(np.isfinite(z))

    def test_odd_normal_count(self):
        assert RngState(2, 0).normals(7).shape == (7,)
        assert RngState(2, 0).normals(0).shape == (0,)


class TestPermutation:
    def test_is_a_permutation(self):
        p = RngState(5, 0).permutation(50)
        assert_array_equal(np.sort(p), np.arange(50))

    def test_deterministic(self):
        assert_array_equal(RngState(5, 1).permutation(20), RngState(5, 1).permutation(20))

    def test_not_identity_for_moderate_sizes(self):
        p = RngState(6, 0).permutation(100)
        assert not np.array_equal(p, np.arange(100))


class TestValidation:
    def test_counts_must_be_nonnegative(self):
        r = RngState(1, 0)
        with pytest.raises(ValueError):
            r.uniforms(-1)
