import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from gme.errors import InvalidArgument
from gme.mixture import (
    CHUNK_SIZE,
    CenterSet,
    EntropyEstimate,
    MixtureConfig,
    gaussian_entropy_1d,
    log_density,
    log_density_near,
    reduce_centers,
    reduce_dimension,
    sample_centers,
    sample_mixture,
)

H1 = 0.5 * math.log(2 * math.pi * math.e)


def naive_log_density(config, centers, x):
    d2 = np.sum((np.asarray(x)[None, :] - centers.centers) ** 2, axis=1)
    dens = np.mean(np.exp(-0.5 * d2 / config.sigma2)) / (2 * math.pi * config.sigma2) ** (config.n / 2)
    return math.log(dens)


class TestConfig:
    def test_defaults_and_properties(self):
        c = MixtureConfig(3, 4, 2.0, 0.25)
        assert c.s2 == pytest.approx(0.5)
        assert c.h_sigma == pytest.approx(0.5 * math.log(2 * math.pi * math.e * 2.0))

    @pytest.mark.parametrize("kwargs", [
        dict(n=0, q=2), dict(n=1, q=1), dict(n=1, q=2, sigma2=0.0),
        dict(n=1, q=2, mu=-0.1), dict(n=1.5, q=2), dict(n=1, q=2, mu=float("nan")),
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(InvalidArgument):
            MixtureConfig(**kwargs)

    def test_series_regime_warning(self):
        with pytest.warns(RuntimeWarning):
            MixtureConfig(4, 4, 1.0, 0.5).check_series_regime()

    def test_estimate_stderr_contract(self):
        with pytest.raises(InvalidArgument):
            EntropyEstimate(1.0, 0.1, "series-brute")
        with pytest.raises(InvalidArgument):
            EntropyEstimate(1.0, 0.0, "guess")
        assert EntropyEstimate(1.0, 0.1, "monte-carlo").to_dict()["stderr"] == 0.1


class TestLogDensity:
    def test_coincident_centers_give_standard_normal(self):
        c = MixtureConfig(1, 2, 1.0, 0.0)
        w = CenterSet(np.zeros((2, 1)))
        assert log_density(c, w, np.array([0.0])) == pytest.approx(-0.9189385332046727, abs=1e-15)

    def test_symmetric_pair(self):
        c = MixtureConfig(1, 2, 1.0, 1.0)
        w = CenterSet([[-2.0], [2.0]])
        assert log_density(c, w, np.array([0.0])) == pytest.approx(-2.9189385332046727, abs=1e-14)

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(3)
        c = MixtureConfig(2, 3, 1.3, 0.4)
        w = CenterSet(rng.normal(size=(3, 2)))
        for _ in range(20):
            x = rng.normal(size=2)
            assert abs(log_density(c, w, x) - naive_log_density(c, w, x)) < 1e-12

    def test_far_point_is_finite(self):
        c = MixtureConfig(3, 4, 1.0, 1.0)
        w = CenterSet(np.arange(12.0).reshape(4, 3))
        v = log_density(c, w, np.full(3, 1e6))
        assert np.isfinite(v) and v < -1e11

    def test_batch_shape_and_dimension_check(self):
        c = MixtureConfig(2, 3, 1.0, 0.1)
        w = sample_centers(c, 1)
        assert log_density(c, w, np.zeros((5, 2))).shape == (5,)
        with pytest.raises(InvalidArgument):
            log_density(c, w, np.zeros(3))
        with pytest.raises(InvalidArgument):
            log_density(MixtureConfig(2, 4, 1.0, 0.1), w, np.zeros(2))

    def test_integrates_to_one_in_1d(self):
        c = MixtureConfig(1, 3, 0.7, 2.0)
        w = CenterSet([[-1.2], [0.3], [2.5]])
        sigma = math.sqrt(c.sigma2)
        x = np.linspace(-40 * sigma, 40 * sigma, 400_001)
        f = np.exp(log_density(c, w, x[:, None]))
        assert abs(trapezoid(f, x) - 1.0) < 1e-8

    def test_fast_path_agrees_on_samples(self):
        c = MixtureConfig(3, 5, 0.8, 0.6)
        w = sample_centers(c, 11)
        x = sample_mixture(c, w, 5000, 12)
        assert np.max(np.abs(log_density_near(c, w, x) - log_density(c, w, x))) < 1e-12

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 4), st.integers(2, 6), st.floats(0.1, 5.0), st.integers(0, 2 ** 31))
    def test_naive_agreement_property(self, n, q, sigma2, seed):
        rng = np.random.default_rng(seed)
        c = MixtureConfig(n, q, sigma2, 0.5)
        w = CenterSet(rng.normal(size=(q, n)))
        x = rng.normal(size=n)
        assert abs(log_density(c, w, x) - naive_log_density(c, w, x)) < 1e-11


class TestSampling:
    def test_zero_mu_gives_zero_centers(self):
        w = sample_centers(MixtureConfig(3, 5, 2.0, 0.0), 9)
        assert np.all(w.centers == 0.0)

    def test_center_variance(self):
        c = MixtureConfig(1, 10_000, 4.0, 0.25)
        w = sample_centers(c, 5)
        assert abs(np.var(w.centers) / c.s2 - 1) < 0.05

    def test_centers_deterministic(self):
        c = MixtureConfig(2, 3, 1.0, 0.3)
        assert sample_centers(c, 42) == sample_centers(c, 42)
        assert not sample_centers(c, 42) == sample_centers(c, 43)

    def test_single_gaussian_moments(self):
        c = MixtureConfig(1, 2, 1.0, 0.0)
        x = sample_mixture(c, CenterSet(np.zeros((2, 1))), 10 ** 6, 1)
        assert abs(x.mean()) < 5e-3
        assert abs(x.var() - 1.0) < 0.01

    def test_second_moment_of_pair(self):
        a = 1.5
        c = MixtureConfig(1, 2, 1.0, 1.0)
        x = sample_mixture(c, CenterSet([[-a], [a]]), 400_000, 2)
        assert abs(np.mean(x ** 2) / (1.0 + a * a) - 1) < 0.02

    def test_zero_count(self):
        c = MixtureConfig(2, 3, 1.0, 0.1)
        assert sample_mixture(c, sample_centers(c, 0), 0, 0).shape == (0, 2)

    def test_points_deterministic_and_chunked(self):
        c = MixtureConfig(2, 3, 1.0, 0.1)
        w = sample_centers(c, 0)
        a = sample_mixture(c, w, CHUNK_SIZE + 10, 7)
        b = sample_mixture(c, w, CHUNK_SIZE + 10, 7)
        assert np.array_equal(a, b)
        # a prefix of whole chunks does not depend on the total count
        assert np.array_equal(sample_mixture(c, w, CHUNK_SIZE, 7), a[:CHUNK_SIZE])


class TestReduction:
    def test_n_le_q_unchanged(self):
        c = MixtureConfig(3, 5)
        assert reduce_dimension(c) == (c, 0.0)
        c = MixtureConfig(4, 4)
        assert reduce_dimension(c) == (c, 0.0)

    def test_offset(self):
        reduced, offset = reduce_dimension(MixtureConfig(7, 4, 1.0, 0.2))
        assert reduced.n == 4 and reduced.q == 4 and reduced.mu == 0.2
        assert offset == pytest.approx(4.2568155996140185, abs=1e-12)
        assert offset == pytest.approx(3 * gaussian_entropy_1d(1.0))

    def test_rotation_preserves_distances(self):
        c = MixtureConfig(7, 4, 1.0, 0.5)
        w = sample_centers(c, 3)
        r = reduce_centers(w)
        assert r.centers.shape == (4, 4)
        d_full = np.linalg.norm(w.centers[:, None] - w.centers[None], axis=2)
        d_red = np.linalg.norm(r.centers[:, None] - r.centers[None], axis=2)
        assert np.allclose(d_full, d_red, atol=1e-12)

    def test_density_factorizes_after_rotation(self):
        # f_n(x) = f_q(Q^T x) * N(0, sigma^2) density on the orthogonal complement
        c = MixtureConfig(6, 3, 0.9, 0.7)
        w = sample_centers(c, 8)
        qmat, rmat = np.linalg.qr(w.centers.T, mode="complete")
        rc = CenterSet((qmat.T @ w.centers.T)[:3].T)
        x = np.random.default_rng(0).normal(size=6)
        y = qmat.T @ x
        rest = -0.5 * np.sum(y[3:] ** 2) / c.sigma2 - 1.5 * math.log(2 * math.pi * c.sigma2)
        assert log_density(c, w, x) == pytest.approx(
            log_density(c.replace(n=3), rc, y[:3]) + rest, abs=1e-12)
