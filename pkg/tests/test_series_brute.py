import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import gme.series_brute as sb
from gme.errors import AssemblyMismatch, InvalidArgument, PreconditionError
from gme.mixture import MixtureConfig
from gme.series_brute import (
    MomentName,
    alpha_quartic_sum,
    c2_polynomial,
    entropy_series,
    moment_closed_form,
    moment_mc,
    moment_mc_table,
    series_coefficients,
)

H1 = 0.5 * math.log(2 * math.pi * math.e)


class TestMomentTable:
    def test_names(self):
        assert len(MomentName) == 25
        assert {m.value for m in MomentName} >= {"aa", "ab4", "F", "H", "J", "D", "M"}

    @pytest.mark.parametrize("name,n,q,want", [
        ("A", 3, 5, 9.0), ("B2", 3, 5, 225.0), ("ab4", 2, 4, 24.0), ("D", 4, 7, 0.0),
        ("M", 2, 3, 0.0), ("aabb", 3, 3, 9.0), ("A2", 2, 4, 24.0),
    ])
    def test_values(self, name, n, q, want):
        assert moment_closed_form(name, n, q) == want

    @pytest.mark.parametrize("q", range(2, 15))
    def test_alpha_quartic_sum(self, q):
        assert alpha_quartic_sum(q) == pytest.approx((q - 2) ** 2 / (q - 1), abs=1e-13)

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            moment_closed_form("XY", 2, 3)

    @pytest.mark.parametrize("n,q", [(3, 5), (2, 4)])
    def test_mc_agrees(self, n, q):
        table = moment_mc_table(n, q, 300_000, seed=5)
        for name in MomentName:
            mean, se = table[name]
            exact = moment_closed_form(name, n, q)
            assert abs(mean - exact) <= 5 * se + 1e-12, name

    def test_q2_alpha_family_exact_zero(self):
        table = moment_mc_table(1, 2, 2000, seed=1)
        for name in ("A", "B", "F", "J", "D", "M", "AB"):
            assert table[MomentName(name)] == (0.0, 0.0)
        assert table[MomentName.aa][1] > 0

    def test_q3_odd_moments_cancel_exactly(self):
        mean, se = moment_mc("M", 2, 3, 50_000, seed=2)
        assert mean == 0.0 and se == 0.0

    def test_mc_deterministic_and_thread_independent(self):
        a = moment_mc("J", 2, 4, 70_000, seed=9, threads=1)
        b = moment_mc("J", 2, 4, 70_000, seed=9, threads=3)
        assert a == b

    def test_mc_preconditions(self):
        with pytest.raises(PreconditionError):
            moment_mc("A", 5, 3, 10_000, 0)
        with pytest.raises(InvalidArgument):
            moment_mc("A", 2, 3, 10, 0)

    def test_c2_polynomial_mean_matches(self):
        # the c2 polynomial averaged over sampled moments, not over expectations
        n, q = 2, 4
        rng = np.random.default_rng(0)
        vals = sb._moment_samples(n, q, 400_000, rng)
        c2 = c2_polynomial(vals, q)
        se = c2.std() / math.sqrt(c2.size)
        assert abs(c2.mean() - sb.c2_expected(n, q)) < 5 * se


class TestCoefficients:
    def test_n1_q2(self):
        c = series_coefficients(1, 2)
        assert c.c1_expect == pytest.approx(0.75, abs=1e-15)
        assert c.c2_expect == pytest.approx(3 / 16, abs=1e-15)

    def test_n3_q3(self):
        c = series_coefficients(3, 3)
        assert c.c1_expect == pytest.approx(1.25, abs=1e-15)
        assert c.c2_expect == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("q", range(2, 13))
    def test_grid(self, q):
        for n in range(1, q + 1):
            c = series_coefficients(n, q)
            assert c.c1_expect == pytest.approx(n * (2 * q - 1) / (2 * q * (q - 1)), rel=1e-9)
            assert c.c2_expect == pytest.approx(n * (n + q) * (q - 1) / (4 * q * q), rel=1e-9)

    def test_transcription_error_is_loud(self, monkeypatch):
        real = sb.moment_closed_form

        def broken(name, n, q):
            v = real(name, n, q)
            return v * 1.01 if MomentName(name) is MomentName.H else v

        monkeypatch.setattr(sb, "moment_closed_form", broken)
        with pytest.raises(AssemblyMismatch):
            series_coefficients(3, 4)


class TestEntropySeries:
    @pytest.mark.parametrize("n,q,s2", [(1, 2, 1.0), (3, 5, 2.5), (4, 4, 0.3)])
    def test_zero_mu(self, n, q, s2):
        for order in (0, 1, 2):
            v = entropy_series(MixtureConfig(n, q, s2, 0.0), order).value
            assert v == pytest.approx(n * 0.5 * math.log(2 * math.pi * math.e * s2), abs=1e-14)

    def test_first_order_value(self):
        est = entropy_series(MixtureConfig(3, 3, 1.0, 0.1), order=1)
        assert est.value == pytest.approx(4.3568156, abs=1e-7)
        assert est.stderr == 0.0 and est.method == "series-brute" and est.order == 1

    def test_second_order_value(self):
        # c2(3, 3) = 1, so the mu^2 term is exactly -0.01
        v = entropy_series(MixtureConfig(3, 3, 1.0, 0.1), order=2).value
        assert v == pytest.approx(3 * H1 + 0.1 - 0.01, abs=1e-14)

    @pytest.mark.parametrize("q", [20, 50, 200])
    def test_second_order_gap_large_q(self, q):
        mu = 1e-3
        c = MixtureConfig(q, q, 1.0, mu)
        gap = entropy_series(c, 2).value - entropy_series(c, 1).value
        assert gap == pytest.approx(-(q - 1) / 2 * mu * mu, rel=1e-10)
        assert gap / (-(q / 2) * mu * mu) == pytest.approx(1.0, abs=1.5 / q)

    @pytest.mark.parametrize("q", range(2, 11))
    def test_below_component_bound(self, q):
        for mu in np.linspace(0, 1 / q, 41):
            v = entropy_series(MixtureConfig(q, q, 1.0, float(mu)), 2).value
            assert v <= q * H1 + math.log(q) + 1e-12

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 6), st.integers(2, 8), st.floats(0.1, 4.0),
           st.floats(0.0, 0.1), st.floats(1e-4, 0.05))
    def test_first_order_increasing(self, n, q, s2, mu, dmu):
        n = min(n, q)
        a = entropy_series(MixtureConfig(n, q, s2, mu), 1).value
        b = entropy_series(MixtureConfig(n, q, s2, mu + dmu), 1).value
        assert b > a

    def test_bad_order(self):
        with pytest.raises(InvalidArgument):
            entropy_series(MixtureConfig(2, 3, 1.0, 0.1), 3)

    def test_unreduced_dimension_warns(self):
        with pytest.warns(RuntimeWarning, match="n=5 > q=3"):
            entropy_series(MixtureConfig(5, 3, 1.0, 0.01), 2)

    def test_large_n_mu_warns(self):
        with pytest.warns(RuntimeWarning, match="n\\*mu"):
            entropy_series(MixtureConfig(4, 4, 1.0, 0.5), 2)
