"""Kernel complexity, critical radii, stopping time, rate fits.

Oracles: closed-form fixed points worked out by hand (r = 1/n for a single
eigenvalue, r = sigma0^2 for flat spectra), a brute-force stopping-time scan,
and the analytic r = (2 sigma0^2 / n)^(2/3) approximation for j^-2 spectra.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ntkes import rng
from ntkes.complexity import (
    ComplexityProfile,
    complexity_profile,
    fixed_point,
    kernel_complexity,
    population_fixed_point,
    rate_slope,
    stopping_time,
)
from ntkes.errors import ConfigError, DatasetError, NumericalError

spectra = arrays(np.float64, st.integers(1, 40),
                 elements=st.floats(1e-6, 1.0, allow_nan=False))


class TestKernelComplexity:
    def test_all_eigenvalues_above_cutoff(self):
        lam = np.array([0.5, 0.4, 0.3])
        # every min is eps^2 = 0.04, so the result is eps * sqrt(len/n) = eps
        assert kernel_complexity(lam, 3, 0.2) == pytest.approx(0.2, rel=1e-14)

    def test_cutoff_above_top_eigenvalue(self):
        lam = np.array([0.5, 0.4, 0.3])
        assert kernel_complexity(lam, 3, 10.0) == pytest.approx(
            np.sqrt(1.2 / 3), rel=1e-14)

    def test_frozen_mixed_case(self):
        assert kernel_complexity(np.array([1.0, 0.01]), 2, np.sqrt(0.1)) == \
            pytest.approx(0.2345207879911715, abs=1e-15)

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(DatasetError):
            kernel_complexity(np.array([1.0, -0.1]), 2, 0.5)

    def test_negative_eps_rejected(self):
        with pytest.raises(ConfigError):
            kernel_complexity(np.array([1.0]), 1, -0.5)

    @settings(max_examples=50, deadline=None)
    @given(spectra, st.floats(1e-4, 2.0), st.floats(1e-4, 2.0))
    def test_monotone_in_eps(self, lam, e1, e2):
        lo, hi = sorted((e1, e2))
        a = kernel_complexity(lam, len(lam), lo)
        b = kernel_complexity(lam, len(lam), hi)
        assert a <= b + 1e-15

    @settings(max_examples=50, deadline=None)
    @given(spectra)
    def test_sub_root(self, lam):
        # R(sqrt(r))/sqrt(r) nonincreasing in r
        r = np.logspace(-8, 2, 100)
        vals = np.array([kernel_complexity(lam, len(lam), np.sqrt(ri)) for ri in r])
        ratio = vals / np.sqrt(r)
        assert np.all(np.diff(ratio) <= 1e-12)


class TestFixedPoint:
    def test_single_eigenvalue_closed_form(self):
        # r = sigma0 * sqrt(min(lam, r)/n) with lam >= 1/n gives r = 1/n
        for n in (1, 2, 10, 100):
            r = fixed_point(np.array([1.0]), n, 1.0)
            assert r == pytest.approx(1.0 / n, rel=1e-8)

    def test_flat_spectrum_closed_form(self):
        # all lam >= sigma0^2: r = sigma0^2
        for sigma0 in (0.1, 0.5, 0.9):
            lam = np.full(7, 1.0)
            r = fixed_point(lam, 7, sigma0)
            assert r == pytest.approx(sigma0 ** 2, rel=1e-8)

    def test_fixed_point_residual(self):
        gen = rng.stream(60, "fp")
        for _ in range(20):
            k = int(gen.integers(1, 30))
            lam = rng.uniform_open(gen, (k,))
            n = int(gen.integers(1, 200))
            sigma0 = 0.05 + 0.9 * float(rng.uniform_open(gen, (1,))[0])
            r = fixed_point(lam, n, sigma0)
            phi = sigma0 * kernel_complexity(lam, n, np.sqrt(r))
            assert abs(phi - r) <= 1e-8 * r

    def test_crossing_is_unique(self):
        gen = rng.stream(61, "fpu")
        for _ in range(10):
            lam = rng.uniform_open(gen, (15,))
            r = fixed_point(lam, 15, 0.3)
            grid = np.logspace(np.log10(r) - 3, np.log10(r) + 3, 50)
            for g in grid:
                phi = 0.3 * kernel_complexity(lam, 15, np.sqrt(g))
                if g < r * (1 - 1e-6):
                    assert phi > g
                elif g > r * (1 + 1e-6):
                    assert phi < g

    def test_degenerate_spectrum_rejected(self):
        with pytest.raises(NumericalError):
            fixed_point(np.zeros(4), 4, 1.0)

    def test_bad_sigma_rejected(self):
        with pytest.raises(ConfigError):
            fixed_point(np.array([1.0]), 1, 0.0)


class TestStoppingTime:
    def test_flat_unit_spectrum_by_hand(self):
        # eta_t = 0.5 t: condition first holds at t=3, so T_hat = 2
        res = stopping_time(np.ones(5), 5, 1.0, 0.5, horizon=100)
        assert res.t_hat == 2
        assert not res.saturated

    def test_immediate_stop(self):
        # huge noise: condition already true at t=1 -> T_hat = 0
        res = stopping_time(np.array([1.0]), 1, 100.0, 1.0, horizon=10)
        assert res.t_hat == 0
        assert not res.saturated

    def test_saturation_flagged(self):
        res = stopping_time(np.full(3, 1e-12), 3, 0.01, 0.01, horizon=10)
        assert res.t_hat == 10
        assert res.saturated

    def test_matches_bruteforce_scan(self):
        gen = rng.stream(62, "scan")
        for _ in range(20):
            k = int(gen.integers(1, 20))
            lam = rng.uniform_open(gen, (k,))
            n = int(gen.integers(1, 50))
            sigma0 = 0.05 + 0.9 * float(rng.uniform_open(gen, (1,))[0])
            eta = 0.05 + 0.8 * float(rng.uniform_open(gen, (1,))[0])
            res = stopping_time(lam, n, sigma0, eta, horizon=5000)
            # independent naive scan
            t_hit = None
            for t in range(1, 5001):
                lhs = kernel_complexity(lam, n, np.sqrt(1.0 / (eta * t)))
                if lhs > 1.0 / (sigma0 * eta * t):
                    t_hit = t
                    break
            if t_hit is None:
                assert res.saturated and res.t_hat == 5000
            else:
                assert not res.saturated and res.t_hat == t_hit - 1

    def test_bracket_against_fixed_point(self):
        # eps_hat^2 <= 1/(eta T_hat) <= 2 eps_hat^2 whenever T_hat >= 1
        gen = rng.stream(63, "bracket")
        checked = 0
        for _ in range(20):
            k = int(gen.integers(2, 25))
            lam = rng.uniform_open(gen, (k,))
            n = int(gen.integers(2, 100))
            sigma0 = 0.05 + 0.85 * float(rng.uniform_open(gen, (1,))[0])
            eta = 0.05 + 0.8 * float(rng.uniform_open(gen, (1,))[0])
            res = stopping_time(lam, n, sigma0, eta, horizon=10 ** 6)
            assert not res.saturated
            if res.t_hat < 1:
                continue
            checked += 1
            r = fixed_point(lam, n, sigma0)
            inv = 1.0 / (eta * res.t_hat)
            assert r <= inv * (1 + 1e-9)
            assert inv <= 2.0 * r * (1 + 1e-9)
        assert checked >= 15

    def test_bad_horizon_rejected(self):
        with pytest.raises(ConfigError):
            stopping_time(np.ones(2), 2, 1.0, 0.5, horizon=0)


class TestRateSlope:
    def test_exact_inverse_law(self):
        pairs = [(n, 1.0 / n) for n in (10, 100, 1000)]
        assert rate_slope(pairs) == pytest.approx(-1.0, abs=1e-12)

    def test_scale_invariance(self):
        pairs = [(n, 7.3 * n ** (-2.0 / 3.0)) for n in (10, 50, 250, 1250)]
        assert rate_slope(pairs) == pytest.approx(-2.0 / 3.0, abs=1e-10)

    def test_too_few_pairs_rejected(self):
        with pytest.raises(ConfigError):
            rate_slope([(10, 1.0), (100, 0.1)])

    def test_nonpositive_rejected(self):
        with pytest.raises(DatasetError):
            rate_slope([(10, 1.0), (100, 0.0), (1000, 0.1)])


class TestPopulationPowerLaw:
    def test_matches_analytic_approximation(self):
        # for lam_j = j^-2: r ~= (2 sigma0^2 / n)^(2/3)
        for n in (1000, 10000):
            r, length = population_fixed_point(n, 1.0, exponent=2.0)
            approx = (2.0 / n) ** (2.0 / 3.0)
            assert r == pytest.approx(approx, rel=0.15)
            assert length >= 2
            # truncation rule: tail eigenvalue below 1e-3 * r
            assert float(length) ** (-2.0) < 1e-3 * r

    def test_quick_rate_slope(self):
        pairs = []
        for n in (100, 1000, 10000):
            r, _ = population_fixed_point(n, 1.0, exponent=2.0)
            pairs.append((n, r))
        slope = rate_slope(pairs)
        assert -0.75 < slope < -0.55

    def test_bad_exponent_rejected(self):
        with pytest.raises(ConfigError):
            population_fixed_point(100, 1.0, exponent=1.0)


class TestComplexityProfile:
    def test_profile_consistency(self):
        lam = np.array([1.0, 0.3, 0.1, 0.01])
        prof = complexity_profile(lam, 4, sigma0=0.5, eta=0.5, horizon=10 ** 5)
        assert isinstance(prof, ComplexityProfile)
        # fixed-point residual invariant
        phi = 0.5 * kernel_complexity(lam, 4, np.sqrt(prof.fixed_point_sq))
        assert abs(phi - prof.fixed_point_sq) <= 1e-8 * prof.fixed_point_sq
        # bracket invariant
        if prof.stopping_time >= 1 and not prof.saturated:
            inv = 1.0 / (0.5 * prof.stopping_time)
            assert prof.fixed_point_sq <= inv * (1 + 1e-9)
            assert inv <= 2 * prof.fixed_point_sq * (1 + 1e-9)
        # eigenvalues stored nonincreasing
        assert np.all(np.diff(prof.eigenvalues) <= 0)
