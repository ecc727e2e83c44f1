"""Kernel gradient descent: residual iterates, regressor, h-component split.

Oracles: explicit spectral evaluation U(I-eta*Sigma)^t U^T, explicit matrix
powers for the fitted-value geometric-series identity, and a hand-computable
gram built from mutually orthogonal sphere points.
"""

import numpy as np
import pytest

from ntkes.data import LinearTarget, build_training_set
from ntkes.errors import ConfigError
from ntkes.kernel import GramSpectrum, eigendecompose, gram_matrix
from ntkes.kernel_gd import (
    KernelGDState,
    decomposition_sup_error,
    h_component,
    kernel_gd_state,
    regressor_predict,
    residual_iterate,
)
from ntkes.network import TrainingTrace


def _dataset(n=40, d=4, seed=40, sigma0=0.1):
    return build_training_set(n, d, seed=seed, sigma0=sigma0,
                              target=LinearTarget(s=np.ones(d)))


def _diag_state(lam, y, eta):
    """Synthetic state with K_n = lam * I (gram = n * lam * I)."""
    n = len(y)
    gram = n * lam * np.eye(n)
    spec = GramSpectrum(gram=gram, normalized=gram / n, n=n)
    return KernelGDState(spectrum=spec, covariates=None, responses=np.asarray(y, float),
                         eta=eta, mode="biased",
                         residual_history=[-np.asarray(y, float)],
                         alpha_history=[np.asarray(y, float).copy()])


class TestResidualIterate:
    def test_initial_residual(self):
        ts = _dataset()
        st = kernel_gd_state(ts, eta=0.5)
        np.testing.assert_array_equal(st.residual_history[0], -ts.responses)
        np.testing.assert_array_equal(st.alpha_history[0], ts.responses)
        np.testing.assert_array_equal(residual_iterate(st, 0), -ts.responses)

    def test_diagonal_gram_closed_form(self):
        y = np.array([1.0, -2.0, 0.5])
        lam, eta = 0.4, 0.5
        st = _diag_state(lam, y, eta)
        for t in (0, 1, 3, 10):
            expect = -((1.0 - eta * lam) ** t) * y
            np.testing.assert_allclose(residual_iterate(st, t), expect, atol=1e-12)

    def test_matches_spectral_form(self):
        ts = _dataset(n=40)
        st = kernel_gd_state(ts, eta=0.5)
        spec = eigendecompose(gram_matrix(ts))
        U, lam = spec.eigenvectors, spec.eigenvalues
        for t in (1, 5, 50, 500):
            oracle = U @ (((1.0 - 0.5 * lam) ** t) * (U.T @ (-ts.responses)))
            got = residual_iterate(st, t)
            np.testing.assert_allclose(got, oracle, atol=1e-8)

    def test_norm_contraction(self):
        for seed in (41, 42):
            ts = _dataset(seed=seed)
            st = kernel_gd_state(ts, eta=0.9)
            norms = [np.linalg.norm(residual_iterate(st, t)) for t in range(51)]
            assert all(b <= a + 1e-15 for a, b in zip(norms, norms[1:]))

    def test_negative_steps_rejected(self):
        st = kernel_gd_state(_dataset(n=5), eta=0.1)
        with pytest.raises(ConfigError):
            residual_iterate(st, -1)


class TestRegressorPredict:
    def test_zero_steps_is_zero(self):
        ts = _dataset(n=10)
        st = kernel_gd_state(ts, eta=0.5)
        out = regressor_predict(st, 0, ts.covariates)
        np.testing.assert_array_equal(out, np.zeros(10))

    def test_fitted_value_identity(self):
        ts = _dataset(n=30)
        st = kernel_gd_state(ts, eta=0.5)
        Kn = gram_matrix(ts).normalized
        eye = np.eye(30)
        for t in (1, 10, 100):
            oracle = (eye - np.linalg.matrix_power(eye - 0.5 * Kn, t)) @ ts.responses
            got = regressor_predict(st, t, ts.covariates)
            np.testing.assert_allclose(got, oracle, atol=1e-8)

    def test_interpolation_limit_on_orthogonal_design(self):
        # four mutually orthogonal sphere points: gram is (2/3)I + (1/3)J
        # exactly, so K_n eigenvalues are {1/2, 1/6, 1/6, 1/6} and the
        # iterate contracts geometrically -- fitted values reach y.
        d = 10
        X = np.eye(4, d)
        y = np.array([1.0, -1.0, 2.0, 0.25])
        ts = _dataset(n=4)
        ts = type(ts)(covariates=X, responses=y, clean_targets=y,
                      sigma0=0.0, target_descriptor=None)
        K = gram_matrix(ts).gram
        np.testing.assert_allclose(K, (2 / 3) * np.eye(4) + (1 / 3) * np.ones((4, 4)),
                                   atol=1e-12)
        st = kernel_gd_state(ts, eta=0.9)
        got = regressor_predict(st, 10_000, X)
        np.testing.assert_allclose(got, y, atol=1e-4)

    def test_off_sample_matches_manual_sum(self):
        ts = _dataset(n=8, d=3)
        st = kernel_gd_state(ts, eta=0.3)
        Xq = build_training_set(5, 3, seed=77, sigma0=0.0,
                                target=LinearTarget(s=np.ones(3))).covariates
        t = 7
        residual_iterate(st, t)  # populate history
        from ntkes.kernel import ntk_matrix
        rows = ntk_matrix(Xq, ts.covariates)
        coef = sum(st.alpha_history[tp] for tp in range(t))
        oracle = (0.3 / 8) * rows @ coef
        np.testing.assert_allclose(regressor_predict(st, t, Xq), oracle, atol=1e-12)


class TestHComponent:
    def _trace_from_state(self, st, t):
        residual_iterate(st, t)
        res = [st.residual_history[i].copy() for i in range(t + 1)]
        T = len(res) - 1
        return TrainingTrace(residuals=res, losses=np.zeros(T + 1),
                             max_drift=np.zeros(T + 1))

    def test_zero_steps(self):
        ts = _dataset(n=6, d=3)
        st = kernel_gd_state(ts, eta=0.4)
        trace = self._trace_from_state(st, 3)
        out = h_component(trace, ts, 0.4, 0, ts.covariates)
        np.testing.assert_array_equal(out, np.zeros(6))

    def test_substitution_identity(self):
        # with kernel-GD residuals in place of network residuals, h_t must
        # coincide with the kernel regressor itself
        ts = _dataset(n=12, d=4)
        st = kernel_gd_state(ts, eta=0.5)
        t = 9
        trace = self._trace_from_state(st, t)
        Xq = build_training_set(7, 4, seed=88, sigma0=0.0,
                                target=LinearTarget(s=np.ones(4))).covariates
        h = h_component(trace, ts, 0.5, t, Xq)
        f = regressor_predict(st, t, Xq)
        np.testing.assert_allclose(h, f, atol=1e-12)

    def test_linearity_in_residuals(self):
        ts = _dataset(n=6, d=3)
        st = kernel_gd_state(ts, eta=0.4)
        trace = self._trace_from_state(st, 4)
        doubled = TrainingTrace(residuals=[2.0 * r for r in trace.residuals],
                                losses=trace.losses, max_drift=trace.max_drift)
        a = h_component(trace, ts, 0.4, 4, ts.covariates)
        b = h_component(doubled, ts, 0.4, 4, ts.covariates)
        np.testing.assert_allclose(b, 2.0 * a, atol=1e-14)

    def test_short_trace_rejected(self):
        ts = _dataset(n=6, d=3)
        st = kernel_gd_state(ts, eta=0.4)
        trace = self._trace_from_state(st, 2)
        with pytest.raises(ConfigError):
            h_component(trace, ts, 0.4, 10, ts.covariates)


class TestDecompositionSupError:
    def test_identical_is_zero(self):
        v = np.array([1.0, 2.0, -3.0])
        assert decomposition_sup_error(v, v.copy()) == 0.0

    def test_constant_offset(self):
        v = np.linspace(0, 1, 9)
        assert decomposition_sup_error(v, v - 0.125) == pytest.approx(0.125, abs=0.0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            decomposition_sup_error(np.zeros(3), np.zeros(4))


def test_state_runs_are_deterministic():
    ts = _dataset(n=15)
    a = kernel_gd_state(ts, eta=0.5)
    b = kernel_gd_state(ts, eta=0.5)
    assert np.array_equal(residual_iterate(a, 40), residual_iterate(b, 40))
