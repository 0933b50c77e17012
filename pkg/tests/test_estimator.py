import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_pd_matrix
from optinput import linalg
from optinput.estimator import (
    DataRecord,
    InputSequence,
    OrderTooLarge,
    SingularRegressor,
    bayesian_mse,
    build_circulant_regressor,
    eb_objective,
    estimate_noise_variance,
    fit_hyperparameters,
    ls_estimate,
    rls_estimate,
)
from optinput.kernels import InvalidHyperparameter, KernelSpec, build_kernel


def white_record(seed, n, N, sigma2, theta=None, energy=None):
    """Synthetic record y = Phi theta + noise over a white input."""
    rng = np.random.default_rng(seed)
    u = InputSequence.scaled_to_power(rng.standard_normal(N), energy or float(N))
    if theta is None:
        theta = rng.standard_normal(n)
    phi = build_circulant_regressor(u, n)
    y = phi @ theta + rng.normal(0.0, np.sqrt(sigma2), N)
    return DataRecord(u, y, sigma2), theta


class TestInputSequence:
    def test_rejects_zero_energy(self):
        with pytest.raises(ValueError):
            InputSequence(np.ones(3), 0.0)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            InputSequence(np.array([1.0, np.inf]), 1.0)

    def test_values_write_protected(self):
        u = InputSequence(np.ones(3), 3.0)
        with pytest.raises(ValueError):
            u.values[0] = 2.0

    def test_scaled_to_power_is_exact(self):
        u = InputSequence.scaled_to_power([3.0, 4.0], 10.0)
        assert u.power_mismatch() <= 1e-15
        assert u.n_samples == 2

    def test_scaled_to_power_rejects_zero(self):
        with pytest.raises(ValueError):
            InputSequence.scaled_to_power(np.zeros(4), 1.0)


class TestDataRecord:
    def test_length_mismatch(self):
        u = InputSequence(np.ones(3), 3.0)
        with pytest.raises(ValueError):
            DataRecord(u, np.zeros(4))

    def test_rejects_nonpositive_sigma2(self):
        u = InputSequence(np.ones(3), 3.0)
        with pytest.raises(ValueError):
            DataRecord(u, np.zeros(3), 0.0)

    def test_json_roundtrip(self):
        u = InputSequence([1.0, -2.0, 0.5], 5.25)
        rec = DataRecord(u, [0.1, 0.2, 0.3], 0.9)
        back = DataRecord.from_json(rec.to_json())
        assert np.array_equal(back.u.values, rec.u.values)
        assert np.array_equal(back.y, rec.y)
        assert back.u.energy == rec.u.energy and back.sigma2 == rec.sigma2

    def test_json_roundtrip_without_sigma2(self):
        rec = DataRecord(InputSequence([1.0, 2.0], 5.0), [0.0, 0.0])
        assert DataRecord.from_json(rec.to_json()).sigma2 is None


class TestCirculantRegressor:
    def test_rows_by_hand(self):
        phi = build_circulant_regressor([1.0, 0.0, 0.0], 2)
        assert np.array_equal(phi, [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])

    def test_single_column(self):
        phi = build_circulant_regressor([2.0, 7.0], 1)
        assert np.array_equal(phi, [[2.0], [7.0]])

    def test_gram_is_toeplitz_of_correlations(self):
        phi = build_circulant_regressor([1.0, 2.0, 3.0], 2)
        assert np.array_equal(phi.T @ phi, [[14.0, 11.0], [11.0, 14.0]])

    def test_gram_matches_correlation_map(self):
        from optinput.design_map import quadratic_map
        import scipy.linalg

        rng = np.random.default_rng(3)
        u = rng.standard_normal(11)
        phi = build_circulant_regressor(u, 4)
        r = quadratic_map(u, 4).r
        assert np.allclose(phi.T @ phi, scipy.linalg.toeplitz(r), atol=1e-12)

    def test_every_column_has_full_power(self):
        u = np.array([1.0, -2.0, 0.5, 3.0])
        phi = build_circulant_regressor(u, 3)
        assert np.allclose(np.sum(phi**2, axis=0), float(u @ u), atol=1e-12)

    def test_order_too_large(self):
        with pytest.raises(OrderTooLarge):
            build_circulant_regressor([1.0, 2.0], 3)


class TestLsEstimate:
    def test_noise_free_recovery(self):
        rec, theta = white_record(0, n=4, N=20, sigma2=1.0)
        noiseless = DataRecord(rec.u, build_circulant_regressor(rec.u, 4) @ theta)
        est = ls_estimate(noiseless, 4)
        assert np.max(np.abs(est.theta - theta)) <= 1e-9
        assert est.method == "LS" and est.posterior_cov is None

    def test_zero_output(self):
        rec, _ = white_record(1, n=3, N=12, sigma2=1.0)
        est = ls_estimate(DataRecord(rec.u, np.zeros(12)), 3)
        assert np.array_equal(est.theta, np.zeros(3))

    def test_residual_orthogonality(self):
        rec, _ = white_record(2, n=5, N=30, sigma2=2.0)
        est = ls_estimate(rec, 5)
        phi = build_circulant_regressor(rec.u, 5)
        assert np.max(np.abs(phi.T @ (rec.y - phi @ est.theta))) <= 1e-9 * np.linalg.norm(rec.y)

    def test_constant_input_is_singular(self):
        u = InputSequence(np.ones(8), 8.0)
        with pytest.raises(SingularRegressor):
            ls_estimate(DataRecord(u, np.zeros(8)), 2)


class TestRlsEstimate:
    def test_weak_prior_approaches_ls(self):
        rec, _ = white_record(3, n=4, N=24, sigma2=0.5)
        ls = ls_estimate(rec, 4)
        rls = rls_estimate(rec, linalg.SymMatrix(1e8 * np.eye(4)), 0.5)
        assert np.linalg.norm(rls.theta - ls.theta) <= 1e-4 * np.linalg.norm(ls.theta)

    def test_zero_output(self):
        rec, _ = white_record(4, n=3, N=10, sigma2=1.0)
        est = rls_estimate(DataRecord(rec.u, np.zeros(10)), linalg.SymMatrix(np.eye(3)), 1.0)
        assert np.max(np.abs(est.theta)) <= 1e-15
        assert est.method == "RLS"

    def test_agrees_with_information_form(self):
        rec, _ = white_record(5, n=2, N=2, sigma2=1.0)
        P = np.eye(2)
        est = rls_estimate(rec, linalg.SymMatrix(P), 1.0)
        phi = build_circulant_regressor(rec.u, 2)
        q = phi.T @ phi + np.linalg.inv(P)
        expected = np.linalg.solve(q, phi.T @ rec.y)
        assert np.max(np.abs(est.theta - expected)) <= 1e-10

    @given(st.integers(0, 10_000))
    @settings(max_examples=50)
    def test_matrix_inversion_lemma_identity(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        N = int(rng.integers(n, 25))
        sigma2 = float(rng.uniform(0.05, 3.0))
        P = random_pd_matrix(rng, n)
        u = InputSequence.scaled_to_power(rng.standard_normal(N), float(N))
        y = rng.standard_normal(N)
        est = rls_estimate(DataRecord(u, y), linalg.SymMatrix(P), sigma2)
        phi = build_circulant_regressor(u, n)
        q = phi.T @ phi + sigma2 * np.linalg.inv(P)
        theta_info = np.linalg.solve(q, phi.T @ y)
        scale = max(np.linalg.norm(theta_info), 1e-12)
        assert np.linalg.norm(est.theta - theta_info) <= 1e-9 * scale
        # posterior covariance likewise equals sigma2 Q^{-1}
        post_info = sigma2 * np.linalg.inv(q)
        assert np.max(np.abs(est.posterior_cov.a - post_info)) <= 1e-9 * np.linalg.norm(post_info)


class TestBayesianMse:
    def test_impulsive_ridge_closed_form(self):
        energy, c, sigma2, n = 4.0, 2.0, 0.5, 3
        u = InputSequence(np.array([2.0, 0.0, 0.0, 0.0, 0.0]), energy)
        mse = bayesian_mse(u, build_kernel(KernelSpec("Ridge", n, {"c": c})), sigma2, n)
        expected = (sigma2 / (energy + sigma2 / c)) * np.eye(n)
        assert np.max(np.abs(mse.a - expected)) <= 1e-12

    def test_zero_input_returns_prior(self):
        P = random_pd_matrix(np.random.default_rng(6), 3)
        mse = bayesian_mse(np.zeros(8), linalg.SymMatrix(P), 2.0)
        assert np.allclose(mse.a, P, rtol=0, atol=1e-12)

    def test_matches_rls_posterior(self):
        rec, _ = white_record(7, n=4, N=16, sigma2=0.8)
        P = linalg.SymMatrix(random_pd_matrix(np.random.default_rng(8), 4))
        est = rls_estimate(rec, P, 0.8)
        mse = bayesian_mse(rec.u, P, 0.8)
        assert np.max(np.abs(mse.a - est.posterior_cov.a)) <= 1e-12

    @given(st.integers(0, 10_000))
    @settings(max_examples=30)
    def test_data_never_hurts(self, seed):
        # posterior covariance <= prior in the Loewner order
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 6))
        N = int(rng.integers(n, 20))
        P = random_pd_matrix(rng, n)
        u = rng.standard_normal(N)
        mse = bayesian_mse(u, linalg.SymMatrix(P), float(rng.uniform(0.1, 2.0)))
        assert np.min(np.linalg.eigvalsh(P - mse.a)) >= -1e-10 * np.linalg.norm(P)


class TestEbObjective:
    def test_vanishing_kernel_limit(self):
        rng = np.random.default_rng(9)
        N, sigma2 = 12, 0.7
        u = rng.standard_normal(N)
        y = rng.standard_normal(N)
        val = eb_objective(KernelSpec("Ridge", 3, {"c": 1e-12}), y, u, sigma2)
        limit = float(y @ y) / sigma2 + N * np.log(sigma2)
        assert abs(val - limit) <= 1e-3

    def test_sign_flip_invariance(self):
        rng = np.random.default_rng(10)
        u, y = rng.standard_normal(9), rng.standard_normal(9)
        spec = KernelSpec("TC", 3, {"c": 2.0, "lam": 0.8})
        assert eb_objective(spec, y, u, 1.0) == eb_objective(spec, -y, u, 1.0)

    def test_against_dense_evaluation(self):
        rng = np.random.default_rng(11)
        n, N, sigma2 = 3, 10, 0.4
        u, y = rng.standard_normal(N), rng.standard_normal(N)
        spec = KernelSpec("DC", n, {"c": 1.5, "lam": 0.9, "rho": -0.3})
        phi = build_circulant_regressor(u, n)
        F = phi @ build_kernel(spec).a @ phi.T + sigma2 * np.eye(N)
        direct = float(y @ np.linalg.solve(F, y)) + np.linalg.slogdet(F)[1]
        assert eb_objective(spec, y, u, sigma2) == pytest.approx(direct, rel=1e-9)

    def test_finite_difference_continuity(self):
        # central and forward differences in c agree on the interior
        rng = np.random.default_rng(12)
        u, y = rng.standard_normal(16), rng.standard_normal(16)

        def f(c):
            return eb_objective(KernelSpec("TC", 4, {"c": c, "lam": 0.8}), y, u, 1.0)

        c, h = 2.0, 1e-6
        central = (f(c + h) - f(c - h)) / (2 * h)
        forward = (f(c + h) - f(c)) / h
        assert central == pytest.approx(forward, rel=1e-3)


class TestFitHyperparameters:
    def test_single_grid_point_returned(self):
        rng = np.random.default_rng(13)
        u, y = rng.standard_normal(10), rng.standard_normal(10)
        grid = {"c": [2.0], "lam": [0.75]}
        spec = fit_hyperparameters(y, u, 3, 1.0, family="TC", grid=grid, refine=False)
        assert spec.params["c"] == pytest.approx(2.0, rel=1e-12)
        assert spec.params["lam"] == pytest.approx(0.75, rel=1e-12)

    def test_tc_self_consistency_high_snr(self):
        rng = np.random.default_rng(42)
        n, N, sigma2 = 12, 200, 1e-4
        true = KernelSpec("TC", n, {"c": 1.0, "lam": 0.8})
        theta = np.linalg.cholesky(build_kernel(true).a) @ rng.standard_normal(n)
        u = InputSequence.scaled_to_power(rng.standard_normal(N), float(N))
        y = build_circulant_regressor(u, n) @ theta + rng.normal(0.0, np.sqrt(sigma2), N)
        spec = fit_hyperparameters(y, u.values, n, sigma2, family="TC")
        assert abs(spec.params["lam"] - 0.8) <= 0.15

    def test_overstated_noise_shrinks_c(self):
        # same data as the recovery test, but the fitter is told the noise
        # floor is enormous: the whole signal is then explained as noise
        rng = np.random.default_rng(42)
        n, N = 12, 200
        true = KernelSpec("TC", n, {"c": 1.0, "lam": 0.8})
        theta = np.linalg.cholesky(build_kernel(true).a) @ rng.standard_normal(n)
        u = InputSequence.scaled_to_power(rng.standard_normal(N), float(N))
        y = build_circulant_regressor(u, n) @ theta + rng.normal(0.0, 1e-2, N)
        spec = fit_hyperparameters(y, u.values, n, 1e4, family="TC")
        assert spec.params["c"] < 0.1

    def test_unknown_family(self):
        with pytest.raises(InvalidHyperparameter):
            fit_hyperparameters(np.zeros(4), np.ones(4), 2, 1.0, family="Diagonal")


class TestEstimateNoiseVariance:
    def test_noise_free_residual_vanishes(self):
        rec, theta = white_record(14, n=4, N=40, sigma2=1.0)
        y = build_circulant_regressor(rec.u, 4) @ theta
        assert estimate_noise_variance(y, rec.u.values, 10) <= 1e-12 * float(y @ y)

    @pytest.mark.parametrize("seed", range(5))
    def test_pure_noise_concentration(self, seed):
        rng = np.random.default_rng(seed)
        u = rng.standard_normal(200)
        y = rng.normal(0.0, 2.0, 200)  # true system is zero, sigma2 = 4
        assert estimate_noise_variance(y, u, 20) == pytest.approx(4.0, rel=0.3)

    def test_degenerate_dof_guard(self):
        with pytest.raises(OrderTooLarge):
            estimate_noise_variance(np.ones(10), np.arange(10.0), 9)

    def test_default_order_is_half_period(self):
        rng = np.random.default_rng(15)
        u, y = rng.standard_normal(30), rng.standard_normal(30)
        assert estimate_noise_variance(y, u) == estimate_noise_variance(y, u, 15)
