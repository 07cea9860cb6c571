import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import conditioned_gp, prior_draw_observations
from ves_bo.errors import DomainError, LinAlgError, ShapeError
from ves_bo.gp_model import (FitConfig, GpPosterior, KernelSpec, ObservationSet, fit_map,
                             kernel_matrix, log_marginal_likelihood, matern52, posterior_mean_cov)
from ves_bo.posterior_paths import draw_paths


class TestObservationSet:
    def test_rejects_outside_cube(self):
        with pytest.raises(DomainError):
            ObservationSet([[1.2]], [0.0])

    def test_rejects_mismatch(self):
        with pytest.raises(ShapeError):
            ObservationSet([[0.1], [0.2]], [0.0])

    def test_rejects_non_finite(self):
        with pytest.raises(DomainError):
            ObservationSet([[0.1]], [math.nan])

    def test_incumbent_is_exact_max(self):
        obs = ObservationSet([[0.1], [0.4], [0.7]], [0.3, 2.5, -1.0])
        assert obs.incumbent == 2.5

    def test_add_drops_near_duplicates(self):
        obs = ObservationSet([[0.1, 0.2]], [1.0])
        assert obs.add([0.1, 0.2 + 1e-11], 5.0).n == 1
        assert obs.add([0.1, 0.3], 5.0).n == 2

    def test_read_only(self):
        obs = ObservationSet([[0.1]], [1.0])
        with pytest.raises(ValueError):
            obs.values[0] = 3.0


class TestKernel:
    def test_zero_distance(self):
        k = KernelSpec([0.3, 0.7], 2.5)
        assert matern52([0.2, 0.4], [0.2, 0.4], k) == 2.5

    def test_unit_distance(self):
        # oracle: (1 + sqrt5 + 5/3) exp(-sqrt5) at 50 digits
        assert matern52([0.0], [1.0], KernelSpec([1.0])) == pytest.approx(0.52399410883182031, rel=1e-14)

    def test_far_apart(self):
        assert matern52([0.0], [100.0], KernelSpec([1.0])) < 1e-60

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            matern52([0.0, 1.0], [1.0], KernelSpec([1.0]))

    def test_ard_scaling(self):
        k = KernelSpec([0.5, 2.0])
        # stretching coordinate j by l_j leaves r unchanged
        assert matern52([0.0, 0.0], [0.5, 2.0], k) == pytest.approx(
            matern52([0.0], [math.sqrt(2.0)], KernelSpec([1.0])), rel=1e-14)

    def test_matrix_matches_pointwise(self, rng):
        k = KernelSpec([0.3, 0.6], 1.7)
        a, b = rng.uniform(size=(4, 2)), rng.uniform(size=(3, 2))
        mat = kernel_matrix(a, b, k)
        for i in range(4):
            for j in range(3):
                assert mat[i, j] == pytest.approx(matern52(a[i], b[j], k), rel=1e-12)

    def test_invalid_spec(self):
        with pytest.raises(DomainError):
            KernelSpec([0.0])
        with pytest.raises(DomainError):
            KernelSpec([1.0], signal_variance=-1.0)


class TestPosterior:
    def test_interpolates_without_jitter(self, rng):
        obs = prior_draw_observations(rng, 12, 2)
        gp = GpPosterior.condition(obs, KernelSpec([0.3, 0.3], 1.0, 0.0))
        mean, var = gp.mean_var(obs.points)
        assert np.max(np.abs(mean - obs.values)) <= 1e-6
        assert np.max(var) <= 1e-8

    def test_prior_mode(self):
        gp = GpPosterior.condition(ObservationSet.empty(2), KernelSpec([0.3, 0.3], 1.9))
        mean, cov = posterior_mean_cov(gp, np.array([[0.1, 0.2], [0.5, 0.5]]))
        assert np.all(mean == 0.0)
        assert np.allclose(np.diag(cov), 1.9)

    def test_two_points_hand_solve(self):
        x = np.array([[0.2], [0.6]])
        y = np.array([1.0, -0.5])
        k = KernelSpec([0.4], 1.3, 0.0)
        gp = GpPosterior.condition(ObservationSet(x, y), k)
        q = np.array([0.45])
        k11 = np.array([[matern52(a, b, k) for b in x] for a in x])
        kq = np.array([matern52(q, a, k) for a in x])
        w = np.linalg.solve(k11, kq)
        mean, cov = gp.mean_cov(q[None])
        assert mean[0] == pytest.approx(w @ y, rel=1e-10)
        assert cov[0, 0] == pytest.approx(1.3 - w @ kq, rel=1e-9)

    def test_cholesky_reconstruction(self, rng):
        gp = conditioned_gp(rng, 25, 3)
        k = kernel_matrix(gp.observations.points, gp.observations.points, gp.kernel)
        k[np.diag_indices_from(k)] += gp.kernel.jitter
        rec = gp.chol_factor @ gp.chol_factor.T
        assert np.linalg.norm(rec - k) / np.linalg.norm(k) <= 1e-8

    def test_covariance_symmetric_psd(self, rng):
        gp = conditioned_gp(rng, 10, 2)
        _, cov = gp.mean_cov(rng.uniform(size=(30, 2)))
        assert np.array_equal(cov, cov.T)
        assert np.min(np.linalg.eigvalsh(cov)) >= -1e-8

    def test_variance_shrinks_with_data(self, rng):
        obs = prior_draw_observations(rng, 8, 2)
        k = KernelSpec([0.3, 0.3], 1.0, 1e-10)
        q = rng.uniform(size=(50, 2))
        _, v0 = GpPosterior.condition(obs, k).mean_var(q)
        _, v1 = GpPosterior.condition(obs.add([0.5, 0.5], 0.1), k).mean_var(q)
        assert np.all(v1 <= v0 + 1e-8)

    def test_query_shape_error(self, rng):
        gp = conditioned_gp(rng, 5, 2)
        with pytest.raises(ShapeError):
            gp.mean_var(np.zeros((3, 3)))

    def test_jitter_escalation(self):
        # two coincident points make K singular; jitter has to grow
        x = np.array([[0.3], [0.3 + 1e-12]])
        gp = GpPosterior.condition(ObservationSet(x, [1.0, 1.0]), KernelSpec([0.5], 1.0, 0.0))
        assert gp.kernel.jitter > 0

    def test_linalg_error_after_max_jitter(self):
        x = np.array([[0.3], [0.3 + 1e-12]])
        with pytest.raises(LinAlgError):
            GpPosterior.condition(ObservationSet(x, [1.0, 1.0]), KernelSpec([0.5], 1.0, 0.0),
                                  max_jitter_rel=1e-30)


class TestMarginalLikelihood:
    def test_gradient_matches_finite_differences(self, rng):
        obs = prior_draw_observations(rng, 15, 3)
        for _ in range(20):
            theta = np.log(np.append(rng.uniform(0.1, 1.5, 3), rng.uniform(0.3, 3.0)))
            _, g = log_marginal_likelihood(obs.points, obs.values, np.exp(theta[:3]), math.exp(theta[3]))
            h = 1e-5
            for j in range(4):
                tp, tm = theta.copy(), theta.copy()
                tp[j] += h
                tm[j] -= h
                fp = log_marginal_likelihood(obs.points, obs.values, np.exp(tp[:3]), math.exp(tp[3]))[0]
                fm = log_marginal_likelihood(obs.points, obs.values, np.exp(tm[:3]), math.exp(tm[3]))[0]
                fd = (fp - fm) / (2 * h)
                assert abs(g[j] - fd) <= 1e-4 * max(abs(fd), 1e-2)

    def test_matches_dense_formula(self, rng):
        obs = prior_draw_observations(rng, 8, 2)
        ls, s2 = np.array([0.4, 0.2]), 1.5
        val, _ = log_marginal_likelihood(obs.points, obs.values, ls, s2, jitter_rel=0.0)
        k = kernel_matrix(obs.points, obs.points, KernelSpec(ls, s2))
        sign, logdet = np.linalg.slogdet(k)
        ref = -0.5 * obs.values @ np.linalg.solve(k, obs.values) - 0.5 * logdet - 4 * math.log(2 * math.pi)
        assert val == pytest.approx(ref, rel=1e-8)


class TestFitMap:
    def test_lengthscale_recovery(self):
        ratios = []
        for seed in range(20):
            obs = prior_draw_observations(np.random.default_rng(seed), 20, 2, lengthscale=0.25)
            gp = fit_map(obs, FitConfig(seed=seed))
            ratios.append(gp.kernel.lengthscales / 0.25)
        med = np.median(np.array(ratios), axis=0)
        assert np.all(med > 1 / 3) and np.all(med < 3)

    def test_two_points(self):
        obs = ObservationSet([[0.2, 0.3], [0.7, 0.9]], [1.0, 2.0])
        gp = fit_map(obs)
        exact = GpPosterior.condition(obs, gp.kernel.__class__(gp.kernel.lengthscales,
                                                               gp.kernel.signal_variance, 0.0),
                                      mean_offset=gp.mean_offset)
        mean, _ = exact.mean_var(obs.points)
        assert np.allclose(mean, obs.values, atol=1e-6)
        assert np.allclose(gp.mean_var(obs.points)[0], obs.values, atol=1e-6)

    def test_constant_values(self):
        obs = ObservationSet(np.random.default_rng(1).uniform(size=(6, 2)), np.full(6, 3.25))
        gp = fit_map(obs)
        assert np.allclose(gp.mean_var(obs.points)[0], 3.25, atol=1e-9)

    def test_reproducible(self, rng):
        obs = prior_draw_observations(rng, 15, 3)
        a, b = fit_map(obs, FitConfig(seed=4)), fit_map(obs, FitConfig(seed=4))
        assert np.array_equal(a.kernel.lengthscales, b.kernel.lengthscales)
        assert a.kernel.signal_variance == b.kernel.signal_variance

    def test_too_few_points(self):
        with pytest.raises(DomainError):
            fit_map(ObservationSet([[0.5]], [1.0]))

    def test_fitted_posterior_residual_is_jitter_times_alpha(self, rng):
        # (K + jI) alpha = y - m  =>  mean(X) - y = -j alpha exactly
        obs = prior_draw_observations(rng, 20, 2)
        gp = fit_map(obs)
        mean, _ = gp.mean_var(obs.points)
        assert np.allclose(mean - obs.values, -gp.kernel.jitter * gp.alpha, rtol=0, atol=1e-9)

    def test_paths_need_fitted_gp(self):
        from ves_bo.errors import StateError

        with pytest.raises(StateError):
            draw_paths("not a posterior")


@given(st.integers(1, 4), st.integers(2, 12), st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_posterior_variance_bounded_by_prior(d, n, seed):
    gp = conditioned_gp(np.random.default_rng(seed), n, d)
    _, var = gp.mean_var(np.random.default_rng(seed + 1).uniform(size=(20, d)))
    assert np.all(var >= 0) and np.all(var <= gp.kernel.signal_variance + 1e-12)
