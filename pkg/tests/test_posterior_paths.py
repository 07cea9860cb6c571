import numpy as np
import pytest
from scipy import stats

from conftest import conditioned_gp
from ves_bo.errors import DomainError, ShapeError
from ves_bo.gp_model import GpPosterior, KernelSpec, ObservationSet, kernel_matrix
from ves_bo.posterior_paths import (MaxSearchConfig, draw_paths, joint_samples, matern52_feature_map,
                                    sample_joint, sample_y_star, sobol_points)

SMALL = MaxSearchConfig(n_candidates=256, refine_steps=5)


def test_paths_reproduce_training_values(rng):
    gp = conditioned_gp(rng, 15, 2)
    bundle = draw_paths(gp, n_paths=64, seed=3, search=SMALL)
    vals = bundle.evaluate(gp.observations.points)
    assert np.max(np.abs(vals - gp.observations.values[:, None])) <= 1e-6


def test_single_observation_query():
    x0 = np.array([0.4, 0.6])
    gp = GpPosterior.condition(ObservationSet([x0], [0.7]), KernelSpec([0.3, 0.3], 1.0, 1e-10))
    batch = sample_joint(draw_paths(gp, n_paths=32, seed=1, search=SMALL), x0)
    assert np.allclose(batch.y_x, 0.7, atol=1e-6)
    assert np.all(batch.y_star >= 0.7 - 1e-6)


def test_moments_match_posterior(rng):
    gp = conditioned_gp(rng, 6, 2, lengthscale=0.4)
    q = rng.uniform(size=(5, 2))
    s = 10_000
    bundle = draw_paths(gp, n_paths=s, n_features=512, seed=11, feature_draws=s,
                        search=MaxSearchConfig(n_candidates=1, refine_steps=0))
    vals = bundle.evaluate(q)
    mean, cov = gp.mean_cov(q)
    se_mean = np.sqrt(np.diag(cov) / s)
    assert np.all(np.abs(vals.mean(axis=1) - mean) <= 3 * se_mean)
    emp = np.cov(vals)
    # standard error of a sample covariance of Gaussians: sqrt((c_ij^2 + c_ii c_jj) / s)
    se_cov = np.sqrt((cov ** 2 + np.outer(np.diag(cov), np.diag(cov))) / s)
    assert np.all(np.abs(emp - cov) <= 3 * se_cov)


def test_joint_sample_invariants(rng):
    gp = conditioned_gp(rng, 10, 2)
    bundle = draw_paths(gp, n_paths=128, seed=2, search=SMALL)
    for x in rng.uniform(size=(20, 2)):
        b = sample_joint(bundle, x)
        assert np.all(b.y_star >= b.y_x - 1e-6)
        assert np.all(b.y_star >= gp.incumbent - 1e-6)


def test_y_star_shared_across_queries(rng):
    gp = conditioned_gp(rng, 10, 2)
    bundle = draw_paths(gp, n_paths=64, seed=2, search=SMALL)
    base = sample_y_star(bundle)
    ys, yx = joint_samples(bundle, rng.uniform(size=(30, 2)))
    # a query only changes y* where it beats the shared maximum
    moved = ys != base[None, :]
    assert np.all(ys[moved] == yx[moved])
    assert np.array_equal(sample_y_star(bundle), base)


def test_reproducible_bundles(rng):
    gp = conditioned_gp(rng, 8, 3)
    a = draw_paths(gp, n_paths=16, seed=9, search=SMALL)
    b = draw_paths(gp, n_paths=16, seed=9, search=SMALL)
    assert np.array_equal(a.feature_weights, b.feature_weights)
    assert np.array_equal(a.y_star_base, b.y_star_base)
    q = rng.uniform(size=(4, 3))
    assert np.array_equal(a.evaluate(q), b.evaluate(q))


def test_query_outside_cube(rng):
    bundle = draw_paths(conditioned_gp(rng, 5, 2), n_paths=4, seed=0, search=SMALL)
    with pytest.raises(DomainError):
        sample_joint(bundle, [1.5, 0.2])
    with pytest.raises(ShapeError):
        sample_joint(bundle, [0.5])


def test_y_star_right_skewed_above_incumbent(gp_1d_three):
    bundle = draw_paths(gp_1d_three, n_paths=2000, seed=5,
                        search=MaxSearchConfig(n_candidates=512, refine_steps=10))
    ys = sample_y_star(bundle)
    assert np.all(ys >= gp_1d_three.incumbent - 1e-6)
    assert stats.skew(ys) > 0


def test_y_star_grows_with_candidate_count(rng):
    gp = conditioned_gp(rng, 5, 2, lengthscale=0.15)
    means, ses = [], []
    for m in (64, 256, 1024):
        b = draw_paths(gp, n_paths=1000, seed=4, search=MaxSearchConfig(n_candidates=m, refine_steps=0))
        means.append(b.y_star_base.mean())
        ses.append(b.y_star_base.std() / np.sqrt(1000))
    for lo, hi, se in zip(means[:-1], means[1:], ses[1:]):
        assert hi >= lo - 3 * se


def test_prior_y_star_grows_with_dimension():
    ms = []
    for d in (1, 3, 6):
        gp = GpPosterior.condition(ObservationSet.empty(d), KernelSpec(np.full(d, 0.3)))
        b = draw_paths(gp, n_paths=400, seed=1, search=MaxSearchConfig(n_candidates=1024, refine_steps=0))
        ms.append(b.y_star_base.mean())
    assert ms[0] < ms[1] < ms[2]


def test_refinement_never_lowers_maximum(rng):
    gp = conditioned_gp(rng, 10, 2, lengthscale=0.2)
    a = draw_paths(gp, n_paths=64, seed=1, search=MaxSearchConfig(n_candidates=128, refine_steps=0))
    b = draw_paths(gp, n_paths=64, seed=1, search=MaxSearchConfig(n_candidates=128, refine_steps=20))
    assert np.all(b.y_star_base >= a.y_star_base)
    assert np.allclose(b.evaluate_paths(b.argmax_points, np.arange(64)), b.y_star_base)


def test_feature_kernel_error_shrinks_with_feature_count():
    rng = np.random.default_rng(0)
    ls = np.array([0.3, 0.5])
    k = KernelSpec(ls)
    x, y = rng.uniform(size=(100, 2)), rng.uniform(size=(100, 2))
    exact = np.array([kernel_matrix(a[None], b[None], k)[0, 0] for a, b in zip(x, y)])
    errs = []
    for f in (256, 1024, 4096):
        e = []
        for rep in range(20):
            fm = matern52_feature_map(ls, 1.0, f, np.random.default_rng(rep))
            e.append(np.mean(np.abs(np.sum(fm(x) * fm(y), axis=1) - exact)))
        errs.append((np.mean(e), np.std(e) / np.sqrt(len(e))))
    for (m0, s0), (m1, s1) in zip(errs[:-1], errs[1:]):
        assert m1 < m0 + 3 * np.hypot(s0, s1)
    assert errs[2][0] < errs[0][0]


def test_sobol_prefix_nested():
    a = sobol_points(100, 3, 7)
    b = sobol_points(256, 3, 7)
    assert np.array_equal(a, b[:100])
    assert np.all((a >= 0) & (a < 1))


def test_invalid_counts(rng):
    gp = conditioned_gp(rng, 4, 1)
    with pytest.raises(DomainError):
        draw_paths(gp, n_paths=0)
    with pytest.raises(DomainError):
        draw_paths(gp, n_paths=4, feature_draws=8)
