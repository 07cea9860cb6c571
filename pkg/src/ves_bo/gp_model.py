"""Noiseless Gaussian-process surrogate on the unit cube.

The kernel is a Matern-5/2 with one lengthscale per input dimension (ARD).
Hyperparameters are fitted by maximizing the log marginal likelihood plus a
log-normal prior on every lengthscale whose median grows like ``sqrt(d)``.
Observed values are standardized before fitting; the fitted posterior keeps
the offset and reports predictions on the original scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, optimize

from .errors import DomainError, LinAlgError, ShapeError

SQRT5 = math.sqrt(5.0)
DEDUP_TOL = 1e-9


@dataclass(frozen=True)
class ObservationSet:
    """Evaluated points (rows, inside the unit cube) and their noiseless values."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, ndmin=2)
        vals = np.array(self.values, dtype=float).ravel()
        if pts.shape[0] != vals.shape[0]:
            raise ShapeError(f"{pts.shape[0]} points but {vals.shape[0]} values")
        if pts.size and (np.any(pts < 0.0) or np.any(pts > 1.0)):
            raise DomainError("observation points must lie in the unit cube")
        if not np.all(np.isfinite(vals)):
            raise DomainError("observation values must be finite")
        pts.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    @classmethod
    def empty(cls, d: int) -> "ObservationSet":
        return cls(np.zeros((0, d)), np.zeros(0))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def incumbent(self) -> float:
        """Largest observed value (``-inf`` when empty)."""
        return float(np.max(self.values)) if self.n else -math.inf

    def contains(self, x, tol: float = DEDUP_TOL) -> bool:
        if self.n == 0:
            return False
        dist = np.sqrt(np.sum((self.points - np.asarray(x, dtype=float)) ** 2, axis=1))
        return bool(np.min(dist) <= tol)

    def add(self, x, y: float) -> "ObservationSet":
        """Return a new set with ``(x, y)`` appended.

        A point within 1e-9 of an existing one is dropped so that the kernel
        matrix stays non-singular.
        """
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.d:
            raise ShapeError(f"expected a {self.d}-vector, got {x.shape[0]}")
        if self.contains(x):
            return self
        return ObservationSet(np.vstack([self.points, x]), np.append(self.values, y))


@dataclass(frozen=True)
class KernelSpec:
    """Matern-5/2 ARD hyperparameters plus the diagonal stabilizer."""

    lengthscales: np.ndarray
    signal_variance: float = 1.0
    jitter: float = 0.0

    def __post_init__(self):
        ls = np.array(self.lengthscales, dtype=float, ndmin=1)
        if np.any(~np.isfinite(ls)) or np.any(ls <= 0.0):
            raise DomainError("lengthscales must be positive")
        if not self.signal_variance > 0.0:
            raise DomainError("signal_variance must be positive")
        if not self.jitter >= 0.0:
            raise DomainError("jitter must be non-negative")
        ls.setflags(write=False)
        object.__setattr__(self, "lengthscales", ls)

    @property
    def d(self) -> int:
        return self.lengthscales.shape[0]


def _scaled_sqdist(x1: np.ndarray, x2: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    a = x1 / lengthscales
    b = x2 / lengthscales
    sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * a @ b.T
    return np.maximum(sq, 0.0)


def kernel_matrix(x1, x2, kernel: KernelSpec) -> np.ndarray:
    """Cross-covariance matrix ``k(x1_i, x2_j)`` (no jitter)."""
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    if x1.shape[1] != kernel.d or x2.shape[1] != kernel.d:
        raise ShapeError(f"inputs must have {kernel.d} columns")
    r = np.sqrt(_scaled_sqdist(x1, x2, kernel.lengthscales))
    return kernel.signal_variance * (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r) * np.exp(-SQRT5 * r)


def matern52(x, x2, kernel: KernelSpec) -> float:
    """Matern-5/2 covariance between two single points."""
    x = np.asarray(x, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x.shape != x2.shape or x.shape[0] != kernel.d:
        raise ShapeError("matern52 needs two vectors of the kernel's dimension")
    r = math.sqrt(float(np.sum(((x - x2) / kernel.lengthscales) ** 2)))
    return kernel.signal_variance * (1.0 + SQRT5 * r + 5.0 * r * r / 3.0) * math.exp(-SQRT5 * r)


def _cholesky(k: np.ndarray, jitter: float, scale: float, max_rel: float = 1e-4):
    """Lower Cholesky factor of ``k + jitter I``, escalating jitter tenfold on failure."""
    n = k.shape[0]
    eye = np.eye(n)
    j = jitter
    while True:
        try:
            return linalg.cholesky(k + j * eye, lower=True, check_finite=False), j
        except linalg.LinAlgError:
            pass
        j = 1e-8 * scale if j <= 0.0 else 10.0 * j
        if j > max_rel * scale * (1.0 + 1e-9):
            raise LinAlgError("kernel matrix not positive definite at maximum jitter")


@dataclass(frozen=True, eq=False)
class GpPosterior:
    """Exact posterior of a constant-mean GP conditioned on noiseless data.

    ``alpha`` solves ``(K + jitter I) alpha = values - mean_offset``.
    ``kernel.jitter`` holds the jitter actually used by the factorization.
    """

    observations: ObservationSet
    kernel: KernelSpec
    chol_factor: np.ndarray
    alpha: np.ndarray
    mean_offset: float = 0.0
    log_posterior: float = math.nan
    max_jitter_rel: float = field(default=1e-4, repr=False)

    @classmethod
    def condition(cls, observations: ObservationSet, kernel: KernelSpec,
                  mean_offset: float = 0.0, max_jitter_rel: float = 1e-4,
                  log_posterior: float = math.nan) -> "GpPosterior":
        if observations.d != kernel.d:
            raise ShapeError("observation and kernel dimensions differ")
        n = observations.n
        if n == 0:
            chol = np.zeros((0, 0))
            alpha = np.zeros(0)
            used = kernel.jitter
        else:
            k = kernel_matrix(observations.points, observations.points, kernel)
            chol, used = _cholesky(k, kernel.jitter, kernel.signal_variance, max_jitter_rel)
            alpha = linalg.cho_solve((chol, True), observations.values - mean_offset,
                                     check_finite=False)
        return cls(observations, replace(kernel, jitter=used), chol, alpha,
                   float(mean_offset), log_posterior, max_jitter_rel)

    @property
    def d(self) -> int:
        return self.kernel.d

    @property
    def incumbent(self) -> float:
        return self.observations.incumbent

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Apply ``(K + jitter I)^{-1}`` to ``rhs`` (vector or matrix)."""
        if self.observations.n == 0:
            return np.zeros_like(rhs)
        return linalg.cho_solve((self.chol_factor, True), rhs, check_finite=False)

    def cross_kernel(self, x) -> np.ndarray:
        """``k(x, X_train)`` with shape ``(m, n)``."""
        x = _as_queries(x, self.d)
        if self.observations.n == 0:
            return np.zeros((x.shape[0], 0))
        return kernel_matrix(x, self.observations.points, self.kernel)

    def mean_var(self, x):
        """Posterior means and variances (diagonal only) at query rows."""
        x = _as_queries(x, self.d)
        kx = self.cross_kernel(x)
        mean = self.mean_offset + kx @ self.alpha
        if self.observations.n == 0:
            var = np.full(x.shape[0], self.kernel.signal_variance)
        else:
            v = linalg.solve_triangular(self.chol_factor, kx.T, lower=True, check_finite=False)
            var = self.kernel.signal_variance - np.sum(v * v, axis=0)
        return mean, np.maximum(var, 0.0)

    def mean_cov(self, x):
        """Posterior mean vector and full covariance over query rows."""
        x = _as_queries(x, self.d)
        kx = self.cross_kernel(x)
        mean = self.mean_offset + kx @ self.alpha
        cov = kernel_matrix(x, x, self.kernel)
        if self.observations.n:
            v = linalg.solve_triangular(self.chol_factor, kx.T, lower=True, check_finite=False)
            cov = cov - v.T @ v
        cov = 0.5 * (cov + cov.T)
        idx = np.diag_indices_from(cov)
        cov[idx] = np.maximum(cov[idx], 0.0)
        return mean, cov


def _as_queries(x, d: int) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != d:
        raise ShapeError(f"queries must have {d} columns, got {x.shape[1]}")
    return x


def posterior_mean_cov(gp: GpPosterior, queries):
    """Posterior means and covariance matrix at ``queries``."""
    return gp.mean_cov(queries)


@dataclass(frozen=True)
class FitConfig:
    """MAP fitting settings.

    The lengthscale prior is log-normal with median
    ``lengthscale_median_scale * sqrt(d)`` and log-standard-deviation
    ``lengthscale_log_std``.  The signal variance (of standardized outputs)
    gets a log-normal prior with median ``signal_median``.
    """

    lengthscale_median_scale: float = 0.5
    lengthscale_log_std: float = 0.7
    signal_median: float = 1.0
    signal_log_std: float = 1.0
    n_starts: int = 8
    max_iter: int = 100
    jitter_rel: float = 1e-8
    max_jitter_rel: float = 1e-4
    log_lengthscale_bounds: tuple = (math.log(1e-3), math.log(1e2))
    log_signal_bounds: tuple = (math.log(1e-4), math.log(1e4))
    seed: int = 0


def log_marginal_likelihood(points, values, lengthscales, signal_variance,
                            jitter_rel: float = 1e-8, max_jitter_rel: float = 1e-4):
    """Zero-mean GP log marginal likelihood and its gradient.

    The gradient is taken with respect to ``(log l_1, ..., log l_d, log s2)``;
    the jitter is ``jitter_rel * s2`` so it scales with the signal variance.

    Returns
    -------
    value : float
    grad : ndarray of shape (d + 1,)
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    y = np.asarray(values, dtype=float).ravel()
    sq_raw = (x[:, None, :] - x[None, :, :]) ** 2
    return _lml(sq_raw, y, np.asarray(lengthscales, dtype=float), float(signal_variance),
                jitter_rel, max_jitter_rel)


def _lml(sq_raw, y, ls, s2, jitter_rel, max_jitter_rel):
    n, _, d = sq_raw.shape
    inv_ls2 = 1.0 / (ls * ls)
    r = np.sqrt(sq_raw @ inv_ls2)
    e = np.exp(-SQRT5 * r)
    corr = (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r) * e
    chol, jit = _cholesky(s2 * corr, jitter_rel * s2, s2, max_jitter_rel)
    k_tot = s2 * corr
    k_tot[np.diag_indices(n)] += jit
    alpha = linalg.cho_solve((chol, True), y, check_finite=False)
    value = -0.5 * y @ alpha - np.sum(np.log(np.diag(chol))) - 0.5 * n * math.log(2.0 * math.pi)
    kinv = linalg.cho_solve((chol, True), np.eye(n), check_finite=False)
    w = np.outer(alpha, alpha) - kinv
    # d k / d log l_j = s2 * 5/3 * (1 + sqrt5 r) exp(-sqrt5 r) * (dx_j / l_j)^2
    radial = s2 * (5.0 / 3.0) * (1.0 + SQRT5 * r) * e
    grad = np.empty(d + 1)
    grad[:d] = 0.5 * ((w * radial).reshape(-1) @ sq_raw.reshape(-1, d)) * inv_ls2
    grad[d] = 0.5 * np.sum(w * k_tot)
    return float(value), grad


def _log_prior(theta: np.ndarray, d: int, cfg: FitConfig):
    mu = np.empty(d + 1)
    sd = np.empty(d + 1)
    mu[:d] = math.log(cfg.lengthscale_median_scale * math.sqrt(d))
    sd[:d] = cfg.lengthscale_log_std
    mu[d] = math.log(cfg.signal_median)
    sd[d] = cfg.signal_log_std
    z = (theta - mu) / sd
    return float(-0.5 * z @ z), -z / sd, mu, sd


def fit_map(observations: ObservationSet, config: FitConfig | None = None) -> GpPosterior:
    """Fit Matern-5/2 ARD hyperparameters by multi-start MAP and condition on the data.

    Starts are the prior median plus ``n_starts - 1`` prior draws; each is
    refined by L-BFGS-B in log-hyperparameter space.
    """
    cfg = config or FitConfig()
    if observations.n < 2:
        raise DomainError("fit_map needs at least two observations")
    d = observations.d
    x = observations.points
    offset = float(np.mean(observations.values))
    scale = float(np.std(observations.values))
    if not scale > 1e-12:
        scale = 1.0
    y = (observations.values - offset) / scale

    sq_raw = (x[:, None, :] - x[None, :, :]) ** 2

    def neg_log_post(theta):
        try:
            lml, g = _lml(sq_raw, y, np.exp(theta[:d]), math.exp(theta[d]),
                          cfg.jitter_rel, cfg.max_jitter_rel)
        except LinAlgError:
            return 1e25, np.zeros_like(theta)
        lp, glp, _, _ = _log_prior(theta, d, cfg)
        return -(lml + lp), -(g + glp)

    _, _, mu, sd = _log_prior(np.zeros(d + 1), d, cfg)
    bounds = [cfg.log_lengthscale_bounds] * d + [cfg.log_signal_bounds]
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    rng = np.random.default_rng(cfg.seed)
    starts = [mu.copy()]
    for _ in range(cfg.n_starts - 1):
        starts.append(np.clip(mu + sd * rng.standard_normal(d + 1), lo, hi))

    best_theta, best_val = None, math.inf
    for theta0 in starts:
        res = optimize.minimize(neg_log_post, theta0, jac=True, method="L-BFGS-B",
                                bounds=bounds, options={"maxiter": cfg.max_iter})
        if np.isfinite(res.fun) and res.fun < best_val:
            best_theta, best_val = res.x, float(res.fun)
    if best_theta is None or best_val >= 1e25:
        raise LinAlgError("no hyperparameter start produced a positive-definite kernel")

    s2_raw = math.exp(best_theta[d]) * scale * scale
    kernel = KernelSpec(np.exp(best_theta[:d]), s2_raw, cfg.jitter_rel * s2_raw)
    return GpPosterior.condition(observations, kernel, mean_offset=offset,
                                 max_jitter_rel=cfg.max_jitter_rel, log_posterior=-best_val)
