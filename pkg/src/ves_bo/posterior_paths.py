"""Pathwise-conditioned posterior sample functions.

Each path is a random-Fourier-feature draw from the Matern-5/2 prior plus an
exact data-dependent correction::

    f_s(x) = m + phi(x) w_s + k(x, X) (K + jI)^{-1} (y - m - Phi w_s)

so every path interpolates the observations and can be evaluated anywhere.
The per-path maxima ``y*`` are found once per bundle on a shared candidate set
(scrambled Sobol points, the training inputs and any extra points), refined by
coordinate ascent, and reused for every query point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import DomainError, ShapeError, StateError
from .gp_model import GpPosterior

_CHUNK = 2048


@dataclass(frozen=True)
class MaxSearchConfig:
    """How per-path maxima are located.

    ``n_candidates=None`` means ``512 * d`` capped at ``cap``.
    """

    n_candidates: int | None = None
    cap: int = 8192
    refine_steps: int = 20
    extra_points: np.ndarray | None = field(default=None, repr=False, compare=False)

    def resolved_candidates(self, d: int) -> int:
        if self.n_candidates is not None:
            return int(self.n_candidates)
        return min(512 * d, self.cap)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Random Fourier features ``sqrt(2 s2 / F) cos(W x + b)`` of a stationary kernel."""

    frequencies: np.ndarray
    phases: np.ndarray
    amplitude: float

    @property
    def n_features(self) -> int:
        return self.phases.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.amplitude * np.cos(x @ self.frequencies.T + self.phases)


def matern52_feature_map(lengthscales, signal_variance: float, n_features: int,
                         rng: np.random.Generator) -> FeatureMap:
    """Features for Matern-5/2: frequencies are multivariate-t (5 dof) scaled by 1/l."""
    ls = np.asarray(lengthscales, dtype=float)
    d = ls.shape[0]
    g = rng.standard_normal((n_features, d))
    u = rng.chisquare(5.0, size=(n_features, 1))
    freqs = g * np.sqrt(5.0 / u) / ls
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_features)
    return FeatureMap(freqs, phases, float(np.sqrt(2.0 * signal_variance / n_features)))


@dataclass(frozen=True, eq=False)
class PathBundle:
    """A fixed set of posterior sample paths plus their maxima.

    Paths are split into contiguous groups, each with its own feature map.
    One group (the default) is fastest; one group per path removes the
    random-feature bias from the sample covariance.

    Attributes
    ----------
    feature_maps : one FeatureMap per path group
    groups : slices of path indices matching ``feature_maps``
    feature_weights : (F, S) prior weights, one column per path
    update_coefficients : (n, S) exact-conditioning coefficients
    y_star_base : (S,) maxima over the shared candidate set
    argmax_points : (S, d) where each path attains ``y_star_base``
    """

    gp: GpPosterior
    feature_maps: tuple
    groups: tuple
    feature_weights: np.ndarray
    update_coefficients: np.ndarray
    seed: int
    search: MaxSearchConfig
    y_star_base: np.ndarray = field(default=None, repr=False)
    argmax_points: np.ndarray = field(default=None, repr=False)

    @property
    def n_paths(self) -> int:
        return self.feature_weights.shape[1]

    @property
    def d(self) -> int:
        return self.gp.d

    @property
    def feature_map(self) -> FeatureMap:
        """The feature map of the first (usually only) group."""
        return self.feature_maps[0]

    def prior_values(self, x: np.ndarray) -> np.ndarray:
        """Random-feature prior part ``phi(x) w`` for all paths, shape ``(m, S)``."""
        if len(self.feature_maps) == 1:
            return self.feature_maps[0](x) @ self.feature_weights
        out = np.empty((x.shape[0], self.n_paths))
        for fmap, grp in zip(self.feature_maps, self.groups):
            out[:, grp] = fmap(x) @ self.feature_weights[:, grp]
        return out

    @property
    def incumbent(self) -> float:
        return self.gp.incumbent

    def evaluate(self, x) -> np.ndarray:
        """Values of all paths at query rows, shape ``(m, S)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.d:
            raise ShapeError(f"queries must have {self.d} columns")
        out = np.empty((x.shape[0], self.n_paths))
        for start in range(0, x.shape[0], _CHUNK):
            xc = x[start:start + _CHUNK]
            vals = self.prior_values(xc)
            if self.update_coefficients.shape[0]:
                vals += self.gp.cross_kernel(xc) @ self.update_coefficients
            out[start:start + _CHUNK] = vals + self.gp.mean_offset
        return out

    def evaluate_paths(self, x: np.ndarray, paths: np.ndarray) -> np.ndarray:
        """Value of path ``paths[i]`` at row ``x[i]``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if len(self.feature_maps) == 1:
            phi = self.feature_maps[0](x)
            vals = np.einsum("if,fi->i", phi, self.feature_weights[:, paths])
        else:
            vals = np.empty(x.shape[0])
            group_of = self._group_index()[paths]
            for g in np.unique(group_of):
                rows = np.flatnonzero(group_of == g)
                phi = self.feature_maps[g](x[rows])
                vals[rows] = np.einsum("if,fi->i", phi, self.feature_weights[:, paths[rows]])
        if self.update_coefficients.shape[0]:
            kx = self.gp.cross_kernel(x)
            vals += np.einsum("in,ni->i", kx, self.update_coefficients[:, paths])
        return vals + self.gp.mean_offset

    def _group_index(self) -> np.ndarray:
        idx = np.empty(self.n_paths, dtype=int)
        for g, grp in enumerate(self.groups):
            idx[grp] = g
        return idx


@dataclass(frozen=True, eq=False)
class JointSampleBatch:
    """Joint draws of ``(y*, y_x)`` at one query ``x`` sharing a bundle's paths."""

    y_star: np.ndarray
    y_x: np.ndarray
    x: np.ndarray
    incumbent: float

    @property
    def n_samples(self) -> int:
        return self.y_star.shape[0]

    @classmethod
    def from_arrays(cls, y_star, y_x, incumbent: float, x=None) -> "JointSampleBatch":
        y_star = np.asarray(y_star, dtype=float).ravel()
        y_x = np.asarray(y_x, dtype=float).ravel()
        if y_star.shape != y_x.shape or y_star.size == 0:
            raise ShapeError("y_star and y_x must be non-empty and of equal length")
        x = np.zeros(0) if x is None else np.asarray(x, dtype=float).ravel()
        return cls(y_star, y_x, x, float(incumbent))


def sobol_points(n: int, d: int, seed: int) -> np.ndarray:
    """``n`` scrambled Sobol points in the unit cube (prefixes are nested in ``n``)."""
    sampler = qmc.Sobol(d=d, scramble=True, seed=np.random.default_rng(seed))
    m = int(np.ceil(np.log2(max(n, 1))))
    return sampler.random_base2(m)[:n]


def draw_paths(gp: GpPosterior, n_paths: int = 128, n_features: int = 1024, seed: int = 0,
               search: MaxSearchConfig | None = None, feature_draws: int = 1) -> PathBundle:
    """Draw ``n_paths`` posterior paths and locate their maxima.

    ``feature_draws`` independent feature maps are shared out over contiguous
    groups of paths.  Deterministic given ``seed``: the same seed and posterior
    give identical paths, and the same search config gives identical maxima.
    """
    if not isinstance(gp, GpPosterior):
        raise StateError("draw_paths needs a fitted GpPosterior")
    if n_paths < 1 or n_features < 1:
        raise DomainError("n_paths and n_features must be positive")
    if not 1 <= feature_draws <= n_paths:
        raise DomainError("feature_draws must lie in [1, n_paths]")
    search = search or MaxSearchConfig()
    rng = np.random.default_rng(seed)
    ls, s2 = gp.kernel.lengthscales, gp.kernel.signal_variance
    fmaps = tuple(matern52_feature_map(ls, s2, n_features, rng) for _ in range(feature_draws))
    bounds = np.linspace(0, n_paths, feature_draws + 1).round().astype(int)
    groups = tuple(slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]))
    weights = rng.standard_normal((n_features, n_paths))
    coeffs = np.zeros((0, n_paths))
    bundle = PathBundle(gp, fmaps, groups, weights, coeffs, seed, search)
    obs = gp.observations
    if obs.n:
        resid = (obs.values - gp.mean_offset)[:, None] - bundle.prior_values(obs.points)
        object.__setattr__(bundle, "update_coefficients", gp.solve(resid))
    y_star, where = _search_maxima(bundle, search, seed)
    object.__setattr__(bundle, "y_star_base", y_star)
    object.__setattr__(bundle, "argmax_points", where)
    return bundle


def _search_maxima(bundle: PathBundle, search: MaxSearchConfig, seed: int):
    d = bundle.d
    parts = []
    m = search.resolved_candidates(d)
    if m > 0:
        parts.append(sobol_points(m, d, seed + 7919))
    if bundle.gp.observations.n:
        parts.append(bundle.gp.observations.points)
    if search.extra_points is not None:
        parts.append(np.atleast_2d(np.asarray(search.extra_points, dtype=float)))
    cands = np.vstack(parts)
    vals = bundle.evaluate(cands)
    best = np.argmax(vals, axis=0)
    paths = np.arange(bundle.n_paths)
    xs = cands[best].copy()
    fs = vals[best, paths]
    if search.refine_steps > 0:
        xs, fs = _coordinate_ascent(bundle, xs, fs, search.refine_steps,
                                    0.5 * max(m, 1) ** (-1.0 / d))
    return fs, xs


def _coordinate_ascent(bundle: PathBundle, xs, fs, steps: int, delta0: float):
    s, d = xs.shape
    paths = np.arange(s)
    both = np.concatenate([paths, paths])
    delta = np.full(s, delta0)
    for _ in range(steps):
        improved = np.zeros(s, dtype=bool)
        for j in range(d):
            up = xs.copy()
            down = xs.copy()
            up[:, j] = np.minimum(up[:, j] + delta, 1.0)
            down[:, j] = np.maximum(down[:, j] - delta, 0.0)
            vals = bundle.evaluate_paths(np.vstack([up, down]), both)
            v_up, v_down = vals[:s], vals[s:]
            take_up = (v_up > fs) & (v_up >= v_down)
            take_down = (v_down > fs) & ~take_up
            xs[take_up] = up[take_up]
            xs[take_down] = down[take_down]
            fs = np.where(take_up, v_up, np.where(take_down, v_down, fs))
            improved |= take_up | take_down
        delta = np.where(improved, delta, 0.5 * delta)
    return xs, fs


def sample_y_star(bundle: PathBundle) -> np.ndarray:
    """Per-path maxima over the bundle's shared candidate set."""
    return bundle.y_star_base.copy()


def joint_samples(bundle: PathBundle, x) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized joint draws at query rows: ``(y_star, y_x)`` each ``(m, S)``.

    The query itself joins the candidate set, so ``y_star >= y_x`` always.
    """
    y_x = bundle.evaluate(x)
    return np.maximum(bundle.y_star_base[None, :], y_x), y_x


def sample_joint(bundle: PathBundle, x) -> JointSampleBatch:
    """Joint samples of ``(y*, y_x)`` at a single point ``x`` in the unit cube."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != bundle.d:
        raise ShapeError(f"x must have {bundle.d} entries")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("x must lie in the unit cube")
    y_star, y_x = joint_samples(bundle, x[None, :])
    return JointSampleBatch(y_star[0], y_x[0], x, bundle.incumbent)
