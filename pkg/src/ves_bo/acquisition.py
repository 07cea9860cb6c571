"""Acquisition functions and the variational entropy-search machinery.

Notation used throughout: for a query ``x`` and posterior path ``s``,
``y_x[s]`` is the path value at ``x``, ``y_star[s]`` the path maximum and
``z[s] = y_star[s] - max(y_x[s], incumbent)`` the excess of the maximum over
the best value known after evaluating ``x``.  ``z`` is floored at
``clamp_floor`` (``None`` disables the floor).

The lower bound with an exponential density of rate ``lam`` is
``log(lam) - lam * E[z]``; with a Gamma density of shape ``k`` and rate
``beta`` it is ``k log(beta) - log Gamma(k) + (k - 1) E[log z] - beta E[z]``.
For fixed ``x`` the best ``(k, beta)`` satisfies
``log k - psi(k) = log E[z] - E[log z]`` and ``beta = k / E[z]``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import special_math as sm
from .acq_optimizer import OptimizerConfig, argmax_on_candidates, maximize
from .errors import DomainError
from .gp_model import GpPosterior
from .posterior_paths import JointSampleBatch, PathBundle, joint_samples

K_MIN = 1e-3
K_MAX = 1e4
_SQRT_HALF_PI = math.sqrt(0.5 * math.pi)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class DegenerateBatchWarning(RuntimeWarning):
    """Every ``z`` sample sits at the clamp floor; the batch carries no shape information."""


class AcqKind(str, enum.Enum):
    LOG_EI = "log_ei"
    MES = "mes"
    VES_EXP = "ves_exp"
    VES_GAMMA = "ves_gamma"
    RANDOM = "random"


@dataclass(frozen=True)
class GammaParams:
    """Shape ``k`` and rate ``beta`` of the Gamma variational density."""

    k: float
    beta: float

    def __post_init__(self):
        if not (self.k > 0.0 and self.beta > 0.0 and math.isfinite(self.k) and math.isfinite(self.beta)):
            raise DomainError(f"GammaParams need k, beta > 0 (got {self.k}, {self.beta})")


@dataclass(frozen=True)
class ZMoments:
    mean_z: float
    mean_log_z: float
    jensen_gap: float


@dataclass(frozen=True)
class AcquisitionSpec:
    """Which acquisition to run and its knobs.

    ``clamp_floor=None`` disables clamping of ``z``; only the exponential
    bound stays defined in that case.  ``profiled=True`` switches VES-Gamma to
    a single maximization of the bound at the per-point optimal ``(k, beta)``.
    """

    kind: AcqKind = AcqKind.VES_GAMMA
    mc_samples: int = 128
    inner_iters: int = 5
    regularization_lambda: float = 1.0
    clamp_floor: float | None = 1e-10
    early_stop_scale: float = 1e-5
    k_min: float = K_MIN
    k_max: float = K_MAX
    profiled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", AcqKind(self.kind))
        if self.mc_samples < 1 or self.inner_iters < 1:
            raise DomainError("mc_samples and inner_iters must be at least 1")
        if self.regularization_lambda < 0:
            raise DomainError("regularization_lambda must be non-negative")
        if self.clamp_floor is not None and not self.clamp_floor > 0:
            raise DomainError("clamp_floor must be positive (or None to disable)")
        if not 0 < self.k_min < self.k_max:
            raise DomainError("need 0 < k_min < k_max")


# ---------------------------------------------------------------------------
# Closed-form EI / LogEI / MES
# ---------------------------------------------------------------------------

def ei_closed(mean, std, incumbent):
    """Expected improvement ``E[max(y, incumbent)] - incumbent`` of a Gaussian."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    if np.any(std < 0):
        raise DomainError("std must be non-negative")
    diff = mean - incumbent
    safe = np.where(std > 0, std, 1.0)
    u = diff / safe
    ei = safe * (np.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)) + diff * special.ndtr(u)
    out = np.where(std > 0, ei, np.maximum(diff, 0.0))
    return float(out) if out.ndim == 0 else out


def _log_h(u: np.ndarray) -> np.ndarray:
    """``log(phi(u) + u Phi(u))`` for any real ``u``."""
    out = np.empty_like(u)
    hi = u > -1.0
    mid = (u <= -1.0) & (u > -1e3)
    lo = u <= -1e3
    uh = u[hi]
    out[hi] = np.log(np.exp(-0.5 * uh * uh) / math.sqrt(2 * math.pi) + uh * special.ndtr(uh))
    um = u[mid]
    # h(u) = phi(u) * (1 + u * Phi(u) / phi(u)), Phi/phi = sqrt(pi/2) erfcx(-u/sqrt2)
    out[mid] = -0.5 * um * um - _LOG_SQRT_2PI + np.log1p(um * _SQRT_HALF_PI * special.erfcx(-um / math.sqrt(2.0)))
    ul = u[lo]
    inv2 = 1.0 / (ul * ul)
    out[lo] = -0.5 * ul * ul - _LOG_SQRT_2PI + np.log(inv2 * (1.0 - 3.0 * inv2 + 15.0 * inv2 * inv2))
    return out


def log_ei(mean, std, incumbent):
    """Logarithm of expected improvement, finite far below the incumbent."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    if np.any(std <= 0):
        raise DomainError("log_ei needs std > 0")
    mean_b, std_b = np.broadcast_arrays(mean, std)
    u = np.atleast_1d((mean_b - incumbent) / std_b)
    out = np.log(np.atleast_1d(std_b)) + _log_h(u)
    return float(out[0]) if mean_b.ndim == 0 else out.reshape(mean_b.shape)


def mes_terms(gamma: np.ndarray) -> np.ndarray:
    """Per-sample max-value entropy term ``g phi(g) / (2 Phi(g)) - log Phi(g)``, g floored at -6."""
    g = np.maximum(gamma, -6.0)
    log_cdf = special.log_ndtr(g)
    pdf = np.exp(-0.5 * g * g) / math.sqrt(2 * math.pi)
    return g * pdf / (2.0 * np.exp(log_cdf)) - log_cdf


def mes_from_moments(mean: np.ndarray, std: np.ndarray, y_star_samples) -> np.ndarray:
    """MES values for rows of posterior ``mean``/``std`` given shared ``y*`` samples."""
    ys = np.asarray(y_star_samples, dtype=float).ravel()
    if ys.size == 0:
        raise DomainError("mes needs at least one y* sample")
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    std = np.atleast_1d(np.asarray(std, dtype=float))
    pos = std > 0
    out = np.zeros(mean.shape[0])
    if np.any(pos):
        gamma = (ys[None, :] - mean[pos, None]) / std[pos, None]
        out[pos] = np.mean(mes_terms(gamma), axis=1)
    return out


def mes_value(gp: GpPosterior, x, y_star_samples) -> float:
    """Max-value entropy search at a single point (0 where the posterior std vanishes)."""
    mean, var = gp.mean_var(np.asarray(x, dtype=float).reshape(1, -1))
    return float(mes_from_moments(mean, np.sqrt(var), y_star_samples)[0])


# ---------------------------------------------------------------------------
# ESLBO pieces
# ---------------------------------------------------------------------------

def excess(y_star, y_x, incumbent: float, clamp_floor: float | None):
    """``z = y_star - max(y_x, incumbent)``, floored at ``clamp_floor`` unless it is None."""
    z = np.asarray(y_star) - np.maximum(np.asarray(y_x), incumbent)
    return z if clamp_floor is None else np.maximum(z, clamp_floor)


def z_moments(batch: JointSampleBatch, clamp_floor: float = 1e-10) -> ZMoments:
    """Monte-Carlo ``E[z]``, ``E[log z]`` and the Jensen gap ``log E[z] - E[log z]``."""
    if clamp_floor is None or not clamp_floor > 0:
        raise DomainError("z_moments needs a positive clamp floor")
    z = excess(batch.y_star, batch.y_x, batch.incumbent, clamp_floor)
    mean_z = float(np.mean(z))
    mean_log_z = float(np.mean(np.log(z)))
    return ZMoments(mean_z, mean_log_z, max(math.log(mean_z) - mean_log_z, 0.0))


def _mean_z(batch: JointSampleBatch, clamp_floor):
    if clamp_floor is None:
        # linear in z, so split it: E[y*] - E[max(y_x, y*_t)]
        return float(np.mean(batch.y_star) - np.mean(np.maximum(batch.y_x, batch.incumbent)))
    return float(np.mean(excess(batch.y_star, batch.y_x, batch.incumbent, clamp_floor)))


def eslbo_exp(batch: JointSampleBatch, lam: float, clamp_floor: float | None = 1e-10) -> float:
    """Exponential-family bound ``log(lam) - lam * E[z]``."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    return math.log(lam) - lam * _mean_z(batch, clamp_floor)


def solve_lambda(batch: JointSampleBatch, clamp_floor: float = 1e-10) -> float:
    """Optimal exponential rate ``1 / E[z]``; warns when the batch is fully clamped."""
    mean_z = _mean_z(batch, clamp_floor)
    floor = clamp_floor if clamp_floor is not None else 0.0
    if mean_z <= floor:
        warnings.warn("all z samples at the clamp floor", DegenerateBatchWarning, stacklevel=2)
        if floor <= 0:
            raise DomainError("E[z] is not positive and clamping is disabled")
        return 1.0 / floor
    return 1.0 / mean_z


def eslbo_gamma(batch: JointSampleBatch, params: GammaParams, clamp_floor: float = 1e-10) -> float:
    """Gamma-family bound ``k log b - log G(k) + (k-1) E[log z] - b E[z]``."""
    m = z_moments(batch, clamp_floor)
    return _gamma_bound(params.k, params.beta, m.mean_z, m.mean_log_z)


def _gamma_bound(k, beta, mean_z, mean_log_z):
    return k * np.log(beta) - sm.log_gamma(k) + (k - 1.0) * mean_log_z - beta * mean_z


def solve_k(moments: ZMoments, lambda_reg: float = 1.0, k_min: float = K_MIN,
            k_max: float = K_MAX) -> float:
    """Shape parameter from the Jensen gap.

    Minimizes ``xi(k)^2 + lambda_reg (k - 1)^2`` with
    ``xi(k) = log k - psi(k) - gap`` over ``[k_min, k_max]``.  Without
    regularization this is the root of ``xi``, clipped to the range.
    """
    gap = float(moments.jensen_gap)
    if lambda_reg < 0:
        raise DomainError("lambda_reg must be non-negative")
    lo, hi = math.log(k_min), math.log(k_max)
    if lambda_reg == 0.0:
        if gap >= sm.log_minus_digamma(k_min):
            return k_min
        if gap <= sm.log_minus_digamma(k_max):
            return k_max
        u = sm.brent_root(lambda t: sm.log_minus_digamma(math.exp(t)) - gap, lo, hi, tol=1e-14)
        return math.exp(u)

    def objective(t):
        k = math.exp(t)
        xi = sm.log_minus_digamma(k) - gap
        return xi * xi + lambda_reg * (k - 1.0) ** 2

    grid = np.linspace(lo, hi, 17)
    vals = [objective(t) for t in grid]
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, 16)]
    t = sm.brent_min(objective, a, b, tol=1e-12)
    if objective(t) > vals[i]:
        t = grid[i]
    return float(min(max(math.exp(t), k_min), k_max))


def solve_beta(k: float, moments: ZMoments) -> float:
    """Optimal Gamma rate ``k / E[z]`` for a given shape."""
    if not k > 0:
        raise DomainError("k must be positive")
    return k / moments.mean_z


def solve_k_batch(gaps: np.ndarray, lambda_reg: float = 1.0, k_min: float = K_MIN,
                  k_max: float = K_MAX, iters: int = 48) -> np.ndarray:
    """Vectorized ``solve_k`` for many Jensen gaps (grid scan then golden-section in log k)."""
    gaps = np.asarray(gaps, dtype=float)
    lo, hi = math.log(k_min), math.log(k_max)

    def obj(t):
        k = np.exp(t)
        xi = sm.log_minus_digamma(k) - gaps
        return xi * xi + lambda_reg * (k - 1.0) ** 2

    if lambda_reg == 0.0:
        # bisection on the monotone xi
        a = np.full_like(gaps, lo)
        b = np.full_like(gaps, hi)
        for _ in range(iters):
            mid = 0.5 * (a + b)
            pos = sm.log_minus_digamma(np.exp(mid)) - gaps > 0
            a = np.where(pos, mid, a)
            b = np.where(pos, b, mid)
        return np.exp(0.5 * (a + b))
    grid = np.linspace(lo, hi, 17)
    vals = np.stack([obj(np.full_like(gaps, t)) for t in grid])
    i = np.argmin(vals, axis=0)
    a = grid[np.maximum(i - 1, 0)]
    b = grid[np.minimum(i + 1, 16)]
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = obj(c), obj(d)
    for _ in range(iters):
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - inv_phi * (b - a)
        new_d = a + inv_phi * (b - a)
        c2 = np.where(left, new_c, d)
        d2 = np.where(left, c, new_d)
        fc2 = np.where(left, obj(new_c), fd)
        fd2 = np.where(left, fc, obj(new_d))
        c, d, fc, fd = c2, d2, fc2, fd2
    return np.clip(np.exp(0.5 * (a + b)), k_min, k_max)


def eslbo_gamma_profiled(batch: JointSampleBatch, spec: AcquisitionSpec | None = None) -> float:
    """Bound at the point's own optimal ``(k*, beta*)`` (variable projection)."""
    spec = spec or AcquisitionSpec()
    m = z_moments(batch, spec.clamp_floor)
    k = solve_k(m, spec.regularization_lambda, spec.k_min, spec.k_max)
    return float(_gamma_bound(k, solve_beta(k, m), m.mean_z, m.mean_log_z))


# ---------------------------------------------------------------------------
# Batch objectives over query rows (used by the optimizer)
# ---------------------------------------------------------------------------

def mc_ei_values(bundle: PathBundle, x) -> np.ndarray:
    """Monte-Carlo EI ``mean_s max(y_x[s] - incumbent, 0)`` at query rows."""
    y_x = bundle.evaluate(x)
    return np.mean(np.maximum(y_x - bundle.incumbent, 0.0), axis=1)


def eslbo_exp_values(bundle: PathBundle, x, lam: float, clamp_floor: float | None) -> np.ndarray:
    y_star, y_x = joint_samples(bundle, x)
    if clamp_floor is None:
        mean_z = np.mean(y_star, axis=1) - np.mean(np.maximum(y_x, bundle.incumbent), axis=1)
    else:
        mean_z = np.mean(excess(y_star, y_x, bundle.incumbent, clamp_floor), axis=1)
    return math.log(lam) - lam * mean_z


def eslbo_gamma_values(bundle: PathBundle, x, params: GammaParams, clamp_floor: float) -> np.ndarray:
    return _gamma_objective(bundle, params, clamp_floor)(x)


def _gamma_objective(bundle: PathBundle, params: GammaParams, clamp_floor: float):
    """Batch ESLBO-Gamma at fixed ``(k, beta)`` with the x-independent part precomputed."""
    k, beta = params.k, params.beta
    const = k * math.log(beta) - float(sm.log_gamma(k))

    def objective(x):
        y_star, y_x = joint_samples(bundle, x)
        z = excess(y_star, y_x, bundle.incumbent, clamp_floor)
        return const + (k - 1.0) * np.mean(np.log(z), axis=1) - beta * np.mean(z, axis=1)
    return objective


def profiled_values(bundle: PathBundle, x, spec: AcquisitionSpec) -> np.ndarray:
    y_star, y_x = joint_samples(bundle, x)
    z = excess(y_star, y_x, bundle.incumbent, spec.clamp_floor)
    mean_z = np.mean(z, axis=1)
    mean_log_z = np.mean(np.log(z), axis=1)
    gaps = np.maximum(np.log(mean_z) - mean_log_z, 0.0)
    k = solve_k_batch(gaps, spec.regularization_lambda, spec.k_min, spec.k_max)
    return _gamma_bound(k, k / mean_z, mean_z, mean_log_z)


# ---------------------------------------------------------------------------
# Point selection
# ---------------------------------------------------------------------------

def _std_tie_break(gp: GpPosterior, bundle: PathBundle):
    def pick(cands: np.ndarray) -> int:
        ei = mc_ei_values(bundle, cands)
        _, var = gp.mean_var(cands)
        return int(np.lexsort((np.arange(len(cands)), -var, -ei))[0])
    return pick


@dataclass
class VesSelection:
    """Outcome of the inner loop: the chosen point and the per-step variational fits."""

    x: np.ndarray
    params: list = field(default_factory=list)
    moments: list = field(default_factory=list)
    path: list = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.params)


def _fit_q(bundle: PathBundle, x: np.ndarray, spec: AcquisitionSpec):
    batch = JointSampleBatch.from_arrays(*[a[0] for a in joint_samples(bundle, x[None, :])],
                                         bundle.incumbent, x)
    if spec.kind == AcqKind.VES_EXP:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateBatchWarning)
            lam = solve_lambda(batch, spec.clamp_floor)
        floor = spec.clamp_floor if spec.clamp_floor is not None else 0.0
        mean_z = max(_mean_z(batch, spec.clamp_floor), floor)
        return GammaParams(1.0, lam), ZMoments(mean_z, math.nan, math.nan)
    m = z_moments(batch, spec.clamp_floor)
    if spec.clamp_floor is not None and m.mean_z <= spec.clamp_floor:
        warnings.warn("all z samples at the clamp floor", DegenerateBatchWarning, stacklevel=3)
    k = solve_k(m, spec.regularization_lambda, spec.k_min, spec.k_max)
    return GammaParams(k, solve_beta(k, m)), m


def ves_gamma_step(gp: GpPosterior, bundle: PathBundle, x_current, spec: AcquisitionSpec,
                   opt: OptimizerConfig | None = None):
    """One inner iteration: fit ``q`` at ``x_current`` then maximize the bound over ``x``.

    With ``spec.kind == VES_EXP`` the shape is pinned to 1 and the rate is
    ``1 / E[z]``.  Returns ``(x_next, GammaParams)``.
    """
    x_next, params, _ = _ves_step(gp, bundle, np.asarray(x_current, dtype=float), spec,
                                  opt or OptimizerConfig())
    return x_next, params


def _incumbent_points(gp: GpPosterior) -> np.ndarray:
    """Location of the best observation (no rows for an empty data set)."""
    obs = gp.observations
    if obs.n == 0:
        return np.empty((0, gp.d))
    return obs.points[[int(np.argmax(obs.values))]]


def _ves_step(gp, bundle, x_current, spec, opt):
    params, moments = _fit_q(bundle, x_current, spec)
    if spec.kind == AcqKind.VES_EXP:
        def objective(x):
            return eslbo_exp_values(bundle, x, params.beta, spec.clamp_floor)
    else:
        objective = _gamma_objective(bundle, params, spec.clamp_floor)
    anchors = np.vstack([x_current[None, :], _incumbent_points(gp)])
    x_next, _ = maximize(objective, gp.d, opt, tie_break=_std_tie_break(gp, bundle), anchors=anchors)
    return x_next, params, moments


def initial_point(bundle: PathBundle, opt: OptimizerConfig) -> np.ndarray:
    """Warm start: the optimizer candidate with the largest Monte-Carlo EI."""
    x0, _ = argmax_on_candidates(lambda x: mc_ei_values(bundle, x), bundle.d, opt)
    return x0


def ves_inner_loop(gp: GpPosterior, bundle: PathBundle, spec: AcquisitionSpec,
                   opt: OptimizerConfig | None = None, x0=None) -> VesSelection:
    """Alternate between fitting ``q`` and maximizing over ``x`` for up to ``inner_iters`` rounds.

    Stops early once consecutive points are closer than ``d * early_stop_scale``.
    With ``spec.profiled`` a single maximization of the profiled bound is run instead.
    """
    opt = opt or OptimizerConfig()
    x = initial_point(bundle, opt) if x0 is None else np.asarray(x0, dtype=float)
    sel = VesSelection(x=x, path=[x])
    if spec.profiled and spec.kind == AcqKind.VES_GAMMA:
        x_best, _ = maximize(lambda q: profiled_values(bundle, q, spec), gp.d, opt,
                             tie_break=_std_tie_break(gp, bundle),
                             anchors=np.vstack([x[None, :], _incumbent_points(gp)]))
        params, moments = _fit_q(bundle, x_best, spec)
        sel.x = x_best
        sel.params.append(params)
        sel.moments.append(moments)
        sel.path.append(x_best)
        return sel
    for _ in range(spec.inner_iters):
        x_next, params, moments = _ves_step(gp, bundle, x, spec, opt)
        sel.params.append(params)
        sel.moments.append(moments)
        sel.path.append(x_next)
        done = np.linalg.norm(x_next - x) < gp.d * spec.early_stop_scale
        x = x_next
        if done:
            break
    sel.x = x
    return sel


def ves_select(gp: GpPosterior, bundle: PathBundle, spec: AcquisitionSpec,
               opt: OptimizerConfig | None = None) -> np.ndarray:
    """The point chosen by :func:`ves_inner_loop`."""
    return ves_inner_loop(gp, bundle, spec, opt).x


def select_log_ei(gp: GpPosterior, opt: OptimizerConfig | None = None) -> np.ndarray:
    """Maximize closed-form LogEI."""
    inc = gp.incumbent

    def objective(x):
        mean, var = gp.mean_var(x)
        return log_ei(mean, np.sqrt(np.maximum(var, 1e-300)), inc)

    x, _ = maximize(objective, gp.d, opt, anchors=_incumbent_points(gp))
    return x


def select_mes(gp: GpPosterior, bundle: PathBundle, opt: OptimizerConfig | None = None) -> np.ndarray:
    """Maximize MES using the bundle's path maxima as ``y*`` samples."""
    ys = bundle.y_star_base

    def objective(x):
        mean, var = gp.mean_var(x)
        return mes_from_moments(mean, np.sqrt(var), ys)

    x, _ = maximize(objective, gp.d, opt, anchors=_incumbent_points(gp))
    return x
