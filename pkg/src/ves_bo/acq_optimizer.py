"""Deterministic multi-start maximizer over the unit cube.

Objectives are batch callables: they take an ``(m, d)`` array and return
``m`` values.  A scrambled Sobol set is scored, the best ``n_starts``
candidates are refined by projected gradient ascent (central finite
differences fed to bounded L-BFGS-B), and the best refined point wins.  Ties go to the lowest candidate index.
Callers may add anchor points (for example the incumbent) that are always
refined, which matters for Monte-Carlo objectives that are exactly flat away
from a few narrow peaks.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import OptimizationError
from .posterior_paths import sobol_points

Objective = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class OptimizerConfig:
    """Acquisition optimizer settings (``n_raw=None`` means ``512 d`` capped at ``raw_cap``)."""

    n_raw: int | None = None
    raw_cap: int = 4096
    n_starts: int = 10
    max_local_steps: int = 50
    step_tol: float = 1e-6
    fd_step: float = 1e-4
    seed: int = 0

    def resolved_raw(self, d: int) -> int:
        n = self.n_raw if self.n_raw is not None else min(512 * d, self.raw_cap)
        if n < 1 or self.n_starts < 1 or self.max_local_steps < 0:
            raise ValueError("optimizer counts must be positive")
        return int(n)


@lru_cache(maxsize=64)
def _cached_candidates(n: int, d: int, seed: int) -> np.ndarray:
    pts = sobol_points(n, d, seed)
    pts.setflags(write=False)
    return pts


def candidates(d: int, config: OptimizerConfig) -> np.ndarray:
    """The optimizer's raw Sobol candidate set (shared by every call with this config)."""
    return _cached_candidates(config.resolved_raw(d), d, config.seed)


def _safe_eval(objective: Objective, x: np.ndarray) -> np.ndarray:
    vals = np.asarray(objective(x), dtype=float).reshape(-1)
    return np.where(np.isfinite(vals), vals, -np.inf)


def _fd_gradient(objective: Objective, x: np.ndarray, h: float) -> np.ndarray:
    k, d = x.shape
    eye = np.eye(d)
    xp = np.minimum(x[:, None, :] + h * eye, 1.0)
    xm = np.maximum(x[:, None, :] - h * eye, 0.0)
    vals = _safe_eval(objective, np.concatenate([xp, xm], axis=1).reshape(-1, d)).reshape(k, 2 * d)
    width = np.einsum("kjd,jd->kj", xp - xm, eye)
    grad = (vals[:, :d] - vals[:, d:]) / width
    return np.where(np.isfinite(grad), grad, 0.0)


def local_ascent(objective: Objective, x0: np.ndarray, f0: np.ndarray,
                 config: OptimizerConfig) -> tuple[np.ndarray, np.ndarray]:
    """Refine each start with bounded L-BFGS-B; a start is never made worse."""
    x = np.array(x0, dtype=float)
    f = np.array(f0, dtype=float)
    if config.max_local_steps == 0:
        return x, f
    d = x.shape[1]
    bounds = [(0.0, 1.0)] * d

    def neg(z):
        z = np.clip(z, 0.0, 1.0)[None, :]
        val = _safe_eval(objective, z)[0]
        if not np.isfinite(val):
            return 1e300, np.zeros(d)
        return -val, -_fd_gradient(objective, z, config.fd_step)[0]

    for i in range(x.shape[0]):
        res = optimize.minimize(neg, x[i], jac=True, method="L-BFGS-B", bounds=bounds,
                                options={"maxiter": config.max_local_steps,
                                         "gtol": config.step_tol, "ftol": 1e-13})
        if np.isfinite(res.fun) and -res.fun > f[i]:
            x[i] = np.clip(res.x, 0.0, 1.0)
            f[i] = -float(res.fun)
    return x, f


def maximize(objective: Objective, d: int, config: OptimizerConfig | None = None,
             tie_break: Callable[[np.ndarray], int] | None = None,
             anchors=None) -> tuple[np.ndarray, float]:
    """Maximize ``objective`` over ``[0, 1]^d``.

    Parameters
    ----------
    objective : batch callable ``(m, d) -> (m,)``
    d : input dimension
    config : optimizer settings; its seed fixes the candidate set
    tie_break : optional ``candidates -> index`` used only when every finite
        raw candidate scores the same (the objective carries no signal)
    anchors : optional ``(a, d)`` points refined in addition to the best raw
        candidates; they rank after the raw candidates on ties

    Returns
    -------
    x_best, value
    """
    config = config or OptimizerConfig()
    raw = candidates(d, config)
    n_raw = raw.shape[0]
    if anchors is not None:
        anchors = np.clip(np.asarray(anchors, dtype=float).reshape(-1, d), 0.0, 1.0)
        cands = np.concatenate([raw, anchors])
    else:
        cands = raw
    vals = _safe_eval(objective, cands)
    finite = np.isfinite(vals)
    if not np.any(finite):
        raise OptimizationError("objective is non-finite at every raw candidate")
    if tie_break is not None and finite[:n_raw].any() and np.ptp(vals[finite]) == 0.0:
        pool = np.flatnonzero(finite[:n_raw])
        i = pool[int(tie_break(raw[pool]))]
        return raw[i].copy(), float(vals[i])
    order = np.lexsort((np.arange(n_raw), -vals[:n_raw]))
    starts = order[:min(config.n_starts, int(finite[:n_raw].sum()))]
    extra = np.flatnonzero(finite[n_raw:]) + n_raw
    starts = np.concatenate([starts, extra]).astype(int)
    x, f = local_ascent(objective, cands[starts], vals[starts], config)
    best = int(np.lexsort((starts, -f))[0])
    return x[best].copy(), float(f[best])


def argmax_on_candidates(objective: Objective, d: int, config: OptimizerConfig) -> tuple[np.ndarray, float]:
    """Best raw candidate without local refinement (lowest index on ties)."""
    cands = candidates(d, config)
    vals = _safe_eval(objective, cands)
    if not np.any(np.isfinite(vals)):
        raise OptimizationError("objective is non-finite at every raw candidate")
    i = int(np.argmax(vals))
    return cands[i].copy(), float(vals[i])
