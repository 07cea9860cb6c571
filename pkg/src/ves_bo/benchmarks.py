"""Test objectives in the maximization convention.

Classical functions are the usual minimization forms, negated, on their usual
boxes.  ``make_gp_sample`` builds a fixed random-feature draw from an
isotropic Matern-5/2 prior, which gives an unlimited supply of objectives with
a known smoothness.

Names understood by :func:`get_benchmark`::

    branin  levy  hartmann  griewank  ackley[:d]  michalewicz[:d]  gp:<d>:<lengthscale>:<seed>
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, ShapeError


class UnknownBenchmarkError(KeyError, DomainError):
    """Raised for names that are not in the registry."""


@dataclass(frozen=True, eq=False)
class Benchmark:
    """A box-constrained objective to be maximized.

    Attributes
    ----------
    name : registry identifier
    d : input dimension
    bounds : (d, 2) array of ``[lo, hi]`` per coordinate
    optimum_value : the maximum ``f*`` if known, else ``None``
    fn : vectorized ``(m, d) -> (m,)`` objective in box coordinates
    """

    name: str
    d: int
    bounds: np.ndarray
    optimum_value: float | None
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __post_init__(self):
        b = np.array(self.bounds, dtype=float).reshape(self.d, 2)
        if np.any(b[:, 1] <= b[:, 0]):
            raise DomainError("every bound needs lo < hi")
        b.setflags(write=False)
        object.__setattr__(self, "bounds", b)

    def _rows(self, x) -> tuple[np.ndarray, bool]:
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
        if arr.shape[1] != self.d:
            raise ShapeError(f"{self.name} expects {self.d} coordinates, got {arr.shape[1]}")
        return arr, single

    def evaluate(self, x):
        """Objective at box coordinates; a vector gives a float, rows give an array."""
        arr, single = self._rows(x)
        vals = np.asarray(self.fn(arr), dtype=float)
        return float(vals[0]) if single else vals

    def to_unit(self, x) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return (np.asarray(x, dtype=float) - lo) / (hi - lo)

    def from_unit(self, u) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return lo + np.clip(np.asarray(u, dtype=float), 0.0, 1.0) * (hi - lo)

    def evaluate_unit(self, u):
        """Objective at unit-cube coordinates (the convention used by the optimizer)."""
        return self.evaluate(self.from_unit(u))

    def regret(self, best_value: float) -> float:
        """Simple regret ``f* - best`` or, without a known optimum, ``-best``."""
        if self.optimum_value is None:
            return -float(best_value)
        return float(self.optimum_value) - float(best_value)


# ---------------------------------------------------------------------------
# standard minimization forms, rows of x
# ---------------------------------------------------------------------------

def branin_min(x):
    x1, x2 = x[:, 0], x[:, 1]
    b = 5.1 / (4.0 * math.pi ** 2)
    c = 5.0 / math.pi
    t = 1.0 / (8.0 * math.pi)
    return (x2 - b * x1 ** 2 + c * x1 - 6.0) ** 2 + 10.0 * (1.0 - t) * np.cos(x1) + 10.0


def levy_min(x):
    w = 1.0 + (x - 1.0) / 4.0
    head = np.sin(math.pi * w[:, 0]) ** 2
    mid = np.sum((w[:, :-1] - 1.0) ** 2 * (1.0 + 10.0 * np.sin(math.pi * w[:, :-1] + 1.0) ** 2), axis=1)
    tail = (w[:, -1] - 1.0) ** 2 * (1.0 + np.sin(2.0 * math.pi * w[:, -1]) ** 2)
    return head + mid + tail


_H6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_H6_A = np.array([
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
])
_H6_P = 1e-4 * np.array([
    [1312, 1696, 5569, 124, 8283, 5886],
    [2329, 4135, 8307, 3736, 1004, 9991],
    [2348, 1451, 3522, 2883, 3047, 6650],
    [4047, 8828, 8732, 5743, 1091, 381],
])


def hartmann6_min(x):
    inner = np.sum(_H6_A[None] * (x[:, None, :] - _H6_P[None]) ** 2, axis=2)
    return -np.exp(-inner) @ _H6_ALPHA


def griewank_min(x):
    i = np.arange(1, x.shape[1] + 1)
    return np.sum(x ** 2, axis=1) / 4000.0 - np.prod(np.cos(x / np.sqrt(i)), axis=1) + 1.0


def ackley_min(x):
    a, b, c = 20.0, 0.2, 2.0 * math.pi
    r = np.sqrt(np.mean(x ** 2, axis=1))
    return -a * np.exp(-b * r) - np.exp(np.mean(np.cos(c * x), axis=1)) + a + math.e


def michalewicz_min(x, m: int = 10):
    i = np.arange(1, x.shape[1] + 1)
    return -np.sum(np.sin(x) * np.sin(i * x ** 2 / math.pi) ** (2 * m), axis=1)


def _negated(f):
    return lambda x: -f(x)


# maxima of the negated functions, from a dense-grid + local-refinement search
BRANIN_MAX = -0.39788735772973816
HARTMANN6_MAX = 3.3223680114155147
MICHALEWICZ5_MAX = 4.6876581791490725

_FIXED = {
    "branin": (2, [[-5.0, 10.0], [0.0, 15.0]], BRANIN_MAX, branin_min),
    "levy": (4, [[-10.0, 10.0]] * 4, 0.0, levy_min),
    "hartmann": (6, [[0.0, 1.0]] * 6, HARTMANN6_MAX, hartmann6_min),
    "griewank": (8, [[-600.0, 600.0]] * 8, 0.0, griewank_min),
}


def make_synthetic(name: str, d: int | None = None) -> Benchmark:
    """A classical test function, negated.

    ``d`` applies only to ``ackley`` (default 2) and ``michalewicz``
    (default 5; the optimum is recorded only for d = 5).
    """
    key = name.lower()
    if key in _FIXED:
        dim, bounds, opt, f = _FIXED[key]
        if d is not None and d != dim:
            raise DomainError(f"{key} is defined for d={dim} only")
        return Benchmark(key, dim, np.array(bounds), opt, _negated(f))
    if key == "ackley":
        dim = 2 if d is None else int(d)
        _check_dim(dim)
        return Benchmark(f"ackley:{dim}", dim, np.tile([-32.768, 32.768], (dim, 1)), 0.0,
                         _negated(ackley_min))
    if key == "michalewicz":
        dim = 5 if d is None else int(d)
        _check_dim(dim)
        opt = MICHALEWICZ5_MAX if dim == 5 else None
        return Benchmark(f"michalewicz:{dim}", dim, np.tile([0.0, math.pi], (dim, 1)), opt,
                         _negated(michalewicz_min))
    raise UnknownBenchmarkError(name)


def _check_dim(d: int):
    if d < 1:
        raise DomainError("dimension must be at least 1")


def make_gp_sample(d: int, lengthscale: float, seed: int = 0, n_features: int = 4096) -> Benchmark:
    """One fixed draw from an isotropic Matern-5/2 prior with unit variance on ``[0, 1]^d``."""
    _check_dim(d)
    if not lengthscale > 0:
        raise DomainError("lengthscale must be positive")
    rng = np.random.default_rng([seed, d, n_features, int(round(lengthscale * 1e6))])
    g = rng.standard_normal((n_features, d))
    u = rng.chisquare(5.0, size=(n_features, 1))
    freqs = g * np.sqrt(5.0 / u) / lengthscale
    phases = rng.uniform(0.0, 2.0 * math.pi, size=n_features)
    weights = rng.standard_normal(n_features) * math.sqrt(2.0 / n_features)

    def f(x):
        return np.cos(x @ freqs.T + phases) @ weights

    name = f"gp:{d}:{lengthscale:g}:{seed}"
    return Benchmark(name, d, np.tile([0.0, 1.0], (d, 1)), None, f)


def list_benchmarks() -> list[str]:
    """Names accepted by :func:`get_benchmark` (parametric families shown with defaults)."""
    return ["branin", "levy", "hartmann", "griewank", "ackley:2", "michalewicz:5", "gp:2:0.25:0"]


def get_benchmark(name: str) -> Benchmark:
    """Look up a benchmark by registry name."""
    parts = name.strip().lower().split(":")
    try:
        if parts[0] == "gp":
            if len(parts) not in (3, 4):
                raise UnknownBenchmarkError(name)
            seed = int(parts[3]) if len(parts) == 4 else 0
            return make_gp_sample(int(parts[1]), float(parts[2]), seed)
        if len(parts) == 2:
            return make_synthetic(parts[0], int(parts[1]))
        if len(parts) == 1:
            return make_synthetic(parts[0])
    except ValueError as exc:
        if isinstance(exc, DomainError):
            raise
        raise UnknownBenchmarkError(name) from exc
    raise UnknownBenchmarkError(name)
