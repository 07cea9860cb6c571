"""Scalar special functions, Brent's methods and Kolmogorov-Smirnov statistics.

Digamma and log-gamma are evaluated by shifting the argument with the
recurrence ``f(x) = f(x + 1) - ...`` until an asymptotic series is accurate,
then summing the series.  Both accept scalars or arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .errors import BracketError, ConvergenceError, DomainError

EULER_GAMMA = 0.57721566490153286061
MAX_ITER = 200

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _positive_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} requires finite arguments")
    if np.any(arr <= 0.0):
        raise DomainError(f"{name} requires positive arguments")
    return arr


def _scalar_or_array(out: np.ndarray, like):
    return float(out) if np.ndim(like) == 0 else out


def _digamma_tail(inv2: np.ndarray) -> np.ndarray:
    # sum_{n=1}^{7} B_2n / (2n x^2n), nested in 1/x^2
    return inv2 * (1 / 12 - inv2 * (1 / 120 - inv2 * (1 / 252 - inv2 * (
        1 / 240 - inv2 * (1 / 132 - inv2 * (691 / 32760 - inv2 / 12))))))


def digamma(x):
    """Digamma function psi(x) = d/dx log Gamma(x) for x > 0.

    Shifts to ``x >= 6`` with ``psi(x) = psi(x + 1) - 1/x`` and then applies the
    asymptotic expansion with seven Bernoulli terms.
    """
    arr = _positive_array(x, "digamma")
    z = arr.copy()
    acc = np.zeros_like(z)
    small = z < 6.0
    while np.any(small):
        acc[small] -= 1.0 / z[small]
        z[small] += 1.0
        small = z < 6.0
    inv = 1.0 / z
    out = acc + np.log(z) - 0.5 * inv - _digamma_tail(inv * inv)
    return _scalar_or_array(out, x)


def log_minus_digamma(k):
    """Return ``log(k) - psi(k)`` without cancellation for large ``k``.

    The function is positive and strictly decreasing on (0, inf), tending to
    zero like ``1 / (2k)``.
    """
    arr = _positive_array(k, "log_minus_digamma")
    z = arr.copy()
    acc = np.zeros_like(z)
    small = z < 6.0
    while np.any(small):
        # log k - psi(k) = log k - log(k+1) + 1/k + [log(k+1) - psi(k+1)]
        acc[small] += 1.0 / z[small] + np.log(z[small]) - np.log1p(z[small])
        z[small] += 1.0
        small = z < 6.0
    inv = 1.0 / z
    out = acc + 0.5 * inv + _digamma_tail(inv * inv)
    return _scalar_or_array(out, k)


def log_gamma(x):
    """Natural log of the Gamma function for x > 0 (Stirling series after shifting to x >= 10)."""
    arr = _positive_array(x, "log_gamma")
    z = arr.copy()
    acc = np.zeros_like(z)
    small = z < 10.0
    while np.any(small):
        acc[small] -= np.log(z[small])
        z[small] += 1.0
        small = z < 10.0
    inv = 1.0 / z
    inv2 = inv * inv
    tail = inv * (1 / 12 - inv2 * (1 / 360 - inv2 * (1 / 1260 - inv2 * (
        1 / 1680 - inv2 * (1 / 1188 - inv2 * (691 / 360360 - inv2 / 156))))))
    out = acc + (z - 0.5) * np.log(z) - z + _HALF_LOG_2PI + tail
    return _scalar_or_array(out, x)


def std_normal(x):
    """Standard normal ``(pdf, cdf, log_cdf)`` at ``x``.

    ``log_cdf`` stays finite far into the lower tail; ``cdf`` underflows to 0
    only below about -38.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("std_normal requires finite arguments")
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * arr * arr)
    cdf = special.ndtr(arr)
    log_cdf = special.log_ndtr(arr)
    if np.ndim(x) == 0:
        return float(pdf), float(cdf), float(log_cdf)
    return pdf, cdf, log_cdf


def brent_root(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10) -> float:
    """Find a root of ``f`` in ``[lo, hi]`` with Brent's method.

    Returns as soon as ``|f(r)| <= tol`` or the bracket is narrower than ``tol``.

    Raises
    ------
    BracketError
        If ``f(lo)`` and ``f(hi)`` have the same strict sign.
    ConvergenceError
        If 200 iterations do not suffice.
    """
    if not lo < hi:
        raise DomainError("brent_root needs lo < hi")
    if tol <= 0:
        raise DomainError("tol must be positive")
    a, b = float(lo), float(hi)
    fa, fb = float(f(a)), float(f(b))
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={fa:.3g}, {fb:.3g}")
    c, fc = a, fa
    d = e = b - a
    eps = np.finfo(float).eps
    for _ in range(MAX_ITER):
        if fb * fc > 0.0:
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * eps * abs(b) + 0.5 * tol
        xm = 0.5 * (c - b)
        if abs(fb) <= tol or abs(xm) <= tol1:
            return b
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * xm * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                q = -q
            p = abs(p)
            if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = xm
        else:
            d = e = xm
        a, fa = b, fb
        b += d if abs(d) > tol1 else math.copysign(tol1, xm)
        fb = float(f(b))
    raise ConvergenceError("brent_root exceeded 200 iterations")


def brent_min(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10) -> float:
    """Minimize ``f`` on ``[lo, hi]`` by Brent's golden-section/parabolic method.

    For a unimodal ``f`` the result is the global minimizer to within ``tol``;
    otherwise some local minimizer inside the bracket is returned.
    """
    if not lo < hi:
        raise DomainError("brent_min needs lo < hi")
    if tol <= 0:
        raise DomainError("tol must be positive")
    golden = 0.5 * (3.0 - math.sqrt(5.0))
    a, b = float(lo), float(hi)
    x = w = v = a + golden * (b - a)
    fx = fw = fv = float(f(x))
    d = e = 0.0
    eps = math.sqrt(np.finfo(float).eps) * 1e-3
    for _ in range(MAX_ITER):
        xm = 0.5 * (a + b)
        tol1 = eps * abs(x) + tol / 3.0
        tol2 = 2.0 * tol1
        if abs(x - xm) <= tol2 - 0.5 * (b - a):
            return x
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            if abs(p) >= abs(0.5 * q * e) or p <= q * (a - x) or p >= q * (b - x):
                e = (a - x) if x >= xm else (b - x)
                d = golden * e
            else:
                e, d = d, p / q
                u = x + d
                if u - a < tol2 or b - u < tol2:
                    d = math.copysign(tol1, xm - x)
        else:
            e = (a - x) if x >= xm else (b - x)
            d = golden * e
        u = x + d if abs(d) >= tol1 else x + math.copysign(tol1, d)
        fu = float(f(u))
        if fu <= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    raise ConvergenceError("brent_min exceeded 200 iterations")


@dataclass(frozen=True)
class KsResult:
    """Outcome of a two-sample Kolmogorov-Smirnov test."""

    statistic_d: float
    p_value: float
    n1: int
    n2: int

    def passes(self, alpha: float = 0.05) -> bool:
        """True when the null hypothesis is not rejected at level ``alpha``."""
        return self.p_value >= alpha


def ks_survival(z: float, term_tol: float = 1e-12) -> float:
    """Kolmogorov survival function ``Q(z) = 2 sum (-1)^(k-1) exp(-2 k^2 z^2)``.

    Below z = 1.18 the alternating series converges slowly, so the equivalent
    theta-function form ``1 - sqrt(2 pi)/z sum exp(-(2k-1)^2 pi^2 / (8 z^2))`` is
    summed instead.  Terms are dropped once their magnitude falls below
    ``term_tol``.
    """
    z = float(z)
    if not math.isfinite(z):
        raise DomainError("ks_survival requires a finite argument")
    if z <= 0.0:
        return 1.0
    if z < 1.18:
        c = -(math.pi ** 2) / (8.0 * z * z)
        total = 0.0
        k = 1
        while True:
            term = math.exp(c * (2 * k - 1) ** 2)
            total += term
            if term < term_tol:
                break
            k += 1
        q = 1.0 - math.sqrt(2.0 * math.pi) / z * total
    else:
        q = 0.0
        k = 1
        while True:
            term = 2.0 * math.exp(-2.0 * k * k * z * z)
            q += term if k % 2 == 1 else -term
            if term < term_tol:
                break
            k += 1
    return min(1.0, max(0.0, q))


def ks_statistic(x, y) -> float:
    """Maximum absolute ECDF difference over the pooled sample points."""
    xs = np.sort(np.asarray(x, dtype=float))
    ys = np.sort(np.asarray(y, dtype=float))
    pooled = np.concatenate([xs, ys])
    fx = np.searchsorted(xs, pooled, side="right") / xs.size
    fy = np.searchsorted(ys, pooled, side="right") / ys.size
    return float(np.max(np.abs(fx - fy)))


def ks_two_sample(x, y) -> KsResult:
    """Two-sample KS test with the asymptotic p-value ``Q(sqrt(n1 n2 / (n1 + n2)) D)``."""
    xa = np.asarray(x, dtype=float).ravel()
    ya = np.asarray(y, dtype=float).ravel()
    if xa.size == 0 or ya.size == 0:
        raise DomainError("ks_two_sample needs two non-empty samples")
    if not (np.all(np.isfinite(xa)) and np.all(np.isfinite(ya))):
        raise DomainError("ks_two_sample needs finite samples")
    d = ks_statistic(xa, ya)
    n1, n2 = xa.size, ya.size
    p = ks_survival(math.sqrt(n1 * n2 / (n1 + n2)) * d)
    return KsResult(statistic_d=d, p_value=p, n1=n1, n2=n2)


def ks_critical_value(n1: int, n2: int, alpha: float = 0.05) -> float:
    """Large-sample critical value of D: reject when ``D`` exceeds it."""
    if n1 < 1 or n2 < 1:
        raise DomainError("sample sizes must be positive")
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) * math.sqrt((n1 + n2) / (n1 * n2))
