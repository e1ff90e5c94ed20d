"""Gegenbauer (ultraspherical) polynomials C^nu_n.

Two arithmetic paths are provided: numpy (machine precision, vectorized over
``x``) for the integrator hot path, and mpmath (configurable decimal digits)
for coefficient generation.  The parameter value ``nu = 0`` is routed to the
Chebyshev polynomial T_n, since the raw three-term recurrence degenerates
there (C_1 = 2 nu x = 0).

Besides the plain polynomials, the *normalized* family
``Chat_n = C_n / C_n(1)`` is exposed.  It satisfies

    (n + 2nu - 1) Chat_n = 2 (n + nu - 1) x Chat_{n-1} - (n - 1) Chat_{n-2}

which reduces to the Chebyshev recurrence at nu = 0, stays bounded by one on
[-1, 1] and is what the stability-polynomial code evaluates.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath as mp
import numpy as np

DEFAULT_DIGITS = 60


@dataclass(frozen=True)
class GegenbauerSpec:
    degree: int
    nu: float

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 0:
            raise ValueError(f"degree must be a non-negative integer, got {self.degree!r}")
        if self.nu < 0:
            raise ValueError(f"nu must be non-negative, got {self.nu!r}")

    def eval(self, x, dps=None):
        """C^nu_n(x); machine precision unless ``dps`` is given."""
        if dps is None:
            return gegenbauer(self.degree, self.nu, x)
        return gegenbauer_mp(self.degree, self.nu, x, dps)

    def derivative_at_one(self, k, dps=DEFAULT_DIGITS):
        return derivative_at_one(self.degree, self.nu, k, dps)


def _is_zero(nu):
    return nu == 0


def gegenbauer(n, nu, x):
    """Evaluate C^nu_n(x) in machine precision (T_n(x) when nu == 0)."""
    x = np.asarray(x)
    dtype = np.result_type(x, float)
    c_prev = np.ones_like(x, dtype=dtype)
    if n == 0:
        return c_prev
    nu = float(nu)
    if _is_zero(nu):
        c = x.astype(dtype)
        for m in range(2, n + 1):
            c_prev, c = c, 2 * x * c - c_prev
        return c
    c = 2 * nu * x.astype(dtype)
    for m in range(2, n + 1):
        c_prev, c = c, (2 * (m + nu - 1) * x * c - (m + 2 * nu - 2) * c_prev) / m
    return c


def gegenbauer_mp(n, nu, x, dps=DEFAULT_DIGITS):
    """Evaluate C^nu_n(x) with ``dps`` decimal digits."""
    with mp.workdps(dps):
        nu = mp.mpf(nu)
        x = mp.mpmathify(x)
        if n == 0:
            return mp.mpf(1)
        c_prev = mp.mpf(1)
        if _is_zero(nu):
            c = x
            for m in range(2, n + 1):
                c_prev, c = c, 2 * x * c - c_prev
            return +c
        c = 2 * nu * x
        for m in range(2, n + 1):
            c_prev, c = c, (2 * (m + nu - 1) * x * c - (m + 2 * nu - 2) * c_prev) / m
        return +c


def normalized_gegenbauer(n, nu, x):
    """Evaluate C^nu_n(x) / C^nu_n(1) in machine precision."""
    x = np.asarray(x)
    dtype = np.result_type(x, float)
    c_prev = np.ones_like(x, dtype=dtype)
    if n == 0:
        return c_prev
    nu = float(nu)
    c = x.astype(dtype)
    for m in range(2, n + 1):
        c_prev, c = c, (2 * (m + nu - 1) * x * c - (m - 1) * c_prev) / (m + 2 * nu - 1)
    return c


def endpoint_value(n, nu, dps=DEFAULT_DIGITS):
    """C^nu_n(1) = binomial(n + 2nu - 1, n) = (2nu)_n / n!  (one when nu == 0)."""
    with mp.workdps(dps):
        nu = mp.mpf(nu)
        if _is_zero(nu):
            return mp.mpf(1)
        return mp.rf(2 * nu, n) / mp.factorial(n)


def derivative_at_one(n, nu, k, dps=DEFAULT_DIGITS):
    """k-th derivative of C^nu_n at x = 1.

    Uses d/dx C^nu_n = 2 nu C^{nu+1}_{n-1} applied k times, then the endpoint
    value.  For nu == 0 the Chebyshev formula
    T_n^(k)(1) = prod_{j<k} (n^2 - j^2) / (2j + 1) is used.  Returns 0 for
    k > n.
    """
    if k < 0:
        raise ValueError("derivative order must be non-negative")
    with mp.workdps(dps):
        if k > n:
            return mp.mpf(0)
        nu = mp.mpf(nu)
        if _is_zero(nu):
            r = mp.mpf(1)
            for j in range(k):
                r *= mp.mpf(n * n - j * j) / (2 * j + 1)
            return r
        return 2**k * mp.rf(nu, k) * mp.rf(2 * nu + 2 * k, n - k) / mp.factorial(n - k)


def normalized_derivative_at_one(n, nu, k, dps=DEFAULT_DIGITS):
    """k-th derivative of C^nu_n / C^nu_n(1) at x = 1; continuous in nu at 0."""
    with mp.workdps(dps):
        if k > n:
            return mp.mpf(0)
        nu = mp.mpf(nu)
        if _is_zero(nu):
            return derivative_at_one(n, 0, k, dps)
        # 2^k (nu)_k (2nu+2k)_{n-k} n! / ((n-k)! (2nu)_n), with (nu)_k / (2nu)_n
        # cancelled by hand so that nu -> 0 is benign
        r = mp.mpf(2) ** k
        for j in range(k):
            r *= (nu + j) / (2 * nu + j)
        for j in range(k, n):
            r *= (2 * nu + k + j) / (2 * nu + j)
        for j in range(n - k + 1, n + 1):
            r *= j
        return r
