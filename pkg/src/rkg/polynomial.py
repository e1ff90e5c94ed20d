"""Shifted Runge-Kutta-Gegenbauer polynomials and their stability functions.

An order-N polynomial with M substeps has degree L = M N and reads

    G(x) = d_0 + 2 sum_{k=1..N} d_k C^nu_{kM}(x),      R(z) = G(1 + 2 z / beta).

The d_k follow from the linear order conditions R^(n)(0) = 1, n = 1..N, plus
G(1) = 1.  Internally the weights e_k = 2 d_k C^nu_{kM}(1) against the
normalized Gegenbauer family are used; they are O(1) and keep both the
extended-precision solve and the float evaluation well conditioned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import mpmath as mp
import numpy as np

from .gegenbauer import (
    DEFAULT_DIGITS,
    derivative_at_one,
    endpoint_value,
    normalized_derivative_at_one,
)

MAX_ORDER = 8
NU_GRID_SIZE = 18
STABILITY_SLACK = 1e-12


class BetaSearchError(RuntimeError):
    """No admissible real-axis extent was found for (N, M, nu)."""


def nu_value(order, index, dps=DEFAULT_DIGITS):
    """Gegenbauer parameter on the standard grid.

    Index 0 is the Chebyshev reference nu = 0; indices 1..17 are the geometric
    values 2^((index-1)/2) N / 128, running from N/128 up to 2N.
    """
    if not 0 <= index < NU_GRID_SIZE:
        raise IndexError(f"nu index {index} outside 0..{NU_GRID_SIZE - 1}")
    with mp.workdps(dps):
        if index == 0:
            return mp.mpf(0)
        return mp.mpf(2) ** (mp.mpf(index - 1) / 2) * order / 128


def nu_grid(order, dps=DEFAULT_DIGITS):
    return [nu_value(order, i, dps) for i in range(NU_GRID_SIZE)]


def _check_params(order, substeps, nu):
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in 1..{MAX_ORDER}, got {order}")
    if substeps < 1:
        raise ValueError(f"substeps must be positive, got {substeps}")
    if nu < 0:
        raise ValueError(f"nu must be non-negative, got {nu}")


def _normalized_matrix(order, substeps, nu, dps):
    """A[n-1, k-1] = d^n/dx^n [C_{kM}/C_{kM}(1)] at x = 1."""
    return mp.matrix(
        [
            [normalized_derivative_at_one(k * substeps, nu, n, dps) for k in range(1, order + 1)]
            for n in range(1, order + 1)
        ]
    )


def _weights_from_d(order, substeps, nu, d, dps):
    with mp.workdps(dps):
        return tuple(2 * d[k] * endpoint_value(k * substeps, nu, dps) for k in range(1, order + 1))


def solve_order_conditions(order, substeps, nu, beta, dps=DEFAULT_DIGITS):
    """Return (d_0, ..., d_N) meeting the order conditions for a given beta.

    The N x N system sum_k d_k C^(n)_{kM}(1) = (beta/2)^n / 2 is solved in its
    normalized, row-scaled form by partial-pivot LU at ``dps`` digits.
    """
    _check_params(order, substeps, nu)
    with mp.workdps(dps + 10):
        nu = mp.mpf(nu)
        half = mp.mpf(beta) / 2
        a = _normalized_matrix(order, substeps, nu, dps + 10)
        rhs = mp.matrix(order, 1)
        for n in range(1, order + 1):
            scale = half**-n
            for k in range(order):
                a[n - 1, k] *= scale
            rhs[n - 1] = 1
        try:
            e = mp.lu_solve(a, rhs)
        except ZeroDivisionError as exc:
            raise np.linalg.LinAlgError(
                f"singular order-condition matrix for N={order}, M={substeps}, nu={nu}"
            ) from exc
        d = [1 - mp.fsum(e)]
        for k in range(1, order + 1):
            d.append(e[k - 1] / (2 * endpoint_value(k * substeps, nu, dps + 10)))
    with mp.workdps(dps):
        return tuple(+v for v in d)


@dataclass(frozen=True)
class RKGPolynomial:
    order: int
    substeps: int
    nu: mp.mpf
    beta: mp.mpf
    d: tuple
    dps: int = field(default=DEFAULT_DIGITS, compare=False)

    @property
    def degree(self):
        return self.order * self.substeps

    @cached_property
    def weights(self):
        """e_k = 2 d_k C_{kM}(1), the coefficients against normalized C_{kM}."""
        return _weights_from_d(self.order, self.substeps, self.nu, self.d, self.dps)

    @cached_property
    def _float_weights(self):
        return float(self.d[0]), np.array([float(e) for e in self.weights])

    def shifted(self, x):
        """G(x) in machine precision (vectorized, real or complex x)."""
        x = np.asarray(x)
        dtype = np.result_type(x, float)
        d0, e = self._float_weights
        m_sub = self.substeps
        nu = float(self.nu)
        out = np.full(x.shape, d0, dtype=dtype)
        c_prev = np.ones_like(out)
        c = x.astype(dtype)
        if m_sub == 1:
            out = out + e[0] * c
        for m in range(2, self.degree + 1):
            c_prev, c = c, (2 * (m + nu - 1) * x * c - (m - 1) * c_prev) / (m + 2 * nu - 1)
            if m % m_sub == 0:
                out = out + e[m // m_sub - 1] * c
        return out

    def __call__(self, z):
        """R(z) = G(1 + 2z/beta) in machine precision."""
        z = np.asarray(z)
        return self.shifted(1 + 2 * z / float(self.beta))

    def shifted_mp(self, x, dps=None):
        dps = dps or self.dps
        with mp.workdps(dps):
            x = mp.mpmathify(x)
            nu = mp.mpf(self.nu)
            out = mp.mpf(self.d[0])
            c_prev, c = mp.mpf(1), x
            if self.substeps == 1:
                out += self.weights[0] * c
            for m in range(2, self.degree + 1):
                c_prev, c = c, (2 * (m + nu - 1) * x * c - (m - 1) * c_prev) / (m + 2 * nu - 1)
                if m % self.substeps == 0:
                    out += self.weights[m // self.substeps - 1] * c
            return +out

    def eval_mp(self, z, dps=None):
        """R(z) in extended precision."""
        dps = dps or self.dps
        with mp.workdps(dps):
            return self.shifted_mp(1 + 2 * mp.mpmathify(z) / self.beta, dps)

    def derivative_at_zero(self, n, dps=None):
        """R^(n)(0) from the Gegenbauer derivative ladder (unnormalized d_k)."""
        dps = dps or self.dps
        with mp.workdps(dps):
            total = mp.fsum(
                self.d[k] * derivative_at_one(k * self.substeps, self.nu, n, dps)
                for k in range(1, self.order + 1)
            )
            if n == 0:
                total = self.d[0] + 2 * mp.fsum(
                    self.d[k] * endpoint_value(k * self.substeps, self.nu, dps)
                    for k in range(1, self.order + 1)
                )
                return total
            return (2 / mp.mpf(self.beta)) ** n * 2 * total

    def real_axis_max(self, samples=None):
        """max |R(x)| over ``samples`` uniform points of [-beta, 0] (default 10 L)."""
        samples = samples or 10 * self.degree
        x = np.linspace(-1.0, 1.0, max(samples, 2))
        return float(np.max(np.abs(self.shifted(x))))

    def is_real_axis_stable(self, samples=None):
        return self.real_axis_max(samples) <= 1 + STABILITY_SLACK


def make_polynomial(order, substeps, nu, beta, dps=DEFAULT_DIGITS):
    with mp.workdps(dps):
        nu = mp.mpf(nu)
        beta = mp.mpf(beta)
    d = solve_order_conditions(order, substeps, nu, beta, dps)
    return RKGPolynomial(order, substeps, nu, beta, d, dps)


def eval_stability(poly, z):
    """R(z) for a constructed polynomial (machine precision)."""
    return poly(z)


def _odd_beta_candidates(order, substeps, nu, dps):
    """Positive real roots beta of G(-1) = (-1)^N, largest first.

    With the order conditions imposed, G(-1) - (-1)^N is a degree-N
    polynomial in y = beta/2, so its roots are extracted directly instead of
    being bracketed.
    """
    work = dps + 20
    with mp.workdps(work):
        a_inv = _normalized_matrix(order, substeps, nu, work) ** -1
        # scale y = s * y0 so that the polynomial coefficients are O(1)
        y0 = mp.mpf(max(1, order * substeps)) ** 2 / 4
        c = []
        for n in range(1, order + 1):
            cn = mp.fsum((1 - (-1) ** (k * substeps)) * a_inv[k - 1, n - 1] for k in range(1, order + 1))
            c.append(cn * y0**n)
        # p(s) = 1 - (-1)^N - sum_n c_n s^n, highest degree first for polyroots
        coeffs = [-c[n - 1] for n in range(order, 0, -1)] + [1 - (-1) ** order]
        while len(coeffs) > 1 and coeffs[0] == 0:
            coeffs.pop(0)
        if len(coeffs) == 1:
            return []
        if len(coeffs) == 2:
            roots = [-coeffs[1] / coeffs[0]]
        else:
            roots = mp.polyroots(coeffs, maxsteps=400, extraprec=4 * work)
        tol = mp.mpf(10) ** (-(dps // 2))
        out = []
        for r in roots:
            r = mp.mpc(r)
            if abs(r.imag) <= tol * max(1, abs(r.real)) and r.real > 0:
                out.append(2 * y0 * r.real)
        out.sort(reverse=True)
    with mp.workdps(dps):
        return [+b for b in out]


@lru_cache(maxsize=None)
def _odd_beta(order, substeps, nu_key, dps):
    with mp.workdps(dps):
        nu = mp.mpf(nu_key)
    for beta in _odd_beta_candidates(order, substeps, nu, dps):
        poly = make_polynomial(order, substeps, nu, beta, dps)
        if poly.is_real_axis_stable():
            return beta
    raise BetaSearchError(
        f"no stable root of G(-1) = (-1)^N for N={order}, M={substeps}, nu={mp.nstr(nu, 8)}"
    )


def rational_interpolate(xs, ys, x):
    """Diagonal rational interpolation through (xs, ys) evaluated at x.

    Bulirsch-Stoer tableau; exact for points coinciding with a node.
    """
    n = len(xs)
    xs = [mp.mpf(v) for v in xs]
    c = [mp.mpf(v) for v in ys]
    d = [mp.mpf(v) + mp.mpf(10) ** (-(mp.mp.dps + 5)) for v in ys]
    dist = [abs(x - v) for v in xs]
    ns = min(range(n), key=dist.__getitem__)
    if dist[ns] == 0:
        return c[ns]
    y = c[ns]
    ns -= 1
    for m in range(1, n):
        for i in range(n - m):
            w = c[i + 1] - d[i]
            h = xs[i + m] - x
            t = (xs[i] - x) * d[i] / h
            dd = t - c[i + 1]
            if dd == 0:
                if abs(w) > mp.mpf(10) ** (-(mp.mp.dps // 2)):
                    raise ZeroDivisionError("pole in rational interpolant")
                # locally constant data: the correction vanishes
                c[i] = d[i] = mp.mpf(0)
                continue
            dd = w / dd
            d[i] = c[i + 1] * dd
            c[i] = t * dd
        if 2 * (ns + 1) < n - m:
            dy = c[ns + 1]
        else:
            dy = d[ns]
            ns -= 1
        y += dy
    return y


def _interpolation_nodes(substeps):
    nodes = [substeps - 3, substeps - 1, substeps + 1, substeps + 3]
    nodes = [m for m in nodes if m >= 1]
    m = substeps + 5
    while len(nodes) < 4:
        nodes.append(m)
        m += 2
    return sorted(nodes)


@lru_cache(maxsize=None)
def _beta(order, substeps, nu_key, dps):
    if substeps % 2 == 1:
        return _odd_beta(order, substeps, nu_key, dps)
    with mp.workdps(dps):
        nu = mp.mpf(nu_key)
    nodes = _interpolation_nodes(substeps)
    with mp.workdps(dps):
        scaled = [_odd_beta(order, m, nu_key, dps) / m**2 for m in nodes]
        beta = rational_interpolate(nodes, scaled, mp.mpf(substeps)) * substeps**2
        for _ in range(1000):
            if make_polynomial(order, substeps, nu, beta, dps).is_real_axis_stable():
                return +beta
            beta *= mp.mpf("0.999")
    raise BetaSearchError(f"even-M extent did not stabilize for N={order}, M={substeps}")


def _nu_key(nu, dps):
    with mp.workdps(dps):
        return mp.nstr(mp.mpf(nu), dps, strip_zeros=False)


def find_beta(order, substeps, nu, dps=DEFAULT_DIGITS):
    """Real-axis stability extent beta for (N, M, nu).

    Odd M: the largest root of G(-1) = (-1)^N whose polynomial passes the
    real-axis scan.  Even M: diagonal rational interpolation of beta/M^2
    through the four nearest odd M, shrunk by 0.1% steps until the scan passes.
    """
    _check_params(order, substeps, nu)
    return _beta(order, substeps, _nu_key(nu, dps), dps)


def build_polynomial(order, substeps, nu, dps=DEFAULT_DIGITS):
    """Construct the optimal-extent RKG polynomial for (N, M, nu)."""
    beta = find_beta(order, substeps, nu, dps)
    with mp.workdps(dps):
        nu = mp.mpf(_nu_key(nu, dps))
    return make_polynomial(order, substeps, nu, beta, dps)
