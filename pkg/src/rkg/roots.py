"""Simultaneous (Aberth-Ehrlich) root finding for shifted RKG polynomials.

The roots of G are first located in double precision by a vectorized Aberth
iteration started on a circle, then refined by the same iteration carried
out in multiprecision (gmpy2) until the corrections fall below the working
precision.  G and G' are evaluated through the normalized Gegenbauer
recurrence, never through monomial coefficients, which would be hopelessly
ill-conditioned at degree several hundred.
"""

from __future__ import annotations

import math

import gmpy2
import mpmath as mp
import numpy as np

from .gegenbauer import DEFAULT_DIGITS


class RootFindingError(RuntimeError):
    pass


def _float_g_dg(poly, x):
    d0, e = poly._float_weights
    m_sub = poly.substeps
    nu = float(poly.nu)
    g = np.full(x.shape, d0, dtype=complex)
    dg = np.zeros_like(g)
    c_prev, c = np.ones_like(g), x.copy()
    dc_prev, dc = np.zeros_like(g), np.ones_like(g)
    if m_sub == 1:
        g += e[0] * c
        dg += e[0] * dc
    for m in range(2, poly.degree + 1):
        a = 2 * (m + nu - 1) / (m + 2 * nu - 1)
        b = (m - 1) / (m + 2 * nu - 1)
        c_prev, c, dc_prev, dc = c, a * x * c - b * c_prev, dc, a * (c + x * dc) - b * dc_prev
        if m % m_sub == 0:
            g += e[m // m_sub - 1] * c
            dg += e[m // m_sub - 1] * dc
        # common rescaling far from [-1, 1]; only the ratio g/dg is used
        big = np.abs(dc) > 1e100
        if big.any():
            for arr in (g, dg, c, c_prev, dc, dc_prev):
                arr[big] *= 1e-100
    return g, dg


def _aberth_step(ratio, z, max_step=0.25):
    diff = z[:, None] - z[None, :]
    np.fill_diagonal(diff, 1.0)
    s = (1.0 / diff).sum(axis=1) - 1.0
    w = ratio / (1.0 - ratio * s)
    size = np.abs(w)
    too_big = size > max_step
    w[too_big] *= max_step / size[too_big]
    return w


def aberth_seed(poly, radius=1.05, max_iter=1000, tol=1e-14):
    """Double-precision roots of G, started on a circle of ``radius`` about 0."""
    n = poly.degree
    if n == 1:
        d0, e = poly._float_weights
        return np.array([-d0 / e[0]], dtype=complex)
    # the quarter-step angular offset keeps the start off the real axis
    z = radius * np.exp(2j * np.pi * (np.arange(n) + 0.25) / n)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_iter):
            g, dg = _float_g_dg(poly, z)
            w = _aberth_step(g / dg, z)
            if not np.all(np.isfinite(w)):
                raise RootFindingError("double-precision Aberth iteration broke down")
            z = z - w
            if np.max(np.abs(w)) <= tol * max(1.0, np.max(np.abs(z))):
                break
    return z


def _symmetrize(seeds, tol=1e-9):
    """Split seeds into (real, upper) if they form a conjugate-closed set."""
    real = seeds[np.abs(seeds.imag) <= tol].real
    upper = seeds[seeds.imag > tol]
    lower = seeds[seeds.imag < -tol]
    if len(upper) != len(lower) or len(real) + 2 * len(upper) != len(seeds):
        return None
    if len(upper) and np.max(np.abs(np.sort_complex(upper) - np.sort_complex(lower.conj()))) > 1e-6:
        return None
    return np.sort(real), upper


class _MPContext:
    def __init__(self, poly, dps):
        self.bits = int(math.ceil(dps * math.log2(10))) + 16
        self.ctx = gmpy2.context(precision=self.bits)
        with self.ctx:
            tostr = lambda v: mp.nstr(v, dps + 10, strip_zeros=False)
            nu = gmpy2.mpfr(tostr(poly.nu))
            self.d0 = gmpy2.mpfr(tostr(poly.d[0]))
            self.e = [gmpy2.mpfr(tostr(w)) for w in poly.weights]
            self.rec = [(None, None), (None, None)]
            for m in range(2, poly.degree + 1):
                den = m + 2 * nu - 1
                self.rec.append((2 * (m + nu - 1) / den, (m - 1) / den))
        self.m_sub = poly.substeps
        self.degree = poly.degree

    def newton_ratio(self, x):
        e, m_sub = self.e, self.m_sub
        g = self.d0 + 0
        dg = gmpy2.mpfr(0)
        c_prev, c = gmpy2.mpfr(1), x
        dc_prev, dc = gmpy2.mpfr(0), gmpy2.mpfr(1)
        if m_sub == 1:
            g += e[0] * c
            dg += e[0]
        rec = self.rec
        for m in range(2, self.degree + 1):
            a, b = rec[m]
            c_prev, c, dc_prev, dc = c, a * x * c - b * c_prev, dc, a * (c + x * dc) - b * dc_prev
            if m % m_sub == 0:
                g += e[m // m_sub - 1] * c
                dg += e[m // m_sub - 1] * dc
        return g / dg


def _aberth_mp(mpc_ctx, roots, active, mirror, tol, max_iter):
    """Multiprecision Aberth iteration.

    ``roots`` is the full list; only indices in ``active`` are updated
    directly, and ``mirror`` maps a lower-half index to its upper partner,
    whose update is conjugated.
    """
    one = gmpy2.mpfr(1)
    for it in range(max_iter):
        biggest = gmpy2.mpfr(0)
        new = list(roots)
        for i in active:
            zi = roots[i]
            ratio = mpc_ctx.newton_ratio(zi)
            s = gmpy2.mpc(0)
            for j, zj in enumerate(roots):
                if j != i:
                    s += one / (zi - zj)
            w = ratio / (one - ratio * s)
            if zi.imag == 0:
                w = gmpy2.mpc(w.real, 0)
            new[i] = zi - w
            size = abs(w) / max(one, abs(zi))
            if size > biggest:
                biggest = size
        for lo, up in mirror.items():
            new[lo] = new[up].conjugate()
        roots = new
        if biggest <= tol:
            return roots, it + 1
    raise RootFindingError(f"Aberth refinement did not converge in {max_iter} iterations")


def rkg_roots(poly, dps=None, max_iter=200, seeds=None, radius=1.05):
    """All L roots of G to ``dps`` digits, as mpmath complex numbers.

    Non-real roots come out in exact conjugate pairs.  Raises
    RootFindingError when the refinement stalls (callers retry at a higher
    precision).
    """
    dps = dps or poly.dps or DEFAULT_DIGITS
    if seeds is None:
        seeds = aberth_seed(poly, radius=radius)
    seeds = np.asarray(seeds, dtype=complex)
    ctx = _MPContext(poly, dps)
    split = _symmetrize(seeds)
    with ctx.ctx:
        tol = gmpy2.mpfr(10) ** (-(dps - 12))
        if split is not None:
            real, upper = split
            roots = [gmpy2.mpc(float(r), 0) for r in real]
            roots += [gmpy2.mpc(complex(u)) for u in upper]
            roots += [gmpy2.mpc(complex(u)).conjugate() for u in upper]
            n_real, n_up = len(real), len(upper)
            active = list(range(n_real + n_up))
            mirror = {n_real + n_up + k: n_real + k for k in range(n_up)}
        else:
            roots = [gmpy2.mpc(complex(s)) for s in seeds]
            active = list(range(len(roots)))
            mirror = {}
        roots, _ = _aberth_mp(ctx, roots, active, mirror, tol, max_iter)
        out = [(str(r.real), str(r.imag)) for r in roots]
    with mp.workdps(dps):
        return [mp.mpc(mp.mpf(re), mp.mpf(im)) for re, im in out]
