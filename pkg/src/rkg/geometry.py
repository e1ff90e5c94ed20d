"""Stability-domain ellipses and per-step method selection.

Every stability polynomial is summarized by two ellipses with centre
(-beta/2, 0), real semi-axis beta/2 and imaginary semi-axis alpha:

* the strict ellipse, the largest one on which |R| <= 1 everywhere;
* the approximate ellipse, whose alpha is where |R| first exceeds one along
  the vertical line through the centre.

A semi-discrete problem is summarized by its stiffness numbers psi1 (real
axis) and psi2 (imaginary extent).  Method selection walks the coefficient
grid until an ellipse encloses the scaled spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .polynomial import NU_GRID_SIZE, STABILITY_SLACK, build_polynomial

ELLIPSE_SAMPLES = 720
CROSSING_SCAN = 4000


class GridExhaustedError(RuntimeError):
    """No tabulated method can take the requested step."""


@dataclass(frozen=True)
class EllipseFit:
    beta: float
    alpha_strict: float
    alpha_approx: float
    order: int | None = None
    substeps: int | None = None
    nu_index: int | None = None

    def alpha(self, controlled=True):
        return select_alpha(self.alpha_strict, self.alpha_approx, controlled)

    @property
    def alpha_fixed(self):
        return self.alpha(controlled=False)

    @property
    def alpha_controlled(self):
        return self.alpha(controlled=True)


@dataclass(frozen=True)
class ProblemStiffness:
    """psi1 = 1/|lambda|_max on the real axis; psi2 bounds the imaginary part.

    An eigenvalue with real part -u satisfies |Im| <= sqrt(u / psi2)
    approximately.  ``lam_max`` defaults to 1/psi1 but may be overridden by
    a user bound or a power-iteration estimate.
    """

    psi1: float
    psi2: float
    lam_max: float | None = None

    def __post_init__(self):
        if self.lam_max is None:
            object.__setattr__(self, "lam_max", 1.0 / self.psi1)

    def with_lam_max(self, lam_max):
        return ProblemStiffness(self.psi1, self.psi2, float(lam_max))


def ellipse_points(beta, alpha, samples=ELLIPSE_SAMPLES):
    """Upper half (including both real-axis ends) of the ellipse boundary."""
    theta = np.linspace(0.0, np.pi, samples // 2 + 1)
    return -beta / 2 + beta / 2 * np.cos(theta) + 1j * alpha * np.sin(theta)


def _inside(poly, beta, alpha, samples):
    return np.max(np.abs(poly(ellipse_points(beta, alpha, samples)))) <= 1 + STABILITY_SLACK


def fit_strict_ellipse(poly, samples=ELLIPSE_SAMPLES, rtol=1e-6):
    """Largest alpha in [0, beta/2] whose ellipse satisfies |R| <= 1 + 1e-12.

    Bisection, relying on the samples; the lower half follows by conjugate
    symmetry of R.  Returns 0 when no positive alpha passes.
    """
    beta = float(poly.beta)
    lo, hi = 0.0, beta / 2
    if _inside(poly, beta, hi, samples):
        return hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _inside(poly, beta, mid, samples):
            lo = mid
        else:
            hi = mid
    return lo


def centre_crossing(poly, scan=CROSSING_SCAN, tol=1e-12):
    """First y > 0 with |R(-beta/2 + i y)| = 1 (0 when already |R| >= 1 at y = 0)."""
    beta = float(poly.beta)
    centre = -beta / 2

    def excess(y):
        return np.abs(poly(centre + 1j * np.asarray(y))) - 1

    if excess(0.0) >= 0:
        return 0.0
    top = beta / 2
    for _ in range(8):
        ys = np.linspace(0.0, top, scan + 1)
        ex = excess(ys)
        hit = np.nonzero(ex > 0)[0]
        if len(hit):
            lo, hi = ys[hit[0] - 1], ys[hit[0]]
            break
        top *= 2
    else:
        raise RuntimeError("|R| stays below one along the centre line")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@lru_cache(maxsize=4096)
def _crossing(order, substeps, nu):
    return centre_crossing(build_polynomial(order, substeps, nu))


def fit_approx_ellipse(order, substeps, nu, crossing=None):
    """Approximate-ellipse alpha.

    Solved directly for M = 1 and M divisible by 4; otherwise log-linearly
    interpolated between the neighbouring multiples of 4 (extrapolated from
    M = 4 and 8 below 4).  ``crossing(order, M, nu)`` may be supplied to
    reuse already built polynomials.
    """
    crossing = crossing or _crossing
    if substeps == 1 or substeps % 4 == 0:
        return crossing(order, substeps, nu)
    lo = 4 * (substeps // 4)
    lo = lo if lo >= 4 else 4
    hi = lo + 4
    a_lo, a_hi = crossing(order, lo, nu), crossing(order, hi, nu)
    if a_lo <= 0 or a_hi <= 0:
        return 0.0
    t = (substeps - lo) / 4
    return math.exp(math.log(a_lo) + t * (math.log(a_hi) - math.log(a_lo)))


def fit_ellipses(poly, nu_index=None, crossing=None):
    return EllipseFit(
        beta=float(poly.beta),
        alpha_strict=fit_strict_ellipse(poly),
        alpha_approx=fit_approx_ellipse(poly.order, poly.substeps, poly.nu, crossing),
        order=poly.order,
        substeps=poly.substeps,
        nu_index=nu_index,
    )


def select_alpha(alpha_strict, alpha_approx, controlled=True):
    """Step-selection alpha: the approximate one under error control, else the mean."""
    if controlled:
        return max(alpha_strict, alpha_approx)
    return max(alpha_strict, 0.5 * (alpha_strict + alpha_approx))


def stiffness_from_mesh(h, a, d, kappa=0.0):
    """psi1, psi2 for diffusion d with advection a_k on mesh widths h_k.

    ``kappa`` selects the advection scheme (kappa = 0 for first-order upwind,
    -1 for second-order upwind); P_k = |a_k| h_k / d is the mesh Peclet number.
    """
    h = np.atleast_1d(np.asarray(h, dtype=float))
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if d <= 0:
        raise ValueError("diffusion coefficient must be positive")
    if np.any(h <= 0):
        raise ValueError("mesh widths must be positive")
    a = np.broadcast_to(a, h.shape)
    peclet = np.abs(a) * h / d
    psi1 = 1.0 / (2 * d * np.sum((2 + (1 - kappa) * peclet) / h**2))
    speed2 = np.sum(a**2)
    psi2 = math.inf if speed2 == 0 else 4 * d / ((2 - kappa) ** 2 * speed2)
    return ProblemStiffness(float(psi1), float(psi2))


def select_method(stiffness, step, table, order, controlled=True, start_index=1):
    """Pick (substeps M, nu index) for a step of size ``step``.

    Starting from M = 1 at ``start_index``, the walk increases the nu index
    while the ellipse is too flat for the problem (psi1 beta > psi2 alpha^2/beta)
    and increases M while the real extent is too short for the step.
    """
    lam = stiffness.lam_max
    substeps, index = 1, start_index
    max_m = table.max_substeps(order)
    while True:
        if substeps > max_m or index >= NU_GRID_SIZE:
            raise GridExhaustedError(
                f"no method of order {order} reaches step {step:g} (stopped at M={substeps}, index={index})"
            )
        entry = table.get(order, substeps, index)
        beta = entry.beta
        alpha = select_alpha(entry.alpha_strict, entry.alpha_approx, controlled)
        if stiffness.psi1 * beta <= stiffness.psi2 * alpha**2 / beta:
            if step * lam <= entry.extent:
                return substeps, index
            substeps += 1
        else:
            index += 1


def max_supported_step(stiffness, table, order, controlled=True, start_index=1, rtol=1e-9):
    """Largest step for which ``select_method`` still succeeds (bisection)."""
    lo = 0.0
    hi = max(e.extent for e in table.entries(order)) / stiffness.lam_max
    try:
        select_method(stiffness, hi, table, order, controlled, start_index)
        return hi
    except GridExhaustedError:
        pass
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        try:
            select_method(stiffness, mid, table, order, controlled, start_index)
            lo = mid
        except GridExhaustedError:
            hi = mid
    return lo


def estimate_spectral_radius(rhs, w, iters=20, rel_eps=1e-7, seed=0):
    """Nonlinear power iteration on RHS differences about the state ``w``.

    Approximates the largest |eigenvalue| of the Jacobian of ``rhs`` at ``w``.
    The estimate is a lower bound; callers usually add a safety margin.
    """
    w = np.asarray(w, dtype=float)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(w.shape)
    scale = rel_eps * max(1.0, float(np.linalg.norm(w)))
    f0 = np.real(rhs(w))
    est = 0.0
    for _ in range(iters):
        v /= np.linalg.norm(v)
        jv = (np.real(rhs(w + scale * v)) - f0) / scale
        est = float(np.linalg.norm(jv))
        if est == 0:
            return 0.0
        v = jv
    return est
