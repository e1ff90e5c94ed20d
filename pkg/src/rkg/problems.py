"""Method-of-lines test problems.

* 1D advection-diffusion  w_t + a w_x = d w_xx  with a step initial profile,
  first-order upwind advection and centred diffusion, Dirichlet data from the
  exact erf solution.
* 2D Brusselator with advection on the periodic unit square, second-order
  upwind (kappa = -1) advection and centred diffusion, split into a linear
  transport part and a reaction part.
* The full-step equation stencil of an FRKG method on the 1D operator, for
  checking the convex monotone property (non-negative weights).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath as mp
import numpy as np
from scipy.special import erf

from .coefficients import stages_from_roots
from .geometry import ProblemStiffness, stiffness_from_mesh
from .integrator import SemiDiscreteSystem
from .polynomial import build_polynomial
from .splitting import SplitSystem


@dataclass(frozen=True)
class Grid1D:
    x_min: float = -20.0
    x_max: float = 20.0
    h: float = 0.1

    @property
    def nodes(self):
        n = int(round((self.x_max - self.x_min) / self.h))
        return self.x_min + self.h * np.arange(n + 1)

    @property
    def interior(self):
        return self.nodes[1:-1]


@dataclass(frozen=True)
class Grid2D:
    """Periodic n x n grid on the unit square, nodes at (i h, j h)."""

    n: int = 800

    @property
    def h(self):
        return 1.0 / self.n

    def mesh(self):
        x = np.arange(self.n) * self.h
        return np.meshgrid(x, x, indexing="ij")


def exact_advdiff(x, t, a, d, w_left=1.0, w_right=0.0):
    """Exact solution of the advected, diffused step (t > 0)."""
    if t <= 0:
        raise ValueError("exact solution needs t > 0")
    x = np.asarray(x, dtype=float)
    return 0.5 * ((w_right + w_left) + (w_right - w_left) * erf((x - a * t) / (2 * np.sqrt(d * t))))


@dataclass
class AdvDiff1D:
    """Interior-node semi-discretization; boundary values fixed at construction."""

    grid: Grid1D = field(default_factory=Grid1D)
    a: float = 0.2
    d: float = 1.0
    w_left: float = 1.0
    w_right: float = 0.0
    boundary_time: float | None = None

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError("diffusion coefficient must be positive")
        x = self.grid.nodes
        if self.boundary_time is None:
            self.bc = (self.w_left, self.w_right)
        else:
            ends = exact_advdiff(x[[0, -1]], self.boundary_time, self.a, self.d, self.w_left, self.w_right)
            self.bc = (float(ends[0]), float(ends[1]))

    @property
    def x(self):
        return self.grid.interior

    @property
    def peclet(self):
        return abs(self.a) * self.grid.h / self.d

    def rhs(self, w):
        h, a, d = self.grid.h, self.a, self.d
        left, right = self.bc
        full = np.concatenate(([left], w, [right])) if np.isrealobj(w) else np.concatenate(
            (np.array([left], dtype=complex), w, np.array([right], dtype=complex))
        )
        diff = d * (full[2:] - 2 * full[1:-1] + full[:-2]) / h**2
        if a >= 0:
            adv = -a * (full[1:-1] - full[:-2]) / h
        else:
            adv = -a * (full[2:] - full[1:-1]) / h
        return diff + adv

    def matrix(self):
        """Dense affine form: rhs(w) = J w + c."""
        n = len(self.x)
        eye = np.eye(n)
        c = self.rhs(np.zeros(n))
        jac = np.column_stack([self.rhs(eye[:, k]) - c for k in range(n)])
        return jac, c

    def stiffness(self):
        return stiffness_from_mesh(self.grid.h, self.a, self.d, kappa=0.0)

    def system(self):
        return SemiDiscreteSystem(self.rhs, len(self.x), self.stiffness(), "advdiff1d")

    def initial(self, t0=0.0):
        if t0 == 0:
            return np.where(self.x < 0, self.w_left, self.w_right).astype(float)
        return exact_advdiff(self.x, t0, self.a, self.d, self.w_left, self.w_right)

    def exact(self, t):
        return exact_advdiff(self.x, t, self.a, self.d, self.w_left, self.w_right)


def semidiscretize_1d(grid, a, d, **kwargs):
    return AdvDiff1D(grid, a, d, **kwargs).system()


def _shift(u, k, axis):
    # value at index i + k along ``axis`` (periodic)
    return np.roll(u, -k, axis=axis)


def kappa_advection(u, velocity, h, axis, kappa=-1.0):
    """-c du/dx for transport u_t + c u_x = 0 by the flux-form kappa scheme."""
    if velocity == 0:
        return np.zeros_like(u)
    p, q = (1 + kappa) / 4, (1 - kappa) / 4
    if velocity > 0:
        um1 = _shift(u, -1, axis)
        flux = u + p * (_shift(u, 1, axis) - u) + q * (u - um1)
    else:
        up1 = _shift(u, 1, axis)
        flux = up1 - p * (up1 - u) - q * (_shift(u, 2, axis) - up1)
    return -velocity * (flux - _shift(flux, -1, axis)) / h


def laplacian(u, h):
    out = -4 * u
    for axis in (0, 1):
        out = out + _shift(u, 1, axis) + _shift(u, -1, axis)
    return out / h**2


@dataclass
class Brusselator2D:
    """Brusselator with advection: species v, w on a periodic square grid.

    The advection terms enter as +mu (U . grad v) and +mu (V . grad w), that
    is, transport with velocities -mu U and -mu V.
    """

    grid: Grid2D = field(default_factory=Grid2D)
    eps: float = 0.01
    A: float = 1.3
    B: float = 1.0
    mu: float = 0.1
    U: tuple = (-0.5, 1.0)
    V: tuple = (0.4, 0.7)
    kappa: float = -1.0

    @property
    def shape(self):
        return (self.grid.n, self.grid.n)

    @property
    def size(self):
        return 2 * self.grid.n**2

    def unpack(self, state):
        n2 = self.grid.n**2
        return state[:n2].reshape(self.shape), state[n2:].reshape(self.shape)

    def initial(self):
        x1, x2 = self.grid.mesh()
        v = 22 * x2 * (1 - x2) ** 1.5
        w = 27 * x1 * (1 - x1) ** 1.5
        return np.concatenate([v.ravel(), w.ravel()])

    def _transport(self, u, velocity):
        h = self.grid.h
        out = self.eps * laplacian(u, h)
        for axis, c in enumerate(velocity):
            out = out + kappa_advection(u, -self.mu * c, h, axis, self.kappa)
        return out

    def linear_rhs(self, state):
        """Diffusion, advection and the constant source A."""
        v, w = self.unpack(state)
        dv = self._transport(v, self.U) + self.A
        dw = self._transport(w, self.V)
        return np.concatenate([dv.ravel(), dw.ravel()])

    def reaction_rhs(self, state):
        n2 = self.grid.n**2
        v, w = state[:n2], state[n2:]
        v2w = v * v * w
        return np.concatenate([-(self.B + 1) * v + v2w, self.B * v - v2w])

    def rhs(self, state):
        return self.linear_rhs(state) + self.reaction_rhs(state)

    def stiffness(self):
        """Most restrictive psi1, psi2 over the two species."""
        h = [self.grid.h, self.grid.h]
        parts = [stiffness_from_mesh(h, self.mu * np.asarray(vel), self.eps, self.kappa) for vel in (self.U, self.V)]
        return ProblemStiffness(min(p.psi1 for p in parts), min(p.psi2 for p in parts))

    def system(self):
        return SemiDiscreteSystem(self.rhs, self.size, self.stiffness(), "brusselator")

    def split(self):
        linear = SemiDiscreteSystem(self.linear_rhs, self.size, self.stiffness(), "brusselator-transport")
        return SplitSystem(linear, self.reaction_rhs, "brusselator")


def semidiscretize_brusselator(grid=None, eps=0.01, A=1.3, B=1.0, mu=0.1, U=(-0.5, 1.0), V=(0.4, 0.7), kappa=-1.0):
    return Brusselator2D(grid or Grid2D(), eps, A, B, mu, U, V, kappa)


def write_snapshot(path, problem, state, config=None):
    """CSV with columns x1, x2, v, w (preceded by a '#' config line if given)."""
    v, w = problem.unpack(np.real(state))
    x1, x2 = problem.grid.mesh()
    with open(path, "w", newline="") as fh:
        if config:
            fh.write("# " + " ".join(f"{k}={v_}" for k, v_ in sorted(config.items())) + "\n")
        out = csv.writer(fh)
        out.writerow(["x1", "x2", "v", "w"])
        for row in zip(x1.ravel(), x2.ravel(), v.ravel(), w.ravel()):
            out.writerow([f"{c:.10g}" for c in row])


# ---------------------------------------------------------------- CMP stencil


@dataclass
class StencilCoefficients:
    offsets: np.ndarray
    weights: np.ndarray
    step: float
    step_max: float
    min_weight: float

    @property
    def total(self):
        return float(self.weights.sum())


@lru_cache(maxsize=64)
def _monomial_coefficients(order, substeps, nu, dps):
    """Real coefficients c_k of R(z) = sum c_k z^k from the stage product, and beta."""
    poly = build_polynomial(order, substeps, nu)
    stages = stages_from_roots(poly)
    with mp.workdps(dps):
        coeffs = [mp.mpc(1)]
        for a in stages:
            nxt = coeffs + [mp.mpc(0)]
            for k in range(1, len(nxt)):
                nxt[k] += a * coeffs[k - 1]
            coeffs = nxt
        return tuple(mp.re(c) for c in coeffs), +poly.beta


@lru_cache(maxsize=64)
def _operator_powers(a, d, h, degree, dps):
    """Stencils of D^k for D = (d/h^2)(E - 2 + E^-1) - upwind (a/h) difference."""
    with mp.workdps(dps):
        a, d, h = mp.mpf(a), mp.mpf(d), mp.mpf(h)
        if a >= 0:
            base = {-1: d / h**2 + a / h, 0: -2 * d / h**2 - a / h, 1: d / h**2}
        else:
            base = {-1: d / h**2, 0: -2 * d / h**2 + a / h, 1: d / h**2 - a / h}
        powers = [{0: mp.mpf(1)}]
        for _ in range(degree):
            prev, nxt = powers[-1], {}
            for off, c in prev.items():
                for db, b in base.items():
                    nxt[off + db] = nxt.get(off + db, 0) + c * b
            powers.append(nxt)
        return tuple(powers)


def cmp_step_limit(beta, a, d, h):
    """beta / |lambda|_max for the 1D upwind/centred operator."""
    return beta / (4 * d / h**2 + 2 * abs(a) / h)


def advection_for_peclet(peclet, d=1.0, h=0.1):
    """Advection speed a giving mesh Peclet number |a| h / d."""
    return peclet * d / h


def cmp_stencil(order, substeps, nu, step_fraction, a=0.2, d=1.0, h=0.1, dps=60):
    """Full-step stencil R(T D) at T = step_fraction * T_max, T_max = beta/|lambda|_max.

    The Laurent polynomial in the shift E has 2L + 1 weights (offsets -L..L,
    offset k multiplying w_{i+k}).
    """
    if not 0 < step_fraction <= 1:
        raise ValueError("step_fraction must lie in (0, 1]")
    coeffs, beta = _monomial_coefficients(order, substeps, nu, dps)
    degree = len(coeffs) - 1
    powers = _operator_powers(a, d, h, degree, dps)
    offsets = np.arange(-degree, degree + 1)
    with mp.workdps(dps):
        step_max = cmp_step_limit(beta, mp.mpf(a), mp.mpf(d), mp.mpf(h))
        t = mp.mpf(step_fraction) * step_max
        acc = {int(k): mp.mpf(0) for k in offsets}
        tk = mp.mpf(1)
        for c, pw in zip(coeffs, powers):
            for off, val in pw.items():
                acc[off] += c * tk * val
            tk *= t
        weights = np.array([float(acc[int(k)]) for k in offsets])
        min_exact = min(acc.values())
    return StencilCoefficients(offsets, weights, float(t), float(step_max), float(min_exact))


def cmp_minimum(order, substeps, nu, samples=200, **kwargs):
    """Minimum stencil weight over T_fraction on a uniform grid of (0, 1]."""
    fractions = np.linspace(1.0 / samples, 1.0, samples)
    return min(cmp_stencil(order, substeps, nu, f, **kwargs).min_weight for f in fractions)
