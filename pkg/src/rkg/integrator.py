"""FRKG time stepping: ordered complex Euler sweeps with step-size control.

A step of size T applies the tabulated stages as

    W^l = W^{l-1} + (a_l T) f(W^{l-1}),   l = 1..L,

in complex arithmetic, and returns Re W^L.  Under error control a second,
lower-order sweep over the same step supplies the error estimate; steps are
accepted when the scaled RMS difference is at most one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import GridExhaustedError, ProblemStiffness, max_supported_step, select_method

SAFETY = 0.8
INITIAL_SAFETY = 0.1
MAX_STEP_RATIO = 2.0
IMAG_RESIDUE_LIMIT = 1e-8


class InternalInstabilityError(FloatingPointError):
    """A stage sweep produced non-finite values."""


@dataclass
class SemiDiscreteSystem:
    """Autonomous system w' = f(w); ``rhs`` must accept complex states."""

    rhs: Callable[[np.ndarray], np.ndarray]
    dimension: int
    stiffness: ProblemStiffness | None = None
    name: str = ""

    def __call__(self, w):
        return self.rhs(w)


def lower_order(order):
    """Order of the companion solution used for error estimation."""
    return 1 if order <= 2 else 2


def frkg_sweep(system, w, step, stages):
    """Complex stage sweep; returns W^L (complex)."""
    state = np.array(w, dtype=complex)
    for a in stages:
        state = state + (a * step) * system(state)
    if not np.all(np.isfinite(state)):
        raise InternalInstabilityError("non-finite state in stage sweep")
    return state


def imag_residue(state):
    """RMS of Im(W) relative to RMS of Re(W)."""
    re = np.sqrt(np.mean(np.abs(state.real) ** 2))
    im = np.sqrt(np.mean(np.abs(state.imag) ** 2))
    return im / re if re > 0 else im


def frkg_step(system, w, step, schedule):
    """One FRKG step of size ``step`` with ``schedule.stages``; returns Re W^L."""
    return frkg_sweep(system, w, step, schedule.stages).real


def estimate_error(w_n, w_high, w_low, atol, rtol):
    """Scaled RMS of (w_low - w_high) with weights atol + max(|w_n|, |w_high|) rtol."""
    wt = atol + np.maximum(np.abs(w_n), np.abs(w_high)) * rtol
    return float(np.sqrt(np.mean(((np.asarray(w_low) - w_high) / wt) ** 2)))


@dataclass
class ControllerState:
    order: int
    atol: float
    rtol: float
    safe: float = SAFETY
    max_ratio: float = MAX_STEP_RATIO
    lower: int | None = None
    prev_step: float | None = None
    prev_err: float | None = None

    def __post_init__(self):
        if self.lower is None:
            self.lower = lower_order(self.order)

    @property
    def exponent(self):
        return (self.order - self.lower) / (self.order + 1)

    def accept(self, step, err):
        self.prev_step, self.prev_err = step, err


def propose_step(ctrl, step, err, predictive=True):
    """Next trial step from the error of a step of size ``step``.

    The predictive form multiplies in (T_n / T_{n-1}) (err_{n-1} / err_n)^k;
    the result never leaves [step/2, 2 step].
    """
    if err <= 0:
        return ctrl.max_ratio * step
    k = ctrl.exponent
    new = ctrl.safe * step * (1.0 / err) ** k
    if predictive and ctrl.prev_step is not None and ctrl.prev_err:
        new *= (step / ctrl.prev_step) * (ctrl.prev_err / err) ** k
    return min(max(new, step / ctrl.max_ratio), step * ctrl.max_ratio)


def initial_step(system, w0, lam_max, atol, rtol):
    """Starting step 0.1 T_trial / sqrt(err) with T_trial = 1/|lambda|_max.

    err compares the forward Euler increments built from f(w0) and from
    f(w0 + T_trial f(w0)).
    """
    if lam_max <= 0:
        raise ValueError("|lambda|_max must be positive")
    trial = 1.0 / lam_max
    w0 = np.asarray(w0, dtype=float)
    f0 = np.real(system(w0))
    w1 = w0 + trial * f0
    f1 = np.real(system(w1))
    err = estimate_error(w0, w1, w1 + trial * (f1 - f0), atol, rtol)
    if err == 0:
        return trial
    return INITIAL_SAFETY * trial / math.sqrt(err)


@dataclass
class IntegrationResult:
    t: float
    w: np.ndarray
    f_accepted: int = 0
    f_rejected: int = 0
    steps: int = 0
    rejected_steps: int = 0
    max_substeps: int = 0
    max_imag_residue: float = 0.0
    step_sizes: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    methods: list = field(default_factory=list)

    @property
    def f_count(self):
        return self.f_accepted + self.f_rejected


def companion_sweep(system, w, step, lam, table, order, nu_index):
    """Lower-order comparison solution over one step.

    Uses the smallest tabulated M whose certified extent covers step*|lambda|
    at the same nu index; if none does, the largest is applied on equal
    sub-steps.  Returns (state, f evaluations).
    """
    m_max = table.max_substeps(order)
    need = step * lam
    for m in range(1, m_max + 1):
        entry = table.get(order, m, nu_index)
        if entry.extent >= need:
            return frkg_step(system, w, step, entry), entry.degree
    entry = table.get(order, m_max, nu_index)
    pieces = math.ceil(need / entry.extent)
    sub = step / pieces
    for _ in range(pieces):
        w = frkg_step(system, w, sub, entry)
    return w, pieces * entry.degree


def _stiffness(system, stiffness):
    stiffness = stiffness or system.stiffness
    if stiffness is None:
        raise ValueError("a ProblemStiffness is needed for method selection")
    return stiffness


def integrate_fixed(system, w0, t_end, step, table, order, t0=0.0, stiffness=None, method=None):
    """Constant steps (the last one shortened to land on t_end).

    ``method`` = (M, nu index) forces the tabulated method instead of
    selecting per step.
    """
    w = np.array(w0, dtype=float)
    res = IntegrationResult(t=t0, w=w)
    if t_end <= t0:
        return res
    stiffness = None if method else _stiffness(system, stiffness)
    t = t0
    while t < t_end and not math.isclose(t, t_end, rel_tol=1e-13, abs_tol=1e-15):
        h = min(step, t_end - t)
        m, i = method or select_method(stiffness, h, table, order, controlled=False)
        entry = table.get(order, m, i)
        state = frkg_sweep(system, w, h, entry.stages)
        res.max_imag_residue = max(res.max_imag_residue, imag_residue(state))
        w = state.real
        t += h
        res.f_accepted += entry.degree
        res.steps += 1
        res.max_substeps = max(res.max_substeps, m)
        res.step_sizes.append(h)
        res.methods.append((m, i))
    res.t, res.w = t_end, w
    return res


def integrate_controlled(
    system, w0, t_end, table, order, atol, rtol, t0=0.0, stiffness=None, first_step=None, max_steps=100000
):
    """Adaptive FRKG integration with a lower-order companion sweep."""
    w = np.array(w0, dtype=float)
    res = IntegrationResult(t=t0, w=w)
    if t_end <= t0:
        return res
    stiffness = _stiffness(system, stiffness)
    lam = stiffness.lam_max
    ctrl = ControllerState(order, atol, rtol)
    low = ctrl.lower
    step_cap = max_supported_step(stiffness, table, order, controlled=True)
    if first_step is None:
        first_step = initial_step(system, w, lam, atol, rtol)
        res.f_accepted += 2
    step = min(first_step, step_cap)
    t = t0
    just_rejected = False
    while t < t_end and not math.isclose(t, t_end, rel_tol=1e-13, abs_tol=1e-15):
        if res.steps + res.rejected_steps >= max_steps:
            raise RuntimeError(f"step limit {max_steps} reached at t={t}")
        h = min(step, t_end - t)
        m, i = select_method(stiffness, h, table, order, controlled=True)
        entry = table.get(order, m, i)
        state = frkg_sweep(system, w, h, entry.stages)
        w_high = state.real
        w_low, low_cost = companion_sweep(system, w, h, lam, table, low, i)
        cost = entry.degree + low_cost
        err = estimate_error(w, w_high, w_low, atol, rtol)
        if err <= 1:
            t += h
            w = w_high
            res.f_accepted += cost
            res.steps += 1
            res.max_substeps = max(res.max_substeps, m)
            res.max_imag_residue = max(res.max_imag_residue, imag_residue(state))
            res.step_sizes.append(h)
            res.errors.append(err)
            res.methods.append((m, i))
            step = propose_step(ctrl, h, err, predictive=not just_rejected)
            ctrl.accept(h, err)
            just_rejected = False
        else:
            res.f_rejected += cost
            res.rejected_steps += 1
            step = propose_step(ctrl, h, err, predictive=False)
            just_rejected = True
        step = min(step, step_cap)
    res.t, res.w = t_end, w
    return res


def integrate(system, w0, t_end, order, table, mode="controlled", step=None, atol=1e-3, rtol=1e-3, **kwargs):
    """Dispatch to fixed-step (``step`` required) or controlled integration."""
    if mode == "fixed":
        if step is None:
            raise ValueError("fixed mode needs a step size")
        return integrate_fixed(system, w0, t_end, step, table, order, **kwargs)
    if mode == "controlled":
        return integrate_controlled(system, w0, t_end, table, order, atol, rtol, **kwargs)
    raise ValueError(f"unknown mode {mode!r}")


__all__ = [
    "ControllerState",
    "GridExhaustedError",
    "IntegrationResult",
    "InternalInstabilityError",
    "SemiDiscreteSystem",
    "companion_sweep",
    "estimate_error",
    "frkg_step",
    "frkg_sweep",
    "initial_step",
    "integrate",
    "integrate_controlled",
    "integrate_fixed",
    "propose_step",
]
