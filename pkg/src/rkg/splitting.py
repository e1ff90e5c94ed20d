"""Complex operator splitting for w' = A(w) + B(w).

A step of size T composes J sweeps.  Odd positions (1-based) advance the
reaction part B exactly-ish over a complex sub-interval T_k T, using an
adaptive explicit Runge-Kutta pair in complex arithmetic; even positions
advance the stiff part A by an FRKG step over a real sub-interval.  The
sweep weights come from published order-4 and order-6 schemes, and all label
sequences are palindromic, so the application order is immaterial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import mpmath as mp
import numpy as np
from scipy.integrate import solve_ivp

from .geometry import max_supported_step, select_method
from .integrator import (
    ControllerState,
    IntegrationResult,
    SemiDiscreteSystem,
    estimate_error,
    frkg_sweep,
    imag_residue,
    initial_step,
    propose_step,
)

SPLIT_LOWER_ORDER = 2
REACTION_TOL_FACTOR = 0.01

_ORDER4_SWEEPS = (
    (Fraction(1, 4), Fraction(0)),
    (Fraction(1, 10), Fraction(-1, 30)),
    (Fraction(4, 15), Fraction(2, 15)),
    (Fraction(4, 15), Fraction(-1, 5)),
)
_ORDER4_SEQUENCE = (2, 1, 3, 1, 4, 1, 3, 1, 2)

# 40-digit values, treated as exact
_ORDER6_SWEEPS = (
    ("0.0625", "0.0"),
    ("0.02469487608701806464091086499684224783860", "-0.00787479556290687705817157794952694216320"),
    ("0.06381347402130269977936630418820014696320", "0.03536576103414332780462940464971474181270"),
    ("0.06842509403031644197039700782174468405850", "-0.06226224445074867699533254064444759604610"),
    ("0.08804770109226783762699719586940866757720", "0.04547387150229870438376254918797742644469"),
    ("0.02368961112984706069614191247000936432533", "0.00962432606408962405769803529063730666395"),
    ("0.04272972238677338220296430057707421855388", "-0.03399440392395761055408394845784435826499"),
    ("0.12233468631684577296042851700196256307880", "-0.01043585907975251066938082710059054955178"),
    ("0.04189843282969388604353685060726223976426", "0.06936249263169638427515817430714426213030"),
    ("0.04873280421186970815851409293499173568080", "-0.09051829642972473048855853856612858205130"),
)
_ORDER6_SEQUENCE = (2, 1, 3, 1, 4, 1, 5, 1, 6, 1, 7, 1, 8, 1, 9, 1, 10, 1, 9, 1, 8, 1, 7, 1, 6, 1, 5, 1, 4, 1, 3, 1, 2)


@dataclass(frozen=True)
class SplitScheme:
    """Distinct sweep weights (exact real/imaginary parts) and the label sequence."""

    order: int
    sweeps: tuple
    sequence: tuple

    @property
    def length(self):
        return len(self.sequence)

    def weight(self, label):
        re, im = self.sweeps[label - 1]
        return complex(float(re), float(im))

    def positions(self):
        """(operator, complex weight) per position; 'B' at odd, 'A' at even."""
        return [("B" if p % 2 == 1 else "A", self.weight(k)) for p, k in enumerate(self.sequence, start=1)]

    def exact_sums(self, dps=50):
        """Per-operator weight sums as (real, imaginary) in exact or mp arithmetic."""
        sums = {"A": [0, 0], "B": [0, 0]}
        with mp.workdps(dps):
            for p, k in enumerate(self.sequence, start=1):
                op = "B" if p % 2 == 1 else "A"
                re, im = self.sweeps[k - 1]
                conv = (lambda v: v) if isinstance(re, Fraction) else mp.mpf
                sums[op][0] += conv(re)
                sums[op][1] += conv(im)
        return {op: tuple(v) for op, v in sums.items()}


def builtin_scheme(order):
    if order == 4:
        return SplitScheme(4, _ORDER4_SWEEPS, _ORDER4_SEQUENCE)
    if order == 6:
        return SplitScheme(6, _ORDER6_SWEEPS, _ORDER6_SEQUENCE)
    raise ValueError(f"no built-in splitting scheme of order {order}")


@dataclass
class ReactionFlow:
    """Flow of w' = f(w) over complex time tau, by DOP853 in s = t/tau in [0, 1]."""

    rhs: Callable[[np.ndarray], np.ndarray]
    rtol: float = 1e-8
    atol: float = 1e-10
    evaluations: int = 0

    def __call__(self, w, tau):
        if tau == 0:
            return np.asarray(w)
        sol = solve_ivp(
            lambda s, y: tau * self.rhs(y),
            (0.0, 1.0),
            np.asarray(w, dtype=complex),
            method="DOP853",
            rtol=self.rtol,
            atol=self.atol,
            t_eval=[1.0],
        )
        self.evaluations += sol.nfev
        if sol.status != 0:
            raise RuntimeError(f"reaction sub-integration failed: {sol.message}")
        return sol.y[:, -1]


@dataclass
class SplitSystem:
    """Stiff part A (with its stiffness) plus reaction part B."""

    linear: SemiDiscreteSystem
    reaction: Callable[[np.ndarray], np.ndarray]
    name: str = ""

    @property
    def stiffness(self):
        return self.linear.stiffness

    def full(self):
        return SemiDiscreteSystem(
            rhs=lambda w: self.linear(w) + self.reaction(w),
            dimension=self.linear.dimension,
            stiffness=self.linear.stiffness,
            name=self.name,
        )


def split_step(system_a, flow_b, w, step, scheme, table, controlled=True, stiffness=None):
    """One complex-split step; returns (complex state, A stage evaluations, max M)."""
    stiffness = stiffness or system_a.stiffness
    state = np.asarray(w, dtype=complex)
    a_evals = 0
    max_m = 0
    chosen = {}
    for op, weight in scheme.positions():
        if op == "B":
            state = flow_b(state, weight * step)
            continue
        sub = weight.real * step
        if sub not in chosen:
            m, i = select_method(stiffness, sub, table, scheme.order, controlled=controlled)
            chosen[sub] = table.get(scheme.order, m, i)
        entry = chosen[sub]
        state = frkg_sweep(system_a, state, sub, entry.stages)
        a_evals += entry.degree
        max_m = max(max_m, entry.substeps)
    return state, a_evals, max_m


def strang_step(system_a, flow_b, w, step, table, stiffness=None, order=SPLIT_LOWER_ORDER):
    """Second-order companion: B(T/2) A(T) B(T/2) with an order-2 FRKG A step."""
    stiffness = stiffness or system_a.stiffness
    state = flow_b(np.asarray(w, dtype=complex), 0.5 * step)
    m, i = select_method(stiffness, step, table, order, controlled=True)
    entry = table.get(order, m, i)
    state = frkg_sweep(system_a, state, step, entry.stages)
    state = flow_b(state, 0.5 * step)
    return state, entry.degree


def _a_step_cap(stiffness, table, scheme, controlled):
    """Largest full step whose A sub-steps (and the Strang companion) are selectable."""
    longest = max(w.real for op, w in scheme.positions() if op == "A")
    cap = max_supported_step(stiffness, table, scheme.order, controlled=controlled) / longest
    if controlled:
        cap = min(cap, max_supported_step(stiffness, table, SPLIT_LOWER_ORDER, controlled=True))
    return cap


@dataclass
class SplitResult(IntegrationResult):
    reaction_evals: int = 0
    notes: list = field(default_factory=list)


def integrate_split_fixed(split, w0, t_end, step, scheme, table, t0=0.0, flow=None, reaction_tol=1e-10):
    w = np.array(w0, dtype=float)
    res = SplitResult(t=t0, w=w)
    if t_end <= t0:
        return res
    flow = flow or ReactionFlow(split.reaction, rtol=reaction_tol, atol=reaction_tol)
    t = t0
    while t < t_end and not math.isclose(t, t_end, rel_tol=1e-13, abs_tol=1e-15):
        h = min(step, t_end - t)
        state, evals, m = split_step(split.linear, flow, w, h, scheme, table, controlled=False)
        res.max_imag_residue = max(res.max_imag_residue, imag_residue(state))
        w = state.real
        t += h
        res.f_accepted += evals
        res.steps += 1
        res.max_substeps = max(res.max_substeps, m)
        res.step_sizes.append(h)
    res.t, res.w = t_end, w
    res.reaction_evals = getattr(flow, "evaluations", 0)
    return res


def integrate_split_controlled(
    split, w0, t_end, scheme, table, atol, rtol, t0=0.0, flow=None, first_step=None, max_steps=100000
):
    """Adaptive split integration; the error estimate compares against a Strang step."""
    w = np.array(w0, dtype=float)
    res = SplitResult(t=t0, w=w)
    if t_end <= t0:
        return res
    if flow is None:
        tol = REACTION_TOL_FACTOR * min(atol, rtol)
        flow = ReactionFlow(split.reaction, rtol=tol, atol=tol)
    stiffness = split.stiffness
    ctrl = ControllerState(scheme.order, atol, rtol, lower=SPLIT_LOWER_ORDER)
    cap = _a_step_cap(stiffness, table, scheme, controlled=True)
    if first_step is None:
        first_step = initial_step(split.full(), w, stiffness.lam_max, atol, rtol)
        res.f_accepted += 2
    step = min(first_step, cap)
    t = t0
    while t < t_end and not math.isclose(t, t_end, rel_tol=1e-13, abs_tol=1e-15):
        if res.steps + res.rejected_steps >= max_steps:
            raise RuntimeError(f"step limit {max_steps} reached at t={t}")
        h = min(step, t_end - t)
        state, evals, m = split_step(split.linear, flow, w, h, scheme, table, controlled=True)
        low, low_evals = strang_step(split.linear, flow, w, h, table)
        w_high = state.real
        err = estimate_error(w, w_high, low.real, atol, rtol)
        cost = evals + low_evals
        if err <= 1:
            t += h
            w = w_high
            res.f_accepted += cost
            res.steps += 1
            res.max_substeps = max(res.max_substeps, m)
            res.max_imag_residue = max(res.max_imag_residue, imag_residue(state))
            res.step_sizes.append(h)
            res.errors.append(err)
            step = propose_step(ctrl, h, err, predictive=False)
            ctrl.accept(h, err)
        else:
            res.f_rejected += cost
            res.rejected_steps += 1
            step = propose_step(ctrl, h, err, predictive=False)
        step = min(step, cap)
    res.t, res.w = t_end, w
    res.reaction_evals = getattr(flow, "evaluations", 0)
    return res
