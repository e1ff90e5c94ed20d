import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from scipy.linalg import expm

from rkg.bench import fit_slope
from rkg.geometry import ProblemStiffness
from rkg.integrator import SemiDiscreteSystem
from rkg.splitting import (
    ReactionFlow,
    SplitSystem,
    builtin_scheme,
    integrate_split_controlled,
    integrate_split_fixed,
    split_step,
)
from rkg.table import default_table

# stiff symmetric part and a non-commuting rotation-like part; the decay over
# t = 1 stays moderate so errors sit well above rounding
STIFF = np.array([[-6.0, 2.0], [2.0, -4.5]])
SOFT = np.array([[0.0, 1.5], [-2.0, -0.3]])


def linear_split(a=STIFF, b=SOFT):
    lam = float(np.max(np.abs(np.linalg.eigvalsh(a))))
    system_a = SemiDiscreteSystem(lambda w: a @ w, a.shape[0], ProblemStiffness(1 / lam, math.inf))
    return SplitSystem(system_a, lambda w: b @ w)


def test_order_four_sums_are_exact():
    scheme = builtin_scheme(4)
    sums = scheme.exact_sums()
    assert sums["A"] == (Fraction(1), Fraction(0))
    assert sums["B"] == (Fraction(1), Fraction(0))
    assert scheme.length == 9


def test_order_six_sums():
    scheme = builtin_scheme(6)
    sums = scheme.exact_sums(dps=50)
    with mp.workdps(50):
        assert abs(sums["A"][0] - 1) < mp.mpf(10) ** -30
        assert abs(sums["A"][1]) < mp.mpf(10) ** -30
        assert abs(sums["B"][0] - 1) < mp.mpf(10) ** -30
        assert abs(sums["B"][1]) < mp.mpf(10) ** -30
    assert scheme.length == 33


@pytest.mark.parametrize("order", [4, 6])
def test_scheme_structure(order):
    scheme = builtin_scheme(order)
    assert scheme.sequence == scheme.sequence[::-1]
    positions = scheme.positions()
    assert positions[0][0] == "B" and positions[-1][0] == "B"
    for op, w in positions:
        if op == "A":
            assert w.real > 0 and w.imag == 0


def test_unsupported_order():
    with pytest.raises(ValueError):
        builtin_scheme(5)


@pytest.mark.parametrize("order", [4, 6])
def test_zero_reaction_reduces_to_frkg(table, order):
    # with B = 0 the composition is a product of FRKG steps on A alone; its
    # one-step error against exp(A T) must fall by at least 2^order per halving
    stiff = 10 * STIFF
    split = linear_split(a=stiff, b=np.zeros((2, 2)))
    w = np.array([1.0, -0.5])
    errs = []
    for step in (0.01, 0.005):
        flow = ReactionFlow(split.reaction)
        state, evals, _ = split_step(split.linear, flow, w, step, builtin_scheme(order), table)
        assert evals > 0
        assert np.max(np.abs(state.imag)) < 1e-12
        errs.append(np.linalg.norm(state.real - expm(stiff * step) @ w))
    assert errs[0] / errs[1] > 2**order


def split_errors(order, steps, t_end=1.0):
    split = linear_split()
    w0 = np.array([1.0, 0.5])
    ref = expm((STIFF + SOFT) * t_end) @ w0
    scheme = builtin_scheme(order)
    errs = []
    table = default_table([order])
    for step in steps:
        flow = ReactionFlow(split.reaction, rtol=1e-13, atol=1e-15)
        res = integrate_split_fixed(split, w0, t_end, step, scheme, table, flow=flow)
        errs.append(np.linalg.norm(res.w - ref))
    return errs


@pytest.mark.parametrize("order,steps", [(4, [0.5, 0.25, 1 / 6, 0.125, 0.1, 0.05]), (6, [1.0, 0.5, 1 / 3, 0.25, 0.2, 0.1])])
def test_linear_split_convergence(order, steps):
    errs = split_errors(order, steps)
    assert abs(fit_slope(steps, errs) - order) <= 0.5


def test_controlled_split_runs(table):
    split = linear_split()
    w0 = np.array([1.0, 0.5])
    res = integrate_split_controlled(split, w0, 1.0, builtin_scheme(4), table, 1e-6, 1e-6)
    ref = expm(STIFF + SOFT) @ w0
    assert np.linalg.norm(res.w - ref) < 1e-4
    assert res.steps > 0 and res.reaction_evals > 0
    assert max(res.errors) <= 1
