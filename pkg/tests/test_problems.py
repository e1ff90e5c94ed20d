import csv

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rkg.bench import advdiff_reference
from rkg.coefficients import stages_from_roots
from rkg.geometry import estimate_spectral_radius
from rkg.polynomial import build_polynomial
from rkg.problems import (
    AdvDiff1D,
    Brusselator2D,
    Grid1D,
    Grid2D,
    advection_for_peclet,
    cmp_minimum,
    cmp_stencil,
    exact_advdiff,
    kappa_advection,
    laplacian,
    semidiscretize_1d,
    write_snapshot,
)

CMP_FLOOR = -1e-30


def test_constant_state_is_steady():
    p = AdvDiff1D(Grid1D(-2, 2, 0.1), a=0.3, d=0.5, w_left=0.7, w_right=0.7)
    assert np.allclose(p.rhs(np.full(len(p.x), 0.7)), 0, atol=1e-12)


def test_linear_profile_has_no_diffusion():
    g = Grid1D(-2, 2, 0.1)
    p = AdvDiff1D(g, a=0.0, d=2.0, w_left=g.x_min, w_right=g.x_max)
    assert np.allclose(p.rhs(p.x), 0, atol=1e-10)


@pytest.mark.parametrize("a", [0.4, -0.4])
def test_spike_stencil(a):
    h, d = 0.1, 1.0
    p = AdvDiff1D(Grid1D(-1, 1, h), a=a, d=d, w_left=0.0, w_right=0.0)
    w = np.zeros(len(p.x))
    j = len(w) // 2
    w[j] = 1.0
    out = p.rhs(w)
    up, down = (j + 1, j - 1) if a > 0 else (j - 1, j + 1)
    assert out[j] == pytest.approx(-2 * d / h**2 - abs(a) / h)
    assert out[up] == pytest.approx(d / h**2 + abs(a) / h)
    assert out[down] == pytest.approx(d / h**2)
    assert np.count_nonzero(out) == 3


def test_system_accepts_complex_states():
    p = AdvDiff1D(Grid1D(-1, 1, 0.1))
    w = p.initial(0.5)
    out = p.system()(w + 0j)
    assert np.iscomplexobj(out)
    assert np.allclose(out.real, p.rhs(w))
    assert semidiscretize_1d(Grid1D(-1, 1, 0.1), 0.2, 1.0).dimension == len(p.x)


def test_exact_solution():
    a, d = 0.2, 1.0
    assert exact_advdiff(a * 3.0, 3.0, a, d, 1.0, 0.0) == pytest.approx(0.5)
    assert exact_advdiff(1e3, 3.0, a, d, 1.0, 0.0) == pytest.approx(0.0)
    t = 4.9710
    with mp.workdps(30):
        ref = 0.5 * (1 - mp.erf((0 - mp.mpf("0.2") * mp.mpf(t)) / (2 * mp.sqrt(mp.mpf(t)))))
    assert exact_advdiff(0.0, t, a, d, 1.0, 0.0) == pytest.approx(float(ref), rel=1e-14)
    with pytest.raises(ValueError):
        exact_advdiff(0.0, 0.0, a, d)


def test_semidiscrete_solution_tracks_exact():
    p = AdvDiff1D(Grid1D(-20, 20, 0.1), a=0.2, d=1.0)
    w = advdiff_reference(p, p.initial(1.0), 1.0, 4.0)
    assert np.max(np.abs(w - p.exact(4.0))) < 5e-3


def test_uniform_brusselator_reduces_to_ode():
    prob = Brusselator2D(Grid2D(16), mu=0.7)
    v0, w0 = 1.7, 0.4
    state = np.concatenate([np.full(256, v0), np.full(256, w0)])
    lin = prob.linear_rhs(state)
    assert np.allclose(lin[:256], prob.A) and np.allclose(lin[256:], 0)
    full = prob.rhs(state)
    assert np.allclose(full[:256], prob.A - (prob.B + 1) * v0 + v0**2 * w0)
    assert np.allclose(full[256:], prob.B * v0 - v0**2 * w0)


def test_zero_advection_is_plain_reaction_diffusion():
    prob = Brusselator2D(Grid2D(12), mu=0.0)
    rng = np.random.default_rng(0)
    state = rng.uniform(0, 2, prob.size)
    v, w = prob.unpack(state)
    lin = prob.linear_rhs(state)
    h = prob.grid.h
    assert np.allclose(lin, np.concatenate([(prob.eps * laplacian(v, h) + prob.A).ravel(), (prob.eps * laplacian(w, h)).ravel()]))


def test_transport_conserves_and_annihilates_constants():
    rng = np.random.default_rng(1)
    u = rng.standard_normal((10, 10))
    h = 0.1
    for c in (0.7, -1.3):
        for axis in (0, 1):
            assert abs(kappa_advection(u, c, h, axis).sum()) < 1e-12
            assert np.allclose(kappa_advection(np.ones((10, 10)), c, h, axis), 0)
    assert abs(laplacian(u, h).sum()) < 1e-10
    assert np.allclose(laplacian(np.ones((10, 10)), h), 0)


@pytest.mark.parametrize("c", [0.8, -0.8])
def test_second_order_upwind_fourier_symbol(c):
    n, k = 32, 3
    h = 1.0 / n
    x = np.arange(n) * h
    theta = 2 * np.pi * k * h
    u = np.exp(2j * np.pi * k * x)[:, None] * np.ones((1, 4))
    got = kappa_advection(u, c, h, axis=0)[:, 0] / u[:, 0]
    s = np.sign(c)
    # upwind-biased three-point difference (1.5, -2, 0.5) on the upwind side
    symbol = -abs(c) / h * (1.5 - 2 * np.exp(-1j * s * theta) + 0.5 * np.exp(-2j * s * theta))
    assert np.allclose(got, symbol)
    # second-order consistency on sin(2 pi x)
    errs = []
    for n in (32, 64, 128):
        xx = np.arange(n) / n
        uu = np.sin(2 * np.pi * xx)[:, None]
        errs.append(np.max(np.abs(kappa_advection(uu, c, 1 / n, 0)[:, 0] + c * 2 * np.pi * np.cos(2 * np.pi * xx))))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.1) and errs[1] / errs[2] == pytest.approx(4, rel=0.1)


@pytest.mark.parametrize("mu,expected", [(0.1, 5.17e4), (0.5, 5.36e4), (1.0, 5.60e4)])
def test_brusselator_stiffness(mu, expected):
    assert 1 / Brusselator2D(Grid2D(800), mu=mu).stiffness().psi1 == pytest.approx(expected, rel=0.01)


def test_stiffness_bounds_the_transport_spectrum():
    prob = Brusselator2D(Grid2D(24), mu=1.0)
    est = estimate_spectral_radius(prob.linear_rhs, prob.initial(), iters=200)
    assert est <= prob.stiffness().lam_max * (1 + 1e-9)
    assert est >= 0.5 * prob.stiffness().lam_max


def test_split_parts_add_up():
    prob = Brusselator2D(Grid2D(8))
    state = prob.initial()
    split = prob.split()
    assert np.allclose(split.linear(state) + split.reaction(state), prob.rhs(state))
    assert np.allclose(split.full()(state), prob.rhs(state))


def test_snapshot_csv(tmp_path):
    prob = Brusselator2D(Grid2D(4))
    path = tmp_path / "snap.csv"
    write_snapshot(path, prob, prob.initial(), {"mu": 0.1})
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == ["x1", "x2", "v", "w"] and len(rows) == 17


def dense_stencil(order, substeps, nu, fraction, a, d, h):
    """Oracle: apply the stage product as dense periodic matrices to a unit vector."""
    poly = build_polynomial(order, substeps, nu)
    stages = np.array([complex(s) for s in stages_from_roots(poly)])
    L = len(stages)
    n = 4 * L + 3
    eye = np.eye(n)
    if a >= 0:
        op = (d / h**2 + a / h) * np.roll(eye, -1, 1) + (-2 * d / h**2 - a / h) * eye + d / h**2 * np.roll(eye, 1, 1)
    else:
        op = d / h**2 * np.roll(eye, -1, 1) + (-2 * d / h**2 + a / h) * eye + (d / h**2 - a / h) * np.roll(eye, 1, 1)
    step = fraction * float(poly.beta) / (4 * d / h**2 + 2 * abs(a) / h)
    centre = n // 2
    # row `centre` of the full-step matrix gives the weight of w_{centre+k}
    mat = np.eye(n, dtype=complex)
    for s in stages:
        mat = mat + s * step * (op @ mat)
    return mat[centre, centre - L : centre + L + 1].real


@pytest.mark.parametrize("order,substeps,nu,a", [(1, 3, 0.5, 0.2), (2, 4, 1.0, 2.0), (2, 5, 0.2, -1.0)])
def test_stencil_matches_dense_oracle(order, substeps, nu, a):
    for fraction in (0.3, 1.0):
        s = cmp_stencil(order, substeps, nu, fraction, a=a)
        ref = dense_stencil(order, substeps, nu, fraction, a, 1.0, 0.1)
        assert np.allclose(s.weights, ref, atol=1e-10 * np.abs(ref).max())


@given(
    order=st.sampled_from([1, 2]),
    substeps=st.integers(1, 8),
    nu=st.sampled_from([0.0, 0.3, 1.0, 2.5]),
    fraction=st.floats(1e-3, 1.0),
    peclet=st.floats(0, 1),
)
def test_stencil_weights_sum_to_one(order, substeps, nu, fraction, peclet):
    s = cmp_stencil(order, substeps, nu, fraction, a=advection_for_peclet(peclet))
    assert abs(s.total - 1) < 1e-12


def test_small_step_tends_to_identity():
    s = cmp_stencil(2, 11, 1.0, 1e-9)
    expected = (s.offsets == 0).astype(float)
    assert np.allclose(s.weights, expected, atol=1e-6)
    with pytest.raises(ValueError):
        cmp_stencil(2, 11, 1.0, 0.0)


def test_cmp_sign_change_with_nu():
    assert cmp_minimum(2, 11, 0.5, samples=100) < 0
    assert cmp_minimum(2, 11, 1.0, samples=100) >= CMP_FLOOR


@pytest.mark.parametrize("order", [1, 2])
@pytest.mark.parametrize("substeps", [7, 11])
def test_cmp_critical_nu_without_advection(order, substeps):
    kwargs = dict(a=0.0, samples=100)
    assert cmp_minimum(order, substeps, 0.45, **kwargs) < 0
    fractions = np.linspace(0.01, 1, 100)
    mins = [cmp_stencil(order, substeps, 0.55, f, a=0.0).min_weight for f in fractions]
    assert max(mins) >= CMP_FLOOR
