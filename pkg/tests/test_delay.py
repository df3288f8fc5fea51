import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad, solve_ivp

from delaywave.delay import (DelayKernel, GreenOperator, assemble_delay, delay_semigroup_decay, delay_transfer,
                             derivative_galerkin_matrix, green_operator, history_response, series_criterion,
                             solve_delay, stability_criterion, structure_operator_apply)
from delaywave.exceptions import PreconditionError
from delaywave.operators import DampingSpec, SpectralOperator, apply_semigroup, build_reduction
from delaywave.presets import damped_delay_wave

PI = math.pi


def lap(n):
    return SpectralOperator.dirichlet_laplacian_1d(n)


def steps_oracle(L, C, phi0, hist, T, tau=1.0):
    """Method of steps with scipy's adaptive integrator: y' = L y + C y(t - tau)."""
    pieces = []

    def past(t):
        if t <= 0:
            return hist(t)
        for a, b, sol in pieces:
            if a - 1e-12 <= t <= b + 1e-12:
                return sol(t)
        raise AssertionError(t)

    y = np.asarray(phi0, dtype=float)
    t0 = 0.0
    while t0 < T - 1e-12:
        t1 = min(t0 + tau, T)
        sol = solve_ivp(lambda t, v: L @ v + C @ past(t - tau), (t0, t1), y, method="DOP853",
                        rtol=1e-12, atol=1e-14, dense_output=True).sol
        pieces.append((t0, t1, sol))
        y = sol(t1)
        t0 = t1
    return past


# -- kernels and transfer ------------------------------------------------------


def test_derivative_matrix_against_quadrature():
    D = derivative_galerkin_matrix(5)
    for m in range(1, 6):
        for n in range(1, 6):
            val = quad(lambda x: 2 * math.sin(m * PI * x) * n * PI * math.cos(n * PI * x), 0, 1)[0]
            assert D[m - 1, n - 1] == pytest.approx(val, abs=1e-10)


def test_kernel_rejects_atoms_outside_horizon():
    with pytest.raises(ValueError):
        DelayKernel(1.0, ((-1.5, np.eye(2)),))
    with pytest.raises(ValueError):
        DelayKernel(0.0)


def test_total_variation_and_mass():
    k = DelayKernel(1.0, ((-1.0, 2 * np.eye(2)),), ((-0.5, 0.0, np.eye(2)),))
    assert k.total_variation() == pytest.approx(2.5)
    np.testing.assert_allclose(k.total_mass(), 2.5 * np.eye(2))


def test_transfer_single_atom_imaginary_axis():
    k = DelayKernel.point(-1.0, 0.3 * np.eye(3))
    for b in (-17.0, 0.0, 2.5, 100.0):
        _, nrm = delay_transfer(k, 1j * b)
        assert nrm == pytest.approx(0.3)


def test_transfer_at_zero_is_total_mass():
    k = DelayKernel(1.0, ((-1.0, np.diag([1.0, 2.0])),), ((-1.0, -0.2, np.eye(2)),))
    mat, _ = delay_transfer(k, 0.0)
    np.testing.assert_allclose(mat, k.total_mass())


def test_transfer_variation_bound_example():
    k = DelayKernel.point(-1.0, 0.3 * np.eye(2))
    _, nrm = delay_transfer(k, -0.5 + 3j)
    assert nrm <= 0.3 * math.exp(0.5) + 1e-15
    assert nrm == pytest.approx(0.3 * math.exp(0.5))


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(-50, 50), st.integers(0, 2 ** 32 - 1))
def test_transfer_within_variation_bound(a, b, seed):
    rng = np.random.default_rng(seed)
    atoms = tuple((-rng.uniform(0, 2), rng.standard_normal((3, 3))) for _ in range(2))
    dens = ((-2.0, -rng.uniform(0.1, 2.0), rng.standard_normal((3, 3))),)
    k = DelayKernel(2.0, atoms, dens)
    _, nrm = delay_transfer(k, complex(a, b))  # raises on violation
    assert nrm <= math.exp(abs(a) * 2.0) * k.total_variation() * (1 + 1e-10)


def test_assemble_lifts_position_memory():
    A = lap(3)
    D = derivative_galerkin_matrix(3)
    F = assemble_delay(A, M=DelayKernel(1.0, ((-1.0, D),), (), "M"))
    C = F.atoms[0][1]
    np.testing.assert_allclose(C[:3], 0.0)
    np.testing.assert_allclose(C[3:, :3], D / A.sqrt_eigenvalues[None, :])
    np.testing.assert_allclose(C[3:, 3:], 0.0)


# -- criteria ----------------------------------------------------------------------


def test_criterion_zero_kernel_holds():
    op = build_reduction(lap(4), DampingSpec.scalar(-2.0))
    F = DelayKernel.zero(8)
    for a in (0.0, -0.5, -0.99):
        r = stability_criterion(a, F, op)
        assert r.holds and r.lhs == 0.0
    assert series_criterion(0.0, F, op).q_a == 0.0


def test_criterion_example_instance():
    sc = damped_delay_wave(1.0, 0.04, 0.0, 0.1, 16)
    r = stability_criterion(0.0, sc.F, sc.op)
    assert r.holds
    assert r.lhs == pytest.approx(0.04 * np.linalg.norm(derivative_galerkin_matrix(16) / np.sqrt(
        sc.A.eigenvalues)[None, :], 2), rel=1e-12)
    assert r.lhs < PI / (36 + PI)
    s = series_criterion(0.0, sc.F, sc.op)
    assert s.q_a < 1 and s.certified


def test_criterion_fails_for_heavy_atom():
    op = build_reduction(lap(4), DampingSpec.scalar(-2.0))
    from delaywave.spectral import resolvent_norm
    sup = resolvent_norm(op, 1j * np.linspace(-50, 50, 20001)).max()
    F = assemble_delay(op.A, N=DelayKernel(1.0, ((-1.0, 1.5 / sup * np.eye(4)),), (), "N"))
    assert not stability_criterion(0.0, F, op).holds


@pytest.mark.parametrize("a", [0.0, -0.3])
def test_series_below_one_when_criterion_holds(a):
    sc = damped_delay_wave(1.0, 0.05, 0.02, 0.1, 8)
    cr = stability_criterion(a, sc.F, sc.op)
    sr = series_criterion(a, sc.F, sc.op)
    assert cr.holds and sr.q_a <= cr.lhs / cr.rhs + 1e-12 and sr.q_a < 1


def test_criterion_rejects_bad_abscissa():
    op = build_reduction(lap(4), DampingSpec.scalar(-2.0))
    with pytest.raises(PreconditionError):
        stability_criterion(0.1, DelayKernel.zero(8), op)
    with pytest.raises(PreconditionError):
        stability_criterion(-1.5, DelayKernel.zero(8), op)


# -- structure operator ---------------------------------------------------------------


def test_structure_operator_single_atom_reverses_history():
    C = np.array([[2.0, 0.0], [1.0, -1.0]])
    F = DelayKernel.point(-1.0, C)
    grid = np.linspace(-1, 0, 41)
    phi = np.stack([np.sin(3 * grid), grid ** 2], axis=1)
    out = structure_operator_apply(F, phi, grid)
    np.testing.assert_allclose(out, (C @ phi[::-1].T).T, atol=1e-12)


def test_structure_operator_zero_kernel():
    grid = np.linspace(-1, 0, 11)
    out = structure_operator_apply(DelayKernel.zero(2), np.ones((11, 2)), grid)
    np.testing.assert_array_equal(out, 0.0)


def test_structure_operator_uniform_density_quadrature():
    rho = 0.7
    F = DelayKernel(1.0, (), ((-1.0, 0.0, rho * np.eye(1)),))
    grid = np.linspace(-1, 0, 201)
    fn = lambda s: np.cos(2 * s) + s
    out = structure_operator_apply(F, fn(grid)[:, None], grid)
    for i in (0, 50, 120, 200):
        th = grid[i]
        ref = quad(lambda s: rho * fn(s - th), -1.0, th)[0]
        assert out[i, 0] == pytest.approx(ref, abs=2e-5)


# -- method of steps -----------------------------------------------------------------------


def test_green_without_delay_is_semigroup():
    op = build_reduction(lap(4), DampingSpec.scalar(-2.0))
    G = green_operator(op, DelayKernel.zero(8), 10.0, 1 / 32)
    for k in range(0, G.times.size, 40):
        np.testing.assert_allclose(G.samples[k], apply_semigroup(op, np.eye(8), G.times[k]), atol=1e-6)
    np.testing.assert_array_equal(G(-0.5), 0.0)
    np.testing.assert_allclose(G(0.0), np.eye(8))


@pytest.mark.parametrize("method", ["etd", "rk4"])
def test_method_of_steps_against_adaptive_oracle(method):
    sc = damped_delay_wave(1.0, 0.3, 0.2, 0.0, 2)
    op, F = sc.op, sc.F
    C = sum(c for _, c in F.atoms)
    phi0 = np.array([1.0, -0.5, 0.2, 0.3])
    hist = lambda t: phi0 * math.cos(t)
    h = 1 / 64 if method == "etd" else 1 / 512
    sol = solve_delay(op, F, phi0, hist, 4.0, h, method=method)
    ref = steps_oracle(op.matrix, C, phi0, hist, 4.0)
    err = max(np.abs(sol.states[k] - ref(t)).max() for k, t in enumerate(sol.times))
    assert err <= 1e-6
    # dense output between grid points
    for t in (0.3, 1.01, 2.777, 3.5):
        np.testing.assert_allclose(sol(t), ref(t), atol=1e-6)


def test_rk4_step_guard():
    op = build_reduction(lap(16), DampingSpec.scalar(-2.0))
    with pytest.raises(PreconditionError):
        solve_delay(op, DelayKernel.zero(32), np.ones(32), None, 1.0, 1 / 16, method="rk4")


def test_green_step_bound():
    op = build_reduction(lap(2), DampingSpec.scalar(-2.0))
    with pytest.raises(PreconditionError):
        green_operator(op, DelayKernel.zero(4), 2.0, 1 / 8)


def test_variation_of_constants_with_history():
    sc = damped_delay_wave(1.0, 0.2, 0.1, 0.0, 3)
    op, F = sc.op, sc.F
    h = 1 / 64
    T = 3.0
    phi0 = np.linspace(1.0, -1.0, 6)
    grid = np.linspace(-1, 0, 65)
    phi1 = np.stack([phi0 * (1 + 0.5 * np.sin(4 * t)) for t in grid])
    G = green_operator(op, F, T, h)
    direct = solve_delay(op, F, phi0, phi1, T, h)
    for k in (32, 64, 100, 192):
        voc = G.at_index(k) @ phi0 + history_response(G, F, phi1, k)
        np.testing.assert_allclose(voc, direct.states[k], atol=1e-5)


def test_decay_fit_matches_exact_rate():
    op = build_reduction(SpectralOperator(np.array([PI ** 2])), DampingSpec.scalar(-2.0))
    G = green_operator(op, DelayKernel.zero(2), 20.0, 1 / 32)
    fit = delay_semigroup_decay(G)
    assert 0.9 <= fit.gamma <= 1.1 and fit.M >= 1
    assert np.all(G.norms()[1] <= fit.M * np.exp(-fit.gamma * G.times) * (1 + 1e-9))


def test_decay_fit_example_positive():
    sc = damped_delay_wave(1.0, 0.04, 0.0, 0.1, 8)
    fit = delay_semigroup_decay(green_operator(sc.op, sc.F, 20.0, 1 / 64))
    assert fit.decaying


def test_decay_fit_degenerate():
    samples = np.zeros((50, 2, 2))
    samples[0] = np.eye(2)
    G = GreenOperator(np.arange(50) * 0.1, samples, 0.1)
    fit = delay_semigroup_decay(G)
    assert fit.degenerate and not fit.decaying
