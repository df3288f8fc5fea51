import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from delaywave.exceptions import PreconditionError, SingularOperatorError
from delaywave.operators import DampingSpec, SpectralOperator, build_reduction, inverse_block, semigroup_norm
from delaywave.spectral import (BOUND_REPORT_COLUMNS, bound_reports, decay_envelope, gamma_bounds,
                                gpg_numeric_growth_bound, growth_bound_estimate, growth_bound_from_operator_norms,
                                lyapunov_residual, lyapunov_solution, norm_surrogate, proposition_growth_bound,
                                resolvent_bound_imag_axis, resolvent_norm, spectral_bound_scalar_damping,
                                uniform_resolvent_bound)

PI = math.pi


def lap(n):
    return SpectralOperator.dirichlet_laplacian_1d(n)


def companion_abscissa(beta, lam):
    out = -np.inf
    for l in lam:
        out = max(out, np.roots([1.0, -beta, l]).real.max())
    return out


# -- spectral bound ------------------------------------------------------------


def test_spectral_bound_examples():
    lam = [(k * PI) ** 2 for k in range(1, 30)]
    assert spectral_bound_scalar_damping(-2.0, -PI ** 2) == pytest.approx(-1.0)
    assert spectral_bound_scalar_damping(-8.0, -PI ** 2) == pytest.approx(-4 + math.sqrt(16 - PI ** 2))
    assert spectral_bound_scalar_damping(-8.0, -PI ** 2) == pytest.approx(-1.5240, abs=1e-4)
    assert spectral_bound_scalar_damping(0.0, -PI ** 2) == 0.0
    assert companion_abscissa(-8.0, lam) == pytest.approx(spectral_bound_scalar_damping(-8.0, -PI ** 2))


@settings(max_examples=200, deadline=None)
@given(st.floats(-10.0, 0.0), st.lists(st.floats(0.05, 80.0), min_size=1, max_size=64))
def test_spectral_bound_property(beta, lam):
    lam = sorted(lam)
    assert abs(spectral_bound_scalar_damping(beta, -lam[0]) - companion_abscissa(beta, lam)) <= 1e-9


# -- Lyapunov ------------------------------------------------------------------


def test_lyapunov_block_template():
    P = lyapunov_solution(2.0, SpectralOperator(np.array([PI ** 2])))
    blk = P.blocks[0]
    np.testing.assert_allclose(blk, [[0.5 + 1 / PI ** 2, 1 / (2 * PI)], [1 / (2 * PI), 0.5]], rtol=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(1, 12), st.integers(0, 2 ** 32 - 1))
def test_lyapunov_against_scipy(alpha, n, seed):
    rng = np.random.default_rng(seed)
    A = SpectralOperator(np.sort(rng.uniform(0.1, 1e3, n)))
    op = build_reduction(A, DampingSpec.scalar(-alpha))
    P = lyapunov_solution(alpha, A)
    ref = scipy.linalg.solve_continuous_lyapunov(op.matrix.T, -np.eye(2 * n))
    np.testing.assert_allclose(P.matrix, ref, rtol=1e-8, atol=1e-10)
    assert np.all(np.linalg.eigvalsh(P.matrix) > 0)
    y = rng.standard_normal(2 * n)
    assert lyapunov_residual(P, op, y) <= 1e-12


def test_lyapunov_fault_and_zero_vector():
    A = lap(3)
    op = build_reduction(A, DampingSpec.scalar(-2.0))
    P = lyapunov_solution(2.0, A).perturbed(delta=0.1)
    y = np.random.default_rng(1).standard_normal(6)
    assert lyapunov_residual(P, op, y) > 0.01
    with pytest.raises(PreconditionError):
        lyapunov_residual(P, op, np.zeros(6))


def test_gamma_bounds_reference_values():
    gm, gp = gamma_bounds(2.0, -PI ** 2)
    assert gm == pytest.approx(0.3836, abs=5e-5)
    assert gp == pytest.approx(0.7177, abs=5e-5)
    M, mu = decay_envelope(gm, gp)
    assert M == pytest.approx(1.368, abs=5e-4)
    assert mu == pytest.approx(0.6967, abs=5e-5)


def test_gamma_bounds_large_theta_limit():
    alpha = 2.0
    gm, gp = gamma_bounds(alpha, -1e8 * alpha ** 2 / 4)
    assert gm == pytest.approx(1 / alpha, abs=1e-3)
    assert gp == pytest.approx(1 / alpha, abs=1e-3)


def test_decay_envelope_equal_gammas():
    assert decay_envelope(0.4, 0.4) == pytest.approx((1.0, 1.25))


def test_rayleigh_inside_bounds_twenty_modes():
    A = lap(20)
    P = lyapunov_solution(2.0, A)
    gm, gp = gamma_bounds(2.0, A.omega_s)
    ev = np.linalg.eigvalsh(P.matrix)
    assert gm - 1e-12 <= ev.min() and ev.max() <= gp + 1e-12
    Y = np.random.default_rng(5).standard_normal((40, 10_000))
    rq = P.rayleigh(Y)
    assert rq.min() >= gm - 1e-12 and rq.max() <= gp + 1e-12


def test_envelope_dominates_semigroup_twenty_modes():
    A = lap(20)
    op = build_reduction(A, DampingSpec.scalar(-2.0))
    M, mu = decay_envelope(*gamma_bounds(2.0, A.omega_s))
    t = np.linspace(0, 20, 801)
    exact = np.array([np.linalg.norm(scipy.linalg.expm(s * op.matrix), 2) for s in t[::40]])
    np.testing.assert_allclose(semigroup_norm(op, t[::40]), exact, rtol=1e-9, atol=1e-14)
    assert np.all(semigroup_norm(op, t) <= M * np.exp(-mu * t) + 1e-12)


# -- resolvent ----------------------------------------------------------------------


def test_resolvent_at_origin_equals_inverse_norm():
    op = build_reduction(lap(8), DampingSpec.scalar(-2.0))
    assert resolvent_norm(op, 0.0) == pytest.approx(inverse_block(op).norm(), rel=1e-12)
    assert resolvent_norm(op, 0.0) == pytest.approx(np.linalg.norm(np.linalg.inv(op.matrix), 2), rel=1e-12)


def test_resolvent_blows_up_near_eigenvalue():
    op = build_reduction(lap(3), DampingSpec.scalar(-2.0))
    ev = op.eigenvalues()[0]
    with pytest.raises(SingularOperatorError):
        resolvent_norm(op, ev)
    for d in (1e-2, 1e-4, 1e-6):
        assert resolvent_norm(op, ev + d) >= 1 / d * (1 - 1e-9)


def test_resolvent_dense_path_matches():
    A = lap(4)
    b = -np.array([1.0, 2.0, 0.5, 3.0])
    zs = np.array([0.3j, -1 + 2j, 5.0, 0.1 - 7j])
    d = build_reduction(A, DampingSpec.diagonal(b))
    m = build_reduction(A, DampingSpec.dense(np.diag(b)))
    np.testing.assert_allclose(resolvent_norm(d, zs), resolvent_norm(m, zs), rtol=1e-10)


def test_two_branch_bound_c_half_equals_uniform_bound():
    op = build_reduction(lap(16), DampingSpec.scalar(-2.0))
    inv = inverse_block(op).norm()
    rb = resolvent_bound_imag_axis(op.alpha, op.gamma, inv, 0.5)
    assert rb.outer == pytest.approx(uniform_resolvent_bound(op.alpha, op.gamma, 1 / inv))
    assert rb(0.0) == pytest.approx(inv / 0.5)
    assert rb.inner == pytest.approx(inv / (1 - 0.5))


@pytest.mark.parametrize("c", [0.25, 0.5, 0.75])
def test_two_branch_bound_dominates_exact(c):
    op = build_reduction(lap(32), DampingSpec.scalar(-2.0))
    inv = inverse_block(op).norm()
    b = np.linspace(-100, 100, 4001)
    exact = resolvent_norm(op, 1j * b)
    assert np.all(exact <= resolvent_bound_imag_axis(op.alpha, op.gamma, inv, c)(b))
    assert exact.max() <= uniform_resolvent_bound(op.alpha, op.gamma, 1 / inv)


def test_two_branch_bound_rejects_bad_c():
    with pytest.raises(PreconditionError):
        resolvent_bound_imag_axis(1.0, 0.0, 1.0, 1.0)


# -- growth bounds ----------------------------------------------------------------------


def test_growth_estimate_sector_zero():
    assert growth_bound_estimate(2.0, 0.0, 1.0) == -1.0


def test_growth_estimate_root_against_scan():
    nu = growth_bound_estimate(2.0, 1.0, 1.0)
    grid = np.linspace(-2 + 1e-9, -1e-9, 2_000_001)
    g = grid ** 2 + (2 * grid / (2 + grid)) ** 2 - 1
    scan = grid[np.argmin(np.abs(g))]
    assert nu == pytest.approx(scan, abs=2e-6)
    assert nu == pytest.approx(-0.57915, abs=1e-5)


def test_growth_estimate_certifies_instance():
    # a diagonal instance with alpha_B = 2, gamma_B = 1 and ||Lambda^{-1}|| <= 1
    A = SpectralOperator(np.array([4.0, 9.0, 25.0]))
    op = build_reduction(A, DampingSpec.diagonal(np.array([-4 + 4j, -4 - 4j, -4.0])))
    assert op.alpha == pytest.approx(2.0) and op.gamma == pytest.approx(1.0)
    inv = inverse_block(op).norm()
    assert op.spectral_abscissa() <= growth_bound_estimate(op.alpha, op.gamma, inv)


def test_norm_surrogate_values():
    A = lap(10)
    for alpha in (0.5, 2.0):
        s = norm_surrogate(A, DampingSpec.scalar(-2 * alpha))
        assert s == pytest.approx(2 * alpha / PI ** 2 + 2 / PI)
    assert norm_surrogate(A, DampingSpec.scalar(0.0)) == pytest.approx(2 / math.sqrt(A.eigenvalues[0]))


def _random_diag(rng):
    n = int(rng.integers(1, 16))
    A = SpectralOperator(np.sort(rng.uniform(0.2, 300.0, n)))
    re = -rng.uniform(0.05, 5.0, n)
    b = re + 1j * rng.uniform(-2, 2, n) * (-re) if rng.random() < 0.5 else re
    return A, DampingSpec.diagonal(b)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_growth_certificates_property(seed):
    A, B = _random_diag(np.random.default_rng(seed))
    op = build_reduction(A, B)
    exact = op.spectral_abscissa()
    inv = inverse_block(op).norm()
    assert norm_surrogate(A, B) >= inv * (1 - 1e-12)
    for est in (proposition_growth_bound(op), growth_bound_estimate(op.alpha, op.gamma, inv),
                growth_bound_from_operator_norms(A, B, op.alpha, op.gamma)):
        assert est >= exact - 1e-12


def test_gpg_certificate_scalar_damping():
    op = build_reduction(lap(16), DampingSpec.scalar(-2.0))
    g = gpg_numeric_growth_bound(op)
    assert g.exact_omega_g == pytest.approx(-1.0)
    assert g.conclusive and g.certificate <= -0.9
    assert g.certificate >= g.exact_omega_g
    assert g.b_cutoff >= 1e3


def test_gpg_undamped_inconclusive():
    op = build_reduction(lap(8), DampingSpec.scalar(0.0))
    g = gpg_numeric_growth_bound(op)
    assert not g.conclusive and g.status == "inconclusive"


def test_bound_reports_columns_and_methods():
    reps = bound_reports(build_reduction(lap(16), DampingSpec.scalar(-2.0)))
    assert [r.method for r in reps] == ["lyapunov", "root_equation", "norm_surrogate", "gpg_numeric"]
    assert BOUND_REPORT_COLUMNS[0] == "method" and len(reps[0].row()) == len(BOUND_REPORT_COLUMNS)
    for r in reps:
        assert r.omega_g_upper >= r.omega_s - 1e-12
    lyap = reps[0]
    assert lyap.gamma_minus == pytest.approx(0.3836, abs=5e-5)
    undamped = bound_reports(build_reduction(lap(4), DampingSpec.scalar(0.0)))
    assert [r.method for r in undamped] == ["gpg_numeric"]
    assert math.isnan(undamped[0].omega_g_upper)
