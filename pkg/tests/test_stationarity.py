import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delaywave.delay import DelayKernel
from delaywave.exceptions import PreconditionError, WrongTheoremError
from delaywave.noise import FixedNormJumps, JumpSpec, NoiseSpec, ParetoJumps
from delaywave.operators import DampingSpec, SpectralOperator, build_reduction
from delaywave.presets import standing_wave_init
from delaywave.sde import DiffusionSpec
from delaywave.stationarity import (EmpiricalMeasure, bl_metric_estimate, cauchy_diagnostic, example_thresholds,
                                    levy_additive_condition, sufficient_condition_levy,
                                    sufficient_condition_wiener)

GAMMA = 0.696420  # example decay rate for alpha = 1, c1 = 0.04, c2 = 0


def mp_thresholds(alpha, c1, c2):
    with mpmath.workdps(50):
        a = mpmath.mpf(alpha)
        bound = a * mpmath.pi / (36 * a + mpmath.pi)
        g = mpmath.log(bound / (abs(mpmath.mpf(c1)) + abs(mpmath.mpf(c2))))
        return float(bound), float(g), float(mpmath.mpf(2) / 3 * g * mpmath.exp(-2 * g))


# -- Wiener condition -------------------------------------------------------------


def test_wiener_example_holds():
    v = sufficient_condition_wiener(1.0, GAMMA, 0.01, 0.01, 1.0, 1.0)
    assert v.holds and v.theorem == "wiener"
    assert v.condition_lhs == pytest.approx(1.39284, abs=1e-5)
    assert v.condition_rhs == pytest.approx(0.1508, abs=1e-4)


def test_wiener_example_fails_for_large_beta():
    v = sufficient_condition_wiener(1.0, GAMMA, 1.0, 1.0, 1.0, 1.0)
    assert not v.holds
    assert v.condition_rhs == pytest.approx(15.08, abs=0.01)


def test_wiener_zero_coefficients_hold():
    v = sufficient_condition_wiener(1.0, 0.1, 0.0, 0.0, 1.0, 1.0)
    assert v.holds and v.condition_rhs == 0.0


def test_wiener_boundary_is_strict():
    # 2 gamma = 3 M^2 alpha1 exactly
    v = sufficient_condition_wiener(1.0, 1.5, 1.0, 0.0, 0.0, 0.0)
    assert v.condition_lhs == v.condition_rhs and not v.holds


@pytest.mark.parametrize("args", [(0.5, 1.0, 0, 0, 1, 1), (1.0, 0.0, 0, 0, 1, 1), (1.0, 1.0, -1, 0, 1, 1),
                                  (1.0, 1.0, 0, 0, 1, -1)])
def test_wiener_preconditions(args):
    with pytest.raises(PreconditionError):
        sufficient_condition_wiener(*args)


# -- Levy conditions ---------------------------------------------------------------------


def test_levy_example_holds():
    ns = NoiseSpec.pure_jump(8, JumpSpec(2.0, FixedNormJumps(0.5)))
    v = sufficient_condition_levy(1.0, GAMMA, 0.01, 0.01, 1.0, 1.0, ns.trace_q, ns.second_moment_nu)
    assert v.holds and v.theorem == "levy"
    assert v.condition_rhs == pytest.approx(0.0754, abs=1e-4)


def test_levy_example_fails_with_scaled_jumps():
    ns = NoiseSpec.pure_jump(8, JumpSpec(2.0, FixedNormJumps(0.5))).with_scaled_jumps(10)
    v = sufficient_condition_levy(1.0, GAMMA, 0.01, 0.01, 1.0, 1.0, ns.trace_q, ns.second_moment_nu)
    assert not v.holds
    assert v.condition_rhs == pytest.approx(7.539, abs=1e-3)


def test_levy_reduces_to_wiener_factor():
    w = sufficient_condition_wiener(1.2, 0.5, 0.02, 0.03, 1.0, 2.0)
    v = sufficient_condition_levy(1.2, 0.5, 0.02, 0.03, 1.0, 2.0, 1.0, 0.0)
    assert v.condition_rhs == pytest.approx(w.condition_rhs, rel=1e-15)


def test_levy_infinite_second_moment_wrong_theorem():
    ns = NoiseSpec.pure_jump(4, JumpSpec(1.0, ParetoJumps(1.5, 0.1)))
    with pytest.raises(WrongTheoremError):
        sufficient_condition_levy(1.0, GAMMA, 0.01, 0.01, 1.0, 1.0, ns.trace_q, ns.second_moment_nu)


@pytest.mark.parametrize("a,holds", [(1.5, True), (1.0001, True), (1.0, False), (0.9, False)])
def test_levy_additive_pareto_tail(a, holds):
    ns = NoiseSpec.pure_jump(4, JumpSpec(1.0, ParetoJumps(a, 0.1)))
    v = levy_additive_condition(ns, 1.0, GAMMA)
    assert v.holds is holds and v.theorem == "levy_additive"


def test_levy_additive_needs_stability_and_pure_jump():
    ns = NoiseSpec.pure_jump(4, JumpSpec(1.0, ParetoJumps(1.5, 0.1)))
    assert not levy_additive_condition(ns, 1.0, 0.0).holds
    mixed = NoiseSpec([1.0, 0, 0, 0], JumpSpec(1.0, ParetoJumps(1.5, 0.1)))
    with pytest.raises(WrongTheoremError):
        levy_additive_condition(mixed)


# -- bounded-Lipschitz estimate ---------------------------------------------------------------


def test_bl_identical_samples_zero():
    x = np.random.default_rng(0).standard_normal((100, 5))
    assert bl_metric_estimate(EmpiricalMeasure(x), EmpiricalMeasure(x.copy())) == 0.0


def test_bl_point_masses():
    d = bl_metric_estimate(EmpiricalMeasure([[0.0, 0.0]]), EmpiricalMeasure([[0.5, 0.0]]))
    assert 0.45 <= d <= 0.5


def test_bl_far_point_masses_capped():
    d = bl_metric_estimate(EmpiricalMeasure([[0.0]]), EmpiricalMeasure([[100.0]]))
    assert d == pytest.approx(2.0)


def test_bl_dimension_mismatch():
    with pytest.raises(PreconditionError):
        bl_metric_estimate(EmpiricalMeasure(np.zeros((3, 2))), EmpiricalMeasure(np.zeros((3, 3))))
    with pytest.raises(PreconditionError):
        EmpiricalMeasure(np.zeros((0, 2)))


def test_bl_separates_variances():
    rng = np.random.default_rng(4)
    a = EmpiricalMeasure(rng.standard_normal((2000, 3)))
    b = EmpiricalMeasure(3 * rng.standard_normal((2000, 3)))
    # equal means: only the norm and projection functionals can see it
    assert bl_metric_estimate(a, b, 64) > 0.2


samples = st.integers(0, 2 ** 32 - 1)


@settings(max_examples=40, deadline=None)
@given(samples, st.integers(1, 6), st.floats(0.0, 3.0))
def test_bl_bounded_and_symmetric(seed, dim, shift):
    rng = np.random.default_rng(seed)
    a = EmpiricalMeasure(rng.standard_normal((30, dim)))
    b = EmpiricalMeasure(rng.standard_normal((40, dim)) + shift)
    d1 = bl_metric_estimate(a, b, 32, seed=3)
    d2 = bl_metric_estimate(b, a, 32, seed=3)
    assert 0.0 <= d1 <= 2.0
    assert d1 == pytest.approx(d2, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(samples, st.integers(1, 40), st.integers(1, 40))
def test_bl_prefix_monotone(seed, k1, k2):
    rng = np.random.default_rng(seed)
    a = EmpiricalMeasure(rng.standard_normal((25, 3)))
    b = EmpiricalMeasure(rng.standard_normal((25, 3)) * 1.5)
    lo, hi = sorted((k1, k2))
    assert bl_metric_estimate(a, b, lo, seed=1) <= bl_metric_estimate(a, b, hi, seed=1)


def test_bl_argmax_reported():
    a = EmpiricalMeasure([[0.0, 0.0]])
    b = EmpiricalMeasure([[1.0, 0.0]])
    d, k = bl_metric_estimate(a, b, 8, return_argmax=True)
    assert k == 0 and d == pytest.approx(1.0)


# -- thresholds ------------------------------------------------------------------------------


@pytest.mark.parametrize("alpha,c1,c2", [(1.0, 0.04, 0.0), (1.0, 0.02, 0.01), (2.5, 0.0, 0.05)])
def test_thresholds_against_mpmath(alpha, c1, c2):
    th = example_thresholds(alpha, c1, c2)
    bound, g, bmax = mp_thresholds(alpha, c1, c2)
    assert th.delay_bound == pytest.approx(bound, rel=1e-14)
    assert th.gamma == pytest.approx(g, rel=1e-13)
    assert th.beta_max == pytest.approx(bmax, rel=1e-13)


def test_thresholds_frozen_example():
    th = example_thresholds(1.0, 0.04, 0.0)
    assert th.delay_bound == pytest.approx(0.080262, abs=1e-6)
    assert th.gamma == pytest.approx(GAMMA, abs=1e-6)
    assert th.beta_max == pytest.approx(0.115313, abs=1e-6)
    assert th.kappa_literal == pytest.approx(math.pi / 6)
    assert th.kappa_direct == pytest.approx(math.pi ** 2 / (2 + 2 * math.pi))
    assert th.kappa_literal != pytest.approx(th.kappa_direct)


def test_thresholds_absent_without_delay():
    th = example_thresholds(1.0, 0.0, 0.0)
    assert th.gamma is None and th.beta_max is None and "c1 = c2 = 0" in th.reason


def test_thresholds_absent_above_bound():
    th = example_thresholds(1.0, 0.1, 0.0)
    assert th.gamma is None and th.reason


def test_thresholds_reject_nonpositive_alpha():
    with pytest.raises(PreconditionError):
        example_thresholds(0.0, 0.01, 0.0)


# -- Cauchy diagnostic -----------------------------------------------------------------------------


def test_cauchy_zero_noise_geometric_decay():
    op = build_reduction(SpectralOperator.dirichlet_laplacian_1d(2), DampingSpec.scalar(-2.0))
    tab = cauchy_diagnostic(op, DelayKernel.zero(4), DiffusionSpec.zero(4), NoiseSpec([1.0]),
                            standing_wave_init(op.A, 1.0), (1.0, 2.0, 3.0, 4.0), 1.0, 1 / 32, 0,
                            n_paths=3, dictionary_size=16)
    d = tab.d_hat()
    assert tab.strictly_decreasing()
    # tail ratio close to e^{-1} for spectral abscissa -1
    assert 0.3 <= d[-1] / d[-2] <= 0.45
    np.testing.assert_array_equal(tab.contraction, 0.0)
    assert [r[0] for r in tab.rows] == [1.0, 2.0, 3.0, 4.0]


def test_cauchy_warns_when_condition_fails():
    op = build_reduction(SpectralOperator.dirichlet_laplacian_1d(1), DampingSpec.scalar(-2.0))
    bad = sufficient_condition_wiener(1.0, GAMMA, 1.0, 1.0, 1.0, 1.0)
    tab = cauchy_diagnostic(op, DelayKernel.zero(2), DiffusionSpec.zero(2), NoiseSpec([1.0]),
                            standing_wave_init(op.A, 1.0), (1.0,), 1.0, 1 / 16, 0, n_paths=2,
                            dictionary_size=4, verdict=bad)
    assert "does not hold" in tab.warning
    assert len(tab.rows) == 1


def test_cauchy_uniqueness_rows_with_alt_init():
    op = build_reduction(SpectralOperator.dirichlet_laplacian_1d(2), DampingSpec.scalar(-2.0))
    tab = cauchy_diagnostic(op, DelayKernel.zero(4), DiffusionSpec.zero(4), NoiseSpec([1.0]),
                            standing_wave_init(op.A, 1.0), (2.0, 6.0), 1.0, 1 / 32, 0, n_paths=2,
                            dictionary_size=8, alt_init=standing_wave_init(op.A, -1.0, mode=2))
    assert len(tab.uniqueness) == 2
    assert tab.uniqueness[1][1] < tab.uniqueness[0][1]
    assert tab.contraction_rate == pytest.approx(2.0, abs=0.3)
