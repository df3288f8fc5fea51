import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delaywave.exceptions import PreconditionError
from delaywave.noise import (FixedNormJumps, GaussianJumps, JumpSpec, NoiseSpec, ParetoJumps, levy_increment,
                             random_directions)
from delaywave.sde import path_generators


def pareto_pdf(a, xm):
    return lambda x: a * xm ** a / x ** (a + 1)


def mp_moment(k, a, xm, lo):
    # x = lo / s^10 maps [lo, inf) onto (0, 1] and tames the endpoint power law
    with mpmath.workdps(40):
        a, xm, lo = mpmath.mpf(a), mpmath.mpf(xm), mpmath.mpf(lo)
        pdf = pareto_pdf(a, xm)
        f = lambda s: (lo / s ** 10) ** k * pdf(lo / s ** 10) * 10 * lo / s ** 11
        return float(mpmath.quad(f, [0, 1]))


def mp_tail(a, xm):
    return mp_moment(1, a, xm, max(1.0, xm))


def mp_second(a, xm):
    return mp_moment(2, a, xm, xm)


# -- jump laws ------------------------------------------------------------------


@pytest.mark.parametrize("a,xm", [(1.5, 0.1), (2.5, 0.3), (3.0, 1.0), (1.2, 2.0), (4.0, 0.05)])
def test_pareto_tail_moment_against_quadrature(a, xm):
    assert ParetoJumps(a, xm).first_tail_moment() == pytest.approx(mp_tail(a, xm), rel=1e-10)


@pytest.mark.parametrize("a,xm", [(2.5, 0.3), (3.0, 1.0), (6.0, 0.5)])
def test_pareto_second_moment_against_quadrature(a, xm):
    assert ParetoJumps(a, xm).second_moment() == pytest.approx(mp_second(a, xm), rel=1e-10)


@pytest.mark.parametrize("a", [0.5, 1.0, 1.5, 2.0])
def test_pareto_infinite_moments(a):
    p = ParetoJumps(a, 0.5)
    assert math.isinf(p.second_moment())
    assert math.isinf(p.first_tail_moment()) == (a <= 1)


def test_pareto_rejects_bad_parameters():
    with pytest.raises(ValueError):
        ParetoJumps(0.0, 1.0)
    with pytest.raises(ValueError):
        ParetoJumps(1.5, -1.0)


def test_pareto_sample_tail_frequency():
    p = ParetoJumps(1.5, 0.1)
    z = p.sample_norms(np.random.default_rng(3), 200_000)
    assert z.min() >= 0.1
    emp = np.mean(z > 1.0)
    assert emp == pytest.approx(0.1 ** 1.5, abs=4 * math.sqrt(0.1 ** 1.5 / 200_000))


@pytest.mark.parametrize("norm,tail", [(0.5, 0.0), (1.0, 0.0), (1.5, 1.5)])
def test_fixed_norm_moments(norm, tail):
    law = FixedNormJumps(norm)
    assert law.second_moment() == norm ** 2
    assert law.first_tail_moment() == tail
    z = law.sample(np.random.default_rng(0), 50, 4)
    np.testing.assert_allclose(np.linalg.norm(z, axis=1), norm)


def test_fixed_direction_mean():
    law = FixedNormJumps(0.5, (3.0, 4.0))
    np.testing.assert_allclose(law.mean(2), [0.3, 0.4])
    np.testing.assert_allclose(law.small_jump_mean(2), [0.3, 0.4])
    assert np.all(FixedNormJumps(2.0, (1.0, 0.0)).small_jump_mean(2) == 0)


def test_gaussian_jump_second_moment():
    law = GaussianJumps(0.3)
    z = law.sample(np.random.default_rng(1), 100_000, 3)
    assert np.mean(np.sum(z ** 2, axis=1)) == pytest.approx(law.second_moment(3), rel=0.02)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2 ** 32 - 1))
def test_random_directions_unit(dim, seed):
    v = random_directions(np.random.default_rng(seed), 20, dim)
    np.testing.assert_allclose(np.linalg.norm(v, axis=1), 1.0)


# -- validation -----------------------------------------------------------------------


def test_rate_must_be_positive():
    with pytest.raises(ValueError):
        JumpSpec(0.0, FixedNormJumps(0.5))
    with pytest.raises(ValueError):
        JumpSpec(-1.0, FixedNormJumps(0.5))


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec([-1.0])
    with pytest.raises(ValueError):
        NoiseSpec([])
    with pytest.raises(ValueError):
        NoiseSpec([1.0], compensation="partial")
    with pytest.raises(ValueError):
        NoiseSpec([1.0], infinite_activity=True)


def test_levy_measure_integrals():
    ns = NoiseSpec.pure_jump(8, JumpSpec(2.0, FixedNormJumps(0.5)))
    assert ns.second_moment_nu == pytest.approx(0.5)
    assert ns.first_tail_nu == 0.0
    assert ns.trace_q == 0.0 and not ns.has_gaussian
    heavy = NoiseSpec.pure_jump(8, JumpSpec(1.0, ParetoJumps(1.5, 0.1)))
    assert not heavy.second_moment_finite and heavy.first_tail_finite


def test_default_profile():
    ns = NoiseSpec.default_profile(4, 2.0)
    np.testing.assert_allclose(ns.wiener_variances, [2.0, 0.5, 2 / 9, 0.125])


def test_scaled_jumps():
    ns = NoiseSpec.pure_jump(8, JumpSpec(2.0, FixedNormJumps(0.5)))
    assert ns.with_scaled_jumps(10).second_moment_nu == pytest.approx(50.0)


# -- increments -------------------------------------------------------------------------


def test_jump_count_mean():
    ns = NoiseSpec.pure_jump(2, JumpSpec(3.0, FixedNormJumps(0.5)))
    rng = np.random.default_rng(11)
    h = 0.1
    counts = np.array([levy_increment(ns, h, rng).count for _ in range(100_000)])
    assert counts.mean() == pytest.approx(0.3, abs=4 * math.sqrt(0.3 / 100_000))


def test_jump_times_inside_step():
    ns = NoiseSpec.pure_jump(2, JumpSpec(50.0, FixedNormJumps(0.5)))
    inc = levy_increment(ns, 0.2, np.random.default_rng(2))
    assert inc.count > 0
    assert np.all((inc.jump_times >= 0) & (inc.jump_times < 0.2))
    assert np.all(np.diff(inc.jump_times) >= 0)


def test_full_compensation_centres_increments():
    ns = NoiseSpec.pure_jump(2, JumpSpec(4.0, FixedNormJumps(0.5, (1.0, 0.0))), compensation="full")
    np.testing.assert_allclose(ns.drift_per_time(), [-2.0, 0.0])
    rng = np.random.default_rng(5)
    tot = np.array([levy_increment(ns, 0.05, rng).total for _ in range(40_000)])
    se = math.sqrt(4.0 * 0.05 * 0.25 / 40_000)
    assert abs(tot[:, 0].mean()) <= 4 * se


def test_small_compensation_ignores_large_jumps():
    ns = NoiseSpec.pure_jump(2, JumpSpec(4.0, FixedNormJumps(2.0, (1.0, 0.0))), compensation="small")
    np.testing.assert_array_equal(ns.drift_per_time(), 0.0)


def test_wiener_increment_variance():
    ns = NoiseSpec([1.0, 0.25])
    rng = np.random.default_rng(9)
    g = np.array([levy_increment(ns, 0.01, rng).gaussian for _ in range(50_000)])
    np.testing.assert_allclose(g.var(axis=0), [0.01, 0.0025], rtol=0.03)


def test_increment_rejects_bad_step():
    with pytest.raises(PreconditionError):
        levy_increment(NoiseSpec([1.0]), 0.0, np.random.default_rng(0))


def test_seed_reproducibility():
    ns = NoiseSpec([1.0], JumpSpec(5.0, ParetoJumps(1.5, 0.1)))
    a = levy_increment(ns, 0.5, np.random.default_rng(42))
    b = levy_increment(ns, 0.5, np.random.default_rng(42))
    np.testing.assert_array_equal(a.total, b.total)
    np.testing.assert_array_equal(a.jump_times, b.jump_times)


def test_path_generators_independent_of_block_size():
    g1 = path_generators(7, 0, 3)
    g2 = path_generators(7, 0, 3)
    g3 = path_generators(7, 1, 3)
    x1 = [g.random(4) for g in g1]
    x2 = [g.random(4) for g in g2]
    x3 = [g.random(4) for g in g3]
    for a, b, c in zip(x1, x2, x3):
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
