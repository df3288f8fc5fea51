"""Desk-scale verification suite: one function per acceptance check.

Every check returns a :class:`CheckRow` ``(name, measured, bound, passed,
detail)``.  ``scale="full"`` runs the documented sizes; ``scale="quick"``
shrinks sample counts for smoke runs of the command-line ``verify``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from decimal import Decimal, getcontext

import numpy as np

from .delay import DelayKernel, assemble_delay, delay_semigroup_decay, derivative_galerkin_matrix, \
    green_operator, stability_criterion
from .noise import FixedNormJumps, JumpSpec, NoiseSpec, ParetoJumps
from .operators import DampingSpec, SpectralOperator, build_reduction, inverse_block, semigroup_norm
from .presets import damped_delay_wave, standing_wave_init
from .sde import order_check, simulate_paths, velocity_noise_matrix
from .spectral import (decay_envelope, gamma_bounds, growth_bound_estimate, growth_bound_from_operator_norms,
                       lyapunov_residual, lyapunov_solution, proposition_growth_bound, resolvent_bound_imag_axis,
                       resolvent_norm, spectral_bound_scalar_damping, uniform_resolvent_bound)
from .stationarity import (cauchy_diagnostic, example_thresholds, levy_additive_condition,
                           sufficient_condition_levy, sufficient_condition_wiener)
from .exceptions import WrongTheoremError

__all__ = ["CheckRow", "CHECKS", "run_checks", "high_precision_thresholds"]


@dataclass(frozen=True)
class CheckRow:
    name: str
    measured: float
    bound: float
    passed: bool
    detail: str = ""

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: measured={self.measured:.6g} bound={self.bound:.6g} {self.detail}".rstrip()


def _q(scale, full, quick):
    return full if scale == "full" else quick


def check_spectral_formula(scale="full", seed=1):
    """Closed-form spectral bound vs per-mode companion eigenvalues."""
    rng = np.random.default_rng(seed)
    n_inst = _q(scale, 1000, 100)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(n_inst):
        beta = -10.0 * rng.random()
        n = int(rng.integers(1, 65))
        lam = np.sort(rng.uniform(0.05, 60.0, n))
        formula = spectral_bound_scalar_damping(beta, -lam[0])
        comp = np.zeros((n, 2, 2))
        comp[:, 0, 1] = 1.0
        comp[:, 1, 0] = -lam
        comp[:, 1, 1] = beta
        oracle = np.linalg.eigvals(comp).real.max()
        worst = max(worst, abs(formula - oracle))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 5.0
    return CheckRow("spectral_formula", worst, 1e-10, ok, f"instances={n_inst} runtime={elapsed:.2f}s")


def check_lyapunov_residual(scale="full", seed=2, perturb=False):
    rng = np.random.default_rng(seed)
    n_inst, n_vec = _q(scale, 100, 20), 100
    worst = 0.0
    for _ in range(n_inst):
        alpha = rng.uniform(0.1, 10.0)
        n = int(rng.integers(1, 33))
        A = SpectralOperator(np.sort(rng.uniform(0.1, 1e3, n)))
        op = build_reduction(A, DampingSpec.scalar(-alpha))
        P = lyapunov_solution(alpha, A)
        if perturb:
            P = P.perturbed(delta=0.1)
        for y in rng.standard_normal((n_vec, 2 * n)):
            worst = max(worst, lyapunov_residual(P, op, y))
    return CheckRow("lyapunov_residual", worst, 1e-10, worst <= 1e-10,
                    f"instances={n_inst} vectors={n_inst * n_vec}" + (" (fault injected)" if perturb else ""))


def check_rayleigh_envelope(scale="full", seed=3):
    alpha, n = 2.0, 32
    A = SpectralOperator.dirichlet_laplacian_1d(n)
    P = lyapunov_solution(alpha, A)
    gm, gp = gamma_bounds(alpha, A.omega_s)
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((2 * n, _q(scale, 10_000, 2000)))
    rq = P.rayleigh(Y)
    inside = bool(np.all(rq >= gm - 1e-12) and np.all(rq <= gp + 1e-12))
    # directed probes: power iterations for the extreme eigenvectors
    Pm = P.matrix
    lo, hi = [], []
    for s in range(4):
        v = rng.standard_normal(2 * n)
        w = v.copy()
        for _ in range(300):
            v = Pm @ v
            v /= np.linalg.norm(v)
            w = gp * w - Pm @ w
            w /= np.linalg.norm(w)
        hi.append(P.rayleigh(v))
        lo.append(P.rayleigh(w))
    obs_min = min(rq.min(), min(lo))
    obs_max = max(rq.max(), max(hi))
    close = abs(obs_min - gm) <= 0.05 * gm and abs(obs_max - gp) <= 0.05 * gp
    in_probe = obs_min >= gm - 1e-12 and obs_max <= gp + 1e-12
    rel = max(abs(obs_min - gm) / gm, abs(obs_max - gp) / gp)
    return CheckRow("rayleigh_envelope", rel, 0.05, bool(inside and close and in_probe),
                    f"gamma-={gm:.4f} gamma+={gp:.4f} observed=[{obs_min:.4f}, {obs_max:.4f}]")


def check_decay_envelope(scale="full"):
    alpha, n = 2.0, 32
    A = SpectralOperator.dirichlet_laplacian_1d(n)
    op = build_reduction(A, DampingSpec.scalar(-alpha))
    M, mu = decay_envelope(*gamma_bounds(alpha, A.omega_s))
    t = np.linspace(0.0, 50.0, _q(scale, 5001, 501))
    excess = float(np.max(semigroup_norm(op, t) - M * np.exp(-mu * t)))
    return CheckRow("decay_envelope", excess, 1e-9, excess <= 1e-9, f"M={M:.4f} mu={mu:.4f}")


def check_resolvent_bounds(scale="full"):
    t0 = time.perf_counter()
    A = SpectralOperator.dirichlet_laplacian_1d(32)
    op = build_reduction(A, DampingSpec.scalar(-2.0))
    b = np.linspace(-100.0, 100.0, _q(scale, 10_000, 2000))
    exact = resolvent_norm(op, 1j * b)
    inv = inverse_block(op).norm()
    worst = -np.inf
    for c in (0.25, 0.5, 0.75):
        rb = resolvent_bound_imag_axis(op.alpha, op.gamma, inv, c)
        worst = max(worst, float(np.max(exact - rb(b))))
    const = uniform_resolvent_bound(op.alpha, op.gamma, 1.0 / inv)
    worst = max(worst, float(np.max(exact - const)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 0 and elapsed < 10.0
    return CheckRow("resolvent_bounds", float(exact.max()), const, ok,
                    f"max(exact - bound)={worst:.4g} runtime={elapsed:.2f}s")


def random_dissipative_diagonal(rng, n_max=24):
    n = int(rng.integers(1, n_max + 1))
    lam = np.sort(rng.uniform(0.2, 400.0, n))
    re = -rng.uniform(0.05, 6.0, n)
    if rng.random() < 0.5:
        im = rng.uniform(-3.0, 3.0, n) * (-re)
        b = re + 1j * im
    else:
        b = re
    return SpectralOperator(lam), DampingSpec.diagonal(b)


def check_growth_certificates(scale="full", seed=6):
    rng = np.random.default_rng(seed)
    n_inst = _q(scale, 100, 30)
    violations = 0
    worst = -np.inf
    for _ in range(n_inst):
        A, B = random_dissipative_diagonal(rng)
        op = build_reduction(A, B)
        exact = op.spectral_abscissa()
        alpha, gamma = op.alpha, op.gamma
        ests = [proposition_growth_bound(op),
                growth_bound_estimate(alpha, gamma, inverse_block(op).norm()),
                growth_bound_from_operator_norms(A, B, alpha, gamma)]
        for e in ests:
            worst = max(worst, exact - e)
            if e < exact - 1e-12:
                violations += 1
    return CheckRow("growth_certificates", violations, 0, violations == 0,
                    f"instances={n_inst} max(exact - estimate)={worst:.3g}")


def _smallest_certified_a(op, F, tol=0.02):
    """Leftmost ``a`` on a bisection where the delay criterion holds (``None`` if only at 0)."""
    lo = op.spectral_abscissa() + 1e-6
    hi = 0.0
    if not stability_criterion(hi, F, op).holds:
        return None
    if stability_criterion(lo, F, op).holds:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if stability_criterion(mid, F, op).holds:
            hi = mid
        else:
            lo = mid
    return hi if hi < 0 else None


def check_delay_decay(scale="full", seed=7):
    rng = np.random.default_rng(seed)
    n_inst = _q(scale, 20, 4)
    n, h, T = 16, 1.0 / 128, 20.0
    A = SpectralOperator.dirichlet_laplacian_1d(n)
    D = derivative_galerkin_matrix(n)
    worst = np.inf
    mos_time = 0.0
    used = 0
    while used < n_inst:
        alpha = rng.uniform(0.3, 1.5)
        c1, c2 = rng.uniform(0, 0.15), rng.uniform(0, 0.15) * (rng.random() < 0.5)
        op = build_reduction(A, DampingSpec.scalar(-2 * alpha))
        F = assemble_delay(A, M=DelayKernel(1.0, ((-1.0, c1 * D),), (), "M"),
                           N=DelayKernel(1.0, ((-1.0, c2 * np.eye(n)),), (), "N"))
        a = _smallest_certified_a(op, F)
        if a is None:
            continue
        t0 = time.perf_counter()
        G = green_operator(op, F, T, h)
        mos_time += time.perf_counter() - t0
        fit = delay_semigroup_decay(G)
        worst = min(worst, fit.gamma - (abs(a) - 0.05))
        used += 1
    ok = worst >= 0 and mos_time < 60.0
    return CheckRow("delay_decay", worst, 0.0, ok,
                    f"instances={used} min(fitted - (|a| - 0.05))={worst:.4f} method-of-steps={mos_time:.1f}s")


def check_sde_order(scale="full", seed=8):
    n = 4
    sc = damped_delay_wave(alpha=1.0, c1=0.04, c2=0.0, beta=0.0, n_modes=n)
    noise = NoiseSpec.default_profile(n)
    L = velocity_noise_matrix(n)
    init = standing_wave_init(sc.A, 0.5)
    res = order_check(sc.op, sc.F, L, noise, init, 2.0, 1.0 / 256, seed, _q(scale, 100, 30))
    ok = 1.7 <= res.ratio <= 2.3
    return CheckRow("sde_order", res.ratio, 2.0, ok,
                    f"deviation h={res.coarse:.4g} h/2={res.fine:.4g} accepted=[1.7, 2.3]")


def check_contraction(scale="full", seed=9):
    th = example_thresholds(1.0, 0.04, 0.0)
    beta = 0.1
    sc = damped_delay_wave(1.0, 0.04, 0.0, beta, 16)
    ia = standing_wave_init(sc.A, 1.0)
    ib = standing_wave_init(sc.A, -1.0, mode=2)
    t0 = time.perf_counter()
    res = simulate_paths(sc.op, sc.F, sc.diffusion, sc.noise, ia, 40.0, 1.0 / 128, seed,
                         _q(scale, 2000, 200), coupled_init=ib, record_stride=16)
    elapsed = time.perf_counter() - t0
    t, v = res.times, res.diff_sq
    sel = t >= t[-1] / 2
    rate = -float(np.polyfit(t[sel], np.log(v[sel]), 1)[0])
    sup = res.running_sup()
    n = sup.size
    q, hlf = sup[int(0.75 * n):].mean(), sup[int(0.5 * n):].mean()
    stable = abs(q - hlf) <= 0.1 * abs(hlf)
    ok = bool(rate > 0 and stable and beta < th.beta_max and elapsed < 600)
    return CheckRow("contraction", rate, 0.0, ok,
                    f"beta={beta} < beta_max={th.beta_max:.4f} moment last-quarter={q:.4g} "
                    f"last-half={hlf:.4g} runtime={elapsed:.1f}s")


def check_stationarity(scale="full", seeds=(10, 11)):
    sc = damped_delay_wave(1.0, 0.04, 0.0, 0.1, 16)
    ia = standing_wave_init(sc.A, 1.0)
    ib = standing_wave_init(sc.A, -1.0, mode=2)
    monotone = []
    finals = []
    tables = []
    for s in seeds:
        tab = cauchy_diagnostic(sc.op, sc.F, sc.diffusion, sc.noise, ia, (10.0, 20.0, 40.0), 10.0,
                                1.0 / 128, s, _q(scale, 400, 100), 256, alt_init=ib)
        monotone.append(tab.strictly_decreasing())
        finals.append(tab.uniqueness[-1][1])
        tables.append(tab.d_hat())
    worst_final = max(finals)
    ok = all(monotone) and worst_final < 0.05
    detail = "; ".join("d_hat=" + ",".join(f"{x:.3g}" for x in d) for d in tables)
    return CheckRow("stationarity_diagnostic", worst_final, 0.05, ok,
                    f"monotone={monotone} {detail}")


def high_precision_thresholds(alpha, c1, c2, digits=50):
    """Threshold constants in ``decimal`` arithmetic (pi by Machin's formula)."""
    getcontext().prec = digits + 10

    def arctan_inv(x):
        x = Decimal(x)
        term = 1 / x
        total, k, x2 = term, 1, x * x
        while True:
            term /= -x2
            nxt = term / (2 * k + 1)
            if abs(nxt) < Decimal(10) ** (-(digits + 5)):
                break
            total += nxt
            k += 1
        return total

    pi = 4 * (4 * arctan_inv(5) - arctan_inv(239))
    a = Decimal(repr(alpha))
    s = abs(Decimal(repr(c1))) + abs(Decimal(repr(c2)))
    bound = a * pi / (36 * a + pi)
    gamma = (bound / s).ln()
    beta_max = Decimal(2) / 3 * gamma * (-2 * gamma).exp()
    return bound, gamma, beta_max


def check_thresholds(scale="full"):
    th = example_thresholds(1.0, 0.04, 0.0)
    ref = high_precision_thresholds(1.0, 0.04, 0.0)
    errs = [abs(Decimal(repr(v)) - r) for v, r in zip((th.delay_bound, th.gamma, th.beta_max), ref)]
    worst = float(max(errs))
    return CheckRow("thresholds", worst, 1e-12, worst <= 1e-12,
                    f"delay_bound={th.delay_bound:.6f} gamma={th.gamma:.6f} beta_max={th.beta_max:.6f}")


def check_levy_verdicts(scale="full"):
    th = example_thresholds(1.0, 0.04, 0.0)
    g, b2 = th.gamma, 0.1 ** 2
    outcomes = []
    # finite second moment: no jumps, Wiener shape scaled by Tr Q
    v0 = sufficient_condition_levy(1.0, g, b2, b2, 1.0, 1.0, 1.0, 0.0)
    w0 = sufficient_condition_wiener(1.0, g, b2, b2, 1.0, 1.0)
    outcomes.append(v0.holds and abs(v0.condition_rhs - w0.condition_rhs) < 1e-15)
    jumps = NoiseSpec.pure_jump(1, JumpSpec(2.0, FixedNormJumps(0.5)))
    outcomes.append(abs(jumps.second_moment_nu - 0.5) < 1e-15)
    v1 = sufficient_condition_levy(1.0, g, b2, b2, 1.0, 1.0, jumps.trace_q, jumps.second_moment_nu)
    outcomes.append(v1.holds)
    big = jumps.with_scaled_jumps(10.0)
    v2 = sufficient_condition_levy(1.0, g, b2, b2, 1.0, 1.0, big.trace_q, big.second_moment_nu)
    outcomes.append(not v2.holds)
    # additive theorem: tail moments
    bounded = NoiseSpec.pure_jump(3, JumpSpec(1.0, FixedNormJumps(0.8)))
    outcomes.append(levy_additive_condition(bounded).holds and bounded.first_tail_nu == 0.0)
    outcomes.append(levy_additive_condition(NoiseSpec.pure_jump(3, JumpSpec(1.0, ParetoJumps(1.5)))).holds)
    outcomes.append(not levy_additive_condition(NoiseSpec.pure_jump(3, JumpSpec(1.0, ParetoJumps(0.9)))).holds)
    outcomes.append(not levy_additive_condition(NoiseSpec.pure_jump(3, JumpSpec(1.0, ParetoJumps(1.0)))).holds)
    outcomes.append(levy_additive_condition(NoiseSpec.pure_jump(3, JumpSpec(1.0, ParetoJumps(1.0001)))).holds)
    try:
        levy_additive_condition(NoiseSpec(np.ones(3), JumpSpec(1.0, ParetoJumps(1.5))))
        outcomes.append(False)
    except WrongTheoremError:
        outcomes.append(True)
    n_ok = sum(bool(o) for o in outcomes)
    return CheckRow("levy_verdicts", n_ok, len(outcomes), n_ok == len(outcomes),
                    f"rhs jumps={v1.condition_rhs:.4f} scaled={v2.condition_rhs:.4f} lhs={v1.condition_lhs:.4f}")


CHECKS = (
    ("spectral_formula", check_spectral_formula),
    ("lyapunov_residual", check_lyapunov_residual),
    ("rayleigh_envelope", check_rayleigh_envelope),
    ("decay_envelope", check_decay_envelope),
    ("resolvent_bounds", check_resolvent_bounds),
    ("growth_certificates", check_growth_certificates),
    ("delay_decay", check_delay_decay),
    ("sde_order", check_sde_order),
    ("contraction", check_contraction),
    ("stationarity_diagnostic", check_stationarity),
    ("thresholds", check_thresholds),
    ("levy_verdicts", check_levy_verdicts),
)


def run_checks(scale="full", fault=None, only=None):
    rows = []
    for name, fn in CHECKS:
        if only is not None and name not in only:
            continue
        if name == "lyapunov_residual" and fault == "lyapunov":
            rows.append(fn(scale, perturb=True))
        else:
            rows.append(fn(scale))
    return rows
