from delaywave.noise import FixedNormJumps, JumpSpec, NoiseSpec, ParetoJumps
from delaywave.presets import damped_delay_wave, standing_wave_init
from delaywave.stationarity import (cauchy_diagnostic, example_thresholds, levy_additive_condition,
                                    sufficient_condition_levy, sufficient_condition_wiener)

th = example_thresholds(1.0, 0.04, 0.0)
g = th.gamma

# Wiener noise: 2 gamma against 3 M^2 (alpha1 + alpha2 e^{2 gamma r} kappa).
for beta in (0.1, 1.0):
    v = sufficient_condition_wiener(1.0, g, beta ** 2, beta ** 2, 1.0, 1.0)
    print(f"beta={beta}: lhs={v.condition_lhs:.4f} rhs={v.condition_rhs:.4f} holds={v.holds}")

# Jumps of norm 0.5 at rate 2 contribute int ||z||^2 nu = 0.5.
jumps = NoiseSpec.pure_jump(8, JumpSpec(2.0, FixedNormJumps(0.5)))
for ns in (jumps, jumps.with_scaled_jumps(10)):
    v = sufficient_condition_levy(1.0, g, 0.01, 0.01, 1.0, 1.0, ns.trace_q, ns.second_moment_nu)
    print(f"second moment {ns.second_moment_nu:g}: rhs={v.condition_rhs:.4f} holds={v.holds}")

# Heavy tails: only the first tail moment matters for additive noise.
for a in (0.9, 1.0, 1.5):
    ns = NoiseSpec.pure_jump(8, JumpSpec(1.0, ParetoJumps(a, 0.1)))
    print(f"Pareto tail {a}: holds={levy_additive_condition(ns, 1.0, g).holds}")

# Empirical side: distances between laws at t and t + s, each from its own paths.
# Small sizes here; the acceptance suite runs 400 paths to t = 50.
sc = damped_delay_wave(1.0, 0.04, 0.0, 0.1, 8)
tab = cauchy_diagnostic(sc.op, sc.F, sc.diffusion, sc.noise, standing_wave_init(sc.A, 1.0),
                        (2.0, 4.0, 8.0), 2.0, 1 / 64, 3, n_paths=100, dictionary_size=64,
                        alt_init=standing_wave_init(sc.A, -1.0, mode=2))
for t, s, d in tab.rows:
    print(f"d_hat(t={t:g}, t+{s:g}) = {d:.4f}")
for t, d in tab.uniqueness:
    print(f"two starts at t={t:g}: {d:.4f}")
