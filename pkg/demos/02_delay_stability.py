import numpy as np

np.set_printoptions(precision=3)

from delaywave.delay import delay_semigroup_decay, green_operator, series_criterion, stability_criterion
from delaywave.presets import damped_delay_wave
from delaywave.stationarity import example_thresholds

# u_tt = u_xx - 2 alpha u_t + c1 u_x(t - 1) + c2 u_t(t - 1), noise switched off.
sc = damped_delay_wave(alpha=1.0, c1=0.04, c2=0.0, beta=0.0, n_modes=16)

# The memory term only uses the history one time unit back.
print("delay horizon", sc.F.horizon, "total variation", sc.F.total_variation())

# Frequency-domain test: sup ||F(a + ib)|| against inf 1/||R(a + ib)||.
# If it holds on the line Re z = a, solutions decay at least like e^{a t}.
for a in (0.0, -0.2, -0.4, -0.6):
    cr = stability_criterion(a, sc.F, sc.op)
    sr = series_criterion(a, sc.F, sc.op)
    print(f"a={a:+.1f} holds={cr.holds} lhs={cr.lhs:.4f} rhs={cr.rhs:.4f} q_a={sr.q_a:.4f}")

# Green operator by the method of steps, then a fitted decay rate.
G = green_operator(sc.op, sc.F, 20.0, 1 / 128)
fit = delay_semigroup_decay(G)
print(f"Green fit: M={fit.M:.3f} gamma={fit.gamma:.3f}")
print("||G(t)|| every 2 time units:", G.norms()[1][::256])

# For this example the decay rate and the noise threshold are explicit.
th = example_thresholds(1.0, 0.04, 0.0)
print(f"delay bound {th.delay_bound:.6f}, gamma {th.gamma:.6f}, beta_max {th.beta_max:.6f}")

# Two readings of the kappa constant disagree, so both are reported.
print("kappa", th.kappa_literal, th.kappa_direct)

# With no delay term the formula for gamma is undefined.
print(example_thresholds(1.0, 0.0, 0.0).reason)
