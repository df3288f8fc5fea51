"""Built-in scenarios, chiefly the damped delay wave equation on ``(0, 1)``.

    u_tt = u_xixi - 2 alpha u_t + c1 u_xi(t - 1) + c2 u_t(t - 1)
           + beta u(t - 1) / (1 + |u(t)|) dw/dt

with Dirichlet conditions and a scalar Wiener process ``w``.  The
damping is ``B = -2 alpha I``, so ``alpha`` is also the strict-dissipativity
constant of ``B``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .delay import DelayKernel, assemble_delay, derivative_galerkin_matrix
from .noise import NoiseSpec
from .operators import BlockOperator, DampingSpec, SpectralOperator, build_reduction, to_energy_coordinates
from .sde import DiffusionSpec

__all__ = ["Scenario", "damped_delay_wave", "standing_wave_init", "constant_history"]


@dataclass(frozen=True)
class Scenario:
    A: SpectralOperator
    B: DampingSpec
    op: BlockOperator
    F: DelayKernel
    diffusion: DiffusionSpec
    noise: NoiseSpec
    params: dict


def damped_delay_wave(alpha=1.0, c1=0.04, c2=0.0, beta=0.1, n_modes=16, delay=1.0, n_grid=None):
    A = SpectralOperator.dirichlet_laplacian_1d(n_modes)
    B = DampingSpec.scalar(-2.0 * alpha)
    op = build_reduction(A, B)
    D = derivative_galerkin_matrix(n_modes)
    eta = DelayKernel(delay, ((-delay, c1 * D),), (), "M")
    zeta = DelayKernel(delay, ((-delay, c2 * np.eye(n_modes)),), (), "N")
    F = assemble_delay(A, M=eta, N=zeta)
    diffusion = DiffusionSpec.delay_wave(A, beta, delay, n_grid)
    noise = NoiseSpec([1.0])
    params = dict(alpha=alpha, c1=c1, c2=c2, beta=beta, n_modes=n_modes, delay=delay)
    return Scenario(A, B, op, F, diffusion, noise, params)


def constant_history(phi0):
    phi0 = np.asarray(phi0, dtype=float)
    return lambda t: phi0


def standing_wave_init(A, amplitude=1.0, mode=1, velocity=0.0):
    """``u = amplitude e_mode``, ``u' = velocity e_mode``, frozen over the history."""
    n = A.n_modes
    u = np.zeros(n)
    v = np.zeros(n)
    u[mode - 1] = amplitude
    v[mode - 1] = velocity
    phi0 = to_energy_coordinates(A, u, v)
    return phi0, constant_history(phi0)
