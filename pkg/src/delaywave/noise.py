"""Driving noise: trace-class Wiener part plus an optional compound-Poisson part.

The Levy measure of the jump part is ``nu = rate * law``.  Jumps with
``||z|| <= 1`` are "small" and ``||z|| > 1`` "large", matching the cutoff
of the Levy-Ito decomposition.  Only finite-activity (compound Poisson)
jump parts are simulated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import PreconditionError

__all__ = [
    "FixedNormJumps",
    "GaussianJumps",
    "ParetoJumps",
    "JumpSpec",
    "NoiseSpec",
    "LevyIncrement",
    "levy_increment",
    "random_directions",
]

COMPENSATIONS = ("none", "small", "full")


def random_directions(rng, n, dim):
    v = rng.standard_normal((n, dim))
    nrm = np.linalg.norm(v, axis=1, keepdims=True)
    nrm[nrm == 0] = 1.0
    return v / nrm


@dataclass(frozen=True)
class FixedNormJumps:
    """Jumps of norm ``norm``; uniform direction, or a fixed unit ``direction``."""

    norm: float
    direction: tuple | None = None

    def sample(self, rng, n, dim):
        if self.direction is not None:
            d = np.asarray(self.direction, dtype=float)
            return np.tile(self.norm * d / np.linalg.norm(d), (n, 1))
        return self.norm * random_directions(rng, n, dim)

    def second_moment(self, dim=None):
        return self.norm ** 2

    def first_tail_moment(self, dim=None):
        return self.norm if self.norm > 1 else 0.0

    def mean(self, dim):
        if self.direction is None:
            return np.zeros(dim)
        d = np.asarray(self.direction, dtype=float)
        return self.norm * d / np.linalg.norm(d)

    def small_jump_mean(self, dim):
        return self.mean(dim) if self.norm <= 1 else np.zeros(dim)


@dataclass(frozen=True)
class GaussianJumps:
    """Centred Gaussian jumps with per-component standard deviation ``scale``."""

    scale: float

    def sample(self, rng, n, dim):
        return self.scale * rng.standard_normal((n, dim))

    def second_moment(self, dim):
        return dim * self.scale ** 2

    def first_tail_moment(self, dim, n_mc=200_000, seed=12345):
        # no closed form in general dimension; fixed-seed Monte Carlo
        z = np.linalg.norm(self.sample(np.random.default_rng(seed), n_mc, dim), axis=1)
        return float(np.mean(np.where(z > 1, z, 0.0)))

    def mean(self, dim):
        return np.zeros(dim)

    def small_jump_mean(self, dim):
        return np.zeros(dim)


@dataclass(frozen=True)
class ParetoJumps:
    """Uniform direction, norm with ``P(||z|| > x) = (x_m / x)^a`` for ``x >= x_m``."""

    tail_index: float
    scale: float = 1.0

    def __post_init__(self):
        if not (self.tail_index > 0 and self.scale > 0):
            raise ValueError("Pareto tail index and scale must be positive")

    def sample_norms(self, rng, n):
        return self.scale * (1.0 - rng.random(n)) ** (-1.0 / self.tail_index)

    def sample(self, rng, n, dim):
        return self.sample_norms(rng, n)[:, None] * random_directions(rng, n, dim)

    def second_moment(self, dim=None):
        a, xm = self.tail_index, self.scale
        return a * xm * xm / (a - 2) if a > 2 else math.inf

    def first_tail_moment(self, dim=None):
        """``E[||z||; ||z|| > 1]``."""
        a, xm = self.tail_index, self.scale
        if a <= 1:
            return math.inf
        if xm >= 1:
            return a * xm / (a - 1)
        return a * xm ** a / (a - 1)

    def mean(self, dim):
        return np.zeros(dim)

    def small_jump_mean(self, dim):
        return np.zeros(dim)


@dataclass(frozen=True)
class JumpSpec:
    rate: float
    law: object
    small_jump_truncation: float = 0.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("jump rate must be positive")
        if self.small_jump_truncation < 0:
            raise ValueError("small-jump truncation must be non-negative")


@dataclass(frozen=True)
class NoiseSpec:
    """Wiener variances ``q_j`` (diagonal ``Q``) plus an optional jump part."""

    wiener_variances: np.ndarray
    jump: JumpSpec | None = None
    compensation: str = "none"
    infinite_activity: bool = False

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.wiener_variances, dtype=float)).copy()
        if q.ndim != 1 or q.size == 0:
            raise ValueError("wiener_variances must be a non-empty 1-d sequence")
        if np.any(q < 0) or not np.all(np.isfinite(q)):
            raise ValueError("wiener variances must be finite and non-negative")
        if self.compensation not in COMPENSATIONS:
            raise ValueError(f"compensation must be one of {COMPENSATIONS}")
        if self.infinite_activity:
            raise ValueError("infinite-activity jump parts are not simulated; use a compound-Poisson law")
        q.setflags(write=False)
        object.__setattr__(self, "wiener_variances", q)

    @classmethod
    def wiener(cls, q):
        return cls(q)

    @classmethod
    def default_profile(cls, dim, q0=1.0):
        """``q_j = q0 / j^2``."""
        j = np.arange(1, dim + 1)
        return cls(q0 / j ** 2)

    @classmethod
    def pure_jump(cls, dim, jump, compensation="none"):
        return cls(np.zeros(dim), jump, compensation)

    @property
    def noise_dim(self):
        return self.wiener_variances.size

    @property
    def trace_q(self):
        return float(self.wiener_variances.sum())

    @property
    def has_gaussian(self):
        return bool(np.any(self.wiener_variances > 0))

    @property
    def second_moment_nu(self):
        """``int ||z||^2 nu(dz)``."""
        if self.jump is None:
            return 0.0
        return self.jump.rate * self.jump.law.second_moment(self.noise_dim)

    @property
    def first_tail_nu(self):
        """``int_{||z|| > 1} ||z|| nu(dz)``."""
        if self.jump is None:
            return 0.0
        return self.jump.rate * self.jump.law.first_tail_moment(self.noise_dim)

    @property
    def second_moment_finite(self):
        return math.isfinite(self.second_moment_nu)

    @property
    def first_tail_finite(self):
        return math.isfinite(self.first_tail_nu)

    def drift_per_time(self):
        """Compensator drift per unit time for the selected convention."""
        if self.jump is None or self.compensation == "none":
            return np.zeros(self.noise_dim)
        law = self.jump.law
        if self.compensation == "small":
            m = law.small_jump_mean(self.noise_dim)
        else:
            m = law.mean(self.noise_dim)
        return -self.jump.rate * np.asarray(m, dtype=float)

    def with_scaled_jumps(self, factor):
        if self.jump is None:
            return self
        law = self.jump.law
        if isinstance(law, FixedNormJumps):
            law = FixedNormJumps(law.norm * factor, law.direction)
        elif isinstance(law, GaussianJumps):
            law = GaussianJumps(law.scale * factor)
        elif isinstance(law, ParetoJumps):
            law = ParetoJumps(law.tail_index, law.scale * factor)
        return NoiseSpec(self.wiener_variances, JumpSpec(self.jump.rate, law, self.jump.small_jump_truncation),
                         self.compensation)


@dataclass(frozen=True)
class LevyIncrement:
    gaussian: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    drift: np.ndarray

    @property
    def total(self):
        return self.gaussian + self.jump_sizes.sum(axis=0) + self.drift

    @property
    def count(self):
        return self.jump_times.size


def levy_increment(noise, h, rng):
    """Increment of the driving process over a step of length ``h``.

    Gaussian part ``N(0, q_j h)`` per component; ``Poisson(rate h)`` jumps at
    uniform times in ``[0, h)``; compensator drift ``h * drift_per_time()``.
    """
    if not h > 0:
        raise PreconditionError("step must be positive")
    dim = noise.noise_dim
    g = np.sqrt(noise.wiener_variances * h) * rng.standard_normal(dim)
    if noise.jump is None:
        return LevyIncrement(g, np.zeros(0), np.zeros((0, dim)), np.zeros(dim))
    n = int(rng.poisson(noise.jump.rate * h))
    times = np.sort(rng.random(n) * h)
    sizes = noise.jump.law.sample(rng, n, dim)
    return LevyIncrement(g, times, sizes, h * noise.drift_per_time())
