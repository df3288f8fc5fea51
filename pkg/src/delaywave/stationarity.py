"""Sufficient conditions for stationary distributions and empirical diagnostics.

The bounded-Lipschitz distance between laws on the segment space is not
computable; :func:`bl_metric_estimate` returns a lower bound ``d_hat`` from
a seeded dictionary of test functions that are 1-Lipschitz and bounded by 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import PreconditionError, WrongTheoremError
from .sde import paired_paths, simulate_paths

__all__ = [
    "EmpiricalMeasure",
    "StationarityVerdict",
    "sufficient_condition_wiener",
    "sufficient_condition_levy",
    "levy_additive_condition",
    "bl_metric_estimate",
    "CauchyTable",
    "cauchy_diagnostic",
    "Thresholds",
    "example_thresholds",
]


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniformly weighted segment samples ``[y, sqrt(w) y(-w), sqrt(w) y(-2w), ...]``.

    The history weight ``w`` is the spacing of the stored history samples,
    so Euclidean distances of rows approximate the segment-space norm.
    """

    samples: np.ndarray
    time_label: float = float("nan")
    quadrature_weight: float = float("nan")

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if s.shape[0] == 0:
            raise PreconditionError("empirical measure needs at least one sample")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def weights(self):
        n = self.samples.shape[0]
        return np.full(n, 1.0 / n)

    @property
    def dim(self):
        return self.samples.shape[1]

    @classmethod
    def from_ensemble(cls, result, t, copy=0):
        return cls(result.checkpoints[t][copy], t, result.h * result.segment_stride)

    def second_moment(self):
        return float(np.mean(np.sum(self.samples ** 2, axis=1)))


@dataclass(frozen=True)
class StationarityVerdict:
    """``holds`` iff ``condition_lhs > condition_rhs`` (strict)."""

    condition_lhs: float
    condition_rhs: float
    holds: bool
    theorem: str
    inputs: dict = field(default_factory=dict)
    source: str = "given"

    def row(self):
        return [self.theorem, self.condition_lhs, self.condition_rhs, self.holds, self.source]


def _check_constants(M, gamma, alpha1, alpha2, r, kappa_mass):
    if not M >= 1:
        raise PreconditionError("M must be >= 1")
    if not gamma > 0:
        raise PreconditionError("gamma must be positive")
    if alpha1 < 0 or alpha2 < 0 or kappa_mass < 0 or r < 0:
        raise PreconditionError("alpha1, alpha2, r and kappa mass must be non-negative")


def sufficient_condition_wiener(M, gamma, alpha1, alpha2, r, kappa_mass, source="given"):
    """``2 gamma > 3 M^2 (alpha1 + alpha2 e^{2 gamma r} kappa([-r, 0]))``."""
    _check_constants(M, gamma, alpha1, alpha2, r, kappa_mass)
    lhs = 2.0 * gamma
    rhs = 3.0 * M * M * (alpha1 + alpha2 * math.exp(2.0 * gamma * r) * kappa_mass)
    inputs = dict(M=M, gamma=gamma, alpha1=alpha1, alpha2=alpha2, r=r, kappa_mass=kappa_mass)
    return StationarityVerdict(lhs, rhs, bool(lhs > rhs), "wiener", inputs, source)


def sufficient_condition_levy(M, gamma, alpha1, alpha2, r, kappa_mass, trace_Q, second_moment_nu,
                              source="given"):
    """``2 gamma > 3 M^2 (Tr Q + int ||z||^2 nu) (alpha1 + alpha2 e^{2 gamma r} kappa)``.

    Needs a finite second moment of the Levy measure; otherwise the additive
    condition (:func:`levy_additive_condition`) is the applicable one.
    """
    _check_constants(M, gamma, alpha1, alpha2, r, kappa_mass)
    if not math.isfinite(second_moment_nu):
        raise WrongTheoremError(
            "Levy measure has infinite second moment; use levy_additive_condition (additive noise)")
    if trace_Q < 0 or second_moment_nu < 0:
        raise PreconditionError("trace and second moment must be non-negative")
    lhs = 2.0 * gamma
    rhs = 3.0 * M * M * (trace_Q + second_moment_nu) * (
        alpha1 + alpha2 * math.exp(2.0 * gamma * r) * kappa_mass)
    inputs = dict(M=M, gamma=gamma, alpha1=alpha1, alpha2=alpha2, r=r, kappa_mass=kappa_mass,
                  trace_Q=trace_Q, second_moment_nu=second_moment_nu)
    return StationarityVerdict(lhs, rhs, bool(lhs > rhs), "levy", inputs, source)


def levy_additive_condition(noise, M=None, gamma=None, source="given"):
    """Additive pure-jump noise: ``int_{||z|| > 1} ||z|| nu(dz) < inf`` plus exponential stability.

    The verdict compares ``lhs = 1/(1 + tail)`` (zero when the tail moment is
    infinite) against ``rhs = 0``.  If ``gamma`` is given it must be
    positive for the verdict to hold.
    """
    if noise.has_gaussian:
        raise WrongTheoremError("additive Levy condition assumes no Gaussian part (triple (0, 0, nu))")
    tail = noise.first_tail_nu
    finite = math.isfinite(tail)
    stable = True if gamma is None else bool(gamma > 0)
    lhs = 1.0 / (1.0 + tail) if finite else 0.0
    inputs = dict(first_tail_moment=tail, M=M, gamma=gamma)
    return StationarityVerdict(lhs, 0.0, bool(finite and stable and lhs > 0), "levy_additive", inputs, source)


# -- bounded-Lipschitz lower bound -----------------------------------------------

_CLIP = 1.0


def _clip(v):
    return np.clip(v, -_CLIP, _CLIP)


def _dictionary_row(k, seed, dim, pooled_proj_src, pooled_norms):
    """Functional ``k >= 1``: ``(kind, direction, offset)``; prefix-stable in ``k``."""
    rng = np.random.default_rng([int(seed), int(k)])
    level = rng.random()
    if k % 4 == 0:
        return "norm", None, float(np.quantile(pooled_norms, level))
    u = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    proj = pooled_proj_src @ u
    return "proj", u, float(np.quantile(proj, level))


def bl_metric_estimate(mu1, mu2, dictionary_size=256, seed=0, return_argmax=False):
    """Lower bound on ``sup_f |mu1(f) - mu2(f)|`` over 1-Lipschitz ``|f| <= 1``.

    Element 0 is ``clip(<u, x> - c)`` with ``u`` the unit mean-difference
    direction and ``c`` the midpoint projection; elements ``k >= 1`` are
    clipped random projections and clipped norms ``clip(||x|| - c)`` with
    offsets at seeded quantiles of the pooled sample.  Each element depends
    only on ``(seed, k)`` and the pooled sample, so the estimate is
    symmetric and nondecreasing in ``dictionary_size``.
    """
    x1, x2 = mu1.samples, mu2.samples
    if x1.shape[1] != x2.shape[1]:
        raise PreconditionError("empirical measures have different dimensions")
    if dictionary_size < 1:
        raise PreconditionError("dictionary needs at least one element")
    m1, m2 = x1.mean(axis=0), x2.mean(axis=0)
    diff = m1 - m2
    best, arg = 0.0, 0
    nd = np.linalg.norm(diff)
    if nd > 0:
        u = diff / nd
        c = float(u @ (m1 + m2) / 2)
        best = abs(float(_clip(x1 @ u - c).mean() - _clip(x2 @ u - c).mean()))
    pooled = np.concatenate([x1, x2])
    norms = np.linalg.norm(pooled, axis=1)
    n1 = np.linalg.norm(x1, axis=1)
    n2 = np.linalg.norm(x2, axis=1)
    for k in range(1, dictionary_size):
        kind, u, c = _dictionary_row(k, seed, x1.shape[1], pooled, norms)
        if kind == "norm":
            v = abs(float(_clip(n1 - c).mean() - _clip(n2 - c).mean()))
        else:
            v = abs(float(_clip(x1 @ u - c).mean() - _clip(x2 @ u - c).mean()))
        if v > best:
            best, arg = v, k
    best = min(best, 2.0)
    return (best, arg) if return_argmax else best


# -- Cauchy-in-law diagnostic ------------------------------------------------------


@dataclass
class CauchyTable:
    """Rows ``(t, s, d_hat)``, plus the two proxies of the stationarity lemma."""

    rows: list
    contraction_times: np.ndarray
    contraction: np.ndarray
    contraction_rate: float
    moment_times: np.ndarray
    moment_running_sup: np.ndarray
    uniqueness: list = field(default_factory=list)
    warning: str = ""

    def d_hat(self):
        return np.array([r[2] for r in self.rows])

    def strictly_decreasing(self):
        d = self.d_hat()
        return bool(np.all(np.diff(d) < 0))

    def moment_stabilized(self, tol=0.10):
        """Last-quarter mean of the running sup within ``tol`` of its last-half mean."""
        v = self.moment_running_sup
        n = v.size
        q = v[int(0.75 * n):].mean()
        hlf = v[int(0.5 * n):].mean()
        return bool(abs(q - hlf) <= tol * abs(hlf)), float(q), float(hlf)


def cauchy_diagnostic(op, F, diffusion, noise, init, checkpoints, s_offset, h, seed,
                      n_paths=500, dictionary_size=256, alt_init=None, verdict=None,
                      segment_stride=8, record_stride=16):
    """``d_hat(law_t, law_{t+s})`` for each checkpoint ``t`` from independent path blocks.

    Every distinct time gets its own block of paths (block index = position
    in the sorted time list), so no two laws share paths.  With
    ``alt_init`` the table also lists ``d_hat`` between the laws started
    from ``init`` and ``alt_init`` at each checkpoint (again from separate
    blocks).  The contraction proxy is the synchronous-coupling
    ``E||y(t, init) - y(t, alt)||^2`` and the moment proxy the running sup
    of ``E(||y||^2 + int ||y_t||^2)``.
    """
    warning = ""
    if verdict is not None and not verdict.holds:
        warning = "sufficient condition does not hold; diagnostic run anyway"
    checkpoints = sorted(float(t) for t in checkpoints)
    times = sorted(set(checkpoints) | {t + s_offset for t in checkpoints})
    laws = {}
    for b, t in enumerate(times):
        res = simulate_paths(op, F, diffusion, noise, init, t, h, seed, n_paths, block=b,
                             record_stride=max(1, int(round(t / h))), checkpoints=(t,),
                             segment_stride=segment_stride)
        laws[t] = EmpiricalMeasure.from_ensemble(res, t)
    rows = []
    for t in checkpoints:
        d = bl_metric_estimate(laws[t], laws[t + s_offset], dictionary_size, seed)
        rows.append((t, float(s_offset), d))
    uniq = []
    alt = alt_init
    if alt is None:
        alt = init
    T = max(times)
    pr = paired_paths(op, F, diffusion, noise, init, alt, T, h, seed, n_paths,
                      record_stride=record_stride, block=len(times))
    # moment proxy from the contraction run's primary copy
    mres = simulate_paths(op, F, diffusion, noise, init, T, h, seed, n_paths,
                          record_stride=record_stride, block=len(times) + 1)
    if alt_init is not None:
        off = len(times) + 2
        for i, t in enumerate(checkpoints):
            res = simulate_paths(op, F, diffusion, noise, alt_init, t, h, seed, n_paths, block=off + i,
                                 record_stride=max(1, int(round(t / h))), checkpoints=(t,),
                                 segment_stride=segment_stride)
            other = EmpiricalMeasure.from_ensemble(res, t)
            uniq.append((t, bl_metric_estimate(laws[t], other, dictionary_size, seed)))
    return CauchyTable(rows, pr.times, pr.mean_sq_diff, pr.rate, mres.times, mres.running_sup(),
                       uniq, warning)


# -- damped delay wave example -------------------------------------------------------


@dataclass(frozen=True)
class Thresholds:
    """Constants of the damped delay wave example.

    ``gamma`` and ``beta_max`` are ``None`` (with ``reason``) when the delay
    coefficients are zero or too large.
    ``kappa_literal = pi/(4 alpha + 2)`` and ``kappa_direct = pi^2/(2 alpha + 2 pi)``
    are two readings of ``(||A^{-1/2}BA^{-1/2}|| + 2||A^{-1/2}||)^{-1}``;
    they differ and both are reported.
    """

    delay_bound: float
    gamma: float | None
    beta_max: float | None
    reason: str
    kappa_literal: float
    kappa_direct: float


def example_thresholds(alpha, c1, c2):
    """``delay_bound = alpha pi/(36 alpha + pi)``; ``gamma = ln(delay_bound/(|c1|+|c2|))``;
    ``beta_max = (2/3) gamma e^{-2 gamma}``.
    """
    if not alpha > 0:
        raise PreconditionError("alpha must be positive")
    bound = alpha * math.pi / (36.0 * alpha + math.pi)
    s = abs(c1) + abs(c2)
    k_lit = math.pi / (4.0 * alpha + 2.0)
    k_dir = math.pi ** 2 / (2.0 * alpha + 2.0 * math.pi)
    if s == 0:
        return Thresholds(bound, None, None, "c1 = c2 = 0: the decay-rate formula needs a nonzero delay term",
                          k_lit, k_dir)
    if not s < bound:
        return Thresholds(bound, None, None, "|c1| + |c2| is not below the delay bound", k_lit, k_dir)
    gamma = math.log(bound / s)
    beta_max = 2.0 / 3.0 * gamma * math.exp(-2.0 * gamma)
    return Thresholds(bound, gamma, beta_max, "", k_lit, k_dir)
