"""Spectral bounds, Lyapunov certificates and resolvent estimates.

Throughout, ``alpha`` in the resolvent and growth-bound helpers is the
strict-dissipativity constant of ``B`` (``Re<Bv,v> <= -2 alpha ||v||^2``)
and ``gamma`` its sector constant.  The Lyapunov helpers use the damping
*magnitude* instead: ``B = -alpha I``.  For ``B = -2I`` the former is 1 and
the latter is 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.optimize import minimize_scalar

from .exceptions import PreconditionError, SingularOperatorError
from .operators import BlockOperator, SpectralOperator, conjugate_norm, inverse_block, norm2x2

__all__ = [
    "spectral_bound_scalar_damping",
    "LyapunovOperator",
    "lyapunov_solution",
    "lyapunov_residual",
    "gamma_bounds",
    "decay_envelope",
    "resolvent_norm",
    "ResolventBound",
    "resolvent_bound_imag_axis",
    "uniform_resolvent_bound",
    "lemma_b_cutoff",
    "growth_bound_estimate",
    "norm_surrogate",
    "growth_bound_from_operator_norms",
    "proposition_growth_bound",
    "GPGResult",
    "gpg_numeric_growth_bound",
    "log_b_grid",
    "BoundReport",
    "BOUND_REPORT_COLUMNS",
    "bound_reports",
]


def spectral_bound_scalar_damping(beta, omega_sA):
    """Spectral bound of ``[[0, I], [-A, beta I]]`` from ``omega_s(-A)``.

    ``beta/2 + sqrt(beta^2/4 + omega_s(-A))`` if the radicand is
    non-negative, otherwise ``beta/2``.
    """
    disc = beta * beta / 4.0 + omega_sA
    if disc >= 0:
        return beta / 2.0 + math.sqrt(disc)
    return beta / 2.0


# -- Lyapunov operator ---------------------------------------------------------


@dataclass(frozen=True)
class LyapunovOperator:
    """Solution of ``Lambda0^* P + P Lambda0 = -I`` for ``B = -alpha I``.

    In ``(u, u')`` coordinates the classical solution is the block operator
    ``[[A/alpha + alpha/2, 1/2], [1/2, 1/alpha]]``.  Conjugating by
    ``Sigma = diag(A^{1/2}, I)`` (``P~ = Sigma^{-*} P Sigma^{-1}``) gives, on
    mode ``n``,

        [[1/alpha + alpha/(2 lambda_n), 1/(2 sqrt(lambda_n))],
         [1/(2 sqrt(lambda_n)),          1/alpha           ]],

    which is what ``blocks`` stores.  Quadratic-form values are preserved.
    """

    alpha: float
    A: SpectralOperator
    blocks: np.ndarray

    @property
    def n_modes(self):
        return self.A.n_modes

    def apply(self, y):
        n = self.n_modes
        y = np.asarray(y)
        b = self.blocks.reshape((n, 2, 2) + (1,) * (y.ndim - 1))
        top = b[:, 0, 0] * y[:n] + b[:, 0, 1] * y[n:]
        bot = b[:, 1, 0] * y[:n] + b[:, 1, 1] * y[n:]
        return np.concatenate([top, bot])

    @property
    def matrix(self):
        n = self.n_modes
        out = np.zeros((2 * n, 2 * n))
        idx = np.arange(n)
        out[idx, idx] = self.blocks[:, 0, 0]
        out[idx, n + idx] = self.blocks[:, 0, 1]
        out[n + idx, idx] = self.blocks[:, 1, 0]
        out[n + idx, n + idx] = self.blocks[:, 1, 1]
        return out

    def eigenvalue_range(self):
        ev = np.linalg.eigvalsh(self.blocks)
        return float(ev.min()), float(ev.max())

    def rayleigh(self, y):
        """``<P y, y> / ||y||^2``; ``y`` of shape ``(2N,)`` or ``(2N, k)``."""
        y = np.asarray(y)
        py = self.apply(y)
        return np.sum(py * y, axis=0) / np.sum(y * y, axis=0)

    def perturbed(self, mode=0, entry=(0, 0), delta=0.1):
        """Copy with one block entry shifted; used for fault injection."""
        b = np.array(self.blocks)
        b[mode][entry] += delta
        b.setflags(write=False)
        return LyapunovOperator(self.alpha, self.A, b)


def _solve_lyapunov_2x2(M):
    """Symmetric ``P`` with ``M^T P + P M = -I`` via the 3x3 linear system."""
    (a, b), (c, d) = M
    # unknowns (p11, p12, p22)
    sys = np.array([
        [2 * a, 2 * c, 0.0],
        [b, a + d, c],
        [0.0, 2 * b, 2 * d],
    ])
    p11, p12, p22 = np.linalg.solve(sys, [-1.0, 0.0, -1.0])
    return np.array([[p11, p12], [p12, p22]])


def lyapunov_solution(alpha, A, check_uniqueness=True):
    """Closed-form Lyapunov operator for ``B = -alpha I``.

    Each block is compared against the direct linear solve of the 2x2
    Lyapunov system; a mismatch raises.
    """
    if not alpha > 0:
        raise PreconditionError("Lyapunov solution needs alpha > 0")
    lam = A.eigenvalues
    k = np.sqrt(lam)
    blocks = np.empty((lam.size, 2, 2))
    blocks[:, 0, 0] = 1.0 / alpha + alpha / (2.0 * lam)
    blocks[:, 0, 1] = blocks[:, 1, 0] = 1.0 / (2.0 * k)
    blocks[:, 1, 1] = 1.0 / alpha
    if check_uniqueness:
        for n in range(lam.size):
            M = np.array([[0.0, k[n]], [-k[n], -alpha]])
            direct = _solve_lyapunov_2x2(M)
            if not np.allclose(direct, blocks[n], rtol=1e-10, atol=1e-14):
                raise RuntimeError(f"closed-form Lyapunov block {n} disagrees with direct solve")
    blocks.setflags(write=False)
    return LyapunovOperator(float(alpha), A, blocks)


def lyapunov_residual(P, op, y):
    """``|<Lambda y, P y> + <P y, Lambda y> + ||y||^2| / ||y||^2``."""
    y = np.asarray(y, dtype=float)
    nrm2 = float(np.dot(y, y))
    if not nrm2 > 1e-300:
        raise PreconditionError("residual is undefined for y = 0")
    ly = op.matrix @ y
    py = P.apply(y)
    val = 2.0 * np.real(np.vdot(ly, py)) + nrm2
    return abs(val) / nrm2


def gamma_bounds(alpha, omega_sA):
    """Bounds ``gamma_- <= <Py,y>/||y||^2 <= gamma_+`` with ``theta = 4|omega_s(-A)|/alpha^2``."""
    if not alpha > 0:
        raise PreconditionError("alpha must be positive")
    if not omega_sA < 0:
        raise PreconditionError("omega_s(-A) must be negative")
    theta = 4.0 * abs(omega_sA) / alpha ** 2
    r = math.sqrt(1.0 + theta)
    g_minus = r / (1.0 + r) / alpha
    g_plus = (1.0 + (1.0 + r) / theta) / alpha
    return g_minus, g_plus


def decay_envelope(gamma_minus, gamma_plus):
    """``(M, mu)`` with ``||e^{t Lambda}|| <= M e^{-mu t}``."""
    if not 0 < gamma_minus <= gamma_plus:
        raise PreconditionError("need 0 < gamma_minus <= gamma_plus")
    return math.sqrt(gamma_plus / gamma_minus), 1.0 / (2.0 * gamma_plus)


# -- resolvent -----------------------------------------------------------------


def resolvent_norm(op, z, tol=1e-12):
    """``||(z I - Lambda)^{-1}||`` for scalar or array ``z``.

    Diagonal truncations use ``sigma_max(X)/|det X|`` per 2x2 block.
    """
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    eig = op.eigenvalues()
    dist = np.min(np.abs(z_arr[:, None] - eig[None, :]), axis=1)
    if np.any(dist < tol):
        raise SingularOperatorError("point lies within 1e-12 of the spectrum")
    if op.is_diagonal:
        X = -np.broadcast_to(op.blocks, (z_arr.size,) + op.blocks.shape).astype(complex)
        X[..., 0, 0] += z_arr[:, None]
        X[..., 1, 1] += z_arr[:, None]
        det = X[..., 0, 0] * X[..., 1, 1] - X[..., 0, 1] * X[..., 1, 0]
        out = (norm2x2(X) / np.abs(det)).max(axis=1)
    else:
        eye = np.eye(op.dim)
        out = np.array([1.0 / np.linalg.svd(zz * eye - op.matrix, compute_uv=False)[-1]
                        for zz in z_arr])
    return out if np.ndim(z) else float(out[0])


@dataclass(frozen=True)
class ResolventBound:
    """Two-branch bound on ``||R(ib, Lambda)||`` for a fixed ``c``."""

    alpha: float
    gamma: float
    inv_norm: float
    c: float

    @property
    def switch(self):
        return self.c / self.inv_norm

    @property
    def inner(self):
        return self.inv_norm / (1.0 - self.c)

    @property
    def outer(self):
        return ((3.0 + self.gamma) * self.alpha * self.inv_norm + self.c) / (self.alpha * self.c)

    def __call__(self, b):
        b = np.asarray(b, dtype=float)
        out = np.where(np.abs(b) <= self.switch, self.inner, self.outer)
        return out if out.ndim else float(out)

    def sup(self):
        return max(self.inner, self.outer)


def resolvent_bound_imag_axis(alpha, gamma_B, inv_norm, c):
    """Piecewise bound on the imaginary axis for ``0 < c < 1``.

    Near the origin the Neumann series gives ``||Lambda^{-1}||/(1-c)``; for
    ``|b| > c/||Lambda^{-1}||`` the sector/dissipativity estimate gives
    ``((3+gamma) alpha ||Lambda^{-1}|| + c)/(alpha c)``.
    """
    if not 0 < c < 1:
        raise PreconditionError("c must lie in (0, 1)")
    if not alpha > 0:
        raise PreconditionError("alpha must be positive")
    if not inv_norm > 0:
        raise PreconditionError("inverse norm must be positive")
    return ResolventBound(float(alpha), float(gamma_B), float(inv_norm), float(c))


def uniform_resolvent_bound(alpha, gamma_B, kappa):
    """Uniform bound ``(2 alpha (3+gamma)/kappa + 1)/alpha`` given ``kappa <= 1/||Lambda^{-1}||``."""
    if not (alpha > 0 and kappa > 0):
        raise PreconditionError("alpha and kappa must be positive")
    return (2.0 * alpha * (3.0 + gamma_B) / kappa + 1.0) / alpha


def lemma_b_cutoff(alpha, gamma_B, a, delta=None):
    """``|b|`` beyond which the resolvent on ``Re z = a`` is controlled.

    ``alpha (3 delta + (delta - a) gamma) / (alpha - delta + a)`` for
    ``0 < delta < alpha`` and ``delta - alpha < a <= 0``; default
    ``delta = (alpha + a)/2``.
    """
    if delta is None:
        delta = (alpha + a) / 2.0
    if not (0 < delta < alpha and delta - alpha < a <= 0):
        raise PreconditionError("need 0 < delta < alpha and delta - alpha < a <= 0")
    return alpha * (3.0 * delta + (delta - a) * gamma_B) / (alpha - delta + a)


# -- growth bounds -------------------------------------------------------------


def growth_bound_estimate(alpha, gamma_B, inv_norm, tol=1e-12):
    """Upper estimate ``nu`` of the growth bound.

    ``gamma_B = 0``: ``max{-alpha, -1/||Lambda^{-1}||}``.  Otherwise the
    unique root in ``(-alpha, 0)`` of
    ``nu^2 + (nu gamma alpha/(alpha + nu))^2 = ||Lambda^{-1}||^{-2}``, whose
    left side decreases monotonically on that interval.
    """
    if not (alpha > 0 and inv_norm > 0):
        raise PreconditionError("alpha and inverse norm must be positive")
    if gamma_B == 0:
        return max(-alpha, -1.0 / inv_norm)
    if not np.isfinite(gamma_B):
        return 0.0
    target = inv_norm ** -2

    def g(nu):
        return nu * nu + (nu * gamma_B * alpha / (alpha + nu)) ** 2 - target

    lo, hi = -alpha + 1e-12, -1e-12
    glo, ghi = g(lo), g(hi)
    if not (glo > 0 > ghi):
        raise RuntimeError("no sign change on (-alpha, 0)")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi


def norm_surrogate(A, B):
    """``||A^{-1/2} B A^{-1/2}|| + 2 ||A^{-1/2}||``, an upper bound on ``||Lambda^{-1}||``."""
    cn = conjugate_norm(A, B)
    if not np.isfinite(cn):
        raise PreconditionError("conjugate norm is not finite")
    return cn + 2.0 * A.inv_sqrt_norm


def growth_bound_from_operator_norms(A, B, alpha, gamma_B):
    return growth_bound_estimate(alpha, gamma_B, norm_surrogate(A, B))


def proposition_growth_bound(op):
    """``max{omega_s(Lambda), -alpha}``."""
    return max(op.spectral_abscissa(), -op.alpha)


def log_b_grid(cutoff, n_points=2001, b_min=1e-3):
    """Symmetric grid ``{-b_k} u {0} u {b_k}`` with ``b_k`` log-spaced up to ``cutoff``."""
    half = max((n_points - 1) // 2, 1)
    pos = np.geomspace(b_min, cutoff, half)
    return np.concatenate([-pos[::-1], [0.0], pos])


@dataclass(frozen=True)
class GPGResult:
    certificate: float | None
    analytic_bound: float
    exact_omega_g: float
    b_cutoff: float
    cap: float
    line_sups: tuple = field(default_factory=tuple)

    @property
    def conclusive(self):
        return self.certificate is not None

    @property
    def status(self):
        return "certified" if self.conclusive else "inconclusive"


def _line_sup(op, a, b_grid, b_extra, n_refine=6):
    bs = np.unique(np.concatenate([b_grid, b_extra]))
    try:
        vals = resolvent_norm(op, a + 1j * bs)
    except SingularOperatorError:
        return float("inf")
    best = float(vals.max())
    order = np.argsort(vals)[::-1][:n_refine]
    for i in order:
        lo = bs[max(i - 1, 0)]
        hi = bs[min(i + 1, bs.size - 1)]
        if hi <= lo:
            continue
        try:
            res = minimize_scalar(lambda b: -resolvent_norm(op, a + 1j * b),
                                  bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-10 * max(1.0, abs(bs[i]))})
        except SingularOperatorError:
            return float("inf")
        best = max(best, -float(res.fun))
    return best


def gpg_numeric_growth_bound(op, a_grid=None, b_grid=None, cap=None):
    """Numerical growth bound from uniform resolvent bounds on vertical lines.

    Lines ``Re z = a`` are swept from ``a = 0`` leftwards through the
    non-positive part of ``a_grid``; the certificate is the leftmost ``a``
    such that every swept line up to it has ``sup_b ||R(a+ib)|| <= cap``.
    With ``cap = 1/(grid step)`` the bounded lines keep the spectrum out of
    the strips between them, so the whole half-plane right of the
    certificate is uniformly controlled.  ``b_grid`` defaults to a
    logarithmic grid up to ``1e3 (alpha + sqrt(lambda_N))``; imaginary parts
    of the truncated eigenvalues are added and the top peaks refined.
    """
    alpha = op.alpha
    if a_grid is None:
        a_grid = np.linspace(-max(2.0 * alpha, 1.0), 0.0, 201)
    a_grid = np.asarray(a_grid, dtype=float)
    a_vals = np.unique(np.concatenate([[0.0], a_grid[a_grid <= 0]]))[::-1]
    if a_vals.size < 2:
        raise PreconditionError("a_grid has no negative points")
    if cap is None:
        cap = 1.0 / float(np.max(np.abs(np.diff(a_vals))))
    cutoff = 1e3 * (max(alpha, 1.0) + float(np.sqrt(op.A.eigenvalues[-1])))
    if b_grid is None:
        b_grid = log_b_grid(cutoff)
    b_grid = np.asarray(b_grid, dtype=float)
    eig = op.eigenvalues()
    b_extra = eig.imag
    cert = None
    sups = []
    for a in a_vals:
        s = _line_sup(op, a, b_grid, b_extra)
        sups.append((float(a), s))
        if not s <= cap:
            break
        if a < 0:
            cert = float(a)
    return GPGResult(
        certificate=cert,
        analytic_bound=proposition_growth_bound(op),
        exact_omega_g=float(eig.real.max()),
        b_cutoff=float(np.max(np.abs(b_grid))),
        cap=float(cap),
        line_sups=tuple(sups),
    )


# -- reports ---------------------------------------------------------------------

BOUND_REPORT_COLUMNS = (
    "method", "omega_s", "omega_g_upper", "gamma_minus", "gamma_plus", "decay_M", "decay_mu",
)


@dataclass(frozen=True)
class BoundReport:
    """One growth/decay estimate.  Quantities a method does not produce are NaN."""

    method: str
    omega_s: float
    omega_g_upper: float
    gamma_minus: float = float("nan")
    gamma_plus: float = float("nan")
    decay_M: float = float("nan")
    decay_mu: float = float("nan")

    def __post_init__(self):
        if not (np.isnan(self.gamma_minus) or self.gamma_minus <= self.gamma_plus):
            raise ValueError("gamma_minus > gamma_plus")
        if not (np.isnan(self.decay_M) or self.decay_M >= 1.0):
            raise ValueError("decay_M < 1")

    def row(self):
        d = asdict(self)
        return [d[c] for c in BOUND_REPORT_COLUMNS]

    def text(self):
        parts = [f"{c}={v:.6g}" if isinstance(v, float) else f"{c}={v}"
                 for c, v in zip(BOUND_REPORT_COLUMNS, self.row())]
        return " ".join(parts)


def bound_reports(op, a_grid=None, b_grid=None):
    """Growth estimates of ``op`` by every applicable method."""
    omega_s = op.spectral_abscissa()
    alpha, gamma = op.alpha, op.gamma
    out = []
    b = op.B
    if b.kind == "scalar" and b.value < 0 and op.A.omega_s < 0:
        gm, gp = gamma_bounds(-b.value, op.A.omega_s)
        M, mu = decay_envelope(gm, gp)
        out.append(BoundReport("lyapunov", omega_s, -mu, gm, gp, M, mu))
    if alpha > 0:
        inv = inverse_block(op).norm()
        nu = growth_bound_estimate(alpha, gamma, inv)
        out.append(BoundReport("root_equation", omega_s, nu, decay_mu=-nu if nu < 0 else float("nan")))
        nu2 = growth_bound_from_operator_norms(op.A, b, alpha, gamma)
        out.append(BoundReport("norm_surrogate", omega_s, nu2, decay_mu=-nu2 if nu2 < 0 else float("nan")))
    g = gpg_numeric_growth_bound(op, a_grid, b_grid)
    cert = g.certificate if g.conclusive else float("nan")
    out.append(BoundReport("gpg_numeric", omega_s, cert,
                           decay_mu=-cert if g.conclusive else float("nan")))
    return out
