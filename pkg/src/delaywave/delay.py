"""Memory operators, delay transfer functions and the Green operator.

A :class:`DelayKernel` is a finite Stieltjes measure on ``[-r, 0]``: point
masses ``(theta_k, C_k)`` plus piecewise-constant densities
``(theta0, theta1, C)``.  Kernels for the position memory (``eta``, acting
``V -> H``) and the velocity memory (``zeta``, acting ``H -> H``) are
combined by :func:`assemble_delay` into the state kernel
``F = [[0, 0], [eta A^{-1/2}, zeta]]`` acting on ``(A^{1/2}u, u')``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.integrate import simpson

from .exceptions import PreconditionError
from .operators import BlockOperator, SpectralOperator, expm2x2
from .spectral import _line_sup, lemma_b_cutoff, log_b_grid, resolvent_norm

__all__ = [
    "DelayKernel",
    "assemble_delay",
    "derivative_galerkin_matrix",
    "delay_transfer",
    "CriterionResult",
    "stability_criterion",
    "SeriesResult",
    "series_criterion",
    "structure_operator_apply",
    "DelaySolution",
    "solve_delay",
    "GreenOperator",
    "green_operator",
    "DecayFit",
    "delay_semigroup_decay",
    "history_response",
]

_TARGETS = ("M", "N", "F")


def _as_matrix(c):
    c = np.asarray(c)
    if c.ndim == 0:
        c = c.reshape(1, 1)
    if c.ndim != 2:
        raise ValueError("kernel weights must be matrices")
    return c


@dataclass(frozen=True)
class DelayKernel:
    """Matrix-valued measure on ``[-horizon, 0]``.

    ``target`` is ``"M"`` (position memory, mode space), ``"N"`` (velocity
    memory, mode space) or ``"F"`` (state space, size ``2N``).
    """

    horizon: float
    atoms: tuple = ()
    density: tuple = ()
    target: str = "F"

    def __post_init__(self):
        r = float(self.horizon)
        if not r > 0:
            raise ValueError("delay horizon must be positive")
        if self.target not in _TARGETS:
            raise ValueError(f"target must be one of {_TARGETS}")
        atoms = tuple((float(th), _as_matrix(c)) for th, c in self.atoms)
        dens = tuple((float(a), float(b), _as_matrix(c)) for a, b, c in self.density)
        tol = 1e-12 * max(1.0, r)
        for th, _ in atoms:
            if not -r - tol <= th <= tol:
                raise ValueError(f"atom at {th} outside [-{r}, 0]")
        for a, b, _ in dens:
            if not -r - tol <= a < b <= tol:
                raise ValueError(f"density piece [{a}, {b}] outside [-{r}, 0] or empty")
        shapes = {c.shape for _, c in atoms} | {c.shape for _, _, c in dens}
        if len(shapes) > 1:
            raise ValueError("kernel weights have inconsistent shapes")
        for _, c in atoms:
            c.setflags(write=False)
        for _, _, c in dens:
            c.setflags(write=False)
        object.__setattr__(self, "horizon", r)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "density", dens)

    @classmethod
    def zero(cls, dim, horizon=1.0, target="F"):
        return cls(horizon, ((-horizon, np.zeros((dim, dim))),), (), target)

    @classmethod
    def point(cls, theta, weight, horizon=None, target="F"):
        return cls(horizon if horizon is not None else max(-theta, 1e-300), ((theta, weight),), (), target)

    @property
    def shape(self):
        for _, c in self.atoms:
            return c.shape
        for _, _, c in self.density:
            return c.shape
        return (0, 0)

    @property
    def is_zero(self):
        return all(not np.any(c) for _, c in self.atoms) and all(not np.any(c) for _, _, c in self.density)

    def total_variation(self):
        """``sum ||C_k|| + sum ||C|| (theta1 - theta0)`` (spectral norms)."""
        v = sum(np.linalg.norm(c, 2) for _, c in self.atoms)
        v += sum(np.linalg.norm(c, 2) * (b - a) for a, b, c in self.density)
        return float(v)

    def total_mass(self):
        out = np.zeros(self.shape, dtype=complex if self._complex else float)
        for _, c in self.atoms:
            out = out + c
        for a, b, c in self.density:
            out = out + c * (b - a)
        return out

    @property
    def _complex(self):
        return any(np.iscomplexobj(c) for _, c in self.atoms) or any(np.iscomplexobj(c) for *_, c in self.density)

    def map_weights(self, fn, target=None, horizon=None):
        return DelayKernel(
            horizon if horizon is not None else self.horizon,
            tuple((th, fn(c)) for th, c in self.atoms),
            tuple((a, b, fn(c)) for a, b, c in self.density),
            target or self.target,
        )


def derivative_galerkin_matrix(n_modes):
    """``D_mn = <e_m, e_n'>`` for ``e_n = sqrt(2) sin(n pi xi)`` on ``(0, 1)``.

    ``D_mn = 2 n m (1 - (-1)^{m+n}) / (m^2 - n^2)`` off the diagonal, 0 on it.
    """
    n = np.arange(1, n_modes + 1, dtype=float)
    m = n[:, None]
    nn = n[None, :]
    parity = 1.0 - (-1.0) ** (m + nn)
    with np.errstate(divide="ignore", invalid="ignore"):
        D = np.where(m == nn, 0.0, 2.0 * nn * m * parity / (m * m - nn * nn))
    return D


def assemble_delay(A, M=None, N=None):
    """State kernel ``F = [[0, 0], [M A^{-1/2}, N]]``."""
    n = A.n_modes
    s = 1.0 / A.sqrt_eigenvalues
    parts = []
    for k, scale in ((M, s), (N, None)):
        if k is None:
            parts.append(None)
            continue
        if k.target not in ("M", "N"):
            raise ValueError("assemble_delay expects mode-space kernels")
        if k.shape != (n, n):
            raise ValueError(f"kernel weights are {k.shape}, expected {(n, n)}")
        parts.append(k)
    M, N = parts
    horizons = [k.horizon for k in (M, N) if k is not None]
    if not horizons:
        return DelayKernel.zero(2 * n)
    r = max(horizons)

    def lift(c, lower_left):
        out = np.zeros((2 * n, 2 * n), dtype=complex if np.iscomplexobj(c) else float)
        if lower_left:
            out[n:, :n] = c * s[None, :]
        else:
            out[n:, n:] = c
        return out

    atoms, dens = [], []
    for k, ll in ((M, True), (N, False)):
        if k is None:
            continue
        atoms += [(th, lift(c, ll)) for th, c in k.atoms]
        dens += [(a, b, lift(c, ll)) for a, b, c in k.density]
    return DelayKernel(r, tuple(atoms), tuple(dens), "F")


def delay_transfer(F, lam, check=True):
    """``F(e^{lam .}) = sum e^{lam theta_k} C_k + sum C (e^{lam theta1} - e^{lam theta0})/lam``.

    Returns ``(matrix, norm)``; the bound ``norm <= e^{|Re lam| r} Var`` is
    checked as a postcondition.
    """
    lam = complex(lam)
    out = np.zeros(F.shape, dtype=complex)
    for th, c in F.atoms:
        out += np.exp(lam * th) * c
    for a, b, c in F.density:
        if abs(lam) < 1e-12:
            w = (b - a) + lam * (b * b - a * a) / 2
        else:
            w = (np.exp(lam * b) - np.exp(lam * a)) / lam
        out += w * c
    nrm = float(np.linalg.norm(out, 2))
    if check:
        bound = math.exp(abs(lam.real) * F.horizon) * F.total_variation()
        if nrm > bound * (1 + 1e-10) + 1e-14:
            raise AssertionError(f"transfer norm {nrm} exceeds variation bound {bound}")
    return out, nrm


def _transfer_stack(F, lams):
    """``F(e^{lam .})`` for an array of ``lam``; shape ``(len, d, d)``."""
    lams = np.asarray(lams, dtype=complex)
    out = np.zeros((lams.size,) + F.shape, dtype=complex)
    for th, c in F.atoms:
        out += np.exp(lams * th)[:, None, None] * c
    for a, b, c in F.density:
        small = np.abs(lams) < 1e-12
        safe = np.where(small, 1.0, lams)
        w = np.where(small, (b - a) + lams * (b * b - a * a) / 2,
                     (np.exp(lams * b) - np.exp(lams * a)) / safe)
        out += w[:, None, None] * c
    return out


def _transfer_sup(F, a, bs):
    """``sup_b ||F(e^{(a+ib).})||`` over the grid; closed form for a single atom."""
    thetas = {th for th, _ in F.atoms}
    if len(thetas) == 1 and not F.density:
        th = thetas.pop()
        c = sum(w for _, w in F.atoms)
        return math.exp(a * th) * float(np.linalg.norm(c, 2))
    return float(np.linalg.norm(_transfer_stack(F, a + 1j * bs), 2, axis=(1, 2)).max())


def _criterion_grid(op, F, a, b_grid):
    if b_grid is not None:
        return np.asarray(b_grid, dtype=float), float("nan")
    alpha, gamma = op.alpha, op.gamma
    top = 2.0 * float(np.sqrt(op.A.eigenvalues[-1])) + 10.0
    cut = float("nan")
    if alpha > 0 and np.isfinite(gamma) and a > -alpha / 2:
        # delta = alpha/2 keeps the hypotheses valid for every a in (-alpha/2, 0]
        cut = lemma_b_cutoff(alpha, gamma, a, delta=alpha / 2)
        top = max(top, 2.0 * cut)
    grid = log_b_grid(top, 2001)
    # atoms make the transfer quasi-periodic in b; sample it finely too
    step = np.pi / (16.0 * F.horizon)
    n_lin = int(min(top / step, 20000))
    lin = np.linspace(-top, top, 2 * n_lin + 1)
    return np.unique(np.concatenate([grid, lin])), cut


@dataclass(frozen=True)
class CriterionResult:
    holds: bool
    lhs: float
    rhs: float
    a: float
    b_extent: float
    b_points: int
    lemma_cutoff: float


def _check_a(op, a):
    if a > 0:
        raise PreconditionError("a must be <= 0")
    omega = op.spectral_abscissa()
    if not a > omega:
        raise PreconditionError(f"a = {a} is not to the right of the growth bound {omega:.6g} of Lambda")


def stability_criterion(a, F, op, b_grid=None):
    """Sufficient condition ``sup_b ||F(e^{(a+ib).})|| < 1 / sup_b ||R(a+ib, Lambda)||``.

    ``holds`` certifies that the delay system decays faster than ``e^{at}``.
    """
    _check_a(op, a)
    bs, cut = _criterion_grid(op, F, a, b_grid)
    lhs = _transfer_sup(F, a, bs)
    rsup = _line_sup(op, a, bs, op.eigenvalues().imag)
    rhs = 1.0 / rsup
    return CriterionResult(bool(lhs < rhs), lhs, rhs, float(a), float(np.max(np.abs(bs))), bs.size, cut)


def _resolvent_stack(op, lams):
    """``(lam I - Lambda)^{-1}`` as dense ``(len, 2N, 2N)`` matrices."""
    lams = np.asarray(lams, dtype=complex)
    if op.is_diagonal:
        n = op.n_modes
        X = -np.broadcast_to(op.blocks, (lams.size,) + op.blocks.shape).astype(complex)
        X[..., 0, 0] += lams[:, None]
        X[..., 1, 1] += lams[:, None]
        det = X[..., 0, 0] * X[..., 1, 1] - X[..., 0, 1] * X[..., 1, 0]
        out = np.zeros((lams.size, 2 * n, 2 * n), dtype=complex)
        idx = np.arange(n)
        out[:, idx, idx] = X[..., 1, 1] / det
        out[:, idx, n + idx] = -X[..., 0, 1] / det
        out[:, n + idx, idx] = -X[..., 1, 0] / det
        out[:, n + idx, n + idx] = X[..., 0, 0] / det
        return out
    eye = np.eye(op.dim)
    return np.linalg.inv(lams[:, None, None] * eye - op.matrix)


@dataclass(frozen=True)
class SeriesResult:
    q_a: float
    certified: bool
    series_bound: float
    n_max: int


def series_criterion(a, F, op, n_max=50, b_grid=None):
    """``q_a = sup_b ||F(e^{(a+ib).}) R(a+ib, Lambda)||``; certified iff ``q_a < 1``.

    The terms of the series are dominated geometrically by ``q_a^n``;
    ``series_bound`` is the partial sum up to ``n_max``.
    """
    _check_a(op, a)
    bs, _ = _criterion_grid(op, F, a, b_grid)
    lams = a + 1j * bs
    q = 0.0
    for chunk in np.array_split(np.arange(bs.size), max(1, bs.size // 512)):
        prod = _transfer_stack(F, lams[chunk]) @ _resolvent_stack(op, lams[chunk])
        q = max(q, float(np.linalg.norm(prod, 2, axis=(1, 2)).max()))
    series = float(sum(q ** k for k in range(1, n_max + 1)))
    return SeriesResult(q, bool(q < 1.0), series, int(n_max))


def _interp_segment(grid, phi, x):
    """Linear interpolation of samples ``phi`` (first axis on ``grid``) at ``x``."""
    x = np.clip(x, grid[0], grid[-1])
    j = np.clip(np.searchsorted(grid, x, side="right") - 1, 0, grid.size - 2)
    w = (x - grid[j]) / (grid[j + 1] - grid[j])
    w = w.reshape(w.shape + (1,) * (phi.ndim - 1))
    return (1 - w) * phi[j] + w * phi[j + 1]


def structure_operator_apply(F, phi, grid=None):
    """``(S phi)(theta) = int_{[-r, theta]} drho(sigma) phi(sigma - theta)``.

    ``phi`` holds samples on ``grid`` (default: uniform on ``[-r, 0]`` with
    ``len(phi)`` points); the result is sampled on the same grid.  Density
    pieces use composite Simpson quadrature on a refined copy of the grid.
    """
    phi = np.asarray(phi)
    r = F.horizon
    if grid is None:
        grid = np.linspace(-r, 0.0, phi.shape[0])
    grid = np.asarray(grid, dtype=float)
    if grid.shape[0] != phi.shape[0]:
        raise ValueError("history samples and grid differ in length")
    if abs(grid[0] + r) > 1e-9 * max(1.0, r) or abs(grid[-1]) > 1e-9 * max(1.0, r):
        raise ValueError("history grid must span [-r, 0]")
    d = F.shape[1]
    if phi.shape[1] != d:
        raise ValueError(f"history has dimension {phi.shape[1]}, kernel expects {d}")
    out = np.zeros((grid.size, F.shape[0]) + phi.shape[2:], dtype=np.result_type(phi, float))
    tol = 1e-12 * max(1.0, r)
    for i, th in enumerate(grid):
        acc = 0.0
        for tk, c in F.atoms:
            if tk <= th + tol:
                acc = acc + np.tensordot(c, _interp_segment(grid, phi, np.array(tk - th)), axes=(1, 0))
        for a, b, c in F.density:
            hi = min(b, th)
            if hi <= a:
                continue
            n_sub = max(8, 4 * int(np.ceil((hi - a) / max(np.diff(grid).min(), 1e-12))))
            sig = np.linspace(a, hi, 2 * n_sub + 1)
            vals = _interp_segment(grid, phi, sig - th)
            integ = simpson(vals, x=sig, axis=0)
            acc = acc + np.tensordot(c, integ, axes=(1, 0))
        out[i] = acc
    return out


# -- method of steps -------------------------------------------------------------

_NODES = np.array([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0])


def _phi_functions(Z, p_max):
    """``phi_0 .. phi_{p_max}`` of ``Z`` from one exponential of an augmented matrix."""
    d = Z.shape[0]
    big = np.zeros(((p_max + 1) * d, (p_max + 1) * d), dtype=Z.dtype)
    big[:d, :d] = Z
    for p in range(p_max):
        big[p * d:(p + 1) * d, (p + 1) * d:(p + 2) * d] = np.eye(d)
    E = scipy.linalg.expm(big)
    return [E[:d, p * d:(p + 1) * d] for p in range(p_max + 1)]


def _etd_weights(L, h):
    """``E = e^{hL}`` and ``W_i`` with ``int_0^h e^{(h-s)L} p(s) ds = sum W_i g_i``.

    ``p`` is the cubic interpolating ``g_i`` at ``s_i = c_i h``.
    """
    phis = _phi_functions(h * L, 4)
    V = np.vander(_NODES * h, 4, increasing=True)  # p(s_i) = sum_p a_p s_i^p
    Vinv = np.linalg.inv(V)  # a_p = sum_i Vinv[p, i] g_i
    Phi = [math.factorial(p) * h ** (p + 1) * phis[p + 1] for p in range(4)]
    W = [sum(Vinv[p, i] * Phi[p] for p in range(4)) for i in range(4)]
    return phis[0], W


class _History:
    """History ``phi_1`` on ``[-r, 0)``: callable, samples or zero."""

    def __init__(self, phi1, r, shape):
        self.r = r
        self.shape = shape
        if phi1 is None:
            self.kind = "zero"
        elif callable(phi1):
            self.kind = "callable"
            self.fn = phi1
        else:
            arr = np.asarray(phi1)
            if arr.shape[1:] != shape:
                raise ValueError(f"history samples have shape {arr.shape[1:]}, expected {shape}")
            self.kind = "samples"
            self.grid = np.linspace(-r, 0.0, arr.shape[0])
            self.samples = arr

    def __call__(self, tau):
        if self.kind == "zero":
            return np.zeros(self.shape)
        if self.kind == "callable":
            return np.asarray(self.fn(tau)).reshape(self.shape)
        return _interp_segment(self.grid, self.samples, np.array(tau))


@dataclass
class DelaySolution:
    """Grid solution with C1 cubic-Hermite dense output."""

    times: np.ndarray
    states: np.ndarray
    d_right: np.ndarray
    d_left: np.ndarray
    h: float
    history: object = field(repr=False, default=None)

    def __call__(self, t):
        """``y(t)``, right-continuous at ``t = 0``."""
        if t < 0:
            return self.history(t)
        x = t / self.h
        j = min(int(np.floor(x + 1e-9)), self.times.size - 2)
        return _hermite(self.states, self.d_right, self.d_left, self.h, j, x - j)


def _hermite(Y, Dr, Dl, h, j, u):
    u2, u3 = u * u, u * u * u
    return ((2 * u3 - 3 * u2 + 1) * Y[j] + (u3 - 2 * u2 + u) * h * Dr[j]
            + (-2 * u3 + 3 * u2) * Y[j + 1] + (u3 - u2) * h * Dl[j + 1])


def solve_delay(op, F, phi0, phi1=None, T=10.0, h=None, method="etd"):
    """Method of steps for ``y' = Lambda y + F y_t`` on ``[0, T]``.

    ``phi0`` is ``y(0)`` (vector or matrix of columns), ``phi1`` the history
    on ``[-r, 0)`` (``None`` for zero, a callable, or samples on a uniform
    grid of ``[-r, 0]``).  ``method="etd"`` integrates the linear part
    exactly and the memory term with cubic interpolation on the nodes
    ``0, h/3, 2h/3, h``; ``method="rk4"`` is classical Runge-Kutta and
    requires ``h ||Lambda|| <= 1``.  Delayed values inside the solution
    window come from a C1 cubic-Hermite interpolant; an atom landing on a
    grid point is read as a right limit at the start of a step and a left
    limit at its end.
    """
    r = F.horizon
    if h is None:
        h = r / 64.0
    n_steps = int(round(T / h))
    if n_steps < 1 or abs(n_steps * h - T) > 1e-9 * max(1.0, T):
        raise PreconditionError("T must be a positive multiple of h")
    L = np.asarray(op.matrix)
    d = L.shape[0]
    if F.shape != (d, d):
        raise ValueError(f"kernel acts on dimension {F.shape}, state has {d}")
    y0 = np.asarray(phi0)
    cols = y0.shape[1:]
    hist = _History(phi1, r, y0.shape)
    dtype = np.result_type(y0, L, *(c for _, c in F.atoms), float)
    Y = np.zeros((n_steps + 1,) + y0.shape, dtype=dtype)
    Dr = np.zeros_like(Y)
    Dl = np.zeros_like(Y)
    Y[0] = y0

    atom_off = [(th / h, c) for th, c in F.atoms if np.any(c)]
    dens = []
    if F.density:
        gx, gw = np.polynomial.legendre.leggauss(3)
        for a, b, c in F.density:
            if not np.any(c):
                continue
            n_cell = max(1, int(np.ceil((b - a) / h - 1e-9)))
            edges = np.linspace(a, b, n_cell + 1)
            mid = (edges[:-1] + edges[1:]) / 2
            half = (edges[1:] - edges[:-1]) / 2
            pts = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
            wts = (half[:, None] * gw[None, :]).ravel()
            dens.append((pts / h, wts, c))

    def lookup(x, k, side):
        # x: time in units of h; k: index of the step being taken
        if side == "right":
            j = int(np.floor(x + 1e-9))
        else:
            j = int(np.ceil(x - 1e-9)) - 1
        if j < 0:
            return hist(x * h)
        if j >= k:
            if k == 0:
                return Y[0]
            j = k - 1
        return _hermite(Y, Dr, Dl, h, j, x - j)

    def forcing(k, c, side="right"):
        g = np.zeros(y0.shape, dtype=dtype)
        x0 = k + c
        for off, C in atom_off:
            g = g + C @ lookup(x0 + off, k, side)
        for offs, wts, C in dens:
            acc = 0.0
            for o, w in zip(offs, wts):
                acc = acc + w * lookup(x0 + o, k, "right")
            g = g + C @ acc
        return g

    has_memory = bool(atom_off or dens)
    if method == "etd":
        E, W = _etd_weights(L, h)
        for k in range(n_steps):
            y = Y[k]
            if has_memory:
                g = [forcing(k, 0.0, "right"), forcing(k, 1 / 3), forcing(k, 2 / 3), forcing(k, 1.0, "left")]
                Y[k + 1] = E @ y + W[0] @ g[0] + W[1] @ g[1] + W[2] @ g[2] + W[3] @ g[3]
                Dr[k] = L @ y + g[0]
                Dl[k + 1] = L @ Y[k + 1] + g[3]
            else:
                Y[k + 1] = E @ y
                Dr[k] = L @ y
                Dl[k + 1] = L @ Y[k + 1]
            _check_finite(Y[k + 1], k + 1)
    elif method == "rk4":
        nrm = float(np.linalg.norm(L, 2))
        if h * nrm > 1.0:
            raise PreconditionError(
                f"rk4 step unstable: h*||Lambda|| = {h * nrm:.3g} > 1; "
                f"use h <= {1.0 / nrm:.3g}, fewer modes, or method='etd'")
        for k in range(n_steps):
            y = Y[k]
            g0 = forcing(k, 0.0, "right")
            gm = forcing(k, 0.5)
            g1 = forcing(k, 1.0, "left")
            k1 = L @ y + g0
            k2 = L @ (y + 0.5 * h * k1) + gm
            k3 = L @ (y + 0.5 * h * k2) + gm
            k4 = L @ (y + h * k3) + g1
            Y[k + 1] = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            Dr[k] = k1
            Dl[k + 1] = L @ Y[k + 1] + g1
            _check_finite(Y[k + 1], k + 1)
    else:
        raise ValueError(f"unknown method {method!r}")
    Dr[n_steps] = Dl[n_steps]
    return DelaySolution(np.arange(n_steps + 1) * h, Y, Dr, Dl, h, hist)


def _check_finite(y, step):
    if not np.all(np.isfinite(y)):
        from .exceptions import SimulationDiverged
        raise SimulationDiverged(step)


@dataclass(frozen=True)
class GreenOperator:
    """Samples ``G(t_k)`` of the fundamental solution on ``t_k = k h``."""

    times: np.ndarray
    samples: np.ndarray
    grid_step: float

    def __call__(self, t):
        if t < 0:
            return np.zeros(self.samples.shape[1:])
        k = t / self.grid_step
        j = int(round(k))
        if abs(k - j) < 1e-9 and j < self.times.size:
            return self.samples[j]
        j = min(int(np.floor(k)), self.times.size - 2)
        w = k - j
        return (1 - w) * self.samples[j] + w * self.samples[j + 1]

    def at_index(self, k):
        """``G(k h)``; zero for negative ``k``."""
        if k < 0:
            return np.zeros(self.samples.shape[1:])
        return self.samples[k]

    def norms(self):
        fro = np.linalg.norm(self.samples, "fro", axis=(1, 2))
        spec = np.linalg.norm(self.samples, 2, axis=(1, 2))
        return fro, spec

    def csv_rows(self):
        fro, spec = self.norms()
        return [(float(t), float(f), float(s)) for t, f, s in zip(self.times, fro, spec)]


def green_operator(op, F, T, h=None, method="etd"):
    """Fundamental solution: ``G(0) = I``, zero history, ``G(t) = 0`` for ``t < 0``."""
    r = F.horizon
    if h is None:
        h = r / 64.0
    if h > r / 16.0 * (1 + 1e-12):
        raise PreconditionError(f"step h = {h} exceeds r/16 = {r / 16}")
    sol = solve_delay(op, F, np.eye(op.dim), None, T, h, method)
    return GreenOperator(sol.times, sol.states, h)


def history_response(G, F, phi1, t_index):
    """``int_{-r}^0 G(t + theta) (S phi1)(theta) d theta`` at ``t = t_index h``.

    ``phi1`` is sampled on the step grid of ``[-r, 0]`` (``r/h + 1`` points).
    The integrand vanishes for ``theta < -t``; the rest is integrated with
    composite Simpson on the step grid.
    """
    h = G.grid_step
    r = F.horizon
    m = int(round(r / h))
    phi1 = np.asarray(phi1)
    if phi1.shape[0] != m + 1:
        raise ValueError("history samples must lie on the step grid")
    grid = np.linspace(-r, 0.0, m + 1)
    s_phi = structure_operator_apply(F, phi1, grid)
    lo = max(0, m - t_index)
    if lo >= m:
        return np.zeros(phi1.shape[1:])
    idx = np.arange(lo, m + 1)
    vals = np.stack([G.at_index(t_index + (i - m)) @ s_phi[i] for i in idx])
    return simpson(vals, x=grid[idx], axis=0)


@dataclass(frozen=True)
class DecayFit:
    M: float
    gamma: float
    degenerate: bool = False
    reason: str = ""

    @property
    def decaying(self):
        return not self.degenerate and self.gamma > 0


def delay_semigroup_decay(G, window=None):
    """Fit ``||G(t)|| <= M e^{-gamma t}`` on the tail half of the samples.

    ``gamma`` is minus the least-squares slope of ``log ||G(t)||``; ``M`` is
    raised until the envelope dominates every sample and is at least 1.
    """
    t = np.asarray(G.times)
    _, spec = G.norms()
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
    else:
        sel = t >= t[-1] / 2
    tt, vv = t[sel], spec[sel]
    if tt.size < 2 or np.any(vv <= 0) or not np.all(np.isfinite(vv)):
        return DecayFit(float("nan"), float("nan"), True, "norm vanishes or is not finite on the fit window")
    slope, icept = np.polyfit(tt, np.log(vv), 1)
    gamma = -float(slope)
    env = spec * np.exp(gamma * t)
    M = max(1.0, float(np.exp(icept)), float(env[np.isfinite(env)].max()))
    reason = "" if gamma > 0 else "non-decaying: fitted slope is positive"
    return DecayFit(M, gamma, False, reason)
