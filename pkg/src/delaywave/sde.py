"""Monte-Carlo simulation of the stochastic delay system on the mode truncation.

    dy = (Lambda y + F y_t) dt + L(y(t-), y_{t-}) dZ(t)

States live in ``(A^{1/2}u, u')`` coordinates.  Paths of an ensemble are
advanced together as a ``(copies * paths, 2N)`` array; coupled copies (for
contraction estimates) share every noise increment.

Randomness: path ``i`` of block ``b`` under master seed ``s`` uses
``SeedSequence(entropy=s, spawn_key=(b, i))``, whose three children drive
the Gaussian increments, the jump counts and the jump marks.  Increments are
drawn in fixed chunks of ``CHUNK`` steps, so a path's noise does not depend
on how many other paths are simulated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.signal import fftconvolve

from .delay import DelayKernel, GreenOperator, _phi_functions, green_operator, structure_operator_apply
from .exceptions import PreconditionError, SimulationDiverged
from .operators import SpectralOperator

__all__ = [
    "DiffusionSpec",
    "TrajectoryState",
    "Trajectory",
    "EnsembleResult",
    "ContractionRecord",
    "path_generators",
    "simulate_path",
    "simulate_paths",
    "paired_paths",
    "LipschitzReport",
    "lipschitz_check",
    "VoCResult",
    "variation_of_constants_check",
    "order_check",
    "velocity_noise_matrix",
    "sine_transform",
]

CHUNK = 256
_OVERFLOW = 1e150


# -- diffusion -----------------------------------------------------------------


def velocity_noise_matrix(n_modes, noise_dim=None):
    """``L = [[0], [I]]``: noise component ``j`` forces the velocity of mode ``j``."""
    k = n_modes if noise_dim is None else noise_dim
    L = np.zeros((2 * n_modes, k))
    m = min(n_modes, k)
    L[n_modes + np.arange(m), np.arange(m)] = 1.0
    return L


def sine_transform(n_modes, n_grid=None):
    """Synthesis ``(n_grid, N)`` and analysis ``(N, n_grid)`` matrices on the midpoint grid.

    ``e_n(xi) = sqrt(2) sin(n pi xi)`` at ``xi_i = (i + 1/2)/n_grid``; the
    midpoint rule is exact for the products of the first ``n_grid - 1``
    modes, so analysis after synthesis is the identity.
    """
    p = 4 * n_modes if n_grid is None else int(n_grid)
    if p <= n_modes:
        raise ValueError("physical grid must be finer than the mode truncation")
    xi = (np.arange(p) + 0.5) / p
    n = np.arange(1, n_modes + 1)
    syn = np.sqrt(2.0) * np.sin(np.pi * np.outer(xi, n))
    return syn, syn.T / p


@dataclass(frozen=True)
class DiffusionSpec:
    """Noise coefficient ``L(y(t), y_t)``.

    ``kind``: ``"zero"``, ``"additive"`` (constant ``L`` of shape
    ``(2N, noise_dim)``) or ``"lipschitz"`` (``fn(y, delayed)`` with
    ``y`` of shape ``(P, 2N)`` and ``delayed`` a list of ``(P, 2N)`` arrays,
    one per atom of ``kappa``, returning ``(P, 2N, noise_dim)``).  The
    declared constants satisfy
    ``||L(phi) - L(psi)||^2 <= alpha1 ||Delta_0||^2 + alpha2 sum_k w_k ||Delta(theta_k)||^2``.
    """

    kind: str
    dim: int
    noise_dim: int
    L: np.ndarray | None = None
    fn: object = None
    alpha1: float = 0.0
    alpha2: float = 0.0
    kappa: tuple = ()
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("zero", "additive", "lipschitz"):
            raise ValueError(f"unknown diffusion kind {self.kind!r}")
        if self.kind == "additive":
            L = np.asarray(self.L, dtype=float)
            if L.shape != (self.dim, self.noise_dim):
                raise ValueError(f"L has shape {L.shape}, expected {(self.dim, self.noise_dim)}")
            L.setflags(write=False)
            object.__setattr__(self, "L", L)
        if self.kind == "lipschitz":
            if not callable(self.fn):
                raise ValueError("lipschitz diffusion needs a callable")
            if self.alpha1 < 0 or self.alpha2 < 0:
                raise ValueError("Lipschitz constants must be non-negative")
            kap = tuple((float(t), float(w)) for t, w in self.kappa)
            if any(t > 0 or w < 0 for t, w in kap):
                raise ValueError("kappa atoms need theta <= 0 and non-negative weight")
            object.__setattr__(self, "kappa", kap)

    @classmethod
    def zero(cls, dim, noise_dim=1):
        return cls("zero", dim, noise_dim, label="zero")

    @classmethod
    def additive(cls, L):
        L = np.asarray(L, dtype=float)
        return cls("additive", L.shape[0], L.shape[1], L=L, label="additive")

    @classmethod
    def lipschitz(cls, fn, dim, noise_dim, alpha1, alpha2, kappa, label="lipschitz"):
        return cls("lipschitz", dim, noise_dim, fn=fn, alpha1=alpha1, alpha2=alpha2,
                   kappa=tuple(kappa), label=label)

    @classmethod
    def delay_wave(cls, A, beta, delay=1.0, n_grid=None):
        """``beta u(t - delay, xi) / (1 + |u(t, xi)|)`` against a scalar Wiener process.

        Evaluated on the midpoint grid and projected back onto the modes of
        the velocity component.  Declared constants ``alpha1 = alpha2 =
        beta^2`` with ``kappa = delta_{-delay}``; the map is only locally
        Lipschitz (see :func:`lipschitz_check`).
        """
        n = A.n_modes
        syn, ana = sine_transform(n, n_grid)
        inv_k = 1.0 / A.sqrt_eigenvalues

        def fn(y, delayed):
            u = (y[:, :n] * inv_k) @ syn.T
            ud = (delayed[0][:, :n] * inv_k) @ syn.T
            g = beta * ud / (1.0 + np.abs(u))
            out = np.zeros((y.shape[0], 2 * n, 1))
            out[:, n:, 0] = g @ ana.T
            return out

        return cls.lipschitz(fn, 2 * n, 1, beta * beta, beta * beta, ((-delay, 1.0),),
                             label=f"delay-wave(beta={beta:g})")

    @property
    def horizon(self):
        return max([-t for t, _ in self.kappa], default=0.0)

    def evaluate(self, y, delayed):
        """``L`` for a stack of states; shape ``(P, 2N, noise_dim)``."""
        if self.kind == "zero":
            return np.zeros((y.shape[0], self.dim, self.noise_dim))
        if self.kind == "additive":
            return np.broadcast_to(self.L, (y.shape[0],) + self.L.shape)
        return self.fn(y, delayed)


# -- randomness ----------------------------------------------------------------


def path_generators(seed, block, index):
    """Gaussian, jump-count and jump-mark generators of one path."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(block), int(index)))
    return [np.random.Generator(np.random.PCG64(c)) for c in ss.spawn(3)]


class _NoiseSource:
    """Per-path noise streams, drawn in chunks and stacked across paths."""

    def __init__(self, noise, h, seed, block, n_paths, path_offset=0):
        self.noise = noise
        self.h = h
        self.gens = [path_generators(seed, block, path_offset + i) for i in range(n_paths)]
        self.sd = np.sqrt(noise.wiener_variances * h)
        self.drift = h * noise.drift_per_time()
        self.jump_count = 0
        self._buf = None
        self._pos = CHUNK

    def _refill(self):
        dim = self.noise.noise_dim
        P = len(self.gens)
        out = np.empty((CHUNK, P, dim))
        jump = self.noise.jump
        for i, (gg, gc, gm) in enumerate(self.gens):
            out[:, i, :] = gg.standard_normal((CHUNK, dim)) * self.sd
            if jump is not None:
                counts = gc.poisson(jump.rate * self.h, CHUNK)
                total = int(counts.sum())
                if total:
                    sizes = jump.law.sample(gm, total, dim)
                    gm.random(total)  # jump times inside the step; EM uses the left limit
                    steps = np.repeat(np.arange(CHUNK), counts)
                    np.add.at(out[:, i, :], steps, sizes)
                    self.jump_count += total
        out += self.drift
        self._buf = out
        self._pos = 0

    def next(self):
        if self._pos >= CHUNK:
            self._refill()
        dz = self._buf[self._pos]
        self._pos += 1
        return dz

    def states(self):
        return [[g.bit_generator.state for g in gs] for gs in self.gens]


# -- engine --------------------------------------------------------------------


def _delay_weights(F, h):
    """``F y_t ~ sum_j W_j y(t - j h)`` with linear interpolation off-grid."""
    acc = {}

    def add(j, w):
        acc[j] = acc.get(j, 0.0) + w

    def point(theta, C):
        x = -theta / h
        j0 = int(np.floor(x + 1e-9))
        frac = x - j0
        if frac < 1e-9:
            add(j0, C)
        else:
            add(j0, (1 - frac) * C)
            add(j0 + 1, frac * C)

    for th, C in F.atoms:
        if np.any(C):
            point(th, C)
    for a, b, C in F.density:
        if not np.any(C):
            continue
        n = max(1, int(np.ceil((b - a) / h - 1e-9)))
        sig = np.linspace(a, b, n + 1)
        w = np.full(n + 1, (b - a) / n)
        w[0] = w[-1] = (b - a) / (2 * n)
        for s, ws in zip(sig, w):
            point(s, ws * C)
    return sorted((j, np.asarray(W)) for j, W in acc.items())


def _point_weights(theta, h):
    x = -theta / h
    j0 = int(np.floor(x + 1e-9))
    frac = x - j0
    if frac < 1e-9:
        return [(j0, 1.0)]
    return [(j0, 1 - frac), (j0 + 1, frac)]


def _history_samples(phi1, r, h, m, d):
    """Values at ``t = -j h`` for ``j = m .. 1`` (oldest first)."""
    ts = -np.arange(m, 0, -1) * h
    if phi1 is None:
        return np.zeros((m, d))
    if callable(phi1):
        return np.stack([np.asarray(phi1(t), dtype=float).reshape(-1) for t in ts])
    arr = np.asarray(phi1, dtype=float)
    grid = np.linspace(-r, 0.0, arr.shape[0])
    return np.stack([np.array([np.interp(t, grid, arr[:, c]) for c in range(d)]) for t in ts])


@dataclass
class TrajectoryState:
    """Current time, state, history (oldest first, spanning ``r``) and RNG states."""

    t: float
    y: np.ndarray
    history: np.ndarray
    rng_state: object = None


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    final: TrajectoryState
    jump_count: int = 0


@dataclass
class EnsembleResult:
    """Ensemble summaries on the recording grid.

    ``mean_sq[c]``: ``E||y(t)||^2`` for copy ``c``; ``segment_sq[c]``:
    ``E(||y(t)||^2 + int ||y_t||^2)`` (left-endpoint rule, weight ``h``);
    ``mode_sq[c]``: per-mode ``E(y_n^2 + y_{N+n}^2)``; ``diff_sq``:
    ``E||y^0(t) - y^1(t)||^2`` for coupled runs; ``checkpoints``:
    ``t -> (copies, paths, segment_dim)`` segment samples.
    """

    times: np.ndarray
    mean_sq: np.ndarray
    segment_sq: np.ndarray
    mode_sq: np.ndarray
    diff_sq: np.ndarray | None
    checkpoints: dict
    n_paths: int
    jump_count: int
    h: float
    segment_stride: int
    states: np.ndarray | None = None
    final: list = field(default_factory=list)

    def running_sup(self, copy=0):
        return np.maximum.accumulate(self.segment_sq[copy])

    def csv_rows(self, copy=0):
        """Rows ``(t, E||y||^2, per-mode second moments..., paths)``."""
        return [[float(t), float(m), *map(float, ms), self.n_paths]
                for t, m, ms in zip(self.times, self.mean_sq[copy], self.mode_sq[copy])]


def _as_inits(init, d):
    phi0, phi1 = init
    return np.asarray(phi0, dtype=float), phi1


def simulate_paths(op, F, diffusion, noise, init, T, h, seed, n_paths=1, *,
                   coupled_init=None, scheme="exponential", record_stride=1,
                   checkpoints=(), segment_stride=1, block=0, path_offset=0,
                   increments=None, keep_states=False):
    """Simulate an ensemble of paths; see :class:`EnsembleResult`.

    ``scheme="exponential"`` advances ``y <- e^{h Lambda}(y + L dZ) + h phi_1(h Lambda) F y_t``
    (exact on the linear part); ``scheme="euler"`` is the plain explicit
    Euler-Maruyama step ``y <- y + h(Lambda y + F y_t) + L dZ``.  The noise
    coefficient and the memory term are evaluated at the left end of the
    step, so jumps act through the pre-jump state.  ``increments`` of shape
    ``(steps, paths, noise_dim)`` replace the internal generator.
    """
    d = op.dim
    r = F.horizon
    m_r = int(round(r / h))
    if m_r < 1 or abs(m_r * h - r) > 1e-9 * max(1.0, r):
        raise PreconditionError("h must divide the delay horizon r")
    n_steps = int(round(T / h))
    if n_steps < 1 or abs(n_steps * h - T) > 1e-9 * max(1.0, T):
        raise PreconditionError("T must be a positive multiple of h")
    if F.shape != (d, d):
        raise ValueError("delay kernel dimension does not match the state")
    if diffusion.dim != d or diffusion.noise_dim != noise.noise_dim:
        raise ValueError("diffusion and noise dimensions disagree with the state")
    if m_r % segment_stride:
        raise PreconditionError("segment_stride must divide r/h")

    L = np.asarray(op.matrix, dtype=float)
    fw = _delay_weights(F, h)
    kw = [_point_weights(th, h) for th, _ in diffusion.kappa]
    m = max([m_r] + [j for j, _ in fw] + [j for ws in kw for j, _ in ws])
    nb = m + 1

    inits = [init] if coupled_init is None else [init, coupled_init]
    C = len(inits)
    P = int(n_paths)
    buf = np.empty((nb, C * P, d))
    for c, (phi0, phi1) in enumerate(inits):
        y0 = np.broadcast_to(np.asarray(phi0, dtype=float), (P, d))
        hist = _history_samples(phi1, r, h, m, d)  # steps -m .. -1
        for j in range(1, m + 1):
            buf[(-j) % nb, c * P:(c + 1) * P] = hist[m - j]
        buf[0, c * P:(c + 1) * P] = y0
    sq_ring = np.einsum("kpd,kpd->kp", buf, buf)
    win = sum(sq_ring[(-j) % nb] for j in range(1, m_r + 1))

    if scheme == "exponential":
        phis = _phi_functions(h * L, 1)
        ET, P1T = phis[0].T, (h * phis[1]).T
    elif scheme == "euler":
        ET, P1T = None, None
    else:
        raise ValueError(f"unknown scheme {scheme!r}")

    src = None
    if increments is None:
        src = _NoiseSource(noise, h, seed, block, P, path_offset)
    else:
        increments = np.asarray(increments, dtype=float)
        if increments.shape != (n_steps, P, noise.noise_dim):
            raise ValueError(f"increments must have shape {(n_steps, P, noise.noise_dim)}")

    n_mod = d // 2
    rec_idx = list(range(0, n_steps + 1, record_stride))
    if rec_idx[-1] != n_steps:
        rec_idx.append(n_steps)
    R = len(rec_idx)
    mean_sq = np.empty((C, R))
    seg_sq = np.empty((C, R))
    mode_sq = np.empty((C, R, n_mod))
    diff_sq = np.empty(R) if C == 2 else None
    states = np.empty((C, P, R, d)) if keep_states else None
    ck_steps = {}
    for t in checkpoints:
        k = int(round(t / h))
        if k < 0 or k > n_steps or abs(k * h - t) > 1e-9 * max(1.0, t):
            raise PreconditionError(f"checkpoint {t} is not on the step grid within [0, T]")
        ck_steps[k] = float(t)
    ck_out = {}
    seg_js = np.arange(segment_stride, m_r + 1, segment_stride)

    def record(k, ri, y):
        sq = np.einsum("pd,pd->p", y, y).reshape(C, P)
        mean_sq[:, ri] = sq.mean(axis=1)
        seg_sq[:, ri] = (sq + h * win.reshape(C, P)).mean(axis=1)
        yy = y.reshape(C, P, d)
        mode_sq[:, ri] = (yy[..., :n_mod] ** 2 + yy[..., n_mod:] ** 2).mean(axis=1)
        if C == 2:
            diff = yy[0] - yy[1]
            diff_sq[ri] = np.einsum("pd,pd->p", diff, diff).mean()
        if keep_states:
            states[:, :, ri] = yy

    def checkpoint(k, y):
        hist = np.stack([buf[(k - j) % nb] for j in seg_js], axis=1)  # (C*P, n_seg, d)
        seg = np.concatenate([y, np.sqrt(h * segment_stride) * hist.reshape(C * P, -1)], axis=1)
        ck_out[ck_steps[k]] = seg.reshape(C, P, -1)

    y = buf[0].copy()
    ri = 0
    rec_set = dict((k, i) for i, k in enumerate(rec_idx))
    if 0 in rec_set:
        record(0, rec_set[0], y)
    if 0 in ck_steps:
        checkpoint(0, y)
    for k in range(n_steps):
        dz = src.next() if src is not None else increments[k]
        if C > 1:
            dz = np.tile(dz, (C, 1))
        fy = 0.0
        for j, W in fw:
            fy = fy + buf[(k - j) % nb] @ W.T
        if diffusion.kind == "zero":
            ldz = 0.0
        elif diffusion.kind == "additive":
            ldz = dz @ diffusion.L.T
        else:
            delayed = [sum(w * buf[(k - j) % nb] for j, w in ws) for ws in kw]
            ldz = np.einsum("pdk,pk->pd", diffusion.evaluate(y, delayed), dz)
        if scheme == "exponential":
            y_new = (y + ldz) @ ET
            if fw:
                y_new = y_new + fy @ P1T
        else:
            y_new = y + h * (y @ L.T + fy) + ldz
        if not np.all(np.isfinite(y_new)) or np.max(np.abs(y_new)) > _OVERFLOW:
            raise SimulationDiverged(k + 1)
        # slide the history window before the slot of step k+1 is overwritten
        slot = (k + 1) % nb
        new_sq = np.einsum("pd,pd->p", y_new, y_new)
        win = win + sq_ring[k % nb] - sq_ring[(k + 1 - m_r - 1) % nb]
        buf[slot] = y_new
        sq_ring[slot] = new_sq
        y = y_new
        if k + 1 in rec_set:
            record(k + 1, rec_set[k + 1], y)
        if k + 1 in ck_steps:
            checkpoint(k + 1, y)

    final = []
    rng_states = src.states() if src is not None else [None] * P
    for c in range(C):
        for p in range(P):
            idx = c * P + p
            hist = np.stack([buf[(n_steps - j) % nb][idx] for j in range(m_r, 0, -1)])
            final.append(TrajectoryState(n_steps * h, y[idx].copy(), hist, rng_states[p]))
    return EnsembleResult(
        times=np.array(rec_idx) * h, mean_sq=mean_sq, segment_sq=seg_sq, mode_sq=mode_sq,
        diff_sq=diff_sq, checkpoints=ck_out, n_paths=P,
        jump_count=src.jump_count if src is not None else 0, h=h,
        segment_stride=segment_stride, states=states, final=final,
    )


def simulate_path(op, F, diffusion, noise, init, T, h, seed, *, scheme="exponential",
                  record_stride=1, path_index=0, block=0):
    """One trajectory; deterministic given all inputs and ``seed``."""
    res = simulate_paths(op, F, diffusion, noise, init, T, h, seed, 1, scheme=scheme,
                         record_stride=record_stride, block=block, path_offset=path_index,
                         keep_states=True)
    return Trajectory(res.times, res.states[0, 0], res.final[0], res.jump_count)


@dataclass(frozen=True)
class ContractionRecord:
    times: np.ndarray
    mean_sq_diff: np.ndarray
    rate: float
    n_paths: int
    degenerate: bool = False


def _tail_rate(t, v):
    sel = t >= t[-1] / 2
    tt, vv = t[sel], v[sel]
    if tt.size < 2 or np.any(vv <= 0) or not np.all(np.isfinite(vv)):
        return float("nan"), True
    slope = np.polyfit(tt, np.log(vv), 1)[0]
    return -float(slope), False


def paired_paths(op, F, diffusion, noise, init_a, init_b, T, h, seed, n_paths=100, *,
                 scheme="exponential", record_stride=1, block=0):
    """``E||y(t, phi) - y(t, psi)||^2`` under synchronous coupling, with its tail decay rate."""
    res = simulate_paths(op, F, diffusion, noise, init_a, T, h, seed, n_paths,
                         coupled_init=init_b, scheme=scheme, record_stride=record_stride, block=block)
    rate, degenerate = _tail_rate(res.times, res.diff_sq)
    return ContractionRecord(res.times, res.diff_sq, rate, n_paths, degenerate)


# -- Lipschitz probe -----------------------------------------------------------


@dataclass(frozen=True)
class LipschitzReport:
    max_ratio: float
    declared_ok: bool
    n_used: int
    radius: float


def lipschitz_check(diffusion, n_probes=2000, seed=0, radius=1.0, noise=None, tol=1e-6):
    """Probe ``||L(phi) - L(psi)||^2_Q / (alpha1 ||Delta_0||^2 + alpha2 sum w_k ||Delta(theta_k)||^2)``.

    States and delayed values are drawn in the ball of the given radius:
    half the probes are independent pairs, half nearby pairs (local
    slopes), each with random mode-energy profiles.  The ``Q``-weighted
    Hilbert-Schmidt norm is used for the noise coefficient.
    """
    if diffusion.kind == "zero":
        return LipschitzReport(0.0, True, n_probes, radius)
    d = diffusion.dim
    rng = np.random.default_rng(seed)
    q = np.ones(diffusion.noise_dim) if noise is None else np.asarray(noise.wiener_variances)
    sq = np.sqrt(q)
    K = max(1, len(diffusion.kappa))

    def draw(n):
        prof = np.exp(-rng.random((n, 1)) * 6 * np.arange(d // 2)[None, :] / max(d // 2, 1))
        prof = np.concatenate([prof, prof], axis=1)
        v = rng.standard_normal((n, d)) * prof
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return v * radius * rng.random((n, 1)) ** (1.0 / 3)

    n = int(n_probes)
    ya, yb = draw(n), draw(n)
    da = [draw(n) for _ in range(K)]
    db = [draw(n) for _ in range(K)]
    near = np.arange(n) < n // 2
    eps = 10.0 ** rng.uniform(-6, -1, (n, 1))
    yb = np.where(near[:, None], ya + eps * draw(n), yb)
    db = [np.where(near[:, None], a + eps * draw(n), b) for a, b in zip(da, db)]
    La = diffusion.evaluate(ya, da) * sq
    Lb = diffusion.evaluate(yb, db) * sq
    num = np.sum((La - Lb) ** 2, axis=(1, 2))
    den = diffusion.alpha1 * np.sum((ya - yb) ** 2, axis=1)
    for (_, w), a, b in zip(diffusion.kappa, da, db):
        den = den + diffusion.alpha2 * w * np.sum((a - b) ** 2, axis=1)
    ok = den > 1e-300
    if diffusion.kind == "additive":
        return LipschitzReport(0.0, True, int(ok.sum()), radius)
    ratio = num[ok] / den[ok]
    mx = float(ratio.max()) if ratio.size else 0.0
    return LipschitzReport(mx, bool(mx <= 1 + tol), int(ok.sum()), radius)


# -- variation of constants ----------------------------------------------------


@dataclass(frozen=True)
class VoCResult:
    max_deviation: np.ndarray
    mean_max_deviation: float
    h: float


def _wiener_increments(noise, h, seed, n_paths, n_steps, block=0):
    out = np.empty((n_steps, n_paths, noise.noise_dim))
    sd = np.sqrt(noise.wiener_variances * h)
    for i in range(n_paths):
        g = path_generators(seed, block, i)[0]
        out[:, i, :] = g.standard_normal((n_steps, noise.noise_dim)) * sd
    return out


def _voc_paths(G, F, L, init, increments, h):
    """``y_k = G(t_k) phi0 + history response + sum_{j<k} G(t_k - t_j) L dZ_j``."""
    phi0, phi1 = init
    n_steps, P, _ = increments.shape
    Gs = G.samples[: n_steps + 1]
    det = np.einsum("kab,b->ka", Gs, np.asarray(phi0, dtype=float))
    if phi1 is not None:
        r = F.horizon
        m = int(round(r / h))
        grid = np.linspace(-r, 0.0, m + 1)
        samples = np.stack([np.asarray(phi1(t), dtype=float) for t in grid]) if callable(phi1) \
            else np.stack([np.interp(grid, np.linspace(-r, 0, len(phi1)), np.asarray(phi1)[:, c])
                           for c in range(np.asarray(phi1).shape[1])], axis=1)
        s_phi = structure_operator_apply(F, samples, grid)
        for k in range(n_steps + 1):
            lo = max(0, m - k)
            if lo >= m:
                continue
            idx = np.arange(lo, m + 1)
            vals = np.einsum("iab,ib->ia", Gs[k + idx - m], s_phi[idx])
            det[k] += simpson(vals, x=grid[idx], axis=0)
    U = increments @ L.T  # (n, P, d)
    # X_k = sum_{j<k} G_{k-j} U_j : causal convolution along time
    conv = fftconvolve(Gs[1:, :, :, None], U.transpose(0, 2, 1)[:, None, :, :], axes=0)
    X = np.zeros((n_steps + 1, Gs.shape[1], P))
    X[1:] = conv[:n_steps].sum(axis=2)
    return det[:, None, :] + X.transpose(0, 2, 1)


def variation_of_constants_check(op, F, L_const, noise, init, T, h, seed, n_paths=1, *,
                                 G=None, scheme="euler", increments=None):
    """Max over the grid of ``||y_EM - y_VoC||`` for each path, same increments.

    The reference is the discrete variation-of-constants formula built from
    the Green operator samples (``G`` is computed at step ``h`` if not
    given) and the identical noise increments.
    """
    L_const = np.asarray(L_const, dtype=float)
    n_steps = int(round(T / h))
    if G is None:
        G = green_operator(op, F, T, h)
    if G.times.size < n_steps + 1 or abs(G.grid_step - h) > 1e-12:
        raise PreconditionError("Green operator must be sampled at step h over [0, T]")
    if increments is None:
        if noise.jump is not None:
            src = _NoiseSource(noise, h, seed, 0, n_paths)
            increments = np.stack([src.next() for _ in range(n_steps)])
        else:
            increments = _wiener_increments(noise, h, seed, n_paths, n_steps)
    diff = DiffusionSpec.additive(L_const)
    res = simulate_paths(op, F, diff, noise, init, T, h, seed, n_paths, scheme=scheme,
                         increments=increments, keep_states=True)
    em = res.states[0].transpose(1, 0, 2)  # (n+1, P, d)
    ref = _voc_paths(G, F, L_const, init, increments, h)
    dev = np.linalg.norm(em - ref, axis=2).max(axis=0)
    return VoCResult(dev, float(dev.mean()), h)


@dataclass(frozen=True)
class OrderResult:
    coarse: float
    fine: float
    ratio: float


def order_check(op, F, L_const, noise, init, T, h, seed, n_paths=100, scheme="euler"):
    """EM vs variation-of-constants deviation at ``h`` and ``h/2`` on one Brownian path per sample.

    Increments are drawn at ``h/2`` and summed in pairs for the coarse run,
    so both resolutions see the same noise realisation.
    """
    if noise.jump is not None:
        raise PreconditionError("order check uses Wiener noise only")
    if scheme == "euler":
        amp = float(np.abs(1.0 + h * np.linalg.eigvals(op.matrix)).max())
        if amp > 1.0:
            raise PreconditionError(f"explicit Euler is unstable at h={h:g} for this truncation "
                                    f"(amplification {amp:.4g}); reduce h or the number of modes")
    n_fine = int(round(2 * T / h))
    fine_inc = _wiener_increments(noise, h / 2, seed, n_paths, n_fine)
    coarse_inc = fine_inc[0::2] + fine_inc[1::2]
    rc = variation_of_constants_check(op, F, L_const, noise, init, T, h, seed, n_paths,
                                      scheme=scheme, increments=coarse_inc)
    rf = variation_of_constants_check(op, F, L_const, noise, init, T, h / 2, seed, n_paths,
                                      scheme=scheme, increments=fine_inc)
    return OrderResult(rc.mean_max_deviation, rf.mean_max_deviation,
                       rc.mean_max_deviation / rf.mean_max_deviation)
