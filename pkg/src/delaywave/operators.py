"""Mode-truncated second-order operators and their first-order reduction.

The self-adjoint operator ``A`` is represented by its eigenvalues in an
orthonormal mode basis, the damping ``B`` by a scalar, a diagonal or a dense
matrix over the same modes.  The reduction ``u'' + Au = Bu'`` becomes
``y' = Lambda0 y`` with ``y = (A^{1/2} u, u')`` and

    Lambda0 = [[0, A^{1/2}], [-A^{1/2}, B]],

so that the energy norm ``||A^{1/2}u||^2 + ||u'||^2`` is the Euclidean norm
of the coefficient vector.  State vectors have length ``2N`` and are ordered
``(A^{1/2}u coefficients, u' coefficients)``; for diagonal damping mode ``n``
lives in entries ``(n, N + n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .exceptions import NonDissipativeError, PreconditionError, SingularOperatorError

__all__ = [
    "SpectralOperator",
    "DampingSpec",
    "BlockOperator",
    "GenerationReport",
    "InverseBlocks",
    "build_reduction",
    "check_generation_conditions",
    "inverse_block",
    "apply_semigroup",
    "semigroup_norm",
    "expm2x2",
    "norm2x2",
    "to_energy_coordinates",
    "from_energy_coordinates",
]

_DISSIPATIVE_TOL = 1e-12


@dataclass(frozen=True)
class SpectralOperator:
    """Positive self-adjoint operator given by its eigenvalue sequence."""

    eigenvalues: np.ndarray
    basis_label: str = "explicit"

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.eigenvalues, dtype=float)).copy()
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("eigenvalues must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(lam)):
            raise ValueError("eigenvalues must be finite")
        if np.any(lam <= 0):
            raise ValueError("eigenvalues must be strictly positive (coercive A)")
        if np.any(np.diff(lam) < 0):
            raise ValueError("eigenvalues must be ordered increasingly")
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)

    @classmethod
    def dirichlet_laplacian_1d(cls, n_modes, length=1.0):
        """``-d^2/dxi^2`` on ``(0, length)`` with Dirichlet conditions."""
        n = np.arange(1, int(n_modes) + 1)
        lam = (n * np.pi / length) ** 2
        return cls(lam, basis_label=f"dirichlet-sine-(0,{length:g})")

    @property
    def n_modes(self):
        return self.eigenvalues.size

    @property
    def sqrt_eigenvalues(self):
        return np.sqrt(self.eigenvalues)

    @property
    def omega_s(self):
        """Spectral bound of ``-A``."""
        return -float(self.eigenvalues[0])

    @property
    def inv_sqrt_norm(self):
        """``||A^{-1/2}|| = 1/sqrt(lambda_1)``."""
        return 1.0 / np.sqrt(self.eigenvalues[0])

    def truncate(self, n_modes):
        return SpectralOperator(self.eigenvalues[:n_modes], self.basis_label)


@dataclass(frozen=True)
class DampingSpec:
    """Damping operator ``B`` on the mode space.

    ``kind`` is ``"scalar"`` (``value`` a real number, ``B = value * I``),
    ``"diagonal"`` (``value`` a sequence of complex ``b_n``) or ``"dense"``
    (``value`` an ``N x N`` matrix).
    """

    kind: str
    value: object

    def __post_init__(self):
        if self.kind == "scalar":
            v = complex(self.value)
            if v.imag != 0:
                raise ValueError("scalar damping must be real")
            object.__setattr__(self, "value", float(v.real))
        elif self.kind == "diagonal":
            v = np.atleast_1d(np.asarray(self.value))
            if v.ndim != 1:
                raise ValueError("diagonal damping must be a 1-d sequence")
            v = v.astype(complex) if np.iscomplexobj(v) else v.astype(float)
            v.setflags(write=False)
            object.__setattr__(self, "value", v)
        elif self.kind == "dense":
            v = np.asarray(self.value)
            if v.ndim != 2 or v.shape[0] != v.shape[1]:
                raise ValueError("dense damping must be a square matrix")
            v = v.astype(complex) if np.iscomplexobj(v) else v.astype(float)
            v.setflags(write=False)
            object.__setattr__(self, "value", v)
        else:
            raise ValueError(f"unknown damping kind {self.kind!r}")

    @classmethod
    def scalar(cls, beta):
        return cls("scalar", beta)

    @classmethod
    def diagonal(cls, b):
        return cls("diagonal", b)

    @classmethod
    def dense(cls, matrix):
        return cls("dense", matrix)

    @property
    def is_diagonal(self):
        return self.kind in ("scalar", "diagonal")

    @property
    def is_real(self):
        return not np.iscomplexobj(self.value)

    def check_size(self, n):
        if self.kind == "diagonal" and self.value.size != n:
            raise ValueError(f"diagonal damping has {self.value.size} entries, expected {n}")
        if self.kind == "dense" and self.value.shape[0] != n:
            raise ValueError(f"dense damping is {self.value.shape[0]}x{self.value.shape[0]}, expected {n}")

    def diagonal_entries(self, n):
        """Entries ``b_n`` for scalar/diagonal damping."""
        self.check_size(n)
        if self.kind == "scalar":
            return np.full(n, self.value)
        if self.kind == "diagonal":
            return np.array(self.value)
        raise ValueError("dense damping has no diagonal representation")

    def matrix(self, n):
        self.check_size(n)
        if self.kind == "dense":
            return np.array(self.value)
        return np.diag(self.diagonal_entries(n))

    def max_real_part(self, n):
        """``max Re<Bv, v>`` over unit vectors (top eigenvalue of the Hermitian part)."""
        if self.is_diagonal:
            return float(np.max(np.real(self.diagonal_entries(n))))
        b = self.matrix(n)
        return float(np.linalg.eigvalsh((b + b.conj().T) / 2)[-1])

    def is_dissipative(self, n):
        scale = max(1.0, float(np.max(np.abs(self.matrix(n)))) if self.kind == "dense" else
                    max(1.0, float(np.max(np.abs(self.diagonal_entries(n))))))
        return self.max_real_part(n) <= _DISSIPATIVE_TOL * scale

    def strict_constant(self, n):
        """Largest ``alpha_B >= 0`` with ``Re<Bv,v> <= -2 alpha_B ||v||^2``."""
        return max(0.0, -self.max_real_part(n) / 2.0)

    def sector_constant(self, n):
        """Smallest ``gamma_B >= 0`` with ``gamma_B Re<Bv,v> <= -|Im<Bv,v>|``.

        Zero for real scalar/diagonal damping; ``inf`` when the numerical
        range touches the imaginary axis away from the origin.
        """
        if self.is_diagonal:
            b = self.diagonal_entries(n)
            if not np.iscomplexobj(b) or np.all(np.imag(b) == 0):
                return 0.0
            return _sector_ratio(b)
        b = self.matrix(n)
        phis = np.linspace(0.0, 2 * np.pi, 1440, endpoint=False)
        pts = np.empty(phis.size, dtype=complex)
        for i, phi in enumerate(phis):
            rot = np.exp(1j * phi) * b
            _, vecs = np.linalg.eigh((rot + rot.conj().T) / 2)
            v = vecs[:, -1]
            pts[i] = np.vdot(v, b @ v)
        if np.all(np.abs(pts.imag) <= 1e-12 * max(1.0, np.max(np.abs(pts)))):
            return 0.0
        return _sector_ratio(pts)


def _sector_ratio(q):
    re, im = np.real(q), np.abs(np.imag(q))
    if np.any((re >= 0) & (im > 0)):
        return float("inf")
    mask = im > 0
    if not np.any(mask):
        return 0.0
    return float(np.max(im[mask] / -re[mask]))


@dataclass(frozen=True)
class BlockOperator:
    """Truncated ``Lambda0`` in ``(A^{1/2}u, u')`` coordinates."""

    A: SpectralOperator
    B: DampingSpec
    matrix: np.ndarray
    blocks: np.ndarray | None = None
    norm_convention: str = field(default="||y||^2 = ||A^{1/2}u||^2 + ||u'||^2 (Euclidean in coefficients)")

    @property
    def n_modes(self):
        return self.A.n_modes

    @property
    def dim(self):
        return 2 * self.A.n_modes

    @property
    def is_diagonal(self):
        return self.blocks is not None

    @cached_property
    def alpha(self):
        """Strict-dissipativity constant of ``B``."""
        return self.B.strict_constant(self.n_modes)

    @cached_property
    def gamma(self):
        """Sector constant of ``B``."""
        return self.B.sector_constant(self.n_modes)

    @cached_property
    def _eigenvalues(self):
        if self.is_diagonal:
            ev = np.linalg.eigvals(self.blocks).ravel()
        else:
            ev = np.linalg.eigvals(self.matrix)
        ev.setflags(write=False)
        return ev

    def eigenvalues(self):
        return self._eigenvalues

    def spectral_abscissa(self):
        """Max real part of the spectrum; equals the growth bound on a truncation."""
        return float(np.max(self.eigenvalues().real))

    def pair_index(self, n):
        return n, self.n_modes + n


def build_reduction(A, B):
    """Truncated ``Lambda0 = Sigma Lambda Sigma^{-1}`` for ``u'' + Au = Bu'``."""
    n = A.n_modes
    B.check_size(n)
    if not B.is_dissipative(n):
        raise NonDissipativeError(
            f"damping is not dissipative: max Re<Bv,v> = {B.max_real_part(n):.6g} > 0")
    k = A.sqrt_eigenvalues
    bmat = B.matrix(n)
    dtype = complex if np.iscomplexobj(bmat) else float
    mat = np.zeros((2 * n, 2 * n), dtype=dtype)
    mat[:n, n:] = np.diag(k)
    mat[n:, :n] = -np.diag(k)
    mat[n:, n:] = bmat
    blocks = None
    if B.is_diagonal:
        b = B.diagonal_entries(n)
        blocks = np.zeros((n, 2, 2), dtype=dtype)
        blocks[:, 0, 1] = k
        blocks[:, 1, 0] = -k
        blocks[:, 1, 1] = b
        blocks.setflags(write=False)
    mat.setflags(write=False)
    return BlockOperator(A=A, B=B, matrix=mat, blocks=blocks)


@dataclass(frozen=True)
class GenerationReport:
    dissipative: bool
    bounded_conjugate: bool
    conjugate_norm: float
    density_condition: str = "assumed"


def conjugate_norm(A, B):
    """``||A^{-1/2} B A^{-1/2}||`` on the truncation."""
    n = A.n_modes
    s = 1.0 / A.sqrt_eigenvalues
    if B.is_diagonal:
        return float(np.max(np.abs(B.diagonal_entries(n)) * s * s))
    return float(np.linalg.norm(s[:, None] * B.matrix(n) * s[None, :], 2))


def check_generation_conditions(A, B):
    """Report the checkable hypotheses of the contraction-generation theorem.

    The range-density condition on ``A^{1/2}(D(B) cap D(A^{1/2}))`` is not
    finitely checkable and is reported as ``"assumed"``.
    """
    n = A.n_modes
    B.check_size(n)
    cn = conjugate_norm(A, B)
    return GenerationReport(
        dissipative=bool(B.is_dissipative(n)),
        bounded_conjugate=bool(np.isfinite(cn)),
        conjugate_norm=cn,
    )


@dataclass(frozen=True)
class InverseBlocks:
    """Entries of ``Lambda0^{-1} = [[U, V], [W, S]]`` as ``N x N`` matrices."""

    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    S: np.ndarray

    @property
    def matrix(self):
        return np.block([[self.U, self.V], [self.W, self.S]])

    def norm(self):
        return float(np.linalg.norm(self.matrix, 2))


def inverse_block(op):
    """Closed-form inverse: ``U = A^{-1/2}BA^{-1/2}``, ``V = -A^{-1/2}``, ``W = A^{-1/2}``, ``S = 0``."""
    lam = np.asarray(op.A.eigenvalues)
    if np.any(lam <= 0):
        raise SingularOperatorError("Lambda0 is singular: some eigenvalue of A is not positive")
    n = op.n_modes
    s = 1.0 / np.sqrt(lam)
    bmat = op.matrix[n:, n:]
    U = s[:, None] * bmat * s[None, :]
    V = -np.diag(s)
    W = np.diag(s)
    S = np.zeros((n, n))
    inv = InverseBlocks(U=U, V=V, W=W, S=S)
    if not np.all(np.isfinite(inv.matrix)):
        raise SingularOperatorError("Lambda0 inverse is not finite")
    return inv


def to_energy_coordinates(A, u, v):
    """``(u, u')`` mode coefficients -> ``(A^{1/2}u, u')`` state vector."""
    return np.concatenate([A.sqrt_eigenvalues * np.asarray(u), np.asarray(v)])


def from_energy_coordinates(A, y):
    n = A.n_modes
    y = np.asarray(y)
    return y[:n] / A.sqrt_eigenvalues, y[n:]


# -- 2x2 exponentials ---------------------------------------------------------

_SERIES_TERMS = 9


def _cosh_sinhc_series(d):
    """``cosh(sqrt d)`` and ``sinh(sqrt d)/sqrt d`` by power series in ``d``."""
    ch = np.ones_like(d)
    sc = np.ones_like(d)
    term_c = np.ones_like(d)
    term_s = np.ones_like(d)
    for k in range(1, _SERIES_TERMS):
        term_c = term_c * d / ((2 * k - 1) * (2 * k))
        term_s = term_s * d / ((2 * k) * (2 * k + 1))
        ch = ch + term_c
        sc = sc + term_s
    return ch, sc


def expm2x2(M, t=1.0):
    """Closed-form ``exp(t M)`` for a stack of 2x2 matrices.

    With ``h = tr(tM)/2`` and ``d = h^2 - det(tM)`` the eigenvalues are
    ``h +- sqrt(d)`` and ``exp(tM) = e^h [cosh(s) I + sinh(s)/s (tM - h I)]``,
    ``s = sqrt(d)``.  Real distinct roots, complex pairs and the double root
    are the three branches; near-double roots (``|d|`` below ``1e-9`` of the
    squared eigenvalue scale, or ``|d| <= 1e-2``) use the power series.
    """
    M = np.asarray(M)
    real_input = not np.iscomplexobj(M)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise PreconditionError("exp(tM) requested for negative t")
    tM = t[..., None, None] * M
    a, b = tM[..., 0, 0], tM[..., 0, 1]
    c, d_ = tM[..., 1, 0], tM[..., 1, 1]
    h = (a + d_) / 2
    det = a * d_ - b * c
    disc = (h * h - det).astype(complex)
    scale = (np.abs(h) + np.sqrt(np.abs(det))) ** 2
    series = (np.abs(disc) < 1e-9 * scale) | (np.abs(disc) <= 1e-2)
    s = np.sqrt(disc)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        ep = np.exp(h + s)
        em = np.exp(h - s)
        ec_direct = (ep + em) / 2
        es_direct = (ep - em) / (2 * np.where(series, 1.0, s))
    ch, sc = _cosh_sinhc_series(np.where(series, disc, 0.0))
    eh = np.exp(h.astype(complex))
    ec = np.where(series, eh * ch, ec_direct)
    es = np.where(series, eh * sc, es_direct)
    out = np.empty(tM.shape, dtype=complex)
    out[..., 0, 0] = ec + es * (a - h)
    out[..., 1, 1] = ec + es * (d_ - h)
    out[..., 0, 1] = es * b
    out[..., 1, 0] = es * c
    return out.real if real_input else out


def norm2x2(M):
    """Spectral norm of a stack of 2x2 matrices (closed form).

    Largest eigenvalue of ``M^H M = [[p, r], [conj(r), q]]`` written as
    ``(p + q)/2 + hypot((p - q)/2, |r|)``, which avoids the cancellation of
    the ``fro^4 - 4|det|^2`` form near rotations.
    """
    M = np.asarray(M)
    a, b, c, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 0], M[..., 1, 1]
    p = np.abs(a) ** 2 + np.abs(c) ** 2
    q = np.abs(b) ** 2 + np.abs(d) ** 2
    r = np.abs(np.conj(a) * b + np.conj(c) * d)
    return np.sqrt((p + q) / 2 + np.hypot((p - q) / 2, r))


def _split_pairs(op, y):
    n = op.n_modes
    return np.stack([y[:n], y[n:]], axis=1)  # (N, 2, ...)


def apply_semigroup(op, y0, t):
    """``exp(t Lambda0) y0``; ``y0`` has shape ``(2N,)`` or ``(2N, k)``."""
    if t < 0:
        raise PreconditionError("semigroup evaluated at negative time")
    y0 = np.asarray(y0)
    if y0.shape[0] != op.dim:
        raise ValueError(f"state has length {y0.shape[0]}, expected {op.dim}")
    if t == 0:
        return y0.copy()
    if op.is_diagonal:
        E = expm2x2(op.blocks, t)
        pairs = _split_pairs(op, y0)
        out = np.einsum("nij,nj...->ni...", E, pairs)
        return np.concatenate([out[:, 0], out[:, 1]], axis=0)
    return scipy.linalg.expm(t * op.matrix) @ y0


def semigroup_norm(op, t):
    """``||exp(t Lambda0)||`` for scalar or array ``t``."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise PreconditionError("semigroup evaluated at negative time")
    if op.is_diagonal:
        E = expm2x2(op.blocks[None, :, :, :], t_arr[:, None])
        out = norm2x2(E).max(axis=1)
    else:
        out = np.array([np.linalg.norm(scipy.linalg.expm(s * op.matrix), 2) for s in t_arr])
    return out if np.ndim(t) else float(out[0])
