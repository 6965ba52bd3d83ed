"""Truncated Fock-space containers and linear algebra.

Dense matrices throughout; a cutoff ``N`` means the basis ``|0>, ..., |N>``.

The squeezing operator follows the convention in which ``r > 0`` squeezes the
``x`` quadrature, ``S(r)^dag a S(r) = a cosh r - a^dag sinh r``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

__all__ = [
    "DimensionMismatch",
    "NotHermitian",
    "SignificantlyNegativeEigenvalue",
    "FockVector",
    "DensityMatrix",
    "OperatorMatrix",
    "annihilation_matrix",
    "creation_matrix",
    "number_matrix",
    "squeeze_generator",
    "squeeze_matrix",
    "psd_sqrt",
    "partial_trace_logical",
]


class DimensionMismatch(ValueError):
    pass


class NotHermitian(ValueError):
    pass


class SignificantlyNegativeEigenvalue(ValueError):
    pass


def _parity_of(amplitudes, tol=1e-12):
    mag = np.abs(amplitudes)
    if np.all(mag[1::2] < tol):
        return "even"
    if np.all(mag[0::2] < tol):
        return "odd"
    return None


@dataclass(frozen=True)
class FockVector:
    """Pure state in the truncated basis ``|0>..|N>``.

    ``parity`` is one of ``"even"``, ``"odd"`` or ``None`` and is checked
    against the support on construction.
    """

    amplitudes: np.ndarray
    parity: str = None
    normalized: bool = True
    truncation_loss: float = 0.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes)
        if amps.ndim != 1 or amps.size < 1:
            raise ValueError("amplitudes must be a non-empty 1-D array")
        amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        if self.normalized:
            norm = np.vdot(amps, amps).real
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"state not normalized: <psi|psi> = {norm!r}")
        if self.parity is not None:
            if self.parity not in ("even", "odd"):
                raise ValueError(f"unknown parity flag {self.parity!r}")
            off = amps[1::2] if self.parity == "even" else amps[0::2]
            if off.size and np.max(np.abs(off)) >= 1e-12:
                raise ValueError(f"support is inconsistent with parity={self.parity}")

    @property
    def cutoff(self):
        return self.amplitudes.size - 1

    @property
    def dim(self):
        return self.amplitudes.size

    @classmethod
    def from_amplitudes(cls, amplitudes, normalize=True):
        amps = np.asarray(amplitudes)
        if normalize:
            amps = amps / np.sqrt(np.vdot(amps, amps).real)
        return cls(amps, parity=_parity_of(amps), normalized=normalize)

    @classmethod
    def fock(cls, k, cutoff):
        amps = np.zeros(cutoff + 1)
        amps[k] = 1.0
        return cls(amps, parity="even" if k % 2 == 0 else "odd")

    def padded(self, cutoff):
        """Same state embedded in a larger truncated space."""
        if cutoff < self.cutoff:
            raise DimensionMismatch("cannot pad to a smaller cutoff")
        amps = np.zeros(cutoff + 1, dtype=self.amplitudes.dtype)
        amps[: self.dim] = self.amplitudes
        return FockVector(amps, self.parity, self.normalized, self.truncation_loss)

    def expect(self, operator):
        op = operator.matrix if isinstance(operator, OperatorMatrix) else operator
        return np.vdot(self.amplitudes, op @ self.amplitudes)

    def overlap(self, other):
        """``<self|other>``."""
        if other.dim != self.dim:
            raise DimensionMismatch(f"dimensions differ: {self.dim} vs {other.dim}")
        return np.vdot(self.amplitudes, other.amplitudes)

    def to_density_matrix(self):
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray
    physical: bool = field(default=True)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("density matrix must be square")
        if np.max(np.abs(mat - mat.conj().T), initial=0.0) > 1e-10:
            raise NotHermitian("density matrix is not Hermitian")
        if self.physical:
            if abs(np.trace(mat).real - 1.0) > 1e-9:
                raise ValueError(f"trace {np.trace(mat).real!r} differs from 1")
            if np.linalg.eigvalsh(mat).min() < -1e-9:
                raise SignificantlyNegativeEigenvalue("density matrix is not PSD")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def cutoff(self):
        return self.matrix.shape[0] - 1

    def trace(self):
        return np.trace(self.matrix).real

    def expect(self, operator):
        op = operator.matrix if isinstance(operator, OperatorMatrix) else operator
        return np.trace(op @ self.matrix)


@dataclass(frozen=True)
class OperatorMatrix:
    matrix: np.ndarray
    label: str = "generic"

    @property
    def cutoff(self):
        return self.matrix.shape[0] - 1

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return OperatorMatrix(self.matrix @ other.matrix)
        if isinstance(other, FockVector):
            return self.matrix @ other.amplitudes
        return self.matrix @ other

    @property
    def dag(self):
        return OperatorMatrix(self.matrix.conj().T)


def annihilation_matrix(N):
    """``<j-1|a|j> = sqrt(j)`` on the cutoff-``N`` space."""
    if N < 1:
        raise ValueError("cutoff must be at least 1")
    return OperatorMatrix(np.diag(np.sqrt(np.arange(1, N + 1, dtype=float)), k=1), "annihilation")


def creation_matrix(N):
    return OperatorMatrix(annihilation_matrix(N).matrix.T.copy(), "creation")


def number_matrix(N):
    return OperatorMatrix(np.diag(np.arange(N + 1, dtype=float)), "number")


def squeeze_generator(r, N):
    """Truncated ``(r/2)(a^2 - a^dag^2)``."""
    a = annihilation_matrix(N).matrix
    return 0.5 * r * (a @ a - a.T @ a.T)


def squeeze_matrix(r, N):
    """Truncated squeezing operator ``exp[(r/2)(a^2 - a^dag^2)]``.

    Computed by scaling-and-squaring on the truncated generator, so only the
    low-index block is accurate; pick ``N`` well above the columns you use.
    """
    return OperatorMatrix(expm(squeeze_generator(r, N)), f"squeeze({r})")


def psd_sqrt(M, hermitian_tol=1e-10, negative_tol=1e-6):
    """Square root of a Hermitian PSD matrix via eigendecomposition.

    Eigenvalues in ``(-negative_tol, 0)`` are treated as round-off and clamped,
    as are positive ones below ``size * eps * max``: their square roots would
    otherwise inject noise of order ``sqrt(eps)``.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch("psd_sqrt expects a square matrix")
    scale = max(1.0, np.max(np.abs(M), initial=0.0))
    if np.max(np.abs(M - M.conj().T), initial=0.0) > hermitian_tol * scale:
        raise NotHermitian("matrix is not Hermitian")
    herm = 0.5 * (M + M.conj().T)
    evals, evecs = np.linalg.eigh(herm)
    if evals.size and evals.min() < -negative_tol * scale:
        raise SignificantlyNegativeEigenvalue(f"smallest eigenvalue {evals.min():.3e}")
    floor = evals.size * np.finfo(float).eps * max(evals.max(initial=0.0), 0.0)
    root = np.sqrt(np.where(evals > floor, evals, 0.0))
    return (evecs * root) @ evecs.conj().T


def partial_trace_logical(M, K):
    """Trace out the logical index of a ``2K x 2K`` matrix.

    Rows and columns use the composite index ``[mu l] = mu*K + l``.
    """
    M = np.asarray(M)
    if M.shape != (2 * K, 2 * K):
        raise DimensionMismatch(f"expected shape {(2 * K, 2 * K)}, got {M.shape}")
    return M[:K, :K] + M[K:, K:]
