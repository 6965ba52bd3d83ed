"""Knill-Laflamme diagnostics, QEC matrix and transpose-channel fidelity.

The QEC matrix uses the composite index ``[mu l] = mu*K + l`` (code index
slow, Kraus index fast)::

    M[mu*K + l, nu*K + k] = <mu| K_l^dag K_k |nu>

and the fidelity after transpose-channel recovery is
``F = |Tr_L sqrt(M)|_F^2 / 4``.

Besides the literal route through :func:`qec_matrix` and
:func:`channel_fidelity`, two cheaper evaluations of the same number are
provided for sweeps: :func:`fidelity_from_images` works from the Kraus images
``K_k|mu>`` (sqrt(M) from an SVD, so M is never formed), and
:func:`dephasing_fidelity` works at the channel level, which avoids the long
dephasing Kraus list entirely.
"""

from dataclasses import dataclass, field

import numpy as np

from .channels import KrausSet, _loss_weights
from .fockspace import DimensionMismatch, FockVector, partial_trace_logical, psd_sqrt

__all__ = [
    "CodePair",
    "QECMatrix",
    "qec_matrix",
    "channel_fidelity",
    "kl_epsilon",
    "kraus_images",
    "loss_images",
    "fidelity_from_images",
    "loss_fidelity",
    "dephasing_fidelity",
    "fidelity",
]


@dataclass(frozen=True)
class CodePair:
    """Two codewords with their constraint residuals."""

    word0: FockVector
    word1: FockVector
    provenance: str = "explicit"
    params: tuple = None
    orthogonality_residual: float = field(default=None)
    mean_n_mismatch: float = field(default=None)

    def __post_init__(self):
        if self.word0.dim != self.word1.dim:
            raise DimensionMismatch("codewords must share a cutoff")
        if self.provenance not in ("optimal", "rotated", "explicit"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.orthogonality_residual is None:
            object.__setattr__(self, "orthogonality_residual", float(abs(self.word0.overlap(self.word1))))
        if self.mean_n_mismatch is None:
            n = np.arange(self.word0.dim)
            n0 = np.dot(n, np.abs(self.word0.amplitudes) ** 2)
            n1 = np.dot(n, np.abs(self.word1.amplitudes) ** 2)
            object.__setattr__(self, "mean_n_mismatch", float(abs(n0 - n1)))

    @property
    def cutoff(self):
        return self.word0.cutoff

    def swapped(self):
        return CodePair(self.word1, self.word0, self.provenance, None if self.params is None else self.params[::-1])

    @classmethod
    def from_states(cls, s0, s1, N=None, provenance="explicit", slack=0):
        """Build the pair from two :class:`~pnrqec.genstates.StateParams`."""
        from .channels import cutoff_selection
        from .genstates import fock_amplitudes

        if N is None:
            N = cutoff_selection(s0, s1, slack=slack)
        return cls(fock_amplitudes(s0, N), fock_amplitudes(s1, N), provenance, (s0, s1))


@dataclass(frozen=True)
class QECMatrix:
    entries: np.ndarray
    K: int

    def __post_init__(self):
        if self.entries.shape != (2 * self.K, 2 * self.K):
            raise DimensionMismatch("QEC matrix must be 2K x 2K")


def _check_dims(pair, kraus):
    if pair.cutoff != kraus.cutoff:
        raise DimensionMismatch(f"code cutoff {pair.cutoff} != channel cutoff {kraus.cutoff}")


def kraus_images(kraus, vector):
    """Rows ``K_k |psi>`` for every operator in the set."""
    amps = vector.amplitudes if isinstance(vector, FockVector) else np.asarray(vector)
    return np.einsum("kij,j->ki", kraus.operators, amps)


def qec_matrix(pair, kraus):
    """QEC matrix ``M[[mu l], [nu k]] = <mu|K_l^dag K_k|nu>``."""
    _check_dims(pair, kraus)
    images = np.concatenate([kraus_images(kraus, pair.word0), kraus_images(kraus, pair.word1)])
    return QECMatrix(images.conj() @ images.T, len(kraus))


def channel_fidelity(M):
    """Transpose-channel fidelity ``|Tr_L sqrt(M)|_F^2 / 4``."""
    root = psd_sqrt(M.entries)
    reduced = partial_trace_logical(root, M.K)
    return float(np.linalg.norm(reduced, "fro") ** 2 / 4.0)


def kl_epsilon(pair, kraus):
    """Largest violation of the Knill-Laflamme condition on the code space.

    For every operator pair the 2x2 matrix ``<mu|K_i^dag K_j|nu>`` is compared
    to ``lambda_ij * I`` with ``lambda_ij`` the mean of its diagonal; the
    residual is measured in the operator 2-norm.
    """
    M = qec_matrix(pair, kraus)
    K = M.K
    blocks = M.entries.reshape(2, K, 2, K).transpose(1, 3, 0, 2)  # (i, j, mu, nu)
    lam = 0.5 * (blocks[..., 0, 0] + blocks[..., 1, 1])
    resid = blocks - lam[..., None, None] * np.eye(2)
    return float(np.max(np.linalg.norm(resid, ord=2, axis=(-2, -1))))


def _block_norm(images0, images1, prune):
    """``|Tr_L sqrt(M)|_F^2`` for one block of Kraus images."""
    w0 = np.sum(np.abs(images0) ** 2, axis=1)
    w1 = np.sum(np.abs(images1) ** 2, axis=1)
    keep = (w0 > prune) | (w1 > prune)
    g0, g1 = images0[keep], images1[keep]
    K = g0.shape[0]
    if K == 0:
        return 0.0
    stacked = np.concatenate([g0, g1]).T
    _, sv, wh = np.linalg.svd(stacked, full_matrices=False)
    # sqrt(M) = W S W^dag; its logical trace is sum_mu W_mu S W_mu^dag
    w = wh.conj().T * np.sqrt(sv)[None, :]
    w_mu = (w[:K], w[K:])
    # |sum_mu W_mu S W_mu^dag|_F^2 = sum_{mu,nu} |S^1/2 W_mu^dag W_nu S^1/2|_F^2
    return float(sum(np.sum(np.abs(a.conj().T @ b) ** 2) for a in w_mu for b in w_mu))


def fidelity_from_images(images0, images1, prune=1e-24, blocks=None):
    """Transpose-channel fidelity from Kraus images ``K_k|0>``, ``K_k|1>``.

    ``images*`` have shape ``(K, d)``. Since ``M = G^* G^T`` for the stacked
    images ``G``, ``sqrt(M) = W S W^dag`` from the SVD ``G^T = U S W^dag``.
    Operators whose images carry less than ``prune`` probability on both
    codewords are dropped first; they contribute below round-off.

    ``blocks`` optionally lists ``(rows, cols)`` index pairs such that images
    from different blocks have disjoint supports; ``M`` is then block diagonal
    and each block is handled separately.
    """
    if blocks is None:
        blocks = [(slice(None), slice(None))]
    total = sum(_block_norm(images0[rows][:, cols], images1[rows][:, cols], prune) for rows, cols in blocks)
    return float(total / 4.0)


def loss_images(gamma, vector):
    """``K_k|psi>`` for the loss channel without forming the operators."""
    amps = vector.amplitudes if isinstance(vector, FockVector) else np.asarray(vector)
    d = amps.size
    padded = np.zeros((d, 2 * d), dtype=np.result_type(amps.dtype, float))
    padded[:, :d] = _loss_weights(gamma, d - 1) * amps[None, :]
    # row k, entry i is padded[k, k + i]: a skewed view of the flat buffer
    flat = padded.ravel()
    step = flat.strides[0]
    return np.lib.stride_tricks.as_strided(flat, shape=(d, d), strides=((2 * d + 1) * step, step)).copy()


def loss_fidelity(word0, word1, gamma):
    """Loss-channel fidelity, split by the parity of the number of lost particles.

    For codewords of common parity, images after an even and after an odd
    number of losses live on opposite parities, so ``M`` is block diagonal.
    """
    g0, g1 = loss_images(gamma, word0), loss_images(gamma, word1)
    parity = word0.parity if isinstance(word0, FockVector) else None
    if parity is None or parity != getattr(word1, "parity", None):
        return fidelity_from_images(g0, g1)
    p = 0 if parity == "even" else 1
    blocks = [(slice(0, None, 2), slice(p, None, 2)), (slice(1, None, 2), slice(1 - p, None, 2))]
    return fidelity_from_images(g0, g1, blocks=blocks)


def dephasing_fidelity(word0, word1, gamma_phi, rel_tol=1e-15):
    """Transpose-channel fidelity under dephasing, evaluated at channel level.

    Uses ``F = 1/4 sum_{mu,nu} tr(Q N(|mu><nu|) Q N(|nu><mu|))`` with
    ``Q = N(P)^(-1/2)`` on its support and ``N(X) = C o X``,
    ``C_ij = exp(-gamma_phi (i - j)^2 / 2)``; this is the same number as the
    QEC-matrix formula for any Kraus representation of the channel. The
    channel is diagonal in the number basis, so only the joint support of the
    codewords enters.
    """
    a0, a1 = word0.amplitudes, word1.amplitudes
    idx = np.flatnonzero((a0 != 0) | (a1 != 0))
    kernel = np.exp(-0.5 * gamma_phi * np.subtract.outer(idx, idx) ** 2)
    return _channel_level_fidelity(lambda x: kernel * x, (a0[idx], a1[idx]), rel_tol)


def _channel_level_fidelity(action, words, rel_tol):
    outer = {(m, n): action(np.outer(words[m], words[n].conj())) for m in (0, 1) for n in (0, 1)}
    evals, evecs = np.linalg.eigh(outer[0, 0] + outer[1, 1])
    keep = evals > rel_tol * evals.max()
    e = evecs[:, keep]
    inv_root = 1.0 / np.sqrt(evals[keep])
    scale = np.outer(inv_root, inv_root)
    total = 0.0
    for m in (0, 1):
        for n in (0, 1):
            rot = e.conj().T @ outer[m, n] @ e
            total += np.sum(np.abs(rot) ** 2 * scale)
    return float(total / 4.0)


def fidelity(pair, kraus):
    """Transpose-channel fidelity of ``pair`` under ``kraus``, by the fast route."""
    _check_dims(pair, kraus)
    if kraus.kind == "loss":
        return loss_fidelity(pair.word0, pair.word1, kraus.params["gamma"])
    if kraus.kind == "dephasing":
        return dephasing_fidelity(pair.word0, pair.word1, kraus.params["gamma_phi"])
    return fidelity_from_images(kraus_images(kraus, pair.word0), kraus_images(kraus, pair.word1))
