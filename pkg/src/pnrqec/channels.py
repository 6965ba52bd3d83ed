"""Kraus models of particle loss and dephasing on a truncated Fock space."""

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy.special import gammaln

from .fockspace import DensityMatrix, DimensionMismatch
from .genstates import MAX_CUTOFF, TAIL_TOLERANCE, CutoffTooSmall, fock_coefficients, mean_particle_number

__all__ = [
    "GammaOutOfRange",
    "KrausSet",
    "loss_kraus",
    "dephasing_kraus",
    "identity_kraus",
    "dephasing_kraus_count",
    "apply_channel",
    "compose",
    "cutoff_selection",
]


class GammaOutOfRange(ValueError):
    pass


def _completeness_defect(ops):
    dim = ops.shape[1]
    total = np.einsum("kji,kjl->il", ops.conj(), ops)
    return float(np.linalg.norm(total - np.eye(dim)))


@dataclass(frozen=True)
class KrausSet:
    """Ordered Kraus operators, stacked as an array of shape ``(K, N+1, N+1)``."""

    operators: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)
    completeness_defect: float = None

    def __post_init__(self):
        ops = np.asarray(self.operators)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise ValueError("operators must have shape (K, d, d)")
        ops.setflags(write=False)
        object.__setattr__(self, "operators", ops)
        if self.completeness_defect is None:
            object.__setattr__(self, "completeness_defect", _completeness_defect(ops))

    @property
    def cutoff(self):
        return self.operators.shape[1] - 1

    def __len__(self):
        return self.operators.shape[0]

    def __iter__(self):
        return iter(self.operators)

    def __getitem__(self, k):
        return self.operators[k]


def identity_kraus(N):
    return KrausSet(np.eye(N + 1)[None], "identity")


@lru_cache(maxsize=256)
def _loss_weights(gamma, N):
    """``w[k, j] = sqrt(C(j, k) gamma^k (1-gamma)^(j-k))`` for ``j >= k`` (read-only)."""
    j = np.arange(N + 1)[None, :]
    k = np.arange(N + 1)[:, None]
    valid = j >= k
    jk = np.where(valid, j - k, 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logc = gammaln(j + 1) - gammaln(k + 1) - gammaln(jk + 1)
        # 0 * log(0) terms come from gamma in {0, 1}; treat 0**0 as 1
        lg = np.where(k == 0, 0.0, k * np.log(gamma)) if gamma > 0 else np.where(k == 0, 0.0, -np.inf)
        l1 = np.where(jk == 0, 0.0, jk * np.log1p(-gamma)) if gamma < 1 else np.where(jk == 0, 0.0, -np.inf)
        w = np.exp(0.5 * (logc + lg + l1))
    out = np.where(valid, w, 0.0)
    out.setflags(write=False)
    return out


def loss_kraus(gamma, N):
    """Loss (amplitude damping) Kraus operators ``K_0 .. K_N``.

    ``<j-k|K_k|j> = sqrt(C(j, k) gamma^k (1-gamma)^(j-k))``.
    """
    if not 0.0 <= gamma <= 1.0:
        raise GammaOutOfRange(f"gamma must lie in [0, 1], got {gamma}")
    w = _loss_weights(gamma, N)
    ops = np.zeros((N + 1, N + 1, N + 1))
    for k in range(N + 1):
        j = np.arange(k, N + 1)
        ops[k, j - k, j] = w[k, j]
    return KrausSet(ops, "loss", {"gamma": gamma})


def dephasing_kraus_count(gamma_phi, N):
    """Number of dephasing operators kept: the Poisson tail beyond it is < 1e-12."""
    lam = gamma_phi * N**2
    return int(math.ceil(lam + 10.0 * math.sqrt(lam) + 20.0))


def dephasing_kraus(gamma_phi, N):
    """Dephasing Kraus operators ``D_k = sqrt(g^k/k!) exp(-g n^2 / 2) n^k``."""
    if gamma_phi < 0:
        raise GammaOutOfRange(f"gamma_phi must be non-negative, got {gamma_phi}")
    if gamma_phi == 0:
        return KrausSet(np.eye(N + 1)[None], "dephasing", {"gamma_phi": 0.0})
    kmax = dephasing_kraus_count(gamma_phi, N)
    j = np.arange(N + 1, dtype=float)
    k = np.arange(kmax)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        logd = 0.5 * (k * math.log(gamma_phi) - gammaln(k + 1)) - 0.5 * gamma_phi * j**2 + k * np.log(j)
    logd = np.where((k == 0) & (j == 0), 0.0, logd)
    diag = np.exp(logd)
    ops = np.zeros((kmax, N + 1, N + 1))
    idx = np.arange(N + 1)
    ops[:, idx, idx] = diag
    return KrausSet(ops, "dephasing", {"gamma_phi": gamma_phi})


def _as_matrix(rho):
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)


def apply_channel(rho, kraus):
    """``sum_k K_k rho K_k^dag``."""
    mat = _as_matrix(rho)
    if mat.shape[0] != kraus.cutoff + 1:
        raise DimensionMismatch(f"state cutoff {mat.shape[0] - 1} != channel cutoff {kraus.cutoff}")
    ops = kraus.operators
    out = np.einsum("kij,jl,kml->im", ops, mat, ops.conj())
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(out, physical=False)
    return out


def compose(first, second):
    """Channel ``first o second`` as the product set ``{A B}``.

    ``first`` acts last. Operators are ordered with the ``second`` index fast.
    """
    if first.cutoff != second.cutoff:
        raise DimensionMismatch("cannot compose channels with different cutoffs")
    ops = np.einsum("aij,bjk->abik", first.operators, second.operators)
    ops = ops.reshape(-1, first.cutoff + 1, first.cutoff + 1)
    params = {**first.params, **second.params}
    return KrausSet(ops, "composed", params)


def _tail_cutoff(s, nmax):
    amps = fock_coefficients(s.m, s.r, s.z, nmax + 1)
    probs = amps**2
    missing = max(0.0, 1.0 - probs.sum())
    # tail[N] = probability beyond N
    tail = np.cumsum(probs[::-1])[::-1]
    tail = np.append(tail[1:], 0.0) + missing
    ok = np.nonzero(tail < TAIL_TOLERANCE)[0]
    if ok.size == 0:
        return None
    return int(ok[0])


def cutoff_selection(*states, max_cutoff=MAX_CUTOFF, slack=0):
    """Common Fock cutoff for a set of states.

    For each state the smallest ``N`` with discarded probability beyond ``N``
    below ``TAIL_TOLERANCE`` and ``N >= 4<n> + 10``; the maximum over the states
    is returned (plus ``slack``) so that all vectors share one dimension.
    """
    best = 0
    for s in states:
        floor = int(math.ceil(4.0 * mean_particle_number(s) + 10.0))
        tail_n = _tail_cutoff(s, max_cutoff + slack)
        if tail_n is None:
            raise CutoffTooSmall(f"state {s} needs a cutoff above {max_cutoff}")
        best = max(best, floor, tail_n)
    best += slack
    if best > max_cutoff + slack:
        raise CutoffTooSmall(f"required cutoff {best} exceeds {max_cutoff}")
    return best
