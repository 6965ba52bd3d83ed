"""States heralded by number-resolving detection on a two-mode Gaussian state.

Two squeezed vacua (squeezings ``r1``, ``r2``) meet on a beam splitter with
transmission ``t``; detecting ``m`` particles in one output port leaves the
other port in

    |Psi_m(r, z)> = S(r) sum_k A_k(m, z) |k>,     k = m, m-2, ...

a finite superposition of squeezed Fock states. The module provides the
scheme <-> state parameter maps, closed-form Fock amplitudes and
characteristics of these states, the heralding probability, the Wigner
function, and a brute-force two-mode simulation used as an oracle.

``z`` is real throughout and enters the coefficients with its sign,
``A_k ~ z^((m-k)/2)``.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
import math

import numpy as np
from scipy import optimize
from scipy.linalg import expm
from scipy.special import expit, gammaln

from .fockspace import FockVector, squeeze_matrix
from .specialfn import hermite_poly, hyp2f1_coefficients

__all__ = [
    "CutoffTooSmall",
    "DegenerateScheme",
    "UnphysicalRegion",
    "NoSolutionFound",
    "NoSymmetricPoint",
    "InvalidA",
    "EmptySupport",
    "SchemeParams",
    "StateParams",
    "SchemeState",
    "BEAM_SPLITTER_CONVENTION",
    "MAX_CUTOFF",
    "TAIL_TOLERANCE",
    "scheme_to_state",
    "state_to_scheme",
    "superposition_coeffs",
    "fock_coefficients",
    "fock_amplitudes",
    "two_mode_oracle",
    "quadrature_variances",
    "symmetry_r",
    "inner_product",
    "inner_product_array",
    "mean_particle_number",
    "generation_probability",
    "maximize_probability_over_a",
    "wigner",
    "coeff_distribution_variance",
]

TAIL_TOLERANCE = 1e-9
MAX_CUTOFF = 400

# Input 1 reaches the output port with amplitude sqrt(t) (real coefficients),
# so the detector sees a_det = sqrt(1-t) a1 + sqrt(t) a2. Kept as a single
# switch so that the alternative reading of t (amplitude rather than
# intensity) can be compared against the closed forms.
BEAM_SPLITTER_CONVENTION = "intensity"


class CutoffTooSmall(ValueError):
    pass


class DegenerateScheme(ValueError):
    pass


class UnphysicalRegion(ValueError):
    pass


class NoSolutionFound(RuntimeError):
    def __init__(self, message, best_residual=np.inf, best=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.best = best


class NoSymmetricPoint(ValueError):
    pass


class InvalidA(ValueError):
    pass


class EmptySupport(ValueError):
    pass


@dataclass(frozen=True)
class SchemeParams:
    """Input squeezings of the two oscillators and beam-splitter transmission."""

    r1: float
    r2: float
    t: float

    def __post_init__(self):
        if not (0.0 < self.t < 1.0):
            raise ValueError(f"t must lie in (0, 1), got {self.t}")
        if not (np.isfinite(self.r1) and np.isfinite(self.r2)):
            raise ValueError("squeezing parameters must be finite")

    @classmethod
    def from_db(cls, s1_db, s2_db, t):
        from .specialfn import squeezing_db_to_r

        return cls(float(squeezing_db_to_r(s1_db)), float(squeezing_db_to_r(s2_db)), t)

    def to_db(self):
        from .specialfn import r_to_squeezing_db

        return float(r_to_squeezing_db(self.r1)), float(r_to_squeezing_db(self.r2))


@dataclass(frozen=True)
class StateParams:
    m: int
    r: float
    z: float
    a: float = None

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 0:
            raise ValueError(f"m must be a non-negative integer, got {self.m}")
        if isinstance(self.z, complex) or isinstance(self.r, complex):
            raise TypeError("r and z must be real")
        if self.a is not None and not self.a > 1.0:
            raise InvalidA(f"a must exceed 1, got {self.a}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "z", float(self.z))

    def rotated(self):
        """The same state rotated by pi/2 in phase space."""
        return StateParams(self.m, -self.r, -self.z, self.a)


@dataclass(frozen=True)
class SchemeState:
    """Result of :func:`scheme_to_state`."""

    r: float
    z: float
    a: float
    r_sign_confident: bool
    sign_margin: float


# --------------------------------------------------------------------------
# hypergeometric building blocks


@lru_cache(maxsize=None)
def _pochhammer_ratios(h, odd):
    """``(-h)_j / ((lower)_j j!)`` as floats, ``lower = 1/2 + odd``, for ``j = 0..h``."""
    lower = Fraction(1, 2) + odd
    out, c = [], Fraction(1)
    for j in range(h + 1):
        out.append(float(c))
        c *= Fraction(-h + j) / ((lower + j) * (j + 1))
    return tuple(out)


@lru_cache(maxsize=None)
def _overlap_ratios(hb, hk, odd):
    """``(-hb)_j (-hk)_j / ((lower)_j j!)`` as floats, ``lower = 1/2 + odd``."""
    lower = Fraction(1, 2) + odd
    out, c = [], Fraction(1)
    for j in range(min(hb, hk) + 1):
        out.append(float(c))
        c *= Fraction((-hk + j) * (-hb + j)) / ((lower + j) * (j + 1))
    return tuple(out)


@lru_cache(maxsize=None)
def _series_coeffs(m, second):
    """Float coefficients of the two series below, highest order first."""
    params = (Fraction(3 - m, 2), Fraction(2 - m, 2), 2) if second else (Fraction(1 - m, 2), Fraction(-m, 2), 1)
    return tuple(float(c) for c in reversed(hyp2f1_coefficients(*params)))


def _horner(coeffs, x):
    if np.ndim(x) == 0:
        x = float(x)
        acc = 0.0
        for c in coeffs:
            acc = acc * x + c
        return acc
    acc = np.zeros_like(x, dtype=float)
    for c in coeffs:
        acc = acc * x + c
    return acc


def _norm_hyp(m, z):
    """``2F1((1-m)/2, -m/2; 1; z^2)``, the squared norm of the unsqueezed sum."""
    return _horner(_series_coeffs(m, False), np.square(z))


def _second_hyp(m, z):
    """``m(m-1) 2F1((3-m)/2, 1-m/2; 2; z^2)``; identically zero for m < 2."""
    if m < 2:
        return np.zeros_like(np.asarray(z, dtype=float))[()]
    return m * (m - 1) * _horner(_series_coeffs(m, True), np.square(z))


def _unsqueezed_moments(m, z):
    """``(<n>, <a^2>)`` of ``sum_k A_k |k>``."""
    f1 = _norm_hyp(m, z)
    g = _second_hyp(m, z) / f1
    return m - 0.5 * np.square(z) * g, 0.5 * z * g


# --------------------------------------------------------------------------
# scheme <-> state


def _scheme_r_z_a(r1, r2, t):
    """Vectorised forward map; ``r`` carries the sign of ``t tanh r1 + (1-t) tanh r2``."""
    sh = np.sinh(r1 - r2)
    z = -((1 - t) * np.sinh(2 * r1) + t * np.sinh(2 * r2)) / (2 * sh**2 * (1 - t) * t)
    x = t * np.tanh(r1) + (1 - t) * np.tanh(r2)
    r = np.arctanh(x)
    a = np.exp(2 * r2) * t + np.exp(2 * r1) * (1 - t)
    return r, z, a


def scheme_to_state(p, m=2, resolve_sign="oracle", cutoff=None):
    """Map scheme parameters to ``(r, z, a)``.

    The closed form fixes ``cosh r`` only. With ``resolve_sign="oracle"`` both
    signs of ``r`` are compared against :func:`two_mode_oracle` for detection
    outcome ``m`` and the better overlap wins; ``r_sign_confident`` records
    whether the overlap margin exceeded 1e-6. With ``resolve_sign="analytic"``
    the sign of ``t tanh r1 + (1-t) tanh r2`` is used without simulation.
    """
    r1, r2, t = p.r1, p.r2, p.t
    if abs(np.sinh(r1 - r2)) < 1e-14:
        raise DegenerateScheme("r1 == r2: z is undefined")
    radicand = (1 - t * np.tanh(r1) - (1 - t) * np.tanh(r2)) * (1 + t * np.tanh(r1) + (1 - t) * np.tanh(r2))
    if radicand <= 0:
        raise UnphysicalRegion("cosh r radicand is not positive")
    r_abs = float(np.arccosh(1.0 / np.sqrt(radicand)))
    r_signed, z, a = (float(v) for v in _scheme_r_z_a(r1, r2, t))

    if resolve_sign == "analytic" or r_abs < 1e-12:
        return SchemeState(r_signed, z, a, True, np.inf)
    if resolve_sign != "oracle":
        raise ValueError(f"unknown resolve_sign={resolve_sign!r}")

    psi, _ = two_mode_oracle(p, m, cutoff)
    overlaps = []
    for r in (r_abs, -r_abs):
        cand = fock_amplitudes(StateParams(m, r, z), psi.cutoff, renormalize=True, strict=False)
        overlaps.append(abs(np.vdot(cand.amplitudes, psi.amplitudes)) ** 2)
    best = int(np.argmax(overlaps))
    margin = abs(overlaps[0] - overlaps[1])
    r = r_abs if best == 0 else -r_abs
    return SchemeState(r, z, a, margin > 1e-6, margin)


# r1 and logit(t) grid for seeding the inverse map; |r1| <= 5 is ~43 dB
_INVERSE_R1 = np.linspace(-5.0, 5.0, 401)
_INVERSE_U = np.linspace(-12.0, 12.0, 401)


def _inverse_residuals(r1, u, x, log_a, z, zscale):
    """``(log a - log a*, (z - z*)/zscale)`` with ``r2`` fixed by ``tanh r = x``.

    Points where the implied ``tanh r2`` leaves (-1, 1) are nan.
    """
    t = expit(u)
    with np.errstate(all="ignore"):
        u2 = (x - t * np.tanh(r1)) / (1.0 - t)
        r2 = np.where(np.abs(u2) < 1.0, np.arctanh(np.clip(u2, -1.0, 1.0)), np.nan)
        _, zz, aa = _scheme_r_z_a(r1, r2, t)
        return np.log(aa) - log_a, (zz - z) / zscale, r2, t


def state_to_scheme(r, z, a, tol=1e-8):
    """Invert the scheme map: find ``(r1, r2, t)`` producing ``(r, z, a)``.

    ``tanh r = t tanh r1 + (1-t) tanh r2`` eliminates ``r2``; the remaining two
    equations in ``(r1, logit t)`` are seeded from the grid cells where both
    residuals change sign and polished with a 2-D root solve. Among all
    solutions the one with the smallest maximal ``|r_i|`` is returned. The map
    is invariant under ``(r1, r2, t) -> (r2, r1, 1 - t)``; the representative
    with ``r1 > r2`` is reported.
    """
    if not a > 1.0:
        raise InvalidA(f"a must exceed 1, got {a}")
    x, log_a = math.tanh(r), math.log(a)
    zscale = max(1.0, abs(z))
    R1, U = np.meshgrid(_INVERSE_R1, _INVERSE_U, indexing="ij")
    fa, fz, _, _ = _inverse_residuals(R1, U, x, log_a, z, zscale)

    def changes(f):
        corners = np.stack([f[:-1, :-1], f[1:, :-1], f[:-1, 1:], f[1:, 1:]])
        with np.errstate(invalid="ignore"):
            return np.all(np.isfinite(corners), axis=0) & (corners.min(axis=0) <= 0) & (corners.max(axis=0) >= 0)

    cells = np.argwhere(changes(fa) & changes(fz))

    def residual(v):
        ra, rz, _, _ = _inverse_residuals(v[0], v[1], x, log_a, z, zscale)
        out = np.array([ra, rz], dtype=float)
        return out if np.all(np.isfinite(out)) else np.full(2, 1e6)

    found, best_res = [], np.inf
    for i, j in cells:
        seed = (0.5 * (R1[i, j] + R1[i + 1, j]), 0.5 * (U[i, j] + U[i, j + 1]))
        sol = optimize.root(residual, seed, method="hybr", options={"xtol": 1e-14})
        res = float(np.max(np.abs(residual(sol.x))))
        best_res = min(best_res, res)
        if res < tol:
            _, _, r2, t = _inverse_residuals(sol.x[0], sol.x[1], x, log_a, z, zscale)
            found.append((float(sol.x[0]), float(r2), float(t)))
    if not found:
        raise NoSolutionFound(f"no scheme reproduces (r={r}, z={z}, a={a})", best_res, None)
    r1, r2, t = min(found, key=lambda v: (max(abs(v[0]), abs(v[1])), v))
    if r1 < r2:
        r1, r2, t = r2, r1, 1.0 - t
    return SchemeParams(r1, r2, t)


# --------------------------------------------------------------------------
# amplitudes


def superposition_coeffs(m, z):
    """Coefficients ``A_k(m, z)`` for ``k = m mod 2, m mod 2 + 2, ..., m``."""
    if m < 0:
        raise ValueError("m must be non-negative")
    k = np.arange(m % 2, m + 1, 2)
    j = (m - k) // 2
    logmag = (
        0.5 * (gammaln(m + 1) - gammaln(k + 1))
        - gammaln(j + 1)
        + j * (np.log(abs(z)) - np.log(2.0) if z != 0 else 0.0)
    )
    coeffs = np.exp(logmag) * np.sign(z) ** j if z != 0 else (j == 0).astype(float)
    return coeffs / math.sqrt(_norm_hyp(m, z))


def fock_coefficients(m, r, z, N):
    """Closed-form Fock amplitudes ``<n|Psi_m(r, z)>`` for ``n = 0..N``.

    The hypergeometric factor of the expansion is multiplied through by its
    prefactor so that ``r = 0`` and ``z = -tanh r`` need no special casing.
    """
    h, odd = divmod(m, 2)
    th, ch = math.tanh(r), math.cosh(r)
    k = np.arange((N - odd) // 2 + 1)

    total = np.zeros(k.size)
    for j, c in enumerate(_pochhammer_ratios(h, odd)):
        # (-k)_j (-1)^j = k!/(k-j)!
        valid = k >= j
        falling = np.exp(gammaln(k + 1) - gammaln(np.maximum(k - j, 0) + 1))
        with np.errstate(divide="ignore", invalid="ignore"):
            powk = np.where(valid, th ** np.maximum(k - j, 0).astype(float), 0.0)
        total += np.where(valid, c * falling * powk, 0.0) * (th + z) ** (h - j) / ch ** (2 * j)

    logpref = 0.5 * (gammaln(m + 1) + gammaln(2 * k + odd + 1)) - gammaln(h + 1) - gammaln(k + 1) - (h + k) * math.log(2)
    amps = (-1.0) ** k * np.exp(logpref) * total
    amps /= math.sqrt(_norm_hyp(m, z) * ch ** (1 + 2 * odd))
    out = np.zeros(N + 1)
    out[odd::2] = amps
    return out


def fock_amplitudes(s, N, renormalize=True, strict=True):
    """Truncated Fock vector of ``|Psi_m(r, z)>`` with cutoff ``N``.

    Raises :class:`CutoffTooSmall` if the discarded tail probability exceeds
    ``TAIL_TOLERANCE`` (``strict=False`` downgrades this to a renormalisation).
    """
    amps = fock_coefficients(s.m, s.r, s.z, N)
    kept = float(np.dot(amps, amps))
    tail = 1.0 - kept
    if strict and tail > TAIL_TOLERANCE:
        raise CutoffTooSmall(f"cutoff {N} discards probability {tail:.3e}")
    if renormalize:
        amps = amps / math.sqrt(kept)
    return FockVector(amps, "odd" if s.m % 2 else "even", normalized=renormalize, truncation_loss=max(tail, 0.0))


# --------------------------------------------------------------------------
# brute-force two-mode simulation


def _squeezed_vacuum(r, N, pad=40):
    col = squeeze_matrix(r, N + pad).matrix[: N + 1, 0].real
    return col


def _beam_splitter_angle(t):
    """Angle whose cosine is the detector-port weight of input 1."""
    if BEAM_SPLITTER_CONVENTION == "intensity":
        return math.acos(math.sqrt(1.0 - t))
    return math.acos(1.0 - t)


def two_mode_oracle(p, m, N=None):
    """Simulate the heralding scheme in the truncated two-mode Fock space.

    Squeezed vacua are built by matrix exponentials, the beam splitter is
    applied block-wise on fixed total particle number, and the measured port
    is projected on ``|m>``. Returns the normalised conditional state of the
    other port and the heralding probability.
    """
    if N is None:
        rmax = max(abs(p.r1), abs(p.r2))
        # squeezed-vacuum weights fall like tanh(r)^(2k)
        th = math.tanh(rmax)
        N = 30 if th < 1e-3 else int(min(600, max(30, 2 * math.log(1e-14) / math.log(th) + 20)))
        N += m
    s1 = _squeezed_vacuum(p.r1, N)
    s2 = _squeezed_vacuum(p.r2, N)
    for s in (s1, s2):
        if 1.0 - np.dot(s, s) > 1e-10:
            raise CutoffTooSmall(f"cutoff {N} truncates an input squeezed vacuum")
    psi_in = np.outer(s1, s2)

    theta = _beam_splitter_angle(p.t)
    out = np.zeros(2 * N + 1)
    for total in range(m, 2 * N + 1):
        lo, hi = max(0, total - N), min(total, N)
        n1 = np.arange(lo, hi + 1)
        block_in = psi_in[n1, total - n1]
        if m < lo or m > hi or not np.any(block_in):
            continue
        # generator theta (a1^dag a2 - a1 a2^dag) on |n1, total - n1>
        off = np.sqrt((n1[:-1] + 1.0) * (total - n1[:-1]))
        gen = theta * (np.diag(off, -1) - np.diag(off, 1))
        u = expm(gen)
        out[total - m] = u[m - lo] @ block_in
    prob = float(np.dot(out, out))
    if prob <= 0:
        return FockVector.fock(0, 2 * N), 0.0
    state = out / math.sqrt(prob)
    # the upper half of the output is incomplete; trim to the trusted range
    trusted = state[: N + 1]
    if 1.0 - np.dot(trusted, trusted) > 1e-9:
        raise CutoffTooSmall(f"cutoff {N} too small for the conditional state")
    return FockVector.from_amplitudes(trusted, normalize=True), prob


# --------------------------------------------------------------------------
# characteristics


def quadrature_variances(s):
    """``(Var x, Var p)`` with ``x = (a + a^dag)/sqrt2``, ``p = i(a^dag - a)/sqrt2``."""
    g = _second_hyp(s.m, s.z) / _norm_hyp(s.m, s.z)
    base = 2 * s.m + 1
    var_x = 0.5 * math.exp(-2 * s.r) * (base - s.z * (s.z - 1) * g)
    var_p = 0.5 * math.exp(2 * s.r) * (base - s.z * (s.z + 1) * g)
    return float(var_x), float(var_p)


def symmetry_r(m, z):
    """The squeezing ``r`` at which both quadrature variances coincide."""
    g = _second_hyp(m, z) / _norm_hyp(m, z)
    num = (2 * m + 1) - z * (z - 1) * g
    den = (2 * m + 1) - z * (z + 1) * g
    if not (num > 0 and den > 0):
        raise NoSymmetricPoint(f"no symmetric squeezing for m={m}, z={z}")
    r = 0.25 * math.log(num / den)
    var_x, var_p = quadrature_variances(StateParams(m, r, z))
    if abs(var_x - var_p) > 1e-9 * max(1.0, var_x):
        raise NoSymmetricPoint("variances do not coincide at the computed r")
    return r


def mean_particle_number(s):
    """Closed-form ``<n>`` of ``|Psi_m(r, z)>``."""
    return float(_mean_n(s.m, s.r, s.z))


def _mean_n(m, r, z):
    n0, a2 = _unsqueezed_moments(m, z)
    return np.cosh(2 * r) * (n0 + 0.5) - np.sinh(2 * r) * a2 - 0.5


def _overlap_sum(hb, hk, z_bra, z_ket, dr, odd):
    """Regularised hypergeometric part of the same-parity overlap."""
    th, ch = np.tanh(dr), np.cosh(dr)
    total = 0.0
    for j, c in enumerate(_overlap_ratios(hb, hk, odd)):
        total = total + c * (z_ket - th) ** (hk - j) * (z_bra + th) ** (hb - j) / ch ** (2 * j)
    return total


def inner_product(s1, s2):
    """``<Psi_m1(r1, z1)|Psi_m2(r2, z2)>`` from the closed form.

    Zero for opposite parity. The expression depends on ``r1 - r2`` only.
    """
    if (s1.m - s2.m) % 2:
        return 0.0
    odd = s1.m % 2
    hb, hk = s1.m // 2, s2.m // 2
    dr = s1.r - s2.r
    logpref = 0.5 * (gammaln(s1.m + 1) + gammaln(s2.m + 1)) - gammaln(hb + 1) - gammaln(hk + 1) - (hb + hk) * math.log(2)
    val = math.exp(logpref) * _overlap_sum(hb, hk, s1.z, s2.z, dr, odd)
    val /= math.sqrt(math.cosh(dr) ** (1 + 2 * odd) * _norm_hyp(s1.m, s1.z) * _norm_hyp(s2.m, s2.z))
    return float(val)


def inner_product_array(m, r_bra, z_bra, r_ket, z_ket):
    """Vectorised :func:`inner_product` for two states with the same ``m``."""
    odd = m % 2
    h = m // 2
    dr = np.asarray(r_bra, dtype=float) - np.asarray(r_ket, dtype=float)
    z_bra = np.asarray(z_bra, dtype=float)
    z_ket = np.asarray(z_ket, dtype=float)
    logpref = gammaln(m + 1) - 2 * gammaln(h + 1) - 2 * h * math.log(2)
    val = math.exp(logpref) * _overlap_sum(h, h, z_bra, z_ket, dr, odd)
    val = val / np.sqrt(np.cosh(dr) ** (1 + 2 * odd) * _norm_hyp(m, z_bra) * _norm_hyp(m, z_ket))
    return val


def generation_probability(m, a, z):
    """Heralding probability ``P_m(a, z)`` of detecting ``m`` particles.

    No scheme with ``a > 1`` produces ``z >= 1`` (such states come from the
    rotated scheme with ``a < 1``), and there the expression is not a
    probability, so :class:`UnphysicalRegion` is raised.
    """
    if not a > 1.0:
        raise InvalidA(f"a must exceed 1, got {a}")
    if not z < 1.0:
        raise UnphysicalRegion(f"z = {z} >= 1 is not reached by any scheme with a > 1")
    q = abs(1.0 - z)
    inner = a * (q - 1.0) + 1.0
    if inner < 0:
        return 0.0
    val = 2.0 * (a - 1.0) ** m / ((a + 1.0) ** (m + 1) * q ** (m + 0.5)) * math.sqrt(inner) * _norm_hyp(m, z)
    return float(val)


def _a_upper(z, a_max):
    q = abs(1.0 - z)
    if q < 1.0:
        return min(a_max, 1.0 / (1.0 - q))
    return a_max


def maximize_probability_over_a(m, z, a_max=1e3):
    """Maximise :func:`generation_probability` over ``a`` in ``(1, a_max]``.

    A log-spaced scan brackets the maximum and a bounded Brent search refines
    it, so the result does not depend on any random start.
    """
    if not z < 1.0:
        raise UnphysicalRegion(f"z = {z} >= 1 is not reached by any scheme with a > 1")
    hi = _a_upper(z, a_max)
    lo = 1.0 + 1e-12
    # scan in log(a - 1) to resolve both the a -> 1 and large-a regimes
    u = np.linspace(math.log(lo - 1.0 + 1e-9), math.log(hi - 1.0), 400)
    vals = np.array([generation_probability(m, 1.0 + math.exp(x), z) for x in u])
    i = int(np.argmax(vals))
    ua, ub = u[max(i - 1, 0)], u[min(i + 1, u.size - 1)]
    if ub <= ua:
        return 1.0 + math.exp(u[i]), float(vals[i])
    res = optimize.minimize_scalar(
        lambda x: -generation_probability(m, 1.0 + math.exp(x), z),
        bounds=(ua, ub),
        method="bounded",
        options={"xatol": 1e-12},
    )
    a_best, p_best = 1.0 + math.exp(res.x), -res.fun
    if vals[i] > p_best:
        a_best, p_best = 1.0 + math.exp(u[i]), float(vals[i])
    return float(a_best), float(p_best)


def wigner(s, x, p):
    """Closed-form Wigner function ``W_m(r, z, x, p)``.

    For ``z != 0`` the complex Hermite form is evaluated and the (round-off)
    imaginary part is checked and dropped; ``z = 0`` uses the squeezed-Fock
    limit, where the Hermite sum collapses to a Laguerre polynomial.
    """
    m, r, z = s.m, s.r, s.z
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    u = math.exp(r) * x + 1j * math.exp(-r) * p
    envelope = np.exp(-np.exp(-2 * r) * p**2 - np.exp(2 * r) * x**2) * (-1) ** m / (math.pi * _norm_hyp(m, z))
    total = np.zeros(np.broadcast(x, p).shape, dtype=complex)
    if z == 0.0:
        w2 = np.abs(u) ** 2
        for k in range(m + 1):
            total += math.comb(m, k) / math.factorial(k) * (-2 * w2) ** k
    else:
        # the Hermite form is written for the opposite sign of z to the amplitudes
        zw = -z
        sq = np.sqrt(complex(zw))
        for k in range(m + 1):
            hk = hermite_poly(k, u / sq) * hermite_poly(k, np.conj(u) / sq)
            total += math.comb(m, k) / math.factorial(k) * (-zw / 2) ** k * hk
    out = envelope * total
    if np.max(np.abs(out.imag), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(out.real), initial=0.0)):
        raise FloatingPointError("Wigner function acquired an imaginary part")
    out = out.real
    return out[()] if out.ndim == 0 else out


def coeff_distribution_variance(v, threshold=1e-9):
    """Variance of the moduli of the Fock coefficients above ``threshold``."""
    amps = v.amplitudes if isinstance(v, FockVector) else np.asarray(v)
    mags = np.abs(amps)
    mags = mags[mags > threshold]
    if mags.size == 0:
        raise EmptySupport("no coefficient exceeds the threshold")
    return float(np.var(mags))
