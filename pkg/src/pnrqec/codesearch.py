"""Constraint solving and fidelity optimisation over generated codeword pairs.

A free pair is fixed by ``(m, <n>, r2)``: ``z2`` solves ``<n>(m, r2, z2) = <n>``
and ``(r1, z1)`` is an orthogonal partner on the same level set of ``<n>``.

The level set is handled in closed form. At fixed ``z`` the mean particle
number reads ``rho(z) cosh(2r - 2r*(z)) - 1/2``, so every ``z`` carries at most
two points ``r = r* +- arccosh((<n> + 1/2)/rho)/2``. Parametrising ``z = tan(theta)``
turns the level set into a few closed loops in ``(theta, r)``; orthogonal
partners are the sign changes of the (real) overlap along these loops, refined
by Brent's method, or by a 2-D Newton solve where a loop turns around. All
roots are kept and the best one under the channel is reported.
"""

from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
import math

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import optimize

from .channels import cutoff_selection
from .genstates import (
    CutoffTooSmall,
    NoSolutionFound,
    SchemeParams,
    StateParams,
    UnphysicalRegion,
    _mean_n,
    _unsqueezed_moments,
    coeff_distribution_variance,
    fock_amplitudes,
    inner_product,
    inner_product_array,
    maximize_probability_over_a,
    state_to_scheme,
)
from .qec import CodePair, dephasing_fidelity, loss_fidelity
from .specialfn import hyp2f1_coefficients

__all__ = [
    "NoOrthogonalPartner",
    "InfeasibleScheme",
    "ConstraintViolation",
    "SearchConfig",
    "SweepResult",
    "FeasibilityReport",
    "z_for_mean_n",
    "level_set_r",
    "orthogonal_partners",
    "orthogonal_partner_z",
    "solve_constraints",
    "constraint_solutions",
    "rotated_solutions",
    "rotated_pair",
    "pair_fidelity",
    "optimize_loss",
    "optimize_rotated",
    "optimize_dephasing",
    "relative_gain",
    "feasibility_report",
    "codeword_generation",
    "coeff_variance_report",
    "default_mean_n_grid",
]

DEFAULT_TOLERANCES = {"orthogonality": 1e-8, "mean_n": 1e-6, "optimizer": 1e-6}


class NoOrthogonalPartner(RuntimeError):
    def __init__(self, message, best_residual=math.inf):
        super().__init__(message)
        self.best_residual = best_residual


class InfeasibleScheme(RuntimeError):
    """The codeword lies beyond the reachable set of the generation scheme."""


class ConstraintViolation(ValueError):
    pass


def default_mean_n_grid():
    return tuple(float(x) for x in np.round(np.arange(1.0, 12.0 + 1e-9, 0.25), 10))


@dataclass(frozen=True)
class SearchConfig:
    """Everything that determines a sweep; equal configs give identical results."""

    m: int
    gamma: float = None
    gamma_phi: float = None
    mean_n: float = None
    mean_n_grid: tuple = field(default_factory=default_mean_n_grid)
    r2_bounds: tuple = (-1.8, 1.8)
    seed_grid_density: int = 73
    theta_points: int = 600
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    max_m: int = 6

    def __post_init__(self):
        if self.m == 1:
            raise ValueError("m = 1 yields squeezed single-particle states that are never orthogonal")
        if self.m < 2:
            raise ValueError(f"m must be at least 2, got {self.m}")
        if self.m > self.max_m:
            raise ValueError(f"m = {self.m} exceeds max_m = {self.max_m}")
        if self.gamma is not None and self.gamma_phi is not None:
            raise ValueError("give either gamma or gamma_phi, not both")
        if self.gamma is not None and not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.gamma_phi is not None and self.gamma_phi < 0:
            raise ValueError(f"gamma_phi must be non-negative, got {self.gamma_phi}")
        lo, hi = self.r2_bounds
        if not lo < hi:
            raise ValueError("r2_bounds must be an increasing interval")
        object.__setattr__(self, "mean_n_grid", tuple(float(x) for x in self.mean_n_grid))
        object.__setattr__(self, "r2_bounds", (float(lo), float(hi)))
        object.__setattr__(self, "tolerances", {**DEFAULT_TOLERANCES, **dict(self.tolerances)})

    @property
    def channel(self):
        if self.gamma is not None:
            return "loss"
        if self.gamma_phi is not None:
            return "dephasing"
        return None

    @property
    def noise(self):
        return self.gamma if self.gamma is not None else self.gamma_phi

    def with_noise(self, value):
        if self.channel == "loss":
            return replace(self, gamma=value)
        return replace(self, gamma_phi=value)

    def as_dict(self):
        return {
            "m": self.m,
            "gamma": self.gamma,
            "gamma_phi": self.gamma_phi,
            "mean_n": self.mean_n,
            "mean_n_grid": list(self.mean_n_grid),
            "r2_bounds": list(self.r2_bounds),
            "seed_grid_density": self.seed_grid_density,
            "theta_points": self.theta_points,
            "tolerances": dict(self.tolerances),
            "max_m": self.max_m,
        }


@dataclass
class SweepResult:
    """Per-point optimum of a sweep, assembled in axis order.

    Failed points keep ``nan`` entries and a reason in ``errors``.
    """

    axis_name: str
    axis: np.ndarray
    fidelity: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    probability: np.ndarray
    max_squeezing_db: np.ndarray
    cutoff: np.ndarray
    errors: list
    alternates: list
    config: SearchConfig = None

    @property
    def ok(self):
        return np.isfinite(self.fidelity)

    def best_index(self):
        if not np.any(self.ok):
            raise NoSolutionFound("no grid point succeeded")
        return int(np.nanargmax(np.where(self.ok, self.fidelity, -np.inf)))

    def states(self, i):
        m = self.config.m
        return StateParams(m, self.r1[i], self.z1[i]), StateParams(m, self.r2[i], self.z2[i])

    def pair(self, i, provenance="optimal"):
        s0, s1 = self.states(i)
        return CodePair.from_states(s0, s1, provenance=provenance)

    def columns(self):
        return {
            self.axis_name: self.axis,
            "fidelity": self.fidelity,
            "r1": self.r1,
            "z1": self.z1,
            "r2": self.r2,
            "z2": self.z2,
            "a1": self.a1,
            "a2": self.a2,
            "probability": self.probability,
            "max_squeezing_db": self.max_squeezing_db,
            "cutoff": self.cutoff,
        }


# --------------------------------------------------------------------------
# level set of the mean particle number


def _poly_z2(coeffs):
    """Coefficients in ``z`` of ``sum_j c_j z^(2j)``, lowest order first."""
    out = np.zeros(2 * len(coeffs) - 1)
    out[::2] = [float(c) for c in coeffs]
    return out


def z_for_mean_n(m, r, mean_n):
    """All real ``z`` with ``<n>(m, r, z) = mean_n`` (roots at infinity excluded).

    Multiplying through by the normalisation makes this a polynomial in ``z``
    of degree ``2 floor(m/2)``.
    """
    c = mean_n + 0.5
    ch, sh = math.cosh(2 * r), math.sinh(2 * r)
    f1 = _poly_z2(hyp2f1_coefficients(Fraction(1 - m, 2), Fraction(-m, 2), 1))
    if m >= 2:
        g = m * (m - 1) * _poly_z2(hyp2f1_coefficients(Fraction(3 - m, 2), Fraction(2 - m, 2), 2))
    else:
        g = np.zeros(1)
    poly = P.polysub(((m + 0.5) * ch - c) * f1, P.polyadd(0.5 * ch * P.polymulx(P.polymulx(g)), 0.5 * sh * P.polymulx(g)))
    poly = np.trim_zeros(np.where(np.abs(poly) > 1e-14 * np.max(np.abs(poly)), poly, 0.0), "b")
    if poly.size < 2:
        return []
    roots = P.polyroots(poly)
    deriv = P.polyder(poly)
    out = []
    for z in roots:
        if abs(z.imag) > 1e-7 * (1.0 + abs(z)):
            continue
        z = z.real
        for _ in range(3):
            d = P.polyval(z, deriv)
            if d == 0:
                break
            z -= P.polyval(z, poly) / d
        if abs(_mean_n(m, r, z) - mean_n) < 1e-9 * max(1.0, mean_n):
            out.append(float(z))
    out.sort()
    # merge numerically coincident roots (tangencies)
    merged = []
    for z in out:
        if not merged or abs(z - merged[-1]) > 1e-9 * (1.0 + abs(z)):
            merged.append(z)
    return merged


R_MAX = 4.0


def level_set_r(m, z, mean_n, r_max=R_MAX):
    """Both squeezing branches ``(r_minus, r_plus, valid)`` of the level set at ``z``.

    Points needing ``|r| > r_max`` (beyond about 35 dB) are marked invalid.
    """
    n0, a2 = _unsqueezed_moments(m, np.asarray(z, dtype=float))
    alpha, beta = n0 + 0.5, a2
    rho = np.sqrt(np.maximum(alpha**2 - beta**2, 1e-300))
    ratio = (mean_n + 0.5) / rho
    valid = ratio >= 1.0
    phi = np.arccosh(np.where(valid, ratio, 1.0))
    centre = 0.5 * np.arctanh(np.clip(beta / alpha, -1.0 + 1e-16, 1.0 - 1e-16))
    lo, hi = centre - 0.5 * phi, centre + 0.5 * phi
    valid = valid & (np.abs(lo) <= r_max) & (np.abs(hi) <= r_max)
    return lo, hi, valid


def _loops(valid):
    """Index paths ``[(i, branch), ...]`` tracing each connected piece of the level set."""
    n = valid.size
    paths = []
    i = 0
    while i < n:
        if not valid[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and valid[j + 1]:
            j += 1
        idx = list(range(i, j + 1))
        if i == 0 and j == n - 1:
            # both branches run through z = +-inf; do not connect across it
            paths.append([(k, 1) for k in idx])
            paths.append([(k, 0) for k in idx])
        else:
            open_left, open_right = i == 0, j == n - 1
            loop = [(k, 1) for k in idx] + [(k, 0) for k in reversed(idx)]
            if not (open_left or open_right):
                loop.append(loop[0])
            paths.append(loop)
        i = j + 1
    return paths


def _theta_grid(n):
    return np.linspace(-0.5 * math.pi, 0.5 * math.pi, n + 2)[1:-1]


def _scan_roots(m, mean_n, overlap, theta_points, tol):
    """Zeros of ``overlap(r, z)`` along the ``<n> = mean_n`` level set.

    ``overlap`` must accept arrays. Returns a list of ``(r, z)``.
    """
    theta = _theta_grid(theta_points)
    z = np.tan(theta)
    r_lo, r_hi, valid = level_set_r(m, z, mean_n)
    if not np.any(valid):
        return [], math.inf
    branches = (r_lo, r_hi)
    values = np.full((2, theta.size), np.nan)
    values[0, valid] = overlap(r_lo[valid], z[valid])
    values[1, valid] = overlap(r_hi[valid], z[valid])
    best_resid = float(np.nanmin(np.abs(values)))

    def on_branch(b):
        def f(th):
            zz = math.tan(th)
            lo, hi, ok = level_set_r(m, zz, mean_n)
            if not ok:
                raise ValueError("left the level set")
            return float(overlap(np.array([lo, hi][b]), np.array(zz)))

        return f

    found = []
    for path in _loops(valid):
        for (i0, b0), (i1, b1) in zip(path[:-1], path[1:]):
            f0, f1 = values[b0, i0], values[b1, i1]
            if f0 == 0.0:
                found.append((float(branches[b0][i0]), float(z[i0])))
                continue
            if f0 * f1 >= 0.0:
                continue
            sol = None
            if b0 == b1:
                try:
                    th = optimize.brentq(on_branch(b0), theta[i0], theta[i1], xtol=1e-15, rtol=1e-15, maxiter=200)
                    lo, hi, _ = level_set_r(m, math.tan(th), mean_n)
                    sol = (float([lo, hi][b0]), math.tan(th))
                except ValueError:
                    sol = None
            if sol is None and i0 == i1:
                # the loop turns around between the two samples; near the turn
                # the level set is a graph z(r), so bracket in r instead
                sol = _refine_at_turn(m, mean_n, overlap, theta[i0], branches[b0][i0], branches[b1][i1])
            if sol is None:
                continue
            r_s, z_s = sol
            if abs(float(overlap(np.array(r_s), np.array(z_s)))) < tol and abs(_mean_n(m, r_s, z_s) - mean_n) < 1e-9 * max(1.0, mean_n):
                found.append(sol)
    return _dedupe(found), best_resid


def _refine_at_turn(m, mean_n, overlap, theta0, ra, rb):
    def z_of(r):
        roots = z_for_mean_n(m, r, mean_n)
        if not roots:
            raise ValueError("no level-set point at this r")
        return min(roots, key=lambda z: abs(math.atan(z) - theta0))

    def g(r):
        return float(overlap(np.array(r), np.array(z_of(r))))

    lo, hi = sorted((ra, rb))
    try:
        r = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
        return float(r), z_of(r)
    except ValueError:
        return None


def _dedupe(points, tol=1e-7):
    out = []
    for r, z in points:
        if all(abs(r - r2) > tol or abs(z - z2) > tol * (1 + abs(z)) for r2, z2 in out):
            out.append((r, z))
    return out


@lru_cache(maxsize=200_000)
def _partners_cached(m, mean_n, r2, z2, theta_points, tol):
    def overlap(r, z):
        return inner_product_array(m, r, z, r2, z2)

    return tuple(_scan_roots(m, mean_n, overlap, theta_points, tol)[0])


def orthogonal_partners(m, mean_n, word, theta_points=600, tol=1e-8):
    """Every ``(r1, z1)`` on the ``<n> = mean_n`` level set orthogonal to ``word``."""
    return [StateParams(m, r, z) for r, z in _partners_cached(m, float(mean_n), word.r, word.z, theta_points, tol)]


@lru_cache(maxsize=200_000)
def _constraint_solutions_cached(m, mean_n, r2, theta_points, tol):
    out = []
    for z2 in z_for_mean_n(m, r2, mean_n):
        for r1, z1 in _partners_cached(m, mean_n, r2, z2, theta_points, tol):
            out.append((r1, z1, r2, z2))
    return tuple(out)


def constraint_solutions(m, mean_n, r2, theta_points=600, tol=1e-8):
    """All ``(word0, word1)`` with ``word1 = Psi(r2, z2)`` meeting both constraints."""
    if m < 2:
        raise ValueError("orthogonal pairs need m >= 2")
    sols = _constraint_solutions_cached(m, float(mean_n), float(r2), theta_points, tol)
    return [(StateParams(m, r1, z1), StateParams(m, rr, z2)) for r1, z1, rr, z2 in sols]


def solve_constraints(m, mean_n, r2, seed=None, config=None):
    """One orthogonal, equal-``<n>`` pair with ``word1 = Psi(r2, z2)``.

    With several solutions the one nearest to ``seed = (r1, z1)`` is returned if
    a seed is given, the one with the best fidelity if ``config`` names a
    channel, and otherwise the one with the smallest ``|r1 - r2|``.
    """
    cfg = config or SearchConfig(m, max_m=max(6, m))
    sols = constraint_solutions(m, mean_n, r2, cfg.theta_points, cfg.tolerances["orthogonality"])
    if not sols:
        resid = _best_residual(m, mean_n, r2, cfg)
        raise NoOrthogonalPartner(f"no orthogonal partner for m={m}, <n>={mean_n}, r2={r2}", resid)
    if seed is not None:
        s0, s1 = min(sols, key=lambda p: math.hypot(p[0].r - seed[0], math.atan(p[0].z) - math.atan(seed[1])))
    elif cfg.channel is not None:
        s0, s1 = max(sols, key=lambda p: pair_fidelity(p[0], p[1], cfg)[0])
    else:
        s0, s1 = min(sols, key=lambda p: abs(p[0].r - r2))
    pair = CodePair.from_states(s0, s1, provenance="optimal")
    _validate(pair, cfg)
    return pair


def _best_residual(m, mean_n, r2, cfg):
    best = math.inf
    for z2 in z_for_mean_n(m, r2, mean_n):

        def overlap(r, z, z2=z2):
            return inner_product_array(m, r, z, r2, z2)

        best = min(best, _scan_roots(m, mean_n, overlap, cfg.theta_points, cfg.tolerances["orthogonality"])[1])
    return best


def orthogonal_partner_z(m, word, r, z_seed, tol=1e-12):
    """``z`` near ``z_seed`` such that ``Psi(r, z)`` is orthogonal to ``word`` (no ``<n>`` constraint)."""

    def f(th):
        return inner_product(StateParams(m, r, math.tan(th)), word)

    th0 = math.atan(z_seed)
    step = 0.01
    f0 = f(th0)
    for k in range(1, 200):
        for th in (th0 - k * step, th0 + k * step):
            if abs(th) >= 0.5 * math.pi:
                continue
            if f(th) * f0 <= 0:
                lo, hi = sorted((th0, th))
                th_root = optimize.brentq(f, lo, hi, xtol=tol)
                return math.tan(th_root)
    raise NoOrthogonalPartner(f"no orthogonal partner at r={r} near z={z_seed}", abs(f0))


# --------------------------------------------------------------------------
# rotated pairs


@lru_cache(maxsize=20_000)
def _rotated_cached(m, mean_n, theta_points, tol):
    def overlap(r, z):
        return inner_product_array(m, -r, -z, r, z)

    roots = _scan_roots(m, mean_n, overlap, theta_points, tol)[0]
    # (r, z) and (-r, -z) describe the same pair; keep r >= 0
    canon = [(-r, -z) if r < 0 or (r == 0 and z < 0) else (r, z) for r, z in roots]
    return tuple(_dedupe(canon))


def rotated_solutions(m, mean_n, theta_points=600, tol=1e-8):
    """All ``(r2, z2)`` with ``<Psi(-r2, -z2)|Psi(r2, z2)> = 0`` at the given ``<n>``."""
    return [StateParams(m, r, z) for r, z in _rotated_cached(m, float(mean_n), theta_points, tol)]


def rotated_pair(m, mean_n, config=None):
    """Rotated pair ``(Psi(-r2, -z2), Psi(r2, z2))`` at the given ``<n>``.

    The best solution under ``config``'s channel is returned; without a
    channel, the one with the smallest ``|z2|``.
    """
    cfg = config or SearchConfig(m, max_m=max(6, m))
    sols = rotated_solutions(m, mean_n, cfg.theta_points, cfg.tolerances["orthogonality"])
    if not sols:
        raise NoOrthogonalPartner(f"no rotated pair for m={m}, <n>={mean_n}")
    if cfg.channel is not None:
        s1 = max(sols, key=lambda s: pair_fidelity(s.rotated(), s, cfg)[0])
    else:
        s1 = min(sols, key=lambda s: abs(s.z))
    pair = CodePair.from_states(s1.rotated(), s1, provenance="rotated")
    _validate(pair, cfg)
    return pair


# --------------------------------------------------------------------------
# fidelity objective


@lru_cache(maxsize=200_000)
def _vectors(m, r1, z1, r2, z2):
    s0, s1 = StateParams(m, r1, z1), StateParams(m, r2, z2)
    N = cutoff_selection(s0, s1)
    return fock_amplitudes(s0, N), fock_amplitudes(s1, N)


def _fidelity_of(v0, v1, channel, noise):
    if channel == "loss":
        return loss_fidelity(v0, v1, noise)
    if channel == "dephasing":
        return dephasing_fidelity(v0, v1, noise)
    raise ValueError("config does not name a channel")


def pair_fidelity(s0, s1, config, extra_cutoff=0):
    """``(F, N)`` for the pair under ``config``'s channel."""
    v0, v1 = _vectors(s0.m, s0.r, s0.z, s1.r, s1.z)
    if extra_cutoff:
        N = v0.cutoff + extra_cutoff
        v0, v1 = fock_amplitudes(s0, N), fock_amplitudes(s1, N)
    return _fidelity_of(v0, v1, config.channel, config.noise), v0.cutoff


def _validate(pair, cfg):
    tol = cfg.tolerances
    if pair.orthogonality_residual > tol["orthogonality"]:
        raise ConstraintViolation(f"codewords overlap by {pair.orthogonality_residual:.2e}")
    if pair.mean_n_mismatch > tol["mean_n"]:
        raise ConstraintViolation(f"mean particle numbers differ by {pair.mean_n_mismatch:.2e}")
    if pair.word0.parity is None or pair.word0.parity != pair.word1.parity:
        raise ConstraintViolation("codewords lack a common definite parity")
    for w in (pair.word0, pair.word1):
        if abs(np.vdot(w.amplitudes, w.amplitudes).real - 1.0) > 1e-9:
            raise ConstraintViolation("codeword is not normalised")


# --------------------------------------------------------------------------
# sweeps


def _r2_candidates(m, mean_n, cfg):
    lo, hi = cfg.r2_bounds
    grid = list(np.linspace(lo, hi, cfg.seed_grid_density))
    # seed with the rotated family so that the free search contains it
    for s in rotated_solutions(m, mean_n, cfg.theta_points, cfg.tolerances["orthogonality"]):
        for r in (s.r, -s.r):
            if lo <= r <= hi:
                grid.append(r)
    return np.unique(np.round(grid, 14))


def _best_at_r2(m, mean_n, r2, cfg):
    best = None
    for s0, s1 in constraint_solutions(m, mean_n, r2, cfg.theta_points, cfg.tolerances["orthogonality"]):
        try:
            F, N = pair_fidelity(s0, s1, cfg)
        except CutoffTooSmall:
            # squeezed beyond what MAX_CUTOFF resolves; not a usable codeword
            continue
        if best is None or F > best[0]:
            best = (F, N, s0, s1)
    return best


def _optimize_point(m, mean_n, cfg):
    """Maximise F over ``r2`` at fixed ``<n>``; returns (best, alternates)."""
    r2s = _r2_candidates(m, mean_n, cfg)
    evals = [_best_at_r2(m, mean_n, r2, cfg) for r2 in r2s]
    ok = [i for i, e in enumerate(evals) if e is not None]
    if not ok:
        raise NoOrthogonalPartner(f"no orthogonal pair at <n>={mean_n} for any r2 in {cfg.r2_bounds}")
    i = max(ok, key=lambda k: evals[k][0])
    best = evals[i]
    alternates = sorted({round(evals[k][0], 12) for k in ok}, reverse=True)[1:6]
    lo, hi = r2s[max(i - 1, 0)], r2s[min(i + 1, len(r2s) - 1)]
    if hi > lo:

        def neg(r2):
            e = _best_at_r2(m, mean_n, float(r2), cfg)
            return -e[0] if e is not None else 1.0

        res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": cfg.tolerances["optimizer"]})
        cand = _best_at_r2(m, mean_n, float(res.x), cfg)
        if cand is not None and cand[0] > best[0]:
            best = cand
    return best, alternates


def codeword_generation(s):
    """Most probable way to herald ``s``: ``(a, P, scheme, via_rotation)``.

    Rotating both input squeezers by pi/2 rotates the heralded state and keeps
    the heralding probability, so ``s`` can also be produced from the scheme
    of ``s.rotated()`` with ``r1, r2`` negated. Both routes are tried at their
    probability-maximising ``a`` and the more probable reachable one is kept;
    ``a`` refers to the representative actually inverted.
    """
    options = []
    for rep, via_rotation in ((s, False), (s.rotated(), True)):
        try:
            a, p = maximize_probability_over_a(rep.m, rep.z)
            sch = state_to_scheme(rep.r, rep.z, a)
        except (NoSolutionFound, UnphysicalRegion):
            continue
        if via_rotation:
            sch = SchemeParams(-sch.r2, -sch.r1, 1.0 - sch.t)
        options.append((p, a, sch, via_rotation))
    if not options:
        raise InfeasibleScheme(f"codeword {s} is beyond the reachable set")
    best = max(o[0] for o in options)
    # equal probabilities up to round-off: prefer the direct route
    p, a, sch, via_rotation = min((o for o in options if o[0] >= best * (1 - 1e-9)), key=lambda o: o[3])
    return a, p, sch, via_rotation


def _feasibility(s0, s1):
    """``(a, P_CW, max dB)`` for a pair; nan where a codeword is unreachable."""
    a, p, db = [], [], []
    for s in (s0, s1):
        try:
            a_s, p_s, sch, _ = codeword_generation(s)
        except InfeasibleScheme:
            a.append(math.nan)
            p.append(math.nan)
            db.append(math.nan)
            continue
        a.append(a_s)
        p.append(p_s)
        db.extend(abs(x) for x in sch.to_db())
    return a, p[0] * p[1], max(db)


def _sweep_point(m, mean_n, cfg, with_feasibility):
    try:
        (F, N, s0, s1), alternates = _optimize_point(m, mean_n, cfg)
        pair = CodePair.from_states(s0, s1, N, provenance="optimal")
        _validate(pair, cfg)
    except (NoOrthogonalPartner, ConstraintViolation, NoSolutionFound) as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}
    out = {"F": F, "N": N, "s0": s0, "s1": s1, "alternates": alternates, "error": ""}
    if with_feasibility:
        a, prob, db = _feasibility(s0, s1)
        out.update(a=a, prob=prob, db=db)
    return out


def _rotated_point(m, mean_n, cfg, with_feasibility):
    try:
        sols = rotated_solutions(m, mean_n, cfg.theta_points, cfg.tolerances["orthogonality"])
        if not sols:
            raise NoOrthogonalPartner(f"no rotated pair at <n>={mean_n}")
        scored = []
        for s in sols:
            try:
                scored.append((pair_fidelity(s.rotated(), s, cfg), s))
            except CutoffTooSmall:
                continue
        if not scored:
            raise NoOrthogonalPartner(f"every rotated pair at <n>={mean_n} exceeds the cutoff limit")
        (F, N), s1 = max(scored, key=lambda e: e[0][0])
        s0 = s1.rotated()
        pair = CodePair.from_states(s0, s1, N, provenance="rotated")
        _validate(pair, cfg)
    except (NoOrthogonalPartner, ConstraintViolation) as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}
    alternates = sorted((round(e[0][0], 12) for e in scored), reverse=True)[1:]
    out = {"F": F, "N": N, "s0": s0, "s1": s1, "alternates": alternates, "error": ""}
    if with_feasibility:
        a, prob, db = _feasibility(s0, s1)
        out.update(a=a, prob=prob, db=db)
    return out


def _run(points, worker, cfg, jobs, with_feasibility):
    if jobs is not None and jobs != 1 and len(points) > 1:
        from joblib import Parallel, delayed

        return Parallel(n_jobs=jobs)(delayed(worker)(cfg.m, x, cfg, with_feasibility) for x in points)
    return [worker(cfg.m, x, cfg, with_feasibility) for x in points]


def _assemble(axis_name, axis, results, cfg):
    n = len(axis)
    arr = {k: np.full(n, np.nan) for k in ("F", "r1", "r2", "z1", "z2", "a1", "a2", "prob", "db", "N")}
    errors, alternates = [], []
    for i, res in enumerate(results):
        errors.append(res["error"])
        alternates.append(res.get("alternates", []))
        if res["error"]:
            continue
        arr["F"][i], arr["N"][i] = res["F"], res["N"]
        arr["r1"][i], arr["z1"][i] = res["s0"].r, res["s0"].z
        arr["r2"][i], arr["z2"][i] = res["s1"].r, res["s1"].z
        if "a" in res:
            arr["a1"][i], arr["a2"][i] = res["a"]
            arr["prob"][i], arr["db"][i] = res["prob"], res["db"]
    return SweepResult(
        axis_name,
        np.asarray(axis, dtype=float),
        arr["F"],
        arr["r1"],
        arr["r2"],
        arr["z1"],
        arr["z2"],
        arr["a1"],
        arr["a2"],
        arr["prob"],
        arr["db"],
        arr["N"],
        errors,
        alternates,
        cfg,
    )


def _points(cfg):
    return (cfg.mean_n,) if cfg.mean_n is not None else cfg.mean_n_grid


def optimize_loss(m, gamma, config=None, jobs=1, with_feasibility=False):
    """Scan ``<n>`` and maximise the loss fidelity over ``r2`` at each point.

    Returns ``(best <n>, best r2, F_max, SweepResult)``.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    cfg = replace(config, m=m, gamma=gamma, gamma_phi=None) if config else SearchConfig(m, gamma=gamma)
    pts = _points(cfg)
    sweep = _assemble("mean_n", pts, _run(pts, _sweep_point, cfg, jobs, with_feasibility), cfg)
    i = sweep.best_index()
    return float(sweep.axis[i]), float(sweep.r2[i]), float(sweep.fidelity[i]), sweep


def optimize_rotated(m, gamma=None, gamma_phi=None, config=None, jobs=1, with_feasibility=False):
    """Best rotated pair at every ``<n>`` of the grid, under loss or dephasing."""
    base = config or SearchConfig(m)
    cfg = replace(base, m=m, gamma=gamma, gamma_phi=gamma_phi)
    if cfg.channel is None:
        raise ValueError("give gamma or gamma_phi")
    pts = _points(cfg)
    return _assemble("mean_n", pts, _run(pts, _rotated_point, cfg, jobs, with_feasibility), cfg)


def optimize_dephasing(m, gamma_phi, config=None, jobs=1, with_feasibility=False):
    """Dephasing fidelity, maximised over ``r2``, at every ``<n>`` of the grid."""
    if not gamma_phi > 0:
        raise ValueError(f"gamma_phi must be positive, got {gamma_phi}")
    cfg = replace(config, m=m, gamma=None, gamma_phi=gamma_phi) if config else SearchConfig(m, gamma_phi=gamma_phi)
    pts = _points(cfg)
    return _assemble("mean_n", pts, _run(pts, _sweep_point, cfg, jobs, with_feasibility), cfg)


def relative_gain(m, gamma, config=None, jobs=1):
    """``g = (F_opt / F_rot - 1) * 100`` from the two maxima over ``<n>``."""
    _, _, f_opt, _ = optimize_loss(m, gamma, config, jobs)
    rot = optimize_rotated(m, gamma=gamma, config=config, jobs=jobs)
    f_rot = float(rot.fidelity[rot.best_index()])
    return (f_opt / f_rot - 1.0) * 100.0


@dataclass(frozen=True)
class FeasibilityReport:
    p_cw: float
    probabilities: tuple
    a: tuple
    max_squeezing_db: float
    squeezing_db: tuple
    schemes: tuple
    via_rotation: tuple


def feasibility_report(pair):
    """Joint probability and input squeezing needed to generate ``pair``.

    Each codeword is generated at the ``a`` that maximises its probability,
    directly or through the rotated scheme (see :func:`codeword_generation`);
    ``squeezing_db`` lists ``(S1, S2)`` for both codewords.
    """
    if pair.params is None:
        raise ValueError("pair carries no state parameters")
    probs, avals, dbs, schemes, rots = [], [], [], [], []
    for s in pair.params:
        a, p, sch, rot = codeword_generation(s)
        probs.append(p)
        avals.append(a)
        dbs.extend(float(x) for x in sch.to_db())
        schemes.append(sch)
        rots.append(rot)
    return FeasibilityReport(
        p_cw=probs[0] * probs[1],
        probabilities=tuple(probs),
        a=tuple(avals),
        max_squeezing_db=max(abs(x) for x in dbs),
        squeezing_db=tuple(dbs),
        schemes=tuple(schemes),
        via_rotation=tuple(rots),
    )


def coeff_variance_report(gamma, ms=(2, 3, 4, 5, 6), config=None, jobs=1, threshold=1e-9, results=None):
    """Spread of Fock-coefficient moduli of the loss-optimal pair for each ``m``.

    Rows are ``(m, <n>, sigma_0, sigma_1)``. Precomputed ``optimize_loss``
    outputs may be passed as ``results[m]``.
    """
    rows = []
    for m in ms:
        if results is not None and m in results:
            best_n, _, _, sweep = results[m]
        else:
            cfg = replace(config, m=m) if config else None
            best_n, _, _, sweep = optimize_loss(m, gamma, cfg, jobs)
        pair = sweep.pair(sweep.best_index())
        rows.append(
            (
                m,
                best_n,
                coeff_distribution_variance(pair.word0, threshold),
                coeff_distribution_variance(pair.word1, threshold),
            )
        )
    return rows

