"""Command-line front end: state inspection, fidelities, sweeps and figure data.

Every command that writes files also writes a JSON manifest next to them.
CSV files start with ``#`` comment lines naming the columns and units.
Squeezing in dB is ``20 r / ln 10`` throughout.
"""

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np
from scipy.integrate import trapezoid

from . import __version__
from .channels import compose, dephasing_kraus, identity_kraus, loss_kraus
from .codesearch import (
    InfeasibleScheme,
    NoOrthogonalPartner,
    SearchConfig,
    coeff_variance_report,
    default_mean_n_grid,
    feasibility_report,
    optimize_dephasing,
    optimize_loss,
    optimize_rotated,
    orthogonal_partner_z,
    rotated_pair,
    solve_constraints,
)
from .genstates import (
    CutoffTooSmall,
    NoSolutionFound,
    SchemeParams,
    StateParams,
    fock_amplitudes,
    inner_product,
    mean_particle_number,
    quadrature_variances,
    scheme_to_state,
    wigner,
)
from .channels import cutoff_selection
from .qec import CodePair, fidelity, kl_epsilon
from .specialfn import r_to_squeezing_db

DB_CONVENTION = "squeezing dB = 20 r / ln 10"
DEFAULT_OUT = "bqec_out"

FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig11", "fig12", "tableB1", "tableB2")

# default damping grids per figure; --gamma overrides
FIG2_GAMMAS = (0.001, 0.01, 0.1)
FIG3_GAMMAS = (0.001, 0.005, 0.01, 0.02, 0.03, 0.04, 0.06, 0.08, 0.1)
FIG11_GAMMAS = (0.1, 0.01, 0.001)
FIG7_GAMMA_PHIS = (0.01, 0.05, 0.1)
FEASIBILITY_MEAN_N_MAX = 5.0

# orthogonal pairs given by their scheme settings (S1 dB, S2 dB, t) and the
# rounded (r, z) they should produce
REFERENCE_PAIRS = {
    2: (
        (((2.00, -3.00, 0.08), (-0.30, -7.14)), ((3.98, -4.47, 0.47), (-0.05, 0.02))),
        (((4.00, -5.00, 0.23), (-0.31, -0.89)), ((8.74, -3.81, 0.78), (0.55, -0.04))),
    ),
    3: (
        (((2.00, -3.00, 0.08), (-0.30, -7.14)), ((3.16, -6.55, 0.31), (-0.35, 0.14))),
        (((4.00, -5.00, 0.23), (-0.31, -0.89)), ((8.071, -2.09, 0.76), (0.55, -0.48))),
    ),
}


class UsageError(Exception):
    """Invalid parameter combination; exit code 2."""


class ComputationFailed(Exception):
    """Nothing could be computed; exit code 1."""


# --------------------------------------------------------------------------
# output helpers


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else format(float(v), ".15g")
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        return None if not math.isfinite(v) else float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


class Run:
    """Collects outputs and writes the manifest of one invocation."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.start = time.perf_counter()
        self.outputs = []
        self.configs = []
        self.cutoffs = {}
        self._out_dir = args.out or os.environ.get("BQEC_OUT") or DEFAULT_OUT

    @property
    def explicit_out(self):
        return bool(self.args.out or os.environ.get("BQEC_OUT"))

    def path(self, name):
        os.makedirs(self._out_dir, exist_ok=True)
        return os.path.join(self._out_dir, name)

    def write_csv(self, name, columns, rows, comments=()):
        path = self.path(name)
        with open(path, "w", newline="") as fh:
            for line in comments:
                fh.write(f"# {line}\n")
            fh.write(f"# {DB_CONVENTION}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
        self.outputs.append(path)
        return path

    def write_svg(self, name, curves, xlabel, ylabel, title, logx=False):
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        matplotlib.rcParams["svg.hashsalt"] = "pnrqec"
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, x, y in curves:
            ax.plot(x, y, marker="o", ms=3, label=label)
        if logx:
            ax.set_xscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        if len(curves) > 1:
            ax.legend(fontsize=7)
        fig.tight_layout()
        path = self.path(name)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        self.outputs.append(path)
        return path

    def add_config(self, cfg):
        self.configs.append(cfg.as_dict())

    def manifest(self, name):
        data = {
            "subcommand": self.args.command,
            "argv": self.argv,
            "code_version": __version__,
            "search_configs": self.configs,
            "cutoffs": self.cutoffs,
            "outputs": sorted(self.outputs),
            "wall_time_s": time.perf_counter() - self.start,
        }
        path = self.path(f"{name}.manifest.json")
        with open(path, "w") as fh:
            json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _emit(args, report, lines):
    if args.json:
        print(json.dumps(_jsonable(report), indent=2, sort_keys=True))
    else:
        for line in lines:
            print(line)


# --------------------------------------------------------------------------
# argument parsing


def _float_list(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text):
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _rz(text):
    vals = _float_list(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected R,Z, got {text!r}")
    return vals


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--out", metavar="DIR", help="output directory (default: $BQEC_OUT or ./bqec_out)")
    p.add_argument("--json", action="store_true", help="machine-readable report on stdout")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes for sweeps")
    p.add_argument("--svg", action="store_true", help="also write SVG line plots")
    return p


def _pair_args(p):
    p.add_argument("--m", type=int, required=True, help="detected particle number")
    p.add_argument("--word0", type=_rz, metavar="R,Z", help="first codeword parameters")
    p.add_argument("--word1", type=_rz, metavar="R,Z", help="second codeword parameters")
    p.add_argument("--mean-n", type=float, help="mean particle number for a solved pair")
    p.add_argument("--r2", type=float, help="squeezing of the second codeword for a solved pair")
    p.add_argument("--z", type=float, help="seed z of the second codeword (picks the branch)")
    p.add_argument("--rotated", action="store_true", help="use the pi/2-rotated pair at --mean-n")


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="bqec", description="Bosonic codes from heralded two-mode Gaussian states.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.commands = sub.choices

    p = sub.add_parser("state", parents=[common], help="report on one generated state")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--r", type=float)
    p.add_argument("--z", type=float)
    p.add_argument("--scheme-s1-db", type=float)
    p.add_argument("--scheme-s2-db", type=float)
    p.add_argument("--t", type=float, help="beam-splitter intensity transmission")
    p.add_argument("--cutoff", type=int, help="Fock cutoff (default: tail rule)")
    p.add_argument("--wigner-grid", type=int, metavar="K", help="write the Wigner function on a KxK grid")
    p.add_argument("--wigner-extent", type=float, default=6.0, help="grid covers [-L, L] in x and p")

    p = sub.add_parser("fidelity", parents=[common], help="transpose-channel fidelity of a codeword pair")
    _pair_args(p)
    p.add_argument("--gamma", type=float, help="loss probability")
    p.add_argument("--gamma-phi", type=float, help="dephasing rate")
    p.add_argument("--force", action="store_true", help="accept non-orthogonal codewords")
    p.add_argument("--ortho-tol", type=float, default=1e-6)

    p = sub.add_parser("optimize-loss", parents=[common], help="sweep <n> and optimise r2 under loss")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--mean-n", type=float, help="single <n> instead of the default grid")
    p.add_argument("--rotated", action="store_true", help="sweep the rotated family instead")
    p.add_argument("--feasibility", action="store_true", help="add probability and squeezing columns")

    p = sub.add_parser("optimize-dephasing", parents=[common], help="sweep <n> and optimise r2 under dephasing")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--gamma-phi", type=float, required=True)
    p.add_argument("--mean-n", type=float)
    p.add_argument("--rotated", action="store_true")
    p.add_argument("--feasibility", action="store_true")

    p = sub.add_parser("reproduce", parents=[common], help="write the data behind a figure or table")
    p.add_argument("figure", choices=FIGURES)
    p.add_argument("--gamma", type=_float_list, help="comma-separated damping (or dephasing) values")
    p.add_argument("--m", type=_int_list, help="comma-separated particle numbers")
    p.add_argument("--mean-n", type=_float_list, help="comma-separated <n> grid")

    p = sub.add_parser("feasibility", parents=[common], help="probability and squeezing to generate a pair")
    _pair_args(p)
    p.add_argument("--gamma", type=float, help="loss probability used to pick among solutions")
    p.add_argument("--gamma-phi", type=float, help="dephasing rate used to pick among solutions")
    return parser


# --------------------------------------------------------------------------
# state


def cmd_state(args, run):
    if args.m < 0:
        raise UsageError("--m must be non-negative")
    scheme = None
    if args.r is not None or args.z is not None:
        if args.r is None or args.z is None:
            raise UsageError("give both --r and --z")
        if any(v is not None for v in (args.scheme_s1_db, args.scheme_s2_db, args.t)):
            raise UsageError("give either --r/--z or the scheme settings, not both")
        r, z, a = args.r, args.z, None
    elif all(v is not None for v in (args.scheme_s1_db, args.scheme_s2_db, args.t)):
        try:
            scheme = SchemeParams.from_db(args.scheme_s1_db, args.scheme_s2_db, args.t)
            st = scheme_to_state(scheme, args.m)
        except ValueError as exc:
            raise UsageError(str(exc))
        r, z, a = st.r, st.z, st.a
    else:
        raise UsageError("give --r and --z, or --scheme-s1-db, --scheme-s2-db and --t")

    s = StateParams(args.m, r, z)
    try:
        N = args.cutoff if args.cutoff is not None else cutoff_selection(s)
        vec = fock_amplitudes(s, N)
    except CutoffTooSmall as exc:
        raise UsageError(str(exc))
    var_x, var_p = quadrature_variances(s)
    report = {
        "m": args.m,
        "r": r,
        "z": z,
        "a": a,
        "r_db": float(r_to_squeezing_db(r)),
        "db_convention": DB_CONVENTION,
        "mean_n": mean_particle_number(s),
        "var_x": var_x,
        "var_p": var_p,
        "parity": vec.parity,
        "cutoff": N,
        "truncation_loss": vec.truncation_loss,
        "amplitudes": vec.amplitudes,
    }
    if scheme is not None:
        report["scheme"] = {"s1_db": args.scheme_s1_db, "s2_db": args.scheme_s2_db, "t": args.t}
    run.cutoffs["state"] = N

    lines = [
        f"m = {args.m}  r = {r:.6f} ({report['r_db']:.3f} dB)  z = {z:.6f}" + (f"  a = {a:.6f}" if a else ""),
        f"<n> = {report['mean_n']:.9f}",
        f"Var x = {var_x:.9f}  Var p = {var_p:.9f}",
        f"parity = {vec.parity}  cutoff = {N}  discarded tail = {vec.truncation_loss:.3e}",
        DB_CONVENTION,
        "leading Fock amplitudes:",
    ]
    lead = np.flatnonzero(np.abs(vec.amplitudes) > 1e-12)[:8]
    lines += [f"  <{k}|psi> = {vec.amplitudes[k]: .9f}" for k in lead]

    if run.explicit_out or args.wigner_grid:
        run.write_csv(
            "state_amplitudes.csv",
            ["n", "amplitude"],
            [(k, float(v)) for k, v in enumerate(vec.amplitudes)],
            [f"Fock amplitudes <n|Psi_m(r, z)> for m={args.m}, r={r!r}, z={z!r}"],
        )
    if args.wigner_grid:
        K = args.wigner_grid
        if K < 2:
            raise UsageError("--wigner-grid needs at least 2 points")
        axis = np.linspace(-args.wigner_extent, args.wigner_extent, K)
        X, Pm = np.meshgrid(axis, axis, indexing="ij")
        W = wigner(s, X, Pm)
        run.write_csv(
            "wigner.csv",
            ["x", "p", "W"],
            [(X.flat[i], Pm.flat[i], W.flat[i]) for i in range(W.size)],
            [f"Wigner function W(x, p) on a {K}x{K} grid, x = (a + a^dag)/sqrt2, integral 1"],
        )
        report["wigner_integral"] = float(trapezoid(trapezoid(W, axis, axis=1), axis))
        lines.append(f"Wigner grid {K}x{K}, trapezoid integral = {report['wigner_integral']:.9f}")
    if run.outputs:
        run.manifest("state")
    _emit(args, report, lines)
    return 0


# --------------------------------------------------------------------------
# pairs


def _channel_config(args, m):
    gamma = getattr(args, "gamma", None)
    gamma_phi = getattr(args, "gamma_phi", None)
    try:
        if gamma is not None and gamma_phi is not None:
            return SearchConfig(m, gamma=gamma)
        return SearchConfig(m, gamma=gamma, gamma_phi=gamma_phi)
    except ValueError as exc:
        raise UsageError(str(exc))


def _build_pair(args):
    explicit = args.word0 is not None or args.word1 is not None
    if explicit:
        if args.word0 is None or args.word1 is None:
            raise UsageError("give both --word0 and --word1")
        if args.mean_n is not None or args.rotated:
            raise UsageError("explicit codewords exclude --mean-n/--rotated")
        try:
            s0, s1 = StateParams(args.m, *args.word0), StateParams(args.m, *args.word1)
            return CodePair.from_states(s0, s1)
        except (ValueError, CutoffTooSmall) as exc:
            raise UsageError(str(exc))
    if args.mean_n is None:
        raise UsageError("give --word0/--word1, or --mean-n with --r2 or --rotated")
    cfg = _channel_config(args, args.m)
    if args.rotated:
        return rotated_pair(args.m, args.mean_n, cfg)
    if args.r2 is None:
        raise UsageError("--mean-n needs --r2 or --rotated")
    seed = (args.r2, args.z) if args.z is not None else None
    return solve_constraints(args.m, args.mean_n, args.r2, seed=seed, config=cfg)


def _kraus_for(args, N):
    sets = []
    if args.gamma is not None:
        if not 0.0 <= args.gamma <= 1.0:
            raise UsageError("--gamma must lie in [0, 1]")
        sets.append(loss_kraus(args.gamma, N))
    if args.gamma_phi is not None:
        if args.gamma_phi < 0:
            raise UsageError("--gamma-phi must be non-negative")
        sets.append(dephasing_kraus(args.gamma_phi, N))
    if not sets:
        return identity_kraus(N), "identity"
    if len(sets) == 2:
        return compose(sets[0], sets[1]), "loss after dephasing"
    return sets[0], sets[0].kind


# the KL diagnostic forms the full QEC matrix; skip it for very long Kraus lists
KL_MAX_OPERATORS = 2000


def cmd_fidelity(args, run):
    if args.m < 0:
        raise UsageError("--m must be non-negative")
    pair = _build_pair(args)
    if pair.orthogonality_residual > args.ortho_tol and not args.force:
        raise UsageError(
            f"codewords overlap by {pair.orthogonality_residual:.3e} > {args.ortho_tol:g}; use --force to proceed"
        )
    kraus, label = _kraus_for(args, pair.cutoff)
    F = fidelity(pair, kraus)
    eps = kl_epsilon(pair, kraus) if len(kraus) <= KL_MAX_OPERATORS else None
    s0, s1 = pair.params
    report = {
        "m": args.m,
        "word0": {"r": s0.r, "z": s0.z},
        "word1": {"r": s1.r, "z": s1.z},
        "channel": label,
        "gamma": args.gamma,
        "gamma_phi": args.gamma_phi,
        "fidelity": F,
        "kl_epsilon": eps,
        "orthogonality_residual": pair.orthogonality_residual,
        "mean_n_mismatch": pair.mean_n_mismatch,
        "cutoff": pair.cutoff,
        "kraus_operators": len(kraus),
    }
    run.cutoffs["pair"] = pair.cutoff
    lines = [
        f"word0: r = {s0.r:.9f}  z = {s0.z:.9f}",
        f"word1: r = {s1.r:.9f}  z = {s1.z:.9f}",
        f"channel: {label}  cutoff = {pair.cutoff}  Kraus operators = {len(kraus)}",
        f"F = {F:.12f}",
        "KL epsilon = " + (f"{eps:.6e}" if eps is not None else "skipped (Kraus list too long)"),
        f"|<0|1>| = {pair.orthogonality_residual:.3e}  |<n>_0 - <n>_1| = {pair.mean_n_mismatch:.3e}",
    ]
    if run.explicit_out:
        run.manifest("fidelity")
    _emit(args, report, lines)
    return 0


def cmd_feasibility(args, run):
    pair = _build_pair(args)
    try:
        rep = feasibility_report(pair)
    except InfeasibleScheme as exc:
        raise ComputationFailed(f"beyond reachable set: {exc}")
    s = rep.squeezing_db
    report = {
        "m": args.m,
        "words": [{"r": p.r, "z": p.z} for p in pair.params],
        "p_cw": rep.p_cw,
        "probabilities": rep.probabilities,
        "a": rep.a,
        "squeezing_db": s,
        "max_squeezing_db": rep.max_squeezing_db,
        "schemes": [{"r1": c.r1, "r2": c.r2, "t": c.t} for c in rep.schemes],
        "via_rotation": rep.via_rotation,
        "db_convention": DB_CONVENTION,
    }
    lines = [f"P_CW = {rep.p_cw:.6e}  (P0 = {rep.probabilities[0]:.6e}, P1 = {rep.probabilities[1]:.6e})"]
    for i, (sch, rot) in enumerate(zip(rep.schemes, rep.via_rotation)):
        lines.append(
            f"word{i}: S1 = {s[2 * i]:.3f} dB  S2 = {s[2 * i + 1]:.3f} dB  t = {sch.t:.6f}"
            + ("  (rotated inputs)" if rot else "")
        )
    lines += [f"max squeezing = {rep.max_squeezing_db:.3f} dB", DB_CONVENTION]
    if run.explicit_out:
        run.manifest("feasibility")
    _emit(args, report, lines)
    return 0


# --------------------------------------------------------------------------
# sweeps

SWEEP_COLUMNS = (
    "mean_n",
    "fidelity",
    "r1",
    "z1",
    "r2",
    "z2",
    "a1",
    "a2",
    "probability",
    "max_squeezing_db",
    "cutoff",
    "error",
)


def _sweep_rows(sweep):
    cols = sweep.columns()
    keys = [k for k in SWEEP_COLUMNS if k != "error"]
    keys[0] = sweep.axis_name
    return [tuple(cols[k][i] for k in keys) + (sweep.errors[i],) for i in range(sweep.axis.size)]


def _sweep_command(args, run, channel):
    noise = args.gamma if channel == "loss" else args.gamma_phi
    try:
        cfg = SearchConfig(args.m, mean_n=args.mean_n)
        if channel == "loss" and not 0.0 < noise < 1.0:
            raise ValueError("--gamma must lie in (0, 1)")
        if channel == "dephasing" and not noise > 0:
            raise ValueError("--gamma-phi must be positive")
    except ValueError as exc:
        raise UsageError(str(exc))
    kw = {"gamma": noise} if channel == "loss" else {"gamma_phi": noise}
    if args.rotated:
        sweep = optimize_rotated(args.m, config=cfg, jobs=args.jobs, with_feasibility=args.feasibility, **kw)
    elif channel == "loss":
        sweep = optimize_loss(args.m, noise, cfg, jobs=args.jobs, with_feasibility=args.feasibility)[3]
    else:
        sweep = optimize_dephasing(args.m, noise, cfg, jobs=args.jobs, with_feasibility=args.feasibility)
    run.add_config(sweep.config)
    if not np.any(sweep.ok):
        raise ComputationFailed("every sweep point failed: " + "; ".join(sorted(set(sweep.errors))))
    family = "rotated" if args.rotated else "optimal"
    tag = f"{channel}_{family}_m{args.m}_{'gamma' if channel == 'loss' else 'gammaphi'}{noise:g}"
    run.cutoffs[tag] = sweep.cutoff
    run.write_csv(
        f"{tag}.csv",
        SWEEP_COLUMNS,
        _sweep_rows(sweep),
        [
            f"{family} codewords under {channel}, m={args.m}, {'gamma' if channel == 'loss' else 'gamma_phi'}={noise:g}",
            "mean_n: <n>; fidelity: transpose-channel F maximised over r2; r, z: codeword parameters;",
            "a: probability-maximising a; probability: joint P_CW; max_squeezing_db: largest |dB| of the inputs",
        ],
    )
    if args.svg:
        run.write_svg(f"{tag}.svg", [(family, sweep.axis, sweep.fidelity)], "<n>", "F", tag)
    i = sweep.best_index()
    report = {
        "m": args.m,
        "channel": channel,
        "noise": noise,
        "family": family,
        "best_mean_n": sweep.axis[i],
        "best_r2": sweep.r2[i],
        "best_fidelity": sweep.fidelity[i],
        "failed_points": int(np.sum(~sweep.ok)),
        "outputs": run.outputs,
    }
    lines = [
        f"{family} m={args.m} {channel}={noise:g}: best F = {sweep.fidelity[i]:.9f} "
        f"(1-F = {1 - sweep.fidelity[i]:.3e}) at <n> = {sweep.axis[i]:g}, r2 = {sweep.r2[i]:.6f}",
        f"{int(np.sum(~sweep.ok))} of {sweep.axis.size} points failed",
        *(f"wrote {p}" for p in run.outputs),
    ]
    run.manifest(tag)
    _emit(args, report, lines)
    return 0


# --------------------------------------------------------------------------
# reproduce


def _grid_config(m, args, max_n=None):
    grid = args.mean_n if args.mean_n else default_mean_n_grid()
    if max_n is not None:
        grid = tuple(x for x in grid if x <= max_n + 1e-12)
    return SearchConfig(m, mean_n_grid=grid)


def _loss_runs(args, run, gammas, ms, rotated=False):
    """``{(gamma, m): (best_n, best_r2, F, sweep, rotated_sweep)}``."""
    out = {}
    for g in gammas:
        for m in ms:
            cfg = _grid_config(m, args)
            best = optimize_loss(m, g, cfg, jobs=args.jobs)
            run.add_config(best[3].config)
            rot = optimize_rotated(m, gamma=g, config=cfg, jobs=args.jobs) if rotated else None
            out[g, m] = best + (rot,)
    return out


def _best_or_nan(sweep):
    try:
        i = sweep.best_index()
    except NoSolutionFound:
        return None, math.nan
    return i, float(sweep.fidelity[i])


def _fig2(args, run):
    gammas, ms = args.gamma or FIG2_GAMMAS, args.m or (2, 3, 4, 5, 6)
    curves = {}
    for (g, m), (_, _, _, sweep, _) in _loss_runs(args, run, gammas, ms).items():
        tag = f"fig2_gamma{g:g}_m{m}"
        run.write_csv(
            f"{tag}.csv",
            ["mean_n", "fidelity", "r2", "error"],
            [(sweep.axis[i], sweep.fidelity[i], sweep.r2[i], sweep.errors[i]) for i in range(sweep.axis.size)],
            [f"loss fidelity maximised over r2 vs <n>, gamma={g:g}, m={m}"],
        )
        curves.setdefault(g, []).append((f"m={m}", sweep.axis, sweep.fidelity))
        yield sweep
    if args.svg:
        for g, c in curves.items():
            run.write_svg(f"fig2_gamma{g:g}.svg", c, "<n>", "F", f"loss, gamma={g:g}")


def _fig3(args, run):
    gammas, ms = args.gamma or FIG3_GAMMAS, args.m or (2, 3, 4, 5, 6)
    rows = []
    for (g, m), (bn, br2, F, sweep, _) in _loss_runs(args, run, gammas, ms).items():
        rows.append((g, m, 1.0 - F, bn, br2, "" if np.any(sweep.ok) else "all points failed"))
        yield sweep
    rows.sort(key=lambda r: (r[1], r[0]))
    run.write_csv(
        "fig3.csv",
        ["gamma", "m", "infidelity", "mean_n", "r2", "error"],
        rows,
        ["minimal infidelity 1 - max_<n> F over the <n> grid, per damping gamma and m"],
    )
    if args.svg:
        curves = [(f"m={m}", [r[0] for r in rows if r[1] == m], [r[2] for r in rows if r[1] == m]) for m in ms]
        run.write_svg("fig3.svg", curves, "gamma", "1 - F", "minimal infidelity", logx=True)


def _fig4(args, run):
    gammas, ms = args.gamma or FIG3_GAMMAS, args.m or (2, 3, 4, 5, 6)
    rows = []
    for (g, m), (_, _, F, sweep, rot) in _loss_runs(args, run, gammas, ms, rotated=True).items():
        _, f_rot = _best_or_nan(rot)
        rows.append((g, m, (F / f_rot - 1.0) * 100.0, F, f_rot, "" if math.isfinite(f_rot) else "no rotated pair"))
        yield sweep
        yield rot
    rows.sort(key=lambda r: (r[1], r[0]))
    run.write_csv(
        "fig4.csv",
        ["gamma", "m", "gain_percent", "f_opt", "f_rot", "error"],
        rows,
        ["relative gain g = (F_opt / F_rot - 1) * 100 of optimal over rotated codewords"],
    )
    if args.svg:
        curves = [(f"m={m}", [r[0] for r in rows if r[1] == m], [r[2] for r in rows if r[1] == m]) for m in ms]
        run.write_svg("fig4.svg", curves, "gamma", "g (%)", "relative gain", logx=True)


def _feasibility_row(pair):
    try:
        rep = feasibility_report(pair)
    except InfeasibleScheme as exc:
        return math.nan, math.nan, f"InfeasibleScheme: {exc}"
    return rep.p_cw, rep.max_squeezing_db, ""


def _fig56(args, run, which):
    gammas, ms = args.gamma or FIG3_GAMMAS, args.m or (2, 4, 6)
    rows = []
    for (g, m), (_, _, _, sweep, rot) in _loss_runs(args, run, gammas, ms, rotated=True).items():
        for family, sw in (("optimal", sweep), ("rotated", rot)):
            i, _ = _best_or_nan(sw)
            if i is None:
                rows.append((g, m, family, math.nan, math.nan, "no solution"))
                continue
            rows.append((g, m, family) + _feasibility_row(sw.pair(i)))
        yield sweep
        yield rot
    rows.sort(key=lambda r: (r[1], r[2], r[0]))
    col = 3 if which == "fig5" else 4
    run.write_csv(
        f"{which}.csv",
        ["gamma", "m", "family", "p_cw", "max_squeezing_db", "error"],
        rows,
        ["joint generation probability and largest input squeezing of the best loss codewords"],
    )
    if args.svg:
        curves = [
            (f"m={m} {fam}", [r[0] for r in rows if r[1:3] == (m, fam)], [r[col] for r in rows if r[1:3] == (m, fam)])
            for m in ms
            for fam in ("optimal", "rotated")
        ]
        ylabel = "P_CW" if which == "fig5" else "max squeezing (dB)"
        run.write_svg(f"{which}.svg", curves, "gamma", ylabel, ylabel, logx=True)


def _fig7(args, run):
    gphis, ms = args.gamma or FIG7_GAMMA_PHIS, args.m or (2, 3, 4, 5, 6)
    curves = {}
    for gp in gphis:
        for m in ms:
            sweep = optimize_dephasing(m, gp, _grid_config(m, args), jobs=args.jobs)
            run.add_config(sweep.config)
            tag = f"fig7_gammaphi{gp:g}_m{m}"
            run.write_csv(
                f"{tag}.csv",
                ["mean_n", "fidelity", "r2", "error"],
                [(sweep.axis[i], sweep.fidelity[i], sweep.r2[i], sweep.errors[i]) for i in range(sweep.axis.size)],
                [f"dephasing fidelity maximised over r2 vs <n>, gamma_phi={gp:g}, m={m}"],
            )
            curves.setdefault(gp, []).append((f"m={m}", sweep.axis, sweep.fidelity))
            yield sweep
    if args.svg:
        for gp, c in curves.items():
            run.write_svg(f"fig7_gammaphi{gp:g}.svg", c, "<n>", "F", f"dephasing, gamma_phi={gp:g}")


def dephasing_family_rows(m, mean_ns, gamma_phi=0.1):
    """Per ``<n>``: P_CW and the input squeezings of the best rotated pair under dephasing."""
    rows = []
    cfg = SearchConfig(m, gamma_phi=gamma_phi)
    for n in mean_ns:
        try:
            pair = rotated_pair(m, n, cfg)
            rep = feasibility_report(pair)
        except (NoOrthogonalPartner, InfeasibleScheme) as exc:
            rows.append((n, math.nan, math.nan, math.nan, math.nan, math.nan, f"{type(exc).__name__}: {exc}"))
            continue
        # word1 uses the scheme directly; word0 is its rotated copy
        s1_db, s2_db = rep.squeezing_db[2:4]
        rows.append((n, rep.p_cw, s1_db, s2_db, rep.schemes[1].t, rep.max_squeezing_db, ""))
    return rows


def _fig8_12(args, run, which):
    m = 2 if which == "fig8" else 6
    grid = args.mean_n or tuple(x for x in default_mean_n_grid() if x <= FEASIBILITY_MEAN_N_MAX + 1e-12)
    rows = dephasing_family_rows(m, grid)
    run.write_csv(
        f"{which}.csv",
        ["mean_n", "p_cw", "s1_db", "s2_db", "t", "max_squeezing_db", "error"],
        rows,
        [f"dephasing-optimal (rotated) codewords, m={m}: joint probability and input squeezing per <n>"],
    )
    if args.svg:
        x = [r[0] for r in rows]
        run.write_svg(f"{which}_probability.svg", [("P_CW", x, [r[1] for r in rows])], "<n>", "P_CW", f"m={m}")
        run.write_svg(
            f"{which}_squeezing.svg",
            [("S1", x, [r[2] for r in rows]), ("S2", x, [r[3] for r in rows])],
            "<n>",
            "squeezing (dB)",
            f"m={m}",
        )
    if all(r[-1] for r in rows):
        raise ComputationFailed("no point of the family could be generated")
    return ()


def _fig11(args, run):
    gammas, ms = args.gamma or FIG11_GAMMAS, args.m or (2, 3, 4, 5, 6)
    rows = []
    for g in gammas:
        results = {}
        for m in ms:
            results[m] = optimize_loss(m, g, _grid_config(m, args), jobs=args.jobs)
            run.add_config(results[m][3].config)
            yield results[m][3]
        for m, n, s0, s1 in coeff_variance_report(g, ms, results=results):
            rows.append((g, m, n, s0, s1))
    run.write_csv(
        "fig11.csv",
        ["gamma", "m", "mean_n", "sigma0", "sigma1"],
        rows,
        ["variance of the Fock-coefficient moduli (> 1e-9) of the loss-optimal codewords"],
    )
    if args.svg:
        curves = [(f"gamma={g:g} word{w}", ms, [r[3 + w] for r in rows if r[0] == g]) for g in gammas for w in (0, 1)]
        run.write_svg("fig11.svg", curves, "m", "sigma", "coefficient spread")


def reference_rows(m):
    """Scheme settings of the reference orthogonal pairs and the states they produce."""
    rows = []
    for k, pair in enumerate(REFERENCE_PAIRS[m]):
        states = []
        for label, ((s1, s2, t), (r_ref, z_ref)) in zip(("0", "1"), pair):
            st = scheme_to_state(SchemeParams.from_db(s1, s2, t), m)
            states.append((label, s1, s2, t, st, r_ref, z_ref))
        s0 = StateParams(m, states[0][4].r, states[0][4].z)
        s1 = StateParams(m, states[1][4].r, states[1][4].z)
        overlap = abs(inner_product(s0, s1))
        ref0 = StateParams(m, pair[0][1][0], pair[0][1][1])
        try:
            partner = orthogonal_partner_z(m, ref0, pair[1][1][0], pair[1][1][1])
        except NoOrthogonalPartner:
            partner = math.nan
        for label, s1_db, s2_db, t, st, r_ref, z_ref in states:
            rows.append(
                (k + 1, label, s1_db, s2_db, t, st.r, st.z, st.a, r_ref, z_ref, overlap, partner if label == "1" else "")
            )
    return rows


def _table(args, run, which):
    m = 2 if which == "tableB1" else 3
    run.write_csv(
        f"{which}.csv",
        ["pair", "codeword", "s1_db", "s2_db", "t", "r", "z", "a", "r_ref", "z_ref", "overlap", "partner_z"],
        reference_rows(m),
        [
            f"orthogonal pairs for m={m}: scheme settings, the state they produce and the rounded reference (r, z)",
            "overlap: |<0|1>| of the produced states; partner_z: z orthogonal to the reference codeword 0 at r_ref",
        ],
    )
    return ()


def cmd_reproduce(args, run):
    fig = args.figure
    if args.m and any(m < 2 or m > 6 for m in args.m):
        raise UsageError("--m values must lie in 2..6")
    makers = {
        "fig2": _fig2,
        "fig3": _fig3,
        "fig4": _fig4,
        "fig5": lambda a, r: _fig56(a, r, "fig5"),
        "fig6": lambda a, r: _fig56(a, r, "fig6"),
        "fig7": _fig7,
        "fig8": lambda a, r: _fig8_12(a, r, "fig8"),
        "fig11": _fig11,
        "fig12": lambda a, r: _fig8_12(a, r, "fig12"),
        "tableB1": lambda a, r: _table(a, r, "tableB1"),
        "tableB2": lambda a, r: _table(a, r, "tableB2"),
    }
    try:
        sweeps = list(makers[fig](args, run))
    except ValueError as exc:
        raise UsageError(str(exc))
    failed = sum(int(np.sum(~s.ok)) for s in sweeps)
    total = sum(s.axis.size for s in sweeps)
    if sweeps and failed == total:
        raise ComputationFailed("every sweep point failed")
    run.manifest(fig)
    report = {"figure": fig, "outputs": run.outputs, "failed_points": failed, "points": total}
    lines = [f"{fig}: {total - failed} of {total} sweep points ok" if sweeps else f"{fig}: done"]
    lines += [f"wrote {p}" for p in run.outputs]
    _emit(args, report, lines)
    return 0


# --------------------------------------------------------------------------


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) is not None and args.jobs == 0:
        parser.error("--jobs must be non-zero")
    run = Run(args, argv)
    commands = {
        "state": cmd_state,
        "fidelity": cmd_fidelity,
        "optimize-loss": lambda a, r: _sweep_command(a, r, "loss"),
        "optimize-dephasing": lambda a, r: _sweep_command(a, r, "dephasing"),
        "reproduce": cmd_reproduce,
        "feasibility": cmd_feasibility,
    }
    try:
        return commands[args.command](args, run)
    except UsageError as exc:
        parser.commands[args.command].print_usage(sys.stderr)
        print(f"bqec {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ComputationFailed, NoOrthogonalPartner, NoSolutionFound, InfeasibleScheme) as exc:
        print(f"bqec {args.command}: computation failed: {exc}", file=sys.stderr)
        return 1
