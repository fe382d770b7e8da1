"""Command-line entry point: `nf4nls {simulate,energy,bitree,lil,sample,check}`.

Every command writes CSV files into --out with '#' metadata headers that
echo the full configuration.  Exit codes: 0 success, 1 a check failed,
2 invalid arguments, 3 integration produced non-finite values, 4 the
enumeration budget was exceeded.
"""

import argparse
import os
import sys

import numpy as np

from . import __version__, io
from .bitrees import (
    MAX_ENUMERATION_J,
    BudgetExceeded,
    count_ordered_bitrees,
    dump_trees,
    enumerate_ordered_bitrees,
    enumeration_budget,
)
from .dynamics import (
    IntegrationError,
    IntegratorConfig,
    Scheme,
    integrate,
    random_initial_data,
    trajectory_diagnostics,
)
from .spectral import Frame, SpectralField, zero_field

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NAN, EXIT_BUDGET = 0, 1, 2, 3, 4
DUMP_MAX_J = 6  # the J = 7 dump would run to about 14 million lines


class ValidationError(ValueError):
    pass


def _require(cond, msg):
    if not cond:
        raise ValidationError(msg)


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _config(args):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "plot", "command")}
    cfg["budget"] = enumeration_budget()
    return {k: ",".join(map(str, v)) if isinstance(v, list) else v for k, v in cfg.items()}


def _path(args, name):
    return os.path.join(args.out, name)


def _write(args, name, columns, rows, extra=()):
    path = _path(args, name)
    io.write_csv(path, columns, rows, args.command, _config(args), extra)
    print(f"wrote {path}")
    return path


def _initial_field(args, s_data):
    if args.init == "zero":
        return zero_field(args.n, Frame.INTERACTION_V)
    if args.init == "single":
        c = np.zeros(2 * args.n + 1, dtype=complex)
        c[args.n + min(1, args.n)] = 1.0
        return SpectralField(Frame.INTERACTION_V, args.n, c, 0.0)
    return random_initial_data(args.n, s_data, args.seed, target_mass=args.mass)


# simulate

def cmd_simulate(args):
    _require(args.n >= 0, "--n must be >= 0")
    _require(args.dt > 0, "--dt must be positive")
    _require(args.t_final >= 0, "--t-final must be >= 0")
    _require(args.record_every >= 1, "--record-every must be >= 1")
    _require(args.init != "random" or args.mass > 0, "--mass must be positive")
    v0 = _initial_field(args, args.s)
    traj = integrate(v0, IntegratorConfig(args.n, args.dt, args.t_final, Scheme(args.scheme), args.record_every))
    rows = [(f.time, int(n), c.real, c.imag) for f in traj.fields for n, c in zip(f.n, f.coeffs)]
    _write(args, "trajectory.csv", ["t", "n", "re", "im"], rows, [f"# frame={Frame.INTERACTION_V.value}"])
    d = trajectory_diagnostics(traj, args.sigma)
    _write(args, "diagnostics.csv", ["t", "mass", "hamiltonian", "hs_norm"],
           zip(traj.times, d["mass"], d["hamiltonian"], d["hs_norm"]))
    if args.plot:
        from .plotting import plot_diagnostics

        print("wrote", plot_diagnostics(traj.times, d["mass"], d["hamiltonian"], d["hs_norm"],
                                        _path(args, "diagnostics.png")))
    return EXIT_OK


# energy

def cmd_energy(args):
    from .energy import drift_sweep, modified_energy, summarize_drift, telescoping_report

    _require(args.n >= 1, "--n must be >= 1")
    _require(1 <= args.jmax <= MAX_ENUMERATION_J, f"--jmax must be in 1..{MAX_ENUMERATION_J}")
    _require(args.s >= 0, "--s must be >= 0")
    _require(args.dt > 0 and args.t_final > 0, "--dt and --t-final must be positive")
    _require(args.samples >= 1, "--samples must be >= 1")
    _require(args.stride >= 1, "--stride must be >= 1")
    _require(all(N >= 1 for N in args.sweep_n), "--sweep-n entries must be >= 1")
    if not 0.5 < args.s < 1:
        print(f"note: s = {args.s} is outside the range 1/2 < s < 1 the energy bound addresses", file=sys.stderr)

    v0 = _initial_field(args, args.s)
    b = modified_energy(v0, 0.0, args.s, args.jmax, args.n)
    _write(args, "breakdown.csv", ["j", "N0", "N1", "R", "N2"],
           [(j, b.N0[j], b.N1[j], b.R[j], b.N2[j]) for j in sorted(b.N0)],
           [f"# hs_energy={io.fmt(b.hs_energy)}", f"# modified_energy={io.fmt(b.modified_energy)}",
            f"# mass={io.fmt(b.mass)}"])

    traj = integrate(v0, IntegratorConfig(args.n, args.dt, args.t_final))
    reps = {J: telescoping_report(traj, args.s, J, args.n, stride=args.stride) for J in range(1, args.jmax + 1)}
    rep = reps[args.jmax]
    at = {f.time: f for f in traj.fields}
    rows = []
    for k, t in enumerate(rep.times):
        e = modified_energy(at[t], t, args.s, args.jmax, args.n)
        rows.append((t, e.hs_energy, e.modified_energy, rep.residual[k], rep.remainder[k],
                     rep.fd_energy_derivative[k], rep.fd_hs_derivative[k]))
    _write(args, "drift.csv", ["t", "hs_energy", "modified_energy", "residual", "remainder",
                               "d_modified_energy", "d_hs_energy"], rows)
    _write(args, "residual_sweep.csv", ["J", "max_residual", "max_remainder", "max_mismatch"],
           [(J, float(np.max(np.abs(r.residual))), float(np.max(np.abs(r.remainder))), float(np.max(r.mismatch)))
            for J, r in reps.items()])

    summary = None
    if args.sweep_n:
        sweep = drift_sweep(tuple(args.sweep_n), s=args.s, J_max=args.sweep_jmax, seed=args.seed, samples=args.samples)
        _write(args, "drift_sweep.csv", ["N", "sample", "modified_drift", "hs_drift"],
               [(r.N, r.sample, r.modified_drift, r.hs_drift) for r in sweep])
        summary = summarize_drift(sweep)
        means = [v["modified_mean"] for v in summary.values()]
        _write(args, "drift_summary.csv", ["N", "modified_mean", "hs_mean", "strict"],
               [(N, v["modified_mean"], v["hs_mean"], v["strict"]) for N, v in summary.items()],
               [f"# spread={io.fmt(max(means) / min(means))}"])
    if args.plot:
        from .plotting import plot_drift_sweep, plot_residuals

        print("wrote", plot_residuals({J: r.times for J, r in reps.items()},
                                      {J: r.residual for J, r in reps.items()}, _path(args, "residuals.png")))
        if summary:
            print("wrote", plot_drift_sweep(summary, _path(args, "drift_sweep.png")))
    return EXIT_OK


# bitree

def cmd_bitree(args):
    _require(args.jmax >= 1, "--jmax must be >= 1")
    if args.jmax > MAX_ENUMERATION_J:
        print(f"error: J = {args.jmax} exceeds the enumeration cap {MAX_ENUMERATION_J} "
              f"({count_ordered_bitrees(args.jmax)} trees)", file=sys.stderr)
        return EXIT_USAGE
    rows = []
    for J in range(1, args.jmax + 1):
        trees = enumerate_ordered_bitrees(J)
        print(f"J={J} count={len(trees)}")
        rows.append((J, len(trees), count_ordered_bitrees(J)))
    _write(args, "counts.csv", ["J", "enumerated", "formula"], rows)
    if args.jmax > DUMP_MAX_J:
        print(f"note: tree dump skipped above J = {DUMP_MAX_J}", file=sys.stderr)
        return EXIT_OK
    path = _path(args, f"bitrees_J{args.jmax}.csv")
    header = "\n".join(io.metadata_lines(args.command, _config(args))) + "\n"
    io.atomic_write(path, header + dump_trees(enumerate_ordered_bitrees(args.jmax)))
    print(f"wrote {path}")
    return EXIT_OK


# lil

def cmd_lil(args):
    from .gaussian import lil_breakdown_experiment, lil_target

    _require(args.s > 0.5, "--s must exceed 1/2")
    _require(args.k >= 1, "--k must be >= 1")
    _require(args.eps > 0, "--eps must be positive")
    _require(args.samples >= 1, "--samples must be >= 1")
    _require(args.k_min <= args.k_max, "--k-min must not exceed --k-max")
    M = lil_target(args.k)
    rep = lil_breakdown_experiment(args.s, args.t_final, M, args.eps, args.samples, args.seed,
                                   k_min=args.k_min, k_max=args.k_max, N_samp=args.n_samp,
                                   baseline_samples=args.baseline, max_conditioned=args.max_conditioned)
    _write(args, "lil.csv", ["sample", "conditioned", "pre_ratio_max", "post_ratio_max"], rep.rows,
           [f"# M={io.fmt(M)}", f"# theta={io.fmt(rep.theta)}"])
    _write(args, "lil_summary.csv",
           ["draws", "conditioned", "rank_statistic", "p_value", "fraction_exceeding", "baseline_fraction"],
           [(rep.draws, rep.n_conditioned, rep.rank_statistic, rep.p_value, rep.fraction_exceeding,
             rep.baseline_fraction)])
    print(f"conditioned={rep.n_conditioned} draws={rep.draws} p_value={rep.p_value:.3g}")
    if args.plot:
        from .plotting import plot_lil

        c = rep.conditioned
        print("wrote", plot_lil([r[2] for r in c], [r[3] for r in c], rep.theta, _path(args, "lil.png")))
    return EXIT_OK


# sample

def cmd_sample(args):
    from .gaussian import sample_mu_s, tail_variance

    _require(args.s > 0.5, "--s must exceed 1/2")
    _require(args.n >= 1, "--n must be >= 1")
    _require(args.samples >= 1, "--samples must be >= 1")
    M = args.m_samp or 1 << (4 * (2 * args.n + 1) - 1).bit_length()
    _require(M >= 2 * args.n + 1, "--m-samp must be at least 2 N + 1")
    for i in range(args.samples):
        smp = sample_mu_s(args.s, args.n, args.seed, M, index=i)
        f = SpectralField(Frame.PHYSICAL_U, args.n, smp.coeffs, 0.0)
        path = _path(args, f"sample_{i}.csv")
        io.write_csv(path, ["n", "re", "im"], io.field_rows(f), args.command, _config(args),
                     [f"# index={i}", f"# tail_variance={io.fmt(tail_variance(args.s, args.n))}", io.field_header(f)])
        print(f"wrote {path}")
        if args.plot:
            from .plotting import plot_sample

            print("wrote", plot_sample(smp.grid, smp.grid_values, _path(args, f"sample_{i}.png")))
    return EXIT_OK


# check

def cmd_check(args):
    from .checks import CHECKS, run_checks

    known = {name for name, _ in CHECKS}
    only = [x for x in args.only.split(",") if x] if args.only else None
    _require(not only or set(only) <= known, f"unknown check; choose from {sorted(known)}")
    results = run_checks(only)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    _write(args, "check.csv", ["check", "status", "detail"],
           [(n, "PASS" if ok else "FAIL", d.replace(",", ";")) for n, ok, d in results])
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="nf4nls", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"nf4nls {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(name, helptext, func, **defaults):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--seed", type=_seed, default=0)
        sp.add_argument("--out", default="nf4nls_out", help="output directory")
        sp.add_argument("--plot", action="store_true", help="also render PNG figures next to the CSVs")
        sp.set_defaults(func=func)
        return sp

    sp = common("simulate", "integrate the truncated equation", cmd_simulate)
    sp.add_argument("--n", type=int, default=32)
    sp.add_argument("--dt", type=float, default=1e-4)
    sp.add_argument("--t-final", type=float, default=1.0)
    sp.add_argument("--s", type=float, default=5.0, help="decay of the random initial coefficients")
    sp.add_argument("--sigma", type=float, default=1.0, help="Sobolev index of the hs_norm column")
    sp.add_argument("--mass", type=float, default=1.0)
    sp.add_argument("--init", choices=["random", "zero", "single"], default="random")
    sp.add_argument("--scheme", choices=[s.value for s in Scheme], default="IF_RK4")
    sp.add_argument("--record-every", type=int, default=100)

    sp = common("energy", "modified energy, telescoping residuals and the N sweep", cmd_energy)
    sp.add_argument("--n", type=int, default=4)
    sp.add_argument("--dt", type=float, default=1e-4)
    sp.add_argument("--t-final", type=float, default=0.005)
    sp.add_argument("--s", type=float, default=0.6)
    sp.add_argument("--jmax", type=int, default=2)
    sp.add_argument("--mass", type=float, default=1.0)
    sp.add_argument("--init", choices=["random", "zero", "single"], default="random")
    sp.add_argument("--stride", type=int, default=10, help="spacing of the telescoping stencil points")
    sp.add_argument("--sweep-n", type=_int_list, default=[2, 4, 6, 8], help="comma list; empty skips the sweep")
    sp.add_argument("--sweep-jmax", type=int, default=1)
    sp.add_argument("--samples", type=int, default=4, help="random draws per N in the sweep")

    sp = common("bitree", "count and dump ordered bi-trees", cmd_bitree)
    sp.add_argument("--jmax", type=int, default=3)

    sp = common("lil", "conditioned LIL breakdown experiment", cmd_lil)
    sp.add_argument("--s", type=float, default=1.0)
    sp.add_argument("--t-final", type=float, default=1.0, help="flow time of the dispersionless evolution")
    sp.add_argument("--k", type=int, default=3, help="M^2 = -pi/2 + 2 k pi")
    sp.add_argument("--eps", type=float, default=0.3)
    sp.add_argument("--samples", type=int, default=100000, help="maximum number of draws")
    sp.add_argument("--max-conditioned", type=int, default=30)
    sp.add_argument("--baseline", type=int, default=64)
    sp.add_argument("--n-samp", type=int, default=2**16)
    sp.add_argument("--k-min", type=int, default=4)
    sp.add_argument("--k-max", type=int, default=20)

    sp = common("sample", "draw Gaussian random Fourier series", cmd_sample)
    sp.add_argument("--s", type=float, default=1.0)
    sp.add_argument("--n", type=int, default=1024, help="series truncation N_samp")
    sp.add_argument("--m-samp", type=int, default=0, help="grid size (default: power of two >= 4(2N+1))")
    sp.add_argument("--samples", type=int, default=1)

    sp = common("check", "run the property suite", cmd_check)
    sp.add_argument("--only", default="", help="comma list of check names")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IntegrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NAN
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:  # validation and module preconditions
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
