"""Command-line front end.

    rkg gen-coeffs --order 2 --m-min 1 --m-max 64 --out table.jsonl.gz
    rkg domain --order 4 --m 40 --nu 2 --samples 720 --out domain.csv
    rkg bench --problem brusselator --order 2 --mode controlled --atol 1e-3 --out row.csv
    rkg cmp --order 2 --m 11 --nu 1.0 --peclet 0.02 --out cmp.csv

Every CSV starts with a '#' line holding the resolved configuration and has
a JSON sidecar (same path plus .json) with the configuration and a summary.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .bench import BenchConfig, ConfigError, run_bench
from .coefficients import OrderingError, build_schedule
from .geometry import GridExhaustedError, fit_approx_ellipse, fit_strict_ellipse, select_alpha
from .integrator import InternalInstabilityError, frkg_step
from .polynomial import NU_GRID_SIZE, BetaSearchError, build_polynomial
from .problems import AdvDiff1D, Grid1D, advection_for_peclet, cmp_stencil
from .roots import RootFindingError
from .table import TABLE_PATH_ENV, CoefficientTable, TableError, generate_entries, save_table

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
NUMERICAL_ERRORS = (
    InternalInstabilityError,
    FloatingPointError,
    GridExhaustedError,
    BetaSearchError,
    RootFindingError,
    OrderingError,
)

log = logging.getLogger("rkg")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(path, config, header, rows, summary=None):
    """CSV with a leading '#' configuration line, plus a JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write("# " + " ".join(f"{k}={_fmt(v)}" for k, v in config.items()) + "\n")
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(v) for v in row])
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps({"config": config, "summary": summary or {}}, indent=2, sort_keys=True) + "\n")
    return path


def _nu_indices(spec):
    if spec in (None, "all"):
        return list(range(NU_GRID_SIZE))
    indices = [int(v) for v in str(spec).split(",")]
    if any(not 0 <= i < NU_GRID_SIZE for i in indices):
        raise ConfigError(f"nu indices must lie in 0..{NU_GRID_SIZE - 1}")
    return indices


def cmd_gen_coeffs(args):
    if args.m_min < 1 or args.m_max < args.m_min:
        raise ConfigError("need 1 <= m-min <= m-max")
    if args.digits < 30:
        raise ConfigError("working precision must be at least 30 digits")
    orders = [int(v) for v in str(args.order).split(",")]
    if any(not 1 <= n <= 8 for n in orders):
        raise ConfigError("orders must lie in 1..8")
    table = CoefficientTable()
    failures = []
    for order in orders:
        for index in _nu_indices(args.nu_index):
            for m in range(args.m_min, args.m_max + 1):
                try:
                    (entry,) = generate_entries(order, [m], index, dps=args.digits)
                except NUMERICAL_ERRORS as exc:
                    failures.append((order, m, index, str(exc)))
                    log.error("N=%d M=%d nu index %d failed: %s", order, m, index, exc)
                    continue
                table.add(entry)
                print(
                    f"N={order} M={m} nu_index={index} beta={entry.beta:.10g} alpha_s={entry.alpha_strict:.6g} "
                    f"alpha_a={entry.alpha_approx:.6g} Q/L^2={entry.amplification / entry.degree**2:.4f}"
                )
    save_table(table, args.out)
    print(f"wrote {len(table)} entries to {args.out}")
    return EXIT_NUMERICAL if failures else EXIT_OK


def trace_boundary(poly, samples, scan=2000):
    """|R| = 1 contour by radial bisection about (-beta/2, 0); upper and lower branches."""
    beta = float(poly.beta)
    centre = -beta / 2
    points = []
    for phi in np.linspace(0.0, np.pi, samples // 2 + 1):
        direction = np.exp(1j * phi)
        radii = np.linspace(0.0, beta, scan + 1)[1:]
        vals = np.abs(poly(centre + radii * direction))
        out = np.nonzero(vals > 1 + 1e-12)[0]
        if len(out) == 0:
            continue
        hi = radii[out[0]]
        lo = radii[out[0] - 1] if out[0] > 0 else 0.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if abs(poly(centre + mid * direction)) > 1 + 1e-12:
                hi = mid
            else:
                lo = mid
        z = centre + lo * direction
        points.append((z.real, z.imag))
    upper = [(x, y, "upper") for x, y in points]
    lower = [(x, -y, "lower") for x, y in reversed(points)]
    return upper + lower


def cmd_domain(args):
    if args.m < 1 or args.nu < 0 or args.samples < 8:
        raise ConfigError("need m >= 1, nu >= 0 and samples >= 8")
    poly = build_polynomial(args.order, args.m, args.nu)
    alpha_s = fit_strict_ellipse(poly)
    alpha_a = fit_approx_ellipse(args.order, args.m, args.nu)
    rows = trace_boundary(poly, args.samples)
    beta = float(poly.beta)
    summary = {
        "beta": beta,
        "alpha_strict": float(alpha_s),
        "alpha_approx": float(alpha_a),
        "alpha_fixed": float(select_alpha(alpha_s, alpha_a, controlled=False)),
        "alpha_controlled": float(select_alpha(alpha_s, alpha_a, controlled=True)),
    }
    config = {"command": "domain", "order": args.order, "m": args.m, "nu": args.nu, "samples": args.samples}
    write_csv(args.out, {**config, **summary}, ["x", "y", "branch"], rows, summary)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_bench(args):
    cfg = BenchConfig(
        problem=args.problem,
        order=args.order,
        mode=args.mode,
        atol=args.atol,
        rtol=args.rtol,
        step=args.step,
        substeps=args.m,
        nu_index=args.nu_index,
        mu=args.mu,
        grid=args.grid if args.grid is not None else (400 if args.problem == "advdiff1d" else 200),
        t_end=args.t_end,
        t0=args.t0,
        seed=args.seed,
    ).resolved()
    row, _ = run_bench(cfg)
    config = {"command": "bench", **asdict(cfg)}
    header = ["err_l2", "err_linf", "f_accepted", "f_rejected", "steps", "rejected_steps", "m_max", "flag"]
    values = [row.err_l2, row.err_linf, row.f_accepted, row.f_rejected, row.steps, row.rejected_steps, row.m_max, row.flag]
    summary = {**asdict(row), "f_count": row.f_count}
    write_csv(args.out, config, header, [values], summary)
    print(",".join(header))
    print(",".join(_fmt(v) for v in values))
    return EXIT_NUMERICAL if row.flag == "unstable" else EXIT_OK


def cmd_cmp(args):
    if args.samples < 2 or args.steps < 0:
        raise ConfigError("need samples >= 2 and steps >= 0")
    d, h = 1.0, 0.1
    a = args.advection if args.advection is not None else advection_for_peclet(args.peclet, d, h)
    rows = []
    for f in np.linspace(1.0 / args.samples, 1.0, args.samples):
        st = cmp_stencil(args.order, args.m, args.nu, f, a=a, d=d, h=h)
        k = int(np.argmin(st.weights))
        rows.append(("stencil", f, st.step, st.min_weight, int(st.offsets[k]), st.total))
    minimum = min(r[3] for r in rows)
    summary = {"min_weight": minimum, "advection": a, "diffusion": d, "h": h, "peclet": abs(a) * h / d}
    if args.steps:
        poly = build_polynomial(args.order, args.m, args.nu)
        schedule = build_schedule(poly, seed=args.seed)
        problem = AdvDiff1D(Grid1D(-20.0, 20.0, h), a=a, d=d)
        system = problem.system()
        step = args.profile_fraction * rows[-1][2]
        w = problem.initial()
        for _ in range(args.steps):
            w = frkg_step(system, w, step, schedule)
        t = args.steps * step
        exact = problem.exact(t)
        for x, wn, we in zip(problem.x, w, exact):
            rows.append(("profile", x, t, wn, we, 0))
        summary["profile_time"] = t
        summary["profile_min"] = float(w.min())
        summary["profile_max"] = float(w.max())
    config = {
        "command": "cmp",
        "order": args.order,
        "m": args.m,
        "nu": args.nu,
        "peclet": args.peclet,
        "advection": a,
        "samples": args.samples,
        "steps": args.steps,
        "profile_fraction": args.profile_fraction,
        "seed": args.seed,
    }
    # stencil rows: kind, T_fraction, T, min weight, argmin offset, weight sum
    # profile rows: kind, x, t, numerical, exact, 0
    write_csv(args.out, config, ["kind", "a", "b", "c", "d", "e"], rows, summary)
    print(json.dumps(summary))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rkg",
        description=f"Factorized RKG methods. Table files are searched on ${TABLE_PATH_ENV}, then in the package.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-coeffs", help="generate a coefficient table file")
    g.add_argument("--order", default="2", help="order or comma list of orders")
    g.add_argument("--m-min", type=int, default=1)
    g.add_argument("--m-max", type=int, default=64)
    g.add_argument("--nu-index", default="all", help="'all' or comma list of indices 0..17")
    g.add_argument("--digits", type=int, default=60, help="working precision (stored values keep 25 digits)")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_coeffs)

    d = sub.add_parser("domain", help="trace the |R| = 1 boundary and fitted ellipses")
    d.add_argument("--order", type=int, required=True)
    d.add_argument("--m", type=int, required=True)
    d.add_argument("--nu", type=float, required=True)
    d.add_argument("--samples", type=int, default=720)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_domain)

    b = sub.add_parser("bench", help="run one work-precision benchmark row")
    b.add_argument("--problem", choices=["advdiff1d", "brusselator"], default="brusselator")
    b.add_argument("--order", type=int, default=2)
    b.add_argument("--mode", choices=["fixed", "controlled"], default="controlled")
    b.add_argument("--atol", type=float, default=1e-3)
    b.add_argument("--rtol", type=float, default=None, help="defaults to atol")
    b.add_argument("--step", type=float, default=None, help="fixed-mode step size")
    b.add_argument("--m", type=int, default=None, help="force M in fixed mode")
    b.add_argument("--nu-index", type=int, default=None, help="nu index with --m (default 1)")
    b.add_argument("--mu", type=float, default=0.1)
    b.add_argument("--grid", type=int, default=None, help="cells per side (default 200; 400 for advdiff1d)")
    b.add_argument("--t-end", type=float, default=1.0)
    b.add_argument("--t0", type=float, default=0.0)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("cmp", help="stencil minima and solution profiles for the 1D problem")
    c.add_argument("--order", type=int, required=True)
    c.add_argument("--m", type=int, required=True)
    c.add_argument("--nu", type=float, required=True)
    c.add_argument("--peclet", type=float, default=0.02, help="mesh Peclet number |a| h / d (h=0.1, d=1)")
    c.add_argument("--advection", type=float, default=None, help="advection speed; overrides --peclet")
    c.add_argument("--samples", type=int, default=200, help="step fractions in (0, 1]")
    c.add_argument("--steps", type=int, default=10, help="profile steps (0 to skip)")
    c.add_argument("--profile-fraction", type=float, default=0.8)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_cmp)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, TableError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
