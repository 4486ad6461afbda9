"""Command-line interface: one subcommand per capability, CSV/JSON outputs.

Exit codes: 0 success, 1 numerical failure (diagnostics JSON on stderr),
2 usage or validation error.  Defaults reproduce the desk-scale acceptance
parameters, so each subcommand with no flags reruns the acceptance inputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .charroots import (
    RootSearchError,
    WaveParams,
    count_roots_argument_principle,
    find_complex_pair,
    find_lambda,
)
from .fracops import (
    ExponentialApproach,
    FracParams,
    Grid,
    GridFunction,
    apply_dalpha,
)
from .linops import DirichletValue, assemble, null_space_check, solve_bvp
from .quadform import (
    HalfLineFunction,
    build_kernel,
    eval_I_direct,
    eval_I_kernel,
    h20_test_family,
)
from .twsolve import (
    ConvergenceError,
    EvolveConfig,
    NewtonConfig,
    evolve_moving_frame,
    solve_wave,
)

SCHEMA_VERSION = 1


class ValidationError(ValueError):
    pass


def _out_dir(args) -> Path:
    d = args.out_dir or os.environ.get("FRACWAVE_OUT_DIR", ".")
    p = Path(d)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _emit(payload: dict):
    payload["schema_version"] = SCHEMA_VERSION
    json.dump(payload, sys.stdout, indent=2, default=float)
    sys.stdout.write("\n")


def _write_csv(path: Path, header: list[str], rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        wr.writerows(rows)


def _frac(args) -> FracParams:
    try:
        return FracParams(args.alpha)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def _wave_params(args) -> WaveParams:
    try:
        frac = _frac(args)
        if getattr(args, "phi_minus", None) is not None:
            return WaveParams(args.phi_minus, args.phi_plus, args.tau, frac)
        return WaveParams.from_hprime(args.hprime, args.tau, frac)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


# --------------------------------------------------------------------------- #
# subcommands
# --------------------------------------------------------------------------- #

def cmd_roots(args) -> dict:
    w = _wave_params(args)
    from .charroots import eval_char

    lam = find_lambda(w)
    out = {
        "lambda": lam,
        "lambda_residual": abs(eval_char(lam, w)),
        "pair": None,
        "pair_residual": None,
    }
    if w.tau > 0:
        z, _ = find_complex_pair(w)
        out["pair"] = {"re": z.real, "im": z.imag}
        out["pair_residual"] = abs(eval_char(z, w))
        band = max(4.0 * abs(z.imag), 1.0)
        left = count_roots_argument_principle(
            w, (min(4.0 * z.real, -1.0), -1e-3), (-band, band)
        )
    else:
        left = 0
    right = count_roots_argument_principle(
        w, (max(lam * 1e-3, 1e-6), max(10.0, 4.0 * lam)), (-5.0, 5.0)
    )
    out["contour_counts"] = {"right_half_plane": right, "left_half_plane": left}
    return out


def cmd_dalpha(args) -> dict:
    p = _frac(args)
    lam = args.rate
    if lam <= 0:
        raise ValidationError("--rate must be positive")
    out_dir = _out_dir(args)
    errors = []
    for h in args.h_values:
        grid = Grid.from_spacing(args.xmin, 0.0, h)
        x = grid.points
        f = GridFunction(grid, np.exp(lam * x), ExponentialApproach(0.0, 1.0, lam))
        g = apply_dalpha(f, p)
        exact = lam**p.alpha * np.exp(lam * x)
        err = float(np.max(np.abs(g.values - exact)) / np.max(np.abs(exact)))
        errors.append((h, err))
        if h == min(args.h_values):
            _write_csv(
                out_dir / "dalpha_profile.csv",
                ["xi", "f", "dalpha_f", "exact"],
                zip(x, f.values, g.values, exact),
            )
    orders = [
        float(np.log(errors[i][1] / errors[i + 1][1])
              / np.log(errors[i][0] / errors[i + 1][0]))
        for i in range(len(errors) - 1)
    ]
    _write_csv(
        out_dir / "dalpha_convergence.csv",
        ["h", "max_rel_error", "order"],
        [(h, e, o) for (h, e), o in zip(errors, orders + [float("nan")])],
    )
    return {
        "alpha": p.alpha,
        "rate": lam,
        "errors": [{"h": h, "max_rel_error": e} for h, e in errors],
        "orders": orders,
        "order_floor": 2.0 - p.alpha - 0.2,
        "orders_ok": bool(all(o >= 2.0 - p.alpha - 0.2 for o in orders)),
        "csv": ["dalpha_profile.csv", "dalpha_convergence.csv"],
    }


def cmd_quadform(args) -> dict:
    p = _frac(args)
    kernel = build_kernel(p)
    fam = h20_test_family(args.samples, args.seed)
    out_dir = _out_dir(args)
    rows = []
    all_positive = True
    max_gap = 0.0
    agree = True
    for i, v in enumerate(fam):
        rd = eval_I_direct(v, p)
        if rd.value < -rd.estimated_error:
            all_positive = False
        if i < args.kernel_samples:
            rk = eval_I_kernel(v, kernel)
            gap = abs(rd.value - rk.value)
            tol = max(1e-3, 3.0 * (rd.estimated_error + rk.estimated_error))
            agree &= gap <= tol
            max_gap = max(max_gap, gap)
            rows.append((i, rd.value, rd.estimated_error, rk.value, rk.estimated_error, gap))
        else:
            rows.append((i, rd.value, rd.estimated_error, "", "", ""))
    _write_csv(
        out_dir / "quadform_samples.csv",
        ["index", "direct", "direct_err", "kernel", "kernel_err", "abs_gap"],
        rows,
    )
    return {
        "alpha": p.alpha,
        "seed": args.seed,
        "samples": args.samples,
        "kernel_samples": args.kernel_samples,
        "all_positive": all_positive,
        "methods_agree": bool(agree),
        "max_method_gap": max_gap,
        "csv": ["quadform_samples.csv"],
    }


def cmd_nullspace(args) -> dict:
    w = _wave_params(args)
    out_dir = _out_dir(args)
    lam = find_lambda(w)
    rows = []
    errors = []
    for h in args.h_values:
        grid = Grid.from_spacing(-args.L, 0.0, h)
        op = assemble(w, grid, bc_right=DirichletValue(1.0))
        v = solve_bvp(op)
        exact = np.exp(lam * grid.points)
        err = float(np.max(np.abs(v.values - exact)))
        op0 = assemble(w, grid, bc_right=DirichletValue(0.0))
        sv = null_space_check(op0)
        rows.append((h, grid.n, err, sv["sigma_min"], sv["ratio"]))
        errors.append(err)
    orders = [
        float(np.log(errors[i] / errors[i + 1])
              / np.log(args.h_values[i] / args.h_values[i + 1]))
        for i in range(len(errors) - 1)
    ]
    _write_csv(
        out_dir / "nullspace_sweep.csv",
        ["h", "n", "bvp_error", "sigma_min", "sigma_ratio"],
        rows,
    )
    smins = [r[3] for r in rows]
    return {
        "lambda": lam,
        "sweep": [
            {"h": r[0], "n": r[1], "bvp_error": r[2], "sigma_min": r[3], "sigma_ratio": r[4]}
            for r in rows
        ],
        "orders": orders,
        "sigma_min_band": max(smins) / min(smins),
        "csv": ["nullspace_sweep.csv"],
    }


def cmd_wave(args) -> dict:
    w = _wave_params(args)
    grid = Grid.from_spacing(-args.L_left, args.L_right, args.h)
    prof = solve_wave(w, grid, NewtonConfig(tol=args.tol))
    out_dir = _out_dir(args)
    _write_csv(
        out_dir / "wave_profile.csv",
        ["xi", "phi"],
        zip(grid.points, prof.phi.values),
    )
    rel_gap = abs(prof.decay_rate_left - prof.lam) / prof.lam
    out = {
        "residual_norm": prof.residual_norm,
        "iterations": prof.iterations,
        "lambda": prof.lam,
        "decay_rate_left": prof.decay_rate_left,
        "decay_rate_rel_gap": rel_gap,
        "far_field_gap_left": prof.far_field_gap_left,
        "far_field_gap_right": prof.far_field_gap_right,
        "csv": ["wave_profile.csv"],
    }
    if args.validate_evolve:
        res = evolve_moving_frame(prof.phi, w, EvolveConfig(t_end=args.t_end))
        out["evolve"] = {
            "t_end": args.t_end,
            "drift_max": res.drift_max,
            "final_rhs_norm": res.final_rhs_norm,
            "dt": res.dt,
            "steps": res.steps,
        }
    return out


# --------------------------------------------------------------------------- #
# argument parsing
# --------------------------------------------------------------------------- #

def _add_common(sp, hprime=True):
    sp.add_argument("--alpha", type=float, default=0.5, help="fractional order in (0,1)")
    sp.add_argument("--tau", type=float, default=1.0, help="dispersion coefficient >= 0")
    if hprime:
        sp.add_argument("--hprime", type=float, default=1.0,
                        help="h'(phi_minus) = phi_minus - phi_plus")
        sp.add_argument("--phi-minus", type=float, default=None, dest="phi_minus")
        sp.add_argument("--phi-plus", type=float, default=0.0, dest="phi_plus")
    sp.add_argument("--out-dir", default=None,
                    help="output directory (default: $FRACWAVE_OUT_DIR or .)")
    sp.add_argument("--config", default=None, help="JSON config file; flags override")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fracwave",
        description="travelling waves of a nonlocal KdV-Burgers equation",
    )
    ap.add_argument("--version", action="version", version=f"fracwave {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("roots", help="characteristic roots and contour counts")
    _add_common(sp)
    sp.set_defaults(func=cmd_roots)

    sp = sub.add_parser("dalpha", help="fractional-derivative convergence study")
    _add_common(sp, hprime=False)
    sp.add_argument("--rate", type=float, default=1.0, help="exponential rate lambda")
    sp.add_argument("--xmin", type=float, default=-20.0)
    sp.add_argument("--h-values", type=float, nargs="+", default=[0.04, 0.02, 0.01])
    sp.set_defaults(func=cmd_dalpha)

    sp = sub.add_parser("quadform", help="quadratic form on the random test family")
    _add_common(sp, hprime=False)
    sp.add_argument("--seed", type=int, default=20240901)
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--kernel-samples", type=int, default=12,
                    help="how many samples also get the kernel-route evaluation")
    sp.set_defaults(func=cmd_quadform)

    sp = sub.add_parser("nullspace", help="linearised-operator refinement sweep")
    _add_common(sp)
    sp.add_argument("--L", type=float, default=40.0)
    sp.add_argument("--h-values", type=float, nargs="+", default=[0.04, 0.02, 0.01])
    sp.set_defaults(func=cmd_nullspace)

    sp = sub.add_parser("wave", help="solve the travelling wave")
    _add_common(sp)
    sp.add_argument("--L-left", type=float, default=40.0)
    sp.add_argument("--L-right", type=float, default=40.0)
    sp.add_argument("--h", type=float, default=0.01)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--validate-evolve", action="store_true")
    sp.add_argument("--t-end", type=float, default=20.0)
    sp.set_defaults(func=cmd_wave)
    return ap


def _apply_config(args):
    """Fill unset flags from the JSON config file; explicit flags win."""
    if not getattr(args, "config", None):
        return args
    with open(args.config) as fh:
        cfg = json.load(fh)
    argv = set()
    for tok in sys.argv[1:]:
        if tok.startswith("--"):
            argv.add(tok.lstrip("-").replace("-", "_"))
    for key, val in cfg.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ValidationError(f"unknown config key: {key}")
        if attr not in argv:
            setattr(args, attr, val)
    return args


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        args = _apply_config(args)
        payload = args.func(args)
    except ValidationError as exc:
        print(f"fracwave: invalid input: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, RootSearchError, np.linalg.LinAlgError) as exc:
        json.dump(
            {"error": type(exc).__name__, "message": str(exc)},
            sys.stderr,
            default=str,
        )
        sys.stderr.write("\n")
        return 1
    _emit(payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
