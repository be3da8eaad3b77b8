"""Command line entry point: ``magweyl <group> <command> [options]``.

Groups: ``weyl`` (eval, curve), ``op`` (assemble), ``spec`` (count),
``dyn`` (run, drift) and ``lab`` (sweep, fit, weyl-limit, gaps,
diophantine, verify).  Every command accepts ``--config FILE`` (repeatable)
and ``--set section.key=value`` overrides.

Exit codes: 0 ok, 2 budget exceeded, 3 invariant violation, 1 anything else.
"""
import argparse
import csv
import json
import sys
import time

import numpy as np

from . import experiments as lab
from .config import Config, smoothness_pair
from .discrete import GridSpec, assemble
from .dynamics import PhaseState, integrate, measure_drift, slow_variables
from .errors import BudgetExceeded, InvariantViolation, MagWeylError
from .field import semiclassical_scale
from .potential import Bump, PotentialField
from .spectral import dense_counting, dense_local_counting, inertia_counting, kpm_local_counting
from .weyl import magnetic_weyl_curve, standard_weyl_curve

EXIT_OK, EXIT_OTHER, EXIT_BUDGET, EXIT_INVARIANT = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _taus(args):
    """--tau a,b,c or --range lo:hi:n."""
    if getattr(args, "range", None):
        lo, hi, n = args.range.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    return np.sort(np.asarray(_floats(args.tau), dtype=float))


def _objects(conf):
    cfg = conf.field()
    scale = semiclassical_scale(conf.get_float("scale", "h"), conf.get_float("scale", "mu"), cfg.d, cfg.q)
    smooth = smoothness_pair(conf.get_list("potential", "smoothness"))
    V = PotentialField.from_text(conf.raw("potential", "expr"), cfg.d, L=conf.get_float("potential", "L"),
                                 smoothness=smooth)
    return cfg, scale, V


def _grid(conf, d):
    return GridSpec(d, conf.get_int("grid", "n"), conf.get_float("potential", "L"), conf.raw("grid", "boundary"),
                    conf.get_int("grid", "order"))


def _psi(conf):
    return Bump(radius=conf.get_float("psi", "radius"), amplitude=conf.get_float("psi", "amplitude"))


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def _write_csv(path, header, rows):
    fh = _open_out(path)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    finally:
        if fh is not sys.stdout:
            fh.close()


def _write_json(path, obj):
    text = json.dumps(lab._clean(obj), indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# weyl
# ---------------------------------------------------------------------------

def cmd_weyl(args, conf):
    cfg, scale, V = _objects(conf)
    norm = args.norm or conf.raw("weyl", "norm")
    x = None if args.x is None else np.asarray(_floats(args.x))
    taus = _taus(args)
    if args.standard:
        curve = standard_weyl_curve(taus, V, cfg.d, scale.h, x=x, norm=norm)
    else:
        curve = magnetic_weyl_curve(taus, V, cfg, scale, x=x, norm=norm)
    _write_csv(args.out, ["tau", "value", "provenance"], [(t, v, p) for t, v, _, p in curve.rows()])
    return EXIT_OK


# ---------------------------------------------------------------------------
# op
# ---------------------------------------------------------------------------

def cmd_op_assemble(args, conf):
    cfg, scale, V = _objects(conf)
    op = assemble(V, cfg, scale, _grid(conf, cfg.d))
    herm = op.hermiticity_residual()
    info = {"dim": op.dim, "nnz": int(op.matrix.nnz), "L": op.L, "spacing": op.spacing,
            "flux": op.meta.get("flux"), "hermiticity_residual": herm,
            "resolution_ratio": op.meta.get("resolution_ratio"), "warnings": op.meta.get("warnings", []),
            "config": conf.as_dict()}
    if args.export:
        op.export_coo(args.export)
        info["export"] = args.export
    _write_json(args.out, info)
    if herm > 1e-12:
        raise InvariantViolation(f"assembled matrix is not Hermitian (residual {herm:.3g})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# spec
# ---------------------------------------------------------------------------

def cmd_spec_count(args, conf):
    cfg, scale, V = _objects(conf)
    op = assemble(V, cfg, scale, _grid(conf, cfg.d))
    taus = _taus(args)
    cap = conf.get_int("engine", "dense_cap")
    w = op.psi_weights(_psi(conf)) if args.local else None
    t0 = time.perf_counter()
    side = {"engine": args.engine, "dim": op.dim, "flux": op.meta.get("flux"), "localized": bool(args.local)}
    if args.engine == "dense":
        curve = dense_counting(op, taus, cap=cap) if w is None else dense_local_counting(op, taus, w, cap=cap)
    elif args.engine == "inertia":
        if w is not None:
            raise MagWeylError("the inertia engine counts eigenvalues only; use dense or kpm with --local")
        curve = inertia_counting(op, taus, dense_cap=cap)
    else:
        seed = conf.get_int("engine", "seed")
        res = kpm_local_counting(op, taus, w, n_moments=conf.get_int("engine", "kpm_moments"),
                                 n_vectors=conf.get_int("engine", "kpm_vectors"), seed=seed)
        curve = res.curve
        side.update({"seed": seed, "moments": res.estimates[0].n_moments if res.estimates else None,
                     "vectors": conf.get_int("engine", "kpm_vectors"), "bounds": list(res.bounds),
                     "kernel_resolution": res.resolution})
    side["timing"] = {"wall_time": time.perf_counter() - t0}
    side["meta"] = {k: v for k, v in curve.meta.items() if k != "perturbations" or v}
    _write_csv(args.out, ["tau", "value", "stderr", "provenance"], curve.rows())
    if args.out not in (None, "-"):
        _write_json(lab.sidecar_path(args.out), side)
    return EXIT_OK


# ---------------------------------------------------------------------------
# dyn
# ---------------------------------------------------------------------------

def _trajectory(args, conf):
    cfg, scale, V = _objects(conf)
    d = cfg.d
    x0 = np.zeros(d) if args.x0 is None else np.asarray(_floats(args.x0))
    xi0 = np.zeros(d) if args.xi0 is None else np.asarray(_floats(args.xi0))
    if len(x0) != d or len(xi0) != d:
        raise MagWeylError(f"initial point must have {d} components")
    traj = integrate(PhaseState(x0, xi0), V, cfg, scale, args.T, dt=args.dt, stride=args.stride)
    return traj, cfg, scale


def cmd_dyn_run(args, conf):
    traj, cfg, scale = _trajectory(args, conf)
    d = cfg.d
    X = slow_variables(traj.x, cfg, scale, traj.xi)
    header = (["t"] + [f"x{i + 1}" for i in range(d)] + [f"xi{i + 1}" for i in range(d)]
              + [f"X{i + 1}" for i in range(d)] + ["H"])
    rows = [[traj.t[k], *traj.x[k], *traj.xi[k], *X[k], traj.energy[k]] for k in range(len(traj))]
    _write_csv(args.out, header, rows)
    return EXIT_OK


def cmd_dyn_drift(args, conf):
    traj, cfg, scale = _trajectory(args, conf)
    res = measure_drift(traj, cfg, scale)
    _write_json(args.out, {"velocity": res.velocity.tolist(), "intercept": res.intercept.tolist(),
                           "residual": res.residual, "window": list(res.window), "n_periods": res.n_periods})
    return EXIT_OK


# ---------------------------------------------------------------------------
# lab
# ---------------------------------------------------------------------------

def _emit(table, args):
    if args.out in (None, "-"):
        sys.stdout.write(table.csv_text())
        return
    paths = lab.emit(table, args.out, plot=not args.no_plot)
    print(json.dumps(paths), file=sys.stderr)


def cmd_lab_sweep(args, conf):
    if args.plan:
        with open(args.plan) as fh:
            plan = lab.SweepPlan.from_dict(json.load(fh))
    else:
        cfg_f = conf.get_list("field", "f")
        common = {"potential": conf.raw("potential", "expr"), "d": conf.field().d, "f": tuple(cfg_f),
                  "q": conf.get_int("field", "q"), "L": conf.get_float("potential", "L"),
                  "smoothness": smoothness_pair(conf.get_list("potential", "smoothness")), "tau": args.tau_value,
                  "psi_radius": conf.get_float("psi", "radius"), "psi_amplitude": conf.get_float("psi", "amplitude"),
                  "engine": args.engine or conf.raw("engine", "name"), "boundary": conf.raw("grid", "boundary"),
                  "order": conf.get_int("grid", "order"), "eps0": conf.get_float("thresholds", "eps0"),
                  "kpm_moments": conf.get_int("engine", "kpm_moments"),
                  "kpm_vectors": conf.get_int("engine", "kpm_vectors"), "seed": conf.get_int("engine", "seed"),
                  "workers": args.workers}
        hs = _floats(args.hs)
        if args.power is not None:
            plan = lab.SweepPlan.power_family(args.power, hs, **common)
        else:
            plan = lab.SweepPlan.fixed_hbar(args.hbar, hs, **common)
    _emit(lab.sweep_study(plan.to_dict()), args)
    return EXIT_OK


def cmd_lab_fit(args, conf):
    with open(args.csv) as fh:
        rows = list(csv.DictReader(fh))
    x = [float(r[args.param]) for r in rows]
    y = [abs(float(r[args.quantity])) for r in rows]
    regimes = [r["regime"] for r in rows] if "regime" in rows[0] else None
    fit = lab.scaling_fit(x=x, y=y, regimes=regimes, predicted=args.predicted, n_boot=args.boot, seed=args.seed)
    _write_json(args.out, {"param": args.param, "quantity": args.quantity, "slope": fit.slope,
                           "intercept": fit.intercept, "ci": list(fit.ci), "n": fit.n,
                           "span_decades": fit.span_decades, "predicted": fit.predicted,
                           "consistent": fit.consistent})
    return EXIT_OK


def cmd_lab_weyl_limit(args, conf):
    hbars = _floats(args.hbars) if args.hbars else [2.0 ** -k for k in range(3, 9)]
    _emit(lab.weyl_limit_study(hbars=tuple(hbars), tau=args.tau_value), args)
    return EXIT_OK


def cmd_lab_gaps(args, conf):
    hbars = tuple(_floats(args.hbars)) if args.hbars else (2.0, 4.0, 8.0)
    t = lab.gap_study(hbars=hbars, amp=args.amp, flux=args.flux, n=args.n)
    _emit(t, args)
    if not (t.summary["gaps_ok"] and t.summary["centers_ok"]):
        raise InvariantViolation("Landau clusters or gaps outside their predicted windows")
    return EXIT_OK


def cmd_lab_diophantine(args, conf):
    hbars = tuple(_floats(args.hbars)) if args.hbars else tuple(2.0 ** -k for k in range(7, 11))
    _emit(lab.diophantine_study(hbars=hbars), args)
    return EXIT_OK


def cmd_lab_verify(args, conf):
    ok = lab.verify_sidecar(args.csv, index=args.index)
    print("reproduced" if ok else "MISMATCH")
    if not ok:
        raise InvariantViolation(f"{args.csv} is not reproduced by its sidecar")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", action="append", default=[], help="INI file (repeatable, later wins)")
    p.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL", help="override one config value")
    p.add_argument("--out", "-o", default=None, help="output file (default stdout)")


def _tau_opts(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--tau", default="0", help="comma separated energies")
    g.add_argument("--range", default=None, metavar="LO:HI:N", help="N evenly spaced energies")


def build_parser():
    ap = argparse.ArgumentParser(prog="magweyl", description=__doc__.splitlines()[0])
    groups = ap.add_subparsers(dest="group", required=True)

    g = groups.add_parser("weyl", help="magnetic / standard Weyl densities")
    sub = g.add_subparsers(dest="cmd", required=True)
    for name in ("eval", "curve"):
        p = sub.add_parser(name)
        _common(p)
        _tau_opts(p)
        p.add_argument("--x", default=None, help="evaluation point; omit for a constant potential")
        p.add_argument("--norm", choices=["physical", "bare"], default=None)
        p.add_argument("--standard", action="store_true", help="field-free Weyl density instead")
        p.set_defaults(func=cmd_weyl)

    g = groups.add_parser("op", help="discrete operators")
    sub = g.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("assemble")
    _common(p)
    p.add_argument("--export", default=None, help="also write the matrix as 'row col re im' lines")
    p.set_defaults(func=cmd_op_assemble)

    g = groups.add_parser("spec", help="eigenvalue counting")
    sub = g.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("count")
    _common(p)
    _tau_opts(p)
    p.add_argument("--engine", choices=["dense", "inertia", "kpm"], default="dense")
    p.add_argument("--local", action="store_true", help="weight by the psi bump")
    p.set_defaults(func=cmd_spec_count)

    g = groups.add_parser("dyn", help="classical trajectories")
    sub = g.add_subparsers(dest="cmd", required=True)
    for name, fn in (("run", cmd_dyn_run), ("drift", cmd_dyn_drift)):
        p = sub.add_parser(name)
        _common(p)
        p.add_argument("--x0", default=None)
        p.add_argument("--xi0", default=None)
        p.add_argument("--T", type=float, default=1.0)
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--stride", type=int, default=1)
        p.set_defaults(func=fn)

    g = groups.add_parser("lab", help="remainder sweeps and studies")
    sub = g.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("sweep")
    _common(p)
    p.add_argument("--plan", default=None, help="JSON plan (as stored in a sidecar)")
    p.add_argument("--hbar", type=float, default=0.05, help="fixed mu*h along the family")
    p.add_argument("--power", type=float, default=None, help="use mu = h^-a instead")
    p.add_argument("--hs", default="0.1,0.08,0.06,0.05,0.04")
    p.add_argument("--tau-value", type=float, default=0.0)
    p.add_argument("--engine", choices=list(lab.ENGINES), default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_lab_sweep)

    p = sub.add_parser("fit")
    _common(p)
    p.add_argument("csv")
    p.add_argument("--param", default="h")
    p.add_argument("--quantity", default="R")
    p.add_argument("--predicted", type=float, default=None)
    p.add_argument("--boot", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_lab_fit)

    p = sub.add_parser("weyl-limit")
    _common(p)
    p.add_argument("--hbars", default=None)
    p.add_argument("--tau-value", type=float, default=1.0)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_lab_weyl_limit)

    p = sub.add_parser("gaps")
    _common(p)
    p.add_argument("--hbars", default=None)
    p.add_argument("--amp", type=float, default=0.15)
    p.add_argument("--flux", type=int, default=8)
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_lab_gaps)

    p = sub.add_parser("diophantine")
    _common(p)
    p.add_argument("--hbars", default=None)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_lab_diophantine)

    p = sub.add_parser("verify")
    _common(p)
    p.add_argument("csv")
    p.add_argument("--index", type=int, default=None)
    p.set_defaults(func=cmd_lab_verify)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        conf = Config.load(args.config, args.set)
        return args.func(args, conf)
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (MagWeylError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
