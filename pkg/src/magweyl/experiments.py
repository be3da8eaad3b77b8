"""Sweeps over (h, mu): remainders, scaling fits and the table-producing studies.

Every study returns a :class:`Table`; :func:`emit` writes it as CSV with a
JSON sidecar holding the exact parameters, and :func:`regenerate` rebuilds
the table (or a single row) from that sidecar.  Floats are written with
``repr`` so a rerun can be compared byte for byte.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import csv
import io
import json
import math
import os
import tempfile
import time

import numpy as np

from .bounds import BOUNDS, evaluate_bounds
from .discrete import GridSpec, assemble, flux_quantize, landau_grid_error
from .errors import DimensionTooLarge, OutOfRange, RegimeMixed, SpanTooSmall
from .field import FieldConfig, check_nondegeneracy, field_invariants, mollify, semiclassical_scale
from .potential import Bump, PotentialField
from .spectral import (dense_local_counting, dense_spectrum, gap_scan, kpm_local_counting,
                       sector_counting)
from .weyl import (diophantine_modulus, localized_weyl, localized_weyl_strip,
                   magnetic_weyl_density, weyl_limit_check)

ENGINES = ("auto", "sector", "sector-plane", "dense", "kpm")
FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# plans and records
# ---------------------------------------------------------------------------

@dataclass
class SweepPlan:
    """Parameter grid for a remainder sweep; everything needed to rerun it."""
    points: list                         # [(h, mu), ...]
    potential: str = "(+ 1 (* 0.3 x1))"
    d: int = 2
    f: tuple = (1.0,)
    q: int = 0
    F: list = None                       # full intensity matrix (overrides f, q)
    L: float = 1.0
    smoothness: tuple = (math.inf, 0.0)
    tau: float = 0.0
    psi_radius: float = 0.5
    psi_amplitude: float = 1.0
    engine: str = "auto"
    boundary: str = "torus"
    order: int = 4
    points_per_length: float = 8.0       # grid points per magnetic length
    n_max: int = 76
    mollify: bool = False
    eps0: float = 0.05
    corrected: bool = True
    kpm_moments: int = 256
    kpm_vectors: int = 32
    seed: int = 0
    quad_n: int = 128
    workers: int = 1

    def __post_init__(self):
        self.points = [(float(h), float(mu)) for h, mu in self.points]
        self.f = tuple(float(v) for v in self.f)
        self.smoothness = tuple(float(v) for v in self.smoothness)
        if self.engine not in ENGINES:
            raise OutOfRange(f"unknown engine {self.engine!r}")

    @classmethod
    def fixed_hbar(cls, hbar, hs, exact_flux=True, **kw):
        """Family mu = hbar / h.  With ``exact_flux`` each h is moved to the
        nearest value giving an integer torus flux at the plan's L, so the box
        (and therefore a periodic potential) never changes along the sweep."""
        L = float(kw.get("L", 1.0))
        fmax = max(kw.get("f", (1.0,)))
        pts = []
        for h in hs:
            if exact_flux:
                N = max(1, round(hbar * fmax * (2 * L) ** 2 / (2 * math.pi * h * h)))
                h = math.sqrt(hbar * fmax * (2 * L) ** 2 / (2 * math.pi * N))
            pts.append((h, hbar / h))
        return cls(points=pts, **kw)

    @classmethod
    def power_family(cls, a, hs, **kw):
        """Family mu = h^(-a)."""
        return cls(points=[(h, h ** -a) for h in hs], **kw)

    def field(self):
        if self.F is not None:
            return field_invariants(np.asarray(self.F, dtype=float))
        return FieldConfig.from_frequencies(self.f, self.q)

    def to_dict(self):
        out = asdict(self)
        out["points"] = [list(p) for p in self.points]
        out["smoothness"] = [_jsonable(v) for v in self.smoothness]
        out["f"] = list(self.f)
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["points"] = [tuple(p) for p in data["points"]]
        data["smoothness"] = tuple(_from_json(v) for v in data["smoothness"])
        data["f"] = tuple(data["f"])
        return cls(**data)


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _from_json(v):
    return float(v) if isinstance(v, str) else v


@dataclass
class RemainderRecord:
    index: int
    h: float
    mu: float
    hbar: float
    regime: str
    tau: float
    engine: str
    dim: int
    L: float
    resolution: float           # magnetic length / grid spacing (inf for grid-free engines)
    degraded: bool
    count: float
    weyl: float
    weyl_I: float
    R_signed: float
    R: float
    R_I_signed: float
    R_I: float
    engine_error: float
    quad_error: float
    hypotheses: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def row(self):
        out = {k: getattr(self, k) for k in RECORD_COLUMNS}
        for k in HYP_KEYS:
            out["hyp_" + k] = bool(self.hypotheses.get(k, False))
        for b in BOUNDS:
            out["bound_" + b.key] = self.bounds[b.key][1] if b.key in self.bounds else ""
        return out


RECORD_COLUMNS = ("index", "h", "mu", "hbar", "regime", "tau", "engine", "dim", "L", "resolution", "degraded",
                  "count", "weyl", "weyl_I", "R_signed", "R", "R_I_signed", "R_I", "engine_error", "quad_error")
HYP_KEYS = ("potential_nonzero", "gradient_nonzero", "level_nondegenerate", "below_lowest_level")


def record_columns():
    return list(RECORD_COLUMNS) + ["hyp_" + k for k in HYP_KEYS] + ["bound_" + b.key for b in BOUNDS]


# ---------------------------------------------------------------------------
# remainder at one point
# ---------------------------------------------------------------------------

def _strip_ok(V, cfg, plan):
    return (cfg.d == 2 and cfg.q == 0 and plan.boundary == "torus"
            and V.depends_only_on([0], basis=cfg.basis))


def _grid_n(cfg, scale, plan, L):
    ell = math.sqrt(scale.h / (scale.mu * float(np.max(cfg.f))))
    want = int(math.ceil(2 * L * plan.points_per_length / ell))
    n = max(16, min(want, plan.n_max))
    return n, n < want


def hypotheses(V, cfg, scale, tau, eps0=0.05):
    out = {}
    for which in HYP_KEYS:
        out[which] = bool(check_nondegeneracy(V, which, scale, cfg, eps0=eps0, tau=tau).holds)
    return out


def remainder(point, plan, index=0):
    """Localized remainder ``|int (e - E^MW) psi|`` at one (h, mu).

    Engines: ``sector`` (exact Landau-gauge sectors, d = 2 with V = V(y1)),
    ``sector-plane`` (the same sectors integrated over every center, i.e. the
    operator on the whole plane rather than the torus), ``dense`` (full
    eigendecomposition of the grid operator) and ``kpm``; ``auto`` takes the
    first that applies.
    """
    t0 = time.perf_counter()
    h, mu = point
    cfg = plan.field()
    scale = semiclassical_scale(h, mu, cfg.d, cfg.q)
    V = PotentialField.from_text(plan.potential, cfg.d, L=plan.L, smoothness=plan.smoothness)
    if plan.mollify:
        V = mollify(V, scale.eps_weak)
    psi = Bump(radius=plan.psi_radius, amplitude=plan.psi_amplitude)
    tau = plan.tau
    strip = _strip_ok(V, cfg, plan)

    engine = plan.engine
    if engine == "auto":
        engine = "sector" if strip else "dense"
    if engine in ("sector", "sector-plane") and not strip:
        raise OutOfRange("the sector engine needs d = 2, q = 0, a torus and V = V(y1)")

    eng_err, L_used, dim, res, degraded = 0.0, plan.L, 0, math.inf, False
    if engine == "sector":
        curve = sector_counting(V, cfg, scale, plan.L, [tau], psi)
        count = float(curve.values[0])
        eng_err = float(curve.meta["engine_error"][0])
        L_used = curve.meta["L"]
        dim = int(curve.meta["sectors"]) * int(curve.meta["basis"])
    elif engine == "sector-plane":
        curve = sector_counting(V, cfg, scale, plan.L, [tau], psi, mode="plane")
        count = float(curve.values[0])
        eng_err = float(curve.meta["engine_error"][0])
        dim = int(curve.meta["solves"]) * int(curve.meta["basis"])
    else:
        L_req = plan.L
        if plan.boundary == "torus":
            L_req, _, _ = flux_quantize(cfg, scale, plan.L)
        n, degraded = _grid_n(cfg, scale, plan, L_req)
        op = assemble(V, cfg, scale, GridSpec(cfg.d, n, plan.L, plan.boundary, plan.order))
        L_used, dim, res = op.L, op.dim, op.meta["resolution_ratio"]
        w = op.psi_weights(psi)
        curve = None
        if engine == "dense":
            try:
                curve = dense_local_counting(op, [tau], w)
            except DimensionTooLarge:
                engine = "kpm"
        if engine == "kpm":
            kp = kpm_local_counting(op, [tau], w, n_moments=plan.kpm_moments, n_vectors=plan.kpm_vectors,
                                    seed=plan.seed)
            curve = kp.curve
            eng_err = float(curve.stderr[0]) + 0.0
        count = float(curve.values[0])

    if strip:
        wv = localized_weyl_strip(tau, V, psi, cfg, scale)
        wi = localized_weyl_strip(tau, V, psi, cfg, scale, kind="corrected") if plan.corrected and cfg.r == 1 else None
    else:
        wv = localized_weyl(tau, V, psi, cfg, scale, n=plan.quad_n, radius=plan.psi_radius)
        wi = (localized_weyl(tau, V, psi, cfg, scale, kind="corrected", n=plan.quad_n, radius=plan.psi_radius)
              if plan.corrected and cfg.r == 1 else None)
    weyl = float(wv.value)
    weyl_I = float(wi.value) if wi is not None else float("nan")
    qerr = float(wv.error_estimate)

    hyp = hypotheses(V, cfg, scale, tau, plan.eps0) if 0 < h < 1 else {}
    bnds = evaluate_bounds(h, mu, cfg.d, cfg.q, plan.smoothness, hyp)
    rs = count - weyl
    ri = count - weyl_I
    return RemainderRecord(index=index, h=float(h), mu=float(mu), hbar=float(mu * h), regime=scale.regime,
                           tau=float(tau), engine=engine, dim=int(dim), L=float(L_used), resolution=float(res),
                           degraded=bool(degraded), count=count, weyl=weyl, weyl_I=weyl_I, R_signed=rs, R=abs(rs),
                           R_I_signed=ri, R_I=abs(ri), engine_error=eng_err, quad_error=qerr, hypotheses=hyp,
                           bounds=bnds, wall_time=time.perf_counter() - t0)


def _remainder_task(args):
    plan_dict, i = args
    plan = SweepPlan.from_dict(plan_dict)
    return remainder(plan.points[i], plan, index=i)


def sweep(plan, indices=None):
    """Records for the plan's points, ordered by grid index whatever the pool does."""
    idx = list(range(len(plan.points))) if indices is None else list(indices)
    tasks = [(plan.to_dict(), i) for i in idx]
    if plan.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            recs = list(pool.map(_remainder_task, tasks))
    else:
        recs = [_remainder_task(t) for t in tasks]
    return sorted(recs, key=lambda r: r.index)


# ---------------------------------------------------------------------------
# fits
# ---------------------------------------------------------------------------

@dataclass
class FitResult:
    slope: float
    intercept: float
    ci: tuple
    n: int
    span_decades: float
    predicted: float = None
    residual: float = 0.0

    @property
    def consistent(self):
        if self.predicted is None:
            return None
        return self.ci[0] <= self.predicted <= self.ci[1]


def loglog_trend(x, y, n_boot=2000, seed=0, level=0.95):
    """Least-squares slope of log y against log x with a pairs-bootstrap interval."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise OutOfRange("log-log fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = float(np.max(np.abs(A @ np.array([slope, icpt]) - ly)))
    rng = np.random.default_rng(seed)
    boots = []
    n = len(x)
    for _ in range(n_boot):
        k = rng.integers(0, n, n)
        if np.ptp(lx[k]) == 0:
            continue
        boots.append(np.polyfit(lx[k], ly[k], 1)[0])
    if boots:
        a = (1 - level) / 2
        lo, hi = np.quantile(boots, [a, 1 - a])
        lo, hi = min(lo, slope), max(hi, slope)
    else:
        lo = hi = slope
    span = float(np.log10(x.max() / x.min()))
    return FitResult(slope=float(slope), intercept=float(icpt), ci=(float(lo), float(hi)), n=n,
                     span_decades=span, residual=res)


def scaling_fit(records=None, x=None, y=None, regimes=None, param="h", quantity="R", predicted=None,
                n_boot=2000, seed=0, min_points=5, min_decades=1.0):
    """Exponent of a remainder against one sweep parameter.

    Either pass records (the parameter and quantity are read from them) or
    raw arrays ``x``, ``y`` with optional regime labels.
    """
    if records is not None:
        x = [getattr(r, param) for r in records]
        y = [getattr(r, quantity) for r in records]
        regimes = [r.regime for r in records]
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if regimes is not None and len(set(regimes)) > 1:
        raise RegimeMixed(f"records span regimes {sorted(set(regimes))}")
    if len(x) < min_points:
        raise SpanTooSmall(f"need at least {min_points} points, got {len(x)}")
    span = float(np.log10(x.max() / x.min()))
    if span < min_decades - 1e-12:
        raise SpanTooSmall(f"parameter spans {span:.3g} decades, need {min_decades}")
    fit = loglog_trend(x, y, n_boot=n_boot, seed=seed)
    fit.predicted = predicted
    return fit


def predicted_exponent(d, q, regime):
    """Exponent in h of the sharp leading bound at fixed mu*h (per regime family)."""
    if regime in ("weak", "intermediate", "strong"):
        # mu^-1 h^(1-d) with mu = hbar/h for q = 0, h^(1-d) otherwise
        return 2.0 - d if q == 0 else 1.0 - d
    return None


# ---------------------------------------------------------------------------
# tables, sidecars and plot scripts
# ---------------------------------------------------------------------------

@dataclass
class Table:
    study: str
    columns: list
    rows: list
    params: dict
    summary: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    def csv_text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_cell(row.get(c, "")) for c in self.columns])
        return buf.getvalue()

    def row_text(self, i):
        return ",".join(_cell(self.rows[i].get(c, "")) for c in self.columns)


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        return " ".join(_cell(u) for u in v)
    return str(v)


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def sidecar_path(csv_path):
    return os.path.splitext(csv_path)[0] + ".json"


def emit(table, csv_path, plot=True):
    """Write CSV, JSON sidecar and (optionally) a gnuplot script; returns the paths."""
    import numpy as _np
    import scipy as _sp

    text = table.csv_text()
    _atomic_write(csv_path, text)
    side = {"format": FORMAT_VERSION, "study": table.study, "params": table.params,
            "columns": table.columns, "n_rows": len(table.rows), "summary": _clean(table.summary),
            "timing": table.timing, "versions": {"numpy": _np.__version__, "scipy": _sp.__version__}}
    sp = sidecar_path(csv_path)
    _atomic_write(sp, json.dumps(side, indent=2, sort_keys=True) + "\n")
    paths = {"csv": csv_path, "sidecar": sp}
    if plot:
        gp = os.path.splitext(csv_path)[0] + ".gp"
        _atomic_write(gp, plot_script(table, csv_path))
        paths["plot"] = gp
    return paths


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


PLOT_AXES = {
    "sweep": ("h", ["R", "R_I"], True),
    "weyl-limit": ("hbar", ["deviation"], True),
    "gaps": ("hbar", ["gap_width", "required_width"], False),
    "diophantine": ("hbar", ["nu"], True),
}


def plot_script(table, csv_path):
    xcol, ycols, logy = PLOT_AXES.get(table.study, (table.columns[0], table.columns[1:2], False))
    stem = os.path.splitext(os.path.basename(csv_path))[0]
    lines = ["set datafile separator ','", "set key autotitle columnhead", "set terminal pngcairo size 900,600",
             f"set output '{stem}.png'", f"set xlabel '{xcol}'", "set logscale x"]
    if logy:
        lines.append("set logscale y")
    plots = []
    for yc in ycols:
        if yc in table.columns and xcol in table.columns:
            xi = table.columns.index(xcol) + 1
            yi = table.columns.index(yc) + 1
            plots.append(f"'{os.path.basename(csv_path)}' using {xi}:{yi} with linespoints title '{yc}'")
    if plots:
        lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------

def sweep_study(plan_dict, indices=None):
    plan = SweepPlan.from_dict(plan_dict)
    recs = sweep(plan, indices)
    t = Table("sweep", record_columns(), [r.row() for r in recs], {"plan": plan_dict})
    t.timing = {"wall_time": [r.wall_time for r in recs]}
    return t


def weyl_limit_study(configs=({"d": 2, "f": [1.0], "q": 0}, {"d": 3, "f": [1.0], "q": 1}),
                     hbars=tuple(2.0 ** -k for k in range(3, 9)), tau=1.0, V=0.0, shift=0.7, window=True):
    """|E^MW - E^W| / E^W against mu*h for each field configuration.

    ``shift_delta`` is the change of the deviation under (V, tau) -> (V + c, tau + c).
    """
    rows, slopes = [], {}
    for ci, c in enumerate(configs):
        cfg = FieldConfig.from_frequencies(c["f"], c["q"])
        base = weyl_limit_check(float(V), cfg, hbars, tau=tau, window=window)
        moved = weyl_limit_check(float(V) + shift, cfg, hbars, tau=tau + shift, window=window)
        label = f"d{cfg.d}q{cfg.q}"
        slopes[label] = base.slope
        for k, hb in enumerate(base.hbars):
            rows.append({"config": label, "d": cfg.d, "q": cfg.q, "hbar": float(hb),
                         "deviation": float(base.deviations[k]), "fixed_tau": float(base.fixed_tau[k]),
                         "shift_delta": float(abs(moved.deviations[k] - base.deviations[k]))})
    params = {"configs": [dict(c) for c in configs], "hbars": [float(v) for v in hbars], "tau": tau,
              "V": float(V), "shift": shift, "window": window}
    return Table("weyl-limit", ["config", "d", "q", "hbar", "deviation", "fixed_tau", "shift_delta"], rows,
                 params, summary={"slopes": slopes})


def _gap_operator(hbar, amp, flux, n, L, order):
    """Torus operator with V = amp cos(pi x1/L) cos(pi x2/L) at mu h = hbar and the given flux."""
    h = math.sqrt(hbar * (2 * L) ** 2 / (2 * math.pi * flux))
    mu = hbar / h
    cfg = FieldConfig.from_frequencies([1.0])
    scale = semiclassical_scale(h, mu)
    k = repr(math.pi / L)
    V = PotentialField.from_text(f"(* {amp!r} (cos (* {k} x1)) (cos (* {k} x2)))", 2, L=L)
    op = assemble(V, cfg, scale, GridSpec(2, n, L, "torus", order), snap=False)
    return op, cfg, scale, V


def gap_study(hbars=(2.0, 4.0, 8.0), amp=0.15, flux=8, n=60, L=1.0, order=2, levels=4, resolution=None,
              bottom_hbar=10.0, bottom_V=-1.0):
    """Landau clusters and the gaps between them for a small oscillating potential.

    Also evaluates the localized count at tau = 0 for V = bottom_V at
    mu h = bottom_hbar (spectrum bottom above zero).
    """
    rows = []
    osc = 2 * abs(amp)
    gaps_ok = centers_ok = True
    for hb in hbars:
        op, cfg, scale, V = _gap_operator(hb, amp, flux, n, L, order)
        phi = scale.mu * op.spacing ** 2 / scale.h
        lo = hb - osc - 0.5 * hb
        hi = (2 * levels - 1) * hb + osc + 0.5 * hb
        res = resolution if resolution is not None else hb / 10
        rep = gap_scan(op, (lo, hi), res, refine_tol=res / 64)
        centers = rep.cluster_centers
        for a in range(min(levels, len(centers))):
            pred = (2 * a + 1) * hb
            err = float(landau_grid_error(a, hb, phi, order))
            row = {"hbar": hb, "alpha": a, "center": centers[a], "predicted": pred,
                   "band_lo": pred - abs(amp) - err, "band_hi": pred + abs(amp),
                   "cluster_width": rep.cluster_widths[a], "cluster_count": rep.cluster_counts[a],
                   "grid_error": err, "gap_width": "", "required_width": "", "gap_ok": ""}
            row["center_ok"] = bool(row["band_lo"] <= centers[a] <= row["band_hi"])
            centers_ok &= row["center_ok"]
            if a + 1 < len(centers):
                # intervals[0] lies below the lowest cluster
                g = rep.intervals[a + 1]
                err2 = float(landau_grid_error(a + 1, hb, phi, order))
                need = 2 * hb - osc - 2 * max(err, err2)
                ok = (g[1] - g[0]) >= need
                gaps_ok &= bool(ok)
                row.update({"gap_width": g[1] - g[0], "required_width": need, "gap_ok": bool(ok)})
            rows.append(row)
    op, cfg, scale, _ = _gap_operator(bottom_hbar, 0.0, flux, n, L, order)
    op_b = assemble(bottom_V, cfg, scale, op.grid, snap=False)
    psi = Bump()
    local = dense_local_counting(op_b, [0.0], op_b.psi_weights(psi))
    emw = float(magnetic_weyl_density(0.0, None, bottom_V, cfg, scale))
    summary = {"gaps_ok": gaps_ok, "centers_ok": centers_ok, "bottom_count": float(local.values[0]), "bottom_weyl": emw,
               "bottom_spectrum_min": float(dense_spectrum(op_b).eigenvalues[0])}
    params = {"hbars": [float(v) for v in hbars], "amp": amp, "flux": flux, "n": n, "L": L, "order": order,
              "levels": levels, "resolution": resolution, "bottom_hbar": bottom_hbar, "bottom_V": bottom_V}
    cols = ["hbar", "alpha", "center", "predicted", "band_lo", "band_hi", "cluster_width", "cluster_count",
            "grid_error", "center_ok", "gap_width", "required_width", "gap_ok"]
    return Table("gaps", cols, rows, params, summary=summary)


def diophantine_study(fs=((1.0, 1.0), (1.0, math.sqrt(2.0)), (1.0,)), hbars=tuple(2.0 ** -k for k in range(7, 11)),
                      tau_hi=1.0):
    """Empirical modulus nu(hbar) of the lattice counting function for several frequency sets."""
    rows = []
    for f in fs:
        for hb in hbars:
            est = diophantine_modulus(f, hb, tau_window=(min(f) * hb, tau_hi))
            rows.append({"f": " ".join(repr(float(v)) for v in f), "r": len(f), "hbar": float(hb),
                         "nu": est.nu, "nu_over_hbar": est.nu / hb, "tau": est.pair[0], "tau2": est.pair[1]})
    params = {"fs": [[float(v) for v in f] for f in fs], "hbars": [float(v) for v in hbars], "tau_hi": tau_hi}
    return Table("diophantine", ["f", "r", "hbar", "nu", "nu_over_hbar", "tau", "tau2"], rows, params)


STUDIES = {
    "sweep": lambda p: sweep_study(p["plan"]),
    "weyl-limit": lambda p: weyl_limit_study(**p),
    "gaps": lambda p: gap_study(**p),
    "diophantine": lambda p: diophantine_study(**p),
}


def regenerate(sidecar, index=None):
    """Rebuild a table (or only row ``index``) from a sidecar file or dict."""
    if isinstance(sidecar, (str, os.PathLike)):
        with open(sidecar) as fh:
            sidecar = json.load(fh)
    study, params = sidecar["study"], sidecar["params"]
    if study == "sweep" and index is not None:
        t = sweep_study(params["plan"], indices=[index])
        return t
    return STUDIES[study](params)


def verify_sidecar(csv_path, index=None):
    """True if regenerating from the sidecar reproduces the CSV bytes (or one row)."""
    with open(csv_path) as fh:
        text = fh.read()
    t = regenerate(sidecar_path(csv_path), index=index)
    if index is None:
        return t.csv_text() == text
    lines = text.splitlines()
    return t.row_text(0) == lines[index + 1]
