"""Command-line front end: parameter sweeps, figure data and a validation suite.

Every output starts with a ``# config:`` line holding the fully resolved
configuration (including the library version and a units note), so a
result file is self-describing. Floats are written with 17 significant
digits, which makes identical configurations produce identical files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .numerics import QuadratureError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3

UNITS = "dimensionless: lengths in packet widths, times in m*sigma^2/hbar, momenta in 1/sigma"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# ---------------------------------------------------------------- presets

PRESETS = {
    "contrast-sweep": {
        "fig1": {"k0": 20.0, "k1": [], "re_beta": [0.0, 5.0, 10.0, 20.0],
                 "im_beta_min": 1.0, "im_beta_max": 400.0, "im_beta_n": 41, "L": 2.0},
        "fig2": {"k0": 5.0, "k1": [10.0, 20.0, 50.0, 1000.0], "re_beta": [0.0],
                 "im_beta_min": 0.1, "im_beta_max": 1e4, "im_beta_n": 81, "L": 10.0},
    },
    "angular-density": {
        "fig5": {"screen": "inclined", "kx": -1.0, "ky": math.sqrt(3.0), "beta": "2j",
                 "alpha": [math.pi / 2 + d for d in (0.0, 0.1, -0.1, 0.2, -0.2)],
                 "L": [15.0], "farfield": True},
        "fig7": {"screen": "lshaped", "kx": 9.66, "ky": 2.59, "beta": "2.59j",
                 "alpha": [], "L": [15.0, 50.0, 100.0], "farfield": False},
    },
    "evolve-2d": {
        "fig6": {"kx": 9.66, "ky": 2.59, "beta": "2.59j", "L": 15.0,
                 "times": [0.0, 1.0, 1.5, 3.0, 4.5, 6.0], "nx": 400, "ny": 400,
                 "x_min": -5.0, "y_min": -5.0},
    },
}

DEFAULTS = {
    "contrast-sweep": {"k0": 20.0, "k1": [], "re_beta": [0.0], "im_beta": [],
                       "im_beta_min": 1.0, "im_beta_max": 400.0, "im_beta_n": 41,
                       "L": None},
    "angular-density": {"screen": "inclined", "kx": -1.0, "ky": math.sqrt(3.0), "beta": "2j",
                        "alpha": [math.pi / 2], "L": [15.0], "farfield": True,
                        "n_theta": 721, "theta_min": None, "theta_max": None},
    "evolve-2d": {"kx": 9.66, "ky": 2.59, "beta": "2.59j", "L": 15.0,
                  "times": [0.0, 1.0, 1.5, 3.0, 4.5, 6.0], "nx": 400, "ny": 400,
                  "x_min": -5.0, "y_min": -5.0},
    "validate": {},
}

COMMON_DEFAULTS = {"format": "csv", "output": None, "jobs": 1, "abs_tol": 1e-10,
                   "rel_tol": 1e-9, "quick": False, "preset": None}


# ---------------------------------------------------------------- parsing helpers

def parse_complex(text) -> complex:
    if isinstance(text, (int, float, complex)):
        return complex(text)
    cleaned = str(text).strip().replace(" ", "").replace("i", "j")
    if cleaned.endswith("j") and cleaned[:-1] in ("", "+", "-"):
        cleaned = cleaned[:-1] + "1j"
    try:
        return complex(cleaned)
    except ValueError:
        raise ConfigError("beta", f"cannot parse {text!r} as a complex number") from None


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text).strip()
    return [float(v) for v in text.split(",")] if text else []


def _common_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    g = parent.add_argument_group("common options")
    g.add_argument("--config", type=Path, help="JSON file of option values (flags override it)")
    g.add_argument("--preset", help="named figure configuration")
    g.add_argument("--output", "-o", help="output path (stdout if omitted)")
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--jobs", type=int, help="worker processes for sweeps")
    g.add_argument("--abs-tol", type=float, dest="abs_tol")
    g.add_argument("--rel-tol", type=float, dest="rel_tol")
    g.add_argument("--quick", action="store_true", default=None,
                   help="coarser grids / smaller check subset")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abcdetect",
        description="Detection probabilities for absorbing-boundary-condition screens "
                    "versus scattering theory. " + UNITS + ".")
    parser.add_argument("--version", action="version", version=f"abcdetect {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    parent = _common_parent()

    p = sub.add_parser("contrast-sweep", parents=[parent],
                       help="P_ST, P_ABC and the contrast over a beta grid (presets fig1, fig2)")
    p.add_argument("--k0", type=float)
    p.add_argument("--k1", type=_float_list, help="comma list; one superposition per value")
    p.add_argument("--re-beta", type=_float_list, dest="re_beta")
    p.add_argument("--im-beta", type=_float_list, dest="im_beta",
                   help="explicit comma list (overrides min/max/n)")
    p.add_argument("--im-beta-min", type=float, dest="im_beta_min")
    p.add_argument("--im-beta-max", type=float, dest="im_beta_max")
    p.add_argument("--im-beta-n", type=int, dest="im_beta_n")
    p.add_argument("--L", type=float, help="finite screen distance for C_L")

    p = sub.add_parser("angular-density", parents=[parent],
                       help="angular detection densities (presets fig5, fig7)")
    p.add_argument("--screen", choices=("inclined", "lshaped"))
    p.add_argument("--kx", type=float)
    p.add_argument("--ky", type=float)
    p.add_argument("--beta")
    p.add_argument("--alpha", type=_float_list, help="comma list of tilt angles (radians)")
    p.add_argument("--L", type=_float_list, help="comma list of screen distances")
    p.add_argument("--farfield", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--n-theta", type=int, dest="n_theta")
    p.add_argument("--theta-min", type=float, dest="theta_min")
    p.add_argument("--theta-max", type=float, dest="theta_max")

    p = sub.add_parser("evolve-2d", parents=[parent],
                       help="|psi_t|^2 snapshots in front of the L-shaped screen (preset fig6)")
    p.add_argument("--kx", type=float)
    p.add_argument("--ky", type=float)
    p.add_argument("--beta")
    p.add_argument("--L", type=float)
    p.add_argument("--times", type=_float_list)
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--x-min", type=float, dest="x_min")
    p.add_argument("--y-min", type=float, dest="y_min")

    sub.add_parser("validate", parents=[parent],
                   help="run the oracle cross-checks and identities; exit 1 on failure")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults < preset < config file < explicit flags."""
    cmd = args.command
    cfg = dict(COMMON_DEFAULTS)
    cfg.update(DEFAULTS[cmd])
    file_cfg = {}
    if args.config is not None:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError("config", "file must hold a JSON object")
    preset = args.preset if args.preset is not None else file_cfg.get("preset")
    if preset is not None:
        try:
            cfg.update(PRESETS[cmd][preset])
        except KeyError:
            known = ", ".join(PRESETS.get(cmd, {})) or "none"
            raise ConfigError("preset", f"unknown preset {preset!r} for {cmd} (known: {known})") from None
    known_keys = set(cfg)
    for key, value in file_cfg.items():
        key = key.replace("-", "_")
        if key not in known_keys:
            raise ConfigError(key, f"unknown option for {cmd}")
        cfg[key] = value
    for key, value in vars(args).items():
        if key in known_keys and value is not None:
            cfg[key] = value
    cfg["preset"] = preset
    cfg["command"] = cmd
    return _validate(cfg)


def _require(cond, field, message):
    if not cond:
        raise ConfigError(field, message)


def _validate(cfg: dict) -> dict:
    cmd = cfg["command"]
    _require(cfg["format"] in ("csv", "json"), "format", "must be csv or json")
    _require(isinstance(cfg["jobs"], int) and cfg["jobs"] >= 1, "jobs", "must be a positive integer")
    _require(cfg["abs_tol"] >= 0 and cfg["rel_tol"] >= 0, "abs_tol",
             "tolerances must be non-negative")
    _require(cfg["abs_tol"] > 0 or cfg["rel_tol"] > 0, "abs_tol",
             "at least one tolerance must be positive")
    if cmd == "contrast-sweep":
        cfg["k1"] = _float_list(cfg["k1"])
        cfg["re_beta"] = _float_list(cfg["re_beta"])
        cfg["im_beta"] = _float_list(cfg["im_beta"])
        if not cfg["im_beta"]:
            _require(cfg["im_beta_n"] >= 1, "im_beta_n", "beta grid is empty")
            _require(0 < cfg["im_beta_min"] <= cfg["im_beta_max"], "im_beta_min",
                     "need 0 < im_beta_min <= im_beta_max")
        _require(len(cfg["re_beta"]) > 0, "re_beta", "beta grid is empty")
        _require(all(v > 0 for v in cfg["im_beta"]), "im_beta", "must be > 0 (absorbing regime)")
        _require(cfg["L"] is None or cfg["L"] > 0, "L", "must be positive")
    elif cmd == "angular-density":
        beta = parse_complex(cfg["beta"])
        _require(beta.imag > 0, "beta", "Im(beta) must be > 0 for detection densities")
        cfg["beta"] = _complex_text(beta)
        cfg["L"] = _float_list(cfg["L"])
        cfg["alpha"] = _float_list(cfg["alpha"])
        _require(cfg["screen"] in ("inclined", "lshaped"), "screen", "must be inclined or lshaped")
        _require(all(v > 0 for v in cfg["L"]), "L", "must be positive")
        _require(cfg["n_theta"] >= 3, "n_theta", "need at least 3 samples")
        if cfg["screen"] == "inclined":
            _require(len(cfg["alpha"]) > 0, "alpha", "inclined screen needs at least one angle")
        else:
            _require(len(cfg["L"]) > 0, "L", "L-shaped screen needs at least one distance")
            _require(not cfg["farfield"], "farfield", "far-field density exists only for the inclined screen")
    elif cmd == "evolve-2d":
        beta = parse_complex(cfg["beta"])
        _require(beta.imag > 0, "beta", "Im(beta) must be > 0")
        cfg["beta"] = _complex_text(beta)
        cfg["times"] = _float_list(cfg["times"])
        _require(len(cfg["times"]) > 0, "times", "need at least one snapshot time")
        _require(all(t >= 0 for t in cfg["times"]), "times", "must be non-negative")
        _require(cfg["L"] > 0, "L", "must be positive")
        _require(cfg["x_min"] < cfg["L"] and cfg["y_min"] < cfg["L"], "x_min",
                 "grid must start left of / below the screen")
        _require(cfg["nx"] >= 2 and cfg["ny"] >= 2, "nx", "need at least 2 points per axis")
    return cfg


def _complex_text(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}j"


# ---------------------------------------------------------------- output

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def canonical_config(cfg: dict) -> str:
    full = dict(cfg, version=__version__, units=UNITS)
    return json.dumps(full, sort_keys=True, separators=(",", ":"), allow_nan=False)


def render(cfg: dict, headers: list[str], rows: list[dict], extra: dict | None = None) -> str:
    if cfg["format"] == "json":
        doc = {"config": json.loads(canonical_config(cfg)),
               "rows": [{h: _json_value(r.get(h)) for h in headers} for r in rows]}
        if extra:
            doc.update(extra)
        return json.dumps(doc, indent=1, sort_keys=False) + "\n"
    lines = [f"# config: {canonical_config(cfg)}", ",".join(headers)]
    lines += [",".join(_fmt(r.get(h)) for h in headers) for r in rows]
    return "\n".join(lines) + "\n"


def _json_value(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def _write(text: str, path) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _map(fn, items, jobs: int):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _spec(cfg):
    from .numerics import DEFAULT_SPEC

    return DEFAULT_SPEC.with_(abs_tol=cfg["abs_tol"], rel_tol=cfg["rel_tol"])


# ---------------------------------------------------------------- contrast-sweep

def _sweep_row(task):
    from .closed_form_1d import Packet1D
    from .detection_1d import contrast_infinity, contrast_L, contrast_laplace_approx
    from .numerics import QuadratureError

    k0, k1, re_beta, im_beta, L, spec = task
    packet = Packet1D(k0, k1)
    beta = complex(re_beta, im_beta)
    row = {"k0": k0, "k1": k1, "re_beta": re_beta, "im_beta": im_beta, "status": "ok"}
    try:
        row["contrast_infinity"] = contrast_infinity(packet, beta, spec)
        if k1 is not None:
            row["contrast_laplace"] = contrast_laplace_approx(k0, k1, beta)
        if L is not None:
            rep = contrast_L(packet, beta, L, spec)
            row.update(contrast_L=rep.contrast, p_st=rep.p_st, p_abc=rep.p_abc)
        else:
            from .detection_1d import p_st_1d

            row["p_st"] = p_st_1d(packet, spec)
            row["p_abc"] = row["p_st"] - row["contrast_infinity"]
    except QuadratureError as exc:
        row["status"] = f"nonconvergence: {exc}"
    except OverflowError as exc:
        row["status"] = f"overflow: {exc}"
    return row


def cmd_contrast_sweep(cfg: dict):
    spec = _spec(cfg)
    if cfg["im_beta"]:
        ims = cfg["im_beta"]
    else:
        n = cfg["im_beta_n"] if not cfg["quick"] else min(cfg["im_beta_n"], 9)
        ims = [float(v) for v in np.geomspace(cfg["im_beta_min"], cfg["im_beta_max"], n)]
    k1s = cfg["k1"] or [None]
    tasks = [(cfg["k0"], k1, re, im, cfg["L"], spec)
             for k1 in k1s for re in cfg["re_beta"] for im in ims]
    rows = _map(_sweep_row, tasks, cfg["jobs"])
    headers = ["k0", "k1", "re_beta", "im_beta", "contrast_infinity", "contrast_L",
               "p_st", "p_abc"]
    if cfg["k1"]:
        headers.append("contrast_laplace")
    headers.append("status")
    failed = any(r["status"].startswith("nonconvergence") for r in rows)
    return headers, rows, None, EXIT_NONCONVERGENCE if failed else EXIT_OK


# ---------------------------------------------------------------- angular-density

def _angular_task(task):
    from . import scattering_2d as s2
    from .numerics import QuadratureError

    screen, kx, ky, beta, alpha, L, farfield, theta, spec = task
    p = s2.Packet2D(kx, ky)
    geom = s2.Inclined(alpha, L) if screen == "inclined" else s2.LShaped(L)
    lo, hi = s2.admissible_interval(geom)
    theta = np.asarray(theta)
    inside = (theta >= lo + s2.GRAZING_MARGIN) & (theta <= hi - s2.GRAZING_MARGIN)
    rows = [{"screen": screen, "alpha": alpha if screen == "inclined" else None, "L": L,
             "theta": float(th), "status": "ok" if ok else "out_of_domain"}
            for th, ok in zip(theta, inside)]
    good = theta[inside]
    if good.size == 0:
        return rows
    try:
        st = s2.dp_st_dtheta(p, good, spec)
        ff = s2.dp_abc_dtheta_farfield(p, good, beta, alpha, spec) if farfield else None
        fl = s2.dp_abc_dtheta_finite_L(p, good, beta, geom, spec)
    except QuadratureError as exc:
        for r in rows:
            if r["status"] == "ok":
                r["status"] = f"nonconvergence: {exc}"
        return rows
    j = 0
    for r in rows:
        if r["status"] == "ok":
            r["dp_st"] = float(st[j])
            r["dp_abc_finite_L"] = float(fl[j])
            if ff is not None:
                r["dp_abc_farfield"] = float(ff[j])
            j += 1
    return rows


def _peak_summary(rows, cfg):
    from .scattering_2d import find_density_peaks

    groups = {}
    for r in rows:
        if r["status"] == "ok":
            groups.setdefault((r["alpha"], r["L"]), []).append(r)
    summary = []
    for (alpha, L), rs in groups.items():
        theta = np.array([r["theta"] for r in rs])
        entry = {"alpha": alpha, "L": L}
        for col in ("dp_st", "dp_abc_farfield", "dp_abc_finite_L"):
            if col in rs[0]:
                peaks, _ = find_density_peaks(theta, np.array([r[col] for r in rs]))
                entry[col] = [float(v) for v in peaks]
        summary.append(entry)
    return summary


def cmd_angular_density(cfg: dict):
    from . import scattering_2d as s2

    spec = _spec(cfg)
    beta = parse_complex(cfg["beta"])
    n = cfg["n_theta"] if not cfg["quick"] else min(cfg["n_theta"], 181)
    tasks = []
    alphas = cfg["alpha"] if cfg["screen"] == "inclined" else [None]
    for alpha in alphas:
        for L in cfg["L"]:
            geom = s2.Inclined(alpha, L) if alpha is not None else s2.LShaped(L)
            if cfg["theta_min"] is None and cfg["theta_max"] is None:
                theta = s2.angular_grid(geom, n)
            else:
                lo, hi = s2.admissible_interval(geom)
                theta = np.linspace(lo if cfg["theta_min"] is None else cfg["theta_min"],
                                    hi if cfg["theta_max"] is None else cfg["theta_max"], n)
            tasks.append((cfg["screen"], cfg["kx"], cfg["ky"], beta,
                          alpha if alpha is not None else 0.0, L,
                          cfg["farfield"], [float(t) for t in theta], spec))
    rows = [r for chunk in _map(_angular_task, tasks, cfg["jobs"]) for r in chunk]
    headers = ["screen", "alpha", "L", "theta", "dp_st"]
    if cfg["farfield"]:
        headers.append("dp_abc_farfield")
    headers += ["dp_abc_finite_L", "status"]
    summary = _peak_summary(rows, cfg)
    for entry in summary:
        counts = ", ".join(f"{k}: {len(v)} peak(s)" for k, v in entry.items() if k.startswith("dp_"))
        print(f"alpha={_fmt(entry['alpha'])} L={_fmt(entry['L'])}: {counts}", file=sys.stderr)
    failed = any(r["status"].startswith("nonconvergence") for r in rows)
    return headers, rows, {"peaks": summary}, EXIT_NONCONVERGENCE if failed else EXIT_OK


# ---------------------------------------------------------------- evolve-2d

def evolve_2d_data(cfg: dict):
    """Snapshots of |psi_t|^2 on the grid clipped to max(x, y) <= L and the
    absorption density Im(beta)|psi_t|^2 along both arms of the screen."""
    from .scattering_2d import Packet2D, psi_t_2d_lshaped

    beta = parse_complex(cfg["beta"])
    p = Packet2D(cfg["kx"], cfg["ky"])
    L = cfg["L"]
    nx, ny = (cfg["nx"], cfg["ny"]) if not cfg["quick"] else (min(cfg["nx"], 80), min(cfg["ny"], 80))
    xs = np.linspace(cfg["x_min"], L, nx)
    ys = np.linspace(cfg["y_min"], L, ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X, Y], axis=-1)
    snapshots = {}
    boundary = []
    for t in cfg["times"]:
        snapshots[t] = np.abs(psi_t_2d_lshaped(pts, t, p, beta, L)) ** 2
        vert = np.stack([np.full_like(ys, L), ys], axis=-1)
        horiz = np.stack([xs, np.full_like(xs, L)], axis=-1)
        for name, arm, coord in (("vertical", vert, ys), ("horizontal", horiz, xs)):
            dens = beta.imag * np.abs(psi_t_2d_lshaped(arm, t, p, beta, L)) ** 2
            boundary += [{"t": t, "segment": name, "s": float(c), "density": float(d)}
                         for c, d in zip(coord, dens)]
    return xs, ys, snapshots, boundary


def cmd_evolve_2d(cfg: dict):
    xs, ys, snapshots, boundary = evolve_2d_data(cfg)
    out = cfg["output"]
    if out is None:
        raise ConfigError("output", "evolve-2d writes several files; give an output prefix")
    ext = "json" if cfg["format"] == "json" else "csv"
    for i, (t, dens) in enumerate(snapshots.items()):
        rows = [{"x": float(x), "y": float(y), "density": float(dens[a, b])}
                for a, x in enumerate(xs) for b, y in enumerate(ys)]
        _write(render(dict(cfg, snapshot_time=t), ["x", "y", "density"], rows),
               f"{out}_t{i:02d}.{ext}")
    _write(render(cfg, ["t", "segment", "s", "density"], boundary), f"{out}_boundary.{ext}")
    print(f"wrote {len(snapshots)} snapshot files and {out}_boundary.{ext}", file=sys.stderr)
    return None, None, None, EXIT_OK


# ---------------------------------------------------------------- validate

def _check(name, fn):
    start = time.perf_counter()
    try:
        ok, measured, detail = fn()
    except Exception as exc:  # a broken check is reported, never aborts the suite
        ok, measured, detail = False, float("nan"), f"{type(exc).__name__}: {exc}"
    return {"check": name, "passed": bool(ok), "measured": measured, "detail": detail,
            "seconds": time.perf_counter() - start}


def validation_checks(quick: bool):
    from .closed_form_1d import Packet1D
    from .detection_1d import p_abc_dollard, p_abc_time_integral, p_st_1d
    from .pde_oracle import Grid1D, evolve_pair, evolve_robin, gaussian_on_grid, validate_closed_form
    from .scattering_2d import Packet2D, section_totals_lshaped

    def closed_form():
        h, dt, ts, tol = (2e-3, 4e-4, [1.0], 1.5e-3) if quick else (5e-4, 1e-4, [1.0, 2.0, 4.0], 1e-4)
        grid = Grid1D.for_packet(5.0, 10.0, ts[-1], h, dt)
        err = validate_closed_form(5.0, 5j, 10.0, grid, ts)
        return err < tol, err, f"max relative L2 error vs Crank-Nicolson (h={h}, dt={dt}) < {tol}"

    def dollard():
        # slow packets near the screen make the incident/reflected interference
        # term large, so a wrong reflection amplitude cannot hide in it
        cases = [(1.0, 5.0, 1j), (0.5, 5.0, -1 + 1j), (5.0, 10.0, 5j)]
        if not quick:
            cases += [(k0, 10.0, 1j * kap) for k0 in (2.0, 5.0, 10.0) for kap in (1.0, 5.0, 20.0)]
        worst = max(abs(p_abc_time_integral(Packet1D(k0), b, L) - p_abc_dollard(Packet1D(k0), b, L))
                    for k0, L, b in cases)
        return worst < 1e-6, worst, "time integral vs momentum-space form, < 1e-6"

    def contractivity():
        rng = np.random.default_rng(12345)
        grid = Grid1D.for_packet(3.0, 5.0, 1.0, 0.01, 1e-3)
        worst_growth, worst_res = 0.0, 0.0
        for _ in range(2 if quick else 10):
            a, b = (_random_packet(rng, grid) for _ in range(2))
            norms, res = evolve_pair(a, b, 2j, grid, 1.0)
            worst_growth = max(worst_growth, float(np.max(np.diff(norms) / norms[:-1])))
            worst_res = max(worst_res, float(np.max(np.abs(res))))
        ok = worst_growth <= 1e-12 and worst_res <= 1e-9
        return ok, worst_res, (f"difference norm never grows (max rel. step change {worst_growth:.3g}); "
                               "identity residual <= 1e-9")

    def norm_ledger():
        grid = Grid1D.for_packet(5.0, 10.0, 2.0, 4e-3, 1e-3)
        _, led = evolve_robin(gaussian_on_grid(grid, 5.0), 5j, grid, 2.0)
        closure = led.conservation_error()
        res = float(np.max(np.abs(led.norm_loss_residuals(grid.dt))))
        monotone = bool(np.all(np.diff(led.cumulative) >= 0.0))
        ok = res < 1e-12 and closure < 1e-8 and monotone
        return ok, res, "per-step norm loss equals dt*Im(beta)|psi_mid(L)|^2; absorption non-decreasing"

    def unitarity():
        grid = Grid1D.for_packet(5.0, 10.0, 1.0, 4e-3, 1e-4)
        _, led = evolve_robin(gaussian_on_grid(grid, 5.0), 0.0, grid, 1.0)
        drift = float(np.max(np.abs(led.norms - led.norm0)))
        return drift < 1e-10, drift, "beta = 0: norm conserved to 1e-10 over 1e4 steps"

    def st_probability():
        p = p_st_1d(Packet1D(2.0))
        exact = 1.0 - 0.5 * math.erfc(2.0)
        return abs(p - exact) < 1e-10, abs(p - exact), "P_ST(k0 = 2) = 1 - erfc(2)/2"

    def sections():
        v, h = section_totals_lshaped(Packet2D(9.66, 2.59), 2.59j, 100.0)
        ok = 0.63 <= v <= 0.69 and 0.30 <= h <= 0.36
        return ok, v, f"L-screen arms at L = 100: vertical {v:.4f} in [0.63, 0.69], horizontal {h:.4f} in [0.30, 0.36]"

    checks = [("st_probability", st_probability), ("dollard_agreement", dollard),
              ("closed_form_vs_pde", closed_form), ("contractivity", contractivity),
              ("norm_ledger", norm_ledger), ("unitarity", unitarity)]
    if not quick:
        checks.append(("section_totals", sections))
    return checks


def _random_packet(rng, grid):
    k = rng.uniform(-3.0, 6.0)
    shift = rng.uniform(-2.0, 2.0)
    width = rng.uniform(0.7, 1.5)
    x = grid.x
    psi = np.exp(-((x - shift) / width) ** 2 / 2.0 + 1j * k * x + 1j * rng.uniform(0, 2 * math.pi))
    psi[0] = 0.0
    psi /= math.sqrt(float(grid.norm2(psi)[0]))
    return psi


def cmd_validate(cfg: dict):
    rows = [_check(name, fn) for name, fn in validation_checks(cfg["quick"])]
    for r in rows:
        status = "PASS" if r["passed"] else "FAIL"
        print(f"{status} {r['check']}: measured={_fmt(r['measured'])} ({r['detail']}) "
              f"[{r['seconds']:.2f}s]", file=sys.stderr)
    code = EXIT_OK if all(r["passed"] for r in rows) else EXIT_VALIDATION
    return ["check", "passed", "measured", "detail", "seconds"], rows, None, code


COMMANDS = {
    "contrast-sweep": cmd_contrast_sweep,
    "angular-density": cmd_angular_density,
    "evolve-2d": cmd_evolve_2d,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        headers, rows, extra, code = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QuadratureError as exc:
        print(f"numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    # validate reports on stderr; its table is written only when asked for
    if headers is not None and not (cfg["command"] == "validate" and cfg["output"] is None):
        _write(render(cfg, headers, rows, extra), cfg["output"])
    return code


if __name__ == "__main__":
    sys.exit(main())
