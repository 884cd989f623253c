"""Command line front end: ``fit``, ``sweep`` and ``experiment``.

Exit codes: 0 success, 2 input or configuration error, 3 non-convergence.
Settings come from (lowest to highest priority) built-in defaults, a flat
``key = value`` file given by ``--config``, and command line flags.
"""

from __future__ import annotations

import argparse
import datetime
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .analysis import (
    bounds_check,
    circle_vs_segment,
    crossover_radius,
    elastica_residual,
    mass_projection,
    node_mass_refinement,
    node_masses,
    regularity_check,
    scaling_transform,
    tangent_lipschitz,
)
from .datasets import BUNDLED, bundled
from .energy import total_energy
from .geometry import EnergyParams, curve_metric, length
from .io import InputError, dumps_json, load_cloud, render_svg, atomic_write, write_curve_csv, write_json, \
    write_rows_csv
from .optimizer import FitConfig, epsilon_sweep, max_abs_curvature, minimize

__all__ = ["main", "EXPERIMENTS", "DEFAULTS", "read_config_file"]

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 2, 3

EXPERIMENTS = ("scaling", "circle-vs-segment", "elastica-residual", "node-mass")

# every key may appear in a --config file; flags use the same names with dashes
DEFAULTS = {
    "input": None,
    "format": None,
    "weight_col": None,
    "dataset": None,
    "lambda": 0.1,
    "epsilon": 1e-3,
    "p": 2.0,
    "nodes": 64,
    "max_iters": 5000,
    "seed": 0,
    "starts": 1,
    "out_dir": ".",
    "allow_nonconverged": False,
    "epsilons": "1e-1,1e-2,1e-3,1e-4",
    "r": 2.0,
    "density_norm": None,
}

_TYPES = {
    "lambda": float, "epsilon": float, "p": float, "nodes": int, "max_iters": int, "seed": int,
    "starts": int, "r": float, "density_norm": float,
}


class UsageError(Exception):
    pass


def _parse_bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"cannot read {text!r} as a boolean")


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    with fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"config line {line_no}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise UsageError(f"config line {line_no}: unknown key {key!r}")
            out[key] = value
    return out


def _coerce(key, value):
    if value is None:
        return None
    if key == "allow_nonconverged":
        return value if isinstance(value, bool) else _parse_bool(value)
    if key in _TYPES:
        try:
            return _TYPES[key](value)
        except ValueError:
            raise UsageError(f"{key}: cannot read {value!r}") from None
    return value


# experiment-specific defaults, applied below the config file and flags
EXPERIMENT_DEFAULTS = {
    "elastica-residual": {"lambda": 0.05, "epsilon": 1e-2, "p": 1.0},
    "node-mass": {"lambda": 0.1, "epsilon": 1e-3, "p": 2.0},
    "scaling": {"lambda": 0.05, "epsilon": 1e-2, "p": 1.0},
}


def resolve_settings(args) -> dict:
    """Merge defaults, the config file and explicit flags (flags win)."""
    merged = dict(DEFAULTS)
    merged.update(EXPERIMENT_DEFAULTS.get(getattr(args, "name", None), {}))
    if getattr(args, "config", None):
        merged.update(read_config_file(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    settings = {k: _coerce(k, v) for k, v in merged.items()}
    if not settings["lambda"] > 0 or not settings["epsilon"] > 0:
        raise UsageError("lambda and epsilon must be positive")
    if not settings["p"] >= 1:
        raise UsageError("p must be at least 1")
    if settings["nodes"] < 2:
        raise UsageError("nodes must be at least 2")
    if settings["starts"] < 1 or settings["max_iters"] < 1:
        raise UsageError("starts and max-iters must be positive")
    return settings


def _fit_config(s, **override):
    base = dict(n_nodes=s["nodes"], max_iters=s["max_iters"], seed=s["seed"], n_starts=s["starts"])
    base.update(override)
    return FitConfig(**base)


def _params(s, **override):
    values = {"lam": s["lambda"], "eps": s["epsilon"], "p": s["p"]}
    values.update(override)
    return EnergyParams(**values)


def _load(s, default_dataset=None):
    if s["input"] is not None:
        return load_cloud(s["input"], s["format"], s["weight_col"])
    name = s["dataset"] or default_dataset
    if name is None:
        raise UsageError("give --input FILE or --dataset NAME")
    try:
        return bundled(name, seed=s["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _out_dir(s):
    path = s["out_dir"]
    os.makedirs(path, exist_ok=True)
    return path


def _write_meta(out_dir, command, started):
    meta = {
        "command": command,
        "argv": sys.argv[1:],
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "elapsed_seconds": time.monotonic() - started,
    }
    write_json(os.path.join(out_dir, "meta.json"), meta)


def _fit_summary(rep):
    return {
        "energy": rep.breakdown.as_dict(),
        "iterations": rep.iterations,
        "converged": rep.converged,
        "stop_reason": rep.stop_reason,
        "n_nodes": rep.curve.n_nodes,
    }


def _settings_record(s, keys):
    return {k: s[k] for k in keys}


def cmd_fit(s):
    cloud = _load(s)
    params = _params(s)
    rep = minimize(cloud, params, _fit_config(s))
    masses = node_masses(rep.curve, cloud)
    interior = masses[1:-1] if masses.shape[0] > 2 else masses
    mass_summary = {
        "total_mass": cloud.total_mass,
        "max_node_mass": float(masses.max()),
        "max_interior_node_mass": float(interior.max()),
        "end_node_masses": [float(masses[0]), float(masses[-1])],
    }
    if s["density_norm"] is not None and rep.curve.n_nodes >= 6:
        cuts = np.linspace(0, rep.curve.n_nodes - 1, 6).round().astype(int)
        pieces = [mass_projection(rep, cloud, params, (a, b), s["density_norm"]).as_dict()
                  for a, b in zip(cuts[:-1], cuts[1:])]
        mass_summary["sub_arcs"] = pieces
        mass_summary["pass"] = all(p["pass"] for p in pieces)
    report = {
        "settings": _settings_record(s, ("lambda", "epsilon", "p", "nodes", "max_iters", "seed", "starts")),
        "data": {"n_points": len(cloud), "dim": cloud.dim, "total_mass": cloud.total_mass,
                 "diameter": cloud.diameter},
        **_fit_summary(rep),
        "regularity": regularity_check(rep, cloud, params).as_dict(),
        "bounds": bounds_check(rep, cloud, params).as_dict(),
        "mass_projection": mass_summary,
    }
    out = _out_dir(s)
    write_curve_csv(os.path.join(out, "curve.csv"), rep.curve)
    write_json(os.path.join(out, "report.json"), report)
    atomic_write(os.path.join(out, "fit.svg"),
                 render_svg(cloud, [rep.curve], title=f"fit lambda={params.lam:g} epsilon={params.eps:g} p={params.p:g}",
                            node_mass=masses))
    return rep.converged


def _parse_eps_list(text):
    try:
        values = [float(t) for t in str(text).replace(" ", "").split(",") if t]
    except ValueError:
        raise UsageError(f"cannot read epsilon list {text!r}") from None
    if not values:
        raise UsageError("empty epsilon list")
    return values


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``; ``None`` for fewer than two points."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.size < 2 or np.any(y <= 0):
        return None
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def cmd_sweep(s):
    cloud = _load(s)
    eps = _parse_eps_list(s["epsilons"])
    try:
        points = epsilon_sweep(cloud, s["lambda"], s["p"], eps, _fit_config(s))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = []
    for pt in points:
        params = _params(s, eps=pt.epsilon)
        rows.append({
            "epsilon": pt.epsilon,
            "total_energy": pt.total_energy,
            "energy_without_bending": pt.energy_without_bending,
            "max_curvature": pt.max_curvature,
            "discrete_lipschitz": tangent_lipschitz(pt.report.curve),
            "Y": params.Y(cloud.diameter),
            "length": length(pt.report.curve) if pt.report.curve.n_nodes > 1 else 0.0,
            "iterations": pt.report.iterations,
            "converged": pt.report.converged,
        })
    slope = loglog_slope([r["epsilon"] for r in rows], [r["max_curvature"] for r in rows])
    out = _out_dir(s)
    cols = ["epsilon", "total_energy", "energy_without_bending", "max_curvature", "discrete_lipschitz", "Y", "length"]
    write_rows_csv(os.path.join(out, "sweep.csv"), cols, [[r[c] for c in cols] for r in rows])
    write_json(os.path.join(out, "sweep.json"), {
        "settings": _settings_record(s, ("lambda", "p", "nodes", "max_iters", "seed", "starts")),
        "rows": rows,
        "slope": slope,
    })
    atomic_write(os.path.join(out, "sweep.svg"),
                 render_svg(cloud, [pt.report.curve for pt in points], title="epsilon sweep"))
    return all(r["converged"] for r in rows)


def _experiment_scaling(s):
    cloud = _load(s, "three-atom")
    params = _params(s)
    r = s["r"]
    cfg = _fit_config(s)
    base = minimize(cloud, params, cfg)
    scaled_cloud, scaled_params = scaling_transform(cloud, params, r)
    init = base.curve.scaled(r) if base.curve.n_nodes > 1 else None
    refit = minimize(scaled_cloud, scaled_params, cfg, init=init)
    diam = cloud.diameter
    Y, Y_r = params.Y(diam), scaled_params.Y(scaled_cloud.diameter)
    e_base = base.breakdown.total
    e_scaled = total_energy(scaled_cloud, base.curve.scaled(r), scaled_params).total
    metric = curve_metric(refit.curve, base.curve.scaled(r)) if base.curve.n_nodes > 1 else 0.0
    tol = 1e-6 * r * diam
    return {
        "r": r,
        "Y": Y,
        "Y_r": Y_r,
        "Y_ratio": Y_r / Y,
        "Y_ratio_error": abs(Y_r / Y - 1.0 / r),
        "Y_ratio_pass": abs(Y_r / Y - 1.0 / r) <= 1e-12,
        "energy": e_base,
        "energy_scaled_curve": e_scaled,
        "energy_ratio": e_scaled / e_base,
        "energy_identity_error": abs(e_scaled / (r ** params.p * e_base) - 1.0),
        "energy_identity_pass": abs(e_scaled / (r ** params.p * e_base) - 1.0) <= 1e-10,
        "refit_curve_metric": metric,
        "refit_tolerance": tol,
        "refit_pass": metric <= tol,
        "fit": _fit_summary(base),
        "refit": _fit_summary(refit),
    }, base.converged and refit.converged


def _experiment_circle(s):
    lam, eps = s["lambda"], s["epsilon"]
    r_h = crossover_radius(lam, eps, "hausdorff")
    r_p = crossover_radius(lam, eps, "probability")
    center = r_h if math.isfinite(r_h) else 1.0
    radii = center * np.logspace(-1, 1, 9)
    table = [circle_vs_segment(float(rad), lam, eps).as_dict() for rad in radii]
    for row in table:
        row["circle_rel_error"] = abs(row["E_circle"] / row["analytic_circle"] - 1.0)
        row["segment_rel_error"] = abs(row["E_segment"] / row["analytic_segment"] - 1.0)
    r_h4 = crossover_radius(lam, 4 * eps, "hausdorff")
    r_p4 = crossover_radius(lam, 4 * eps, "probability")
    return {
        "lambda": lam,
        "epsilon": eps,
        "crossover_radius": r_h,
        "crossover_radius_4eps": r_h4,
        "crossover_ratio": r_h4 / r_h,
        "crossover_ratio_pass": abs(r_h4 / r_h - 2.0) <= 0.1,
        "unit_mass_crossover_radius": r_p,
        "unit_mass_crossover_radius_4eps": r_p4,
        "unit_mass_crossover_ratio": r_p4 / r_p,
        "unit_mass_crossover_ratio_pass": abs(r_p4 / r_p - 2.0) <= 0.1,
        "oracle_pass": all(row["circle_rel_error"] <= 0.01 and row["segment_rel_error"] <= 0.01 for row in table),
        "table": table,
    }, True


def _experiment_residual(s, counts=(64, 256)):
    cloud = _load(s, "three-atom")
    if cloud.dim != 2:
        raise UsageError("elastica-residual needs planar data")
    params = _params(s)
    out = {"lambda": params.lam, "epsilon": params.eps, "p": params.p, "resolutions": []}
    converged = True
    for n in counts:
        rep = minimize(cloud, params, _fit_config(s, n_nodes=n))
        converged &= rep.converged
        entry = {"n_nodes": n, **_fit_summary(rep)}
        for form in ("lam_half", "first_variation"):
            entry[form] = elastica_residual(rep, cloud, params, form=form).as_dict()
        out["resolutions"].append(entry)
    for form in ("lam_half", "first_variation"):
        lo, hi = (res[form]["max_residual"] for res in out["resolutions"])
        ratio = hi / lo if lo > 0 else None
        out[f"{form}_refinement_ratio"] = ratio
        out[f"{form}_pass"] = ratio is not None and ratio < 1.0
    return out, converged


def _experiment_node_mass(s, counts=(16, 128)):
    cloud = _load(s, "disk-uniform")
    params = _params(s)
    rows = node_mass_refinement(cloud, params, counts, _fit_config(s))
    table = [{"n_nodes": n, "max_interior_node_mass": m, **_fit_summary(rep)} for n, m, rep in rows]
    first, last = rows[0][1], rows[-1][1]
    return {
        "lambda": params.lam,
        "epsilon": params.eps,
        "p": params.p,
        "table": table,
        "mass_ratio": last / first if first > 0 else None,
        "pass": last <= 0.5 * first,
    }, all(rep.converged for _, _, rep in rows)


_EXPERIMENT_FUNCS = {
    "scaling": _experiment_scaling,
    "circle-vs-segment": _experiment_circle,
    "elastica-residual": _experiment_residual,
    "node-mass": _experiment_node_mass,
}


def cmd_experiment(s, name):
    if name not in _EXPERIMENT_FUNCS:
        raise UsageError(f"unknown experiment {name!r}; valid names: {', '.join(EXPERIMENTS)}")
    report, converged = _EXPERIMENT_FUNCS[name](s)
    report = {"experiment": name, **report}
    write_json(os.path.join(_out_dir(s), "experiment.json"), report)
    return converged


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value settings file; flags override it")
    common.add_argument("--input", help="point cloud file (csv with header, or json)")
    common.add_argument("--format", choices=["csv", "json"], help="input format (default: from extension)")
    common.add_argument("--weight-col", dest="weight_col", help="weight column name or index (default: weight 1)")
    common.add_argument("--dataset", help=f"bundled dataset instead of --input: {', '.join(sorted(BUNDLED))}")
    common.add_argument("--lambda", dest="lambda", type=float, help="length penalty (default 0.1)")
    common.add_argument("--epsilon", type=float, help="bending penalty (default 1e-3)")
    common.add_argument("--p", type=float, help="distance exponent, at least 1 (default 2)")
    common.add_argument("--nodes", type=int, help="number of polyline nodes (default 64)")
    common.add_argument("--max-iters", dest="max_iters", type=int, help="iteration cap (default 5000)")
    common.add_argument("--seed", type=int, help="seed for datasets and multi-start jitter (default 0)")
    common.add_argument("--starts", type=int, help="number of jittered starts (default 1)")
    common.add_argument("--out-dir", dest="out_dir", help="output directory (default .)")
    common.add_argument("--allow-nonconverged", dest="allow_nonconverged", action="store_const", const=True,
                        help="exit 0 even if a fit did not converge")
    common.add_argument("--density-norm", dest="density_norm", type=float,
                        help="sup of the data density, enables the sub-arc mass bound in fit reports")
    common.add_argument("-v", "--verbose", action="store_true", help="log solver progress")

    parser = argparse.ArgumentParser(prog="elastic-avgdist", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fit", parents=[common], help="fit one curve")
    sweep = sub.add_parser("sweep", parents=[common], help="fit a descending list of bending weights")
    sweep.add_argument("--epsilons", help="comma-separated, strictly descending (default 1e-1,1e-2,1e-3,1e-4)")
    exp = sub.add_parser("experiment", parents=[common], help="run a named numerical experiment")
    exp.add_argument("name", help=f"one of: {', '.join(EXPERIMENTS)}")
    exp.add_argument("--r", type=float, help="dilation factor for the scaling experiment (default 2)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    started = time.monotonic()
    try:
        s = resolve_settings(args)
        if args.command == "fit":
            converged = cmd_fit(s)
        elif args.command == "sweep":
            converged = cmd_sweep(s)
        else:
            converged = cmd_experiment(s, args.name)
    except (UsageError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _write_meta(s["out_dir"], args.command, started)
    if not converged and not s["allow_nonconverged"]:
        print("error: optimization did not converge (use --allow-nonconverged to accept)", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
