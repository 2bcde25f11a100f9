"""Command-line scenario runner.

Every command reads one JSON config (defaults below, optionally merged with
``--config`` and ``--override dotted.key=value``), writes plot-ready CSV
files and a JSON summary into the output directory, and exits with 0 on
success, 2 on configuration errors and 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CasimirKitError, ConfigError, DomainError
from .guiding_center import EquilibriumParams, density_profile, marginal_density_quadrature
from .slab import (
    SlabGeometry,
    beltrami_solve,
    bifurcated_branch,
    curl_eigensolve,
    curl_residual,
    find_resonant_surface,
    shooting_solve,
)
from .slab.beltrami import matched_helicity_comparison
from .tearing import (
    ExtendedTearingState,
    ReducedTearingParams,
    TearingProblem,
    classify_stability,
    energy_scale,
    extended_evolve,
    extended_matrix,
    fitted_class,
    gamma_overlap,
    ideal_evolve,
    lowest_eigenpair,
    reduced_evolve,
    relative_drift,
    stability_scan,
    stable_step,
)

log = logging.getLogger("casimirkit")

OUT_ENV = "CASIMIRKIT_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

DEFAULT_CONFIG = {
    "geometry": {"a": float(np.pi), "Ly": float(4 * np.pi), "Lz": float(4 * np.pi), "N": 256},
    "equilibrium": {"mu": 0.5, "hy": 1.0, "hz": 0.0},
    "modes": [[0.0, 0.5], [0.5, 0.0], [0.5, 0.5], [0.0, 1.0], [1.0, 0.0]],
    "spectrum": {"count": 3, "grid_doubling": False},
    "perturbation": {"mode": [0.0, 0.5], "amplitude": 1.0, "shape": "smooth"},
    "integration": {"dt": 0.05, "t_end": 10.0, "samples": 201},
    "unfreeze": {"D": 1.0, "mu_ratio": 2.0, "model": "reduced", "p0": 1.0, "q0": 0.0,
                 "t_end": 40.0, "N": 64},
    "scan": {"ratio_start": 0.5, "ratio_stop": 2.0, "ratio_num": 21, "D": [-1.0, 0.5, 1.0],
             "model": "reduced", "t_end": 200.0, "N": 64},
    "bifurcation": {"j": 1, "alpha": [-2.0, -1.0, 0.0, 1.0, 2.0], "mu_ratios": [1.05, 1.1, 1.2]},
    "gc": {"alpha": [0.5, 1.0, 2.0], "beta": [0.5, 1.0, 2.0], "omega_c": [0.5, 1.0, 2.0]},
    "seed": 0,
}

COMMANDS = ("spectrum", "beltrami", "bifurcation", "resonance", "ideal-run", "unfreeze-run",
            "scan", "gc-density")


# -- configuration -----------------------------------------------------------

def _check_types(cfg, ref, path=""):
    for key, val in cfg.items():
        where = f"{path}{key}"
        if key not in ref:
            raise ConfigError(f"unknown config key {where!r}")
        want = ref[key]
        if isinstance(want, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where} must be an object")
            _check_types(val, want, where + ".")
        elif isinstance(want, bool):
            if not isinstance(val, bool):
                raise ConfigError(f"{where} must be true/false")
        elif isinstance(want, (int, float)):
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"{where} must be a number")
            if isinstance(want, int) and not isinstance(want, bool) and int(val) != val:
                raise ConfigError(f"{where} must be an integer")
        elif isinstance(want, list):
            if not isinstance(val, list):
                raise ConfigError(f"{where} must be a list")
        elif isinstance(want, str) and not isinstance(val, str):
            raise ConfigError(f"{where} must be a string")


def _merge(base, extra):
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _merge(base[k], v)
        else:
            base[k] = v
    return base


def _apply_override(cfg, item):
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.split(".")
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"override path {key!r} does not exist")
        node = node[p]
    node[parts[-1]] = value


def validate(cfg):
    _check_types(cfg, DEFAULT_CONFIG)
    g = cfg["geometry"]
    if not (g["a"] > 0 and g["Ly"] > 0 and g["Lz"] > 0):
        raise ConfigError("geometry.a, Ly and Lz must be positive")
    if int(g["N"]) < 16:
        raise ConfigError("geometry.N must be at least 16")
    for m in cfg["modes"]:
        if not (isinstance(m, list) and len(m) == 2):
            raise ConfigError("each mode must be a [ky, kz] pair")
    if cfg["integration"]["dt"] <= 0 or cfg["integration"]["t_end"] <= 0:
        raise ConfigError("integration.dt and t_end must be positive")
    if cfg["spectrum"]["count"] < 1:
        raise ConfigError("spectrum.count must be >= 1")
    if cfg["unfreeze"]["model"] not in ("reduced", "full"):
        raise ConfigError("unfreeze.model must be 'reduced' or 'full'")
    if cfg["scan"]["model"] not in ("reduced", "full"):
        raise ConfigError("scan.model must be 'reduced' or 'full'")
    return cfg


def load_config(path=None, overrides=(), seed=None):
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        _check_types(user, DEFAULT_CONFIG)
        _merge(cfg, user)
    for item in overrides:
        _apply_override(cfg, item)
    if seed is not None:
        cfg["seed"] = int(seed)
    return validate(cfg)


def config_digest(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def geometry_of(cfg, N=None):
    g = cfg["geometry"]
    return SlabGeometry(float(g["a"]), float(g["Ly"]), float(g["Lz"]), int(N or g["N"]))


# -- output ------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return "" if v is None else str(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_summary(out: Path, command, cfg, scalars, started):
    summary = {
        "command": command,
        "config_digest": config_digest(cfg),
        "version": __version__,
        "wall_time": time.time() - started,
        "scalars": _jsonable(scalars),
    }
    path = out / f"{command}.json"
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary


# -- commands ----------------------------------------------------------------

def _levels(values, tol=1e-8):
    """Distinct positive eigenvalues with multiplicities."""
    pos = np.sort(values[values > 0])
    levels = []
    for v in pos:
        if levels and abs(v - levels[-1][0]) <= tol * max(1.0, v):
            levels[-1][1] += 1
        else:
            levels.append([v, 1])
    return levels


def _spectrum_table(geom, modes, count):
    rows = {}
    for ky, kz in modes:
        sp = curl_eigensolve(geom, ky, kz, 4 * count + 4)
        levels = _levels(sp.eigenvalues)[:count]
        res = float(np.max(sp.residuals))
        rows[(ky, kz)] = [(i + 1, lv, mult, res) for i, (lv, mult) in enumerate(levels)]
    return rows


def cmd_spectrum(cfg, out, threads):
    modes = [tuple(map(float, m)) for m in cfg["modes"]]
    if not modes:
        raise ConfigError("empty mode set")
    count = int(cfg["spectrum"]["count"])
    geom = geometry_of(cfg)
    table = _spectrum_table(geom, modes, count)
    header = ["ky", "kz", "index", "eigenvalue", "multiplicity", "max_residual"]
    files = [write_csv(out / "spectrum.csv", header,
                       [(ky, kz, *r) for (ky, kz), rs in table.items() for r in rs])]
    lam1, mode1 = min(((rs[0][1], m) for m, rs in table.items() if rs), key=lambda t: t[0])
    scalars = {"lambda1": lam1, "lambda1_mode": list(mode1),
               "eigenvalues": {f"{m[0]},{m[1]}": [r[1] for r in rs] for m, rs in table.items()}}
    if cfg["spectrum"]["grid_doubling"]:
        fine, finer = geom.refined(2), geom.refined(4)
        t2 = _spectrum_table(fine, modes, count)
        t4 = _spectrum_table(finer, modes, count)
        rows = []
        for m in modes:
            for r1, r2, r4 in zip(table[m], t2[m], t4[m]):
                denom = r2[1] - r4[1]
                ratio = (r1[1] - r2[1]) / denom if denom != 0 else float("nan")
                rows.append((*m, *r2, ratio))
        files.append(write_csv(out / "spectrum_refined.csv", header + ["convergence_ratio"], rows))
        scalars["convergence_ratios"] = [r[-1] for r in rows]
    return scalars, files


def cmd_beltrami(cfg, out, threads):
    e = cfg["equilibrium"]
    geom = geometry_of(cfg)
    eq = beltrami_solve(geom.a, float(e["mu"]), float(e["hy"]), float(e["hz"]))
    x = geom.nodes
    shoot = shooting_solve(geom.a, eq.mu, eq.hy, eq.hz)
    sy, sz = shoot(x)
    rows = list(zip(x, eq.By(x), eq.Bz(x), sy, sz))
    f = write_csv(out / "beltrami.csv", ["x", "By", "Bz", "By_shooting", "Bz_shooting"], rows)
    fl = eq.fluxes()
    scalars = {
        "A": eq.A, "C": eq.C, "mu": eq.mu,
        "flux_error": float(np.max(np.abs(fl - [eq.hy, eq.hz]))),
        "curl_residual": curl_residual(eq, x),
        "shooting_difference": float(max(np.max(np.abs(sy - eq.By(x))), np.max(np.abs(sz - eq.Bz(x))))),
        "energy": eq.energy(),
    }
    return scalars, [f]


def cmd_bifurcation(cfg, out, threads):
    e, b = cfg["equilibrium"], cfg["bifurcation"]
    geom = geometry_of(cfg)
    branch = bifurcated_branch(geom, int(b["j"]), float(e["hy"]), float(e["hz"]))
    d = branch.direction
    from .slab.beltrami import field_energy, helicity
    x = np.linspace(-geom.a, geom.a, 4001)
    rows = []
    for al in b["alpha"]:
        fld = branch.with_alpha(float(al)).sample(x)
        rows.append((al, helicity(x, *fld), field_energy(x, *fld)))
    f1 = write_csv(out / "bifurcation_branch.csv", ["alpha", "helicity", "energy"], rows)
    comps = [matched_helicity_comparison(branch, r * d.eigenvalue) for r in b["mu_ratios"]]
    f2 = write_csv(out / "bifurcation_energy.csv",
                   ["mu", "helicity", "taylor_energy", "branch_energy", "alpha"],
                   [(c.mu, c.helicity, c.taylor_energy, c.branch_energy, c.alpha) for c in comps])
    space = d.space
    overlap = None
    if not d.degenerate:
        A_H = space.sample(lambda s: e["hz"] * s, lambda s: -e["hy"] * s)
        A_H[space.M] = 0.0
        overlap = abs(space.inner(d.vector, A_H))
    scalars = {"eigenvalue": d.eigenvalue, "degenerate": d.degenerate,
               "coefficients": None if d.coefficients is None else list(d.coefficients),
               "A_H_overlap": overlap,
               "branch_below_taylor": all(c.branch_energy < c.taylor_energy for c in comps)}
    return scalars, [f1, f2]


def _problem(cfg, mu=None, N=None):
    e = cfg["equilibrium"]
    geom = geometry_of(cfg, N)
    eq = beltrami_solve(geom.a, float(e["mu"] if mu is None else mu), float(e["hy"]), float(e["hz"]))
    ky, kz = map(float, cfg["perturbation"]["mode"])
    return TearingProblem.build(geom, eq, ky, kz)


def cmd_resonance(cfg, out, threads):
    pr = _problem(cfg)
    roots = find_resonant_surface(pr.eq, pr.space.ky, pr.space.kz)
    b = pr.b
    g = pr.geometry
    bpar = b.step_profile()
    f1 = write_csv(out / "resonance_step.csv", ["x", "b_par_re", "b_par_im"],
                   zip(g.nodes, bpar.real, bpar.imag))
    _, bx, by, bz = pr.space.components(b.coeffs)
    f2 = write_csv(out / "resonance_kernel.csv",
                   ["x", "bx_re", "bx_im", "by_re", "by_im", "bz_re", "bz_im"],
                   zip(g.centers, bx.real, bx.imag, by.real, by.imag, bz.real, bz.imag))
    scalars = {"x_dagger": list(roots), "selected": b.x_dagger, "c1": b.step_coefficient,
               "c0": b.step_offset, "cell_offset": b.offset, "kernel_residual": b.kernel_residual,
               "norm": pr.space.norm(b.coeffs)}
    return scalars, [f1, f2]


def smooth_perturbation(problem: TearingProblem, amplitude=1.0, seed=0):
    """Smooth solenoidal field with ``u_x(+-a) = 0`` and a nonzero resonant component."""
    sp = problem.space
    x = sp.geometry.centers
    a = sp.geometry.a
    rng = np.random.default_rng(seed)
    c = rng.normal(size=4)
    f = np.cos(0.5 * np.pi * x / a) * (1.0 + 0.3 * c[0] * np.sin(np.pi * x / a))
    g = np.exp(-x ** 2) * (1.0 + 0.5j * x + 0.1 * c[1])
    return amplitude * np.concatenate([f, g]).astype(complex)


def cmd_ideal_run(cfg, out, threads):
    pr = _problem(cfg)
    integ = cfg["integration"]
    B0 = smooth_perturbation(pr, cfg["perturbation"]["amplitude"], cfg["seed"])
    V0 = np.zeros_like(B0)
    tr = ideal_evolve(pr, V0, B0, float(integ["t_end"]), float(integ["dt"]), int(integ["samples"]))
    E, C = tr.monitors["energy"], tr.monitors["C_b"]
    rows = zip(tr.times, E, C.real, C.imag, np.abs(E - E[0]) / abs(E[0]), np.abs(C - C[0]))
    f = write_csv(out / "ideal_run.csv",
                  ["t", "energy", "C_b_re", "C_b_im", "energy_drift", "C_b_drift"], rows)
    scalars = {"energy_drift": relative_drift(tr, "energy"), "C_b_drift": relative_drift(tr, "C_b"),
               "max_divergence": float(max(tr.monitors["div_V"].max(), tr.monitors["div_B"].max())),
               "x_dagger": pr.b.x_dagger, "cell_offset": pr.b.offset}
    return scalars, [f]


def _gamma(cfg, problem):
    ge = lowest_eigenpair(problem.geometry, [tuple(map(float, m)) for m in cfg["modes"]])
    return ge.lambda1, ge.mode, gamma_overlap(ge.omega1, problem.b)


def cmd_unfreeze_run(cfg, out, threads):
    u = cfg["unfreeze"]
    N = int(u["N"])
    base = _problem(cfg, N=N)
    lam1, mode1, gamma = _gamma(cfg, base)
    if gamma < 1e-12:
        raise DomainError("overlap below 1e-12; the reduced model is degenerate")
    mu = float(u["mu_ratio"]) * lam1
    D = float(u["D"])
    params = ReducedTearingParams(mu, lam1, gamma, D)
    pred = classify_stability(params)
    t_end = float(u["t_end"])
    if u["model"] == "reduced":
        tr = reduced_evolve(params, float(u["p0"]), float(u["q0"]), t_end)
        p, q = tr.monitors["p"], tr.monitors["q"]
        H = tr.monitors["H_p"]
        scale = 0.5 * (abs(params.c) * p ** 2 + abs(D) * q ** 2)
    else:
        pr = _problem(cfg, mu=mu, N=N)
        n = pr.space.dim
        s0 = ExtendedTearingState(np.zeros(n, complex), np.zeros(n, complex), u["p0"], u["q0"])
        dt = stable_step(extended_matrix(pr, D), float(cfg["integration"]["dt"]))
        tr = extended_evolve(pr, s0, D, t_end, dt, 801)
        p, q, H = tr.monitors["p"], tr.monitors["q"], tr.monitors["energy"]
        scale = np.array([energy_scale(pr, y, D) for y in tr.states])
    # the energy is indefinite, so drift is measured against the size of its terms
    drift = np.abs(H - H[0]) / np.maximum(scale, 1e-300)
    f = write_csv(out / "unfreeze_run.csv", ["t", "p", "q", "H_ext", "C_b", "energy_drift"],
                  zip(tr.times, np.real(p), np.real(q), np.real(H), np.real(p), drift))
    fit = fitted_class(tr.times, p)
    scalars = {"lambda1": lam1, "lambda1_mode": list(mode1), "gamma": gamma, "mu": mu, "D": D,
               "c": params.c, "predicted": pred.klass, "predicted_rate": pred.rate,
               "predicted_frequency": pred.frequency, "fitted": fit.klass, "fitted_rate": fit.rate,
               "fitted_frequency": fit.frequency, "p_range": float(np.ptp(np.real(p))),
               "energy_drift": float(drift.max())}
    return scalars, [f]


def cmd_scan(cfg, out, threads):
    s = cfg["scan"]
    base = _problem(cfg, N=int(s["N"]))
    lam1, mode1, gamma = _gamma(cfg, base)
    ratios = np.linspace(s["ratio_start"], s["ratio_stop"], int(s["ratio_num"]))
    rows = stability_scan(lam1, gamma, ratios, s["D"], model=s["model"], t_end=float(s["t_end"]),
                          N=int(s["N"]), threads=threads)
    f = write_csv(out / "scan.csv",
                  ["mu_over_lambda1", "D", "predicted", "fitted", "rate", "frequency", "agree"],
                  [(r.ratio, r.D, r.predicted, r.fitted, r.rate, r.frequency, r.agree) for r in rows])
    agree = sum(r.agree for r in rows)
    scalars = {"lambda1": lam1, "lambda1_mode": list(mode1), "gamma": gamma, "cells": len(rows),
               "agreement": agree / len(rows), "model": s["model"]}
    return scalars, [f]


def cmd_gc_density(cfg, out, threads):
    g = cfg["gc"]
    rows = []
    worst = 0.0
    for al in g["alpha"]:
        for be in g["beta"]:
            p = EquilibriumParams(float(al), float(be))
            w = np.asarray(g["omega_c"], dtype=float)
            closed = density_profile(p, w)
            quad = np.array([marginal_density_quadrature(p, wi) for wi in w])
            shape_c, shape_q = closed / closed[0], quad / quad[0]
            worst = max(worst, float(np.max(np.abs(shape_q / shape_c - 1))))
            rows.extend(zip([al] * len(w), [be] * len(w), w, shape_c, shape_q))
    f = write_csv(out / "gc_density.csv", ["alpha", "beta", "omega_c", "rho_closed", "rho_quadrature"], rows)
    return {"max_shape_error": worst}, [f]


HANDLERS = {
    "spectrum": cmd_spectrum,
    "beltrami": cmd_beltrami,
    "bifurcation": cmd_bifurcation,
    "resonance": cmd_resonance,
    "ideal-run": cmd_ideal_run,
    "unfreeze-run": cmd_unfreeze_run,
    "scan": cmd_scan,
    "gc-density": cmd_gc_density,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="casimirkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON scenario file")
        p.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or ./casimirkit-out)")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="set a dotted config key, value parsed as JSON")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.time()
    try:
        cfg = load_config(args.config, args.override, args.seed)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or Path(os.environ.get(OUT_ENV, "casimirkit-out"))
    out.mkdir(parents=True, exist_ok=True)
    try:
        scalars, files = HANDLERS[args.command](cfg, out, args.threads)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CasimirKitError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    summary = write_summary(out, args.command, cfg, scalars, started)
    log.info("wrote %s", ", ".join(str(f) for f in files))
    print(json.dumps(summary["scalars"], sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
