"""Command-line entry point: deterministic experiment runs and sweeps.

Every run emits a manifest with the fully resolved configuration (defaults
included), the package version, and a checksum per artifact; identical
configs and seeds produce byte-identical CSV/JSON.  Exit codes: 0 success,
2 configuration error, 3 numerical failure, 4 non-convergence verdict.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    build_grid,
    build_params,
    load_config,
    parse_p_value,
    set_by_path,
)
from .dynamics import (
    CflViolationError,
    EvolverConfig,
    NumericalError,
    evolve,
    gronwall_margin,
    kolmogorov_diagnostics,
    long_time_averages,
    random_divergence_free,
    stability_experiment,
)
from .forcing import (
    ForceSpec,
    audit_norm_equivalence,
    build_force,
    grashof,
    grashof_from_force,
    spatial_concentration,
    theta_exponents,
)
from .kernels import (
    decay_transfer_check,
    kernel_eval,
    kernel_mass,
    kernel_radial_quadrature,
    piecewise_bound_constants,
)
from .snapshot import write_snapshot
from .spectra import (
    dissipation_scales,
    exponential_decay_fit,
    five_thirds_probe,
    gevrey_radius,
    shell_spectrum,
)
from .spectral import SpectralField, norm_hs, norm_l2, norm_lp
from .stationary import (
    PicardBlowupError,
    PicardConfig,
    gevrey_picard_check,
    oseen_expand,
    picard_solve,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_NONCONVERGED = 4


# ---------------------------------------------------------------------------
# deterministic serialization


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_sanitize(obj), sort_keys=True, indent=2) + "\n")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# shared builders


def _force_field(cfg, params, grid):
    if params.F == 0.0:
        return SpectralField.zero(grid)
    orientation = tuple(cfg["params"].get("orientation", (1.0, 1.0, 1.0)))
    return build_force(ForceSpec(params, orientation=orientation), grid)


def _initial_field(cfg, grid):
    ev = cfg["evolve"]
    if ev["initial"] == "zero":
        return SpectralField.zero(grid)
    return random_divergence_free(
        grid,
        seed=cfg["seed"],
        amplitude=float(ev["initial_amplitude"]),
        slope=float(ev["initial_slope"]),
    )


def _picard_config(cfg) -> PicardConfig:
    pc = cfg["picard"]
    return PicardConfig(
        variant=pc["variant"],
        tolerance=float(pc["tolerance"]),
        max_iters=int(pc["max_iters"]),
    )


def _evolver_config(cfg, params, grid) -> EvolverConfig:
    ev = cfg["evolve"]
    return EvolverConfig(
        params=params,
        grid=grid,
        dt=float(ev["dt"]),
        t_end=float(ev["t_end"]),
        scheme=int(ev["scheme"]),
        snapshot_every=int(ev["snapshot_every"]),
        average_start_fraction=float(ev["average_start_fraction"]),
        fixed_dt=bool(ev["fixed_dt"]),
    )


# ---------------------------------------------------------------------------
# experiment runners: each returns (exit_code, summary_row) and writes
# artifacts into out_dir


def run_evolve(cfg: dict, out_dir: Path):
    params = build_params(cfg)
    grid = build_grid(cfg)
    f = _force_field(cfg, params, grid)
    u0 = _initial_field(cfg, grid)
    ecfg = _evolver_config(cfg, params, grid)

    u_end, rec, snaps = evolve(u0, f, ecfg)

    write_csv(
        out_dir / "diagnostics.csv",
        ["t", "energy", "enstrophy", "injection", "balance_residual", "gronwall_margin"],
        zip(rec.t, rec.energy, rec.enstrophy, rec.injection, rec.balance, rec.gronwall),
    )
    t_end = float(rec.t[-1])
    window = (ecfg.average_start_fraction * t_end, t_end)
    averages = long_time_averages(rec, params, window=window)
    kd = kolmogorov_diagnostics(rec, f, params, averages)
    scales = dissipation_scales(averages, params)
    summary = {
        "averages": averages.as_dict(),
        "kolmogorov": kd,
        "dissipation_scales": scales,
        "grashof": {
            "G_0": grashof(params, 0.0),
            "G_1.5": grashof(params, 1.5),
            "G_3": grashof(params, 3.0),
        },
        "gronwall_margin": (
            gronwall_margin(rec, u0, f, params) if params.alpha > 0 else None
        ),
        "halvings": rec.halvings,
        "dt_final": rec.dt_final,
        "final_energy": float(rec.energy[-1]),
    }
    write_json(out_dir / "summary.json", summary)
    write_snapshot(out_dir / "final_field.bin", u_end, ell0=params.ell0)
    for i, (t, fld) in enumerate(snaps):
        write_snapshot(out_dir / f"snapshot_{i:06d}.bin", fld, ell0=params.ell0)

    row = {
        "G_1.5": grashof(params, 1.5),
        "u": averages.u,
        "e": averages.e_plain,
        "big_u": averages.big_u,
        "eps": averages.eps,
        "reynolds": averages.reynolds,
        "dissipation_ratio": kd.get("dissipation_ratio"),
        "ratio_bound_theo": kd.get("ratio_bound_theo"),
        "prop2_margin": kd.get("prop2_margin"),
        "lemma_margin": kd.get("lemma_margin"),
        "gronwall_margin": summary["gronwall_margin"],
        "kappa_d": scales.get("kappa_d"),
        "ratio_turbulent": scales.get("ratio_turbulent"),
        "ratio_laminar": scales.get("ratio_laminar"),
    }
    return EXIT_OK, row


def run_stationary(cfg: dict, out_dir: Path):
    params = build_params(cfg)
    grid = build_grid(cfg)
    f = _force_field(cfg, params, grid)
    res = picard_solve(f, params, _picard_config(cfg))
    summary = res.as_dict()
    summary["norms"] = {
        "l2": norm_l2(res.u),
        "h1_dot": norm_hs(res.u, 1.0),
        "l3": norm_lp(res.u, 3),
    }
    summary["grashof_1.5"] = grashof(params, 1.5)
    write_json(out_dir / "summary.json", summary)
    write_snapshot(out_dir / "solution.bin", res.u, ell0=params.ell0)
    row = {
        "verdict": res.verdict,
        "iterations": res.iterations,
        "pde_residual_rel": res.pde_residual_rel,
        "apriori_margin": res.apriori_margin,
        "working_norm": res.working_norm,
        "G_1.5": grashof(params, 1.5),
    }
    return (EXIT_OK if res.converged else EXIT_NONCONVERGED), row


def run_oseen(cfg: dict, out_dir: Path):
    params = build_params(cfg)
    grid = build_grid(cfg)
    if cfg["picard"]["variant"] != "classical":
        raise ConfigError(
            "the series expansion is stated for the classical equations; "
            "set picard.variant = 'classical'"
        )
    f = _force_field(cfg, params, grid)
    ref = picard_solve(f, params, _picard_config(cfg))
    if not ref.converged:
        write_json(out_dir / "ledger.json", {"verdict": "diverged"})
        return EXIT_NONCONVERGED, {"verdict": "diverged"}
    ledger, partial, _ = oseen_expand(
        f, params, int(cfg["oseen"]["n_max"]), reference=ref.u
    )
    out = ledger.as_dict()
    out["picard_iterations"] = ref.iterations
    out["picard_working_norm"] = ref.working_norm
    write_json(out_dir / "ledger.json", out)
    write_snapshot(out_dir / "partial_sum.bin", partial, ell0=params.ell0)
    row = {
        "verdict": "converged",
        "n_max_effective": ledger.n_max_effective,
        "last_partial_residual": ledger.partial_residuals[-1],
        "c_emp": ledger.c_emp,
    }
    return EXIT_OK, row


def run_stability(cfg: dict, out_dir: Path):
    params = build_params(cfg)
    grid = build_grid(cfg)
    if params.alpha <= 0:
        raise ConfigError("the stability experiment needs alpha > 0")
    f = _force_field(cfg, params, grid)
    res = picard_solve(f, params, _picard_config(cfg), calibrate=False)
    if not res.converged:
        write_json(out_dir / "stability.json", {"verdict": "diverged"})
        return EXIT_NONCONVERGED, {"verdict": "diverged"}
    st = cfg["stability"]
    seeds = [cfg["seed"] + i for i in range(int(st["n_seeds"]))]
    report = stability_experiment(
        res.u,
        f,
        seeds,
        _evolver_config(cfg, params, grid),
        perturbation_amplitude=float(st["perturbation_amplitude"]),
        residual_tol=float(st["residual_tol"]),
    )
    out = report.as_dict()
    out["alpha"] = params.alpha
    out["target_rate"] = 2.0 * params.alpha
    write_json(out_dir / "stability.json", out)
    row = {
        "verdict": "converged",
        "l3_norm": report.l3_norm,
        "hypothesis_ok": report.hypothesis_ok,
        "min_rate": min(report.fitted_rates),
        "max_margin": max(report.envelope_margins),
    }
    return EXIT_OK, row


def run_spectra_audit(cfg: dict, out_dir: Path):
    params = build_params(cfg)
    grid = build_grid(cfg)
    f = _force_field(cfg, params, grid)
    res = picard_solve(f, params, _picard_config(cfg), calibrate=False)
    if not res.converged:
        write_json(out_dir / "fits.json", {"verdict": "diverged"})
        return EXIT_NONCONVERGED, {"verdict": "diverged"}
    spec = shell_spectrum(res.u)
    write_csv(
        out_dir / "spectrum.csv",
        ["kappa", "energy_density", "max_amplitude", "max_amplitude_kappa"],
        zip(spec.kappa, spec.energy, spec.max_amp, spec.max_amp_kappa),
    )
    window = cfg["spectra"]["fit_window"]
    if window is None:
        window = (params.band_lo, grid.kmax)
    window = (float(window[0]), float(window[1]))
    fit = exponential_decay_fit(spec, window)
    target = params.ell0 / params.rho2
    gr = gevrey_radius(res.u, window=window, s=float(cfg["spectra"]["gevrey_s"]))
    loglog = five_thirds_probe(spec, window)
    curve = gevrey_picard_check(res.u, gr["beta_grid"], s=float(cfg["spectra"]["gevrey_s"]))
    fits = {
        "decay_fit": {
            "rate": fit.rate,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "window": list(fit.window),
            "n_shells": fit.n_shells,
            "excluded_shells": fit.excluded_shells,
        },
        "target_rate": target,
        "meets_target": fit.meets(0.9 * target),
        "gevrey_radius": {
            "beta_star": gr["beta_star"],
            "beta_cross": gr["beta_cross"],
            "kappa_top": gr["kappa_top"],
        },
        "gevrey_curve": {"beta": curve["beta"], "norm": curve["norm"]},
        "five_thirds_probe": {
            "slope": -loglog.rate,
            "r_squared": loglog.r_squared,
        },
    }
    write_json(out_dir / "fits.json", fits)
    row = {
        "verdict": "converged",
        "decay_rate": fit.rate,
        "target_rate": target,
        "r_squared": fit.r_squared,
        "beta_star": gr["beta_star"],
        "loglog_slope": -loglog.rate,
    }
    return EXIT_OK, row


def run_force_audit(cfg: dict, out_dir: Path):
    params = build_params(cfg)
    grid = build_grid(cfg)
    fa = cfg["force_audit"]
    spec = ForceSpec(params)
    f = build_force(spec, grid)

    p_values = [parse_p_value(p) for p in fa["p_values"]]
    rows = audit_norm_equivalence(spec, grid, fa["s_values"], p_values)
    write_csv(
        out_dir / "force_ratios.csv",
        ["s", "p", "norm", "reference", "ratio"],
        [
            (r["s"], "inf" if r["p"] == np.inf else r["p"], r["norm"], r["reference"], r["ratio"])
            for r in rows
        ],
    )

    thetas = [float(t) for t in fa["theta_values"]]
    g_summary = {"theta": thetas, "grashof": [grashof(params, t) for t in thetas]}
    empirical = {}
    for theta in (0.0, 0.75, 1.0, 1.5):
        s, p = theta_exponents(theta)
        emp = grashof_from_force(f, params, theta)
        empirical[str(theta)] = {
            "s": s,
            "p": "inf" if p == np.inf else p,
            "empirical": emp,
            "formula": grashof(params, theta),
            "ratio": emp / grashof(params, theta),
        }
    g_summary["empirical"] = empirical
    g_summary["linf_over_F"] = norm_lp(f, "inf") / params.F
    write_json(out_dir / "grashof.json", g_summary)

    conc = spatial_concentration(f, params, fa["mu_values"])
    write_csv(
        out_dir / "concentration.csv",
        ["mu", "mass_outside"],
        [(r["mu"], r["mass_outside"]) for r in conc],
    )
    row = {
        "linf_over_F": g_summary["linf_over_F"],
        "ratio_theta_1.5": empirical["1.5"]["ratio"],
    }
    return EXIT_OK, row


def run_kernel_audit(cfg: dict, out_dir: Path):
    k = cfg["kernel"]
    nu, alpha = float(k["nu"]), float(k["alpha"])
    rows = []
    for r in k["radii"]:
        cf = kernel_eval(nu, alpha, float(r))
        q = kernel_radial_quadrature(nu, alpha, float(r))
        rows.append((r, cf, q, abs(cf - q) / cf))
    write_csv(
        out_dir / "kernel_margins.csv",
        ["r", "closed_form", "quadrature", "rel_err"],
        rows,
    )
    mass = kernel_mass(nu, alpha)
    summary = {
        "nu": nu,
        "alpha": alpha,
        "mass": mass,
        "mass_expected": 1.0 / alpha,
        "mass_error": abs(mass - 1.0 / alpha),
        "piecewise_bound": piecewise_bound_constants(nu, alpha),
        "max_rel_err": max(r[3] for r in rows),
    }
    n = int(k["tail_exponent"])
    g = lambda s: 1.0 / (1.0 + s) ** n
    transfer = decay_transfer_check(g, n, nu, alpha, k["tail_radii"])
    write_csv(
        out_dir / "transfer.csv",
        ["r", "convolution", "product"],
        zip(transfer["radii"], transfer["convolution"], transfer["products"]),
    )
    summary["transfer_spread"] = transfer["spread"]
    write_json(out_dir / "kernel.json", summary)
    row = {
        "max_rel_err": summary["max_rel_err"],
        "mass_error": summary["mass_error"],
        "transfer_spread": transfer["spread"],
    }
    return EXIT_OK, row


_RUNNERS = {
    "evolve": run_evolve,
    "stationary-picard": run_stationary,
    "oseen": run_oseen,
    "stability": run_stability,
    "spectra-audit": run_spectra_audit,
    "force-audit": run_force_audit,
    "kernel-audit": run_kernel_audit,
}


# ---------------------------------------------------------------------------
# sweep machinery


def _sweep_points(cfg: dict):
    axes = cfg["sweep"]["axes"]
    value_lists = [ax["values"] for ax in axes]
    paths = [ax["path"] for ax in axes]
    for combo in itertools.product(*value_lists):
        yield paths, combo


def _point_config(cfg: dict, paths, combo) -> dict:
    import copy

    point = copy.deepcopy(cfg)
    point["kind"] = cfg["sweep"]["kind"]
    del point["sweep"]
    for path, value in zip(paths, combo):
        set_by_path(point, path, value)
    return point


def _run_sweep_point(args):
    idx, point_cfg, point_dir = args
    Path(point_dir).mkdir(parents=True, exist_ok=True)
    try:
        runner = _RUNNERS[point_cfg["kind"]]
        code, row = runner(point_cfg, Path(point_dir))
        status = {
            EXIT_OK: "ok",
            EXIT_NONCONVERGED: "nonconverged",
        }.get(code, f"exit{code}")
        return idx, status, row
    except (ConfigError, ValueError) as e:
        return idx, f"config-error: {e}", {}
    except (CflViolationError, NumericalError, PicardBlowupError) as e:
        return idx, f"numerical-failure: {e}", {}


def run_sweep(cfg: dict, out_dir: Path, threads: int = 1):
    points = list(_sweep_points(cfg))
    jobs = []
    for idx, (paths, combo) in enumerate(points):
        point_cfg = _point_config(cfg, paths, combo)
        jobs.append((idx, point_cfg, str(out_dir / f"point_{idx:04d}")))

    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_sweep_point, jobs))
    else:
        results = [_run_sweep_point(job) for job in jobs]
    results.sort(key=lambda r: r[0])

    paths = [ax["path"] for ax in cfg["sweep"]["axes"]]
    value_keys = [f"axis:{p}" for p in paths]
    row_keys: list = []
    for _, _, row in results:
        for key in row:
            if key not in row_keys:
                row_keys.append(key)
    header = ["point", *value_keys, "status", *row_keys]
    table = []
    for (idx, status, row), (_, combo) in zip(results, points):
        table.append(
            [idx, *combo, status, *(row.get(k) for k in row_keys)]
        )
    write_csv(out_dir / "sweep.csv", header, table)
    worst = EXIT_OK
    for _, status, _ in results:
        if status.startswith("numerical"):
            worst = max(worst, EXIT_NUMERICAL)
        elif status.startswith("config"):
            worst = max(worst, EXIT_CONFIG)
        elif status == "nonconverged":
            worst = max(worst, EXIT_NONCONVERGED)
    return worst, {"points": len(results)}


# ---------------------------------------------------------------------------
# entry point


def _resolve_out_dir(cfg: dict, cli_out: str | None) -> Path:
    root = Path(os.environ.get("NSK41_OUT_ROOT", "."))
    out = cli_out or cfg.get("out") or "nsk41_out"
    out_path = Path(out)
    return out_path if out_path.is_absolute() else root / out_path


def _collect_artifacts(out_dir: Path) -> dict:
    arts = {}
    for p in sorted(out_dir.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            arts[str(p.relative_to(out_dir))] = _sha256(p)
    return arts


def execute(config_path: str, cli_out=None, threads=1, seed=None) -> int:
    try:
        cfg = load_config(config_path)
        if seed is not None:
            cfg["seed"] = int(seed)
        out_dir = _resolve_out_dir(cfg, cli_out)
        out_dir.mkdir(parents=True, exist_ok=True)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    code = EXIT_OK
    error = None
    try:
        if cfg["kind"] == "sweep":
            code, _ = run_sweep(cfg, out_dir, threads=threads)
        else:
            code, _ = _RUNNERS[cfg["kind"]](cfg, out_dir)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        code, error = EXIT_CONFIG, str(e)
    except (CflViolationError, NumericalError, PicardBlowupError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        code, error = EXIT_NUMERICAL, str(e)
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        code, error = EXIT_CONFIG, str(e)

    manifest = {
        "version": __version__,
        "kind": cfg["kind"],
        "config": cfg,
        "artifacts": _collect_artifacts(out_dir),
        "exit_code": code,
    }
    if error is not None:
        manifest["error"] = error
    write_json(out_dir / "manifest.json", manifest)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nsk41",
        description="Pseudo-spectral damped Navier-Stokes laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for verb in ("run", "sweep"):
        p = sub.add_parser(verb)
        p.add_argument("config", help="path to a TOML experiment file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=None, help="seed override")
    args = parser.parse_args(argv)

    if args.command == "sweep":
        try:
            cfg = load_config(args.config)
        except ConfigError as e:
            print(f"config error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        if cfg["kind"] != "sweep":
            print("config error: 'sweep' verb needs kind = \"sweep\"", file=sys.stderr)
            return EXIT_CONFIG
    return execute(args.config, cli_out=args.out, threads=args.threads, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
