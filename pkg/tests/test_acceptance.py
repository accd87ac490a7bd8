"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines.  Desk scale throughout (N = 32..48); every tolerance is pinned here.
"""

import sys

import numpy as np
import pytest

from nsk41.cli import execute
from nsk41.dynamics import (
    EvolverConfig,
    evolve,
    gronwall_margin,
    kolmogorov_diagnostics,
    long_time_averages,
    random_divergence_free,
    stability_experiment,
)
from nsk41.forcing import (
    ForceSpec,
    PhysicalParams,
    amplitude_for_grashof,
    build_force,
)
from nsk41.kernels import (
    decay_transfer_check,
    kernel_eval,
    kernel_mass,
    kernel_radial_quadrature,
)
from nsk41.spectra import (
    exponential_decay_fit,
    shell_spectrum,
    synthetic_exponential_field,
)
from nsk41.spectral import (
    GridSpec,
    Multiplier,
    SpectralField,
    apply_multiplier,
    dealias,
    hermitian_symmetrize,
    inner_l2,
    leray_project,
    norm_hs,
    norm_l2,
    norm_lp,
)
from nsk41.stationary import (
    PicardConfig,
    catalan,
    catalan_closed_form,
    catalan_generating_value,
    catalan_series,
    oseen_expand,
    picard_solve,
)

ELL0 = np.pi / 3
BOX = np.pi
N_DESK = 32


def _report(num: int, ok: bool, desc: str, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    line = f"[criterion {num:02d}] {status}: {desc}"
    if detail:
        line += f"  ({detail})"
    print(line, file=sys.stderr)


def _params(nu=0.5, alpha=0.25, F=1e-3, ell0=ELL0, L=2 * ELL0):
    return PhysicalParams(nu=nu, alpha=alpha, ell0=ell0, L=L, F=F)


# ---------------------------------------------------------------------------
# shared expensive runs


@pytest.fixture(scope="module")
def grid():
    return GridSpec(box_half_side=BOX, resolution=N_DESK)


@pytest.fixture(scope="module")
def gronwall_matrix(grid):
    """(nu, alpha) matrix with random initial data, at dt and dt/2."""
    out = []
    for nu in (0.5, 1.0):
        for alpha in (0.25, 1.0):
            p = _params(nu=nu, alpha=alpha)
            f = build_force(ForceSpec(p), grid)
            u0 = random_divergence_free(grid, seed=101, amplitude=0.3)
            t_end = 10.0 / alpha
            recs = {}
            for dt in (0.1, 0.05):
                cfg = EvolverConfig(
                    params=p, grid=grid, dt=dt, t_end=t_end, scheme=2,
                    fixed_dt=True,
                )
                _, rec, _ = evolve(u0, f, cfg)
                recs[dt] = rec
            out.append((p, f, u0, recs))
    return out


@pytest.fixture(scope="module")
def prop2_matrix(grid):
    """Six zero-initial runs for the constant-one energy-side estimate."""
    cases = [
        dict(nu=0.5, alpha=0.25, F=1e-3),
        dict(nu=1.0, alpha=0.25, F=1e-3),
        dict(nu=0.5, alpha=1.0, F=1e-3),
        dict(nu=1.0, alpha=1.0, F=1e-3),
        dict(nu=0.5, alpha=0.25, F=5e-4),
        dict(nu=0.5, alpha=0.25, F=2e-3),
    ]
    out = []
    for case in cases:
        p = _params(**case)
        f = build_force(ForceSpec(p), grid)
        cfg = EvolverConfig(
            params=p, grid=grid, dt=0.1, t_end=8.0 / p.alpha, scheme=2
        )
        _, rec, _ = evolve(SpectralField.zero(grid), f, cfg)
        out.append((p, f, rec))
    return out


@pytest.fixture(scope="module")
def grashof_sweep(grid):
    """G_{3/2} in {0.1, 1, 10} with the top point genuinely nonlinear."""
    out = []
    for g_target in (0.1, 1.0, 10.0):
        base = _params(nu=0.03, alpha=0.2, F=1.0)
        F = amplitude_for_grashof(base, 1.5, g_target)
        p = _params(nu=0.03, alpha=0.2, F=F)
        f = build_force(ForceSpec(p), grid)
        cfg = EvolverConfig(params=p, grid=grid, dt=0.05, t_end=25.0, scheme=2)
        _, rec, _ = evolve(SpectralField.zero(grid), f, cfg)
        avg = long_time_averages(rec, p)
        kd = kolmogorov_diagnostics(rec, f, p, avg)
        out.append((g_target, p, avg, kd))
    return out


@pytest.fixture(scope="module")
def oseen_bundle():
    """Classical laminar solve plus six-order series on the finer grid."""
    g48 = GridSpec(box_half_side=BOX, resolution=48)
    p = PhysicalParams(nu=0.5, alpha=0.0, ell0=ELL0, L=2 * ELL0, F=1e-4)
    f = build_force(ForceSpec(p), g48)
    ref = picard_solve(f, p, PicardConfig(variant="classical"))
    assert ref.converged
    ledger, partial, terms = oseen_expand(f, p, 6, reference=ref.u)
    return g48, p, f, ref, ledger


# ---------------------------------------------------------------------------
# criteria


def test_criterion_01_spectral_algebra(grid):
    desc = "Leray idempotence/self-adjointness, Parseval, multiplier composition <= 1e-10 on 100 random fields"
    rng = np.random.default_rng(2026)
    n = grid.resolution
    m1 = Multiplier.fractional_laplacian(grid, 0.5)
    m2 = Multiplier.gevrey(grid, 0.15)
    worst = 0.0
    for _ in range(100):
        raw = rng.standard_normal((3, n, n, n)) + 1j * rng.standard_normal(
            (3, n, n, n)
        )
        v = dealias(hermitian_symmetrize(SpectralField(grid, raw)))
        v.coeffs[:, 0, 0, 0] = 0.0
        w = dealias(
            hermitian_symmetrize(
                SpectralField(
                    grid,
                    rng.standard_normal((3, n, n, n))
                    + 1j * rng.standard_normal((3, n, n, n)),
                )
            )
        )
        w.coeffs[:, 0, 0, 0] = 0.0

        p1 = leray_project(v)
        idem = norm_l2(leray_project(p1) - p1) / (norm_l2(p1) or 1.0)
        adj = abs(inner_l2(p1, w) - inner_l2(v, leray_project(w))) / (
            norm_l2(v) * norm_l2(w)
        )
        from nsk41.spectral import inverse_transform

        samples = inverse_transform(v)
        quad = np.sum(samples**2) * grid.cell_volume
        parseval = abs(norm_l2(v) ** 2 - quad) / quad
        a = apply_multiplier(m1, apply_multiplier(m2, v))
        b = apply_multiplier(m1 * m2, v)
        comp = norm_l2(a - b) / (norm_l2(a) or 1.0)
        worst = max(worst, idem, adj, parseval, comp)
    ok = worst <= 1e-10
    _report(1, ok, desc, f"worst relative error {worst:.3e}")
    assert ok


def test_criterion_02_gronwall_time_control(gronwall_matrix):
    desc = "Gronwall margin <= 1e-4 * bound scale over T = 10/alpha, integrator-limited under dt halving"
    worst = -np.inf
    ok = True
    for p, f, u0, recs in gronwall_matrix:
        scale = norm_l2(u0) ** 2 + norm_hs(f, -1.0) ** 2 / (2 * p.alpha * p.nu)
        margins = {
            dt: gronwall_margin(rec, u0, f, p) for dt, rec in recs.items()
        }
        worst = max(worst, max(margins.values()) / scale)
        if not all(m <= 1e-4 * scale for m in margins.values()):
            ok = False
        if margins[0.05] > margins[0.1] + 1e-12 * scale:
            ok = False
    _report(2, ok, desc, f"worst margin/scale {worst:.3e}")
    assert ok


def test_criterion_03_long_time_average_bound(gronwall_matrix, prop2_matrix):
    desc = "u^2 <= ||f||_{H^-1}^2/(nu alpha) * (1 + 1e-3) on every converged run"
    worst = 0.0
    ok = True
    runs = [(p, f, recs[0.1]) for p, f, _, recs in gronwall_matrix]
    runs += [(p, f, rec) for p, f, rec in prop2_matrix]
    for p, f, rec in runs:
        bound = norm_hs(f, -1.0) ** 2 / (p.nu * p.alpha)
        avg = long_time_averages(rec, p)
        ratio = max(avg.u_sq_full, avg.u_sq_sup) / bound
        worst = max(worst, ratio)
        if ratio > 1 + 1e-3:
            ok = False
    _report(3, ok, desc, f"worst u^2/bound {worst:.4f} over {len(runs)} runs")
    assert ok


def test_criterion_04_prop2_constant_one(prop2_matrix):
    desc = "e <= u_band ||f||_L2 + 1e-6 with constant exactly one on a 6-run matrix"
    worst = -np.inf
    ok = True
    for p, f, rec in prop2_matrix:
        kd = kolmogorov_diagnostics(rec, f, p)
        worst = max(worst, kd["prop2_margin"])
        if kd["prop2_margin"] > 1e-6:
            ok = False
    _report(4, ok, desc, f"worst margin {worst:.3e}")
    assert ok


def test_criterion_05_dissipation_ratio_spread(grashof_sweep):
    desc = "eps ell0 / U^3 finite with max/min spread <= 1e2 across G_{3/2} in {0.1, 1, 10}"
    print("", file=sys.stderr)
    print("  G_3/2      ratio        Re", file=sys.stderr)
    ratios = []
    for g_target, p, avg, kd in grashof_sweep:
        ratios.append(kd["dissipation_ratio"])
        print(
            f"  {g_target:6.2f}  {kd['dissipation_ratio']:10.5f}  {avg.reynolds:9.3f}",
            file=sys.stderr,
        )
    finite = all(np.isfinite(r) and r > 0 for r in ratios)
    spread = max(ratios) / min(ratios)
    ok = finite and spread <= 1e2
    _report(5, ok, desc, f"spread {spread:.2f}")
    assert ok


def test_criterion_06_stationary_solvers(grid):
    desc = "f=0 => U=0 (both variants); PDE residual <= 1e-8 rel; a-priori bounds within 1e-6"
    ok = True
    details = []
    p = _params(nu=0.5, alpha=0.25, F=1e-3)
    zero = SpectralField.zero(grid)
    for variant in ("damped", "classical"):
        res0 = picard_solve(zero, p, PicardConfig(variant=variant), calibrate=False)
        if norm_l2(res0.u) != 0.0 or not res0.converged:
            ok = False
    f = build_force(ForceSpec(p), grid)
    for variant in ("damped", "classical"):
        res = picard_solve(f, p, PicardConfig(variant=variant), calibrate=False)
        if not res.converged:
            ok = False
            continue
        details.append(f"{variant}: resid {res.pde_residual_rel:.2e}")
        if res.pde_residual_rel > 1e-8:
            ok = False
        if variant == "damped":
            scale = _h_minus_one(f)
        else:
            scale = norm_hs(f, -1.0)
        if res.apriori_margin > 1e-6 * scale:
            ok = False
    _report(6, ok, desc, "; ".join(details))
    assert ok


def _h_minus_one(f):
    g = f.grid
    w = 1.0 / (1.0 + g.xi_sq)
    return float(
        np.sqrt(g.volume * np.sum(w * np.sum(np.abs(f.coeffs) ** 2, axis=0)))
    )


def test_criterion_07_oseen_catalan(oseen_bundle):
    desc = "support radii r(n) <= n rho2/ell0 for n <= 6; Catalan sum at z=1/4 to 1e-3; series agrees with Picard"
    g48, p, f, ref, ledger = oseen_bundle
    ok = ledger.orders == [1, 2, 3, 4, 5, 6]
    for n, r in zip(ledger.orders, ledger.support_radii):
        if r > n * p.band_hi + 1e-12:
            ok = False
    # exact recursion against the closed form, then the generating function
    for n in range(1, 61):
        if catalan(n) != catalan_closed_form(n):
            ok = False
    partial_quarter = catalan_series(0.25, 400_000)
    gen_err = abs(partial_quarter - catalan_generating_value(0.25))
    if gen_err > 1e-3:
        ok = False
    tol = 1e-10
    scale = ref.working_norm
    idx = [i for i, b in enumerate(ledger.catalan_bounds) if b < tol * scale]
    if not idx:
        ok = False
        agreement = np.inf
    else:
        agreement = ledger.partial_residuals[idx[0]] / scale
        if agreement > 10 * tol:
            ok = False
    _report(
        7, ok, desc,
        f"gen-fn gap {gen_err:.2e}; series-vs-Picard {agreement:.2e} rel",
    )
    assert ok


def test_criterion_08_laminar_frequency_decay():
    desc = "laminar max-shell fit rate >= 0.9 ell0/rho2 with R^2 >= 0.95 over >= 8 shells"
    g48 = GridSpec(box_half_side=BOX, resolution=48)
    p = PhysicalParams(nu=0.5, alpha=0.0, ell0=ELL0, L=2 * ELL0, F=0.01)
    f = build_force(ForceSpec(p), g48)
    res = picard_solve(f, p, PicardConfig(variant="classical"), calibrate=False)
    ok = res.converged
    rate = r2 = shells = 0
    if ok:
        spec = shell_spectrum(res.u)
        fit = exponential_decay_fit(spec, (p.band_lo, g48.kmax))
        rate, r2, shells = fit.rate, fit.r_squared, fit.n_shells
        target = 0.9 * p.ell0 / p.rho2
        ok = rate >= target and r2 >= 0.95 and shells >= 8
    _report(8, ok, desc, f"rate {rate:.3f} (target {0.9 * ELL0 / 2:.3f}), R^2 {r2:.3f}, {shells} shells")
    assert ok


def test_criterion_09_decay_fit_oracle(grid):
    desc = "synthetic exp(-beta |xi|) fields recover beta within 2% for beta in {0.3, 1, 2}"
    ok = True
    errs = []
    for beta in (0.3, 1.0, 2.0):
        u = synthetic_exponential_field(grid, beta, seed=9)
        fit = exponential_decay_fit(shell_spectrum(u), (grid.dk, grid.kmax))
        err = abs(fit.rate - beta) / beta
        errs.append(err)
        if err > 0.02:
            ok = False
    _report(9, ok, desc, f"relative errors {['%.2e' % e for e in errs]}")
    assert ok


def test_criterion_10_stability(grid):
    desc = "with ||U*||_L3 < nu, squared-distance decay rate >= 2 alpha (1 - 0.05) for 3 random data"
    p = _params(nu=0.5, alpha=0.5, F=5e-4)
    f = build_force(ForceSpec(p), grid)
    res = picard_solve(f, p, PicardConfig(variant="damped"), calibrate=False)
    assert res.converged
    cfg = EvolverConfig(params=p, grid=grid, dt=0.05, t_end=6.0, scheme=2)
    report = stability_experiment(
        res.u, f, [301, 302, 303], cfg, perturbation_amplitude=0.05
    )
    ok = report.hypothesis_ok
    min_rate = min(report.fitted_rates)
    if min_rate < 2 * p.alpha * (1 - 0.05):
        ok = False
    _report(
        10, ok, desc,
        f"||U*||_L3 {report.l3_norm:.3e} < nu {p.nu}; min rate {min_rate:.3f} "
        f"vs 2 alpha {2 * p.alpha}",
    )
    assert ok


def test_criterion_11_bessel_kernel():
    desc = "kernel closed form vs quadrature <= 1e-6 rel on [1e-2, 40]; mass 1/alpha +- 1e-6; transfer spread <= 1.5"
    ok = True
    worst_rel = 0.0
    for r in (1e-2, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0):
        cf = kernel_eval(1.0, 1.0, r)
        q = kernel_radial_quadrature(1.0, 1.0, r)
        rel = abs(cf - q) / cf
        worst_rel = max(worst_rel, rel)
        if rel > 1e-6:
            ok = False
    mass_err = abs(kernel_mass(1.0, 2.0) - 0.5)
    if mass_err > 1e-6:
        ok = False
    transfer = decay_transfer_check(
        lambda s: 1.0 / (1.0 + s) ** 4, 4, 1.0, 1.0, [10, 15, 20, 25, 30, 40]
    )
    if transfer["spread"] > 1.5:
        ok = False
    _report(
        11, ok, desc,
        f"worst rel {worst_rel:.1e}; mass err {mass_err:.1e}; spread {transfer['spread']:.3f}",
    )
    assert ok


def test_criterion_12_determinism(tmp_path):
    desc = "two runs of the same config + seed produce byte-identical CSV/JSON"
    config = f"""
kind = "evolve"
seed = 12

[params]
nu = 0.5
alpha = 0.25
ell0 = {ELL0}
L = {2 * ELL0}
F = 0.001

[grid]
box_half_side = {BOX}
resolution = 16

[evolve]
dt = 0.1
t_end = 2.0
initial = "random"
initial_amplitude = 0.2
"""
    cfg_path = tmp_path / "determinism.toml"
    cfg_path.write_text(config)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = execute(str(cfg_path), cli_out=str(out))
        assert code == 0
        outs.append(out)
    ok = True
    for artifact in ("diagnostics.csv", "summary.json", "manifest.json"):
        if (outs[0] / artifact).read_bytes() != (outs[1] / artifact).read_bytes():
            ok = False
    _report(12, ok, desc)
    assert ok
