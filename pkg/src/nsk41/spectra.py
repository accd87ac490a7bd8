"""Shell-averaged energy spectra and frequency-decay fits.

The spherical shell of width dk around kappa_j = j dk collects the modal
energies; dividing by dk gives E(kappa) the meaning of a spectral density,
so the Parseval partition sum_j E(kappa_j) dk = ||u||_L2^2 holds exactly.
Pointwise decay statements are tested on the max-shell amplitude
M(kappa_j) = max |u_hat| over the shell; spectrum-level statements use E.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import SpectralField

AMPLITUDE_FLOOR = 1e-30


@dataclass
class ShellSpectrum:
    """Shell centers, energy density E, max amplitude M, and the |xi| that
    realizes each shell maximum (a sharper abscissa for pointwise fits)."""

    kappa: np.ndarray
    energy: np.ndarray
    max_amp: np.ndarray
    max_amp_kappa: np.ndarray
    dk: float
    counts: np.ndarray

    def total_energy(self) -> float:
        return float(np.sum(self.energy) * self.dk)


def shell_spectrum(u: SpectralField) -> ShellSpectrum:
    """Bin modal energies into shells |xi| in [kappa_j - dk/2, kappa_j + dk/2)."""
    g = u.grid
    dk = g.dk
    mag_sq = np.sum(np.abs(u.coeffs) ** 2, axis=0)
    shell_idx = np.rint(g.xi_abs / dk).astype(int)
    n_shells = int(shell_idx.max()) + 1

    flat_idx = shell_idx.ravel()
    flat_sq = mag_sq.ravel()
    energy = np.bincount(flat_idx, weights=flat_sq, minlength=n_shells)
    counts = np.bincount(flat_idx, minlength=n_shells)
    energy *= g.volume / dk

    mag = np.sqrt(flat_sq)
    max_amp = np.zeros(n_shells)
    np.maximum.at(max_amp, flat_idx, mag)
    max_kappa = np.zeros(n_shells)
    xi_flat = g.xi_abs.ravel()
    for j in range(n_shells):
        sel = flat_idx == j
        if not sel.any():
            continue
        local = np.argmax(mag[sel])
        max_kappa[j] = xi_flat[sel][local]

    kappa = dk * np.arange(n_shells)
    # drop the j = 0 bin (the zero mode; fields here are mean-free)
    return ShellSpectrum(
        kappa=kappa[1:],
        energy=energy[1:],
        max_amp=max_amp[1:],
        max_amp_kappa=max_kappa[1:],
        dk=dk,
        counts=counts[1:],
    )


def dissipation_scales(averages, params) -> dict:
    """kappa_D = (eps/nu^3)^(1/4) and its ratios against the two Reynolds
    scalings; reported, never asserted (the underlying relations are only
    order-of-magnitude)."""
    eps = averages.eps
    if eps <= 0:
        return {
            "kappa_0": 1.0 / params.ell0,
            "kappa_d": float("nan"),
            "ratio_turbulent": float("nan"),
            "ratio_laminar": float("nan"),
            "reynolds": float("nan"),
        }
    kappa_0 = 1.0 / params.ell0
    kappa_d = (eps / params.nu**3) ** 0.25
    re = averages.big_u * params.ell0 / params.nu
    return {
        "kappa_0": kappa_0,
        "kappa_d": kappa_d,
        "reynolds": re,
        "ratio_turbulent": kappa_d / (re**0.75 * kappa_0) if re > 0 else float("nan"),
        "ratio_laminar": kappa_d / (re**0.5 * kappa_0) if re > 0 else float("nan"),
    }


@dataclass
class DecayFit:
    """Least-squares line on (kappa, log amplitude) over a shell window."""

    rate: float          # minus the slope; positive = decay
    intercept: float
    r_squared: float
    window: tuple
    n_shells: int
    excluded_shells: int

    def meets(self, target_rate: float) -> bool:
        return self.rate >= target_rate


def _line_fit(x: np.ndarray, y: np.ndarray):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def exponential_decay_fit(
    spectrum: ShellSpectrum,
    window: tuple,
    use_max_amplitude: bool = True,
    min_shells: int = 5,
) -> DecayFit:
    """Fit log amplitude vs kappa on shells inside ``window``.

    Shells below the round-off floor are excluded (and counted); for the
    max-amplitude curve the abscissa is the |xi| realizing each shell max,
    which removes the half-shell quantization bias from the fitted rate.
    """
    lo, hi = window
    y_raw = spectrum.max_amp if use_max_amplitude else spectrum.energy
    x_raw = spectrum.max_amp_kappa if use_max_amplitude else spectrum.kappa
    sel = (
        (spectrum.kappa >= lo - 1e-12)
        & (spectrum.kappa <= hi + 1e-12)
        & (spectrum.counts > 0)
    )
    above = y_raw > AMPLITUDE_FLOOR
    excluded = int(np.count_nonzero(sel & ~above))
    sel &= above
    n = int(np.count_nonzero(sel))
    if n < min_shells:
        raise ValueError(
            f"only {n} usable shells in window [{lo:.4g}, {hi:.4g}] "
            f"(need {min_shells}; {excluded} below floor)"
        )
    slope, intercept, r2 = _line_fit(x_raw[sel], np.log(y_raw[sel]))
    return DecayFit(
        rate=-slope,
        intercept=intercept,
        r_squared=r2,
        window=(float(lo), float(hi)),
        n_shells=n,
        excluded_shells=excluded,
    )


def gevrey_radius(
    u: SpectralField,
    window: tuple | None = None,
    s: float = 0.5,
    beta_grid=None,
) -> dict:
    """Exponential decay radius beta* of a field's Fourier coefficients.

    beta* is the max-shell decay-fit rate; it is cross-checked against the
    beta at which the growth of log || exp(beta sqrt(-lap)) u ||_{H^s}
    switches to the truncation-dominated regime (slope ~ top shell |xi|).
    """
    from .spectral import norm_gevrey

    spec = shell_spectrum(u)
    if window is None:
        populated = spec.kappa[(spec.counts > 0) & (spec.max_amp > AMPLITUDE_FLOOR)]
        window = (float(populated[0]), float(populated[-1]))
    fit = exponential_decay_fit(spec, window)

    populated = spec.max_amp > AMPLITUDE_FLOOR
    kappa_top = float(np.max(spec.max_amp_kappa[populated]))
    if beta_grid is None:
        beta_grid = np.linspace(0.0, max(2.0 * fit.rate, 0.5), 17)
    betas = np.asarray(list(beta_grid), dtype=float)
    norms = np.array([norm_gevrey(u, b, s) for b in betas])
    beta_cross = float("nan")
    if len(betas) >= 3:
        slopes = np.diff(np.log(norms)) / np.diff(betas)
        crossed = np.nonzero(slopes >= 0.5 * kappa_top)[0]
        if crossed.size:
            beta_cross = float(betas[crossed[0]])
    return {
        "beta_star": fit.rate,
        "fit": fit,
        "beta_cross": beta_cross,
        "kappa_top": kappa_top,
        "beta_grid": betas.tolist(),
        "gevrey_norms": norms.tolist(),
    }


def five_thirds_probe(spectrum: ShellSpectrum, window: tuple) -> DecayFit:
    """Log-log slope of E(kappa) over a window; informational only."""
    lo, hi = window
    sel = (
        (spectrum.kappa >= lo - 1e-12)
        & (spectrum.kappa <= hi + 1e-12)
        & (spectrum.counts > 0)
        & (spectrum.energy > AMPLITUDE_FLOOR)
    )
    n = int(np.count_nonzero(sel))
    if n < 5:
        raise ValueError(f"only {n} usable shells for the log-log fit")
    slope, intercept, r2 = _line_fit(
        np.log(spectrum.kappa[sel]), np.log(spectrum.energy[sel])
    )
    return DecayFit(
        rate=-slope,
        intercept=intercept,
        r_squared=r2,
        window=(float(lo), float(hi)),
        n_shells=n,
        excluded_shells=0,
    )


def synthetic_exponential_field(grid, beta: float, seed: int = 0) -> SpectralField:
    """Divergence-free field with |u_hat(xi)| = exp(-beta |xi|): the fit oracle."""
    from .dynamics import random_divergence_free

    base = random_divergence_free(grid, seed, amplitude=1.0, slope=0.0)
    mag = np.sqrt(np.sum(np.abs(base.coeffs) ** 2, axis=0))
    scale = np.zeros_like(mag)
    nz = mag > 0
    scale[nz] = np.exp(-beta * grid.xi_abs[nz]) / mag[nz]
    return SpectralField(grid, base.coeffs * scale)
