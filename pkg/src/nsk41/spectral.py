"""Band-limited periodic vector fields stored as Fourier coefficients.

Fields live on the cube [-L_box, L_box)^3 sampled on an N^3 grid.  A
coefficient c(xi) is the plain average of samples times exp(-i xi.x), so
Parseval reads ||u||_L2^2 = vol * sum |c|^2 with vol = (2 L_box)^3.
Coefficient arrays use the unshifted numpy FFT layout; the centering of the
physical domain at the origin is absorbed into a (-1)^(k1+k2+k3) phase.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

# Fraction of a pseudo-spectral product's energy the dealias mask may remove
# before a warning is emitted.  Band-limited inputs legitimately push up to
# ~half of a quadratic product past the cutoff; far beyond that the result
# is mostly truncation artifact.
DEALIAS_CLIP_WARN_FRACTION = 0.9


class EmptyBandError(ValueError):
    """Requested spectral annulus contains no lattice mode."""


def _integer_modes(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, d=1.0 / n)


@dataclass(eq=False)
class GridSpec:
    """Cubic periodic grid and its wavenumber lattice.

    box_half_side   physical half-side L_box; the domain is [-L_box, L_box)^3
    resolution      N samples per axis (even, >= 8)
    dealias_fraction  sharp-mask cutoff as a fraction of the Nyquist index
    """

    box_half_side: float
    resolution: int
    dealias_fraction: float = 2.0 / 3.0

    xi: np.ndarray = field(init=False, repr=False)
    xi_sq: np.ndarray = field(init=False, repr=False)
    xi_abs: np.ndarray = field(init=False, repr=False)
    dealias_mask: np.ndarray = field(init=False, repr=False)
    phase: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        n = self.resolution
        if n % 2 != 0 or n < 8:
            raise ValueError(f"resolution must be even and >= 8, got {n}")
        if self.box_half_side <= 0:
            raise ValueError("box_half_side must be positive")
        if not 0 < self.dealias_fraction < 1:
            raise ValueError("dealias_fraction must lie in (0, 1)")
        k = _integer_modes(n)
        kx, ky, kz = np.meshgrid(k, k, k, indexing="ij")
        self.xi = self.dk * np.stack([kx, ky, kz])
        self.xi_sq = np.sum(self.xi**2, axis=0)
        self.xi_abs = np.sqrt(self.xi_sq)
        self.dealias_mask = self.xi_abs <= self.kmax + 1e-12 * self.dk
        self.phase = (-1.0) ** (kx + ky + kz)

    @property
    def dk(self) -> float:
        """Fundamental wavenumber pi / L_box (the period is 2 L_box)."""
        return np.pi / self.box_half_side

    @property
    def kmax(self) -> float:
        """Dealias cutoff in physical wavenumber units."""
        return self.dealias_fraction * (self.resolution / 2) * self.dk

    @property
    def volume(self) -> float:
        return (2.0 * self.box_half_side) ** 3

    @property
    def cell_volume(self) -> float:
        return self.volume / self.resolution**3

    def coords(self) -> np.ndarray:
        """Physical mesh, shape (3, N, N, N), covering [-L_box, L_box)."""
        n = self.resolution
        x = -self.box_half_side + (2.0 * self.box_half_side / n) * np.arange(n)
        return np.stack(np.meshgrid(x, x, x, indexing="ij"))

    def compatible(self, other: "GridSpec") -> bool:
        return (
            self.resolution == other.resolution
            and self.box_half_side == other.box_half_side
            and self.dealias_fraction == other.dealias_fraction
        )


@dataclass(eq=False)
class SpectralField:
    """Three-component vector field as Fourier coefficients on a GridSpec."""

    grid: GridSpec
    coeffs: np.ndarray  # complex, shape (3, N, N, N)

    def __post_init__(self) -> None:
        n = self.grid.resolution
        if self.coeffs.shape != (3, n, n, n):
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match grid N={n}"
            )

    @classmethod
    def zero(cls, grid: GridSpec) -> "SpectralField":
        n = grid.resolution
        return cls(grid, np.zeros((3, n, n, n), dtype=np.complex128))

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, c: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * c)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def mean_mode_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs[:, 0, 0, 0])))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        """coeff(-k) == conj(coeff(k)) up to tol relative to the peak."""
        scale = float(np.max(np.abs(self.coeffs))) or 1.0
        flipped = _reverse_modes(self.coeffs)
        return bool(np.max(np.abs(self.coeffs - np.conj(flipped))) <= tol * scale)


def _check_same_grid(a: SpectralField, b: SpectralField) -> None:
    if not a.grid.compatible(b.grid):
        raise ValueError("fields live on incompatible grids")


def _reverse_modes(c: np.ndarray) -> np.ndarray:
    """Map coefficient array k -> -k (mod N) on the last three axes."""
    out = c
    for ax in (-3, -2, -1):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


def hermitian_symmetrize(fld: SpectralField) -> SpectralField:
    c = 0.5 * (fld.coeffs + np.conj(_reverse_modes(fld.coeffs)))
    return SpectralField(fld.grid, c)


# ---------------------------------------------------------------------------
# transforms


def forward_transform(samples: np.ndarray, grid: GridSpec) -> SpectralField:
    """Real samples (3, N, N, N) on the centered grid -> SpectralField."""
    n = grid.resolution
    if samples.shape != (3, n, n, n):
        raise ValueError(
            f"sample shape {samples.shape} does not match grid N={n}"
        )
    c = grid.phase * np.fft.fftn(samples, axes=(1, 2, 3)) / n**3
    return SpectralField(grid, c)


def inverse_transform(fld: SpectralField) -> np.ndarray:
    """SpectralField -> real samples (3, N, N, N) on the centered grid."""
    n = fld.grid.resolution
    return np.real(
        np.fft.ifftn(fld.coeffs * fld.grid.phase, axes=(1, 2, 3)) * n**3
    )


# ---------------------------------------------------------------------------
# projectors and multipliers


def leray_project(fld: SpectralField) -> SpectralField:
    """Project onto divergence-free fields: Id - xi xi^T / |xi|^2 per mode.

    The zero mode is set to zero, so the output is always mean-free.
    """
    g = fld.grid
    inv_sq = np.zeros_like(g.xi_sq)
    np.divide(1.0, g.xi_sq, out=inv_sq, where=g.xi_sq > 0)
    dot = np.einsum("i...,i...->...", g.xi, fld.coeffs)
    out = fld.coeffs - g.xi * (dot * inv_sq)
    out[:, 0, 0, 0] = 0.0
    return SpectralField(g, out)


def divergence_max(fld: SpectralField) -> float:
    """max over modes of |xi . u_hat(xi)|."""
    dot = np.einsum("i...,i...->...", fld.grid.xi, fld.coeffs)
    return float(np.max(np.abs(dot)))


@dataclass(eq=False)
class Multiplier:
    """Scalar Fourier multiplier evaluated on a grid's lattice.

    ``requires_mean_free`` marks negative-order symbols whose value at
    xi = 0 is undefined; such multipliers refuse fields with nonzero mean.
    """

    name: str
    values: np.ndarray
    requires_mean_free: bool = False

    @classmethod
    def from_radial(
        cls,
        grid: GridSpec,
        fn,
        name: str = "radial",
        zero_value: float | None = None,
    ) -> "Multiplier":
        """Symbol fn(|xi|) on the lattice; zero_value=None excludes xi = 0."""
        r = grid.xi_abs
        vals = np.empty_like(r)
        nz = r > 0
        vals[nz] = fn(r[nz])
        vals[~nz] = 0.0 if zero_value is None else zero_value
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"multiplier {name!r} not finite on the lattice")
        return cls(name, vals, requires_mean_free=zero_value is None)

    @classmethod
    def fractional_laplacian(cls, grid: GridSpec, s: float) -> "Multiplier":
        """|xi|^(2s), the symbol of (-Laplace)^s."""
        if s > 0:
            zero: float | None = 0.0
        elif s == 0:
            zero = 1.0
        else:
            zero = None
        return cls.from_radial(grid, lambda r: r ** (2.0 * s), f"(-lap)^{s}", zero)

    @classmethod
    def gevrey(cls, grid: GridSpec, beta: float) -> "Multiplier":
        """exp(beta |xi|)."""
        return cls.from_radial(grid, lambda r: np.exp(beta * r), f"e^{beta}|xi|", 1.0)

    @classmethod
    def damped_resolvent(cls, grid: GridSpec, nu: float, alpha: float) -> "Multiplier":
        """(nu |xi|^2 + alpha)^-1; with alpha = 0 the zero mode is excluded."""
        zero = 1.0 / alpha if alpha > 0 else None
        return cls.from_radial(
            grid, lambda r: 1.0 / (nu * r**2 + alpha), "resolvent", zero
        )

    @classmethod
    def band_indicator(cls, grid: GridSpec, lo: float, hi: float) -> "Multiplier":
        """Sharp indicator of the annulus lo <= |xi| <= hi."""
        vals = ((grid.xi_abs >= lo) & (grid.xi_abs <= hi)).astype(float)
        return cls("band", vals)

    def __mul__(self, other: "Multiplier") -> "Multiplier":
        return Multiplier(
            f"{self.name}*{other.name}",
            self.values * other.values,
            self.requires_mean_free or other.requires_mean_free,
        )

    def inverse(self) -> "Multiplier":
        vals = np.zeros_like(self.values)
        nz = self.values != 0
        vals[nz] = 1.0 / self.values[nz]
        return Multiplier(f"({self.name})^-1", vals, requires_mean_free=True)


def apply_multiplier(mult: Multiplier, fld: SpectralField) -> SpectralField:
    if mult.values.shape != fld.coeffs.shape[1:]:
        raise ValueError("multiplier was built for a different grid")
    if mult.requires_mean_free:
        scale = float(np.max(np.abs(fld.coeffs))) or 1.0
        if fld.mean_mode_abs() > 1e-12 * scale:
            raise ValueError(
                f"multiplier {mult.name!r} needs a mean-free field"
            )
    return SpectralField(fld.grid, fld.coeffs * mult.values)


def band_project(
    fld: SpectralField, ell0: float, rho1: float, rho2: float
) -> SpectralField:
    """Keep modes with rho1/ell0 <= |xi| <= rho2/ell0, zero the rest."""
    if not rho1 < rho2:
        raise ValueError("need rho1 < rho2")
    lo, hi = rho1 / ell0, rho2 / ell0
    mask = (fld.grid.xi_abs >= lo) & (fld.grid.xi_abs <= hi)
    if not mask.any():
        raise EmptyBandError(
            f"no lattice mode in the annulus [{lo:.6g}, {hi:.6g}]"
        )
    return SpectralField(fld.grid, fld.coeffs * mask)


# ---------------------------------------------------------------------------
# norms


def inner_l2(a: SpectralField, b: SpectralField) -> float:
    """Real L2 pairing <a, b> = vol * sum Re(conj(a_hat) . b_hat)."""
    _check_same_grid(a, b)
    return float(
        a.grid.volume * np.sum(np.real(np.conj(a.coeffs) * b.coeffs))
    )


def norm_l2(fld: SpectralField) -> float:
    return float(
        np.sqrt(fld.grid.volume * np.sum(np.abs(fld.coeffs) ** 2))
    )


def norm_hs(fld: SpectralField, s: float) -> float:
    """Homogeneous Sobolev norm (vol * sum |xi|^(2s) |c|^2)^(1/2), mean-free."""
    g = fld.grid
    if s < 0:
        scale = float(np.max(np.abs(fld.coeffs))) or 1.0
        if fld.mean_mode_abs() > 1e-12 * scale:
            raise ValueError("negative-order Sobolev norm needs a mean-free field")
    nz = g.xi_abs > 0
    w = np.zeros_like(g.xi_abs)
    w[nz] = g.xi_abs[nz] ** (2.0 * s)
    total = np.sum(w * np.sum(np.abs(fld.coeffs) ** 2, axis=0))
    return float(np.sqrt(g.volume * total))


def norm_lp(fld: SpectralField, p) -> float:
    """L^p norm of the pointwise vector magnitude by collocation quadrature."""
    if p not in (2, 3, 4, np.inf, "inf"):
        raise ValueError(f"unsupported p: {p}")
    mag = np.sqrt(np.sum(inverse_transform(fld) ** 2, axis=0))
    if p in (np.inf, "inf"):
        return float(np.max(mag))
    return float((np.sum(mag**p) * fld.grid.cell_volume) ** (1.0 / p))


def norm_e(fld: SpectralField, ell0: float, length: float) -> float:
    """Composite norm L^(-1/2) ||.||_L2 + ell0 L^(-1/2) ||.||_H1 + ||.||_L3.

    With ell0 = length = 1 this is the plain L2 + homogeneous-H1 + L3
    combination used for the undamped stationary problem.
    """
    return (
        norm_l2(fld) / np.sqrt(length)
        + ell0 / np.sqrt(length) * norm_hs(fld, 1.0)
        + norm_lp(fld, 3)
    )


def norm_gevrey(fld: SpectralField, beta: float, s: float) -> float:
    """|| exp(beta sqrt(-lap)) . ||_{H^s}."""
    g = fld.grid
    nz = g.xi_abs > 0
    w = np.zeros_like(g.xi_abs)
    w[nz] = g.xi_abs[nz] ** (2.0 * s) * np.exp(2.0 * beta * g.xi_abs[nz])
    if s <= 0:
        w[~nz] = 0.0 if s < 0 else 1.0
    total = np.sum(w * np.sum(np.abs(fld.coeffs) ** 2, axis=0))
    return float(np.sqrt(g.volume * total))


def norm(fld: SpectralField, kind: str, **kw) -> float:
    """Dispatcher: kind in {'l2', 'hs', 'lp', 'e', 'gevrey'}."""
    if kind == "l2":
        return norm_l2(fld)
    if kind == "hs":
        return norm_hs(fld, kw["s"])
    if kind == "lp":
        return norm_lp(fld, kw["p"])
    if kind == "e":
        return norm_e(fld, kw["ell0"], kw["length"])
    if kind == "gevrey":
        return norm_gevrey(fld, kw["beta"], kw.get("s", 0.5))
    raise ValueError(f"unknown norm kind {kind!r}")


# ---------------------------------------------------------------------------
# quadratic terms


def tensor_product_hat(u: SpectralField, v: SpectralField) -> np.ndarray:
    """Dealiased coefficients of u (x) v, shape (3, 3, N, N, N)."""
    _check_same_grid(u, v)
    g = u.grid
    n = g.resolution
    pu = inverse_transform(u)
    pv = pu if v is u else inverse_transform(v)
    t_hat = np.empty((3, 3, n, n, n), dtype=np.complex128)
    for i in range(3):
        for j in range(3):
            if v is u and j < i:
                t_hat[i, j] = t_hat[j, i]
                continue
            t_hat[i, j] = g.phase * np.fft.fftn(pu[i] * pv[j]) / n**3
    total = np.sum(np.abs(t_hat) ** 2)
    t_hat *= g.dealias_mask
    if total > 0:
        clipped = 1.0 - np.sum(np.abs(t_hat) ** 2) / total
        if clipped > DEALIAS_CLIP_WARN_FRACTION:
            warnings.warn(
                f"dealiasing removed {clipped:.1%} of the quadratic product",
                RuntimeWarning,
                stacklevel=3,
            )
    return t_hat


def divergence_of_tensor(g: GridSpec, t_hat: np.ndarray) -> np.ndarray:
    """[div T]_i = i xi_j T_ij on the lattice."""
    return 1j * np.einsum("j...,ij...->i...", g.xi, t_hat)


def convection(u: SpectralField) -> SpectralField:
    """Dealiased P div(u (x) u) -- the projected nonlinear term."""
    g = u.grid
    div_hat = divergence_of_tensor(g, tensor_product_hat(u, u))
    return leray_project(SpectralField(g, div_hat))


def bilinear_B(u: SpectralField, v: SpectralField, nu: float) -> SpectralField:
    """(1/nu) P( (1/Laplace) div(u (x) v) ), dealiased.

    The building block of the stationary fixed-point maps and the
    iterated-bilinear series; output is divergence-free and mean-free.
    """
    g = u.grid
    div_hat = divergence_of_tensor(g, tensor_product_hat(u, v))
    inv_lap = np.zeros_like(g.xi_sq)
    np.divide(-1.0, g.xi_sq, out=inv_lap, where=g.xi_sq > 0)
    out = leray_project(SpectralField(g, div_hat * inv_lap))
    return SpectralField(g, out.coeffs / nu)


def dealias(fld: SpectralField) -> SpectralField:
    return SpectralField(fld.grid, fld.coeffs * fld.grid.dealias_mask)


def support_radius(fld: SpectralField, rel_floor: float = 1e-13) -> float:
    """Largest |xi| carrying a coefficient above rel_floor * peak."""
    mag = np.sqrt(np.sum(np.abs(fld.coeffs) ** 2, axis=0))
    peak = float(np.max(mag))
    if peak == 0.0:
        return 0.0
    return float(np.max(fld.grid.xi_abs[mag > rel_floor * peak]))
