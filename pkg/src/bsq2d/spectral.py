"""Fourier calculus on a doubly periodic grid.

The torus ``[0, Lx) x [0, Ly)`` stands in for the plane.  Fields are stored
as full complex Fourier coefficient arrays (``numpy.fft`` ordering, shape
``(nx, ny)``, first axis is ``x1``) because the diagonal variables of the
KdV-KdV system are complex valued even for real physical data.

Normalization: ``coeffs = fft2(u) / (nx * ny)``, so a constant field ``1`` has
a single unit coefficient at the zero mode and

    int |u|^2 dx = Lx * Ly * sum |coeffs|^2.

Zero-mode convention: symbols that are singular or undefined at ``xi = 0``
(Riesz transforms, ``|D|^s`` with ``s != 0``) take the value 0 there, so the
usual operator identities hold on zero-mean fields.

The Nyquist lines (index ``-n/2``) are their own conjugate partners; odd
symbols such as ``i xi_j`` therefore break Hermitian symmetry there.  Every
quadratic product is followed by the 2/3-rule truncation, which removes those
lines, and all Hermitian-symmetry statements are made for Nyquist-free fields.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid2D",
    "SpectralField",
    "MultiplierSymbol",
    "forward_transform",
    "inverse_transform",
    "apply_multiplier",
    "riesz",
    "partial",
    "fractional_derivative",
    "bessel_potential",
    "smooth_step",
    "cutoff_profile",
    "high_cutoff",
    "low_cutoff",
    "dealias",
    "remove_nyquist",
    "product",
    "sobolev_norm",
    "l2_norm",
    "grad",
    "div",
    "curl",
    "laplacian",
]


@dataclass(frozen=True)
class Grid2D:
    """Periodic computational box with its wavenumber lattice."""

    nx: int = 256
    ny: int = 256
    Lx: float = 32 * np.pi
    Ly: float = 32 * np.pi

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if int(n) != n or n < 8 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 8, got {n}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError("domain lengths must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dy(self) -> float:
        return self.Ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.dx

    @cached_property
    def y(self) -> np.ndarray:
        return np.arange(self.ny) * self.dy

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @cached_property
    def index(self) -> tuple[np.ndarray, np.ndarray]:
        """Signed integer mode indices in FFT ordering, broadcastable."""
        j = np.fft.fftfreq(self.nx, 1.0 / self.nx).round().astype(int)
        k = np.fft.fftfreq(self.ny, 1.0 / self.ny).round().astype(int)
        return j[:, None], k[None, :]

    @cached_property
    def kx(self) -> np.ndarray:
        j, _ = self.index
        return np.broadcast_to(2 * np.pi * j / self.Lx, self.shape).copy()

    @cached_property
    def ky(self) -> np.ndarray:
        _, k = self.index
        return np.broadcast_to(2 * np.pi * k / self.Ly, self.shape).copy()

    @cached_property
    def k2(self) -> np.ndarray:
        return self.kx**2 + self.ky**2

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        j, k = self.index
        return (3 * np.abs(j) < self.nx) & (3 * np.abs(k) < self.ny)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        j, k = self.index
        return (np.abs(j) == self.nx // 2) | (np.abs(k) == self.ny // 2)

    @cached_property
    def conjugate_index(self) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays mapping each mode to its partner at ``-xi``."""
        ix = (-np.arange(self.nx)) % self.nx
        iy = (-np.arange(self.ny)) % self.ny
        return ix[:, None], iy[None, :]

    def reflect(self, coeffs: np.ndarray) -> np.ndarray:
        """Return ``c(-xi)`` for each lattice point."""
        ix, iy = self.conjugate_index
        return coeffs[ix, iy]

    def riesz_symbol(self, j: int) -> np.ndarray:
        k = self.kx if j == 1 else self.ky
        out = np.zeros(self.shape, dtype=complex)
        nz = self.kmag > 0
        out[nz] = -1j * k[nz] / self.kmag[nz]
        return out


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a scalar field on ``grid``."""

    grid: Grid2D
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: Grid2D) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    @classmethod
    def from_physical(cls, values, grid: Grid2D) -> "SpectralField":
        return forward_transform(values, grid)

    def to_physical(self) -> np.ndarray:
        return inverse_transform(self)

    def real_part(self) -> np.ndarray:
        return self.to_physical().real

    def hermitian_defect(self) -> float:
        """Max of ``|c(-xi) - conj(c(xi))|``; zero for a real field."""
        return float(np.max(np.abs(self.grid.reflect(self.coeffs) - np.conj(self.coeffs)), initial=0.0))

    def is_real(self, tol: float = 1e-12) -> bool:
        scale = max(float(np.max(np.abs(self.coeffs), initial=0.0)), 1.0)
        return self.hermitian_defect() <= tol * scale

    def mean(self) -> complex:
        return complex(self.coeffs[0, 0])

    def with_coeffs(self, coeffs) -> "SpectralField":
        return SpectralField(self.grid, coeffs)

    def _check(self, other: "SpectralField"):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.coeffs + other.coeffs)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.coeffs - other.coeffs)
        return NotImplemented

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField):
            return NotImplemented
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return SpectralField(self.grid, self.coeffs / scalar)


@dataclass(frozen=True)
class MultiplierSymbol:
    """Fourier multiplier ``m(xi)`` with an explicit value at ``xi = 0``.

    ``func`` receives the broadcast wavenumber arrays ``(kx, ky)`` and returns
    the symbol values; whatever it produces at the zero mode is replaced by
    ``zero_value``.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    zero_value: complex = 0.0

    def evaluate(self, grid: Grid2D) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.asarray(self.func(grid.kx, grid.ky), dtype=complex)
        m = np.broadcast_to(m, grid.shape).copy()
        m[0, 0] = self.zero_value
        return m


def forward_transform(physical, grid: Grid2D) -> SpectralField:
    u = np.asarray(physical)
    if u.shape != grid.shape:
        raise ValueError(f"array shape {u.shape} does not match grid {grid.shape}")
    return SpectralField(grid, sfft.fft2(u) / (grid.nx * grid.ny))


def inverse_transform(f: SpectralField) -> np.ndarray:
    g = f.grid
    return sfft.ifft2(f.coeffs) * (g.nx * g.ny)


def apply_multiplier(f: SpectralField, m) -> SpectralField:
    """Multiply coefficients by a symbol (a MultiplierSymbol or a lattice array)."""
    values = m.evaluate(f.grid) if isinstance(m, MultiplierSymbol) else np.asarray(m)
    return SpectralField(f.grid, f.coeffs * values)


def riesz(j: int, f: SpectralField) -> SpectralField:
    """Riesz transform ``R_j`` with symbol ``-i xi_j / |xi|``."""
    if j not in (1, 2):
        raise ValueError("Riesz transform axis must be 1 or 2")
    return SpectralField(f.grid, f.coeffs * f.grid.riesz_symbol(j))


def partial(j: int, f: SpectralField) -> SpectralField:
    if j not in (1, 2):
        raise ValueError("derivative axis must be 1 or 2")
    k = f.grid.kx if j == 1 else f.grid.ky
    return SpectralField(f.grid, 1j * k * f.coeffs)


def _abs_power(grid: Grid2D, s: float) -> np.ndarray:
    if s == 0:
        return np.ones(grid.shape)
    out = np.zeros(grid.shape)
    nz = grid.kmag > 0
    out[nz] = grid.kmag[nz] ** s
    return out


def fractional_derivative(s: float, f: SpectralField) -> SpectralField:
    """``D^s = |D|^s``; the zero mode is annihilated unless ``s == 0``."""
    if s <= -2:
        raise ValueError("fractional order must exceed -2")
    return SpectralField(f.grid, f.coeffs * _abs_power(f.grid, s))


def bessel_potential(s: float, f: SpectralField) -> SpectralField:
    """``Lambda^s = (1 + |D|^2)^(s/2)``."""
    return SpectralField(f.grid, f.coeffs * (1.0 + f.grid.k2) ** (s / 2))


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, built from exp(-1/x)."""
    x = np.asarray(x, dtype=float)

    def bump(z):
        out = np.zeros_like(z)
        pos = z > 0
        out[pos] = np.exp(-1.0 / z[pos])
        return out

    a = bump(x)
    b = bump(1.0 - x)
    return a / (a + b)


def cutoff_profile(r):
    """Radial profile equal to 1 on ``[0, 1/2]`` and 0 on ``[2, inf)``."""
    return 1.0 - smooth_step((np.asarray(r, dtype=float) - 0.5) / 1.5)


def _low_symbol(grid: Grid2D, eps: float) -> np.ndarray:
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    return cutoff_profile(grid.kmag * np.sqrt(eps))


def low_cutoff(eps: float, f: SpectralField) -> SpectralField:
    """``P_{<= eps^-1/2}``: keeps frequencies below about ``eps**-0.5``."""
    return SpectralField(f.grid, f.coeffs * _low_symbol(f.grid, eps))


def high_cutoff(eps: float, f: SpectralField) -> SpectralField:
    """``P_{> eps^-1/2} = 1 - P_{<= eps^-1/2}``."""
    return SpectralField(f.grid, f.coeffs * (1.0 - _low_symbol(f.grid, eps)))


def dealias(f: SpectralField) -> SpectralField:
    """2/3 rule: zero every mode with ``|index| >= n/3`` on either axis."""
    return SpectralField(f.grid, np.where(f.grid.dealias_mask, f.coeffs, 0))


def remove_nyquist(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, np.where(f.grid.nyquist_mask, 0, f.coeffs))


def product(f: SpectralField, g: SpectralField, dealiased: bool = True) -> SpectralField:
    """Pointwise product evaluated on the grid, truncated by the 2/3 rule."""
    f._check(g)
    out = forward_transform(inverse_transform(f) * inverse_transform(g), f.grid)
    return dealias(out) if dealiased else out


def sobolev_norm(f: SpectralField, s: float = 0.0) -> float:
    w = (1.0 + f.grid.k2) ** s
    return float(np.sqrt(f.grid.area * np.sum(w * np.abs(f.coeffs) ** 2)))


def l2_norm(f: SpectralField) -> float:
    return float(np.sqrt(f.grid.area * np.sum(np.abs(f.coeffs) ** 2)))


def grad(f: SpectralField) -> tuple[SpectralField, SpectralField]:
    return partial(1, f), partial(2, f)


def div(v1: SpectralField, v2: SpectralField) -> SpectralField:
    return partial(1, v1) + partial(2, v2)


def curl(v1: SpectralField, v2: SpectralField) -> SpectralField:
    """Scalar curl ``d1 v2 - d2 v1``."""
    return partial(1, v2) - partial(2, v1)


def laplacian(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, -f.grid.k2 * f.coeffs)
