"""Change of variables between physical and diagonal KdV-KdV unknowns.

With Riesz transforms ``R_j`` (symbol ``-i xi_j/|xi|``) the linear KdV-KdV
operator is diagonalized by (at ``xi = 0`` the pair ``(iR1, iR2)`` is taken to
be ``(1, 0)``)

    w0 = iR2 v1 - iR1 v2
    w1 = (eta + iR1 v1 + iR2 v2) / 2
    w2 = (-eta + iR1 v1 + iR2 v2) / 2

with inverse ``eta = w1 - w2``, ``v1 = iR2 w0 + iR1 (w1 + w2)``,
``v2 = -iR1 w0 + iR2 (w1 + w2)``.  ``w0`` vanishes exactly when ``v`` is curl
free.  The variable ``w1`` evolves with ``exp(+i t phi)`` and ``w2`` with
``exp(-i t phi)``, ``phi = eps |xi|^3 - |xi|``.

Writing ``A = w1 - w2`` and ``B = w1 + w2`` the quadratic terms are

    I  = A |D| B + d1 A R1 B + d2 A R2 B
    II = i |D| ((R1 B)^2 + (R2 B)^2)

and projecting ``eps (div(eta v), grad|v|^2 / 2)`` onto the diagonal basis
gives

    dt w1 = -eps ( i I / 2 - II / 4)
    dt w2 = -eps (-i I / 2 - II / 4).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .spectral import (
    Grid2D,
    SpectralField,
    curl,
    div,
    forward_transform,
    inverse_transform,
    partial,
    product,
    sobolev_norm,
)

__all__ = [
    "PhysicalState",
    "DiagonalState",
    "CurlError",
    "to_diagonal",
    "from_diagonal",
    "transform_matrices",
    "nonlinearity_I",
    "nonlinearity_II",
    "rhs_diagonal",
    "physical_nonlinearity",
    "diagonal_nonlinear_coeffs",
]

W0_TOLERANCE = 1e-8


class CurlError(ValueError):
    """Raised when data required to be curl free is not."""


def _common_grid(*fields: SpectralField) -> Grid2D:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise ValueError("fields live on different grids")
    return g


@dataclass(frozen=True)
class PhysicalState:
    """``(eta, v1, v2)``: surface elevation and horizontal velocity."""

    eta: SpectralField
    v1: SpectralField
    v2: SpectralField

    def __post_init__(self):
        _common_grid(self.eta, self.v1, self.v2)

    @property
    def grid(self) -> Grid2D:
        return self.eta.grid

    @classmethod
    def zeros(cls, grid: Grid2D) -> "PhysicalState":
        z = SpectralField.zeros(grid)
        return cls(z, z, z)

    @classmethod
    def from_physical(cls, eta, v1, v2, grid: Grid2D) -> "PhysicalState":
        return cls(*(forward_transform(np.asarray(a), grid) for a in (eta, v1, v2)))

    def to_physical(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(inverse_transform(f).real for f in self.fields)

    @property
    def fields(self) -> tuple[SpectralField, SpectralField, SpectralField]:
        return (self.eta, self.v1, self.v2)

    def coeff_stack(self) -> np.ndarray:
        return np.stack([f.coeffs for f in self.fields])

    @classmethod
    def from_stack(cls, grid: Grid2D, stack: np.ndarray) -> "PhysicalState":
        return cls(*(SpectralField(grid, c) for c in stack))

    def curl_norm(self) -> float:
        return sobolev_norm(curl(self.v1, self.v2), 0.0)

    def velocity_norm(self, s: float) -> float:
        return float(np.hypot(sobolev_norm(self.v1, s), sobolev_norm(self.v2, s)))

    def is_curl_free(self, rtol: float = 1e-10) -> bool:
        return self.curl_norm() <= rtol * max(self.velocity_norm(1.0), np.finfo(float).tiny)

    def is_real(self, tol: float = 1e-12) -> bool:
        return all(f.is_real(tol) for f in self.fields)

    def hs_norm(self, s: float) -> float:
        return float(np.sqrt(sum(sobolev_norm(f, s) ** 2 for f in self.fields)))

    def __add__(self, other: "PhysicalState") -> "PhysicalState":
        return PhysicalState(*(a + b for a, b in zip(self.fields, other.fields)))

    def __sub__(self, other: "PhysicalState") -> "PhysicalState":
        return PhysicalState(*(a - b for a, b in zip(self.fields, other.fields)))

    def __mul__(self, scalar) -> "PhysicalState":
        return PhysicalState(*(f * scalar for f in self.fields))

    __rmul__ = __mul__


@dataclass(frozen=True)
class DiagonalState:
    """``(w0, w1, w2)``; complex valued even for real physical data."""

    w0: SpectralField
    w1: SpectralField
    w2: SpectralField

    def __post_init__(self):
        _common_grid(self.w0, self.w1, self.w2)

    @property
    def grid(self) -> Grid2D:
        return self.w0.grid

    @property
    def fields(self):
        return (self.w0, self.w1, self.w2)

    @classmethod
    def zeros(cls, grid: Grid2D) -> "DiagonalState":
        z = SpectralField.zeros(grid)
        return cls(z, z, z)

    def w0_ratio(self) -> float:
        """``||w0|| / ||(w1, w2)||`` in L^2 (0 when both vanish)."""
        n0 = sobolev_norm(self.w0, 0.0)
        n12 = float(np.hypot(sobolev_norm(self.w1, 0.0), sobolev_norm(self.w2, 0.0)))
        if n12 == 0.0:
            return 0.0 if n0 == 0.0 else np.inf
        return n0 / n12

    def hs_norm(self, s: float) -> float:
        """Physical ``H^s`` norm of ``P w``, computed without transforming back.

        The columns of the transform matrix are orthogonal with squared lengths
        ``(1, 2, 2)`` at every nonzero frequency.
        """
        n0, n1, n2 = (sobolev_norm(f, s) for f in self.fields)
        return float(np.sqrt(n0**2 + 2 * (n1**2 + n2**2)))


def _iriesz(grid: Grid2D):
    """Symbols of ``iR1, iR2`` with the unit direction ``(1, 0)`` at ``xi = 0``,
    so the change of variables is invertible on every mode, the mean included."""
    s1 = 1j * grid.riesz_symbol(1)
    s2 = 1j * grid.riesz_symbol(2)
    s1[0, 0], s2[0, 0] = 1.0, 0.0
    return s1, s2


def to_diagonal(u: PhysicalState) -> DiagonalState:
    g = u.grid
    s1, s2 = _iriesz(g)
    eta, v1, v2 = (f.coeffs for f in u.fields)
    longitudinal = s1 * v1 + s2 * v2
    return DiagonalState(
        SpectralField(g, s2 * v1 - s1 * v2),
        SpectralField(g, 0.5 * (eta + longitudinal)),
        SpectralField(g, 0.5 * (-eta + longitudinal)),
    )


def from_diagonal(w: DiagonalState) -> PhysicalState:
    g = w.grid
    s1, s2 = _iriesz(g)
    w0, w1, w2 = (f.coeffs for f in w.fields)
    b = w1 + w2
    return PhysicalState(
        SpectralField(g, w1 - w2),
        SpectralField(g, s2 * w0 + s1 * b),
        SpectralField(g, -s1 * w0 + s2 * b),
    )


def transform_matrices(grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode 3x3 symbols of ``P`` and ``P^{-1}``, shape ``(nx, ny, 3, 3)``."""
    s1, s2 = _iriesz(grid)
    one = np.ones(grid.shape, dtype=complex)
    zero = np.zeros(grid.shape, dtype=complex)
    p = np.stack(
        [
            np.stack([zero, one, -one], -1),
            np.stack([s2, s1, s1], -1),
            np.stack([-s1, s2, s2], -1),
        ],
        -2,
    )
    pinv = np.stack(
        [
            np.stack([zero, s2, -s1], -1),
            np.stack([0.5 * one, 0.5 * s1, 0.5 * s2], -1),
            np.stack([-0.5 * one, 0.5 * s1, 0.5 * s2], -1),
        ],
        -2,
    )
    return p, pinv


class _Kernel:
    """Array-level evaluation of I and II shared by the public API and solvers."""

    def __init__(self, grid: Grid2D, dealiased: bool = True):
        self.grid = grid
        self.r1 = grid.riesz_symbol(1)
        self.r2 = grid.riesz_symbol(2)
        self.ik1 = 1j * grid.kx
        self.ik2 = 1j * grid.ky
        self.kmag = grid.kmag
        self.mask = grid.dealias_mask if dealiased else np.ones(grid.shape, dtype=bool)
        self.scale = grid.nx * grid.ny

    def _phys(self, c):
        return sfft.ifft2(c) * self.scale

    def _spec(self, u):
        return np.where(self.mask, sfft.fft2(u) / self.scale, 0)

    def terms(self, w1: np.ndarray, w2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a = w1 - w2
        b = w1 + w2
        r1b = self._phys(self.r1 * b)
        r2b = self._phys(self.r2 * b)
        term_i = self._spec(
            self._phys(a) * self._phys(self.kmag * b)
            + self._phys(self.ik1 * a) * r1b
            + self._phys(self.ik2 * a) * r2b
        )
        sq = self._spec(r1b * r1b + r2b * r2b)
        term_ii = 1j * self.kmag * sq
        return term_i, term_ii

    def terms_real(self, w1: np.ndarray, w2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Same as ``terms`` for diagonal data of a real, Nyquist-free state.

        Then ``a = w1 - w2`` is real and ``w1 + w2 = i b`` with ``b`` real, so
        real fields are packed pairwise into complex transforms (four FFTs
        instead of eight).  ``I = i p`` and ``II = -i |D| q`` with real ``p``
        and ``q``.
        """
        p_hat, q_hat = self._packed(w1, w2)
        return 1j * np.where(self.mask, p_hat, 0), -1j * self.kmag * np.where(self.mask, q_hat, 0)

    @cached_property
    def _pack_symbols(self):
        k = self.kmag
        nz = k > 0
        safe = np.where(nz, k, 1.0)
        return (
            1.0 - self.grid.kx,
            1j * self.grid.ky,
            np.where(nz, -(self.grid.kx + 1j * self.grid.ky) / safe, 0),
        )

    def _packed(self, w1, w2):
        s_a, s_2, s_r = self._pack_symbols
        a = w1 - w2
        bi = w1 + w2
        n = self.scale
        z1 = sfft.ifft2(s_a * a, overwrite_x=True) * n  # a + i d1 a
        z2 = sfft.ifft2(s_2 * a + self.kmag * bi, overwrite_x=True) * n  # d2 a + i |D| b
        z3 = sfft.ifft2(s_r * bi, overwrite_x=True) * n  # R1 b + i R2 b
        r1, r2 = z3.real, z3.imag
        p = z1.real * z2.imag + z1.imag * r1 + z2.real * r2
        q = r1 * r1 + r2 * r2
        x = sfft.fft2(p + 1j * q, overwrite_x=True) / n
        xr = np.conj(self.grid.reflect(x))
        return 0.5 * (x + xr), -0.5j * (x - xr)

    def _rhs_real(self, w1, w2, eps):
        p_hat, q_hat = self._packed(w1, w2)
        x1 = (0.5 * eps) * p_hat
        x2 = (0.25j * eps) * self.kmag * q_hat
        d1 = np.where(self.mask, x1 - x2, 0)
        d2 = np.where(self.mask, -x1 - x2, 0)
        d1[0, 0] = 0.0
        d2[0, 0] = 0.0
        return d1, d2

    def rhs(self, w1: np.ndarray, w2: np.ndarray, eps: float, real: bool = False) -> tuple[np.ndarray, np.ndarray]:
        if real:
            return self._rhs_real(w1, w2, eps)
        term_i, term_ii = self.terms(w1, w2)
        half_i = 0.5j * term_i
        quarter_ii = 0.25 * term_ii
        d1 = -eps * (half_i - quarter_ii)
        d2 = -eps * (-half_i - quarter_ii)
        d1[0, 0] = 0.0
        d2[0, 0] = 0.0
        return d1, d2


def diagonal_nonlinear_coeffs(grid: Grid2D, dealiased: bool = True) -> _Kernel:
    """Reusable evaluator of the diagonal nonlinearity on raw coefficient arrays."""
    return _Kernel(grid, dealiased)


def nonlinearity_I(w1: SpectralField, w2: SpectralField) -> SpectralField:
    g = _common_grid(w1, w2)
    return SpectralField(g, _Kernel(g).terms(w1.coeffs, w2.coeffs)[0])


def nonlinearity_II(w1: SpectralField, w2: SpectralField) -> SpectralField:
    g = _common_grid(w1, w2)
    k = _Kernel(g)
    b = w1.coeffs + w2.coeffs
    r1b = k._phys(k.r1 * b)
    r2b = k._phys(k.r2 * b)
    return SpectralField(g, 1j * k.kmag * k._spec(r1b * r1b + r2b * r2b))


def rhs_diagonal(w: DiagonalState, epsilon: float) -> DiagonalState:
    """Nonlinear part of ``dt w``; the linear phases belong to the propagator."""
    ratio = w.w0_ratio()
    if ratio > W0_TOLERANCE:
        raise CurlError(f"w0 is not negligible (relative size {ratio:.3e}); data must be curl free")
    g = w.grid
    d1, d2 = _Kernel(g).rhs(w.w1.coeffs, w.w2.coeffs, epsilon)
    return DiagonalState(SpectralField.zeros(g), SpectralField(g, d1), SpectralField(g, d2))


def physical_nonlinearity(u: PhysicalState, epsilon: float) -> PhysicalState:
    """``-eps (div(eta v), grad(|v|^2)/2)`` with dealiased products."""
    eta, v1, v2 = u.fields
    flux1 = product(eta, v1)
    flux2 = product(eta, v2)
    energy = product(v1, v1) + product(v2, v2)
    return PhysicalState(
        div(flux1, flux2) * (-epsilon),
        partial(1, energy) * (-0.5 * epsilon),
        partial(2, energy) * (-0.5 * epsilon),
    )
