"""Named families of initial data for the Boussinesq solvers.

Surface elevations come from a Gaussian, a single Fourier mode or a random
band-limited field.  Velocities are curl free by construction: zero, the
gradient of a Gaussian potential, or the unidirectional choice
``v = grad phi`` with ``d phi / d x1 = eta`` (minus its ``x1`` mean), which
gives ``v = (eta, 0)`` for data independent of ``x2``.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .diagonal import PhysicalState
from .spectral import Grid2D, SpectralField, forward_transform, partial

__all__ = [
    "GENERATOR",
    "gaussian_field",
    "single_mode_field",
    "random_bandlimited_field",
    "potential_velocity",
    "unidirectional_velocity",
    "make_state",
]

# Counter-based bit generator used for every random field.
GENERATOR = "numpy.random.Philox"


def _center(grid: Grid2D, center: Optional[Sequence[float]]) -> tuple[float, float]:
    if center is None:
        return grid.Lx / 2, grid.Ly / 2
    return float(center[0]), float(center[1])


def gaussian_field(
    grid: Grid2D,
    amplitude: float,
    width: float,
    center: Optional[Sequence[float]] = None,
    width_y: Optional[float] = None,
) -> SpectralField:
    """``A exp(-(x1 - c1)^2 / w^2 - (x2 - c2)^2 / w_y^2)`` with ``w_y = w`` by
    default; ``w_y = inf`` gives a field independent of ``x2``.

    The distance to the centre is taken periodically so the field is smooth
    on the torus.
    """
    if width <= 0 or (width_y is not None and width_y <= 0):
        raise ValueError("widths must be positive")
    cx, cy = _center(grid, center)
    x, y = grid.mesh
    dx = (x - cx + grid.Lx / 2) % grid.Lx - grid.Lx / 2
    dy = (y - cy + grid.Ly / 2) % grid.Ly - grid.Ly / 2
    wy = width if width_y is None else width_y
    ey = 0.0 if math.isinf(wy) else dy**2 / wy**2
    return forward_transform(amplitude * np.exp(-(dx**2) / width**2 - ey), grid)


def single_mode_field(grid: Grid2D, index: Sequence[int], amplitude: float) -> SpectralField:
    """``A cos(k . x)`` for the lattice wavenumber with integer ``index``."""
    m, n = int(index[0]), int(index[1])
    if abs(m) >= grid.nx // 2 or abs(n) >= grid.ny // 2:
        raise ValueError("mode index must lie strictly inside the Nyquist band")
    c = np.zeros(grid.shape, dtype=complex)
    c[m % grid.nx, n % grid.ny] += amplitude / 2
    c[-m % grid.nx, -n % grid.ny] += amplitude / 2
    return SpectralField(grid, c)


def random_bandlimited_field(grid: Grid2D, seed: int, band: float, amplitude: float) -> SpectralField:
    """Real field with independent Gaussian coefficients on ``0 < |xi| <= band``,
    scaled so its maximum modulus equals ``amplitude``."""
    if band <= 0:
        raise ValueError("band must be positive")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    raw = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    keep = (grid.kmag <= band) & (grid.kmag > 0) & ~grid.nyquist_mask
    f = SpectralField(grid, np.where(keep, raw, 0))
    u = f.to_physical().real
    top = np.abs(u).max()
    if top == 0:
        raise ValueError("band contains no lattice modes")
    return forward_transform(u * (amplitude / top), grid)


def potential_velocity(phi: SpectralField) -> tuple[SpectralField, SpectralField]:
    """``v = grad phi``."""
    return partial(1, phi), partial(2, phi)


def unidirectional_velocity(eta: SpectralField) -> tuple[SpectralField, SpectralField]:
    """Curl-free ``v = grad phi`` with ``phi_hat = eta_hat / (i xi_1)`` off ``xi_1 = 0``."""
    g = eta.grid
    kx = g.kx
    safe = np.where(kx != 0, kx, 1.0)
    phi = SpectralField(g, np.where(kx != 0, eta.coeffs / (1j * safe), 0))
    return potential_velocity(phi)


def make_state(eta: SpectralField, velocity: str = "zero", phi: Optional[SpectralField] = None) -> PhysicalState:
    """Assemble ``(eta, v)`` with ``velocity`` one of ``zero``, ``potential``
    (requires ``phi``) or ``unidirectional``."""
    g = eta.grid
    if velocity == "zero":
        v1, v2 = SpectralField.zeros(g), SpectralField.zeros(g)
    elif velocity == "potential":
        if phi is None:
            raise ValueError("potential velocity needs a potential")
        v1, v2 = potential_velocity(phi)
    elif velocity == "unidirectional":
        v1, v2 = unidirectional_velocity(eta)
    else:
        raise ValueError(f"unknown velocity kind {velocity!r}")
    return PhysicalState(eta, v1, v2)
