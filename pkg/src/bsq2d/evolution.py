"""Time integration for the KdV-KdV and abcd Boussinesq systems.

Every solver factors the linear part exactly.  The integrating-factor RK4
(Lawson) step reads, with ``E(h)`` the linear flow,

    k1 = N(y)
    k2 = N(E(h/2)(y + h/2 k1))
    k3 = N(E(h/2) y + h/2 k2)
    k4 = N(E(h) y + h E(h/2) k3)
    y+ = E(h) y + h/6 (E(h) k1 + 2 E(h/2)(k2 + k3) + k4)

and the Strang alternative is ``E(h/2) o RK4_N(h) o E(h/2)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft

from .diagonal import (
    CurlError,
    DiagonalState,
    PhysicalState,
    W0_TOLERANCE,
    diagonal_nonlinear_coeffs,
    from_diagonal,
    to_diagonal,
)
from .models import ABCDParams, ModelClass, classify, hamiltonian, validate
from .spectral import Grid2D, SpectralField, sobolev_norm

__all__ = [
    "Scheme",
    "SolverConfig",
    "Trajectory",
    "BlowUpError",
    "LinearPropagator",
    "phase",
    "apply_group",
    "step_kdvkdv_diagonal",
    "simulate_kdvkdv",
    "simulate_physical",
    "simulate_schrodinger_b0",
    "simulate_schrodinger_d0_curlfree",
    "energy_functional",
    "Grid1D",
    "simulate_1d",
    "couple_1d",
    "decouple_1d",
]


class Scheme(str, enum.Enum):
    IFRK4 = "IFRK4"
    STRANG = "StrangSplit"


@dataclass(frozen=True)
class SolverConfig:
    """Time stepping controls.

    ``t_end / dt`` is rounded to an integer number of steps and the step is
    adjusted so the run lands exactly on ``t_end``.  ``stop_factor`` ends a
    run early once the ``H^s`` norm reaches that multiple of its initial value.
    """

    dt: float
    t_end: float
    scheme: Scheme = Scheme.IFRK4
    dealias: bool = True
    diagnostics_stride: int = 1
    snapshot_stride: int = 0
    nonlinear: bool = True
    sobolev_s: float = 2.0
    blowup_factor: float = 1e3
    stop_factor: Optional[float] = None

    def __post_init__(self):
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be positive")
        if self.diagnostics_stride < 1:
            raise ValueError("diagnostics_stride must be >= 1")
        if self.snapshot_stride < 0:
            raise ValueError("snapshot_stride must be >= 0")
        object.__setattr__(self, "scheme", Scheme(self.scheme))

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))

    @property
    def step(self) -> float:
        return self.t_end / self.n_steps

    @staticmethod
    def default_dt(grid: Grid2D) -> float:
        return 1e-3 * grid.dx


class BlowUpError(RuntimeError):
    """Non-finite values or runaway growth; ``time`` is the last valid time."""

    def __init__(self, time: float, trajectory: "Trajectory"):
        super().__init__(f"numerical blow-up after t = {time:.6g}")
        self.time = time
        self.trajectory = trajectory


@dataclass
class Trajectory:
    times: np.ndarray
    diagnostics: dict[str, np.ndarray]
    snapshot_times: list[float]
    snapshots: list
    status: str
    doubling_time: Optional[float]
    initial_norm: float
    max_norm_ratio: float
    final_time: float
    final_state: object
    flags: list[str] = field(default_factory=list)

    @property
    def censored(self) -> bool:
        return self.doubling_time is None

    def column(self, name: str) -> np.ndarray:
        return self.diagnostics[name]


def phase(grid, epsilon: float) -> np.ndarray:
    """``phi_eps(xi) = eps |xi|^3 - |xi|`` on the lattice."""
    k = grid.kmag
    return epsilon * k**3 - k


class LinearPropagator:
    """``U^{sign}(t) = exp(sign * i t phi_eps(D))`` with cached phase tables."""

    def __init__(self, grid: Grid2D, epsilon: float, sign: int = 1):
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        self.grid = grid
        self.epsilon = epsilon
        self.sign = sign
        self.phi = phase(grid, epsilon)
        self._tables: dict[float, np.ndarray] = {}

    def table(self, t: float) -> np.ndarray:
        tab = self._tables.get(t)
        if tab is None:
            tab = np.exp(self.sign * 1j * t * self.phi)
            self._tables[t] = tab
        return tab

    def apply(self, f: SpectralField, t: float) -> SpectralField:
        return SpectralField(f.grid, f.coeffs * self.table(t))


def apply_group(epsilon: float, sign: int, t: float, f: SpectralField) -> SpectralField:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return SpectralField(f.grid, f.coeffs * np.exp(sign * 1j * t * phase(f.grid, epsilon)))


# --- generic stepping -------------------------------------------------------


class _DiagonalFlow:
    """Phases ``exp(+-i h phi)`` acting on the stack ``(w1, w2)``."""

    def __init__(self, grid, epsilon, h):
        phi = phase(grid, epsilon)
        self.half_tab = np.stack([np.exp(0.5j * h * phi), np.exp(-0.5j * h * phi)])
        self.full_tab = np.stack([np.exp(1j * h * phi), np.exp(-1j * h * phi)])

    def half(self, y):
        return self.half_tab * y

    def full(self, y):
        return self.full_tab * y


def _ifrk4(y, h, flow, nl):
    k1 = nl(y)
    k2 = nl(flow.half(y + 0.5 * h * k1))
    yh = flow.half(y)
    k3 = nl(yh + 0.5 * h * k2)
    ey = flow.full(y)
    k4 = nl(ey + h * flow.half(k3))
    return ey + (h / 6.0) * (flow.full(k1) + 2.0 * flow.half(k2 + k3) + k4)


def _strang(y, h, flow, nl):
    y = flow.half(y)
    k1 = nl(y)
    k2 = nl(y + 0.5 * h * k1)
    k3 = nl(y + 0.5 * h * k2)
    k4 = nl(y + h * k3)
    y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return flow.half(y)


def _stepper(cfg: SolverConfig, flow, nl):
    h = cfg.step
    if not cfg.nonlinear:
        return flow.full
    if cfg.scheme is Scheme.IFRK4:
        return lambda y: _ifrk4(y, h, flow, nl)
    return lambda y: _strang(y, h, flow, nl)


def _integrate(
    y0: np.ndarray,
    cfg: SolverConfig,
    step: Callable,
    norm: Callable[[np.ndarray], float],
    diagnose: Callable[[np.ndarray], dict],
    snapshot: Callable[[np.ndarray], object],
) -> Trajectory:
    h = cfg.step
    n = cfg.n_steps
    n0 = norm(y0)
    times = [0.0]
    rows = [diagnose(y0)]
    snap_t = [0.0]
    snaps = [snapshot(y0)]
    status = "completed"
    doubling = None
    max_ratio = 1.0
    prev_norm = n0
    y = y0
    t = 0.0

    def build(state_y, t_last, stat):
        keys = rows[0].keys()
        diag = {key: np.array([r[key] for r in rows]) for key in keys}
        return Trajectory(
            np.array(times), diag, snap_t, snaps, stat, doubling, n0, max_ratio, t_last, snapshot(state_y)
        )

    for i in range(1, n + 1):
        y_new = step(y)
        t_new = i * h
        nrm = norm(y_new)
        if not np.isfinite(nrm) or (n0 > 0 and nrm > cfg.blowup_factor * n0):
            raise BlowUpError(t, build(y, t, "blowup"))
        if n0 > 0:
            ratio = nrm / n0
            max_ratio = max(max_ratio, ratio)
            if doubling is None and ratio >= 2.0:
                r_prev = prev_norm / n0
                frac = (2.0 - r_prev) / (ratio - r_prev) if ratio > r_prev else 1.0
                doubling = t + frac * h
        y, t, prev_norm = y_new, t_new, nrm
        stop = cfg.stop_factor is not None and n0 > 0 and nrm >= cfg.stop_factor * n0
        if i % cfg.diagnostics_stride == 0 or i == n or stop:
            times.append(t)
            rows.append(diagnose(y))
        if (cfg.snapshot_stride and i % cfg.snapshot_stride == 0) or i == n or stop:
            if snap_t[-1] != t:
                snap_t.append(t)
                snaps.append(snapshot(y))
        if stop:
            status = "stopped"
            break
    return build(y, t, status)


def _norm_weights(grid, s):
    return grid.area * (1.0 + grid.k2) ** s


# --- KdV-KdV through the diagonal variables --------------------------------


def _diagonal_diagnostics(grid, epsilon, s, w0):
    kernel_w0 = sobolev_norm(w0, 0.0)

    def diagnose(y):
        u = from_diagonal(DiagonalState(w0, SpectralField(grid, y[0]), SpectralField(grid, y[1])))
        return _physical_row(u, epsilon, s, hamiltonian(u, epsilon), np.nan, kernel_w0)

    return diagnose


def _physical_row(u: PhysicalState, epsilon, s, energy, y_value, w0_norm=None):
    if w0_norm is None:
        g = u.grid
        w0c = 1j * g.riesz_symbol(2) * u.v1.coeffs - 1j * g.riesz_symbol(1) * u.v2.coeffs
        w0_norm = float(np.sqrt(g.area * np.sum(np.abs(w0c) ** 2)))
    imag = max(float(np.max(np.abs(f.to_physical().imag))) for f in u.fields)
    return {
        "H": energy,
        "eta_Hs": sobolev_norm(u.eta, s),
        "v_Hs": u.velocity_norm(s),
        "curl": u.curl_norm(),
        "w0": w0_norm,
        "Y": y_value,
        "imag": imag,
    }


def _project(u: PhysicalState, dealias: bool) -> PhysicalState:
    """Remove the zero mode (and the top third of modes when dealiasing)."""
    g = u.grid
    keep = g.dealias_mask.copy() if dealias else ~g.nyquist_mask
    keep[0, 0] = False
    return PhysicalState(*(SpectralField(g, np.where(keep, f.coeffs, 0)) for f in u.fields))


def step_kdvkdv_diagonal(w: DiagonalState, epsilon: float, cfg: SolverConfig) -> DiagonalState:
    """Advance ``(w1, w2)`` by one step of size ``cfg.step``."""
    if w.w0_ratio() > W0_TOLERANCE:
        raise CurlError("w0 must be negligible for the diagonal KdV-KdV stepper")
    g = w.grid
    flow = _DiagonalFlow(g, epsilon, cfg.step)
    kernel = diagonal_nonlinear_coeffs(g, cfg.dealias)

    def nl(y):
        return np.stack(kernel.rhs(y[0], y[1], epsilon, real=real))

    real = from_diagonal(w).is_real(1e-10)
    y = _stepper(cfg, flow, nl)(np.stack([w.w1.coeffs, w.w2.coeffs]))
    return DiagonalState(w.w0, SpectralField(g, y[0]), SpectralField(g, y[1]))


def simulate_kdvkdv(u0: PhysicalState, epsilon: float, cfg: SolverConfig) -> Trajectory:
    """Scaled KdV-KdV system (a = c = 1, b = d = 0) via the diagonal variables.

    Initial data are projected onto zero-mean fields (and onto the 2/3 band
    when dealiasing); the velocity must be curl free.
    """
    if not (0 < epsilon <= 1):
        raise ValueError("epsilon must lie in (0, 1]")
    u0 = _project(u0, cfg.dealias)
    if not u0.is_real(1e-10):
        raise ValueError("initial state must be real valued")
    w = to_diagonal(u0)
    if w.w0_ratio() > W0_TOLERANCE:
        raise CurlError(f"initial velocity is not curl free (|w0|/|w| = {w.w0_ratio():.3e})")
    g = u0.grid
    flow = _DiagonalFlow(g, epsilon, cfg.step)
    kernel = diagonal_nonlinear_coeffs(g, cfg.dealias)
    weights = 2.0 * _norm_weights(g, cfg.sobolev_s)

    def nl(y):
        return np.stack(kernel.rhs(y[0], y[1], epsilon, real=True))

    def norm(y):
        return float(np.sqrt(np.sum(weights * (y.real**2 + y.imag**2))))

    def snapshot(y):
        return from_diagonal(DiagonalState(w.w0, SpectralField(g, y[0]), SpectralField(g, y[1])))

    diagnose = _diagonal_diagnostics(g, epsilon, cfg.sobolev_s, w.w0)
    y0 = np.stack([w.w1.coeffs, w.w2.coeffs])
    return _integrate(y0, cfg, _stepper(cfg, flow, nl), norm, diagnose, snapshot)


# --- abcd systems in physical variables ------------------------------------


def energy_functional(u: PhysicalState, params: ABCDParams, s: float = 2.0) -> float:
    """Functional ``Y`` controlling the Schrodinger-type systems.

    For ``a == c``: ``|eta|^2 + |v|^2 + eps |v|^2_{H^{s+1}}`` when ``b = 0`` and
    ``|eta|^2 + |v|^2 + eps b |grad eta|^2`` when ``d = 0`` (all ``H^s``).
    Otherwise the quadratic form with symbols ``(1 - eps c k^2)(1 + eps b k^2)``
    on ``eta`` and ``(1 - eps a k^2)(1 + eps d k^2)`` on ``v``, which expands to
    ``|eta|^2 - c eps |grad eta|^2 + |v|^2 + (d - a) eps |grad v|^2
    - a d eps^2 |lap v|^2`` for ``b = 0``.
    """
    g = u.grid
    e = params.epsilon
    k2 = g.k2
    w = _norm_weights(g, s)
    eta2 = np.abs(u.eta.coeffs) ** 2
    v2 = np.abs(u.v1.coeffs) ** 2 + np.abs(u.v2.coeffs) ** 2
    if params.a == params.c and params.b == 0:
        sym_eta = 1.0
        sym_v = 1.0 + e * (1.0 + k2)
    elif params.a == params.c and params.d == 0:
        sym_eta = 1.0 + e * params.b * k2
        sym_v = 1.0
    else:
        sym_eta = (1 - e * params.c * k2) * (1 + e * params.b * k2)
        sym_v = (1 - e * params.a * k2) * (1 + e * params.d * k2)
    return float(np.sum(w * (sym_eta * eta2 + sym_v * v2)))


class _ABCDFlow:
    """Exact linear flow of the abcd system, split into longitudinal and
    transverse velocity.  On the longitudinal pair ``(eta, xi_hat . v)`` the
    generator is ``-M``, ``M = [[0, i alpha k], [i beta k, 0]]`` with
    ``M^2 = -omega^2``, so ``exp(-hM) = cos(omega h) - sin(omega h)/omega M``.
    """

    def __init__(self, grid: Grid2D, params: ABCDParams, h: float):
        e = params.epsilon
        k = grid.kmag
        k2 = grid.k2
        nz = k > 0
        self.n1 = np.where(nz, grid.kx / np.where(nz, k, 1), 0.0)
        self.n2 = np.where(nz, grid.ky / np.where(nz, k, 1), 0.0)
        alpha = (1 - e * params.a * k2) / (1 + e * params.b * k2)
        beta = (1 - e * params.c * k2) / (1 + e * params.d * k2)
        prod = alpha * beta
        if np.any(prod < 0):
            raise ValueError("linearly ill-posed parameters")
        omega = k * np.sqrt(prod)
        self.ak = 1j * alpha * k
        self.bk = 1j * beta * k
        self.tables = {}
        for name, tau in (("half", 0.5 * h), ("full", h)):
            self.tables[name] = (np.cos(omega * tau), tau * np.sinc(omega * tau / np.pi))

    def _apply(self, y, name):
        c, s = self.tables[name]
        eta, v1, v2 = y
        vl = self.n1 * v1 + self.n2 * v2
        eta_new = c * eta - s * self.ak * vl
        dvl = -s * self.bk * eta + (c - 1.0) * vl
        return np.stack([eta_new, v1 + self.n1 * dvl, v2 + self.n2 * dvl])

    def half(self, y):
        return self._apply(y, "half")

    def full(self, y):
        return self._apply(y, "full")


class _ABCDNonlinear:
    def __init__(self, grid: Grid2D, params: ABCDParams, dealias: bool):
        e = params.epsilon
        self.ik1 = 1j * grid.kx
        self.ik2 = 1j * grid.ky
        self.inv_b = -e / (1 + e * params.b * grid.k2)
        self.inv_d = -0.5 * e / (1 + e * params.d * grid.k2)
        self.mask = grid.dealias_mask if dealias else np.ones(grid.shape, dtype=bool)
        self.scale = grid.nx * grid.ny

    def __call__(self, y):
        eta, v1, v2 = (sfft.ifft2(c) * self.scale for c in y)
        f1 = np.where(self.mask, sfft.fft2(eta * v1) / self.scale, 0)
        f2 = np.where(self.mask, sfft.fft2(eta * v2) / self.scale, 0)
        q = np.where(self.mask, sfft.fft2(v1 * v1 + v2 * v2) / self.scale, 0)
        return np.stack(
            [
                self.inv_b * (self.ik1 * f1 + self.ik2 * f2),
                self.inv_d * self.ik1 * q,
                self.inv_d * self.ik2 * q,
            ]
        )


def simulate_physical(
    u0: PhysicalState,
    params: ABCDParams,
    cfg: SolverConfig,
    curl_free: bool = False,
    curl_tolerance: float = 1e-6,
) -> Trajectory:
    """Method of lines for the abcd system in ``(eta, v1, v2)``.

    ``(1 - eps b Lap)`` and ``(1 - eps d Lap)`` are inverted spectrally.  With
    ``curl_free`` set, a sample whose curl exceeds ``curl_tolerance |v|_{H^1}``
    adds an ``invariant breach`` flag; the run continues.
    """
    report = validate(params)
    if not report.ok:
        raise ValueError("; ".join(report.errors))
    g = u0.grid
    u0 = _project(u0, cfg.dealias)
    flow = _ABCDFlow(g, params, cfg.step)
    nl = _ABCDNonlinear(g, params, cfg.dealias)
    weights = _norm_weights(g, cfg.sobolev_s)
    s = cfg.sobolev_s
    kdv = classify(params) is ModelClass.KDV_KDV and params.a == 1 and params.c == 1
    flags: list[str] = []

    def norm(y):
        return float(np.sqrt(np.sum(weights * (y.real**2 + y.imag**2))))

    def snapshot(y):
        return PhysicalState.from_stack(g, y)

    def diagnose(y):
        u = snapshot(y)
        energy = hamiltonian(u, params.epsilon) if kdv else np.nan
        row = _physical_row(u, params.epsilon, s, energy, energy_functional(u, params, s))
        if curl_free and row["curl"] > curl_tolerance * max(u.velocity_norm(1.0), 1e-300):
            flags.append("invariant breach")
        return row

    traj = _integrate(u0.coeff_stack(), cfg, _stepper(cfg, flow, nl), norm, diagnose, snapshot)
    traj.flags.extend(dict.fromkeys(flags))
    return traj


def simulate_schrodinger_b0(state0: PhysicalState, params: ABCDParams, cfg: SolverConfig) -> Trajectory:
    if classify(params) is not ModelClass.SCHRODINGER_B0:
        raise ValueError(f"parameters are not of class SchrodingerB0: {params}")
    return simulate_physical(state0, params, cfg)


def simulate_schrodinger_d0_curlfree(state0: PhysicalState, params: ABCDParams, cfg: SolverConfig) -> Trajectory:
    if classify(params) is not ModelClass.SCHRODINGER_D0:
        raise ValueError(f"parameters are not of class SchrodingerD0: {params}")
    if not state0.is_curl_free(1e-6):
        raise CurlError("initial velocity must be curl free")
    return simulate_physical(state0, params, cfg, curl_free=True)


# --- one-dimensional systems ------------------------------------------------


@dataclass(frozen=True)
class Grid1D:
    n: int = 256
    L: float = 32 * np.pi

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError("n must be an even integer >= 8")

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.L / self.n

    @cached_property
    def index(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, 1.0 / self.n).round().astype(int)

    @cached_property
    def k(self) -> np.ndarray:
        return 2 * np.pi * self.index / self.L

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return 3 * np.abs(self.index) < self.n


def couple_1d(u, w):
    """``(u, w) -> (eta, v) = (u + w, u - w)``."""
    return u + w, u - w


def decouple_1d(eta, v):
    return 0.5 * (eta + v), 0.5 * (eta - v)


class _Coupled1DFlow:
    def __init__(self, grid: Grid1D, epsilon: float, h: float):
        omega = grid.k * (1 - epsilon * grid.k**2)
        self.tables = {name: (np.cos(omega * tau), -1j * np.sin(omega * tau)) for name, tau in (("half", h / 2), ("full", h))}

    def _apply(self, y, name):
        c, s = self.tables[name]
        return np.stack([c * y[0] + s * y[1], s * y[0] + c * y[1]])

    def half(self, y):
        return self._apply(y, "half")

    def full(self, y):
        return self._apply(y, "full")


class _Diagonal1DFlow:
    def __init__(self, grid: Grid1D, epsilon: float, h: float):
        omega = grid.k * (1 - epsilon * grid.k**2)
        self.half_tab = np.stack([np.exp(-0.5j * h * omega), np.exp(0.5j * h * omega)])
        self.full_tab = np.stack([np.exp(-1j * h * omega), np.exp(1j * h * omega)])

    def half(self, y):
        return self.half_tab * y

    def full(self, y):
        return self.full_tab * y


def _nonlinear_1d(grid: Grid1D, epsilon: float, system: str, dealias: bool):
    ik = 1j * grid.k
    mask = grid.dealias_mask if dealias else np.ones(grid.n, dtype=bool)

    def spec(u):
        return np.where(mask, np.fft.fft(u) / grid.n, 0)

    def nl(y):
        p, q = (np.fft.ifft(c) * grid.n for c in y)
        if system == "coupled":
            return np.stack([-epsilon * ik * spec(p * q), -0.5 * epsilon * ik * spec(q * q)])
        return np.stack(
            [
                -0.25 * epsilon * ik * spec(3 * p * p - 2 * p * q - q * q),
                -0.25 * epsilon * ik * spec(p * p + 2 * p * q - 3 * q * q),
            ]
        )

    return nl


def simulate_1d(system: str, data, epsilon: float, cfg: SolverConfig, grid: Grid1D) -> Trajectory:
    """Evolve the 1D coupled system ``(eta, v)`` or its diagonal form ``(u, w)``.

    ``data`` is a pair of real arrays on ``grid``; snapshots are returned as
    ``(2, n)`` real arrays in the same variables.
    """
    if system not in ("coupled", "diagonal"):
        raise ValueError("system must be 'coupled' or 'diagonal'")
    y0 = np.stack([np.fft.fft(np.asarray(a, dtype=float)) / grid.n for a in data])
    if y0.shape != (2, grid.n):
        raise ValueError("data must be two arrays matching the grid")
    flow = (_Coupled1DFlow if system == "coupled" else _Diagonal1DFlow)(grid, epsilon, cfg.step)
    nl = _nonlinear_1d(grid, epsilon, system, cfg.dealias)
    weights = grid.L * (1 + grid.k**2) ** cfg.sobolev_s

    def norm(y):
        return float(np.sqrt(np.sum(weights * np.abs(y) ** 2)))

    def snapshot(y):
        return (np.fft.ifft(y, axis=-1) * grid.n).real

    def diagnose(y):
        return {"Hs": norm(y)}

    return _integrate(y0, cfg, _stepper(cfg, flow, nl), norm, diagnose, snapshot)
