"""The abcd parameter family: validity, classification, dispersion, energy."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .spectral import dealias, forward_transform, inverse_transform

__all__ = [
    "ABCDParams",
    "ModelClass",
    "ValidationReport",
    "DispersionInfo",
    "DispersionDomainError",
    "validate",
    "classify",
    "eigenvalues",
    "growth_order",
    "dispersion",
    "with_surface_tension",
    "hamiltonian",
    "KDV_KDV",
]

CONSTRAINT_SUM = 1.0 / 3.0


@dataclass(frozen=True)
class ABCDParams:
    a: float
    b: float
    c: float
    d: float
    epsilon: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1.0):
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")

    @classmethod
    def kdv_kdv(cls, epsilon: float = 1.0, scaled: bool = True) -> "ABCDParams":
        """b = d = 0 and a = c, either 1/6 or rescaled to 1."""
        ac = 1.0 if scaled else 1.0 / 6.0
        return cls(ac, 0.0, ac, 0.0, epsilon)

    def with_epsilon(self, epsilon: float) -> "ABCDParams":
        return replace(self, epsilon=epsilon)


KDV_KDV = ABCDParams.kdv_kdv()


class ModelClass(enum.Enum):
    KDV_KDV = "KdVKdV"
    SCHRODINGER_B0 = "SchrodingerB0"
    SCHRODINGER_D0 = "SchrodingerD0"
    GENERIC = "Generic"
    BBM_BBM = "BBMBBM"
    OTHER = "Other"


@dataclass
class ValidationReport:
    linearly_wellposed: bool
    constraint_satisfied: bool
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.linearly_wellposed

    def __bool__(self) -> bool:
        return self.ok


def validate(p: ABCDParams, atol: float = 1e-12) -> ValidationReport:
    """Linear well-posedness (hard) and the a+b+c+d = 1/3 constraint (soft)."""
    errors = []
    if p.b < 0:
        errors.append(f"b = {p.b} < 0")
    if p.d < 0:
        errors.append(f"d = {p.d} < 0")
    same = abs(p.a - p.c) <= atol
    if not ((p.a <= 0 and p.c <= 0) or same):
        errors.append(f"need a <= 0 and c <= 0, or a = c (got a = {p.a}, c = {p.c})")
    total = p.a + p.b + p.c + p.d
    satisfied = abs(total - CONSTRAINT_SUM) <= 1e-9
    warnings = [] if satisfied else [f"a + b + c + d = {total:.6g}, not 1/3"]
    return ValidationReport(not errors, satisfied, errors, warnings)


def classify(p: ABCDParams) -> ModelClass:
    a, b, c, d = p.a, p.b, p.c, p.d
    if b == 0 and d == 0 and a == c and a > 0:
        return ModelClass.KDV_KDV
    if a < 0 and c < 0:
        if b == 0 and d > 0:
            return ModelClass.SCHRODINGER_B0
        if b > 0 and d == 0:
            return ModelClass.SCHRODINGER_D0
        if b > 0 and d > 0:
            return ModelClass.GENERIC
    if a == 0 and c == 0 and b > 0 and d > 0:
        return ModelClass.BBM_BBM
    return ModelClass.OTHER


class DispersionDomainError(ValueError):
    """Negative radicand in the eigenvalue formula (linear ill-posedness)."""


def _frequency(p: ABCDParams, k):
    """Real frequency ``omega`` with ``lambda_pm = +-i omega``."""
    k = np.asarray(k, dtype=float)
    e = p.epsilon
    k2 = k * k
    den = (1 + e * p.d * k2) * (1 + e * p.b * k2)
    if p.a == p.c:
        return k * (1 - e * p.a * k2) / np.sqrt(den)
    rad = (1 - e * p.a * k2) * (1 - e * p.c * k2) / den
    if np.any(rad < 0):
        raise DispersionDomainError("negative radicand: linearly ill-posed parameters")
    return k * np.sqrt(rad)


def eigenvalues(p: ABCDParams, xi_magnitude):
    """Nonzero eigenvalues ``(lambda_+, lambda_-)`` of the dispersion matrix.

    For ``a == c`` the radical is taken in its signed form
    ``|xi| (1 - eps a |xi|^2) / sqrt((1 + eps b |xi|^2)(1 + eps d |xi|^2))``,
    which for the scaled KdV-KdV system gives ``+-i (1 - eps |xi|^2) |xi|``.
    """
    w = _frequency(p, xi_magnitude)
    lam = 1j * w
    return lam, -lam


def growth_order(p: ABCDParams) -> int:
    """Power of ``|xi|`` governing ``|lambda_+|`` as ``|xi| -> inf``."""
    return 1 + int(p.a != 0) + int(p.c != 0) - int(p.b != 0) - int(p.d != 0)


@dataclass(frozen=True)
class DispersionInfo:
    params: ABCDParams
    order: int

    def lambda_plus(self, k):
        return eigenvalues(self.params, k)[0]

    def lambda_minus(self, k):
        return eigenvalues(self.params, k)[1]


def dispersion(p: ABCDParams) -> DispersionInfo:
    return DispersionInfo(p, growth_order(p))


def with_surface_tension(p: ABCDParams, tau: float) -> ABCDParams:
    """Capillary-gravity variant: ``c -> c - tau``."""
    if tau < 0:
        raise ValueError("surface tension must be nonnegative")
    return replace(p, c=p.c - tau)


def hamiltonian(state, epsilon: float) -> float:
    """Energy of the scaled KdV-KdV system (a = c = 1, b = d = 0).

    Quadratic terms are summed in Fourier space; the cubic term uses the
    dealiased grid product ``|v|^2`` paired with ``eta``.
    """
    g = state.grid
    weight = epsilon * g.k2 - 1.0
    quad = sum(np.sum(weight * np.abs(f.coeffs) ** 2) for f in (state.eta, state.v1, state.v2))
    v1 = inverse_transform(state.v1)
    v2 = inverse_transform(state.v2)
    vsq = dealias(forward_transform(v1 * v1 + v2 * v2, g))
    cubic = np.sum(np.conj(state.eta.coeffs) * vsq.coeffs).real
    return float(0.5 * g.area * (quad - epsilon * cubic))
