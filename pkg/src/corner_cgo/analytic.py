"""Closed-form quantities attached to the phase Φ = r^α e^{iαθ}.

Everything here is a pure function. Planar points may be given as complex
numbers ``x1 + i x2`` (scalars or arrays) or as real pairs ``(x1, x2)``.
The polar angle is taken in (-π, π), so the branch cut of Φ is the
negative real axis.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .errors import ConfigurationError, DomainError, NumericalError, PreconditionError
from .special import bessel_j, gamma, gamma_real

__all__ = [
    "SectorDomain",
    "PhaseParams",
    "GammaBoundInputs",
    "GammaBoundCheck",
    "as_complex",
    "phase",
    "phase_im",
    "grad_phase",
    "dbar_phase_im_inv",
    "dbar_of_phase_inv",
    "decay_delta",
    "upper_gamma_closed",
    "incomplete_gamma_bound_check",
    "gamma_bound_sweep",
    "bessel_j",
    "gamma",
]


@dataclass(frozen=True)
class SectorDomain:
    """Circular sector {0 < r < radius_a, |θ| < theta0}."""

    theta0: float
    radius_a: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.theta0 < math.pi):
            raise ConfigurationError(f"theta0 must lie in (0, π), got {self.theta0}")
        if abs(self.theta0 - math.pi / 2) < 1e-12:
            raise ConfigurationError("theta0 must differ from π/2 (aperture π is not a corner)")
        if not self.radius_a > 0.0:
            raise ConfigurationError(f"radius_a must be positive, got {self.radius_a}")

    @property
    def aperture(self) -> float:
        return 2.0 * self.theta0

    @property
    def area(self) -> float:
        return self.theta0 * self.radius_a**2

    def contains(self, x) -> np.ndarray | bool:
        z = as_complex(x)
        r = np.abs(z)
        th = np.angle(z)
        inside = (r > 0) & (r < self.radius_a) & (np.abs(th) < self.theta0)
        return bool(inside) if np.ndim(inside) == 0 else inside


@dataclass(frozen=True)
class PhaseParams:
    alpha: float
    h: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigurationError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.h > 0.0:
            raise ConfigurationError(f"h must be positive, got {self.h}")

    def with_h(self, h: float) -> "PhaseParams":
        return PhaseParams(self.alpha, h)

    def check_sector(self, sector: SectorDomain) -> None:
        """Raise unless Re Φ is bounded below by a positive multiple of r^α on the sector."""
        if self.alpha * sector.theta0 >= math.pi / 2:
            raise PreconditionError(
                f"alpha={self.alpha} must be below (π/2)/theta0 = {math.pi / 2 / sector.theta0:.6g}"
            )


@dataclass(frozen=True)
class GammaBoundInputs:
    b0: float
    b1: complex
    mu: complex
    eps: float

    def __post_init__(self):
        if not self.b0 > 0:
            raise ConfigurationError("b0 must be positive")
        if not complex(self.b1).real > 0:
            raise ConfigurationError("Re b1 must be positive")
        if not complex(self.mu).real > 0:
            raise ConfigurationError("Re mu must be positive")
        if not self.eps > 0:
            raise ConfigurationError("eps must be positive")


@dataclass(frozen=True)
class GammaBoundCheck:
    lhs: float
    rhs: float
    holds: bool
    quad_error: float


def as_complex(x):
    """Coerce a planar point (complex, or real pair / array of pairs) to complex."""
    if isinstance(x, (complex, np.complexfloating)):
        return complex(x)
    arr = np.asarray(x)
    if np.iscomplexobj(arr):
        return arr
    if arr.ndim >= 1 and arr.shape[-1] == 2:
        z = arr[..., 0] + 1j * arr[..., 1]
        return complex(z) if np.ndim(z) == 0 else z
    if arr.ndim == 0:
        return complex(arr)
    raise DomainError("planar points must be complex numbers or (x1, x2) pairs")


def _polar(x):
    z = as_complex(x)
    r = np.abs(z)
    if np.any(r == 0):
        raise DomainError("Φ and its derivatives are undefined at the origin")
    zi = np.imag(z)
    if np.any((zi == 0) & (np.real(z) < 0)):
        raise DomainError("point lies on the branch cut θ = ±π")
    return r, np.angle(z)


def phase(x, params: PhaseParams, conjugate: bool = False):
    """Φ(x) = r^α (cos αθ + i sin αθ); ``conjugate`` returns Φ̄."""
    r, th = _polar(x)
    a = params.alpha
    s = -1.0 if conjugate else 1.0
    return r**a * (np.cos(a * th) + 1j * s * np.sin(a * th))


def phase_im(x, params: PhaseParams):
    """φ = Im Φ = r^α sin αθ."""
    r, th = _polar(x)
    return r**params.alpha * np.sin(params.alpha * th)


def grad_phase(x, params: PhaseParams, conjugate: bool = False):
    """∇Φ = α r^{α-1} e^{i(α-1)θ} (1, i), stacked on the last axis.

    With ``conjugate`` the componentwise conjugate (the gradient of Φ̄) is returned.
    """
    r, th = _polar(x)
    a = params.alpha
    f = a * r ** (a - 1.0) * np.exp(1j * (a - 1.0) * th)
    g = np.stack([f, 1j * f], axis=-1)
    return np.conj(g) if conjugate else g


def dphase(x, params: PhaseParams):
    """Complex derivative Φ' = ∂Φ = α z^{α-1} (principal branch)."""
    r, th = _polar(x)
    a = params.alpha
    return a * r ** (a - 1.0) * np.exp(1j * (a - 1.0) * th)


def dbar_phase_im_inv(x, params: PhaseParams):
    """(∂̄φ)^{-1} = -i (2/α) r^{1-α} e^{-i(1-α)θ}, anti-holomorphic on the sector."""
    r, th = _polar(x)
    a = params.alpha
    return -1j * (2.0 / a) * r ** (1.0 - a) * np.exp(-1j * (1.0 - a) * th)


def dbar_of_phase_inv(x, params: PhaseParams, holomorphic_part: bool = False):
    """∂̄ of (∂̄φ)^{-1} = -2i((1-α)/α) r^{-α} e^{iαθ}.

    With ``holomorphic_part`` returns ∂ of (∂̄φ)^{-1}, which vanishes identically.
    """
    r, th = _polar(x)
    a = params.alpha
    if holomorphic_part:
        return np.zeros_like(r, dtype=complex) if np.ndim(r) else 0j
    return -2j * ((1.0 - a) / a) * r ** (-a) * np.exp(1j * a * th)


def decay_delta(params: PhaseParams, sector: SectorDomain) -> float:
    """Sharp constant δ = cos(αθ₀) in Re Φ ≥ δ r^α on the sector."""
    params.check_sector(sector)
    return math.cos(params.alpha * sector.theta0)


def upper_gamma_closed(inputs: GammaBoundInputs) -> complex:
    """∫_0^∞ t^{b1-1} e^{-μ t^{b0}} dt = Γ(b1/b0)/b0 · μ^{-b1/b0} (principal powers)."""
    s = complex(inputs.b1) / inputs.b0
    return gamma(s) / inputs.b0 * cmath.exp(-s * cmath.log(complex(inputs.mu)))


def incomplete_gamma_bound_check(inputs: GammaBoundInputs, quad_tol: float = 1e-10) -> GammaBoundCheck:
    """Check the tail bound for the truncated Gamma integral at one parameter point.

    lhs = |closed form − ∫_0^ε t^{b1-1} e^{-μ t^{b0}} dt| with the truncated
    integral done by tanh-sinh quadrature; rhs = Γ(Re b1/b0)/b0 ·
    (2/Re μ)^{Re b1/b0} · e^{-Re μ ε^{b0}/2}.
    """
    b0, b1, mu, eps = inputs.b0, complex(inputs.b1), complex(inputs.mu), inputs.eps
    with mpmath.workdps(30):
        mb1 = mpmath.mpc(b1.real, b1.imag)
        mmu = mpmath.mpc(mu.real, mu.imag)

        def integrand(t):
            return t ** (mb1 - 1) * mpmath.exp(-mmu * t**b0)

        val, err = mpmath.quad(integrand, [0, eps], error=True, maxdegree=10)
        truncated = complex(val)
        err = float(err)
    if not err <= quad_tol:
        raise NumericalError(
            "truncated Gamma integral did not converge",
            {"estimated_error": err, "inputs": inputs},
        )
    lhs = abs(upper_gamma_closed(inputs) - truncated)
    sr = b1.real / b0
    rhs = gamma_real(sr) / b0 * (2.0 / mu.real) ** sr * math.exp(-mu.real * eps**b0 / 2.0)
    return GammaBoundCheck(lhs=lhs, rhs=rhs, holds=lhs <= rhs + quad_tol, quad_error=err)


GAMMA_SWEEP_B0 = (0.5, 1.0, 2.0)
GAMMA_SWEEP_B1 = (0.5, 1.0, 3.0)
GAMMA_SWEEP_MU = (0.5, 2.0)
GAMMA_SWEEP_EPS = (0.5, 1.0, 2.0)
GAMMA_SWEEP_MU_IM = 0.5  # imaginary part of μ, so the complex power is exercised


def gamma_bound_sweep() -> list[GammaBoundInputs]:
    """Full tensor sweep b0 × Re b1 × Re μ × ε (54 cases), Im μ fixed."""
    return [
        GammaBoundInputs(b0, b1, complex(mu, GAMMA_SWEEP_MU_IM), eps)
        for b0 in GAMMA_SWEEP_B0
        for b1 in GAMMA_SWEEP_B1
        for mu in GAMMA_SWEEP_MU
        for eps in GAMMA_SWEEP_EPS
    ]
