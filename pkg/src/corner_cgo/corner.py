"""Local analysis at a corner: media, incident fields, sharp constants and rates.

The CGO factor is e^{-Φ_j/h} with Φ₁ = Φ and Φ₂ = Φ̄. Every sharp constant
is the coefficient of the leading power of h in an integral over the sector;
the closed forms below come from the radial Gamma integral

    ∫_0^∞ r^{b-1} e^{-r^α e^{∓iαθ}/h} dr = α^{-1} Γ(b/α) h^{b/α} e^{±ibθ},

followed by an elementary angular integral. Two-dimensional quadrature
(``sector_quadrature``) is provided as an independent oracle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from . import analytic
from .analytic import PhaseParams, SectorDomain
from .dbar import CgoSolution, PotentialSpec
from .errors import ConfigurationError, NumericalError, PreconditionError
from .quadrature import ComplexFieldSample, fd_grad, integrate
from .special import bessel_j, gamma_real

__all__ = [
    "MediumModel",
    "IncidentFieldModel",
    "TaylorLeading",
    "ConstantPair",
    "SharpConstants",
    "RateFitReport",
    "DecompositionRow",
    "InvarianceReport",
    "sector_quadrature",
    "angular_integral",
    "sector_power_integral",
    "sector_power_integral_truncated",
    "sector_power_quadrature",
    "sector_moment",
    "taylor_leading",
    "sharp_C0",
    "c0_determinant_margin",
    "sharp_C1",
    "sharp_C2",
    "sharp_constants",
    "angle_vanishing",
    "c0_coeff",
    "nonscattering_candidate",
    "corner_integral",
    "rate_fit",
    "localAll_decomposition",
    "general_A_invariance",
]

ANGLE_TOL = 1e-12
DEGENERACY_TOL = 1e-10
RATE_FIT_POINTS = 3  # last two doublings of a ratio-2 grid
MIN_R_SQUARED = 0.99
DEFAULT_H_GRID = (0.16, 0.08, 0.04, 0.02)


# ---------------------------------------------------------------------------
# media and incident fields


def _sqrt_gamma_from_jump(s):
    """√γ solving γ^{-1/2}(γ - 1) = s, i.e. √γ - 1/√γ = s."""
    return 0.5 * (s + np.sqrt(s * s + 4.0))


@dataclass(frozen=True)
class MediumModel:
    """Scalar medium near the corner, parametrised by its essential jumps.

    The profile is γ^{-1/2}(γ - 1) = c1 + C1 r^β1 and γ^{-1/2}(ρ - 1) =
    c2 + C2 r^β2; for ``profile="constant"`` the perturbations are dropped.
    The corner values ``gamma_const`` and ``rho_const`` are derived.
    """

    c1: float
    c2: float
    beta1: float = 2.0
    beta2: float = 1.0
    C1: float = 0.0
    C2: float = 0.0
    profile: str = "constant"
    k: float = 1.0
    gamma_const: float = field(init=False)
    rho_const: float = field(init=False)

    def __post_init__(self):
        if self.profile not in ("constant", "power-perturbed"):
            raise ConfigurationError(f"unknown medium profile {self.profile!r}")
        if not (self.beta1 > 0 and self.beta2 > 0):
            raise ConfigurationError("beta1 and beta2 must be positive")
        if self.C1 < 0 or self.C2 < 0:
            raise ConfigurationError("C1 and C2 must be non-negative")
        if not self.k > 0:
            raise ConfigurationError("wavenumber k must be positive")
        sg = float(_sqrt_gamma_from_jump(self.c1))
        object.__setattr__(self, "gamma_const", sg * sg)
        object.__setattr__(self, "rho_const", 1.0 + sg * self.c2)
        if not self.rho_const > 0:
            raise ConfigurationError(f"rho at the corner is {self.rho_const:.6g}; ellipticity needs rho > 0")

    @classmethod
    def from_constants(cls, gamma_c: float, rho_c: float, k: float = 1.0) -> "MediumModel":
        """Constant medium with the given γ and ρ; jumps c = γ^{-1/2}(· - 1)."""
        if not (gamma_c > 0 and rho_c > 0):
            raise ConfigurationError("gamma and rho must be positive")
        s = 1.0 / math.sqrt(gamma_c)
        return cls(c1=s * (gamma_c - 1.0), c2=s * (rho_c - 1.0), k=k)

    @property
    def perturbed(self) -> bool:
        return self.profile == "power-perturbed"

    def jump_gamma(self, z):
        """γ^{-1/2}(γ - 1) at the points ``z``."""
        r = np.abs(z)
        return self.c1 + (self.C1 * r**self.beta1 if self.perturbed else 0.0 * r)

    def jump_rho(self, z):
        """γ^{-1/2}(ρ - 1) at the points ``z``."""
        r = np.abs(z)
        return self.c2 + (self.C2 * r**self.beta2 if self.perturbed else 0.0 * r)

    def sqrt_gamma(self, z):
        return _sqrt_gamma_from_jump(self.jump_gamma(z))

    def gamma(self, z):
        return self.sqrt_gamma(z) ** 2

    def rho(self, z):
        return 1.0 + self.sqrt_gamma(z) * self.jump_rho(z)

    def _sg_derivatives(self, r):
        """(√γ)', (√γ)'' in r for the radial profile."""
        if not self.perturbed or self.C1 == 0:
            return np.zeros_like(r), np.zeros_like(r)
        s = self.c1 + self.C1 * r**self.beta1
        ds = self.C1 * self.beta1 * r ** (self.beta1 - 1.0)
        d2s = self.C1 * self.beta1 * (self.beta1 - 1.0) * r ** (self.beta1 - 2.0)
        root = np.sqrt(s * s + 4.0)
        f1 = 0.5 * (1.0 + s / root)
        f2 = 2.0 / root**3
        return f1 * ds, f2 * ds * ds + f1 * d2s

    def b_vec(self, z):
        """b⃗ = -γ^{1/2}∇γ^{-1/2} = ∇(√γ)/√γ, stacked on the last axis."""
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        d1, _ = self._sg_derivatives(r)
        radial = d1 / self.sqrt_gamma(z)
        e = np.exp(1j * np.angle(z))
        return np.stack([radial * e.real, radial * e.imag], axis=-1).astype(complex)

    def lap_sqrt_gamma(self, z):
        r = np.abs(z)
        d1, d2 = self._sg_derivatives(r)
        return d2 + d1 / r

    def potential(self) -> PotentialSpec:
        """q = k²ρ/γ - γ^{-1/2}Δγ^{1/2}, with the Laplacian in closed form."""
        if not self.perturbed:
            return PotentialSpec.medium(self.gamma_const, self.rho_const, self.k)
        return PotentialSpec.medium(self.gamma, self.rho, self.k, lap_sqrt_gamma=self.lap_sqrt_gamma)


def _combine_terms(terms) -> tuple[tuple[int, complex, complex], ...]:
    acc: dict[int, list[complex]] = {}
    for term in terms:
        if len(term) != 3:
            raise ConfigurationError("incident terms are (m, a_m, b_m) triples")
        m, a, b = term
        if int(m) != m or m < 0:
            raise ConfigurationError(f"angular order must be a non-negative integer, got {m}")
        slot = acc.setdefault(int(m), [0j, 0j])
        slot[0] += complex(a)
        slot[1] += complex(b)
    return tuple((m, v[0], v[1]) for m, v in sorted(acc.items()))


@dataclass(frozen=True)
class IncidentFieldModel:
    """v = Σ J_m(kr)(a_m e^{imθ} + b_m e^{-imθ}), an exact Helmholtz solution.

    For m = 0 only the sum a_0 + b_0 matters. Terms with equal m are merged.
    """

    k: float
    terms: tuple[tuple[int, complex, complex], ...]

    def __post_init__(self):
        if not self.k > 0:
            raise ConfigurationError("wavenumber k must be positive")
        object.__setattr__(self, "terms", _combine_terms(self.terms))
        if all(self._effective(m, a, b) == (0, 0) for m, a, b in self.terms):
            raise ConfigurationError("incident field is identically zero")

    @staticmethod
    def _effective(m, a, b):
        return (a + b, 0) if m == 0 else (a, b)

    def coefficient(self, m: int) -> tuple[complex, complex]:
        for mm, a, b in self.terms:
            if mm == m:
                return (a + b, 0j) if m == 0 else (a, b)
        return 0j, 0j

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(m for m, a, b in self.terms if self._effective(m, a, b) != (0, 0))

    def value(self, z):
        z = np.asarray(z, dtype=complex)
        kr = self.k * np.abs(z)
        th = np.angle(z)
        out = np.zeros(z.shape, dtype=complex)
        for m, a, b in self.terms:
            out = out + bessel_j(m, kr) * (a * np.exp(1j * m * th) + b * np.exp(-1j * m * th))
        return out

    def grad(self, z):
        """Cartesian gradient, stacked on the last axis (term-by-term Bessel derivatives)."""
        z = np.asarray(z, dtype=complex)
        kr = self.k * np.abs(z)
        th = np.angle(z)
        dr = np.zeros(z.shape, dtype=complex)
        dth = np.zeros(z.shape, dtype=complex)  # (1/r) ∂_θ
        for m, a, b in self.terms:
            jm1, jp1 = bessel_j(m - 1, kr), bessel_j(m + 1, kr)
            ep, em = np.exp(1j * m * th), np.exp(-1j * m * th)
            dr = dr + 0.5 * self.k * (jm1 - jp1) * (a * ep + b * em)
            dth = dth + 0.5j * self.k * (jm1 + jp1) * (a * ep - b * em)
        c, s = np.cos(th), np.sin(th)
        return np.stack([c * dr - s * dth, s * dr + c * dth], axis=-1)

    def taylor_term(self, d: int) -> "_TaylorTerm":
        """Degree-``d`` homogeneous term of the Taylor series at the corner."""
        parts = []
        for m, a, b in self.terms:
            if m > d or (d - m) % 2:
                continue
            s = (d - m) // 2
            c = (-1) ** s * (self.k / 2.0) ** d / (math.factorial(s) * math.factorial(m + s))
            parts.append(((d + m) // 2, (d - m) // 2, c * a))
            parts.append(((d - m) // 2, (d + m) // 2, c * b))
        return _TaylorTerm(d, tuple((p, q, c) for p, q, c in parts if c != 0))


@dataclass(frozen=True)
class _TaylorTerm:
    """Σ c z^p z̄^q over monomials with p + q = degree."""

    degree: int
    monomials: tuple[tuple[int, int, complex], ...]

    def is_zero(self, tol: float = 0.0) -> bool:
        merged: dict[tuple[int, int], complex] = {}
        for p, q, c in self.monomials:
            merged[(p, q)] = merged.get((p, q), 0j) + c
        return all(abs(c) <= tol for c in merged.values())

    def value(self, z):
        z = np.asarray(z, dtype=complex)
        zb = np.conj(z)
        out = np.zeros(z.shape, dtype=complex)
        for p, q, c in self.monomials:
            out = out + c * z**p * zb**q
        return out

    def grad(self, z):
        z = np.asarray(z, dtype=complex)
        zb = np.conj(z)
        gx = np.zeros(z.shape, dtype=complex)
        gy = np.zeros(z.shape, dtype=complex)
        for p, q, c in self.monomials:
            dz = p * z ** max(p - 1, 0) * zb**q if p else 0.0
            dzb = q * z**p * zb ** max(q - 1, 0) if q else 0.0
            gx = gx + c * (dz + dzb)
            gy = gy + 1j * c * (dz - dzb)
        return np.stack([gx, gy], axis=-1)


@dataclass(frozen=True)
class TaylorLeading:
    """Leading Taylor data of v and ∇v at the corner.

    v_{N0} = r^{N0}(B1 e^{iN0θ} + B2 e^{-iN0θ}); the harmonic part of
    V_N = ∇v_{N+1} is b1 (1, i) r^N e^{iNθ} + b2 (1, -i) r^N e^{-iNθ}.
    When N0 = 0 and N = 1, V_1(x) = B x with trace(B) = -k²v0.
    """

    N0: int
    B1: complex
    B2: complex
    N: int
    b1: complex
    b2: complex
    v0: complex
    k: float
    B_matrix: np.ndarray | None = None
    vN0: _TaylorTerm | None = field(default=None, repr=False)
    v_next: _TaylorTerm | None = field(default=None, repr=False)  # v_{N+1}, with V_N = ∇v_{N+1}

    def VN(self, z):
        return self.v_next.grad(z)


def taylor_leading(v: IncidentFieldModel) -> TaylorLeading:
    """Vanishing orders N0 (of v) and N (of ∇v) and the leading coefficients."""
    orders = v.orders
    if not orders:
        raise ConfigurationError("incident field is identically zero")
    n0 = orders[0]
    scale0 = (v.k / 2.0) ** n0 / math.factorial(n0)
    a, b = v.coefficient(n0)
    if n0 == 0:
        v0 = a
        B1 = B2 = 0.5 * scale0 * a
    else:
        v0 = 0j
        B1, B2 = scale0 * a, scale0 * b
    if n0 >= 1:
        n = n0 - 1
    else:
        n = 0 if 1 in orders else 1
    a_n, b_n = v.coefficient(n + 1)
    c = (v.k / 2.0) ** (n + 1) / math.factorial(n + 1)
    b1, b2 = (n + 1) * c * a_n, (n + 1) * c * b_n
    B = None
    if n0 == 0 and n == 1:
        a2, b2c = v.coefficient(2)
        B = -(v.k**2 * v0 / 2.0) * np.eye(2, dtype=complex) + (v.k**2 / 4.0) * np.array(
            [[a2 + b2c, 1j * (a2 - b2c)], [1j * (a2 - b2c), -(a2 + b2c)]]
        )
    return TaylorLeading(
        N0=n0,
        B1=complex(B1),
        B2=complex(B2),
        N=n,
        b1=complex(b1),
        b2=complex(b2),
        v0=complex(v0),
        k=v.k,
        B_matrix=B,
        vN0=v.taylor_term(n0),
        v_next=v.taylor_term(n + 1),
    )


# ---------------------------------------------------------------------------
# closed-form sector integrals and quadrature oracle


def _phase_sign(j: int) -> float:
    if j not in (1, 2):
        raise ConfigurationError(f"j must be 1 (Φ) or 2 (Φ̄), got {j}")
    return 1.0 if j == 1 else -1.0


def angular_integral(m: float, theta0: float) -> float:
    """∫_{-θ0}^{θ0} e^{imθ} dθ = 2 sin(mθ0)/m, with the limit 2θ0 at m = 0."""
    if m == 0:
        return 2.0 * theta0
    return 2.0 * math.sin(m * theta0) / m


def sector_power_integral(beta: float, n: int, j: int, params: PhaseParams, sector: SectorDomain, h: float | None = None) -> complex:
    """Leading term of ∫ r^β e^{inθ} e^{-Φ_j/h} dx over the sector.

    Equals α^{-1}Γ((β+2)/α) h^{(β+2)/α} · ∫ e^{i(n ∓ (β+2))θ} dθ; the
    truncation at radius a adds only an exponentially small remainder.
    """
    params.check_sector(sector)
    h = params.h if h is None else h
    if beta + 2 <= 0:
        raise PreconditionError("need beta > -2 for integrability at the corner")
    a = params.alpha
    m = n - _phase_sign(j) * (beta + 2.0)
    return complex(gamma_real((beta + 2.0) / a) / a * h ** ((beta + 2.0) / a) * angular_integral(m, sector.theta0))


def sector_power_integral_truncated(beta: float, n: int, j: int, params: PhaseParams, sector: SectorDomain, h: float | None = None) -> complex:
    """Exact ∫ r^β e^{inθ} e^{-Φ_j/h} dx over the sector of finite radius a.

    The radial integral is α^{-1} μ^{-b/α} γ(b/α, μ a^α) with b = β + 2 and
    μ = e^{±iαθ}/h (lower incomplete Gamma); the angular integral is done
    by adaptive quadrature in extended precision.
    """
    params.check_sector(sector)
    h = params.h if h is None else h
    al = params.alpha
    b = beta + 2.0
    sgn = _phase_sign(j)
    a = sector.radius_a
    with mpmath.workdps(30):

        def f(th):
            mu = mpmath.exp(sgn * 1j * al * th) / h
            return mpmath.exp(1j * n * th) * mpmath.gammainc(b / al, 0, mu * a**al) * mu ** (-b / al) / al

        return complex(mpmath.quad(f, [-sector.theta0, 0, sector.theta0]))


_CORNER_LEVELS = 40  # geometric refinement of the corner panel in the quadrature oracle


def _tensor_nodes(sector: SectorDomain, alpha: float, h: float, n_gauss: int, panel_per_h: float):
    """Nodes and weights in (t, θ), t = r^α, resolving e^{-Φ/h} on the sector.

    The corner panel is refined geometrically so integrands with power
    singularities r^γ (γ > -2) at the vertex are integrated accurately.
    """
    T = sector.radius_a**alpha
    n_panels = max(4, int(math.ceil(T / (panel_per_h * h))))
    width = T / n_panels
    c = 2.0 / alpha - 1.0
    xj, wj = roots_jacobi(n_gauss, 0.0, c)
    xl, wl = roots_legendre(n_gauss)
    inner = width * 0.5**_CORNER_LEVELS
    t_first = 0.5 * inner * (xj + 1.0)
    w_first = (0.5 * inner) ** (c + 1.0) * wj / alpha
    edges = np.concatenate([width * 0.5 ** np.arange(_CORNER_LEVELS, 0, -1), width * np.arange(1, n_panels + 1)])
    lo, wd = edges[:-1], np.diff(edges)
    t_rest = (lo[:, None] + 0.5 * wd[:, None] * (xl + 1.0)).ravel()
    w_rest = (0.5 * wd[:, None] * wl).ravel() * t_rest**c / alpha
    t = np.concatenate([t_first, t_rest])
    wt = np.concatenate([w_first, w_rest])
    span = 2.0 * (T / h) * math.sin(alpha * sector.theta0)  # phase variation of e^{-Φ/h} along an arc
    nth = int(64 + math.ceil(span))
    xt, wth = roots_legendre(nth)
    th = sector.theta0 * xt
    wth = sector.theta0 * wth
    r = t ** (1.0 / alpha)
    Z = r[:, None] * np.exp(1j * th[None, :])
    W = wt[:, None] * wth[None, :]
    return Z, W


def sector_quadrature(fn: Callable, sector: SectorDomain, alpha: float, h: float, n_gauss: int = 8, panel_per_h: float = 1.0) -> complex:
    """Direct 2-D quadrature of ∫ fn(z) dx over the sector, tuned to scale h.

    The radial variable t = r^α is split into panels of width ``panel_per_h``·h
    (Gauss-Legendre, with a geometrically refined corner panel); the angle uses
    Gauss-Legendre with enough nodes for the oscillation of e^{-Φ/h}.
    """
    Z, W = _tensor_nodes(sector, alpha, h, n_gauss, panel_per_h)
    vals = np.asarray(fn(Z))
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite integrand in sector quadrature")
    return complex(np.sum(vals * W))


def sector_power_quadrature(beta: float, n: int, j: int, params: PhaseParams, sector: SectorDomain, h: float | None = None) -> complex:
    """∫ r^β e^{inθ} e^{-Φ_j/h} dx over the sector by direct 2-D quadrature."""
    params.check_sector(sector)
    h = params.h if h is None else h
    if beta + 2 <= 0:
        raise PreconditionError("need beta > -2 for integrability at the corner")

    def f(z):
        return np.abs(z) ** beta * np.exp(1j * n * np.angle(z)) * _decay(z, params, j, h)

    return sector_quadrature(f, sector, params.alpha, h)


def _decay(z, params: PhaseParams, j: int, h: float):
    return np.exp(-analytic.phase(z, params, conjugate=(j == 2)) / h)


def sector_moment(
    N0: int,
    sign: int,
    j: int,
    params: PhaseParams,
    sector: SectorDomain,
    h: float | None = None,
    mode: str = "closed",
) -> complex:
    """∫ r^{N0} e^{±iN0θ} e^{-Φ_j/h} dx.

    ``mode`` is "closed" (leading term, radius a → ∞), "quadrature" (direct
    2-D quadrature on the sector) or "truncated" (exact value at radius a).
    """
    if sign not in (1, -1):
        raise ConfigurationError("sign must be +1 or -1")
    h = params.h if h is None else h
    if mode == "closed":
        return sector_power_integral(N0, sign * N0, j, params, sector, h)
    if mode == "truncated":
        return sector_power_integral_truncated(N0, sign * N0, j, params, sector, h)
    if mode != "quadrature":
        raise ConfigurationError(f"unknown mode {mode!r}")
    return sector_power_quadrature(N0, sign * N0, j, params, sector, h)


# ---------------------------------------------------------------------------
# sharp constants


@dataclass(frozen=True)
class ConstantPair:
    """A pair of sharp constants (j = 1, 2) and whether both vanish."""

    values: tuple[complex, complex]
    both_zero: bool
    classification: str = "generic"
    detail: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SharpConstants:
    C0: ConstantPair | None
    C1pair: ConstantPair | None
    C2pair: ConstantPair | None
    vanishing_flags: dict


def _check_theta0(theta0: float) -> SectorDomain:
    return SectorDomain(theta0)


def c0_determinant_margin(N0: int, theta0: float) -> float:
    """|sin 2θ0| - |sin 2(N0+1)θ0|/(N0+1); positive exactly when C0 cannot vanish for all (B1, B2).

    The pair (C_{0,N0,1}, C_{0,N0,2}) is a linear image of (B1, B2) whose
    determinant is proportional to sin²2θ0 - sin²(2(N0+1)θ0)/(N0+1)².
    """
    return abs(math.sin(2.0 * theta0)) - abs(math.sin(2.0 * (N0 + 1) * theta0)) / (N0 + 1)


def sharp_C0(N0: int, B1: complex, B2: complex, params: PhaseParams, sector: SectorDomain) -> ConstantPair:
    """C_{0,N0,j}: ∫ v_{N0} e^{-Φ_j/h} dx = C_{0,N0,j} h^{(N0+2)/α} + (exp. small)."""
    if abs(sector.theta0 - math.pi / 2) < ANGLE_TOL:
        raise PreconditionError("theta0 = π/2 is not a corner")
    if B1 == 0 and B2 == 0:
        raise PreconditionError("(B1, B2) must not both vanish")
    if N0 < 0:
        raise ConfigurationError("N0 must be non-negative")
    vals = []
    for j in (1, 2):
        plus = sector_power_integral(N0, N0, j, params, sector, 1.0)
        minus = sector_power_integral(N0, -N0, j, params, sector, 1.0)
        vals.append(complex(B1) * plus + complex(B2) * minus)
    scale = gamma_real((N0 + 2.0) / params.alpha) / params.alpha * (abs(B1) + abs(B2))
    both = max(abs(v) for v in vals) <= DEGENERACY_TOL * scale
    if both:
        raise NumericalError(
            "both C0 constants vanish, which the determinant argument excludes",
            {"N0": N0, "theta0": sector.theta0, "margin": c0_determinant_margin(N0, sector.theta0)},
        )
    return ConstantPair(tuple(vals), False, "generic", {"determinant_margin": c0_determinant_margin(N0, sector.theta0)})


def angle_vanishing(theta0: float, N: int) -> int | None:
    """Positive integer l with 2θ0 = lπ/(1+N) (to 1e-12), or None."""
    _check_theta0(theta0)
    if N < 0:
        raise ConfigurationError("N must be non-negative")
    if N == 0:
        return None
    x = 2.0 * theta0 * (1 + N) / math.pi
    l = int(round(x))
    if l >= 1 and abs(2.0 * theta0 - l * math.pi / (1 + N)) <= ANGLE_TOL:
        return l
    return None


def sharp_C1(N: int, b1: complex, b2: complex, params: PhaseParams, sector: SectorDomain) -> ConstantPair:
    """C_{1,j}: -(1/h)∫ e^{-Φ_j/h} V·∇Φ_j dx = C_{1,j} h^{(N+1)/α} + (exp. small).

    C_{1,j} = -2 b_{j+1} Γ((N+1)/α + 1) sin(2(N+1)θ0)/(N+1), with b_3 := b_1.
    Both vanish exactly when the aperture satisfies 2θ0 = lπ/(1+N).
    """
    params.check_sector(sector)
    if b1 == 0 and b2 == 0:
        raise PreconditionError("(b1, b2) must not both vanish")
    if N < 0:
        raise ConfigurationError("N must be non-negative")
    g = gamma_real((N + 1.0) / params.alpha + 1.0)
    s = math.sin(2.0 * (N + 1) * sector.theta0)
    bnext = {1: complex(b2), 2: complex(b1)}
    vals = tuple(-2.0 * bnext[j] * g * s / (N + 1) for j in (1, 2))
    l = angle_vanishing(sector.theta0, N)
    return ConstantPair(vals, l is not None, "angle-vanishing" if l is not None else "generic", {"l": l})


def c0_coeff(c1: float, c2: float, theta0: float) -> float:
    """c0 = (1 - c2/c1)/cos 2θ0."""
    if c1 == 0:
        raise PreconditionError("c1 must be non-zero")
    cs = math.cos(2.0 * theta0)
    if abs(cs) < ANGLE_TOL:
        raise PreconditionError("cos 2θ0 = 0: aperture π/2 or 3π/2 has no c0")
    return (1.0 - c2 / c1) / cs


def _right_angle_aperture(theta0: float) -> bool:
    return abs(math.cos(2.0 * theta0)) < ANGLE_TOL


def sharp_C2(B_matrix, v0: complex, c1: float, c2: float, params: PhaseParams, sector: SectorDomain, k: float) -> ConstantPair:
    """C_{2,j} for V(x) = Bx with trace B = -k²v0.

    C_{2,j} = -(c1 Γ(2/α)/α) sin 2θ0 [b_j cos 2θ0 - k²v0(1 - c2/c1)] with
    b_j = b11 - b22 - (-1)^j 2i b12. Both vanish iff (aperture π/2 or 3π/2
    and c1 = c2) or B = -(k²v0/2) diag(1 - c0, 1 + c0).
    """
    params.check_sector(sector)
    if c1 == 0:
        raise PreconditionError("sharp_C2 needs c1 != 0")
    B = np.asarray(B_matrix, dtype=complex)
    if B.shape != (2, 2):
        raise ConfigurationError("B_matrix must be 2x2")
    if abs(B[0, 1] - B[1, 0]) > DEGENERACY_TOL * max(1.0, np.abs(B).max()):
        raise ConfigurationError("B_matrix must be symmetric")
    kv = k**2 * complex(v0)
    if kv == 0 or abs(np.trace(B) + kv) > DEGENERACY_TOL * max(1.0, abs(kv)):
        raise PreconditionError("need trace(B) = -k²v0 != 0")
    th = sector.theta0
    bj = {1: B[0, 0] - B[1, 1] + 2j * B[0, 1], 2: B[0, 0] - B[1, 1] - 2j * B[0, 1]}
    pref = -c1 * gamma_real(2.0 / params.alpha) / params.alpha * math.sin(2.0 * th)
    brackets = {j: bj[j] * math.cos(2.0 * th) - kv * (1.0 - c2 / c1) for j in (1, 2)}
    vals = tuple(complex(pref * brackets[j]) for j in (1, 2))
    scale = np.abs(B).max() + abs(kv) * max(1.0, abs(1.0 - c2 / c1))
    both = max(abs(x) for x in brackets.values()) <= DEGENERACY_TOL * scale
    detail: dict = {"b": (complex(bj[1]), complex(bj[2]))}
    if _right_angle_aperture(th):
        cls = "equal-jumps" if both else "generic"
    else:
        detail["c0"] = c0_coeff(c1, c2, th)
        cls = "degenerate-matrix" if both else "generic"
    return ConstantPair(vals, bool(both), cls, detail)


def sharp_constants(taylor: TaylorLeading, media: MediumModel, params: PhaseParams, sector: SectorDomain) -> SharpConstants:
    """All sharp constants that apply to the given Taylor data and media."""
    C0 = sharp_C0(taylor.N0, taylor.B1, taylor.B2, params, sector)
    C1 = None
    if taylor.b1 != 0 or taylor.b2 != 0:
        C1 = sharp_C1(taylor.N, taylor.b1, taylor.b2, params, sector)
    C2 = None
    if taylor.B_matrix is not None and media.c1 != 0:
        C2 = sharp_C2(taylor.B_matrix, taylor.v0, media.c1, media.c2, params, sector, taylor.k)
    flags = {
        "C0_both_zero": C0.both_zero,
        "C1_both_zero": None if C1 is None else C1.both_zero,
        "C2_both_zero": None if C2 is None else C2.both_zero,
        "angle_l": angle_vanishing(sector.theta0, taylor.N),
    }
    return SharpConstants(C0, C1, C2, flags)


def nonscattering_candidate(v0: complex, c0: float, tail: Sequence = (), k: float = 1.0) -> IncidentFieldModel:
    """v0 J0 + c0 v0 J2 (e^{2iθ} + e^{-2iθ}) + Σ_{m≥2} J_{2m}(b_{m,1} e^{2imθ} + b_{m,2} e^{-2imθ})."""
    if v0 == 0:
        raise PreconditionError("v0 must be non-zero")
    terms = [(0, complex(v0), 0j), (2, c0 * complex(v0), c0 * complex(v0))]
    for item in tail:
        m, b1, b2 = item
        if int(m) != m or m < 2:
            raise ConfigurationError("tail indices start at m = 2")
        terms.append((2 * int(m), complex(b1), complex(b2)))
    return IncidentFieldModel(k, tuple(terms))


# ---------------------------------------------------------------------------
# the corner integral and its decomposition


def _dot(u, v):
    return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1]


@dataclass(frozen=True, eq=False)
class _CgoFields:
    """Node values needed to integrate against w = γ^{-1/2} e^{-Φ_j/h}(A + w_h)."""

    decay: np.ndarray
    grad_phase_h: np.ndarray  # ∇Φ_j / h
    b: np.ndarray
    isg: np.ndarray  # γ^{-1/2}
    U: np.ndarray  # A + w_h
    grad_U: np.ndarray  # ∇A + ∇w_h
    w_h: np.ndarray
    grad_wh: np.ndarray


def _cgo_fields(media: MediumModel, w: CgoSolution) -> _CgoFields:
    g = w.grid
    prm = w.params
    conj = w.conjugate
    decay = np.exp(-analytic.phase(g.Z, prm, conjugate=conj) / prm.h)
    gp = analytic.grad_phase(g.Z, prm, conjugate=conj) / prm.h
    gx, gy = fd_grad(w.w_h)
    grad_wh = np.stack([gx.values, gy.values], axis=-1)
    ax, ay = fd_grad(w.A)
    grad_A = np.stack([ax.values, ay.values], axis=-1)
    return _CgoFields(
        decay=decay,
        grad_phase_h=gp,
        b=media.b_vec(g.Z),
        isg=1.0 / media.sqrt_gamma(g.Z),
        U=w.A.values + w.w_h.values,
        grad_U=grad_A + grad_wh,
        w_h=w.w_h.values,
        grad_wh=grad_wh,
    )


def _check_grid(w: CgoSolution, sector: SectorDomain | None) -> None:
    if sector is not None and w.grid.sector != sector:
        raise ConfigurationError("the CGO solution lives on a different sector")


def corner_integral(media: MediumModel, v: IncidentFieldModel, w: CgoSolution, sector: SectorDomain | None = None) -> complex:
    """∫ (γ-1)∇v·∇w - k²(ρ-1) v w dx over the sector by grid quadrature.

    ∇v is analytic; ∇w = γ^{-1/2}e^{-Φ/h}(-(A+w_h)(∇Φ/h + b⃗) + ∇A + ∇w_h)
    with ∇A and ∇w_h by finite differences.
    """
    _check_grid(w, sector)
    g = w.grid
    f = _cgo_fields(media, w)
    grad_w = (f.isg * f.decay)[..., None] * (-f.U[..., None] * (f.grad_phase_h + f.b) + f.grad_U)
    wv = f.isg * f.decay * f.U
    gam = media.gamma(g.Z)
    rho = media.rho(g.Z)
    vals = (gam - 1.0) * _dot(v.grad(g.Z), grad_w) - media.k**2 * (rho - 1.0) * v.value(g.Z) * wv
    return integrate(ComplexFieldSample(g, vals))


@dataclass(frozen=True)
class DecompositionRow:
    piece: str
    h: tuple[float, ...]
    values: tuple[complex, ...]
    predicted_exponent: float
    measured_exponents: tuple[float, ...]  # consecutive h-pairs


def _pieces(media: MediumModel, v: IncidentFieldModel, tl: TaylorLeading, w: CgoSolution) -> dict[str, complex]:
    g = w.grid
    if np.max(np.abs(w.A.values - 1.0)) > 0:
        raise PreconditionError("the decomposition assumes the amplitude A ≡ 1")
    f = _cgo_fields(media, w)
    Z = g.Z
    c1, c2 = media.c1, media.c2
    s1 = media.jump_gamma(Z) - c1
    s2 = media.jump_rho(Z) - c2
    gv = v.grad(Z)
    VN = tl.VN(Z)
    vN0 = tl.vN0.value(Z)
    vv = v.value(Z)
    D = f.decay
    G = -(1.0 + f.w_h)[..., None] * (f.grad_phase_h + f.b) + f.grad_wh

    def integ(x):
        return integrate(ComplexFieldSample(g, x))

    return {
        "I10": integ(D * _dot(f.grad_phase_h, VN)),
        "I11": integ(s1 * _dot(gv, G) * D),
        "I12": c1 * integ(_dot(gv - VN, G) * D),
        "I13": c1 * integ(_dot(VN, -f.w_h[..., None] * (f.grad_phase_h + f.b) - f.b + f.grad_wh) * D),
        "I20": integ(vN0 * D),
        "I21": integ(s2 * vv * (1.0 + f.w_h) * D),
        "I22": c2 * integ((vv - vN0) * (1.0 + f.w_h) * D),
        "I23": c2 * integ(vN0 * f.w_h * D),
    }


def localAll_decomposition(media: MediumModel, v: IncidentFieldModel, solutions: Sequence[CgoSolution]) -> list[DecompositionRow]:
    """Tabulate the split pieces I10..I13 and I20..I23 across CGO solutions at several h.

    The pieces reassemble the corner integral as
    (-c1 I10 + I11 + I12 + I13) - k²(c2 I20 + I21 + I22 + I23); predicted
    exponents are the upper-bound rates, measured ones come from
    consecutive h-pairs.
    """
    if not solutions:
        raise ConfigurationError("need at least one CGO solution")
    sols = sorted(solutions, key=lambda s: -s.params.h)
    tl = taylor_leading(v)
    a = sols[0].params.alpha
    p1, p2 = sols[0].p1, sols[0].p2
    N, N0 = tl.N, tl.N0
    predicted = {
        "I10": (N + 1) / a,
        "I11": (N + 1 + media.beta1) / a,
        "I12": (N + 2) / a,
        "I13": (N + 1) / a + min(1.0 - 2.0 / (a * p1), (1.0 - 2.0 / p2) / a),
        "I20": (N0 + 2) / a,
        "I21": (N0 + 2 + media.beta2) / a,
        "I22": (N0 + 3) / a,
        "I23": (N0 + 2 + a - 2.0 / p1) / a,
    }
    table = [_pieces(media, v, tl, s) for s in sols]
    hs = tuple(s.params.h for s in sols)
    rows = []
    for name, pred in predicted.items():
        vals = tuple(t[name] for t in table)
        meas = []
        for i in range(len(vals) - 1):
            x0, x1 = abs(vals[i]), abs(vals[i + 1])
            meas.append(math.log(x1 / x0) / math.log(hs[i + 1] / hs[i]) if x0 > 0 and x1 > 0 else float("nan"))
        rows.append(DecompositionRow(name, hs, vals, pred, tuple(meas)))
    return rows


# ---------------------------------------------------------------------------
# rate fitting


@dataclass(frozen=True)
class RateFitReport:
    h_grid: tuple[float, ...]
    values: tuple[float, ...]
    slope: float
    predicted: float
    r_squared: float
    fit_points: int

    @property
    def relative_error(self) -> float:
        return abs(self.slope - self.predicted) / abs(self.predicted)

    def matches(self, rel_tol: float, min_r_squared: float = MIN_R_SQUARED) -> bool:
        return self.r_squared >= min_r_squared and self.relative_error <= rel_tol


def rate_fit(h_grid, values, predicted_exponent: float, fit_points: int | None = RATE_FIT_POINTS) -> RateFitReport:
    """Least-squares slope of log|value| against log h over the smallest h.

    ``fit_points`` selects how many of the smallest usable h enter the fit
    (None uses all of them); zero or non-finite values are dropped with a
    warning.
    """
    h = np.asarray(h_grid, dtype=float)
    mags = np.abs(np.asarray(values, dtype=complex))
    if h.shape != mags.shape:
        raise ConfigurationError("h_grid and values differ in length")
    if h.size < 4:
        raise ConfigurationError("rate_fit needs at least 4 h-points")
    if np.any(h <= 0):
        raise ConfigurationError("h values must be positive")
    order = np.argsort(-h)
    h, mags = h[order], mags[order]
    if np.any(np.diff(h) >= 0):
        raise ConfigurationError("h values must be distinct")
    ratios = h[:-1] / h[1:]
    if np.ptp(np.log(ratios)) > 1e-9:
        raise ConfigurationError("h_grid must be geometric")
    ok = np.isfinite(mags) & (mags > 0)
    if not np.all(ok):
        warnings.warn(f"rate_fit: dropping {int(np.sum(~ok))} zero or non-finite values", RuntimeWarning, stacklevel=2)
    hu, mu = h[ok], mags[ok]
    if hu.size < 4:
        raise NumericalError("fewer than 4 usable points for rate_fit")
    n = hu.size if fit_points is None else min(max(int(fit_points), 2), hu.size)
    x, y = np.log(hu[-n:]), np.log(mu[-n:])
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFitReport(tuple(h), tuple(mags), float(slope), float(predicted_exponent), float(min(max(r2, 0.0), 1.0)), n)


# ---------------------------------------------------------------------------
# robustness with respect to the amplitude A


@dataclass(frozen=True)
class InvarianceReport:
    h_grid: tuple[float, ...]
    values: dict[int, tuple[complex, ...]]  # j -> values
    min_pair_slope: dict[int, float]
    baseline: float  # (N+1)/α
    order_A: int  # vanishing order β of A at the corner
    passed: bool


def _poly_eval(coeffs, z):
    out = np.zeros(np.shape(z), dtype=complex)
    for c in reversed(coeffs):
        out = out * z + c
    return out


def general_A_invariance(
    A_coeffs: Sequence[complex],
    N: int,
    params: PhaseParams,
    sector: SectorDomain,
    h_grid=DEFAULT_H_GRID,
    b: tuple[complex, complex] = (1.0, 1.0),
) -> InvarianceReport:
    """Check ∫ V·∇(A_j e^{-Φ_j/h}) dx = o(h^{(N+1)/α}) when eq. 2θ0 = lπ/(1+N) holds.

    ``A_coeffs`` are the coefficients of the polynomial A(z) = Σ c_n z^n and
    V = b1 (1, i) z^N + b2 (1, -i) z̄^N. With β the vanishing order of A,
    the test passes when every consecutive-pair exponent exceeds
    (N+1)/α + 0.5 (β = 0) or (N+1+β)/α - 0.1 (β ≥ 1).
    """
    params.check_sector(sector)
    if angle_vanishing(sector.theta0, N) is None:
        raise PreconditionError("the aperture does not satisfy 2θ0 = lπ/(1+N)")
    coeffs = [complex(c) for c in A_coeffs]
    if not any(coeffs):
        raise ConfigurationError("A must be non-zero")
    beta = next(i for i, c in enumerate(coeffs) if c != 0)
    dcoeffs = [n * c for n, c in enumerate(coeffs)][1:] or [0j]
    b1, b2 = complex(b[0]), complex(b[1])
    hs = tuple(sorted((float(x) for x in h_grid), reverse=True))
    out: dict[int, list[complex]] = {1: [], 2: []}
    for h in hs:
        for j in (1, 2):

            def f(z, j=j, h=h):
                zN = z**N
                V = np.stack([b1 * zN + b2 * np.conj(zN), 1j * (b1 * zN - b2 * np.conj(zN))], axis=-1)
                A = _poly_eval(coeffs, z)
                dA = _poly_eval(dcoeffs, z)
                if j == 2:
                    A, dA = np.conj(A), np.conj(dA)
                    gA = np.stack([dA, -1j * dA], axis=-1)
                else:
                    gA = np.stack([dA, 1j * dA], axis=-1)
                gp = analytic.grad_phase(z, params, conjugate=(j == 2)) / h
                return _dot(V, gA - A[..., None] * gp) * _decay(z, params, j, h)

            out[j].append(sector_quadrature(f, sector, params.alpha, h))
    baseline = (N + 1) / params.alpha
    threshold = baseline + 0.5 if beta == 0 else (N + 1 + beta) / params.alpha - 0.1
    slopes = {}
    for j in (1, 2):
        m = np.abs(np.asarray(out[j]))
        with np.errstate(divide="ignore"):
            pair = np.diff(np.log(m)) / np.diff(np.log(hs))
        slopes[j] = float(np.min(pair))
    passed = all(s >= threshold for s in slopes.values())
    return InvarianceReport(hs, {j: tuple(v) for j, v in out.items()}, slopes, baseline, beta, passed)
