"""CGO solutions W = e^{-Φ/h}(A + w_h) of (Δ + q)W = 0 on a sector.

With E = e^{2iφ/h} (φ = Im Φ) the correction w_h is the Neumann series
w_h = Σ_{j≥1} S^j A of the operator

    S f  = (ih/4) S₁ S₀ (q f)
    S₀ f = 𝒯̄(E^{-1} f)
    S₁ f = E f/(2∂̄φ) - 𝒯(E [∂̄f/(2∂̄φ) + f ∂̄(2∂̄φ)^{-1}]).

Since ∂𝒯̄ = ∂̄𝒯 = I, one has ∂̄S₁f = (i/h)E f and ∂S₀f = E^{-1} f, and
these give ΔW + qW = 0 for the exact fixed point. ‖S‖ = O(h), so the
series converges for small h.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import analytic
from .analytic import PhaseParams
from .cauchy import boundary_cauchy, cauchy_apply
from .errors import ConfigurationError, ConvergenceError, DivergenceError, NumericalError
from .quadrature import (
    ComplexFieldSample,
    NormReport,
    PolarGrid,
    fd_dbar,
    fd_laplacian,
    fd_partial,
    lp_norm,
    norm_report,
    w1p_norm,
)

FieldLike = "ComplexFieldSample | Callable | complex"

NEUMANN_TOL = 1e-10
NEUMANN_MAXITER = 50
DIVERGENCE_RUN = 3
INTERIOR_MARGIN = 2
_FLOOR = 1e-300


def as_sample(grid: PolarGrid, f) -> ComplexFieldSample:
    """Sample a constant, a callable of the complex nodes, or pass a sample through."""
    if isinstance(f, ComplexFieldSample):
        if f.grid is not grid:
            raise ConfigurationError("sample belongs to a different grid")
        return f
    if callable(f):
        return grid.sample(f)
    return ComplexFieldSample(grid, np.full(grid.shape, complex(f)))


@dataclass(frozen=True)
class PotentialSpec:
    """The potential q, either given directly or reduced from a medium (γ, ρ, k).

    Fields may be constants or callables of the complex position. For a
    medium, q = k²ρ/γ - γ^{-1/2}Δγ^{1/2}; the Laplacian is zero for constant
    γ, taken from ``lap_sqrt_gamma`` when given, and a finite difference
    otherwise.
    """

    kind: str = "explicit-q"
    q: object = 0.0
    gamma: object = None
    rho: object = None
    k: float = 0.0
    lap_sqrt_gamma: object = None

    def __post_init__(self):
        if self.kind not in ("explicit-q", "medium-derived"):
            raise ConfigurationError(f"unknown potential kind {self.kind!r}")
        if self.kind == "medium-derived" and (self.gamma is None or self.rho is None):
            raise ConfigurationError("medium-derived potential needs gamma and rho")

    @classmethod
    def explicit(cls, q) -> "PotentialSpec":
        return cls(kind="explicit-q", q=q)

    @classmethod
    def medium(cls, gamma, rho, k: float, lap_sqrt_gamma=None) -> "PotentialSpec":
        return cls(kind="medium-derived", gamma=gamma, rho=rho, k=float(k), lap_sqrt_gamma=lap_sqrt_gamma)

    @property
    def is_medium(self) -> bool:
        return self.kind == "medium-derived"

    def gamma_sample(self, grid: PolarGrid) -> ComplexFieldSample:
        g = as_sample(grid, self.gamma)
        if np.any(np.abs(g.values.imag) > 0) or np.any(g.values.real <= 0):
            raise ConfigurationError("gamma must be real and positive on the grid")
        return g

    def q_sample(self, grid: PolarGrid) -> ComplexFieldSample:
        if not self.is_medium:
            q = as_sample(grid, self.q)
        else:
            g = self.gamma_sample(grid)
            rho = as_sample(grid, self.rho)
            sq = ComplexFieldSample(grid, np.sqrt(g.values.real))
            if self.lap_sqrt_gamma is not None:
                lap = as_sample(grid, self.lap_sqrt_gamma).values
            elif callable(self.gamma):
                lap = fd_laplacian(sq).values
            else:
                lap = 0.0
            q = ComplexFieldSample(grid, self.k**2 * rho.values / g.values - lap / sq.values)
        if not q.is_finite():
            raise NumericalError("potential q is not finite on the grid")
        return q

    def conjugated(self) -> "PotentialSpec":
        if self.is_medium:
            return self  # media are real
        q = self.q
        if callable(q):
            return PotentialSpec.explicit(lambda z, _q=q: np.conj(_q(z)))
        if isinstance(q, ComplexFieldSample):
            return PotentialSpec.explicit(q.conj())
        return PotentialSpec.explicit(complex(q).conjugate())


@dataclass(frozen=True, eq=False)
class _PhaseFactors:
    E: np.ndarray  # e^{2iφ/h}
    inv2: np.ndarray  # (2∂̄φ)^{-1}
    dinv2: np.ndarray  # ∂̄ (2∂̄φ)^{-1}


def _factors(grid: PolarGrid, params: PhaseParams) -> _PhaseFactors:
    Z = grid.Z
    phi = analytic.phase_im(Z, params)
    return _PhaseFactors(
        E=np.exp(2j * phi / params.h),
        inv2=0.5 * analytic.dbar_phase_im_inv(Z, params),
        dinv2=0.5 * analytic.dbar_of_phase_inv(Z, params),
    )


def op_S0(f: ComplexFieldSample, params: PhaseParams) -> ComplexFieldSample:
    """S₀f = 𝒯̄(e^{-2iφ/h} f); ``params.h`` supplies h."""
    fac = _factors(f.grid, params)
    return cauchy_apply(ComplexFieldSample(f.grid, f.values / fac.E), conjugate=True)


_SINGULAR_CACHE: "weakref.WeakKeyDictionary[PolarGrid, dict]" = weakref.WeakKeyDictionary()


def _singular_transform(grid: PolarGrid, params: PhaseParams) -> np.ndarray:
    """𝒯 of E ∂̄(2∂̄φ)^{-1} at the nodes.

    The density grows like r^{-α} at the corner, where the point rule cannot
    resolve it. Since ∂̄(E/(2∂̄φ)) = (i/h)E + E ∂̄(2∂̄φ)^{-1}, Pompeiu's
    formula gives 𝒯(E ∂̄(2∂̄φ)^{-1}) = E/(2∂̄φ) - 𝒞[E/(2∂̄φ)] - (i/h)𝒯E,
    where 𝒞 is the boundary Cauchy integral (done by graded 1-D quadrature)
    and 𝒯E has a bounded density that is continuous at the corner.
    """
    per_grid = _SINGULAR_CACHE.setdefault(grid, {})
    key = (params.alpha, params.h)
    if key not in per_grid:
        a, h = params.alpha, params.h
        sec = grid.sector
        fac = _factors(grid, params)

        def boundary_data(s):
            # E/(2∂̄φ) = -(i/α) z̄^{1-α} e^{2i Im(z^α)/h}, continuous up to ∂G
            return (-1j / a) * np.conj(s) ** (1.0 - a) * np.exp(2j * (s**a).imag / h)

        def boundary_phase(s):
            return 2.0 * (s**a).imag / h

        bdry = boundary_cauchy(grid.Z, sec.theta0, sec.radius_a, boundary_data, boundary_phase).reshape(grid.shape)
        tE = cauchy_apply(ComplexFieldSample(grid, fac.E)).values
        psi = fac.E * fac.inv2 - bdry - (1j / h) * tE
        psi.flags.writeable = False
        per_grid[key] = psi
    return per_grid[key]


def corner_value(f: ComplexFieldSample) -> complex:
    """Estimate of f at the corner: the mean over the innermost ring of nodes."""
    return complex(np.mean(f.values[0]))


def op_S1(f: ComplexFieldSample, params: PhaseParams) -> ComplexFieldSample:
    """S₁f = E f/(2∂̄φ) - 𝒯(E ∂̄(f/(2∂̄φ))) with ∂̄f by finite differences.

    The density E[∂̄f/(2∂̄φ) + f ∂̄(2∂̄φ)^{-1}] is split into a part that
    vanishes at the corner plus f(0)·E ∂̄(2∂̄φ)^{-1}, whose transform is
    evaluated semi-analytically.
    """
    g = f.grid
    fac = _factors(g, params)
    df = fd_dbar(f).values
    fc = corner_value(f)
    inner = ComplexFieldSample(g, fac.E * (df * fac.inv2 + (f.values - fc) * fac.dinv2))
    T = cauchy_apply(inner).values + fc * _singular_transform(g, params)
    return ComplexFieldSample(g, fac.E * f.values * fac.inv2 - T)


def op_S(f: ComplexFieldSample, pot: PotentialSpec | ComplexFieldSample, params: PhaseParams) -> ComplexFieldSample:
    """Sf = (ih/4) S₁ S₀ (q f)."""
    q = pot if isinstance(pot, ComplexFieldSample) else pot.q_sample(f.grid)
    if not np.any(q.values):
        return f.grid.zeros()
    s1 = op_S1(op_S0(q * f, params), params)
    return s1 * (0.25j * params.h)


def neumann_solve(
    A,
    pot: PotentialSpec,
    params: PhaseParams,
    grid: PolarGrid | None = None,
    tol: float = NEUMANN_TOL,
    maxiter: int = NEUMANN_MAXITER,
) -> tuple[ComplexFieldSample, int]:
    """w_h = Σ_{j≥1} S^j A, stopped once ‖S^j A‖₂ ≤ tol·(‖partial sum‖₂ + floor).

    Raises DivergenceError when the term norms grow three times in a row and
    ConvergenceError (carrying the partial sum) when ``maxiter`` is reached.
    """
    if grid is None:
        if not isinstance(A, ComplexFieldSample):
            raise ConfigurationError("pass a grid or a sampled amplitude")
        grid = A.grid
    A = as_sample(grid, A)
    q = pot.q_sample(grid)
    total = grid.zeros()
    term = A
    history: list[float] = []
    growing = 0
    for it in range(1, maxiter + 1):
        term = op_S(term, q, params)
        tn = lp_norm(term, 2)
        if not math.isfinite(tn):
            raise NumericalError("Neumann term is not finite", {"iteration": it})
        total = total + term
        if history and tn > history[-1]:
            growing += 1
            if growing >= DIVERGENCE_RUN:
                raise DivergenceError(
                    f"Neumann terms grew {DIVERGENCE_RUN} times in a row; h={params.h} is too large",
                    {"term_norms": history + [tn]},
                )
        else:
            growing = 0
        history.append(tn)
        if tn <= tol * (lp_norm(total, 2) + _FLOOR) or tn == 0.0:
            return total, it
    raise ConvergenceError(
        f"Neumann series not converged after {maxiter} terms",
        partial=total,
        diagnostics={"term_norms": history},
    )


@dataclass(frozen=True, eq=False)
class CgoSolution:
    params: PhaseParams
    A: ComplexFieldSample
    w_h: ComplexFieldSample
    W: ComplexFieldSample
    residual_rel: float
    norms: dict[str, NormReport]
    iterations: int
    conjugate: bool = False
    w_medium: ComplexFieldSample | None = None
    p1: float = field(default=float("nan"))
    p2: float = field(default=float("nan"))

    @property
    def grid(self) -> PolarGrid:
        return self.W.grid


def default_exponents(alpha: float) -> tuple[float, float]:
    """(p₁, p₂) = (2/α + 2, (2 + 2/α)/2), interior points of the admissible ranges."""
    return 2.0 / alpha + 2.0, (2.0 + 2.0 / alpha) / 2.0


def cgo_residual(A: ComplexFieldSample, w_h: ComplexFieldSample, q: ComplexFieldSample, params: PhaseParams, margin=INTERIOR_MARGIN) -> float:
    """‖ΔW + qW‖₂ / (‖q‖_∞ ‖W‖₂) on the interior, for W = e^{-Φ/h}(A + w_h).

    Uses ΔW + qW = e^{-Φ/h}[4E ∂(E^{-1} ∂̄w_h) + q(A + w_h)] with
    E = e^{2iφ/h}, valid for holomorphic A. Differentiating only w_h avoids
    the huge cancelling terms of a direct Laplacian of W, and keeping E
    inside the outer derivative avoids the r^{α-1}/h growth of Φ'.
    """
    g = A.grid
    decay = np.exp(-analytic.phase(g.Z, params) / params.h)
    U = A.values + w_h.values
    E = np.exp(2j * analytic.phase_im(g.Z, params) / params.h)
    inner = ComplexFieldSample(g, fd_dbar(w_h).values / E)
    res = decay * (4.0 * E * fd_partial(inner).values + q.values * U)
    W = ComplexFieldSample(g, decay * U)
    mask = g.interior_mask(margin)
    qinf = float(np.max(np.abs(q.values)))
    denom = max(qinf, 1e-300) * lp_norm(W, 2, mask)
    return lp_norm(ComplexFieldSample(g, res), 2, mask) / denom


def build_cgo(
    A,
    pot: PotentialSpec,
    params: PhaseParams,
    grid: PolarGrid | None = None,
    conjugate: bool = False,
    tol: float = NEUMANN_TOL,
    maxiter: int = NEUMANN_MAXITER,
    exponents: tuple[float, float] | None = None,
) -> CgoSolution:
    """Assemble W = e^{-Φ/h}(A + w_h) and its residual and norm report.

    ``A`` is a holomorphic amplitude: a constant or a callable of z (a sample
    is accepted too). With ``conjugate`` the solution of (Δ + q)W = 0 with
    phase Φ̄ is returned, namely the complex conjugate of the Φ-solution for
    q̄; its amplitude is Ā.
    """
    if grid is None:
        if not isinstance(A, ComplexFieldSample):
            raise ConfigurationError("pass a grid or a sampled amplitude")
        grid = A.grid
    params.check_sector(grid.sector)
    A_s = as_sample(grid, A)
    solve_pot = pot.conjugated() if conjugate else pot
    q = solve_pot.q_sample(grid)
    w_h, its = neumann_solve(A_s, solve_pot, params, grid, tol, maxiter)
    residual = cgo_residual(A_s, w_h, q, params)
    decay = np.exp(-analytic.phase(grid.Z, params) / params.h)
    W = ComplexFieldSample(grid, decay * (A_s.values + w_h.values))
    p1, p2 = exponents or default_exponents(params.alpha)
    norms = {"p1": norm_report(w_h, p1), "p2": norm_report(w_h, p2)}
    if conjugate:
        A_s, w_h, W = A_s.conj(), w_h.conj(), W.conj()
    w_medium = None
    if pot.is_medium:
        g = pot.gamma_sample(grid)
        w_medium = W / np.sqrt(g.values.real)
    return CgoSolution(
        params=params,
        A=A_s,
        w_h=w_h,
        W=W,
        residual_rel=residual,
        norms=norms,
        iterations=its,
        conjugate=conjugate,
        w_medium=w_medium,
        p1=p1,
        p2=p2,
    )


@dataclass(frozen=True)
class SMappingTrend:
    h: tuple[float, ...]
    p: float
    probes: tuple[str, ...]
    lp_ratio: np.ndarray  # shape (len(h), len(probes))
    w1p_ratio: np.ndarray
    lp_slope: float
    w1p_spread: float  # max/min of the W^{1,p} ratios, per probe, worst case


def default_probes(grid: PolarGrid) -> dict[str, ComplexFieldSample]:
    c = 0.5 * grid.sector.radius_a
    return {
        "constant": as_sample(grid, 1.0),
        "gaussian": grid.sample(lambda z: np.exp(-np.abs(z - c) ** 2 / (0.2 * grid.sector.radius_a) ** 2)),
        "monomial": grid.sample(lambda z: z * np.conj(z)),
    }


def _slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def verify_smapping(
    pot: PotentialSpec,
    h_grid,
    p: float,
    grid: PolarGrid,
    alpha: float,
    probes: dict[str, ComplexFieldSample] | None = None,
) -> SMappingTrend:
    """Tabulate ‖Sf‖_p/‖f‖_p and ‖Sf‖_{W^{1,p}}/‖f‖_p over ``h_grid``.

    ``lp_slope`` is the least-squares slope of log(mean Lᵖ ratio) against log h.
    """
    probes = probes or default_probes(grid)
    hs = tuple(sorted(float(h) for h in h_grid))
    names = tuple(probes)
    lp = np.zeros((len(hs), len(names)))
    w1 = np.zeros_like(lp)
    q = pot.q_sample(grid)
    for i, h in enumerate(hs):
        prm = PhaseParams(alpha, h)
        for j, name in enumerate(names):
            f = probes[name]
            sf = op_S(f, q, prm)
            fn = lp_norm(f, p)
            lp[i, j] = lp_norm(sf, p) / fn
            w1[i, j] = w1p_norm(sf, p) / fn
    if np.all(lp == 0):
        slope = float("nan")
        spread = 1.0
    else:
        slope = _slope(hs, np.exp(np.mean(np.log(lp), axis=1)))
        spread = float(np.max(w1.max(axis=0) / w1.min(axis=0)))
    return SMappingTrend(h=hs, p=p, probes=names, lp_ratio=lp, w1p_ratio=w1, lp_slope=slope, w1p_spread=spread)
