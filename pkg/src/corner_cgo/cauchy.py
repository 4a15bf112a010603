"""Cauchy transforms 𝒯f = π^{-1}∫ f(ζ)/(z-ζ) dA(ζ) on the sector grid.

The sum over source nodes skips the diagonal. On its own that is the
equal-area-disk rule (a disk centred at the target contributes nothing to
the principal value). The ``"constant"`` rule adds a per-node constant chosen
so that the discrete transform of f ≡ 1 equals the exact closed form
𝒯1(z); the default ``"linear"`` rule also makes the transforms of t and θ
exact. Writing f(ζ) = f(z) + (f(ζ) - f(z)) shows the result is then
accurate to the quadrature error of a bounded integrand.
"""

from __future__ import annotations

import math
import os
import weakref

import numba
import numpy as np

from .errors import ConfigurationError, NumericalError
from .quadrature import ComplexFieldSample, PolarGrid

METHODS = ("linear", "constant", "disk")


if "NUMBA_THREADING_LAYER" not in os.environ:
    # omp is thread-safe and always present in the wheels; avoids the TBB version warning
    numba.config.THREADING_LAYER = "omp"


@numba.njit(parallel=True, cache=True, fastmath=False)
def _cauchy_sum(x, y, wr, wi):  # pragma: no cover - compiled
    # Σ_{j≠i} (w f)_j / (z_i - z_j) / π with real arithmetic; the order of
    # the inner sum is fixed, so results do not depend on the thread count.
    n = x.size
    out_r = np.empty(n)
    out_i = np.empty(n)
    for i in numba.prange(n):
        xi = x[i]
        yi = y[i]
        ar = 0.0
        ai = 0.0
        for j in range(n):
            if j != i:
                dx = xi - x[j]
                dy = yi - y[j]
                inv = 1.0 / (dx * dx + dy * dy)
                # (wr + i wi)(dx - i dy) * inv
                ar += (wr[j] * dx + wi[j] * dy) * inv
                ai += (wi[j] * dx - wr[j] * dy) * inv
        out_r[i] = ar / np.pi
        out_i[i] = ai / np.pi
    return out_r + 1j * out_i


def _apply_sum(z: np.ndarray, wf: np.ndarray) -> np.ndarray:
    return _cauchy_sum(
        np.ascontiguousarray(z.real),
        np.ascontiguousarray(z.imag),
        np.ascontiguousarray(wf.real),
        np.ascontiguousarray(wf.imag),
    )


def _log_ratio(num, den):
    return np.log(num / den)


def _ray_moment(z, p, m):
    """∫_0^p ζ^m/(ζ - z) dζ along the segment [0, p]."""
    acc = z**m * _log_ratio(p - z, -z)
    for k in range(m):
        acc = acc + z ** (m - 1 - k) * p ** (k + 1) / (k + 1)
    return acc


def _arc_moment(z, theta0, a, m):
    """∫_arc ζ̄^m/(ζ - z) dζ over the arc |ζ| = a, |arg ζ| < θ₀, counter-clockwise."""
    out = np.empty_like(z)
    near = np.abs(z) < 0.5 * a
    if np.any(near):
        # ζ̄^m = a^{2m} ζ^{-m}; expand 1/(ζ - z) in powers of z/ζ
        zn = z[near] / a
        acc = np.zeros_like(zn)
        pw = np.ones_like(zn)
        for n in range(90):
            acc += pw * (2j * math.sin((m + n) * theta0) / (m + n))
            pw = pw * zn
        out[near] = a**m * acc
    far = ~near
    if np.any(far):
        zf = z[far]
        p1, p2 = a * np.exp(-1j * theta0), a * np.exp(1j * theta0)
        inside_seg = (zf.real > a * math.cos(theta0)) & (np.abs(zf) < a)
        acc = (2j * np.pi * inside_seg - _log_ratio(p1 - zf, p2 - zf)) / zf**m
        # 1/(ζ^m(ζ-z)) = z^{-m}/(ζ-z) - Σ_{k=1}^m z^{-k} ζ^{k-m-1}
        for k in range(1, m + 1):
            e = k - m
            mom = 2j * theta0 if e == 0 else a**e * 2j * math.sin(e * theta0) / e
            acc = acc - mom / zf**k
        out[far] = a ** (2 * m) * acc
    return out


def sector_cauchy_conj_power(z, theta0: float, radius_a: float = 1.0, m: int = 1):
    """Closed form of 𝒯(ζ̄^{m-1})(z) = π^{-1}∫_G ζ̄^{m-1}/(z-ζ) dA for the sector G.

    By Pompeiu's formula with the primitive ζ̄^m/m,
    𝒯(ζ̄^{m-1}) = (z̄^m/m)·1_G(z) - (2πi m)^{-1}∮_{∂G} ζ̄^m/(ζ-z) dζ,
    and ζ̄ is e^{±2iθ₀}ζ on the rays and a²/ζ on the arc. Valid for z off ∂G.
    """
    if m < 1:
        raise ConfigurationError("m must be a positive integer")
    z = np.asarray(z, dtype=complex)
    a = float(radius_a)
    p1, p2 = a * np.exp(-1j * theta0), a * np.exp(1j * theta0)
    contour = (
        np.exp(2j * m * theta0) * _ray_moment(z, p1, m)
        - np.exp(-2j * m * theta0) * _ray_moment(z, p2, m)
        + _arc_moment(z, theta0, a, m)
    )
    inside = (np.abs(z) < a) & (np.abs(np.angle(z)) < theta0)
    return np.where(inside, np.conj(z) ** m / m, 0.0) - contour / (2j * np.pi * m)


def sector_cauchy_of_one(z, theta0: float, radius_a: float = 1.0):
    """Closed form of 𝒯1(z) = π^{-1}∫_G dA(ζ)/(z-ζ) for the sector G, any z off ∂G."""
    return sector_cauchy_conj_power(z, theta0, radius_a, 1)


_CORRECTION_CACHE: "weakref.WeakKeyDictionary[PolarGrid, tuple]" = weakref.WeakKeyDictionary()


def _flat(grid: PolarGrid):
    return grid.Z.ravel(), grid.weights.ravel()


def _exact_coordinate_transforms(grid: PolarGrid) -> tuple[np.ndarray, np.ndarray]:
    """Exact 𝒯[t] and 𝒯[θ] at the nodes, t = r^β the radial grading variable.

    Primitives in z̄: ∂̄(z^{β/2} z̄^{β/2+1}/(β/2+1)) = r^β and ∂̄(z̄(θ - i/2)) = θ;
    Pompeiu's formula turns each into a boundary Cauchy integral.
    """
    beta = grid.alpha
    z = grid.Z.ravel()
    th0, rad = grid.sector.theta0, grid.sector.radius_a

    def prim_t(s):
        return s ** (beta / 2) * np.conj(s) ** (beta / 2 + 1) / (beta / 2 + 1)

    def prim_theta(s):
        return np.conj(s) * (np.angle(s) - 0.5j)

    tt = prim_t(z) - boundary_cauchy(z, th0, rad, prim_t)
    tth = prim_theta(z) - boundary_cauchy(z, th0, rad, prim_theta)
    return tt, tth


def correction_vectors(grid: PolarGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-node corrections (c, a, b) making the rule exact for 1, t - t_i and θ - θ_i.

    With K the off-diagonal point rule and u ∈ {t, θ} the grid coordinates,
    c_i = 𝒯1(z_i) - (K1)_i and the gradient weights are
    (𝒯u - u_i 𝒯1)(z_i) - (Ku - u_i K1)_i.
    """
    cached = _CORRECTION_CACHE.get(grid)
    if cached is not None:
        return cached
    z, w = _flat(grid)
    th0, rad = grid.sector.theta0, grid.sector.radius_a
    t = np.abs(z) ** grid.alpha
    th = np.angle(z)
    t1 = sector_cauchy_of_one(z, th0, rad)
    tt, tth = _exact_coordinate_transforms(grid)
    k1 = _apply_sum(z, w.astype(complex))
    kt = _apply_sum(z, (w * t).astype(complex))
    kth = _apply_sum(z, (w * th).astype(complex))
    c = t1 - k1
    a = (tt - t * t1) - (kt - t * k1)
    b = (tth - th * t1) - (kth - th * k1)
    for v in (c, a, b):
        v.flags.writeable = False
    _CORRECTION_CACHE[grid] = (c, a, b)
    return c, a, b


def correction_vector(grid: PolarGrid) -> np.ndarray:
    """c_i = 𝒯1(z_i) - Σ_{j≠i} w_j / (π(z_i - z_j))."""
    return correction_vectors(grid)[0]


def cauchy_apply(f: ComplexFieldSample, conjugate: bool = False, method: str = "linear") -> ComplexFieldSample:
    """Apply 𝒯, or with ``conjugate`` its mirror 𝒯̄f = π^{-1}∫ f/(z̄ - ζ̄) dA.

    𝒯̄ is evaluated as conj(𝒯 conj f). ``method`` selects the local
    correction to the off-diagonal point rule: ``"linear"`` (default; exact
    for f linear in the grid coordinates (t, θ), using finite-difference
    derivatives of f), ``"constant"`` (exact for constant f) or ``"disk"``
    (plain equal-area-disk rule, no correction).
    """
    if method not in METHODS:
        raise ConfigurationError(f"unknown Cauchy method {method!r}; choose from {METHODS}")
    grid = f.grid
    vals = f.values
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite input to the Cauchy transform")
    if conjugate:
        vals = np.conj(vals)
    z, w = _flat(grid)
    flat = vals.ravel()
    out = _apply_sum(z, w * flat)
    if method != "disk":
        c, a, b = correction_vectors(grid)
        out = out + c * flat
        if method == "linear":
            ft = np.gradient(vals, grid.t, axis=0, edge_order=2).ravel()
            fth = np.gradient(vals, grid.dtheta, axis=1, edge_order=2).ravel()
            out = out + a * ft + b * fth
    if conjugate:
        out = np.conj(out)
    return ComplexFieldSample(grid, out.reshape(grid.shape))


# -- boundary Cauchy integrals ------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_GRADE_LEVELS = 40  # geometric refinement steps toward the corner (2^-40 ~ 1e-12)


def _graded_breaks(length: float, centers: np.ndarray, dist: np.ndarray, corner_levels: int, fixed=None) -> np.ndarray:
    """Per-target panel breakpoints on [0, length].

    Panels shrink geometrically toward 0 (corner singularities of the boundary
    data) and toward each target's projection ``centers`` with base scale
    ``dist``, so the kernel 1/(ζ - z) is resolved for targets close to the piece.
    The number of steps around the targets is set by the closest one.
    """
    n = centers.size
    k = 2.0 ** -np.arange(corner_levels)
    toward0 = np.broadcast_to(length * k, (n, k.size))
    # the innermost panels have half-width dist/2, so 16-point Gauss rules converge fast
    n_around = int(np.clip(np.ceil(np.log2(length / max(float(dist.min()), 1e-300))) + 2, 1, 50))
    steps = 0.5 * dist[:, None] * 2.0 ** np.arange(n_around)[None, :]
    around = np.concatenate([centers[:, None] - steps, centers[:, None] + steps], axis=1)
    parts = [np.zeros((n, 1)), np.full((n, 1), length), toward0, np.clip(around, 0.0, length)]
    if fixed is not None and fixed.size:
        parts.append(np.broadcast_to(fixed, (n, fixed.size)))
    brk = np.concatenate(parts, axis=1)
    brk.sort(axis=1)
    return brk


_PHASE_STEP = 4.0  # max advance (radians) of an oscillating factor of g per panel
_PHASE_SAMPLES = 4097


def _oscillation_breaks(length: float, point, phase_fn) -> np.ndarray:
    """Breakpoints at which ``phase_fn`` along the piece advances by at most _PHASE_STEP."""
    if phase_fn is None:
        return np.empty(0)
    u = length * np.linspace(0.0, 1.0, _PHASE_SAMPLES) ** 2  # denser near u = 0 (the corner on rays)
    ph = np.asarray(phase_fn(point(u)), dtype=float)
    cum = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(ph)))])
    n = int(np.ceil(cum[-1] / _PHASE_STEP))
    if n <= 1:
        return np.empty(0)
    return np.interp(np.linspace(0.0, cum[-1], n + 1)[1:-1], cum, u)


def _piece_integral(zc, param_len, point, dpoint, g, centers, dist, corner_levels, chunk=512, phase_fn=None):
    """∫_0^L g(ζ(u)) ζ'(u) / (ζ(u) - z) du for every target z, vectorised in chunks."""
    out = np.empty(zc.size, dtype=complex)
    fixed = _oscillation_breaks(param_len, point, phase_fn)
    x = 0.5 * (_GL_NODES + 1.0)
    order = np.argsort(dist)  # chunks of similar distance share a panel count
    for s in range(0, zc.size, chunk):
        idx = order[s : s + chunk]
        brk = _graded_breaks(param_len, centers[idx], dist[idx], corner_levels, fixed)
        lo, width = brk[:, :-1], np.diff(brk, axis=1)
        u = lo[..., None] + width[..., None] * x  # (m, panels, 16)
        wq = width[..., None] * (0.5 * _GL_WEIGHTS)
        zeta = point(u)
        vals = g(zeta) * dpoint(u) / (zeta - zc[idx, None, None])
        out[idx] = np.sum((vals * wq).reshape(vals.shape[0], -1), axis=1)
    return out


def boundary_cauchy(z, theta0: float, radius_a: float, g, phase_fn=None) -> np.ndarray:
    """(2πi)^{-1}∮_{∂G} g(ζ)/(ζ - z) dζ over the sector boundary, counter-clockwise.

    ``g`` is a vectorised function of boundary points; it may have a
    power-type singularity at the corner but should be smooth elsewhere on
    each piece. When g carries an oscillating factor e^{i·phase_fn(ζ)},
    pass ``phase_fn`` so the panels resolve it. Accuracy is near machine
    precision for targets off ∂G.
    """
    z = np.asarray(z, dtype=complex).ravel()
    a = float(radius_a)
    total = np.zeros_like(z)
    for sgn in (-1.0, 1.0):
        e = np.exp(1j * sgn * theta0)
        proj = np.clip((z * np.conj(e)).real, 0.0, a)
        dist = np.maximum(np.abs(z - proj * e), 1e-14)
        val = _piece_integral(z, a, lambda u, e=e: u * e, lambda u, e=e: e, g, proj, dist, _GRADE_LEVELS, phase_fn=phase_fn)
        # the lower ray runs outward, the upper one back to the corner
        total += val if sgn < 0 else -val
    psi_proj = np.clip(np.angle(z), -theta0, theta0) + theta0
    # in the angle parameter the kernel pole sits at imaginary distance |log(|z|/a)|
    dist = np.maximum(np.abs(np.log(np.maximum(np.abs(z), 1e-300) / a)), 1e-14)
    total += _piece_integral(
        z,
        2.0 * theta0,
        lambda u: a * np.exp(1j * (u - theta0)),
        lambda u: 1j * a * np.exp(1j * (u - theta0)),
        g,
        psi_proj,
        dist,
        0,
        phase_fn=phase_fn,
    )
    return total / (2j * np.pi)
