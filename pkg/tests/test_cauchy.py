import math

import mpmath
import numpy as np
import pytest

from corner_cgo.analytic import SectorDomain
from corner_cgo.cauchy import (
    boundary_cauchy,
    cauchy_apply,
    sector_cauchy_conj_power,
    sector_cauchy_of_one,
)
from corner_cgo.errors import ConfigurationError
from corner_cgo.quadrature import build_sector_grid, fd_dbar, fd_partial, lp_norm

S60 = SectorDomain(math.pi / 3)


def gaussian(g, c=0.5, s=0.2):
    return g.sample(lambda z: np.exp(-np.abs(z - c) ** 2 / s**2))


def brute_T(fn, z, theta0, a=1.0):
    """π^{-1}∫ f(ζ)/(z-ζ) dA by adaptive polar quadrature (z off the grid)."""
    with mpmath.workdps(20):
        z = mpmath.mpc(z.real, z.imag)

        def inner(r, t):
            zeta = r * mpmath.exp(1j * t)
            return fn(zeta) / (z - zeta) * r

        val = mpmath.quad(inner, [0, abs(z), a], [-theta0, mpmath.arg(z), theta0])
        return complex(val / mpmath.pi)


def test_closed_form_T1_matches_brute_force():
    for z in (0.4 + 0.1j, 0.9 - 0.3j, 1.5 + 0.2j, -0.3 + 0.2j):
        assert sector_cauchy_of_one(np.array([z]), S60.theta0)[0] == pytest.approx(brute_T(lambda w: 1, z, S60.theta0), abs=1e-9)


@pytest.mark.parametrize("m", [2, 3])
def test_closed_form_conj_powers(m):
    z = 0.35 - 0.2j
    ref = brute_T(lambda w: mpmath.conj(w) ** (m - 1), z, S60.theta0)
    assert sector_cauchy_conj_power(np.array([z]), S60.theta0, 1.0, m)[0] == pytest.approx(ref, abs=1e-9)


def test_zero_maps_to_zero():
    g = build_sector_grid(S60, 32, 16, 0.5)
    assert np.all(cauchy_apply(g.zeros()).values == 0)


def test_unknown_method_rejected():
    g = build_sector_grid(S60, 32, 16, 0.5)
    with pytest.raises(ConfigurationError):
        cauchy_apply(g.zeros(), method="fmm")


def test_constant_is_exact_on_the_grid():
    g = build_sector_grid(S60, 48, 32, 0.5)
    Tf = cauchy_apply(g.sample(lambda z: 0 * z + 1))
    assert np.max(np.abs(Tf.values - sector_cauchy_of_one(g.Z, S60.theta0))) < 1e-12


def test_disk_proxy_reproduces_zbar():
    s = SectorDomain(0.999 * math.pi)
    g = build_sector_grid(s, 128, 128, 1.0)
    Tf = cauchy_apply(g.sample(lambda z: 0 * z + 1))
    m = np.abs(g.Z) <= 0.5
    assert np.max(np.abs(Tf.values - np.conj(g.Z))[m]) <= 1e-2 * 0.5


def test_against_brute_force_at_nodes():
    g = build_sector_grid(S60, 64, 48, 0.5)
    f = gaussian(g)
    Tf = cauchy_apply(f)
    for idx in ((20, 10), (40, 30), (55, 5)):
        z = g.Z[idx]
        ref = brute_T(lambda w: mpmath.exp(-abs(w - 0.5) ** 2 / 0.04), z, S60.theta0)
        assert abs(Tf.values[idx] - ref) < 2e-3 * max(1.0, abs(ref))


@pytest.mark.parametrize("conjugate", [False, True])
def test_right_inverse_improves_under_refinement(conjugate):
    errs = []
    for nr, nt in ((32, 24), (64, 48)):
        g = build_sector_grid(S60, nr, nt, 0.5)
        f = gaussian(g)
        T = cauchy_apply(f, conjugate=conjugate)
        d = fd_partial(T) if conjugate else fd_dbar(T)
        errs.append(lp_norm(d - f, 2) / lp_norm(f, 2))
    assert errs[1] <= 2e-2
    assert errs[0] / errs[1] >= 1.5


def test_conjugate_is_mirror():
    g = build_sector_grid(S60, 32, 24, 0.5)
    f = g.sample(lambda z: np.exp(1j * z) * (1 + np.abs(z)))
    a = cauchy_apply(f, conjugate=True).values
    b = np.conj(cauchy_apply(f.conj()).values)
    assert np.allclose(a, b)


@pytest.mark.parametrize("method", ["disk", "constant", "linear"])
def test_methods_agree_roughly(method):
    g = build_sector_grid(S60, 64, 48, 0.5)
    f = gaussian(g)
    ref = cauchy_apply(f, method="linear").values
    val = cauchy_apply(f, method=method).values
    assert np.max(np.abs(val - ref)) < 0.1 * np.max(np.abs(ref))


def test_boundary_cauchy_pompeiu():
    # for g holomorphic in the sector, (2πi)^{-1}∮ g/(ζ-z) dζ = g(z) inside, 0 outside
    z = np.array([0.3 + 0.1j, 0.8 - 0.5j, 1e-3 + 0j, 2.0 + 0.1j, -0.5 + 0j])
    val = boundary_cauchy(z, S60.theta0, 1.0, lambda s: np.exp(s) * s**0.5)
    exact = np.where(S60.contains(z), np.exp(z) * z**0.5, 0)
    assert np.max(np.abs(val - exact)) < 1e-12


def test_boundary_cauchy_corner_singularity():
    z = np.array([0.2 + 0.05j, 0.6 + 0.3j])
    g = lambda s: np.conj(s) ** 0.5  # noqa: E731
    val = boundary_cauchy(z, S60.theta0, 1.0, g)
    # reference: direct adaptive integration along the three pieces
    with mpmath.workdps(25):
        th = S60.theta0
        e1, e2 = mpmath.exp(-1j * th), mpmath.exp(1j * th)

        def piece(zz):
            zz = mpmath.mpc(zz.real, zz.imag)
            f = lambda s: mpmath.conj(s) ** 0.5 / (s - zz)  # noqa: E731
            lo = mpmath.quad(lambda u: f(u * e1) * e1, [0, 1])
            arc = mpmath.quad(lambda t: f(mpmath.exp(1j * t)) * 1j * mpmath.exp(1j * t), [-th, th])
            up = mpmath.quad(lambda u: f(u * e2) * e2, [0, 1])
            return complex((lo + arc - up) / (2j * mpmath.pi))

        ref = np.array([piece(x) for x in z])
    assert np.max(np.abs(val - ref)) < 1e-11
