import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from corner_cgo.analytic import PhaseParams, SectorDomain
from corner_cgo.dbar import (
    PotentialSpec,
    as_sample,
    build_cgo,
    cgo_residual,
    default_exponents,
    neumann_solve,
    op_S,
    op_S0,
    op_S1,
)
from corner_cgo.errors import ConfigurationError, ConvergenceError, DivergenceError, PreconditionError
from corner_cgo.quadrature import ComplexFieldSample, build_sector_grid, fd_dbar, fd_partial, lp_norm

S60 = SectorDomain(math.pi / 3)
G48 = build_sector_grid(S60, 48, 48, 0.5)
G96 = build_sector_grid(S60, 96, 96, 0.5)


def gaussian(g):
    return g.sample(lambda z: np.exp(-np.abs(z - 0.5) ** 2 / 0.04))


def E(g, h):
    return np.exp(2j * (g.Z**0.5).imag / h)


def rel(a, b, mask):
    return lp_norm(a - b, 2, mask) / lp_norm(b, 2, mask)


# -- operator identities: ∂S₀f = E^{-1}f and ∂̄S₁f = (i/h)Ef (second order in the grid)


@pytest.mark.parametrize("h", [0.2, 0.1])
def test_S0_is_right_inverse_of_partial(h):
    errs = []
    for g in (G48, G96):
        f = gaussian(g)
        m = g.interior_mask()
        s0 = op_S0(f, PhaseParams(0.5, h))
        errs.append(rel(fd_partial(s0), ComplexFieldSample(g, f.values / E(g, h)), m))
    assert errs[1] <= 1e-2
    assert errs[0] / errs[1] >= 3.0  # second order: ratio 4 under doubling


@pytest.mark.parametrize("h", [0.2, 0.1])
@pytest.mark.parametrize("probe", ["gaussian", "one"])
def test_S1_dbar_identity(h, probe):
    errs = []
    for g in (G48, G96):
        f = gaussian(g) if probe == "gaussian" else as_sample(g, 1.0)
        m = g.interior_mask()
        tgt = ComplexFieldSample(g, (1j / h) * E(g, h) * f.values)
        errs.append(rel(fd_dbar(op_S1(f, PhaseParams(0.5, h))), tgt, m))
    assert errs[1] <= 1e-2
    assert errs[0] / errs[1] >= 3.0


def test_S_vanishes_for_zero_potential():
    s = op_S(gaussian(G48), PotentialSpec.explicit(0.0), PhaseParams(0.5, 0.1))
    assert np.all(s.values == 0)


@given(c=st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_S_is_linear_in_f(c):
    p = PhaseParams(0.5, 0.2)
    pot = PotentialSpec.explicit(1.0)
    f = gaussian(G48)
    lhs = op_S(f * c, pot, p)
    rhs = op_S(f, pot, p) * c
    assert np.max(np.abs(lhs.values - rhs.values)) <= 1e-12 * np.max(np.abs(rhs.values))


def test_S_norm_shrinks_with_h():
    pot = PotentialSpec.explicit(1.0)
    f = gaussian(G96)
    r = [lp_norm(op_S(f, pot, PhaseParams(0.5, h)), 2) / lp_norm(f, 2) for h in (0.2, 0.1, 0.05)]
    assert r[0] > r[1] > r[2]


# -- Neumann series


@pytest.mark.parametrize("h", [0.2, 0.1])
def test_neumann_fixed_point(h):
    p = PhaseParams(0.5, h)
    pot = PotentialSpec.explicit(1.0)
    w, its = neumann_solve(1.0, pot, p, G48)
    assert its < 20
    fp = op_S(ComplexFieldSample(G48, 1.0 + w.values), pot, p)
    assert lp_norm(fp - w, 2) <= 1e-9 * lp_norm(w, 2)


@pytest.mark.parametrize("h,q", [(2.0, 30.0), (1.0, 50.0)])
def test_neumann_divergence_detected(h, q):
    with pytest.raises(DivergenceError) as exc:
        neumann_solve(1.0, PotentialSpec.explicit(q), PhaseParams(0.5, h), G48)
    norms = exc.value.diagnostics["term_norms"]
    assert len(norms) == 4 and all(b > a for a, b in zip(norms, norms[1:]))


def test_neumann_maxiter_reports_partial_sum():
    with pytest.raises(ConvergenceError) as exc:
        neumann_solve(1.0, PotentialSpec.explicit(1.0), PhaseParams(0.5, 0.1), G48, maxiter=1)
    assert isinstance(exc.value.partial, ComplexFieldSample)
    assert lp_norm(exc.value.partial, 2) > 0


def test_neumann_needs_grid_for_constant_amplitude():
    with pytest.raises(ConfigurationError):
        neumann_solve(1.0, PotentialSpec.explicit(1.0), PhaseParams(0.5, 0.1))


# -- CGO assembly


@pytest.mark.parametrize("h", [0.2, 0.1])
def test_build_cgo_residual_small(h):
    sol = build_cgo(1.0, PotentialSpec.explicit(1.0), PhaseParams(0.5, h), G48)
    assert sol.residual_rel <= 5e-2
    assert sol.W.is_finite()
    assert (sol.p1, sol.p2) == default_exponents(0.5)


def test_residual_detects_wrong_correction():
    p = PhaseParams(0.5, 0.1)
    pot = PotentialSpec.explicit(1.0)
    sol = build_cgo(1.0, pot, p, G48)
    q = pot.q_sample(G48)
    assert cgo_residual(sol.A, G48.zeros(), q, p) > 10 * sol.residual_rel


def test_conjugate_solution_is_mirror_of_conjugated_potential():
    p = PhaseParams(0.5, 0.2)
    sc = build_cgo(1.0, PotentialSpec.explicit(1 + 0.5j), p, G48, conjugate=True)
    s = build_cgo(1.0, PotentialSpec.explicit(1 - 0.5j), p, G48)
    assert np.array_equal(sc.W.values, np.conj(s.W.values))
    assert sc.conjugate and not s.conjugate


def test_medium_potential_and_weighted_solution():
    pot = PotentialSpec.medium(4.0, 2.0, k=1.5)
    q = pot.q_sample(G48)
    assert np.allclose(q.values, 1.5**2 * 2.0 / 4.0)
    sol = build_cgo(1.0, pot, PhaseParams(0.5, 0.2), G48)
    assert np.allclose(sol.w_medium.values, sol.W.values / 2.0)


def test_medium_rejects_nonpositive_gamma():
    with pytest.raises(ConfigurationError):
        PotentialSpec.medium(-1.0, 1.0, k=1.0).q_sample(G48)


def test_phase_must_decay_on_sector():
    # α θ0 ≥ π/2: Re Φ is not positive on the whole sector
    g = build_sector_grid(SectorDomain(2 * math.pi / 3), 16, 16, 0.5)
    with pytest.raises(PreconditionError):
        build_cgo(1.0, PotentialSpec.explicit(1.0), PhaseParams(0.9, 0.1), g)


def test_sample_from_other_grid_rejected():
    with pytest.raises(ConfigurationError):
        as_sample(G48, gaussian(G96))
