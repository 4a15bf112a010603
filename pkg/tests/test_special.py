import math

import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given
from hypothesis import strategies as st

from corner_cgo.special import bessel_j, gamma, gamma_real


@given(st.floats(0.05, 30.0))
def test_gamma_real_matches_math(x):
    assert gamma_real(x) == pytest.approx(math.gamma(x), rel=1e-13)


@given(st.floats(0.1, 8.0), st.floats(-5.0, 5.0))
def test_gamma_complex_matches_scipy(re, im):
    z = complex(re, im)
    assert abs(gamma(z) - sp.gamma(z)) <= 1e-12 * abs(sp.gamma(z))


@given(st.floats(0.1, 6.0))
def test_gamma_recurrence(x):
    assert gamma(x + 1) == pytest.approx(x * gamma(x), rel=1e-13)


@given(st.integers(0, 12), st.floats(0.0, 50.0))
def test_bessel_matches_scipy(m, x):
    assert abs(bessel_j(m, x) - sp.jv(m, x)) <= 1e-12


def test_bessel_special_values():
    assert bessel_j(0, 0.0) == 1.0
    for m in range(1, 6):
        assert bessel_j(m, 0.0) == 0.0
    lo, hi = 2.0, 3.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if bessel_j(0, lo) * bessel_j(0, mid) <= 0:
            hi = mid
        else:
            lo = mid
    assert 0.5 * (lo + hi) == pytest.approx(2.404825557695773, abs=1e-10)


def test_bessel_vectorised_and_negative_order():
    x = np.linspace(0, 20, 41)
    assert np.allclose(bessel_j(3, x), sp.jv(3, x), atol=1e-12)
    assert np.allclose(bessel_j(-1, x), -bessel_j(1, x), atol=1e-14)
