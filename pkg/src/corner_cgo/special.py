"""Gamma and Bessel functions used by the closed-form corner constants.

Both are implemented here (Lanczos for Gamma, power series plus Miller's
backward recurrence for J_m) so their accuracy can be tested directly.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

# Lanczos coefficients, g = 7, n = 9 (Godfrey's set).
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma(z: complex) -> complex:
    """Gamma function for complex ``z`` (principal branch of the powers).

    Relative accuracy is about 1e-14 away from the poles at non-positive
    integers. The reflection formula handles ``Re z < 1/2``.
    """
    z = complex(z)
    if z.imag == 0.0 and z.real <= 0.0 and z.real == math.floor(z.real):
        raise ValueError(f"gamma has a pole at {z.real}")
    if z.real < 0.5:
        return cmath.pi / (cmath.sin(cmath.pi * z) * gamma(1.0 - z))
    z -= 1.0
    x = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        x += _LANCZOS_COEF[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return cmath.sqrt(2.0 * cmath.pi) * t ** (z + 0.5) * cmath.exp(-t) * x


def gamma_real(x: float) -> float:
    """Real-argument Gamma."""
    return gamma(x).real


_SERIES_LIMIT = 8.0


def _bessel_series(m: int, x: np.ndarray) -> np.ndarray:
    half = 0.5 * x
    term = half**m / math.factorial(m)
    out = term.copy()
    q = -half * half
    for k in range(1, 80):
        term = term * q / (k * (k + m))
        out += term
        if np.all(np.abs(term) <= 1e-17 * np.maximum(np.abs(out), 1e-300)):
            break
    return out


def _bessel_miller(m: int, x: np.ndarray) -> np.ndarray:
    # Backward recurrence from an even start order well above max(m, x),
    # normalised with J0 + 2 sum J_2k = 1.
    xmax = float(np.max(x))
    start = int(max(m, xmax) + 30 + math.sqrt(40.0 * max(m, xmax)))
    start += start % 2
    j_next = np.zeros_like(x)
    j_cur = np.full_like(x, 1e-300)
    norm = np.zeros_like(x)
    result = np.zeros_like(x)
    for k in range(start, 0, -1):
        j_prev = (2.0 * k / x) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        if k - 1 == m:
            result = j_cur.copy()
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j_cur
        # keep the unnormalised values in range
        big = np.abs(j_cur) > 1e250
        if np.any(big):
            scale = np.where(big, 1e-250, 1.0)
            j_cur = j_cur * scale
            j_next = j_next * scale
            norm = norm * scale
            result = result * scale
    norm += j_cur
    return result / norm


def bessel_j(m: int, x):
    """Bessel function of the first kind J_m(x) for integer order ``m``.

    Negative orders use J_{-m} = (-1)^m J_m; negative arguments use
    J_m(-x) = (-1)^m J_m(x). Accepts scalars or arrays of real ``x``.
    Absolute accuracy is better than 1e-12 for |x| <= 50.
    """
    m = int(m)
    sign = 1.0
    if m < 0:
        m = -m
        sign = -1.0 if m % 2 else 1.0
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    ax = np.abs(np.atleast_1d(arr))
    out = np.empty_like(ax)
    small = ax <= _SERIES_LIMIT
    if np.any(small):
        out[small] = _bessel_series(m, ax[small])
    if np.any(~small):
        out[~small] = _bessel_miller(m, ax[~small])
    if m % 2:
        out = np.where(np.atleast_1d(arr) < 0, -out, out)
    out *= sign
    return float(out[0]) if scalar else out.reshape(arr.shape)
