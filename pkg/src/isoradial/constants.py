"""Mathematical constants and the Lobachevsky function, computed from series."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def euler_gamma():
    """Euler's constant from the asymptotic expansion of the harmonic numbers."""
    n = 100
    h = math.fsum(1.0 / k for k in range(1, n + 1))
    return (h - math.log(n) - 1 / (2 * n) + 1 / (12 * n ** 2)
            - 1 / (120 * n ** 4) + 1 / (252 * n ** 6))


@lru_cache(maxsize=None)
def catalan():
    """Catalan's constant via the central-binomial (Ramanujan) series."""
    s = 0.0
    c = 1.0  # C(2n, n)
    for n in range(40):
        if n:
            c = c * (2 * n) * (2 * n - 1) / (n * n)
        s += 1.0 / ((2 * n + 1) ** 2 * c)
    return math.pi / 8 * math.log(2 + math.sqrt(3)) + 3 / 8 * s


@lru_cache(maxsize=None)
def _bernoulli_coeffs(terms=30):
    """|B_2k| / (2k (2k+1) (2k)!) for k = 1..terms."""
    from fractions import Fraction

    # Bernoulli numbers by the Akiyama-Tanigawa algorithm
    size = 2 * terms + 1
    a = [Fraction(0)] * (size + 1)
    bern = []
    for m in range(size + 1):
        a[m] = Fraction(1, m + 1)
        for j in range(m, 0, -1):
            a[j - 1] = j * (a[j - 1] - a[j])
        bern.append(a[0])
    out = []
    for k in range(1, terms + 1):
        b2k = abs(bern[2 * k])
        out.append(float(b2k / (2 * k * (2 * k + 1) * math.factorial(2 * k))))
    return tuple(out)


def clausen2(theta):
    """Clausen function Cl_2, vectorized."""
    t = np.asarray(theta, dtype=float)
    # reduce to (-pi, pi]
    r = t - 2 * np.pi * np.floor((t + np.pi) / (2 * np.pi))
    r = np.where(r <= -np.pi, r + 2 * np.pi, r)
    out = np.empty_like(r)
    small = np.abs(r) <= 1e-300
    ar = np.where(small, 1.0, np.abs(r))
    val = r - r * np.log(ar)
    p = r.copy()
    r2 = r * r
    for c in _bernoulli_coeffs():
        p = p * r2
        val = val + c * p
    out[...] = np.where(small, 0.0, val)
    return out if out.ndim else float(out)


def lobachevsky(x):
    """``L(x) = -int_0^x log(2 sin t) dt`` (vectorized, any real x)."""
    return 0.5 * clausen2(2 * np.asarray(x, dtype=float)) if np.ndim(x) else 0.5 * clausen2(2 * float(x))
