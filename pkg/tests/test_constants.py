import math

import numpy as np

from isoradial.constants import catalan, clausen2, euler_gamma, lobachevsky
from isoradial.thermo import lobachevsky_quad


def test_constants():
    assert abs(euler_gamma() - 0.5772156649015329) < 1e-15
    assert abs(catalan() - 0.915965594177219) < 1e-15


def test_lobachevsky_values():
    assert abs(lobachevsky(math.pi / 4) - 0.4579827971) < 1e-10
    assert abs(lobachevsky(math.pi / 6) - 0.5074708) < 1e-7
    assert abs(2 * lobachevsky(math.pi / 4) - catalan()) < 1e-15
    assert lobachevsky(0.0) == 0.0
    assert abs(lobachevsky(math.pi / 2)) < 1e-15


def test_lobachevsky_symmetries():
    x = np.linspace(-4, 4, 41)
    assert np.allclose(lobachevsky(x + math.pi), lobachevsky(x), atol=1e-14)
    assert np.allclose(lobachevsky(-x), -lobachevsky(x), atol=1e-14)
    # duplication formula L(2x) = 2 L(x) + 2 L(x + pi/2)
    assert np.allclose(lobachevsky(2 * x), 2 * lobachevsky(x) + 2 * lobachevsky(x + math.pi / 2), atol=1e-13)
    assert np.allclose(clausen2(2 * x), 2 * lobachevsky(x), atol=1e-14)


def test_lobachevsky_against_quadrature():
    for x in (0.1, 0.5, 1.0, 1.4, 2.2, 3.0, 4.5, -0.7):
        assert abs(lobachevsky(x) - lobachevsky_quad(x)) < 1e-12
