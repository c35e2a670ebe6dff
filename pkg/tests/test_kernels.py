import math

import numpy as np
import pytest

from isoradial.constants import euler_gamma
from isoradial.errors import GraphError, NotAdjacent, NotASuperposition
from isoradial.kernels import (
    asymptotic_data,
    asymptotic_dbar_inverse,
    asymptotic_green,
    coupling_from_green,
    dbar_inverse,
    edge_endpoints,
    green,
    square_green_constant,
)
from isoradial.operators import dbar_entry, laplacian_row, white_neighbors

from conftest import first_white


def test_inverse_identity(square, honeycomb, deformed):
    for g in (square, honeycomb, deformed):
        w0 = first_white(g)
        whites = [v for v in g.instances_within(0j, 4, "primal") if g.colors[v[0]] == "W"]
        for w in whites:
            s = sum(val * complex(dbar_inverse(g, w0, b)) for b, val in white_neighbors(g, w))
            assert abs(s - (1 if w == w0 else 0)) < 1e-12


def test_adjacent_entry_and_edge_probability(square, deformed):
    w0 = first_white(square)
    for b, _ in white_neighbors(square, w0):
        assert abs(abs(complex(dbar_inverse(square, w0, b))) - 1 / (4 * math.sqrt(2))) < 1e-14
    w0 = first_white(deformed)
    for b, val in white_neighbors(deformed, w0):
        p = val * complex(dbar_inverse(deformed, w0, b))
        k = next(k for nb, k in deformed.graph_neighbors(w0) if nb == b)
        assert abs(p - deformed.theta[k] / math.pi) < 1e-13


def test_quadrature_cross_check(honeycomb, triangular):
    w0 = (0, 0, 0)
    for b in honeycomb.instances_within(0j, 5, "black")[:12]:
        r = complex(dbar_inverse(honeycomb, w0, b))
        q = complex(dbar_inverse(honeycomb, w0, b, method="quadrature"))
        assert abs(r - q) < 1e-10
    for v in triangular.instances_within(0j, 4, "primal")[1:10]:
        r = complex(green(triangular, w0, v))
        q = complex(green(triangular, w0, v, method="quadrature"))
        assert abs(r - q) < 1e-10


def test_green_is_fundamental_solution(deformed, triangular):
    for g in (deformed, triangular):
        v0 = (0, 0, 0)
        for u in g.instances_within(0j, 4, "primal"):
            s = sum(c * complex(green(g, v0, v)) for v, c in laplacian_row(g, u).items())
            assert abs(s - (1 if u == v0 else 0)) < 1e-12
        assert green(g, v0, v0).value == 0


def test_green_adjacent_values(square, deformed):
    v0 = (0, 0, 0)
    for nb, k in square.graph_neighbors(v0):
        assert abs(complex(green(square, v0, nb)) + 0.25) < 1e-14
    for nb, k in deformed.graph_neighbors(v0):
        th = deformed.theta[k]
        assert abs(complex(green(deformed, v0, nb)) + th / (math.pi * math.tan(th))) < 1e-14


def test_green_mixed_parity_is_imaginary(deformed):
    v0 = (0, 0, 0)
    vals = []
    for nb, _, _ in deformed.neighbors(v0):
        kv = green(deformed, v0, nb)
        assert kv.parity == "mixed"
        assert abs(kv.value.real) < 1e-14
        vals.append(kv.value.imag)
    # the harmonic conjugate has no net rotation around a vertex
    assert abs(sum(vals)) < 1e-13
    assert all(abs(v) < 0.5 for v in vals)


def test_green_constant_values():
    assert abs(square_green_constant() + 0.2021845263754798) < 1e-15


def test_asymptotic_default_constant(square):
    v1 = (0, 10, 0)
    d = abs(square.position(v1))
    expected = -math.log(d) / (2 * math.pi) - euler_gamma() / (2 * math.pi)
    assert abs(asymptotic_green(square, (0, 0, 0), v1) - expected) < 1e-15
    with pytest.raises(GraphError):
        asymptotic_green(square, (0, 0, 0), (square.n_vertices, 0, 0))


def test_asymptotic_dbar_inverse_decay(square):
    w0 = (0, 0, 0)
    errs = []
    for k in (4, 8, 16):
        b = (1, 3 * k, k)
        data, approx = asymptotic_dbar_inverse(square, w0, b)
        errs.append((data.N, abs(approx - complex(dbar_inverse(square, w0, b)))))
    # errors fall at least like N^-2.5 along a fixed ray
    slope = np.polyfit(np.log([e[0] for e in errs]), np.log([e[1] for e in errs]), 1)[0]
    assert slope < -2.5
    data = asymptotic_data(square, w0, (1, 3, 1))
    assert abs(abs(data.gamma) - 1) < 1e-12


def test_coupling_identity(square_sup, triangular_sup):
    for gd in (square_sup, triangular_sup):
        whites = [v for v in gd.instances_within(0j, 3, "primal") if gd.colors[v[0]] == "W"]
        blacks = [v for v in gd.instances_within(0j, 5, "primal")
                  if gd.colors[v[0]] == "B" and gd.roles[v[0]] == "primal"]
        for w1 in whites[:4]:
            b1, b1p = edge_endpoints(gd, w1)
            for b2 in blacks[:8]:
                v1, d1 = coupling_from_green(gd, w1, b2, b1=b1, check=False)
                v2, _ = coupling_from_green(gd, w1, b2, b1=b1p, check=False)
                assert abs(v1 - d1) < 1e-9 and abs(v2 - d1) < 1e-9


def test_coupling_needs_superposition(square):
    with pytest.raises(NotASuperposition):
        edge_endpoints(square, (0, 0, 0))
    with pytest.raises(GraphError):
        dbar_inverse(square, (1, 0, 0), (1, 0, 0))
    with pytest.raises(NotAdjacent):
        dbar_entry(square, (0, 0, 0), (1, 5, 5))
