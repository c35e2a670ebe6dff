import numpy as np
import pytest

from isoradial.daf import (
    AtomicMeasure,
    convolve_analytic,
    convolve_harmonic,
    dbar_inverse_values,
    perturb_embedding,
    random_measure,
    render_svg,
    transport_residual,
)
from isoradial.errors import AtomOnPole, NotAnalytic

from conftest import first_white


def test_measure_round_trip():
    m = AtomicMeasure.from_list([[0.5, 0.1, 1.0, -2.0], [2.0, 0.0, 0.0, 1.0]])
    assert len(m) == 2
    assert AtomicMeasure.from_list(m.to_list()) == m
    line = AtomicMeasure.from_polyline([0.2j, 0.4 + 0.2j], nodes=5)
    assert abs(sum(c for _, c in line.atoms) - 0.4) < 1e-15


def test_atom_on_pole_rejected(square):
    e = complex(square.directions.vectors[0])
    with pytest.raises(AtomOnPole):
        convolve_analytic(square, (0, 0, 0), AtomicMeasure(((e + 1e-8, 1 + 0j),)))


def test_analytic_convolution(square, honeycomb, deformed):
    rng = np.random.default_rng(3)
    for g in (square, honeycomb, deformed):
        m = random_measure(g, 5, rng)
        res = convolve_analytic(g, first_white(g), m, window=6.0)
        assert res.interior
        assert res.relative_residual < 1e-9


def test_harmonic_convolution(square, triangular, honeycomb):
    rng = np.random.default_rng(4)
    for g in (square, triangular, honeycomb):
        m = random_measure(g, 5, rng)
        res = convolve_harmonic(g, (0, 0, 0), m, window=6.0)
        assert res.interior
        assert res.relative_residual < 1e-9
    # h at the base vertex is the constant 1, so H there is the total charge
    m = AtomicMeasure(((0.5 + 0.2j, 2 + 1j), (1.7 - 0.3j, -0.5 + 0j)))
    res = convolve_harmonic(square, (0, 0, 0), m, window=3)
    assert abs(res.values[(0, 0, 0)] - (1.5 + 1j)) < 1e-14


def test_perturbation_analytic(square):
    rng = np.random.default_rng(5)
    m = random_measure(square, 3, rng)
    vals = convolve_analytic(square, (0, 0, 0), m, window=7.0).values
    p = perturb_embedding(square, vals, 0.1, radius=5.0, center=0j)
    assert transport_residual(square, p, vals) < 1e-12
    assert p.holonomy == 0 and p.sheets == (0,)
    zero = perturb_embedding(square, None, 0.3, radius=4.0)
    for b, poly in zero.black_polygons.items():
        ring = [square.position(x) for x, _, _ in square.neighbors(b)]
        assert all(min(abs(z - r) for r in ring) < 1e-12 for z in poly)


def test_perturbation_with_source(square):
    w0 = (0, 0, 0)
    vals = dbar_inverse_values(square, w0, 7.0)
    p = perturb_embedding(square, vals, 3.5, radius=5.0, singular=w0, windings=2)
    assert abs(p.holonomy - (-3.5j)) < 1e-12
    assert abs(p.white_defects[w0] - 3.5) < 1e-12
    assert p.max_defect() < 1e-12
    assert p.sheets == (-2, -1, 0, 1, 2)
    assert abs(p.sheet_polygons(1)[next(iter(p.black_polygons))][0]
               - p.black_polygons[next(iter(p.black_polygons))][0] + 3.5j) < 1e-12


def test_non_analytic_rejected(square):
    bad = {b: complex(square.position(b).real) for b in square.instances_within(0j, 6, "black")}
    with pytest.raises(NotAnalytic):
        perturb_embedding(square, bad, 0.1, radius=4.0)
    with pytest.raises(ValueError):
        perturb_embedding(square, None, 0.1, singular=(0, 0, 0), windings=9)


def test_svg_is_deterministic(square, tmp_path):
    vals = dbar_inverse_values(square, (0, 0, 0), 6.0)
    p = perturb_embedding(square, vals, 1.0, radius=4.0, singular=(0, 0, 0))
    a = render_svg(p, radius=4.0)
    b = render_svg(p, tmp_path / "e.svg", radius=4.0)
    assert a == b == (tmp_path / "e.svg").read_text()
    assert a.startswith("<svg") or a.startswith("<?xml")
    assert 'class="singular"' in a
