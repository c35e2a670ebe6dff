import numpy as np
import pytest

from isoradial.errors import GraphError, NotASuperposition, WindowError
from isoradial.lattice import rhombus_path
from isoradial.operators import (
    assemble,
    dbar_entry,
    gauge,
    gauge_along,
    laplacian_row,
    verify_factorization,
    white_neighbors,
)

from conftest import first_white


def test_dbar_entry_is_symmetric_and_unit_scaled(deformed):
    w = first_white(deformed)
    for b, val in white_neighbors(deformed, w):
        assert dbar_entry(deformed, b, w) == val
        k = next(k for nb, k in deformed.graph_neighbors(w) if nb == b)
        assert abs(abs(val) - 2 * np.sin(deformed.theta[k])) < 1e-12


def test_assemble_shapes_and_laplacian(honeycomb, triangular):
    win = honeycomb.instances_within(0j, 4, "primal")
    op = assemble(honeycomb, "dbar", win)
    assert op.matrix.shape == (len(op.rows), len(op.cols))
    assert op.to_csv().splitlines()[0] == "row_id,col_id,re,im"
    lap = assemble(triangular, "laplacian", triangular.instances_within(0j, 4, "primal"))
    assert np.allclose(lap.matrix, lap.matrix.T)
    # Dirichlet restriction of a Laplacian is positive definite
    assert np.linalg.eigvalsh(lap.matrix).min() > 0
    row = laplacian_row(triangular, (0, 0, 0))
    assert abs(sum(row.values())) < 1e-12
    with pytest.raises(NotASuperposition):
        assemble(honeycomb, "dbar_tilde", win)
    with pytest.raises(GraphError):
        assemble(triangular, "dbar", win)
    with pytest.raises(WindowError):
        assemble(honeycomb, "dbar", [(99, 0, 0)])


def test_gauge_makes_operator_real(square, honeycomb, deformed):
    for g in (square, honeycomb, deformed):
        base = first_white(g)
        win = g.instances_within(0j, 5, "primal")
        s = gauge(g, base, win)
        assert s[base] == 1
        for w in win:
            if g.colors[w[0]] != "W":
                continue
            for b, val in white_neighbors(g, w):
                if b in s.multipliers:
                    z = np.conj(s[w]) * val * s[b]
                    assert abs(z.imag) < 1e-12


def test_gauge_path_agrees(honeycomb):
    base = (0, 0, 0)
    win = honeycomb.instances_within(0j, 4, "primal")
    s = gauge(honeycomb, base, win)
    for v in win[1:]:
        along = gauge_along(honeycomb, rhombus_path(honeycomb, base, v))
        assert abs(along - s[v]) < 1e-12


def test_factorization(square_sup, triangular_sup):
    for gd in (square_sup, triangular_sup):
        win = gd.instances_within(0j, 4, "primal")
        rep = verify_factorization(gd, win)
        assert rep.pairs > 0
        assert rep.max_residual < 1e-12
