"""Inverse kernels of the critical dbar operator and Laplacian.

Both kernels are finite sums of residues of f_b (resp. g_v) weighted by the
lifted pole angles. A contour-quadrature evaluation of the same integrals is
provided as an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import constants
from .errors import GraphError, NotASuperposition, NotFound
from .factors import (
    evaluate,
    evaluate_array,
    lift_angles,
    log_residue_sum,
    propagate_f,
    propagate_g,
)

QUAD_TOL = 1e-11


@dataclass(frozen=True)
class KernelValue:
    value: complex
    method: str
    poles: int
    condition: float
    parity: str = "same"  # "mixed" for primal/dual green values

    def __complex__(self):
        return complex(self.value)

    def __abs__(self):
        return abs(self.value)


@dataclass(frozen=True)
class AsymptoticData:
    gamma: complex
    xi2: complex
    N: float
    displacement: complex  # b - w


def _white_instance(g, w):
    w = tuple(w)
    if not g.bipartite:
        raise GraphError("dbar inverse needs a bipartite graph")
    if not g.is_primal(w[0]) or g.colors[w[0]] != "W":
        raise GraphError(f"{w!r} is not a white vertex")
    return w


def _black_instance(g, b):
    b = tuple(b)
    if not g.is_primal(b[0]) or g.colors[b[0]] != "B":
        raise GraphError(f"{b!r} is not a black vertex")
    return b


def dbar_inverse(g, w0, b, method="residue", sheet=0):
    """Entry ``dbar^{-1}(w0, b)`` of the infinite-volume inverse."""
    w0 = _white_instance(g, w0)
    b = _black_instance(g, b)
    F = propagate_f(g, w0, b)
    lift = lift_angles(F, g.position(w0), g.position(b), sheet=sheet)
    if method == "quadrature":
        val = _contour(F, lift, scale=1 / (4 * math.pi ** 2 * 1j))
        return KernelValue(val, "quadrature", len(lift.poles), float("nan"))
    total, big = log_residue_sum(F, lift)
    return KernelValue(total / (2 * math.pi), "residue", len(lift.poles), big / (2 * math.pi))


def green(g, v0, v1, method="residue", sheet=0):
    """Green's function G(v0, v1) on the tiling vertex set.

    For two primal (or two dual) vertices this is the real Green's function
    with ``G(v, v) = 0``; for mixed pairs it is ``i`` times its harmonic
    conjugate and ``parity`` is ``"mixed"``.
    """
    v0, v1 = tuple(v0), tuple(v1)
    parity = "same" if g.is_primal(v0[0]) == g.is_primal(v1[0]) else "mixed"
    if v0 == v1:
        return KernelValue(0j, method, 0, 0.0, parity)
    F = propagate_g(g, v0, v1)
    lift = lift_angles(F, g.position(v0), g.position(v1), sheet=sheet)
    if method == "quadrature":
        val = _contour(F, lift, scale=-1 / (8 * math.pi ** 2 * 1j))
        return KernelValue(val, "quadrature", len(lift.poles), float("nan"), parity)
    total, big = log_residue_sum(F, lift)
    return KernelValue(-total / (4 * math.pi), "residue", len(lift.poles), big / (4 * math.pi), parity)


# ---------------------------------------------------------------------------
# quadrature cross-check


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _segment(F, path, dpath, logz, t0, t1, panels):
    edges = np.linspace(t0, t1, panels + 1)
    half = (edges[1:] - edges[:-1]) / 2
    mid = (edges[1:] + edges[:-1]) / 2
    t = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    z = path(t)
    return np.sum(w * evaluate_array(F, z) * logz(t) * dpath(t))


def _contour(F, lift, scale):
    """``scale * \\oint_C F(z) log z dz`` over an annular sector around the poles.

    The sector ``0.5 <= |z| <= 1.5`` spans the lifted pole angles widened by
    ``eta`` on both sides; it excludes the origin and stays inside the lift
    window, so ``log z = ln|z| + i*phi`` is continuous on it.
    """
    if not lift.poles:
        return 0j
    lo, hi = min(lift.angles), max(lift.angles)
    eta = min(0.3, lift.margin / 2)
    a, b = lo - eta, hi + eta
    r0, r1 = 0.5, 1.5

    def pieces(panels):
        total = 0j
        # outer arc, counterclockwise
        total += _segment(F, lambda t: r1 * np.exp(1j * t), lambda t: 1j * r1 * np.exp(1j * t),
                          lambda t: math.log(r1) + 1j * t, a, b, panels)
        # radial inwards at angle b
        eb = complex(math.cos(b), math.sin(b))
        total += _segment(F, lambda r: r * eb, lambda r: eb + 0 * r,
                          lambda r: np.log(r) + 1j * b, r1, r0, panels)
        # inner arc, clockwise
        total += _segment(F, lambda t: r0 * np.exp(1j * t), lambda t: 1j * r0 * np.exp(1j * t),
                          lambda t: math.log(r0) + 1j * t, b, a, panels)
        # radial outwards at angle a
        ea = complex(math.cos(a), math.sin(a))
        total += _segment(F, lambda r: r * ea, lambda r: ea + 0 * r,
                          lambda r: np.log(r) + 1j * a, r0, r1, panels)
        return total

    panels = 4
    prev = pieces(panels)
    while True:
        panels *= 2
        cur = pieces(panels)
        if abs(cur - prev) * abs(scale) < QUAD_TOL or panels > 4096:
            return complex(scale * cur)
        prev = cur


# ---------------------------------------------------------------------------
# asymptotics


def asymptotic_data(g, w, b):
    """gamma = f_b(0), xi2 and N for the pair (w, b)."""
    w = _white_instance(g, w)
    b = _black_instance(g, b)
    F = propagate_f(g, w, b)
    vec = g.directions.vectors
    disp = -sum(n * vec[d] for d, n in F.factors)
    xi2 = -sum(n * vec[d] ** 2 for d, n in F.factors)
    gamma = evaluate(F, 0j)
    return AsymptoticData(complex(gamma), complex(xi2), abs(disp), complex(disp))


def asymptotic_dbar_inverse(g, w, b, order=3):
    """Large-distance expansion of ``dbar^{-1}(w, b)``.

    ``order=1`` gives the two leading terms; ``order=3`` adds the terms in
    ``xi2``, leaving an error of order ``N**-3``.
    """
    data = asymptotic_data(g, w, b)
    d = data.displacement
    dc = d.conjugate()
    val = 1 / d + data.gamma / dc
    if order >= 3:
        val += data.xi2 / d ** 3 + data.gamma * data.xi2.conjugate() / dc ** 3
    return data, val / (2 * math.pi)


def asymptotic_dbar_inverse_alt(g, w, b):
    """Variant with the ``conj(xi2) / (gamma conj(b - w)**3)`` placement of gamma."""
    data = asymptotic_data(g, w, b)
    d = data.displacement
    dc = d.conjugate()
    val = 1 / d + data.gamma / dc + data.xi2 / d ** 3 + data.xi2.conjugate() / (data.gamma * dc ** 3)
    return data, val / (2 * math.pi)


def asymptotic_green(g, v0, v1, constant=None):
    """``-(1/2pi) log|v1 - v0| + constant``.

    ``constant`` defaults to ``-euler_gamma / (2 pi)``. The classical
    square-lattice potential kernel instead gives
    :func:`square_green_constant`.
    """
    v0, v1 = tuple(v0), tuple(v1)
    if not (g.is_primal(v0[0]) and g.is_primal(v1[0])):
        raise GraphError("asymptotic_green takes two primal vertices")
    c = -constants.euler_gamma() / (2 * math.pi) if constant is None else constant
    return -math.log(abs(g.position(v1) - g.position(v0))) / (2 * math.pi) + c


def square_green_constant():
    """Additive constant of the Green's function from the Z^2 potential kernel.

    In circumradius units (edge length sqrt 2) the classical expansion
    ``-(2/pi) log|x| - (2 gamma + 3 log 2)/pi`` of four times the kernel
    becomes ``-(1/2pi) log|v| - (gamma + log 2)/(2pi)``.
    """
    return -(constants.euler_gamma() + math.log(2)) / (2 * math.pi)


# ---------------------------------------------------------------------------
# superposition identity


def dbar_tilde_inverse(gd, w, b):
    """Inverse of the gauged operator ``S dbar`` on a superposition."""
    _require_superposition(gd)
    k = gd.sources[w[0]]
    th = gd.parent.theta[k]
    return complex(dbar_inverse(gd, w, b)) * 2 * math.sqrt(math.sin(th) * math.cos(th))


def dbar_tilde_entry(gd, w, b):
    from .operators import dbar_entry

    _require_superposition(gd)
    th = gd.parent.theta[gd.sources[w[0]]]
    return dbar_entry(gd, w, b) / (2 * math.sqrt(math.sin(th) * math.cos(th)))


def _require_superposition(gd):
    if not gd.is_superposition:
        raise NotASuperposition("graph was not built by superpose()")


def edge_endpoints(gd, w1):
    """The two primal black neighbours ``(b1, b1')`` of white ``w1`` in G_D."""
    _require_superposition(gd)
    out = []
    for nb, _, _ in _black_neighbors(gd, w1):
        if gd.roles[nb[0]] == "primal":
            out.append(nb)
    if len(out) != 2:
        raise NotFound(f"white vertex {w1!r} does not have two primal neighbours")
    return out[0], out[1]


def _black_neighbors(gd, w):
    tid, a, b = w
    for k, (u, v, du, dv) in enumerate(gd.edges):
        if u == tid:
            yield (int(v), a + int(du), b + int(dv)), k, 1
        elif v == tid:
            yield (int(u), a - int(du), b - int(dv)), k, -1


def coupling_from_green(gd, w1, b2, b1=None, check=True, tol=1e-9):
    """``Dbar*(w1, b1) (G(b1, b2) - G(b1', b2))`` for a primal black ``b2``.

    The Green's function is evaluated on the parent graph. With ``check`` the
    result is compared with the directly computed ``Dbar^{-1}(w1, b2)``.
    Returns ``(value, direct)``.
    """
    from .operators import dbar_entry

    _require_superposition(gd)
    w1, b2 = tuple(w1), tuple(b2)
    if gd.roles[b2[0]] != "primal":
        raise GraphError("b2 must be a primal black vertex of the superposition")
    e1, e2 = edge_endpoints(gd, w1)
    if b1 is None:
        b1 = e1
    b1 = tuple(b1)
    b1p = e2 if b1 == e1 else e1
    g = gd.parent
    from .lattice import to_parent_instance

    p1, p1p, p2 = (to_parent_instance(gd, x) for x in (b1, b1p, b2))
    diff = complex(green(g, p1, p2)) - complex(green(g, p1p, p2))
    th = g.theta[gd.sources[w1[0]]]
    s = 1 / (2 * math.sqrt(math.sin(th) * math.cos(th)))
    dstar = s * dbar_entry(gd, w1, b1).conjugate()
    value = dstar * diff
    direct = dbar_tilde_inverse(gd, w1, b2)
    if check and abs(value - direct) > tol:
        raise AssertionError(f"coupling identity fails: {value} vs {direct}")
    return value, direct
