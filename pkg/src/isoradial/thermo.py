"""Normalized determinants, dimer and spanning-tree thermodynamics, volumes."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import quad

from .constants import lobachevsky
from .errors import DomainError, GraphError, SingularGrid

# ---------------------------------------------------------------------------
# Lobachevsky cross-checks


def lobachevsky_quad(x):
    """``-int_0^x log|2 sin t| dt`` by adaptive quadrature (slow, for checks)."""
    x = float(x)
    # split at the logarithmic singularities k*pi
    pts = [k * math.pi for k in range(int(math.floor(min(0, x) / math.pi)), int(math.ceil(max(0, x) / math.pi)) + 1)]
    pts = sorted({p for p in pts if min(0, x) < p < max(0, x)} | {0.0, x})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, _ = quad(lambda t: math.log(abs(2 * math.sin(t))) if t % math.pi else 0.0, a, b,
                      limit=200, epsabs=1e-13, epsrel=1e-12)
        total += val
    return -total if x >= 0 else total


def milnor_volume(phi):
    """Volume ``L((pi - phi)/2)`` of the simplex ``inf, (0,0,1), (1,0,0), (cos phi, sin phi, 0)``.

    Here ``phi`` enters through the complementary angle: the planar angle at
    the foot of the finite vertex is ``pi - phi``.
    """
    return lobachevsky((math.pi - phi) / 2)


def simplex_volume_direct(planar_angle):
    """Hyperbolic volume above the unit hemisphere over the triangle ``0, 1, e^{i a}``.

    Integrates ``dz / z^3`` in the upper half space, giving
    ``-1/4 int_0^a log(1 - rho(t)^2) dt`` with ``rho`` the distance to the far side.
    """
    a = float(planar_angle)
    c = math.cos(a / 2)

    def f(t):
        rho2 = (c / math.cos(t - a / 2)) ** 2
        return -0.25 * math.log1p(-rho2) if rho2 < 1 else 0.0

    val, _ = quad(f, 0, a, limit=200, epsabs=1e-14, epsrel=1e-13)
    return val


# ---------------------------------------------------------------------------
# per-edge closed forms


def f_dimer(theta):
    """Per-edge term ``L(theta)/pi + (theta/pi) log(2 sin theta)``."""
    t = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.where(t > 0, t * np.log(2 * np.sin(np.where(t > 0, t, 1.0))), 0.0)
    out = lobachevsky(t) / math.pi + e / math.pi
    return out if np.ndim(theta) else float(out)


def f_tree(theta):
    """Per-edge term ``(2/pi)(L(theta) + L(pi/2 - theta)) + (2 theta/pi) log tan theta``."""
    t = np.asarray(theta, dtype=float)
    if np.any(t >= math.pi / 2):
        raise DomainError("tree term diverges at theta = pi/2 (infinite conductance)")
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.where(t > 0, t * np.log(np.tan(np.where(t > 0, t, 1.0))), 0.0)
    out = 2 / math.pi * (lobachevsky(t) + lobachevsky(math.pi / 2 - t)) + 2 * e / math.pi
    return out if np.ndim(theta) else float(out)


def dimer_energy_term(theta):
    t = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.where(t > 0, t / math.pi * np.log(2 * np.sin(np.where(t > 0, t, 1.0))), 0.0)
    return e if np.ndim(theta) else float(e)


def tree_energy_term(theta):
    t = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.where(t > 0, 2 * t / math.pi * np.log(np.tan(np.where(t > 0, t, 1.0))), 0.0)
    return e if np.ndim(theta) else float(e)


def logdet1_dimer(g):
    """``log det_1 dbar`` per vertex from the rhombus half-angles."""
    if not g.bipartite:
        raise GraphError("the dimer determinant needs a bipartite graph")
    return float(np.sum(f_dimer(g.theta)) / g.n_vertices)


def logdet1_tree(g):
    """``log det_1 Laplacian`` per vertex with conductances ``tan theta``."""
    return logdet1_tree_angles(g.theta, g.n_vertices)


def logdet1_tree_angles(theta, n_vertices):
    return float(np.sum(f_tree(np.asarray(theta, dtype=float))) / n_vertices)


def logdet1_dimer_angles(theta, n_vertices):
    return float(np.sum(f_dimer(np.asarray(theta, dtype=float))) / n_vertices)


# ---------------------------------------------------------------------------
# reports


@dataclass
class ThermoReport:
    model: str
    log_det1: float
    mean_energy: float
    entropy: float
    volume_per_site: float
    volume_from_entropy: float
    normalized_mean_curvature_per_site: float | None
    identity_residuals: tuple

    def to_dict(self):
        d = asdict(self)
        d["identity_residuals"] = list(self.identity_residuals)
        return d


def _rhombus_geometry(g):
    """Per-rhombus (angle at w, dual edge length) from positions."""
    out = []
    for rh in g.rhombi:
        w, x, b, y = rh.positions
        ang = abs(np.angle((y - w) / (x - w)))
        out.append((ang, abs(x - y)))
    return out


def thermo_report(g, model="dimer"):
    """Thermodynamic quantities per vertex of ``g``.

    For ``model="dimer"`` the volume comes from the simplex decomposition over
    the rhombi (two simplices of volume ``L(theta)`` each) and the curvature
    from the dihedral angles and horosphere-truncated dual edge lengths, all
    read off the embedding. For ``model="tree"`` the volume is that of the
    superposition's polyhedron and the curvature is not defined.
    """
    n = g.n_vertices
    th = np.asarray(g.theta, dtype=float)
    geom = _rhombus_geometry(g)
    if model == "dimer":
        if not g.bipartite:
            raise GraphError("the dimer model needs a bipartite graph")
        ld = logdet1_dimer(g)
        energy = float(np.sum(dimer_energy_term(th)) / n)
        entropy = float(np.sum(lobachevsky(th)) / math.pi / n)
        # two simplices per rhombus; matched angle pi - 2 theta in Milnor's formula
        volume = sum(2 * milnor_volume(math.pi - ang) for ang, _ in geom) / n
        # dihedral pi - 2 theta at each dual edge, truncated length 2 log |x - y|
        curvature = float(sum(ang * 2 * math.log(ell) for ang, ell in geom if ell > 0) / n)
        residuals = (float(volume - 2 * math.pi * entropy), float(curvature - 4 * math.pi * energy),
                     float(entropy - (ld - energy)))
        return ThermoReport("dimer", ld, energy, entropy, volume, 2 * math.pi * entropy,
                            curvature, residuals)
    if model == "tree":
        ld = logdet1_tree(g)
        energy = float(np.sum(tree_energy_term(th)) / n)
        entropy = ld - energy
        # the superposition splits each rhombus into four, of half-angles theta, theta,
        # pi/2 - theta, pi/2 - theta; each contributes two simplices
        volume = 0.0
        for ang, _ in geom:
            half = ang / 2
            for t in (half, half, math.pi / 2 - half, math.pi / 2 - half):
                volume += 2 * milnor_volume(math.pi - 2 * t)
        volume /= n
        direct = float(np.sum(2 / math.pi * (lobachevsky(th) + lobachevsky(math.pi / 2 - th))) / n)
        residuals = (float(volume - 2 * math.pi * entropy), 0.0, float(entropy - direct))
        return ThermoReport("tree", ld, energy, entropy, volume, 2 * math.pi * entropy, None, residuals)
    raise DomainError(f"unknown model {model!r}")


# ---------------------------------------------------------------------------
# Bloch oracle


def _bloch_matrices(g, model, s, t):
    """Batched fundamental-domain operators at Bloch phases ``exp(2 pi i (s, t))``."""
    z = np.exp(2j * np.pi * s)
    w = np.exp(2j * np.pi * t)
    if model == "dimer":
        whites = [i for i in range(g.n_vertices) if g.colors[i] == "W"]
        blacks = [i for i in range(g.n_vertices) if g.colors[i] == "B"]
        wi = {v: k for k, v in enumerate(whites)}
        bi = {v: k for k, v in enumerate(blacks)}
        m = np.zeros((len(s), len(whites), len(blacks)), dtype=complex)
        for rh in g.rhombi:
            W, X, B, Y = rh.positions
            da, db = rh.b[1] - rh.w[1], rh.b[2] - rh.w[2]
            m[:, wi[rh.w[0]], bi[rh.b[0]]] += 1j * (X - Y) * z ** da * w ** db
        return m
    n = g.n_vertices
    m = np.zeros((len(s), n, n), dtype=complex)
    for k, (u, v, du, dv) in enumerate(g.edges):
        c = math.tan(g.theta[k])
        ph = z ** du * w ** dv
        m[:, u, u] += c
        m[:, v, v] += c
        m[:, u, v] -= c * ph
        m[:, v, u] -= c * np.conj(ph)
    return m


def _grid_average(g, model, grid, shift):
    total = 0.0
    pts = (np.arange(grid) + 0.5 + shift) / grid
    for row in pts:
        s = np.full(grid, row)
        m = _bloch_matrices(g, model, s, pts)
        sign, logabs = np.linalg.slogdet(m)
        if np.any(np.abs(sign) == 0) or np.any(logabs < math.log(1e-13)):
            raise SingularGrid("Bloch determinant vanishes on the grid")
        total += float(np.sum(logabs))
    return total / grid ** 2


def bloch_logdet1(g, model="dimer", grid=512, extrapolate=True):
    """Per-vertex ``log det_1`` as a torus average of Bloch determinants.

    For the dimer model the white-by-black block is used, so each vertex
    pair is counted once. Midpoint grid (slightly shifted so no node sits on a zero of the
    determinant), followed by Richardson extrapolation against the half grid,
    which cancels the leading error from the logarithmic singularities.
    """
    if grid < 16:
        raise DomainError("grid must be at least 16")
    if model == "dimer" and not g.bipartite:
        raise GraphError("the dimer determinant needs a bipartite graph")
    for attempt in range(4):
        shift = (math.sqrt(2) - 1) * 1e-3 * (attempt + 1)
        try:
            fine = _grid_average(g, model, grid, shift)
            if not extrapolate:
                return fine / g.n_vertices
            coarse = _grid_average(g, model, grid // 2, shift)
        except SingularGrid:
            continue
        return (4 * fine - coarse) / 3 / g.n_vertices
    raise SingularGrid("could not find a grid offset avoiding determinant zeros")


def torus_tree_logdet(g, n):
    """Per-vertex log of the spanning-tree count on the n x n torus quotient.

    Matrix-tree theorem: ``(log det' L_n - log(V_n)) / V_n`` with ``det'``
    the product of nonzero eigenvalues; tends to ``log det_1`` as n grows.
    """
    k = np.arange(n) / n
    s, t = np.meshgrid(k, k, indexing="ij")
    m = _bloch_matrices(g, "tree", s.ravel(), t.ravel())
    eig = np.linalg.eigvalsh(m)
    eig = np.sort(eig.ravel())[1:]  # drop the single zero mode
    nv = g.n_vertices * n * n
    return float(np.sum(np.log(eig)) / nv)
