"""Discrete analytic and harmonic functions by convolution, and embedding perturbations."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import AtomOnPole, GraphError, NotAnalytic, StitchError
from .factors import FactorFunction, evaluate, propagate_f, propagate_g
from .operators import laplacian_row, white_neighbors

POLE_EXCLUSION = 1e-6
ANALYTIC_TOL = 1e-6
STITCH_TOL = 1e-9
MAX_WINDING = 4
# direction of the branch cut from the singular vertex, chosen to miss lattice points
CUT_ANGLE = 0.3183098861837907


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite measure ``sum_k c_k delta_{z_k}``."""

    atoms: tuple = ()

    @classmethod
    def from_list(cls, rows):
        """From ``[[re, im, c_re, c_im], ...]``."""
        return cls(tuple((complex(r[0], r[1]), complex(r[2], r[3])) for r in rows))

    @classmethod
    def from_json(cls, text):
        return cls.from_list(json.loads(text))

    @classmethod
    def from_polyline(cls, points, nodes, density=1.0):
        """Trapezoid rule for ``density * |dz|`` along a polyline."""
        pts = [complex(p) for p in points]
        if len(pts) < 2 or nodes < 2:
            raise ValueError("a polyline needs two points and two nodes per segment")
        atoms = {}
        for p, q in zip(pts[:-1], pts[1:]):
            h = abs(q - p) / (nodes - 1)
            for k in range(nodes):
                z = p + (q - p) * k / (nodes - 1)
                wgt = h / 2 if k in (0, nodes - 1) else h
                key = (round(z.real, 15), round(z.imag, 15))
                atoms[key] = atoms.get(key, 0j) + wgt * complex(density)
        return cls(tuple((complex(*k), c) for k, c in atoms.items()))

    def to_list(self):
        return [[z.real, z.imag, c.real, c.imag] for z, c in self.atoms]

    def __len__(self):
        return len(self.atoms)


def check_measure(g, measure):
    """Raise AtomOnPole if an atom is within 1e-6 of a unit-circle pole of the window."""
    for z, _ in measure.atoms:
        for e in g.directions.vectors:
            if abs(z - e) < POLE_EXCLUSION:
                raise AtomOnPole(f"atom {z} sits on the pole {e}")


def random_measure(g, atoms, rng, inner=0.85, outer=1.2):
    """Random atoms at least ``1 - inner`` (resp. ``outer - 1``) away from the unit circle."""
    out = []
    for _ in range(atoms):
        if rng.uniform() < 0.5:
            r = rng.uniform(0.1, inner)
        else:
            r = rng.uniform(outer, 3.0)
        z = r * np.exp(1j * rng.uniform(-math.pi, math.pi))
        c = complex(rng.standard_normal(), rng.standard_normal())
        out.append((complex(z), c))
    m = AtomicMeasure(tuple(out))
    check_measure(g, m)
    return m


def _window(g, base, window, kind):
    if isinstance(window, (int, float)):
        return g.instances_within(g.position(base), float(window), kind)
    return [tuple(v) for v in window]


@dataclass
class DafResult:
    values: dict
    residual: float
    scale: float
    interior: list = field(default_factory=list)

    @property
    def relative_residual(self):
        return self.residual / max(1.0, self.scale)


def convolve_analytic(g, w0, measure, window=8.0):
    """``F(b) = sum_k c_k f_b(z_k)`` on the black vertices of the window."""
    if not g.bipartite:
        raise GraphError("discrete analytic functions on B need a bipartite graph")
    check_measure(g, measure)
    w0 = tuple(w0)
    blacks = [v for v in _window(g, w0, window, "black")]
    values = {}
    for b in blacks:
        F = propagate_f(g, w0, b)
        values[b] = sum((c * evaluate(F, z) for z, c in measure.atoms), 0j)
    residual, scale, interior = dbar_residual(g, values, _window(g, w0, window, "white"))
    return DafResult(values, residual, scale, interior)


def dbar_residual(g, values, whites, skip=()):
    """``max_w |sum_b dbar(w, b) F(b)|`` over whites with all neighbours known."""
    worst, scale, interior = 0.0, 0.0, []
    for w in whites:
        if w in skip:
            continue
        nbrs = list(white_neighbors(g, w))
        if not all(b in values for b, _ in nbrs):
            continue
        interior.append(w)
        s = sum((val * values[b] for b, val in nbrs), 0j)
        worst = max(worst, abs(s))
        scale = max(scale, max(abs(values[b]) for b, _ in nbrs))
    return worst, scale, interior


def _h_function(g, v0, v):
    """``h_v = z g_v``, so that ``h_{v0} = 1``."""
    G = propagate_g(g, v0, v)
    return FactorFunction(G.exponent_at_zero - 1, G.factors, G.table)


def convolve_harmonic(g, v0, measure, window=8.0, kind="primal"):
    """``H(v) = sum_k c_k h_v(z_k)``, discrete harmonic on the primal (or dual) vertices."""
    check_measure(g, measure)
    v0 = tuple(v0)
    verts = _window(g, v0, window, kind)
    values = {}
    for v in verts:
        h = _h_function(g, v0, v)
        values[v] = sum((c * evaluate(h, z) for z, c in measure.atoms), 0j)
    residual, scale, interior = laplacian_residual(g, values)
    return DafResult(values, residual, scale, interior)


def laplacian_residual(g, values, skip=()):
    worst, scale, interior = 0.0, 0.0, []
    for v in values:
        if v in skip:
            continue
        row = laplacian_row(g, v)
        if not all(u in values for u in row):
            continue
        interior.append(v)
        s = sum((c * values[u] for u, c in row.items()), 0j)
        worst = max(worst, abs(s))
        scale = max(scale, max(abs(values[u]) for u in row))
    return worst, scale, interior


# ---------------------------------------------------------------------------
# perturbation of the embedding


@dataclass
class PerturbedEmbedding:
    epsilon: float
    black_polygons: dict  # black instance -> image polygon of its dual face
    white_polygons: dict  # white instance -> image polygon (for drawing)
    translations: dict
    white_defects: dict  # white instance -> |sum_j e*_j (1 + eps F(b_j))|
    stitch_defect: float
    singular: tuple | None = None
    holonomy: complex = 0j
    sheets: tuple = (0,)
    graph_digest: str = ""

    def max_defect(self, exclude_singular=True):
        vals = [d for w, d in self.white_defects.items()
                if not (exclude_singular and w == self.singular)]
        return max(vals, default=0.0)

    def sheet_polygons(self, k):
        """Black-face images on sheet ``k`` of the cover branched at the singular vertex."""
        shift = k * self.holonomy
        return {b: [z + shift for z in poly] for b, poly in self.black_polygons.items()}


def _ring(g, inst):
    """Dual neighbours of a primal instance, counterclockwise."""
    p = g.position(inst)
    ring = [nb for nb, _, _ in g.neighbors(inst)]
    ring.sort(key=lambda d: math.atan2((g.position(d) - p).imag, (g.position(d) - p).real))
    return ring


def _crosses(p, q, origin, direction):
    """Signed crossing of segment p->q with the ray ``origin + t direction``, t > 0."""
    d1, d2 = (p - origin) / direction, (q - origin) / direction
    if (d1.imag > 0) == (d2.imag > 0):
        return 0
    t = d1.real - d1.imag * (d2.real - d1.real) / (d2.imag - d1.imag)
    if t <= 0:
        return 0
    return 1 if d2.imag > 0 else -1


def dbar_inverse_values(g, w0, radius, center=None):
    """``dbar^{-1}(w0, .)`` on the black vertices of a window."""
    from .kernels import dbar_inverse

    w0 = tuple(w0)
    c = g.position(w0) if center is None else complex(center)
    return {b: complex(dbar_inverse(g, w0, b)) for b in g.instances_within(c, radius, "black")}


def perturb_embedding(g, F, epsilon, radius=6.0, center=None, singular=None, windings=0):
    """Image of the dual faces under ``z -> z (1 + eps F(b)) + t_b``.

    ``F`` maps black instances to values (dict or callable); ``None`` means
    ``F = 0``. With ``singular = w0`` the function may have a unit source at
    ``w0`` (as ``dbar^{-1}(w0, .)`` does); translations are then stitched on
    the plane cut along a ray from ``w0`` and the jump across the cut is the
    holonomy of the branched cover, reported with sheets ``|k| <= windings``.
    """
    if not g.bipartite:
        raise GraphError("perturbations need a bipartite graph")
    if abs(windings) > MAX_WINDING:
        raise ValueError(f"at most {MAX_WINDING} windings")
    singular = None if singular is None else tuple(singular)
    c0 = (g.position(singular) if singular is not None else 0j) if center is None else complex(center)
    blacks = g.instances_within(c0, radius, "black")
    if F is None:
        values = {b: 0j for b in blacks}
    elif callable(F):
        values = {b: complex(F(b)) for b in blacks}
    else:
        values = {b: complex(F[b]) for b in blacks if b in F}
        blacks = [b for b in blacks if b in values]
    whites = g.instances_within(c0, radius, "white")
    res, scale, _ = dbar_residual(g, values, whites, skip=(singular,) if singular else ())
    if res > ANALYTIC_TOL * max(1.0, scale):
        raise NotAnalytic(f"dbar F residual {res:.3g} exceeds {ANALYTIC_TOL}")
    eps = float(epsilon)

    rings = {b: _ring(g, b) for b in blacks}
    by_dual = {}
    for b in blacks:
        for x in rings[b]:
            by_dual.setdefault(x, []).append(b)
    links = []  # (b, b2, x, crossing sign)
    cut_dir = complex(math.cos(CUT_ANGLE), math.sin(CUT_ANGLE))
    origin = g.position(singular) if singular is not None else None
    for x, bs in sorted(by_dual.items()):
        for i in range(len(bs)):
            for j in range(i + 1, len(bs)):
                b, b2 = bs[i], bs[j]
                s = 0
                if origin is not None:
                    px = g.position(x)
                    s = _crosses(g.position(b), px, origin, cut_dir) + _crosses(px, g.position(b2), origin, cut_dir)
                links.append((b, b2, x, s))

    def jump(b, b2, x):
        # x (1 + eps F(b)) + t_b = x (1 + eps F(b2)) + t_b2
        return eps * g.position(x) * (values[b] - values[b2])

    adj = {b: [] for b in blacks}
    for b, b2, x, s in links:
        if s == 0:
            adj[b].append((b2, x))
            adj[b2].append((b, x))
    t = {}
    for root in blacks:
        if root in t:
            continue
        t[root] = 0j
        queue = deque([root])
        while queue:
            b = queue.popleft()
            for b2, x in adj[b]:
                if b2 not in t:
                    t[b2] = t[b] + jump(b, b2, x)
                    queue.append(b2)
    stitch = 0.0
    hol = None
    for b, b2, x, s in links:
        r = t[b2] - t[b] - jump(b, b2, x)
        if s == 0:
            stitch = max(stitch, abs(r))
        else:
            if hol is None:
                hol = r * s
            stitch = max(stitch, abs(r - s * hol))
    if stitch > STITCH_TOL * max(1.0, abs(eps) * max(1.0, scale) * radius):
        raise StitchError(f"translations do not close: defect {stitch:.3g}")

    black_polys = {b: [g.position(x) * (1 + eps * values[b]) + t[b] for x in rings[b]] for b in blacks}
    white_polys, defects = {}, {}
    for w in whites:
        nbrs = list(white_neighbors(g, w))
        if not all(b in values for b, _ in nbrs):
            continue
        # e*_j = i dbar(w, b_j)
        defects[w] = abs(sum((1j * val * (1 + eps * values[b]) for b, val in nbrs), 0j))
        # chain the image edges from one black face so faces cut by the branch
        # ray are drawn on a single sheet
        ring = _ring(g, w)
        mine = {b for b, _ in nbrs}
        owners = []
        for i, x in enumerate(ring):
            nxt = ring[(i + 1) % len(ring)]
            shared = [b for b in by_dual.get(x, ()) if b in mine and nxt in rings[b]]
            if not shared:
                break
            owners.append(shared[0])
        else:
            b0 = owners[0]
            z = g.position(ring[0]) * (1 + eps * values[b0]) + t[b0]
            poly = [z]
            for i, b in enumerate(owners[:-1]):
                z = z + (g.position(ring[i + 1]) - g.position(ring[i])) * (1 + eps * values[b])
                poly.append(z)
            white_polys[w] = poly
    sheets = tuple(range(-abs(windings), abs(windings) + 1)) if singular is not None else (0,)
    return PerturbedEmbedding(eps, black_polys, white_polys, t, defects, stitch, singular,
                              hol if hol is not None else 0j, sheets, g.digest())


def transport_residual(g, p, values):
    """Largest ``|sum_j e*_j (1 + eps F(b_j))|`` relative to ``1 + |eps| max|F|``."""
    m = max((abs(v) for v in values.values()), default=0.0)
    return p.max_defect() / (1 + abs(p.epsilon) * m)


# ---------------------------------------------------------------------------
# SVG


def _fmt(x):
    return f"{x:.6f}".rstrip("0").rstrip(".") if x != 0 else "0"


def render_svg(p, path=None, radius=6.0, size=640):
    """Deterministic SVG of a perturbed embedding or of an unperturbed graph window.

    Black faces are filled, white faces outlined, the singular face in red.
    Returns the SVG text, also written to ``path`` when given.
    """
    if not isinstance(p, PerturbedEmbedding):
        p = perturb_embedding(p, None, 0.0, radius=radius)
    polys = []
    for k in p.sheets:
        for b, poly in sorted(p.sheet_polygons(k).items()):
            polys.append(("black", poly))
    shifts = [k * p.holonomy for k in p.sheets]
    for w, poly in sorted(p.white_polygons.items()):
        cls = "singular" if w == p.singular else "white"
        for s in shifts:
            polys.append((cls, [z + s for z in poly]))
    pts = [z for _, poly in polys for z in poly] or [0j]
    xs = [z.real for z in pts]
    ys = [z.imag for z in pts]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    span = max(x1 - x0, y1 - y0, 1e-9)
    scale = (size - 20) / span

    def tr(z):
        return 10 + (z.real - x0) * scale, 10 + (y1 - z.imag) * scale

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        "<style>.black{fill:#222;stroke:#222;stroke-width:0.5}"
        ".white{fill:none;stroke:#888;stroke-width:0.5}"
        ".singular{fill:#f33;fill-opacity:0.4;stroke:#c00;stroke-width:1}</style>",
    ]
    for cls, poly in polys:
        coords = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in map(tr, poly))
        lines.append(f'<polygon class="{cls}" points="{coords}"/>')
    lines.append("</svg>")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
