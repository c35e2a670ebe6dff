"""Finite dimer models on simply connected pieces of a critical graph."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from shapely.geometry import LineString, Point, Polygon

from .errors import GraphError, PolygonError, SingularMatrix, TooLarge
from .operators import dbar_entry, white_neighbors

COVER_TOL = 1e-9


@dataclass
class FiniteSubgraph:
    graph: object
    whites: list
    blacks: list
    edges: list  # (white index, black index, dbar entry)
    polygon: list
    faces: list  # inner faces as lists of instances, alternating colors

    @property
    def n_vertices(self):
        return len(self.whites) + len(self.blacks)

    @property
    def balanced(self):
        return len(self.whites) == len(self.blacks)

    def matrix(self):
        """Kasteleyn block: rows white, columns black."""
        m = np.zeros((len(self.whites), len(self.blacks)), dtype=complex)
        for i, j, val in self.edges:
            m[i, j] += val
        return m

    def edge_index(self, w, b):
        wi = self.whites.index(tuple(w))
        bi = self.blacks.index(tuple(b))
        return wi, bi


def cut_subgraph(g, polygon):
    """Vertices and edges of ``g`` on or inside a simple polygon."""
    if not g.bipartite:
        raise GraphError("dimer subgraphs need a bipartite graph")
    pts = [complex(p) if not isinstance(p, (list, tuple)) else complex(*p) for p in polygon]
    poly = Polygon([(p.real, p.imag) for p in pts])
    if len(pts) < 3 or not poly.is_valid or poly.area <= 0:
        raise PolygonError("polygon must be simple and non-degenerate")
    region = poly.buffer(COVER_TOL)
    cx, cy = poly.centroid.x, poly.centroid.y
    minx, miny, maxx, maxy = poly.bounds
    radius = math.hypot(maxx - minx, maxy - miny) / 2 + 1
    inside = [v for v in g.instances_within(complex(cx, cy), radius, "primal")
              if region.covers(Point(g.position(v).real, g.position(v).imag))]
    inside.sort()
    whites = [v for v in inside if g.colors[v[0]] == "W"]
    blacks = [v for v in inside if g.colors[v[0]] == "B"]
    bidx = {b: j for j, b in enumerate(blacks)}
    edges = []
    for i, w in enumerate(whites):
        pw = g.position(w)
        for b, val in white_neighbors(g, w):
            j = bidx.get(b)
            if j is None:
                continue
            pb = g.position(b)
            if region.covers(LineString([(pw.real, pw.imag), (pb.real, pb.imag)])):
                edges.append((i, j, val))
    s = FiniteSubgraph(g, whites, blacks, edges, pts, [])
    s.faces = _inner_faces(s)
    return s


def box_polygon(center, width, height=None):
    """Axis-aligned rectangle around ``center``."""
    height = width if height is None else height
    c = complex(center)
    hw, hh = width / 2, height / 2
    return [c + complex(-hw, -hh), c + complex(hw, -hh), c + complex(hw, hh), c + complex(-hw, hh)]


def square_box(g, n, corner=0j):
    """n x n block of vertices of a square-type lattice, lower-left at ``corner``."""
    step = abs(dbar_entry(g, (0, 0, 0), next(iter(white_neighbors(g, (0, 0, 0))))[0]))
    pad = step / 2
    return cut_subgraph(g, box_polygon(corner + complex((n - 1) * step / 2, (n - 1) * step / 2),
                                       (n - 1) * step + pad, (n - 1) * step + pad))


def _face_cycle(g, fi, cell):
    """Vertex instances around face ``fi`` with its first tail at ``cell``."""
    f = g.faces[fi]
    out = []
    for h, c in zip(f.halfedges, f.cells):
        u, v = g.edges[h // 2][:2]
        tail = int(u) if h % 2 == 0 else int(v)
        out.append((tail, cell[0] + c[0], cell[1] + c[1]))
    return out


def _inner_faces(s):
    g = s.graph
    verts = set(s.whites) | set(s.blacks)
    edge_set = {(s.whites[i], s.blacks[j]) for i, j, _ in s.edges}
    faces = []
    cells = {(v[1], v[2]) for v in verts}
    for fi in range(g.n_faces):
        for a, b in sorted(cells):
            cyc = _face_cycle(g, fi, (a, b))
            if not all(v in verts for v in cyc):
                continue
            ok = True
            for k in range(len(cyc)):
                p, q = cyc[k], cyc[(k + 1) % len(cyc)]
                if g.colors[p[0]] == "B":
                    p, q = q, p
                if (p, q) not in edge_set:
                    ok = False
                    break
            if ok:
                faces.append(cyc)
    return faces


def partition_function(s):
    """Weighted matching count, ``|det|`` of the Kasteleyn block.

    Balanced subgraphs only; unbalanced ones have no perfect matching.
    """
    if not s.balanced or not s.whites:
        return 0.0 if s.whites or s.blacks else 1.0
    sign, logdet = np.linalg.slogdet(s.matrix())
    if sign == 0:
        return 0.0
    return float(math.exp(logdet))


def log_partition_function(s):
    if not s.balanced:
        return -math.inf
    sign, logdet = np.linalg.slogdet(s.matrix())
    return float(logdet) if sign != 0 else -math.inf


def enumerate_matchings(s, cap=24, keep=True):
    """Exact sum over perfect matchings of the product of edge weights.

    Returns ``(total, count, matchings)``; each matching is a list of
    ``(white index, black index)`` pairs.
    """
    if s.n_vertices > cap:
        raise TooLarge(f"{s.n_vertices} vertices exceed the cap of {cap}")
    if not s.balanced:
        return 0.0, 0, []
    nbrs = [[] for _ in s.whites]
    for i, j, val in s.edges:
        nbrs[i].append((j, abs(val)))
    used = [False] * len(s.blacks)
    found = []
    total = 0.0
    count = 0

    def rec(done, order, weight, current):
        nonlocal total, count
        if done == len(order):
            total += weight
            count += 1
            if keep:
                found.append(list(current))
            return
        i = order[done]
        for j, wgt in nbrs[i]:
            if not used[j]:
                used[j] = True
                current.append((i, j))
                rec(done + 1, order, weight * wgt, current)
                current.pop()
                used[j] = False

    # most constrained rows first prunes dead ends early
    order = sorted(range(len(s.whites)), key=lambda i: (len(nbrs[i]), i))
    rec(0, order, 1.0, [])
    return total, count, found


def check_flatness(s):
    """Largest Kasteleyn-flatness defect over the inner faces (radians)."""
    g = s.graph
    worst = 0.0
    for cyc in s.faces:
        # rotate so the cycle starts at a white vertex u1
        if g.colors[cyc[0][0]] != "W":
            cyc = cyc[1:] + cyc[:1]
        m = len(cyc) // 2
        lhs = 1 + 0j
        rhs = 1 + 0j
        for i in range(m):
            u, v, u_next = cyc[2 * i], cyc[2 * i + 1], cyc[(2 * i + 2) % len(cyc)]
            lhs *= dbar_entry(g, u, v)
            rhs *= dbar_entry(g, u_next, v)
        rhs *= (-1) ** (m - 1)
        d = abs(cmath.phase(lhs / rhs))
        worst = max(worst, d)
    return worst


def local_stats(s, edges):
    """Probability that all listed ``(w, b)`` edges are in the random matching."""
    m = s.matrix()
    if not s.balanced or partition_function(s) == 0.0:
        raise SingularMatrix("subgraph has no perfect matching")
    inv = np.linalg.inv(m)  # rows black, columns white
    idx = [s.edge_index(w, b) for w, b in edges]
    weight = 1 + 0j
    for wi, bi in idx:
        weight *= m[wi, bi]
    minor = np.array([[inv[bj, wi] for (wi, _) in idx] for (_, bj) in idx])
    p = weight * np.linalg.det(minor)
    if abs(p.imag) > 1e-8 * max(1.0, abs(p)):
        raise SingularMatrix(f"local statistic is not real: {p}")
    return float(min(1.0, max(0.0, p.real)))


def central_edge(s):
    """The edge of ``s`` closest to the centroid of its vertices."""
    g = s.graph
    pts = [g.position(v) for v in s.whites + s.blacks]
    c = sum(pts) / len(pts)
    best = None
    for i, j, _ in s.edges:
        mid = (g.position(s.whites[i]) + g.position(s.blacks[j])) / 2
        key = (round(abs(mid - c), 9), i, j)
        if best is None or key < best[0]:
            best = (key, s.whites[i], s.blacks[j])
    return best[1], best[2]
