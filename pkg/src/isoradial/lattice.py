"""Periodic isoradial graphs.

A graph is given by a fundamental domain: vertex positions, lattice vectors
and edges carrying integer lattice offsets. Faces, circumcenters (dual
vertices), rhombi and the rhombus tiling ``G u G*`` are derived here and
checked against the isoradial invariants; nothing geometric is trusted from
the input besides vertex positions.

Vertices of the infinite graph are addressed as *instances*
``(tid, a, b)``: tiling vertex ``tid`` translated by ``a*l1 + b*l2``.
Tiling ids ``0..V-1`` are primal vertices, ``V..V+F-1`` dual vertices.
"""

from __future__ import annotations

import cmath
import hashlib
import heapq
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GeometryError, NotFound, ParseError

ANGLE_MERGE_TOL = 1e-9
GEOM_TOL = 1e-10
THETA_MIN = 1e-7

STRICT = "strict"
PERMISSIVE = "permissive"
COMBINATORIAL = "combinatorial"


def canonical_angle(z):
    """Argument of ``z`` in (-pi, pi], with -pi folded onto pi."""
    a = math.atan2(z.imag, z.real)
    if a <= -math.pi + ANGLE_MERGE_TOL:
        a += 2 * math.pi
    return a


class DirectionTable:
    """Sorted set of unit directions, closed under z -> -z.

    Directions closer than ``ANGLE_MERGE_TOL`` in angle are merged, so every
    later pole/zero bookkeeping works on integer indices.
    """

    def __init__(self, vectors):
        raw = []
        for v in vectors:
            raw.append(canonical_angle(complex(v)))
            raw.append(canonical_angle(-complex(v)))
        raw.sort()
        angles = []
        for a in raw:
            if not angles or a - angles[-1] > ANGLE_MERGE_TOL:
                angles.append(a)
        if len(angles) > 1 and angles[0] + 2 * math.pi - angles[-1] <= ANGLE_MERGE_TOL:
            angles.pop(0)
        self.angles = np.array(angles)
        self.vectors = np.exp(1j * self.angles)
        self.antipode = np.array([self._lookup(a + math.pi) for a in angles])

    def __len__(self):
        return len(self.angles)

    def _lookup(self, angle):
        a = canonical_angle(cmath.exp(1j * angle))
        i = int(np.searchsorted(self.angles, a))
        n = len(self.angles)
        for j in (i - 1, i, i + 1):
            k = j % n
            d = abs(a - self.angles[k])
            d = min(d, 2 * math.pi - d)
            if d <= ANGLE_MERGE_TOL:
                return k
        raise KeyError(f"direction {angle!r} not in table")

    def index(self, vec):
        """Index of the direction of the complex number ``vec``."""
        return self._lookup(math.atan2(vec.imag, vec.real))

    def angle(self, k):
        return float(self.angles[k])


@dataclass(frozen=True)
class Rhombus:
    """Rhombus of one graph edge, vertices ``(w, x, b, y)`` counterclockwise.

    ``w`` and ``b`` are primal, ``x`` and ``y`` dual; all are instances
    relative to the cell of the edge's first endpoint. For bipartite graphs
    ``w`` is the white endpoint.
    """

    edge: int
    w: tuple
    x: tuple
    b: tuple
    y: tuple
    positions: tuple
    theta: float
    dirs: tuple  # direction indices of x - w and y - w

    def sides(self):
        """The four sides s0=wx, s1=xb, s2=by, s3=yw; s0||s2 and s1||s3."""
        return [(self.w, self.x), (self.x, self.b), (self.b, self.y), (self.y, self.w)]

    @property
    def center(self):
        return sum(self.positions) / 4


@dataclass
class Chain:
    """Train track of rhombi through one fundamental period.

    ``members`` holds ``(rhombus, a, b, pair)`` where ``pair`` is 0 if the
    chain crosses sides s0/s2 of the rhombus, 1 for s1/s3. ``period`` is the
    lattice translation carrying the chain onto itself.
    """

    members: list
    direction: int
    period: tuple

    def __len__(self):
        return len(self.members)


@dataclass
class Face:
    halfedges: list
    cells: list  # cell of each half-edge tail, tail of halfedges[0] at (0, 0)
    polygon: list  # unrolled vertex positions
    center: complex
    radius_defect: float


@dataclass
class IsoradialGraph:
    lattice: tuple
    vertex_ids: list
    pos: np.ndarray
    colors: list
    edges: np.ndarray  # rows u, v, du, dv
    mode: str = STRICT
    roles: list | None = None
    sources: list | None = None
    faces: list = field(default_factory=list)
    rhombi: list = field(default_factory=list)
    theta: np.ndarray | None = None
    directions: DirectionTable | None = None
    tiling_adj: list = field(default_factory=list)
    tiling_pos: np.ndarray | None = None
    document: dict | None = None
    parent: "IsoradialGraph | None" = None

    # ---- basic shape -------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.pos)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def bipartite(self):
        return all(c in ("B", "W") for c in self.colors)

    @property
    def is_superposition(self):
        return self.roles is not None

    def is_primal(self, tid):
        return tid < self.n_vertices

    def color(self, tid):
        return self.colors[tid] if tid < self.n_vertices else None

    def nu(self):
        return 2 * np.sin(self.theta)

    def conductance(self):
        return np.tan(self.theta)

    # ---- coordinates ---------------------------------------------------
    def cell_vector(self, a, b):
        l1, l2 = self.lattice
        return a * l1 + b * l2

    def position(self, inst):
        tid, a, b = inst
        return complex(self.tiling_pos[tid] + self.cell_vector(a, b))

    def lattice_coords(self, z):
        l1, l2 = self.lattice
        m = np.array([[l1.real, l2.real], [l1.imag, l2.imag]])
        return np.linalg.solve(m, [z.real, z.imag])

    def locate(self, tid, z):
        """Instance of tiling vertex ``tid`` sitting at position ``z``."""
        s, t = self.lattice_coords(complex(z) - complex(self.tiling_pos[tid]))
        a, b = int(round(s)), int(round(t))
        if abs(self.position((tid, a, b)) - z) > 1e-7:
            raise NotFound(f"no copy of vertex {tid} at {z}")
        return (tid, a, b)

    def instances_within(self, center, radius, kind="all"):
        """All tiling instances within ``radius`` of ``center``, sorted."""
        nv = self.n_vertices
        if kind == "primal":
            tids = range(nv)
        elif kind == "dual":
            tids = range(nv, len(self.tiling_pos))
        elif kind in ("black", "white"):
            c = "B" if kind == "black" else "W"
            tids = [t for t in range(nv) if self.colors[t] == c]
        else:
            tids = range(len(self.tiling_pos))
        l1, l2 = self.lattice
        # bounding box in lattice coordinates
        m = np.array([[l1.real, l2.real], [l1.imag, l2.imag]])
        inv = np.linalg.inv(m)
        span = radius * np.sqrt((inv ** 2).sum(axis=1)) + 2
        out = []
        for tid in tids:
            s0, t0 = inv @ np.array([(center - self.tiling_pos[tid]).real,
                                     (center - self.tiling_pos[tid]).imag])
            for a in range(int(math.floor(s0 - span[0])), int(math.ceil(s0 + span[0])) + 1):
                for b in range(int(math.floor(t0 - span[1])), int(math.ceil(t0 + span[1])) + 1):
                    if abs(self.tiling_pos[tid] + a * l1 + b * l2 - center) <= radius:
                        out.append((tid, a, b))
        out.sort(key=lambda i: (abs(self.position(i) - center), i))
        return out

    def neighbors(self, inst):
        """Tiling neighbours of an instance: ``(instance, step_vector, dir)``."""
        tid, a, b = inst
        for nt, da, db, step, d in self.tiling_adj[tid]:
            yield (nt, a + da, b + db), step, d

    def graph_neighbors(self, inst):
        """Primal neighbours ``(instance, edge index)`` of a primal instance."""
        tid, a, b = inst
        for k, (u, v, du, dv) in enumerate(self.edges):
            if u == tid:
                yield (int(v), a + int(du), b + int(dv)), k
            if v == tid:
                yield (int(u), a - int(du), b - int(dv)), k

    def dual_neighbors(self, inst):
        """Dual neighbours ``(instance, edge index)`` of a dual instance."""
        f = inst[0] - self.n_vertices
        for k, rh in enumerate(self.rhombi):
            xs = rh.x
            ys = rh.y
            if xs[0] - self.n_vertices == f:
                yield (ys[0], inst[1] - xs[1] + ys[1], inst[2] - xs[2] + ys[2]), k
            if ys[0] - self.n_vertices == f:
                yield (xs[0], inst[1] - ys[1] + xs[1], inst[2] - ys[2] + xs[2]), k

    # ---- serialization -------------------------------------------------
    def to_document(self):
        if self.document is not None:
            return json.loads(json.dumps(self.document))
        return make_document(self.lattice, self.pos, self.colors, self.edges, self.vertex_ids)

    def digest(self):
        text = json.dumps(self.to_document(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# document I/O


def make_document(lattice, pos, colors, edges, ids=None):
    ids = list(range(len(pos))) if ids is None else list(ids)
    return {
        "lattice": [[float(z.real), float(z.imag)] for z in lattice],
        "vertices": [
            {"id": int(ids[i]), "pos": [float(p.real), float(p.imag)], "color": colors[i]}
            for i, p in enumerate(pos)
        ],
        "edges": [
            {"u": int(ids[u]), "v": int(ids[v]), "du": int(du), "dv": int(dv)}
            for u, v, du, dv in edges
        ],
    }


def read_document(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    _check_document(doc)
    return doc


def write_document(doc):
    return json.dumps(doc, indent=1) + "\n"


def _check_document(doc):
    if not isinstance(doc, dict):
        raise ParseError("document must be a JSON object")
    for key in ("lattice", "vertices", "edges"):
        if key not in doc:
            raise ParseError(f"missing key {key!r}")
    lat = doc["lattice"]
    if not (isinstance(lat, list) and len(lat) == 2 and all(_is_pair(p) for p in lat)):
        raise ParseError("lattice must be two [re, im] pairs")
    ids = set()
    for v in doc["vertices"]:
        if not isinstance(v, dict) or "id" not in v or "pos" not in v or not _is_pair(v["pos"]):
            raise ParseError(f"malformed vertex {v!r}")
        if not isinstance(v["id"], int) or v["id"] in ids:
            raise ParseError(f"bad or duplicate vertex id {v.get('id')!r}")
        if v.get("color") not in ("B", "W", None):
            raise ParseError(f"bad color {v.get('color')!r}")
        ids.add(v["id"])
    for e in doc["edges"]:
        if not isinstance(e, dict) or any(not isinstance(e.get(k), int) for k in ("u", "v", "du", "dv")):
            raise ParseError(f"malformed edge {e!r}")
        if e["u"] not in ids or e["v"] not in ids:
            raise ParseError(f"edge {e!r} references unknown vertex")


def _is_pair(p):
    return (isinstance(p, list) and len(p) == 2
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in p))


# ---------------------------------------------------------------------------
# construction


def build_graph(doc, mode=STRICT):
    """Build and validate an :class:`IsoradialGraph` from a document.

    ``doc`` is a dict or JSON text. ``mode`` is ``"strict"`` (default; rejects
    half-angles outside [1e-7, pi/2 - 1e-7]), ``"permissive"`` (accepts
    degenerate rhombi) or ``"combinatorial"`` (skips all metric checks; used
    to inspect chains of graphs that have no isoradial embedding).
    """
    if isinstance(doc, (str, bytes)):
        doc = read_document(doc)
    else:
        _check_document(doc)
    lattice = tuple(complex(x, y) for x, y in doc["lattice"])
    if abs((lattice[0].conjugate() * lattice[1]).imag) < 1e-12:
        raise GeometryError("lattice", "lattice vectors are not independent")
    ids = [v["id"] for v in doc["vertices"]]
    index = {vid: i for i, vid in enumerate(ids)}
    pos = np.array([complex(*v["pos"]) for v in doc["vertices"]])
    colors = [v.get("color") for v in doc["vertices"]]
    if any(c is not None for c in colors) and any(c is None for c in colors):
        raise ParseError("colors must be given for all vertices or none")
    edges = np.array(
        [[index[e["u"]], index[e["v"]], e["du"], e["dv"]] for e in doc["edges"]], dtype=int
    ).reshape(-1, 4)
    g = IsoradialGraph(lattice, ids, pos, colors, edges, mode=mode)
    g.document = json.loads(json.dumps(doc))
    _assemble(g)
    return g


def _edge_vector(g, u, v, du, dv):
    return g.pos[v] + g.cell_vector(du, dv) - g.pos[u]


def _assemble(g):
    check = g.mode != COMBINATORIAL
    nv = g.n_vertices
    if len(g.edges) == 0:
        raise GeometryError("unit-edge", "graph has no edges")

    if g.bipartite:
        for u, v, du, dv in g.edges:
            if g.colors[u] == g.colors[v]:
                raise GeometryError("coloring", f"edge {g.vertex_ids[u]}-{g.vertex_ids[v]} joins two {g.colors[u]} vertices")

    # half-angles from edge lengths: |u - v| = 2 cos(theta)
    lengths = np.array([abs(_edge_vector(g, *e)) for e in g.edges])
    if check:
        for k, ell in enumerate(lengths):
            if ell > 2 + GEOM_TOL or ell < 0:
                raise GeometryError("unit-edge", f"edge {k} has length {ell:.6g} > 2")
        theta_len = np.arccos(np.clip(lengths / 2, -1, 1))
        sums = np.zeros(nv)
        for k, (u, v, du, dv) in enumerate(g.edges):
            sums[u] += 2 * theta_len[k]
            sums[v] += 2 * theta_len[k]
        for i in range(nv):
            if abs(sums[i] - 2 * math.pi) > GEOM_TOL:
                raise GeometryError(
                    "angle-sum",
                    f"rhombus angles at vertex {g.vertex_ids[i]} sum to {sums[i]:.12f}, not 2*pi",
                )

    # rotation system; half-edge 2k is u->v, 2k+1 is v->u
    nh = 2 * len(g.edges)
    tail = np.empty(nh, dtype=int)
    off = np.empty((nh, 2), dtype=int)
    vec = np.empty(nh, dtype=complex)
    for k, (u, v, du, dv) in enumerate(g.edges):
        d = _edge_vector(g, u, v, du, dv)
        tail[2 * k], off[2 * k], vec[2 * k] = u, (du, dv), d
        tail[2 * k + 1], off[2 * k + 1], vec[2 * k + 1] = v, (-du, -dv), -d
    rot = defaultdict(list)
    for h in range(nh):
        key = (math.atan2(vec[h].imag, vec[h].real), (h // 2) if h % 2 == 0 else -(h // 2))
        rot[tail[h]].append((key, h))
    slot = {}
    for t in rot:
        rot[t] = [h for _, h in sorted(rot[t])]
        for i, h in enumerate(rot[t]):
            slot[h] = i
    for i in range(nv):
        if not rot.get(i):
            raise GeometryError("unit-edge", f"vertex {g.vertex_ids[i]} is isolated")

    def nxt(h):
        t = h ^ 1
        around = rot[tail[t]]
        return around[(slot[t] - 1) % len(around)]

    face_of = {}
    faces = []
    for h0 in range(nh):
        if h0 in face_of:
            continue
        hs, cells, poly = [], [], []
        cell = np.zeros(2, dtype=int)
        p = complex(g.pos[tail[h0]])
        h = h0
        while True:
            if h in face_of:
                raise GeometryError("unit-edge", "inconsistent rotation system")
            face_of[h] = len(faces)
            hs.append(h)
            cells.append((int(cell[0]), int(cell[1])))
            poly.append(p)
            p += vec[h]
            cell += off[h]
            h = nxt(h)
            if h == h0:
                break
        if cell.any():
            raise GeometryError("unit-edge", "a face does not close in the plane (non-planar input)")
        center = _circumcenter(poly)
        defect = max(abs(abs(q - center) - 1) for q in poly)
        faces.append(Face(hs, cells, poly, center, defect))
    g.faces = faces

    if check:
        for f in faces:
            if f.radius_defect > GEOM_TOL:
                raise GeometryError(
                    "unit-edge",
                    f"face circumradius deviates from 1 by {f.radius_defect:.3g} (rhombus edges not unit)",
                )

    nf = len(faces)
    g.tiling_pos = np.concatenate([g.pos, np.array([f.center for f in faces])])

    # dual instance on the left of each half-edge, relative to its tail at (0, 0)
    left = {}
    for fi, f in enumerate(faces):
        for h, c in zip(f.halfedges, f.cells):
            left[h] = (nv + fi, -c[0], -c[1])

    rhombi = []
    thetas = []
    for k, (u, v, du, dv) in enumerate(g.edges):
        u, v, du, dv = int(u), int(v), int(du), int(dv)
        yl = left[2 * k]
        xr = left[2 * k + 1]
        xr = (xr[0], xr[1] + du, xr[2] + dv)
        ui, vi = (u, 0, 0), (v, du, dv)
        w_, b_, x_, y_ = ui, vi, xr, yl
        if g.bipartite and g.colors[u] == "B":
            w_, b_, x_, y_ = vi, ui, yl, xr
        P = [g.position(i) for i in (w_, x_, b_, y_)]
        diag_p = abs(P[2] - P[0])
        diag_d = abs(P[3] - P[1])
        th = math.atan2(diag_d, diag_p)
        if check:
            for s in range(4):
                if abs(abs(P[(s + 1) % 4] - P[s]) - 1) > GEOM_TOL:
                    raise GeometryError("unit-edge", f"rhombus of edge {k} has a non-unit side")
            # x right of w->b, y left of it (circumcenters inside the faces)
            e = P[2] - P[0]
            cx = (e.conjugate() * (P[1] - P[0])).imag
            cy = (e.conjugate() * (P[3] - P[0])).imag
            if cx > GEOM_TOL or cy < -GEOM_TOL:
                raise GeometryError("angle-sum", f"rhombus of edge {k} is folded (circumcenter outside face)")
            if diag_p > GEOM_TOL and diag_d > GEOM_TOL:
                c = (e.conjugate() * (P[3] - P[1])).real / (diag_p * diag_d)
                if abs(c) > GEOM_TOL:
                    raise GeometryError("dual-length", f"dual edge of edge {k} is not perpendicular")
            if abs(diag_d - 2 * math.sin(math.acos(min(1.0, diag_p / 2)))) > GEOM_TOL:
                raise GeometryError("dual-length", f"dual edge of edge {k} has wrong length")
            if g.mode == STRICT and not (THETA_MIN <= th <= math.pi / 2 - THETA_MIN):
                raise GeometryError("degenerate", f"edge {k} has degenerate half-angle {th:.3g}")
        thetas.append(th)
        rhombi.append((k, w_, x_, b_, y_, tuple(P), th))
    g.theta = np.array(thetas)

    if check:
        dual_sums = np.zeros(nf)
        for fi, f in enumerate(faces):
            for h in f.halfedges:
                dual_sums[fi] += math.pi - 2 * g.theta[h // 2]
        for fi in range(nf):
            if abs(dual_sums[fi] - 2 * math.pi) > GEOM_TOL:
                raise GeometryError("angle-sum", f"rhombus angles at dual vertex {fi} sum to {dual_sums[fi]:.12f}")

    # rhombus tiling: unique primal-dual sides
    sides = {}
    for k, w_, x_, b_, y_, P, th in rhombi:
        for p_, d_ in ((w_, x_), (b_, x_), (b_, y_), (w_, y_)):
            key = (p_[0], d_[0], d_[1] - p_[1], d_[2] - p_[2])
            if key not in sides:
                sides[key] = g.position(d_) - g.position(p_)
    vectors = list(sides.values())
    g.directions = DirectionTable(vectors)
    adj = [[] for _ in range(nv + nf)]
    for (p_, d_, da, db), step in sides.items():
        adj[p_].append((d_, da, db, step, g.directions.index(step)))
        adj[d_].append((p_, -da, -db, -step, g.directions.index(-step)))
    for lst in adj:
        lst.sort(key=lambda t: (t[0], t[1], t[2]))
    g.tiling_adj = adj

    g.rhombi = [
        Rhombus(
            edge=k, w=w_, x=x_, b=b_, y=y_, positions=P, theta=th,
            dirs=(g.directions.index(P[1] - P[0]), g.directions.index(P[3] - P[0])),
        )
        for k, w_, x_, b_, y_, P, th in rhombi
    ]


def _circumcenter(poly):
    if len(poly) == 1:
        return poly[0]
    if len(poly) == 2:
        return (poly[0] + poly[1]) / 2
    p0 = poly[0]
    rows, rhs = [], []
    for p in poly[1:]:
        d = p - p0
        rows.append([2 * d.real, 2 * d.imag])
        rhs.append(abs(p) ** 2 - abs(p0) ** 2)
    sol, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    return complex(sol[0], sol[1])


# ---------------------------------------------------------------------------
# built-in graphs


def _rectangular(theta):
    c, s = 2 * math.cos(theta), 2 * math.sin(theta)
    lattice = (complex(c, s), complex(c, -s))
    pos = np.array([0j, complex(c, 0)])
    # white at origin; black neighbours at +c, -c, +is, -is
    edges = [(0, 1, 0, 0), (0, 1, -1, -1), (0, 1, -1, 0), (0, 1, 0, -1)]
    return make_document(lattice, pos, ["W", "B"], edges)


def _honeycomb():
    w = cmath.exp(2j * math.pi / 3)
    lattice = (1 - w, 1 - w.conjugate())
    pos = np.array([0j, 1 + 0j])
    edges = [(0, 1, 0, 0), (0, 1, -1, 0), (0, 1, 0, -1)]
    return make_document(lattice, pos, ["W", "B"], edges)


def _triangular():
    r = math.sqrt(3)
    lattice = (complex(r, 0), r * cmath.exp(1j * math.pi / 3))
    edges = [(0, 0, 1, 0), (0, 0, 0, 1), (0, 0, -1, 1)]
    return make_document(lattice, np.array([0j]), [None], edges)


def generate(kind, theta=None):
    """Built-in graphs: square, honeycomb, triangular, deformed_square."""
    if kind == "square":
        return build_graph(_rectangular(math.pi / 4))
    if kind == "honeycomb":
        return build_graph(_honeycomb())
    if kind == "triangular":
        return build_graph(_triangular())
    if kind == "deformed_square":
        if theta is None or not (0 < theta < math.pi / 2):
            raise DomainError(f"deformed_square needs theta in (0, pi/2), got {theta!r}")
        return build_graph(_rectangular(theta))
    raise DomainError(f"unknown lattice kind {kind!r}")


BUILTINS = ("square", "honeycomb", "triangular", "deformed_square")


# ---------------------------------------------------------------------------
# superposition


def superpose(g):
    """Bipartite superposition G_D of ``g`` and its dual, rescaled to radius 1.

    Black vertices are the vertices then the faces of ``g``; white vertices
    are its edges (placed at the rhombus centers). ``roles`` and ``sources``
    record where every G_D vertex comes from, with the same cell indexing.
    """
    nv, nf = g.n_vertices, g.n_faces
    pos, colors, roles, sources = [], [], [], []
    for i in range(nv):
        pos.append(2 * g.pos[i]); colors.append("B"); roles.append("primal"); sources.append(i)
    for f in range(nf):
        pos.append(2 * g.tiling_pos[nv + f]); colors.append("B"); roles.append("dual"); sources.append(f)
    edges = []
    for k, rh in enumerate(g.rhombi):
        u, v, du, dv = (int(t) for t in g.edges[k])
        wid = len(pos)
        pos.append(2 * (g.pos[u] + (g.position((v, du, dv)) - g.pos[u]) / 2))
        colors.append("W"); roles.append("edge"); sources.append(k)
        edges.append((wid, u, 0, 0))
        edges.append((wid, v, du, dv))
        for d_ in (rh.x, rh.y):
            # rhombus instances are relative to u's cell, which is the white's cell
            edges.append((wid, d_[0], d_[1], d_[2]))
    lattice = tuple(2 * z for z in g.lattice)
    doc = make_document(lattice, np.array(pos), colors, edges)
    mode = STRICT if g.mode == STRICT else PERMISSIVE
    try:
        gd = build_graph(doc, mode=mode)
    except GeometryError as exc:
        raise GeometryError(exc.kind, f"superposition degenerates: {exc}") from exc
    gd.roles = roles
    gd.sources = sources
    gd.parent = g
    return gd


def superposition_instance(gd, kind, tid, a=0, b=0):
    """G_D instance for G_T vertex (kind='primal'), face ('dual') or edge ('edge')."""
    for i, (r, s) in enumerate(zip(gd.roles, gd.sources)):
        if r == kind and s == tid:
            return (i, a, b)
    raise NotFound(f"no {kind} vertex {tid} in superposition")


def to_parent_instance(gd, inst):
    """Map a primal/dual black instance of G_D to a tiling instance of G_T."""
    tid, a, b = inst
    role, src = gd.roles[tid], gd.sources[tid]
    g = gd.parent
    if role == "primal":
        return (src, a, b)
    if role == "dual":
        return (g.n_vertices + src, a, b)
    raise NotFound("white vertices of G_D are edges of G_T")


# ---------------------------------------------------------------------------
# chains


def _side_key(g, p_inst, d_inst):
    """Canonical key of a tiling side plus the cell of its primal end."""
    if not g.is_primal(p_inst[0]):
        p_inst, d_inst = d_inst, p_inst
    return (p_inst[0], d_inst[0], d_inst[1] - p_inst[1], d_inst[2] - p_inst[2]), (p_inst[1], p_inst[2])


def extract_chains(g):
    """All chains of rhombi, one per class up to lattice translation."""
    owners = defaultdict(list)  # side key -> [(rhombus, side index, primal cell)]
    for r, rh in enumerate(g.rhombi):
        for s, (p_, q_) in enumerate(rh.sides()):
            key, cell = _side_key(g, p_, q_)
            owners[key].append((r, s, cell))
    for key, lst in owners.items():
        if len(lst) != 2:
            raise GeometryError("unit-edge", f"tiling side {key} lies on {len(lst)} rhombi")

    seen = set()
    chains = []
    for r0 in range(len(g.rhombi)):
        for pair in (0, 1):
            if (r0, pair) in seen:
                continue
            members = []
            r, a, b, entry = r0, 0, 0, pair  # enter through side `entry`
            while True:
                members.append((r, a, b, pair_of(entry)))
                seen.add((r, pair_of(entry)))
                exit_side = (entry + 2) % 4
                p_, q_ = g.rhombi[r].sides()[exit_side]
                key, cell = _side_key(g, p_, q_)
                (r1, s1, c1), (r2, s2, c2) = owners[key]
                if (r1, s1) == (r, exit_side) and (r2, s2) != (r, exit_side):
                    nr, ns, nc = r2, s2, c2
                elif (r2, s2) == (r, exit_side):
                    nr, ns, nc = r1, s1, c1
                else:
                    nr, ns, nc = r2, s2, c2
                na, nb = a + cell[0] - nc[0], b + cell[1] - nc[1]
                r, a, b, entry = nr, na, nb, ns
                if r == r0 and pair_of(entry) == pair:
                    period = (a, b)
                    break
                if len(members) > 4 * len(g.rhombi) + 4:
                    raise GeometryError("unit-edge", "chain does not close periodically")
            chains.append(Chain(members=members, direction=_chain_direction(g, r0, pair), period=period))
    return chains


def pair_of(side):
    return side % 2


def _chain_direction(g, r, pair):
    """Direction index of the common parallel of the chain through (r, pair).

    For bipartite graphs the parallel is oriented from the white side to the
    black side; otherwise from the primal to the dual end of the side.
    """
    rh = g.rhombi[r]
    P = rh.positions  # w, x, b, y
    if pair == 0:
        vec = P[1] - P[0]  # w -> x, parallel to y -> b
    else:
        vec = P[3] - P[0]  # w -> y, parallel to x -> b
    if g.bipartite and g.colors[rh.w[0]] != "W":
        vec = -vec
    return g.directions.index(vec)


def chain_families(g, chains=None):
    """Chains grouped by unsigned common-parallel direction (angle mod pi)."""
    chains = extract_chains(g) if chains is None else chains
    fam = defaultdict(list)
    for c in chains:
        a = g.directions.angle(c.direction) % math.pi
        key = round(a / ANGLE_MERGE_TOL) * ANGLE_MERGE_TOL
        match = next((k for k in fam if abs(k - a) < 1e-7 or abs(abs(k - a) - math.pi) < 1e-7), None)
        fam[match if match is not None else key].append(c)
    return dict(fam)


def _reduce_translation(t, period):
    a, b = t
    pa, pb = period
    if pa == 0 and pb == 0:
        return (a, b)
    if pa != 0:
        k = int(math.floor(a / pa))
        return (a - k * pa, b - k * pb)
    k = int(math.floor(b / pb))
    return (a - k * pa, b - k * pb)


def validate_zigzag(g, window_radius, center=0j):
    """Necessary embeddability conditions on chains near ``center``.

    Returns a list of findings; each is a dict with ``kind`` in
    ``{"self-crossing", "double-crossing"}``. An empty list means no violation
    was found in the window.
    """
    chains = extract_chains(g)
    where = {}
    for ci, c in enumerate(chains):
        for r, a, b, pair in c.members:
            where.setdefault((r, pair), (ci, a, b))
    report = []
    crossings = defaultdict(list)
    l1, l2 = g.lattice
    m = np.array([[l1.real, l2.real], [l1.imag, l2.imag]])
    inv = np.linalg.inv(m)
    span = window_radius * np.sqrt((inv ** 2).sum(axis=1)) + 2
    s0, t0 = inv @ np.array([center.real, center.imag])
    for r, rh in enumerate(g.rhombi):
        for a in range(int(s0 - span[0]) - 1, int(s0 + span[0]) + 2):
            for b in range(int(t0 - span[1]) - 1, int(t0 + span[1]) + 2):
                if abs(rh.center + g.cell_vector(a, b) - center) > window_radius:
                    continue
                inst = []
                for pair in (0, 1):
                    ci, ma, mb = where[(r, pair)]
                    t = _reduce_translation((a - ma, b - mb), chains[ci].period)
                    inst.append((ci, t))
                if inst[0] == inst[1]:
                    report.append({"kind": "self-crossing", "chain": inst[0], "rhombus": (r, a, b)})
                else:
                    crossings[tuple(sorted(inst))].append((r, a, b))
    for pair, where_ in sorted(crossings.items()):
        if len(where_) > 1:
            report.append({"kind": "double-crossing", "chains": pair, "rhombi": sorted(where_)})
    return report


# ---------------------------------------------------------------------------
# paths in the rhombus tiling


@dataclass(frozen=True)
class Step:
    start: tuple
    end: tuple
    vector: complex
    direction: int


def rhombus_path(g, v0, v1, minimal=True):
    """Path of unit rhombus edges from instance ``v0`` to ``v1``.

    With ``minimal`` the path is a shortest path in the tiling, which crosses
    every chain at most once. Otherwise a greedy walk is tried first.
    """
    if tuple(v0) == tuple(v1):
        raise DomainError("rhombus_path needs distinct endpoints")
    v0, v1 = tuple(v0), tuple(v1)
    target = g.position(v1)
    if not minimal:
        path = _greedy_path(g, v0, v1, target)
        if path is not None:
            return path
    return _astar(g, v0, v1, target)


def _greedy_path(g, v0, v1, target):
    cur, steps, seen = v0, [], {v0}
    limit = 8 * int(abs(target - g.position(v0)) + 4)
    while cur != v1 and len(steps) < limit:
        here = g.position(cur)
        best = None
        for nb, step, d in g.neighbors(cur):
            if nb in seen:
                continue
            gain = abs(target - here) - abs(target - here - step)
            if best is None or gain > best[0]:
                best = (gain, nb, step, d)
        if best is None:
            return None
        _, nb, step, d = best
        steps.append(Step(cur, nb, step, d))
        seen.add(nb)
        cur = nb
    return steps if cur == v1 else None


def _astar(g, v0, v1, target):
    def h(inst):
        return abs(target - g.position(inst))

    openq = [(h(v0), 0, v0)]
    dist = {v0: 0}
    came = {}
    while openq:
        _, d0, cur = heapq.heappop(openq)
        if cur == v1:
            break
        if d0 > dist.get(cur, math.inf):
            continue
        for nb, step, dr in g.neighbors(cur):
            nd = d0 + 1
            if nd < dist.get(nb, math.inf):
                dist[nb] = nd
                came[nb] = (cur, step, dr)
                heapq.heappush(openq, (nd + h(nb), nd, nb))
    if v1 not in came:
        raise NotFound(f"no rhombus path from {v0} to {v1}")
    steps = []
    cur = v1
    while cur != v0:
        prev, step, dr = came[cur]
        steps.append(Step(prev, cur, step, dr))
        cur = prev
    steps.reverse()
    return steps
