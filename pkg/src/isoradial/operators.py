"""The dbar operator, the Laplacian, the real gauge and D*D = Laplacian."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import GraphError, NotAdjacent, NotASuperposition, WindowError
from .factors import propagate_f
from .lattice import to_parent_instance


@dataclass(frozen=True)
class FiniteOperator:
    rows: list
    cols: list
    matrix: np.ndarray
    kind: str

    def to_csv(self, graph=None):
        """CSV triples ``row_id, col_id, re, im`` over the nonzero entries."""
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["row_id", "col_id", "re", "im"])
        for i, j in zip(*np.nonzero(self.matrix)):
            z = complex(self.matrix[i, j])
            wr.writerow([_fmt_inst(self.rows[i]), _fmt_inst(self.cols[j]), repr(z.real), repr(z.imag)])
        return buf.getvalue()


def _fmt_inst(inst):
    return "{}:{}:{}".format(*inst)


def _entry_table(g):
    """(white tid, black tid, da, db) -> summed dbar entry, cached on the graph."""
    cache = g.__dict__.get("_dbar_table")
    if cache is not None:
        return cache
    table = defaultdict(complex)
    for rh in g.rhombi:
        w, x, b, y = rh.positions
        key = (rh.w[0], rh.b[0], rh.b[1] - rh.w[1], rh.b[2] - rh.w[2])
        table[key] += 1j * (x - y)
    table = dict(table)
    g.__dict__["_dbar_table"] = table
    return table


def dbar_entry(g, w, b):
    """``dbar(w, b) = i (x - y)`` for the rhombus ``(w, x, b, y)``."""
    if not g.bipartite:
        raise GraphError("dbar needs a bipartite graph")
    w, b = tuple(w), tuple(b)
    if g.color(w[0]) == "B" and g.color(b[0]) == "W":
        w, b = b, w  # the operator is symmetric
    key = (w[0], b[0], b[1] - w[1], b[2] - w[2])
    try:
        return _entry_table(g)[key]
    except KeyError:
        raise NotAdjacent(f"{w!r} and {b!r} are not adjacent") from None


def white_neighbors(g, w):
    """Black neighbours of a white instance with their dbar entries."""
    tab = _entry_table(g)
    for (tw, tb, da, db), val in tab.items():
        if tw == w[0]:
            yield (tb, w[1] + da, w[2] + db), val


def black_neighbors(g, b):
    tab = _entry_table(g)
    for (tw, tb, da, db), val in tab.items():
        if tb == b[0]:
            yield (tw, b[1] - da, b[2] - db), val


def white_scale(gd, w):
    """S(w) = 1 / (2 sqrt(sin theta cos theta)) for a white vertex of G_D."""
    th = gd.parent.theta[gd.sources[w[0]]]
    return 1 / (2 * math.sqrt(math.sin(th) * math.cos(th)))


def _check_window(g, window):
    n = len(g.tiling_pos)
    for inst in window:
        if len(inst) != 3 or not (0 <= inst[0] < n):
            raise WindowError(f"{inst!r} is not a vertex of the graph")


def laplacian_row(g, inst):
    """Row of the Laplacian at a primal (conductance tan) or dual (cot) vertex."""
    row = defaultdict(float)
    if g.is_primal(inst[0]):
        for nb, k in g.graph_neighbors(inst):
            c = math.tan(g.theta[k])
            row[inst] += c
            row[nb] -= c
    else:
        for nb, k in g.dual_neighbors(inst):
            c = 1 / math.tan(g.theta[k])
            row[inst] += c
            row[nb] -= c
    return dict(row)


def assemble(g, kind, window):
    """Dense operator on a finite window of instances.

    ``kind`` is ``"dbar"`` (white rows, black columns), ``"dbar_tilde"``
    (the same with S applied on white rows; G_D only) or ``"laplacian"``
    (Dirichlet restriction; primal or dual instances of the tiling).
    """
    window = [tuple(v) for v in window]
    _check_window(g, window)
    if kind in ("dbar", "dbar_tilde"):
        if not g.bipartite:
            raise GraphError("dbar needs a bipartite graph")
        if kind == "dbar_tilde" and not g.is_superposition:
            raise NotASuperposition("dbar_tilde needs a superposition")
        rows = [v for v in window if g.is_primal(v[0]) and g.colors[v[0]] == "W"]
        cols = [v for v in window if g.is_primal(v[0]) and g.colors[v[0]] == "B"]
        cidx = {v: j for j, v in enumerate(cols)}
        m = np.zeros((len(rows), len(cols)), dtype=complex)
        for i, w in enumerate(rows):
            scale = white_scale(g, w) if kind == "dbar_tilde" else 1.0
            for b, val in white_neighbors(g, w):
                j = cidx.get(b)
                if j is not None:
                    m[i, j] += scale * val
        return FiniteOperator(rows, cols, m, kind)
    if kind == "laplacian":
        idx = {v: j for j, v in enumerate(window)}
        m = np.zeros((len(window), len(window)))
        for i, v in enumerate(window):
            for nb, val in laplacian_row(g, v).items():
                j = idx.get(nb)
                if j is not None:
                    m[i, j] += val
        return FiniteOperator(window, window, m, kind)
    raise GraphError(f"unknown operator kind {kind!r}")


# ---------------------------------------------------------------------------
# gauge


@dataclass(frozen=True)
class GaugeTransform:
    base: tuple
    multipliers: dict

    def __getitem__(self, inst):
        return self.multipliers[tuple(inst)]


def _phase(g, w_ref, v):
    F = propagate_f(g, w_ref, v)
    return sum(n * g.directions.angle(d) for d, n in F.factors) / 2


def gauge(g, base, window):
    """Unit multipliers s_v making ``S* dbar S`` real, with ``s_base = 1``.

    The phase of s_v is half the signed sum of rhombus-edge angles along a
    path from ``base``, which equals half the angle-weighted exponent sum of
    f_v, so it is read off the factor tables.
    """
    base = tuple(base)
    if not g.bipartite:
        raise GraphError("gauge needs a bipartite graph")
    w_ref = base if g.colors[base[0]] == "W" else _some_white(g, base)
    ph0 = _phase(g, w_ref, base)
    mult = {}
    for v in window:
        v = tuple(v)
        mult[v] = complex(np.exp(1j * (_phase(g, w_ref, v) - ph0)))
    mult[base] = 1 + 0j
    return GaugeTransform(base, mult)


def _some_white(g, inst):
    for t in range(g.n_vertices):
        if g.colors[t] == "W":
            return (t, inst[1], inst[2])
    raise GraphError("graph has no white vertex")


def gauge_along(g, steps):
    """Multiplier obtained by walking an explicit rhombus path."""
    s = 1 + 0j
    for st in steps:
        if g.is_primal(st.start[0]):
            p, outward = st.start[0], True
        else:
            p, outward = st.end[0], False
        white = g.colors[p] == "W"
        alpha = g.directions.angle(st.direction)
        if white == outward:
            s *= np.exp(-0.5j * alpha)
        else:
            beta = g.directions.angle(g.directions.antipode[st.direction])
            s *= np.exp(0.5j * beta)
    return complex(s)


# ---------------------------------------------------------------------------
# factorization


@dataclass(frozen=True)
class FactorizationReport:
    primal: float
    dual: float
    mixed: float
    pairs: int

    @property
    def max_residual(self):
        return max(self.primal, self.dual, self.mixed)


def verify_factorization(gd, window):
    """Compare ``Dbar* Dbar`` with the Laplacians of G_T and G_T*.

    ``window`` is a list of black instances of ``gd``. Entries are computed
    from full neighbourhoods, so no boundary effects occur.
    """
    if not gd.is_superposition:
        raise NotASuperposition("graph was not built by superpose()")
    g = gd.parent
    blacks = [tuple(b) for b in window if gd.colors[b[0]] == "B"]
    primal_res = dual_res = mixed_res = 0.0
    pairs = 0
    for b in blacks:
        row = defaultdict(complex)
        for w, val in black_neighbors(gd, b):
            left = np.conj(white_scale(gd, w) * val)
            for b2, val2 in white_neighbors(gd, w):
                row[b2] += left * white_scale(gd, w) * val2
        pb = to_parent_instance(gd, b)
        lap = laplacian_row(g, pb)
        for b2, val in row.items():
            pairs += 1
            same = gd.roles[b2[0]] == gd.roles[b[0]]
            if not same:
                mixed_res = max(mixed_res, abs(val))
                continue
            ref = lap.get(to_parent_instance(gd, b2), 0.0)
            if gd.roles[b[0]] == "primal":
                primal_res = max(primal_res, abs(val - ref))
            else:
                dual_res = max(dual_res, abs(val - ref))
        # laplacian entries missing from D*D would be residuals too
        for pb2, ref in lap.items():
            b2 = (_child_tid(gd, pb2), pb2[1], pb2[2])
            if b2 not in row:
                if gd.roles[b[0]] == "primal":
                    primal_res = max(primal_res, abs(ref))
                else:
                    dual_res = max(dual_res, abs(ref))
    return FactorizationReport(primal_res, dual_res, mixed_res, pairs)


def _child_tid(gd, parent_inst):
    tid = parent_inst[0]
    g = gd.parent
    if g.is_primal(tid):
        return gd.roles.index("primal") + tid
    return gd.roles.index("dual") + tid - g.n_vertices
