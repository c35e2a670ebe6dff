"""The rational functions f_v and g_v and their residues.

Both families are products of factors ``(z - e_d)`` over the direction table
of a graph, so they are stored as integer exponent vectors. Propagation from a
base vertex is additive along tiling steps, which makes the exponent vector an
affine function of the lattice cell: we solve for it once per base vertex on a
small patch (checking closure on every rhombus there) and evaluate any
instance in O(#directions).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .errors import BoundaryError, GraphError, NotAPole, NotFound, PoleEvaluation

POLE_TOL = 1e-13
LIFT_EPS = 1e-9
# total pole order above which residues are taken in extended precision
MP_THRESHOLD = 12
# float residue sums whose largest term exceeds this multiple of the total are redone in mpmath
CANCEL_LIMIT = 1e3


@dataclass(frozen=True)
class FactorFunction:
    """``z**(-exponent_at_zero) * prod_d (z - e_d)**n_d``.

    ``factors`` is a sorted tuple of ``(direction index, exponent)`` with no
    zero exponents; ``table`` is the owning direction table.
    """

    exponent_at_zero: int
    factors: tuple
    table: object = field(compare=False, repr=False)

    @classmethod
    def from_vector(cls, vec, table):
        vec = np.asarray(vec)
        facs = tuple((int(d), int(n)) for d, n in enumerate(vec[:-1]) if n != 0)
        return cls(int(vec[-1]), facs, table)

    def exponent(self, d):
        for k, n in self.factors:
            if k == d:
                return n
        return 0

    @property
    def degree(self):
        return sum(n for _, n in self.factors) - self.exponent_at_zero

    def poles(self):
        """Direction indices with negative exponent."""
        return [d for d, n in self.factors if n < 0]

    def pole_order(self):
        return sum(-n for _, n in self.factors if n < 0)

    def dump(self):
        parts = [f"({self.table.angle(d):.17g}, {n})" for d, n in self.factors]
        parts.append(f"z^-{self.exponent_at_zero}")
        return " ".join(parts)

    def __str__(self):
        return self.dump()


def evaluate(F, z):
    """Value of ``F`` at a point ``z`` off its poles."""
    z = complex(z)
    if F.exponent_at_zero > 0 and abs(z) < POLE_TOL:
        raise PoleEvaluation("evaluation at the pole z = 0")
    for d, n in F.factors:
        if n < 0 and abs(z - F.table.vectors[d]) < POLE_TOL:
            raise PoleEvaluation(f"evaluation at the pole at angle {F.table.angle(d):.12g}")
    total = sum(abs(n) for _, n in F.factors) + abs(F.exponent_at_zero)
    if total > 64:
        acc = 0j
        for d, n in F.factors:
            acc += n * cmath.log(z - F.table.vectors[d])
        if F.exponent_at_zero:
            acc -= F.exponent_at_zero * cmath.log(z)
        return cmath.exp(acc)
    val = complex(1.0)
    for d, n in F.factors:
        val *= (z - F.table.vectors[d]) ** n
    if F.exponent_at_zero:
        val /= z ** F.exponent_at_zero
    return val


def evaluate_array(F, z):
    """Vectorized :func:`evaluate` over a numpy array (no pole checks)."""
    z = np.asarray(z, dtype=complex)
    acc = np.zeros_like(z)
    for d, n in F.factors:
        acc += n * np.log(z - F.table.vectors[d])
    if F.exponent_at_zero:
        acc -= F.exponent_at_zero * np.log(z)
    return np.exp(acc)


# ---------------------------------------------------------------------------
# residues


def _laurent(F, d, ctx):
    """Pole point p, order m, ``h(p)`` and the jet ``E`` with ``h(p+t)/h(p) = sum E_k t^k``.

    ``F = (z - p)**(-m) * h(z)``; arithmetic is float (``ctx=None``) or mpmath.
    """
    n_here = F.exponent(d)
    if n_here >= 0:
        raise NotAPole(f"direction {d} has exponent {n_here} >= 0")
    m = -n_here
    tab = F.table
    if ctx is None:
        p = complex(tab.vectors[d])
        others = [(complex(tab.vectors[k]), n) for k, n in F.factors if k != d]
        one = 1.0
    else:
        p = ctx.expjpi(ctx.mpf(tab.angle(d)) / ctx.pi)
        others = [(ctx.expjpi(ctx.mpf(tab.angle(k)) / ctx.pi), n) for k, n in F.factors if k != d]
        one = ctx.mpf(1)
    if F.exponent_at_zero:
        others.append((0 * one, -F.exponent_at_zero))
    h = one + 0j if ctx is None else ctx.mpc(1)
    for e, n in others:
        h *= (p - e) ** n
    # log-jet of h at p, then exponentiate by the power-series recurrence
    inv = [one / (p - e) for e, _ in others]
    c = [0] * m
    powers = list(inv)
    for j in range(1, m):
        s = 0
        sign = 1 if j % 2 == 1 else -1
        for (e, n), pw in zip(others, powers):
            s += n * pw
        c[j] = sign * s / j
        powers = [pw * iv for pw, iv in zip(powers, inv)]
    E = [one] + [0] * (m - 1)
    for k in range(1, m):
        acc = 0
        for j in range(1, k + 1):
            acc += j * c[j] * E[k - j]
        E[k] = acc / k
    return p, m, h, E


def _residue_terms(F, d, ctx):
    p, m, h, E = _laurent(F, d, ctx)
    return h * E[m - 1]


def _log_residue_terms(F, d, theta, ctx):
    """Residue of ``F(z) log z`` at pole ``d`` where ``log p = i*theta``.

    For a simple pole this is ``i*theta*Res F``; higher-order poles pick up
    the Taylor terms of the logarithm.
    """
    p, m, h, E = _laurent(F, d, ctx)
    one = 1.0 if ctx is None else ctx.mpf(1)
    acc = 1j * theta * E[m - 1]
    pk = one
    for k in range(1, m):
        pk = pk / p
        sign = 1 if k % 2 == 1 else -1
        acc += sign * pk / k * E[m - 1 - k]
    return h * acc


def residue_at(F, pole):
    """Residue of ``F`` at a pole given by direction index, or ``"zero"``."""
    if pole == "zero" or pole is None:
        k0 = F.exponent_at_zero
        if k0 <= 0:
            raise NotAPole("no pole at z = 0")
        # residue at 0 of z^-k0 * P(z): coefficient of z^(k0-1) in P
        shifted = FactorFunction(0, F.factors, F.table)
        return _taylor_at_zero(shifted, k0 - 1)
    if F.pole_order() > MP_THRESHOLD:
        with mpmath.workdps(precision_for(F)):
            return complex(_residue_terms(F, pole, mpmath.mp))
    return complex(_residue_terms(F, pole, None))


def log_residue_sum(F, lift):
    """``sum_poles Res(F(z) log z)`` on the branch fixed by ``lift``.

    Returns the sum and the largest single term in modulus. Extended
    precision is used once the total pole order makes the terms large, or
    when the float terms cancel by more than three digits.
    """
    if not lift.poles:
        return 0j, 0.0
    if F.pole_order() <= MP_THRESHOLD:
        total = 0j
        big = 0.0
        for d, ang in zip(lift.poles, lift.angles):
            term = _log_residue_terms(F, d, ang, None)
            total += term
            big = max(big, abs(term))
        if big <= CANCEL_LIMIT * max(1.0, abs(total)):
            return total, big
    # large pole order or heavy cancellation between the terms
    with mpmath.workdps(precision_for(F)):
        total = mpmath.mpc(0)
        big = 0.0
        for d, ang in zip(lift.poles, lift.angles):
            a = F.table.angle(d)
            k = round((ang - a) / (2 * math.pi))
            theta = mpmath.mpf(a) + 2 * k * mpmath.pi
            term = _log_residue_terms(F, d, theta, mpmath.mp)
            total += term
            big = max(big, float(abs(term)))
        return complex(total), big


def precision_for(F):
    return 20 + F.pole_order() + F.exponent_at_zero


def _taylor_at_zero(F, order):
    """Taylor coefficient of z^order at 0 of a function with no pole there."""
    one = 1.0
    others = [(complex(F.table.vectors[k]), n) for k, n in F.factors]
    h = complex(1.0)
    for e, n in others:
        h *= (-e) ** n
    if order == 0:
        return h
    c = [0j] * (order + 1)
    for j in range(1, order + 1):
        sign = 1 if j % 2 == 1 else -1
        c[j] = sign * sum(n * (one / (-e)) ** j for e, n in others) / j
    E = [1 + 0j] + [0j] * order
    for k in range(1, order + 1):
        E[k] = sum(j * c[j] * E[k - j] for j in range(1, k + 1)) / k
    return h * E[order]


# ---------------------------------------------------------------------------
# angle lifting


@dataclass(frozen=True)
class AngleLift:
    theta0: float
    poles: tuple  # direction indices
    angles: tuple  # lifted angles, parallel to poles
    margin: float  # min distance from a lifted angle to the window edge


def lift_angles(F, w0_pos, b_pos, sheet=0):
    """Lift pole angles of ``F`` into the window ``(theta0 - pi, theta0 + pi)``.

    ``theta0`` is the principal argument of ``b - w0`` plus ``2*pi*sheet``.
    ``w0_pos`` and ``b_pos`` are plane positions.
    """
    diff = complex(b_pos) - complex(w0_pos)
    if abs(diff) < 1e-12:
        raise BoundaryError("lift_angles needs b != w0")
    theta0 = math.atan2(diff.imag, diff.real) + 2 * math.pi * sheet
    lo = theta0 - math.pi
    poles, angles = [], []
    margin = math.inf
    for d in F.poles():
        a = F.table.angle(d)
        k = math.floor((a - lo) / (2 * math.pi))
        lifted = a - 2 * math.pi * k
        gap = min(lifted - lo, theta0 + math.pi - lifted)
        if gap < LIFT_EPS:
            raise BoundaryError(
                f"pole at angle {a:.12g} lies on the edge of the window around {theta0:.12g}"
            )
        margin = min(margin, gap)
        poles.append(d)
        angles.append(lifted)
    return AngleLift(theta0, tuple(poles), tuple(angles), margin)


# ---------------------------------------------------------------------------
# propagation tables


class _AffineTable:
    """Exponent vectors of one propagated family from a fixed base tiling vertex.

    The vector at instance ``(tid, a, b)`` is ``E0[tid] + a*M1 + b*M2``.
    """

    def __init__(self, g, base_tid, step_vector, start_vector, patch=3):
        self.g = g
        self.base = base_tid
        nt = len(g.tiling_pos)
        found = {(base_tid, 0, 0): start_vector}
        frontier = [(base_tid, 0, 0)]
        while frontier:
            nxt = []
            for inst in frontier:
                vec = found[inst]
                for nb, step, d in g.neighbors(inst):
                    if max(abs(nb[1]), abs(nb[2])) > patch or nb in found:
                        continue
                    found[nb] = vec + step_vector(inst, nb, d)
                    nxt.append(nb)
            frontier = nxt
        for t in range(nt):
            for c in ((0, 0), (1, 0), (0, 1)):
                if (t, *c) not in found:
                    raise GraphError("tiling is not connected on the propagation patch")
        self.E0 = np.array([found[(t, 0, 0)] for t in range(nt)])
        self.M1 = found[(base_tid, 1, 0)] - found[(base_tid, 0, 0)]
        self.M2 = found[(base_tid, 0, 1)] - found[(base_tid, 0, 0)]
        # closure: every step in the patch agrees with the affine form
        for inst, vec in found.items():
            if not np.array_equal(vec, self.vector(inst)):
                raise GraphError(f"propagation is not path independent at {inst}")
            for nb, step, d in g.neighbors(inst):
                if nb in found and not np.array_equal(found[nb] - vec, step_vector(inst, nb, d)):
                    raise GraphError(f"propagation does not close around a rhombus at {inst}")

    def vector(self, inst):
        tid, a, b = inst
        return self.E0[tid] + a * self.M1 + b * self.M2


_CACHE_ATTR = "_factor_tables"


def _table(g, kind, base_tid):
    cache = g.__dict__.setdefault(_CACHE_ATTR, {})
    key = (kind, base_tid)
    if key not in cache:
        nd = len(g.directions)
        size = nd + 1
        if kind == "f":
            def step(inst, nb, d):
                return _f_step(g, inst, nb, d, size)
            start = np.zeros(size, dtype=np.int64)
        else:
            anti = g.directions.antipode

            def step(inst, nb, d):
                v = np.zeros(size, dtype=np.int64)
                v[d] -= 1
                v[anti[d]] += 1
                return v
            start = np.zeros(size, dtype=np.int64)
            start[-1] = 1
        cache[key] = _AffineTable(g, base_tid, step, start)
    return cache[key]


def _f_step(g, inst, nb, d, size):
    """Exponent change of f along one tiling step with direction index ``d``."""
    v = np.zeros(size, dtype=np.int64)
    if g.is_primal(inst[0]):
        p = inst[0]
        outward = True  # step vector is d - p
    else:
        p = nb[0]
        outward = False  # step vector is p - d
    white = g.colors[p] == "W"
    # oriented edge e = d - p if p white else p - d; divide when step == +e
    if white == outward:
        v[d] -= 1
    else:
        v[g.directions.antipode[d]] += 1
    return v


def _relative(inst, base):
    return (inst[0], inst[1] - base[1], inst[2] - base[2])


def propagate_f(g, w0, v):
    """f_v for base white vertex ``w0`` (instances ``(tid, a, b)``)."""
    if not g.bipartite:
        raise GraphError("f_v is only defined on bipartite graphs")
    w0, v = tuple(w0), tuple(v)
    if not g.is_primal(w0[0]) or g.colors[w0[0]] != "W":
        raise GraphError("base vertex must be white")
    _check_instance(g, v)
    tab = _table(g, "f", w0[0])
    return FactorFunction.from_vector(tab.vector(_relative(v, w0)), g.directions)


def propagate_g(g, v0, v):
    """g_v for base vertex ``v0`` of the tiling (primal or dual)."""
    v0, v = tuple(v0), tuple(v)
    _check_instance(g, v0)
    _check_instance(g, v)
    tab = _table(g, "g", v0[0])
    return FactorFunction.from_vector(tab.vector(_relative(v, v0)), g.directions)


def _check_instance(g, inst):
    if len(inst) != 3 or not (0 <= inst[0] < len(g.tiling_pos)):
        raise NotFound(f"{inst!r} is not a tiling vertex instance")


def propagate_along(g, steps, kind, start=None):
    """Propagate along an explicit list of :class:`~isoradial.lattice.Step`.

    Used to check path independence against the affine tables.
    """
    nd = len(g.directions)
    vec = np.zeros(nd + 1, dtype=np.int64) if start is None else np.array(start)
    if kind == "g" and start is None:
        vec[-1] = 1
    for s in steps:
        if kind == "f":
            vec = vec + _f_step(g, s.start, s.end, s.direction, nd + 1)
        else:
            vec[s.direction] -= 1
            vec[g.directions.antipode[s.direction]] += 1
    return FactorFunction.from_vector(vec, g.directions)


def empirical_gap(g, radius=10.0, kind="f"):
    """Smallest lift margin over targets within ``radius`` of a base vertex.

    This is the empirical version of the fixed positive gap between lifted
    pole angles and the window boundary.
    """
    if kind == "f":
        bases = [(t, 0, 0) for t in range(g.n_vertices) if g.colors[t] == "W"]
        targets = "black"
    else:
        bases = [(t, 0, 0) for t in range(g.n_vertices)]
        targets = "primal"
    best = math.inf
    for base in bases:
        p0 = g.position(base)
        for inst in g.instances_within(p0, radius, targets):
            if inst == base:
                continue
            F = propagate_f(g, base, inst) if kind == "f" else propagate_g(g, base, inst)
            lift = lift_angles(F, p0, g.position(inst))
            best = min(best, lift.margin)
    return best
