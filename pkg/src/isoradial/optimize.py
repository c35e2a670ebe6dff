"""Maximizing normalized determinants over the polytope of rhombus angles."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .constants import lobachevsky
from .errors import DomainError, Infeasible, MaxIterations

TREE_EPS = 1e-6
MODELS = ("dimer", "tree", "tree_entropy")


@dataclass
class AnglePolytope:
    """``A theta = b`` and ``lo <= theta <= hi`` over fundamental-domain edges."""

    A: np.ndarray
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    n_primal: int
    n_dual: int
    rank: int
    null: np.ndarray = field(repr=False)

    def residual(self, theta):
        return float(np.max(np.abs(self.A @ theta - self.b))) if len(self.b) else 0.0


def polytope(g, model="dimer"):
    """Angle constraints: 2*pi around every vertex and every face."""
    m = g.n_edges
    rows, rhs = [], []
    for v in range(g.n_vertices):
        r = np.zeros(m)
        for k, (u, w, _, _) in enumerate(g.edges):
            r[k] += 2 * (int(u == v) + int(w == v))
        rows.append(r)
        rhs.append(2 * math.pi)
    for f in g.faces:
        r = np.zeros(m)
        for h in f.halfedges:
            r[h // 2] -= 2
        rows.append(r)
        rhs.append(2 * math.pi - math.pi * len(f.halfedges))
    A = np.array(rows)
    b = np.array(rhs)
    eps = TREE_EPS if model in ("tree", "tree_entropy") else 0.0
    lo = np.full(m, eps)
    hi = np.full(m, math.pi / 2 - eps)
    rank = int(np.linalg.matrix_rank(A))
    return AnglePolytope(A, b, lo, hi, g.n_vertices, g.n_faces, rank, null_space(A))


# ---------------------------------------------------------------------------
# objectives


def _edge_terms(theta, model):
    t = np.asarray(theta, dtype=float)
    if model == "dimer":
        with np.errstate(divide="ignore", invalid="ignore"):
            e = np.where(t > 0, t * np.log(2 * np.sin(np.where(t > 0, t, 1.0))), 0.0)
        return lobachevsky(t) / math.pi + e / math.pi
    _check_tree(t)
    ent = 2 / math.pi * (lobachevsky(t) + lobachevsky(math.pi / 2 - t))
    if model == "tree_entropy":
        return ent
    return ent + 2 * t / math.pi * np.log(np.tan(t))


def _edge_derivs(theta, model):
    t = np.asarray(theta, dtype=float)
    if model == "dimer":
        # d/dt [L(t)/pi + (t/pi) log 2 sin t] = (t/pi) cot t, equal to 1/pi at t = 0
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(t > 1e-12, t / np.tan(np.where(t > 1e-12, t, 1.0)), 1.0) / math.pi
    _check_tree(t)
    if model == "tree_entropy":
        return 2 / math.pi * np.log(1 / np.tan(t))
    return 4 * t / (math.pi * np.sin(2 * t))


def _edge_second(theta, model):
    t = np.asarray(theta, dtype=float)
    if model == "dimer":
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.sin(np.where(t > 1e-12, t, 1.0))
            val = (np.cos(t) / s - t / s ** 2) / math.pi
        return np.where(t > 1e-12, val, 0.0)
    _check_tree(t)
    if model == "tree_entropy":
        return -4 / (math.pi * np.sin(2 * t))
    s2 = np.sin(2 * t)
    return 4 / math.pi * (s2 - 2 * t * np.cos(2 * t)) / s2 ** 2


def _check_tree(t):
    if np.any(t < TREE_EPS * (1 - 1e-9)) or np.any(t > math.pi / 2 - TREE_EPS * (1 - 1e-9)):
        raise DomainError("tree objective needs angles in [1e-6, pi/2 - 1e-6]")


def objective(theta, model, n_vertices):
    """``(1/N) sum_e f(theta_e)`` for the chosen model."""
    _check_model(model)
    return float(np.sum(_edge_terms(theta, model)) / n_vertices)


def gradient(theta, model, n_vertices):
    _check_model(model)
    return np.asarray(_edge_derivs(theta, model), dtype=float) / n_vertices


def _check_model(model):
    if model not in MODELS:
        raise DomainError(f"unknown model {model!r}")


# ---------------------------------------------------------------------------
# maximization


@dataclass
class Certificate:
    grad_norm: float
    iterations: int
    constraint_residual: float
    rank: int
    hessian_diag: list
    concave: bool
    history: list

    def to_dict(self):
        return {
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "constraint_residual": self.constraint_residual,
            "rank": self.rank,
            "hessian_diag": list(self.hessian_diag),
            "concave": self.concave,
        }


def _free_basis(poly, active):
    """Orthonormal basis of ``{d : A d = 0, d_i = 0 for i in active}``."""
    m = poly.A.shape[1]
    rows = [poly.A]
    if active:
        e = np.zeros((len(active), m))
        for r, i in enumerate(sorted(active)):
            e[r, i] = 1
        rows.append(e)
    return null_space(np.vstack(rows)) if len(rows) > 1 else poly.null


def _direction(Z, grad, hdiag):
    """Reduced Newton step when the reduced Hessian is negative definite, else the projected gradient."""
    rg = Z.T @ grad
    H = Z.T @ (hdiag[:, None] * Z)
    if np.linalg.eigvalsh(H)[-1] < 0:
        return Z @ np.linalg.solve(H, -rg), True
    return Z @ rg, False


def maximize(g, model="dimer", tol=1e-10, start=None, max_iter=5000):
    """Projected-gradient ascent on the angle polytope.

    Active-set handling of the box, exact ratio test against the bounds and
    Armijo backtracking, so iterates stay feasible and the objective never
    decreases. Returns ``(theta, objective, certificate)``.
    """
    _check_model(model)
    poly = polytope(g, model)
    n = g.n_vertices
    theta = np.array(g.theta if start is None else start, dtype=float)
    if poly.residual(theta) > 1e-8 or np.any(theta < poly.lo - 1e-12) or np.any(theta > poly.hi + 1e-12):
        raise Infeasible("starting angles violate the constraints")
    theta = np.clip(theta, poly.lo, poly.hi)
    val = objective(theta, model, n)
    history = [val]
    active = {i for i in range(len(theta)) if theta[i] <= poly.lo[i] or theta[i] >= poly.hi[i]}
    gnorm = math.inf
    for it in range(1, max_iter + 1):
        grad = gradient(theta, model, n)
        Z = _free_basis(poly, active)
        gnorm = float(np.linalg.norm(Z.T @ grad)) if Z.shape[1] else 0.0
        if gnorm < tol:
            released = _release(poly, theta, grad, active)
            if released is None:
                break
            active.discard(released)
            continue
        d, newton = _direction(Z, grad, np.asarray(_edge_second(theta, model), dtype=float) / n)
        # largest step keeping the box
        amax = math.inf
        for i in range(len(theta)):
            if d[i] > 1e-15:
                amax = min(amax, (poly.hi[i] - theta[i]) / d[i])
            elif d[i] < -1e-15:
                amax = min(amax, (poly.lo[i] - theta[i]) / d[i])
        step = min(amax, 1.0 if newton else 1e3)
        slope = float(grad @ d)
        while True:
            cand = np.clip(theta + step * d, poly.lo, poly.hi)
            try:
                cval = objective(cand, model, n)
            except DomainError:
                cval = -math.inf
            if cval >= val + 1e-4 * step * slope:
                break
            if abs(cval - val) <= 8 * np.finfo(float).eps * max(1.0, abs(val)):
                # objective is flat to round-off: judge the step by the gradient
                cg = np.linalg.norm(Z.T @ gradient(cand, model, n))
                if cg < gnorm:
                    cval = max(cval, val)
                    break
            if step < 1e-18:
                break
            step /= 2
        if cval < val or step < 1e-18:
            # no ascent left above round-off
            break
        theta, val = cand, cval
        history.append(val)
        if step == amax:
            for i in range(len(theta)):
                if theta[i] <= poly.lo[i] + 1e-14 or theta[i] >= poly.hi[i] - 1e-14:
                    theta[i] = poly.lo[i] if theta[i] <= poly.lo[i] + 1e-14 else poly.hi[i]
                    active.add(i)
    else:
        raise MaxIterations(f"no convergence after {max_iter} iterations",
                            diagnostics={"grad_norm": gnorm, "objective": val, "theta": theta.tolist()})
    free = [i for i in range(len(theta)) if i not in active]
    hdiag = [float(x) for x in np.asarray(_edge_second(theta, model))[free] / n]
    cert = Certificate(gnorm, it, poly.residual(theta), poly.rank, hdiag,
                       all(h < 0 for h in hdiag), history)
    return theta, val, cert


def _release(poly, theta, grad, active):
    """An active bound whose multiplier has the wrong sign, or None at a KKT point."""
    if not active:
        return None
    act = sorted(active)
    m = len(theta)
    E = np.zeros((len(act), m))
    for r, i in enumerate(act):
        E[r, i] = 1
    M = np.vstack([poly.A, E]).T
    coef, *_ = np.linalg.lstsq(M, grad, rcond=None)
    nu = coef[len(poly.b):]
    worst, pick = 0.0, None
    for r, i in enumerate(act):
        at_lo = theta[i] <= poly.lo[i]
        # at a lower bound the ascent direction must point outwards: nu <= 0
        bad = nu[r] if at_lo else -nu[r]
        if bad > worst + 1e-12:
            worst, pick = bad, i
    return pick


def random_feasible(g, count, model="dimer", seed=None, spread=0.9):
    """Random points of the angle polytope around the graph's own angles."""
    poly = polytope(g, model)
    if seed is None:
        seed = int(os.environ.get("ISORADIAL_SEED", "0"))
    rng = np.random.default_rng(seed)
    base = np.clip(np.asarray(g.theta, dtype=float), poly.lo, poly.hi)
    out = []
    Z = poly.null
    for _ in range(count):
        if Z.shape[1] == 0:
            out.append(base.copy())
            continue
        d = Z @ rng.standard_normal(Z.shape[1])
        # longest step inside the box, then a random fraction of it
        amax = math.inf
        for i in range(len(base)):
            if d[i] > 0:
                amax = min(amax, (poly.hi[i] - base[i]) / d[i])
            elif d[i] < 0:
                amax = min(amax, (poly.lo[i] - base[i]) / d[i])
        out.append(base + spread * rng.uniform(0, 1) * amax * d)
    return out
