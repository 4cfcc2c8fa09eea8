"""Maximal relative entropy over finite-order Markov lifts.

For a code ``pi: X -> Y`` and a Markov measure ``nu`` on ``Y`` the feasible
set at order ``m`` is the polytope of edge frequencies on the ``m``-block
presentation of ``X`` that are stationary, have unit mass and whose image
matches ``nu`` on every ``Y``-edge.  The entropy rate is concave there and is
maximized by a damped Newton method in the null space of the equality
constraints.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from .codes import OneBlockCode
from .errors import Infeasible, InfeasibleSupport, NonMonotoneSweep
from .measures import MarkovMeasure, entropy_rate, psi
from .shift import DEFAULT_BLOCK_CAP, Sft, higher_block, topological_entropy

log = logging.getLogger(__name__)

FEAS_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class LiftPolytope:
    """Equality system ``A q = b``, ``q >= 0`` over block-edge frequencies.

    Row blocks, in order: flow balance per block symbol, total mass, one row
    per ``Y``-edge.
    """

    host: Sft
    code: OneBlockCode
    nu: MarkovMeasure
    order: int
    a_eq: np.ndarray
    b_eq: np.ndarray

    @property
    def n_variables(self) -> int:
        return self.a_eq.shape[1]

    @property
    def n_rows(self) -> int:
        return self.a_eq.shape[0]

    def residual(self, q: np.ndarray) -> float:
        return float(np.abs(self.a_eq @ q - self.b_eq).max())


def build_lift_constraints(code: OneBlockCode, nu: MarkovMeasure, order: int = 1,
                           cap: int = DEFAULT_BLOCK_CAP) -> LiftPolytope:
    """Polytope of order-``order`` Markov lifts of ``nu`` through ``code``."""
    if nu.host != code.target:
        raise InfeasibleSupport("nu lives on a different shift than the code target")
    bp = higher_block(code.source, order, cap)
    host = bp.block_sft
    composite = bp.code().compose(code) if order > 1 else code
    img = composite.edge_image_index()
    covered = np.zeros(code.target.n_edges, dtype=bool)
    covered[img] = True
    charged = nu.edge_freq > 0
    if (charged & ~covered).any():
        bad = [code.target.edges[i] for i in np.flatnonzero(charged & ~covered)]
        raise InfeasibleSupport(f"nu charges edges with empty preimage: {bad!r}", edges=bad)
    nv, ne, ny = host.n_symbols, host.n_edges, code.target.n_edges
    ea = host.edge_array
    a = np.zeros((nv + 1 + ny, ne))
    a[ea[:, 0], np.arange(ne)] += 1.0
    a[ea[:, 1], np.arange(ne)] -= 1.0
    a[nv, :] = 1.0
    a[nv + 1 + img, np.arange(ne)] = 1.0
    b = np.concatenate([np.zeros(nv), [1.0], nu.edge_freq])
    return LiftPolytope(host, composite, nu, order, a, b)


@dataclass(frozen=True, eq=False)
class MmreSolution:
    measure: MarkovMeasure
    objective: float
    h_rel: float
    upper_bound: float
    feasibility_residual: float
    iterations: int
    converged: bool

    def x_marginal(self, base_code: OneBlockCode | None = None):
        """Two-block law on the original shift (identity at order 1)."""
        if base_code is None:
            return self.measure
        from .measures import pushforward
        return pushforward(self.measure, base_code).marginal


def entropy_of_frequencies(q: np.ndarray, tails: np.ndarray, n_symbols: int) -> float:
    mass = np.bincount(tails, weights=q, minlength=n_symbols)
    return float(psi(q).sum() - psi(mass).sum())


def _positive_support(a, b, n):
    """Edges some feasible point charges, plus a feasible point charging all of them."""
    unknown = np.ones(n, dtype=bool)
    live = np.zeros(n, dtype=bool)
    points = []
    while unknown.any():
        # maximize the total of s_e <= q_e, s_e <= 1 over still-undecided edges
        k = int(unknown.sum())
        idx = np.flatnonzero(unknown)
        c = np.concatenate([np.zeros(n), -np.ones(k)])
        a_ub = np.zeros((k, n + k))
        a_ub[np.arange(k), idx] = -1.0
        a_ub[np.arange(k), n + np.arange(k)] = 1.0
        res = linprog(c, A_ub=a_ub, b_ub=np.zeros(k),
                      A_eq=np.hstack([a, np.zeros((a.shape[0], k))]), b_eq=b,
                      bounds=[(0, None)] * n + [(0, 1)] * k, method="highs")
        if res.status != 0:
            raise Infeasible(f"lift polytope is empty ({res.message})")
        q = res.x[:n]
        points.append(q)
        new = unknown & (q > 1e-11)
        if not new.any():
            break
        live |= new
        unknown &= ~new
    if not points:
        res = linprog(np.zeros(n), A_eq=a, b_eq=b, bounds=[(0, None)] * n, method="highs")
        if res.status != 0:
            raise Infeasible(f"lift polytope is empty ({res.message})")
        points.append(res.x)
        live |= res.x > 1e-11
    return live, np.mean(points, axis=0)


def solve_mmre(poly: LiftPolytope, tol: float = 1e-8, max_iter: int = 500) -> MmreSolution:
    """Maximize the entropy rate over the lift polytope.

    The start is the orthogonal projection of the uniform point onto the
    affine constraint set, pulled toward an interior point just far enough
    to be strictly positive.  Newton steps are taken in a fixed null-space
    basis with backtracking; the run stops once an accepted step improves
    the objective by less than ``tol`` and the constraint residual is at
    most ``1e-8``.
    """
    a, b = poly.a_eq, poly.b_eq
    n = poly.n_variables
    live, interior = _positive_support(a, b, n)
    ar = a[:, live]
    tails = poly.host.edge_array[live, 0]
    nsym = poly.host.n_symbols

    def objective(x):
        return entropy_of_frequencies(x, tails, nsym)

    pinv = np.linalg.pinv(ar)
    uniform = np.full(int(live.sum()), 1.0 / live.sum())
    proj = uniform - pinv @ (ar @ uniform - b)
    inner = interior[live]
    if proj.min() > 0:
        x = proj
    else:
        # smallest blend toward the interior point keeping every edge at
        # least half the blended interior weight
        s = 0.0
        for cand in np.linspace(0.05, 1.0, 20):
            if ((1 - cand) * proj + cand * inner).min() >= 0.5 * cand * inner.min():
                s = cand
                break
        x = (1 - s) * proj + s * inner if s else inner
    z = null_space(ar)
    it = 0
    converged = False
    fx = objective(x)
    while z.shape[1] and it < max_iter:
        it += 1
        mass = np.bincount(tails, weights=x, minlength=nsym)
        grad = np.log(mass[tails] / x)
        # Hessian of the entropy rate: -diag(1/q) + sum_v (1/m_v) 1_v 1_v^T
        ind = np.zeros((nsym, len(x)))
        ind[tails, np.arange(len(x))] = 1.0
        hess = -np.diag(1.0 / x) + ind.T @ np.diag(1.0 / np.where(mass > 0, mass, 1.0)) @ ind
        g = z.T @ grad
        h = z.T @ hess @ z
        try:
            d = np.linalg.solve(h - 1e-12 * np.eye(h.shape[0]), -g)
        except np.linalg.LinAlgError:
            d = g
        if g @ d <= 0:
            d = g
        step = z @ d
        neg = step < 0
        t_max = min(1.0, 0.99 * float(np.min(-x[neg] / step[neg]))) if neg.any() else 1.0
        t = t_max
        fnew = objective(x + t * step)
        while fnew < fx + 1e-4 * t * (g @ d) and t > 1e-16:
            t *= 0.5
            fnew = objective(x + t * step)
        if fnew < fx:
            converged = True
            break
        x = x + t * step
        # drift back onto the affine set
        x = x - pinv @ (ar @ x - b)
        gain = fnew - fx
        fx = objective(x)
        # g @ d is the squared Newton decrement
        if gain < tol and g @ d < 2 * tol:
            converged = True
            break
    if not z.shape[1]:
        converged = True
    q = np.zeros(n)
    q[live] = np.clip(x, 0.0, None)
    resid = poly.residual(q)
    if resid > FEAS_TOL:
        converged = False
        log.warning("lift residual %.3e exceeds %.1e", resid, FEAS_TOL)
    mu = MarkovMeasure(poly.host, q / q.sum(), tol=max(FEAS_TOL, 10 * resid))
    obj = entropy_rate(mu)
    upper = topological_entropy(poly.code.source if poly.order == 1 else poly.host)
    return MmreSolution(mu, obj, obj - entropy_rate(poly.nu), upper - entropy_rate(poly.nu),
                        resid, it, converged)


def order_sweep(code: OneBlockCode, nu: MarkovMeasure, m_max: int, tol: float = 1e-8) -> list:
    """``[(m, h_rel)]`` for ``m = 1..m_max``; a nondecreasing ladder of lower bounds."""
    out = []
    for m in range(1, m_max + 1):
        sol = solve_mmre(build_lift_constraints(code, nu, m), tol=tol)
        if out and sol.h_rel < out[-1][1] - 2 * tol:
            raise NonMonotoneSweep(f"order {m} gave {sol.h_rel!r} < {out[-1][1]!r}")
        out.append((m, sol.h_rel))
    return out
