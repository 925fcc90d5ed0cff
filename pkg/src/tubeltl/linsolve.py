"""Dense linear programming.

The in-repo solver is a two-phase tableau simplex using Bland's rule, which
is what every small geometric LP in the package goes through. Large tube
synthesis problems may instead be routed to HiGHS through ``method="highs"``.

Problems are stated as::

    maximize    c @ y
    subject to  A_ub @ y <= b_ub
                A_eq @ y == b_eq
                lo <= y <= hi        (per-variable, either side may be None)

Variables are free unless bounds are given.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

TAU_LP = 1e-8
PIVOT_TOL = 1e-9
BREAKDOWN_TOL = 1e-12

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class DegeneratePivotError(ArithmeticError):
    """Raised when the only admissible pivots are numerically zero."""


@dataclass
class LinearProgram:
    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    bounds: Optional[Sequence[tuple]] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_ub, self.b_ub = _rows(self.A_ub, self.b_ub, n)
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n)
        if self.bounds is None:
            self.bounds = [(None, None)] * n
        if len(self.bounds) != n:
            raise ValueError("bounds must have one entry per variable")
        for M, v in ((self.A_ub, self.b_ub), (self.A_eq, self.b_eq)):
            if not (np.all(np.isfinite(M)) and np.all(np.isfinite(v))):
                raise ValueError("LP coefficients must be finite")

    @property
    def nvars(self) -> int:
        return self.c.size

    @classmethod
    def from_rows(cls, c, rows, bounds=None) -> "LinearProgram":
        """Build from ``(row, relation, rhs)`` triples, relation in ``<=, >=, ==``."""
        n = len(c)
        ub, ubr, eq, eqr = [], [], [], []
        for a, rel, b in rows:
            a = np.asarray(a, dtype=float)
            if a.size != n:
                raise ValueError("constraint row length differs from nvars")
            if rel == "<=":
                ub.append(a)
                ubr.append(b)
            elif rel == ">=":
                ub.append(-a)
                ubr.append(-b)
            elif rel in ("==", "="):
                eq.append(a)
                eqr.append(b)
            else:
                raise ValueError(f"unknown relation {rel!r}")
        return cls(
            c,
            np.array(ub).reshape(-1, n) if ub else None,
            np.array(ubr) if ub else None,
            np.array(eq).reshape(-1, n) if eq else None,
            np.array(eqr) if eq else None,
            bounds,
        )


@dataclass
class LpSolution:
    status: str
    x: Optional[np.ndarray] = None
    value: float = float("nan")
    iterations: int = field(default=0, compare=False)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _rows(A, b, n):
    if A is None or len(A) == 0:
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if A.shape != (b.size, n):
        raise ValueError(f"constraint block has shape {A.shape}, expected ({b.size}, {n})")
    return A, b


def _to_standard_form(lp: LinearProgram):
    """Map ``lp`` to ``max c'z, A z (<=|==) b, z >= 0``.

    Returns the standard-form pieces plus ``(T, t0)`` with ``y = T @ z + t0``.
    """
    n = lp.nvars
    cols, offset = [], np.zeros(n)
    extra_ub, extra_rhs = [], []
    for j, (lo, hi) in enumerate(lp.bounds):
        lo = -np.inf if lo is None else float(lo)
        hi = np.inf if hi is None else float(hi)
        if lo > hi:
            return None
        if np.isfinite(lo):
            offset[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_ub.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    T = np.zeros((n, len(cols)))
    for k, (j, s) in enumerate(cols):
        T[j, k] = s
    A_ub = lp.A_ub @ T
    b_ub = lp.b_ub - lp.A_ub @ offset
    if extra_ub:
        E = np.zeros((len(extra_ub), len(cols)))
        for r, (k, v) in enumerate(extra_ub):
            E[r, k] = 1.0
        A_ub = np.vstack([A_ub, E])
        b_ub = np.concatenate([b_ub, [v for _, v in extra_ub]])
    A_eq = lp.A_eq @ T
    b_eq = lp.b_eq - lp.A_eq @ offset
    c = lp.c @ T
    return c, A_ub, b_ub, A_eq, b_eq, T, offset


class _Tableau:
    """Simplex tableau with rows ``[A | b]`` and a maintained basis."""

    def __init__(self, M: np.ndarray, basis: list[int]):
        self.M = M
        self.basis = basis

    def pivot(self, r: int, j: int) -> None:
        M = self.M
        piv = M[r, j]
        if abs(piv) < BREAKDOWN_TOL:
            raise DegeneratePivotError("degenerate pivot")
        M[r] /= piv
        col = M[:, j].copy()
        col[r] = 0.0
        nz = np.nonzero(col)[0]
        if nz.size:
            M[nz] -= np.outer(col[nz], M[r])
        self.basis[r] = j

    def run(self, cost: np.ndarray, allowed: np.ndarray, max_iter: int) -> tuple[str, int]:
        """Maximize ``cost @ z`` over the current basis with Bland's rule."""
        M = self.M
        m = M.shape[0]
        it = 0
        while True:
            cb = cost[self.basis]
            reduced = cost - cb @ M[:, :-1]
            reduced[~allowed] = 0.0
            reduced[self.basis] = 0.0
            cand = np.nonzero(reduced > PIVOT_TOL)[0]
            if cand.size == 0:
                return OPTIMAL, it
            j = int(cand[0])
            colj = M[:, j]
            pos = colj > PIVOT_TOL
            if not np.any(pos):
                if np.any(colj > BREAKDOWN_TOL):
                    raise DegeneratePivotError("degenerate pivot")
                return UNBOUNDED, it
            ratios = np.full(m, np.inf)
            ratios[pos] = M[pos, -1] / colj[pos]
            best = ratios.min()
            ties = np.nonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))[0]
            r = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(r, j)
            it += 1
            if it > max_iter:
                raise DegeneratePivotError("simplex iteration limit reached")


def _simplex(c, A_ub, b_ub, A_eq, b_eq, max_iter=50_000):
    nz = c.size
    mu, me = A_ub.shape[0], A_eq.shape[0]
    m = mu + me
    A = np.vstack([np.hstack([A_ub, np.eye(mu)]), np.hstack([A_eq, np.zeros((me, mu))])])
    b = np.concatenate([b_ub, b_eq])
    ncols = nz + mu
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    basis, art_rows = [], []
    for i in range(m):
        if i < mu and not neg[i]:
            basis.append(nz + i)
        else:
            basis.append(-1)
            art_rows.append(i)
    nart = len(art_rows)
    M = np.zeros((m, ncols + nart + 1))
    M[:, :ncols] = A
    M[:, -1] = b
    for k, i in enumerate(art_rows):
        M[i, ncols + k] = 1.0
        basis[i] = ncols + k
    tab = _Tableau(M, basis)
    total = ncols + nart
    iters = 0
    if nart:
        cost1 = np.zeros(total)
        cost1[ncols:] = -1.0
        allowed = np.ones(total, dtype=bool)
        _, k = tab.run(cost1, allowed, max_iter)
        iters += k
        infeas = -(cost1[tab.basis] @ tab.M[:, -1])
        if infeas > TAU_LP * max(1.0, np.abs(b).max(initial=0.0)):
            return INFEASIBLE, None, iters
        # drive zero-level artificials out of the basis, or drop redundant rows
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if tab.basis[i] >= ncols:
                row = tab.M[i, :ncols]
                nzc = np.nonzero(np.abs(row) > PIVOT_TOL)[0]
                if nzc.size:
                    tab.pivot(i, int(nzc[0]))
                else:
                    keep[i] = False
        if not keep.all():
            tab.M = tab.M[keep]
            tab.basis = [bi for bi, kk in zip(tab.basis, keep) if kk]
    tab.M = np.delete(tab.M, np.s_[ncols:total], axis=1)
    cost2 = np.concatenate([c, np.zeros(mu)])
    allowed = np.ones(ncols, dtype=bool)
    status, k = tab.run(cost2, allowed, max_iter)
    iters += k
    if status != OPTIMAL:
        return status, None, iters
    z = np.zeros(ncols)
    z[tab.basis] = tab.M[:, -1]
    return OPTIMAL, z[:nz], iters


def _solve_highs(lp: LinearProgram) -> LpSolution:
    from scipy.optimize import linprog

    res = linprog(
        -lp.c,
        A_ub=lp.A_ub if lp.A_ub.size else None,
        b_ub=lp.b_ub if lp.b_ub.size else None,
        A_eq=lp.A_eq if lp.A_eq.size else None,
        b_eq=lp.b_eq if lp.b_eq.size else None,
        bounds=list(lp.bounds),
        method="highs",
    )
    if res.status == 2:
        return LpSolution(INFEASIBLE)
    if res.status == 3:
        return LpSolution(UNBOUNDED)
    if res.status != 0:
        raise DegeneratePivotError(f"HiGHS failed: {res.message}")
    x = np.asarray(res.x, dtype=float)
    return LpSolution(OPTIMAL, x, float(lp.c @ x), int(getattr(res, "nit", 0)))


def solve(lp: LinearProgram, method: str = "simplex") -> LpSolution:
    """Solve ``lp`` (a maximization).

    ``method="simplex"`` uses the in-repo two-phase Bland simplex; ``"highs"``
    delegates to ``scipy.optimize.linprog``.
    """
    if method == "highs":
        return _solve_highs(lp)
    if method != "simplex":
        raise ValueError(f"unknown LP method {method!r}")
    sf = _to_standard_form(lp)
    if sf is None:
        return LpSolution(INFEASIBLE)
    c, A_ub, b_ub, A_eq, b_eq, T, t0 = sf
    status, z, iters = _simplex(c, A_ub, b_ub, A_eq, b_eq)
    if status != OPTIMAL:
        return LpSolution(status, iterations=iters)
    y = T @ z + t0
    return LpSolution(OPTIMAL, y, float(lp.c @ y), iters)


def feasible_point(A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None, nvars=None):
    """Phase-1 only: return a point satisfying the constraints, or ``None``."""
    if nvars is None:
        for M in (A_ub, A_eq):
            if M is not None and len(M):
                nvars = np.atleast_2d(M).shape[1]
                break
        else:
            nvars = len(bounds)
    lp = LinearProgram(np.zeros(nvars), A_ub, b_ub, A_eq, b_eq, bounds)
    sol = solve(lp)
    return sol.x if sol.ok else None


def check_solution(lp: LinearProgram, sol: LpSolution, tol: float = TAU_LP) -> bool:
    """Whether an optimal ``sol`` satisfies every constraint of ``lp`` within ``tol``."""
    if not sol.ok:
        return False
    x = sol.x
    scale = 1.0 + np.abs(x).max(initial=0.0)
    if lp.A_ub.size and np.any(lp.A_ub @ x - lp.b_ub > tol * scale):
        return False
    if lp.A_eq.size and np.any(np.abs(lp.A_eq @ x - lp.b_eq) > tol * scale):
        return False
    for xi, (lo, hi) in zip(x, lp.bounds):
        if lo is not None and xi < lo - tol * scale:
            return False
        if hi is not None and xi > hi + tol * scale:
            return False
    return True
