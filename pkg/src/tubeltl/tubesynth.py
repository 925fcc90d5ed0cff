"""Tube synthesis around nominal trajectories and the region certificates.

A tube is a sequence of sections ``x̂_ℓ ⊕ ε_ℓ Z`` together with one control
per section vertex. All sections share the shape ``Z``; scales and vertex
controls come out of a single linear program that maximizes ``ε_0``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linsolve
from .dynamics import LtiModel
from .geometry import (
    TAU_GEO,
    GeometryError,
    Polytope,
    TubeCrossSection,
    Workspace,
    contains_point,
    contains_polytope,
    diameter,
    erode_halfspaces,
    intersects,
    section_to_polytope,
    support,
)
from .trajgen import NominalTrajectory, check_nominal, plan_nominal

log = logging.getLogger(__name__)

EPS_MIN = 1e-6
BISECTION_TOL = 1e-6

REACHABLE = "reachable"
NOT_CERTIFIED = "not-certified"
INVARIANT = "invariant"
NOT_INVARIANT = "not-invariant"


@dataclass
class TubeSequence:
    shape: Polytope
    centers: np.ndarray  # (L+1, n)
    scales: np.ndarray  # (L+1,)
    controls: np.ndarray  # (L, p, m)
    pair: tuple
    eps_bars: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def horizon(self) -> int:
        return len(self.scales) - 1

    def section(self, ell: int) -> Polytope:
        return section_to_polytope(TubeCrossSection(self.centers[ell], float(self.scales[ell]), self.shape))

    def vertices(self, ell: int) -> np.ndarray:
        return self.centers[ell] + self.scales[ell] * self.shape.vertices

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "shape": self.shape.to_dict(),
            "centers": self.centers.tolist(),
            "scales": self.scales.tolist(),
            "controls": self.controls.tolist(),
            "eps_bars": None if self.eps_bars is None else self.eps_bars.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "TubeSequence":
        shape = Polytope.from_dict(d["shape"])
        m = len(d["controls"][0][0]) if d["controls"] else 0
        controls = np.array(d["controls"], dtype=float).reshape(len(d["scales"]) - 1, len(shape.vertices), m)
        eb = d.get("eps_bars")
        return cls(shape, np.array(d["centers"], float), np.array(d["scales"], float), controls,
                   tuple(d["pair"]), None if eb is None else np.array(eb, float))


@dataclass
class ReachCertificate:
    pair: tuple
    status: str
    tubes: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def reachable(self) -> bool:
        return self.status == REACHABLE


@dataclass
class InvarianceCertificate:
    region: int
    vertices: np.ndarray
    controls: Optional[np.ndarray]
    status: str
    margin: float = float("nan")

    @property
    def invariant(self) -> bool:
        return self.status == INVARIANT

    def to_dict(self) -> dict:
        return {
            "region": self.region,
            "status": self.status,
            "margin": self.margin,
            "vertices": self.vertices.tolist(),
            "controls": None if self.controls is None else self.controls.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "InvarianceCertificate":
        ctrl = None if d["controls"] is None else np.array(d["controls"], float)
        return cls(d["region"], np.array(d["vertices"], float), ctrl, d["status"], d["margin"])


def epsilon_bar(ws: Workspace, i: int, j: int, xhat, Z: Polytope, tol: float = BISECTION_TOL) -> float:
    """Largest scale keeping ``xhat ⊕ εZ`` inside the pair free space.

    Bisection on ``[0, diameter(bounding)]``; the returned value is always one
    that passed the containment test.
    """
    xhat = np.asarray(xhat, dtype=float)
    if not ws.in_pair_space(xhat, i, j):
        raise GeometryError("nominal state outside the pair free space")
    def fits(eps):
        return ws.section_in_pair_space(section_to_polytope(TubeCrossSection(xhat, eps, Z)), i, j)

    hi = diameter(ws.bounding)
    if fits(hi):
        return hi
    lo = 0.0
    if not fits(lo):
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fits(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _tube_lp(model: LtiModel, target: Polytope, traj: NominalTrajectory, Z: Polytope, eps_bars,
             eps_lower: Optional[float] = None, objective: str = "both"):
    """Assemble the joint tube LP.

    Variable layout: ``[ε_0..ε_L, u_{0,1}, ..., u_{L-1,p}, (t_0..t_{L-1})]``
    where the optional ``t_ℓ`` are extra robustness margins on each step,
    present when ``eps_lower`` fixes ``ε_0`` from a first solve. The second
    stage then maximizes ``Σ t_ℓ`` (``"margins"``), ``Σ ε_ℓ`` (``"width"``)
    or both (``"both"``).
    """
    X = traj.states
    L = traj.horizon
    Zv = Z.vertices
    p = len(Zv)
    m, n = model.m, model.n
    A, B = model.A, model.B
    margins = eps_lower is not None
    nu = L * p * m
    nv = (L + 1) + nu + (L if margins else 0)

    def ucol(ell, s):
        return (L + 1) + (ell * p + s) * m

    def tcol(ell):
        return (L + 1) + nu + ell

    rows, rhs = [], []
    # terminal section inside the target region
    for a, b in zip(target.A, target.b):
        for s in range(p):
            r = np.zeros(nv)
            r[L] = a @ Zv[s]
            rows.append(r)
            rhs.append(b - a @ X[L])
    # robust one-step inclusion of every vertex image
    hW = np.array([support(model.W, a) for a in Z.A])
    AZ = Zv @ A.T  # (p, n)
    for ell in range(L):
        base = A @ X[ell]
        for q, (a, bq) in enumerate(zip(Z.A, Z.b)):
            aB = a @ B
            for s in range(p):
                r = np.zeros(nv)
                r[ell] = a @ AZ[s]
                r[ell + 1] -= bq
                c0 = ucol(ell, s)
                r[c0:c0 + m] = aB
                if margins:
                    r[tcol(ell)] = 1.0
                rows.append(r)
                rhs.append(-hW[q] - a @ base + a @ X[ell + 1])
    # vertex controls inside U
    for ell in range(L):
        for s in range(p):
            c0 = ucol(ell, s)
            for g, h in zip(model.U.A, model.U.b):
                r = np.zeros(nv)
                r[c0:c0 + m] = g
                rows.append(r)
                rhs.append(h)
    c = np.zeros(nv)
    bounds = [(EPS_MIN, float(eb)) for eb in eps_bars] + [(None, None)] * nu
    if margins:
        bounds[0] = (min(eps_lower, float(eps_bars[0])), float(eps_bars[0]))
        bounds += [(0.0, None)] * L
        if objective in ("margins", "both"):
            c[tcol(0):tcol(0) + L] = 1.0
        if objective in ("width", "both"):
            c[1:L + 1] = 1.0
        if objective not in ("margins", "width", "both"):
            raise ValueError(f"unknown second-stage objective {objective!r}")
    else:
        c[0] = 1.0
    lp = linsolve.LinearProgram(c, np.array(rows), np.array(rhs), bounds=bounds)
    return lp, (L, p, m)


def synthesize_tubes(model: LtiModel, ws: Workspace, traj: NominalTrajectory, Z: Polytope, i: int, j: int,
                     eps_bars=None, method: str = "highs", refine: bool = True,
                     objective: str = "both") -> Optional[TubeSequence]:
    """Solve the tube LP along ``traj``; ``None`` when it is infeasible.

    With ``refine`` a second LP keeps ``ε_0`` at its optimum and maximizes
    ``objective`` (see ``_tube_lp``), which only selects among optimal tubes.
    """
    if eps_bars is None:
        eps_bars = [epsilon_bar(ws, i, j, x, Z) for x in traj.states]
    eps_bars = np.asarray(eps_bars, dtype=float)
    if np.any(eps_bars < EPS_MIN):
        return None
    target = ws.region(j)
    lp, (L, p, m) = _tube_lp(model, target, traj, Z, eps_bars)
    sol = linsolve.solve(lp, method=method)
    if not sol.ok:
        return None
    best = sol
    if refine:
        # keep ε_0 within a hair of its optimum so the second LP stays feasible
        lp2, _ = _tube_lp(model, target, traj, Z, eps_bars, eps_lower=float(sol.x[0]) - 1e-9,
                          objective=objective)
        sol2 = linsolve.solve(lp2, method=method)
        if sol2.ok:
            best = sol2
    x = best.x
    scales = np.maximum(x[:L + 1], EPS_MIN)
    controls = x[L + 1:L + 1 + L * p * m].reshape(L, p, m)
    return TubeSequence(Z, traj.states.copy(), scales, controls, (i, j), eps_bars)


def verify_tubes(model: LtiModel, ws: Workspace, tubes: TubeSequence, eps_bars=None, tol: float = 1e-7) -> list[str]:
    """Re-check every tube constraint with set operations; returns violations."""
    i, j = tubes.pair
    problems = []
    L = tubes.horizon
    if eps_bars is None:
        eps_bars = tubes.eps_bars
    for ell in range(L + 1):
        e = tubes.scales[ell]
        if e <= 0:
            problems.append(f"scale {ell} not positive")
        if eps_bars is not None and e > eps_bars[ell] + tol:
            problems.append(f"scale {ell} exceeds its bound")
    if not contains_polytope(tubes.section(L), ws.region(j), tol):
        problems.append("terminal section not inside target")
    for ell in range(L):
        nxt = erode_halfspaces(tubes.section(ell + 1), model.W)
        V = tubes.vertices(ell)
        for s in range(len(V)):
            u = tubes.controls[ell, s]
            if not contains_point(model.U, u, tol):
                problems.append(f"control ({ell},{s}) outside U")
            y = model.A @ V[s] + model.B @ u
            if not contains_point(nxt, y, tol):
                problems.append(f"vertex image ({ell},{s}) outside eroded next section")
    return problems


def check_reachability(tubes: TubeSequence, ws: Workspace, i: int, j: int) -> ReachCertificate:
    """Region-to-region certificate: initial section covers region i, and no
    section meets region i once a section has met region j."""
    Ri, Rj = ws.region(i), ws.region(j)
    diag = {}
    d1 = contains_polytope(Ri, tubes.section(0))
    diag["D1"] = d1
    L = tubes.horizon
    first = None
    for ell in range(1, L):
        if intersects(tubes.section(ell), Rj):
            first = ell
            break
    d2 = True
    if first is not None:
        for ell in range(first, L):
            if intersects(tubes.section(ell), Ri):
                d2 = False
                diag["D2_violation"] = ell
                break
    diag["D2"] = d2
    diag["first_target_contact"] = first
    status = REACHABLE if (d1 and d2) else NOT_CERTIFIED
    return ReachCertificate((i, j), status, [tubes], diag)


def _d2_ok(tubes: TubeSequence, ws: Workspace, i: int, j: int) -> bool:
    return check_reachability(tubes, ws, i, j).diagnostics["D2"]


def tube_attempt(model, ws, i, j, Z, seed, start=None, opts=None):
    """One nominal-trajectory + tube LP attempt; returns tubes or ``None``."""
    opts = opts or {}
    traj = plan_nominal(
        model, ws, i, j, seed,
        budget=opts.get("budget", 20_000),
        resolution=opts.get("resolution", 5),
        input_scale=opts.get("input_scale", 1.0),
        start=start,
        clearance=opts.get("clearance", 0.0),
        shape=Z,
    )
    if traj is None:
        return None
    bad = check_nominal(traj, model, ws, i, j, start=start)
    if bad:
        raise RuntimeError(f"RRT produced an invalid nominal trajectory: {bad[:3]}")
    return synthesize_tubes(model, ws, traj, Z, i, j, method=opts.get("lp_method", "highs"),
                            refine=opts.get("refine", True), objective=opts.get("objective", "both"))


def coverage_grid(region: Polytope, frac: float = 0.02) -> np.ndarray:
    """Cell centers of a grid over ``region`` plus its vertices."""
    lo, hi = region.vertices.min(axis=0), region.vertices.max(axis=0)
    delta = frac * diameter(region)
    axes = [np.arange(lo[k] + delta / 2, hi[k], delta) for k in range(len(lo))]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
    inside = mesh[np.all(mesh @ region.A.T <= region.b + TAU_GEO, axis=1)]
    return np.vstack([inside, region.vertices])


def grid_coverage(region: Polytope, sections, frac: float = 0.02):
    """Grid points of ``region`` and which of them some section contains."""
    grid = coverage_grid(region, frac)
    covered = np.zeros(len(grid), dtype=bool)
    for S in sections:
        covered |= np.all(grid @ S.A.T <= S.b + TAU_GEO, axis=1)
    return grid, covered


def multi_start_reachability(model: LtiModel, ws: Workspace, i: int, j: int, M: int, seeds, Z: Polytope,
                             opts=None) -> ReachCertificate:
    """Certificate from tubes started at several points of region i.

    The first start is the Chebyshev center, the others are uniform samples.
    Region i must be covered by the union of the initial sections, checked on
    a grid with spacing 2% of the region diameter (plus the region vertices).
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    seeds = list(seeds)
    Ri = ws.region(i)
    rng = np.random.default_rng(seeds[0] if seeds else 0)
    lo, hi = Ri.vertices.min(axis=0), Ri.vertices.max(axis=0)
    starts = [ws.center(i)]
    while len(starts) < M:
        x = lo + rng.random(len(lo)) * (hi - lo)
        if contains_point(Ri, x) and ws.in_pair_space(x, i, j):
            starts.append(x)
    tubes = []
    for m_idx, x0 in enumerate(starts):
        seed = seeds[m_idx % len(seeds)] + 7919 * m_idx
        t = tube_attempt(model, ws, i, j, Z, seed, start=None if m_idx == 0 else x0, opts=opts)
        if t is not None and _d2_ok(t, ws, i, j):
            tubes.append(t)
    if not tubes:
        return ReachCertificate((i, j), NOT_CERTIFIED, [], {"reason": "no start produced a valid tube"})
    if M == 1:
        return check_reachability(tubes[0], ws, i, j)
    sections = [t.section(0) for t in tubes]
    grid, covered = grid_coverage(Ri, sections)
    diag = {"starts": len(starts), "valid_tubes": len(tubes), "grid_points": len(grid),
            "uncovered": int((~covered).sum()), "coverage": "grid-2%"}
    # drop tubes that add no coverage so the runtime selects among fewer variants
    used = []
    for t, S in zip(tubes, sections):
        if np.any(np.all(grid @ S.A.T <= S.b + TAU_GEO, axis=1)):
            used.append(t)
    status = REACHABLE if covered.all() else NOT_CERTIFIED
    return ReachCertificate((i, j), status, used, diag)


def check_invariance(model: LtiModel, region: Polytope, index: int = 0) -> InvarianceCertificate:
    """Vertex controls driving every vertex of ``region`` into ``region ⊖ W``.

    Each vertex LP maximizes the depth of its image inside the eroded region.
    """
    V = region.vertices
    eroded = erode_halfspaces(region, model.W)
    m = model.m
    controls = []
    margins = []
    for v in V:
        Av = model.A @ v
        rows = [np.concatenate([a @ model.B, [1.0]]) for a in eroded.A]
        rhs = [b - a @ Av for a, b in zip(eroded.A, eroded.b)]
        rows += [np.concatenate([g, [0.0]]) for g in model.U.A]
        rhs += list(model.U.b)
        c = np.zeros(m + 1)
        c[-1] = 1.0
        sol = linsolve.solve(linsolve.LinearProgram(c, np.array(rows), np.array(rhs),
                                                    bounds=[(None, None)] * m + [(0.0, None)]))
        if not sol.ok:
            return InvarianceCertificate(index, V, None, NOT_INVARIANT)
        controls.append(sol.x[:m])
        margins.append(sol.x[m])
    return InvarianceCertificate(index, V, np.array(controls), INVARIANT, float(min(margins)))
