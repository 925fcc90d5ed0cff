"""Nominal trajectories between regions by RRT over the disturbance-free plant."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import LtiModel
from .geometry import TAU_GEO, Polytope, TubeCrossSection, Workspace, contains_point, section_to_polytope, support

P_GOAL = 0.1
DEFAULT_BUDGET = 20_000
DEFAULT_RESOLUTION = 5


@dataclass
class NominalTrajectory:
    states: np.ndarray  # (L+1, n)
    inputs: np.ndarray  # (L, m)

    @property
    def horizon(self) -> int:
        return len(self.inputs)


def candidate_inputs(model: LtiModel, resolution: int = DEFAULT_RESOLUTION, scale: float = 1.0) -> np.ndarray:
    """Grid over the bounding box of ``scale * U``, restricted to U, always with 0."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    m = model.m
    eye = np.eye(m)
    hi = np.array([support(model.U, e) for e in eye]) * scale
    lo = np.array([-support(model.U, -e) for e in eye]) * scale
    axes = [np.linspace(lo[k], hi[k], resolution) for k in range(m)]
    pts = [np.array(p) for p in itertools.product(*axes)]
    pts = [p for p in pts if contains_point(model.U, p)]
    if not any(np.all(p == 0) for p in pts):
        pts.append(np.zeros(m))
    out = np.array(sorted(map(tuple, pts)))
    return out.reshape(-1, m)


class _PairSpace:
    """Vectorised point test for the free space minus foreign regions."""

    def __init__(self, ws: Workspace, i: int, j: int):
        self.bA, self.bb = ws.bounding.A, ws.bounding.b
        self.blocks = [(o.A, o.b) for o in ws.obstacles]
        self.blocks += [(r.A, r.b) for k, r in enumerate(ws.regions) if k + 1 not in (i, j)]

    def __call__(self, x) -> bool:
        if np.any(self.bA @ x > self.bb + TAU_GEO):
            return False
        for A, b in self.blocks:
            if np.all(A @ x <= b + TAU_GEO):
                return False
        return True


def check_nominal(traj: NominalTrajectory, model: LtiModel, ws: Workspace, i: int, j: int,
                  start=None, tol: float = 1e-10) -> list[str]:
    """Invariant violations of a nominal trajectory (empty list when valid)."""
    problems = []
    X, U = traj.states, traj.inputs
    start = ws.center(i) if start is None else np.asarray(start, float)
    if not np.allclose(X[0], start, atol=tol):
        problems.append("does not start at the planned start point")
    if len(X) != len(U) + 1:
        problems.append("state/input length mismatch")
    inside = _PairSpace(ws, i, j)
    for k in range(len(U)):
        nxt = model.A @ X[k] + model.B @ U[k]
        if np.max(np.abs(nxt - X[k + 1])) > tol * max(1.0, np.abs(X[k + 1]).max()):
            problems.append(f"dynamics mismatch at step {k}")
        if not contains_point(model.U, U[k]):
            problems.append(f"input {k} outside U")
    for k, x in enumerate(X):
        if not inside(x):
            problems.append(f"state {k} leaves the pair free space")
    if not contains_point(ws.region(j), X[-1]):
        problems.append("terminal state not in target region")
    return problems


def plan_nominal(model: LtiModel, ws: Workspace, i: int, j: int, rng_seed: int,
                 budget: int = DEFAULT_BUDGET, resolution: int = DEFAULT_RESOLUTION,
                 input_scale: float = 1.0, p_goal: float = P_GOAL, start=None,
                 settle_steps: int = 40, clearance: float = 0.0,
                 shape: Optional[Polytope] = None) -> Optional[NominalTrajectory]:
    """RRT from ``start`` (default: Chebyshev center of region i) into region j.

    After the tree first reaches region j the path is extended greedily towards
    the target's center while it stays inside the target, so the terminal state
    sits deep in region j. With ``clearance > 0`` a new node is also rejected
    unless ``x ⊕ clearance·shape`` stays in the pair free space. Returns
    ``None`` if the node budget runs out.
    """
    if i == j:
        raise ValueError("source and target regions must differ")
    point_ok = _PairSpace(ws, i, j)
    if clearance > 0:
        if shape is None:
            raise ValueError("clearance needs a shape")

        def inside(x):
            if not point_ok(x):
                return False
            S = section_to_polytope(TubeCrossSection(x, clearance, shape))
            return ws.section_in_pair_space(S, i, j)
    else:
        inside = point_ok
    x0 = ws.center(i) if start is None else np.asarray(start, dtype=float)
    if not point_ok(x0):
        raise ValueError("start point is not in the pair free space")
    rng = np.random.default_rng(rng_seed)
    Uc = candidate_inputs(model, resolution, input_scale)
    BU = Uc @ model.B.T
    target = ws.region(j)
    goal = ws.center(j)
    lo, hi = ws.bounding.bounding_box()
    n = model.n

    nodes = np.empty((budget, n))
    parent = np.full(budget, -1, dtype=int)
    uidx = np.full(budget, -1, dtype=int)
    nodes[0] = x0
    count = 1
    hit = -1
    if contains_point(target, x0):
        hit = 0
    attempts = 0
    while hit < 0 and count < budget and attempts < 20 * budget:
        attempts += 1
        if rng.random() < p_goal:
            sample = goal
        else:
            while True:
                sample = lo + rng.random(n) * (hi - lo)
                if contains_point(ws.bounding, sample):
                    break
        near = int(np.argmin(np.sum((nodes[:count] - sample) ** 2, axis=1)))
        succ = model.A @ nodes[near] + BU
        k = int(np.argmin(np.sum((succ - sample) ** 2, axis=1)))
        new = succ[k]
        if not inside(new):
            continue
        nodes[count] = new
        parent[count] = near
        uidx[count] = k
        if contains_point(target, new):
            hit = count
        count += 1
    if hit < 0:
        return None
    chain = []
    node = hit
    while node >= 0:
        chain.append(node)
        node = parent[node]
    chain.reverse()
    states = [nodes[c] for c in chain]
    inputs = [Uc[uidx[c]] for c in chain[1:]]
    x = states[-1]
    for _ in range(settle_steps):
        succ = model.A @ x + BU
        d = np.sum((succ - goal) ** 2, axis=1)
        k = int(np.argmin(d))
        if d[k] >= np.sum((x - goal) ** 2) - 1e-12:
            break
        if not (contains_point(target, succ[k]) and inside(succ[k])):
            break
        x = succ[k]
        states.append(x)
        inputs.append(Uc[k])
    return NominalTrajectory(np.array(states), np.array(inputs).reshape(-1, model.m))
