"""Online execution of a plan with self-triggered communication.

At each communication instant the controller receives the state, predicts
``H`` nominal steps by vertex interpolation inside the concatenated tubes,
picks the longest horizon for which every predicted state stays inside its
tube despite the accumulated disturbance, and transmits that many inputs.
"""
from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import linsolve
from .abstraction import TubeLibrary, label_state
from .dynamics import LtiModel
from .geometry import TAU_GEO, Polytope, Workspace, contains_point, support
from .ltl import Plan

UNIFORM = "uniform"
ADVERSARIAL = "adversarial"
EXIT_TOL = 1e-7


class RuntimeInvariantError(RuntimeError):
    """A guarantee of the tube construction failed during execution."""

    def __init__(self, message: str, log: Optional["RunLog"] = None):
        super().__init__(message)
        self.log = log


class InterpolationError(RuntimeInvariantError):
    pass


@dataclass
class _Leg:
    pair: tuple
    start: int
    length: int
    variants: Optional[list] = None  # TubeSequence list, None for a self-loop


class Guide:
    """Concatenated tube sections and vertex controls along a plan.

    Step ``k`` has a membership section, which the state is guaranteed to lie
    in, and a control section whose vertices carry the stored controls. They
    differ only at the first step of a leg: there the state lies in the last
    section of the previous leg while the controls come from the first section
    of the new leg (or from the region for a self-loop), which contains it.
    Legs are generated lazily from the plan, so the guide is infinite.
    """

    def __init__(self, plan: Plan, library: TubeLibrary, ws: Workspace):
        self.plan = plan
        self.library = library
        self.ws = ws
        self.legs: list[_Leg] = []
        self.choice: dict[int, int] = {}
        self._starts: list[int] = []
        self._walk = plan.states()
        self._last = next(self._walk)
        self._sections: dict = {}

    def _add_leg(self) -> None:
        a = self._last
        b = next(self._walk)
        start = self.legs[-1].start + self.legs[-1].length if self.legs else 0
        if a == b:
            if a not in self.library.invariance:
                raise KeyError(f"no invariance data for region {a}")
            leg = _Leg((a, a), start, 1)
        else:
            variants = self.library.reach.get((a, b))
            if not variants:
                raise KeyError(f"no tubes for transition {(a, b)}")
            leg = _Leg((a, b), start, variants[0].horizon, variants)
        self.legs.append(leg)
        self._starts.append(start)
        self._last = b

    def locate(self, k: int) -> tuple[int, int]:
        """Leg index and local step of global step ``k``."""
        if k < 0:
            raise IndexError("negative step")
        while not self.legs or self.legs[-1].start + self.legs[-1].length <= k:
            self._add_leg()
        q = bisect.bisect_right(self._starts, k) - 1
        return q, k - self.legs[q].start

    def region_sequence(self, n_legs: int) -> list[int]:
        while len(self.legs) < n_legs:
            self._add_leg()
        seq = [self.legs[0].pair[0]]
        for leg in self.legs[:n_legs]:
            seq.append(leg.pair[1])
        return seq

    def _variant(self, q: int):
        leg = self.legs[q]
        if q not in self.choice:
            raise RuntimeInvariantError(f"no tube variant selected for leg {q}")
        return leg.variants[self.choice[q]]

    def _section(self, q: int, ell: int) -> Polytope:
        key = (q, self.choice.get(q), ell)
        S = self._sections.get(key)
        if S is None:
            S = self._variant(q).section(ell)
            self._sections[key] = S
        return S

    def select(self, k: int, xhat) -> None:
        """Pick the tube variant for the leg starting at ``k`` from ``xhat``."""
        q, ell = self.locate(k)
        leg = self.legs[q]
        if leg.variants is None or q in self.choice or ell != 0:
            return
        for idx, t in enumerate(leg.variants):
            if contains_point(self._section_cached(q, idx, 0), xhat):
                self.choice[q] = idx
                return
        raise InterpolationError(f"state {np.asarray(xhat).tolist()} not covered by any tube of leg {leg.pair}")

    def _section_cached(self, q, idx, ell):
        key = (q, idx, ell)
        S = self._sections.get(key)
        if S is None:
            S = self.legs[q].variants[idx].section(ell)
            self._sections[key] = S
        return S

    def release(self, from_step: int) -> None:
        """Forget variant choices of legs starting at or after ``from_step``."""
        for q in [q for q in self.choice if self.legs[q].start >= from_step]:
            del self.choice[q]

    def control(self, k: int, xhat):
        """Control-section vertices and vertex controls for step ``k``."""
        self.select(k, xhat)
        q, ell = self.locate(k)
        leg = self.legs[q]
        if leg.variants is None:
            cert = self.library.invariance[leg.pair[0]]
            return cert.vertices, cert.controls
        t = self._variant(q)
        return t.vertices(ell), t.controls[ell]

    def membership(self, k: int) -> Polytope:
        q, ell = self.locate(k)
        if ell == 0 and q > 0:
            q, ell = q - 1, self.legs[q - 1].length
        leg = self.legs[q]
        if leg.variants is None:
            return self.ws.region(leg.pair[0] if ell == 0 else leg.pair[1])
        return self._section(q, ell)


def interpolate_lambda(vertices, x) -> np.ndarray:
    """Convex weights of ``vertices`` reproducing ``x``.

    Among the generally many solutions the LP picks one that prefers low
    vertex indices, so the result is deterministic.
    """
    V = np.asarray(vertices, dtype=float)
    x = np.asarray(x, dtype=float)
    p = len(V)
    A_eq = np.vstack([V.T, np.ones((1, p))])
    b_eq = np.concatenate([x, [1.0]])
    c = -np.arange(p, dtype=float)
    lp = linsolve.LinearProgram(c, A_eq=A_eq, b_eq=b_eq, bounds=[(0.0, None)] * p)
    sol = linsolve.solve(lp)
    if not sol.ok:
        raise InterpolationError(f"point {x.tolist()} is outside the section")
    lam = np.clip(sol.x, 0.0, None)
    return lam / lam.sum()


def compute_controls(guide: Guide, model: LtiModel, k: int, x_k, H: int):
    """Inputs ``u_k..u_{k+H-1}`` and nominal states ``x̂_k..x̂_{k+H}``."""
    if H < 1:
        raise ValueError("H must be at least 1")
    xh = np.asarray(x_k, dtype=float).copy()
    us = np.empty((H, model.m))
    xs = np.empty((H + 1, model.n))
    xs[0] = xh
    for ell in range(H):
        V, Uc = guide.control(k + ell, xh)
        lam = interpolate_lambda(V, xh)
        u = lam @ Uc
        us[ell] = u
        xh = model.A @ xh + model.B @ u
        xs[ell + 1] = xh
    return us, xs


def next_comm_time(guide: Guide, model: LtiModel, k: int, nominals, H: int, tol: float = TAU_GEO) -> int:
    """Largest ``ℓ ≤ H`` such that every ``x̂_{k+j} ⊕ W_j``, ``j ≤ ℓ``, fits its section."""
    for ell in range(H + 1):
        S = guide.membership(k + ell)
        xh = nominals[ell]
        for a, b in zip(S.A, S.b):
            if a @ xh + model.accumulated_disturbance_support(ell, a) > b + tol:
                return ell - 1
    return H


def tightened_margin(guide: Guide, model: LtiModel, k: int, nominals) -> float:
    """Smallest slack of ``x̂_{k+ℓ} ∈ X*_{k+ℓ} ⊖ W`` over ``ℓ = 1..H``."""
    worst = np.inf
    for ell in range(1, len(nominals)):
        S = guide.membership(k + ell)
        for a, b in zip(S.A, S.b):
            worst = min(worst, b - a @ nominals[ell] - support(model.W, a))
    return float(worst)


@dataclass
class RunLog:
    states: np.ndarray  # (K+1, n)
    inputs: np.ndarray  # (K+1, m); last row NaN
    disturbances: np.ndarray  # (K+1, n); last row NaN
    comm: np.ndarray  # (K+1,) bool
    ell_star: np.ndarray  # (K+1,) int, 0 between communications
    letters: np.ndarray  # (K+1,) int, 0 for the dummy symbol
    seed: Optional[int] = None
    config_hash: str = ""
    predictions: list = field(default_factory=list, repr=False)  # (k, inputs, nominals)

    @property
    def steps(self) -> int:
        return len(self.states) - 1

    @property
    def comm_count(self) -> int:
        return int(self.comm.sum())

    def header(self) -> list[str]:
        n, m = self.states.shape[1], self.inputs.shape[1]
        return (["k"] + [f"x{i}" for i in range(n)] + [f"u{i}" for i in range(m)]
                + [f"w{i}" for i in range(n)] + ["comm_flag", "ell_star", "trace_letter"])

    def to_csv(self, path) -> None:
        def fmt(v):
            return "" if np.isnan(v) else repr(float(v))

        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(self.header())
            for k in range(len(self.states)):
                wr.writerow([k] + [fmt(v) for v in self.states[k]] + [fmt(v) for v in self.inputs[k]]
                            + [fmt(v) for v in self.disturbances[k]]
                            + [int(self.comm[k]), int(self.ell_star[k]), f"p{int(self.letters[k])}"])

    @classmethod
    def from_csv(cls, path) -> "RunLog":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError("empty run log")
        head = rows[0]
        xs = [c for c in head if c.startswith("x")]
        us = [c for c in head if c.startswith("u")]
        ws_ = [c for c in head if c.startswith("w")]
        n, m = len(xs), len(us)
        expected = ["k"] + xs + us + ws_ + ["comm_flag", "ell_star", "trace_letter"]
        if head != expected or n == 0 or len(ws_) != n:
            raise ValueError(f"unexpected CSV header {head}")
        body = rows[1:]

        def num(s):
            return float("nan") if s == "" else float(s)

        try:
            ks = [int(r[0]) for r in body]
            if ks != list(range(len(body))):
                raise ValueError("steps are not consecutive from 0")
            X = np.array([[num(v) for v in r[1:1 + n]] for r in body]).reshape(-1, n)
            U = np.array([[num(v) for v in r[1 + n:1 + n + m]] for r in body]).reshape(-1, m)
            W = np.array([[num(v) for v in r[1 + n + m:1 + 2 * n + m]] for r in body]).reshape(-1, n)
            comm = np.array([int(r[-3]) for r in body], dtype=bool)
            ell = np.array([int(r[-2]) for r in body], dtype=int)
            letters = np.array([int(r[-1].lstrip("p")) for r in body], dtype=int)
        except (IndexError, ValueError) as exc:
            raise ValueError(f"malformed run log: {exc}") from exc
        if np.isnan(X).any():
            raise ValueError("malformed run log: missing state values")
        return cls(X, U, W, comm, ell, letters)


def sample_disturbance(W: Polytope, rng: np.random.Generator, mode: str) -> np.ndarray:
    V = W.vertices
    if mode == ADVERSARIAL:
        return V[rng.integers(len(V))].copy()
    if mode != UNIFORM:
        raise ValueError(f"unknown disturbance mode {mode!r}")
    lo, hi = V.min(axis=0), V.max(axis=0)
    while True:
        w = lo + rng.random(len(lo)) * (hi - lo)
        if contains_point(W, w):
            return w


def simulate(model: LtiModel, ws: Workspace, guide: Guide, x0, H: int, steps: int, seed: int,
             disturbance_mode: str = UNIFORM, record: bool = False, config_hash: str = "") -> RunLog:
    """Closed loop over steps ``0..steps`` with self-triggered communication.

    Raises ``RuntimeInvariantError`` (carrying the partial log) if a state
    leaves its tube section or the self-trigger horizon collapses to zero.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    n, m = model.n, model.m
    rng = np.random.default_rng(seed)
    X = np.full((steps + 1, n), np.nan)
    U = np.full((steps + 1, m), np.nan)
    Wl = np.full((steps + 1, n), np.nan)
    comm = np.zeros(steps + 1, dtype=bool)
    ell_star = np.zeros(steps + 1, dtype=int)
    letters = np.zeros(steps + 1, dtype=int)
    x = np.asarray(x0, dtype=float)
    X[0] = x
    log = RunLog(X, U, Wl, comm, ell_star, letters, seed, config_hash)

    def fail(msg, last):
        cut = last + 1
        partial = RunLog(X[:cut], U[:cut], Wl[:cut], comm[:cut], ell_star[:cut], letters[:cut], seed, config_hash,
                         log.predictions)
        raise RuntimeInvariantError(msg, partial)

    try:
        guide.select(0, x)
    except InterpolationError as exc:
        fail(str(exc), 0)
    if not contains_point(guide.membership(0), x, EXIT_TOL):
        fail("initial state is not inside the first tube section", 0)
    k = 0
    while k <= steps:
        try:
            us, xs = compute_controls(guide, model, k, x, H)
        except InterpolationError as exc:
            fail(str(exc), k)
        ls = next_comm_time(guide, model, k, xs, H)
        if ls < 1:
            fail(f"self-trigger horizon is zero at step {k}", k)
        guide.release(k + ls)
        if record:
            log.predictions.append((k, us.copy(), xs.copy()))
        comm[k] = True
        ell_star[k] = ls
        for ell in range(ls):
            t = k + ell
            letters[t] = label_state(ws, x)
            if t == steps:
                break
            w = sample_disturbance(model.W, rng, disturbance_mode)
            U[t] = us[ell]
            Wl[t] = w
            x = model.step(x, us[ell], w)
            X[t + 1] = x
            if not contains_point(guide.membership(t + 1), x, EXIT_TOL):
                letters[t + 1] = ws.label(x)
                fail(f"state left its tube section at step {t + 1}", t + 1)
        k += ls
    return log
