"""Convex polytope algebra in half-space / vertex form.

Only the operations the pipeline needs are provided: support functions,
membership, containment, intersection tests, Chebyshev centers, erosion
(Pontryagin difference) through support offsets, tube cross-sections and
planar vertex enumeration.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import linsolve

TAU_GEO = 1e-9


class GeometryError(ValueError):
    pass


class RepresentationError(GeometryError):
    pass


class Polytope:
    """Convex polytope ``{x : A x <= b}``, optionally with its vertex list.

    Rows of ``A`` are scaled to unit length on construction.

    Parameters
    ----------
    A, b : array_like
        Half-space description.
    vertices : array_like, optional
        Extreme points, one per row. Callers are responsible for supplying
        vertices that describe the same set as ``(A, b)``.
    """

    def __init__(self, A, b, vertices=None, empty: Optional[bool] = None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise GeometryError("A and b have mismatched row counts")
        norms = np.linalg.norm(A, axis=1)
        zero = norms < 1e-14
        if np.any(zero & (b < 0)):
            empty = True
        A = A[~zero] / norms[~zero, None]
        b = b[~zero] / norms[~zero]
        self.A = A
        self.b = b
        self.dim = A.shape[1]
        self.vertices = None if vertices is None else np.atleast_2d(np.asarray(vertices, dtype=float))
        if self.vertices is not None and self.vertices.shape[1] != self.dim:
            raise GeometryError("vertex dimension differs from half-space dimension")
        self._empty = empty

    def __repr__(self):
        return f"Polytope(dim={self.dim}, halfspaces={len(self.b)}, vertices={None if self.vertices is None else len(self.vertices)})"

    @property
    def is_empty(self) -> bool:
        if self._empty is None:
            self._empty = linsolve.feasible_point(self.A, self.b, nvars=self.dim) is None
        return self._empty

    @classmethod
    def box(cls, lo, hi) -> "Polytope":
        lo = np.asarray(lo, dtype=float).ravel()
        hi = np.asarray(hi, dtype=float).ravel()
        n = lo.size
        A = np.vstack([np.eye(n), -np.eye(n)])
        b = np.concatenate([hi, -lo])
        corners = np.array(list(np.ndindex(*([2] * n))), dtype=float)
        V = lo + corners * (hi - lo)
        if n == 2:
            V = V[[0, 2, 3, 1]]  # counter-clockwise
        return cls(A, b, V)

    @classmethod
    def from_vertices(cls, points) -> "Polytope":
        """Convex hull of planar ``points`` with both representations."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if P.shape[1] != 2:
            raise RepresentationError("vertex-only input is supported in dimension 2")
        hull = _hull_2d(P)
        if len(hull) < 3:
            raise GeometryError("degenerate vertex set")
        A, b = [], []
        for k in range(len(hull)):
            p, q = hull[k], hull[(k + 1) % len(hull)]
            e = q - p
            a = np.array([e[1], -e[0]])
            A.append(a)
            b.append(a @ p)
        return cls(np.array(A), np.array(b), hull)

    @classmethod
    def singleton(cls, x) -> "Polytope":
        x = np.asarray(x, dtype=float).ravel()
        return cls.box(x, x)

    def with_vertices(self) -> "Polytope":
        if self.vertices is not None:
            return self
        return Polytope(self.A, self.b, vertices_2d(self), empty=False)

    def translate(self, t) -> "Polytope":
        t = np.asarray(t, dtype=float)
        V = None if self.vertices is None else self.vertices + t
        return Polytope(self.A, self.b + self.A @ t, V, self._empty)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        eye = np.eye(self.dim)
        hi = np.array([support(self, e) for e in eye])
        lo = np.array([-support(self, -e) for e in eye])
        return lo, hi

    def to_dict(self) -> dict:
        d = {"A": self.A.tolist(), "b": self.b.tolist()}
        if self.vertices is not None:
            d["vertices"] = self.vertices.tolist()
        return d

    @classmethod
    def from_dict(cls, d) -> "Polytope":
        return cls(d["A"], d["b"], d.get("vertices"))


def _hull_2d(P: np.ndarray) -> np.ndarray:
    pts = sorted(set(map(tuple, np.round(P, 12))))
    if len(pts) <= 2:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def regular_polygon(radius: float, k: int, phase: float = 0.0) -> Polytope:
    """Regular ``k``-gon inscribed in the circle of ``radius`` about 0."""
    ang = phase + 2 * np.pi * np.arange(k) / k
    return Polytope.from_vertices(radius * np.c_[np.cos(ang), np.sin(ang)])


def support(P: Polytope, d) -> float:
    """``max_{x in P} d @ x``."""
    d = np.asarray(d, dtype=float)
    if P.vertices is not None:
        return float(np.max(P.vertices @ d))
    sol = linsolve.solve(linsolve.LinearProgram(d, P.A, P.b))
    if sol.status == linsolve.UNBOUNDED:
        raise GeometryError("unbounded support")
    if sol.status == linsolve.INFEASIBLE:
        raise GeometryError("empty polytope")
    return sol.value


def contains_point(P: Polytope, x, tol: float = TAU_GEO) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(np.all(P.A @ x <= P.b + tol))


def contains_polytope(inner: Polytope, outer: Polytope, tol: float = TAU_GEO) -> bool:
    """``inner ⊆ outer``, decided on the vertices of ``inner``."""
    if inner.vertices is None:
        raise RepresentationError("containment test needs the inner vertices")
    return bool(np.all(inner.vertices @ outer.A.T <= outer.b + tol))


def intersects(P: Polytope, Q: Polytope) -> bool:
    """Whether two closed polytopes share at least one point."""
    A = np.vstack([P.A, Q.A])
    b = np.concatenate([P.b, Q.b])
    return linsolve.feasible_point(A, b, nvars=P.dim) is not None


def chebyshev_center(P: Polytope) -> tuple[np.ndarray, float]:
    """Center and radius of the largest Euclidean ball inside ``P``."""
    n = P.dim
    norms = np.linalg.norm(P.A, axis=1)
    A = np.hstack([P.A, norms[:, None]])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    bounds = [(None, None)] * n + [(0.0, None)]
    sol = linsolve.solve(linsolve.LinearProgram(c, A, P.b, bounds=bounds))
    if sol.status == linsolve.INFEASIBLE:
        raise GeometryError("empty polytope")
    if sol.status == linsolve.UNBOUNDED:
        raise GeometryError("unbounded polytope")
    return sol.x[:n], float(sol.x[n])


def erode_halfspaces(P: Polytope, S: Polytope) -> Polytope:
    """Pontryagin difference ``P ⊖ S`` in half-space form only."""
    offsets = np.array([support(S, a) for a in P.A])
    return Polytope(P.A, P.b - offsets)


@dataclass(frozen=True)
class TubeCrossSection:
    center: np.ndarray
    scale: float
    shape: Polytope = field(repr=False)


def section_to_polytope(t: TubeCrossSection) -> Polytope:
    """``center ⊕ scale·shape`` in both representations."""
    if t.scale < 0:
        raise GeometryError("negative tube scale")
    Z = t.shape
    if Z.vertices is None:
        raise RepresentationError("tube shape needs vertices")
    c = np.asarray(t.center, dtype=float)
    V = c + t.scale * Z.vertices
    return Polytope(Z.A, Z.A @ c + t.scale * Z.b, V, empty=False)


def vertices_2d(P: Polytope, tol: float = TAU_GEO) -> np.ndarray:
    """Counter-clockwise vertex list of a bounded planar polytope."""
    if P.dim != 2:
        raise RepresentationError("vertex enumeration is only supported in dimension 2")
    A, b = P.A, P.b
    for d in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        support(Polytope(A, b), d)  # raises on empty or unbounded input
    pts = []
    for i in range(len(b)):
        for j in range(i + 1, len(b)):
            M = A[[i, j]]
            det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
            if abs(det) < 1e-12:
                continue
            x = np.linalg.solve(M, b[[i, j]])
            if np.all(A @ x <= b + 1e-7):
                pts.append(x)
    if not pts:
        raise GeometryError("empty polytope")
    return _hull_2d(np.array(pts))


def diameter(P: Polytope) -> float:
    lo, hi = P.bounding_box()
    return float(np.linalg.norm(hi - lo))


@dataclass
class Workspace:
    """Convex bounding set minus obstacles, with labelled regions of interest.

    Region ``i`` (1-based in labels) is ``regions[i-1]``.
    """

    bounding: Polytope
    obstacles: list = field(default_factory=list)
    regions: list = field(default_factory=list)
    region_centers: list = field(default_factory=list)

    def __post_init__(self):
        self.regions = [r.with_vertices() if r.dim == 2 else r for r in self.regions]
        self.obstacles = [o.with_vertices() if o.dim == 2 else o for o in self.obstacles]
        if not self.region_centers:
            self.region_centers = [chebyshev_center(r)[0] for r in self.regions]
        self.validate()

    @property
    def dim(self) -> int:
        return self.bounding.dim

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    def validate(self) -> None:
        for k, r in enumerate(self.regions):
            if r.vertices is None:
                raise RepresentationError(f"region {k + 1} needs vertices in dimension {r.dim}")
            if not contains_polytope(r, self.bounding):
                raise GeometryError(f"region {k + 1} is not inside the bounding set")
            for o_idx, o in enumerate(self.obstacles):
                if _interiors_overlap(r, o):
                    raise GeometryError(f"region {k + 1} overlaps obstacle {o_idx + 1}")
        for i in range(len(self.regions)):
            for j in range(i + 1, len(self.regions)):
                if intersects(self.regions[i], self.regions[j]):
                    raise GeometryError(f"regions {i + 1} and {j + 1} overlap")

    def region(self, i: int) -> Polytope:
        return self.regions[i - 1]

    def center(self, i: int) -> np.ndarray:
        return np.asarray(self.region_centers[i - 1])

    def in_free_space(self, x, tol: float = TAU_GEO) -> bool:
        """Inside the bounding set and not in the interior of any obstacle."""
        if not contains_point(self.bounding, x, tol):
            return False
        return not any(_strictly_inside(o, x, tol) for o in self.obstacles)

    def label(self, x, tol: float = TAU_GEO) -> int:
        """Index of the region containing ``x`` (1-based), or 0 for none."""
        for k, r in enumerate(self.regions):
            if contains_point(r, x, tol):
                return k + 1
        return 0

    def in_pair_space(self, x, i: int, j: int, tol: float = TAU_GEO) -> bool:
        """Membership in the free space minus regions other than i, j (closed obstacles)."""
        if not contains_point(self.bounding, x, tol):
            return False
        if any(contains_point(o, x, tol) for o in self.obstacles):
            return False
        for k, r in enumerate(self.regions):
            if k + 1 not in (i, j) and contains_point(r, x, tol):
                return False
        return True

    def section_in_pair_space(self, S: Polytope, i: int, j: int) -> bool:
        """Whether a polytope with vertices lies in the free space minus regions other than i, j.

        Bounding boxes screen out blocks that cannot be touched before any LP
        intersection test runs.
        """
        if not contains_polytope(S, self.bounding):
            return False
        lo, hi = S.vertices.min(axis=0), S.vertices.max(axis=0)
        for k, (blk, blo, bhi) in enumerate(self._blocks()):
            if k >= len(self.obstacles) and k - len(self.obstacles) + 1 in (i, j):
                continue
            if np.any(hi < blo - TAU_GEO) or np.any(lo > bhi + TAU_GEO):
                continue
            if intersects(S, blk):
                return False
        return True

    def _blocks(self):
        if getattr(self, "_block_cache", None) is None:
            self._block_cache = [(b, b.vertices.min(axis=0), b.vertices.max(axis=0))
                                 for b in list(self.obstacles) + list(self.regions)]
        return self._block_cache


def _strictly_inside(P: Polytope, x, tol: float) -> bool:
    return bool(np.all(P.A @ np.asarray(x, float) < P.b - tol))


def _interiors_overlap(P: Polytope, Q: Polytope) -> bool:
    # shared boundary is allowed; ask for a common ball of positive radius
    A = np.vstack([P.A, Q.A])
    b = np.concatenate([P.b, Q.b])
    try:
        _, r = chebyshev_center(Polytope(A, b))
    except GeometryError:
        return False
    return r > 1e-9


__all__ = [
    "TAU_GEO",
    "GeometryError",
    "RepresentationError",
    "Polytope",
    "TubeCrossSection",
    "Workspace",
    "chebyshev_center",
    "contains_point",
    "contains_polytope",
    "diameter",
    "erode_halfspaces",
    "intersects",
    "regular_polygon",
    "section_to_polytope",
    "support",
    "vertices_2d",
]
