"""Scenario configuration: YAML schema, validation and object construction.

Polytopes are written as one of::

    {box: {lo: [..], hi: [..]}}
    {vertices: [[..], ..]}                 # planar convex hull
    {halfspaces: {A: [[..], ..], b: [..]}}
    {polygon: {radius: r, sides: k}}       # regular polygon inscribed in a disc

Matrices are lists of rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .abstraction import AbstractionOptions, content_hash
from .dynamics import LtiModel, discretize_zoh
from .geometry import GeometryError, Polytope, Workspace, contains_point, regular_polygon, vertices_2d
from .ltl import LtlSyntaxError, parse

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class RuntimeOptions:
    H: int = 10
    steps: int = 800
    seeds: tuple = (0,)
    disturbance: str = "uniform"


@dataclass
class ScenarioConfig:
    model: LtiModel
    workspace: Workspace
    shape: Optional[Polytope]
    init_region: int
    x0: np.ndarray
    formulas: dict
    abstraction: AbstractionOptions
    runtime: RuntimeOptions
    raw: dict = field(repr=False, default_factory=dict)

    def abstraction_key(self) -> str:
        """Content hash of everything the abstraction depends on."""
        keep = {k: self.raw.get(k) for k in ("dynamics", "input_set", "disturbance_set", "shape", "workspace")}
        keep["workspace"] = {k: v for k, v in (keep["workspace"] or {}).items() if k not in ("x0",)}
        keep["abstraction"] = self.abstraction.to_dict()
        keep["schema"] = SCHEMA_VERSION
        return content_hash(keep)

    def config_hash(self) -> str:
        return content_hash(self.raw)

    def formula(self, name: str):
        if name not in self.formulas:
            raise ConfigError(f"formulas.{name}", "no such formula")
        return self.formulas[name]


def _get(d: dict, key: str, path: str, default: Any = ...):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected a mapping")
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}.{key}" if path else key, "missing field")
        return default
    return d[key]


def _matrix(v, path: str, shape=None) -> np.ndarray:
    try:
        M = np.array(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a numeric matrix")
    if M.ndim == 1 and shape is not None and len(shape) == 2:
        M = M.reshape(1, -1)
    if not np.all(np.isfinite(M)):
        raise ConfigError(path, "entries must be finite")
    if shape is not None and M.shape != shape:
        raise ConfigError(path, f"expected shape {shape}, got {M.shape}")
    return M


def polytope_from_spec(spec, path: str, dim: int) -> Polytope:
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError(path, "expected exactly one of box, vertices, halfspaces, polygon")
    kind, body = next(iter(spec.items()))
    try:
        if kind == "box":
            lo = _matrix(_get(body, "lo", path), f"{path}.box.lo", (dim,))
            hi = _matrix(_get(body, "hi", path), f"{path}.box.hi", (dim,))
            if np.any(hi <= lo):
                raise ConfigError(f"{path}.box", "hi must exceed lo")
            return Polytope.box(lo, hi)
        if kind == "vertices":
            V = _matrix(body, f"{path}.vertices")
            if V.ndim != 2 or V.shape[1] != dim or len(V) < dim + 1:
                raise ConfigError(f"{path}.vertices", f"need at least {dim + 1} points of dimension {dim}")
            if dim != 2:
                raise ConfigError(f"{path}.vertices", "vertex input is supported for planar sets only")
            return Polytope.from_vertices(V)
        if kind == "halfspaces":
            A = _matrix(_get(body, "A", path), f"{path}.halfspaces.A")
            b = _matrix(_get(body, "b", path), f"{path}.halfspaces.b")
            if A.ndim != 2 or A.shape[1] != dim or b.shape != (A.shape[0],):
                raise ConfigError(f"{path}.halfspaces", "A must be (k, n) and b of length k")
            P = Polytope(A, b)
            verts = body.get("vertices")
            if verts is not None:
                return Polytope(A, b, vertices=_matrix(verts, f"{path}.halfspaces.vertices"))
            if dim == 2:
                return Polytope(P.A, P.b, vertices=vertices_2d(P))
            return P
        if kind == "polygon":
            if dim != 2:
                raise ConfigError(f"{path}.polygon", "regular polygons are planar")
            r = float(_get(body, "radius", f"{path}.polygon"))
            k = int(_get(body, "sides", f"{path}.polygon"))
            if r <= 0 or k < 3:
                raise ConfigError(f"{path}.polygon", "radius must be positive and sides at least 3")
            return regular_polygon(r, k, float(body.get("phase", 0.0)))
    except GeometryError as exc:
        raise ConfigError(path, str(exc))
    raise ConfigError(path, f"unknown polytope kind {kind!r}")


def build_config(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("", "top level must be a mapping")
    dyn = _get(raw, "dynamics", "")
    if "continuous" in dyn:
        c = dyn["continuous"]
        Ac = _matrix(_get(c, "A", "dynamics.continuous"), "dynamics.continuous.A")
        n = Ac.shape[0]
        if Ac.shape != (n, n):
            raise ConfigError("dynamics.continuous.A", "must be square")
        Bc = _matrix(_get(c, "B", "dynamics.continuous"), "dynamics.continuous.B")
        if Bc.ndim != 2 or Bc.shape[0] != n:
            raise ConfigError("dynamics.continuous.B", f"must have {n} rows")
        h = float(_get(c, "h", "dynamics.continuous"))
        if h <= 0:
            raise ConfigError("dynamics.continuous.h", "must be positive")
        A, B = discretize_zoh(Ac, Bc, h)
    elif "discrete" in dyn:
        d = dyn["discrete"]
        A = _matrix(_get(d, "A", "dynamics.discrete"), "dynamics.discrete.A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ConfigError("dynamics.discrete.A", "must be square")
        B = _matrix(_get(d, "B", "dynamics.discrete"), "dynamics.discrete.B")
        if B.ndim != 2 or B.shape[0] != n:
            raise ConfigError("dynamics.discrete.B", f"must have {n} rows")
    else:
        raise ConfigError("dynamics", "expected 'continuous' or 'discrete'")
    n, m = B.shape
    U = polytope_from_spec(_get(raw, "input_set", ""), "input_set", m)
    W = polytope_from_spec(_get(raw, "disturbance_set", ""), "disturbance_set", n)
    try:
        model = LtiModel(A, B, U, W)
    except ValueError as exc:
        raise ConfigError("dynamics", str(exc))
    shape_spec = raw.get("shape")
    shape = None if shape_spec is None else polytope_from_spec(shape_spec, "shape", n)
    if shape is not None and not np.all(shape.b > 0):
        raise ConfigError("shape", "must contain the origin in its interior")

    wsd = _get(raw, "workspace", "")
    bounding = polytope_from_spec(_get(wsd, "bounding", "workspace"), "workspace.bounding", n)
    obstacles = [polytope_from_spec(o, f"workspace.obstacles[{k}]", n)
                 for k, o in enumerate(wsd.get("obstacles", []) or [])]
    regions = [polytope_from_spec(r, f"workspace.regions[{k}]", n)
               for k, r in enumerate(_get(wsd, "regions", "workspace"))]
    if not regions:
        raise ConfigError("workspace.regions", "at least one region is required")
    try:
        ws = Workspace(bounding, obstacles, regions)
    except GeometryError as exc:
        raise ConfigError("workspace", str(exc))
    init = int(_get(wsd, "init_region", "workspace"))
    if not 1 <= init <= len(regions):
        raise ConfigError("workspace.init_region", f"must be in 1..{len(regions)}")
    x0 = wsd.get("x0")
    x0 = ws.center(init) if x0 is None else _matrix(x0, "workspace.x0", (n,))
    if not contains_point(ws.region(init), x0):
        raise ConfigError("workspace.x0", "initial state must lie in the initial region")

    formulas = {}
    for name, text in (raw.get("formulas") or {}).items():
        try:
            formulas[str(name)] = parse(str(text), len(regions))
        except LtlSyntaxError as exc:
            raise ConfigError(f"formulas.{name}", str(exc))

    ab = raw.get("abstraction") or {}
    known = {"seeds", "multi_start", "budget", "resolution", "input_scale", "clearance", "lp_method", "refine", "objective"}
    extra = set(ab) - known
    if extra:
        raise ConfigError("abstraction", f"unknown fields {sorted(extra)}")
    opts = AbstractionOptions(
        seeds=tuple(int(s) for s in ab.get("seeds", (0, 1, 2, 3, 4))),
        multi_start=int(ab.get("multi_start", 1)),
        budget=int(ab.get("budget", 20_000)),
        resolution=int(ab.get("resolution", 5)),
        input_scale=float(ab.get("input_scale", 1.0)),
        clearance=float(ab.get("clearance", 0.0)),
        lp_method=str(ab.get("lp_method", "highs")),
        refine=bool(ab.get("refine", True)),
        objective=str(ab.get("objective", "both")),
    )
    if not opts.seeds:
        raise ConfigError("abstraction.seeds", "need at least one seed")
    if opts.lp_method not in ("simplex", "highs"):
        raise ConfigError("abstraction.lp_method", "must be 'simplex' or 'highs'")
    if opts.objective not in ("margins", "width", "both"):
        raise ConfigError("abstraction.objective", "must be 'margins', 'width' or 'both'")
    if not 0 < opts.input_scale <= 1:
        raise ConfigError("abstraction.input_scale", "must be in (0, 1]")
    if opts.clearance > 0 and shape is None:
        raise ConfigError("abstraction.clearance", "needs an explicit shape")

    rt = raw.get("runtime") or {}
    rto = RuntimeOptions(
        H=int(rt.get("H", 10)),
        steps=int(rt.get("steps", 800)),
        seeds=tuple(int(s) for s in rt.get("seeds", (0,))),
        disturbance=str(rt.get("disturbance", "uniform")),
    )
    if rto.H < 1:
        raise ConfigError("runtime.H", "must be at least 1")
    if rto.steps < 1:
        raise ConfigError("runtime.steps", "must be at least 1")
    if rto.disturbance not in ("uniform", "adversarial"):
        raise ConfigError("runtime.disturbance", "must be 'uniform' or 'adversarial'")
    return ScenarioConfig(model, ws, shape, init, np.asarray(x0, float), formulas, opts, rto, raw)


def load_config(path) -> ScenarioConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read: {exc}")
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"invalid YAML: {exc}")
    return build_config(raw)
