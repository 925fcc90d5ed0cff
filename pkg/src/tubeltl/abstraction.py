"""Finite transition system over the regions of interest and its tube library."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .dynamics import LtiModel
from .geometry import GeometryError, Polytope, Workspace
from .tubesynth import (
    InvarianceCertificate,
    ReachCertificate,
    TubeSequence,
    check_invariance,
    check_reachability,
    multi_start_reachability,
    tube_attempt,
)

log = logging.getLogger(__name__)

CACHE_VERSION = 1
DUMMY = 0


def proposition(i: int) -> str:
    return f"p{i}"


@dataclass
class TransitionSystem:
    """States are region indices ``1..n``; state ``s_i`` carries label ``p_i``."""

    n_states: int
    init: int
    edges: set = field(default_factory=set)

    def __post_init__(self):
        if not 1 <= self.init <= self.n_states:
            raise ValueError(f"initial state {self.init} out of range")
        self.edges = {(int(a), int(b)) for a, b in self.edges}
        for a, b in self.edges:
            if not (1 <= a <= self.n_states and 1 <= b <= self.n_states):
                raise ValueError(f"edge {(a, b)} out of range")

    @property
    def states(self) -> list[int]:
        return list(range(1, self.n_states + 1))

    def label(self, s: int) -> int:
        return s

    def region_of(self, s: int) -> int:
        return s

    def state_of(self, region: int) -> int:
        return region

    def successors(self, s: int) -> list[int]:
        return sorted(b for a, b in self.edges if a == s)

    def has_edge(self, a: int, b: int) -> bool:
        return (a, b) in self.edges

    def to_dict(self) -> dict:
        return {"n_states": self.n_states, "init": self.init, "edges": sorted(map(list, self.edges))}

    @classmethod
    def from_dict(cls, d) -> "TransitionSystem":
        return cls(d["n_states"], d["init"], {tuple(e) for e in d["edges"]})


@dataclass
class TubeLibrary:
    """Tube variants per certified pair and invariance data per self-loop."""

    reach: dict = field(default_factory=dict)  # (i, j) -> list[TubeSequence]
    invariance: dict = field(default_factory=dict)  # i -> InvarianceCertificate

    def to_dict(self) -> dict:
        return {
            "reach": [{"pair": list(k), "tubes": [t.to_dict() for t in v]} for k, v in sorted(self.reach.items())],
            "invariance": [c.to_dict() for _, c in sorted(self.invariance.items())],
        }

    @classmethod
    def from_dict(cls, d) -> "TubeLibrary":
        reach = {tuple(e["pair"]): [TubeSequence.from_dict(t) for t in e["tubes"]] for e in d["reach"]}
        inv = {c["region"]: InvarianceCertificate.from_dict(c) for c in d["invariance"]}
        return cls(reach, inv)


@dataclass
class AbstractionOptions:
    seeds: tuple = (0, 1, 2, 3, 4)
    multi_start: int = 1
    budget: int = 20_000
    resolution: int = 5
    input_scale: float = 1.0
    clearance: float = 0.0
    lp_method: str = "highs"
    refine: bool = True
    objective: str = "both"

    def attempt_opts(self) -> dict:
        return {
            "budget": self.budget,
            "resolution": self.resolution,
            "input_scale": self.input_scale,
            "clearance": self.clearance,
            "lp_method": self.lp_method,
            "refine": self.refine,
            "objective": self.objective,
        }

    def to_dict(self) -> dict:
        d = dict(self.attempt_opts())
        d["seeds"] = list(self.seeds)
        d["multi_start"] = self.multi_start
        return d


def default_shape(ws: Workspace, i: int) -> Polytope:
    """Region ``i`` translated so that its Chebyshev center is the origin."""
    return ws.region(i).translate(-ws.center(i))


def certify_pair(model: LtiModel, ws: Workspace, i: int, j: int, Z: Polytope,
                 options: AbstractionOptions) -> ReachCertificate:
    """Single-start attempts over the seed list, then multi-start if enabled."""
    tried = []
    for seed in options.seeds:
        tubes = tube_attempt(model, ws, i, j, Z, seed, opts=options.attempt_opts())
        if tubes is None:
            tried.append((seed, "trajectory or tube LP failed"))
            continue
        cert = check_reachability(tubes, ws, i, j)
        cert.diagnostics["seed"] = seed
        if cert.reachable:
            cert.diagnostics["tried"] = tried
            return cert
        tried.append((seed, "D1" if not cert.diagnostics["D1"] else "D2"))
    if options.multi_start > 1:
        cert = multi_start_reachability(model, ws, i, j, options.multi_start, options.seeds, Z,
                                        opts=options.attempt_opts())
        cert.diagnostics["tried"] = tried
        return cert
    return ReachCertificate((i, j), "not-certified", [], {"tried": tried})


def build(model: LtiModel, ws: Workspace, init_region: int, shape: Optional[Polytope] = None,
          options: Optional[AbstractionOptions] = None):
    """Certify every self-loop and ordered pair; returns ``(ts, library, report)``.

    ``shape`` is the tube cross-section used for all pairs; by default each pair
    uses its source region's shape centered at the origin.
    """
    options = options or AbstractionOptions()
    N = ws.n_regions
    if not 1 <= init_region <= N:
        raise ValueError(f"initial region {init_region} out of range")
    edges = set()
    lib = TubeLibrary()
    report = {}
    for i in range(1, N + 1):
        cert = check_invariance(model, ws.region(i), i)
        report[(i, i)] = {"status": cert.status, "margin": cert.margin}
        if cert.invariant:
            edges.add((i, i))
            lib.invariance[i] = cert
    for i in range(1, N + 1):
        for j in range(1, N + 1):
            if i == j:
                continue
            Z = shape if shape is not None else default_shape(ws, i)
            cert = certify_pair(model, ws, i, j, Z, options)
            diag = {k: v for k, v in cert.diagnostics.items() if k != "tried"}
            diag["status"] = cert.status
            diag["attempts"] = len(cert.diagnostics.get("tried", [])) + (1 if cert.reachable else 0)
            if cert.tubes:
                diag["eps0"] = float(cert.tubes[0].scales[0])
                diag["horizon"] = int(cert.tubes[0].horizon)
            report[(i, j)] = diag
            log.info("pair %s: %s", (i, j), cert.status)
            if cert.reachable:
                edges.add((i, j))
                lib.reach[(i, j)] = cert.tubes
    return TransitionSystem(N, init_region, edges), lib, report


def label_state(ws: Workspace, x) -> int:
    """Region index whose region contains ``x``, or 0 for the dummy symbol."""
    if not ws.in_free_space(x):
        raise GeometryError(f"state {np.asarray(x).tolist()} is outside the free space")
    return ws.label(x)


def content_hash(payload) -> str:
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def save_cache(path, key: str, ts: TransitionSystem, lib: TubeLibrary, report=None) -> None:
    doc = {
        "version": CACHE_VERSION,
        "key": key,
        "transition_system": ts.to_dict(),
        "library": lib.to_dict(),
        "report": None if report is None else [{"pair": list(k), **_jsonable(v)} for k, v in sorted(report.items())],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def load_cache(path, key: Optional[str] = None):
    """``(ts, lib, report)`` from a cache file, or ``None`` if missing or stale."""
    p = Path(path)
    if not p.exists():
        return None
    doc = json.loads(p.read_text())
    if doc.get("version") != CACHE_VERSION or (key is not None and doc.get("key") != key):
        return None
    ts = TransitionSystem.from_dict(doc["transition_system"])
    lib = TubeLibrary.from_dict(doc["library"])
    report = {tuple(r.pop("pair")): r for r in (doc.get("report") or [])}
    return ts, lib, report


def _jsonable(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        elif isinstance(v, np.bool_):
            v = bool(v)
        elif isinstance(v, tuple):
            v = list(v)
        out[k] = v
    return out
