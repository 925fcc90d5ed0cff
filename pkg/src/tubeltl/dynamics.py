"""Discrete-time LTI plant ``x+ = A x + B u + w`` with polytopic U and W."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import TAU_GEO, Polytope, contains_point, support


class ConstraintViolation(ValueError):
    pass


@dataclass
class LtiModel:
    A: np.ndarray
    B: np.ndarray
    U: Polytope
    W: Polytope

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        n, m = self.B.shape
        if self.A.shape != (n, n):
            raise ValueError(f"A has shape {self.A.shape}, expected ({n}, {n})")
        if self.U.dim != m or self.W.dim != n:
            raise ValueError("U/W dimensions do not match B")
        if not np.all(self.U.b > 0):
            raise ValueError("U must contain the origin in its interior")
        # W = {0} is allowed for disturbance-free runs
        if not np.all(self.W.b >= 0):
            raise ValueError("W must contain the origin")
        self._acc_cache: dict = {}

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def step(self, x, u, w=None, tol: float = TAU_GEO) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        w = np.zeros(self.n) if w is None else np.asarray(w, dtype=float)
        if not contains_point(self.U, u, tol):
            raise ConstraintViolation(f"input {u} outside U")
        if not contains_point(self.W, w, tol):
            raise ConstraintViolation(f"disturbance {w} outside W")
        return self.A @ np.asarray(x, dtype=float) + self.B @ u + w

    def accumulated_disturbance_support(self, ell: int, d) -> float:
        """Support of ``W ⊕ A W ⊕ ... ⊕ A^(ell-1) W`` in direction ``d``."""
        if ell < 0:
            raise ValueError("ell must be nonnegative")
        d = np.asarray(d, dtype=float)
        key = d.tobytes()
        sums = self._acc_cache.get(key)
        if sums is None:
            sums = [0.0]
            self._acc_cache[key] = sums
        while len(sums) <= ell:
            j = len(sums) - 1
            dj = np.linalg.matrix_power(self.A.T, j) @ d
            sums.append(sums[-1] + support(self.W, dj))
        return sums[ell]


def accumulated_disturbance_support(model: LtiModel, ell: int, d) -> float:
    return model.accumulated_disturbance_support(ell, d)


def _expm_taylor(M: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    # scaling and squaring around a truncated Taylor series
    norm = np.linalg.norm(M, 1)
    s = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0.5 else 0
    X = M / 2.0**s
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, 60):
        term = term @ X / k
        out = out + term
        if np.linalg.norm(term, 1) < tol * max(1.0, np.linalg.norm(out, 1)):
            break
    for _ in range(s):
        out = out @ out
    return out


def discretize_zoh(Ac, Bc, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold discretization with sampling period ``h``."""
    if h <= 0:
        raise ValueError("sampling period must be positive")
    Ac = np.atleast_2d(np.asarray(Ac, dtype=float))
    Bc = np.atleast_2d(np.asarray(Bc, dtype=float))
    n, m = Bc.shape
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = Ac * h
    aug[:n, n:] = Bc * h
    E = _expm_taylor(aug)
    return E[:n, :n], E[:n, n:]
