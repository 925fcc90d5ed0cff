"""Independent reference computations used by the test-suite.

Nothing here imports the code paths it is used to check.
"""
import itertools

import numpy as np


def lp_vertex_enumeration(c, A, b, tol=1e-9):
    """Maximize ``c @ x`` over ``A x <= b`` by enumerating basic solutions.

    Assumes the feasible set, if nonempty, is bounded. Returns ``None`` when no
    basic feasible solution exists.
    """
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    m, n = A.shape
    best = None
    for rows in itertools.combinations(range(m), n):
        sub = A[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-10:
            continue
        x = np.linalg.solve(sub, b[list(rows)])
        if np.all(A @ x <= b + tol * (1 + np.abs(b))):
            v = float(c @ x)
            if best is None or v > best:
                best = v
    return best


def box_interval_erode(lo, hi, wlo, whi):
    return np.asarray(lo) - np.asarray(wlo), np.asarray(hi) - np.asarray(whi)


def taylor_expm(M, terms=60):
    """exp(M) by a plain truncated power series (no scaling)."""
    M = np.asarray(M, float)
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, terms):
        term = term @ M / k
        out = out + term
    return out


def lasso_words(alphabet, max_prefix, max_cycle):
    for lp in range(max_prefix + 1):
        for prefix in itertools.product(alphabet, repeat=lp):
            for lc in range(1, max_cycle + 1):
                for cycle in itertools.product(alphabet, repeat=lc):
                    yield list(prefix), list(cycle)


def formulas_up_to_depth(depth, base, neg, conj, until):
    """All formulas built from ``base`` with at most ``depth`` nested operators."""
    layer = list(base)
    for _ in range(depth):
        nxt = list(layer)
        nxt += [neg(a) for a in layer]
        for a in layer:
            for b in layer:
                nxt.append(conj(a, b))
                nxt.append(until(a, b))
        layer = list(dict.fromkeys(nxt))
    return layer


def shortest_lasso(edges, init, satisfies, max_len):
    """Brute-force lasso ``(prefix, suffix)`` of a graph minimizing
    ``(|prefix| + |suffix|, |suffix|, sequence)``; ``satisfies(prefix, suffix)``
    decides acceptance. Returns ``None`` if none has length at most ``max_len``."""
    succ = {}
    for a, b in edges:
        succ.setdefault(a, []).append(b)
    for v in succ.values():
        v.sort()

    def walks(T):
        if T == 1:
            yield [init]
            return
        for w in walks(T - 1):
            for s in succ.get(w[-1], ()):
                yield w + [s]

    for T in range(2, max_len + 1):
        for c in range(1, T):
            for w in walks(T):
                pre, suf = w[:T - c], w[T - c:]
                if pre[-1] != suf[-1] or (suf[-1], suf[0]) not in edges:
                    continue
                if satisfies(pre, suf):
                    return pre, suf
    return None


def random_lp(rng):
    """Small bounded integer LP ``(c, A, b)`` for ``max c x s.t. A x <= b``."""
    n = int(rng.integers(1, 5))
    m = int(rng.integers(1, 9 - n)) if n < 8 else 0
    A = rng.integers(-5, 6, size=(m, n)).astype(float)
    b = rng.integers(-5, 6, size=m).astype(float)
    c = rng.integers(-5, 6, size=n).astype(float)
    # keep every instance bounded so the enumeration oracle is exact
    box = np.vstack([np.eye(n), -np.eye(n)])
    A_all = np.vstack([A, box])
    b_all = np.concatenate([b, np.full(2 * n, 10.0)])
    return c, A_all, b_all
