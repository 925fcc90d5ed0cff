"""LTL without next: parsing, lasso semantics, tableau Büchi translation and planning.

Letters are single propositions: the word read along a run of the transition
system is the sequence of region indices it visits. A negated atom ``!p`` thus
means "the current letter is not p".
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Union


class LtlSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class Unrealizable(Exception):
    pass


# ---------------------------------------------------------------- formulas

@dataclass(frozen=True)
class TrueF:
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class FalseF:
    def __str__(self):
        return "false"


@dataclass(frozen=True)
class Atom:
    index: int

    def __str__(self):
        return f"p{self.index}"


@dataclass(frozen=True)
class Not:
    arg: "Formula"

    def __str__(self):
        return f"!{self.arg}"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return f"({self.left} | {self.right})"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return f"({self.left} U {self.right})"


@dataclass(frozen=True)
class Release:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return f"({self.left} R {self.right})"


Formula = Union[TrueF, FalseF, Atom, Not, And, Or, Until, Release]
TRUE = TrueF()
FALSE = FalseF()


def eventually(f: Formula) -> Formula:
    return Until(TRUE, f)


def always(f: Formula) -> Formula:
    return Not(Until(TRUE, Not(f)))


def lor(a: Formula, b: Formula) -> Formula:
    return Not(And(Not(a), Not(b)))


def implies(a: Formula, b: Formula) -> Formula:
    return lor(Not(a), b)


def atoms(f: Formula) -> set[int]:
    if isinstance(f, Atom):
        return {f.index}
    if isinstance(f, Not):
        return atoms(f.arg)
    if isinstance(f, (And, Or, Until, Release)):
        return atoms(f.left) | atoms(f.right)
    return set()


def depth(f: Formula) -> int:
    if isinstance(f, Not):
        return 1 + depth(f.arg)
    if isinstance(f, (And, Or, Until, Release)):
        return 1 + max(depth(f.left), depth(f.right))
    return 0


# ------------------------------------------------------------------ parser

_TOKEN = re.compile(r"\s*(->|[()!&|]|true\b|p\d+\b|[FGU](?![A-Za-z0-9_]))")


def _tokenize(text: str) -> list[tuple[str, int]]:
    out = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise LtlSyntaxError(f"unexpected character {text[start]!r}", start)
        out.append((m.group(1), m.start(1)))
        pos = m.end()
    out.append(("<end>", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, n_props: Optional[int]):
        self.toks = _tokenize(text)
        self.i = 0
        self.n_props = n_props

    def peek(self) -> str:
        return self.toks[self.i][0]

    def take(self) -> tuple[str, int]:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, s: str):
        tok, pos = self.take()
        if tok != s:
            raise LtlSyntaxError(f"expected {s!r}, found {tok!r}", pos)

    def implication(self) -> Formula:
        left = self.disjunction()
        if self.peek() == "->":
            self.take()
            return implies(left, self.implication())
        return left

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.peek() == "|":
            self.take()
            f = lor(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.until()
        while self.peek() == "&":
            self.take()
            f = And(f, self.until())
        return f

    def until(self) -> Formula:
        left = self.unary()
        if self.peek() == "U":
            self.take()
            return Until(left, self.until())
        return left

    def unary(self) -> Formula:
        tok = self.peek()
        if tok == "!":
            self.take()
            return Not(self.unary())
        if tok == "F":
            self.take()
            return eventually(self.unary())
        if tok == "G":
            self.take()
            return always(self.unary())
        return self.primary()

    def primary(self) -> Formula:
        tok, pos = self.take()
        if tok == "true":
            return TRUE
        if tok == "(":
            f = self.implication()
            self.expect(")")
            return f
        if tok.startswith("p") and tok[1:].isdigit():
            idx = int(tok[1:])
            if idx == 0:
                raise LtlSyntaxError("p0 is the dummy symbol and cannot appear in a formula", pos)
            if self.n_props is not None and idx > self.n_props:
                raise LtlSyntaxError(f"unknown atom {tok}", pos)
            return Atom(idx)
        raise LtlSyntaxError(f"unexpected token {tok!r}", pos)


def parse(text: str, n_props: Optional[int] = None) -> Formula:
    """Parse ``text`` into a formula over ``true``, atoms, ``!``, ``&`` and ``U``.

    ``|``, ``->``, ``F`` and ``G`` are desugared. Precedence from tightest:
    unary operators, ``U`` (right associative), ``&``, ``|``, ``->``.
    """
    p = _Parser(text, n_props)
    f = p.implication()
    tok, pos = p.take()
    if tok != "<end>":
        raise LtlSyntaxError(f"unexpected token {tok!r}", pos)
    return f


# --------------------------------------------------------------- semantics

def word_satisfies(f: Formula, prefix, cycle) -> bool:
    """Exact satisfaction on the ultimately periodic word ``prefix cycle^ω``."""
    prefix, cycle = list(prefix), list(cycle)
    if not cycle:
        raise ValueError("cycle must be nonempty")
    word = prefix + cycle
    N = len(word)
    succ = list(range(1, N)) + [len(prefix)]
    memo: dict = {}

    def ev(g) -> list[bool]:
        if g in memo:
            return memo[g]
        if isinstance(g, TrueF):
            r = [True] * N
        elif isinstance(g, FalseF):
            r = [False] * N
        elif isinstance(g, Atom):
            r = [a == g.index for a in word]
        elif isinstance(g, Not):
            r = [not v for v in ev(g.arg)]
        elif isinstance(g, And):
            a, b = ev(g.left), ev(g.right)
            r = [x and y for x, y in zip(a, b)]
        elif isinstance(g, Or):
            a, b = ev(g.left), ev(g.right)
            r = [x or y for x, y in zip(a, b)]
        elif isinstance(g, Until):
            a, b = ev(g.left), ev(g.right)
            r = [False] * N  # least fixpoint
            changed = True
            while changed:
                changed = False
                for k in range(N - 1, -1, -1):
                    v = b[k] or (a[k] and r[succ[k]])
                    if v != r[k]:
                        r[k] = v
                        changed = True
        elif isinstance(g, Release):
            a, b = ev(g.left), ev(g.right)
            r = [True] * N  # greatest fixpoint
            changed = True
            while changed:
                changed = False
                for k in range(N - 1, -1, -1):
                    v = b[k] and (a[k] or r[succ[k]])
                    if v != r[k]:
                        r[k] = v
                        changed = True
        else:
            raise TypeError(f"not a formula: {g!r}")
        memo[g] = r
        return r

    return ev(f)[0]


def nnf(f: Formula) -> Formula:
    """Negation normal form over true/false, literals, &, |, U and R."""
    if isinstance(f, (TrueF, FalseF, Atom)):
        return f
    if isinstance(f, And):
        return And(nnf(f.left), nnf(f.right))
    if isinstance(f, Or):
        return Or(nnf(f.left), nnf(f.right))
    if isinstance(f, Until):
        return Until(nnf(f.left), nnf(f.right))
    if isinstance(f, Release):
        return Release(nnf(f.left), nnf(f.right))
    g = f.arg
    if isinstance(g, TrueF):
        return FALSE
    if isinstance(g, FalseF):
        return TRUE
    if isinstance(g, Atom):
        return f
    if isinstance(g, Not):
        return nnf(g.arg)
    if isinstance(g, And):
        return Or(nnf(Not(g.left)), nnf(Not(g.right)))
    if isinstance(g, Or):
        return And(nnf(Not(g.left)), nnf(Not(g.right)))
    if isinstance(g, Until):
        return Release(nnf(Not(g.left)), nnf(Not(g.right)))
    if isinstance(g, Release):
        return Until(nnf(Not(g.left)), nnf(Not(g.right)))
    raise TypeError(f"not a formula: {g!r}")


# ------------------------------------------------------------ Büchi automata

@dataclass
class BuchiAutomaton:
    """States ``0..n-1``; reading a letter on edge ``q -> q'`` requires the
    letter to be in the edge label."""

    alphabet: tuple
    n_states: int
    initial: frozenset
    accepting: frozenset
    edges: dict = field(default_factory=dict)  # q -> list[(frozenset letters, q')]

    def step(self, q: int, letter: int) -> list[int]:
        return [t for lab, t in self.edges.get(q, ()) if letter in lab]

    def accepts(self, prefix, cycle) -> bool:
        """Whether the lasso word ``prefix cycle^ω`` is accepted."""
        word = list(prefix) + list(cycle)
        N = len(word)
        if not cycle:
            raise ValueError("cycle must be nonempty")
        succ = list(range(1, N)) + [len(prefix)]
        # product node (q, k): in q, about to read position k
        start = [(q, 0) for q in self.initial]
        graph: dict = {}
        seen = set(start)
        todo = list(start)
        while todo:
            node = todo.pop()
            q, k = node
            nxt = [(t, succ[k]) for t in self.step(q, word[k])]
            graph[node] = nxt
            for m in nxt:
                if m not in seen:
                    seen.add(m)
                    todo.append(m)
        for node in seen:
            if node[0] in self.accepting and _on_cycle(graph, node):
                return True
        return False


def _on_cycle(graph: dict, node) -> bool:
    seen = set()
    todo = list(graph.get(node, ()))
    while todo:
        m = todo.pop()
        if m == node:
            return True
        if m in seen:
            continue
        seen.add(m)
        todo.extend(graph.get(m, ()))
    return False


def _letters(literals, alphabet) -> frozenset:
    ok = set(alphabet)
    for lit in literals:
        if isinstance(lit, Atom):
            ok &= {lit.index}
        elif isinstance(lit, Not):
            ok.discard(lit.arg.index)
        elif isinstance(lit, FalseF):
            ok = set()
    return frozenset(ok)


def _tableau(f: Formula, alphabet):
    """Node expansion of a formula in NNF; returns a list of (incoming, old, next)."""
    INIT = -1
    nodes: list[dict] = []

    def find(old, nxt):
        for idx, nd in enumerate(nodes):
            if nd["old"] == old and nd["next"] == nxt:
                return idx
        return None

    stack = [{"incoming": {INIT}, "new": [f], "old": frozenset(), "next": frozenset()}]
    while stack:
        node = stack.pop()
        if not node["new"]:
            idx = find(node["old"], node["next"])
            if idx is not None:
                nodes[idx]["incoming"] |= node["incoming"]
                continue
            nodes.append({"incoming": set(node["incoming"]), "old": node["old"], "next": node["next"]})
            stack.append({"incoming": {len(nodes) - 1}, "new": list(node["next"]),
                          "old": frozenset(), "next": frozenset()})
            continue
        new = list(node["new"])
        g = new.pop()
        old = node["old"]
        if g in old:
            stack.append({**node, "new": new})
            continue
        if isinstance(g, (TrueF, FalseF, Atom, Not)):
            if isinstance(g, FalseF):
                continue
            lits = old | {g}
            if not _letters([x for x in lits if isinstance(x, (Atom, Not, FalseF))], alphabet):
                continue
            stack.append({**node, "new": new, "old": lits})
        elif isinstance(g, And):
            add = [x for x in (g.left, g.right) if x not in old]
            stack.append({**node, "new": new + add, "old": old | {g}})
        elif isinstance(g, Or):
            for part in (g.right, g.left):
                stack.append({**node, "new": new + ([part] if part not in old else []), "old": old | {g}})
        elif isinstance(g, Until):
            stack.append({**node, "new": new + [g.right], "old": old | {g}})
            stack.append({**node, "new": new + [g.left], "old": old | {g}, "next": node["next"] | {g}})
        elif isinstance(g, Release):
            stack.append({**node, "new": new + [g.left, g.right], "old": old | {g}})
            stack.append({**node, "new": new + [g.right], "old": old | {g}, "next": node["next"] | {g}})
        else:
            raise TypeError(f"not a formula: {g!r}")
    return nodes, INIT


def _subformulas(f: Formula) -> list[Formula]:
    out, todo = [], [f]
    while todo:
        g = todo.pop()
        if g in out:
            continue
        out.append(g)
        if isinstance(g, Not):
            todo.append(g.arg)
        elif isinstance(g, (And, Or, Until, Release)):
            todo += [g.left, g.right]
    return out


def to_buchi(f: Formula, alphabet) -> BuchiAutomaton:
    """Tableau construction followed by counter degeneralization."""
    alphabet = tuple(sorted(alphabet))
    g = nnf(f)
    nodes, INIT = _tableau(g, alphabet)
    untils = sorted((h for h in _subformulas(g) if isinstance(h, Until)), key=str)
    K = max(1, len(untils))
    labels = [_letters([x for x in nd["old"] if isinstance(x, (Atom, Not, FalseF))], alphabet) for nd in nodes]

    def in_set(idx, c):
        if not untils:
            return True
        u = untils[c]
        return u not in nodes[idx]["old"] or u.right in nodes[idx]["old"]

    # degeneralized states: 0 is the initial pseudo-state, (idx, c) -> 1 + idx*K + c
    def sid(idx, c):
        return 1 + idx * K + c

    edges: dict = {}
    for tgt, nd in enumerate(nodes):
        if not labels[tgt]:
            continue
        for src in nd["incoming"]:
            if src == INIT:
                edges.setdefault(0, []).append((labels[tgt], sid(tgt, 0)))
                continue
            for c in range(K):
                c2 = (c + 1) % K if in_set(src, c) else c
                edges.setdefault(sid(src, c), []).append((labels[tgt], sid(tgt, c2)))
    accepting = {sid(idx, 0) for idx in range(len(nodes)) if in_set(idx, 0)}
    # prune to states reachable from the initial pseudo-state
    reach, todo = {0}, [0]
    while todo:
        q = todo.pop()
        for _, t in edges.get(q, ()):
            if t not in reach:
                reach.add(t)
                todo.append(t)
    order = sorted(reach)
    ren = {q: k for k, q in enumerate(order)}
    new_edges = {}
    for q in order:
        lst = sorted(((lab, ren[t]) for lab, t in edges.get(q, ()) if t in reach),
                     key=lambda e: (e[1], sorted(e[0])))
        if lst:
            new_edges[ren[q]] = lst
    b = BuchiAutomaton(alphabet, len(order), frozenset({0}),
                       frozenset(ren[q] for q in accepting if q in reach), new_edges)
    return _quotient(b)


def _quotient(b: BuchiAutomaton) -> BuchiAutomaton:
    """Merge bisimilar states (same acceptance, same letters into the same classes)."""
    cls = [int(q in b.accepting) for q in range(b.n_states)]
    while True:
        sig = []
        for q in range(b.n_states):
            per_letter = tuple(frozenset(cls[t] for lab, t in b.edges.get(q, ()) if a in lab) for a in b.alphabet)
            sig.append((cls[q], per_letter))
        ids: dict = {}
        new = [ids.setdefault(sg, len(ids)) for sg in sig]
        if len(ids) == len(set(cls)):
            break
        cls = new
    # renumber classes by their smallest member so state 0 stays initial
    first: dict = {}
    for q in range(b.n_states):
        first.setdefault(cls[q], len(first))
    rep = [first[c] for c in cls]
    merged: dict = {}
    for q in range(b.n_states):
        for lab, t in b.edges.get(q, ()):
            key = (rep[q], rep[t])
            merged[key] = merged.get(key, frozenset()) | lab
    edges: dict = {}
    for (q, t), lab in sorted(merged.items(), key=lambda e: e[0]):
        edges.setdefault(q, []).append((lab, t))
    return BuchiAutomaton(b.alphabet, len(first), frozenset(rep[q] for q in b.initial),
                          frozenset(rep[q] for q in b.accepting), edges)


# ---------------------------------------------------------------- planning

EXACT_BUDGET = 200_000

@dataclass
class Plan:
    """Run ``prefix suffix suffix ...``; ``prefix[-1] == suffix[-1]``."""

    prefix: list
    suffix: list

    def __post_init__(self):
        self.prefix = [int(s) for s in self.prefix]
        self.suffix = [int(s) for s in self.suffix]
        if not self.prefix or not self.suffix:
            raise ValueError("prefix and suffix must be nonempty")
        if self.prefix[-1] != self.suffix[-1]:
            raise ValueError("prefix and suffix must end in the same state")

    @property
    def constant_suffix(self) -> bool:
        return len(self.suffix) == 1

    def states(self):
        """Infinite iterator over the planned state sequence."""
        yield from self.prefix
        while True:
            yield from self.suffix

    def lasso(self) -> tuple[list, list]:
        """Word as (finite part, period) for lasso semantics."""
        return list(self.prefix), list(self.suffix)

    def collapsed_letters(self, count: int) -> list:
        """Up to ``count`` letters of the stutter-free trace of the plan.

        An eventually constant plan yields its finite collapsed trace.
        """
        constant = len(set(self.suffix)) == 1
        out = []
        for k, s in enumerate(self.states()):
            if len(out) >= count or (constant and k >= len(self.prefix) + 1):
                break
            if not out or out[-1] != s:
                out.append(s)
        return out

    def to_dict(self) -> dict:
        return {"prefix": self.prefix, "suffix": self.suffix}

    @classmethod
    def from_dict(cls, d) -> "Plan":
        return cls(d["prefix"], d["suffix"])


def product(ts, buchi: BuchiAutomaton):
    """Reachable part of the product; nodes are (ts state, automaton state)."""
    init = sorted((ts.init, q2) for q in buchi.initial for q2 in buchi.step(q, ts.label(ts.init)))
    graph: dict = {}
    todo = list(init)
    seen = set(init)
    while todo:
        node = todo.pop()
        s, q = node
        nxt = set()
        for s2 in ts.successors(s):
            for q2 in buchi.step(q, ts.label(s2)):
                nxt.add((s2, q2))
        graph[node] = sorted(nxt)
        for m in graph[node]:
            if m not in seen:
                seen.add(m)
                todo.append(m)
    return init, graph


def _bfs_dist(graph: dict, sources) -> dict:
    dist = {s: 0 for s in sources}
    dq = deque(sorted(sources))
    while dq:
        u = dq.popleft()
        for v in graph.get(u, ()):
            if v not in dist:
                dist[v] = dist[u] + 1
                dq.append(v)
    return dist


def _lex_path(graph: dict, rev_dist: dict, start, avoid_empty: bool = False) -> list:
    """Lexicographically least shortest path from ``start`` to the BFS target of
    ``rev_dist``; with ``avoid_empty`` the path must have at least one edge."""
    path = [start]
    node = start
    d = rev_dist[start]
    if avoid_empty and d == 0:
        raise ValueError("use _lex_cycle for closed walks")
    while d > 0:
        node = min(v for v in graph[node] if rev_dist.get(v) == d - 1)
        path.append(node)
        d -= 1
    return path


def _reverse(graph: dict) -> dict:
    rev: dict = {}
    for u, vs in graph.items():
        for v in vs:
            rev.setdefault(v, []).append(u)
    return rev


def plan(ts, f: Formula) -> Plan:
    """Accepting lasso of the product minimizing ``|prefix| + |suffix|``.

    Ties go to the shorter suffix, then to the lexicographically smaller state
    sequence. Stutters are then collapsed so that a repeated state only occurs
    as a terminal self-loop.
    """
    buchi = to_buchi(f, ts.states)
    init, graph = product(ts, buchi)
    if not init:
        raise Unrealizable(f"no initial product state for {f}")
    rev = _reverse(graph)
    d_init = _bfs_dist(graph, init)
    acc = sorted(n for n in graph if n[1] in buchi.accepting)
    best = None
    for P in acc:
        to_P = _bfs_dist(rev, [P])  # distance from any node to P
        from_P = _bfs_dist(graph, [P])
        # shortest cycle through P: P -> v -> ... -> P
        back = [to_P[v] + 1 for v in graph[P] if v in to_P]
        if not back:
            continue
        loop_P = min(back)
        for X in sorted(d_init):
            if X not in to_P or X not in from_P:
                continue
            cyc = loop_P if X == P else from_P[X] + to_P[X]
            if X != P and cyc < 1:
                continue
            key = (d_init[X] + 1 + cyc, cyc)
            if best is None or key < best[0]:
                best = (key, [(X, P)])
            elif key == best[0]:
                best[1].append((X, P))
    if best is None:
        raise Unrealizable(f"no accepting lasso for {f}")
    candidates = []
    for X, P in best[1]:
        to_X = _bfs_dist(rev, [X])
        # lexicographically least shortest path from some initial node to X
        starts = [s for s in init if s in to_X and to_X[s] == d_init[X]]
        pre = min(_lex_path(graph, to_X, s) for s in starts)
        to_P = _bfs_dist(rev, [P])
        if X == P:
            first = min(v for v in graph[P] if v in to_P and to_P[v] + 1 == best[0][1])
            suf = _lex_path(graph, to_P, first)
        else:
            a = _lex_path(graph, to_P, X)[1:]
            b = _lex_path(graph, to_X, P)[1:]
            suf = a + b
        candidates.append(([n[0] for n in pre] + [n[0] for n in suf], [n[0] for n in pre], [n[0] for n in suf]))
    seq, pre, suf = min(candidates)
    better = _exact_lasso(ts, buchi, (len(seq), len(suf), seq))
    if better is not None:
        pre, suf = better
    return _collapse(pre, suf)


def _exact_lasso(ts, buchi: BuchiAutomaton, bound, budget: int = EXACT_BUDGET):
    """Transition-system lasso ordered strictly before ``bound`` in the plan order.

    A lasso that is shortest in the product can be longer than the shortest
    accepted lasso of the transition system, because the automaton may need
    to revisit a state in a different automaton state. Runs of length below
    the bound are enumerated in plan order, up to ``budget`` candidates.
    """
    T_max, c_max, seq_max = bound
    count = 0
    for T in range(2, T_max + 1):
        for c in range(1, T):
            if (T, c) > (T_max, c_max):
                return None
            p = T - c
            for seq in _walks(ts, T):
                count += 1
                if count > budget:
                    return None
                if (T, c, seq) >= (T_max, c_max, seq_max):
                    break
                pre, suf = seq[:p], seq[p:]
                if pre[-1] != suf[-1] or not ts.has_edge(suf[-1], suf[0]):
                    continue
                if buchi.accepts(pre, suf):
                    return pre, suf
    return None


def _walks(ts, T: int):
    """Walks of ``T`` states from the initial state, in lexicographic order."""
    def rec(path):
        if len(path) == T:
            yield list(path)
            return
        for s in ts.successors(path[-1]):
            path.append(s)
            yield from rec(path)
            path.pop()

    yield from rec([ts.init])


def _collapse(prefix: list, suffix: list) -> Plan:
    pre = [prefix[0]]
    for s in prefix[1:]:
        if s != pre[-1]:
            pre.append(s)
    X = prefix[-1]
    walk = [X]
    for s in suffix:
        if s != walk[-1]:
            walk.append(s)
    if len(walk) == 1:
        return Plan(pre, [X])
    return Plan(pre, walk[1:])


def plan_word_ok(f: Formula, p: Plan) -> bool:
    prefix, cycle = p.lasso()
    return word_satisfies(f, prefix, cycle)
