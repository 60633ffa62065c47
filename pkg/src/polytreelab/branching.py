"""Optimal branchings over discrete variables.

A branching (each node has at most one parent, skeleton acyclic) scores

    sum_i H(X_i | parent_i) = sum_i H(X_i) - sum_edges I(parent; child)

so minimizing the score is the same as picking a maximum-weight forest of
the pairwise mutual-information graph; the orientation of each tree is
irrelevant to the score. ``learn_optimal_branching`` does exactly that with
a deterministic Kruskal sweep; ``brute_force_branching`` enumerates every
branching outright and is kept as the independent oracle for tests.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .distribution import Distribution, conditional_entropy, entropy, mutual_information
from .errors import CapExceededError, ValidationError
from .structure import Structure, UnionFind

# Edge weights at or below this are treated as exactly zero and never picked;
# they cannot change the score by more than (n - 1) * OMEGA.
OMEGA = 1e-12

BRUTE_FORCE_MAX_NODES = 8


@dataclass(frozen=True)
class WeightedEdge:
    """Undirected pair ``a < b`` weighted by mutual information in bits."""

    a: int
    b: int
    weight: float

    def __post_init__(self) -> None:
        if not 0 <= self.a < self.b:
            raise ValidationError(f"edge endpoints must satisfy 0 <= a < b, got ({self.a}, {self.b})")
        if self.weight < 0.0:
            raise ValidationError(f"edge weight must be >= 0, got {self.weight}")


def mutual_information_edges(dist: Distribution) -> list[WeightedEdge]:
    """All pairwise mutual informations, one edge per unordered pair."""
    return [
        WeightedEdge(a, b, mutual_information(dist, a, b))
        for a, b in itertools.combinations(range(dist.n), 2)
    ]


def _orient_forest(n: int, chosen: list[tuple[int, int]]) -> Structure:
    # Orient every tree away from its minimum-index node, which makes the
    # returned branching a deterministic function of the chosen edge set.
    adjacency: list[list[int]] = [[] for _ in range(n)]
    for a, b in chosen:
        adjacency[a].append(b)
        adjacency[b].append(a)
    uf = UnionFind(n)
    for a, b in chosen:
        uf.union(a, b)
    roots = {}
    for v in range(n):
        r = uf.find(v)
        roots[r] = min(roots.get(r, v), v)
    parents: list[tuple[int, ...]] = [()] * n
    seen = [False] * n
    for root in sorted(set(roots.values())):
        stack = [root]
        seen[root] = True
        while stack:
            u = stack.pop()
            for w in adjacency[u]:
                if not seen[w]:
                    seen[w] = True
                    parents[w] = (u,)
                    stack.append(w)
    return Structure(n, parents)


def learn_optimal_branching(dist: Distribution) -> Structure:
    """A branching minimizing the score, learned in O(n^2 log n).

    Deterministic: candidate edges are sorted by (weight descending, then
    (a, b) ascending), edges with weight <= ``OMEGA`` are dropped, and each
    resulting tree is rooted at its minimum node index. With all-independent
    variables this returns the empty structure.
    """
    edges = [e for e in mutual_information_edges(dist) if e.weight > OMEGA]
    edges.sort(key=lambda e: (-e.weight, e.a, e.b))
    uf = UnionFind(dist.n)
    chosen: list[tuple[int, int]] = []
    for e in edges:
        if uf.union(e.a, e.b):
            chosen.append((e.a, e.b))
    return _orient_forest(dist.n, chosen)


def brute_force_branching(dist: Distribution) -> Structure:
    """Exhaustive oracle: try every parent assignment with at most one parent
    per node and acyclic skeleton, return a minimizer of the score.

    Ties are broken toward the lexicographically smallest parent-set
    encoding, so the result is deterministic. Capped at
    ``BRUTE_FORCE_MAX_NODES`` nodes (the assignment space is n^n).
    """
    n = dist.n
    if n > BRUTE_FORCE_MAX_NODES:
        raise CapExceededError(
            f"brute-force branching enumerates n^n assignments; n={n} exceeds "
            f"the cap of {BRUTE_FORCE_MAX_NODES}",
            constraint="brute_force_branching_max_nodes",
        )
    h_alone = [entropy(dist, (i,)) for i in range(n)]
    h_given = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j:
                h_given[i][j] = conditional_entropy(dist, i, (j,))

    best_score = float("inf")
    best_key: tuple[tuple[int, ...], ...] | None = None
    best_choice: tuple[int, ...] | None = None
    # Parent choice per node: -1 for none, else the parent index.
    options = [[-1] + [j for j in range(n) if j != i] for i in range(n)]
    for choice in itertools.product(*options):
        uf = UnionFind(n)
        ok = True
        for child, parent in enumerate(choice):
            if parent >= 0 and not uf.union(parent, child):
                ok = False
                break
        if not ok:
            continue
        total = 0.0
        for child, parent in enumerate(choice):
            total += h_alone[child] if parent < 0 else h_given[child][parent]
        key = tuple(() if p < 0 else (p,) for p in choice)
        if total < best_score or (total == best_score and best_key is not None and key < best_key):
            best_score = total
            best_key = key
            best_choice = choice
    assert best_choice is not None
    return Structure(n, [() if p < 0 else (p,) for p in best_choice])
