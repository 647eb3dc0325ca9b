"""Undirected agent network and its Laplacian operators.

Agents are numbered 1..m. Edges are stored once as unordered pairs, so
symmetry is structural rather than checked downstream. Self-mentions in
neighbor lists are discarded at construction: a self-loop contributes
nothing to the coupling term (x_i - x_j vanishes for j = i).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AsymmetricNeighbors, IndexOutOfRange


@dataclass(frozen=True)
class Graph:
    """Undirected graph on m agents with unit edge weights."""

    m: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.m < 1:
            raise IndexOutOfRange(f"agent count must be positive, got {self.m}")
        for i, j in self.edges:
            if not (1 <= i <= self.m and 1 <= j <= self.m):
                raise IndexOutOfRange(f"edge ({i},{j}) outside [1..{self.m}]")
            if i == j:
                raise ValueError(f"self-loop ({i},{i}) after normalization")

    def neighbors(self, i: int) -> set[int]:
        """Neighbor set of agent i (1-based), excluding i itself."""
        out = set()
        for a, b in self.edges:
            if a == i:
                out.add(b)
            elif b == i:
                out.add(a)
        return out

    def degree(self, i: int) -> int:
        return len(self.neighbors(i))


def from_neighbor_lists(lists) -> Graph:
    """Build a Graph from per-agent neighbor lists with 1-based indices.

    Accepts a sequence (entry k is agent k+1's list) or a mapping keyed by
    agent index. Self-mentions are stripped; after stripping, the lists must
    be symmetric (i lists j iff j lists i).
    """
    if isinstance(lists, dict):
        m = len(lists)
        ordered = []
        for i in range(1, m + 1):
            if i not in lists:
                raise IndexOutOfRange(f"missing neighbor list for agent {i}")
            ordered.append(lists[i])
        lists = ordered
    m = len(lists)
    cleaned = []
    for i, neigh in enumerate(lists, start=1):
        s = set(int(j) for j in neigh)
        s.discard(i)
        for j in s:
            if not (1 <= j <= m):
                raise IndexOutOfRange(f"agent {i} lists {j}, outside [1..{m}]")
        cleaned.append(s)
    for i in range(1, m + 1):
        for j in cleaned[i - 1]:
            if i not in cleaned[j - 1]:
                raise AsymmetricNeighbors(f"{j} in N_{i} but {i} not in N_{j}")
    edges = frozenset(
        (min(i, j), max(i, j)) for i in range(1, m + 1) for j in cleaned[i - 1]
    )
    return Graph(m=m, edges=edges)


def laplacian(g: Graph) -> np.ndarray:
    """Graph Laplacian L = D - A as a dense (m, m) float array."""
    L = np.zeros((g.m, g.m))
    for i, j in g.edges:
        L[i - 1, j - 1] = -1.0
        L[j - 1, i - 1] = -1.0
        L[i - 1, i - 1] += 1.0
        L[j - 1, j - 1] += 1.0
    return L


def is_connected(g: Graph) -> bool:
    """True iff the graph has a single component (single node counts)."""
    if g.m == 1:
        return True
    adj = {i: g.neighbors(i) for i in range(1, g.m + 1)}
    seen = {1}
    stack = [1]
    while stack:
        node = stack.pop()
        for nxt in adj[node]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == g.m


def kron_laplacian(L: np.ndarray, n: int) -> np.ndarray:
    """Per-coordinate lift of the Laplacian: L (x) I_n, shape (mn, mn)."""
    if n < 1:
        raise ValueError(f"state dimension must be >= 1, got {n}")
    return np.kron(L, np.eye(n))
