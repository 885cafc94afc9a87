"""Network topologies and the consensus linear system built from them.

Average consensus over a connected graph is encoded as the homogeneous
system A x = 0 with one row (e_i - e_j)/sqrt(2) per edge. Rows have unit
norm, A^T A equals half the graph Laplacian, and the solution set is the
span of the all-ones vector, so the consensus value is the mean of the
starting vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .seeding import DOMAIN_PLACEMENT, derive_rng

DEFAULT_RGG_RETRIES = 100

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


class GenerationError(RuntimeError):
    """Random topology generation exhausted its retry budget."""

    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts


def _is_connected(n: int, edges) -> bool:
    if n == 1:
        return True
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = bytearray(n)
    stack = [0]
    seen[0] = 1
    count = 1
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if not seen[w]:
                seen[w] = 1
                count += 1
                stack.append(w)
    return count == n


@dataclass(frozen=True)
class Graph:
    """Undirected connected graph with a canonical edge order.

    Edges are (i, j) pairs with i < j, sorted ascending; the position of an
    edge in `edges` is its row index in the incidence system and the index
    used by activation sampling.
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        edges = tuple((int(i), int(j)) for i, j in self.edges)
        object.__setattr__(self, "edges", edges)
        seen = set()
        for i, j in edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            if i == j:
                raise ValueError(f"self loop at node {i}")
            if i >= j:
                raise ValueError(f"edge ({i}, {j}) must be ordered i < j")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
        if list(edges) != sorted(edges):
            raise ValueError("edges must be sorted ascending")
        if not _is_connected(self.n, edges):
            raise ValueError("graph is not connected")
        # row index per edge; not a field, so equality/repr stay value-based
        object.__setattr__(self, "_rows", {e: r for r, e in enumerate(edges)})

    @property
    def m(self) -> int:
        return len(self.edges)

    def edge_row(self, edge) -> int:
        """Row index of an edge given in either orientation."""
        i, j = int(edge[0]), int(edge[1])
        if i > j:
            i, j = j, i
        row = self._rows.get((i, j))
        if row is None:
            raise ValueError(f"edge ({edge[0]}, {edge[1]}) is not in the graph")
        return row

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg


@dataclass(frozen=True)
class IncidenceSystem:
    """Normalized incidence system A x = b for average consensus (b = 0)."""

    graph: Graph
    a: np.ndarray          # m x n, row r = (e_i - e_j)/sqrt(2) for edge r
    b: np.ndarray          # m zeros
    laplacian: np.ndarray  # n x n graph Laplacian (degrees minus adjacency)


def make_cycle(n: int) -> Graph:
    """Ring of n nodes, n >= 3."""
    if n < 3:
        raise ValueError("cycle needs n >= 3")
    edges = sorted(tuple(sorted((i, (i + 1) % n))) for i in range(n))
    return Graph(n, tuple(edges))


def make_grid(side: int) -> Graph:
    """Two-dimensional side x side lattice with nearest-neighbour edges."""
    if side < 2:
        raise ValueError("grid needs side >= 2")
    edges = []
    for r in range(side):
        for c in range(side):
            node = r * side + c
            if c + 1 < side:
                edges.append((node, node + 1))
            if r + 1 < side:
                edges.append((node, node + side))
    return Graph(side * side, tuple(sorted(edges)))


def edges_within_radius(points: np.ndarray, radius: float) -> tuple[tuple[int, int], ...]:
    """Edges between all point pairs at Euclidean distance <= radius."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1)
    iu, ju = np.triu_indices(n, k=1)
    keep = d2[iu, ju] <= radius * radius
    return tuple((int(i), int(j)) for i, j in zip(iu[keep], ju[keep]))


def make_rgg(n: int, seed, retries: int = DEFAULT_RGG_RETRIES) -> Graph:
    """Connected random geometric graph on the unit square.

    n points are placed uniformly and joined when within radius
    sqrt(ln(n)/n). A disconnected draw is rejected and a fresh placement is
    sampled from the next derived stream; after `retries` failures a
    GenerationError carrying the attempt count is raised. The same (n, seed)
    always yields the same graph.
    """
    if n < 2:
        raise ValueError("random geometric graph needs n >= 2")
    radius = math.sqrt(math.log(n) / n)
    for attempt in range(retries):
        rng = derive_rng(seed, DOMAIN_PLACEMENT, attempt)
        points = rng.random((n, 2))
        edges = edges_within_radius(points, radius)
        if _is_connected(n, edges):
            return Graph(n, edges)
    raise GenerationError(
        f"no connected geometric graph for n={n} seed={seed} "
        f"after {retries} attempts", attempts=retries)


def build_system(graph: Graph) -> IncidenceSystem:
    """Assemble the normalized incidence system for `graph`."""
    if graph.m < 1:
        raise ValueError("system needs at least one edge")
    a = np.zeros((graph.m, graph.n))
    for row, (i, j) in enumerate(graph.edges):
        a[row, i] = _INV_SQRT2
        a[row, j] = -_INV_SQRT2
    lap = np.diag(graph.degrees().astype(float))
    for i, j in graph.edges:
        lap[i, j] -= 1.0
        lap[j, i] -= 1.0
    b = np.zeros(graph.m)
    for arr in (a, b, lap):
        arr.setflags(write=False)
    return IncidenceSystem(graph=graph, a=a, b=b, laplacian=lap)


def write_edge_list(graph: Graph, path) -> None:
    """Write `n m` then one ascending `i j` line per edge."""
    lines = [f"{graph.n} {graph.m}"]
    lines.extend(f"{i} {j}" for i, j in graph.edges)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_edge_list(path) -> Graph:
    """Parse the edge-list format back into a validated Graph."""
    with open(path, "r", encoding="ascii") as fh:
        raw = [ln.strip() for ln in fh]
    lines = [ln for ln in raw if ln]
    if not lines:
        raise ValueError(f"{path}: empty edge-list file")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"{path}: header must be 'n m'")
    n, m = int(head[0]), int(head[1])
    if len(lines) - 1 != m:
        raise ValueError(f"{path}: header promises {m} edges, found {len(lines) - 1}")
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"{path}: bad edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return Graph(n, tuple(edges))
