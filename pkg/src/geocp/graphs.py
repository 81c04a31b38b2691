"""Immutable graphs, deterministic constructions and structural queries."""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .rng import mix64


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph with dense integer vertex ids 0..n-1.

    `adjacency[v]` is the sorted tuple of neighbors of v.  Instances are
    immutable after construction and safe to share between workers.
    """

    adjacency: tuple[tuple[int, ...], ...]
    vertex_count: int = field(init=False)
    edge_count: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "vertex_count", len(self.adjacency))
        degree_sum = sum(len(nbrs) for nbrs in self.adjacency)
        if degree_sum % 2 != 0:
            raise ValueError("adjacency is not symmetric: odd degree sum")
        object.__setattr__(self, "edge_count", degree_sum // 2)

    @classmethod
    def from_edges(cls, vertex_count: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        if vertex_count < 0:
            raise ValueError("vertex_count must be non-negative")
        nbrs: list[set[int]] = [set() for _ in range(vertex_count)]
        for a, b in edges:
            if not (0 <= a < vertex_count and 0 <= b < vertex_count):
                raise ValueError(f"edge ({a},{b}) out of range for {vertex_count} vertices")
            if a == b:
                raise ValueError(f"self-loop at vertex {a}")
            nbrs[a].add(b)
            nbrs[b].add(a)
        return cls(tuple(tuple(sorted(s)) for s in nbrs))

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def edges(self) -> list[tuple[int, int]]:
        """All edges as (a, b) with a < b, ascending."""
        return [(a, b) for a in range(self.vertex_count) for b in self.adjacency[a] if a < b]

    def validate(self) -> None:
        """Check symmetry, absence of self-loops and duplicates; raise on failure."""
        for v, nbrs in enumerate(self.adjacency):
            if len(set(nbrs)) != len(nbrs):
                raise ValueError(f"duplicate neighbor at vertex {v}")
            for w in nbrs:
                if w == v:
                    raise ValueError(f"self-loop at vertex {v}")
                if v not in self.adjacency[w]:
                    raise ValueError(f"asymmetric edge ({v},{w})")

    def fingerprint(self) -> str:
        """Stable short digest of the edge list (used to tag samples)."""
        return hashlib.sha256(to_edge_list_text(self).encode()).hexdigest()[:12]


def build_complete(m: int) -> Graph:
    """Complete graph on m >= 1 vertices."""
    if m < 1:
        raise ValueError("complete graph needs at least one vertex")
    return Graph(tuple(tuple(w for w in range(m) if w != v) for v in range(m)))


@dataclass(frozen=True)
class CaterpillarSpec:
    """Spine path of `spine_length`+1 vertices, each with its own clique.

    Convention: the spine vertex is adjacent to every vertex of its clique
    but is not a member of it, so the graph has
    (spine_length+1)*(clique_size+1) vertices.
    """

    spine_length: int
    clique_size: int

    def __post_init__(self):
        if self.spine_length < 0:
            raise ValueError("spine_length must be non-negative")
        if self.clique_size < 1:
            raise ValueError("clique_size must be positive")

    @property
    def vertex_count(self) -> int:
        return (self.spine_length + 1) * (self.clique_size + 1)

    @property
    def edge_count(self) -> int:
        m = self.clique_size
        per_block = m + m * (m - 1) // 2
        return self.spine_length + (self.spine_length + 1) * per_block


@dataclass(frozen=True)
class CaterpillarGraph:
    """Caterpillar graph plus the side table of spine/clique labels."""

    graph: Graph
    spine: tuple[int, ...]
    cliques: tuple[tuple[int, ...], ...]

    @property
    def spine_length(self) -> int:
        return len(self.spine) - 1

    @property
    def clique_size(self) -> int:
        return len(self.cliques[0])


def build_caterpillar(spec: CaterpillarSpec) -> CaterpillarGraph:
    """Build the caterpillar; spine vertices are 0..L, cliques follow."""
    ell, m = spec.spine_length, spec.clique_size
    edges: list[tuple[int, int]] = [(i, i + 1) for i in range(ell)]
    spine = tuple(range(ell + 1))
    cliques = []
    base = ell + 1
    for i in range(ell + 1):
        block = tuple(range(base + i * m, base + (i + 1) * m))
        cliques.append(block)
        edges.extend((i, w) for w in block)
        edges.extend((a, b) for ai, a in enumerate(block) for b in block[ai + 1:])
    g = Graph.from_edges(spec.vertex_count, edges)
    return CaterpillarGraph(g, spine, tuple(cliques))


def connected_components(g: Graph) -> list[set[int]]:
    """Vertex sets of the connected components, largest first.

    Ties broken by smallest contained vertex id, so output is deterministic.
    """
    seen = [False] * g.vertex_count
    comps: list[set[int]] = []
    for s in range(g.vertex_count):
        if seen[s]:
            continue
        comp = {s}
        seen[s] = True
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for w in g.adjacency[v]:
                if not seen[w]:
                    seen[w] = True
                    comp.add(w)
                    queue.append(w)
        comps.append(comp)
    comps.sort(key=lambda c: (-len(c), min(c)))
    return comps


def _bfs_depths(g: Graph, source: int, allowed: set[int]) -> dict[int, int]:
    depth = {source: 0}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in g.adjacency[v]:
            if w in allowed and w not in depth:
                depth[w] = depth[v] + 1
                queue.append(w)
    return depth


def diameter(g: Graph, component: Iterable[int], exact: bool = True) -> int:
    """Diameter of the subgraph induced by `component`.

    Exact mode runs a BFS from every vertex; exact=False returns the
    double-sweep lower bound.  Disconnected inputs are rejected.
    """
    comp = set(component)
    if not comp:
        raise ValueError("component must be non-empty")
    start = min(comp)
    depths = _bfs_depths(g, start, comp)
    if set(depths) != comp:
        raise ValueError("component is not connected")
    far = max(depths, key=lambda v: (depths[v], v))
    second = _bfs_depths(g, far, comp)
    lower = max(second.values())
    if not exact:
        return lower
    best = lower
    for v in comp:
        best = max(best, max(_bfs_depths(g, v, comp).values()))
    return best


def random_connected_graph(vertex_count: int, extra_edges: int, seed: int) -> Graph:
    """Random connected graph: uniform labeled tree plus extra random edges."""
    if vertex_count < 1:
        raise ValueError("need at least one vertex")
    if vertex_count == 1:
        return Graph.from_edges(1, [])
    n = vertex_count
    edges: set[tuple[int, int]] = set()
    if n == 2:
        edges.add((0, 1))
    else:
        # Pruefer decoding of a uniform random sequence
        seq = [mix64(seed, 0x5052, i) % n for i in range(n - 2)]
        degree = [1] * n
        for s in seq:
            degree[s] += 1
        import heapq

        leaves = [v for v in range(n) if degree[v] == 1]
        heapq.heapify(leaves)
        for s in seq:
            leaf = heapq.heappop(leaves)
            edges.add((min(leaf, s), max(leaf, s)))
            degree[s] -= 1
            if degree[s] == 1:
                heapq.heappush(leaves, s)
        u = heapq.heappop(leaves)
        v = heapq.heappop(leaves)
        edges.add((min(u, v), max(u, v)))
    non_edges = [(a, b) for a in range(n) for b in range(a + 1, n) if (a, b) not in edges]
    k = 0
    while extra_edges > 0 and non_edges:
        idx = mix64(seed, 0x4558, k) % len(non_edges)
        edges.add(non_edges.pop(idx))
        extra_edges -= 1
        k += 1
    return Graph.from_edges(n, sorted(edges))


def to_edge_list_text(g: Graph) -> str:
    """Deterministic text export: header 'v=<count>' then 'a b' lines, a < b."""
    lines = [f"v={g.vertex_count}"]
    lines.extend(f"{a} {b}" for a, b in g.edges())
    return "\n".join(lines) + "\n"


def from_edge_list_text(text: str) -> Graph:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("v="):
        raise ValueError("edge list must start with a 'v=<count>' header")
    n = int(lines[0][2:])
    edges = []
    for ln in lines[1:]:
        a, b = ln.split()
        edges.append((int(a), int(b)))
    return Graph.from_edges(n, edges)


def write_edge_list(g: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write(to_edge_list_text(g))


def read_edge_list(path) -> Graph:
    with open(path) as fh:
        return from_edge_list_text(fh.read())
