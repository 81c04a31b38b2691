"""Site percolation with long-path extraction and finite-interval oriented
percolation, each paired with exact small-instance oracles.

Conventions used throughout:

* path "length" counts vertices, not edges;
* lattice adjacency is nearest-neighbor (one axis differs by one);
* oriented percolation lives on the parity lattice
  Gamma = {(i, k) in [0, ell] x N : i + k even}, arrows go from (i, k) to
  (i +/- 1, k + 1) and are materialized lazily from counter-based hashes of
  (seed, i, k, direction), so runs with different retention probabilities
  or initial sets can share one arrow field.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import BudgetExceededError
from .rng import TAG_ARROW, TAG_SITE, mix64, uniform_from_key

# ---------------------------------------------------------------------------
# site grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SiteGrid:
    """Boolean open/closed field on a finite box of Z^d."""

    dims: tuple[int, ...]
    open: np.ndarray
    p: float | None
    seed: int | None

    def __post_init__(self):
        if any(d < 1 for d in self.dims):
            raise ValueError("dims must be positive")
        if tuple(self.open.shape) != tuple(self.dims):
            raise ValueError("open field shape does not match dims")


def sample_uniform_field(dims: Sequence[int], seed: int) -> np.ndarray:
    """Uniform marks per site; thresholding at p gives coupled site grids
    that are monotone in p."""
    rng = np.random.default_rng(mix64(seed, TAG_SITE))
    return rng.random(tuple(dims))


def grid_from_field(field_arr: np.ndarray, p: float, seed: int | None = None) -> SiteGrid:
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must lie in [0, 1]")
    return SiteGrid(tuple(field_arr.shape), field_arr < p, p, seed)


def sample_site_grid(dims: Sequence[int], p: float, seed: int) -> SiteGrid:
    """Independent Bernoulli(p) open flags, deterministic per seed."""
    return grid_from_field(sample_uniform_field(dims, seed), p, seed)


def _strides(dims: tuple[int, ...]) -> list[int]:
    s = [1] * len(dims)
    for axis in range(len(dims) - 2, -1, -1):
        s[axis] = s[axis + 1] * dims[axis + 1]
    return s


def _open_adjacency(open_arr: np.ndarray):
    """Local adjacency over the open sites only.

    Returns (flat ids of open sites, list of neighbor-lists in local ids).
    """
    dims = open_arr.shape
    flat_open = np.flatnonzero(open_arr.ravel())
    local = np.full(open_arr.size, -1, dtype=np.int64)
    local[flat_open] = np.arange(flat_open.size)
    coords = np.array(np.unravel_index(flat_open, dims)).T if flat_open.size else np.empty((0, len(dims)), int)
    strides = _strides(tuple(dims))
    adj: list[list[int]] = [[] for _ in range(flat_open.size)]
    for axis in range(len(dims)):
        ok = coords[:, axis] + 1 < dims[axis]
        src = np.nonzero(ok)[0]
        nb = local[flat_open[src] + strides[axis]]
        good = nb >= 0
        for a, b in zip(src[good].tolist(), nb[good].tolist()):
            adj[a].append(b)
            adj[b].append(a)
    return flat_open, adj


def _open_components(adj: list[list[int]]) -> list[list[int]]:
    n = len(adj)
    seen = bytearray(n)
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = 1
        comp = [s]
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = 1
                    comp.append(w)
                    queue.append(w)
        comps.append(comp)
    comps.sort(key=lambda c: (-len(c), min(c)))
    return comps


def _bfs_far(adj, start) -> int:
    """Local id of a site at maximal BFS distance from start."""
    dist = {start: 0}
    queue = deque([start])
    far = start
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                if (dist[w], -w) > (dist[far], -far):
                    far = w
                queue.append(w)
    return far


class _RotatingPath:
    """Simple path with O(suffix) pivot rotations (Posa moves).

    A rotation picks a path vertex v adjacent to the head and reverses the
    segment after v, which turns v's successor into the new head; repeated
    rotations expose new extendable heads after the greedy walk gets stuck.
    """

    def __init__(self, start: int, n_sites: int):
        self.path = [start]
        self.pos = {start: 0}
        self.visited = bytearray(n_sites)
        self.visited[start] = 1

    def append(self, v: int) -> None:
        self.pos[v] = len(self.path)
        self.path.append(v)
        self.visited[v] = 1

    def reverse(self) -> None:
        self.path.reverse()
        n = len(self.path) - 1
        for v, i in self.pos.items():
            self.pos[v] = n - i

    def rotate(self, i: int) -> None:
        self.path[i + 1:] = self.path[i + 1:][::-1]
        for j in range(i + 1, len(self.path)):
            self.pos[self.path[j]] = j

    def pop_burn(self) -> None:
        # drop the head but keep it marked visited: a burned dead end is
        # never re-entered, so the path stays simple
        v = self.path.pop()
        del self.pos[v]


def _greedy_extend_rp(rp: _RotatingPath, adj) -> int:
    added = 0
    visited = rp.visited
    while True:
        head = rp.path[-1]
        best = -1
        best_key = None
        for w in adj[head]:
            if visited[w]:
                continue
            deg = sum(1 for u in adj[w] if not visited[u])
            key = (deg == 0, deg, w)
            if best_key is None or key < best_key:
                best_key = key
                best = w
        if best < 0:
            return added
        rp.append(best)
        added += 1


def _dfs_deep_path(adj, start: int, descending: bool) -> list[int]:
    """Deepest root-to-leaf chain of the depth-first tree from `start`.

    Any root-leaf chain of a DFS tree is a simple path in the graph;
    depth-first exploration of grid-like clusters produces snake-like
    trunks whose depth grows linearly with the cluster, which makes this
    the scalable backbone of the heuristic.
    """
    n = len(adj)
    parent = [-2] * n
    parent[start] = -1
    order = [sorted(adj[v], reverse=descending) for v in range(n)]
    iters = {start: iter(order[start])}
    stack = [start]
    deepest, best_depth = start, 1
    while stack:
        v = stack[-1]
        w = next(iters[v], None)
        if w is None:
            stack.pop()
            continue
        if parent[w] != -2:
            continue
        parent[w] = v
        iters[w] = iter(order[w])
        stack.append(w)
        if len(stack) > best_depth:
            best_depth = len(stack)
            deepest = w
    path = [deepest]
    while parent[path[-1]] >= 0:
        path.append(parent[path[-1]])
    path.reverse()
    return path


def _polish(rp: _RotatingPath, adj, salt: int, failure_budget: int,
            max_steps: int) -> list[int]:
    """Extend both ends greedily, re-pointing stuck heads with random Posa
    rotations and burning hopeless pendant heads; returns the best path
    seen within the budgets."""
    best = list(rp.path)
    steps = 0
    failures = 0
    while steps < max_steps and failures < failure_budget:
        steps += 1
        if steps % 2 == 0:
            rp.reverse()
        if _greedy_extend_rp(rp, adj):
            failures = 0
            if len(rp.path) > len(best):
                best = list(rp.path)
            continue
        head = rp.path[-1]
        limit = len(rp.path) - 2
        cands = [rp.pos[v] for v in adj[head] if rp.pos.get(v, limit) < limit]
        failures += 1
        if cands:
            rp.rotate(cands[mix64(salt, steps) % len(cands)])
        elif len(rp.path) > 1:
            rp.pop_burn()
    return best


def _rp_from_path(path: list[int], n_sites: int) -> _RotatingPath:
    rp = _RotatingPath(path[0], n_sites)
    for v in path[1:]:
        rp.append(v)
    return rp


def _grow_from(start: int, adj, n_sites: int, salt: int = 0,
               failure_budget: int = 400) -> list[int]:
    max_steps = 25 * n_sites + 2000
    best: list[int] = [start]
    # double sweep: deep DFS chain, then a second DFS from its far end
    for descending in (False, True):
        first = _dfs_deep_path(adj, start, descending)
        second = _dfs_deep_path(adj, first[-1], descending)
        seedpath = second if len(second) > len(first) else first
        polished = _polish(_rp_from_path(seedpath, n_sites), adj,
                           mix64(salt, descending), failure_budget, max_steps)
        if len(polished) > len(best):
            best = polished
    return best


def find_long_open_path(grid: SiteGrid) -> list[tuple[int, ...]]:
    """Heuristic long simple path through open sites of the grid.

    Multi-start greedy depth-first growth inside the largest open cluster
    (double-sweep endpoints plus extremal sites as starts), improved by
    rotate-and-extend moves.  Output is deterministic for a fixed grid and
    is never longer than the true optimum.
    """
    flat_open, adj = _open_adjacency(grid.open)
    if flat_open.size == 0:
        return []
    comps = _open_components(adj)
    comp = comps[0]
    f1 = _bfs_far(adj, min(comp))
    f2 = _bfs_far(adj, f1)
    candidates = [f1, f2]
    if len(comp) <= 2000:  # extra restarts are cheap only on small clusters
        candidates += [min(comp), max(comp),
                       min(comp, key=lambda v: (len(adj[v]), v))]
    starts = []
    for s in candidates:
        if s not in starts:
            starts.append(s)
    best: list[int] = []
    for si, s in enumerate(starts):
        path = _grow_from(s, adj, flat_open.size, salt=si)
        if len(path) > len(best):
            best = path
    dims = grid.dims
    return [tuple(int(x) for x in np.unravel_index(int(flat_open[v]), dims)) for v in best]


def path_is_valid(grid: SiteGrid, path: Sequence[tuple[int, ...]]) -> bool:
    """Machine check: open sites, lattice-adjacent consecutive pairs, no repeats."""
    if len(set(path)) != len(path):
        return False
    for site in path:
        if len(site) != len(grid.dims):
            return False
        if not all(0 <= c < d for c, d in zip(site, grid.dims)):
            return False
        if not grid.open[site]:
            return False
    for a, b in zip(path, path[1:]):
        diff = [abs(x - y) for x, y in zip(a, b)]
        if sum(diff) != 1 or max(diff) != 1:
            return False
    return True


def longest_open_path_exact(grid: SiteGrid, budget: int = 36) -> int:
    """Exact maximum simple-path vertex count via branch and bound.

    Refuses instances with more than `budget` open sites.  The bound prunes
    a branch when current length plus open sites still reachable from the
    head cannot beat the incumbent.
    """
    flat_open, adj = _open_adjacency(grid.open)
    n = flat_open.size
    if n == 0:
        return 0
    if n > budget:
        raise BudgetExceededError(f"{n} open sites exceed the exact-path budget of {budget}")
    nbr_mask = [0] * n
    for v in range(n):
        for w in adj[v]:
            nbr_mask[v] |= 1 << w
    best = 1

    def reachable(v: int, visited: int) -> int:
        seen = 1 << v
        frontier = nbr_mask[v] & ~visited
        while frontier:
            seen |= frontier
            nxt = 0
            f = frontier
            while f:
                b = f & -f
                nxt |= nbr_mask[b.bit_length() - 1]
                f ^= b
            frontier = nxt & ~seen & ~visited
        return seen

    def dfs(v: int, visited: int, length: int):
        nonlocal best
        if length > best:
            best = length
        cand = nbr_mask[v] & ~visited
        if not cand:
            return
        ub = length - 1 + bin(reachable(v, visited & ~(1 << v))).count("1")
        if ub <= best:
            return
        f = cand
        while f:
            b = f & -f
            w = b.bit_length() - 1
            f ^= b
            dfs(w, visited | b, length + 1)

    order = sorted(range(n), key=lambda v: (len(adj[v]), v))
    for s in order:
        dfs(s, 1 << s, 1)
    return best


# ---------------------------------------------------------------------------
# crossings (used by the threshold sweep and the 3-d gluing)
# ---------------------------------------------------------------------------


def _bfs_path_2d(open2d: np.ndarray, blocked: set, sources: Iterable[tuple[int, int]],
                 is_target) -> list[tuple[int, int]] | None:
    """Shortest open path in a 2-d slice from any source to any target site."""
    h, w = open2d.shape
    prev: dict[tuple[int, int], tuple[int, int] | None] = {}
    queue = deque()
    for s in sources:
        if open2d[s] and s not in blocked and s not in prev:
            prev[s] = None
            queue.append(s)
    while queue:
        v = queue.popleft()
        if is_target(v):
            out = [v]
            while prev[out[-1]] is not None:
                out.append(prev[out[-1]])
            out.reverse()
            return out
        y, x = v
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            nv = (ny, nx)
            if 0 <= ny < h and 0 <= nx < w and open2d[nv] and nv not in blocked and nv not in prev:
                prev[nv] = v
                queue.append(nv)
    return None


def has_crossing(grid: SiteGrid, axis: int = 0) -> bool:
    """True when an open path joins the two opposite faces along `axis`."""
    flat_open, adj = _open_adjacency(grid.open)
    if flat_open.size == 0:
        return False
    dims = grid.dims
    coords = np.array(np.unravel_index(flat_open, dims)).T
    sources = np.nonzero(coords[:, axis] == 0)[0]
    targets = set(np.nonzero(coords[:, axis] == dims[axis] - 1)[0].tolist())
    seen = bytearray(flat_open.size)
    queue = deque()
    for s in sources.tolist():
        seen[s] = 1
        queue.append(s)
    while queue:
        v = queue.popleft()
        if v in targets:
            return True
        for w in adj[v]:
            if not seen[w]:
                seen[w] = 1
                queue.append(w)
    return False


def crossing_frequency(dims: Sequence[int], p: float, replicas: int, seed: int,
                       axis: int = 0) -> tuple[float, float]:
    """Monte Carlo crossing probability with its standard error."""
    if replicas < 1:
        raise ValueError("need at least one replica")
    hits = 0
    for r in range(replicas):
        grid = sample_site_grid(dims, p, mix64(seed, 0x43524F53, r))
        hits += has_crossing(grid, axis)
    f = hits / replicas
    se = math.sqrt(max(f * (1.0 - f), 1.0 / replicas) / replicas)
    return f, se


# ---------------------------------------------------------------------------
# d = 3 plane gluing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GluedPath:
    """Concatenated cross-plane path plus construction bookkeeping."""

    path: tuple[tuple[int, int, int], ...]
    planes_chained: int
    nice_planes_traversed: int
    min_traversed_plane_length: int
    used_fallback: bool


def _plane_heuristic_path(open2d: np.ndarray, rows: slice, cols: slice):
    sub = np.zeros_like(open2d)
    sub[rows, cols] = open2d[rows, cols]
    if not sub.any():
        return []
    grid = SiteGrid(sub.shape, sub, p=None, seed=None)
    return [tuple(site) for site in find_long_open_path(grid)]


def _band_crossing(open2d: np.ndarray, rows: tuple[int, int], spans_cols: bool):
    """Open crossing inside the row band; either spanning all columns or
    spanning the band's rows."""
    h, w = open2d.shape
    lo, hi = rows
    band = np.zeros_like(open2d)
    band[lo:hi + 1, :] = open2d[lo:hi + 1, :]
    if spans_cols:
        sources = [(y, 0) for y in range(lo, hi + 1)]
        return _bfs_path_2d(band, set(), sources, lambda v: v[1] == w - 1)
    sources = [(lo, x) for x in range(w)]
    return _bfs_path_2d(band, set(), sources, lambda v: v[0] == hi)


def _route_within_plane(open2d: np.ndarray, entry, exit_site, lam_path):
    """Simple route entry -> exit inside one plane, traversing `lam_path`
    when the stitching succeeds; falls back to a direct path.  Returns
    (route, traversed_lam)."""
    if lam_path:
        for lam in (lam_path, lam_path[::-1]):
            blocked = set(lam[1:])
            if entry is None:
                leg1 = [lam[0]]
            elif entry in blocked or entry == lam[0]:
                leg1 = [lam[0]] if entry == lam[0] else None
            else:
                leg1 = _bfs_path_2d(open2d, blocked - {lam[0]}, [entry], lambda v: v == lam[0])
            if leg1 is None:
                continue
            used = set(leg1) | set(lam)
            route = leg1[:-1] + list(lam)
            if exit_site is None:
                return route, True
            if exit_site in used and exit_site != lam[-1]:
                continue
            if exit_site == lam[-1]:
                return route, True
            leg2 = _bfs_path_2d(open2d, used - {lam[-1]}, [lam[-1]], lambda v: v == exit_site)
            if leg2 is None:
                continue
            return route + leg2[1:], True
    if entry is None and exit_site is None:
        return None, False
    if entry is None:
        return [exit_site], False
    if exit_site is None:
        return [entry], False
    if entry == exit_site:
        return [entry], False
    direct = _bfs_path_2d(open2d, set(), [entry], lambda v: v == exit_site)
    if direct is None:
        return None, False
    return direct, False


def glue_plane_paths(grid: SiteGrid, m: int, m1: int) -> GluedPath:
    """Chain long per-plane paths across a 3-d grid.

    Each plane i contributes a long path inside its middle window
    [2m, n-2m]^2; crossings in the side bands (rows [m, 2m] and
    [n-1-2m, n-1-m]) of consecutive planes intersect in projection and
    provide jump sites between planes.  A plane is treated as nice when its
    middle path has at least max(2, m1) sites; traversing a nice plane
    switches the walk to the opposite band, otherwise the walk slides along
    the same band.  Falls back to the plain 3-d heuristic when fewer than
    two planes can be chained.
    """
    if len(grid.dims) < 3:
        raise ValueError("plane gluing needs at least three axes")
    if len(grid.dims) > 3:
        # higher dimensions reuse the 3-d construction along the first
        # three axes, inside the slice with trailing coordinates zero
        tail = len(grid.dims) - 3
        sub = SiteGrid(grid.dims[:3], grid.open[(...,) + (0,) * tail], grid.p, grid.seed)
        res = glue_plane_paths(sub, m, m1)
        padded = tuple(site + (0,) * tail for site in res.path)
        return GluedPath(padded, res.planes_chained, res.nice_planes_traversed,
                         res.min_traversed_plane_length, res.used_fallback)
    planes, h, w = grid.dims
    if m < 1 or 4 * m + 2 > h:
        return _fallback_glued(grid)
    left_rows = (m, 2 * m)
    right_rows = (h - 1 - 2 * m, h - 1 - m)
    mid = slice(2 * m, h - 2 * m)
    lam_paths = []
    crossings = {"L": [], "R": []}
    for i in range(planes):
        plane = grid.open[i]
        lam_paths.append(_plane_heuristic_path(plane, mid, slice(2 * m, w - 2 * m)))
        spans_cols = i % 2 == 1
        crossings["L"].append(_band_crossing(plane, left_rows, spans_cols))
        crossings["R"].append(_band_crossing(plane, right_rows, spans_cols))
    jumps = {"L": [], "R": []}
    for side in ("L", "R"):
        for i in range(planes - 1):
            a, b = crossings[side][i], crossings[side][i + 1]
            if a is None or b is None:
                jumps[side].append(None)
            else:
                common = sorted(set(a) & set(b))
                jumps[side].append(common[0] if common else None)
    min_lam = max(2, m1)
    total: list[tuple[int, int, int]] = []
    side = "L"
    entry = None
    chained = 0
    nice_traversed = 0
    min_len = 0
    for i in range(planes):
        plane = grid.open[i]
        lam = lam_paths[i] if len(lam_paths[i]) >= min_lam else []
        last = i == planes - 1
        exit_site = None
        next_side = side
        if not last:
            if lam:
                other = "R" if side == "L" else "L"
                if jumps[other][i] is not None:
                    exit_site = jumps[other][i]
                    next_side = other
                elif jumps[side][i] is not None:
                    exit_site = jumps[side][i]
            elif jumps[side][i] is not None:
                exit_site = jumps[side][i]
            elif jumps["R" if side == "L" else "L"][i] is not None:
                next_side = "R" if side == "L" else "L"
                exit_site = jumps[next_side][i]
            if exit_site is None:
                route, traversed = _route_within_plane(plane, entry, None, lam)
                if route:
                    total.extend((i, y, x) for y, x in route)
                    chained += 1
                    if traversed:
                        nice_traversed += 1
                        min_len = min(min_len, len(lam)) if min_len else len(lam)
                break
        route, traversed = _route_within_plane(plane, entry, exit_site, lam)
        if route is None:
            break
        total.extend((i, y, x) for y, x in route)
        chained += 1
        if traversed:
            nice_traversed += 1
            min_len = min(min_len, len(lam)) if min_len else len(lam)
        if last:
            break
        side = next_side
        entry = exit_site
    if chained < 2:
        return _fallback_glued(grid)
    return GluedPath(tuple(total), chained, nice_traversed, min_len, False)


def _fallback_glued(grid: SiteGrid) -> GluedPath:
    path = find_long_open_path(grid)
    return GluedPath(tuple(path), 0, 0, 0, True)


# ---------------------------------------------------------------------------
# oriented percolation on [0, ell]
# ---------------------------------------------------------------------------


def full_interval_initial(ell: int) -> frozenset[int]:
    """Largest parity-legal full start: every even site of [0, ell].

    Sites of odd index carry no outgoing arrows at time zero, so this start
    generates exactly the trajectories of the all-ones initial condition
    from step one onward.
    """
    return frozenset(range(0, ell + 1, 2))


def arrow_open(seed: int, i: int, k: int, direction: int, q: float) -> bool:
    """Arrow from (i, k) to (i + (direction and 1 or -1)...).

    direction 0 means target i-1, direction 1 means target i+1.  The
    underlying uniform depends only on (seed, i, k, direction), so the same
    field serves every q.
    """
    return uniform_from_key(seed, TAG_ARROW, i, k, direction) < q


@dataclass(frozen=True)
class EdgeTrack:
    """Leftmost/rightmost occupied positions per step; None once extinct."""

    left: tuple
    right: tuple


@dataclass(frozen=True)
class OrientedRun:
    ell: int
    q: float
    horizon: int
    seed: int
    occupancy: tuple[frozenset, ...]
    arrows: dict
    extinction_step: int | None
    track: EdgeTrack


def _check_initial(ell: int, initial: Iterable[int]) -> frozenset[int]:
    init = frozenset(int(i) for i in initial)
    if any(i < 0 or i > ell for i in init):
        raise ValueError("initial sites must lie in [0, ell]")
    odd = [i for i in init if i % 2 == 1]
    if odd:
        raise ValueError(f"initial sites {sorted(odd)} violate parity at time 0")
    return init


def op_run(ell: int, q: float, initial: Iterable[int], horizon: int, seed: int) -> OrientedRun:
    """Exact trajectory of the oriented percolation up to `horizon` steps.

    Recording stops at the extinction step (the empty set is absorbing, so
    every later state is empty); `extinction_step` carries the step index.
    """
    if ell < 0 or horizon < 0 or not (0.0 <= q <= 1.0):
        raise ValueError("need ell >= 0, horizon >= 0, 0 <= q <= 1")
    cur = _check_initial(ell, initial)
    occupancy = [cur]
    arrows: dict = {}
    extinction = None if cur else 0
    t = 0
    while t < horizon and occupancy[-1]:
        nxt = set()
        for i in occupancy[-1]:
            for direction, j in ((0, i - 1), (1, i + 1)):
                if 0 <= j <= ell:
                    a = arrow_open(seed, i, t, direction, q)
                    arrows[(i, t, direction)] = a
                    if a:
                        nxt.add(j)
        occupancy.append(frozenset(nxt))
        t += 1
        if not nxt and extinction is None:
            extinction = t
    left = tuple(min(s) if s else None for s in occupancy)
    right = tuple(max(s) if s else None for s in occupancy)
    return OrientedRun(ell, q, horizon, seed, tuple(occupancy), arrows, extinction,
                       EdgeTrack(left, right))


@dataclass(frozen=True)
class FirstPassage:
    sigma: int | None
    censored: bool


def op_first_passage(ell: int, q: float, seed: int) -> FirstPassage:
    """First step at which site ell is occupied starting from {0}, censored
    at horizon 2*ell."""
    horizon = 2 * ell
    cur = frozenset({0})
    t = 0
    while True:
        if ell in cur:
            return FirstPassage(t, False)
        if t >= horizon or not cur:
            return FirstPassage(None, True)
        nxt = set()
        for i in cur:
            for direction, j in ((0, i - 1), (1, i + 1)):
                if 0 <= j <= ell and arrow_open(seed, i, t, direction, q):
                    nxt.add(j)
        cur = frozenset(nxt)
        t += 1


def op_exact_survival(ell: int, q: float, t: int, initial: Iterable[int]) -> float:
    """Exact P(eta_t != empty) by transfer over subsets of [0, ell].

    Budget: ell <= 4 and t <= 8 (state space 2^(ell+1)).
    """
    if ell > 4 or t > 8:
        raise BudgetExceededError("exact survival budget is ell <= 4, t <= 8")
    if not (0.0 <= q <= 1.0):
        raise ValueError("q must lie in [0, 1]")
    init = _check_initial(ell, initial)
    dist: dict[frozenset, float] = {init: 1.0}
    for _ in range(t):
        new: dict[frozenset, float] = {}
        for state, prob in dist.items():
            if not state:
                new[state] = new.get(state, 0.0) + prob
                continue
            targets = sorted({j for i in state for j in (i - 1, i + 1) if 0 <= j <= ell})
            p_occ = []
            for j in targets:
                parents = sum(1 for i in state if abs(i - j) == 1)
                p_occ.append(1.0 - (1.0 - q) ** parents)
            for mask in range(1 << len(targets)):
                pr = prob
                occ = []
                for b, j in enumerate(targets):
                    if mask >> b & 1:
                        pr *= p_occ[b]
                        occ.append(j)
                    else:
                        pr *= 1.0 - p_occ[b]
                if pr == 0.0:
                    continue
                key = frozenset(occ)
                new[key] = new.get(key, 0.0) + pr
        dist = new
    return 1.0 - dist.get(frozenset(), 0.0)


def _simulate_batch(ell: int, q: float, steps: int, replicas: int, seed: int,
                    initial: Iterable[int]):
    """Vectorized replica fan-out; returns occupancy (replicas, ell+1) after
    `steps` steps and the per-replica extinction step (steps+1 if alive)."""
    init = _check_initial(ell, initial)
    rng = np.random.default_rng(mix64(seed, TAG_ARROW, 0x524550))
    occ = np.zeros((replicas, ell + 1), dtype=bool)
    occ[:, sorted(init)] = True
    extinct_at = np.full(replicas, steps + 1, dtype=np.int64)
    alive = occ.any(axis=1)
    extinct_at[~alive] = 0
    for t in range(1, steps + 1):
        go_left = rng.random((replicas, ell + 1)) < q
        go_right = rng.random((replicas, ell + 1)) < q
        nxt = np.zeros_like(occ)
        nxt[:, :-1] |= occ[:, 1:] & go_left[:, 1:]
        nxt[:, 1:] |= occ[:, :-1] & go_right[:, :-1]
        occ = nxt
        now_alive = occ.any(axis=1)
        died = alive & ~now_alive
        extinct_at[died] = t
        alive = now_alive
        if not alive.any():
            break
    return occ, extinct_at


def op_survival_frequency(ell: int, q: float, t: int, replicas: int, seed: int,
                          initial: Iterable[int] | None = None) -> tuple[float, float]:
    """Simulated P(eta_t != empty) with standard error."""
    if replicas < 1:
        raise ValueError("need at least one replica")
    init = full_interval_initial(ell) if initial is None else initial
    _, extinct_at = _simulate_batch(ell, q, t, replicas, seed, init)
    freq = float((extinct_at > t).mean())
    se = math.sqrt(max(freq * (1 - freq), 1.0 / replicas) / replicas)
    return freq, se


def op_extinction_steps(ell: int, q: float, horizon: int, replicas: int, seed: int,
                        initial: Iterable[int] | None = None) -> np.ndarray:
    """Per-replica extinction step, horizon+1 when still alive at horizon."""
    init = full_interval_initial(ell) if initial is None else initial
    _, extinct_at = _simulate_batch(ell, q, horizon, replicas, seed, init)
    return extinct_at


@dataclass(frozen=True)
class MidDensityEstimate:
    beta: float
    step: int
    threshold: float
    window: tuple[int, int]
    estimate: float
    se: float
    wilson: tuple[float, float]
    replicas: int


def op_mid_density_multi(ell: int, q: float, step: int, betas: Sequence[float],
                         replicas: int, seed: int) -> list[MidDensityEstimate]:
    """Empirical P(|eta_step restricted to the centered beta-window| >=
    3*beta*ell/4) from full start, one simulated batch shared by all betas
    so the estimates are coupled."""
    from .stats import wilson_interval

    if replicas < 1:
        raise ValueError("need at least one replica")
    for beta in betas:
        if not (0.0 < beta <= 1.0):
            raise ValueError("beta must lie in (0, 1]")
    occ, _ = _simulate_batch(ell, q, step, replicas, seed, full_interval_initial(ell))
    out = []
    for beta in betas:
        lo = (1.0 - beta) * ell / 2.0
        hi = (1.0 + beta) * ell / 2.0
        lo_i = math.ceil(lo - 1e-12)
        hi_i = math.floor(hi + 1e-12)
        threshold = 3.0 * beta * ell / 4.0
        counts = occ[:, lo_i:hi_i + 1].sum(axis=1)
        hits = int((counts >= threshold).sum())
        est = hits / replicas
        se = math.sqrt(max(est * (1 - est), 1.0 / replicas) / replicas)
        out.append(MidDensityEstimate(beta, step, threshold, (lo_i, hi_i), est, se,
                                      wilson_interval(hits, replicas), replicas))
    return out


def op_mid_density(ell: int, q: float, step: int, beta: float, replicas: int,
                   seed: int) -> MidDensityEstimate:
    return op_mid_density_multi(ell, q, step, [beta], replicas, seed)[0]


# ---------------------------------------------------------------------------
# exact extinction-time profile via class transfer matrices
# ---------------------------------------------------------------------------


def _class_transition(src_sites: list[int], dst_sites: list[int], q: float) -> np.ndarray:
    """Transition matrix between occupancy subsets of two parity classes."""
    dst_index = {j: b for b, j in enumerate(dst_sites)}
    n_src, n_dst = len(src_sites), len(dst_sites)
    T = np.zeros((1 << n_src, 1 << n_dst))
    for s_mask in range(1 << n_src):
        if s_mask == 0:
            T[0, 0] = 1.0
            continue
        occupied = [src_sites[b] for b in range(n_src) if s_mask >> b & 1]
        parents: dict[int, int] = {}
        for i in occupied:
            for j in (i - 1, i + 1):
                if j in dst_index:
                    parents[j] = parents.get(j, 0) + 1
        targets = sorted(parents)
        p_occ = [1.0 - (1.0 - q) ** parents[j] for j in targets]
        for mask in range(1 << len(targets)):
            pr = 1.0
            t_mask = 0
            for b, j in enumerate(targets):
                if mask >> b & 1:
                    pr *= p_occ[b]
                    t_mask |= 1 << dst_index[j]
                else:
                    pr *= 1.0 - p_occ[b]
            if pr:
                T[s_mask, t_mask] += pr
    return T


@dataclass(frozen=True)
class OPExtinctionProfile:
    mean_steps: float
    median_steps: float


def _solve_longdouble(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting in extended precision.

    Needed because near-critical extinction rates sit below the double
    roundoff of I - M; 80-bit arithmetic buys ~3 more decades.
    """
    A = A.astype(np.longdouble).copy()
    x = b.astype(np.longdouble).copy()
    n = A.shape[0]
    for col in range(n):
        piv = col + int(np.argmax(np.abs(A[col:, col])))
        if A[piv, col] == 0:
            raise ArithmeticError("singular transfer system")
        if piv != col:
            A[[col, piv]] = A[[piv, col]]
            x[[col, piv]] = x[[piv, col]]
        factors = A[col + 1:, col] / A[col, col]
        A[col + 1:, col:] -= np.outer(factors, A[col, col:])
        x[col + 1:] -= factors * x[col]
    out = np.empty(n, dtype=np.longdouble)
    for i in range(n - 1, -1, -1):
        out[i] = (x[i] - A[i, i + 1:] @ out[i + 1:]) / A[i, i]
    return out


def op_extinction_profile_exact(ell: int, q: float, budget_sites: int = 10) -> OPExtinctionProfile:
    """Exact mean and median extinction step from the full even start.

    Works on the two-class transfer matrix (even-step states x odd-step
    states) in extended precision, so it stays meaningful when extinction
    takes 1e15+ steps.  The median comes from the spectral form of the
    survival function where doubles can resolve it, and otherwise from the
    asymptotically exact single-slow-mode value mean*log(2).
    Budget: at most `budget_sites` even sites (matrix side 2^sites).
    """
    if not (0.0 <= q <= 1.0):
        raise ValueError("q must lie in [0, 1]")
    if q == 1.0:
        return OPExtinctionProfile(math.inf, math.inf)
    evens = list(range(0, ell + 1, 2))
    odds = list(range(1, ell + 1, 2))
    if len(evens) > budget_sites:
        raise BudgetExceededError(f"{len(evens)} even sites exceed budget {budget_sites}")
    A = _class_transition(evens, odds, q)
    B = _class_transition(odds, evens, q)
    Ald = A.astype(np.longdouble)
    Bld = B.astype(np.longdouble)
    Mld = (Ald @ Bld)[1:, 1:]
    a1ld = Ald[1:, 1:].sum(axis=1)  # P(next odd state nonempty | even state)
    n = Mld.shape[0]
    full_idx = (1 << len(evens)) - 1 - 1
    resolvent = _solve_longdouble(np.eye(n, dtype=np.longdouble) - Mld,
                                  np.ones(n, dtype=np.longdouble) + a1ld)
    mean_steps = float(resolvent[full_idx])
    # spectral survival in doubles: s(2k) = sum c_j w_j^k, odd steps add one
    # A factor; fall back to the slow-mode median when doubles cannot see
    # the decay
    M = np.asarray(Mld, dtype=float)
    a1 = np.asarray(a1ld, dtype=float)
    v0 = np.zeros(n)
    v0[full_idx] = 1.0
    w, V = np.linalg.eig(M)
    asymptotic = mean_steps * math.log(2.0)
    if 1.0 - np.abs(w).max() < 1e-13:
        # slow mode below double resolution: the survival function is an
        # exponential with rate 1/mean up to negligible fast corrections
        return OPExtinctionProfile(mean_steps, asymptotic)
    v0V = v0 @ V
    c_even = v0V * np.linalg.solve(V, np.ones(n))
    c_odd = v0V * np.linalg.solve(V, a1)

    def survival(step: int) -> float:
        k, rem = divmod(step, 2)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            powers = np.where(w == 0, 0.0 if k > 0 else 1.0, w.astype(complex) ** k)
            powers = np.where(np.isfinite(powers), powers, 0.0)
        c = c_odd if rem else c_even
        return float(np.real((c * powers).sum()))

    lo, hi = 0, 1
    while survival(hi) > 0.5:
        lo, hi = hi, hi * 2
        if hi > 64 * max(mean_steps, 1.0):
            return OPExtinctionProfile(mean_steps, asymptotic)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if survival(mid) > 0.5:
            lo = mid
        else:
            hi = mid
    return OPExtinctionProfile(mean_steps, float(hi))


# ---------------------------------------------------------------------------
# grid/path text dumps
# ---------------------------------------------------------------------------


def grid_to_text(grid: SiteGrid) -> str:
    """Rows of 0/1 per site; d = 3 grids are emitted plane by plane with
    blank separator lines."""
    arr = grid.open.astype(int)
    if arr.ndim == 1:
        return "".join(str(x) for x in arr) + "\n"
    if arr.ndim == 2:
        return "\n".join("".join(str(x) for x in row) for row in arr) + "\n"
    if arr.ndim == 3:
        planes = []
        for plane in arr:
            planes.append("\n".join("".join(str(x) for x in row) for row in plane))
        return ("\n\n").join(planes) + "\n"
    raise ValueError("text dump supports d <= 3")


def path_to_text(path: Sequence[tuple[int, ...]]) -> str:
    return "\n".join(" ".join(str(c) for c in site) for site in path) + ("\n" if path else "")
