"""Point-process sampling, geometric-graph construction and the box
discretization that embeds a caterpillar of cliques into a dense cloud."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Callable

import numpy as np

from .graphs import Graph
from .percolation import SiteGrid, find_long_open_path
from .rng import TAG_POINTS, mix64


@dataclass(frozen=True)
class GeometryConfig:
    """Geometric model: points with intensity `intensity` on the cube
    [0, n^(1/dim)]^dim, pairs connected within Euclidean distance `radius`.

    `intensity` maps an (k, dim) coordinate array to k values and must stay
    inside [lower, upper]; None means the constant intensity 1.
    """

    n: float
    radius: float
    dim: int
    intensity: Callable[[np.ndarray], np.ndarray] | None = None
    lower: float = 1.0
    upper: float = 1.0

    def __post_init__(self):
        if self.n <= 0 or self.radius <= 0 or self.dim < 1:
            raise ValueError("need n > 0, radius > 0, dim >= 1")
        if not (0.0 < self.lower <= self.upper):
            raise ValueError("intensity bounds need 0 < lower <= upper")

    @property
    def domain_side(self) -> float:
        return self.n ** (1.0 / self.dim)


@dataclass(frozen=True)
class PointCloud:
    """Sampled coordinates inside [0, box_side]^dim."""

    points: np.ndarray  # shape (count, dim)
    box_side: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValueError("points must be a (count, dim) array")
        if pts.size and (pts.min() < 0.0 or pts.max() > self.box_side):
            raise ValueError("coordinates leave the declared domain box")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _evaluate_intensity(cfg_intensity, lower, upper, pts: np.ndarray) -> np.ndarray:
    if cfg_intensity is None:
        return np.full(pts.shape[0], 1.0)
    vals = np.asarray(cfg_intensity(pts), dtype=float)
    tol = 1e-12 * max(1.0, upper)
    if vals.shape != (pts.shape[0],):
        raise ValueError("intensity must return one value per point")
    if vals.size and (vals.min() < lower - tol or vals.max() > upper + tol):
        bad = float(vals.min()) if vals.min() < lower - tol else float(vals.max())
        raise ValueError(
            f"intensity returned {bad:g} outside declared bounds [{lower:g}, {upper:g}]"
        )
    return vals


def sample_poisson_points(cfg: GeometryConfig, seed: int) -> PointCloud:
    """Poisson cloud with intensity cfg.intensity, realized by thinning.

    Draw N ~ Poisson(upper * n) uniform points and keep each with
    probability intensity(x)/upper; the survivors are exactly the target
    process, for any bounded intensity.
    """
    rng = np.random.default_rng(mix64(seed, TAG_POINTS, 1))
    side = cfg.domain_side
    total = rng.poisson(cfg.upper * cfg.n)
    pts = rng.random((total, cfg.dim)) * side
    vals = _evaluate_intensity(cfg.intensity, cfg.lower, cfg.upper, pts)
    keep = rng.random(total) < vals / cfg.upper
    return PointCloud(pts[keep], side)


def sample_binomial_points(
    count: int,
    dim: int,
    seed: int,
    density: Callable[[np.ndarray], np.ndarray] | None = None,
    lower: float = 1.0,
    upper: float = 1.0,
) -> PointCloud:
    """Exactly `count` i.i.d. points on [0,1]^dim with the given density,
    by rejection from the uniform envelope at height `upper`."""
    if count < 0:
        raise ValueError("count must be non-negative")
    if not (0.0 < lower <= upper):
        raise ValueError("density bounds need 0 < lower <= upper")
    rng = np.random.default_rng(mix64(seed, TAG_POINTS, 2))
    out: list[np.ndarray] = []
    have = 0
    while have < count:
        batch = max(count - have, 64)
        pts = rng.random((batch, dim))
        vals = _evaluate_intensity(density, lower, upper, pts)
        keep = rng.random(batch) < vals / upper
        accepted = pts[keep]
        out.append(accepted)
        have += accepted.shape[0]
    pts = np.concatenate(out)[:count] if out else np.empty((0, dim))
    return PointCloud(pts, 1.0)


def _pair_edges(a_pts: np.ndarray, b_pts: np.ndarray, r2: float) -> np.ndarray:
    d2 = ((a_pts[:, None, :] - b_pts[None, :, :]) ** 2).sum(axis=2)
    return d2 <= r2


def build_rgg(cloud: PointCloud, radius: float) -> Graph:
    """Geometric graph: edge iff Euclidean distance <= radius (inclusive).

    Uses a bucket grid with cell side `radius`, scanning the 3^dim
    neighborhood, and matches the quadratic reference construction exactly.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    pts = cloud.points
    n = len(cloud)
    if n == 0:
        return Graph.from_edges(0, [])
    r2 = radius * radius
    cell_of = np.floor(pts / radius).astype(np.int64)
    cells: dict[tuple, list[int]] = {}
    for i, c in enumerate(map(tuple, cell_of)):
        cells.setdefault(c, []).append(i)
    zero = (0,) * cloud.dim
    half_offsets = [off for off in product((-1, 0, 1), repeat=cloud.dim) if off > zero]
    edges: list[tuple[int, int]] = []
    for c, ids in cells.items():
        a_ids = np.asarray(ids)
        a = pts[a_ids]
        if len(ids) > 1:
            hit = _pair_edges(a, a, r2)
            ii, jj = np.nonzero(np.triu(hit, k=1))
            edges.extend(zip(a_ids[ii].tolist(), a_ids[jj].tolist()))
        for off in half_offsets:
            c2 = tuple(int(x + o) for x, o in zip(c, off))
            other = cells.get(c2)
            if not other:
                continue
            b_ids = np.asarray(other)
            hit = _pair_edges(a, pts[b_ids], r2)
            ii, jj = np.nonzero(hit)
            edges.extend(zip(a_ids[ii].tolist(), b_ids[jj].tolist()))
    edges = [(min(a, b), max(a, b)) for a, b in edges]
    return Graph.from_edges(n, edges)


def build_rgg_bruteforce(cloud: PointCloud, radius: float) -> Graph:
    """Quadratic reference construction; kept as the independent check for
    the bucket-grid builder."""
    pts = cloud.points
    n = len(cloud)
    r2 = radius * radius
    edges = []
    for i in range(n):
        d2 = ((pts[i + 1:] - pts[i]) ** 2).sum(axis=1)
        for j in np.nonzero(d2 <= r2)[0]:
            edges.append((i, i + 1 + int(j)))
    return Graph.from_edges(n, edges)


@dataclass(frozen=True)
class BoxLattice:
    """Cube lattice over the domain with per-box vertex counts and open flags.

    Boundary boxes keep their true (smaller) intersection with the domain;
    a box is open when its count reaches `open_threshold`.
    """

    side: float
    dims: tuple[int, ...]
    counts: np.ndarray
    open_flags: np.ndarray
    members: dict
    open_threshold: float


def discretize_boxes(cloud: PointCloud, side: float, open_threshold: float) -> BoxLattice:
    if side <= 0:
        raise ValueError("box side must be positive")
    d = cloud.dim
    per_axis = max(1, math.ceil(cloud.box_side / side - 1e-12))
    dims = (per_axis,) * d
    idx = np.floor(cloud.points / side).astype(np.int64)
    np.clip(idx, 0, per_axis - 1, out=idx)
    counts = np.zeros(dims, dtype=np.int64)
    members: dict[tuple, list[int]] = {}
    for i, c in enumerate(map(tuple, idx)):
        members.setdefault(c, []).append(i)
    for c, ids in members.items():
        counts[c] = len(ids)
    open_flags = counts >= open_threshold
    return BoxLattice(side, dims, counts, open_flags,
                      {c: np.asarray(ids) for c, ids in members.items()}, open_threshold)


@dataclass(frozen=True)
class CaterpillarEmbedding:
    """A caterpillar of cliques located inside a point cloud.

    `box_path` is a simple path of open boxes; `blocks[i]` lists vertex ids
    inside box i that form a clique in the host graph, all of size
    `block_size` (larger boxes are truncated so downstream clique logic can
    assume equal sizes); `spine[i]` is the designated spine vertex, chosen
    as the first member of its block.
    """

    box_path: tuple[tuple[int, ...], ...]
    blocks: tuple[tuple[int, ...], ...]
    spine: tuple[int, ...]
    block_size: int

    @property
    def spine_length(self) -> int:
        return len(self.box_path) - 1


def find_caterpillar_embedding(cloud: PointCloud, cfg: GeometryConfig) -> CaterpillarEmbedding | None:
    """Locate a caterpillar of cliques in the cloud, or None when no open
    path of at least two boxes exists.

    The domain is cut into boxes of side R/(2*sqrt(d)) so that any two
    points in the same or in adjacent boxes sit within distance R; boxes
    holding at least half their expected-count floor mu = lower*side^d are
    declared open, and a long simple path is extracted from the open-box
    lattice.
    """
    d = cfg.dim
    side_domain = cloud.box_side
    if len(cloud) == 0:
        return None
    if cfg.radius >= math.sqrt(d) * side_domain:
        # one box covers the whole domain: everything is one clique
        ids = tuple(range(len(cloud)))
        return CaterpillarEmbedding(((0,) * d,), (ids,), (ids[0],), len(ids))
    side = cfg.radius / (2.0 * math.sqrt(d))
    mu = cfg.lower * side**d
    lattice = discretize_boxes(cloud, side, mu / 2.0)
    grid = SiteGrid(lattice.dims, lattice.open_flags, p=None, seed=None)
    path = find_long_open_path(grid)
    if len(path) < 2:
        return None
    block_size = max(1, math.ceil(mu / 2.0))
    blocks = []
    spine = []
    for box in path:
        ids = np.sort(lattice.members[box])
        block = tuple(int(v) for v in ids[:block_size])
        blocks.append(block)
        spine.append(block[0])
    return CaterpillarEmbedding(tuple(path), tuple(blocks), tuple(spine), block_size)


def embedding_is_valid(emb: CaterpillarEmbedding, cloud: PointCloud, radius: float) -> bool:
    """Explicit adjacency verification: every pair inside a block and every
    pair across consecutive blocks must be within `radius`."""
    pts = cloud.points
    r2 = radius * radius
    for bi, block in enumerate(emb.blocks):
        a = pts[list(block)]
        if not _pair_edges(a, a, r2).all():
            return False
        if bi + 1 < len(emb.blocks):
            b = pts[list(emb.blocks[bi + 1])]
            if not _pair_edges(a, b, r2).all():
                return False
    return True


def to_point_text(cloud: PointCloud) -> str:
    """One point per line, space-separated coordinates, 17 significant digits."""
    lines = [" ".join(f"{x:.17g}" for x in row) for row in cloud.points]
    return "\n".join(lines) + ("\n" if lines else "")


def from_point_text(text: str, box_side: float) -> PointCloud:
    rows = [[float(x) for x in ln.split()] for ln in text.splitlines() if ln.strip()]
    pts = np.asarray(rows, dtype=float) if rows else np.empty((0, 1))
    return PointCloud(pts, box_side)


def write_points(cloud: PointCloud, path) -> None:
    with open(path, "w") as fh:
        fh.write(to_point_text(cloud))
