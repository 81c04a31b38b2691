import math

import numpy as np
import pytest

from geocp.rgg import (GeometryConfig, PointCloud, build_rgg, build_rgg_bruteforce,
                       discretize_boxes, embedding_is_valid, find_caterpillar_embedding,
                       from_point_text, sample_binomial_points, sample_poisson_points,
                       to_point_text)


def test_poisson_count_moments():
    cfg = GeometryConfig(400.0, 1.0, 2)
    counts = [len(sample_poisson_points(cfg, seed)) for seed in range(1000)]
    counts = np.asarray(counts, dtype=float)
    # mean of Poisson(400) over 1000 seeds: SE = sqrt(400/1000)
    assert abs(counts.mean() - 400.0) <= 3 * math.sqrt(400.0 / 1000)
    # variance should be near 400 as well (Poisson consistency)
    var_se = 400.0 * math.sqrt(2.0 / (len(counts) - 1))
    assert abs(counts.var(ddof=1) - 400.0) <= 4 * var_se


def test_poisson_thinning_keeps_all_at_upper_bound():
    # constant intensity at the declared upper bound accepts every point
    cfg_b = GeometryConfig(100.0, 1.0, 2, intensity=lambda pts: np.full(len(pts), 2.0),
                           lower=2.0, upper=2.0)
    cfg_flat = GeometryConfig(200.0, 1.0, 2)
    n_b = len(sample_poisson_points(cfg_b, 5))
    # same seed, same underlying candidate count: Poisson(upper*n) = Poisson(200)
    assert n_b == len(sample_poisson_points(cfg_flat, 5))


def test_intensity_out_of_bounds_rejected():
    cfg = GeometryConfig(50.0, 1.0, 2, intensity=lambda pts: np.full(len(pts), 3.0),
                         lower=1.0, upper=2.0)
    with pytest.raises(ValueError, match="outside declared bounds"):
        sample_poisson_points(cfg, 0)


def test_binomial_sampler_counts_and_domain():
    cloud = sample_binomial_points(50, 2, 3)
    assert len(cloud) == 50
    assert cloud.points.min() >= 0.0 and cloud.points.max() <= 1.0
    assert len(sample_binomial_points(0, 2, 3)) == 0
    c3 = sample_binomial_points(3, 1, 11)
    assert c3.points.shape == (3, 1)


def test_binomial_sampler_uniformity_chi_square():
    # pool quadrant counts over many seeds; fixed threshold far beyond the
    # 0.999 quantile of chi-square with 3 dof
    counts = np.zeros(4)
    for seed in range(500):
        pts = sample_binomial_points(50, 2, seed).points
        qx = (pts[:, 0] >= 0.5).astype(int)
        qy = (pts[:, 1] >= 0.5).astype(int)
        for q in range(4):
            counts[q] += int(((qx * 2 + qy) == q).sum())
    expected = counts.sum() / 4
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < 16.27


def test_rgg_simple_cases():
    cloud = PointCloud(np.array([[0.0, 0.0], [0.0, 1.0], [0.0, 2.5]]), 2.5)
    g = build_rgg(cloud, 1.0)
    assert g.edges() == [(0, 1)]


def test_rgg_inclusive_at_exact_radius():
    cloud = PointCloud(np.array([[0.0, 0.0], [1.0, 0.0]]), 1.0)
    assert build_rgg(cloud, 1.0).edge_count == 1
    assert build_rgg_bruteforce(cloud, 1.0).edge_count == 1


def test_rgg_matches_bruteforce():
    rng = np.random.default_rng(0)
    for trial in range(50):
        d = 1 + trial % 3
        n = int(rng.integers(2, 120))
        side = float(rng.uniform(2.0, 8.0))
        pts = rng.random((n, d)) * side
        cloud = PointCloud(pts, side)
        radius = float(rng.uniform(0.3, 2.0))
        fast = build_rgg(cloud, radius)
        slow = build_rgg_bruteforce(cloud, radius)
        assert fast.adjacency == slow.adjacency


def test_rgg_relabeling_isomorphism():
    rng = np.random.default_rng(42)
    pts = rng.random((60, 2)) * 5.0
    cloud = PointCloud(pts, 5.0)
    g = build_rgg(cloud, 0.9)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    sorted_cloud = PointCloud(pts[order], 5.0)
    g2 = build_rgg(sorted_cloud, 0.9)
    assert sorted(len(a) for a in g.adjacency) == sorted(len(a) for a in g2.adjacency)
    rank = np.empty(len(order), dtype=int)
    rank[order] = np.arange(len(order))
    remapped = sorted((min(rank[a], rank[b]), max(rank[a], rank[b])) for a, b in g.edges())
    assert remapped == g2.edges()


def test_discretize_boxes():
    cloud = PointCloud(np.array([[0.0, 0.0]]), 4.0)
    lat = discretize_boxes(cloud, 1.0, 1.0)
    assert lat.counts.sum() == 1
    assert lat.counts[0, 0] == 1
    assert lat.open_flags.sum() == 1
    # threshold zero opens every box
    lat0 = discretize_boxes(cloud, 1.0, 0.0)
    assert lat0.open_flags.all()
    # counts partition the cloud
    rng = np.random.default_rng(1)
    cloud2 = PointCloud(rng.random((200, 2)) * 7.0, 7.0)
    lat2 = discretize_boxes(cloud2, 1.5, 2.0)
    assert lat2.counts.sum() == 200


def test_embedding_single_box_degenerate():
    rng = np.random.default_rng(3)
    pts = rng.random((15, 2)) * 2.0
    cloud = PointCloud(pts, 2.0)
    cfg = GeometryConfig(4.0, 3.0, 2)  # radius >= sqrt(2)*side: one clique
    emb = find_caterpillar_embedding(cloud, cfg)
    assert emb is not None
    assert emb.spine_length == 0
    assert len(emb.blocks[0]) == 15
    assert embedding_is_valid(emb, cloud, cfg.radius)


def test_embedding_empty_cloud():
    cloud = PointCloud(np.empty((0, 2)), 10.0)
    cfg = GeometryConfig(100.0, 2.0, 2)
    assert find_caterpillar_embedding(cloud, cfg) is None


def test_embedding_blocks_are_cliques_in_host_graph():
    cfg = GeometryConfig(2500.0, math.sqrt(50.0), 2)
    cloud = sample_poisson_points(cfg, 9)
    emb = find_caterpillar_embedding(cloud, cfg)
    assert emb is not None
    assert emb.spine_length >= 2
    assert embedding_is_valid(emb, cloud, cfg.radius)
    side = cfg.radius / (2 * math.sqrt(2))
    mu_half = side**2 / 2
    assert all(len(b) >= mu_half for b in emb.blocks)
    assert all(len(b) == emb.block_size for b in emb.blocks)
    # cross-check against actual host-graph adjacency
    g = build_rgg(cloud, cfg.radius)
    adj = [set(nbrs) for nbrs in g.adjacency]
    for bi, block in enumerate(emb.blocks):
        for i, a in enumerate(block):
            for b in block[i + 1:]:
                assert b in adj[a]
        if bi + 1 < len(emb.blocks):
            for a in block:
                for b in emb.blocks[bi + 1]:
                    assert b in adj[a]
    # spine vertices chain through consecutive blocks
    for s, block in zip(emb.spine, emb.blocks):
        assert s in block


def test_point_text_roundtrip():
    rng = np.random.default_rng(8)
    cloud = PointCloud(rng.random((5, 3)) * 2.0, 2.0)
    text = to_point_text(cloud)
    back = from_point_text(text, 2.0)
    assert np.array_equal(back.points, cloud.points)  # 17 digits round-trip


def test_point_cloud_domain_validation():
    with pytest.raises(ValueError):
        PointCloud(np.array([[2.0, 0.0]]), 1.0)


def test_embedding_spine_scales_with_volume():
    # uniform cloud, n=1e4, connection volume 100: the spine should reach a
    # measurable fraction of n/R^d; 0.2 is an empirical floor, far below
    # the observed values
    cfg = GeometryConfig(10_000.0, 10.0, 2)
    hits = 0
    for seed in range(20):
        cloud = sample_poisson_points(cfg, seed)
        emb = find_caterpillar_embedding(cloud, cfg)
        if emb is not None and emb.spine_length >= 0.2 * cfg.n / cfg.radius**2:
            hits += 1
    assert hits >= 18


def test_discretize_interior_box_mean():
    # unit intensity: interior boxes of side s hold s^d points on average
    side = 3.0
    cfg = GeometryConfig(900.0, 1.0, 2)  # domain side 30, 10x10 boxes
    acc = []
    for seed in range(20):
        cloud = sample_poisson_points(cfg, seed)
        lat = discretize_boxes(cloud, side, 1.0)
        acc.append(lat.counts[1:-1, 1:-1].mean())
    expected = side**2
    se = math.sqrt(expected / (20 * 64))
    assert abs(np.mean(acc) - expected) <= 3 * se
