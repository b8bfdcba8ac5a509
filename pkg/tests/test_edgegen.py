"""Edge sampling: pair decoders, exactness of all three algorithms."""
import numpy as np
import pytest
from scipy import stats

from sern.edgegen import (
    NAIVE_MAX_NODES,
    decode_pair_cross,
    decode_pair_same,
    _decode_same_np,
    expected_hits,
    generate_edges_bucket,
    generate_edges_naive,
    generate_edges_qjump,
    nonempty_buckets,
    task_count,
)
from sern.errors import ParameterError
from sern.geometry import Rectangle, cover_with_grid
from sern.model import Metric, QTable, build_q_table, deterrence, dist_eval
from sern.nodegen import NodeStore, generate_nodes
from sern.rng import RngState


def store_from_points(grid, xs, ys):
    """NodeStore in bucket-major order for explicit coordinates."""
    xs = np.asarray(xs, dtype=np.float32)
    ys = np.asarray(ys, dtype=np.float32)
    nb = grid.mx * grid.my
    cells = np.array([grid.bucket_index(*grid.cell_of(float(x), float(y)))
                      for x, y in zip(xs, ys)], dtype=np.int64)
    order = np.argsort(cells, kind="stable")
    counts = np.bincount(cells, minlength=nb).astype(np.int64)
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
    return NodeStore(x=xs[order], y=ys[order], counts=counts, offsets=offsets)


def pair_probs(nodes, model, metric=Metric.L2):
    """Exact link probability for every pair of the stored (f32) coords."""
    n = nodes.n
    x = nodes.x.astype(np.float64)
    y = nodes.y.astype(np.float64)
    iu, ju = np.triu_indices(n, k=1)
    if metric is Metric.L2:
        d = np.hypot(x[iu] - x[ju], y[iu] - y[ju])
    else:
        d = np.array([dist_eval(metric.code, x[a], y[a], x[b], y[b])
                      for a, b in zip(iu, ju)])
    return iu, ju, np.asarray(model.p(d), dtype=np.float64)


# ---------------------------------------------------------------------------
# decoders


def test_decode_cross_examples():
    assert decode_pair_cross(5, 3) == (2, 1)
    assert decode_pair_cross(0, 3) == (0, 0)
    assert decode_pair_cross(2, 3) == (2, 0)
    assert decode_pair_cross(3, 3) == (0, 1)
    with pytest.raises(ParameterError):
        decode_pair_cross(1, 0)


def test_decode_same_examples():
    assert decode_pair_same(0) == (0, 1)
    assert decode_pair_same(1) == (0, 2)
    assert decode_pair_same(2) == (1, 2)
    assert decode_pair_same(3) == (0, 3)
    with pytest.raises(ParameterError):
        decode_pair_same(-1)
    with pytest.raises(ParameterError):
        decode_pair_same(6, 4)   # 4 nodes only have 6 pairs
    decode_pair_same(5, 4)       # last valid index


def test_decode_cross_bijection():
    c1, c2 = 7, 9
    seen = {decode_pair_cross(k, c1) for k in range(c1 * c2)}
    assert len(seen) == c1 * c2
    assert all(0 <= i < c1 and 0 <= j < c2 for i, j in seen)


def test_decode_same_bijection():
    c = 64
    seen = set()
    for k in range(c * (c - 1) // 2):
        i, j = decode_pair_same(k, c)
        assert 0 <= i < j < c
        seen.add((i, j))
    assert len(seen) == c * (c - 1) // 2


def test_decode_same_large_indices():
    # exact integer arithmetic must hold far beyond float precision
    for k in (2**40 + 12345, 2**52 + 7, 2**60 - 1):
        i, j = decode_pair_same(k)
        assert 0 <= i < j
        assert j * (j - 1) // 2 + i == k


def test_decode_same_numpy_matches_scalar():
    rng = np.random.default_rng(9)
    ks = rng.integers(0, 2**45, size=2000)
    ks = np.concatenate([ks, np.arange(100)])
    i, j = _decode_same_np(ks.astype(np.int64))
    for kk, ii, jj in zip(ks, i, j):
        assert decode_pair_same(int(kk)) == (int(ii), int(jj))


def test_bucket_task_helpers():
    counts = np.array([0, 3, 0, 1, 5, 0], dtype=np.int64)
    assert nonempty_buckets(counts).tolist() == [1, 3, 4]
    assert task_count(counts) == 3 * 4 // 2


# ---------------------------------------------------------------------------
# exact distribution checks

WAX = dict(q=0.9, s=1.2)
THREE_POINTS = ([0.11, 0.13, 0.75], [0.11, 0.12, 0.85])


def _outcome_counts(run_one, probs, runs):
    """Chi-square of the 8 possible 3-node graphs against independence."""
    pair_bit = {(0, 1): 1, (0, 2): 2, (1, 2): 4}
    counts = np.zeros(8, dtype=np.int64)
    for rep in range(runs):
        edges = run_one(rep)
        mask = 0
        for a, b in zip(edges.from_ids, edges.to_ids):
            mask |= pair_bit[(int(a), int(b))]
        counts[mask] += 1
    expected = np.empty(8)
    for mask in range(8):
        pr = 1.0
        for bit, p in zip((1, 2, 4), probs):
            pr *= p if mask & bit else 1.0 - p
        expected[mask] = pr * runs
    assert expected.min() > 5
    return stats.chisquare(counts, expected).pvalue


@pytest.mark.parametrize("algorithm", ["naive", "qjump", "bucket"])
def test_three_node_graph_distribution(algorithm):
    region = Rectangle(1.0, 1.0)
    grid = cover_with_grid(region, 5)
    nodes = store_from_points(grid, *THREE_POINTS)
    model = deterrence("waxman", **WAX)
    _, _, probs = pair_probs(nodes, model)
    qt = build_q_table(model, grid, Metric.L2)

    def run_one(rep):
        rng = RngState.for_worker(314159, 2, rep)
        if algorithm == "naive":
            return generate_edges_naive(nodes, model, rng)
        if algorithm == "qjump":
            return generate_edges_qjump(nodes, model, rng)
        return generate_edges_bucket(nodes, grid, model, qt, rng)

    pvalue = _outcome_counts(run_one, probs, runs=20000)
    assert pvalue > 1e-4


def test_three_node_graph_distribution_custom_func():
    # the callable path (vectorized hits + python acceptance) must match
    region = Rectangle(1.0, 1.0)
    grid = cover_with_grid(region, 5)
    nodes = store_from_points(grid, *THREE_POINTS)
    ref = deterrence("waxman", **WAX)
    model = deterrence("custom", func=lambda d: 0.9 * np.exp(-1.2 * d))
    _, _, probs = pair_probs(nodes, ref)

    def run_one(rep):
        rng = RngState.for_worker(271828, 2, rep)
        return generate_edges_qjump(nodes, model, rng)

    pvalue = _outcome_counts(run_one, probs, runs=20000)
    assert pvalue > 1e-4


def test_conditional_mean_edges_all_algorithms():
    # for a frozen node set the edge count has mean sum(p_ij) and
    # variance sum(p_ij (1 - p_ij)); all three samplers must agree
    region = Rectangle(1.0, 1.0)
    grid = cover_with_grid(region, 4)
    nodes, _ = generate_nodes(region, grid, 100, master_seed=99)
    model = deterrence("waxman", q=0.8, s=2.0)
    qt = build_q_table(model, grid, Metric.L2)
    _, _, probs = pair_probs(nodes, model)
    mean = probs.sum()
    runs = 2000
    se = np.sqrt((probs * (1.0 - probs)).sum() / runs)

    samplers = {
        "naive": lambda r: generate_edges_naive(nodes, model, r),
        "qjump": lambda r: generate_edges_qjump(nodes, model, r),
        "bucket": lambda r: generate_edges_bucket(nodes, grid, model, qt, r),
    }
    for name, sample in samplers.items():
        total = 0
        for rep in range(runs):
            total += sample(RngState.for_worker(561, 2, rep)).e
        assert abs(total / runs - mean) < 4 * se, name


def test_qjump_hit_and_edge_counts():
    # hits ~ Binomial(pairs, p_max), edges ~ sum Bernoulli(p_ij)
    region = Rectangle(1.0, 1.0)
    grid = cover_with_grid(region, 8)
    nodes, _ = generate_nodes(region, grid, 2000, master_seed=4242)
    model = deterrence("waxman", q=0.8, s=1.0)
    _, _, probs = pair_probs(nodes, model)
    pairs = nodes.n * (nodes.n - 1) // 2

    counters = {}
    edges = generate_edges_qjump(nodes, model, RngState.for_worker(4242, 2, 0),
                                 counters=counters)
    hit_mean = pairs * 0.8
    hit_sd = np.sqrt(pairs * 0.8 * 0.2)
    assert abs(counters["hits"] - hit_mean) < 4 * hit_sd
    edge_mean = probs.sum()
    edge_sd = np.sqrt((probs * (1.0 - probs)).sum())
    assert abs(edges.e - edge_mean) < 4 * edge_sd
    assert counters["edges"] == edges.e
    assert counters["hits"] >= counters["edges"]


def test_bucket_hits_match_q_table_expectation():
    region = Rectangle(1.0, 1.0)
    grid = cover_with_grid(region, 10)
    nodes, _ = generate_nodes(region, grid, 3000, master_seed=77)
    model = deterrence("threshold", q=0.6, r=0.15)
    qt = build_q_table(model, grid, Metric.L2)

    counters = {}
    generate_edges_bucket(nodes, grid, model, qt, RngState.for_worker(77, 2, 0),
                          counters=counters)
    mean = expected_hits(nodes.counts, qt, grid.my)
    # Q is 0.6 or 0 here, so every hit is Bernoulli(0.6)
    sd = np.sqrt(mean * 0.4)
    assert abs(counters["hits"] - mean) < 4 * sd


def test_zero_q_table_draws_nothing():
    region = Rectangle(1.0, 1.0)
    grid = cover_with_grid(region, 8)
    nodes, _ = generate_nodes(region, grid, 2000, master_seed=11)
    model = deterrence("waxman", q=0.5, s=1.0)
    qt = QTable(values=np.zeros((grid.mx, grid.my)))
    rng = RngState.for_worker(11, 2, 0)
    edges = generate_edges_bucket(nodes, grid, model, qt, rng)
    assert edges.e == 0
    assert rng.draws == 0


def test_naive_pair_frequencies():
    # inclusion frequency of every pair over many runs
    region = Rectangle(1.0, 1.0)
    grid = cover_with_grid(region, 3)
    nodes, _ = generate_nodes(region, grid, 12, master_seed=8)
    model = deterrence("waxman", q=0.7, s=1.5)
    iu, ju, probs = pair_probs(nodes, model)
    runs = 4000
    hits = np.zeros(len(probs))
    index = {(int(a), int(b)): k for k, (a, b) in enumerate(zip(iu, ju))}
    for rep in range(runs):
        edges = generate_edges_naive(nodes, model, RngState.for_worker(8, 2, rep))
        for a, b in zip(edges.from_ids, edges.to_ids):
            hits[index[(int(a), int(b))]] += 1
    se = np.sqrt(probs * (1.0 - probs) / runs)
    z = (hits / runs - probs) / se
    assert np.abs(z).max() < 4.5


def test_bucket_single_cell_equals_qjump():
    # with one bucket the walk degenerates to the q-jumping sampler,
    # consuming the stream identically
    region = Rectangle(1.0, 1.0)
    grid = cover_with_grid(region, 1)
    nodes, _ = generate_nodes(region, grid, 500, master_seed=21)
    model = deterrence("waxman", q=0.6, s=0.8)
    qt = build_q_table(model, grid, Metric.L2)
    e1 = generate_edges_qjump(nodes, model, RngState.for_worker(21, 2, 0),
                              want_distances=True)
    e2 = generate_edges_bucket(nodes, grid, model, qt, RngState.for_worker(21, 2, 0),
                               want_distances=True)
    assert np.array_equal(e1.from_ids, e2.from_ids)
    assert np.array_equal(e1.to_ids, e2.to_ids)
    assert np.array_equal(e1.dist, e2.dist)


@pytest.mark.parametrize("algorithm", ["naive", "qjump", "bucket"])
def test_buffer_size_does_not_change_output(algorithm):
    region = Rectangle(1.0, 1.0)
    grid = cover_with_grid(region, 6)
    nodes, _ = generate_nodes(region, grid, 400, master_seed=31)
    model = deterrence("waxman", q=0.8, s=1.0)
    qt = build_q_table(model, grid, Metric.L2)

    def run(buffer_edges):
        rng = RngState.for_worker(31, 2, 0)
        if algorithm == "naive":
            return generate_edges_naive(nodes, model, rng,
                                        want_distances=True,
                                        buffer_edges=buffer_edges)
        if algorithm == "qjump":
            return generate_edges_qjump(nodes, model, rng,
                                        want_distances=True,
                                        buffer_edges=buffer_edges)
        return generate_edges_bucket(nodes, grid, model, qt, rng,
                                     want_distances=True,
                                     buffer_edges=buffer_edges)

    small, big = run(7), run(16384)
    assert small.e > 7   # the tiny buffer actually wrapped
    assert np.array_equal(small.from_ids, big.from_ids)
    assert np.array_equal(small.to_ids, big.to_ids)
    assert np.array_equal(small.dist, big.dist)


def test_complete_graph_when_p_is_one():
    region = Rectangle(1.0, 1.0)
    grid = cover_with_grid(region, 4)
    nodes, _ = generate_nodes(region, grid, 80, master_seed=3)
    model = deterrence("ger", q=1.0)
    qt = build_q_table(model, grid, Metric.L2)
    want = {(i, j) for i in range(80) for j in range(i + 1, 80)}
    for edges in (
        generate_edges_naive(nodes, model, RngState.for_worker(3, 2, 0)),
        generate_edges_qjump(nodes, model, RngState.for_worker(3, 2, 1)),
        generate_edges_bucket(nodes, grid, model, qt, RngState.for_worker(3, 2, 2)),
    ):
        got = set(zip(edges.from_ids.tolist(), edges.to_ids.tolist()))
        assert got == want


def test_custom_constant_model_through_buckets():
    region = Rectangle(1.0, 1.0)
    grid = cover_with_grid(region, 5)
    nodes, _ = generate_nodes(region, grid, 300, master_seed=17)
    model = deterrence("custom", func=lambda d: np.full_like(d, 0.2))
    qt = build_q_table(model, grid, Metric.L2)
    pairs = 300 * 299 // 2
    e1 = generate_edges_bucket(nodes, grid, model, qt, RngState.for_worker(17, 2, 0))
    e2 = generate_edges_bucket(nodes, grid, model, qt, RngState.for_worker(17, 2, 0))
    sd = np.sqrt(pairs * 0.2 * 0.8)
    assert abs(e1.e - pairs * 0.2) < 4 * sd
    assert np.array_equal(e1.from_ids, e2.from_ids)
    assert np.array_equal(e1.to_ids, e2.to_ids)


def test_stored_distances_match_coordinates():
    region = Rectangle(2.0, 1.0)
    grid = cover_with_grid(region, 6)
    nodes, _ = generate_nodes(region, grid, 500, master_seed=41)
    model = deterrence("waxman", q=0.9, s=0.5)
    qt = build_q_table(model, grid, Metric.L1)
    edges = generate_edges_bucket(nodes, grid, model, qt,
                                  RngState.for_worker(41, 2, 0),
                                  metric=Metric.L1, want_distances=True)
    assert edges.e > 0
    x = nodes.x.astype(np.float64)
    y = nodes.y.astype(np.float64)
    want = np.array([
        dist_eval(Metric.L1.code, x[a], y[a], x[b], y[b])
        for a, b in zip(edges.from_ids, edges.to_ids)
    ], dtype=np.float32)
    assert np.array_equal(edges.dist, want)


def test_edges_are_ordered_pairs():
    region = Rectangle(1.0, 1.0)
    grid = cover_with_grid(region, 6)
    nodes, _ = generate_nodes(region, grid, 600, master_seed=53)
    model = deterrence("waxman", q=0.7, s=1.0)
    qt = build_q_table(model, grid, Metric.L2)
    for edges in (
        generate_edges_naive(nodes, model, RngState.for_worker(53, 2, 0)),
        generate_edges_qjump(nodes, model, RngState.for_worker(53, 2, 1)),
        generate_edges_bucket(nodes, grid, model, qt, RngState.for_worker(53, 2, 2)),
    ):
        assert np.all(edges.from_ids < edges.to_ids)
        pairs = list(zip(edges.from_ids.tolist(), edges.to_ids.tolist()))
        assert len(set(pairs)) == len(pairs)


# ---------------------------------------------------------------------------
# guards and degenerate inputs


def test_naive_refuses_large_n():
    n = NAIVE_MAX_NODES + 1
    nodes = NodeStore(x=np.zeros(n, dtype=np.float32),
                      y=np.zeros(n, dtype=np.float32),
                      counts=np.array([n], dtype=np.int64),
                      offsets=np.array([0], dtype=np.int64))
    with pytest.raises(ParameterError, match="naive"):
        generate_edges_naive(nodes, deterrence("ger", q=0.5), RngState(1))


def test_non_monotone_model_needs_naive():
    region = Rectangle(1.0, 1.0)
    grid = cover_with_grid(region, 3)
    nodes, _ = generate_nodes(region, grid, 50, master_seed=61)
    with pytest.warns(UserWarning, match="clamped"):
        model = deterrence("exponential", q=0.1, L=2.0)
    assert not model.is_monotone
    qt = build_q_table(model, grid, Metric.L2)
    with pytest.raises(ParameterError, match="naive"):
        generate_edges_qjump(nodes, model, RngState(1))
    with pytest.raises(ParameterError, match="naive"):
        generate_edges_bucket(nodes, grid, model, qt, RngState(1))
    edges = generate_edges_naive(nodes, model, RngState.for_worker(61, 2, 0))
    assert edges.e >= 0


def test_bucket_needs_builtin_metric():
    region = Rectangle(1.0, 1.0)
    grid = cover_with_grid(region, 3)
    nodes, _ = generate_nodes(region, grid, 20, master_seed=71)
    model = deterrence("ger", q=0.5)
    qt = build_q_table(model, grid, Metric.L2)
    with pytest.raises(ParameterError, match="metric"):
        generate_edges_bucket(nodes, grid, model, qt, RngState(1),
                              metric=lambda x1, y1, x2, y2: np.hypot(x1 - x2, y1 - y2))


@pytest.mark.parametrize("n", [0, 1])
def test_tiny_node_sets(n):
    region = Rectangle(1.0, 1.0)
    grid = cover_with_grid(region, 3)
    nodes, _ = generate_nodes(region, grid, n, master_seed=81)
    model = deterrence("waxman", q=0.9, s=0.1)
    qt = build_q_table(model, grid, Metric.L2)
    assert generate_edges_naive(nodes, model, RngState(1)).e == 0
    assert generate_edges_qjump(nodes, model, RngState(2)).e == 0
    assert generate_edges_bucket(nodes, grid, model, qt, RngState(3)).e == 0
