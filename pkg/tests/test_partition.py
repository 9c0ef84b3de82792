import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aigsage.partition import (PartitionAssignment, PartitionError, crossing_fraction,
                               cut_partitions, edge_cut, footprint_proxy, footprint_reduction,
                               load_assignment, max_part_size, partition_multilevel,
                               partition_topo_chunks, regrow, save_assignment)

from conftest import random_eda_graph


def brute_force(graph, part, p):
    core = {v for v in range(graph.n) if part[v] == p}
    boundary, edges = set(), set()
    for u, v in graph.fwd_edges.tolist():
        if u in core or v in core:
            edges.add((u, v))
            boundary |= {u, v} - core
    return core, boundary, edges


def check_regrowth(graph, pa):
    parts = regrow(graph, pa)
    assert len(parts) == pa.k
    all_cores = np.concatenate([p.core_nodes for p in parts])
    assert sorted(all_cores.tolist()) == list(range(graph.n))
    for p in parts:
        core, boundary, edges = brute_force(graph, pa.part_of, p.part)
        assert set(p.core_nodes.tolist()) == core
        assert set(p.boundary_nodes.tolist()) == boundary
        got = {(int(p.nodes[a]), int(p.nodes[b])) for a, b in p.edges.tolist()}
        assert got == edges
        assert p.core_mask.sum() == len(core)
    # every crossing edge shows up in exactly two augmented partitions
    count = {}
    for p in parts:
        for a, b in p.edges.tolist():
            key = (int(p.nodes[a]), int(p.nodes[b]))
            count[key] = count.get(key, 0) + 1
    for u, v in graph.fwd_edges.tolist():
        assert count[(u, v)] == (2 if pa.part_of[u] != pa.part_of[v] else 1)
    return parts


def test_k1_identity(csa):
    _, _, graph = csa(4)
    pa = partition_multilevel(graph, 1)
    (p,) = check_regrowth(graph, pa)
    assert len(p.boundary_nodes) == 0
    assert p.num_nodes == graph.n and p.num_edges == len(graph.fwd_edges)


@pytest.mark.parametrize("seed", range(10))
def test_regrow_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 200))
    graph = random_eda_graph(n, 3 * n, seed)
    k = int(rng.integers(1, min(n, 8) + 1))
    part = np.concatenate([np.arange(k), rng.integers(0, k, n - k)])
    rng.shuffle(part)
    check_regrowth(graph, PartitionAssignment(part, k))


@pytest.mark.parametrize("k", [2, 4, 8])
def test_multilevel_balanced_and_better_than_topo(csa, k):
    _, _, graph = csa(8)
    pa = partition_multilevel(graph, k, seed=0)
    assert pa.sizes.max() <= max_part_size(graph.n, k)
    assert crossing_fraction(graph, pa) < crossing_fraction(graph, partition_topo_chunks(graph, k))
    assert np.array_equal(partition_multilevel(graph, k, seed=0).part_of, pa.part_of)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 150), st.integers(1, 6), st.integers(0, 10**6))
def test_multilevel_valid_on_random_graphs(n, k, seed):
    k = min(k, n)
    graph = random_eda_graph(n, 2 * n, seed)
    pa = partition_multilevel(graph, k, seed=seed)
    assert len(pa.part_of) == n and pa.sizes.min() >= 1
    assert pa.sizes.max() <= max_part_size(n, k)


def test_topo_chunks():
    graph = random_eda_graph(10, 20, 0)
    assert partition_topo_chunks(graph, 3).part_of.tolist() == [0, 0, 0, 0, 1, 1, 1, 2, 2, 2]


def test_invalid_k(csa):
    _, _, graph = csa(2)
    with pytest.raises(PartitionError):
        partition_multilevel(graph, 0)
    with pytest.raises(PartitionError):
        partition_topo_chunks(graph, graph.n + 1)
    with pytest.raises(PartitionError):
        PartitionAssignment(np.zeros(4, dtype=np.int64), 2)


def test_assignment_file_roundtrip(tmp_path, csa):
    _, _, graph = csa(4)
    pa = partition_multilevel(graph, 4)
    path = tmp_path / "a.txt"
    save_assignment(path, pa)
    back = load_assignment(path, graph.n)
    assert np.array_equal(back.part_of, pa.part_of) and back.k == 4


@pytest.mark.parametrize("text", ["0 0\n0 1\n", "0 0\n2 1\n", "0 -1\n", "0 0 0\n"])
def test_assignment_file_rejects(tmp_path, text):
    path = tmp_path / "a.txt"
    path.write_text(text)
    with pytest.raises(PartitionError):
        load_assignment(path)


def test_cut_partitions_drop_crossing_edges(csa):
    _, _, graph = csa(6)
    pa = partition_multilevel(graph, 4)
    parts = cut_partitions(graph, pa)
    assert all(len(p.boundary_nodes) == 0 for p in parts)
    assert sum(p.num_edges for p in parts) == len(graph.fwd_edges) - edge_cut(graph, pa.part_of)


def test_footprint_proxy_formula(csa):
    _, _, graph = csa(6)
    one = regrow(graph, partition_multilevel(graph, 1))
    assert footprint_proxy(one) == graph.n * 36 * 4 + 16 * len(graph.fwd_edges)
    four = regrow(graph, partition_multilevel(graph, 4))
    assert 0 < footprint_reduction(footprint_proxy(four), footprint_proxy(one)) < 1
