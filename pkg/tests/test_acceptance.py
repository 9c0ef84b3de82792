"""Acceptance suite: one test and one PASS/FAIL summary line per criterion.

Run on its own with ``pytest tests/test_acceptance.py -v`` (or execute this
file); the summary block at the end of the pytest output lists all criteria.
"""

import os
import random
import statistics
import time

import numpy as np
import pytest

from aigsage import gnn, spmm
from aigsage.aig import simulate_words
from aigsage.circuitgen import PI, PO, gen_csa_multiplier, mutate
from aigsage.cli import ExperimentSpec, run_pipeline
from aigsage.encode import encode
from aigsage.partition import (PartitionAssignment, cut_partitions, footprint_proxy,
                               footprint_reduction, partition_multilevel, regrow)
from aigsage.poly import Polynomial, fa_reduce, op_poly
from aigsage.verify import backward_rewrite, truth_table_equiv

from conftest import random_eda_graph, record


@pytest.fixture(scope="module")
def graphs():
    out = {}
    for w in (2, 8, 16, 32, 64):
        g, gt = gen_csa_multiplier(w)
        out[w] = (g, gt, encode(g, gt))
    return out


@pytest.fixture(scope="module")
def models(graphs):
    """8-bit training, 100 epochs, one model per seed."""
    cache = {}

    def get(seed):
        if seed not in cache:
            t0 = time.perf_counter()
            m = gnn.train(graphs[8][2], gnn.TrainConfig(epochs=100, seed=seed))
            cache[seed] = (m, time.perf_counter() - t0)
        return cache[seed]
    return get


def products(g, pairs, width):
    """Bit-parallel simulation of many (a, b) pairs; returns the output words."""
    mask = (1 << len(pairs)) - 1
    words = [0] * (2 * width)
    for p, (a, b) in enumerate(pairs):
        for i in range(width):
            words[i] |= ((a >> i) & 1) << p
            words[width + i] |= ((b >> i) & 1) << p
    values = simulate_words(g, words, mask)
    outs = [values[o.node] ^ (mask if o.inverted else 0) for o in g.outputs]
    return [sum(((o >> p) & 1) << k for k, o in enumerate(outs)) for p in range(len(pairs))]


def test_c01_feature_encoding(graphs):
    t0 = time.perf_counter()
    g, _, graph = graphs[2]
    f = graph.features.tolist()
    plain = [f[k + g.num_inputs] for k, (l, r) in enumerate(g.and_nodes)
             if not l.inverted and not r.inverted]
    both = [f[k + g.num_inputs] for k, (l, r) in enumerate(g.and_nodes)
            if l.inverted and r.inverted]
    plain_po = [f[graph.n - len(g.outputs) + j] for j, o in enumerate(g.outputs) if not o.inverted]
    ok = (plain and all(v == [1, 1, 0, 0] for v in plain)
          and both and all(v == [1, 1, 1, 1] for v in both)
          and all(v == [0, 0, 0, 0] for v in f[:g.num_inputs])
          and plain_po and all(v == [0, 0, 1, 1] for v in plain_po))
    dt = time.perf_counter() - t0
    ok = bool(ok) and dt < 1
    record(1, "feature encoding of the 2-bit CSA", ok,
           f"AND 1100 x{len(plain)}, AND 1111 x{len(both)}, PI 0000, PO 0011 x{len(plain_po)}, {dt:.3f}s")
    assert ok


def test_c02_labels(graphs):
    t0 = time.perf_counter()
    _, gt, _ = graphs[2]
    lab = gt.labels
    # worked-example node i is graph id i - 1
    expect = np.full(18, 3)
    expect[:4] = PI
    expect[[9, 13]] = 2
    expect[[7, 11]] = 1
    expect[14:] = PO
    dt = time.perf_counter() - t0
    ok = np.array_equal(lab, expect) and dt < 1
    record(2, "2-bit ground-truth labels", ok, f"labels {lab.tolist()}")
    assert ok


def test_c03_simulation(graphs):
    t0 = time.perf_counter()
    g2 = graphs[2][0]
    ok = products(g2, [(0b10, 0b11)], 2) == [0b0110]
    for w in range(2, 6):
        g, _ = gen_csa_multiplier(w)
        pairs = [(a, b) for a in range(1 << w) for b in range(1 << w)]
        ok &= products(g, pairs, w) == [a * b for a, b in pairs]
    rng = random.Random(2024)
    for w in (8, 32, 64):
        pairs = [(rng.getrandbits(w), rng.getrandbits(w)) for _ in range(1000)]
        ok &= products(graphs[w][0], pairs, w) == [a * b for a, b in pairs]
    dt = time.perf_counter() - t0
    ok = ok and dt < 30
    record(3, "multiplier simulation", ok, f"10x11=0110, exhaustive w<=5, 1000 pairs w=8/32/64, {dt:.1f}s")
    assert ok


def test_c04_regrowth_laws(graphs):
    t0 = time.perf_counter()
    problems = []
    _, _, g8 = graphs[8]
    (one,) = regrow(g8, partition_multilevel(g8, 1))
    if len(one.boundary_nodes) or one.num_nodes != g8.n or one.num_edges != len(g8.fwd_edges):
        problems.append("k=1 identity")
    rng = np.random.default_rng(4)
    for t in range(50):
        n = int(rng.integers(2, 201))
        graph = random_eda_graph(n, int(rng.integers(n, 4 * n)), 1000 + t)
        k = int(rng.integers(1, min(n, 12) + 1))
        part = np.concatenate([np.arange(k), rng.integers(0, k, n - k)])
        rng.shuffle(part)
        parts = regrow(graph, PartitionAssignment(part, k))
        cores = np.sort(np.concatenate([p.core_nodes for p in parts]))
        if not np.array_equal(cores, np.arange(n)):
            problems.append(f"cover {t}")
        count = {}
        for p in parts:
            core = set(np.flatnonzero(part == p.part).tolist())
            bnd = {int(x) for u, v in graph.fwd_edges.tolist() if (u in core) != (v in core)
                   for x in (u, v) if x not in core}
            if set(p.boundary_nodes.tolist()) != bnd:
                problems.append(f"B_p graph {t}")
            for a, b in p.edges.tolist():
                key = (int(p.nodes[a]), int(p.nodes[b]))
                count[key] = count.get(key, 0) + 1
        for u, v in graph.fwd_edges.tolist():
            if count.get((u, v)) != (2 if part[u] != part[v] else 1):
                problems.append(f"edge copies {t}")
                break
    dt = time.perf_counter() - t0
    ok = not problems and dt < 30
    record(4, "re-growth identity and set laws", ok,
           f"50 random graphs, {dt:.1f}s" + (f", problems {problems[:3]}" if problems else ""))
    assert ok


def test_c05_accuracy_at_scale(graphs, models):
    t0 = time.perf_counter()
    model, _ = models(0)
    acc32 = gnn.predict(model, graphs[32][2]).accuracy
    acc64 = gnn.predict(model, graphs[64][2]).accuracy
    dt = time.perf_counter() - t0
    ok = acc32 >= 0.99 and acc64 >= 0.99 and dt <= 600
    record(5, "accuracy at scale (train 8-bit, infer 32/64-bit)", ok,
           f"32-bit {100 * acc32:.2f}%, 64-bit {100 * acc64:.2f}%, {dt:.0f}s")
    assert ok


def test_c06_regrowth_recovery(graphs, models):
    _, _, g32 = graphs[32]
    ks = (2, 4, 8, 16)
    rows, ok = [], True
    for seed in range(3):
        model, _ = models(seed)
        diffs = []
        for k in ks:
            pa = partition_multilevel(g32, k, seed=seed)
            on = gnn.predict(model, regrow(g32, pa), n=g32.n).accuracy
            off = gnn.predict(model, cut_partitions(g32, pa), n=g32.n).accuracy
            ok &= on >= off
            diffs.append(on - off)
        rows.append(diffs)
    gain = [r[-1] for r in rows]
    ok = ok and min(gain) > 0 and statistics.mean(gain) >= 0.005
    record(6, "edge re-growth recovery on 32-bit", ok,
           "k=16 gain per seed " + ", ".join(f"{100 * x:.2f}pp" for x in gain)
           + f", mean {100 * statistics.mean(gain):.2f}pp")
    assert ok


def test_c07_footprint(graphs):
    _, _, g64 = graphs[64]
    proxy = {k: footprint_proxy(regrow(g64, partition_multilevel(g64, k))) for k in (1, 2, 4, 8, 16, 32)}
    red8 = footprint_reduction(proxy[8], proxy[1])
    curve = [proxy[k] for k in (2, 4, 8, 16)]
    ok = red8 >= 0.30 and all(a >= b for a, b in zip(curve, curve[1:]))
    record(7, "footprint proxy on 64-bit", ok,
           f"k=8 reduction {100 * red8:.1f}%; proxy bytes "
           + ", ".join(f"k{k}={v}" for k, v in proxy.items()))
    assert ok


def test_c08_spmm_correctness(graphs):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    errs = []
    eye = spmm.CsrMatrix.identity(300)
    x = rng.standard_normal((300, 32)).astype(np.float32)
    errs.append(spmm.relative_error(spmm.execute(spmm.build_plan(eye), eye, x), spmm.reference_spmm(eye, x)))
    for _ in range(20):
        n = int(rng.integers(600, 2001))
        deg = rng.choice([0, 1, 2, 3, 4, 8, 12, 20, 64, 300], size=n)
        deg[rng.integers(n)] = rng.integers(512, 2000)
        m = spmm.random_csr(n, n, deg, rng)
        x = rng.standard_normal((n, 32)).astype(np.float32)
        errs.append(spmm.relative_error(spmm.execute(spmm.build_plan(m, workers=4), m, x),
                                        spmm.reference_spmm(m, x)))
    a = graphs[32][2].adjacency(dtype=np.float32)
    x = rng.standard_normal((a.cols, 32)).astype(np.float32)
    errs.append(spmm.relative_error(spmm.execute(spmm.build_plan(a), a, x), spmm.reference_spmm(a, x)))
    dt = time.perf_counter() - t0
    ok = max(errs) <= 1e-5 and dt < 60
    record(8, "SpMM correctness", ok, f"22 matrices, max rel err {max(errs):.2e}, {dt:.1f}s")
    assert ok


def test_c09_plan_invariants():
    rng = np.random.default_rng(9)
    deg = rng.choice([1, 2, 3, 5, 7, 12, 13, 100], size=3000)
    deg[rng.choice(3000, 5, replace=False)] = [512, 700, 1024, 1031, 2000]
    m = spmm.random_csr(3000, 3000, deg, rng)
    plan = spmm.build_plan(m, workers=8)
    hits = np.zeros(m.nnz, dtype=np.int64)
    for u in plan.work_units:
        hits[u.nz_start:u.nz_end] += 1
    coverage = bool(np.all(hits == 1))
    sdeg = np.diff(plan.sorted_row_ptr)
    hd_ok = len(plan.hd_rows) == 5 and all(
        sum(1 for u in plan.work_units if u.kind == "HD" and u.row_start == r) == 32
        for r in plan.hd_rows.tolist())
    ld_ok = True
    for d, (lo, hi) in plan.ld_groups.items():
        if d == 0:
            continue
        units = [u for u in plan.work_units if u.kind == "LD" and lo <= u.row_start < hi]
        sizes = [u.row_end - u.row_start for u in units]
        want = plan.nz_budget // d
        ld_ok &= all(s == want for s in sizes[:-1]) and 0 < sizes[-1] <= want
        ld_ok &= all(np.all(sdeg[u.row_start:u.row_end] == d) for u in units)
    x = rng.standard_normal((3000, 32)).astype(np.float32)
    r1 = spmm.execute(spmm.build_plan(m, workers=8), m, x, workers=8)
    r2 = spmm.execute(spmm.build_plan(m, workers=8), m, x, workers=8)
    det = r1.tobytes() == r2.tobytes()
    ok = coverage and hd_ok and ld_ok and det
    record(9, "SpMM plan invariants", ok,
           f"coverage={coverage}, HD 32-way={hd_ok}, LD floor(96/d)={ld_ok}, bitwise determinism={det}")
    assert ok


def test_c10_spmm_speedup():
    m = spmm.polarized_matrix(n=50_000, hd_fraction=0.01, hd_degree=1024, ld_max=3, seed=0)
    rep = spmm.bench(m, f=32, reps=10, workers=4)
    cpus = os.cpu_count() or 1
    enforced = cpus >= 4
    passed = rep.speedup >= 1.1 and rep.max_rel_error <= 1e-5
    note = "" if enforced else f" (report-only: {cpus} CPU core(s) available)"
    record(10, "SpMM speedup on the polarized matrix", passed,
           f"median speedup {rep.speedup:.2f}x over 10 reps, 4 workers, rel err "
           f"{rep.max_rel_error:.1e}{note}")
    if enforced:
        assert passed


def test_c11_gradient_check():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    g = random_eda_graph(10, 20, 11)
    g = type(g)(g.n, g.row_ptr, g.col_idx, rng.integers(0, 2, (10, 4)).astype(np.int8),
                g.labels, g.fwd_edges)
    err = gnn.grad_check(gnn.init_model(11), g)
    dt = time.perf_counter() - t0
    ok = err <= 1e-3 and dt < 10
    record(11, "gradient check (float64, 10 nodes)", ok, f"max rel err {err:.2e}, {dt:.1f}s")
    assert ok


def test_c12_verification_soundness():
    t0 = time.perf_counter()
    problems = []
    for w in (2, 3, 4, 5):
        g, gt = gen_csa_multiplier(w)
        rep = backward_rewrite(g, gt.labels)
        if not (rep.equivalent and rep.residual.is_zero() and truth_table_equiv(g, w)):
            problems.append(f"w={w} correct")
        for seed in range(10):
            m = mutate(g, seed)
            rep = backward_rewrite(m, gt.labels, width=w)
            if rep.equivalent or rep.equivalent != truth_table_equiv(m, w):
                problems.append(f"w={w} mutant {seed}")
    a, b, c = (Polynomial.var(v) for v in (1, 2, 3))
    if fa_reduce(op_poly("XOR3", [a, b, c]), op_poly("MAJ", [a, b, c])) != a + b + c:
        problems.append("FA reduction")
    dt = time.perf_counter() - t0
    ok = not problems and dt < 120
    record(12, "verification soundness", ok,
           f"4 correct + 40 mutants agree with truth tables, XOR3+2MAJ=a+b+c, {dt:.1f}s"
           + (f", problems {problems}" if problems else ""))
    assert ok


def test_c13_end_to_end(tmp_path):
    t0 = time.perf_counter()
    spec = ExperimentSpec(widths=[16], partition_counts=[4], mutant_seed=0, out_dir=str(tmp_path))
    rows = run_pipeline(spec)
    good = next(r for r in rows if r["method"] == "multilevel" and r["regrow"])
    bad = next(r for r in rows if r["method"] == "mutant")
    dt = time.perf_counter() - t0
    ok = good["verdict"] == "equivalent" and bad["verdict"] == "not_equivalent" and dt < 300
    record(13, "end-to-end w=16, k=4, regrown, predicted labels", ok,
           f"accuracy {100 * good['accuracy']:.2f}%, correct -> {good['verdict']}, "
           f"mutant -> {bad['verdict']}, {dt:.1f}s")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
