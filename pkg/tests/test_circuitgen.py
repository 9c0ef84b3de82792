import random

import numpy as np
import pytest

from aigsage.aig import simulate, simulate_words
from aigsage.circuitgen import (AND, MAJ, PI, PO, XOR, CircuitBuilder, gen_csa_multiplier,
                                gen_full_adder, gen_half_adder, multiplier_inputs, mutate, word)


def product(g, a, b, w):
    return word(simulate(g, multiplier_inputs(a, b, w)))


def test_two_bit_worked_example():
    g, _ = gen_csa_multiplier(2)
    assert simulate(g, multiplier_inputs(0b10, 0b11, 2)) == [0, 1, 1, 0]


def test_two_bit_labels():
    g, gt = gen_csa_multiplier(2)
    assert gt.labels.tolist() == [4, 4, 4, 4, 3, 3, 3, 1, 3, 2, 3, 1, 3, 2, 0, 0, 0, 0]
    assert gt.po_nodes == [14, 15, 16, 17]
    assert (gt.num_half_adders, gt.num_full_adders) == (2, 0)


@pytest.mark.parametrize("w", [2, 3, 4])
def test_exhaustive_small(w):
    g, _ = gen_csa_multiplier(w)
    for a in range(1 << w):
        for b in range(1 << w):
            assert product(g, a, b, w) == a * b


def test_random_pairs_wide():
    rng = random.Random(1)
    g, _ = gen_csa_multiplier(24)
    for _ in range(50):
        a, b = rng.getrandbits(24), rng.getrandbits(24)
        assert product(g, a, b, 24) == a * b


def test_gate_counts_grow_quadratically():
    counts = {w: gen_csa_multiplier(w)[0].num_ands for w in (8, 16, 32)}
    assert counts == {8: 424, 16: 1872, 32: 7840}
    g, gt = gen_csa_multiplier(8)
    assert gt.num_half_adders + gt.num_full_adders == 8 * 8 - 8


def test_adder_cells_and_labels():
    b = CircuitBuilder(3)
    x, y, z = (b.input(i) for i in range(3))
    s, c = gen_full_adder(x, y, z, b)
    hs, hc = gen_half_adder(x, y, b)
    for lit in (s, c, hs, hc):
        b.add_output(lit)
    g, gt = b.ground_truth()
    for r in range(8):
        bits = [(r >> i) & 1 for i in range(3)]
        n = sum(bits)
        assert simulate(g, bits) == [n & 1, n >> 1, bits[0] ^ bits[1], bits[0] & bits[1]]
    assert gt.labels[s.node - 1] == XOR and gt.labels[c.node - 1] == MAJ
    assert gt.labels[hs.node - 1] == XOR and gt.labels[hc.node - 1] == MAJ
    assert set(gt.labels.tolist()) == {PO, MAJ, XOR, AND, PI}


def test_width_must_be_two():
    with pytest.raises(ValueError):
        gen_csa_multiplier(1)


def test_mutate_flips_one_flag_deterministically():
    g, _ = gen_csa_multiplier(4)
    m1, m2 = mutate(g, 9), mutate(g, 9)
    assert m1 == m2
    diffs = [(k, s) for k, (p, q) in enumerate(zip(g.and_nodes, m1.and_nodes))
             for s in range(2) if p[s] != q[s]]
    assert len(diffs) == 1
    k, s = diffs[0]
    assert g.and_nodes[k][s] == ~m1.and_nodes[k][s]


def test_every_two_bit_flip_breaks_the_product():
    g, _ = gen_csa_multiplier(2)
    seen = set()
    for seed in range(200):
        m = mutate(g, seed)
        seen.add(m)
        assert any(product(m, a, b, 2) != a * b for a in range(4) for b in range(4))
    assert len(seen) == 2 * g.num_ands
