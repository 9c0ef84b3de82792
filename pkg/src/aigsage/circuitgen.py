"""Carry-save array multiplier generator with ground-truth node classes.

Graph node ids (used by labels everywhere in the package) are the AIGER node
indices shifted down by one, so the constant node has no graph id; primary
outputs get virtual ids appended after the last AND node.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .aig import Aig, AigBuilder, Literal

PO, MAJ, XOR, AND, PI = 0, 1, 2, 3, 4
CLASS_NAMES = ("PO", "MAJ", "XOR", "AND", "PI")


@dataclass
class GroundTruth:
    labels: np.ndarray  # int64, indexed by graph node id
    po_nodes: list[int]
    # AIG node of a MAJ/XOR root -> AIG nodes of its structural support
    supports: dict[int, tuple[int, ...]] = field(default_factory=dict)
    num_half_adders: int = 0
    num_full_adders: int = 0


def graph_id(aig_node: int) -> int:
    return aig_node - 1


def aig_node(gid: int) -> int:
    return gid + 1


class CircuitBuilder(AigBuilder):
    """AigBuilder that also records the class of every AND node it emits."""

    def __init__(self, num_inputs: int):
        super().__init__(num_inputs)
        self.tags: dict[int, int] = {}
        self.supports: dict[int, tuple[int, ...]] = {}
        self.num_half_adders = 0
        self.num_full_adders = 0

    def add_and(self, left: Literal, right: Literal, tag: int = AND) -> Literal:
        lit = super().add_and(left, right)
        self.tags[lit.node] = tag
        return lit

    def tag(self, lit: Literal, cls: int, support: tuple[Literal, ...] = ()) -> None:
        self.tags[lit.node] = cls
        if support:
            self.supports[lit.node] = tuple(s.node for s in support)

    def ground_truth(self) -> tuple[Aig, GroundTruth]:
        g = self.build()
        n_core = g.num_inputs + g.num_ands
        labels = np.full(n_core + len(g.outputs), AND, dtype=np.int64)
        labels[: g.num_inputs] = PI
        for node, cls in self.tags.items():
            labels[graph_id(node)] = cls
        po_nodes = list(range(n_core, n_core + len(g.outputs)))
        labels[po_nodes] = PO
        gt = GroundTruth(labels, po_nodes, dict(self.supports),
                         self.num_half_adders, self.num_full_adders)
        return g, gt


def _xor2(a: Literal, b: Literal, builder: CircuitBuilder) -> tuple[Literal, Literal]:
    # XOR = !(a&b) & !(!a&!b); the a&b node doubles as the carry.
    both = builder.add_and(a, b)
    neither = builder.add_and(~a, ~b)
    x = builder.add_and(~both, ~neither)
    return x, both


def gen_half_adder(a: Literal, b: Literal, builder: CircuitBuilder) -> tuple[Literal, Literal]:
    s, carry = _xor2(a, b, builder)
    builder.tag(s, XOR, (a, b))
    builder.tag(carry, MAJ, (a, b))
    builder.num_half_adders += 1
    return s, carry


def gen_full_adder(a: Literal, b: Literal, cin: Literal,
                   builder: CircuitBuilder) -> tuple[Literal, Literal]:
    t, g1 = _xor2(a, b, builder)
    s, g2 = _xor2(t, cin, builder)
    # carry = g1 | g2, stored as the complement of !g1 & !g2
    ncarry = builder.add_and(~g1, ~g2)
    builder.tag(s, XOR, (a, b, cin))
    builder.tag(ncarry, MAJ, (a, b, cin))
    builder.num_full_adders += 1
    return s, ~ncarry


def _add_column(ops: list[Literal], builder: CircuitBuilder) -> tuple[Literal, Literal | None]:
    if len(ops) == 3:
        return gen_full_adder(ops[0], ops[1], ops[2], builder)
    if len(ops) == 2:
        return gen_half_adder(ops[0], ops[1], builder)
    return ops[0], None


def gen_csa_multiplier(width: int) -> tuple[Aig, GroundTruth]:
    """Array multiplier: inputs a0..a{w-1}, b0..b{w-1} (LSB first), outputs m0..m{2w-1}.

    Rows of partial products are reduced carry-save (carries move to the next
    row), and the last carry row is resolved by a ripple-carry stage.
    """
    if width < 2:
        raise ValueError("width must be at least 2")
    w = width
    bld = CircuitBuilder(2 * w)
    a = [bld.input(i) for i in range(w)]
    b = [bld.input(w + j) for j in range(w)]
    outputs: list[Literal] = []

    sums: dict[int, Literal] = {k: bld.add_and(a[k], b[0]) for k in range(w)}
    carries: dict[int, Literal] = {}
    outputs.append(sums.pop(0))
    for r in range(1, w):
        new_sums: dict[int, Literal] = {}
        new_carries: dict[int, Literal] = {}
        for k in range(w):
            wt = r + k
            ops = [x for x in (sums.get(wt), carries.get(wt)) if x is not None]
            ops.append(bld.add_and(a[k], b[r]))
            s, c = _add_column(ops, bld)
            new_sums[wt] = s
            if c is not None:
                new_carries[wt + 1] = c
        outputs.append(new_sums.pop(r))
        sums, carries = new_sums, new_carries

    ripple: Literal | None = None
    for wt in range(w, 2 * w):
        ops = [x for x in (sums.get(wt), carries.get(wt), ripple) if x is not None]
        if not ops:
            raise AssertionError(f"no operand left for output bit {wt}")
        s, ripple = _add_column(ops, bld)
        outputs.append(s)
    if ripple is not None:
        raise AssertionError("carry out of the top output bit")

    for lit in outputs:
        bld.add_output(lit)
    return bld.ground_truth()


def mutate(g: Aig, seed: int) -> Aig:
    """Flip exactly one fanin inversion flag, picked by ``seed``."""
    if g.num_ands == 0:
        raise ValueError("graph has no AND nodes to mutate")
    rng = random.Random(seed)
    k = rng.randrange(g.num_ands)
    side = rng.randrange(2)
    ands = list(g.and_nodes)
    pair = list(ands[k])
    pair[side] = ~pair[side]
    ands[k] = (pair[0], pair[1])
    return Aig(g.num_inputs, tuple(ands), g.outputs)


def multiplier_inputs(a: int, b: int, width: int) -> list[int]:
    """Input assignment a || b, LSB first."""
    return [(a >> i) & 1 for i in range(width)] + [(b >> i) & 1 for i in range(width)]


def word(bits) -> int:
    return sum(int(v) << i for i, v in enumerate(bits))
