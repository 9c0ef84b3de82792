"""And-Inverter Graph model, ASCII AIGER I/O and bit-level simulation.

Node numbering follows AIGER: index 0 is constant false, inputs occupy
1..num_inputs and AND nodes follow in topological order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence


class AigerError(ValueError):
    pass


class Literal(NamedTuple):
    node: int
    inverted: bool = False

    def __invert__(self) -> "Literal":
        return Literal(self.node, not self.inverted)

    def to_aiger(self) -> int:
        return 2 * self.node + int(self.inverted)

    @classmethod
    def from_aiger(cls, lit: int) -> "Literal":
        return cls(lit >> 1, bool(lit & 1))


FALSE = Literal(0, False)
TRUE = Literal(0, True)


@dataclass(frozen=True)
class Aig:
    num_inputs: int
    and_nodes: tuple[tuple[Literal, Literal], ...] = ()
    outputs: tuple[Literal, ...] = ()

    def __post_init__(self):
        # normalise lists handed in by callers
        object.__setattr__(
            self, "and_nodes",
            tuple((Literal(*l), Literal(*r)) for l, r in self.and_nodes))
        object.__setattr__(self, "outputs", tuple(Literal(*o) for o in self.outputs))
        self.validate()

    @property
    def num_ands(self) -> int:
        return len(self.and_nodes)

    @property
    def num_nodes(self) -> int:
        """Node count including the constant node."""
        return 1 + self.num_inputs + len(self.and_nodes)

    @property
    def first_and(self) -> int:
        return self.num_inputs + 1

    def is_input(self, node: int) -> bool:
        return 1 <= node <= self.num_inputs

    def is_and(self, node: int) -> bool:
        return node >= self.first_and

    def fanins(self, node: int) -> tuple[Literal, Literal]:
        return self.and_nodes[node - self.first_and]

    def validate(self) -> None:
        if self.num_inputs < 0:
            raise AigerError("negative input count")
        for k, (left, right) in enumerate(self.and_nodes):
            idx = self.first_and + k
            for lit in (left, right):
                if not 0 <= lit.node < idx:
                    raise AigerError(
                        f"AND node {idx} has fanin {lit.node}; fanins must precede the node")
        n = self.num_nodes
        for lit in self.outputs:
            if not 0 <= lit.node < n:
                raise AigerError(f"output references missing node {lit.node}")


class AigBuilder:
    """Incremental construction of an Aig, no structural hashing."""

    def __init__(self, num_inputs: int):
        self.num_inputs = num_inputs
        self.and_nodes: list[tuple[Literal, Literal]] = []
        self.outputs: list[Literal] = []

    def input(self, i: int) -> Literal:
        if not 0 <= i < self.num_inputs:
            raise IndexError(i)
        return Literal(i + 1)

    @property
    def next_node(self) -> int:
        return self.num_inputs + 1 + len(self.and_nodes)

    def add_and(self, left: Literal, right: Literal) -> Literal:
        node = self.next_node
        self.and_nodes.append((Literal(*left), Literal(*right)))
        return Literal(node)

    def add_output(self, lit: Literal) -> None:
        self.outputs.append(Literal(*lit))

    def build(self) -> Aig:
        return Aig(self.num_inputs, tuple(self.and_nodes), tuple(self.outputs))


def parse_aiger(data: bytes | str) -> Aig:
    """Parse an ASCII AIGER ("aag") file without latches.

    Symbol table and comment sections are accepted and ignored.
    """
    if isinstance(data, bytes):
        data = data.decode("ascii")
    lines = data.splitlines()
    if not lines:
        raise AigerError("empty input")
    header = lines[0].split()
    if len(header) != 6 or header[0] != "aag":
        raise AigerError(f"malformed header: {lines[0]!r}")
    try:
        m, i, l, o, a = (int(x) for x in header[1:])
    except ValueError:
        raise AigerError(f"malformed header: {lines[0]!r}") from None
    if l != 0:
        raise AigerError("latches are not supported (combinational circuits only)")
    if m < i + a:
        raise AigerError(f"header M={m} smaller than I+A={i + a}")
    if len(lines) < 1 + i + o + a:
        raise AigerError("truncated file")

    def ints(line: str, count: int, what: str) -> list[int]:
        parts = line.split()
        if len(parts) != count:
            raise AigerError(f"malformed {what} line: {line!r}")
        try:
            return [int(x) for x in parts]
        except ValueError:
            raise AigerError(f"malformed {what} line: {line!r}") from None

    pos = 1
    for k in range(i):
        (lit,) = ints(lines[pos + k], 1, "input")
        # inputs must be the canonical 2, 4, ..., 2I so node indices line up
        if lit != 2 * (k + 1):
            raise AigerError(f"input literal {lit} out of order (expected {2 * (k + 1)})")
    pos += i
    outputs = []
    for k in range(o):
        (lit,) = ints(lines[pos + k], 1, "output")
        if lit >> 1 > m:
            raise AigerError(f"output literal {lit} exceeds M={m}")
        outputs.append(Literal.from_aiger(lit))
    pos += o
    ands = []
    for k in range(a):
        lhs, r0, r1 = ints(lines[pos + k], 3, "and")
        node = i + 1 + k
        if lhs != 2 * node:
            raise AigerError(f"AND literal {lhs} out of order (expected {2 * node})")
        left, right = Literal.from_aiger(r0), Literal.from_aiger(r1)
        if left.node >= node or right.node >= node:
            raise AigerError(f"AND node {node} has a fanin that does not precede it (cycle)")
        ands.append((left, right))
    return Aig(i, tuple(ands), tuple(outputs))


def write_aiger(g: Aig) -> bytes:
    m = g.num_inputs + g.num_ands
    out = [f"aag {m} {g.num_inputs} 0 {len(g.outputs)} {g.num_ands}"]
    out += [str(2 * (k + 1)) for k in range(g.num_inputs)]
    out += [str(lit.to_aiger()) for lit in g.outputs]
    for k, (left, right) in enumerate(g.and_nodes):
        out.append(f"{2 * (g.first_and + k)} {left.to_aiger()} {right.to_aiger()}")
    return ("\n".join(out) + "\n").encode("ascii")


def simulate_words(g: Aig, words: Sequence[int], mask: int) -> list[int]:
    """Bit-parallel simulation.

    ``words[i]`` packs the values of input ``i`` across many patterns, one
    pattern per bit; ``mask`` has a 1 for every live pattern bit. Returns
    the packed value of every node (index 0 is the constant).
    """
    if len(words) != g.num_inputs:
        raise ValueError(f"expected {g.num_inputs} input words, got {len(words)}")
    val = [0] * g.num_nodes
    for k, w in enumerate(words):
        val[k + 1] = w & mask
    base = g.first_and
    for k, (left, right) in enumerate(g.and_nodes):
        a = val[left.node] ^ mask if left.inverted else val[left.node]
        b = val[right.node] ^ mask if right.inverted else val[right.node]
        val[base + k] = a & b
    return val


def literal_value(values: Sequence[int], lit: Literal, mask: int) -> int:
    v = values[lit.node]
    return v ^ mask if lit.inverted else v


def simulate(g: Aig, assignment: Sequence[int | bool]) -> list[int]:
    """Evaluate the outputs for one input assignment (one bit per input)."""
    if len(assignment) != g.num_inputs:
        raise ValueError(f"assignment has {len(assignment)} bits, graph has {g.num_inputs} inputs")
    values = simulate_words(g, [int(bool(b)) for b in assignment], 1)
    return [literal_value(values, lit, 1) for lit in g.outputs]


def simulate_many(g: Aig, assignments: Iterable[Sequence[int | bool]]) -> list[list[int]]:
    """Simulate a batch of assignments bit-parallel; returns one output vector per assignment."""
    rows = [list(a) for a in assignments]
    if not rows:
        return []
    words = [0] * g.num_inputs
    for p, row in enumerate(rows):
        if len(row) != g.num_inputs:
            raise ValueError("assignment length mismatch")
        for i, b in enumerate(row):
            if b:
                words[i] |= 1 << p
    mask = (1 << len(rows)) - 1
    values = simulate_words(g, words, mask)
    outs = [literal_value(values, lit, mask) for lit in g.outputs]
    return [[(w >> p) & 1 for w in outs] for p in range(len(rows))]
