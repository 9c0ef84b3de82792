"""AIG + ground truth -> learning graph (symmetric CSR, 4-bit features, labels)."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .aig import Aig
from .circuitgen import GroundTruth, graph_id
from .spmm import CsrMatrix

NUM_FEATURES = 4
NUM_CLASSES = 5


@dataclass(frozen=True)
class EdaGraph:
    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    features: np.ndarray  # (n, 4) int8 in {0, 1}
    labels: np.ndarray  # (n,) int64 in 0..4
    fwd_edges: np.ndarray  # (E, 2) directed (driver, sink) pairs

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    @property
    def num_edges(self) -> int:
        """Number of directed adjacency entries (twice the forward edge count)."""
        return int(self.row_ptr[-1])

    def adjacency(self, normalized: bool = False, dtype=np.float64) -> CsrMatrix:
        """Adjacency as a CsrMatrix; ``normalized`` gives D^-1 A (mean aggregation)."""
        if normalized:
            deg = self.degree.astype(dtype)
            inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
            values = np.repeat(inv, self.degree)
        else:
            values = np.ones(self.num_edges, dtype=dtype)
        return CsrMatrix(self.n, self.n, self.row_ptr, self.col_idx, values.astype(dtype))


def csr_from_edges(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric CSR (row_ptr, col_idx) with both directions of every edge."""
    rows = np.concatenate([src, dst]).astype(np.int64)
    cols = np.concatenate([dst, src]).astype(np.int64)
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=row_ptr[1:])
    return row_ptr, cols


def po_feature(driver_inverted: bool) -> list[int]:
    """Feature vector of a primary output node: [0, X, 1, 1], X = driver inversion.

    Kept as the single place that decides the PO encoding so the rule can be
    revised without touching anything else.
    """
    return [0, int(driver_inverted), 1, 1]


def encode(g: Aig, gt: GroundTruth | None = None) -> EdaGraph:
    """Build the EdaGraph of ``g``. Without ground truth all labels are -1.

    Fanins on the constant node have no graph counterpart and add no edge.
    """
    n_core = g.num_inputs + g.num_ands
    n = n_core + len(g.outputs)
    feats = np.zeros((n, NUM_FEATURES), dtype=np.int8)
    src, dst = [], []
    base = g.first_and
    for k, (left, right) in enumerate(g.and_nodes):
        v = graph_id(base + k)
        feats[v] = (1, 1, int(left.inverted), int(right.inverted))
        for lit in (left, right):
            if lit.node != 0:
                src.append(graph_id(lit.node))
                dst.append(v)
    for j, lit in enumerate(g.outputs):
        v = n_core + j
        feats[v] = po_feature(lit.inverted)
        if lit.node != 0:
            src.append(graph_id(lit.node))
            dst.append(v)
    src_a = np.asarray(src, dtype=np.int64)
    dst_a = np.asarray(dst, dtype=np.int64)
    row_ptr, col_idx = csr_from_edges(n, src_a, dst_a)
    if gt is None:
        labels = np.full(n, -1, dtype=np.int64)
    else:
        labels = np.asarray(gt.labels, dtype=np.int64)
        if labels.shape != (n,):
            raise ValueError(f"ground truth has {labels.shape[0]} labels, graph has {n} nodes")
    return EdaGraph(n, row_ptr, col_idx, feats, labels, np.stack([src_a, dst_a], axis=1))


def batch(g: EdaGraph, copies: int) -> EdaGraph:
    """Disjoint union of ``copies`` copies; node i of copy k becomes k*n + i."""
    if copies < 1:
        raise ValueError("copy count must be >= 1")
    if copies == 1:
        return g
    offs = np.repeat(np.arange(copies, dtype=np.int64) * g.n, len(g.fwd_edges))
    fwd = np.tile(g.fwd_edges, (copies, 1)) + offs[:, None]
    n = g.n * copies
    row_ptr, col_idx = csr_from_edges(n, fwd[:, 0], fwd[:, 1])
    return EdaGraph(n, row_ptr, col_idx, np.tile(g.features, (copies, 1)),
                    np.tile(g.labels, copies), fwd)


def relabel(g: EdaGraph, perm: np.ndarray) -> EdaGraph:
    """Rename node ``i`` to ``perm[i]``."""
    perm = np.asarray(perm, dtype=np.int64)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(g.n)
    fwd = perm[g.fwd_edges]
    row_ptr, col_idx = csr_from_edges(g.n, fwd[:, 0], fwd[:, 1])
    return EdaGraph(g.n, row_ptr, col_idx, g.features[inv], g.labels[inv], fwd)


# -- text interchange -------------------------------------------------------

def write_labels(path, labels) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for i, lab in enumerate(labels):
            f.write(f"{i} {int(lab)}\n")


def read_labels(path, n: int | None = None) -> np.ndarray:
    pairs = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'node_id label'")
            node, lab = int(parts[0]), int(parts[1])
            if node in pairs:
                raise ValueError(f"{path}:{lineno}: duplicate node {node}")
            pairs[node] = lab
    size = n if n is not None else (max(pairs) + 1 if pairs else 0)
    missing = [i for i in range(size) if i not in pairs]
    if missing or len(pairs) != size:
        raise ValueError(f"{path}: labels missing for nodes {missing[:5]}")
    return np.array([pairs[i] for i in range(size)], dtype=np.int64)


def write_edge_list(path, g: EdaGraph) -> None:
    np.savetxt(path, g.fwd_edges, fmt="%d")


def write_node_table(path, g: EdaGraph) -> None:
    buf = io.StringIO()
    buf.write("node,f0,f1,f2,f3,label\n")
    for i in range(g.n):
        f = g.features[i]
        buf.write(f"{i},{f[0]},{f[1]},{f[2]},{f[3]},{g.labels[i]}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
