"""GraphSAGE node classifier (mean aggregators) on top of the spmm engine.

Each layer computes

    relu(H @ W_self + mean_fanin(H) @ W_fanin + mean_fanout(H) @ W_fanout + b)

and a final linear map produces the 5 class logits. The neighbour mean is
split by edge direction: with one symmetric mean, the inner XOR2 root of a
full adder and the adder's XOR3 root have identical neighbourhoods at every
depth, so no depth or width can tell them apart. Gradients are written out
by hand.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import spmm
from .encode import NUM_CLASSES, NUM_FEATURES, EdaGraph

log = logging.getLogger(__name__)

HIDDEN = 32
DEPTH = 4
MAGIC = b"AIGSAGE\0"
FORMAT_VERSION = 1


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class SageLayer:
    w_self: np.ndarray
    w_fanin: np.ndarray
    w_fanout: np.ndarray
    bias: np.ndarray

    def params(self) -> list[np.ndarray]:
        return [self.w_self, self.w_fanin, self.w_fanout, self.bias]


@dataclass
class Model:
    layers: list[SageLayer]
    w_out: np.ndarray
    b_out: np.ndarray

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += layer.params()
        return out + [self.w_out, self.b_out]

    def copy(self) -> "Model":
        return self.astype(self.w_out.dtype)

    def astype(self, dtype) -> "Model":
        return Model([SageLayer(*(p.astype(dtype) for p in l.params())) for l in self.layers],
                     self.w_out.astype(dtype), self.b_out.astype(dtype))


def init_model(seed: int = 0, hidden: int = HIDDEN, depth: int = DEPTH) -> Model:
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, size=(fan_in, fan_out))

    layers = []
    width = NUM_FEATURES
    for _ in range(depth):
        layers.append(SageLayer(glorot(width, hidden), glorot(width, hidden),
                                glorot(width, hidden), np.zeros(hidden)))
        width = hidden
    return Model(layers, glorot(width, NUM_CLASSES), np.zeros(NUM_CLASSES))


@dataclass
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 1e-2
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


def _directed_mean(n: int, rows: np.ndarray, cols: np.ndarray, dtype):
    """Row-normalised CSR over (rows, cols) plus its transpose; both share plans."""
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    deg = np.bincount(rows, minlength=n)
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg, out=row_ptr[1:])
    inv = 1.0 / np.maximum(deg, 1).astype(dtype)
    mean = spmm.CsrMatrix(n, n, row_ptr, cols, inv[rows])
    t_order = np.lexsort((rows, cols))
    t_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(cols, minlength=n), out=t_ptr[1:])
    mean_t = spmm.CsrMatrix(n, n, t_ptr, rows[t_order], inv[rows][t_order])
    return mean, mean_t


class GraphOps:
    """Fanin/fanout mean operators of one graph with reusable SpMM plans."""

    def __init__(self, g: EdaGraph, dtype=np.float64, workers: int | None = None):
        self.n = g.n
        src, dst = g.fwd_edges[:, 0], g.fwd_edges[:, 1]
        self.fanin, self.fanin_t = _directed_mean(g.n, dst, src, dtype)
        self.fanout, self.fanout_t = _directed_mean(g.n, src, dst, dtype)
        # fanin^T has the fanout pattern and vice versa
        self.in_plan = spmm.build_plan(self.fanin, workers=workers)
        self.out_plan = spmm.build_plan(self.fanout, workers=workers)

    def aggregate(self, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (spmm.execute(self.in_plan, self.fanin, h),
                spmm.execute(self.out_plan, self.fanout, h))

    def aggregate_t(self, d_in: np.ndarray, d_out: np.ndarray) -> np.ndarray:
        return (spmm.execute(self.out_plan, self.fanin_t, d_in)
                + spmm.execute(self.in_plan, self.fanout_t, d_out))


def _as_graph(obj) -> EdaGraph:
    return obj.graph if hasattr(obj, "graph") else obj


def _forward(model: Model, ops: GraphOps, x: np.ndarray):
    cache = []
    h = x
    for layer in model.layers:
        agg_in, agg_out = ops.aggregate(h)
        z = h @ layer.w_self + agg_in @ layer.w_fanin + agg_out @ layer.w_fanout + layer.bias
        cache.append((h, agg_in, agg_out, z))
        h = np.maximum(z, 0.0)
    logits = h @ model.w_out + model.b_out
    return logits, h, cache


def forward(model: Model, graph, ops: GraphOps | None = None) -> np.ndarray:
    """Logits (n x 5) for an EdaGraph or an AugmentedPartition."""
    g = _as_graph(graph)
    if g.features.shape[1] != model.layers[0].w_self.shape[0]:
        raise ValueError(f"feature width {g.features.shape[1]} does not match the model")
    dtype = model.w_out.dtype
    ops = ops or GraphOps(g, dtype=dtype)
    logits, _, _ = _forward(model, ops, g.features.astype(dtype))
    return logits


def loss_and_grads(model: Model, ops: GraphOps, x: np.ndarray, labels: np.ndarray,
                   mask: np.ndarray | None = None) -> tuple[float, list[np.ndarray]]:
    """Mean softmax cross-entropy over the masked nodes and its gradients."""
    logits, h_last, cache = _forward(model, ops, x)
    if mask is None:
        mask = labels >= 0
    idx = np.flatnonzero(mask)
    count = max(len(idx), 1)
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -logp[idx, labels[idx]].sum() / count

    d_logits = np.zeros_like(logits)
    d_logits[idx] = np.exp(logp[idx])
    d_logits[idx, labels[idx]] -= 1.0
    d_logits /= count

    grads_out = [h_last.T @ d_logits, d_logits.sum(axis=0)]
    dh = d_logits @ model.w_out.T
    layer_grads = []
    for layer, (h, agg_in, agg_out, z) in zip(reversed(model.layers), reversed(cache)):
        dz = dh * (z > 0)
        layer_grads.append([h.T @ dz, agg_in.T @ dz, agg_out.T @ dz, dz.sum(axis=0)])
        dh = dz @ layer.w_self.T + ops.aggregate_t(dz @ layer.w_fanin.T, dz @ layer.w_fanout.T)
    grads = [g for lg in reversed(layer_grads) for g in lg] + grads_out
    return float(loss), grads


def accuracy(pred: np.ndarray, labels: np.ndarray) -> float:
    keep = labels >= 0
    return float(np.mean(pred[keep] == labels[keep])) if keep.any() else 1.0


def train(graph: EdaGraph, cfg: TrainConfig | None = None,
          model: Model | None = None, history: list | None = None) -> Model:
    """Full-batch Adam on all labeled nodes; deterministic for a given seed."""
    cfg = cfg or TrainConfig()
    if not np.any(graph.labels >= 0):
        raise ValueError("graph carries no labels")
    model = init_model(cfg.seed) if model is None else model.copy()
    if cfg.epochs == 0:
        return model
    ops = GraphOps(graph)
    x = graph.features.astype(np.float64)
    params = model.params()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    for epoch in range(1, cfg.epochs + 1):
        loss, grads = loss_and_grads(model, ops, x, graph.labels)
        if not np.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
        for p, g, mi, vi in zip(params, grads, m, v):
            mi *= cfg.beta1
            mi += (1 - cfg.beta1) * g
            vi *= cfg.beta2
            vi += (1 - cfg.beta2) * g * g
            mhat = mi / (1 - cfg.beta1 ** epoch)
            vhat = vi / (1 - cfg.beta2 ** epoch)
            p -= cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.eps)
        if history is not None:
            history.append(loss)
        if epoch % 25 == 0 or epoch == cfg.epochs:
            log.debug("epoch %d loss %.5f", epoch, loss)
    return model


@dataclass
class Prediction:
    labels: np.ndarray  # predicted class per global node
    confusion: np.ndarray  # [true, predicted] counts over labeled nodes
    accuracy: float
    per_class: dict[str, float] = field(default_factory=dict)


def predict(model: Model, parts, n: int | None = None, truth: np.ndarray | None = None) -> Prediction:
    """Classify every node from its core partition; boundary copies are ignored.

    ``parts`` is a list of AugmentedPartitions (or a single EdaGraph).
    """
    from .circuitgen import CLASS_NAMES

    if isinstance(parts, EdaGraph):
        pred = forward(model, parts).argmax(axis=1)
        truth = parts.labels if truth is None else truth
    else:
        n = n if n is not None else sum(len(p.core_nodes) for p in parts)
        pred = np.full(n, -1, dtype=np.int64)
        if truth is None:
            truth = np.full(n, -1, dtype=np.int64)
            for p in parts:
                truth[p.core_nodes] = p.graph.labels[p.core_mask]
        for p in parts:
            local = forward(model, p).argmax(axis=1)
            pred[p.core_nodes] = local[p.core_mask]
    conf = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    keep = truth >= 0
    np.add.at(conf, (truth[keep], pred[keep]), 1)
    per_class = {CLASS_NAMES[c]: float(conf[c, c] / conf[c].sum())
                 for c in range(NUM_CLASSES) if conf[c].sum()}
    return Prediction(pred, conf, accuracy(pred, truth), per_class)


def grad_check(model: Model, graph: EdaGraph, epsilon: float = 1e-4) -> float:
    """Max relative error between analytic and central-difference gradients."""
    if graph.n > 50:
        raise ValueError("grad_check is meant for graphs with at most 50 nodes")
    model = model.astype(np.float64)
    # tiny graph: thread dispatch would dominate every one of the many forwards
    ops = GraphOps(graph, dtype=np.float64, workers=1)
    x = graph.features.astype(np.float64)
    labels = graph.labels
    idx = np.flatnonzero(labels >= 0)
    _, grads = loss_and_grads(model, ops, x, labels)

    def loss() -> float:
        logits = _forward(model, ops, x)[0]
        shifted = logits - logits.max(axis=1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        return float(-logp[idx, labels[idx]].sum() / max(len(idx), 1))

    worst = 0.0
    for p, g in zip(model.params(), grads):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + epsilon
            lp = loss()
            flat[i] = old - epsilon
            lm = loss()
            flat[i] = old
            num = (lp - lm) / (2 * epsilon)
            denom = max(abs(num), abs(gflat[i]), 1e-7)
            worst = max(worst, abs(num - gflat[i]) / denom)
    return worst


def save_model(model: Model, path) -> None:
    tensors = model.params()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(tensors)))
        for t in tensors:
            f.write(struct.pack("<I", t.ndim))
            f.write(struct.pack(f"<{t.ndim}I", *t.shape))
            f.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_model(path) -> Model:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise ValueError(f"{path}: not a model file")
    pos = len(MAGIC)
    version, count = struct.unpack_from("<II", data, pos)
    pos += 8
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format version {version}")
    tensors = []
    for _ in range(count):
        (ndim,) = struct.unpack_from("<I", data, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        tensors.append(np.frombuffer(data, dtype="<f8", count=size, offset=pos)
                       .reshape(shape).astype(np.float64))
        pos += 8 * size
    if (count - 2) % 4:
        raise ValueError(f"{path}: unexpected tensor count {count}")
    layers = [SageLayer(*tensors[i:i + 4]) for i in range(0, count - 2, 4)]
    return Model(layers, tensors[-2], tensors[-1])
