"""Node partitioning of EdaGraphs and one-hop boundary re-growth.

The multilevel partitioner coarsens with heavy-edge matching, bisects the
coarsest graph recursively by greedy region growing, and refines each level
with two passes of greedy boundary moves under a 5% balance bound.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .encode import EdaGraph, csr_from_edges

BALANCE_TOL = 1.05
REFINE_PASSES = 2
COARSEST_PER_PART = 20


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class PartitionAssignment:
    part_of: np.ndarray
    k: int

    def __post_init__(self):
        part = np.asarray(self.part_of, dtype=np.int64)
        object.__setattr__(self, "part_of", part)
        if self.k < 1:
            raise PartitionError("k must be >= 1")
        if len(part) and (part.min() < 0 or part.max() >= self.k):
            raise PartitionError("partition id out of range")
        sizes = np.bincount(part, minlength=self.k)
        if np.any(sizes == 0):
            raise PartitionError(f"empty partitions: {np.flatnonzero(sizes == 0).tolist()}")

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.part_of, minlength=self.k)

    def members(self, p: int) -> np.ndarray:
        return np.flatnonzero(self.part_of == p)


def max_part_size(n: int, k: int) -> int:
    return math.ceil(BALANCE_TOL * n / k)


def _check_k(n: int, k: int) -> None:
    if k < 1:
        raise PartitionError("k must be >= 1")
    if k > n:
        raise PartitionError(f"k={k} exceeds node count {n}")


def partition_topo_chunks(g: EdaGraph, k: int) -> PartitionAssignment:
    """Contiguous node-id ranges of near-equal size."""
    _check_k(g.n, k)
    return PartitionAssignment((np.arange(g.n, dtype=np.int64) * k) // g.n, k)


def edge_cut(g: EdaGraph, part_of) -> int:
    part_of = np.asarray(part_of)
    e = g.fwd_edges
    return int(np.count_nonzero(part_of[e[:, 0]] != part_of[e[:, 1]]))


def crossing_fraction(g: EdaGraph, pa: PartitionAssignment) -> float:
    """Share of forward edges whose endpoints sit in different partitions."""
    if len(g.fwd_edges) == 0:
        return 0.0
    return edge_cut(g, pa.part_of) / len(g.fwd_edges)


# -- multilevel partitioner --------------------------------------------------

class _WGraph:
    """Weighted undirected graph as adjacency lists (plain Python for loop speed)."""

    def __init__(self, n, xadj, adj, ewgt, vwgt):
        self.n = n
        self.xadj = xadj
        self.adj = adj
        self.ewgt = ewgt
        self.vwgt = vwgt

    @classmethod
    def from_arrays(cls, n, src, dst, w, vwgt) -> "_WGraph":
        keep = src != dst
        src, dst, w = src[keep], dst[keep], w[keep]
        rows = np.concatenate([src, dst])
        cols = np.concatenate([dst, src])
        ww = np.concatenate([w, w])
        if len(rows):
            key = rows * n + cols
            uniq, inv = np.unique(key, return_inverse=True)
            ww = np.bincount(inv, weights=ww).astype(np.int64)
            rows, cols = uniq // n, uniq % n
        xadj = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=xadj[1:])
        return cls(n, xadj.tolist(), cols.tolist(), ww.tolist(), list(vwgt))

    def neighbors(self, u):
        a, b = self.xadj[u], self.xadj[u + 1]
        return zip(self.adj[a:b], self.ewgt[a:b])


def _heavy_edge_matching(G: _WGraph, rng, cap: int) -> list[int]:
    match = [-1] * G.n
    vw = G.vwgt
    for u in rng.permutation(G.n).tolist():
        if match[u] != -1:
            continue
        best, best_w = u, -1
        for v, w in G.neighbors(u):
            if match[v] == -1 and v != u and vw[u] + vw[v] <= cap:
                if w > best_w or (w == best_w and vw[v] < vw[best]):
                    best, best_w = v, w
        match[u] = best
        match[best] = u
    return match


def _contract(G: _WGraph, match: list[int]) -> tuple[_WGraph, np.ndarray]:
    cmap = np.full(G.n, -1, dtype=np.int64)
    nc = 0
    for u in range(G.n):
        if cmap[u] == -1:
            cmap[u] = nc
            cmap[match[u]] = nc
            nc += 1
    vw = np.bincount(cmap, weights=G.vwgt, minlength=nc).astype(np.int64)
    xadj = np.asarray(G.xadj)
    rows = np.repeat(np.arange(G.n), np.diff(xadj))
    src, dst = cmap[rows], cmap[np.asarray(G.adj, dtype=np.int64)]
    half = src < dst  # each undirected edge appears twice in adjacency lists
    Gc = _WGraph.from_arrays(nc, src[half], dst[half], np.asarray(G.ewgt)[half], vw.tolist())
    return Gc, cmap


def _grow_region(G: _WGraph, nodes: list[int], target: int, max_count: int,
                 seed_node: int) -> set[int]:
    """Greedy growing from ``seed_node`` inside ``nodes`` until weight >= target."""
    allowed = set(nodes)
    region: set[int] = set()
    weight = 0
    gain: dict[int, int] = {}
    heap: list[tuple[int, int]] = []
    pending = [seed_node]
    order = iter(nodes)
    while weight < target and len(region) < max_count:
        if not heap:
            # frontier exhausted (disconnected graph): jump to an unvisited node
            start = pending.pop() if pending else next(v for v in order if v not in region)
            if start in region:
                continue
            heap.append((0, start))
            gain.setdefault(start, 0)
        g_neg, u = heapq.heappop(heap)
        if u in region or -g_neg != gain.get(u, 0):
            continue
        region.add(u)
        weight += G.vwgt[u]
        for v, w in G.neighbors(u):
            if v in allowed and v not in region:
                gain[v] = gain.get(v, 0) + 2 * w  # edge flips from external to internal
                heapq.heappush(heap, (-gain[v], v))
    return region


def _subset_cut(G: _WGraph, region: set[int], nodes: list[int]) -> int:
    allowed = set(nodes)
    cut = 0
    for u in region:
        for v, w in G.neighbors(u):
            if v in allowed and v not in region:
                cut += w
    return cut


def _bisect_recursive(G: _WGraph, nodes: list[int], k: int, first_part: int,
                      part: list[int], rng, trials: int = 4) -> None:
    if k == 1:
        for u in nodes:
            part[u] = first_part
        return
    k1 = k // 2
    total = sum(G.vwgt[u] for u in nodes)
    target = total * k1 / k
    max_count = max(1, len(nodes) - (k - k1))  # leave at least one node per remaining part
    best, best_cut = None, None
    picks = rng.choice(len(nodes), size=min(trials, len(nodes)), replace=False)
    for i in picks.tolist():
        region = _grow_region(G, nodes, target, max_count, nodes[i])
        cut = _subset_cut(G, region, nodes)
        if best_cut is None or cut < best_cut:
            best, best_cut = region, cut
    left = [u for u in nodes if u in best]
    right = [u for u in nodes if u not in best]
    _bisect_recursive(G, left, k1, first_part, part, rng, trials)
    _bisect_recursive(G, right, k - k1, first_part + k1, part, rng, trials)


def _refine(G: _WGraph, part: list[int], k: int, max_w: int, rng, passes: int) -> None:
    """Greedy boundary moves: positive gain, or zero gain that improves balance."""
    pw = [0] * k
    for u in range(G.n):
        pw[part[u]] += G.vwgt[u]
    for _ in range(passes):
        moved = 0
        for u in rng.permutation(G.n).tolist():
            p = part[u]
            conn: dict[int, int] = {}
            for v, w in G.neighbors(u):
                conn[part[v]] = conn.get(part[v], 0) + w
            if len(conn) <= 1 and p in conn:
                continue
            internal = conn.get(p, 0)
            wu = G.vwgt[u]
            if pw[p] - wu < 1:
                continue
            best_q, best_gain = -1, None
            for q, c in conn.items():
                if q == p or pw[q] + wu > max_w:
                    continue
                gain = c - internal
                if best_gain is None or gain > best_gain or (gain == best_gain and pw[q] < pw[best_q]):
                    best_q, best_gain = q, gain
            if best_q < 0:
                continue
            if best_gain > 0 or (best_gain == 0 and pw[best_q] + wu < pw[p]):
                part[u] = best_q
                pw[p] -= wu
                pw[best_q] += wu
                moved += 1
        if not moved:
            break


def _enforce_balance(G: _WGraph, part: list[int], k: int, max_w: int) -> None:
    """Unit-weight graph only: fix empty and overweight parts by least-damage moves."""
    sizes = [0] * k
    for p in part:
        sizes[p] += 1

    def move_cost(u, q):
        c = 0
        for v, w in G.neighbors(u):
            if part[v] == part[u]:
                c += w
            elif part[v] == q:
                c -= w
        return c

    def best_move(src_parts, dst_ok):
        best = None
        for u in range(G.n):
            p = part[u]
            if p not in src_parts:
                continue
            cands = {part[v] for v, _ in G.neighbors(u) if part[v] != p and dst_ok(part[v])}
            if not cands:
                cands = {q for q in range(k) if q != p and dst_ok(q)}
            for q in cands:
                c = move_cost(u, q)
                if best is None or c < best[0]:
                    best = (c, u, q)
        return best

    for q in range(k):
        if sizes[q] == 0:
            donor = max(range(k), key=lambda p: sizes[p])
            mv = best_move({donor}, lambda r, q=q: r == q)
            _, u, _ = mv
            part[u] = q
            sizes[donor] -= 1
            sizes[q] += 1
    while True:
        over = {p for p in range(k) if sizes[p] > max_w}
        if not over:
            break
        mv = best_move(over, lambda r: sizes[r] < max_w)
        if mv is None:
            raise PartitionError("cannot satisfy balance constraint")
        _, u, q = mv
        sizes[part[u]] -= 1
        sizes[q] += 1
        part[u] = q


def partition_multilevel(g: EdaGraph, k: int, seed: int = 0) -> PartitionAssignment:
    _check_k(g.n, k)
    if k == 1:
        return PartitionAssignment(np.zeros(g.n, dtype=np.int64), 1)
    rng = np.random.default_rng(seed)
    e = g.fwd_edges
    G0 = _WGraph.from_arrays(g.n, e[:, 0], e[:, 1], np.ones(len(e), dtype=np.int64),
                             [1] * g.n)
    max_w = max_part_size(g.n, k)
    cap = max(1, math.ceil(g.n / (8 * k)))

    levels: list[tuple[_WGraph, np.ndarray]] = []
    G = G0
    while G.n > max(COARSEST_PER_PART * k, 40):
        match = _heavy_edge_matching(G, rng, cap)
        Gc, cmap = _contract(G, match)
        if Gc.n > 0.95 * G.n:
            break
        levels.append((G, cmap))
        G = Gc

    part = [0] * G.n
    _bisect_recursive(G, list(range(G.n)), k, 0, part, rng)
    coarse_max = max(max_w, max(G.vwgt) if G.n else 1)
    _refine(G, part, k, coarse_max, rng, REFINE_PASSES)
    for fine, cmap in reversed(levels):
        part = [part[c] for c in cmap.tolist()]
        G = fine
        _refine(G, part, k, max_w if G is G0 else coarse_max, rng, REFINE_PASSES)
    _enforce_balance(G0, part, k, max_w)
    _refine(G0, part, k, max_w, rng, REFINE_PASSES)
    return PartitionAssignment(np.asarray(part, dtype=np.int64), k)


# -- assignment files --------------------------------------------------------

def save_assignment(path, pa: PartitionAssignment) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for i, p in enumerate(pa.part_of.tolist()):
            f.write(f"{i} {p}\n")


def load_assignment(path, n: int | None = None) -> PartitionAssignment:
    """Read ``node_id part_id`` lines; every node 0..n-1 must appear exactly once."""
    seen: dict[int, int] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) != 2:
                raise PartitionError(f"{path}:{lineno}: expected 'node_id part_id'")
            node, pid = int(parts[0]), int(parts[1])
            if node in seen:
                raise PartitionError(f"{path}:{lineno}: duplicate node {node}")
            if node < 0 or pid < 0:
                raise PartitionError(f"{path}:{lineno}: negative id")
            seen[node] = pid
    size = n if n is not None else (max(seen) + 1 if seen else 0)
    missing = [i for i in range(size) if i not in seen]
    if missing:
        raise PartitionError(f"{path}: missing nodes {missing[:5]}")
    if len(seen) != size:
        raise PartitionError(f"{path}: node ids beyond {size - 1}")
    part = np.array([seen[i] for i in range(size)], dtype=np.int64)
    return PartitionAssignment(part, int(part.max()) + 1 if size else 1)


# -- boundary re-growth ------------------------------------------------------

@dataclass
class AugmentedPartition:
    part: int
    core_nodes: np.ndarray  # S_p, sorted global ids
    boundary_nodes: np.ndarray  # B_p, sorted global ids
    nodes: np.ndarray  # local -> global; cores first, then boundary
    edges: np.ndarray  # E_p+ as local (driver, sink) pairs
    graph: EdaGraph  # local learning graph over S_p+
    core_mask: np.ndarray = field(repr=False)

    @property
    def local_index(self) -> dict[int, int]:
        return {int(gid): i for i, gid in enumerate(self.nodes)}

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)


def _build_partition(g: EdaGraph, p: int, core: np.ndarray, boundary: np.ndarray,
                     edge_sel: np.ndarray) -> AugmentedPartition:
    nodes = np.concatenate([core, boundary])
    lookup = np.full(g.n, -1, dtype=np.int64)
    lookup[nodes] = np.arange(len(nodes))
    edges = lookup[g.fwd_edges[edge_sel]]
    row_ptr, col_idx = csr_from_edges(len(nodes), edges[:, 0], edges[:, 1])
    local = EdaGraph(len(nodes), row_ptr, col_idx, g.features[nodes], g.labels[nodes], edges)
    mask = np.zeros(len(nodes), dtype=bool)
    mask[: len(core)] = True
    return AugmentedPartition(p, core, boundary, nodes, edges, local, mask)


def regrow(g: EdaGraph, pa: PartitionAssignment) -> list[AugmentedPartition]:
    """Augment every partition with its one-hop boundary nodes and crossing edges."""
    part = pa.part_of
    src, dst = g.fwd_edges[:, 0], g.fwd_edges[:, 1]
    ps, pd = part[src], part[dst]
    out = []
    for p in range(pa.k):
        core = np.flatnonzero(part == p)
        in_s, in_d = ps == p, pd == p
        internal = in_s & in_d
        crossing = in_s ^ in_d
        # every endpoint of a crossing edge that lies outside S_p is a boundary node
        outer = np.where(in_s[crossing], dst[crossing], src[crossing])
        boundary = np.unique(outer)
        out.append(_build_partition(g, p, core, boundary, internal | crossing))
    return out


def cut_partitions(g: EdaGraph, pa: PartitionAssignment) -> list[AugmentedPartition]:
    """Partitions with crossing edges dropped (E[S_p] only, no boundary)."""
    part = pa.part_of
    ps, pd = part[g.fwd_edges[:, 0]], part[g.fwd_edges[:, 1]]
    empty = np.zeros(0, dtype=np.int64)
    return [_build_partition(g, p, np.flatnonzero(part == p), empty, (ps == p) & (pd == p))
            for p in range(pa.k)]


def footprint_proxy(parts: list[AugmentedPartition], feature_cols: int = 4,
                    hidden_dim: int = 32) -> int:
    """Estimated bytes of the largest partition: float32 activations plus int64 edge pairs."""
    return max(p.num_nodes * (feature_cols + hidden_dim) * 4 + 2 * p.num_edges * 8
               for p in parts)


def footprint_reduction(proxy_k: int, proxy_1: int) -> float:
    return 1.0 - proxy_k / proxy_1
