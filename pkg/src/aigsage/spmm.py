"""Degree-polarized sparse x dense multiplication.

Rows are counting-sorted by degree, then cut into work units:

* HD rows (degree >= hd_threshold) are split into 32 chunks of near-equal
  nonzero count; chunk partial sums are reduced per row after a barrier.
  Units are grouped 64 to a block, i.e. two HD rows per block.
* LD rows (degree <= ld_threshold) with the same degree are packed
  ``nz_budget // d`` rows per unit, so every unit carries about the same
  number of nonzeros. Their results land contiguously in the permuted
  staging buffer and are scattered back once ("coalesced dump").
* Anything in between is one unit per row.

Units are independent and write disjoint slots, so execution order does not
affect the result; the HD reduction order is fixed, which makes the output
bitwise reproducible for a given plan.
"""

from __future__ import annotations

import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

HD_CHUNKS = 32
BLOCK_UNITS = 64
WORKERS_ENV = "AIGSAGE_WORKERS"


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


@dataclass(frozen=True)
class CsrMatrix:
    rows: int
    cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rp = np.asarray(self.row_ptr, dtype=np.int64)
        ci = np.asarray(self.col_idx, dtype=np.int64)
        object.__setattr__(self, "row_ptr", rp)
        object.__setattr__(self, "col_idx", ci)
        object.__setattr__(self, "values", np.asarray(self.values))
        if rp.shape != (self.rows + 1,) or rp[0] != 0 or np.any(np.diff(rp) < 0):
            raise ValueError("row_ptr must be monotone, start at 0 and have rows+1 entries")
        if rp[-1] != len(ci) or len(self.values) != len(ci):
            raise ValueError("nnz mismatch between row_ptr, col_idx and values")
        if len(ci) and (ci.min() < 0 or ci.max() >= self.cols):
            raise ValueError("column index out of range")

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    @classmethod
    def from_dense(cls, a) -> "CsrMatrix":
        a = np.asarray(a)
        rows, cols = np.nonzero(a)
        row_ptr = np.zeros(a.shape[0] + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=a.shape[0]), out=row_ptr[1:])
        return cls(a.shape[0], a.shape[1], row_ptr, cols, a[rows, cols])

    @classmethod
    def identity(cls, n: int, dtype=np.float32) -> "CsrMatrix":
        return cls(n, n, np.arange(n + 1), np.arange(n), np.ones(n, dtype=dtype))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols), dtype=self.values.dtype)
        rows = np.repeat(np.arange(self.rows), self.degree)
        np.add.at(out, (rows, self.col_idx), self.values)
        return out

    def with_values(self, values) -> "CsrMatrix":
        return CsrMatrix(self.rows, self.cols, self.row_ptr, self.col_idx, values)


def read_matrix_market(path) -> CsrMatrix:
    import scipy.io
    import scipy.sparse

    m = scipy.sparse.csr_matrix(scipy.io.mmread(path))
    m.sort_indices()
    return CsrMatrix(m.shape[0], m.shape[1], m.indptr, m.indices,
                     m.data.astype(np.float32))


def degree_sort(m: CsrMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Stable counting sort of rows by ascending degree.

    Returns ``perm`` (perm[i] = original row placed at position i) and the
    row pointer of the reordered matrix.
    """
    deg = m.degree
    counts = np.bincount(deg, minlength=1) if m.rows else np.zeros(1, dtype=np.int64)
    nxt = np.zeros(len(counts), dtype=np.int64)
    np.cumsum(counts[:-1], out=nxt[1:])
    nxt = nxt.tolist()
    perm = [0] * m.rows
    for row, d in enumerate(deg.tolist()):
        perm[nxt[d]] = row
        nxt[d] += 1
    perm = np.asarray(perm, dtype=np.int64)
    sorted_ptr = np.zeros(m.rows + 1, dtype=np.int64)
    np.cumsum(deg[perm], out=sorted_ptr[1:])
    return perm, sorted_ptr


class WorkUnit(NamedTuple):
    kind: str  # "HD", "LD" or "MID"
    row_start: int  # rows in permuted order
    row_end: int
    nz_start: int  # offsets into the permuted nonzero sequence
    nz_end: int
    slot_start: int  # HD: partial-sum slots; LD/MID: permuted output rows
    slot_end: int


@dataclass
class SpmmPlan:
    rows: int
    nnz: int
    perm: np.ndarray
    inv_perm: np.ndarray
    sorted_row_ptr: np.ndarray
    nz_perm: np.ndarray  # permuted nonzero position -> original position
    hd_rows: np.ndarray  # permuted positions
    ld_groups: dict[int, tuple[int, int]]  # degree -> permuted row range
    mid_rows: np.ndarray
    work_units: list[WorkUnit]
    blocks: list[tuple[int, int]]  # unit index ranges executed as one task
    hd_threshold: int = 512
    ld_threshold: int = 12
    nz_budget: int = 96
    workers: int = 1

    def rows_per_ld_unit(self, degree: int) -> int:
        return max(1, self.nz_budget // degree)


def _hd_chunk_bounds(width: int) -> list[int]:
    # first chunks take floor(width/32), the trailing `width % 32` take one more
    q, r = divmod(width, HD_CHUNKS)
    sizes = [q] * (HD_CHUNKS - r) + [q + 1] * r
    return np.concatenate([[0], np.cumsum(sizes)]).tolist()


def build_plan(m: CsrMatrix, workers: int | None = None, hd_threshold: int = 512,
               ld_threshold: int = 12, nz_budget: int = 96) -> SpmmPlan:
    if ld_threshold < 1 or hd_threshold < 1 or nz_budget < 1:
        raise ValueError("thresholds and nz_budget must be >= 1")
    if hd_threshold <= ld_threshold:
        raise ValueError("hd_threshold must exceed ld_threshold")
    workers = default_workers() if workers is None else max(1, int(workers))

    perm, sptr = degree_sort(m)
    inv_perm = np.empty_like(perm)
    inv_perm[perm] = np.arange(m.rows)
    deg_sorted = np.diff(sptr)
    starts = m.row_ptr[perm]
    nz_perm = (np.repeat(starts - sptr[:-1], deg_sorted)
               + np.arange(m.nnz, dtype=np.int64)) if m.nnz else np.zeros(0, np.int64)

    units: list[WorkUnit] = []
    blocks: list[tuple[int, int]] = []

    def close_block(first: int) -> None:
        if len(units) > first:
            blocks.append((first, len(units)))

    # LD groups, ascending degree (degree-0 rows need no work: output stays 0)
    ld_groups: dict[int, tuple[int, int]] = {}
    bounds = np.searchsorted(deg_sorted, np.arange(ld_threshold + 2), side="left")
    for d in range(0, ld_threshold + 1):
        lo, hi = int(bounds[d]), int(bounds[d + 1])
        if lo == hi:
            continue
        ld_groups[d] = (lo, hi)
        if d == 0:
            continue
        step = max(1, nz_budget // d)
        first = len(units)
        for s in range(lo, hi, step):
            e = min(s + step, hi)
            units.append(WorkUnit("LD", s, e, int(sptr[s]), int(sptr[e]), s, e))
            if len(units) - first == BLOCK_UNITS:
                close_block(first)
                first = len(units)
        close_block(first)

    mid_lo = int(bounds[ld_threshold + 1])
    hd_lo = int(np.searchsorted(deg_sorted, hd_threshold, side="left"))
    mid_rows = np.arange(mid_lo, hd_lo)
    first = len(units)
    for r in mid_rows.tolist():
        units.append(WorkUnit("MID", r, r + 1, int(sptr[r]), int(sptr[r + 1]), r, r + 1))
        if len(units) - first == BLOCK_UNITS:
            close_block(first)
            first = len(units)
    close_block(first)

    hd_rows = np.arange(hd_lo, m.rows)
    first = len(units)
    for h, r in enumerate(hd_rows.tolist()):
        cb = _hd_chunk_bounds(int(deg_sorted[r]))
        base = int(sptr[r])
        for c in range(HD_CHUNKS):
            slot = h * HD_CHUNKS + c
            units.append(WorkUnit("HD", r, r + 1, base + cb[c], base + cb[c + 1], slot, slot + 1))
        if len(units) - first == BLOCK_UNITS:  # two HD rows per block
            close_block(first)
            first = len(units)
    close_block(first)

    return SpmmPlan(m.rows, m.nnz, perm, inv_perm, sptr, nz_perm, hd_rows, ld_groups,
                    mid_rows, units, blocks, hd_threshold, ld_threshold, nz_budget, workers)


def _run_block(plan: SpmmPlan, lo: int, hi: int, pcols, pvals, dense, staged, partials):
    units = plan.work_units
    kind = units[lo].kind
    if kind == "LD":
        # consecutive LD units of one degree cover a contiguous row range
        r0, r1 = units[lo].row_start, units[hi - 1].row_end
        nz0, nz1 = units[lo].nz_start, units[hi - 1].nz_end
        d = (nz1 - nz0) // (r1 - r0)
        cols = pcols[nz0:nz1].reshape(r1 - r0, d)
        vals = pvals[nz0:nz1].reshape(r1 - r0, d)
        acc = vals[:, 0, None] * dense[cols[:, 0]]
        for t in range(1, d):
            acc += vals[:, t, None] * dense[cols[:, t]]
        staged[r0:r1] = acc
    elif kind == "MID":
        for u in units[lo:hi]:
            sl = slice(u.nz_start, u.nz_end)
            staged[u.row_start] = (pvals[sl, None] * dense[pcols[sl]]).sum(axis=0)
    else:
        # HD: chunk partial sums for up to two rows
        for k in range(lo, hi, HD_CHUNKS):
            row_units = units[k:k + HD_CHUNKS]
            nz0, nz1 = row_units[0].nz_start, row_units[-1].nz_end
            prod = pvals[nz0:nz1, None] * dense[pcols[nz0:nz1]]
            offs = [u.nz_start - nz0 for u in row_units]
            s0 = row_units[0].slot_start
            if nz1 - nz0 >= HD_CHUNKS:
                partials[s0:s0 + HD_CHUNKS] = np.add.reduceat(prod, offs, axis=0)
            else:
                # reduceat mishandles empty chunks; only reachable with tiny thresholds
                for c, u in enumerate(row_units):
                    partials[s0 + c] = prod[u.nz_start - nz0:u.nz_end - nz0].sum(axis=0)


def execute(plan: SpmmPlan, m: CsrMatrix, dense, workers: int | None = None,
            pool: ThreadPoolExecutor | None = None) -> np.ndarray:
    """Compute ``m @ dense`` following ``plan``."""
    dense = np.asarray(dense)
    if dense.ndim != 2 or dense.shape[0] != m.cols:
        raise ValueError(f"dense operand has shape {dense.shape}, expected ({m.cols}, f)")
    if m.rows != plan.rows or m.nnz != plan.nnz:
        raise ValueError("plan was built for a different matrix")
    dtype = np.result_type(m.values.dtype, dense.dtype)
    dense = dense.astype(dtype, copy=False)
    f = dense.shape[1]
    pcols = m.col_idx[plan.nz_perm]
    pvals = m.values[plan.nz_perm].astype(dtype, copy=False)
    staged = np.zeros((m.rows, f), dtype=dtype)
    partials = np.zeros((len(plan.hd_rows) * HD_CHUNKS, f), dtype=dtype)

    workers = plan.workers if workers is None else workers
    args = (pcols, pvals, dense, staged, partials)
    if pool is not None:
        list(pool.map(lambda b: _run_block(plan, b[0], b[1], *args), plan.blocks))
    elif workers <= 1 or len(plan.blocks) <= 1:
        for lo, hi in plan.blocks:
            _run_block(plan, lo, hi, *args)
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(lambda b: _run_block(plan, b[0], b[1], *args), plan.blocks))

    # barrier passed: fixed-order reduction of HD partial sums
    if len(plan.hd_rows):
        staged[plan.hd_rows] = partials.reshape(len(plan.hd_rows), HD_CHUNKS, f).sum(axis=1)
    return staged[plan.inv_perm]


def reference_spmm(m: CsrMatrix, dense, workers: int = 1) -> np.ndarray:
    """Baseline: one unit per row in natural order, rows split evenly across workers."""
    dense = np.asarray(dense)
    if dense.ndim != 2 or dense.shape[0] != m.cols:
        raise ValueError(f"dense operand has shape {dense.shape}, expected ({m.cols}, f)")
    dtype = np.result_type(m.values.dtype, dense.dtype)
    dense = dense.astype(dtype, copy=False)
    out = np.zeros((m.rows, dense.shape[1]), dtype=dtype)
    rp, ci, vals = m.row_ptr, m.col_idx, m.values.astype(dtype, copy=False)

    def run(lo, hi):
        for i in range(lo, hi):
            a, b = rp[i], rp[i + 1]
            if b > a:
                out[i] = vals[a:b] @ dense[ci[a:b]]

    if workers <= 1:
        run(0, m.rows)
    else:
        edges = np.linspace(0, m.rows, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(lambda k: run(edges[k], edges[k + 1]), range(workers)))
    return out


def relative_error(got, want) -> float:
    """Max absolute deviation scaled by the largest reference magnitude."""
    got, want = np.asarray(got, np.float64), np.asarray(want, np.float64)
    scale = np.abs(want).max() if want.size else 0.0
    err = np.abs(got - want).max() if want.size else 0.0
    return float(err / scale) if scale > 0 else float(err)


# -- synthetic workloads -----------------------------------------------------

def random_csr(rows: int, cols: int, degrees, rng, dtype=np.float32) -> CsrMatrix:
    degrees = np.asarray(degrees, dtype=np.int64)
    row_ptr = np.zeros(rows + 1, dtype=np.int64)
    np.cumsum(degrees, out=row_ptr[1:])
    col_idx = np.concatenate([np.sort(rng.choice(cols, size=d, replace=d > cols))
                              for d in degrees]) if rows else np.zeros(0, np.int64)
    values = rng.standard_normal(len(col_idx)).astype(dtype)
    return CsrMatrix(rows, cols, row_ptr, col_idx.astype(np.int64), values)


def polarized_matrix(n: int = 50_000, hd_fraction: float = 0.01, hd_degree: int = 1024,
                     ld_max: int = 3, seed: int = 0) -> CsrMatrix:
    """``hd_fraction`` of rows with ``hd_degree`` nonzeros, the rest 1..ld_max."""
    rng = np.random.default_rng(seed)
    deg = rng.integers(1, ld_max + 1, size=n)
    hd = rng.choice(n, size=max(1, int(round(n * hd_fraction))), replace=False)
    deg[hd] = hd_degree
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg, out=row_ptr[1:])
    col_idx = rng.integers(0, n, size=int(row_ptr[-1]))
    values = rng.standard_normal(len(col_idx)).astype(np.float32)
    return CsrMatrix(n, n, row_ptr, col_idx, values)


def uniform_matrix(n: int, degree: int, seed: int = 0) -> CsrMatrix:
    rng = np.random.default_rng(seed)
    row_ptr = np.arange(n + 1, dtype=np.int64) * degree
    col_idx = rng.integers(0, n, size=n * degree)
    return CsrMatrix(n, n, row_ptr, col_idx, rng.standard_normal(n * degree).astype(np.float32))


@dataclass
class BenchReport:
    rows: int
    nnz: int
    f: int
    reps: int
    workers: int
    plan_time: float
    exec_time: float
    baseline_time: float
    speedup: float
    max_rel_error: float
    unit_counts: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def bench(m: CsrMatrix, f: int = 32, reps: int = 10, workers: int | None = None,
          seed: int = 0) -> BenchReport:
    """Median-of-``reps`` timings of planned execution vs. the row-parallel baseline."""
    if reps < 3:
        raise ValueError("reps must be >= 3")
    workers = default_workers() if workers is None else workers
    dense = np.random.default_rng(seed).standard_normal((m.cols, f)).astype(np.float32)

    plan_times, exec_times, base_times = [], [], []
    plan = None
    for _ in range(reps):
        t0 = time.perf_counter()
        plan = build_plan(m, workers=workers)
        plan_times.append(time.perf_counter() - t0)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        out = execute(plan, m, dense, pool=pool)
        for _ in range(reps):
            t0 = time.perf_counter()
            out = execute(plan, m, dense, pool=pool)
            exec_times.append(time.perf_counter() - t0)
    ref = reference_spmm(m, dense, workers=workers)
    for _ in range(reps):
        t0 = time.perf_counter()
        ref = reference_spmm(m, dense, workers=workers)
        base_times.append(time.perf_counter() - t0)

    counts: dict[str, int] = {}
    for u in plan.work_units:
        counts[u.kind] = counts.get(u.kind, 0) + 1
    et, bt = statistics.median(exec_times), statistics.median(base_times)
    return BenchReport(m.rows, m.nnz, f, reps, workers, statistics.median(plan_times),
                       et, bt, bt / et if et > 0 else float("inf"),
                       relative_error(out, ref), counts)
