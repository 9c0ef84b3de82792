import numpy as np
import pytest

from aigsage.circuitgen import gen_csa_multiplier
from aigsage.encode import EdaGraph, csr_from_edges, encode


def random_eda_graph(n, m, seed):
    """Random simple directed graph (edges low id -> high id) with zero features."""
    rng = np.random.default_rng(seed)
    src = rng.integers(0, n, m)
    dst = rng.integers(0, n, m)
    keep = src != dst
    pairs = np.unique(np.stack([np.minimum(src, dst)[keep], np.maximum(src, dst)[keep]], 1), axis=0)
    src, dst = pairs[:, 0], pairs[:, 1]
    row_ptr, col_idx = csr_from_edges(n, src, dst)
    return EdaGraph(n, row_ptr, col_idx, np.zeros((n, 4), dtype=np.int8),
                    rng.integers(0, 5, n), np.stack([src, dst], axis=1))


@pytest.fixture(scope="session")
def csa():
    cache = {}

    def get(width):
        if width not in cache:
            g, gt = gen_csa_multiplier(width)
            cache[width] = (g, gt, encode(g, gt))
        return cache[width]
    return get


# -- acceptance report ---------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}"
    if detail:
        line += f" | {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
