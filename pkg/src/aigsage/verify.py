"""Multiplier verification by backward rewriting guided by XOR/MAJ labels.

The output word sum(2^k * m_k) is rewritten from the outputs toward the
inputs, always eliminating the highest-index node variable left. A node
labelled XOR or MAJ is replaced in one step by the algebraic model of its
whole cut, but only after the cut's local truth table has been checked
against that model; otherwise the node is expanded as a plain AND. Labels
therefore only change how fast rewriting goes, never the verdict.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np

from .aig import Aig, Literal, simulate_words
from .circuitgen import MAJ, XOR, graph_id
from .poly import Polynomial, fa_reduce, op_poly

DEFAULT_MONOMIAL_CAP = 2_000_000
WITNESS_THRESHOLD = 50_000
WITNESS_SAMPLES = 512
MAX_CUT_CONE = 64


class Inconclusive(RuntimeError):
    pass


@dataclass
class VerifyReport:
    status: str  # "equivalent", "not_equivalent" or "inconclusive"
    residual: Polynomial | None
    substitution_count: int = 0
    shortcut_count: int = 0
    fallback_count: int = 0
    peak_terms: int = 0
    message: str = ""
    # set when rewriting stopped early because simulation found a disagreeing
    # input; the residual is then the partially rewritten polynomial
    counterexample: tuple[int, int] | None = None

    @property
    def equivalent(self) -> bool:
        return self.status == "equivalent"

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "equivalent": self.equivalent,
            "residual_terms": None if self.residual is None else len(self.residual),
            "residual": None if self.residual is None else repr(self.residual)[:2000],
            "substitution_count": self.substitution_count,
            "shortcut_count": self.shortcut_count,
            "fallback_count": self.fallback_count,
            "peak_terms": self.peak_terms,
            "counterexample": self.counterexample,
            "message": self.message,
        }


def literal_poly(lit: Literal) -> Polynomial:
    if lit.node == 0:
        return Polynomial.const(1 if lit.inverted else 0)
    x = Polynomial.var(lit.node)
    return 1 - x if lit.inverted else x


def multiplier_spec(width: int) -> Polynomial:
    """(sum 2^i a_i) * (sum 2^j b_j) over AIG input nodes a_i = i+1, b_j = width+j+1."""
    a = Polynomial({(i + 1,): 1 << i for i in range(width)})
    b = Polynomial({(width + j + 1,): 1 << j for j in range(width)})
    return a * b


def output_word(g: Aig) -> Polynomial:
    w = Polynomial()
    for k, lit in enumerate(g.outputs):
        w = w + (1 << k) * literal_poly(lit)
    return w


# -- local cut functions -----------------------------------------------------

def cut_truth_table(g: Aig, root: int, leaves: tuple[int, ...]) -> int | None:
    """Truth table of ``root`` over ``leaves`` (bit p = value under pattern p), or
    None if the cone of ``root`` is not bounded by ``leaves``."""
    n = len(leaves)
    mask = (1 << (1 << n)) - 1
    words = {}
    for i, leaf in enumerate(leaves):
        words[leaf] = sum(1 << p for p in range(1 << n) if (p >> i) & 1)
    memo: dict[int, int] = dict(words)
    budget = [MAX_CUT_CONE]

    def ev(node: int) -> int:
        if node in memo:
            return memo[node]
        if node == 0:
            return 0
        if not g.is_and(node):
            raise KeyError(node)
        budget[0] -= 1
        if budget[0] < 0:
            raise KeyError(node)
        left, right = g.fanins(node)
        a = ev(left.node) ^ (mask if left.inverted else 0)
        b = ev(right.node) ^ (mask if right.inverted else 0)
        memo[node] = a & b
        return memo[node]

    try:
        return ev(root)
    except KeyError:
        return None


def _tt_of(fn, n: int) -> int:
    return sum(1 << p for p in range(1 << n) if fn(*[(p >> i) & 1 for i in range(n)]))


_KINDS = {
    (XOR, 2): ("XOR2", lambda a, b: a ^ b),
    (XOR, 3): ("XOR3", lambda a, b, c: a ^ b ^ c),
    (MAJ, 2): ("AND", lambda a, b: a & b),
    (MAJ, 3): ("MAJ", lambda a, b, c: (a & b) | (a & c) | (b & c)),
}


def match_model(g: Aig, root: int, cls: int, leaves: tuple[int, ...]) -> Polynomial | None:
    """Operator model of ``root`` over ``leaves`` if its cut really computes a
    (polarity-adjusted) XOR/AND/MAJ of the leaves, else None."""
    key = (cls, len(leaves))
    if key not in _KINDS:
        return None
    tt = cut_truth_table(g, root, leaves)
    if tt is None:
        return None
    kind, fn = _KINDS[key]
    n = len(leaves)
    full = (1 << (1 << n)) - 1
    for pol in itertools.product((0, 1), repeat=n):
        ref = _tt_of(lambda *xs: fn(*[x ^ p for x, p in zip(xs, pol)]), n)
        for out_inv in (0, 1):
            if tt == (ref ^ full if out_inv else ref):
                ins = [literal_poly(Literal(leaf, bool(p))) for leaf, p in zip(leaves, pol)]
                model = op_poly(kind, ins)
                return 1 - model if out_inv else model
        if kind.startswith("XOR"):
            break  # input polarities of XOR only flip the output
    return None


def enumerate_cuts(g: Aig, max_leaves: int = 3, max_cuts: int = 16) -> dict[int, list[tuple[int, ...]]]:
    """Small k-feasible cuts per AND node (trivial cut excluded)."""
    cuts: dict[int, list[frozenset]] = {}
    for v in range(1, g.first_and):
        cuts[v] = [frozenset((v,))]
    out: dict[int, list[tuple[int, ...]]] = {}
    for k, (left, right) in enumerate(g.and_nodes):
        v = g.first_and + k
        lc = cuts.get(left.node, [frozenset()])
        rc = cuts.get(right.node, [frozenset()])
        found: list[frozenset] = []
        seen = set()
        for a in lc:
            for b in rc:
                c = a | b
                if len(c) <= max_leaves and c not in seen:
                    seen.add(c)
                    found.append(c)
        # smaller max-index first: cuts reaching deeper toward the inputs
        found.sort(key=lambda c: (-len(c), max(c, default=0)))
        found = found[:max_cuts]
        out[v] = [tuple(sorted(c)) for c in found]
        cuts[v] = [frozenset((v,))] + found
    return out


def find_supports(g: Aig, labels, root_nodes=None) -> dict[int, tuple[int, ...]]:
    """Pick, for every XOR/MAJ-labelled AND node, a cut whose function matches its label."""
    labels = np.asarray(labels)
    cuts = enumerate_cuts(g)
    out = {}
    nodes = root_nodes if root_nodes is not None else range(g.first_and, g.num_nodes)
    for v in nodes:
        cls = int(labels[graph_id(v)])
        if cls not in (XOR, MAJ):
            continue
        for leaves in cuts.get(v, ()):
            if len(leaves) >= 2 and match_model(g, v, cls, leaves) is not None:
                out[v] = leaves
                break
    return out


# -- rewriting ---------------------------------------------------------------

class _Rewriter:
    """Mutable polynomial with an occurrence index for fast variable elimination."""

    def __init__(self, p: Polynomial, cap: int):
        self.terms: dict[frozenset, int] = dict(p.items())
        self.occ: dict[int, set] = {}
        self.heap: list[int] = []
        self.cap = cap
        self.peak = len(self.terms)
        for m in self.terms:
            self._index(m)

    def _index(self, m):
        for v in m:
            s = self.occ.get(v)
            if s is None:
                s = self.occ[v] = set()
                heapq.heappush(self.heap, -v)
            elif not s:
                heapq.heappush(self.heap, -v)
            s.add(m)

    def _unindex(self, m):
        for v in m:
            self.occ[v].discard(m)

    def add(self, m: frozenset, c: int) -> None:
        if not c:
            return
        old = self.terms.get(m)
        if old is None:
            self.terms[m] = c
            self._index(m)
            if len(self.terms) > self.peak:
                self.peak = len(self.terms)
                if self.peak > self.cap:
                    raise Inconclusive(f"monomial count exceeded {self.cap}")
        else:
            s = old + c
            if s:
                self.terms[m] = s
            else:
                del self.terms[m]
                self._unindex(m)

    def top_var(self) -> int | None:
        while self.heap:
            v = -self.heap[0]
            if self.occ.get(v):
                return v
            heapq.heappop(self.heap)
        return None

    def linear_coeff(self, v: int) -> int | None:
        """Coefficient of v if v occurs only as the linear monomial {v}."""
        occ = self.occ.get(v)
        if occ and len(occ) == 1:
            (m,) = occ
            if len(m) == 1:
                return self.terms[m]
        return None

    def take(self, v: int) -> list[tuple[frozenset, int]]:
        out = []
        for m in list(self.occ.get(v, ())):
            c = self.terms.pop(m)
            self._unindex(m)
            out.append((m - {v}, c))
        return out

    def substitute(self, v: int, p: Polynomial) -> None:
        for rest, c in self.take(v):
            for m2, c2 in p.items():
                self.add(rest | m2, c * c2)

    def add_poly(self, p: Polynomial, scale: int = 1) -> None:
        for m, c in p.items():
            self.add(m, c * scale)

    def polynomial(self) -> Polynomial:
        return Polynomial(dict(self.terms))


@dataclass
class _Models:
    g: Aig
    labels: np.ndarray | None
    supports: dict[int, tuple[int, ...]]
    cache: dict[int, Polynomial | None] = field(default_factory=dict)

    def labelled_model(self, v: int) -> Polynomial | None:
        if v in self.cache:
            return self.cache[v]
        model = None
        if self.labels is not None:
            cls = int(self.labels[graph_id(v)])
            leaves = self.supports.get(v)
            if cls in (XOR, MAJ) and leaves:
                model = match_model(self.g, v, cls, tuple(leaves))
        self.cache[v] = model
        return model

    def and_model(self, v: int) -> Polynomial:
        left, right = self.g.fanins(v)
        return literal_poly(left) * literal_poly(right)


def rewrite(g: Aig, p: Polynomial, labels=None, supports=None,
            cap: int = DEFAULT_MONOMIAL_CAP, witness=None,
            witness_threshold: int = WITNESS_THRESHOLD) -> VerifyReport:
    """Eliminate every AND-node variable of ``p``; residual is over inputs only.

    ``witness`` is an optional zero-argument callable tried once when the
    polynomial grows past ``witness_threshold`` terms. It must return a
    concrete input on which ``p`` evaluates non-zero, or None.
    """
    labels = None if labels is None else np.asarray(labels)
    if labels is not None and supports is None:
        supports = find_supports(g, labels)
    models = _Models(g, labels, dict(supports or {}))
    partner: dict[tuple, list[int]] = {}
    for v, leaves in models.supports.items():
        partner.setdefault(tuple(sorted(leaves)), []).append(v)

    rw = _Rewriter(p, cap)
    subs = shortcuts = fallbacks = 0
    try:
        while True:
            v = rw.top_var()
            if v is None or not g.is_and(v):
                break
            model = models.labelled_model(v)
            if model is not None:
                done = False
                leaves = tuple(sorted(models.supports[v]))
                c_v = rw.linear_coeff(v)
                for u in partner.get(leaves, ()):
                    if u == v or c_v is None:
                        continue
                    c_u = rw.linear_coeff(u)
                    model_u = models.labelled_model(u) if c_u is not None else None
                    if model_u is None:
                        continue
                    # sum/carry pair of one adder: c_v*x_v + c_u*x_u collapses to a linear form
                    if c_u % 2 == 0:
                        merged = fa_reduce(c_v * model, (c_u // 2) * model_u)
                    else:
                        merged = c_v * model + c_u * model_u
                    if merged.degree() <= 1:
                        rw.take(v)
                        rw.take(u)
                        rw.add_poly(merged)
                        shortcuts += 1
                        subs += 2
                        done = True
                        break
                if not done:
                    rw.substitute(v, model)
                    subs += 1
            else:
                if labels is not None and int(labels[graph_id(v)]) in (XOR, MAJ):
                    fallbacks += 1
                rw.substitute(v, models.and_model(v))
                subs += 1
            if witness is not None and rw.peak > witness_threshold:
                cex = witness()
                witness = None
                if cex is not None:
                    return VerifyReport("not_equivalent", rw.polynomial(), subs, shortcuts,
                                        fallbacks, rw.peak,
                                        "stopped early: simulation found a disagreeing input",
                                        cex)
    except Inconclusive as exc:
        return VerifyReport("inconclusive", None, subs, shortcuts, fallbacks, rw.peak, str(exc))
    residual = rw.polynomial()
    return VerifyReport("equivalent" if residual.is_zero() else "not_equivalent",
                        residual, subs, shortcuts, fallbacks, rw.peak)


def backward_rewrite(g: Aig, labels=None, supports=None, width: int | None = None,
                     cap: int = DEFAULT_MONOMIAL_CAP) -> VerifyReport:
    """Check that ``g`` multiplies two ``width``-bit words (inputs a || b, LSB first).

    ``labels`` are per-graph-node classes (predicted or ground truth);
    ``supports`` maps AIG root nodes to cut leaves and is derived by cut
    enumeration when omitted.
    """
    if width is None:
        if g.num_inputs % 2:
            raise ValueError("odd input count; pass width explicitly")
        width = g.num_inputs // 2
    if g.num_inputs != 2 * width:
        raise ValueError(f"graph has {g.num_inputs} inputs, expected {2 * width}")
    diff = output_word(g) - multiplier_spec(width)
    return rewrite(g, diff, labels, supports, cap,
                   witness=lambda: find_counterexample(g, width))


def find_counterexample(g: Aig, width: int, samples: int = WITNESS_SAMPLES,
                        seed: int = 0) -> tuple[int, int] | None:
    """Random (a, b) pairs plus all-ones corners; first pair whose product is wrong."""
    rng = np.random.default_rng(seed)
    top = (1 << width) - 1
    pairs = [(0, 0), (top, top), (top, 1), (1, top)]
    pairs += [(int.from_bytes(rng.bytes(8 * ((width + 63) // 64)), "little") & top,
               int.from_bytes(rng.bytes(8 * ((width + 63) // 64)), "little") & top)
              for _ in range(samples)]
    mask = (1 << len(pairs)) - 1
    words = [0] * (2 * width)
    for p, (a, b) in enumerate(pairs):
        for i in range(width):
            if (a >> i) & 1:
                words[i] |= 1 << p
            if (b >> i) & 1:
                words[width + i] |= 1 << p
    values = simulate_words(g, words, mask)
    outs = [values[l.node] ^ (mask if l.inverted else 0) for l in g.outputs]
    for p, (a, b) in enumerate(pairs):
        got = sum(((o >> p) & 1) << k for k, o in enumerate(outs))
        if got != a * b:
            return a, b
    return None


def node_polynomial(g: Aig, lit: Literal, labels=None, supports=None) -> Polynomial:
    """Polynomial of one literal over the primary inputs."""
    rep = rewrite(g, literal_poly(lit), labels, supports)
    if rep.residual is None:
        raise Inconclusive(rep.message)
    return rep.residual


def truth_table_equiv(g: Aig, width: int) -> bool:
    """Exhaustive simulation against integer multiplication (2*width <= 20)."""
    if 2 * width > 20:
        raise ValueError("width too large for exhaustive checking")
    if g.num_inputs != 2 * width or len(g.outputs) < 1:
        raise ValueError("graph does not look like a width-bit multiplier")
    rows = 1 << (2 * width)
    mask = (1 << rows) - 1
    # pattern p assigns bit i of p to input i, i.e. a || b = p
    words = []
    for i in range(2 * width):
        w = ((1 << (1 << i)) - 1) << (1 << i)
        length = 1 << (i + 1)
        while length < rows:
            w |= w << length
            length *= 2
        words.append(w)
    values = simulate_words(g, words, mask)
    nbytes = max(1, rows // 8)
    got = np.zeros(rows, dtype=np.int64)
    for k, lit in enumerate(g.outputs):
        o = values[lit.node] ^ (mask if lit.inverted else 0)
        bits = np.unpackbits(np.frombuffer(o.to_bytes(nbytes, "little"), dtype=np.uint8),
                             bitorder="little")[:rows]
        got |= bits.astype(np.int64) << k
    p = np.arange(rows, dtype=np.int64)
    return bool(np.array_equal(got, (p & ((1 << width) - 1)) * (p >> width)))
