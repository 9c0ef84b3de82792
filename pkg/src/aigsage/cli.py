"""Command-line front end and the experiment runner.

Subcommands: gen, encode, partition, train, infer, verify, bench, pipeline.
Run ``python -m aigsage.cli <cmd> --help`` for the options of each.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import encode as enc
from . import gnn, partition, spmm, verify
from .aig import parse_aiger, write_aiger
from .circuitgen import CLASS_NAMES, gen_csa_multiplier, mutate

log = logging.getLogger("aigsage")

METHODS = ("multilevel", "topo")


# -- experiment description --------------------------------------------------

@dataclass
class ExperimentSpec:
    widths: list[int] = field(default_factory=lambda: [8, 16, 32])
    partition_counts: list[int] = field(default_factory=lambda: [1, 2, 4, 8, 16, 32])
    method: str = "multilevel"
    seed: int = 0
    batch: int = 1  # copies of the training circuit per training graph
    train_width: int = 8
    epochs: int = 100
    learning_rate: float = 1e-2
    verify_max_width: int = 32
    mutant_seed: int = -1  # >= 0 also verifies one mutant per width
    bench_n: int = 50_000
    bench_reps: int = 10
    f: int = 32
    out_dir: str = "results"

    # fields that only decide where results go; left out of the hash
    _NOT_HASHED = ("out_dir",)

    def __post_init__(self):
        if not self.widths or min(self.widths) < 2:
            raise ValueError("widths must be >= 2")
        if not self.partition_counts or min(self.partition_counts) < 1:
            raise ValueError("partition counts must be >= 1")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.train_width < 2:
            raise ValueError("train_width must be >= 2")

    def config_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)
                if f.name not in self._NOT_HASHED}

    def config_hash(self) -> str:
        """Git-style object hash (sha1 over 'blob <len>\\0' + canonical JSON), 12 hex chars."""
        body = json.dumps(self.config_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()[:12]


def _coerce(name: str, raw: str):
    ftype = {f.name: f.type for f in dataclasses.fields(ExperimentSpec)}.get(name)
    if ftype is None:
        raise ValueError(f"unknown config key {name!r}")
    raw = raw.strip()
    if ftype.startswith("list"):
        return [int(x) for x in raw.replace(",", " ").split()]
    if ftype == "int":
        return int(raw)
    if ftype == "float":
        return float(raw)
    return raw


def parse_config(text: str) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment; lists are comma separated."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = _coerce(key.strip(), value)
    return out


def load_spec(path=None, overrides=()) -> ExperimentSpec:
    values = parse_config(Path(path).read_text(encoding="utf-8")) if path else {}
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        values[key.strip()] = _coerce(key.strip(), value)
    return ExperimentSpec(**values)


# -- pipeline ----------------------------------------------------------------

def train_reference_model(spec: ExperimentSpec) -> tuple[gnn.Model, float]:
    g, gt = gen_csa_multiplier(spec.train_width)
    graph = enc.encode(g, gt)
    if spec.batch > 1:
        graph = enc.batch(graph, spec.batch)
    t0 = time.perf_counter()
    model = gnn.train(graph, gnn.TrainConfig(epochs=spec.epochs, seed=spec.seed,
                                             learning_rate=spec.learning_rate))
    return model, time.perf_counter() - t0


def make_assignment(graph: enc.EdaGraph, k: int, method: str, seed: int):
    if method == "topo":
        return partition.partition_topo_chunks(graph, k)
    return partition.partition_multilevel(graph, k, seed=seed)


def _verdict(g, labels, width) -> str:
    return verify.backward_rewrite(g, labels=labels, width=width).status


def _run_cell(spec, model, width, g, graph, k, base_proxy):
    pa = make_assignment(graph, k, spec.method, spec.seed)
    cross = partition.crossing_fraction(graph, pa)
    rows = []
    for regrown in (True, False):
        parts = partition.regrow(graph, pa) if regrown else partition.cut_partitions(graph, pa)
        proxy = partition.footprint_proxy(parts)
        t0 = time.perf_counter()
        pred = gnn.predict(model, parts, n=graph.n, truth=graph.labels)
        infer_time = time.perf_counter() - t0
        verdict = ""
        if width <= spec.verify_max_width:
            verdict = _verdict(g, pred.labels, width)
        rows.append({
            "width": width, "k": k, "regrow": regrown, "method": spec.method,
            "nodes": graph.n, "accuracy": pred.accuracy, "crossing_fraction": cross,
            "footprint_proxy_bytes": proxy,
            "footprint_reduction_pct": 100.0 * partition.footprint_reduction(proxy, base_proxy),
            "infer_time_s": infer_time, "verdict": verdict,
        })
    return rows


def run_pipeline(spec: ExperimentSpec, jobs: int = 1, write: bool = True) -> list[dict]:
    """Train once, then sweep (width, k, regrow) cells; rows are sorted and hashed."""
    chash = spec.config_hash()
    model, train_time = train_reference_model(spec)
    cells = []
    extra = []
    for width in spec.widths:
        g, gt = gen_csa_multiplier(width)
        graph = enc.encode(g, gt)
        base = partition.footprint_proxy(partition.regrow(graph, partition.PartitionAssignment(
            np.zeros(graph.n, dtype=np.int64), 1)))
        for k in spec.partition_counts:
            if k > graph.n:
                log.warning("skipping k=%d for width %d (only %d nodes)", k, width, graph.n)
                continue
            cells.append((width, g, graph, k, base))
        if spec.mutant_seed >= 0 and width <= spec.verify_max_width:
            extra.append((width, g, graph))

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        futures = [pool.submit(_run_cell, spec, model, w, g, graph, k, base)
                   for w, g, graph, k, base in cells]
        rows = [r for fut in futures for r in fut.result()]

    for width, g, graph in extra:
        # one mutant per width, classified through the largest regrown partitioning
        bad = mutate(g, spec.mutant_seed)
        bad_graph = enc.encode(bad)
        k = max(k for k in spec.partition_counts if k <= bad_graph.n)
        parts = partition.regrow(bad_graph, make_assignment(bad_graph, k, spec.method, spec.seed))
        pred = gnn.predict(model, parts, n=bad_graph.n)
        rows.append({"width": width, "k": k, "regrow": True, "method": "mutant",
                     "nodes": graph.n, "accuracy": float("nan"), "crossing_fraction": float("nan"),
                     "footprint_proxy_bytes": partition.footprint_proxy(parts),
                     "footprint_reduction_pct": float("nan"), "infer_time_s": float("nan"),
                     "verdict": _verdict(bad, pred.labels, width)})

    for r in rows:
        r["train_time_s"] = train_time
        r["config_hash"] = chash
    rows.sort(key=lambda r: (r["width"], r["method"], r["k"], not r["regrow"]))
    if write:
        write_report(rows, Path(spec.out_dir), "pipeline", spec)
    return rows


def run_bench(spec: ExperimentSpec, workers: int | None = None, write: bool = True) -> list[dict]:
    """SpMM benchmark over a fixed matrix suite: identity, polarized, uniform, CSA adjacency."""
    chash = spec.config_hash()
    suite = {
        "identity": spmm.CsrMatrix.identity(1000),
        "polarized": spmm.polarized_matrix(n=spec.bench_n, seed=spec.seed),
        "uniform": spmm.uniform_matrix(spec.bench_n, 2, seed=spec.seed),
    }
    g, gt = gen_csa_multiplier(max(spec.widths))
    suite[f"csa{max(spec.widths)}"] = enc.encode(g, gt).adjacency(dtype=np.float32)
    rows = []
    for name, m in suite.items():
        rep = spmm.bench(m, f=spec.f, reps=spec.bench_reps, workers=workers, seed=spec.seed)
        row = {"matrix": name, **rep.as_dict(), "correct": rep.max_rel_error <= 1e-5,
               "config_hash": chash}
        row["unit_counts"] = json.dumps(row["unit_counts"], sort_keys=True)
        rows.append(row)
    if write:
        write_report(rows, Path(spec.out_dir), "bench", spec)
    return rows


def write_report(rows: list[dict], out_dir: Path, stem: str, spec: ExperimentSpec | None = None):
    out_dir.mkdir(parents=True, exist_ok=True)
    if rows:
        with open(out_dir / f"{stem}.csv", "w", newline="", encoding="utf-8") as f:
            w = csv.DictWriter(f, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    doc = {"rows": rows}
    if spec is not None:
        doc["config"] = spec.config_dict()
        doc["config_hash"] = spec.config_hash()
    _dump_json(out_dir / f"{stem}.json", doc)


def _dump_json(path, doc) -> None:
    def fix(x):
        if isinstance(x, float) and x != x:
            return None
        if isinstance(x, (np.integer,)):
            return int(x)
        if isinstance(x, (np.floating,)):
            return float(x)
        if isinstance(x, dict):
            return {k: fix(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [fix(v) for v in x]
        return x
    Path(path).write_text(json.dumps(fix(doc), indent=2) + "\n", encoding="utf-8")


# -- subcommands -------------------------------------------------------------

def _read_graph(path):
    return parse_aiger(Path(path).read_bytes())


def cmd_gen(args) -> int:
    g, gt = gen_csa_multiplier(args.width)
    if args.mutate is not None:
        g = mutate(g, args.mutate)
    Path(args.out).write_bytes(write_aiger(g))
    if args.labels:
        enc.write_labels(args.labels, gt.labels)
    print(f"wrote {args.out}: {g.num_inputs} inputs, {g.num_ands} ANDs, {len(g.outputs)} outputs")
    return 0


def cmd_encode(args) -> int:
    g = _read_graph(args.graph)
    graph = enc.encode(g)
    if args.labels:
        graph = dataclasses.replace(graph, labels=enc.read_labels(args.labels, graph.n))
    prefix = Path(args.out_prefix)
    enc.write_edge_list(f"{prefix}.edges", graph)
    enc.write_node_table(f"{prefix}.nodes.csv", graph)
    print(f"{graph.n} nodes, {len(graph.fwd_edges)} edges")
    return 0


def _assignment(args, graph):
    if args.method == "file":
        if not args.assign:
            raise SystemExit("--method file needs --assign")
        return partition.load_assignment(args.assign, graph.n)
    return make_assignment(graph, args.k, args.method, args.seed)


def cmd_partition(args) -> int:
    graph = enc.encode(_read_graph(args.graph))
    pa = _assignment(args, graph)
    if args.out:
        partition.save_assignment(args.out, pa)
    parts = partition.regrow(graph, pa)
    report = {"k": pa.k, "sizes": pa.sizes.tolist(),
              "edge_cut": partition.edge_cut(graph, pa.part_of),
              "crossing_fraction": partition.crossing_fraction(graph, pa),
              "boundary_sizes": [len(p.boundary_nodes) for p in parts],
              "footprint_proxy_bytes": partition.footprint_proxy(parts)}
    if args.json:
        _dump_json(args.json, report)
    print(json.dumps(report))
    return 0


def cmd_train(args) -> int:
    g = _read_graph(args.graph)
    graph = enc.encode(g)
    graph = dataclasses.replace(graph, labels=enc.read_labels(args.labels, graph.n))
    history: list[float] = []
    model = gnn.train(graph, gnn.TrainConfig(epochs=args.epochs, seed=args.seed,
                                             learning_rate=args.lr), history=history)
    gnn.save_model(model, args.out)
    pred = gnn.predict(model, graph)
    print(f"final loss {history[-1] if history else float('nan'):.5f}, "
          f"training accuracy {pred.accuracy:.4f}")
    return 0


def cmd_infer(args) -> int:
    model = gnn.load_model(args.model)
    g = _read_graph(args.graph)
    graph = enc.encode(g)
    if args.labels:
        graph = dataclasses.replace(graph, labels=enc.read_labels(args.labels, graph.n))
    pa = _assignment(args, graph)
    parts = partition.regrow(graph, pa) if args.regrow else partition.cut_partitions(graph, pa)
    t0 = time.perf_counter()
    pred = gnn.predict(model, parts, n=graph.n, truth=graph.labels)
    report = {"k": pa.k, "regrow": args.regrow, "nodes": graph.n,
              "accuracy": pred.accuracy if args.labels else None,
              "per_class": pred.per_class, "confusion": pred.confusion.tolist(),
              "class_counts": {CLASS_NAMES[c]: int((pred.labels == c).sum())
                               for c in range(enc.NUM_CLASSES)},
              "crossing_fraction": partition.crossing_fraction(graph, pa),
              "footprint_proxy_bytes": partition.footprint_proxy(parts),
              "infer_time_s": time.perf_counter() - t0}
    if args.out_labels:
        enc.write_labels(args.out_labels, pred.labels)
    if args.json:
        _dump_json(args.json, report)
    print(json.dumps({k: report[k] for k in ("k", "regrow", "nodes", "accuracy")}))
    return 0


EXIT_CODES = {"equivalent": 0, "not_equivalent": 1, "inconclusive": 2}


def cmd_verify(args) -> int:
    g = _read_graph(args.graph)
    labels = enc.read_labels(args.labels) if args.labels else None
    t0 = time.perf_counter()
    rep = verify.backward_rewrite(g, labels=labels, width=args.width, cap=args.cap)
    doc = rep.as_dict()
    doc["residual"] = repr(rep.residual) if rep.residual is not None else None
    doc["time_s"] = time.perf_counter() - t0
    if args.json:
        _dump_json(args.json, doc)
    print(f"{rep.status} ({doc['time_s']:.2f} s, peak {rep.peak_terms} terms)")
    return EXIT_CODES[rep.status]


def cmd_bench(args) -> int:
    if args.matrix:
        m = spmm.read_matrix_market(args.matrix)
        rep = spmm.bench(m, f=args.f, reps=args.reps, workers=args.workers)
        rows = [{"matrix": Path(args.matrix).name, **rep.as_dict()}]
    else:
        spec = load_spec(args.config, args.set)
        spec = dataclasses.replace(spec, f=args.f, bench_reps=args.reps)
        rows = run_bench(spec, workers=args.workers, write=False)
    for r in rows:
        print(f"{r['matrix']:>12}: speedup {r['speedup']:.2f}x  rel err {r['max_rel_error']:.2e}")
    if args.json:
        _dump_json(args.json, {"rows": rows})
    return 0


def cmd_pipeline(args) -> int:
    spec = load_spec(args.config, args.set)
    if args.out_dir:
        spec = dataclasses.replace(spec, out_dir=args.out_dir)
    rows = run_pipeline(spec, jobs=args.jobs)
    print(f"{len(rows)} rows written to {spec.out_dir}/pipeline.{{csv,json}} "
          f"(config {spec.config_hash()})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aigsage", description=__doc__.splitlines()[0])
    p.add_argument("--workers", type=int, default=None,
                   help=f"SpMM worker threads (also settable via {spmm.WORKERS_ENV})")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("gen", help="generate a CSA multiplier as AIGER ASCII")
    s.add_argument("--width", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--labels")
    s.add_argument("--mutate", type=int, metavar="SEED", help="flip one inversion flag")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("encode", help="write the edge list and node feature table")
    s.add_argument("--graph", required=True)
    s.add_argument("--labels")
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=cmd_encode)

    def part_opts(s):
        s.add_argument("--k", type=int, default=1)
        s.add_argument("--method", choices=METHODS + ("file",), default="multilevel")
        s.add_argument("--assign", help="node_id part_id file for --method file")
        s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("partition", help="partition a graph and report cut statistics")
    s.add_argument("--graph", required=True)
    part_opts(s)
    s.add_argument("--out", help="write the assignment file")
    s.add_argument("--json")
    s.set_defaults(func=cmd_partition)

    s = sub.add_parser("train", help="train the node classifier")
    s.add_argument("--graph", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--epochs", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--lr", type=float, default=gnn.TrainConfig.learning_rate)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("infer", help="classify nodes, optionally per partition")
    s.add_argument("--model", required=True)
    s.add_argument("--graph", required=True)
    s.add_argument("--labels", help="ground truth for the accuracy figure")
    part_opts(s)
    s.add_argument("--no-regrow", dest="regrow", action="store_false")
    s.add_argument("--out-labels")
    s.add_argument("--json")
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("verify", help="check a multiplier by backward rewriting",
                       epilog="exit status: 0 equivalent, 1 not equivalent, 2 inconclusive")
    s.add_argument("--graph", required=True)
    s.add_argument("--labels", help="node classes guiding the rewriting")
    s.add_argument("--width", type=int)
    s.add_argument("--cap", type=int, default=verify.DEFAULT_MONOMIAL_CAP)
    s.add_argument("--json")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("bench", help="SpMM engine vs. row-parallel baseline")
    s.add_argument("--matrix", help="Matrix Market file; default is the built-in suite")
    s.add_argument("--f", type=int, default=32)
    s.add_argument("--reps", type=int, default=10)
    s.add_argument("--config")
    s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    s.add_argument("--json")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("pipeline", help="run the accuracy / footprint sweep")
    s.add_argument("--config", help="flat key = value file")
    s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    s.add_argument("--jobs", type=int, default=1, help="sweep cells run in parallel")
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers is not None:
        os.environ[spmm.WORKERS_ENV] = str(args.workers)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
