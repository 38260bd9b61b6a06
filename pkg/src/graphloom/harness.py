"""Graph generation, suite running, accuracy reports, and trace files.

A suite is: generate deterministic pseudo-random graphs, run one program
per graph, decode, and compare against the classical oracle exactly. The
report separates the deterministic payload (algorithm, split, per-graph
match flags, accuracy, config echo) from wall time, so identical seeds
and configs produce byte-identical report lines.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from .errors import BoundsError, GraphloomError, ShapeError
from .layout import (Graph, InputMatrix, decode, encode, format_graph,
                     normalize_weights, pad_adjacency)
from .oracles import bfs_ref, dfs_ref, dijkstra_ref, scc_ref
from .programs import build
from .transformer import RunResult, SimConfig, default_max_iterations, run_loop

DEFAULT_SEED = 7

GRAPH_KINDS = ("er_connected", "er_directed", "weighted_er")

# which random-graph family exercises each algorithm
KIND_FOR = {
    "bfs": "er_connected",
    "dfs": "er_directed",
    "scc": "er_directed",
    "dijkstra": "weighted_er",
}
KIND_FOR_MODE = {
    "bfs": "er_connected",
    "dfs": "er_directed",
    "dijkstra": "weighted_er",
}

SUITE_ALGORITHMS = ("bfs", "dfs", "dijkstra", "scc", "multitask")


def default_seed() -> int:
    """Suite seed: the LOOM_SEED environment variable, else 7.

    An explicit seed argument always wins; this is only the fallback.
    """
    raw = os.environ.get("LOOM_SEED")
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise BoundsError(f"LOOM_SEED must be an integer, got {raw!r}") from None


# ---------------------------------------------------------------------------
# graph generation


def _er_edge_probability(n: int) -> float:
    # sparse but connected-in-expectation; the connected family resamples
    return min(1.0, (math.log(max(n, 2)) + 1.0) / n)


def _undirected_connected(n: int, edges: list[tuple[int, int, float]]) -> bool:
    adj: dict[int, list[int]] = {u: [] for u in range(1, n + 1)}
    for u, v, _ in edges:
        adj[u].append(v)
    seen = {1}
    stack = [1]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


def generate_graphs(kind: str, n: int, count: int, seed: int | None = None
                    ) -> list[Graph]:
    """Deterministic pseudo-random graphs; same seed, same suite.

    ``er_connected`` resamples sparse undirected graphs until connected.
    ``weighted_er`` draws weights from the quarter grid [0.25, 4] and pins
    one edge to 0.25, so dividing by the minimum weight leaves every
    weight an exact integer.
    """
    if kind not in GRAPH_KINDS:
        raise BoundsError(f"unknown graph kind {kind!r} (known: {', '.join(GRAPH_KINDS)})")
    if n < 1:
        raise BoundsError("graphs need at least one node")
    if count < 0:
        raise BoundsError("count must be nonnegative")
    rng = np.random.default_rng(default_seed() if seed is None else seed)
    p = _er_edge_probability(n)
    graphs = []
    for _ in range(count):
        if kind == "er_directed":
            mask = rng.random((n, n)) < p
            np.fill_diagonal(mask, False)
            edges = [(int(u + 1), int(v + 1), 1.0) for u, v in np.argwhere(mask)]
            graphs.append(Graph(n, edges, directed=True))
            continue
        while True:
            mask = rng.random((n, n)) < p
            pairs = [(int(u + 1), int(v + 1)) for u, v in np.argwhere(mask) if u < v]
            edges = [(u, v, 1.0) for u, v in pairs]
            edges += [(v, u, 1.0) for u, v in pairs]
            if n == 1 or _undirected_connected(n, edges):
                break
        if kind == "weighted_er":
            weights = {}
            for i, (u, v) in enumerate(pairs):
                w = 0.25 if i == 0 else float(rng.integers(1, 17)) * 0.25
                weights[(u, v)] = weights[(v, u)] = w
            edges = [(u, v, weights[(u, v)]) for u, v, _ in edges]
        graphs.append(Graph(n, edges, directed=False))
    return graphs


# ---------------------------------------------------------------------------
# suite running


def iteration_budget(algorithm: str, n: int) -> int:
    """Per-graph pass limit used by the suite runner.

    The programs take n*n passes (SCC (4n+2)*n), independent of the graph;
    these bounds sit just above that. The config default 10*(3n+5) is a
    safety net for small n but falls below the true count at larger sizes,
    so the runner raises it when the caller has not pinned a limit.
    """
    if algorithm == "scc":
        return (4 * n + 6) * (n + 1)
    return (n + 2) ** 2


@dataclass
class SuiteReport:
    """One suite's outcome. ``accuracy`` is percent matched.

    ``tsv_line`` holds everything deterministic; wall time lives only in
    ``wall_time`` so reports stay byte-identical across runs.
    """

    algorithm: str
    split: str
    count: int
    matches: list[bool]
    config_echo: dict
    wall_time: float

    @property
    def matched(self) -> int:
        return sum(1 for m in self.matches if m)

    @property
    def accuracy(self) -> float:
        return 100.0 * self.matched / self.count if self.count else 100.0

    def line(self) -> str:
        return (f"{self.algorithm} {self.split} {self.matched}/{self.count} "
                f"{self.accuracy:.1f}%")

    def tsv_line(self) -> str:
        flags = "".join("1" if m else "0" for m in self.matches)
        echo = ",".join(f"{k}={self.config_echo[k]}" for k in sorted(self.config_echo))
        return "\t".join([self.algorithm, self.split, str(self.count), flags,
                          f"{self.accuracy:.1f}", echo])


def config_echo(cfg: SimConfig, **variant_flags) -> dict:
    echo = {
        "omega": cfg.omega,
        "epsilon": cfg.epsilon,
        "delta": cfg.delta,
        "temperature": cfg.temperature,
        "annealed_temperature": cfg.annealed_temperature,
        "eta": cfg.eta,
        "activation": cfg.activation,
        "rounding": int(cfg.rounding_enabled),
        "write_prevention": int(cfg.write_prevention_enabled),
    }
    echo.update({k: int(v) if isinstance(v, bool) else v
                 for k, v in variant_flags.items()})
    return echo


def _dists_match(got: list[float], ref: list[float], exact: bool) -> bool:
    if len(got) != len(ref):
        return False
    for a, b in zip(got, ref):
        if math.isinf(a) or math.isinf(b):
            if not (math.isinf(a) and math.isinf(b)):
                return False
        elif exact:
            if a != b:
                return False
        elif abs(a - b) > 1e-6:
            return False
    return True


def prepare_run(algorithm: str, graph: Graph, start: int, cfg: SimConfig,
                mode: str | None = None, level_index_order: bool = False):
    """Everything a run needs: (program, X, A, run config, weight scale).

    Weighted graphs are divided by their minimum weight before encoding
    (the programs expect integer weights of at least 1); decoded
    distances must be multiplied back by the returned scale. When the
    config leaves max_iterations unset, the returned config pins it to
    the per-algorithm budget so long runs cannot spin forever.
    """
    scale = 1.0
    g = graph
    if algorithm in ("dijkstra", "multitask") and graph.weighted:
        g, scale = normalize_weights(graph)
    options = {}
    if algorithm == "bfs":
        options["level_index_order"] = level_index_order
    program = build(algorithm, cfg, **options)
    X = encode(g, algorithm, start, cfg, program.schema, mode=mode)
    A = pad_adjacency(g, X.K)
    run_cfg = cfg
    if cfg.max_iterations is None:
        budget = max(iteration_budget(algorithm, g.n), default_max_iterations(g.n))
        run_cfg = cfg.replace(max_iterations=budget)
    return program, X, A, run_cfg, scale


def rescale_dists(out: dict, scale: float) -> dict:
    if "dists" in out and scale != 1.0:
        out["dists"] = [d if math.isinf(d) else d * scale for d in out["dists"]]
    return out


def run_one(algorithm: str, graph: Graph, start: int, cfg: SimConfig,
            mode: str | None = None, level_index_order: bool = False,
            trace_columns=None) -> tuple[dict, RunResult, float]:
    """Encode, run to termination, decode; returns (output, result, scale)."""
    program, X, A, run_cfg, scale = prepare_run(
        algorithm, graph, start, cfg, mode=mode,
        level_index_order=level_index_order)
    result = run_loop(program, X, A, run_cfg, trace_columns=trace_columns)
    out = rescale_dists(decode(result.X, algorithm), scale)
    return out, result, scale


def oracle_output(algorithm: str, graph: Graph, start: int,
                  mode: str | None = None, level_index_order: bool = False) -> dict:
    """Classical reference output in the same shape as ``decode``."""
    alg = mode if algorithm == "multitask" else algorithm
    if alg == "bfs":
        order = level_index_order or algorithm == "multitask"
        return {"prev": bfs_ref(graph, start, index_order=order)}
    if alg == "dfs":
        return {"prev": dfs_ref(graph, start)}
    if alg == "dijkstra":
        prev, dists = dijkstra_ref(graph, start)
        return {"prev": prev, "dists": dists}
    if alg == "scc":
        return {"sccs": scc_ref(graph, start)}
    raise BoundsError(f"no oracle for algorithm {algorithm!r} mode {mode!r}")


def outputs_match(out: dict, ref: dict, exact_dists: bool) -> bool:
    """True iff every oracle-defined key matches. ``out`` may carry extra
    keys: the multitask decode always exposes dists, but in bfs/dfs mode
    only the predecessor output is defined."""
    if not set(ref) <= set(out):
        return False
    for key in ref:
        if key == "dists":
            if not _dists_match(out["dists"], ref["dists"], exact_dists):
                return False
        elif out[key] != ref[key]:
            return False
    return True


def run_suite(algorithm: str, graphs: list[Graph], cfg: SimConfig | None = None,
              mode: str | None = None, level_index_order: bool = True,
              split: str | None = None) -> SuiteReport:
    """Run one program per graph and compare with the oracle.

    Iteration-limit and bounds errors count as per-graph failures, never
    as crashes. Starts cycle deterministically through the nodes. The BFS
    predecessor convention defaults to index-ordered neighbor expansion
    here (matching the textbook adjacency-list order used by the oracle);
    pass ``level_index_order=False`` for the frontier-order variant.
    """
    if cfg is None:
        cfg = SimConfig()
    t0 = time.perf_counter()
    matches = []
    for i, graph in enumerate(graphs):
        start = (i % graph.n) + 1
        try:
            out, _, _ = run_one(algorithm, graph, start, cfg, mode=mode,
                                level_index_order=level_index_order)
        except GraphloomError:
            matches.append(False)
            continue
        ref = oracle_output(algorithm, graph, start, mode=mode,
                            level_index_order=level_index_order)
        matches.append(outputs_match(out, ref, cfg.activation == "hardmax"))
    wall = time.perf_counter() - t0
    flags = {"mode": mode or ""} if algorithm == "multitask" else {}
    if algorithm == "bfs" or (algorithm == "multitask" and mode == "bfs"):
        flags["clrs_order"] = level_index_order
    echo = config_echo(cfg, **flags)
    if split is None:
        split = str(graphs[0].n) if graphs else "0"
    return SuiteReport(algorithm, split, len(graphs), matches, echo, wall)


def suite(algorithm: str, n: int, count: int, seed: int | None = None,
          cfg: SimConfig | None = None, mode: str | None = None,
          level_index_order: bool = True) -> SuiteReport:
    """Generate the standard graph family for ``algorithm`` and run it."""
    key = mode if algorithm == "multitask" else algorithm
    table = KIND_FOR_MODE if algorithm == "multitask" else KIND_FOR
    if key not in table:
        raise BoundsError(f"no suite family for {algorithm!r} mode {mode!r}")
    graphs = generate_graphs(table[key], n, count, seed)
    return run_suite(algorithm, graphs, cfg, mode=mode,
                     level_index_order=level_index_order)


# ---------------------------------------------------------------------------
# trace files

TRACE_MAGIC = "# graphloom-trace v1"


def write_trace(path: str, program, result: RunResult, A: np.ndarray,
                cfg: SimConfig, meta: dict | None = None) -> None:
    """One record per iteration: the iteration index, then every traced
    column as comma-joined decimal text. Float repr round-trips exactly,
    so a written trace preserves the run bit for bit.
    """
    if result.trace is None:
        raise ShapeError("run was not traced; pass trace_columns to the runner")
    columns = list(result.trace[0].values)
    lines = [TRACE_MAGIC]
    head = {"algorithm": program.algorithm, "options": program.options,
            "config": config_echo(cfg),
            "max_iterations": cfg.max_iterations,
            "iterations": result.iterations, "K": result.X.K, "n": result.X.n}
    head.update(meta or {})
    for key, value in head.items():
        lines.append(f"# {key}: {json.dumps(value)}")
    for row in np.asarray(A):
        lines.append("# A: " + ",".join(repr(float(v)) for v in row))
    lines.append("columns\t" + "\t".join(columns))
    for rec in result.trace:
        cells = [",".join(repr(v) for v in rec.values[c]) for c in columns]
        lines.append("\t".join([str(rec.iteration)] + cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace(path: str) -> tuple[dict, np.ndarray, list[str], list[tuple[int, dict]]]:
    """Returns (meta, A, column names, records); records are
    (iteration, {column: tuple of floats})."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != TRACE_MAGIC:
        raise ShapeError(f"{path} is not a trace file")
    meta: dict = {}
    a_rows = []
    body = []
    for line in lines[1:]:
        if line.startswith("# A: "):
            a_rows.append([float(v) for v in line[5:].split(",")])
        elif line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
        elif line:
            body.append(line)
    if not body or not body[0].startswith("columns\t"):
        raise ShapeError("trace is missing its columns header")
    columns = body[0].split("\t")[1:]
    records = []
    for line in body[1:]:
        cells = line.split("\t")
        values = {c: tuple(float(v) for v in cell.split(","))
                  for c, cell in zip(columns, cells[1:])}
        records.append((int(cells[0]), values))
    return meta, np.asarray(a_rows), columns, records


def replay_trace(path: str) -> bool:
    """Re-run from the trace's initial state and compare every record.

    The program is rebuilt from the recorded algorithm, options, and
    config echo; the initial X is record 0. True iff every value of every
    record reproduces exactly.
    """
    meta, A, columns, records = read_trace(path)
    echo = meta["config"]
    cfg = SimConfig().replace(
        omega=echo["omega"], epsilon=echo["epsilon"], delta=echo["delta"],
        temperature=echo["temperature"],
        annealed_temperature=echo["annealed_temperature"], eta=echo["eta"],
        activation=echo["activation"],
        rounding_enabled=bool(echo["rounding"]),
        write_prevention_enabled=bool(echo["write_prevention"]),
        max_iterations=meta.get("max_iterations"),
    )
    program = build(meta["algorithm"], cfg, **meta["options"])
    names = list(program.schema.names)
    if columns != names:
        return False
    K = meta["K"]
    data = np.zeros((K, len(names)))
    first = records[0][1]
    for j, name in enumerate(names):
        data[:, j] = first[name]
    X = InputMatrix(data=data, schema=program.schema, n=meta["n"])
    from .transformer import run_steps
    result = run_steps(program, X, A, cfg, steps=len(records) - 1,
                       trace_columns="all")
    for rec, (iteration, values) in zip(result.trace, records):
        if rec.iteration != iteration:
            return False
        for c in columns:
            if rec.values[c] != values[c]:
                return False
    return True
