"""Input-matrix layout: graphs, column schemas, encoding and decoding.

The simulated state is one matrix X with K rows: row 0 is the global row
(bias flag B_global = 1) and rows 1..n carry one graph node each
(B_local = 1, positional encoding p_i, node index i). Columns are named;
a ColumnSchema maps names to indices. Pair-valued variables (positional
encodings) occupy two columns named ``base.x`` / ``base.y``.

Values are kept on a quarter-integer grid wherever possible (booleans,
indices, Omega sentinels, edge weights in units of 0.25) so that float64
additions inside the network are exact. Positional encodings are the only
irrational-valued family and are handled specially by the weight builders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AddressError, BoundsError, NotTerminatedError, ShapeError, SizeError
from .posenc import enumerate_positions, nearest_position, position_capacity

PREFIX_COLUMNS = ("P.x", "P.y", "B_global", "B_local", "nindex")


@dataclass
class Graph:
    """Directed weighted graph on nodes 1..n.

    ``edges`` always stores directed (u, v, w) triples; undirected graphs
    store both orientations and set ``directed`` False so the text format
    can round-trip.
    """

    n: int
    edges: list[tuple[int, int, float]] = field(default_factory=list)
    directed: bool = True

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.float64)
        for u, v, w in self.edges:
            a[u - 1, v - 1] = w
        return a

    @property
    def weighted(self) -> bool:
        return any(w != 1.0 for _, _, w in self.edges)


def pad_adjacency(g: Graph, K: int) -> np.ndarray:
    """K x K adjacency with the graph in rows/cols 1..n and zeros elsewhere."""
    if K < g.n + 1:
        raise ShapeError(f"K={K} cannot hold {g.n} nodes plus the global row")
    a = np.zeros((K, K), dtype=np.float64)
    for u, v, w in g.edges:
        if not (1 <= u <= g.n and 1 <= v <= g.n):
            raise ShapeError(f"edge ({u},{v}) outside 1..{g.n}")
        a[u, v] = w
    return a


def normalize_weights(g: Graph) -> tuple[Graph, float]:
    """Divide all weights by the minimum weight; returns (graph, scale).

    Distances computed on the normalised graph multiply back by ``scale``.
    The suite generator draws weights from the 0.25-grid and always includes
    a 0.25 edge, so normalised weights are integers.
    """
    if not g.edges:
        return g, 1.0
    scale = min(w for _, _, w in g.edges)
    if scale <= 0:
        raise BoundsError("edge weights must be positive")
    if scale == 1.0:
        return g, 1.0
    edges = [(u, v, w / scale) for u, v, w in g.edges]
    return Graph(g.n, edges, g.directed), scale


# ---------------------------------------------------------------------------
# graph text format: "n m directed|undirected weighted|unweighted" + edges


def parse_graph(text: str) -> Graph:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ShapeError("empty graph text")
    head = lines[0].split()
    if len(head) != 4:
        raise ShapeError("header must be 'n m directed|undirected weighted|unweighted'")
    n, m = int(head[0]), int(head[1])
    directed = {"directed": True, "undirected": False}[head[2]]
    weighted = {"weighted": True, "unweighted": False}[head[3]]
    edges: list[tuple[int, int, float]] = []
    for ln in lines[1 : 1 + m]:
        parts = ln.split()
        u, v = int(parts[0]), int(parts[1])
        w = float(parts[2]) if weighted else 1.0
        edges.append((u, v, w))
        if not directed:
            edges.append((v, u, w))
    if len(lines) - 1 != m:
        raise ShapeError(f"header promises {m} edges, file has {len(lines) - 1}")
    return Graph(n, edges, directed)


def format_graph(g: Graph) -> str:
    if g.directed:
        listed = list(g.edges)
    else:
        listed = [(u, v, w) for u, v, w in g.edges if u < v or (u == v)]
    weighted = g.weighted
    kind = "directed" if g.directed else "undirected"
    wkind = "weighted" if weighted else "unweighted"
    lines = [f"{g.n} {len(listed)} {kind} {wkind}"]
    for u, v, w in listed:
        lines.append(f"{u} {v} {w!r}" if weighted else f"{u} {v}")
    return "\n".join(lines) + "\n"


def load_graph(path) -> Graph:
    with open(path, "r", encoding="utf-8") as f:
        return parse_graph(f.read())


def save_graph(path, g: Graph) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_graph(g))


# ---------------------------------------------------------------------------
# column schema


class ScratchPool:
    """Per-layer scratch namer. Scratch columns are shared across layers;
    the schema keeps the high-water count and appends them at freeze."""

    def __init__(self, schema: "ColumnSchema"):
        self._schema = schema
        self._used = 0

    def take(self) -> str:
        name = f"S{self._used}"
        self._used += 1
        self._schema._note_scratch(self._used)
        return name

    def reset(self) -> None:
        """Start a new layer: scratch names are reused from S0 upward.

        Safe because every layer leaves its scratch columns at zero
        (attention deposits are cancelled in the same layer and the
        assembler's intermediate slots never touch the state matrix).
        """
        self._used = 0


class ColumnSchema:
    """Ordered name -> column-index map with pair and scratch conventions."""

    def __init__(self, prefix: bool = True):
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        self._scratch_high = 0
        self._frozen = False
        if prefix:
            self.add(*PREFIX_COLUMNS)

    def add(self, *names: str) -> None:
        if self._frozen:
            raise ShapeError("schema is frozen")
        for name in names:
            if name in self._index:
                raise ShapeError(f"duplicate column {name!r}")
            self._index[name] = len(self._names)
            self._names.append(name)

    def add_pair(self, base: str) -> None:
        self.add(base + ".x", base + ".y")

    def scratch_pool(self) -> ScratchPool:
        return ScratchPool(self)

    def _note_scratch(self, used: int) -> None:
        if self._frozen:
            raise ShapeError("schema is frozen")
        self._scratch_high = max(self._scratch_high, used)

    def freeze(self) -> "ColumnSchema":
        if not self._frozen:
            for i in range(self._scratch_high):
                self.add(f"S{i}")
            self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def width(self) -> int:
        return len(self._names) + (0 if self._frozen else self._scratch_high)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._names)

    @property
    def scratch_names(self) -> tuple[str, ...]:
        return tuple(n for n in self._names if n.startswith("S") and n[1:].isdigit())

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"no column named {name!r}") from None

    def pair(self, base: str) -> tuple[str, str]:
        return base + ".x", base + ".y"

    def __contains__(self, name: str) -> bool:
        return name in self._index


@dataclass
class InputMatrix:
    data: np.ndarray
    schema: ColumnSchema
    n: int

    @property
    def K(self) -> int:
        return self.data.shape[0]

    def col(self, name: str) -> np.ndarray:
        return self.data[:, self.schema.index(name)]

    def value(self, row: int, name: str) -> float:
        return float(self.data[row, self.schema.index(name)])

    def copy(self) -> "InputMatrix":
        return InputMatrix(self.data.copy(), self.schema, self.n)


# ---------------------------------------------------------------------------
# encoding


def _require_capacity(count: int, delta: float) -> None:
    cap = position_capacity(delta)
    if count > cap - 1:
        raise BoundsError(
            f"need positions p_0..p_{count} but delta supports {cap} distinct positions"
        )


def _base_matrix(n: int, K: int, schema: ColumnSchema, delta: float) -> InputMatrix:
    if not schema.frozen:
        raise ShapeError("schema must be frozen before encoding")
    X = np.zeros((K, schema.width), dtype=np.float64)
    pos = enumerate_positions(K - 1, delta)
    ix, iy = schema.index("P.x"), schema.index("P.y")
    X[1:, ix] = pos[1:, 0]
    X[1:, iy] = pos[1:, 1]
    X[0, schema.index("B_global")] = 1.0
    X[1:, schema.index("B_local")] = 1.0
    X[1:, schema.index("nindex")] = np.arange(1, K)
    return InputMatrix(X, schema, n)


def _sentinel_column(X: InputMatrix, name: str, start: int, omega_hat: float) -> None:
    col = X.col(name)
    col[1 : X.n + 1] = omega_hat
    col[start] = 0.0


def encode(g: Graph, algorithm: str, start: int, config, schema: ColumnSchema,
           mode: str | None = None) -> InputMatrix:
    """Build the initial X for one of the graph algorithms.

    ``config`` needs omega / epsilon / delta attributes. ``mode`` selects the
    multitask behaviour flag ("dijkstra" / "bfs" / "dfs").
    """
    if not (1 <= start <= g.n):
        raise BoundsError(f"start {start} outside 1..{g.n}")
    _require_capacity(g.n, config.delta)
    omega_hat = config.omega - config.epsilon
    X = _base_matrix(g.n, g.n + 1, schema, config.delta)
    idx = np.arange(1, g.n + 1)

    if algorithm == "dijkstra":
        _sentinel_column(X, "dists", start, omega_hat)
        X.col("prev")[1:] = idx
    elif algorithm in ("bfs", "dfs"):
        # bfs composite order keys use a fixed 256 radix and must stay
        # below the omega/2 discovery threshold: 257 * n < omega / 2
        if algorithm == "bfs" and g.n >= 192:
            raise BoundsError(f"bfs order keys support n < 192, got {g.n}")
        _sentinel_column(X, "orders", start, omega_hat)
        X.col("prev")[1:] = idx
    elif algorithm == "scc":
        # reversed finish keys are 256 - fin, so the index must fit the radix
        if g.n >= 256:
            raise BoundsError(f"scc finish keys support n < 256, got {g.n}")
        # root selection key: the start node first, then ascending index
        X.col("rootkey")[1:] = idx
        X.col("rootkey")[start] = 0.0
        X.col("sccs_int")[1:] = idx
        X.data[0, schema.index("cur.y")] = 1.0  # cur = p_0 (walk parked)
        X.data[0, schema.index("curz")] = 1.0
    elif algorithm == "multitask":
        if mode not in ("dijkstra", "bfs", "dfs"):
            raise BoundsError(f"multitask mode must be dijkstra/bfs/dfs, got {mode!r}")
        _sentinel_column(X, "dists", start, omega_hat)
        X.col("prev")[1:] = idx
        if mode == "dfs":
            X.col("gamma_s")[1 : g.n + 1] = 1.0
    else:
        raise ShapeError(f"unknown algorithm {algorithm!r}")
    # a raised scan flag makes the first pass run the re-initialisation layers
    X.data[0, schema.index("term_min")] = 1.0
    return X


def encode_subleq(g: Graph, memory: list[float], program: list[tuple[int, int, int, int, int]],
                  config, schema: ColumnSchema) -> InputMatrix:
    """Initial X for Graph-SUBLEQ.

    ``program`` holds translated instructions (a1, a2, b, c, gamma). Memory
    address a lives in row a+1, instruction r in row r+1, and graph node i in
    row i, so K = max(|M|, n, |I|) + 1. Addresses are stored as positional
    encodings shifted by one (address a -> p_{a+1}); gamma is a plain flag.
    """
    K = max(len(memory), g.n, len(program)) + 1
    if len(program) > K - 1:
        raise SizeError("instruction list does not fit the row budget")
    _require_capacity(K - 1, config.delta)
    X = _base_matrix(g.n, K, schema, config.delta)
    # every row beyond 0 is a live SUBLEQ row, graph nodes or not
    X.col("B_local")[1:] = 1.0
    X.col("nindex")[1:] = np.arange(1, K)

    X.col("M")[1 : len(memory) + 1] = np.asarray(memory, dtype=np.float64)
    pos = enumerate_positions(K - 1, config.delta)

    def pe(row_index: int) -> tuple[float, float]:
        if not (0 <= row_index <= K - 1):
            raise AddressError(f"operand row {row_index} outside 0..{K - 1}")
        return float(pos[row_index, 0]), float(pos[row_index, 1])

    for r, (a1, a2, b, c, gamma) in enumerate(program, start=1):
        if gamma:
            if not (0 <= a1 < g.n and 0 <= a2 < g.n):
                raise AddressError(f"graph operand ({a1},{a2}) outside 0..{g.n - 1}")
        else:
            if not (0 <= a1 < len(memory)):
                raise AddressError(f"memory operand {a1} outside 0..{len(memory) - 1}")
        if not (0 <= b < len(memory)):
            raise AddressError(f"write operand {b} outside 0..{len(memory) - 1}")
        for base, addr in (("I_a1", a1 + 1), ("I_a2", a2 + 1), ("I_b", b + 1)):
            x, y = pe(addr)
            X.data[r, schema.index(base + ".x")] = x
            X.data[r, schema.index(base + ".y")] = y
        # out-of-range branch targets park the pointer at p_0, whose fetch
        # reads validity 0 and halts the machine
        cx, cy = pe(c + 1 if 0 <= c < len(program) else 0)
        X.data[r, schema.index("I_c.x")] = cx
        X.data[r, schema.index("I_c.y")] = cy
        X.data[r, schema.index("I_g")] = float(gamma)
        X.data[r, schema.index("I_valid")] = 1.0

    kx, ky = pe(1)
    X.data[0, schema.index("k.x")] = kx
    X.data[0, schema.index("k.y")] = ky
    return X


# ---------------------------------------------------------------------------
# decoding


def decode(X: InputMatrix, algorithm: str, require_terminated: bool = True,
           memory_len: int | None = None, delta: float = 1e-2,
           omega: float = 1e5) -> dict:
    """Read an algorithm's outputs back out of X.

    Graph-SUBLEQ never self-terminates, so its callers pass
    ``require_terminated=False`` and decode a snapshot. ``delta`` is the
    positional-encoding step of the run, used to recover the SUBLEQ pointer
    by nearest position; ``omega`` tells the distance decoder where the
    unreachable sentinel lives (anything above omega/2 reads as infinity).
    """
    if require_terminated and X.value(0, "term") < 0.5:
        raise NotTerminatedError("termination flag is not set")
    n = X.n

    def dist_out(v: float) -> float:
        return float("inf") if v > omega / 2.0 else float(v)

    if algorithm in ("dijkstra", "multitask"):
        return {
            "prev": [int(round(v)) for v in X.col("prev")[1 : n + 1]],
            "dists": [dist_out(v) for v in X.col("dists")[1 : n + 1]],
        }
    if algorithm in ("bfs", "dfs"):
        return {"prev": [int(round(v)) for v in X.col("prev")[1 : n + 1]]}
    if algorithm == "scc":
        return {"sccs": [int(round(v)) for v in X.col("sccs_int")[1 : n + 1]]}
    if algorithm == "graph_subleq":
        m = memory_len if memory_len is not None else X.K - 1
        pos = enumerate_positions(X.K - 1, delta)
        kx, ky = X.value(0, "k.x"), X.value(0, "k.y")
        row = nearest_position(kx, ky, pos)
        # memory lives on the quarter grid; snapping strips sub-grid residue
        # left by soft attention on exactly-zero cells
        return {
            "memory": [round(v * 4.0) / 4.0 for v in X.col("M")[1 : m + 1]],
            "pointer": row - 1,
        }
    raise ShapeError(f"unknown algorithm {algorithm!r}")
