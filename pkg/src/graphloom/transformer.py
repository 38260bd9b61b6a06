"""Looped-transformer runtime.

A program is a fixed stack of layers applied repeatedly to the state matrix
X until the termination column's global entry reaches 1/2 (Graph-SUBLEQ
never terminates on its own and is driven by ``run_steps``).

Each layer is attention heads plus a four-matrix ReLU MLP, both residual:

    X befores heads:  X <- X + sum_h  M_h sigma(X Wq_h Wk_h^T X^T) X Wv_h
    then              X <- X + relu(relu(relu(X W1) W2) W3) W4

where M_h is I, the padded adjacency, or its transpose, and sigma is hardmax
or row-softmax. Weights are stored symbolically as named wires; compiling
resolves names to column indices and, in softmax mode, folds the inverse
temperature into Wq. Execution walks the wire lists in their recorded order
so every run performs an identical float64 operation sequence; the weight
builders rely on that for exact hardmax ties.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, IterationLimitExceeded, ShapeError
from .layout import ColumnSchema, InputMatrix
from .numerics import hardmax_rows, relu, softmax_rows

KIND_IDENTITY = "Identity"
KIND_ADJ = "Adj"
KIND_ADJ_T = "AdjTranspose"
_KIND_CODES = {KIND_IDENTITY: 0, KIND_ADJ: 1, KIND_ADJ_T: 2}

HARDMAX = "hardmax"
SOFTMAX = "softmax"


@dataclass(frozen=True)
class SimConfig:
    """Numeric envelope of a compiled program.

    omega: saturation constant; values the network manipulates stay below it.
    epsilon: comparison margin; operands are spaced by at least epsilon.
    delta: positional-encoding step angle.
    eta: rounding band width used by instrumentation layers.
    temperature / annealed_temperature: softmax sharpness (base heads /
    deliberately softer indicator heads).
    """

    omega: float = 1e5
    epsilon: float = 0.5
    delta: float = 1e-2
    eta: float = 1e-3
    temperature: float = 1e-7
    annealed_temperature: float = 1e-5
    activation: str = HARDMAX
    max_iterations: int | None = None
    rounding_enabled: bool = False
    write_prevention_enabled: bool = False

    def __post_init__(self):
        if self.omega <= 1:
            raise ConfigError("omega must exceed 1")
        if not (0 < self.epsilon < 1):
            raise ConfigError("epsilon must lie in (0, 1)")
        if not (0 < self.eta < 0.5):
            raise ConfigError("eta must lie in (0, 1/2)")
        if self.delta <= 0:
            raise ConfigError("delta must be positive")
        if self.temperature <= 0 or self.annealed_temperature <= 0:
            raise ConfigError("temperatures must be positive")
        if self.temperature > self.annealed_temperature:
            raise ConfigError("base temperature must not exceed the annealed one")
        if self.activation not in (HARDMAX, SOFTMAX):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.max_iterations is not None and self.max_iterations <= 0:
            raise ConfigError("max_iterations must be positive")

    @property
    def omega_hat(self) -> float:
        """The unvisited-sentinel: one comparison margin below omega."""
        return self.omega - self.epsilon

    def replace(self, **kw) -> "SimConfig":
        from dataclasses import replace as _replace

        return _replace(self, **kw)


def default_max_iterations(n: int) -> int:
    return 10 * (3 * n + 5)


# ---------------------------------------------------------------------------
# symbolic weights

QWire = tuple[str, int, float]  # (column, query axis 0/1, value)
VWire = tuple[str, str, float]  # (source column, target column, value)


@dataclass
class AttentionHead:
    kind: str = KIND_IDENTITY
    wq: list[QWire] = field(default_factory=list)
    wk: list[QWire] = field(default_factory=list)
    wv: list[VWire] = field(default_factory=list)
    annealed: bool = False

    def dense_wq(self, schema: ColumnSchema, config: SimConfig | None = None) -> np.ndarray:
        m = np.zeros((schema.width, 2))
        scale = 1.0
        if config is not None and config.activation == SOFTMAX:
            t = config.annealed_temperature if self.annealed else config.temperature
            scale = 1.0 / t
        for col, axis, val in self.wq:
            m[schema.index(col), axis] += val * scale
        return m

    def dense_wk(self, schema: ColumnSchema) -> np.ndarray:
        m = np.zeros((schema.width, 2))
        for col, axis, val in self.wk:
            m[schema.index(col), axis] += val
        return m

    def dense_wv(self, schema: ColumnSchema) -> np.ndarray:
        m = np.zeros((schema.width, schema.width))
        for src, dst, val in self.wv:
            m[schema.index(src), schema.index(dst)] += val
        return m


def dense_matrix(wires: list[VWire], schema: ColumnSchema) -> np.ndarray:
    m = np.zeros((schema.width, schema.width))
    for src, dst, val in wires:
        m[schema.index(src), schema.index(dst)] += val
    return m


@dataclass
class TransformerLayer:
    name: str
    heads: list[AttentionHead] = field(default_factory=list)
    w1: list[VWire] = field(default_factory=list)
    w2: list[VWire] = field(default_factory=list)
    w3: list[VWire] = field(default_factory=list)
    w4: list[VWire] = field(default_factory=list)
    step: str = ""
    touched: tuple[str, ...] = ()


@dataclass
class ProgramMetadata:
    """Shape summary of a compiled program.

    head_count is the attention width: the largest number of heads any
    single layer uses (layers needing fewer leave the rest of the width
    unused). Both counts are independent of the graph size.
    """

    algorithm: str
    layer_count: int
    head_count: int
    instrumented: bool = False


@dataclass
class LoopedProgram:
    algorithm: str
    layers: list[TransformerLayer]
    schema: ColumnSchema
    metadata: ProgramMetadata
    term_column: str = "term"
    # builder keyword arguments this program was constructed with, so the
    # same variant can be rebuilt under a different config
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        self._plans: dict = {}

    def max_heads(self) -> int:
        return max(len(l.heads) for l in self.layers)

    def listing(self) -> str:
        """Human-readable assembly: one line per layer."""
        lines = []
        width = max(len(l.name) for l in self.layers)
        for i, l in enumerate(self.layers, start=1):
            cols = ",".join(l.touched)
            lines.append(f"L{i:02d} {l.name:<{width}} {l.step}" + (f"  [{cols}]" if cols else ""))
        return "\n".join(lines)

    def plan(self, config: SimConfig) -> "FlatPlan":
        key = (config.activation, config.temperature, config.annealed_temperature)
        if key not in self._plans:
            self._plans[key] = compile_program(self, config)
        return self._plans[key]


# ---------------------------------------------------------------------------
# compilation to flat index/value arrays


@dataclass
class FlatPlan:
    n_layers: int
    d: int
    term_idx: int
    softmax: bool
    layer_head_off: np.ndarray
    head_kind: np.ndarray
    q_off: np.ndarray
    q_src: np.ndarray
    q_axis: np.ndarray
    q_val: np.ndarray
    k_off: np.ndarray
    k_src: np.ndarray
    k_axis: np.ndarray
    k_val: np.ndarray
    v_off: np.ndarray
    v_src: np.ndarray
    v_slot: np.ndarray
    v_val: np.ndarray
    slot_off: np.ndarray
    slot_dst: np.ndarray
    m_off: np.ndarray
    m_src: np.ndarray
    m_dst: np.ndarray
    m_val: np.ndarray
    mz_off: np.ndarray
    mz_col: np.ndarray


def compile_program(program: LoopedProgram, config: SimConfig) -> FlatPlan:
    schema = program.schema
    if not schema.frozen:
        raise ShapeError("schema must be frozen before compiling")
    idx = schema.index
    softmax = config.activation == SOFTMAX

    layer_head_off = [0]
    head_kind: list[int] = []
    q_off, q_src, q_axis, q_val = [0], [], [], []
    k_off, k_src, k_axis, k_val = [0], [], [], []
    v_off, v_src, v_slot, v_val = [0], [], [], []
    slot_off, slot_dst = [0], []
    m_off, m_src, m_dst, m_val = [0], [], [], []
    mz_off, mz_col = [0], []

    for layer in program.layers:
        for head in layer.heads:
            head_kind.append(_KIND_CODES[head.kind])
            scale = 1.0
            if softmax:
                t = config.annealed_temperature if head.annealed else config.temperature
                scale = 1.0 / t
            for col, axis, val in head.wq:
                q_src.append(idx(col))
                q_axis.append(axis)
                q_val.append(val * scale)
            q_off.append(len(q_src))
            for col, axis, val in head.wk:
                k_src.append(idx(col))
                k_axis.append(axis)
                k_val.append(val)
            k_off.append(len(k_src))
            slots: dict[int, int] = {}
            for src, dst, val in head.wv:
                di = idx(dst)
                if di not in slots:
                    slots[di] = len(slots)
                    slot_dst.append(di)
                v_src.append(idx(src))
                v_slot.append(slots[di])
                v_val.append(val)
            v_off.append(len(v_src))
            slot_off.append(len(slot_dst))
        layer_head_off.append(len(head_kind))
        for wires in (layer.w1, layer.w2, layer.w3, layer.w4):
            seen: set[int] = set()
            for src, dst, val in wires:
                di = idx(dst)
                m_src.append(idx(src))
                m_dst.append(di)
                m_val.append(val)
                if di not in seen:
                    seen.add(di)
                    mz_col.append(di)
            m_off.append(len(m_src))
            mz_off.append(len(mz_col))

    def i32(a):
        return np.asarray(a, dtype=np.int32)

    def f64(a):
        return np.asarray(a, dtype=np.float64)

    return FlatPlan(
        n_layers=len(program.layers),
        d=schema.width,
        term_idx=idx(program.term_column) if program.term_column in schema else -1,
        softmax=softmax,
        layer_head_off=i32(layer_head_off),
        head_kind=i32(head_kind),
        q_off=i32(q_off), q_src=i32(q_src), q_axis=i32(q_axis), q_val=f64(q_val),
        k_off=i32(k_off), k_src=i32(k_src), k_axis=i32(k_axis), k_val=f64(k_val),
        v_off=i32(v_off), v_src=i32(v_src), v_slot=i32(v_slot), v_val=f64(v_val),
        slot_off=i32(slot_off), slot_dst=i32(slot_dst),
        m_off=i32(m_off), m_src=i32(m_src), m_dst=i32(m_dst), m_val=f64(m_val),
        mz_off=i32(mz_off), mz_col=i32(mz_col),
    )


# ---------------------------------------------------------------------------
# numpy executor (reference path; the compiled kernel mirrors it exactly)


def _project(Xin: np.ndarray, p: FlatPlan, off, src, axis, val, h: int) -> np.ndarray:
    q = np.zeros((Xin.shape[0], 2))
    for w in range(off[h], off[h + 1]):
        q[:, axis[w]] += Xin[:, src[w]] * val[w]
    return q


def _iterate_numpy(X: np.ndarray, A: np.ndarray, AT: np.ndarray, p: FlatPlan) -> None:
    """One full pass over all layers, in place."""
    K, d = X.shape
    for l in range(p.n_layers):
        Xin = X.copy()
        for h in range(p.layer_head_off[l], p.layer_head_off[l + 1]):
            q = _project(Xin, p, p.q_off, p.q_src, p.q_axis, p.q_val, h)
            k = _project(Xin, p, p.k_off, p.k_src, p.k_axis, p.k_val, h)
            s = np.multiply.outer(q[:, 0], k[:, 0])
            s += np.multiply.outer(q[:, 1], k[:, 1])
            sig = softmax_rows(s) if p.softmax else hardmax_rows(s)
            nslots = p.slot_off[h + 1] - p.slot_off[h]
            if nslots == 0:
                continue
            u = np.zeros((K, nslots))
            for w in range(p.v_off[h], p.v_off[h + 1]):
                u[:, p.v_slot[w]] += Xin[:, p.v_src[w]] * p.v_val[w]
            t = sig @ u
            kind = p.head_kind[h]
            if kind == 1:
                t = A @ t
            elif kind == 2:
                t = AT @ t
            for si in range(nslots):
                X[:, p.slot_dst[p.slot_off[h] + si]] += t[:, si]
        base = 4 * l
        z = X
        for stage in range(4):
            zn = np.zeros((K, d))
            for w in range(p.m_off[base + stage], p.m_off[base + stage + 1]):
                zn[:, p.m_dst[w]] += z[:, p.m_src[w]] * p.m_val[w]
            if stage < 3:
                np.maximum(zn, 0.0, out=zn)
                z = zn
            else:
                X += zn


# ---------------------------------------------------------------------------
# compiled kernel selection

_kernel = None
if os.environ.get("LOOM_PURE") != "1":
    try:
        from . import _kernel as _kernel  # type: ignore[no-redef]
    except ImportError:
        _kernel = None


def active_backend() -> str:
    return "numpy" if _kernel is None else "kernel"


def _kernel_args(p: FlatPlan):
    return (
        int(p.n_layers), int(p.term_idx), 1 if p.softmax else 0,
        p.layer_head_off, p.head_kind,
        p.q_off, p.q_src, p.q_axis, p.q_val,
        p.k_off, p.k_src, p.k_axis, p.k_val,
        p.v_off, p.v_src, p.v_slot, p.v_val,
        p.slot_off, p.slot_dst,
        p.m_off, p.m_src, p.m_dst, p.m_val,
        p.mz_off, p.mz_col,
    )


# ---------------------------------------------------------------------------
# running


@dataclass
class TraceRecord:
    iteration: int
    values: dict[str, tuple[float, ...]]


@dataclass
class RunResult:
    X: InputMatrix
    iterations: int
    trace: list[TraceRecord] | None = None


def _snapshot(X: InputMatrix, columns: list[str], iteration: int) -> TraceRecord:
    return TraceRecord(iteration, {c: tuple(float(v) for v in X.col(c)) for c in columns})


def _check_shapes(program: LoopedProgram, X: InputMatrix, A: np.ndarray) -> None:
    if X.data.shape[1] != program.schema.width:
        raise ShapeError(
            f"X has {X.data.shape[1]} columns, schema wants {program.schema.width}"
        )
    if A.shape != (X.K, X.K):
        raise ShapeError(f"adjacency {A.shape} does not match K={X.K}")


def _trace_columns(program: LoopedProgram, trace_columns) -> list[str]:
    if trace_columns == "all":
        return list(program.schema.names)
    return list(trace_columns)


def run_loop(program: LoopedProgram, X: InputMatrix, A: np.ndarray,
             config: SimConfig, trace_columns=None) -> RunResult:
    """Apply the layer stack until the termination flag rises.

    Raises IterationLimitExceeded after config.max_iterations full passes
    (default 10*(3n+5)) with the flag still clear. The input X is not
    mutated; the result holds its own copy.
    """
    _check_shapes(program, X, A)
    plan = program.plan(config)
    if plan.term_idx < 0:
        raise ShapeError("program has no termination column; use run_steps")
    limit = config.max_iterations
    if limit is None:
        limit = default_max_iterations(X.n)
    work = X.copy()
    Xm = np.ascontiguousarray(work.data)
    work.data = Xm
    A = np.ascontiguousarray(A)
    AT = np.ascontiguousarray(A.T)

    trace: list[TraceRecord] | None = None
    cols: list[str] = []
    if trace_columns is not None:
        cols = _trace_columns(program, trace_columns)
        trace = [_snapshot(work, cols, 0)]

    iterations = 0
    if _kernel is not None and trace is None:
        done = _kernel.run(Xm, A, AT, *_kernel_args(plan), int(limit), 1)
        if done < 0:
            raise IterationLimitExceeded(int(limit))
        iterations = int(done)
    else:
        while Xm[0, plan.term_idx] < 0.5:
            if iterations >= limit:
                raise IterationLimitExceeded(iterations)
            _iterate_numpy(Xm, A, AT, plan)
            iterations += 1
            if trace is not None:
                trace.append(_snapshot(work, cols, iterations))
    return RunResult(work, iterations, trace)


def run_steps(program: LoopedProgram, X: InputMatrix, A: np.ndarray,
              config: SimConfig, steps: int, trace_columns=None) -> RunResult:
    """Apply exactly ``steps`` full passes, ignoring the termination flag."""
    _check_shapes(program, X, A)
    plan = program.plan(config)
    work = X.copy()
    Xm = np.ascontiguousarray(work.data)
    work.data = Xm
    A = np.ascontiguousarray(A)
    AT = np.ascontiguousarray(A.T)

    trace: list[TraceRecord] | None = None
    cols: list[str] = []
    if trace_columns is not None:
        cols = _trace_columns(program, trace_columns)
        trace = [_snapshot(work, cols, 0)]

    if _kernel is not None and trace is None:
        _kernel.run(Xm, A, AT, *_kernel_args(plan), int(steps), 0)
    else:
        for i in range(steps):
            _iterate_numpy(Xm, A, AT, plan)
            if trace is not None:
                trace.append(_snapshot(work, cols, i + 1))
    return RunResult(work, steps, trace)


# ---------------------------------------------------------------------------
# dense reference semantics (used by tests to cross-check the executor)


def apply_head(Xmat: np.ndarray, A: np.ndarray, head: AttentionHead,
               schema: ColumnSchema, config: SimConfig) -> np.ndarray:
    """One head's contribution, computed from dense materialised weights."""
    wq = head.dense_wq(schema, config)
    wk = head.dense_wk(schema)
    wv = head.dense_wv(schema)
    s = (Xmat @ wq) @ (Xmat @ wk).T
    sig = softmax_rows(s) if config.activation == SOFTMAX else hardmax_rows(s)
    if head.kind == KIND_ADJ:
        sig = A @ sig
    elif head.kind == KIND_ADJ_T:
        sig = A.T @ sig
    return sig @ (Xmat @ wv)


def apply_layer(Xmat: np.ndarray, A: np.ndarray, layer: TransformerLayer,
                schema: ColumnSchema, config: SimConfig) -> np.ndarray:
    """Dense reference for a full layer; returns the new X."""
    X = Xmat.copy()
    for head in layer.heads:
        X = X + apply_head(Xmat, A, head, schema, config)
    z = X
    for wires in (layer.w1, layer.w2, layer.w3):
        z = relu(z @ dense_matrix(wires, schema))
    return X + z @ dense_matrix(layer.w4, schema)
