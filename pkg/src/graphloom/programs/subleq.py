"""Graph-SUBLEQ: a one-instruction machine whose reads can probe a graph.

Eleven layers execute one instruction per pass. Row r+1 holds instruction
r as positional-encoding operands (a1, a2, b, c), a graph-read flag and a
validity marker; the same rows double as memory cells (column ``M``) and
graph nodes. Per pass: fetch the operands at the instruction pointer
``k``, read the a-operand from memory or from the adjacency cell
(a1, a2), read M[b], write M[b] - ma back to M[b], and move ``k`` to c if
the result was nonpositive, else to the next row.

The machine has no termination column: it halts by fetching an invalid
row (branch target past the program). The validity marker then reads 0,
a latch raises ``halted``, and from that pass on the write value is
gated to zero, the write target is forced to the parked pointer p_0
(whose clear-and-redeposit is the identity) and ``k`` holds, so memory
and pointer stay frozen and a snapshot after s passes matches the
reference interpreter after s steps, halted or not. Callers drive it
with a fixed pass budget and decode the snapshot.

Memory values and graph weights are integers (the nonpositive test
thresholds at one-half); sums must stay well under omega.
"""

from __future__ import annotations

from ..layout import ColumnSchema
from ..primitives import (
    Mlp,
    PeBranch,
    PeTarget,
    ScalarBranch,
    build_increment,
    build_pe_select,
    gate_wires,
    new_mlp,
    nonpos_flag,
    pointer_head,
    select_scalar,
    self_head,
    wipe_row0,
)
from ..transformer import (
    KIND_ADJ,
    LoopedProgram,
    ProgramMetadata,
    SimConfig,
    TransformerLayer,
)
from . import common


def build_schema() -> ColumnSchema:
    schema = ColumnSchema()
    for base in ("I_a1", "I_a2", "I_b", "I_c", "k", "knext",
                 "a1", "a2", "b", "c"):
        schema.add_pair(base)
    schema.add("M", "I_g", "I_valid", "gflag", "valid", "halted", "live",
               "acol", "ma_mem", "ma_graph", "ma", "mb", "cond", "wdep")
    return schema


FLAG_SITES = {
    "fetch-a": [("gflag", "B_global"), ("valid", "B_global")],
    "halt-latch": [("halted", "B_global"), ("live", "B_global")],
    "compute": [("cond", "B_global")],
}
# No pair snapping: ``k`` may legitimately sit one step past the last row
# (a fall-through off the program's end, caught as an invalid fetch on the
# next pass), and a snap would drag it back onto the last instruction.
# The pointer is rebuilt from exactly stored operands each pass, so its
# drift stays additive and far below any decision margin.
PAIR_SITES: dict[str, list[str]] = {}


def build(cfg: SimConfig) -> LoopedProgram:
    schema = build_schema()
    pool = schema.scratch_pool()
    layers: list[TransformerLayer] = []

    layers.append(common.pointer_layer(
        cfg, pool, "fetch-a",
        reads=[("k", "I_a1.x", "a1.x"), ("k", "I_a1.y", "a1.y"),
               ("k", "I_a2.x", "a2.x"), ("k", "I_a2.y", "a2.y"),
               ("k", "I_g", "gflag"), ("k", "I_valid", "valid")],
        step="a-operands, graph flag and validity <- instruction row k"))

    def force_b(m: Mlp) -> None:
        # an invalid fetch reads b = (0, 0); point it at p_0 instead so the
        # memory write pattern degenerates to the identity
        c0 = m.slot([("B_global", 1.0), ("valid", -cfg.omega)])
        m.out("b.y", [(c0, 1.0)])

    layers.append(common.pointer_layer(
        cfg, pool, "fetch-bc",
        reads=[("k", "I_b.x", "b.x"), ("k", "I_b.y", "b.y"),
               ("k", "I_c.x", "c.x"), ("k", "I_c.y", "c.y")],
        mlp_extra=force_b,
        step="b/c operands <- instruction row k (b parked when invalid)"))

    m = new_mlp(pool)
    h = m.slot([("halted", 1.0)])
    v = m.slot([("valid", 1.0)])
    bgs = m.slot([("B_global", 1.0)])
    p = m.slot([(h, 1.0), (bgs, 1.0), (v, -1.0)], stage=2)
    q = m.slot([(h, 1.0), (v, -1.0)], stage=2)
    m.out("halted", [(p, 1.0), (q, -1.0), (h, -1.0)])
    ol = m.slot([("live", 1.0)])
    m.out("live", [(bgs, 1.0), (p, -1.0), (q, 1.0), (ol, -1.0)])
    layers.append(m.build("halt-latch",
                          step="halted <- min(halted + 1 - valid, 1); live <- 1 - halted",
                          touched=["halted", "live"]))

    layers.append(common.pointer_layer(
        cfg, pool, "operand-a",
        reads=[("a1", "M", "ma_mem")],
        adj=[("a2", KIND_ADJ, "acol")],
        step="ma_mem <- M[a1]; acol <- edge weights into a2"))

    layers.append(common.pointer_layer(
        cfg, pool, "graph-a",
        reads=[("a1", "acol", "ma_graph")],
        step="ma_graph <- acol[a1], the (a1, a2) adjacency cell"))

    m = new_mlp(pool)
    select_scalar(m, cfg, "ma",
                  [ScalarBranch([("ma_graph", 1.0)], on=("gflag",)),
                   ScalarBranch([("ma_mem", 1.0)], off=("gflag",), signed=True)],
                  factor=2.0, old_signed=True)
    layers.append(m.build("pick-a", step="ma <- gflag ? ma_graph : ma_mem",
                          touched=["ma"]))

    layers.append(common.pointer_layer(
        cfg, pool, "operand-b",
        reads=[("b", "M", "mb")],
        step="mb <- M[b]"))

    m = new_mlp(pool)
    np_ = nonpos_flag(m, cfg, [("mb", 1.0), ("ma", -1.0)])
    lv = m.slot([("live", 1.0)])
    bgs = m.slot([("B_global", 1.0)])
    c3 = m.slot([(np_, 1.0), (lv, 1.0), (bgs, -1.0)], stage=3)
    oldc = m.slot([("cond", 1.0)])
    m.out("cond", [(c3, 1.0), (oldc, -1.0)])
    wp = m.slot(gate_wires(cfg, on=("live",), factor=2.0)
                + [("mb", 1.0), ("ma", -1.0)])
    wq = m.slot(gate_wires(cfg, on=("live",), factor=2.0)
                + [("mb", -1.0), ("ma", 1.0)])
    op = m.slot([("wdep", 1.0)])
    oq = m.slot([("wdep", -1.0)])
    m.out("wdep", [(wp, 1.0), (wq, -1.0), (op, -1.0), (oq, 1.0)])
    layers.append(m.build("compute",
                          step="cond <- [mb - ma <= 0] and live; wdep <- live ? mb - ma : 0",
                          touched=["cond", "wdep"]))

    pool.reset()
    m = Mlp(pool)
    comp = self_head([("M", "M", -2.0), ("wdep", "M", -1.0)])
    dep = pointer_head("b", [("M", "M", 2.0), ("wdep", "M", 2.0)])
    wipe_row0(m, cfg, "M")
    layers.append(m.build("write-m", [comp, dep],
                          step="M[b] <- wdep (clear and redeposit)",
                          touched=["M"]))

    layers.append(build_increment(cfg, pool, "advance-k", [("k", "knext")],
                                  step="knext <- next instruction row"))

    targets = [PeTarget("k", [
        PeBranch(("hold",), on=("halted",)),
        PeBranch(("pair", "c"), on=("cond",), off=("halted",)),
        PeBranch(("pair", "knext"), off=("cond", "halted")),
    ])]
    layers.append(build_pe_select(cfg, pool, "select-k", targets,
                                  step="k <- halted ? k : cond ? c : knext"))

    # the halted latch already freezes every write, so there is no
    # separate termination latch to arm
    layers = common.apply_instrumentation(cfg, pool, layers, FLAG_SITES,
                                          PAIR_SITES, term_site=None)
    schema.freeze()
    meta = ProgramMetadata("graph_subleq", len(layers),
                           max(len(l.heads) for l in layers),
                           instrumented=cfg.rounding_enabled or cfg.write_prevention_enabled)
    return LoopedProgram("graph_subleq", layers, schema, meta)
