"""Breadth-first search tree, selectable visit order.

Seventeen layers per pass wrapped around the shared selection scan. Each
discovered-but-unvisited node carries a composite order key in
``orders``: ORDER_LIMIT times the discovery tick plus its own index.
Scanning for the minimum key therefore dequeues in first-in-first-out
order with ties broken by index, which is exactly a queue fed in
ascending index order. With ``level_index_order`` the tick is replaced by
the node's depth, giving (level, index) order instead: the same ordering
a priority queue on (distance, index) would produce on a unit-weight
graph.

Undiscovered nodes keep the omega_hat sentinel. When the scan's best key
is still omega_hat, nothing reachable remains and an interrupt flag
raises termination without a selection, so disconnected graphs finish
early rather than sweeping sentinel rows forever.

Each selection visits one node and stamps every undiscovered
out-neighbour with its key, depth and tree parent in parallel, so a run
costs one n-pass sweep per reachable node.
"""

from __future__ import annotations

from ..layout import ColumnSchema
from ..primitives import (
    ScalarBranch,
    build_all_one,
    build_broadcast,
    less_flag,
    new_mlp,
    select_scalar,
)
from ..transformer import (
    KIND_ADJ_T,
    LoopedProgram,
    ProgramMetadata,
    SimConfig,
    TransformerLayer,
)
from . import common


def build_schema() -> ColumnSchema:
    schema = ColumnSchema()
    common.scan_columns(schema)
    schema.add("visit", "orders", "levels", "seq", "prev", "arow",
               "lvl_sel", "sel_i", "intr", "visit_gate", "kbase",
               "relax_n", "kbase_n", "lvlsel_n", "sel_i_n", "upd", "term_all")
    return schema


FLAG_SITES = {
    **common.SCAN_FLAG_SITES,
    "frontier-check": [("visit_gate", "B_global"), ("intr", "B_global")],
    "mark-visited": [("visit", "B_local")],
    "bcast-selected": [("relax_n", "B_local")],
    "discover-flag": [("upd", "B_local")],
    "all-visited": [("term_all", "B_global")],
    "settle-term": [("term", "B_global")],
}

PAIR_SITES = common.SCAN_PAIR_SITES


def build(cfg: SimConfig, level_index_order: bool = False) -> LoopedProgram:
    schema = build_schema()
    pool = schema.scratch_pool()
    layers: list[TransformerLayer] = []
    lim = common.ORDER_LIMIT

    m = new_mlp(pool)
    select_scalar(m, cfg, "masked",
                  [ScalarBranch([("B_local", cfg.omega)], on=("gamma_n", "visit")),
                   ScalarBranch([("orders", 1.0)], on=("gamma_n",), off=("visit",))],
                  row="B_local", factor=2.0)
    select_scalar(m, cfg, "visit_min", [], row="B_local", old=[(("gamma_n",), ())])
    reinit = m.build("reset-keys",
                     step="masked <- visited ? omega : orders; visit_min <- 0",
                     touched=["masked", "visit_min"])

    layers += common.scan_block(cfg, pool, reinit)

    layers.append(common.pointer_layer(
        cfg, pool, "read-selected",
        reads=[("idx_best", "levels", "lvl_sel"), ("idx_best", "nindex", "sel_i")],
        adj=[("idx_best", KIND_ADJ_T, "arow")],
        step="lvl_sel/sel_i <- selected row; arow <- its out-edges"))

    # did the sweep find a discovered node, or only sentinels?
    m = new_mlp(pool)
    omega_hat = cfg.omega - cfg.epsilon
    ok = less_flag(m, cfg, [("val_best", 1.0)], [("B_global", omega_hat)])
    tm = m.slot([("term_min", 1.0)])
    bg = m.slot([("B_global", 1.0)])
    z = m.slot([(tm, 1.0), (ok, 1.0), (bg, -1.0)], stage=3)
    iv = m.slot([(tm, 1.0), (ok, -1.0)], stage=3)
    old = m.slot([("visit_gate", 1.0)])
    m.out("visit_gate", [(z, 1.0), (old, -1.0)])
    oldi = m.slot([("intr", 1.0)])
    m.out("intr", [(iv, 1.0), (oldi, -1.0)])
    m.out("seq", [(z, 1.0)])
    oldk = m.slot([("kbase", 1.0)])
    if level_index_order:
        lv = m.slot([("lvl_sel", 1.0)])
        m.out("kbase", [(lv, lim), (bg, lim), (oldk, -1.0)])
    else:
        sq = m.slot([("seq", 1.0)])
        m.out("kbase", [(sq, lim), (z, lim), (oldk, -1.0)])
    layers.append(m.build(
        "frontier-check",
        step="visit_gate <- frontier found; intr <- swept dry; kbase <- next key base",
        touched=["visit_gate", "intr", "seq", "kbase"]))

    layers.append(common.pointer_layer(
        cfg, pool, "mark-visited",
        writes=[("idx_best", "visit_gate", "visit")],
        step="visit[idx_best] += visit_gate"))

    layers.append(build_broadcast(
        cfg, pool, "bcast-selected",
        [("visit_gate", "relax_n"), ("kbase", "kbase_n"),
         ("lvl_sel", "lvlsel_n"), ("sel_i", "sel_i_n")],
        step="mirror the selection into the node rows"))

    # stamp undiscovered out-neighbours (arow is 0/1: bfs runs unweighted)
    m = new_mlp(pool)
    und = less_flag(m, cfg, [("B_local", cfg.omega / 2.0)], [("orders", 1.0)])
    r1 = m.slot([("relax_n", 1.0)])
    a1 = m.slot([("arow", 1.0)])
    b1 = m.slot([("B_local", 1.0)])
    u = m.slot([(und, 1.0), (r1, 1.0), (a1, 1.0), (b1, -2.0)], stage=3)
    common.replace_with_slot(m, "upd", u)
    layers.append(m.build("discover-flag",
                          step="upd <- undiscovered and arow and relax_n",
                          touched=["upd"]))

    m = new_mlp(pool)
    select_scalar(m, cfg, "orders",
                  [ScalarBranch([("kbase_n", 1.0), ("nindex", 1.0)], on=("upd",))],
                  row="B_local", factor=2.0)
    select_scalar(m, cfg, "levels",
                  [ScalarBranch([("lvlsel_n", 1.0), ("B_local", 1.0)], on=("upd",))],
                  row="B_local")
    select_scalar(m, cfg, "prev",
                  [ScalarBranch([("sel_i_n", 1.0)], on=("upd",))],
                  row="B_local")
    layers.append(m.build("stamp",
                          step="if upd: orders <- kbase_n + index, levels <- lvl+1, prev <- sel",
                          touched=["orders", "levels", "prev"]))

    layers.append(build_all_one(cfg, pool, "all-visited", [("visit", "term_all")],
                                step="term_all <- every node visited"))

    m = new_mlp(pool)
    p = m.slot([("term", 1.0), ("term_all", 1.0), ("intr", 1.0)])
    q = m.slot([("term", 1.0), ("term_all", 1.0), ("intr", 1.0), ("B_global", -1.0)])
    oldt = m.slot([("term", 1.0)])
    m.out("term", [(p, 1.0), (q, -1.0), (oldt, -1.0)])
    layers.append(m.build("settle-term",
                          step="term <- min(term + term_all + intr, 1)",
                          touched=["term"]))

    layers = common.apply_instrumentation(cfg, pool, layers, FLAG_SITES, PAIR_SITES)
    schema.freeze()
    meta = ProgramMetadata("bfs", len(layers), max(len(l.heads) for l in layers),
                           instrumented=cfg.rounding_enabled or cfg.write_prevention_enabled)
    return LoopedProgram("bfs", layers, schema, meta,
                         options={"level_index_order": level_index_order})
