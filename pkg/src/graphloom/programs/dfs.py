"""Depth-first search forest under stack-priority selection.

Fifteen layers per pass. The selection key of a discovered node is a
negative counter stamp: every selection decrements the global counter and
stamps all unvisited out-neighbours of the selected node, so the most
recently stamped node carries the smallest key and the shared minimum
scan behaves as a stack with lazy deletion. Already-stamped nodes are
re-stamped (and re-parented) when reached again, matching iterative DFS
where the latest push wins. Undiscovered nodes keep the positive
omega_hat sentinel; when the stack runs dry the scan falls through to the
lowest-index unvisited node, entering the next component, so the result
is a DFS forest with components rooted at their lowest index (after the
chosen start).

Runs on unweighted graphs: the stamp condition reads adjacency entries
as 0/1 flags.
"""

from __future__ import annotations

from ..layout import ColumnSchema
from ..primitives import (
    ScalarBranch,
    build_all_one,
    build_broadcast,
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
    schema.add("visit", "orders", "prev", "arow", "sel_i", "cnt",
               "relax_n", "cnt_n", "sel_i_n", "upd")
    return schema


FLAG_SITES = {
    **common.SCAN_FLAG_SITES,
    "visit-selected": [("visit", "B_local")],
    "bcast-selected": [("relax_n", "B_local")],
    "stamp-flag": [("upd", "B_local")],
    "all-visited": [("term", "B_global")],
}

PAIR_SITES = common.SCAN_PAIR_SITES


def build(cfg: SimConfig) -> LoopedProgram:
    schema = build_schema()
    pool = schema.scratch_pool()
    layers: list[TransformerLayer] = []

    m = new_mlp(pool)
    select_scalar(m, cfg, "masked",
                  [ScalarBranch([("B_local", cfg.omega)], on=("gamma_n", "visit")),
                   ScalarBranch([("orders", 1.0)], on=("gamma_n",), off=("visit",),
                                signed=True)],
                  row="B_local", factor=2.0, old_signed=True)
    select_scalar(m, cfg, "visit_min", [], row="B_local", old=[(("gamma_n",), ())])
    reinit = m.build("reset-keys",
                     step="masked <- visited ? omega : orders; visit_min <- 0",
                     touched=["masked", "visit_min"])

    layers += common.scan_block(cfg, pool, reinit)

    def dec(m):
        tm = m.slot([("term_min", 1.0)])
        m.out("cnt", [(tm, -1.0)])

    layers.append(common.pointer_layer(
        cfg, pool, "visit-selected",
        reads=[("idx_best", "nindex", "sel_i")],
        writes=[("idx_best", "term_min", "visit")],
        adj=[("idx_best", KIND_ADJ_T, "arow")],
        mlp_extra=dec,
        step="visit[idx_best] += term_min; sel_i/arow <- selected row; cnt -= term_min"))

    layers.append(build_broadcast(
        cfg, pool, "bcast-selected",
        [("term_min", "relax_n"), ("cnt", "cnt_n"), ("sel_i", "sel_i_n")],
        step="mirror the selection into the node rows"))

    m = new_mlp(pool)
    u = m.slot([("relax_n", 1.0), ("arow", 1.0), ("visit", -1.0), ("B_local", -1.0)])
    common.replace_with_slot(m, "upd", u)
    layers.append(m.build("stamp-flag",
                          step="upd <- relax_n and arow and not visit",
                          touched=["upd"]))

    m = new_mlp(pool)
    select_scalar(m, cfg, "orders",
                  [ScalarBranch([("cnt_n", 1.0)], on=("upd",), signed=True)],
                  row="B_local", factor=2.0, old_signed=True)
    layers.append(m.build("stamp-order", step="if upd: orders <- cnt_n",
                          touched=["orders"]))

    m = new_mlp(pool)
    select_scalar(m, cfg, "prev",
                  [ScalarBranch([("sel_i_n", 1.0)], on=("upd",))],
                  row="B_local")
    layers.append(m.build("stamp-parent", step="if upd: prev <- sel_i_n",
                          touched=["prev"]))

    layers.append(build_all_one(cfg, pool, "all-visited", [("visit", "term")],
                                step="term <- every node visited"))

    layers = common.apply_instrumentation(cfg, pool, layers, FLAG_SITES, PAIR_SITES)
    schema.freeze()
    meta = ProgramMetadata("dfs", len(layers), max(len(l.heads) for l in layers),
                           instrumented=cfg.rounding_enabled or cfg.write_prevention_enabled)
    return LoopedProgram("dfs", layers, schema, meta)
