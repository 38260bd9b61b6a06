"""Single-source shortest paths, lowest-index tie-break.

Seventeen layers per pass. The first nine are the shared selection scan
over ``masked`` (visited rows carry omega, the rest their tentative
distance), so ``idx_best`` names the unvisited node with the smallest
tentative distance on the pass where ``term_min`` rises. The remaining
layers fire on exactly that pass: read the selected row's distance, index
and out-neighbourhood, mark it visited, broadcast, and relax every edge
out of it in parallel. One selection costs n passes, and the run
terminates once every node is visited, after n*n passes in total.

Distances are exact: edge weights are normalised integers (the encoder's
contract is weights >= 1 on the quarter grid), so every tentative
distance sits on the grid and the relax comparison operates on values at
least epsilon apart. Unreachable nodes keep the omega_hat sentinel (they
are still selected and visited, with nothing to relax) and decode to
infinity downstream; their ``prev`` stays the self-loop it was encoded
with.
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
    schema.add("visit", "dists", "prev", "arow", "dist_sel", "sel_i",
               "relax_n", "dist_sel_n", "sel_i_n", "newd", "eflag", "upd")
    return schema


FLAG_SITES = {
    **common.SCAN_FLAG_SITES,
    "mark-visited": [("visit", "B_local")],
    "bcast-selected": [("relax_n", "B_local")],
    "edge-flag": [("eflag", "B_local")],
    "improve-flag": [("upd", "B_local")],
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
                   ScalarBranch([("dists", 1.0)], on=("gamma_n",), off=("visit",))],
                  row="B_local", factor=2.0)
    select_scalar(m, cfg, "visit_min", [], row="B_local", old=[(("gamma_n",), ())])
    reinit = m.build("reset-keys",
                     step="masked <- visited ? omega : dists; visit_min <- 0",
                     touched=["masked", "visit_min"])

    layers += common.scan_block(cfg, pool, reinit)

    layers.append(common.pointer_layer(
        cfg, pool, "read-selected",
        reads=[("idx_best", "dists", "dist_sel"), ("idx_best", "nindex", "sel_i")],
        adj=[("idx_best", KIND_ADJ_T, "arow")],
        step="dist_sel/sel_i <- selected row; arow <- its out-edges"))

    layers.append(common.pointer_layer(
        cfg, pool, "mark-visited",
        writes=[("idx_best", "term_min", "visit")],
        step="visit[idx_best] += term_min"))

    layers.append(build_broadcast(
        cfg, pool, "bcast-selected",
        [("term_min", "relax_n"), ("dist_sel", "dist_sel_n"), ("sel_i", "sel_i_n")],
        step="mirror the selection into the node rows"))

    m = new_mlp(pool)
    t = m.slot([("dist_sel_n", 1.0), ("arow", 1.0)])
    common.replace_with_slot(m, "newd", t)
    layers.append(m.build("cand-dist", step="newd <- dist_sel_n + arow",
                          touched=["newd"]))

    # an edge exists iff arow >= 1 (normalised weights), so min(arow, 1)
    # is exactly the incidence flag
    m = new_mlp(pool)
    e1 = m.slot([("arow", 1.0)])
    e2 = m.slot([("arow", 1.0), ("B_local", -1.0)])
    d = m.slot([(e1, 1.0), (e2, -1.0)], stage=2)
    common.replace_with_slot(m, "eflag", d)
    layers.append(m.build("edge-flag", step="eflag <- min(arow, 1)",
                          touched=["eflag"]))

    m = new_mlp(pool)
    t = less_flag(m, cfg, [("newd", 1.0)], [("dists", 1.0)])
    e1 = m.slot([("eflag", 1.0)])
    r1 = m.slot([("relax_n", 1.0)])
    b1 = m.slot([("B_local", 1.0)])
    u = m.slot([(t, 1.0), (e1, 1.0), (r1, 1.0), (b1, -2.0)], stage=3)
    common.replace_with_slot(m, "upd", u)
    layers.append(m.build("improve-flag",
                          step="upd <- [newd < dists] and eflag and relax_n",
                          touched=["upd"]))

    m = new_mlp(pool)
    select_scalar(m, cfg, "dists", [ScalarBranch([("newd", 1.0)], on=("upd",))],
                  row="B_local", factor=2.0)
    select_scalar(m, cfg, "prev", [ScalarBranch([("sel_i_n", 1.0)], on=("upd",))],
                  row="B_local")
    layers.append(m.build("relax", step="if upd: dists <- newd, prev <- sel_i_n",
                          touched=["dists", "prev"]))

    layers.append(build_all_one(cfg, pool, "all-visited", [("visit", "term")],
                                step="term <- every node visited"))

    layers = common.apply_instrumentation(cfg, pool, layers, FLAG_SITES, PAIR_SITES)
    schema.freeze()
    meta = ProgramMetadata("dijkstra", len(layers), max(len(l.heads) for l in layers),
                           instrumented=cfg.rounding_enabled or cfg.write_prevention_enabled)
    return LoopedProgram("dijkstra", layers, schema, meta)
