"""One parameter set serving shortest paths, breadth-first and depth-first
search, switched by an input flag.

Nineteen layers per pass. The skeleton is the shortest-path program: the
shared minimum scan over ``dists`` keys, then select, mark visited,
broadcast and relax. A per-node mode flag ``gamma_s`` (0 on every row for
distance modes, 1 on the node rows for depth-first mode) steers the
update rule:

* gamma_s = 0: relax out-edges, ``dists <- dist_sel + w`` where improved.
  On a weighted graph this is Dijkstra; on a unit-weight graph the
  selection order degenerates to (level, index), so the parent tree is
  breadth-first search in (distance, index) order. The caller chooses
  "bfs mode" simply by feeding the unit-weight adjacency.
* gamma_s = 1: ignore weights and stamp unvisited out-neighbours with a
  decrementing counter held in ``dists``, the stack-priority depth-first
  rule (negative keys, most recent wins, re-stamp allowed).

Both update flags are computed every pass; each is hard-gated by the mode
flag so exactly one family of writes can fire. Cost and termination match
the single-task programs: one n-pass sweep per selection, n selections.
"""

from __future__ import annotations

from ..layout import ColumnSchema
from ..primitives import (
    ScalarBranch,
    build_all_one,
    build_broadcast,
    gate_wires,
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
    schema.add("visit", "dists", "prev", "arow", "dist_sel", "sel_i", "cnt",
               "gamma_s", "relax_n", "dist_sel_n", "sel_i_n", "cnt_n",
               "newd", "eflag", "upd_dij", "upd", "newval")
    return schema


FLAG_SITES = {
    **common.SCAN_FLAG_SITES,
    "mark-visited": [("visit", "B_local")],
    "bcast-selected": [("relax_n", "B_local")],
    "edge-flag": [("eflag", "B_local")],
    "improve-flag": [("upd_dij", "B_local")],
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
                   ScalarBranch([("dists", 1.0)], on=("gamma_n",), off=("visit",),
                                signed=True)],
                  row="B_local", factor=2.0, old_signed=True)
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

    def dec(m):
        tm = m.slot([("term_min", 1.0)])
        m.out("cnt", [(tm, -1.0)])

    layers.append(common.pointer_layer(
        cfg, pool, "mark-visited",
        writes=[("idx_best", "term_min", "visit")],
        mlp_extra=dec,
        step="visit[idx_best] += term_min; cnt -= term_min"))

    layers.append(build_broadcast(
        cfg, pool, "bcast-selected",
        [("term_min", "relax_n"), ("dist_sel", "dist_sel_n"),
         ("sel_i", "sel_i_n"), ("cnt", "cnt_n")],
        step="mirror the selection into the node rows"))

    m = new_mlp(pool)
    # dist_sel can be a negative stamp in depth-first mode; keep the sum exact
    p = m.slot([("dist_sel_n", 1.0), ("arow", 1.0)])
    q = m.slot([("dist_sel_n", -1.0), ("arow", -1.0)])
    po = m.slot([("newd", 1.0)])
    qo = m.slot([("newd", -1.0)])
    m.out("newd", [(p, 1.0), (q, -1.0), (po, -1.0), (qo, 1.0)])
    layers.append(m.build("cand-dist", step="newd <- dist_sel_n + arow",
                          touched=["newd"]))

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
    g1 = m.slot([("gamma_s", 1.0)])
    b1 = m.slot([("B_local", 1.0)])
    u = m.slot([(t, 1.0), (e1, 1.0), (r1, 1.0), (g1, -1.0), (b1, -2.0)], stage=3)
    common.replace_with_slot(m, "upd_dij", u)
    layers.append(m.build("improve-flag",
                          step="upd_dij <- [newd < dists] and eflag and relax_n and not gamma_s",
                          touched=["upd_dij"]))

    m = new_mlp(pool)
    # hard mode gate: weighted arow entries must not leak through in
    # distance mode, so the stamp clause is killed by omega, not by -1
    u2 = m.slot(gate_wires(cfg, on=("gamma_s",), row="B_local")
                + [("relax_n", 1.0), ("arow", 1.0), ("visit", -1.0), ("B_local", -1.0)])
    u1 = m.slot([("upd_dij", 1.0)])
    old = m.slot([("upd", 1.0)])
    m.out("upd", [(u1, 1.0), (u2, 1.0), (old, -1.0)])
    layers.append(m.build("stamp-flag",
                          step="upd <- upd_dij or (gamma_s and relax_n and arow and not visit)",
                          touched=["upd"]))

    m = new_mlp(pool)
    select_scalar(m, cfg, "newval",
                  [ScalarBranch([("cnt_n", 1.0)], on=("gamma_s",), signed=True),
                   ScalarBranch([("newd", 1.0)], off=("gamma_s",))],
                  row="B_local", factor=2.0, old_signed=True)
    layers.append(m.build("pick-value", step="newval <- gamma_s ? cnt_n : newd",
                          touched=["newval"]))

    m = new_mlp(pool)
    select_scalar(m, cfg, "dists",
                  [ScalarBranch([("newval", 1.0)], on=("upd",), signed=True)],
                  row="B_local", factor=2.0, old_signed=True)
    select_scalar(m, cfg, "prev",
                  [ScalarBranch([("sel_i_n", 1.0)], on=("upd",))],
                  row="B_local")
    layers.append(m.build("commit", step="if upd: dists <- newval, prev <- sel_i_n",
                          touched=["dists", "prev"]))

    layers.append(build_all_one(cfg, pool, "all-visited", [("visit", "term")],
                                step="term <- every node visited"))

    layers = common.apply_instrumentation(cfg, pool, layers, FLAG_SITES, PAIR_SITES)
    schema.freeze()
    meta = ProgramMetadata("multitask", len(layers), max(len(l.heads) for l in layers),
                           instrumented=cfg.rounding_enabled or cfg.write_prevention_enabled)
    return LoopedProgram("multitask", layers, schema, meta)
