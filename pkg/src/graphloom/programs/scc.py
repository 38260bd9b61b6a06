"""Strongly connected components, two-phase (forward then reverse walk).

Twenty-two layers per pass. The program runs two depth-first traversals
back to back, both driven by the shared minimum scan. A walk cursor
``cur`` (a position pointer; p_0 means parked) carries an explicit DFS:
each pass re-keys ``masked`` from the cursor's neighbourhood, the scan
picks the best candidate, and on the selection pass one of eight gates
fires:

* phase 1 (``term_part`` = 0), out-edges: start a tree at the best root
  key, descend to the lowest-index unvisited out-neighbour, finish the
  cursor node (stamp an increasing finish counter) and pop its stored
  parent pointer, or, parked with nothing left, raise ``term_part``;
* phase 2 (``term_part`` = 1), in-edges: the same walk on the reversed
  graph, roots ordered by decreasing finish stamp (key ORDER_LIMIT minus
  stamp), writing the current root's index into ``sccs_int`` at every
  node it discovers; parked with nothing left raises ``term``.

Every node is discovered once and popped once per phase, so a run is at
most 4n+2 selections of one n-pass sweep each. The result matches
forward-order Kosaraju with ascending-index children and restarts at the
lowest unvisited index: each component labelled by its member with the
latest phase-1 finish time.

Parent pointers live in per-node pair columns (one stack per phase),
written at discovery and read back by a cursor-addressed head at every
pass; roots store the parked pointer p_0 so the final pop parks the
walk. State writes go through a clear-and-redeposit pattern that leaves
unaddressed passes bitwise unchanged (all stored values sit on the
integer grid). Runs on unweighted graphs: adjacency entries double as
candidate gates.
"""

from __future__ import annotations

from ..layout import ColumnSchema
from ..primitives import (
    Mlp,
    PeBranch,
    PeTarget,
    ScalarBranch,
    build_broadcast,
    build_pe_select,
    less_flag,
    new_mlp,
    pointer_head,
    select_scalar,
    self_head,
    wipe_row0,
)
from ..transformer import (
    KIND_ADJ,
    KIND_ADJ_T,
    LoopedProgram,
    ProgramMetadata,
    SimConfig,
    TransformerLayer,
)
from . import common

ACT_GATES = ("gA_start", "gA_desc", "gA_fin", "gA_done",
             "gB_start", "gB_desc", "gB_fin", "gB_done")

FLAG_SITES = {
    **common.SCAN_FLAG_SITES,
    "bcast-arm": [("gamma_n", "B_local"), ("tp_n", "B_local"),
                  ("curz_n", "B_local")],
    "cur-edges": [("arow_out", "B_local"), ("arow_in", "B_local")],
    "gates-fwd": [("found", "B_global"), ("gA_start", "B_global"),
                  ("gA_desc", "B_global"), ("gA_fin", "B_global"),
                  ("gA_done", "B_global")],
    "gates-rev": [("gB_start", "B_global"), ("gB_desc", "B_global"),
                  ("gB_fin", "B_global"), ("gB_done", "B_global")],
    "park-flag": [("curz", "B_global")],
}
PAIR_SITES = {**common.SCAN_PAIR_SITES, "move-walk": ["cur"]}


def build_schema() -> ColumnSchema:
    schema = ColumnSchema()
    common.scan_columns(schema)
    schema.add_pair("cur")
    schema.add_pair("oldcur")
    schema.add_pair("stackp_1")
    schema.add_pair("stackp_2")
    schema.add_pair("pop1")
    schema.add_pair("pop2")
    schema.add_pair("st1dep")
    schema.add_pair("st2dep")
    schema.add("cur_i", "curz", "curz_n", "oldcur_i", "rootkey", "root_i", "sccs_int",
               "visit_1", "visit_2", "fin", "fcnt", "stackpi_1", "stackpi_2",
               "popi1", "popi2", "arow_out", "arow_in", "j_int", "sccsj",
               "term_part", "tp_n", "found", "fin_dep", "vis1_dep",
               "vis2_dep", "sccs_dep", "sti1_dep", "sti2_dep")
    schema.add(*ACT_GATES)
    return schema


def _reset_keys(cfg: SimConfig, pool) -> TransformerLayer:
    """masked <- candidate keys for the current walk state (10 disjoint
    branches over phase, parked flag, edge flag and visited flag)."""
    m = new_mlp(pool)
    far = [("B_local", cfg.omega)]
    branches = [
        # phase 1: parked means root-seek on rootkey, else descend on out-edges
        ScalarBranch([("rootkey", 1.0)], on=("gamma_n", "curz_n"),
                     off=("tp_n", "visit_1")),
        ScalarBranch(far, on=("gamma_n", "curz_n", "visit_1"), off=("tp_n",)),
        ScalarBranch([("nindex", 1.0)], on=("gamma_n", "arow_out"),
                     off=("tp_n", "curz_n", "visit_1")),
        ScalarBranch(far, on=("gamma_n",), off=("tp_n", "curz_n", "arow_out")),
        ScalarBranch(far, on=("gamma_n", "arow_out", "visit_1"),
                     off=("tp_n", "curz_n")),
        # phase 2: reversed-finish root keys, descend on in-edges
        ScalarBranch([("B_local", common.ORDER_LIMIT), ("fin", -1.0)],
                     on=("gamma_n", "curz_n", "tp_n"), off=("visit_2",)),
        ScalarBranch(far, on=("gamma_n", "curz_n", "tp_n", "visit_2")),
        ScalarBranch([("nindex", 1.0)], on=("gamma_n", "arow_in", "tp_n"),
                     off=("curz_n", "visit_2")),
        ScalarBranch(far, on=("gamma_n", "tp_n"), off=("curz_n", "arow_in")),
        ScalarBranch(far, on=("gamma_n", "arow_in", "visit_2", "tp_n"),
                     off=("curz_n",)),
    ]
    select_scalar(m, cfg, "masked", branches, row="B_local", factor=2.0)
    select_scalar(m, cfg, "visit_min", [], row="B_local", old=[(("gamma_n",), ())])
    return m.build("reset-keys", step="masked <- walk candidate keys; visit_min <- 0",
                   touched=["masked", "visit_min"])


def _gate_layer(cfg: SimConfig, pool, phase_b: bool) -> TransformerLayer:
    m = new_mlp(pool)
    omega_hat = cfg.omega - cfg.epsilon
    fd = less_flag(m, cfg, [("val_best", 1.0)], [("B_global", omega_hat)])
    tm = m.slot([("term_min", 1.0)])
    cz = m.slot([("curz", 1.0)])
    tp = m.slot([("term_part", 1.0)])
    bg = m.slot([("B_global", 1.0)])
    if not phase_b:
        outs = {
            "found": fd,
            "gA_start": m.slot([(tm, 1.0), (cz, 1.0), (fd, 1.0), (tp, -1.0), (bg, -2.0)], stage=3),
            "gA_desc": m.slot([(tm, 1.0), (fd, 1.0), (cz, -1.0), (tp, -1.0), (bg, -1.0)], stage=3),
            "gA_fin": m.slot([(tm, 1.0), (fd, -1.0), (cz, -1.0), (tp, -1.0)], stage=3),
            "gA_done": m.slot([(tm, 1.0), (cz, 1.0), (fd, -1.0), (tp, -1.0), (bg, -1.0)], stage=3),
        }
        name, step = "gates-fwd", "phase-1 action gates (and found flag)"
    else:
        outs = {
            "gB_start": m.slot([(tm, 1.0), (cz, 1.0), (fd, 1.0), (tp, 1.0), (bg, -3.0)], stage=3),
            "gB_desc": m.slot([(tm, 1.0), (fd, 1.0), (tp, 1.0), (cz, -1.0), (bg, -2.0)], stage=3),
            "gB_fin": m.slot([(tm, 1.0), (tp, 1.0), (fd, -1.0), (cz, -1.0), (bg, -1.0)], stage=3),
            "gB_done": m.slot([(tm, 1.0), (cz, 1.0), (tp, 1.0), (fd, -1.0), (bg, -2.0)], stage=3),
        }
        name, step = "gates-rev", "phase-2 action gates"
    for dst, s in outs.items():
        old = m.slot([(dst, 1.0)])
        m.out(dst, [(s, 1.0), (old, -1.0)])
    return m.build(name, step=step, touched=list(outs))


def build(cfg: SimConfig) -> LoopedProgram:
    schema = build_schema()
    pool = schema.scratch_pool()
    layers: list[TransformerLayer] = []

    layers.append(common.bcast_gamma(
        cfg, pool, extra=[("term_part", "tp_n"), ("curz", "curz_n")]))

    layers.append(common.pointer_layer(
        cfg, pool, "cur-edges",
        adj=[("cur", KIND_ADJ_T, "arow_out"), ("cur", KIND_ADJ, "arow_in")],
        step="arow_out/arow_in <- cursor's out- and in-neighbourhood"))

    layers.append(common.reinit_pointers(cfg, pool))
    layers.append(_reset_keys(cfg, pool))
    layers.append(common.incr_cursor(cfg, pool))
    layers.append(common.read_cursor(cfg, pool))
    layers.append(common.compare_best(cfg, pool))
    layers.append(common.update_best(cfg, pool))
    layers.append(common.mark_swept(cfg, pool))
    layers.append(common.check_swept(cfg, pool))

    layers.append(common.pointer_layer(
        cfg, pool, "read-best-and-stacks",
        reads=[("idx_best", "nindex", "j_int"),
               ("idx_best", "sccs_int", "sccsj"),
               ("cur", "stackp_1.x", "pop1.x"), ("cur", "stackp_1.y", "pop1.y"),
               ("cur", "stackpi_1", "popi1"),
               ("cur", "stackp_2.x", "pop2.x"), ("cur", "stackp_2.y", "pop2.y"),
               ("cur", "stackpi_2", "popi2"),
        ],
        step="j_int/sccsj <- best row; pop1/pop2 <- cursor's stored parents"))

    layers.append(_gate_layer(cfg, pool, phase_b=False))
    layers.append(_gate_layer(cfg, pool, phase_b=True))

    pool.reset()
    m = Mlp(pool)
    clear = self_head([("oldcur.x", "oldcur.x", -1.0), ("oldcur.y", "oldcur.y", -1.0)])
    copy = self_head([("cur.x", "oldcur.x", 1.0), ("cur.y", "oldcur.y", 1.0)])
    p = m.slot([("cur_i", 1.0)])
    old = m.slot([("oldcur_i", 1.0)])
    m.out("oldcur_i", [(p, 1.0), (old, -1.0)])
    layers.append(m.build("save-walk", [clear, copy],
                          step="oldcur <- cur (pair and index)",
                          touched=["oldcur.x", "oldcur.y", "oldcur_i"]))

    m = new_mlp(pool)
    select_scalar(m, cfg, "cur_i",
                  [ScalarBranch([("j_int", 1.0)], on=("gA_start",)),
                   ScalarBranch([("j_int", 1.0)], on=("gA_desc",)),
                   ScalarBranch([("j_int", 1.0)], on=("gB_start",)),
                   ScalarBranch([("j_int", 1.0)], on=("gB_desc",)),
                   ScalarBranch([("popi1", 1.0)], on=("gA_fin",)),
                   ScalarBranch([("popi2", 1.0)], on=("gB_fin",))])
    layers.append(m.build("walk-index",
                          step="cur_i <- discovered index or popped parent index",
                          touched=["cur_i"]))

    m = new_mlp(pool)
    pf = m.slot([("gA_fin", 1.0)])
    m.out("fcnt", [(pf, 1.0)])
    select_scalar(m, cfg, "root_i",
                  [ScalarBranch([("j_int", 1.0)], on=("gB_start",))])
    pa = m.slot([("gA_done", 1.0)])
    m.out("term_part", [(pa, 1.0)])
    pb = m.slot([("gB_done", 1.0)])
    m.out("term", [(pb, 1.0)])
    layers.append(m.build("bookkeeping",
                          step="fcnt += finish; root_i <- new root; phase/term flags",
                          touched=["fcnt", "root_i", "term_part", "term"]))

    m = new_mlp(pool)
    z = m.slot([("B_global", 1.0), ("cur_i", -2.0)])
    common.replace_with_slot(m, "curz", z)
    layers.append(m.build("park-flag", step="curz <- [cur_i == 0]",
                          touched=["curz"]))

    m = new_mlp(pool)
    select_scalar(m, cfg, "fin_dep",
                  [ScalarBranch([("fcnt", 1.0)], on=("gA_fin",))], old=[((), ())])
    select_scalar(m, cfg, "vis1_dep",
                  [ScalarBranch([("gA_start", 1.0), ("gA_desc", 1.0)])], old=[((), ())])
    select_scalar(m, cfg, "vis2_dep",
                  [ScalarBranch([("gB_start", 1.0), ("gB_desc", 1.0)])], old=[((), ())])
    select_scalar(m, cfg, "sccs_dep",
                  [ScalarBranch([("root_i", 1.0)], on=("gB_start",)),
                   ScalarBranch([("root_i", 1.0)], on=("gB_desc",)),
                   ScalarBranch([("sccsj", 1.0)], off=("gB_start", "gB_desc"))])
    layers.append(m.build("deposit-ints",
                          step="stage scalar deposits (finish stamp, visited, labels)",
                          touched=["fin_dep", "vis1_dep", "vis2_dep", "sccs_dep"]))

    targets = [PeTarget("cur", [
        PeBranch(("pair", "idx_best"), on=("gA_start",)),
        PeBranch(("pair", "idx_best"), on=("gA_desc",)),
        PeBranch(("pair", "idx_best"), on=("gB_start",)),
        PeBranch(("pair", "idx_best"), on=("gB_desc",)),
        PeBranch(("pair", "pop1"), on=("gA_fin",)),
        PeBranch(("pair", "pop2"), on=("gB_fin",)),
        PeBranch(("hold",), off=("gA_start", "gA_desc", "gB_start", "gB_desc",
                                 "gA_fin", "gB_fin")),
    ])]
    layers.append(build_pe_select(cfg, pool, "move-walk", targets,
                                  step="cur <- discovered node or popped parent"))

    m = new_mlp(pool)
    for coord in (".x", ".y"):
        select_scalar(m, cfg, "st1dep" + coord,
                      [ScalarBranch([("oldcur" + coord, 1.0)], on=("gA_start",), signed=True),
                       ScalarBranch([("oldcur" + coord, 1.0)], on=("gA_desc",), signed=True)],
                      old=[((), ())], old_signed=True)
    select_scalar(m, cfg, "sti1_dep",
                  [ScalarBranch([("oldcur_i", 1.0)], on=("gA_start",)),
                   ScalarBranch([("oldcur_i", 1.0)], on=("gA_desc",))], old=[((), ())])
    layers.append(m.build("deposit-parent-fwd",
                          step="st1dep <- parent pointer for a phase-1 discovery",
                          touched=["st1dep.x", "st1dep.y", "sti1_dep"]))

    m = new_mlp(pool)
    for coord in (".x", ".y"):
        select_scalar(m, cfg, "st2dep" + coord,
                      [ScalarBranch([("oldcur" + coord, 1.0)], on=("gB_start",), signed=True),
                       ScalarBranch([("oldcur" + coord, 1.0)], on=("gB_desc",), signed=True)],
                      old=[((), ())], old_signed=True)
    select_scalar(m, cfg, "sti2_dep",
                  [ScalarBranch([("oldcur_i", 1.0)], on=("gB_start",)),
                   ScalarBranch([("oldcur_i", 1.0)], on=("gB_desc",))], old=[((), ())])
    layers.append(m.build("deposit-parent-rev",
                          step="st2dep <- parent pointer for a phase-2 discovery",
                          touched=["st2dep.x", "st2dep.y", "sti2_dep"]))

    pool.reset()
    m = Mlp(pool)
    deposits = [("sccs_dep", "sccs_int"), ("vis1_dep", "visit_1"),
                ("vis2_dep", "visit_2"),
                ("st1dep.x", "stackp_1.x"), ("st1dep.y", "stackp_1.y"),
                ("sti1_dep", "stackpi_1"),
                ("st2dep.x", "stackp_2.x"), ("st2dep.y", "stackp_2.y"),
                ("sti2_dep", "stackpi_2")]
    companions = [("sccs_int", "sccs_int", -2.0)]
    companions += [(src, dst, -1.0) for src, dst in deposits]
    companions.append(("fin_dep", "fin", -1.0))
    heads = [
        self_head(companions),
        pointer_head("idx_best", [("sccs_int", "sccs_int", 2.0)]),
        pointer_head("idx_best", [(src, dst, 2.0) for src, dst in deposits]),
        pointer_head("oldcur", [("fin_dep", "fin", 2.0)]),
    ]
    wipe_row0(m, cfg, "sccs_int")
    layers.append(m.build("write-state", heads,
                          step="clear+redeposit sccs_int; deposit visited/stack/fin",
                          touched=["sccs_int", "visit_1", "visit_2", "fin"]))

    layers = common.apply_instrumentation(cfg, pool, layers, FLAG_SITES, PAIR_SITES)
    schema.freeze()
    meta = ProgramMetadata("scc", len(layers), max(len(l.heads) for l in layers),
                           instrumented=cfg.rounding_enabled or cfg.write_prevention_enabled)
    return LoopedProgram("scc", layers, schema, meta)
