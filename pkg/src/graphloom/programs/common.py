"""The selection scan shared by the graph programs.

Dijkstra, BFS, DFS, SCC and the multitask program all revolve around the
same inner loop: repeatedly pick the node minimising a per-node key, then
act on it. The scan works a cursor pointer across the node rows, one row
per pass, tracking the best key seen; a full sweep takes n passes and ends
when every row's been-swept flag is up, which raises ``term_min`` for one
pass. Action layers placed after the check fire on exactly that pass, and
the re-initialisation layers placed before it consume the same flag on the
following pass, arming the next sweep. The encoder raises ``term_min`` so
the first pass starts with a re-initialisation.

Key encodings keep every comparison at least one margin apart: visited
nodes carry omega (never selected while anything else remains), candidate
nodes carry their actual key, not-yet-eligible nodes carry omega_hat, and
the running best starts one margin above omega. Ties fall to the lowest
index because the cursor sweeps ascending.

Column conventions here and in the program modules: a ``_n`` suffix marks
a per-node mirror of a global register (filled by a broadcast layer),
``sel_i`` / ``val_cur`` style registers are global scalars, and pair
columns (positional-encoding pointers) always live in row 0.
"""

from __future__ import annotations

from ..layout import ColumnSchema, ScratchPool
from ..transformer import (
    KIND_IDENTITY,
    AttentionHead,
    SimConfig,
    TransformerLayer,
    VWire,
)
from ..primitives import (
    Mlp,
    PeBranch,
    PeTarget,
    ScalarBranch,
    build_all_one,
    build_broadcast,
    build_increment,
    build_pe_select,
    build_round_flags,
    build_round_pair,
    build_term_latch,
    build_term_suppress,
    gate_wires,
    less_flag,
    pointer_head,
    select_scalar,
    self_head,
    wipe_nodes,
)

# Fixed radix for composite order keys (sweep-count * ORDER_LIMIT + index)
# and for the reversed finish keys in the SCC program. Keeping it a
# constant, with the key range capped far below omega, makes the weights
# independent of the graph size; it bounds the supported node count.
ORDER_LIMIT = 256.0


def scan_columns(schema: ColumnSchema) -> None:
    schema.add("term", "term_min", "gamma_n", "masked", "visit_min",
               "val_cur", "val_best", "cond_min", "S_term")
    schema.add_pair("idx_cur")
    schema.add_pair("idx_best")


def replace_with_slot(m: Mlp, dst: str, value_slot: str, signed: bool = False) -> None:
    """dst <- value_slot (unconditional replacement of a scalar column)."""
    p = m.slot([(dst, 1.0)])
    wires = [(value_slot, 1.0), (p, -1.0)]
    if signed:
        q = m.slot([(dst, -1.0)])
        wires.append((q, 1.0))
    m.out(dst, wires)


def pointer_layer(cfg: SimConfig, pool: ScratchPool, name: str, *,
                  reads=(), writes=(), adj=(), clears=(),
                  mlp_extra=None, step: str = "") -> TransformerLayer:
    """One layer of pointer-addressed data movement.

    reads:  (base, src, dst)  row addressed by ``base``, per-node column
            ``src``, into row 0 of global column ``dst``;
    writes: (base, src, dst)  row 0 of global ``src`` into the addressed
            row of per-node ``dst`` (additive; callers arrange that the
            target entry is zero or gate the source value);
    adj:    (base, kind, dst) the addressed row's neighbourhood, one
            adjacency column per node, into per-node ``dst``;
    clears: extra columns zeroed through the self head.

    The self head is listed first so targets are cleared before deposits
    land; it also carries the -1 companions that cancel the write spur in
    row 0. Read spurs in the node rows are wiped by the MLP (both signs).
    """
    pool.reset()
    m = Mlp(pool)
    selfw: list[VWire] = []
    for col in clears:
        selfw.append((col, col, -1.0))
    per_base: dict[str, list[VWire]] = {}
    order: list[str] = []
    for base, src, dst in reads:
        if base not in per_base:
            per_base[base] = []
            order.append(base)
        per_base[base].append((src, dst, 2.0))
        selfw.append((dst, dst, -1.0))
    for base, src, dst in writes:
        if base not in per_base:
            per_base[base] = []
            order.append(base)
        per_base[base].append((src, dst, 2.0))
        selfw.append((src, dst, -1.0))
    for base, kind, dst in adj:
        selfw.append((dst, dst, -1.0))
    heads = [self_head(selfw)]
    for base in order:
        heads.append(pointer_head(base, per_base[base]))
    for base, kind, dst in adj:
        heads.append(pointer_head(base, [("B_global", dst, 2.0)], kind))
    for _, _, dst in reads:
        wipe_nodes(m, cfg, dst)
    if mlp_extra is not None:
        mlp_extra(m)
    touched = [d for _, _, d in reads] + [d for _, _, d in writes] + [d for _, _, d in adj]
    return m.build(name, heads, step, touched=touched)


# ---------------------------------------------------------------------------
# the nine standard scan layers


def bcast_gamma(cfg: SimConfig, pool: ScratchPool, extra=()) -> TransformerLayer:
    moves = [("term_min", "gamma_n")] + list(extra)
    return build_broadcast(cfg, pool, "bcast-arm",
                           moves, step="gamma_n <- term_min (arm re-init)")


def reinit_pointers(cfg: SimConfig, pool: ScratchPool) -> TransformerLayer:
    def vb(m: Mlp) -> None:
        # old_signed: DFS keys are negative, so the cancelled value can be too
        select_scalar(m, cfg, "val_best",
                      [ScalarBranch([("B_global", cfg.omega + cfg.epsilon)],
                                    on=("term_min",))],
                      factor=2.0, old_signed=True)
    targets = [
        PeTarget("idx_cur", [PeBranch(("const", 0.0, 1.0), on=("term_min",)),
                             PeBranch(("hold",), off=("term_min",))]),
        PeTarget("idx_best", [PeBranch(("const", 0.0, 1.0), on=("term_min",)),
                              PeBranch(("hold",), off=("term_min",))]),
    ]
    return build_pe_select(cfg, pool, "reinit-pointers", targets, mlp_extra=vb,
                           step="sweep start: cursor/best <- p_0, val_best <- omega+eps")


def incr_cursor(cfg: SimConfig, pool: ScratchPool) -> TransformerLayer:
    return build_increment(cfg, pool, "advance-cursor", [("idx_cur", "idx_cur")],
                           step="idx_cur <- next position")


def read_cursor(cfg: SimConfig, pool: ScratchPool) -> TransformerLayer:
    return pointer_layer(cfg, pool, "read-key",
                         reads=[("idx_cur", "masked", "val_cur")],
                         step="val_cur <- masked[idx_cur]")


def compare_best(cfg: SimConfig, pool: ScratchPool) -> TransformerLayer:
    pool.reset()
    m = Mlp(pool)
    t = less_flag(m, cfg, [("val_cur", 1.0)], [("val_best", 1.0)])
    replace_with_slot(m, "cond_min", t)
    return m.build("compare-key", step="cond_min <- [val_cur < val_best]",
                   touched=["cond_min"])


def update_best(cfg: SimConfig, pool: ScratchPool) -> TransformerLayer:
    def vb(m: Mlp) -> None:
        select_scalar(m, cfg, "val_best",
                      [ScalarBranch([("val_cur", 1.0)], on=("cond_min",), signed=True)],
                      factor=2.0, old_signed=True)
    targets = [PeTarget("idx_best", [PeBranch(("pair", "idx_cur"), on=("cond_min",)),
                                     PeBranch(("hold",), off=("cond_min",))])]
    return build_pe_select(cfg, pool, "update-best", targets, mlp_extra=vb,
                           step="if cond_min: idx_best/val_best <- cursor's")


def mark_swept(cfg: SimConfig, pool: ScratchPool) -> TransformerLayer:
    pool.reset()
    head = pointer_head("idx_cur", [("B_global", "visit_min", 2.0)])
    cancel = self_head([("B_global", "visit_min", -1.0)])
    return TransformerLayer("mark-swept", [cancel, head],
                            step="visit_min[idx_cur] <- 1")


def check_swept(cfg: SimConfig, pool: ScratchPool) -> TransformerLayer:
    return build_all_one(cfg, pool, "sweep-done", [("visit_min", "term_min")],
                         step="term_min <- all rows swept")


def scan_block(cfg: SimConfig, pool: ScratchPool, reinit_nodes: TransformerLayer,
               bcast_extra=()) -> list[TransformerLayer]:
    """The standard nine layers, with the per-program key reset spliced in."""
    return [
        bcast_gamma(cfg, pool, bcast_extra),
        reinit_pointers(cfg, pool),
        reinit_nodes,
        incr_cursor(cfg, pool),
        read_cursor(cfg, pool),
        compare_best(cfg, pool),
        update_best(cfg, pool),
        mark_swept(cfg, pool),
        check_swept(cfg, pool),
    ]


# ---------------------------------------------------------------------------
# optional instrumentation

# Boolean columns the scan itself produces, by producing layer, and the
# pointer pairs it moves. Each entry is (column, bias row): per-node flags
# round against B_local, global ones against B_global.
SCAN_FLAG_SITES: dict[str, list[tuple[str, str]]] = {
    "bcast-arm": [("gamma_n", "B_local")],
    "compare-key": [("cond_min", "B_global")],
    "mark-swept": [("visit_min", "B_local")],
    "sweep-done": [("term_min", "B_global")],
}

SCAN_PAIR_SITES: dict[str, list[str]] = {
    "advance-cursor": ["idx_cur"],
    "update-best": ["idx_best"],
}


def apply_instrumentation(cfg: SimConfig, pool: ScratchPool,
                          layers: list[TransformerLayer],
                          flag_sites: dict[str, list[tuple[str, str]]],
                          pair_sites: dict[str, list[str]],
                          term_site: str | None = "sweep-done",
                          ) -> list[TransformerLayer]:
    """Weave the optional cleanup layers into a pass.

    With rounding enabled, a flag-rounding layer follows each layer listed
    in ``flag_sites`` and a two-layer pair snap follows each layer listed
    in ``pair_sites``. With write-prevention enabled, the overtime arm
    suppressor follows the completion check (after its rounding, so it
    reads a clean flag) and the termination latch closes the pass.
    """
    if not (cfg.rounding_enabled or cfg.write_prevention_enabled):
        return layers
    out: list[TransformerLayer] = []
    for layer in layers:
        out.append(layer)
        if cfg.rounding_enabled:
            sites = flag_sites.get(layer.name)
            if sites:
                cols = [c for c, _ in sites]
                rows = {c: r for c, r in sites if r != "B_global"}
                out.append(build_round_flags(
                    cfg, pool, layer.name + "-round", cols, rows,
                    step="re-round " + ",".join(cols)))
            for base in pair_sites.get(layer.name, ()):
                out.extend(build_round_pair(cfg, pool, layer.name + "-snap", base))
        if cfg.write_prevention_enabled and layer.name == term_site:
            out.append(build_term_suppress(cfg, pool, "overtime-freeze"))
    if cfg.write_prevention_enabled and term_site is not None:
        out.append(build_term_latch(cfg, pool, "term-latch"))
    return out
