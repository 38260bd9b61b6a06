"""Reusable weight constructions.

Every compiled program is assembled from a handful of motifs, and this
module is the only place their wire-level mechanics live:

* attention factories: self heads (sigma = I), pointer heads that tie the
  addressed row with row 0, a broadcast head (every row attends row 0) and
  the n-way aggregate head behind the all-ones check;
* the ``Mlp`` assembler, which turns gated clause expressions into the four
  weight matrices while keeping the wire order the exactness argument needs
  (saturation-scale gate terms cancel among themselves before any value
  term lands);
* flag circuits (strict less-than, non-positive, equals-zero) whose outputs
  are exactly 0.0 or 1.0 for operands spaced by the comparison margin;
* whole-layer builders for broadcasting, the termination check, pointer
  increments, conditional pointer updates, and the optional re-rounding
  instrumentation.

Conventions the factories rely on: global registers live in row 0 of their
column and are zero elsewhere; per-node values live in rows 1..n and keep
row 0 zero; scratch columns (``S*``) are zero between layers. Each builder
either preserves those invariants itself or emits the wipe clauses that
restore them within the same layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .layout import ScratchPool
from .transformer import (
    KIND_ADJ,
    KIND_ADJ_T,
    KIND_IDENTITY,
    AttentionHead,
    QWire,
    SimConfig,
    TransformerLayer,
    VWire,
)

# Width of the in-layer rounding band used by the aggregate check. The
# aggregated value is pushed through two shifted ReLU thresholds whose
# difference is exactly 2^-10, then rescaled by 2^10, so summation noise
# far below the band cannot reach the output.
ROUND_BAND = 2.0**-10

Expr = list[tuple[str, float]]

# Self q/k wires: every row's query and key is its own positional encoding,
# with row 0 (whose position columns are zeroed) standing in as p_0 via the
# global bias on the second axis. Scores are the pairwise position dot
# products, maximal exactly on the diagonal, so sigma = I bitwise.
SELF_QK: list[QWire] = [("P.x", 0, 1.0), ("P.y", 1, 1.0), ("B_global", 1, 1.0)]


def pointer_qk(base: str) -> list[QWire]:
    """Q and K wires of a head addressed by the pair column ``base``.

    Row 0's query and key both become the stored pointer value (the pair
    column lives in row 0; the position columns are zero there) while node
    rows keep their own position. If the pointer holds p_m bitwise, rows 0
    and m tie exactly and average; every other row strictly attends itself.
    """
    return [
        (base + ".x", 0, 1.0),
        (base + ".y", 1, 1.0),
        ("P.x", 0, 1.0),
        ("P.y", 1, 1.0),
    ]


def self_head(wv: list[VWire]) -> AttentionHead:
    """sigma = I head: each row adds a weighted copy of its own columns."""
    return AttentionHead(KIND_IDENTITY, list(SELF_QK), list(SELF_QK), list(wv))


def pointer_head(base: str, wv: list[VWire], kind: str = KIND_IDENTITY,
                 annealed: bool = False) -> AttentionHead:
    """Head addressed by pair column ``base``.

    With value +2 on a wire, the tied half-half average implements either a
    read (per-node source lands in row 0 of a global target; the node-row
    spurs need a same-layer node wipe) or a write (row-0 source lands in
    the addressed row; the row-0 spur is cancelled by a -1 wire on a
    companion self head). With kind Adj / AdjTranspose the deposit is
    premultiplied by the padded adjacency, turning a +2 wire from B_global
    into the addressed row's in- or out-neighbourhood column.
    """
    qk = pointer_qk(base)
    return AttentionHead(kind, qk, list(qk), list(wv), annealed)


def broadcast_head(wv: list[VWire]) -> AttentionHead:
    """Every row attends row 0 (strict: only the t=0 key is nonzero)."""
    wq = [("B_global", 0, 1.0), ("B_local", 0, 1.0)]
    wk = [("B_global", 0, 1.0)]
    return AttentionHead(KIND_IDENTITY, wq, wk, list(wv))


def aggregate_head(wv: list[VWire]) -> AttentionHead:
    """Row 0 ties over all node rows (score exactly 1 each); node rows
    attend row 0, where per-node sources are zero, so only row 0 receives
    a deposit: the node average of each source."""
    wq = [("B_global", 0, 1.0), ("B_local", 0, -1.0)]
    wk = [("B_local", 0, 1.0), ("B_global", 0, -1.0)]
    return AttentionHead(KIND_IDENTITY, wq, wk, list(wv))


def gate_wires(cfg: SimConfig, on=(), off=(), row: str = "B_global",
               factor: float = 1.0) -> Expr:
    """Gate prefix for a clause: zero iff every ``on`` flag is 1 and every
    ``off`` flag is 0 (at rows selected by ``row``), and below -omega
    otherwise. The terms are emitted before any value term so that, when
    the gate is open, the saturation-scale contributions cancel exactly
    among themselves and the running sum re-enters the value's grid.

    ``factor`` widens the gate for clauses whose value terms can reach
    omega-scale magnitudes themselves.
    """
    g = cfg.omega * factor
    terms: Expr = [(c, g) for c in on]
    if on:
        terms.append((row, -g * len(on)))
    terms.extend((c, -g) for c in off)
    return terms


class Mlp:
    """Assembles one layer's four weight matrices from clause expressions.

    ``slot(expr)`` allocates a scratch column and wires ``expr`` into it;
    the slot's value after that stage is relu of the expression. Stage-1
    expressions read state columns; later stages may only read slots, which
    are promoted forward through identity wires as needed (slot values are
    post-relu, hence nonnegative, so promotion is exact). ``out`` wires an
    expression of slots into a state column through the final matrix.
    """

    def __init__(self, pool: ScratchPool):
        self._pool = pool
        self.stages: list[list[VWire]] = [[], [], [], []]
        self._avail: dict[str, int] = {}

    def slot(self, expr: Expr, stage: int = 1) -> str:
        if not (1 <= stage <= 3):
            raise ValueError("slots live in stages 1..3")
        name = self._pool.take()
        for src, val in expr:
            if stage > 1:
                self._promote(src, stage - 1)
            self.stages[stage - 1].append((src, name, float(val)))
        self._avail[name] = stage
        return name

    def out(self, dst: str, expr: Expr) -> None:
        for src, val in expr:
            self._promote(src, 3)
            self.stages[3].append((src, dst, float(val)))

    def _promote(self, name: str, to_stage: int) -> None:
        if name not in self._avail:
            raise KeyError(f"{name!r} is not a slot; later stages read slots only")
        while self._avail[name] < to_stage:
            here = self._avail[name]
            self.stages[here].append((name, name, 1.0))
            self._avail[name] = here + 1

    def build(self, name: str, heads: list[AttentionHead] | None = None,
              step: str = "", touched=()) -> TransformerLayer:
        return TransformerLayer(
            name=name,
            heads=list(heads) if heads else [],
            w1=self.stages[0], w2=self.stages[1],
            w3=self.stages[2], w4=self.stages[3],
            step=step, touched=tuple(touched),
        )


def new_mlp(pool: ScratchPool) -> Mlp:
    """Fresh assembler for a new layer; scratch names restart from S0."""
    pool.reset()
    return Mlp(pool)


# ---------------------------------------------------------------------------
# row hygiene

def wipe_row0(m: Mlp, cfg: SimConfig, col: str) -> None:
    """Zero row 0 of a per-node column, leaving node rows untouched.

    Both signs are wiped; the clause pair reproduces the current value
    exactly (relu splits, unit wires), so the subtraction cancels bitwise.
    """
    mask = -2.0 * cfg.omega
    p = m.slot([(col, 1.0), ("B_local", mask)])
    q = m.slot([(col, -1.0), ("B_local", mask)])
    m.out(col, [(p, -1.0), (q, 1.0)])


def wipe_nodes(m: Mlp, cfg: SimConfig, col: str) -> None:
    """Zero every row but row 0 of a global column (read-spur cleanup)."""
    mask = -2.0 * cfg.omega
    p = m.slot([(col, 1.0), ("B_global", mask)])
    q = m.slot([(col, -1.0), ("B_global", mask)])
    m.out(col, [(p, -1.0), (q, 1.0)])


# ---------------------------------------------------------------------------
# flag circuits

def less_flag(m: Mlp, cfg: SimConfig, lhs: Expr, rhs: Expr) -> str:
    """Slot holding 1.0 if lhs < rhs else 0.0 (exact for operands whose
    gap is either zero or at least epsilon; the constructions keep all
    comparison operands on such a grid).

    The margin is charged on both bias columns so the same circuit serves
    global (row 0) and per-node comparisons.
    """
    e = cfg.epsilon
    diff = list(rhs) + [(c, -v) for c, v in lhs]
    s1 = m.slot(diff)
    s2 = m.slot(diff + [("B_global", -e), ("B_local", -e)])
    # gap >= epsilon: s1 - s2 = epsilon exactly, and 2 epsilon = 1
    return m.slot([(s1, 2.0), (s2, -2.0)], stage=2)


def nonpos_flag(m: Mlp, cfg: SimConfig, expr: Expr) -> str:
    """Slot holding 1.0 if expr <= 0 else 0.0, for integer-valued expr."""
    e = cfg.epsilon
    neg = [(c, -v) for c, v in expr]
    s1 = m.slot(neg + [("B_global", e), ("B_local", e)])
    s2 = m.slot(neg)
    return m.slot([(s1, 2.0), (s2, -2.0)], stage=2)


def zero_flag(m: Mlp, cfg: SimConfig, col: str, row: str = "B_global") -> str:
    """Slot holding 1.0 if the (nonnegative integer) column is 0 else 0.0."""
    return m.slot([(row, 1.0), (col, -2.0)])


# ---------------------------------------------------------------------------
# conditional scalar update

@dataclass
class ScalarBranch:
    """One arm of a conditional replacement: when every ``on`` flag is up
    and every ``off`` flag is down, the target receives ``terms``."""

    terms: Expr
    on: tuple[str, ...] = ()
    off: tuple[str, ...] = ()
    signed: bool = False


def select_scalar(m: Mlp, cfg: SimConfig, dst: str, branches: list[ScalarBranch],
                  row: str = "B_global", factor: float = 1.0,
                  old: list[tuple[tuple[str, ...], tuple[str, ...]]] | None = None,
                  old_signed: bool = False) -> None:
    """Gated replacement of a scalar column.

    Each branch deposits its value; for every gate combination in ``old``
    (default: each branch's own gates) the current value is subtracted, so
    firing branches replace rather than accumulate. Branches must be
    mutually exclusive. All values stay on the 0.25 grid (or are parked
    attention copies), so the cancellations are exact.
    """
    for b in branches:
        gates = gate_wires(cfg, b.on, b.off, row, factor)
        p = m.slot(gates + b.terms)
        m.out(dst, [(p, 1.0)])
        if b.signed:
            q = m.slot(gates + [(c, -v) for c, v in b.terms])
            m.out(dst, [(q, -1.0)])
    if old is None:
        old = [(b.on, b.off) for b in branches]
    for on, off in old:
        gates = gate_wires(cfg, on, off, row, factor)
        p = m.slot(gates + [(dst, 1.0)])
        m.out(dst, [(p, -1.0)])
        if old_signed:
            q = m.slot(gates + [(dst, -1.0)])
            m.out(dst, [(q, 1.0)])


# ---------------------------------------------------------------------------
# whole-layer builders

def build_broadcast(cfg: SimConfig, pool: ScratchPool, name: str,
                    moves: list[tuple[str, str]], step: str = "") -> TransformerLayer:
    """Copy global registers into per-node mirror columns (all rows).

    A self head clears the old mirrors, the broadcast head deposits row 0's
    values everywhere, and the MLP wipes the mirrors' row 0 so per-node
    gate clauses never fire in the global row.
    """
    m = new_mlp(pool)
    clear = self_head([(dst, dst, -1.0) for _, dst in moves])
    bcast = broadcast_head([(src, dst, 1.0) for src, dst in moves])
    for _, dst in moves:
        wipe_row0(m, cfg, dst)
    return m.build(name, [clear, bcast], step, touched=[d for _, d in moves])


def build_all_one(cfg: SimConfig, pool: ScratchPool, name: str,
                  checks: list[tuple[str, str]], step: str = "") -> TransformerLayer:
    """For each (src, dst): dst <- 1.0 if src is 1 on every node row else 0.0.

    The aggregate head deposits omega times the node average of src into a
    scratch sink. Near omega (all ones) the shifted ReLU pair brackets the
    value and their difference is exactly 2^-10, rescaled to exactly 1.0;
    a single missing node drops the aggregate by at least omega / n, far
    below the lower threshold. The raw aggregate is summation-order dirty,
    so it never touches the output directly and is cancelled by a carry.
    """
    m = new_mlp(pool)
    sinks = [pool.take() for _ in checks]
    clear = self_head([(dst, dst, -1.0) for _, dst in checks])
    agg = aggregate_head([(src, sink, cfg.omega)
                          for (src, _), sink in zip(checks, sinks)])
    bg = m.slot([("B_global", 1.0)])
    hi = 0.5 + ROUND_BAND
    for (_, dst), sink in zip(checks, sinks):
        x = m.slot([(sink, 1.0), ("B_global", 1.0 - cfg.omega)])
        dirt = m.slot([(sink, 1.0)])
        t1 = m.slot([(x, 1.0), (bg, -0.5)], stage=2)
        t2 = m.slot([(x, 1.0), (bg, -hi)], stage=2)
        d = m.slot([(t1, 1.0), (t2, -1.0)], stage=3)
        m.out(dst, [(d, 1.0 / ROUND_BAND)])
        m.out(sink, [(dirt, -1.0)])
    return m.build(name, [clear, agg], step, touched=[d for _, d in checks])


def rotation(cfg: SimConfig) -> tuple[float, float]:
    from .posenc import quantized_step

    return quantized_step(cfg.delta)


def _rotation_out(m: Mlp, xp: str, xm: str, yp: str, ym: str,
                  dstx: str, dsty: str, s: float, c: float) -> None:
    # Wire order fixed: it reproduces rotate_step's multiply/add sequence
    # bitwise (the opposite-sign slot of each pair is zero and contributes
    # an exact +-0.0 product).
    m.out(dstx, [(xp, c), (xm, -c), (yp, -s), (ym, s)])
    m.out(dsty, [(xp, s), (xm, -s), (yp, c), (ym, -c)])


def build_increment(cfg: SimConfig, pool: ScratchPool, name: str,
                    moves: list[tuple[str, str]], step: str = "") -> TransformerLayer:
    """dst <- rotate(src) for pair columns, bit-identical to the position
    table. In-place moves (src == dst) park the old value in hold scratch
    through the clearing head and cancel the hold afterwards; moves to a
    different pair read the source directly and only clear the target.
    """
    pool.reset()
    m = Mlp(pool)
    s, c = rotation(cfg)
    wires: list[VWire] = []
    reads: list[tuple[str, str, str, bool]] = []
    for src, dst in moves:
        wires += [(dst + ".x", dst + ".x", -1.0), (dst + ".y", dst + ".y", -1.0)]
        if src == dst:
            hx, hy = pool.take(), pool.take()
            wires += [(src + ".x", hx, 1.0), (src + ".y", hy, 1.0)]
            reads.append((hx, hy, dst, True))
        else:
            reads.append((src + ".x", src + ".y", dst, False))
    clear = self_head(wires)
    for rx, ry, dst, parked in reads:
        xp = m.slot([(rx, 1.0)])
        xm = m.slot([(rx, -1.0)])
        yp = m.slot([(ry, 1.0)])
        ym = m.slot([(ry, -1.0)])
        _rotation_out(m, xp, xm, yp, ym, dst + ".x", dst + ".y", s, c)
        if parked:
            m.out(rx, [(xp, -1.0), (xm, 1.0)])
            m.out(ry, [(yp, -1.0), (ym, 1.0)])
    touched = [d + x for _, d in moves for x in (".x", ".y")]
    return m.build(name, [clear], step, touched=touched)


@dataclass
class PeBranch:
    """One arm of a conditional pointer update. ``source`` is either
    ("pair", name) for another pair column, ("hold",) for the parked old
    value, or ("const", x, y) for a fixed encoding."""

    source: tuple
    on: tuple[str, ...] = ()
    off: tuple[str, ...] = ()


@dataclass
class PeTarget:
    dst: str
    branches: list[PeBranch] = field(default_factory=list)


def build_pe_select(cfg: SimConfig, pool: ScratchPool, name: str,
                    targets: list[PeTarget], mlp_extra=None,
                    step: str = "") -> TransformerLayer:
    """Conditionally replace pair columns.

    One self head clears every target pair and parks the old values in hold
    scratch. Each branch contributes sign-split, gate-prefixed copies of
    its source coordinates; with mutually exclusive branches exactly one
    lands (hold branches restore the parked value bitwise). ``mlp_extra``
    may add more clauses to the same layer before it is built.
    """
    m = new_mlp(pool)
    wires: list[VWire] = []
    holds: dict[str, tuple[str, str]] = {}
    for t in targets:
        hx, hy = pool.take(), pool.take()
        holds[t.dst] = (hx, hy)
        wires += [
            (t.dst + ".x", t.dst + ".x", -1.0), (t.dst + ".y", t.dst + ".y", -1.0),
            (t.dst + ".x", hx, 1.0), (t.dst + ".y", hy, 1.0),
        ]
    clear = self_head(wires)
    for t in targets:
        hx, hy = holds[t.dst]
        for b in t.branches:
            gates = gate_wires(cfg, b.on, b.off)
            if b.source[0] == "const":
                _, cx, cy = b.source
                for coord, cval in ((".x", cx), (".y", cy)):
                    if cval == 0.0:
                        continue
                    p = m.slot(gates + [("B_global", abs(cval))])
                    m.out(t.dst + coord, [(p, 1.0 if cval > 0 else -1.0)])
                continue
            if b.source[0] == "hold":
                sx, sy = hx, hy
            else:
                sx, sy = b.source[1] + ".x", b.source[1] + ".y"
            for coord, src in ((".x", sx), (".y", sy)):
                p = m.slot(gates + [(src, 1.0)])
                q = m.slot(gates + [(src, -1.0)])
                m.out(t.dst + coord, [(p, 1.0), (q, -1.0)])
        # the parked copies must leave the scratch columns clean (both signs)
        for h in (hx, hy):
            p = m.slot([(h, 1.0)])
            q = m.slot([(h, -1.0)])
            m.out(h, [(p, -1.0), (q, 1.0)])
    if mlp_extra is not None:
        mlp_extra(m)
    touched = [t.dst + x for t in targets for x in (".x", ".y")]
    return m.build(name, [clear], step, touched=touched)


# ---------------------------------------------------------------------------
# instrumentation layers

def band_half_width(cfg: SimConfig) -> float:
    """cfg.eta snapped down to a power of two.

    The rounding layer rescales the threshold-pair difference by the band's
    reciprocal; with a binary band both the difference (2 eta) and the gain
    (1 / (2 eta)) are exact floats, so an exact 0 or 1 passes through
    bit-identically instead of picking up an ulp of dirt.
    """
    return 2.0 ** math.floor(math.log2(cfg.eta))


def build_round_flags(cfg: SimConfig, pool: ScratchPool, name: str,
                      cols: list[str], row_cols: dict[str, str] | None = None,
                      step: str = "") -> TransformerLayer:
    """Re-round flag columns to {0, 1} through a band at 1/2.

    Inputs within the band of an endpoint come out exactly 0.0 or 1.0: the
    two shifted thresholds straddle 1/2, their difference is exactly twice
    the band half-width for any input near 0 or 1, and the rescale is a
    power of two. The +- value slots push the final sum through
    (x + (target - x)), which cancels the input bitwise.
    """
    m = new_mlp(pool)
    eta = band_half_width(cfg)
    gain = 0.5 / eta
    rows = row_cols or {}
    for colname in cols:
        row = rows.get(colname, "B_global")
        t1 = m.slot([(colname, 1.0), (row, -(0.5 - eta))])
        t2 = m.slot([(colname, 1.0), (row, -(0.5 + eta))])
        d = m.slot([(t1, 1.0), (t2, -1.0)], stage=2)
        fp = m.slot([(colname, 1.0)])
        fm = m.slot([(colname, -1.0)])
        m.out(colname, [(d, gain), (fp, -1.0), (fm, 1.0)])
    return m.build(name, [], step, touched=list(cols))


def build_round_pair(cfg: SimConfig, pool: ScratchPool, name: str,
                     base: str) -> list[TransformerLayer]:
    """Snap a pair column back onto the position table (two layers).

    First a deliberately softened pointer head marks the row the drifted
    pointer is nearest to; thresholds at 1/4 and 3/4 turn the mark into an
    exact one-hot column. Then a head keyed on that one-hot re-reads the
    row's true encoding (the score gap is at least 1/2, so even softmax
    deposits it exactly). A pointer parked at the null position marks no
    row; the re-read then falls back to row 0, whose extra bias wire
    rebuilds the exact (0, 1) null encoding. Node rows always re-read row
    0 and the bias spur they pick up is wiped in the same layer.
    """
    pool.reset()
    m = Mlp(pool)
    sink = pool.take()
    onehot = pool.take()
    mark = pointer_head(base, [("B_global", sink, 2.0)], annealed=True)
    s1 = m.slot([(sink, 1.0), ("B_local", -0.25), ("B_global", -2.0 * cfg.omega)])
    s2 = m.slot([(sink, 1.0), ("B_local", -0.75), ("B_global", -2.0 * cfg.omega)])
    d = m.slot([(s1, 1.0), (s2, -1.0)], stage=2)
    m.out(onehot, [(d, 2.0)])
    dirt = m.slot([(sink, 1.0)])
    m.out(sink, [(dirt, -1.0)])
    first = m.build(name + "-mark", [mark], step=f"mark row nearest {base}",
                    touched=[onehot])

    m2 = new_mlp(pool)
    clear = self_head([(base + ".x", base + ".x", -1.0),
                       (base + ".y", base + ".y", -1.0)])
    reread = AttentionHead(
        KIND_IDENTITY,
        wq=[("B_global", 0, 1.0), ("B_local", 1, 1.0)],
        wk=[(onehot, 0, 1.0), ("B_global", 0, 0.5), ("B_global", 1, 1.0)],
        wv=[("P.x", base + ".x", 1.0), ("P.y", base + ".y", 1.0),
            ("B_global", base + ".y", 1.0)],
    )
    spent = m2.slot([(onehot, 1.0)])
    m2.out(onehot, [(spent, -1.0)])
    wipe_nodes(m2, cfg, base + ".y")
    second = m2.build(name + "-snap", [clear, reread],
                      step=f"{base} <- exact encoding of marked row",
                      touched=[base + ".x", base + ".y"])
    return [first, second]


def build_term_latch(cfg: SimConfig, pool: ScratchPool, name: str,
                     term: str = "term", latch: str = "S_term") -> TransformerLayer:
    """Write-prevention latch: the latch column rises with the termination
    flag and afterwards holds it up, so extra passes cannot lower it.
    Write gates elsewhere take the latch as an off-flag to freeze state."""
    m = new_mlp(pool)
    a = m.slot([(term, 1.0), (latch, -1.0)])
    la = m.slot([(latch, 1.0)])
    tm = m.slot([(term, 1.0)])
    b = m.slot([(la, 1.0), (a, 1.0), (tm, -1.0)], stage=2)
    m.out(latch, [(a, 1.0)])
    m.out(term, [(b, 1.0)])
    return m.build(name, [], step=f"{latch} latches {term} high", touched=[latch, term])


def build_term_suppress(cfg: SimConfig, pool: ScratchPool, name: str,
                        term_min: str = "term_min",
                        latch: str = "S_term") -> TransformerLayer:
    """Write-prevention arm: once the latch is up, force the per-pass
    completion flag low before any act layer reads it, so overtime passes
    scan but never commit."""
    m = new_mlp(pool)
    p = m.slot([(term_min, 1.0), (latch, 1.0), ("B_global", -1.0)])
    m.out(term_min, [(p, -1.0)])
    return m.build(name, [], step=f"{latch} high forces {term_min} low",
                   touched=[term_min])
