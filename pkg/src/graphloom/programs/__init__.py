"""Compiled-program registry.

One builder per algorithm. Every builder takes a :class:`SimConfig` and
returns a :class:`LoopedProgram` whose weights are constructed in closed
form; nothing here is trained. ``build`` dispatches by name and
``instrument`` rebuilds a program with the numeric-hygiene layers
(re-rounding, overtime write prevention) requested by the config.
"""

from __future__ import annotations

from ..transformer import LoopedProgram, SimConfig
from . import bfs, dfs, dijkstra, multitask, scc, subleq

_BUILDERS = {
    "dijkstra": dijkstra.build,
    "bfs": bfs.build,
    "dfs": dfs.build,
    "multitask": multitask.build,
    "scc": scc.build,
    "graph_subleq": subleq.build,
}

ALGORITHMS = tuple(_BUILDERS)


def build(algorithm: str, cfg: SimConfig | None = None, **options) -> LoopedProgram:
    """Construct the named program under ``cfg`` (default config if None).

    ``options`` are forwarded to the specific builder (for example
    ``level_index_order`` for bfs) and recorded on the returned program so
    the same variant can be rebuilt later.
    """
    if cfg is None:
        cfg = SimConfig()
    try:
        builder = _BUILDERS[algorithm]
    except KeyError:
        known = ", ".join(sorted(_BUILDERS))
        raise ValueError(f"unknown algorithm {algorithm!r} (known: {known})") from None
    return builder(cfg, **options)


def instrument(program: LoopedProgram, cfg: SimConfig) -> LoopedProgram:
    """Return ``program`` with the instrumentation layers ``cfg`` asks for.

    When neither ``rounding_enabled`` nor ``write_prevention_enabled`` is
    set this is the identity. Otherwise the builder is rerun under ``cfg``
    with the program's recorded options: scratch columns can only be
    allocated while the schema is still open, so the extra layers are woven
    in during construction rather than patched into the frozen program.
    """
    if not (cfg.rounding_enabled or cfg.write_prevention_enabled):
        return program
    return build(program.algorithm, cfg, **program.options)
