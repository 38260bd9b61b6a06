"""Command line front end.

Subcommands: ``build`` prints a program's layer listing, ``run`` executes
one program on one graph, ``suite`` runs an accuracy suite, ``subleq run``
executes a SUBLEQ program on the transformer, ``replay`` re-checks a trace
file. Data goes to stdout; timing and backend notes go to stderr.
"""

from __future__ import annotations

import sys

import click

from . import harness
from .errors import GraphloomError
from .layout import Graph, decode, encode_subleq, load_graph, pad_adjacency
from .oracles import (SubleqState, graph_subleq_step, parse_graph_subleq_program,
                      parse_subleq_program, translate_program)
from .programs import ALGORITHMS
from .programs import build as build_program
from .transformer import SimConfig, active_backend, run_loop, run_steps

_CONFIG_FLAGS = [
    ("--omega", float, "saturation constant for unreached distances"),
    ("--epsilon", float, "comparison threshold of the less-than primitive"),
    ("--delta", float, "positional-encoding angle step"),
    ("--temperature", float, "softmax temperature"),
    ("--eta", float, "rounding tolerance"),
    ("--max-iters", int, "hard cap on loop passes"),
]


def config_options(f):
    for flag, kind, text in reversed(_CONFIG_FLAGS):
        f = click.option(flag, type=kind, default=None, help=text)(f)
    return f


def make_config(omega, epsilon, delta, temperature, eta, max_iters,
                softmax=False) -> SimConfig:
    updates = {k: v for k, v in [
        ("omega", omega), ("epsilon", epsilon), ("delta", delta),
        ("temperature", temperature), ("eta", eta),
        ("max_iterations", max_iters),
    ] if v is not None}
    if softmax:
        updates.update(activation="softmax", rounding_enabled=True,
                       write_prevention_enabled=True)
    cfg = SimConfig()
    return cfg.replace(**updates) if updates else cfg


def fail(exc: Exception) -> None:
    raise click.ClickException(str(exc))


@click.group()
def main():
    """Compiled graph-algorithm programs for a looped transformer."""


@main.command("build")
@click.argument("algorithm", type=click.Choice(ALGORITHMS))
@click.option("--clrs-order", is_flag=True,
              help="bfs variant: expand neighbors in index order")
@config_options
def build_cmd(algorithm, clrs_order, **cfg_flags):
    """Print the layer listing of a compiled program."""
    cfg = make_config(**cfg_flags)
    options = {"level_index_order": True} if clrs_order and algorithm == "bfs" else {}
    try:
        program = build_program(algorithm, cfg, **options)
    except GraphloomError as exc:
        fail(exc)
    meta = program.metadata
    click.echo(f"{meta.algorithm}: {meta.layer_count} layers, "
               f"attention width {meta.head_count}, {program.schema.width} columns")
    for i, layer in enumerate(program.layers):
        click.echo(f"{i + 1:3d} {layer.name:<16} heads={len(layer.heads)}  {layer.step}")


def _print_output(out: dict) -> None:
    for key in ("prev", "dists", "sccs", "memory", "pointer"):
        if key not in out:
            continue
        value = out[key]
        if isinstance(value, list):
            click.echo(key + " " + " ".join(f"{v:g}" for v in value))
        else:
            click.echo(f"{key} {value:g}")


@main.command("run")
@click.argument("algorithm", type=click.Choice(harness.SUITE_ALGORITHMS))
@click.argument("graphfile", type=click.Path(exists=True, dir_okay=False))
@click.option("--start", type=int, default=1, help="start node (1-based)")
@click.option("--mode", type=click.Choice(["bfs", "dfs", "dijkstra"]),
              default=None, help="multitask task selector")
@click.option("--softmax", is_flag=True,
              help="soft attention with rounding and write prevention")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False),
              default=None, help="write a full per-iteration trace here")
@click.option("--clrs-order", is_flag=True,
              help="bfs variant: expand neighbors in index order")
@config_options
def run_cmd(algorithm, graphfile, start, mode, softmax, trace_path,
            clrs_order, **cfg_flags):
    """Run one program on one graph and print the decoded output."""
    cfg = make_config(**cfg_flags, softmax=softmax)
    if algorithm == "multitask" and mode is None:
        raise click.UsageError("multitask needs --mode")
    try:
        g = load_graph(graphfile)
        program, X, A, run_cfg, scale = harness.prepare_run(
            algorithm, g, start, cfg, mode=mode, level_index_order=clrs_order)
        result = run_loop(program, X, A, run_cfg,
                          trace_columns="all" if trace_path else None)
        out = harness.rescale_dists(decode(result.X, algorithm), scale)
    except GraphloomError as exc:
        fail(exc)
    if trace_path:
        harness.write_trace(trace_path, program, result, A, run_cfg,
                            meta={"start": start, "mode": mode, "scale": scale})
    _print_output(out)
    click.echo(f"iterations {result.iterations} backend {active_backend()}",
               err=True)


@main.command("suite")
@click.argument("algorithm", type=click.Choice(harness.SUITE_ALGORITHMS))
@click.option("--n", type=int, default=16, help="nodes per graph")
@click.option("--count", type=int, default=100, help="number of graphs")
@click.option("--seed", type=int, default=None,
              help="generator seed (default: LOOM_SEED env, else 7)")
@click.option("--mode", type=click.Choice(["bfs", "dfs", "dijkstra"]),
              default=None, help="multitask task selector")
@click.option("--softmax", is_flag=True,
              help="soft attention with rounding and write prevention")
@click.option("--clrs-order/--frontier-order", default=True,
              help="bfs predecessor convention (default index order)")
@click.option("--report", "report_path", type=click.Path(dir_okay=False),
              default=None, help="append the deterministic TSV line here")
@click.option("--allow-fail", is_flag=True,
              help="exit 0 even when accuracy is below 100%")
@config_options
def suite_cmd(algorithm, n, count, seed, mode, softmax, clrs_order,
              report_path, allow_fail, **cfg_flags):
    """Run an accuracy suite against the classical oracle."""
    cfg = make_config(**cfg_flags, softmax=softmax)
    if algorithm == "multitask" and mode is None:
        raise click.UsageError("multitask needs --mode")
    try:
        rep = harness.suite(algorithm, n, count, seed, cfg, mode=mode,
                            level_index_order=clrs_order)
    except GraphloomError as exc:
        fail(exc)
    click.echo(rep.line())
    click.echo(f"wall {rep.wall_time:.2f}s backend {active_backend()}", err=True)
    if report_path:
        with open(report_path, "a") as fh:
            fh.write(rep.tsv_line() + "\n")
    if rep.matched < rep.count and not allow_fail:
        sys.exit(1)


@main.command("replay")
@click.argument("tracefile", type=click.Path(exists=True, dir_okay=False))
def replay_cmd(tracefile):
    """Re-run a trace from its initial state and verify every record."""
    try:
        ok = harness.replay_trace(tracefile)
    except GraphloomError as exc:
        fail(exc)
    click.echo("replay ok" if ok else "replay mismatch")
    if not ok:
        sys.exit(1)


@main.group()
def subleq():
    """SUBLEQ programs on the transformer."""


def _load_subleq(path: str, n: int):
    """Accept either 'a b c' SUBLEQ(-) lines (translated against the graph
    window) or already-translated 'a1 a2 b c g' lines."""
    with open(path) as fh:
        text = fh.read()
    width = 0
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if ln:
            width = len(ln.split())
            break
    if width == 5:
        return parse_graph_subleq_program(text)
    return translate_program(parse_subleq_program(text), n)


def _memory_need(program) -> int:
    need = 1
    for a1, a2, b, c, gamma in program:
        need = max(need, b + 1, 1 if gamma else a1 + 1)
    return need


@subleq.command("run")
@click.argument("programfile", type=click.Path(exists=True, dir_okay=False))
@click.option("--graph", "graphfile", type=click.Path(exists=True, dir_okay=False),
              default=None, help="graph backing the read-only window")
@click.option("--memory", "memory_text", default=None,
              help="comma-separated initial memory (default zeros)")
@click.option("--steps", type=int, default=256, help="transformer passes to run")
@click.option("--oracle", is_flag=True,
              help="run the reference interpreter instead of the transformer")
@config_options
def subleq_run_cmd(programfile, graphfile, memory_text, steps, oracle,
                   **cfg_flags):
    """Execute a SUBLEQ program; prints final memory, pointer, halted."""
    cfg = make_config(**cfg_flags)
    try:
        g = load_graph(graphfile) if graphfile else Graph(0)
        program = _load_subleq(programfile, g.n)
        if memory_text:
            memory = [float(v) for v in memory_text.split(",")]
        else:
            memory = [0.0] * _memory_need(program)
        if oracle:
            state = SubleqState(list(memory), g.adjacency(), program)
            for _ in range(steps):
                graph_subleq_step(state)
            out = {"memory": state.memory, "pointer": state.pointer}
            halted = state.halted
        else:
            compiled = build_program("graph_subleq", cfg)
            X = encode_subleq(g, memory, program, cfg, compiled.schema)
            A = pad_adjacency(g, X.K)
            result = run_steps(compiled, X, A, cfg, steps=steps)
            out = decode(result.X, "graph_subleq", require_terminated=False,
                         memory_len=len(memory), delta=cfg.delta)
            halted = result.X.value(0, "halted") >= 0.5
    except GraphloomError as exc:
        fail(exc)
    _print_output(out)
    click.echo(f"halted {'yes' if halted else 'no'}")


if __name__ == "__main__":
    main()
