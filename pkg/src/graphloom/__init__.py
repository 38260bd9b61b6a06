"""Compiled graph algorithms for a looped transformer.

Programs (Dijkstra, BFS, DFS, SCC, a three-task model, and Graph-SUBLEQ)
are closed-form weight constructions, not trained models; under hard
attention they reproduce the classical algorithms exactly, and the suite
harness checks them graph by graph against ordinary implementations.
"""

from .errors import (AddressError, BoundsError, ConfigError, GraphloomError,
                     IterationLimitExceeded, NotTerminatedError, ShapeError,
                     SizeError, StepLimitExceeded, WriteToReadOnlyError)
from .harness import (SuiteReport, generate_graphs, read_trace, replay_trace,
                      run_one, run_suite, suite, write_trace)
from .layout import (Graph, InputMatrix, decode, encode, encode_subleq,
                     format_graph, load_graph, normalize_weights,
                     pad_adjacency, parse_graph)
from .oracles import (SubleqState, bfs_ref, dfs_ref, dijkstra_ref,
                      graph_subleq_run, graph_subleq_step, scc_ref,
                      subleq_minus_run, translate_program)
from .programs import ALGORITHMS, build, instrument
from .transformer import (LoopedProgram, ProgramMetadata, RunResult,
                          SimConfig, active_backend, default_max_iterations,
                          run_loop, run_steps)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "AddressError", "BoundsError", "ConfigError", "Graph",
    "GraphloomError", "InputMatrix", "IterationLimitExceeded",
    "LoopedProgram", "NotTerminatedError", "ProgramMetadata", "RunResult",
    "ShapeError", "SimConfig", "SizeError", "StepLimitExceeded",
    "SubleqState", "SuiteReport", "WriteToReadOnlyError", "active_backend",
    "bfs_ref", "build", "decode", "default_max_iterations", "dfs_ref",
    "dijkstra_ref", "encode", "encode_subleq", "format_graph",
    "generate_graphs", "graph_subleq_run", "graph_subleq_step", "instrument",
    "load_graph", "normalize_weights", "pad_adjacency", "parse_graph",
    "read_trace", "replay_trace", "run_loop", "run_one", "run_steps",
    "run_suite", "scc_ref", "subleq_minus_run", "suite", "translate_program",
    "write_trace",
]
