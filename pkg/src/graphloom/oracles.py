"""Classical reference implementations the network is checked against.

Everything here is straight Python over adjacency lists: no schemas, no
weight matrices, no imports from the runtime. Tie-breaking follows the same
conventions the weight constructions realise (lowest node index wins equal
priorities, parents update only on strict improvement), so outputs can be
compared exactly, not just up to isomorphism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import AddressError, StepLimitExceeded, WriteToReadOnlyError
from .layout import Graph


def _out_adjacency(g: Graph) -> list[list[tuple[int, float]]]:
    adj: list[list[tuple[int, float]]] = [[] for _ in range(g.n + 1)]
    for u, v, w in g.edges:
        adj[u].append((v, w))
    for lst in adj:
        lst.sort()
    return adj


def _in_adjacency(g: Graph) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(g.n + 1)]
    for u, v, _ in g.edges:
        adj[v].append(u)
    for lst in adj:
        lst.sort()
    return adj


def dijkstra_ref(g: Graph, start: int, unreachable: float = math.inf
                 ) -> tuple[list[int], list[float]]:
    """Lowest-index-tie Dijkstra; returns (prev, dists) over nodes 1..n.

    prev[i] stays i for the start node and unreachable nodes; unreachable
    distances are reported as ``unreachable``.
    """
    n = g.n
    adj = _out_adjacency(g)
    dist = [math.inf] * (n + 1)
    dist[start] = 0.0
    prev = list(range(n + 1))
    done = [False] * (n + 1)
    for _ in range(n):
        u = min((i for i in range(1, n + 1) if not done[i]), key=lambda i: (dist[i], i))
        done[u] = True
        for v, w in adj[u]:
            if not done[v] and dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                prev[v] = u
    dists = [unreachable if math.isinf(dist[i]) else dist[i] for i in range(1, n + 1)]
    return prev[1:], dists


def bfs_ref(g: Graph, start: int, index_order: bool = False) -> list[int]:
    """BFS parents over nodes 1..n.

    index_order=False replays FIFO discovery with ascending adjacency (the
    discovery-counter machine). index_order=True replays (distance, index)
    selection, i.e. unit-weight Dijkstra with strict-improvement parents
    (the order-latching machine variant). The two can disagree on parents
    when a node has several same-level neighbours.
    """
    n = g.n
    adj = _out_adjacency(g)
    prev = list(range(n + 1))
    if not index_order:
        from collections import deque

        disc = [False] * (n + 1)
        disc[start] = True
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v, _ in adj[u]:
                if not disc[v]:
                    disc[v] = True
                    prev[v] = u
                    queue.append(v)
        return prev[1:]
    dist = [math.inf] * (n + 1)
    dist[start] = 0.0
    done = [False] * (n + 1)
    for _ in range(n):
        u = min((i for i in range(1, n + 1) if not done[i]), key=lambda i: (dist[i], i))
        done[u] = True
        if math.isinf(dist[u]):
            continue
        for v, _ in adj[u]:
            if not done[v] and dist[u] + 1.0 < dist[v]:
                dist[v] = dist[u] + 1.0
                prev[v] = u
    return prev[1:]


def dfs_ref(g: Graph, start: int) -> list[int]:
    """DFS parents under stack-priority selection with re-parenting.

    Each selection takes the unvisited node with the most recently assigned
    priority (lowest index on ties) and stamps all its unvisited neighbours
    with a fresh deeper priority and itself as parent; the last stamper
    before a node's own selection is the parent that sticks. This is
    iterative DFS with lazy deletion. Remaining components are entered at
    their lowest-index node.
    """
    n = g.n
    adj = _out_adjacency(g)
    big = math.inf
    orders = [big] * (n + 1)
    orders[start] = 0.0
    prev = list(range(n + 1))
    visited = [False] * (n + 1)
    counter = 0
    for _ in range(n):
        u = min((i for i in range(1, n + 1) if not visited[i]), key=lambda i: (orders[i], i))
        visited[u] = True
        counter -= 1
        for v, _ in adj[u]:
            if not visited[v]:
                orders[v] = counter
                prev[v] = u
    return prev[1:]


def _finish_order(adj: list[list[int]], n: int, start: int) -> list[int]:
    """DFS finish order, ascending-index children, roots: start then lowest."""
    visited = [False] * (n + 1)
    finish: list[int] = []
    roots = [start] + [i for i in range(1, n + 1) if i != start]
    for r in roots:
        if visited[r]:
            continue
        visited[r] = True
        stack: list[tuple[int, int]] = [(r, 0)]
        while stack:
            u, i = stack.pop()
            while i < len(adj[u]) and visited[adj[u][i]]:
                i += 1
            if i < len(adj[u]):
                v = adj[u][i]
                visited[v] = True
                stack.append((u, i + 1))
                stack.append((v, 0))
            else:
                finish.append(u)
    return finish


def scc_ref(g: Graph, start: int = 1) -> list[int]:
    """Kosaraju components; sccs[i] is the representative of node i+1.

    The representative of a component is its phase-2 root: the member with
    the latest phase-1 finish time, where phase 1 runs from ``start`` with
    ascending-index children and enters leftover roots at their lowest
    index. This matches the machine's selection rule exactly, so the output
    is comparable element-wise.
    """
    n = g.n
    out_adj = [[v for v, _ in lst] for lst in _out_adjacency(g)]
    in_adj = _in_adjacency(g)
    finish = _finish_order(out_adj, n, start)
    sccs = [0] * (n + 1)
    for r in reversed(finish):
        if sccs[r]:
            continue
        sccs[r] = r
        stack = [r]
        while stack:
            u = stack.pop()
            for v in in_adj[u]:
                if not sccs[v]:
                    sccs[v] = r
                    stack.append(v)
    return sccs[1:]


# ---------------------------------------------------------------------------
# SUBLEQ


def subleq_minus_run(memory: list[float], program: list[tuple[int, int, int]],
                     max_steps: int = 10000, protected: int = 0) -> list[float]:
    """Run a SUBLEQ(-) program: M[b] -= M[a]; branch to c if the result <= 0.

    Branching outside the instruction list halts. Writes into the first
    ``protected`` cells raise; running max_steps without halting raises.
    Returns the final memory.
    """
    mem = [float(v) for v in memory]
    k = 0
    for _ in range(max_steps):
        if k < 0 or k >= len(program):
            return mem
        a, b, c = program[k]
        if not (0 <= a < len(mem)):
            raise AddressError(f"read address {a} outside memory of {len(mem)}")
        if not (0 <= b < len(mem)):
            raise AddressError(f"write address {b} outside memory of {len(mem)}")
        if b < protected:
            raise WriteToReadOnlyError(f"write into protected cell {b}")
        r = mem[b] - mem[a]
        mem[b] = r
        k = c if r <= 0 else k + 1
    raise StepLimitExceeded(f"no halt within {max_steps} steps")


def translate_instruction(a: int, b: int, c: int, n: int
                          ) -> tuple[int, int, int, int, int]:
    """Map a SUBLEQ(-) instruction over [graph | memory] address space to a
    Graph-SUBLEQ instruction (a1, a2, b, c, gamma).

    Reads below n*n decompose into a graph cell (row-major); other addresses
    shift down by n*n into plain memory. Writes must land in plain memory.
    With n = 0 the translation is the identity with gamma = 0.
    """
    if a < 0 or b < 0:
        raise AddressError("negative address")
    nn = n * n
    if n > 0 and a < nn:
        gamma = 1
        a1, a2 = divmod(a, n)
    else:
        gamma = 0
        a1, a2 = a - nn, 0
    b2 = b - nn
    if b2 < 0:
        raise AddressError(f"write address {b} falls in the read-only graph window")
    return a1, a2, b2, c, gamma


def translate_program(program: list[tuple[int, int, int]], n: int
                      ) -> list[tuple[int, int, int, int, int]]:
    return [translate_instruction(a, b, c, n) for a, b, c in program]


@dataclass
class SubleqState:
    """Interpreter state for Graph-SUBLEQ: plain memory, a read-only n x n
    graph window, the translated program, and the instruction pointer."""

    memory: list[float]
    graph: list[list[float]]
    program: list[tuple[int, int, int, int, int]]
    pointer: int = 0
    halted: bool = False
    steps: int = field(default=0, repr=False)


def graph_subleq_step(state: SubleqState) -> None:
    if state.halted:
        return
    k = state.pointer
    if k < 0 or k >= len(state.program):
        state.halted = True
        return
    a1, a2, b, c, gamma = state.program[k]
    if gamma:
        nrows = len(state.graph)
        if not (0 <= a1 < nrows and 0 <= a2 < nrows):
            raise AddressError(f"graph read ({a1},{a2}) outside {nrows}x{nrows}")
        ma = float(state.graph[a1][a2])
    else:
        if not (0 <= a1 < len(state.memory)):
            raise AddressError(f"memory read {a1} outside {len(state.memory)}")
        ma = state.memory[a1]
    if not (0 <= b < len(state.memory)):
        raise AddressError(f"memory write {b} outside {len(state.memory)}")
    diff = state.memory[b] - ma
    state.memory[b] = diff
    if diff <= 0:
        # the machine parks out-of-range jump targets at -1; the next
        # fetch then reads validity 0 and latches the halt flag
        state.pointer = c if 0 <= c < len(state.program) else -1
    else:
        state.pointer = k + 1
    state.steps += 1


def graph_subleq_run(state: SubleqState, max_steps: int = 10000) -> SubleqState:
    for _ in range(max_steps):
        if state.halted:
            return state
        graph_subleq_step(state)
    if state.halted or not (0 <= state.pointer < len(state.program)):
        state.halted = True
        return state
    raise StepLimitExceeded(f"no halt within {max_steps} steps")


# ---------------------------------------------------------------------------
# program text formats


def parse_subleq_program(text: str) -> list[tuple[int, int, int]]:
    """One instruction per line: 'a b c'. '#' starts a comment."""
    out = []
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        parts = ln.split()
        if len(parts) != 3:
            raise AddressError(f"expected 'a b c', got {ln!r}")
        out.append((int(parts[0]), int(parts[1]), int(parts[2])))
    return out


def format_subleq_program(program: list[tuple[int, int, int]]) -> str:
    return "\n".join(f"{a} {b} {c}" for a, b, c in program) + "\n"


def parse_graph_subleq_program(text: str) -> list[tuple[int, int, int, int, int]]:
    """One instruction per line: 'a1 a2 b c g'. '#' starts a comment."""
    out = []
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        parts = ln.split()
        if len(parts) != 5:
            raise AddressError(f"expected 'a1 a2 b c g', got {ln!r}")
        a1, a2, b, c, gmm = (int(p) for p in parts)
        if gmm not in (0, 1):
            raise AddressError(f"gamma must be 0 or 1, got {gmm}")
        out.append((a1, a2, b, c, gmm))
    return out


def format_graph_subleq_program(program: list[tuple[int, int, int, int, int]]) -> str:
    return "\n".join(" ".join(str(x) for x in ins) for ins in program) + "\n"
