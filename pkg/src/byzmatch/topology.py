"""Network topology for the matching simulator.

Nodes are anonymous processes that can only tell their neighbors apart by
local port numbers.  Global node indices exist purely as bookkeeping for
traces and reports; protocol code never branches on them beyond the
deterministic port labeling fixed here (ports are assigned by ascending
neighbor index so that runs are reproducible).
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field

NodeSet = frozenset  # node index sets; all members must be < node_count


class GraphError(ValueError):
    """Raised for graphs that violate the model: disconnected, self-loops,
    duplicate or out-of-range edges."""


class GraphFormatError(GraphError):
    """Raised by the text parser, carries a 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Topology:
    """Immutable undirected connected graph with per-node port labels.

    ``adjacency[v]`` lists v's neighbors in ascending index order; the
    position of a neighbor in that list is its port number at v.  All-pairs
    shortest-path distances are precomputed (these graphs are desk-scale and
    distance queries are hot in containment checks).
    """

    node_count: int
    adjacency: tuple[tuple[int, ...], ...]
    edge_count: int
    distances: tuple[tuple[int, ...], ...] = field(repr=False)
    # back_ports[v][p] is the port at neighbor adjacency[v][p] that points
    # back to v; guard evaluation uses it to avoid repeated index lookups.
    back_ports: tuple[tuple[int, ...], ...] = field(repr=False)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def port_to(self, v: int, u: int) -> int:
        """Port number of neighbor u at node v."""
        try:
            return self.adjacency[v].index(u)
        except ValueError:
            raise GraphError(f"{u} is not a neighbor of {v}") from None

    def distance(self, u: int, v: int) -> int:
        self._check_node(u)
        self._check_node(v)
        return self.distances[u][v]

    def c_honest_set(self, byz: frozenset[int], c: int) -> frozenset[int]:
        """Honest nodes at distance more than c from every faulty node."""
        for b in byz:
            self._check_node(b)
        if not byz:
            return frozenset(range(self.node_count))
        dist = self.distances
        return frozenset(
            v
            for v in range(self.node_count)
            if v not in byz and all(dist[v][b] > c for b in byz)
        )

    def edges(self) -> frozenset[tuple[int, int]]:
        return frozenset(
            (v, u) for v in range(self.node_count) for u in self.adjacency[v] if v < u
        )

    def _check_node(self, v: int) -> None:
        if not 0 <= v < self.node_count:
            raise GraphError(f"node index {v} out of range (n={self.node_count})")


def build_topology(n: int, edges: list[tuple[int, int]] | set[tuple[int, int]]) -> Topology:
    """Build a topology from an edge list, validating the model invariants.

    Rejects self-loops, duplicate edges, out-of-range endpoints, and
    disconnected graphs.
    """
    if n < 2:
        raise GraphError(f"need at least 2 nodes, got {n}")
    seen: set[tuple[int, int]] = set()
    neigh: list[set[int]] = [set() for _ in range(n)]
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u},{v}) out of range (n={n})")
        if u == v:
            raise GraphError(f"self-loop at node {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphError(f"duplicate edge ({u},{v})")
        seen.add(key)
        neigh[u].add(v)
        neigh[v].add(u)

    adjacency = tuple(tuple(sorted(s)) for s in neigh)
    distances = _all_pairs_bfs(n, adjacency)
    if any(d < 0 for row in distances for d in row):
        raise GraphError("graph is not connected")
    back_ports = tuple(
        tuple(adjacency[u].index(v) for u in adjacency[v]) for v in range(n)
    )
    return Topology(
        node_count=n,
        adjacency=adjacency,
        edge_count=len(seen),
        distances=distances,
        back_ports=back_ports,
    )


def _all_pairs_bfs(n: int, adjacency: tuple[tuple[int, ...], ...]) -> tuple[tuple[int, ...], ...]:
    rows = []
    for s in range(n):
        dist = [-1] * n
        dist[s] = 0
        q = deque([s])
        while q:
            x = q.popleft()
            for y in adjacency[x]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    q.append(y)
        rows.append(tuple(dist))
    return tuple(rows)


def parse_graph_file(text: str) -> Topology:
    """Parse the text graph format: first line ``n m``, then m lines ``u v``.

    Raises GraphFormatError with the offending 1-based line number.
    """
    lines = text.splitlines()
    meaningful = [(i + 1, ln.strip()) for i, ln in enumerate(lines)]
    meaningful = [(no, ln) for no, ln in meaningful if ln and not ln.startswith("#")]
    if not meaningful:
        raise GraphFormatError(1, "empty graph file")
    head_no, head = meaningful[0]
    parts = head.split()
    if len(parts) != 2:
        raise GraphFormatError(head_no, f"expected 'n m', got {head!r}")
    try:
        n, m = int(parts[0]), int(parts[1])
    except ValueError:
        raise GraphFormatError(head_no, f"expected integers 'n m', got {head!r}") from None
    body = meaningful[1:]
    if len(body) != m:
        raise GraphFormatError(
            head_no, f"header declares {m} edges but file has {len(body)}"
        )
    edges = []
    for no, ln in body:
        ep = ln.split()
        if len(ep) != 2:
            raise GraphFormatError(no, f"expected 'u v', got {ln!r}")
        try:
            u, v = int(ep[0]), int(ep[1])
        except ValueError:
            raise GraphFormatError(no, f"expected integer endpoints, got {ln!r}") from None
        edges.append((u, v))
    try:
        return build_topology(n, edges)
    except GraphFormatError:
        raise
    except GraphError as e:
        raise GraphFormatError(head_no, str(e)) from e


def format_graph_file(t: Topology) -> str:
    lines = [f"{t.node_count} {t.edge_count}"]
    lines += [f"{u} {v}" for u, v in sorted(t.edges())]
    return "\n".join(lines) + "\n"


# Named constructors for the graphs used throughout the test scenarios.

def path_graph(n: int) -> Topology:
    return build_topology(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Topology:
    if n < 3:
        raise GraphError("cycles need at least 3 nodes")
    return build_topology(n, [(i, (i + 1) % n) for i in range(n)])


def star_graph(n: int) -> Topology:
    """Star with node 0 at the center and n-1 leaves."""
    return build_topology(n, [(0, i) for i in range(1, n)])


def complete_graph(n: int) -> Topology:
    return build_topology(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


_NAMED_PATTERNS = (
    (re.compile(r"^(?:path|p)(\d+)$"), path_graph),
    (re.compile(r"^(?:cycle|ring|c)(\d+)$"), cycle_graph),
    (re.compile(r"^(?:star|s)(\d+)$"), star_graph),
    (re.compile(r"^(?:complete|k)(\d+)$"), complete_graph),
)


def named_graph(name: str) -> Topology:
    """Resolve graph names like ``p5``, ``ring6``, ``star5``, ``k4``,
    plus the aliases ``edge`` and ``triangle``."""
    key = name.strip().lower()
    if key == "edge":
        return path_graph(2)
    if key == "triangle":
        return cycle_graph(3)
    for pat, ctor in _NAMED_PATTERNS:
        m = pat.match(key)
        if m:
            return ctor(int(m.group(1)))
    raise GraphError(f"unknown graph name {name!r}")
