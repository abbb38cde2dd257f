"""Shared fixtures and independent helpers for the test suite."""

from __future__ import annotations

import random

import pytest

from byzmatch.protocol import NodeState
from byzmatch.topology import Topology, build_topology, named_graph


@pytest.fixture
def edge():
    return named_graph("edge")


@pytest.fixture
def p5():
    return named_graph("p5")


@pytest.fixture
def triangle():
    return named_graph("triangle")


@pytest.fixture
def c4():
    return named_graph("c4")


@pytest.fixture
def c5():
    return named_graph("c5")


@pytest.fixture
def star5():
    return named_graph("star5")


def random_connected_topology(rng: random.Random, max_n: int = 8) -> Topology:
    """Random tree plus a few extra edges: always connected and simple."""
    n = rng.randint(2, max_n)
    edges = {(rng.randrange(i), i) for i in range(1, n)}
    extras = rng.randint(0, n)
    for _ in range(extras):
        u, v = rng.randrange(n), rng.randrange(n)
        if u != v:
            edges.add((min(u, v), max(u, v)))
    return build_topology(n, sorted(edges))


def random_configuration(rng: random.Random, t: Topology):
    states = []
    for v in range(t.node_count):
        deg = t.degree(v)
        pref = rng.randrange(-1, deg)
        states.append(NodeState(None if pref < 0 else pref, rng.randrange(deg)))
    return tuple(states)


def relabel(t: Topology, perm: list[int]):
    """Relabeled copy of t plus a configuration mapper.

    ``perm[v]`` is v's new index.  Port labels are derived from ascending
    neighbor order, so they change with the relabeling; the mapper rewrites
    each state's ports accordingly.
    """
    edges = [(perm[u], perm[v]) for u, v in t.edges()]
    t2 = build_topology(t.node_count, edges)

    def map_port(v: int, port: int) -> int:
        return t2.port_to(perm[v], perm[t.adjacency[v][port]])

    def map_config(cfg):
        states = [None] * t.node_count
        for v, st in enumerate(cfg):
            states[perm[v]] = NodeState(
                None if st.pref is None else map_port(v, st.pref),
                map_port(v, st.old_pref),
            )
        return tuple(states)

    return t2, map_config
