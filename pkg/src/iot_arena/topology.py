"""Single-hop and multi-hop tree topologies, route installation, topology beacons.

Trees are generated by random geometric placement in a unit square with the
sink at a corner and BFS parent selection, re-drawn until the requested depth
range is met.  This reproduces the rank structure that drives the multi-hop
effects without assuming any particular building layout.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from . import trace as tr
from .kernel import RunSeed, SEC
from .phymac import BROADCAST, Frame, Radio

DEFAULT_PREFIX = -1  # FIB key for the upward default route
BEACON_BYTES = 12
BEACON_INTERVAL_US = 10 * SEC
BEACON_JITTER = 0.10
MAX_TREE_REDRAWS = 200


class TopologyError(ValueError):
    pass


class RouteError(ValueError):
    pass


@dataclass
class Topology:
    """Node set with one designated sink and directed links with delivery probabilities."""

    nodes: list[int]
    sink: int
    link_p: dict[tuple[int, int], float]
    positions: dict[int, tuple[float, float]] = field(default_factory=dict)
    producer_nodes: Optional[list[int]] = None  # default: every non-sink node

    def neighbors(self, node: int) -> list[int]:
        return sorted(v for (u, v) in self.link_p if u == node)

    def producers(self) -> list[int]:
        if self.producer_nodes is not None:
            return list(self.producer_nodes)
        return [n for n in self.nodes if n != self.sink]


@dataclass
class TreeState:
    """Parent/rank structure rooted at the sink plus ordered parent candidates."""

    parent: dict[int, Optional[int]]
    rank: dict[int, int]
    candidate_parents: dict[int, list[int]]

    def children(self, node: int) -> list[int]:
        return sorted(c for c, p in self.parent.items() if p == node)

    def subtree(self, node: int) -> list[int]:
        out, queue = [], deque([node])
        while queue:
            cur = queue.popleft()
            out.append(cur)
            queue.extend(self.children(cur))
        return out

    def assert_tree(self, sink: int) -> None:
        """Acyclicity and rank consistency; raises on violation."""
        for node, par in self.parent.items():
            if par is None:
                if node != sink:
                    raise TopologyError(f"node {node} has no parent")
                continue
            seen = {node}
            cur = par
            while cur is not None:
                if cur in seen:
                    raise TopologyError(f"parent cycle through {node}")
                seen.add(cur)
                cur = self.parent[cur]
            if self.rank[node] != self.rank[par] + 1:
                raise TopologyError(f"rank inconsistency at {node}")


@dataclass
class RouteTables:
    """Per-node forwarding state for the IP and NDN planes."""

    ip_fib: dict[int, dict[int, int]] = field(default_factory=dict)
    ndn_fib: dict[int, dict[int, int]] = field(default_factory=dict)


def build_single_hop(p: float) -> tuple[Topology, TreeState]:
    """Two nodes: consumer/sink 0 and producer 1 with a bidirectional link."""
    if not 0.0 <= p <= 1.0:
        raise TopologyError(f"delivery probability {p} outside [0, 1]")
    topo = Topology(nodes=[0, 1], sink=0,
                    link_p={(0, 1): p, (1, 0): p},
                    positions={0: (0.0, 0.0), 1: (1.0, 0.0)})
    tree = TreeState(parent={0: None, 1: 0}, rank={0: 0, 1: 1},
                     candidate_parents={0: [], 1: [0]})
    return topo, tree


def build_chain(hops: int, p_up: float, p_down: float) -> tuple[Topology, TreeState]:
    """Linear chain of ``hops`` links: sink 0 -- 1 -- ... -- hops.

    The far end is the only producer; per-direction delivery probabilities
    are set independently (``p_up`` toward the sink), which makes the chain
    the reference fixture for retransmission-efficiency oracles.
    """
    if hops < 1:
        raise TopologyError("chain needs at least one hop")
    nodes = list(range(hops + 1))
    link_p = {}
    for i in range(hops):
        link_p[(i + 1, i)] = p_up
        link_p[(i, i + 1)] = p_down
    topo = Topology(nodes=nodes, sink=0, link_p=link_p,
                    positions={i: (float(i), 0.0) for i in nodes},
                    producer_nodes=[hops])
    tree = TreeState(parent={i: (i - 1 if i else None) for i in nodes},
                     rank={i: i for i in nodes},
                     candidate_parents={i: ([i - 1] if i else []) for i in nodes})
    return topo, tree


def build_tree(n: int, seed: RunSeed, depth_range: tuple[int, int],
               p_range: tuple[float, float]) -> tuple[Topology, TreeState]:
    """Random geometric tree of ``n`` producers plus one sink (node 0).

    Redraws the geometry until the BFS depth lands inside ``depth_range``;
    fails after a bounded number of redraws.
    """
    lo, hi = depth_range
    if n < 1 or lo < 1 or lo > hi:
        raise TopologyError(f"unsatisfiable tree request n={n} depth={depth_range}")
    rng = seed.stream("topo")
    target = (lo + hi) / 2.0
    radius = min(1.5, math.sqrt(2.0) / (0.85 * target)) if n > 1 else 1.5
    for _ in range(MAX_TREE_REDRAWS):
        positions = {0: (0.0, 0.0)}
        for i in range(1, n + 1):
            positions[i] = (rng.random(), rng.random())
        adjacency = {i: [] for i in range(n + 1)}
        for i in range(n + 1):
            for j in range(i + 1, n + 1):
                dx = positions[i][0] - positions[j][0]
                dy = positions[i][1] - positions[j][1]
                if dx * dx + dy * dy <= radius * radius:
                    adjacency[i].append(j)
                    adjacency[j].append(i)
        parent, rank = _bfs_tree(adjacency)
        if parent is None:
            radius = min(1.5, radius * 1.1)
            continue
        depth = max(rank.values())
        if depth < lo:
            radius = max(0.05, radius * 0.93)
            continue
        if depth > hi:
            radius = min(1.5, radius * 1.07)
            continue
        link_p = {}
        for u in range(n + 1):
            for v in adjacency[u]:
                if u < v:
                    p = rng.uniform(p_range[0], p_range[1])
                    link_p[(u, v)] = p
                    link_p[(v, u)] = p
        candidates = {}
        for node in range(n + 1):
            cands = [v for v in adjacency[node] if rank[v] <= rank[node]]
            cands.sort(key=lambda v: (rank[v], -link_p[(node, v)], v))
            candidates[node] = cands
        topo = Topology(nodes=list(range(n + 1)), sink=0,
                        link_p=link_p, positions=positions)
        tree = TreeState(parent=parent, rank=rank, candidate_parents=candidates)
        tree.assert_tree(0)
        return topo, tree
    raise TopologyError(
        f"could not satisfy depth range {depth_range} for n={n} "
        f"after {MAX_TREE_REDRAWS} redraws")


def _bfs_tree(adjacency: dict[int, list[int]]):
    parent: dict[int, Optional[int]] = {0: None}
    rank = {0: 0}
    queue = deque([0])
    while queue:
        cur = queue.popleft()
        for nxt in sorted(adjacency[cur]):
            if nxt not in rank:
                rank[nxt] = rank[cur] + 1
                parent[nxt] = cur
                queue.append(nxt)
    if len(rank) != len(adjacency):
        return None, None
    return parent, rank


def shortest_hops(topo: Topology, src: int, dst: int) -> int:
    """BFS hop count over the connectivity graph."""
    if src == dst:
        return 0
    dist = {src: 0}
    queue = deque([src])
    while queue:
        cur = queue.popleft()
        for nxt in topo.neighbors(cur):
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                if nxt == dst:
                    return dist[nxt]
                queue.append(nxt)
    raise TopologyError(f"{dst} unreachable from {src}")


def install_routes(topo: Topology, tree: TreeState, family: str,
                   fib_capacity: int = 50) -> RouteTables:
    """Install per-family forwarding state along the tree.

    ip       -- upward default route plus downward host routes (sink reaches
                every producer).
    ndn-pull -- downward FIB entries for every producer prefix along its path.
    ndn-up   -- one upward default-prefix entry per node.
    """
    tables = RouteTables(ip_fib={n: {} for n in topo.nodes},
                         ndn_fib={n: {} for n in topo.nodes})
    if family == "ip":
        for node in topo.nodes:
            par = tree.parent[node]
            if par is not None:
                tables.ip_fib[node][DEFAULT_PREFIX] = par
        for producer in topo.producers():
            path = _path_to_sink(tree, producer)
            # walk sink-ward hops and point each at the next node toward producer
            for above, below in zip(path[1:], path[:-1]):
                tables.ip_fib[above][producer] = below
        for node, fib in tables.ip_fib.items():
            if len(fib) > fib_capacity:
                raise RouteError(f"ip FIB of node {node} needs {len(fib)} entries")
    elif family == "ndn-pull":
        for producer in topo.producers():
            path = _path_to_sink(tree, producer)
            for above, below in zip(path[1:], path[:-1]):
                tables.ndn_fib[above][producer] = below
        for node, fib in tables.ndn_fib.items():
            if len(fib) > fib_capacity:
                raise RouteError(f"ndn FIB of node {node} needs {len(fib)} entries")
    elif family == "ndn-up":
        for node in topo.nodes:
            par = tree.parent[node]
            if par is not None:
                tables.ndn_fib[node][DEFAULT_PREFIX] = par
    else:
        raise RouteError(f"unknown route family {family!r}")
    return tables


def _path_to_sink(tree: TreeState, node: int) -> list[int]:
    path = [node]
    while tree.parent[path[-1]] is not None:
        path.append(tree.parent[path[-1]])
    return path


class Beaconing:
    """Periodic topology-maintenance broadcasts carrying the sender's rank.

    Receivers refresh their candidate-parent ordering; beacons never reparent
    a node by themselves.
    """

    def __init__(self, kernel, radio: Radio, topo: Topology, tree: TreeState,
                 proto: str = "", interval_us: int = BEACON_INTERVAL_US):
        self.kernel = kernel
        self.radio = radio
        self.topo = topo
        self.tree = tree
        self.interval_us = interval_us
        self.running = False

    def start(self) -> None:
        self.running = True
        for node in self.topo.nodes:
            rng = self.kernel.rng.stream(f"beacon:{node}")
            first = int(rng.random() * self.interval_us)
            self.kernel.schedule(first, lambda n=node: self._tick(n))

    def stop(self) -> None:
        self.running = False

    def _tick(self, node: int) -> None:
        if not self.running:
            return
        self.beacon_tick(node)
        rng = self.kernel.rng.stream(f"beacon:{node}")
        jitter = 1.0 + BEACON_JITTER * (2.0 * rng.random() - 1.0)
        self.kernel.schedule(int(self.interval_us * jitter), lambda: self._tick(node))

    def beacon_tick(self, node: int) -> None:
        frame = Frame(src=node, dst=BROADCAST, kind=tr.F_BEACON, bytes=BEACON_BYTES,
                      msg=("beacon", self.tree.rank[node]))
        self.radio.broadcast(frame)

    def on_beacon(self, node: int, sender: int, sender_rank: int) -> None:
        """Refresh the candidate-parent ordering of ``node`` after hearing ``sender``."""
        if sender_rank > self.tree.rank[node]:
            return
        cands = self.tree.candidate_parents[node]
        if sender not in cands:
            cands.append(sender)
        ewma = self.radio.ewma_success
        cands.sort(key=lambda v: (self.tree.rank[v], -ewma.get((node, v), 1.0), v))
