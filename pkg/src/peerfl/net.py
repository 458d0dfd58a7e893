"""Wireless channel, mobility, overlay topology and store-and-forward transfers.

The adjacency matrix is a logical P2P overlay; physical WiFi effects (distance
to the associated access point) modulate each overlay hop's effective rate in
wireless mode.  Messages are atomic per hop: one arrival event per hop, with
loss folded into the serialization time rather than per-packet events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

DEFAULT_MTU_BITS = 12000  # 1500-byte Ethernet frames


class LossMode(Enum):
    EXPECTED = "expected"
    STOCHASTIC = "stochastic"


class ChannelMode(Enum):
    IDEAL = "ideal"
    WIRELESS = "wireless"


class UnroutableError(RuntimeError):
    def __init__(self, src: int, dst: int):
        super().__init__(f"no route between device {src} and device {dst}")
        self.src = src
        self.dst = dst


@dataclass(frozen=True)
class Position:
    x: float
    y: float


def distance(a: Position, b: Position) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class AccessPoint:
    ap_id: int
    position: Position
    backbone_rate: float

    def __post_init__(self):
        if self.backbone_rate <= 0:
            raise ValueError("backbone_rate must be > 0")


@dataclass(frozen=True)
class ChannelState:
    data_rate: float
    delay: float
    loss_prob: float

    def __post_init__(self):
        if self.data_rate <= 0:
            raise ValueError("data_rate must be > 0")
        if self.delay < 0:
            raise ValueError("delay must be >= 0")
        if not 0.0 <= self.loss_prob < 1.0:
            raise ValueError("loss_prob must lie in [0, 1)")


@dataclass(frozen=True)
class Message:
    src: int
    dst: int
    size_bits: int
    payload: bytes
    created_at: float

    def __post_init__(self):
        if self.size_bits != 8 * len(self.payload):
            raise ValueError("size_bits must equal the payload length in bits")


class TopologyGraph:
    """Undirected overlay with per-edge bandwidth caps."""

    def __init__(self, adjacency: np.ndarray, edge_cap: np.ndarray):
        adjacency = np.asarray(adjacency, dtype=bool)
        edge_cap = np.asarray(edge_cap, dtype=np.float64)
        if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(adjacency, adjacency.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(adjacency)):
            raise ValueError("adjacency diagonal must be false")
        if edge_cap.shape != adjacency.shape:
            raise ValueError("edge_cap must match adjacency shape")
        if np.any(edge_cap[adjacency] <= 0):
            raise ValueError("edge capacities must be > 0 on every edge")
        self.adjacency = adjacency
        self.edge_cap = edge_cap

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def neighbors(self, node: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.adjacency[node])]

    def unreachable_from(self, start: int = 0) -> list[int]:
        """Nodes not reachable from `start`; empty when connected."""
        seen = np.zeros(self.n, dtype=bool)
        seen[start] = True
        frontier = [start]
        while frontier:
            node = frontier.pop()
            for nbr in np.flatnonzero(self.adjacency[node]):
                if not seen[nbr]:
                    seen[nbr] = True
                    frontier.append(int(nbr))
        return [int(i) for i in np.flatnonzero(~seen)]


def _empty(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.zeros((n, n), dtype=bool), np.zeros((n, n), dtype=np.float64)


def _add_edge(adj, cap, u: int, v: int, rate: float) -> None:
    adj[u, v] = adj[v, u] = True
    cap[u, v] = cap[v, u] = rate


def ring_topology(n: int, cap: float) -> TopologyGraph:
    if n < 2:
        raise ValueError("ring needs at least 2 nodes")
    adj, caps = _empty(n)
    for i in range(n):
        if n == 2 and i == 1:
            break
        _add_edge(adj, caps, i, (i + 1) % n, cap)
    return TopologyGraph(adj, caps)


def star_topology(n: int, hub: int, cap: float) -> TopologyGraph:
    if not 0 <= hub < n:
        raise ValueError(f"hub {hub} out of range for {n} nodes")
    adj, caps = _empty(n)
    for i in range(n):
        if i != hub:
            _add_edge(adj, caps, hub, i, cap)
    return TopologyGraph(adj, caps)


def complete_topology(n: int, cap: float) -> TopologyGraph:
    adj, caps = _empty(n)
    for i in range(n):
        for j in range(i + 1, n):
            _add_edge(adj, caps, i, j, cap)
    return TopologyGraph(adj, caps)


def inline_topology(n: int, edges, default_cap: float) -> TopologyGraph:
    """Edges given as (u, v) or (u, v, cap_bps) tuples."""
    adj, caps = _empty(n)
    for edge in edges:
        u, v = int(edge[0]), int(edge[1])
        rate = float(edge[2]) if len(edge) > 2 else default_cap
        if not (0 <= u < n and 0 <= v < n) or u == v:
            raise ValueError(f"bad edge ({u}, {v}) for {n} nodes")
        _add_edge(adj, caps, u, v, rate)
    return TopologyGraph(adj, caps)


def random_regular_topology(n: int, degree: int, cap: float, seed: int,
                            max_tries: int = 500) -> TopologyGraph:
    """Seeded random d-regular connected graph via repeated stub matching."""
    if degree < 1 or degree >= n:
        raise ValueError(f"degree must lie in [1, n), got {degree} for n={n}")
    if (n * degree) % 2 != 0:
        raise ValueError(f"n*degree must be even, got n={n}, degree={degree}")
    rng = np.random.default_rng(seed & ((1 << 63) - 1))
    for _ in range(max_tries):
        edges = _try_stub_matching(n, degree, rng)
        if edges is None:
            continue
        adj, caps = _empty(n)
        for u, v in edges:
            _add_edge(adj, caps, u, v, cap)
        graph = TopologyGraph(adj, caps)
        if not graph.unreachable_from(0):
            return graph
    raise RuntimeError(f"failed to build a connected {degree}-regular graph on {n} nodes")


def _try_stub_matching(n: int, degree: int, rng: np.random.Generator):
    stubs = np.repeat(np.arange(n), degree)
    edges: set[tuple[int, int]] = set()
    while stubs.size:
        stubs = rng.permutation(stubs)
        leftover = []
        progress = False
        for i in range(0, stubs.size, 2):
            u, v = int(stubs[i]), int(stubs[i + 1])
            key = (min(u, v), max(u, v))
            if u == v or key in edges:
                leftover.extend((u, v))
            else:
                edges.add(key)
                progress = True
        if not progress:
            counts = {}
            for s in leftover:
                counts[s] = counts.get(s, 0) + 1
            nodes = sorted(counts)
            legal = any((min(a, b), max(a, b)) not in edges
                        for i, a in enumerate(nodes) for b in nodes[i + 1:])
            if not legal:
                return None
        stubs = np.asarray(leftover, dtype=np.int64)
    return edges


def path_loss_db(dist: float, exponent: float, ref_loss_db: float,
                 ref_dist: float) -> float:
    """Log-distance model: ref_loss + 10*exponent*log10(d/d0), clamped below d0."""
    if dist <= 0:
        raise ValueError("distance must be > 0")
    if ref_dist <= 0:
        raise ValueError("reference distance must be > 0")
    if exponent < 1:
        raise ValueError("path-loss exponent must be >= 1")
    if dist < ref_dist:
        return ref_loss_db
    return ref_loss_db + 10.0 * exponent * math.log10(dist / ref_dist)


def link_rate(device_pos: Position, ap: AccessPoint,
              tiers: list[tuple[float, float]], floor_rate: float,
              exponent: float = 3.0, ref_loss_db: float = 40.0,
              ref_dist: float = 1.0) -> float:
    """Rate of the first tier whose loss threshold covers the device's path
    loss to the AP; past the last tier the configured floor rate applies."""
    if not tiers:
        raise ValueError("need at least one rate tier")
    dist = distance(device_pos, ap.position)
    loss = ref_loss_db if dist < ref_dist else path_loss_db(dist, exponent, ref_loss_db, ref_dist)
    for max_loss, rate in tiers:
        if loss <= max_loss:
            return rate
    return floor_rate


def associate(device_pos: Position, aps: list[AccessPoint]) -> AccessPoint:
    """Nearest access point; ties broken by lowest AP id."""
    if not aps:
        raise ValueError("need at least one access point")
    return min(aps, key=lambda ap: (distance(device_pos, ap.position), ap.ap_id))


def update_positions(positions: np.ndarray, targets: np.ndarray,
                     arena_w: float, arena_h: float, dt: float, speed: float,
                     rng: np.random.Generator) -> None:
    """Random-waypoint step: move each device toward its target by speed*dt
    (never overshooting); on arrival draw a fresh uniform target in-place."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if speed < 0:
        raise ValueError("speed must be >= 0")
    if speed == 0:
        return
    step = speed * dt
    delta = targets - positions
    dist = np.hypot(delta[:, 0], delta[:, 1])
    arrived = dist <= step
    moving = ~arrived & (dist > 0)
    positions[arrived] = targets[arrived]
    if np.any(moving):
        scale = (step / dist[moving])[:, None]
        positions[moving] += delta[moving] * scale
    k = int(np.count_nonzero(arrived))
    if k:
        fresh = rng.uniform(0.0, 1.0, size=(k, 2)) * np.array([arena_w, arena_h])
        targets[arrived] = fresh
    np.clip(positions[:, 0], 0.0, arena_w, out=positions[:, 0])
    np.clip(positions[:, 1], 0.0, arena_h, out=positions[:, 1])


def route(src: int, dst: int, graph: TopologyGraph) -> list[int]:
    """Minimal-hop path by BFS; neighbors visited in ascending index order, so
    among equal-length paths the lexicographically smallest one wins."""
    if src == dst:
        raise ValueError("src and dst must differ")
    n = graph.n
    if not (0 <= src < n and 0 <= dst < n):
        raise ValueError(f"node out of range for {n}-node graph")
    parent = np.full(n, -1, dtype=np.int64)
    parent[src] = src
    frontier = [src]
    while frontier:
        nxt = []
        for node in frontier:
            for nbr in np.flatnonzero(graph.adjacency[node]):
                if parent[nbr] == -1:
                    parent[nbr] = node
                    nxt.append(int(nbr))
        if parent[dst] != -1:
            break
        frontier = nxt
    if parent[dst] == -1:
        raise UnroutableError(src, dst)
    path = [dst]
    while path[-1] != src:
        path.append(int(parent[path[-1]]))
    path.reverse()
    return path


def hop_time(size_bits: int, channel: ChannelState, mode: LossMode,
             mtu_bits: int = DEFAULT_MTU_BITS,
             rng: np.random.Generator | None = None) -> float:
    """Serialization plus propagation delay for one hop.

    EXPECTED inflates serialization by 1/(1-p); STOCHASTIC splits the message
    into MTU-sized packets and redraws each lost packet (geometric retries).
    """
    p = channel.loss_prob
    if mode is LossMode.EXPECTED or p == 0.0:
        return size_bits / channel.data_rate / (1.0 - p) + channel.delay
    if rng is None:
        raise ValueError("stochastic loss mode needs an rng")
    full, rem = divmod(size_bits, mtu_bits)
    sizes = np.full(full + (1 if rem else 0), float(mtu_bits))
    if rem:
        sizes[-1] = rem
    attempts = rng.geometric(1.0 - p, size=sizes.size)
    return float(np.dot(attempts, sizes)) / channel.data_rate + channel.delay


def transfer_time(msg: Message, path: list[int], channels: list[ChannelState],
                  mode: LossMode, mtu_bits: int = DEFAULT_MTU_BITS,
                  rng: np.random.Generator | None = None) -> float:
    """Store-and-forward total over the path: sum of per-hop serialization
    (loss-inflated) plus per-hop delay."""
    if len(path) < 2 or path[0] != msg.src or path[-1] != msg.dst:
        raise ValueError("path must run from msg.src to msg.dst")
    if len(channels) != len(path) - 1:
        raise ValueError("need one channel state per hop")
    total = 0.0
    for channel in channels:
        total += hop_time(msg.size_bits, channel, mode, mtu_bits, rng)
    return total
