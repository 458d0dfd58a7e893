import math

import numpy as np
import pytest

from peerfl.net import (AccessPoint, ChannelState, LossMode, Message, Position,
                        TopologyGraph, UnroutableError, associate, complete_topology,
                        distance, hop_time, inline_topology, link_rate, path_loss_db,
                        random_regular_topology, ring_topology, route, star_topology,
                        transfer_time, update_positions)
from peerfl.seeds import substream


def floyd_warshall(adjacency):
    """All-pairs hop counts; the independent oracle for route()."""
    n = adjacency.shape[0]
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    dist[adjacency] = 1.0
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if dist[i, k] + dist[k, j] < dist[i, j]:
                    dist[i, j] = dist[i, k] + dist[k, j]
    return dist


def random_connected_graph(n, rng):
    while True:
        adj = np.zeros((n, n), dtype=bool)
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < 0.35:
                    adj[i, j] = adj[j, i] = True
        graph = TopologyGraph(adj, np.where(adj, 1e6, 0.0))
        if n == 1 or not graph.unreachable_from(0):
            return graph


# ------------------------------------------------------------------ path loss

def test_path_loss_reference_distance():
    assert path_loss_db(1.0, 3.0, 40.0, 1.0) == 40.0


def test_path_loss_one_decade():
    assert path_loss_db(10.0, 3.0, 40.0, 1.0) == pytest.approx(70.0, abs=1e-12)


def test_path_loss_two_decades():
    assert path_loss_db(100.0, 2.0, 40.0, 1.0) == pytest.approx(80.0, abs=1e-12)


def test_path_loss_clamped_below_reference():
    assert path_loss_db(0.5, 3.0, 40.0, 1.0) == 40.0


def test_path_loss_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        path_loss_db(0.0, 3.0, 40.0, 1.0)
    with pytest.raises(ValueError):
        path_loss_db(-1.0, 3.0, 40.0, 1.0)


def test_path_loss_monotone_in_distance():
    losses = [path_loss_db(d, 2.7, 40.0, 1.0) for d in np.linspace(1.0, 500.0, 100)]
    assert all(a <= b for a, b in zip(losses, losses[1:]))


# ------------------------------------------------------------------ link rate / association

TIERS = [(60.0, 54e6), (80.0, 6e6)]


def test_link_rate_at_ap_position():
    ap = AccessPoint(0, Position(10.0, 10.0), 1e9)
    assert link_rate(Position(10.0, 10.0), ap, TIERS, 1e6) == 54e6


def test_link_rate_mid_tier():
    # loss of 70 dB at exponent 3, ref 40 dB: distance 10 m
    ap = AccessPoint(0, Position(0.0, 0.0), 1e9)
    assert link_rate(Position(10.0, 0.0), ap, TIERS, 1e6) == 6e6


def test_link_rate_floor_beyond_last_tier():
    ap = AccessPoint(0, Position(0.0, 0.0), 1e9)
    # distance 100 m -> 40 + 30*2 = 100 dB > 80 dB
    assert link_rate(Position(100.0, 0.0), ap, TIERS, 1e6) == 1e6


def test_associate_zero_distance():
    aps = [AccessPoint(i, Position(float(10 * i), 0.0), 1e9) for i in range(4)]
    assert associate(Position(20.0, 0.0), aps).ap_id == 2


def test_associate_single_ap():
    aps = [AccessPoint(5, Position(3.0, 4.0), 1e9)]
    assert associate(Position(100.0, 100.0), aps).ap_id == 5


def test_associate_tie_breaks_to_lowest_id():
    aps = [AccessPoint(1, Position(0.0, 0.0), 1e9),
           AccessPoint(3, Position(2.0, 0.0), 1e9)]
    assert associate(Position(1.0, 0.0), aps).ap_id == 1


# ------------------------------------------------------------------ mobility

def test_zero_speed_keeps_positions():
    pos = np.array([[1.0, 2.0], [3.0, 4.0]])
    targets = np.array([[9.0, 9.0], [0.0, 0.0]])
    before = pos.copy()
    update_positions(pos, targets, 10.0, 10.0, dt=1.0, speed=0.0,
                     rng=substream(0, "m"))
    np.testing.assert_array_equal(pos, before)


def test_exact_arrival_draws_new_waypoint():
    pos = np.array([[0.0, 0.0]])
    targets = np.array([[3.0, 4.0]])  # distance 5 = speed * dt
    rng = substream(1, "m")
    update_positions(pos, targets, 10.0, 10.0, dt=5.0, speed=1.0, rng=rng)
    np.testing.assert_array_equal(pos, [[3.0, 4.0]])
    assert not np.array_equal(targets, [[3.0, 4.0]])
    assert 0.0 <= targets[0, 0] <= 10.0 and 0.0 <= targets[0, 1] <= 10.0


def test_partial_move_toward_waypoint():
    pos = np.array([[0.0, 0.0]])
    targets = np.array([[3.0, 4.0]])
    update_positions(pos, targets, 10.0, 10.0, dt=1.0, speed=1.0, rng=substream(2, "m"))
    np.testing.assert_allclose(pos, [[0.6, 0.8]])
    np.testing.assert_array_equal(targets, [[3.0, 4.0]])


def test_positions_stay_in_bounds_over_many_ticks():
    rng = substream(3, "mobility")
    w, h = 120.0, 80.0
    pos = rng.uniform(0, 1, (5, 2)) * np.array([w, h])
    targets = rng.uniform(0, 1, (5, 2)) * np.array([w, h])
    for _ in range(10_000):
        update_positions(pos, targets, w, h, dt=1.0, speed=2.5, rng=rng)
        assert np.all(pos[:, 0] >= 0.0) and np.all(pos[:, 0] <= w)
        assert np.all(pos[:, 1] >= 0.0) and np.all(pos[:, 1] <= h)


# ------------------------------------------------------------------ routing

def test_route_line_graph():
    graph = inline_topology(3, [(0, 1), (1, 2)], 1e6)
    assert route(0, 2, graph) == [0, 1, 2]


def test_route_complete_graph_direct():
    graph = complete_topology(4, 1e6)
    assert route(0, 3, graph) == [0, 3]


def test_route_prefers_lexicographically_smallest():
    # two equal-length paths 0-1-3 and 0-2-3; ascending neighbor order wins
    graph = inline_topology(4, [(0, 1), (0, 2), (1, 3), (2, 3)], 1e6)
    assert route(0, 3, graph) == [0, 1, 3]


def test_route_unroutable_names_pair():
    graph = inline_topology(4, [(0, 1), (2, 3)], 1e6)
    with pytest.raises(UnroutableError) as err:
        route(0, 3, graph)
    assert err.value.src == 0 and err.value.dst == 3


def test_route_rejects_same_endpoints():
    graph = complete_topology(3, 1e6)
    with pytest.raises(ValueError):
        route(1, 1, graph)


def test_route_hop_counts_match_floyd_warshall_oracle():
    rng = np.random.default_rng(1234)
    for trial in range(200):
        n = int(rng.integers(2, 13))
        graph = random_connected_graph(n, rng)
        oracle = floyd_warshall(graph.adjacency)
        for src in range(n):
            for dst in range(n):
                if src == dst:
                    continue
                path = route(src, dst, graph)
                assert len(path) - 1 == oracle[src, dst]
                assert path[0] == src and path[-1] == dst
                for u, v in zip(path, path[1:]):
                    assert graph.adjacency[u, v]


def test_route_symmetric_lengths():
    rng = np.random.default_rng(55)
    graph = random_connected_graph(9, rng)
    for src in range(9):
        for dst in range(src + 1, 9):
            assert len(route(src, dst, graph)) == len(route(dst, src, graph))


# ------------------------------------------------------------------ topology generators

def test_ring_star_complete_shapes():
    ring = ring_topology(5, 1e6)
    assert all(len(ring.neighbors(i)) == 2 for i in range(5))
    star = star_topology(5, 2, 1e6)
    assert len(star.neighbors(2)) == 4
    assert all(star.neighbors(i) == [2] for i in range(5) if i != 2)
    comp = complete_topology(4, 1e6)
    assert all(len(comp.neighbors(i)) == 3 for i in range(4))


def test_two_node_ring_single_edge():
    ring = ring_topology(2, 1e6)
    assert ring.neighbors(0) == [1] and ring.neighbors(1) == [0]


def test_random_regular_degree_and_connectivity():
    for n, d, seed in ((100, 3, 1), (100, 8, 2), (50, 4, 3)):
        graph = random_regular_topology(n, d, 1e6, seed)
        degrees = graph.adjacency.sum(axis=1)
        assert np.all(degrees == d)
        assert not graph.unreachable_from(0)


def test_random_regular_deterministic_per_seed():
    a = random_regular_topology(30, 4, 1e6, 7)
    b = random_regular_topology(30, 4, 1e6, 7)
    assert np.array_equal(a.adjacency, b.adjacency)


def test_random_regular_rejects_odd_sum():
    with pytest.raises(ValueError):
        random_regular_topology(5, 3, 1e6, 0)


def test_inline_topology_per_edge_caps():
    graph = inline_topology(3, [(0, 1, 5e5), (1, 2)], 1e6)
    assert graph.edge_cap[0, 1] == 5e5
    assert graph.edge_cap[1, 2] == 1e6


def test_topology_validation():
    adj = np.zeros((3, 3), dtype=bool)
    adj[0, 1] = True  # asymmetric
    with pytest.raises(ValueError):
        TopologyGraph(adj, np.ones((3, 3)))


# ------------------------------------------------------------------ transfer time

def _msg(bits):
    return Message(src=0, dst=1, size_bits=bits, payload=bytes(bits // 8), created_at=0.0)


def test_single_hop_transfer_time():
    t = transfer_time(_msg(8_000_000), [0, 1], [ChannelState(1e6, 0.05, 0.0)],
                      LossMode.EXPECTED)
    assert t == pytest.approx(8.05, abs=1e-12)


def test_two_hop_store_and_forward():
    msg = Message(src=0, dst=2, size_bits=8_000_000, payload=bytes(1_000_000), created_at=0.0)
    channels = [ChannelState(2e6, 0.01, 0.0)] * 2
    t = transfer_time(msg, [0, 1, 2], channels, LossMode.EXPECTED)
    assert t == pytest.approx(8.02, abs=1e-12)


def test_expected_loss_inflates_serialization():
    lossless = hop_time(1_000_000, ChannelState(1e6, 0.0, 0.0), LossMode.EXPECTED)
    lossy = hop_time(1_000_000, ChannelState(1e6, 0.0, 0.2), LossMode.EXPECTED)
    assert lossy == pytest.approx(lossless * 1.25, rel=1e-12)


def test_stochastic_mean_tracks_expected():
    rng = substream(123, "ch")
    ch = ChannelState(1e6, 0.05, 0.2)
    expected = hop_time(8_000_000, ch, LossMode.EXPECTED)
    samples = [hop_time(8_000_000, ch, LossMode.STOCHASTIC, 12000, rng)
               for _ in range(10_000)]
    assert abs(np.mean(samples) - expected) / expected < 0.02


def test_transfer_time_monotonicity():
    base = dict(size=1_000_000, rate=1e6, delay=0.01, loss=0.1)
    t0 = hop_time(base["size"], ChannelState(base["rate"], base["delay"], base["loss"]),
                  LossMode.EXPECTED)
    assert hop_time(base["size"], ChannelState(2e6, base["delay"], base["loss"]),
                    LossMode.EXPECTED) <= t0
    assert hop_time(2_000_000, ChannelState(base["rate"], base["delay"], base["loss"]),
                    LossMode.EXPECTED) >= t0
    assert hop_time(base["size"], ChannelState(base["rate"], 0.05, base["loss"]),
                    LossMode.EXPECTED) >= t0
    assert hop_time(base["size"], ChannelState(base["rate"], base["delay"], 0.3),
                    LossMode.EXPECTED) >= t0


def test_ideal_zero_loss_reduces_to_size_over_cap_plus_delay():
    msg = Message(src=0, dst=3, size_bits=4_000_000, payload=bytes(500_000), created_at=0.0)
    channels = [ChannelState(1e6, 0.02, 0.0), ChannelState(4e6, 0.01, 0.0),
                ChannelState(2e6, 0.0, 0.0)]
    t = transfer_time(msg, [0, 1, 2, 3], channels, LossMode.EXPECTED)
    closed = sum(4_000_000 / c.data_rate + c.delay for c in channels)
    assert t == closed


def test_transfer_time_validates_path_and_channels():
    msg = _msg(8000)
    with pytest.raises(ValueError):
        transfer_time(msg, [0, 1], [], LossMode.EXPECTED)
    with pytest.raises(ValueError):
        transfer_time(msg, [1, 0], [ChannelState(1e6, 0.0, 0.0)], LossMode.EXPECTED)


def test_channel_state_validation():
    with pytest.raises(ValueError):
        ChannelState(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        ChannelState(1e6, -0.1, 0.0)
    with pytest.raises(ValueError):
        ChannelState(1e6, 0.0, 1.0)


def test_message_size_must_match_payload():
    with pytest.raises(ValueError):
        Message(src=0, dst=1, size_bits=100, payload=b"xy", created_at=0.0)


def test_distance():
    assert distance(Position(0.0, 0.0), Position(3.0, 4.0)) == 5.0
