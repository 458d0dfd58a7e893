import math

import pytest

from peerfl.config import (ConfigError, DeviceSpec, PRESETS, SimConfig, build_topology,
                           parse_config, parse_document, preset_config, render_config,
                           validate)

MINIMAL = """\
seed: 42
devices:
  count: 2
  template:
    speed_factor: 1.0
topology:
  kind: ring
"""


# ------------------------------------------------------------------ document parser

def test_scalar_types():
    doc = parse_document("a: 1\nb: 2.5\nc: true\nd: hello\ne: 'q 1'\nf: null\ng: 1e6\n")
    assert doc == {"a": 1, "b": 2.5, "c": True, "d": "hello", "e": "q 1",
                   "f": None, "g": 1e6}


def test_nested_maps_and_lists():
    doc = parse_document(
        "outer:\n  inner:\n    x: 1\n  items: [1, 2, 3]\nlist:\n  - a\n  - b\n")
    assert doc == {"outer": {"inner": {"x": 1}, "items": [1, 2, 3]},
                   "list": ["a", "b"]}


def test_block_list_of_maps():
    doc = parse_document("rows:\n  - x: 1\n    y: 2\n  - x: 3\n    y: 4\n")
    assert doc == {"rows": [{"x": 1, "y": 2}, {"x": 3, "y": 4}]}


def test_comments_and_blank_lines_ignored():
    doc = parse_document("# header\na: 1  # trailing\n\nb: 'has # inside'\n")
    assert doc == {"a": 1, "b": "has # inside"}


def test_duplicate_key_rejected_with_line():
    with pytest.raises(ConfigError, match="line 2.*duplicate"):
        parse_document("a: 1\na: 2\n")


def test_tab_indentation_rejected():
    with pytest.raises(ConfigError, match="tab"):
        parse_document("a:\n\tb: 1\n")


def test_anchors_and_aliases_rejected():
    with pytest.raises(ConfigError):
        parse_document("a: &anchor 1\n")
    with pytest.raises(ConfigError):
        parse_document("a: *ref\n")


def test_multidoc_markers_rejected():
    with pytest.raises(ConfigError, match="multi-document"):
        parse_document("---\na: 1\n")


def test_syntax_error_carries_line_number():
    with pytest.raises(ConfigError, match="line 3"):
        parse_document("a: 1\nb: 2\nnot a key value\n")


# ------------------------------------------------------------------ schema

def test_minimal_config_fills_documented_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.seed == 42
    assert cfg.mode == "p2p"
    assert cfg.rounds == 5
    assert cfg.epochs_per_round == 1
    assert cfg.batch_size == 32
    assert cfg.learning_rate == 0.1
    assert cfg.compression == "none"
    assert cfg.horizon is None
    assert cfg.flow == "gossip"
    assert cfg.num_devices == 2
    assert cfg.channel.mode == "ideal"
    assert cfg.channel.mtu_bits == 12000
    assert cfg.partition.kind == "iid"
    assert cfg.early_stop is None
    assert cfg.compute.val_fraction == 0.2


def test_missing_seed_names_path():
    with pytest.raises(ConfigError, match="seed"):
        parse_config("devices:\n  count: 2\n  template:\n    ram_mb: 64\n")


def test_unknown_key_rejected_with_path():
    with pytest.raises(ConfigError, match="channel.bogus"):
        parse_config(MINIMAL + "channel:\n  bogus: 1\n")


def test_type_mismatch_names_path():
    with pytest.raises(ConfigError, match="rounds"):
        parse_config(MINIMAL + "rounds: soon\n")


def test_device_list_with_adversary():
    text = """\
seed: 1
devices:
  - speed_factor: 1.0
  - adversary: label_flip
topology:
  kind: ring
"""
    cfg = parse_config(text)
    assert cfg.devices[0].adversary == "honest"
    assert cfg.devices[1].adversary == "label_flip"


def test_device_template_expansion():
    cfg = parse_config("seed: 1\ndevices:\n  count: 5\n  template:\n    ram_mb: 64\n"
                       "topology:\n  kind: ring\n")
    assert cfg.num_devices == 5
    assert all(d.ram_mb == 64 for d in cfg.devices)


def test_bad_adversary_enum():
    with pytest.raises(ConfigError, match="adversary"):
        parse_config("seed: 1\ndevices:\n  - adversary: evil\ntopology:\n  kind: ring\n")


def test_edge_strings_parse():
    text = MINIMAL + "exchange_edges: [0-1, 1-0]\nflow: edges\n"
    cfg = parse_config(text)
    assert cfg.exchange_edges == ((0, 1), (1, 0))


def test_topology_edges_with_caps():
    text = """\
seed: 2
devices:
  count: 3
  template:
    ram_mb: 64
topology:
  kind: inline
  edges: [0-1@5e5, 1-2]
"""
    cfg = parse_config(text)
    assert cfg.topology.edges == ((0, 1, 5e5), (1, 2, None))
    graph = build_topology(cfg)
    assert graph.edge_cap[0, 1] == 5e5


def test_bad_edge_string():
    with pytest.raises(ConfigError, match="exchange_edges"):
        parse_config(MINIMAL + "exchange_edges: [zero-one]\n")


# ------------------------------------------------------------------ render round-trip

def test_render_parse_round_trip_default():
    cfg = parse_config(MINIMAL)
    assert parse_config(render_config(cfg)) == cfg


def test_render_parse_round_trip_rich():
    text = """\
seed: 9
mode: centralized
aggregator: 1
rounds: 7
learning_rate: 0.25
compression: quantized8
horizon: 120.5
devices:
  - speed_factor: 2.0
    ram_mb: 128
    adversary: noise_injection
    sigma: 0.5
  - accelerator: true
    bandwidth_bps: 1e7
topology:
  kind: star
  hub: 1
channel:
  mode: wireless
  loss: 0.1
  loss_model: stochastic
wireless:
  arena_w: 250.0
  speed_mps: 2.0
  access_points:
    - x: 10.0
      y: 20.0
early_stop:
  patience: 4
  min_delta: 0.01
  metric: accuracy
"""
    cfg = parse_config(text)
    assert parse_config(render_config(cfg)) == cfg


def test_round_trip_preserves_infinite_bandwidth():
    cfg = parse_config(MINIMAL)
    assert math.isinf(cfg.devices[0].bandwidth_bps)
    again = parse_config(render_config(cfg))
    assert math.isinf(again.devices[0].bandwidth_bps)


# ------------------------------------------------------------------ presets

@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_parse_and_validate(name):
    cfg = parse_config(preset_config(name))
    assert validate(cfg) == []


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset_config("nope")


# ------------------------------------------------------------------ validation

def test_validate_ok_returns_empty():
    assert validate(parse_config(MINIMAL)) == []


def test_validate_disconnected_topology_names_pair():
    text = """\
seed: 1
devices:
  count: 4
  template:
    ram_mb: 64
topology:
  kind: inline
  edges: [0-1, 2-3]
"""
    errors = validate(parse_config(text))
    assert any("unreachable" in e for e in errors)


def test_validate_wireless_without_access_points():
    text = MINIMAL + "channel:\n  mode: wireless\n"
    errors = validate(parse_config(text))
    assert any("access_point" in e for e in errors)


def test_validate_bad_tier_ordering():
    text = MINIMAL + ("channel:\n  mode: wireless\n"
                      "wireless:\n  tiers: [80@6e6, 60@54e6]\n"
                      "  access_points:\n    - x: 1.0\n      y: 1.0\n")
    errors = validate(parse_config(text))
    assert any("tiers" in e for e in errors)


def test_validate_collects_multiple_errors():
    cfg = parse_config(MINIMAL)
    bad = SimConfig(**{**cfg.__dict__, "rounds": 0, "learning_rate": -1.0})
    errors = validate(bad)
    assert len(errors) >= 2


def test_validate_centralized_aggregator_range():
    text = MINIMAL + "mode: centralized\naggregator: 9\n"
    errors = validate(parse_config(text))
    assert any("aggregator" in e for e in errors)


def test_validate_edges_flow_requires_edges():
    errors = validate(parse_config(MINIMAL + "flow: edges\n"))
    assert any("exchange_edges" in e for e in errors)


def test_validate_circular_wait_detected():
    # 0 waits on 1 and 1 waits on 0: both inbound edges precede either's send
    text = """\
seed: 3
flow: edges
exchange_edges: [0-1, 1-0]
devices:
  count: 2
  template:
    ram_mb: 64
topology:
  kind: ring
"""
    cfg = parse_config(text)
    # listed order: (0,1) is before 1's first send (index 1), so 1 waits on 0;
    # (1,0) is after 0's first send (index 0), so 0 does not wait: acyclic.
    assert validate(cfg) == []

    swapped = SimConfig(**{**cfg.__dict__, "exchange_edges": ((1, 0), (0, 1))})
    assert validate(swapped) == []  # symmetric case, still a valid ping-pong


def test_validate_missing_csv():
    text = """\
seed: 1
data:
  kind: csv
  path: /nonexistent.csv
  label_column: y
devices:
  count: 2
  template:
    ram_mb: 64
topology:
  kind: ring
"""
    errors = validate(parse_config(text))
    assert any("data.path" in e for e in errors)


def test_validate_dirichlet_single_device():
    text = """\
seed: 1
partition:
  kind: dirichlet
devices:
  - ram_mb: 64
topology:
  kind: ring
"""
    errors = validate(parse_config(text))
    assert any("dirichlet" in e for e in errors)
