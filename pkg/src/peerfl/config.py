"""Run configuration: strict YAML-subset parsing, schema validation, rendering, presets.

The accepted format is a deliberately small YAML subset: nested maps, block
lists (of scalars or maps), inline lists of scalars, and plain scalars.
Anchors, aliases, multi-document markers and tabs are rejected.  Unknown keys
are errors, every default is recorded explicitly, and `render_config` emits a
canonical document that parses back to an equal config.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from . import datagen, net


class ConfigError(ValueError):
    """Configuration syntax or schema violation, with line number or key path."""


# ---------------------------------------------------------------- parsing

_KEY_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_\-]*)\s*:(.*)$")
_INT_RE = re.compile(r"^[+-]?\d+$")
_FORBIDDEN_PREFIXES = ("&", "*", "|", ">", "%", "@", "`", "?")


@dataclass
class _Line:
    indent: int
    text: str
    lineno: int


def _strip_comment(line: str) -> str:
    quote = None
    for i, ch in enumerate(line):
        if quote:
            if ch == quote:
                quote = None
        elif ch in ("'", '"'):
            quote = ch
        elif ch == "#":
            return line[:i]
    return line


def _logical_lines(text: str) -> list[_Line]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = _strip_comment(raw).rstrip()
        if not stripped.strip():
            continue
        indent = len(stripped) - len(stripped.lstrip(" "))
        if "\t" in stripped[:indent + 1]:
            raise ConfigError(f"line {lineno}: tabs are not allowed in indentation")
        body = stripped.strip()
        if body in ("---", "..."):
            raise ConfigError(f"line {lineno}: multi-document markers are not supported")
        out.append(_Line(indent=indent, text=body, lineno=lineno))
    return out


def _parse_scalar(token: str, lineno: int):
    token = token.strip()
    if not token:
        return None
    if token[0] in ("'", '"'):
        if len(token) < 2 or token[-1] != token[0]:
            raise ConfigError(f"line {lineno}: unterminated quoted string")
        return token[1:-1]
    if token[0] in _FORBIDDEN_PREFIXES:
        raise ConfigError(
            f"line {lineno}: {token[0]!r} scalars are outside the supported YAML subset")
    if token in ("true", "True"):
        return True
    if token in ("false", "False"):
        return False
    if token in ("null", "~", "None"):
        return None
    if _INT_RE.match(token):
        return int(token)
    try:
        return float(token)
    except ValueError:
        return token


def _split_inline(body: str, lineno: int) -> list[str]:
    items, depth, quote, current = [], 0, None, []
    for ch in body:
        if quote:
            current.append(ch)
            if ch == quote:
                quote = None
        elif ch in ("'", '"'):
            quote = ch
            current.append(ch)
        elif ch == "[":
            raise ConfigError(f"line {lineno}: nested inline lists are not supported")
        elif ch == ",":
            items.append("".join(current))
            current = []
        else:
            current.append(ch)
    if quote:
        raise ConfigError(f"line {lineno}: unterminated quoted string")
    items.append("".join(current))
    return items


def _parse_value(token: str, lineno: int):
    token = token.strip()
    if token.startswith("["):
        if not token.endswith("]"):
            raise ConfigError(f"line {lineno}: inline list must close on the same line")
        inner = token[1:-1].strip()
        if not inner:
            return []
        return [_parse_scalar(item, lineno) for item in _split_inline(inner, lineno)]
    if token.startswith("{"):
        raise ConfigError(f"line {lineno}: inline maps are not supported")
    return _parse_scalar(token, lineno)


class _BlockParser:
    def __init__(self, lines: list[_Line]):
        self.lines = lines
        self.pos = 0

    def _peek(self) -> _Line | None:
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def parse_block(self, indent: int):
        line = self._peek()
        if line is None:
            return {}
        if line.text.startswith("- ") or line.text == "-":
            return self.parse_list(indent)
        return self.parse_map(indent)

    def parse_map(self, indent: int) -> dict:
        result: dict = {}
        while True:
            line = self._peek()
            if line is None or line.indent < indent:
                return result
            if line.indent > indent:
                raise ConfigError(f"line {line.lineno}: unexpected indentation")
            if line.text.startswith("- "):
                raise ConfigError(f"line {line.lineno}: list item where a key was expected")
            match = _KEY_RE.match(line.text)
            if match is None:
                raise ConfigError(f"line {line.lineno}: expected 'key: value'")
            key, rest = match.group(1), match.group(2).strip()
            if key in result:
                raise ConfigError(f"line {line.lineno}: duplicate key {key!r}")
            self.pos += 1
            if rest:
                result[key] = _parse_value(rest, line.lineno)
            else:
                child = self._peek()
                if child is not None and child.indent > indent:
                    result[key] = self.parse_block(child.indent)
                else:
                    result[key] = None

    def parse_list(self, indent: int) -> list:
        result: list = []
        while True:
            line = self._peek()
            if line is None or line.indent < indent:
                return result
            if line.indent > indent:
                raise ConfigError(f"line {line.lineno}: unexpected indentation")
            if not (line.text.startswith("- ") or line.text == "-"):
                return result
            item = line.text[2:].strip() if line.text.startswith("- ") else ""
            if not item:
                self.pos += 1
                child = self._peek()
                if child is None or child.indent <= indent:
                    raise ConfigError(f"line {line.lineno}: empty list item")
                result.append(self.parse_block(child.indent))
            elif _KEY_RE.match(item):
                # map item: rewrite "- key: v" as a map starting at indent+2
                self.lines[self.pos] = _Line(indent + 2, item, line.lineno)
                result.append(self.parse_map(indent + 2))
            else:
                self.pos += 1
                result.append(_parse_value(item, line.lineno))


def parse_document(text: str):
    """Parse the YAML subset into plain dicts/lists/scalars."""
    lines = _logical_lines(text)
    if not lines:
        raise ConfigError("empty configuration")
    if lines[0].indent != 0:
        raise ConfigError(f"line {lines[0].lineno}: top level must not be indented")
    parser = _BlockParser(lines)
    doc = parser.parse_block(0)
    rest = parser._peek()
    if rest is not None:
        raise ConfigError(f"line {rest.lineno}: unexpected content after document")
    return doc


# ---------------------------------------------------------------- schema

_REQUIRED = object()


class _Section:
    """Tracks consumed keys under a dotted path; leftovers are unknown-key errors."""

    def __init__(self, data, path: str):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path or 'document'}: expected a mapping")
        self.data = dict(data)
        self.path = path

    def _at(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def take(self, key: str, kind, default=_REQUIRED):
        if key not in self.data:
            if default is _REQUIRED:
                raise ConfigError(f"missing required key: {self._at(key)}")
            return default
        value = self.data.pop(key)
        if value is None:
            # an explicit null means "use the default"
            if default is _REQUIRED:
                raise ConfigError(f"{self._at(key)}: must not be null")
            return default
        return _coerce(value, kind, self._at(key))

    def subsection(self, key: str) -> "_Section":
        return _Section(self.data.pop(key, None), self._at(key))

    def has(self, key: str) -> bool:
        return key in self.data and self.data[key] is not None

    def finish(self) -> None:
        if self.data:
            unknown = ", ".join(sorted(self._at(k) for k in self.data))
            raise ConfigError(f"unknown key(s): {unknown}")


def _coerce(value, kind, path: str):
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if kind is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return value
    raise AssertionError(f"unhandled kind {kind}")


def _enum_str(section: _Section, key: str, choices: tuple[str, ...], default):
    value = section.take(key, str, default)
    if value not in choices:
        raise ConfigError(
            f"{section._at(key)}: must be one of {', '.join(choices)}; got {value!r}")
    return value


def _parse_edge(token, path: str, with_cap: bool):
    if not isinstance(token, str):
        raise ConfigError(f"{path}: edges must be strings like '0-1', got {token!r}")
    body, cap = (token.split("@", 1) + [None])[:2] if "@" in token else (token, None)
    parts = body.split("-")
    if len(parts) != 2 or not all(_INT_RE.match(p) for p in parts):
        raise ConfigError(f"{path}: bad edge {token!r}, expected 'u-v'")
    u, v = int(parts[0]), int(parts[1])
    if cap is not None:
        if not with_cap:
            raise ConfigError(f"{path}: capacities are not allowed here ({token!r})")
        try:
            return (u, v, float(cap))
        except ValueError:
            raise ConfigError(f"{path}: bad capacity in {token!r}") from None
    return (u, v, None) if with_cap else (u, v)


# ---------------------------------------------------------------- config model

@dataclass(frozen=True)
class ModelSpec:
    hidden: int = 0


@dataclass(frozen=True)
class DataSpec:
    kind: str = "synthetic"
    rows: int = 1000
    features: int = 8
    classes: int = 3
    separation: float = 2.0
    path: str | None = None
    label_column: str | None = None


@dataclass(frozen=True)
class PartitionSpec:
    kind: str = "iid"
    alpha: float = 0.5


@dataclass(frozen=True)
class DeviceSpec:
    speed_factor: float = 1.0
    ram_mb: int = 1024
    bandwidth_bps: float = math.inf
    accelerator: bool = False
    adversary: str = "honest"
    sigma: float | None = None
    epsilon: float | None = None


@dataclass(frozen=True)
class TopologySpec:
    kind: str = "ring"
    degree: int = 3
    hub: int = 0
    edges: tuple = ()


@dataclass(frozen=True)
class ChannelSpec:
    mode: str = "ideal"
    rate_bps: float = 1.0e6
    delay_s: float = 0.01
    loss: float = 0.0
    loss_model: str = "expected"
    mtu_bits: int = net.DEFAULT_MTU_BITS


@dataclass(frozen=True)
class AccessPointSpec:
    x: float
    y: float
    backbone_bps: float = 1.0e9


@dataclass(frozen=True)
class WirelessSpec:
    arena_w: float = 500.0
    arena_h: float = 500.0
    speed_mps: float = 1.0
    tick_s: float = 1.0
    floor_rate_bps: float = 1.0e6
    path_loss_exponent: float = 3.0
    ref_loss_db: float = 40.0
    ref_dist_m: float = 1.0
    tiers: tuple = ((60.0, 54.0e6), (80.0, 6.0e6))
    access_points: tuple = ()


@dataclass(frozen=True)
class AggregationSpec:
    kind: str = "peer_average"
    fanout: int = 1


@dataclass(frozen=True)
class EarlyStopSpec:
    patience: int
    min_delta: float = 0.0
    metric: str = "loss"


@dataclass(frozen=True)
class ComputeSpec:
    base_seconds_per_row: float = 0.0005
    accelerator_speedup: float = 10.0
    rows_per_mb: int = 64
    val_fraction: float = 0.2


@dataclass(frozen=True)
class SimConfig:
    seed: int
    mode: str = "p2p"
    rounds: int = 5
    epochs_per_round: int = 1
    batch_size: int = 32
    learning_rate: float = 0.1
    compression: str = "none"
    horizon: float | None = None
    aggregator: int = 0
    flow: str = "gossip"
    exchange_edges: tuple = ()
    model: ModelSpec = field(default_factory=ModelSpec)
    data: DataSpec = field(default_factory=DataSpec)
    partition: PartitionSpec = field(default_factory=PartitionSpec)
    devices: tuple = (DeviceSpec(), DeviceSpec())
    topology: TopologySpec = field(default_factory=TopologySpec)
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    wireless: WirelessSpec = field(default_factory=WirelessSpec)
    aggregation: AggregationSpec = field(default_factory=AggregationSpec)
    early_stop: EarlyStopSpec | None = None
    compute: ComputeSpec = field(default_factory=ComputeSpec)

    @property
    def num_devices(self) -> int:
        return len(self.devices)


_ADVERSARIES = ("honest", "honest_but_curious", "label_flip", "sign_flip",
                "noise_injection", "fgsm_eval")


def _device_spec(section: _Section) -> DeviceSpec:
    spec = DeviceSpec(
        speed_factor=section.take("speed_factor", float, 1.0),
        ram_mb=section.take("ram_mb", int, 1024),
        bandwidth_bps=section.take("bandwidth_bps", float, math.inf),
        accelerator=section.take("accelerator", bool, False),
        adversary=_enum_str(section, "adversary", _ADVERSARIES, "honest"),
        sigma=section.take("sigma", float, None),
        epsilon=section.take("epsilon", float, None),
    )
    section.finish()
    return spec


def _devices_from(raw, path: str) -> tuple:
    if isinstance(raw, list):
        out = []
        for i, entry in enumerate(raw):
            out.append(_device_spec(_Section(entry, f"{path}[{i}]")))
        return tuple(out)
    section = _Section(raw, path)
    count = section.take("count", int)
    if count < 1:
        raise ConfigError(f"{path}.count: must be >= 1")
    template = _device_spec(section.subsection("template"))
    section.finish()
    return tuple(template for _ in range(count))


def parse_config(text: str) -> SimConfig:
    """Parse and schema-check a configuration document, applying defaults."""
    doc = parse_document(text)
    if isinstance(doc, list):
        raise ConfigError("document: top level must be a mapping")
    root = _Section(doc, "")

    seed = root.take("seed", int)
    mode = _enum_str(root, "mode", ("p2p", "centralized"), "p2p")
    rounds = root.take("rounds", int, 5)
    epochs = root.take("epochs_per_round", int, 1)
    batch = root.take("batch_size", int, 32)
    lr = root.take("learning_rate", float, 0.1)
    compression = _enum_str(root, "compression", ("none", "quantized8"), "none")
    horizon = root.take("horizon", float, None)
    aggregator = root.take("aggregator", int, 0)
    flow = _enum_str(root, "flow", ("gossip", "ring", "edges"), "gossip")
    raw_edges = root.take("exchange_edges", list, [])
    exchange = tuple(_parse_edge(e, f"exchange_edges[{i}]", with_cap=False)
                     for i, e in enumerate(raw_edges))

    msec = root.subsection("model")
    model = ModelSpec(hidden=msec.take("hidden", int, 0))
    msec.finish()

    dsec = root.subsection("data")
    data = DataSpec(
        kind=_enum_str(dsec, "kind", ("synthetic", "csv"), "synthetic"),
        rows=dsec.take("rows", int, 1000),
        features=dsec.take("features", int, 8),
        classes=dsec.take("classes", int, 3),
        separation=dsec.take("separation", float, 2.0),
        path=dsec.take("path", str, None),
        label_column=dsec.take("label_column", str, None),
    )
    dsec.finish()

    psec = root.subsection("partition")
    partition = PartitionSpec(
        kind=_enum_str(psec, "kind", ("iid", "dirichlet"), "iid"),
        alpha=psec.take("alpha", float, 0.5),
    )
    psec.finish()

    raw_devices = root.data.pop("devices", None)
    if raw_devices is None:
        raise ConfigError("missing required key: devices")
    devices = _devices_from(raw_devices, "devices")

    tsec = root.subsection("topology")
    topo_kind = _enum_str(tsec, "kind", ("ring", "star", "complete", "random_regular", "inline"),
                          "ring")
    topo_edges = tuple(_parse_edge(e, f"topology.edges[{i}]", with_cap=True)
                       for i, e in enumerate(tsec.take("edges", list, [])))
    topology = TopologySpec(
        kind=topo_kind,
        degree=tsec.take("degree", int, 3),
        hub=tsec.take("hub", int, 0),
        edges=topo_edges,
    )
    tsec.finish()

    csec = root.subsection("channel")
    channel = ChannelSpec(
        mode=_enum_str(csec, "mode", ("ideal", "wireless"), "ideal"),
        rate_bps=csec.take("rate_bps", float, 1.0e6),
        delay_s=csec.take("delay_s", float, 0.01),
        loss=csec.take("loss", float, 0.0),
        loss_model=_enum_str(csec, "loss_model", ("expected", "stochastic"), "expected"),
        mtu_bits=csec.take("mtu_bits", int, net.DEFAULT_MTU_BITS),
    )
    csec.finish()

    wsec = root.subsection("wireless")
    tiers = []
    for i, token in enumerate(wsec.take("tiers", list, ["60@54e6", "80@6e6"])):
        path = f"wireless.tiers[{i}]"
        if not isinstance(token, str) or "@" not in token:
            raise ConfigError(f"{path}: expected 'max_loss_db@rate_bps', got {token!r}")
        loss_part, rate_part = token.split("@", 1)
        try:
            tiers.append((float(loss_part), float(rate_part)))
        except ValueError:
            raise ConfigError(f"{path}: bad tier {token!r}") from None
    aps = []
    for i, entry in enumerate(wsec.take("access_points", list, [])):
        asec = _Section(entry, f"wireless.access_points[{i}]")
        aps.append(AccessPointSpec(
            x=asec.take("x", float),
            y=asec.take("y", float),
            backbone_bps=asec.take("backbone_bps", float, 1.0e9),
        ))
        asec.finish()
    wireless = WirelessSpec(
        arena_w=wsec.take("arena_w", float, 500.0),
        arena_h=wsec.take("arena_h", float, 500.0),
        speed_mps=wsec.take("speed_mps", float, 1.0),
        tick_s=wsec.take("tick_s", float, 1.0),
        floor_rate_bps=wsec.take("floor_rate_bps", float, 1.0e6),
        path_loss_exponent=wsec.take("path_loss_exponent", float, 3.0),
        ref_loss_db=wsec.take("ref_loss_db", float, 40.0),
        ref_dist_m=wsec.take("ref_dist_m", float, 1.0),
        tiers=tuple(tiers),
        access_points=tuple(aps),
    )
    wsec.finish()

    asec = root.subsection("aggregation")
    aggregation = AggregationSpec(
        kind=_enum_str(asec, "kind", ("peer_average", "weighted_average", "gossip_push"),
                       "peer_average"),
        fanout=asec.take("fanout", int, 1),
    )
    asec.finish()

    early = None
    if root.has("early_stop"):
        esec = root.subsection("early_stop")
        early = EarlyStopSpec(
            patience=esec.take("patience", int),
            min_delta=esec.take("min_delta", float, 0.0),
            metric=_enum_str(esec, "metric", ("loss", "accuracy"), "loss"),
        )
        esec.finish()
    else:
        root.data.pop("early_stop", None)

    ksec = root.subsection("compute")
    compute = ComputeSpec(
        base_seconds_per_row=ksec.take("base_seconds_per_row", float, 0.0005),
        accelerator_speedup=ksec.take("accelerator_speedup", float, 10.0),
        rows_per_mb=ksec.take("rows_per_mb", int, 64),
        val_fraction=ksec.take("val_fraction", float, 0.2),
    )
    ksec.finish()

    root.finish()
    return SimConfig(
        seed=seed, mode=mode, rounds=rounds, epochs_per_round=epochs,
        batch_size=batch, learning_rate=lr, compression=compression,
        horizon=horizon, aggregator=aggregator, flow=flow,
        exchange_edges=exchange, model=model, data=data, partition=partition,
        devices=devices, topology=topology, channel=channel, wireless=wireless,
        aggregation=aggregation, early_stop=early, compute=compute,
    )


# ---------------------------------------------------------------- topology build

def build_topology(cfg: SimConfig) -> net.TopologyGraph:
    n = cfg.num_devices
    kind = cfg.topology.kind
    cap = cfg.channel.rate_bps
    if kind == "ring":
        return net.ring_topology(n, cap)
    if kind == "star":
        return net.star_topology(n, cfg.topology.hub, cap)
    if kind == "complete":
        return net.complete_topology(n, cap)
    if kind == "random_regular":
        from .seeds import derive_seed
        return net.random_regular_topology(n, cfg.topology.degree, cap,
                                           derive_seed(cfg.seed, "topology"))
    if kind == "inline":
        edges = [(u, v, c if c is not None else cap) for u, v, c in cfg.topology.edges]
        return net.inline_topology(n, edges, cap)
    raise ConfigError(f"topology.kind: unknown kind {kind!r}")


# ---------------------------------------------------------------- validation

def validate(cfg: SimConfig) -> list[str]:
    """All semantic violations (empty list when runnable); never raises for
    config-level problems."""
    errors: list[str] = []
    n = cfg.num_devices

    if n < 1:
        errors.append("devices: need at least one device")
    if cfg.rounds < 1:
        errors.append("rounds: must be >= 1")
    if cfg.epochs_per_round < 0:
        errors.append("epochs_per_round: must be >= 0")
    if cfg.batch_size < 1:
        errors.append("batch_size: must be >= 1")
    if not (math.isfinite(cfg.learning_rate) and cfg.learning_rate > 0):
        errors.append("learning_rate: must be finite and > 0")
    if cfg.horizon is not None and cfg.horizon <= 0:
        errors.append("horizon: must be > 0 when given")
    if cfg.model.hidden < 0:
        errors.append("model.hidden: must be >= 0")

    d = cfg.data
    if d.classes < 2:
        errors.append("data.classes: need at least 2 classes")
    if d.kind == "synthetic":
        if d.rows < max(n, d.classes):
            errors.append(f"data.rows: need at least {max(n, d.classes)} rows "
                          f"for {n} devices and {d.classes} classes")
        if d.separation < 0:
            errors.append("data.separation: must be >= 0")
        if d.separation > 0 and d.features < d.classes:
            errors.append("data.features: must be >= data.classes when separation > 0")
    else:
        if not d.path:
            errors.append("data.path: required for csv data")
        if not d.label_column:
            errors.append("data.label_column: required for csv data")
        if d.path and d.label_column:
            try:
                loaded = datagen.load_csv(d.path, d.label_column, d.classes)
                if loaded.n < n:
                    errors.append(f"data.path: only {loaded.n} rows for {n} devices")
            except datagen.DataError as exc:
                errors.append(f"data.path: {exc}")

    if cfg.partition.kind == "dirichlet":
        if cfg.partition.alpha <= 0:
            errors.append("partition.alpha: must be > 0")
        if n < 2:
            errors.append("partition.kind: dirichlet needs at least 2 devices")

    for i, dev in enumerate(cfg.devices):
        if dev.speed_factor <= 0:
            errors.append(f"devices[{i}].speed_factor: must be > 0")
        if dev.ram_mb < 1:
            errors.append(f"devices[{i}].ram_mb: must be >= 1")
        if dev.bandwidth_bps <= 0:
            errors.append(f"devices[{i}].bandwidth_bps: must be > 0")
        if dev.adversary == "noise_injection" and not (dev.sigma and dev.sigma > 0):
            errors.append(f"devices[{i}].sigma: noise_injection needs sigma > 0")
        if dev.adversary == "fgsm_eval" and not (dev.epsilon and dev.epsilon > 0):
            errors.append(f"devices[{i}].epsilon: fgsm_eval needs epsilon > 0")

    if cfg.mode == "centralized" and not 0 <= cfg.aggregator < n:
        errors.append(f"aggregator: {cfg.aggregator} is not a valid device id")

    if cfg.mode == "p2p" and cfg.flow == "ring" and n < 2:
        errors.append("flow: ring relay needs at least 2 devices")
    if cfg.mode == "p2p" and cfg.flow == "edges":
        if not cfg.exchange_edges:
            errors.append("exchange_edges: required when flow is 'edges'")
        for i, (u, v) in enumerate(cfg.exchange_edges):
            if not (0 <= u < n and 0 <= v < n) or u == v:
                errors.append(f"exchange_edges[{i}]: bad edge {u}-{v} for {n} devices")
        cycle = _wait_cycle(cfg.exchange_edges, n)
        if cycle:
            errors.append(f"exchange_edges: circular wait among devices {cycle}")
    if cfg.aggregation.kind == "gossip_push":
        if cfg.aggregation.fanout < 1:
            errors.append("aggregation.fanout: must be >= 1")
        if cfg.mode == "p2p" and cfg.flow != "gossip":
            errors.append("aggregation.kind: gossip_push requires flow 'gossip'")

    ch = cfg.channel
    if ch.rate_bps <= 0:
        errors.append("channel.rate_bps: must be > 0")
    if ch.delay_s < 0:
        errors.append("channel.delay_s: must be >= 0")
    if not 0.0 <= ch.loss < 1.0:
        errors.append("channel.loss: must lie in [0, 1)")
    if ch.mtu_bits < 1:
        errors.append("channel.mtu_bits: must be >= 1")

    if ch.mode == "wireless":
        w = cfg.wireless
        if not w.access_points:
            errors.append("wireless.access_points: wireless mode needs at least one access point")
        if w.arena_w <= 0 or w.arena_h <= 0:
            errors.append("wireless.arena_w/arena_h: must be > 0")
        if w.speed_mps < 0:
            errors.append("wireless.speed_mps: must be >= 0")
        if w.tick_s <= 0:
            errors.append("wireless.tick_s: must be > 0")
        if w.floor_rate_bps <= 0:
            errors.append("wireless.floor_rate_bps: must be > 0")
        if w.path_loss_exponent < 1:
            errors.append("wireless.path_loss_exponent: must be >= 1")
        if w.ref_dist_m <= 0:
            errors.append("wireless.ref_dist_m: must be > 0")
        if not w.tiers:
            errors.append("wireless.tiers: must not be empty")
        else:
            losses = [t[0] for t in w.tiers]
            rates = [t[1] for t in w.tiers]
            if losses != sorted(losses):
                errors.append("wireless.tiers: loss thresholds must be ascending")
            if any(b >= a for a, b in zip(rates, rates[1:])):
                errors.append("wireless.tiers: rates must be strictly decreasing")
            if any(r <= 0 for r in rates):
                errors.append("wireless.tiers: rates must be > 0")

    if cfg.compute.base_seconds_per_row <= 0:
        errors.append("compute.base_seconds_per_row: must be > 0")
    if cfg.compute.accelerator_speedup <= 0:
        errors.append("compute.accelerator_speedup: must be > 0")
    if cfg.compute.rows_per_mb < 1:
        errors.append("compute.rows_per_mb: must be >= 1")
    if not 0.0 <= cfg.compute.val_fraction < 1.0:
        errors.append("compute.val_fraction: must lie in [0, 1)")

    if cfg.early_stop is not None:
        if cfg.early_stop.patience < 1:
            errors.append("early_stop.patience: must be >= 1")
        if cfg.early_stop.min_delta < 0:
            errors.append("early_stop.min_delta: must be >= 0")

    if not errors and n >= 2:
        try:
            graph = build_topology(cfg)
            unreachable = graph.unreachable_from(0)
            if unreachable:
                errors.append(
                    f"topology: device {unreachable[0]} is unreachable from device 0")
        except (ValueError, RuntimeError) as exc:
            errors.append(f"topology: {exc}")
    return errors


def _wait_cycle(edges: tuple, n: int) -> list[int]:
    """Detect a circular wait in ordered-edge flow.  An edge u->v blocks v's
    training slot only when it is listed before v's first outgoing edge."""
    first_out = {}
    for idx, (u, _) in enumerate(edges):
        first_out.setdefault(u, idx)
    waits: dict[int, set[int]] = {}
    for idx, (u, v) in enumerate(edges):
        if idx < first_out.get(v, len(edges)):
            waits.setdefault(v, set()).add(u)
    state: dict[int, int] = {}

    def visit(node: int, stack: list[int]):
        state[node] = 1
        stack.append(node)
        for dep in sorted(waits.get(node, ())):
            if state.get(dep, 0) == 1:
                return stack[stack.index(dep):]
            if state.get(dep, 0) == 0:
                found = visit(dep, stack)
                if found:
                    return found
        stack.pop()
        state[node] = 2
        return None

    for node in range(n):
        if state.get(node, 0) == 0:
            cycle = visit(node, [])
            if cycle:
                return cycle
    return []


# ---------------------------------------------------------------- rendering

def _scalar_str(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    return str(value)


def render_config(cfg: SimConfig) -> str:
    """Canonical document with every default materialised; parses back equal."""
    lines: list[str] = []

    def kv(key, value, indent=0):
        lines.append(" " * indent + f"{key}: {_scalar_str(value)}")

    kv("seed", cfg.seed)
    kv("mode", cfg.mode)
    kv("rounds", cfg.rounds)
    kv("epochs_per_round", cfg.epochs_per_round)
    kv("batch_size", cfg.batch_size)
    kv("learning_rate", cfg.learning_rate)
    kv("compression", cfg.compression)
    kv("horizon", cfg.horizon)
    kv("aggregator", cfg.aggregator)
    kv("flow", cfg.flow)
    edges = ", ".join(f"{u}-{v}" for u, v in cfg.exchange_edges)
    lines.append(f"exchange_edges: [{edges}]")
    lines.append("model:")
    kv("hidden", cfg.model.hidden, 2)
    lines.append("data:")
    for name in ("kind", "rows", "features", "classes", "separation", "path", "label_column"):
        kv(name, getattr(cfg.data, name), 2)
    lines.append("partition:")
    kv("kind", cfg.partition.kind, 2)
    kv("alpha", cfg.partition.alpha, 2)
    lines.append("devices:")
    for dev in cfg.devices:
        lines.append(f"  - speed_factor: {_scalar_str(dev.speed_factor)}")
        for name in ("ram_mb", "bandwidth_bps", "accelerator", "adversary", "sigma", "epsilon"):
            kv(name, getattr(dev, name), 4)
    lines.append("topology:")
    kv("kind", cfg.topology.kind, 2)
    kv("degree", cfg.topology.degree, 2)
    kv("hub", cfg.topology.hub, 2)
    topo_edges = ", ".join(f"{u}-{v}" if c is None else f"{u}-{v}@{c!r}"
                           for u, v, c in cfg.topology.edges)
    lines.append(f"  edges: [{topo_edges}]")
    lines.append("channel:")
    for name in ("mode", "rate_bps", "delay_s", "loss", "loss_model", "mtu_bits"):
        kv(name, getattr(cfg.channel, name), 2)
    lines.append("wireless:")
    for name in ("arena_w", "arena_h", "speed_mps", "tick_s", "floor_rate_bps",
                 "path_loss_exponent", "ref_loss_db", "ref_dist_m"):
        kv(name, getattr(cfg.wireless, name), 2)
    tiers = ", ".join(f"{lo!r}@{rate!r}" for lo, rate in cfg.wireless.tiers)
    lines.append(f"  tiers: [{tiers}]")
    if cfg.wireless.access_points:
        lines.append("  access_points:")
        for ap in cfg.wireless.access_points:
            lines.append(f"    - x: {_scalar_str(ap.x)}")
            kv("y", ap.y, 6)
            kv("backbone_bps", ap.backbone_bps, 6)
    else:
        lines.append("  access_points: []")
    lines.append("aggregation:")
    kv("kind", cfg.aggregation.kind, 2)
    kv("fanout", cfg.aggregation.fanout, 2)
    if cfg.early_stop is not None:
        lines.append("early_stop:")
        kv("patience", cfg.early_stop.patience, 2)
        kv("min_delta", cfg.early_stop.min_delta, 2)
        kv("metric", cfg.early_stop.metric, 2)
    lines.append("compute:")
    for name in ("base_seconds_per_row", "accelerator_speedup", "rows_per_mb", "val_fraction"):
        kv(name, getattr(cfg.compute, name), 2)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- presets

PRESETS: dict[str, str] = {
    "line3": """\
# Three devices on a line overlay exchanging averaged weights each round.
seed: 7
mode: p2p
flow: gossip
rounds: 5
epochs_per_round: 5
batch_size: 32
learning_rate: 0.1
model:
  hidden: 0
data:
  kind: synthetic
  rows: 3000
  features: 8
  classes: 3
  separation: 4.0
partition:
  kind: iid
devices:
  count: 3
  template:
    speed_factor: 1.0
topology:
  kind: inline
  edges: [0-1, 1-2]
channel:
  mode: ideal
  rate_bps: 1e6
  delay_s: 0.01
aggregation:
  kind: peer_average
""",
    "star10": """\
# Ten devices around a trusted aggregator at the hub, with early stopping.
seed: 11
mode: centralized
aggregator: 0
rounds: 10
epochs_per_round: 2
batch_size: 32
learning_rate: 0.1
data:
  kind: synthetic
  rows: 4000
  features: 10
  classes: 4
  separation: 2.5
partition:
  kind: dirichlet
  alpha: 0.5
devices:
  count: 10
  template:
    speed_factor: 1.0
topology:
  kind: star
  hub: 0
early_stop:
  patience: 3
  min_delta: 0.001
  metric: loss
""",
    "scale100": """\
# Hundred-device relay ring routed over a sparse random-regular overlay.
seed: 23
mode: p2p
flow: ring
rounds: 2
epochs_per_round: 1
batch_size: 32
learning_rate: 0.05
data:
  kind: synthetic
  rows: 5000
  features: 16
  classes: 5
  separation: 2.0
partition:
  kind: iid
devices:
  count: 100
  template:
    speed_factor: 1.0
topology:
  kind: random_regular
  degree: 3
channel:
  mode: ideal
  rate_bps: 2e6
  delay_s: 0.005
""",
}


def preset_config(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    return PRESETS[name]
