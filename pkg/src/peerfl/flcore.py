"""Federated orchestration: device state machines, aggregation strategies, round
scheduling in centralized and P2P modes, decoupled compute/communication timing,
and the early-stopping daemon.

A round proceeds as: each device's training slot fires (aggregate whatever
arrived since its last slot, train, evaluate), its completion is stamped at
now + compute_time, and outgoing weight messages travel hop by hop over routes
through the overlay.  Training is decoupled from communication: devices train
concurrently and transfers overlap with unrelated computation.  In gossip flow
every device's slot fires at the round boundary; in ordered-edge (and ring
relay) flow a device's slot fires once the senders listed before its own first
send have delivered, reproducing the receive -> average -> train -> forward
chain; in centralized mode clients train, send to the aggregator, and adopt
the averaged model it broadcasts back.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .adversary import AdversaryKind, AdversarySpec, Phase, apply_adversary, observes_traffic
from .config import ConfigError, EarlyStopSpec as EarlyStopConfig, SimConfig, build_topology, validate
from .datagen import PartitionPlan, load_csv, make_synthetic, partition_dirichlet, partition_iid
from .kernel import EventKind, Kernel, SimEvent, StopFlag
from .learning import (Compression, Dataset, EvalMetrics, FormatError, ModelParams,
                       ModelShape, TrainConfig, deserialize, evaluate, init_model,
                       serialize, train)
from .metrics import EventType, MetricsLog, MetricsRecord
from .net import (AccessPoint, ChannelState, LossMode, Message, Position,
                  TopologyGraph, associate, hop_time, link_rate, route,
                  update_positions)
from .seeds import derive_seed, substream

logger = logging.getLogger("peerfl")


class AggregationKind(Enum):
    PEER_AVERAGE = "peer_average"
    WEIGHTED_AVERAGE = "weighted_average"
    GOSSIP_PUSH = "gossip_push"


@dataclass(frozen=True)
class AggregationStrategy:
    kind: AggregationKind = AggregationKind.PEER_AVERAGE
    fanout: int = 1

    def __post_init__(self):
        if self.kind is AggregationKind.GOSSIP_PUSH and self.fanout < 1:
            raise ValueError("gossip fanout must be >= 1")


@dataclass(frozen=True)
class DeviceProfile:
    """Hardware profile: relative compute rate, RAM, link cap, accelerator, role."""

    speed_factor: float = 1.0
    ram_mb: int = 1024
    bandwidth_cap: float = math.inf
    has_accelerator: bool = False
    adversary: AdversarySpec = AdversarySpec()

    def __post_init__(self):
        if self.speed_factor <= 0:
            raise ValueError("speed_factor must be > 0")
        if self.ram_mb < 1:
            raise ValueError("ram_mb must be >= 1")


@dataclass
class DeviceState:
    """One simulated participant; `model` is absent until its first training slot."""

    id: int
    profile: DeviceProfile
    shard: Dataset
    model: ModelParams | None = None
    position: Position = Position(0.0, 0.0)
    history: list[EvalMetrics] = field(default_factory=list)


@dataclass(frozen=True)
class RoundPlan:
    mode: str  # "centralized" | "p2p"
    rounds: int
    epochs_per_round: int
    aggregator: int = 0
    flow: str = "gossip"  # "gossip" | "edges" (ring relay expands to edges)
    edges: tuple = ()


# ---------------------------------------------------------------- primitives

def aggregate(local: ModelParams, received: list[ModelParams],
              weights=None) -> ModelParams:
    """Coordinate-wise weighted mean of {local} + received; uniform when
    weights are omitted.  Computed centred on the local model, so averaging k
    identical models returns the model bit-exactly."""
    for other in received:
        if other.shape.layer_dims != local.shape.layer_dims:
            raise ValueError(
                f"shape mismatch: {other.shape.layer_dims} vs {local.shape.layer_dims}")
    if not received and weights is None:
        return local
    models = [local, *received]
    if weights is None:
        w = np.ones(len(models))
    else:
        w = np.asarray(list(weights), dtype=np.float64)
        if w.size != len(models):
            raise ValueError(f"need {len(models)} weights (local + received), got {w.size}")
        if np.any(w < 0):
            raise ValueError("aggregation weights must be nonnegative")
    total = float(w.sum())
    if total <= 0:
        raise ValueError("aggregation weights must sum to > 0")
    base = local.weights
    delta = np.zeros_like(base)
    for model, wi in zip(models, w):
        delta += wi * (model.weights - base)
    return ModelParams(local.shape, base + delta / total)


def compute_time(profile: DeviceProfile, shard_rows: int, epochs: int,
                 base_seconds_per_row: float = 0.0005,
                 accelerator_speedup: float = 10.0) -> float:
    """Simulated training duration: base * rows * epochs / speed, further
    divided by the accelerator speedup when one is present."""
    seconds = base_seconds_per_row * shard_rows * epochs / profile.speed_factor
    if profile.has_accelerator:
        seconds /= accelerator_speedup
    return seconds


def effective_batch(profile: DeviceProfile, requested: int,
                    rows_per_mb: int = 64) -> int:
    """RAM-capped batch size: min(requested, floor(ram_mb*rows_per_mb)), >= 1."""
    if requested < 1:
        raise ValueError("requested batch size must be >= 1")
    return max(1, min(requested, profile.ram_mb * rows_per_mb))


def gossip_select(peers: list[int], fanout: int, rng: np.random.Generator) -> list[int]:
    """Uniform sample without replacement of min(fanout, |peers|) neighbors."""
    if not peers:
        return []
    k = min(fanout, len(peers))
    if k >= len(peers):
        return sorted(peers)
    picked = rng.choice(len(peers), size=k, replace=False)
    return sorted(peers[int(i)] for i in picked)


def early_stop(history, cfg: EarlyStopConfig) -> bool:
    """True when the monitored metric has stalled for `patience` entries.

    An entry improving the running best by more than min_delta resets the
    patience counter; a strict-but-insignificant improvement (<= min_delta)
    holds it; anything else counts against patience.  Improvement means a
    decrease for loss and an increase for accuracy.
    """
    daemon = EarlyStopDaemon(cfg)
    stopped = False
    for value in history:
        stopped = daemon.append(value)
    return stopped


class EarlyStopDaemon:
    """Incremental form of `early_stop`, fed one round metric at a time."""

    def __init__(self, cfg: EarlyStopConfig):
        self.cfg = cfg
        self.best: float | None = None
        self.wait = 0

    def append(self, value: float) -> bool:
        if self.best is None:
            self.best = value
            self.wait = 0
            return False
        improvement = self.best - value if self.cfg.metric == "loss" else value - self.best
        if improvement > self.cfg.min_delta:
            self.wait = 0
        elif improvement <= 0:
            self.wait += 1
        if improvement > 0:
            self.best = value
        return self.wait >= self.cfg.patience


def shard_split(shard: Dataset, val_fraction: float) -> tuple[Dataset, Dataset | None]:
    """Deterministic train/held-out split: the trailing val_fraction of the
    shard's rows is held out (shards arrive pre-shuffled from partitioning).
    Returns (train, None) when the shard is too small to hold anything out."""
    n_val = min(int(round(val_fraction * shard.n)), shard.n - 1)
    if n_val <= 0:
        return shard, None
    idx = np.arange(shard.n)
    return shard.subset(idx[:shard.n - n_val]), shard.subset(idx[shard.n - n_val:])


# ---------------------------------------------------------------- problem setup

_ADVERSARY_KINDS = {
    "honest": AdversaryKind.HONEST,
    "honest_but_curious": AdversaryKind.HONEST_BUT_CURIOUS,
    "label_flip": AdversaryKind.LABEL_FLIP,
    "sign_flip": AdversaryKind.SIGN_FLIP,
    "noise_injection": AdversaryKind.NOISE_INJECTION,
    "fgsm_eval": AdversaryKind.FGSM_EVAL,
}


def adversary_spec(device_cfg) -> AdversarySpec:
    return AdversarySpec(kind=_ADVERSARY_KINDS[device_cfg.adversary],
                         sigma=device_cfg.sigma, epsilon=device_cfg.epsilon)


def device_profile(device_cfg) -> DeviceProfile:
    return DeviceProfile(
        speed_factor=device_cfg.speed_factor,
        ram_mb=device_cfg.ram_mb,
        bandwidth_cap=device_cfg.bandwidth_bps,
        has_accelerator=device_cfg.accelerator,
        adversary=adversary_spec(device_cfg),
    )


def model_shape(cfg: SimConfig, data: Dataset) -> ModelShape:
    if cfg.model.hidden > 0:
        return ModelShape((data.dim, cfg.model.hidden, data.classes))
    return ModelShape((data.dim, data.classes))


def init_seed(cfg: SimConfig, device_id: int) -> int:
    """Centralized mode starts every device from one common model (classical
    federated averaging); P2P devices each initialize their own."""
    if cfg.mode == "centralized":
        return derive_seed(cfg.seed, "init")
    return derive_seed(cfg.seed, "init", device_id)


def train_seed(cfg: SimConfig, device_id: int, round_index: int) -> int:
    return derive_seed(cfg.seed, "train", device_id, round_index)


@dataclass
class Problem:
    """Everything derived from (config, seed) before the first event runs."""

    data: Dataset
    shape: ModelShape
    plan: PartitionPlan
    shards: list[Dataset]
    train_sets: list[Dataset]
    val_sets: list[Dataset | None]


def build_problem(cfg: SimConfig) -> Problem:
    if cfg.data.kind == "synthetic":
        data = make_synthetic(cfg.data.rows, cfg.data.features, cfg.data.classes,
                              cfg.data.separation, derive_seed(cfg.seed, "data"))
    else:
        data = load_csv(cfg.data.path, cfg.data.label_column, cfg.data.classes)
    k = cfg.num_devices
    if k == 1:
        plan = PartitionPlan([np.arange(data.n)])
    elif cfg.partition.kind == "dirichlet":
        plan = partition_dirichlet(data, k, cfg.partition.alpha,
                                   derive_seed(cfg.seed, "partition"))
    else:
        plan = partition_iid(data, k, derive_seed(cfg.seed, "partition"))
    shards = [data.subset(a) for a in plan.assignments]
    for i, device_cfg in enumerate(cfg.devices):
        spec = adversary_spec(device_cfg)
        shards[i] = apply_adversary(spec, Phase.DATA_LOAD, shard=shards[i])
    splits = [shard_split(s, cfg.compute.val_fraction) for s in shards]
    return Problem(
        data=data,
        shape=model_shape(cfg, data),
        plan=plan,
        shards=shards,
        train_sets=[t for t, _ in splits],
        val_sets=[v for _, v in splits],
    )


def round_plan(cfg: SimConfig) -> RoundPlan:
    n = cfg.num_devices
    if cfg.mode == "centralized":
        return RoundPlan(mode="centralized", rounds=cfg.rounds,
                         epochs_per_round=cfg.epochs_per_round, aggregator=cfg.aggregator)
    if cfg.flow == "ring":
        edges = tuple((i, (i + 1) % n) for i in range(n))
        return RoundPlan(mode="p2p", rounds=cfg.rounds,
                         epochs_per_round=cfg.epochs_per_round, flow="edges", edges=edges)
    if cfg.flow == "edges":
        return RoundPlan(mode="p2p", rounds=cfg.rounds,
                         epochs_per_round=cfg.epochs_per_round, flow="edges",
                         edges=tuple(cfg.exchange_edges))
    return RoundPlan(mode="p2p", rounds=cfg.rounds,
                     epochs_per_round=cfg.epochs_per_round, flow="gossip")


def send_targets(cfg: SimConfig, topology: TopologyGraph | None, plan: RoundPlan,
                 device_id: int, round_index: int) -> list[int]:
    """Recipients of a device's update in the given round."""
    if plan.mode == "centralized":
        return [] if device_id == plan.aggregator else [plan.aggregator]
    if plan.flow == "edges":
        return [v for u, v in plan.edges if u == device_id]
    neighbors = topology.neighbors(device_id) if topology is not None else []
    if cfg.aggregation.kind == "gossip_push":
        rng = substream(cfg.seed, "gossip", device_id, round_index)
        return gossip_select(neighbors, cfg.aggregation.fanout, rng)
    return neighbors


def on_receive(device: DeviceState, msg: Message, cfg: SimConfig,
               round_index: int = 0, shard_sizes: list[int] | None = None) -> list[Message]:
    """Single-message protocol step: unpack the sender's weights, average them
    with the local model (initializing it first if absent), train on the local
    shard, and emit serialized weights to this device's next peer(s).

    This is the standalone form of the training slot the engine runs; the
    engine additionally batches simultaneous arrivals and appends to the
    global metrics log.  Raises FormatError when the payload is malformed
    (the engine drops such messages and counts them).
    """
    if msg.dst != device.id:
        raise ValueError(f"message addressed to {msg.dst}, not device {device.id}")
    compression = Compression(cfg.compression)
    shape = model_shape(cfg, device.shard)
    params = deserialize(msg.payload, shape, compression)
    if device.model is None:
        device.model = init_model(shape, init_seed(cfg, device.id))
    weights = None
    if cfg.aggregation.kind == "weighted_average" and shard_sizes is not None:
        weights = [shard_sizes[device.id], shard_sizes[msg.src]]
    device.model = aggregate(device.model, [params], weights)
    train_ds, val_ds = shard_split(device.shard, cfg.compute.val_fraction)
    if cfg.epochs_per_round > 0:
        batch = effective_batch(device.profile, cfg.batch_size, cfg.compute.rows_per_mb)
        tc = TrainConfig(cfg.epochs_per_round, batch, cfg.learning_rate,
                         train_seed(cfg, device.id, round_index))
        device.model, _ = train(device.model, train_ds, tc)
    device.history.append(evaluate(device.model, val_ds if val_ds is not None else train_ds))
    plan = round_plan(cfg)
    topology = build_topology(cfg) if cfg.num_devices >= 2 else None
    targets = send_targets(cfg, topology, plan, device.id, round_index)
    if not targets:
        return []
    spec = device.profile.adversary
    outgoing = apply_adversary(spec, Phase.PRE_SEND, params=device.model,
                               rng=substream(cfg.seed, "adversary", device.id, round_index))
    blob = serialize(outgoing, compression)
    now = msg.created_at
    return [Message(src=device.id, dst=t, size_bits=8 * len(blob), payload=blob,
                    created_at=now) for t in targets]


# ---------------------------------------------------------------- the engine

@dataclass
class SimulationResult:
    log: MetricsLog
    devices: list[DeviceState]
    round_models: list[ModelParams]
    final_time: float
    rounds_completed: int
    stopped_early: bool


class _Engine:
    def __init__(self, cfg: SimConfig):
        errors = validate(cfg)
        if errors:
            raise ConfigError("; ".join(errors))
        self.cfg = cfg
        self.n = cfg.num_devices
        self.problem = build_problem(cfg)
        self.shape = self.problem.shape
        self.plan = round_plan(cfg)
        self.compression = Compression(cfg.compression)
        self.loss_mode = LossMode(cfg.channel.loss_model)
        self.topology = build_topology(cfg) if self.n >= 2 else None
        self.kernel = Kernel()
        self.stop = StopFlag()
        self.log = MetricsLog()
        self.daemon = EarlyStopDaemon(cfg.early_stop) if cfg.early_stop else None
        self.channel_rng = substream(cfg.seed, "channel")
        self.wireless = cfg.channel.mode == "wireless"

        self.devices = []
        if self.wireless:
            pos_rng = substream(cfg.seed, "positions")
            arena = np.array([cfg.wireless.arena_w, cfg.wireless.arena_h])
            self.positions = pos_rng.uniform(0.0, 1.0, size=(self.n, 2)) * arena
            self.mobility_rng = substream(cfg.seed, "mobility")
            self.waypoints = self.mobility_rng.uniform(0.0, 1.0, size=(self.n, 2)) * arena
            self.aps = [AccessPoint(i, Position(ap.x, ap.y), ap.backbone_bps)
                        for i, ap in enumerate(cfg.wireless.access_points)]
            self.radio_rate = np.zeros(self.n)
            self.backbone = np.zeros(self.n)
        for i, device_cfg in enumerate(cfg.devices):
            position = (Position(float(self.positions[i, 0]), float(self.positions[i, 1]))
                        if self.wireless else Position(0.0, 0.0))
            self.devices.append(DeviceState(
                id=i, profile=device_profile(device_cfg), shard=self.problem.shards[i],
                model=None, position=position))
        if self.wireless:
            self._refresh_radio()

        # per-round bookkeeping
        self.round = -1
        self.inbox: list[list[tuple[int, ModelParams]]] = [[] for _ in range(self.n)]
        self.round_val: dict[int, EvalMetrics] = {}
        self.pending_trains: set[int] = set()
        self.pending_msgs = 0
        self.fired: set[int] = set()
        self.edge_received: dict[int, list[tuple[int, ModelParams]]] = {}
        self.agg_models: dict[int, ModelParams] = {}
        self.agg_done = False
        self.stop_check_scheduled = False
        self.round_models: list[ModelParams] = []
        self.rounds_completed = 0
        self.stopped_early = False
        self.warned_clamp: set[int] = set()

        if self.plan.flow == "edges":
            first_out: dict[int, int] = {}
            for idx, (u, _) in enumerate(self.plan.edges):
                first_out.setdefault(u, idx)
            self.blocking_in = {i: 0 for i in range(self.n)}
            for idx, (u, v) in enumerate(self.plan.edges):
                if idx < first_out.get(v, len(self.plan.edges)):
                    self.blocking_in[v] += 1

    # ------------------------------------------------------------ helpers

    def _refresh_radio(self) -> None:
        w = self.cfg.wireless
        for i in range(self.n):
            pos = Position(float(self.positions[i, 0]), float(self.positions[i, 1]))
            ap = associate(pos, self.aps)
            self.radio_rate[i] = link_rate(pos, ap, list(w.tiers), w.floor_rate_bps,
                                           w.path_loss_exponent, w.ref_loss_db, w.ref_dist_m)
            self.backbone[i] = ap.backbone_rate

    def _device_rate(self, device_id: int) -> float:
        cap = self.devices[device_id].profile.bandwidth_cap
        if self.wireless:
            cap = min(cap, self.radio_rate[device_id], self.backbone[device_id])
        return cap

    def _record(self, event: EventType, device_id: int, *, loss=None, accuracy=None,
                adv_accuracy=None, nbytes=0, peer=None, at=None) -> None:
        self.log.append(MetricsRecord(
            round=max(self.round, 0), device=device_id, event=event,
            sim_time=self.kernel.now if at is None else at,
            loss=loss, accuracy=accuracy, adv_accuracy=adv_accuracy,
            bytes=nbytes, peer=peer))

    # ------------------------------------------------------------ round flow

    def _start_round(self, r: int) -> None:
        self.round = r
        self.round_val = {}
        self.pending_trains = set()
        self.pending_msgs = 0
        self.fired = set()
        self.edge_received = {}
        self.agg_models = {}
        self.agg_done = False
        self.stop_check_scheduled = False
        logger.debug("round %d starts at t=%.6f", r, self.kernel.now)
        if self.plan.flow == "edges" and self.plan.mode == "p2p":
            starters = [i for i in range(self.n) if self.blocking_in.get(i, 0) == 0]
        else:
            starters = list(range(self.n))
        for i in starters:
            self._fire_slot(i, self._drain_inbox(i), r)

    def _drain_inbox(self, device_id: int) -> list[tuple[int, ModelParams]]:
        arrived = self.inbox[device_id]
        self.inbox[device_id] = []
        return arrived

    def _fire_slot(self, i: int, received: list[tuple[int, ModelParams]], r: int) -> None:
        dev = self.devices[i]
        self.fired.add(i)
        if dev.model is None:
            dev.model = init_model(self.shape, init_seed(self.cfg, i))
        if received:
            received = sorted(received, key=lambda item: item[0])
            weights = None
            if self.cfg.aggregation.kind == "weighted_average":
                weights = [dev.shard.n] + [self.devices[src].shard.n for src, _ in received]
            dev.model = aggregate(dev.model, [params for _, params in received], weights)
        batch = effective_batch(dev.profile, self.cfg.batch_size, self.cfg.compute.rows_per_mb)
        if batch < self.cfg.batch_size and i not in self.warned_clamp:
            self.warned_clamp.add(i)
            self._record(EventType.WARN, i)
        train_ds = self.problem.train_sets[i]
        epochs = self.plan.epochs_per_round
        if epochs > 0:
            tc = TrainConfig(epochs, batch, self.cfg.learning_rate, train_seed(self.cfg, i, r))
            new_model, train_metrics = train(dev.model, train_ds, tc)
            duration = compute_time(dev.profile, train_ds.n, epochs,
                                    self.cfg.compute.base_seconds_per_row,
                                    self.cfg.compute.accelerator_speedup)
        else:
            new_model, train_metrics = dev.model, None
            duration = 0.0
        val_ds = self.problem.val_sets[i]
        eval_ds = val_ds if val_ds is not None else train_ds
        val_metrics = evaluate(new_model, eval_ds)
        adv_acc = apply_adversary(dev.profile.adversary, Phase.EVAL,
                                  params=new_model, eval_data=eval_ds)
        self.pending_trains.add(i)
        self.kernel.schedule(self.kernel.now + duration, EventKind.TRAIN_DONE, target=i,
                             payload=(i, r, new_model, train_metrics, val_metrics,
                                      adv_acc, duration))

    def _on_train_done(self, ev: SimEvent) -> None:
        i, r, model, train_metrics, val_metrics, adv_acc, duration = ev.payload
        dev = self.devices[i]
        dev.model = model
        dev.history.append(val_metrics)
        self.round_val[i] = val_metrics
        if train_metrics is not None:
            self._record(EventType.TRAIN, i, loss=train_metrics.loss,
                         accuracy=train_metrics.accuracy)
        self._record(EventType.EVAL, i, loss=val_metrics.loss,
                     accuracy=val_metrics.accuracy, adv_accuracy=adv_acc)
        self.log.add_compute_time(r, duration)
        self.pending_trains.discard(i)
        targets = send_targets(self.cfg, self.topology, self.plan, i, r)
        if targets:
            outgoing = apply_adversary(dev.profile.adversary, Phase.PRE_SEND, params=model,
                                       rng=substream(self.cfg.seed, "adversary", i, r))
            blob = serialize(outgoing, self.compression)
            for t in targets:
                msg = Message(src=i, dst=t, size_bits=8 * len(blob), payload=blob,
                              created_at=self.kernel.now)
                self._record(EventType.SEND, i, nbytes=len(blob), peer=t)
                self.pending_msgs += 1
                self._dispatch_hop(msg, route(i, t, self.topology), 0, r)
        if self.plan.mode == "centralized" and i == self.plan.aggregator:
            self._collect(r, i, model)
        self._maybe_finish(r)

    def _dispatch_hop(self, msg: Message, path: list[int], hop: int, r: int) -> None:
        u, v = path[hop], path[hop + 1]
        rate = min(self.topology.edge_cap[u, v], self._device_rate(u), self._device_rate(v))
        channel = ChannelState(data_rate=rate, delay=self.cfg.channel.delay_s,
                               loss_prob=self.cfg.channel.loss)
        duration = hop_time(msg.size_bits, channel, self.loss_mode,
                            self.cfg.channel.mtu_bits, self.channel_rng)
        self.log.add_comm_time(r, duration)
        self.kernel.schedule(self.kernel.now + duration, EventKind.HOP_ARRIVE, target=v,
                             payload=(msg, path, hop + 1, r))

    def _on_hop_arrive(self, ev: SimEvent) -> None:
        msg, path, hop, r = ev.payload
        if hop < len(path) - 1:
            self._dispatch_hop(msg, path, hop, r)
            return
        self.pending_msgs -= 1
        dst = msg.dst
        dev = self.devices[dst]
        try:
            params = deserialize(msg.payload, self.shape, self.compression)
        except FormatError:
            self._record(EventType.DROP, dst, nbytes=len(msg.payload), peer=msg.src)
            self._maybe_finish(r)
            return
        if observes_traffic(dev.profile.adversary):
            self._record(EventType.RECEIVE, dst, nbytes=len(msg.payload), peer=msg.src)
        if self.plan.mode == "centralized":
            if dst == self.plan.aggregator:
                self._collect(r, msg.src, params)
            else:
                dev.model = params  # adopt the broadcast global model
        elif self.plan.flow == "gossip":
            self.inbox[dst].append((msg.src, params))
        else:
            if dst not in self.fired and self.blocking_in.get(dst, 0) > 0:
                self.edge_received.setdefault(dst, []).append((msg.src, params))
                if len(self.edge_received[dst]) == self.blocking_in[dst]:
                    arrivals = self._drain_inbox(dst) + self.edge_received.pop(dst)
                    self._fire_slot(dst, arrivals, r)
            else:
                self.inbox[dst].append((msg.src, params))
        self._maybe_finish(r)

    def _collect(self, r: int, src: int, params: ModelParams) -> None:
        self.agg_models[src] = params
        if len(self.agg_models) < self.n:
            return
        agg_id = self.plan.aggregator
        agg_dev = self.devices[agg_id]
        others = [self.agg_models[j] for j in sorted(self.agg_models) if j != agg_id]
        weights = None
        if self.cfg.aggregation.kind == "weighted_average":
            weights = [agg_dev.shard.n] + [self.devices[j].shard.n
                                           for j in sorted(self.agg_models) if j != agg_id]
        global_model = aggregate(self.agg_models[agg_id], others, weights)
        agg_dev.model = global_model
        self.round_models.append(global_model.copy())
        self.agg_done = True
        if self.n > 1:
            outgoing = apply_adversary(agg_dev.profile.adversary, Phase.PRE_SEND,
                                       params=global_model,
                                       rng=substream(self.cfg.seed, "adversary", agg_id, r))
            blob = serialize(outgoing, self.compression)
            for t in range(self.n):
                if t == agg_id:
                    continue
                msg = Message(src=agg_id, dst=t, size_bits=8 * len(blob), payload=blob,
                              created_at=self.kernel.now)
                self._record(EventType.SEND, agg_id, nbytes=len(blob), peer=t)
                self.pending_msgs += 1
                self._dispatch_hop(msg, route(agg_id, t, self.topology), 0, r)

    def _maybe_finish(self, r: int) -> None:
        if self.pending_trains or self.pending_msgs or self.stop_check_scheduled:
            return
        if self.plan.mode == "centralized" and not self.agg_done:
            return
        unfired = [i for i in range(self.n) if i not in self.fired]
        if unfired:
            # only reachable when a blocking message was dropped; keep moving
            self._fire_slot(unfired[0], self._drain_inbox(unfired[0]), r)
            return
        self.stop_check_scheduled = True
        self.kernel.schedule(self.kernel.now, EventKind.STOP_CHECK, payload=r)

    def _on_stop_check(self, r: int) -> None:
        self.rounds_completed = r + 1
        if self.daemon is not None and self.round_val:
            if self.cfg.early_stop.metric == "accuracy":
                value = float(np.mean([m.accuracy for m in self.round_val.values()]))
            else:
                value = float(np.mean([m.loss for m in self.round_val.values()]))
            if self.daemon.append(value):
                logger.info("early stopping after round %d", r)
                self.stopped_early = True
                self.stop.set()
                return
        if r + 1 < self.plan.rounds:
            self.kernel.schedule(self.kernel.now, EventKind.ROUND_START, payload=r + 1)
        else:
            self.stop.set()

    def _on_mobility_tick(self) -> None:
        w = self.cfg.wireless
        update_positions(self.positions, self.waypoints, w.arena_w, w.arena_h,
                         w.tick_s, w.speed_mps, self.mobility_rng)
        self._refresh_radio()
        self.kernel.schedule(self.kernel.now + w.tick_s, EventKind.MOBILITY_TICK)

    def _dispatch(self, ev: SimEvent) -> None:
        if ev.kind is EventKind.ROUND_START:
            self._start_round(ev.payload)
        elif ev.kind is EventKind.TRAIN_DONE:
            self._on_train_done(ev)
        elif ev.kind is EventKind.HOP_ARRIVE:
            self._on_hop_arrive(ev)
        elif ev.kind is EventKind.STOP_CHECK:
            self._on_stop_check(ev.payload)
        elif ev.kind is EventKind.MOBILITY_TICK:
            self._on_mobility_tick()

    def run(self) -> SimulationResult:
        if self.wireless and self.cfg.wireless.speed_mps > 0:
            self.kernel.schedule(self.cfg.wireless.tick_s, EventKind.MOBILITY_TICK)
        self.kernel.schedule(0.0, EventKind.ROUND_START, payload=0)
        horizon = self.cfg.horizon if self.cfg.horizon is not None else math.inf
        final_time = self.kernel.run_until(self._dispatch, horizon, self.stop)
        for dev in self.devices:
            if dev.model is None:
                continue
            val_ds = self.problem.val_sets[dev.id]
            eval_ds = val_ds if val_ds is not None else self.problem.train_sets[dev.id]
            final = evaluate(dev.model, eval_ds)
            adv_acc = apply_adversary(dev.profile.adversary, Phase.EVAL,
                                      params=dev.model, eval_data=eval_ds)
            self._record(EventType.EVAL, dev.id, loss=final.loss,
                         accuracy=final.accuracy, adv_accuracy=adv_acc, at=final_time)
        if self.wireless:
            for dev in self.devices:
                dev.position = Position(float(self.positions[dev.id, 0]),
                                        float(self.positions[dev.id, 1]))
        return SimulationResult(
            log=self.log, devices=self.devices, round_models=self.round_models,
            final_time=final_time, rounds_completed=self.rounds_completed,
            stopped_early=self.stopped_early)


def run_simulation(cfg: SimConfig) -> SimulationResult:
    """Validate the config, build the problem, and drive rounds to completion,
    early stop, or the horizon.  Raises ConfigError before any event runs when
    the configuration is unusable."""
    return _Engine(cfg).run()
