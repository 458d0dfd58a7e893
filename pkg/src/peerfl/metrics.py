"""Simulation output records, CSV/JSONL persistence and run summaries."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class EventType(Enum):
    TRAIN = "Train"
    RECEIVE = "Receive"
    SEND = "Send"
    EVAL = "Eval"
    DROP = "Drop"
    WARN = "Warn"


@dataclass(frozen=True)
class MetricsRecord:
    """One output row.  `Receive` rows are emitted only by honest-but-curious
    observers; ordinary deliveries are accounted through `Send` rows."""

    round: int
    device: int
    event: EventType
    sim_time: float
    loss: float | None = None
    accuracy: float | None = None
    adv_accuracy: float | None = None
    bytes: int = 0
    peer: int | None = None


CSV_HEADER = ("round", "device", "event", "sim_time", "loss", "accuracy",
              "adv_accuracy", "bytes", "peer")


class MetricsLog:
    """Record list plus per-round communication/computation time accounting."""

    def __init__(self) -> None:
        self.records: list[MetricsRecord] = []
        self.comm_seconds: dict[int, float] = {}
        self.compute_seconds: dict[int, float] = {}

    def append(self, record: MetricsRecord) -> None:
        self.records.append(record)

    def add_comm_time(self, round_index: int, seconds: float) -> None:
        self.comm_seconds[round_index] = self.comm_seconds.get(round_index, 0.0) + seconds

    def add_compute_time(self, round_index: int, seconds: float) -> None:
        self.compute_seconds[round_index] = self.compute_seconds.get(round_index, 0.0) + seconds

    def __len__(self) -> int:
        return len(self.records)


def _fmt_float(value: float | None) -> str:
    return "" if value is None else "%.9g" % value


def format_csv(log: MetricsLog) -> str:
    lines = [",".join(CSV_HEADER)]
    for r in log.records:
        lines.append(",".join((
            str(r.round),
            str(r.device),
            r.event.value,
            _fmt_float(r.sim_time),
            _fmt_float(r.loss),
            _fmt_float(r.accuracy),
            _fmt_float(r.adv_accuracy),
            str(r.bytes),
            "" if r.peer is None else str(r.peer),
        )))
    return "\n".join(lines) + "\n"


def _json_value(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.9g" % value
    if isinstance(value, int):
        return str(value)
    return '"%s"' % value


def format_jsonl(log: MetricsLog) -> str:
    lines = []
    for r in log.records:
        pairs = (
            ("round", r.round), ("device", r.device), ("event", r.event.value),
            ("sim_time", r.sim_time), ("loss", r.loss), ("accuracy", r.accuracy),
            ("adv_accuracy", r.adv_accuracy), ("bytes", r.bytes), ("peer", r.peer),
        )
        lines.append("{" + ", ".join(f'"{k}": {_json_value(v)}' for k, v in pairs) + "}")
    return "\n".join(lines) + ("\n" if lines else "")


def write_metrics(log: MetricsLog, path: str, fmt: str = "csv") -> None:
    """Persist the log; floats carry 9 significant digits so identical logs
    always produce identical bytes."""
    if fmt == "csv":
        text = format_csv(log)
    elif fmt == "jsonl":
        text = format_jsonl(log)
    else:
        raise ValueError(f"unknown metrics format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


@dataclass
class RunSummary:
    devices: int
    rounds_completed: int
    final_mean_accuracy: float
    total_sim_time: float
    total_bytes: int
    comm_seconds: float
    compute_seconds: float
    busy_seconds: float
    per_round: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "devices": self.devices,
            "rounds_completed": self.rounds_completed,
            "final_mean_accuracy": self.final_mean_accuracy,
            "total_sim_time": self.total_sim_time,
            "total_bytes": self.total_bytes,
            "comm_seconds": self.comm_seconds,
            "compute_seconds": self.compute_seconds,
            "busy_seconds": self.busy_seconds,
            "per_round": self.per_round,
        }


def summarize(log: MetricsLog) -> RunSummary:
    """Final mean accuracy across devices, simulated-time total, byte totals
    and the per-round communication vs computation split."""
    last_eval: dict[int, float] = {}
    devices: set[int] = set()
    total_bytes = 0
    total_time = 0.0
    rounds = -1
    for r in log.records:
        devices.add(r.device)
        total_time = max(total_time, r.sim_time)
        rounds = max(rounds, r.round)
        if r.event is EventType.SEND:
            total_bytes += r.bytes
        if r.event is EventType.EVAL and r.accuracy is not None:
            last_eval[r.device] = r.accuracy
    comm_total = sum(log.comm_seconds.values())
    compute_total = sum(log.compute_seconds.values())
    all_rounds = sorted(set(log.comm_seconds) | set(log.compute_seconds))
    per_round = [{
        "round": idx,
        "comm_seconds": log.comm_seconds.get(idx, 0.0),
        "compute_seconds": log.compute_seconds.get(idx, 0.0),
    } for idx in all_rounds]
    mean_acc = (sum(last_eval.values()) / len(last_eval)) if last_eval else float("nan")
    return RunSummary(
        devices=len(devices),
        rounds_completed=rounds + 1,
        final_mean_accuracy=mean_acc,
        total_sim_time=total_time,
        total_bytes=total_bytes,
        comm_seconds=comm_total,
        compute_seconds=compute_total,
        busy_seconds=comm_total + compute_total,
        per_round=per_round,
    )
