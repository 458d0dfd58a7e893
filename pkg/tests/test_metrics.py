import json

import pytest

from peerfl.config import DataSpec, DeviceSpec, SimConfig, TopologySpec
from peerfl.flcore import run_simulation
from peerfl.metrics import (CSV_HEADER, EventType, MetricsLog, MetricsRecord, format_csv,
                            format_jsonl, summarize, write_metrics)


def _log_with(*records):
    log = MetricsLog()
    for rec in records:
        log.append(rec)
    return log


def test_empty_log_is_header_only_csv():
    assert format_csv(MetricsLog()) == ",".join(CSV_HEADER) + "\n"


def test_single_eval_row():
    log = _log_with(MetricsRecord(round=0, device=3, event=EventType.EVAL,
                                  sim_time=1.25, loss=0.5, accuracy=0.875))
    lines = format_csv(log).splitlines()
    assert lines[1] == "0,3,Eval,1.25,0.5,0.875,,0,"


def test_floats_use_nine_significant_digits():
    log = _log_with(MetricsRecord(round=0, device=0, event=EventType.EVAL,
                                  sim_time=1.0 / 3.0, loss=2.0 / 3.0, accuracy=1.0))
    row = format_csv(log).splitlines()[1]
    assert "0.333333333" in row
    assert "0.666666667" in row


def test_write_metrics_deterministic_bytes(tmp_path):
    log = _log_with(
        MetricsRecord(round=0, device=0, event=EventType.TRAIN, sim_time=0.5,
                      loss=0.9, accuracy=0.4),
        MetricsRecord(round=0, device=0, event=EventType.SEND, sim_time=0.6,
                      bytes=512, peer=1),
    )
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_metrics(log, str(a))
    write_metrics(log, str(b))
    assert a.read_bytes() == b.read_bytes()


def test_jsonl_rows_parse_and_carry_nulls():
    log = _log_with(MetricsRecord(round=1, device=2, event=EventType.SEND,
                                  sim_time=3.5, bytes=100, peer=0))
    (line,) = format_jsonl(log).splitlines()
    parsed = json.loads(line)
    assert parsed == {"round": 1, "device": 2, "event": "Send", "sim_time": 3.5,
                      "loss": None, "accuracy": None, "adv_accuracy": None,
                      "bytes": 100, "peer": 0}


def test_write_metrics_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        write_metrics(MetricsLog(), str(tmp_path / "x"), "xml")


def test_summary_single_device_run_has_zero_comm():
    cfg = SimConfig(
        seed=1, rounds=2, epochs_per_round=1,
        data=DataSpec(rows=200, features=4, classes=2, separation=1.0),
        devices=(DeviceSpec(),), topology=TopologySpec(kind="ring"))
    summary = summarize(run_simulation(cfg).log)
    assert summary.devices == 1
    assert summary.comm_seconds == 0.0
    assert summary.total_bytes == 0


def test_summary_accounting_identity():
    cfg = SimConfig(
        seed=2, rounds=3, epochs_per_round=1,
        data=DataSpec(rows=400, features=4, classes=2, separation=1.0),
        devices=tuple(DeviceSpec() for _ in range(3)),
        topology=TopologySpec(kind="ring"))
    summary = summarize(run_simulation(cfg).log)
    per_round_total = sum(r["comm_seconds"] + r["compute_seconds"]
                          for r in summary.per_round)
    assert per_round_total == pytest.approx(summary.busy_seconds, rel=1e-12)
    assert summary.busy_seconds == pytest.approx(
        summary.comm_seconds + summary.compute_seconds, rel=1e-12)


def test_summary_final_mean_accuracy_uses_last_eval():
    log = _log_with(
        MetricsRecord(round=0, device=0, event=EventType.EVAL, sim_time=1.0,
                      loss=1.0, accuracy=0.25),
        MetricsRecord(round=1, device=0, event=EventType.EVAL, sim_time=2.0,
                      loss=0.5, accuracy=0.75),
        MetricsRecord(round=1, device=1, event=EventType.EVAL, sim_time=2.0,
                      loss=0.5, accuracy=0.25),
    )
    assert summarize(log).final_mean_accuracy == 0.5


def test_summary_counts_sent_bytes():
    log = _log_with(
        MetricsRecord(round=0, device=0, event=EventType.SEND, sim_time=1.0,
                      bytes=100, peer=1),
        MetricsRecord(round=0, device=1, event=EventType.RECEIVE, sim_time=1.5,
                      bytes=100, peer=0),
        MetricsRecord(round=0, device=1, event=EventType.SEND, sim_time=2.0,
                      bytes=50, peer=0),
    )
    assert summarize(log).total_bytes == 150
