"""Deterministic discrete-event scheduler ordered by (virtual time, sequence number)."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Optional

GLOBAL_TARGET = -1  # events addressed to the engine rather than a single device


class EventKind(Enum):
    TRAIN_DONE = "TrainDone"
    HOP_ARRIVE = "HopArrive"
    MOBILITY_TICK = "MobilityTick"
    ROUND_START = "RoundStart"
    STOP_CHECK = "StopCheck"


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled into the past or at a non-finite time."""


@dataclass(frozen=True)
class SimEvent:
    """One timestamped unit of work; `seq` breaks ties FIFO among equal times."""

    time: float
    seq: int
    kind: EventKind
    target: int = GLOBAL_TARGET
    payload: Any = None


class StopFlag:
    """Shared stop signal, checked by the kernel between events (never mid-event)."""

    def __init__(self) -> None:
        self._set = False

    def set(self) -> None:
        self._set = True

    def is_set(self) -> bool:
        return self._set


class Kernel:
    """Single-threaded event loop over a (time, seq) priority queue.

    Virtual time is a nonnegative float in simulated seconds and never
    decreases.  Events at equal times are processed in scheduling order.
    """

    def __init__(self) -> None:
        self._now = 0.0
        self._seq = 0
        self._queue: list[tuple[float, int, SimEvent]] = []

    @property
    def now(self) -> float:
        return self._now

    def pending(self) -> int:
        return len(self._queue)

    def schedule(self, time: float, kind: EventKind, target: int = GLOBAL_TARGET,
                 payload: Any = None) -> SimEvent:
        if not math.isfinite(time):
            raise SchedulingError(f"event time must be finite, got {time!r}")
        if time < self._now:
            raise SchedulingError(
                f"cannot schedule {kind.value} at t={time} before current time t={self._now}")
        event = SimEvent(time=time, seq=self._seq, kind=kind, target=target, payload=payload)
        self._seq += 1
        heapq.heappush(self._queue, (event.time, event.seq, event))
        return event

    def run_until(self, handler: Callable[[SimEvent], None],
                  horizon: float = math.inf,
                  stop: Optional[StopFlag] = None) -> float:
        """Process events in (time, seq) order until the queue empties, the
        horizon is reached, or the stop flag is set.  Returns the final kernel
        time: the horizon if it cut processing short, otherwise the time of
        the last processed event."""
        while self._queue:
            if stop is not None and stop.is_set():
                break
            time, _, event = self._queue[0]
            if time > horizon:
                self._now = max(self._now, horizon)
                break
            heapq.heappop(self._queue)
            self._now = time
            handler(event)
        return self._now
