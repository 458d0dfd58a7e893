"""HTTP front end: submit simulation runs, fetch metrics and summaries.

Wraps the core package behind a small FastAPI app with an in-memory run store;
start it with `peerfl serve` or `uvicorn peerfl.service:app`.
"""

from __future__ import annotations

import threading
from dataclasses import replace
from typing import Literal

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from .config import PRESETS, ConfigError, parse_config, preset_config, validate
from .flcore import run_simulation
from .metrics import format_csv, format_jsonl, summarize


class RunRequest(BaseModel):
    config: str
    seed: int | None = None


class SummaryModel(BaseModel):
    devices: int
    rounds_completed: int
    final_mean_accuracy: float
    total_sim_time: float
    total_bytes: int
    comm_seconds: float
    compute_seconds: float
    busy_seconds: float
    per_round: list[dict]


class RunResponse(BaseModel):
    run_id: str
    seed: int
    stopped_early: bool
    summary: SummaryModel


class RunListEntry(BaseModel):
    run_id: str
    seed: int
    devices: int
    rounds_completed: int


class ValidateRequest(BaseModel):
    config: str


class ValidateResponse(BaseModel):
    valid: bool
    errors: list[str]


class HealthResponse(BaseModel):
    status: Literal["ok"]
    version: str


class _RunStore:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._runs: dict[str, dict] = {}
        self._counter = 0

    def add(self, entry: dict) -> str:
        with self._lock:
            self._counter += 1
            run_id = f"run-{self._counter:04d}"
            self._runs[run_id] = entry
            return run_id

    def get(self, run_id: str) -> dict:
        with self._lock:
            if run_id not in self._runs:
                raise KeyError(run_id)
            return self._runs[run_id]

    def list(self) -> list[tuple[str, dict]]:
        with self._lock:
            return list(self._runs.items())


def create_app() -> FastAPI:
    from . import __version__

    app = FastAPI(title="peerfl", version=__version__,
                  description="Peer-to-peer federated learning simulator")
    store = _RunStore()

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/validate", response_model=ValidateResponse)
    def validate_config(request: ValidateRequest) -> ValidateResponse:
        try:
            cfg = parse_config(request.config)
        except ConfigError as exc:
            return ValidateResponse(valid=False, errors=[str(exc)])
        errors = validate(cfg)
        return ValidateResponse(valid=not errors, errors=errors)

    @app.get("/presets", response_model=list[str])
    def list_presets() -> list[str]:
        return sorted(PRESETS)

    @app.get("/presets/{name}", response_class=PlainTextResponse)
    def get_preset(name: str) -> str:
        try:
            return preset_config(name)
        except ConfigError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.post("/runs", response_model=RunResponse)
    def submit_run(request: RunRequest) -> RunResponse:
        try:
            cfg = parse_config(request.config)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        if request.seed is not None:
            cfg = replace(cfg, seed=request.seed)
        errors = validate(cfg)
        if errors:
            raise HTTPException(status_code=400, detail="; ".join(errors))
        result = run_simulation(cfg)
        summary = summarize(result.log)
        entry = {
            "seed": cfg.seed,
            "stopped_early": result.stopped_early,
            "summary": summary.to_dict(),
            "csv": format_csv(result.log),
            "jsonl": format_jsonl(result.log),
        }
        run_id = store.add(entry)
        return RunResponse(run_id=run_id, seed=cfg.seed,
                           stopped_early=result.stopped_early,
                           summary=SummaryModel(**entry["summary"]))

    @app.get("/runs", response_model=list[RunListEntry])
    def list_runs() -> list[RunListEntry]:
        return [RunListEntry(run_id=run_id, seed=entry["seed"],
                             devices=entry["summary"]["devices"],
                             rounds_completed=entry["summary"]["rounds_completed"])
                for run_id, entry in store.list()]

    @app.get("/runs/{run_id}", response_model=RunResponse)
    def get_run(run_id: str) -> RunResponse:
        try:
            entry = store.get(run_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no run {run_id!r}") from None
        return RunResponse(run_id=run_id, seed=entry["seed"],
                           stopped_early=entry["stopped_early"],
                           summary=SummaryModel(**entry["summary"]))

    @app.get("/runs/{run_id}/metrics", response_class=PlainTextResponse)
    def get_metrics(run_id: str, format: Literal["csv", "jsonl"] = "csv") -> str:
        try:
            entry = store.get(run_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no run {run_id!r}") from None
        return entry[format]

    return app


app = create_app()
