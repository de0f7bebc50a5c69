"""FastAPI service wrapping the pipeline; the CLI is a thin client of it.

The service owns a runs root (``CKM_RUNS_ROOT`` or the app-factory
argument). Pipeline errors map to structured payloads carrying the exit
code the CLI should use: 2 configuration, 3 provider, 4 leakage.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, ops
from ..errors import CkmError, ConfigError, LeakageError, ProviderError
from . import schemas

log = logging.getLogger(__name__)

RUNS_ROOT_ENV = "CKM_RUNS_ROOT"

_ERROR_CODES = {
    ConfigError: "config_error",
    ProviderError: "provider_error",
    LeakageError: "leakage_violation",
}


def _error_payload(err: CkmError) -> dict:
    code = _ERROR_CODES.get(type(err))
    if code is None:
        for cls, name in _ERROR_CODES.items():
            if isinstance(err, cls):
                code = name
                break
    return {
        "code": code or "pipeline_error",
        "exit_code": getattr(err, "exit_code", 1),
        "message": str(err),
    }


def create_app(runs_root=None) -> FastAPI:
    root = Path(runs_root or os.environ.get(RUNS_ROOT_ENV, "runs"))
    app = FastAPI(title="ckm", version=__version__)
    app.state.runs_root = root

    @app.exception_handler(CkmError)
    async def _ckm_error(request: Request, err: CkmError):
        log.warning("%s: %s", type(err).__name__, err)
        return JSONResponse(status_code=422,
                            content={"detail": _error_payload(err)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(version=__version__)

    @app.post("/runs", response_model=schemas.CreateRunResponse)
    def create_run(req: schemas.CreateRunRequest):
        info = ops.create_run(
            app.state.runs_root, req.config_toml, mock=req.mock,
            seed=req.seed, allow_same_provider=req.allow_same_provider)
        return schemas.CreateRunResponse(**info)

    @app.post("/runs/{run_id}/init", response_model=schemas.InitResponse)
    def init_phase(run_id: str, req: schemas.InitRequest):
        result = ops.run_init(app.state.runs_root, run_id, jobs=req.jobs,
                              topics=req.topics)
        return schemas.InitResponse(
            run_id=run_id,
            topics=[schemas.TopicPhaseResult(**t) for t in result["topics"]])

    @app.post("/runs/{run_id}/evolve", response_model=schemas.EvolveResponse)
    def evolve_phase(run_id: str, req: schemas.EvolveRequest):
        result = ops.run_evolve(app.state.runs_root, run_id,
                                variant_name=req.variant, jobs=req.jobs,
                                topics=req.topics)
        return schemas.EvolveResponse(
            run_id=run_id, variant=result["variant"],
            topics=[schemas.TopicPhaseResult(**t) for t in result["topics"]])

    @app.post("/runs/{run_id}/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate_phase(run_id: str, req: schemas.EvaluateRequest):
        result = ops.run_evaluate(app.state.runs_root, run_id,
                                  variants=req.variants, jobs=req.jobs,
                                  topics=req.topics)
        return schemas.EvaluateResponse(run_id=run_id,
                                        variants=result["variants"])

    @app.post("/runs/{run_id}/analyze", response_model=schemas.AnalyzeResponse)
    def analyze_phase(run_id: str):
        result = ops.run_analyze(app.state.runs_root, run_id)
        return schemas.AnalyzeResponse(**result)

    @app.post("/runs/{run_id}/report", response_model=schemas.ReportResponse)
    def report_phase(run_id: str):
        result = ops.run_report(app.state.runs_root, run_id)
        return schemas.ReportResponse(**result)

    @app.get("/runs/{run_id}/metrics")
    def metrics(run_id: str):
        from ..runstore import RunStore

        store = RunStore(app.state.runs_root, run_id)
        if not store.exists():
            raise ConfigError(f"run {run_id!r} does not exist")
        return store.load_metrics()

    return app
