"""Pydantic request/response models for the pipeline service."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class CreateRunRequest(BaseModel):
    config_toml: str = Field(..., description="Full TOML run configuration")
    mock: bool = False
    seed: Optional[int] = None
    allow_same_provider: bool = False


class CreateRunResponse(BaseModel):
    run_id: str
    created: bool
    topics: list[str]
    variants: list[str]
    mock: bool
    seed: int


class TopicPhaseResult(BaseModel):
    topic: str
    skipped: bool = False
    failed: bool = False
    papers: Optional[int] = None
    files: Optional[int] = None
    windows: Optional[int] = None
    hypotheses: Optional[int] = None
    signals: Optional[int] = None
    error: Optional[str] = None


class InitRequest(BaseModel):
    jobs: int = Field(1, ge=1, le=64)
    topics: Optional[list[str]] = None


class InitResponse(BaseModel):
    run_id: str
    topics: list[TopicPhaseResult]


class EvolveRequest(BaseModel):
    variant: str
    jobs: int = Field(1, ge=1, le=64)
    topics: Optional[list[str]] = None


class EvolveResponse(BaseModel):
    run_id: str
    variant: str
    topics: list[TopicPhaseResult]


class EvaluateRequest(BaseModel):
    variants: Optional[list[str]] = None
    jobs: int = Field(1, ge=1, le=64)
    topics: Optional[list[str]] = None


class EvaluateResponse(BaseModel):
    run_id: str
    variants: dict[str, dict[str, Any]]


class AnalyzeResponse(BaseModel):
    run_id: str
    files: list[str]
    variants: list[str]
    skipped: bool = False


class ReportResponse(BaseModel):
    run_id: str
    variants: list[str]
    comparisons: list[dict[str, Any]]
    tokens: list[dict[str, Any]]
    files: list[str]
    skipped: bool = False


class ErrorDetail(BaseModel):
    code: str
    exit_code: int
    message: str
