"""Thin CLI client for the pipeline service.

Commands speak HTTP to the FastAPI app: against ``CKM_SERVICE_URL`` (or
``--server``) when set, otherwise against an in-process ASGI instance so
the CLI works standalone. Exit codes: 0 success, 2 config error,
3 provider error, 4 leakage-guard violation.
"""

from __future__ import annotations

import asyncio
import os
import sys
from pathlib import Path

import click
import httpx

SERVICE_URL_ENV = "CKM_SERVICE_URL"


class ClientError(Exception):
    def __init__(self, message: str, exit_code: int = 1):
        super().__init__(message)
        self.exit_code = exit_code


class ServiceClient:
    """HTTP client for the pipeline service, remote or in-process."""

    def __init__(self, runs_root: str, server_url: str | None = None):
        self.server_url = server_url or os.environ.get(SERVICE_URL_ENV)
        self.runs_root = runs_root
        self._app = None
        if not self.server_url:
            from .service import create_app

            self._app = create_app(runs_root)

    def request(self, method: str, path: str, payload: dict | None = None) -> dict:
        if self.server_url:
            try:
                resp = httpx.request(method, f"{self.server_url}{path}",
                                     json=payload, timeout=None)
            except httpx.HTTPError as err:
                raise ClientError(f"service unreachable: {err}", exit_code=1)
        else:
            resp = self._asgi_request(method, path, payload)
        if resp.status_code >= 400:
            detail = {}
            try:
                detail = resp.json().get("detail", {})
            except ValueError:
                pass
            if isinstance(detail, dict) and detail.get("message"):
                raise ClientError(detail["message"],
                                  exit_code=int(detail.get("exit_code", 1)))
            raise ClientError(f"HTTP {resp.status_code}: {resp.text[:300]}")
        return resp.json()

    def _asgi_request(self, method: str, path: str, payload: dict | None):
        async def go():
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(
                    transport=transport, base_url="http://ckm.service",
                    timeout=None) as client:
                return await client.request(method, path, json=payload)

        return asyncio.run(go())


def _common_options(fn):
    fn = click.option("--runs-root", default="runs", show_default=True,
                      help="Directory holding run artifacts (in-process mode).")(fn)
    fn = click.option("--server", default=None,
                      help=f"Service URL (default: ${SERVICE_URL_ENV} or in-process).")(fn)
    return fn


def _ensure_run(client: ServiceClient, config: str | None, run_id: str | None,
                mock: bool, seed: int | None, allow_same_provider: bool) -> str:
    if config:
        text = Path(config).read_text(encoding="utf-8")
        info = client.request("POST", "/runs", {
            "config_toml": text,
            "mock": mock,
            "seed": seed,
            "allow_same_provider": allow_same_provider,
        })
        if run_id and run_id != info["run_id"]:
            raise ClientError(
                f"--run-id {run_id!r} does not match config run id "
                f"{info['run_id']!r}", exit_code=2)
        return info["run_id"]
    if not run_id:
        raise ClientError("pass --config or --run-id", exit_code=2)
    return run_id


def _topics_list(topics: str | None):
    if not topics:
        return None
    return [t.strip() for t in topics.split(",") if t.strip()]


@click.group()
def main():
    """Sliding-window literature pipeline: init, evolve, evaluate, analyze,
    report."""


def _phase_options(fn):
    fn = click.option("--config", type=click.Path(exists=True, dir_okay=False),
                      help="Run config TOML; creates the run if needed.")(fn)
    fn = click.option("--run-id", default=None, help="Existing run id.")(fn)
    fn = click.option("--mock", is_flag=True,
                      help="Route every provider role to the offline mock.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Override the config seed.")(fn)
    fn = click.option("--jobs", type=int, default=1, show_default=True,
                      help="Topic-level parallelism.")(fn)
    fn = click.option("--topics", default=None,
                      help="Comma-separated topic subset.")(fn)
    fn = click.option("--allow-same-provider", is_flag=True,
                      help="Demote provider-separation violations to warnings.")(fn)
    fn = _common_options(fn)
    return fn


def _run_cmd(fn):
    def wrapper(**kwargs):
        try:
            fn(**kwargs)
        except ClientError as err:
            click.echo(f"error: {err}", err=True)
            sys.exit(err.exit_code)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@main.command()
@_phase_options
@_run_cmd
def init(config, run_id, mock, seed, jobs, topics, allow_same_provider,
         runs_root, server):
    """Cache corpora and build the baseline knowledge state per topic."""
    client = ServiceClient(runs_root, server)
    rid = _ensure_run(client, config, run_id, mock, seed, allow_same_provider)
    result = client.request("POST", f"/runs/{rid}/init",
                            {"jobs": jobs, "topics": _topics_list(topics)})
    for t in result["topics"]:
        state = "skipped" if t["skipped"] else \
            f"{t['files']} file(s) from {t['papers']} paper(s)"
        click.echo(f"init {t['topic']}: {state}")
    click.echo(f"run {rid}: baseline ready")


@main.command()
@click.option("--variant", required=True,
              help="Experimental group: full|lite|batch|abstract|shuffled.")
@_phase_options
@_run_cmd
def evolve(variant, config, run_id, mock, seed, jobs, topics,
           allow_same_provider, runs_root, server):
    """Run the per-window metabolism and hypothesis generation."""
    client = ServiceClient(runs_root, server)
    rid = _ensure_run(client, config, run_id, mock, seed, allow_same_provider)
    result = client.request("POST", f"/runs/{rid}/evolve", {
        "variant": variant, "jobs": jobs, "topics": _topics_list(topics)})
    for t in result["topics"]:
        if t["skipped"]:
            click.echo(f"evolve[{variant}] {t['topic']}: skipped")
        elif t.get("failed"):
            click.echo(f"evolve[{variant}] {t['topic']}: FAILED {t.get('error')}")
        else:
            click.echo(f"evolve[{variant}] {t['topic']}: {t['windows']} window(s), "
                       f"{t['hypotheses']} hypothesis(es)")


@main.command()
@click.option("--variant", "variants", multiple=True,
              help="Variant(s) to evaluate; defaults to all enabled.")
@_phase_options
@_run_cmd
def evaluate(variants, config, run_id, mock, seed, jobs, topics,
             allow_same_provider, runs_root, server):
    """Judge hypotheses against the strictly-future validation corpus."""
    client = ServiceClient(runs_root, server)
    rid = _ensure_run(client, config, run_id, mock, seed, allow_same_provider)
    result = client.request("POST", f"/runs/{rid}/evaluate", {
        "variants": list(variants) or None, "jobs": jobs,
        "topics": _topics_list(topics)})
    for name, agg in sorted(result["variants"].items()):
        click.echo(
            f"evaluate[{name}]: yield {agg['yield_mean']:.1f}, "
            f"hit rate {agg['hit_rate_mean']:.1f}%, coverage {agg['coverage']}, "
            f"unique hits {agg['unique_hits']}")


@main.command()
@_phase_options
@_run_cmd
def analyze(config, run_id, mock, seed, jobs, topics, allow_same_provider,
            runs_root, server):
    """Emit drift, crosstab, quadrant, window, and diagnostics reports."""
    client = ServiceClient(runs_root, server)
    rid = _ensure_run(client, config, run_id, mock, seed, allow_same_provider)
    result = client.request("POST", f"/runs/{rid}/analyze")
    for f in result["files"]:
        click.echo(f"analysis: {f}")


@main.command()
@_phase_options
@_run_cmd
def report(config, run_id, mock, seed, jobs, topics, allow_same_provider,
           runs_root, server):
    """Consolidated cross-variant comparison and token efficiency."""
    client = ServiceClient(runs_root, server)
    rid = _ensure_run(client, config, run_id, mock, seed, allow_same_provider)
    result = client.request("POST", f"/runs/{rid}/report")
    for row in result["comparisons"]:
        d = row["cohens_d"]
        click.echo(
            f"{row['comparison']} {row['metric']}: "
            f"{row['mean_a']:.2f} vs {row['mean_b']:.2f} "
            f"(d={'n/a' if d is None else f'{d:+.2f}'}, p={row['p_value']:.3g})")
    for row in result["tokens"]:
        per_hyp = row["tokens_per_hypothesis"]
        click.echo(
            f"tokens[{row['variant']}]: total {row['tokens']}, "
            f"per hypothesis {'n/a' if per_hyp is None else f'{per_hyp:.0f}'}")
    for f in result["files"]:
        click.echo(f"report: {f}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8337, show_default=True)
@_common_options
def serve(host, port, runs_root, server):
    """Run the pipeline service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(runs_root), host=host, port=port)


if __name__ == "__main__":
    main()
