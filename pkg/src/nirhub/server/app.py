"""HTTP surface: FastAPI wiring over the service layer, plus the entry point.

All endpoints live under ``/api``; errors are returned as
``{"error_code": ..., "message": ..., "details": {...}}`` with 400 for
validation, 404 for unknown resources, 409 for state/insufficient-data
conflicts, and 422 for preprocessing failures.
"""

from __future__ import annotations

import contextlib
from pathlib import Path

import click
import uvicorn
from fastapi import Body, FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from starlette.concurrency import run_in_threadpool

from nirhub.errors import NirhubError
from nirhub.server.service import DEFAULT_SESSION_TIMEOUT_S, NirhubService

HTTP_STATUS_BY_CODE = {
    "validation": 400,
    "config": 400,
    "not_found": 404,
    "invalid_state": 409,
    "insufficient_data": 409,
    "model_unavailable": 409,
    "preprocess_failed": 422,
    "coverage": 422,
    "degenerate_spectrum": 422,
    "dimension_mismatch": 422,
}


def create_app(
    storage_root: str | Path,
    session_timeout_s: float = DEFAULT_SESSION_TIMEOUT_S,
    static_dir: str | Path | None = None,
) -> FastAPI:
    service = NirhubService(storage_root, session_timeout_s=session_timeout_s)

    @contextlib.asynccontextmanager
    async def lifespan(_: FastAPI):
        yield
        service.close()

    app = FastAPI(title="nirhub", lifespan=lifespan)
    app.state.service = service
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(NirhubError)
    async def nirhub_error_handler(_: Request, exc: NirhubError):
        status = HTTP_STATUS_BY_CODE.get(exc.error_code, 500)
        return JSONResponse(
            status_code=status,
            content={
                "error_code": exc.error_code,
                "message": exc.message,
                "details": exc.details,
            },
        )

    @app.exception_handler(RequestValidationError)
    async def body_error_handler(_: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={
                "error_code": "validation",
                "message": "malformed request body",
                "details": {"errors": [str(e.get("msg", e)) for e in exc.errors()]},
            },
        )

    # -- instances ---------------------------------------------------------

    @app.post("/api/instances", status_code=201)
    def create_instance(request: Request, payload: dict = Body(...)):
        created = service.create_instance(
            name=payload.get("name", ""),
            instructions=payload.get("instructions"),
            pipeline=payload.get("pipeline"),
            min_spectra_per_class=payload.get("min_spectra_per_class"),
            knn_k=payload.get("k"),
            knn_distance=payload.get("distance"),
            in_situ_status=payload.get("in_situ_status"),
        )
        base = str(request.base_url).rstrip("/")
        created["manifest_url"] = base + created["manifest_path"]
        return created

    @app.get("/api/instances")
    def list_instances():
        return service.list_instances()

    @app.get("/api/instances/{slug}/manifest")
    def get_manifest(slug: str):
        return service.get_manifest(slug)

    # -- session protocol ----------------------------------------------------

    @app.post("/api/instances/{slug}/sessions", status_code=201)
    def start_session(slug: str, payload: dict = Body(...)):
        return service.start_session(slug, payload.get("mode", ""))

    @app.post("/api/sessions/{session_id}/scan")
    def submit_scan(session_id: str, payload: dict = Body(...)):
        return service.submit_scan(
            session_id, payload.get("spectrum"), payload.get("label")
        )

    @app.post("/api/sessions/{session_id}/feedback")
    def submit_feedback(session_id: str, payload: dict = Body(...)):
        return service.submit_feedback(
            session_id, payload.get("verdict", ""), payload.get("corrected_label")
        )

    # -- model lifecycle -------------------------------------------------------

    @app.post("/api/instances/{slug}/retrain")
    def retrain(slug: str, payload: dict | None = Body(None)):
        include_unverified = bool((payload or {}).get("include_unverified", False))
        return service.retrain(slug, include_unverified=include_unverified)

    # -- knowledge-base ---------------------------------------------------------

    @app.get("/api/instances/{slug}/spectra")
    def get_spectra(slug: str, status: str | None = None, label: str | None = None):
        return service.get_spectra(slug, status=status, label=label)

    @app.patch("/api/instances/{slug}/spectra/{spectrum_id}")
    def set_spectrum_status(slug: str, spectrum_id: str, payload: dict = Body(...)):
        return service.set_spectrum_status(slug, spectrum_id, payload.get("status", ""))

    @app.delete("/api/instances/{slug}/spectra/{spectrum_id}", status_code=204)
    def delete_spectrum(slug: str, spectrum_id: str):
        service.delete_spectrum(slug, spectrum_id)
        return Response(status_code=204)

    @app.post("/api/instances/{slug}/spectra:bulk", status_code=201)
    async def bulk_import(slug: str, request: Request):
        text = (await request.body()).decode("utf-8")
        return await run_in_threadpool(service.bulk_import_csv, slug, text)

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="dashboard")

    return app


@click.command()
@click.option("--host", default="127.0.0.1", envvar="NIRHUB_HOST", show_default=True)
@click.option("--port", default=8600, type=int, envvar="NIRHUB_PORT", show_default=True)
@click.option(
    "--storage-root",
    default="./nirhub-data",
    envvar="NIRHUB_STORAGE_ROOT",
    show_default=True,
    help="Directory for instance event logs and snapshots.",
)
@click.option(
    "--session-timeout",
    default=DEFAULT_SESSION_TIMEOUT_S,
    type=float,
    envvar="NIRHUB_SESSION_TIMEOUT",
    show_default=True,
    help="Idle seconds before a session expires.",
)
@click.option(
    "--static-dir",
    default=None,
    envvar="NIRHUB_STATIC_DIR",
    help="Optional directory with the built dashboard to serve at /.",
)
def main(host, port, storage_root, session_timeout, static_dir):
    """Run the nirhub server."""
    app = create_app(
        storage_root, session_timeout_s=session_timeout, static_dir=static_dir
    )
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
