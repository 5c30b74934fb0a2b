"""HTTP API for ingestion, analysis, the review queue, and metrics.

The review UI drives these endpoints exclusively; every mutation funnels
into the store's single-writer log. Errors are JSON objects of the form
{"code", "message", "field"?}.
"""

from __future__ import annotations

import os
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from corax.errors import (
    ConflictError,
    CoraxError,
    StateError,
    ValidationError,
)
from corax.images import write_png
from corax.oracle import GroundTruthBackend, OracleBackend, make_backend
from corax.referral import Decision, GrounderConfig, ReferralStatus, RoiMode
from corax.store import CaseStore

DEFAULT_PORT = 8741


def _error(status: int, code: str, message: str, field: str | None = None) -> JSONResponse:
    body = {"code": code, "message": message}
    if field:
        body["field"] = field
    return JSONResponse(status_code=status, content=body)


def _grounder_for(store: CaseStore, case_id: str, config: dict) -> GrounderConfig:
    kind = config.get("grounder", "auto")
    if kind == "auto":
        bundle = store.bundles[case_id]
        kind = "transcript" if bundle.transcript is not None else "dwell"
    return GrounderConfig(kind=kind)


def create_app(store: CaseStore, pipeline_config: dict | None = None) -> FastAPI:
    config = pipeline_config or {}
    backend: OracleBackend = (
        make_backend(config) if "backend" in config else GroundTruthBackend()
    )

    app = FastAPI(title="corax review service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(CoraxError)
    async def corax_error_handler(request: Request, exc: CoraxError):
        if isinstance(exc, ValidationError):
            return _error(422, "validation_error", exc.message, exc.field)
        if isinstance(exc, (ConflictError, StateError)):
            return _error(409, "conflict", str(exc))
        return _error(400, "bad_request", str(exc))

    @app.exception_handler(KeyError)
    async def missing_handler(request: Request, exc: KeyError):
        return _error(404, "not_found", f"unknown resource {exc.args[0]!r}")

    @app.post("/cases", status_code=201)
    async def ingest_case(doc: dict):
        case_id, _created = store.ingest(doc)
        return {"case_id": case_id}

    def _enum_param(enum_cls, value: str, field: str):
        try:
            return enum_cls(value)
        except ValueError:
            allowed = ", ".join(e.value for e in enum_cls)
            raise ValidationError(field, f"{value!r} is not one of: {allowed}") from None

    @app.post("/cases/{case_id}/analyze")
    async def analyze(case_id: str, roi_mode: str = "mean"):
        mode = _enum_param(RoiMode, roi_mode, "roi_mode")
        grounder = _grounder_for(store, case_id, config) if case_id in store.bundles \
            else GrounderConfig()
        return store.analyze(case_id, backend, grounder, mode)

    @app.get("/cases/{case_id}/referrals")
    async def case_referrals(case_id: str):
        return [r.to_doc() for r in store.case_referrals(case_id)]

    @app.get("/cases/{case_id}")
    async def case_summary(case_id: str):
        if case_id not in store.bundles:
            raise KeyError(case_id)
        bundle = store.bundles[case_id]
        return {
            "case_id": case_id,
            "report_text": bundle.report.text,
            "total_duration_ms": bundle.scanpath.total_duration_ms,
            "fixations": [
                {"start_ms": f.start_ms, "end_ms": f.end_ms, "x_norm": f.x_norm, "y_norm": f.y_norm}
                for f in bundle.scanpath.fixations
            ],
            "analyzed": case_id in store.analyses,
            "image_url": f"/cases/{case_id}/image",
        }

    @app.get("/referrals")
    async def referrals(status: str | None = None):
        wanted = _enum_param(ReferralStatus, status, "status") if status else None
        return [r.to_doc() for r in store.list_referrals(wanted)]

    @app.post("/referrals/{referral_id}/decision")
    async def decide(referral_id: str, body: dict):
        decision = body.get("decision")
        if decision not in ("accept", "reject"):
            raise ValidationError("decision", "must be 'accept' or 'reject'")
        actor = body.get("actor", "human")
        ref = store.decide(referral_id, Decision(decision), actor)
        return ref.to_doc()

    @app.get("/cases/{case_id}/image")
    async def case_image(case_id: str):
        if case_id not in store.bundles:
            raise KeyError(case_id)
        return Response(content=write_png(store.bundles[case_id].image), media_type="image/png")

    @app.get("/referrals/{referral_id}/roi.png")
    async def roi_png(referral_id: str, mode: str | None = None):
        wanted = _enum_param(RoiMode, mode, "mode") if mode else None
        return Response(content=store.roi_png(referral_id, wanted), media_type="image/png")

    @app.get("/metrics")
    async def metrics():
        report, pending = store.metrics_report()
        return {
            "pending_referrals": pending,
            "report": report.to_doc() if report else None,
        }

    @app.get("/metrics/cdf/ru")
    async def metrics_cdf_ru():
        report, _pending = store.metrics_report()
        lines = ["x,f"]
        if report:
            lines += [f"{x!r},{f!r}" for x, f in report.cdf_ru]
        return Response(content="\n".join(lines) + "\n", media_type="text/csv")

    ui_dir = os.environ.get("CORAX_UI_DIR")
    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def app_from_env() -> FastAPI:
    data_dir = os.environ.get("CORAX_DATA_DIR", "./corax-data")
    return create_app(CaseStore(data_dir))
