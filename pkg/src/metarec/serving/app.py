"""HTTP surface of the recommendation service."""

from __future__ import annotations

import os
from typing import Optional

from fastapi import FastAPI, HTTPException, Query, Response
from pydantic import BaseModel

from metarec.serving.service import MAX_ITEMS, RecommendationService, ServiceConfig, ServiceError


class Click(BaseModel):
    request_id: str
    position: int


def create_app(service: RecommendationService) -> FastAPI:
    app = FastAPI(title="metarec", version="1")
    app.state.service = service

    def _fail(exc: ServiceError):
        raise HTTPException(status_code=exc.status, detail=exc.message)

    @app.get("/healthz")
    def health():
        return {"ok": True, "model_loaded": service.model is not None,
                "impressions": len(service.log)}

    @app.get("/v1/recommendations")
    def recommendations(
        title: Optional[str] = Query(None),
        doc_id: Optional[str] = Query(None),
        limit: int = Query(MAX_ITEMS),
    ):
        try:
            return service.handle_recommend(title=title, doc_id=doc_id, limit=limit)
        except ServiceError as exc:
            _fail(exc)

    @app.post("/v1/click", status_code=204)
    def click(body: Click):
        try:
            service.record_click(body.request_id, body.position)
        except ServiceError as exc:
            _fail(exc)
        return Response(status_code=204)

    @app.get("/v1/metrics/ctr")
    def ctr(since: Optional[str] = Query(None)):
        try:
            return service.ctr_report(since).to_dict() | {"click_rejects": service.rejects}
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None

    return app


def app_from_env() -> FastAPI:
    """Build the app from METAREC_* environment variables (for ``uvicorn --factory``)."""
    config = ServiceConfig(
        seed=int(os.environ.get("METAREC_SEED", "0")),
        arm_split=float(os.environ.get("METAREC_ARM_SPLIT", "0.5")),
        timezone=os.environ.get("METAREC_TZ", "UTC"),
    )
    service = RecommendationService.from_store(
        os.environ["METAREC_STORE"],
        model_path=os.environ.get("METAREC_MODEL"),
        log_path=os.environ.get("METAREC_LOG", os.path.join(os.environ["METAREC_STORE"], "events.ndjson")),
        config=config,
    )
    return create_app(service)
