"""HTTP review service over a CandidateStore.

JSON API under /api plus an optional static single-page UI mounted at the
root. Error mapping: unknown candidate 404, readable-candidate-but-missing
source image 410, malformed filters or decisions 400.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .triage import (CandidateStore, ReviewVerdict, SourceGoneError,
                     UnknownCandidateError, record_to_dict)

log = logging.getLogger(__name__)


class VerdictBody(BaseModel):
    decision: str
    reviewer: str = ""
    notes: str = ""


def create_app(store: CandidateStore, ui_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="sartriage review")

    @app.get("/api/candidates")
    def list_candidates(status: Optional[str] = None,
                        source: Optional[str] = None, page: int = 1,
                        page_size: int = 50):
        try:
            rows, total = store.list_candidates(status=status, source=source,
                                                page=page, page_size=page_size)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"candidates": [record_to_dict(r) for r in rows],
                "page": page, "page_size": page_size, "total": total}

    @app.get("/api/candidates/{candidate_id}")
    def get_candidate(candidate_id: str):
        try:
            return record_to_dict(store.get(candidate_id))
        except UnknownCandidateError:
            raise HTTPException(status_code=404,
                                detail=f"unknown candidate {candidate_id}")

    @app.get("/api/candidates/{candidate_id}/crop")
    def get_crop(candidate_id: str, context: int = 128):
        if context < 0:
            raise HTTPException(status_code=400,
                                detail="context must be >= 0")
        try:
            png = store.get_candidate_crop(candidate_id, context_px=context)
        except UnknownCandidateError:
            raise HTTPException(status_code=404,
                                detail=f"unknown candidate {candidate_id}")
        except SourceGoneError as exc:
            raise HTTPException(status_code=410, detail=str(exc))
        return Response(content=png, media_type="image/png")

    @app.post("/api/candidates/{candidate_id}/verdict")
    def post_verdict(candidate_id: str, body: VerdictBody):
        verdict = ReviewVerdict(candidate_id=candidate_id,
                                decision=body.decision,
                                reviewer=body.reviewer, notes=body.notes)
        try:
            record = store.record_verdict(verdict)
        except UnknownCandidateError:
            raise HTTPException(status_code=404,
                                detail=f"unknown candidate {candidate_id}")
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return record_to_dict(record)

    @app.get("/api/export/elevated")
    def export_elevated():
        return JSONResponse(content=store.export_elevated(),
                            media_type="application/geo+json")

    @app.get("/api/stats")
    def stats():
        return store.stats()

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")
    return app
