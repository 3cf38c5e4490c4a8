"""HTTP/JSON API exposing a campaign to the browser UI.

Authentication is a pre-shared per-reviewer token from the campaign config,
sent as an ``X-Review-Token`` header (or ``?token=`` for image tags).
Reads never mutate state; page submission is delegated atomically to the
store, with optimistic versioning so concurrent duplicate submissions of
the same page version resolve to exactly one winner.
"""

from __future__ import annotations

import hmac
import mimetypes
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Header, HTTPException, Query, Request
from fastapi.responses import FileResponse, JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .allocation import Page
from .corpus import Corpus
from .store import ReviewStore, SubmissionError, VersionConflict

DURATION_SKEW_FACTOR = 1.2  # client-clock tolerance against server wall time
DURATION_SKEW_SLACK_S = 2.0


@dataclass
class CampaignRuntime:
    """Everything the service needs to answer requests."""

    corpus: Corpus
    pages: list[Page]
    store: ReviewStore
    tokens: dict[str, str]  # reviewer_id -> token
    images_root: Path
    ui_dist: Path | None = None
    served_at: dict[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        self.pages_by_reviewer: dict[str, list[Page]] = {}
        self.page_index: dict[tuple[str, str], Page] = {}
        self.reviewer_images: dict[str, set[str]] = {}
        for page in self.pages:
            self.pages_by_reviewer.setdefault(page.reviewer_id, []).append(page)
            self.page_index[(page.reviewer_id, page.page_id)] = page
            self.reviewer_images.setdefault(page.reviewer_id, set()).update(
                page.image_ids
            )
        self.reviewer_by_token = {token: rid for rid, token in self.tokens.items()}


class PageSubmission(BaseModel):
    labels: dict[str, str] = {}
    duration: float
    version: int = 0


def _progress(runtime: CampaignRuntime, reviewer_id: str) -> dict:
    pages = runtime.pages_by_reviewer.get(reviewer_id, [])
    done = runtime.store.completed_pages(reviewer_id)
    images_total = sum(len(p) for p in pages)
    images_done = sum(len(p) for p in pages if p.page_id in done)
    return {
        "pages_done": len(done),
        "pages_total": len(pages),
        "images_done": images_done,
        "images_total": images_total,
    }


def _page_payload(runtime: CampaignRuntime, page: Page) -> dict:
    prior = runtime.store.latest_page_labels(page.reviewer_id, page.page_id)
    return {
        "page_id": page.page_id,
        "reviewer_id": page.reviewer_id,
        "model_label": page.model_label,
        "version": runtime.store.page_version(page.reviewer_id, page.page_id),
        "images": [
            {
                "image_id": entry.image_id,
                "url": f"/api/images/{entry.image_id}",
                "slot": slot,
                "prior_label": prior.get(entry.image_id, ""),
            }
            for slot, entry in enumerate(page.entries)
        ],
        "progress": _progress(runtime, page.reviewer_id),
    }


def create_app(runtime: CampaignRuntime) -> FastAPI:
    app = FastAPI(title="hitl-review", docs_url=None, redoc_url=None)

    def authenticate(reviewer_id: str, token: str | None) -> None:
        expected = runtime.tokens.get(reviewer_id)
        if expected is None or token is None or not hmac.compare_digest(expected, token):
            raise HTTPException(status_code=401, detail="bad reviewer token")

    @app.get("/api/reviewers/{reviewer_id}/pages/next")
    def next_page(reviewer_id: str, x_review_token: str | None = Header(None)):
        authenticate(reviewer_id, x_review_token)
        pages = runtime.pages_by_reviewer.get(reviewer_id, [])
        done = runtime.store.completed_pages(reviewer_id)
        for page in pages:
            if page.page_id not in done:
                runtime.served_at[(reviewer_id, page.page_id)] = time.time()
                return _page_payload(runtime, page)
        return Response(status_code=204)

    @app.get("/api/reviewers/{reviewer_id}/pages/{page_id}")
    def get_page(
        reviewer_id: str, page_id: str, x_review_token: str | None = Header(None)
    ):
        authenticate(reviewer_id, x_review_token)
        page = runtime.page_index.get((reviewer_id, page_id))
        if page is None:
            raise HTTPException(status_code=404, detail="unknown page")
        runtime.served_at[(reviewer_id, page_id)] = time.time()
        return _page_payload(runtime, page)

    @app.post("/api/reviewers/{reviewer_id}/pages/{page_id}")
    def submit_page(
        reviewer_id: str,
        page_id: str,
        body: PageSubmission,
        x_review_token: str | None = Header(None),
    ):
        authenticate(reviewer_id, x_review_token)
        page = runtime.page_index.get((reviewer_id, page_id))
        if page is None:
            raise HTTPException(status_code=404, detail="unknown page")
        served = runtime.served_at.get((reviewer_id, page_id))
        if served is not None:
            elapsed = time.time() - served
            limit = elapsed * DURATION_SKEW_FACTOR + DURATION_SKEW_SLACK_S
            if body.duration > limit:
                raise HTTPException(
                    status_code=422,
                    detail=f"duration {body.duration:.1f}s exceeds wall-clock bound {limit:.1f}s",
                )
        try:
            version = runtime.store.submit_page(
                reviewer_id,
                page,
                body.labels,
                duration=body.duration,
                expected_version=body.version,
            )
        except VersionConflict as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except SubmissionError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {
            "ok": True,
            "version": version,
            "progress": _progress(runtime, reviewer_id),
        }

    @app.get("/api/images/{image_id}")
    def get_image(
        image_id: str,
        request: Request,
        x_review_token: str | None = Header(None),
        token: str | None = Query(None),
    ):
        presented = x_review_token or token
        reviewer_id = runtime.reviewer_by_token.get(presented or "")
        if reviewer_id is None:
            raise HTTPException(status_code=401, detail="bad reviewer token")
        # only images on the requesting reviewer's own pages are served
        if image_id not in runtime.reviewer_images.get(reviewer_id, set()):
            raise HTTPException(status_code=404, detail="unknown image")
        image = runtime.corpus.get(image_id)
        if image is None:
            raise HTTPException(status_code=404, detail="unknown image")
        root = runtime.images_root.resolve()
        target = (root / image.image_ref).resolve()
        if not target.is_relative_to(root) or not target.is_file():
            raise HTTPException(status_code=404, detail="unknown image")
        media_type = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        return FileResponse(target, media_type=media_type)

    @app.exception_handler(404)
    def not_found(request: Request, exc):  # uniform JSON errors for the UI
        detail = getattr(exc, "detail", "not found")
        return JSONResponse(status_code=404, content={"detail": detail})

    if runtime.ui_dist is not None and runtime.ui_dist.is_dir():
        app.mount("/", StaticFiles(directory=runtime.ui_dist, html=True), name="ui")

    return app
