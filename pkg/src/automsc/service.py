"""HTTP classification service: JSON API plus the static suggestion UI.

One immutable model per process, shared read-only across request handlers,
so identical requests produce byte-identical responses and concurrent
requests match serial execution.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import classifier, corpus, features
from .classifier import TrainedModel
from .errors import MalformedField


class ClassifyRequest(BaseModel):
    title: str = ""
    text: str = ""
    mscs: str = ""
    top_k: int = Field(default=5, ge=1)


class Suggestion(BaseModel):
    coarse: int
    score: float


class ClassifyResponse(BaseModel):
    suggestions: list[Suggestion]
    method: str
    model_version: str


def _model_version(model: TrainedModel) -> str:
    return str(model.metadata.get("model_version", "unsaved"))


def create_app(model: TrainedModel | None = None, assets_dir: str | Path | None = None) -> FastAPI:
    """Build the service around an already-loaded model (None = still loading)."""
    app = FastAPI(title="automsc", docs_url=None, redoc_url=None)

    @app.get("/api/v1/health")
    def health() -> dict:
        if model is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return {
            "status": "ok",
            "model_version": _model_version(model),
            "classes": model.n_classes,
        }

    @app.post("/api/v1/classify", response_model=ClassifyResponse)
    def classify(req: ClassifyRequest) -> ClassifyResponse:
        if model is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        if not (req.title or req.text or req.mscs):
            raise HTTPException(
                status_code=400, detail="at least one of title, text, mscs must be non-empty"
            )
        try:
            refs = corpus.parse_ref_mscs(req.mscs, on_malformed="raise")
        except MalformedField as exc:
            raise HTTPException(status_code=400, detail=f"malformed mscs field: {exc}") from exc
        if req.top_k > model.n_classes:
            raise HTTPException(
                status_code=422,
                detail=f"top_k must be between 1 and {model.n_classes}",
            )
        title, text = req.title, req.text
        if model.strip_formulas:
            title, text = features.strip_math(title), features.strip_math(text)
        source = features.compose_fields(title, text, corpus.encode_ref_mscs(refs), model.variant)
        x = features.encode(source, model.vocabulary)
        p = classifier.class_probabilities(model, x)
        order = np.argsort(-p, kind="stable")[: req.top_k]  # ties keep ascending subjects
        return ClassifyResponse(
            suggestions=[
                Suggestion(coarse=int(model.classes[i]), score=float(p[i])) for i in order
            ],
            method=model.method_id,
            model_version=_model_version(model),
        )

    if assets_dir is not None:
        app.mount("/", StaticFiles(directory=str(assets_dir), html=True), name="ui")

    return app
