"""HTTP surface: POST /v1/embed and GET /v1/health.

Stateless between requests; every returned vector is L2-normalized to unit
length. Oversized batches are rejected whole (413), never truncated; a
corrupt image payload is reported with its index and fails the whole batch.
"""
from __future__ import annotations

import base64
import binascii

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import ServiceConfig
from .encoders import build_encoder


class EmbedRequest(BaseModel):
    modality: str
    inputs: list[str]


def _error(status: int, error: str, message: str, **extra) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": error, "message": message, **extra},
    )


def create_app(config: ServiceConfig) -> FastAPI:
    encoder = build_encoder(config)
    app = FastAPI(title="embedservice")

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "dim": config.dim, "model": encoder.model_id}

    @app.post("/v1/embed")
    def embed(request: EmbedRequest):
        if request.modality not in ("text", "image"):
            return _error(400, "InvalidModality",
                          f"unknown modality {request.modality!r}")
        if len(request.inputs) > config.max_batch:
            return _error(
                413, "OversizedBatch",
                f"batch of {len(request.inputs)} exceeds limit {config.max_batch}",
            )
        if request.modality == "text":
            vectors = encoder.encode_text(request.inputs)
        else:
            payloads = []
            for index, item in enumerate(request.inputs):
                try:
                    payloads.append(base64.b64decode(item, validate=True))
                except (binascii.Error, ValueError) as exc:
                    return _error(400, "InvalidPayload",
                                  f"input {index} is not valid base64: {exc}",
                                  index=index)
            vectors = encoder.encode_image(payloads)
        return {
            "dim": config.dim,
            "model": encoder.model_id,
            "vectors": [[float(x) for x in row] for row in vectors],
        }

    return app
