"""Client for obtaining embeddings from an external encoder service.

Two transports share one interface: an HTTP endpoint implementing
``POST /v1/embed`` / ``GET /v1/health``, and a file-backed offline store for
fully reproducible runs without any service. Offline entries are keyed by
content hash (sha256 of the UTF-8 text or of the raw image bytes) under
``<root>/text/`` and ``<root>/image/``.
"""
from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .exceptions import DimMismatch, EmbedderUnavailable, MissingOfflineEntry

OFFLINE_PREFIX = "offline:"
ENV_ENDPOINT = "BASIC_EMBEDDER_URL"


def _validate_batch(vectors: list[np.ndarray], dim: int, n_inputs: int):
    if len(vectors) != n_inputs:
        raise EmbedderUnavailable(
            f"service returned {len(vectors)} vectors for {n_inputs} inputs"
        )
    for v in vectors:
        if v.shape != (dim,):
            raise DimMismatch(f"vector of length {v.shape[0]}, expected {dim}")
        if not np.isfinite(v).all():
            raise EmbedderUnavailable("service returned a non-finite vector")
    return vectors


class EmbedderClient:
    """Batch text/image embedding against an HTTP service or offline store.

    ``endpoint`` is either a URL or ``offline:<directory>``. Vectors come
    back float32, unit L2 norm, one per input, order preserved.
    """

    def __init__(
        self,
        endpoint: str,
        dim: int,
        timeout: float = 30.0,
        batch_size: int = 64,
        retries: int = 2,
        retry_backoff: float = 0.1,
    ):
        if dim <= 0:
            raise DimMismatch(f"dim must be positive, got {dim}")
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        self.endpoint = endpoint.rstrip("/")
        self.dim = dim
        self.timeout = timeout
        self.batch_size = batch_size
        self.retries = retries
        self.retry_backoff = retry_backoff
        self._offline_root: Optional[Path] = None
        if endpoint.startswith(OFFLINE_PREFIX):
            self._offline_root = Path(endpoint[len(OFFLINE_PREFIX):])
            if not self._offline_root.is_dir():
                raise EmbedderUnavailable(
                    f"offline store {self._offline_root} is not a directory"
                )

    # -- offline store ---------------------------------------------------

    @staticmethod
    def text_key(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    @staticmethod
    def image_key(payload: bytes) -> str:
        return hashlib.sha256(payload).hexdigest()

    def _offline_lookup(self, modality: str, key: str, label: str) -> np.ndarray:
        path = self._offline_root / modality / f"{key}.json"
        if not path.is_file():
            raise MissingOfflineEntry(
                f"offline store has no {modality} entry for {label!r}"
            )
        doc = json.loads(path.read_text(encoding="utf-8"))
        return np.asarray(doc["vector"], dtype=np.float32)

    # -- HTTP transport ----------------------------------------------------

    def _post_embed(self, modality: str, inputs: list) -> list[np.ndarray]:
        import time

        import requests

        last_exc = None
        for attempt in range(self.retries + 1):
            try:
                resp = requests.post(
                    f"{self.endpoint}/v1/embed",
                    json={"modality": modality, "inputs": inputs},
                    timeout=self.timeout,
                )
                break
            except requests.RequestException as exc:
                last_exc = exc
                if attempt < self.retries:
                    time.sleep(self.retry_backoff * 2**attempt)
        else:
            raise EmbedderUnavailable(
                f"embed request failed after {self.retries + 1} attempts: {last_exc}"
            ) from last_exc
        if resp.status_code != 200:
            raise EmbedderUnavailable(
                f"embed request returned {resp.status_code}: {resp.text[:200]}"
            )
        body = resp.json()
        if int(body["dim"]) != self.dim:
            raise DimMismatch(
                f"service dim {body['dim']} != client dim {self.dim}"
            )
        return [np.asarray(v, dtype=np.float32) for v in body["vectors"]]

    def health(self) -> dict:
        """GET /v1/health; offline stores report synthetically."""
        if self._offline_root is not None:
            return {"status": "ok", "dim": self.dim, "model": "offline"}
        import requests

        try:
            resp = requests.get(f"{self.endpoint}/v1/health", timeout=self.timeout)
        except requests.RequestException as exc:
            raise EmbedderUnavailable(f"health check failed: {exc}") from exc
        if resp.status_code != 200:
            raise EmbedderUnavailable(f"health check returned {resp.status_code}")
        return resp.json()

    # -- public API --------------------------------------------------------

    def embed_text(self, inputs: Sequence[str]) -> list[np.ndarray]:
        """One unit-norm vector per input string, order preserved."""
        inputs = list(inputs)
        if self._offline_root is not None:
            vectors = [
                self._offline_lookup("text", self.text_key(t), t) for t in inputs
            ]
            return _validate_batch(vectors, self.dim, len(inputs))
        vectors = []
        for start in range(0, len(inputs), self.batch_size):
            vectors.extend(self._post_embed("text", inputs[start:start + self.batch_size]))
        return _validate_batch(vectors, self.dim, len(inputs))

    def embed_image(self, inputs: Sequence[bytes]) -> list[np.ndarray]:
        """One unit-norm vector per image payload, order preserved."""
        inputs = list(inputs)
        if self._offline_root is not None:
            vectors = [
                self._offline_lookup("image", self.image_key(p), f"payload[{i}]")
                for i, p in enumerate(inputs)
            ]
            return _validate_batch(vectors, self.dim, len(inputs))
        vectors = []
        for start in range(0, len(inputs), self.batch_size):
            chunk = inputs[start:start + self.batch_size]
            encoded = [base64.b64encode(p).decode("ascii") for p in chunk]
            vectors.extend(self._post_embed("image", encoded))
        return _validate_batch(vectors, self.dim, len(inputs))


def write_offline_entry(root, modality: str, key: str, vector) -> None:
    """Materialize one offline store entry (used by tooling and tests)."""
    folder = Path(root) / modality
    folder.mkdir(parents=True, exist_ok=True)
    vec = np.asarray(vector, dtype=np.float32)
    (folder / f"{key}.json").write_text(
        json.dumps({"vector": [float(x) for x in vec]}), encoding="utf-8"
    )
