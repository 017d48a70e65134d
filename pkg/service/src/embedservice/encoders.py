"""Encoder backends.

The hash featurizer is the zero-dependency default: deterministic signed
feature hashing of character (or byte) n-grams into a fixed width, L2
normalized. It shares one output space for both modalities so the wire
contract can be exercised with no model weights. Real joint encoders load
through the transformers backend when weights are available.
"""
from __future__ import annotations

import hashlib

import numpy as np

from .config import ModelLoadFailure, ServiceConfig

NGRAM = 3


def _accumulate(tokens, dim: int) -> np.ndarray:
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokens:
        digest = hashlib.blake2b(token, digest_size=9).digest()
        bucket = int.from_bytes(digest[:8], "little") % dim
        sign = 1.0 if digest[8] & 1 else -1.0
        vec[bucket] += sign
    return vec


def _finalize(vec: np.ndarray, payload: bytes, dim: int) -> np.ndarray:
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        # degenerate input (too short to produce n-grams): deterministic
        # one-hot fallback so the unit-norm contract still holds
        bucket = int.from_bytes(
            hashlib.blake2b(payload, digest_size=8).digest(), "little"
        ) % dim
        vec = np.zeros(dim, dtype=np.float64)
        vec[bucket] = 1.0
        return vec.astype(np.float32)
    return (vec / norm).astype(np.float32)


class HashedNgramEncoder:
    """Deterministic signed n-gram hashing; no weights, any width."""

    def __init__(self, dim: int):
        self.dim = dim
        self.model_id = "hash-v1"

    def encode_text(self, inputs: list[str]) -> np.ndarray:
        out = np.empty((len(inputs), self.dim), dtype=np.float32)
        for i, text in enumerate(inputs):
            data = text.encode("utf-8")
            padded = b"\x02" + data + b"\x03"
            grams = [padded[j:j + NGRAM] for j in range(len(padded) - NGRAM + 1)]
            out[i] = _finalize(_accumulate(grams, self.dim), data, self.dim)
        return out

    def encode_image(self, inputs: list[bytes]) -> np.ndarray:
        out = np.empty((len(inputs), self.dim), dtype=np.float32)
        for i, payload in enumerate(inputs):
            grams = [payload[j:j + NGRAM] for j in range(len(payload) - NGRAM + 1)]
            out[i] = _finalize(_accumulate(grams, self.dim), payload, self.dim)
        return out


class TransformersClipEncoder:
    """Joint vision-language checkpoint served through transformers."""

    def __init__(self, model_id: str, dim: int, device: str = "cpu"):
        try:
            import io

            import torch
            from PIL import Image
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise ModelLoadFailure(f"transformers backend unavailable: {exc}") from exc
        try:
            self._model = CLIPModel.from_pretrained(model_id).to(device).eval()
            self._processor = CLIPProcessor.from_pretrained(model_id)
        except Exception as exc:
            raise ModelLoadFailure(f"cannot load {model_id!r}: {exc}") from exc
        width = int(self._model.config.projection_dim)
        if width != dim:
            raise ModelLoadFailure(
                f"model width {width} does not match declared dim {dim}"
            )
        self.dim = dim
        self.model_id = model_id
        self._torch = torch
        self._image_cls = Image
        self._io = io
        self._device = device
        torch.manual_seed(0)

    def encode_text(self, inputs: list[str]) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            batch = self._processor(
                text=inputs, return_tensors="pt", padding=True, truncation=True
            ).to(self._device)
            feats = self._model.get_text_features(**batch)
            feats = feats / feats.norm(dim=-1, keepdim=True)
        return feats.cpu().numpy().astype(np.float32)

    def encode_image(self, inputs: list[bytes]) -> np.ndarray:
        torch = self._torch
        images = [
            self._image_cls.open(self._io.BytesIO(payload)).convert("RGB")
            for payload in inputs
        ]
        with torch.no_grad():
            batch = self._processor(images=images, return_tensors="pt").to(
                self._device
            )
            feats = self._model.get_image_features(**batch)
            feats = feats / feats.norm(dim=-1, keepdim=True)
        return feats.cpu().numpy().astype(np.float32)


def build_encoder(config: ServiceConfig):
    if config.model == "hash-v1":
        return HashedNgramEncoder(config.dim)
    return TransformersClipEncoder(config.model, config.dim, config.device)
