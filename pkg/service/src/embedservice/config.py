"""Service configuration."""
from __future__ import annotations

from dataclasses import dataclass


class ModelLoadFailure(Exception):
    """The configured encoder model could not be instantiated."""


@dataclass(frozen=True)
class ServiceConfig:
    """Encoder selection plus serving limits.

    ``model`` is either the built-in deterministic featurizer ("hash-v1",
    needs no weights) or a vision-language checkpoint identifier understood
    by the transformers backend (e.g. "openai/clip-vit-large-patch14").
    ``dim`` must match the loaded model's embedding width; for the hash
    backend it simply sets the width.
    """

    model: str = "hash-v1"
    dim: int = 512
    device: str = "cpu"
    max_batch: int = 256
    port: int = 8080

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {self.max_batch}")
