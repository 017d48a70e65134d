"""Text-query contextualization.

Short text queries ("during sunset") are out-of-distribution for encoders
trained on caption-like sentences. Composing them with object-corpus terms
("dog during sunset") and averaging the centered embeddings of many such
phrases yields a more robust text-side query vector.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .calibration import center
from .exceptions import DimMismatch, EmptyCorpus


@dataclass(frozen=True)
class ContextualizationConfig:
    """Phrase sampling knobs. 100 phrases is the fixed default."""

    n_phrases: int = 100
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_phrases < 1:
            raise ValueError(f"n_phrases must be >= 1, got {self.n_phrases}")


def compose_phrases(
    query_text: str,
    corpus_terms: Sequence[str],
    cfg: ContextualizationConfig,
) -> list[str]:
    """Sample n_phrases composed phrases, deterministic under the seed.

    Each phrase joins one uniformly drawn term (with replacement) either
    before or after the query text, placement drawn per phrase.
    """
    if not corpus_terms:
        raise EmptyCorpus("no corpus terms to compose with")
    rng = np.random.default_rng(cfg.rng_seed)
    phrases = []
    for _ in range(cfg.n_phrases):
        term = corpus_terms[int(rng.integers(len(corpus_terms)))]
        prefix = bool(rng.integers(2))
        if prefix:
            phrases.append(f"{term} {query_text}")
        else:
            phrases.append(f"{query_text} {term}")
    return phrases


def contextualize(
    query_text: str,
    corpus_terms: Sequence[str],
    embedder,
    mu_text: np.ndarray,
    cfg: ContextualizationConfig,
) -> np.ndarray:
    """Centered mean embedding over composed phrases.

    ``embedder`` is any client exposing ``embed_text(list[str]) ->
    list[np.ndarray]``. By linearity the result equals
    mean(embeddings) - mu_text.
    """
    phrases = compose_phrases(query_text, corpus_terms, cfg)
    vectors = embedder.embed_text(phrases)
    stacked = np.asarray(vectors, dtype=np.float64)
    return center(stacked.mean(axis=0), mu_text)


def passthrough_text(query_embedding: np.ndarray, mu_text: np.ndarray) -> np.ndarray:
    """Centered raw text embedding (contextualization disabled path)."""
    query_embedding = np.asarray(query_embedding, dtype=np.float64)
    mu_text = np.asarray(mu_text, dtype=np.float64)
    if query_embedding.shape != mu_text.shape:
        raise DimMismatch(
            f"embedding {query_embedding.shape} vs mean {mu_text.shape}"
        )
    return query_embedding - mu_text
