"""Retrieval engine: wires calibration, projection, contextualization,
expansion, and scoring into one immutable, shareable object.

Query preparation (centering, contextualization) is database-independent;
expansion and scoring happen per candidate database at rank time.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .calibration import CalibrationStats
from .config import EngineConfig
from .context import ContextualizationConfig, contextualize, passthrough_text
from .exceptions import ConfigDependencyViolation, DimMismatch
from .expansion import ExpansionConfig, expand_query
from .projection import ProjectionOperator
from .scoring import (
    FusionConfig,
    QueryBundle,
    ScoredItem,
    check_stats_consistency,
    rank_database,
)
from .store import EmbeddingSet


class RetrievalEngine:
    """Composed-query scorer over raw stored embeddings.

    Construction validates the toggle dependency rules and that the
    calibration stats were measured in the same space the engine scores in.
    """

    def __init__(
        self,
        config: EngineConfig,
        stats: Optional[CalibrationStats] = None,
        proj: Optional[ProjectionOperator] = None,
        embedder=None,
        corpus_terms: Optional[Sequence[str]] = None,
    ):
        config.validate()
        check_stats_consistency(config, stats, proj)
        if config.contextualization and not corpus_terms:
            raise ConfigDependencyViolation(
                "contextualization requires positive-corpus terms"
            )
        if stats is not None and proj is not None and stats.dim != proj.dim:
            raise DimMismatch(
                f"stats dim {stats.dim} != projection dim {proj.dim}"
            )
        self.config = config
        self.stats = stats
        self.proj = proj
        self.embedder = embedder
        self.corpus_terms = list(corpus_terms) if corpus_terms else []
        self._context_cache: dict[tuple, np.ndarray] = {}

    # -- effective means (zero when centering is disabled) -----------------

    def _mu_image(self, d: int) -> np.ndarray:
        if self.config.centering and self.stats is not None:
            return self.stats.mu_image
        return np.zeros(d, dtype=np.float64)

    def _mu_text(self, d: int) -> np.ndarray:
        if self.config.centering and self.stats is not None:
            return self.stats.mu_text
        return np.zeros(d, dtype=np.float64)

    # -- query preparation ---------------------------------------------------

    def prepare_image_query(self, q_raw: np.ndarray) -> np.ndarray:
        q_raw = np.asarray(q_raw, dtype=np.float64)
        return q_raw - self._mu_image(q_raw.shape[0])

    def prepare_text_query(
        self,
        text_query: Optional[str] = None,
        text_embedding: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Centered text-side query vector.

        With contextualization enabled the raw string is composed with corpus
        terms and embedded; otherwise a precomputed embedding (or a single
        embedder call for the raw string) is centered as-is.
        """
        if self.config.contextualization:
            if text_query is None:
                raise ConfigDependencyViolation(
                    "contextualization needs the raw text query string"
                )
            if self.embedder is None:
                raise ConfigDependencyViolation(
                    "contextualization needs an embedder client"
                )
            cfg = ContextualizationConfig(
                n_phrases=self.config.n_phrases, rng_seed=self.config.rng_seed
            )
            key = (text_query, cfg.n_phrases, cfg.rng_seed)
            if key not in self._context_cache:
                mu = self._mu_text(self.embedder.dim)
                self._context_cache[key] = contextualize(
                    text_query, self.corpus_terms, self.embedder, mu, cfg
                )
            return self._context_cache[key]

        if text_embedding is None:
            if text_query is None:
                raise ConfigDependencyViolation(
                    "a text query string or embedding is required"
                )
            if self.embedder is None:
                raise ConfigDependencyViolation(
                    "no embedder client to embed the text query"
                )
            text_embedding = self.embedder.embed_text([text_query])[0]
        text_embedding = np.asarray(text_embedding, dtype=np.float64)
        return passthrough_text(
            text_embedding, self._mu_text(text_embedding.shape[0])
        )

    def prepare_query(
        self,
        image_query_raw: np.ndarray,
        text_query: Optional[str] = None,
        text_embedding: Optional[np.ndarray] = None,
    ) -> QueryBundle:
        return QueryBundle(
            q_v_centered=self.prepare_image_query(image_query_raw),
            q_t_centered=self.prepare_text_query(text_query, text_embedding),
        )

    # -- ranking -------------------------------------------------------------

    def rank(
        self,
        query: QueryBundle,
        database: EmbeddingSet,
        fusion: Optional[FusionConfig] = None,
    ) -> list[ScoredItem]:
        """Rank one candidate database for a prepared query."""
        if fusion is None:
            fusion = FusionConfig(harris_lambda=self.config.harris_lambda)
        q_v = query.q_v_centered
        if self.config.query_expansion and self.config.k_neighbors > 0:
            q_v = expand_query(
                q_v,
                database,
                self._mu_image(database.dim),
                self.proj if self.config.projection else None,
                ExpansionConfig(
                    k_neighbors=self.config.k_neighbors, beta=self.config.beta
                ),
            )
            query = QueryBundle(q_v_centered=q_v, q_t_centered=query.q_t_centered)
        return rank_database(
            query, database, self.stats, self.proj, self.config, fusion
        )

    def fingerprints(self) -> dict:
        """Input/config fingerprints echoed into every report."""
        return {
            "config": self.config.fingerprint(),
            "projection": None if self.proj is None else self.proj.fingerprint,
            "stats_projection": None
            if self.stats is None
            else self.stats.projection_fingerprint,
        }
