"""Image query expansion by softmax-weighted neighbor aggregation.

The centered image query is refined with its top-ranked database neighbors
in projected space, plus the query itself, blended by a soft attention over
the projected similarities. The result stays inside the convex hull of the
participating centered vectors.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .calibration import center_rows
from .exceptions import DimMismatch, EmptyDatabase
from .projection import ProjectionOperator, project_rows
from .store import EmbeddingSet


@dataclass(frozen=True)
class ExpansionConfig:
    """Neighbor count and softmax temperature (beta fixed to 0.1 by default)."""

    k_neighbors: int = 10
    beta: float = 0.1

    def __post_init__(self):
        if self.k_neighbors < 0:
            raise ValueError(f"k_neighbors must be >= 0, got {self.k_neighbors}")
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")


def expansion_members(
    q_centered: np.ndarray,
    database: EmbeddingSet,
    mu_image: np.ndarray,
    proj: Optional[ProjectionOperator],
    cfg: ExpansionConfig,
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Neighbor set and softmax weights backing the expanded query.

    Returns (members, weights, member_ids): the centered top-k neighbor rows
    followed by the centered query itself (id "<query>"), with weights
    softmax(beta * projected similarity) summing to one. Ties in neighbor
    selection break by ascending id.
    """
    q_centered = np.asarray(q_centered, dtype=np.float64)
    if len(database) == 0:
        raise EmptyDatabase("query expansion needs a non-empty database")
    mu_image = np.asarray(mu_image, dtype=np.float64)
    if q_centered.shape != mu_image.shape or q_centered.shape[0] != database.dim:
        raise DimMismatch(
            f"query {q_centered.shape}, mean {mu_image.shape}, "
            f"database dim {database.dim}"
        )

    centered = center_rows(database.matrix, mu_image)
    if proj is not None:
        q_reduced = proj.basis @ q_centered
        sims = project_rows(centered, proj) @ q_reduced
        q_self_sim = float(q_reduced @ q_reduced)
    else:
        sims = centered @ q_centered
        q_self_sim = float(q_centered @ q_centered)

    k = min(cfg.k_neighbors, len(database))
    order = np.lexsort((np.asarray(database.ids), -sims))
    top = order[:k]

    members = np.vstack([centered[top], q_centered])
    member_ids = [database.ids[i] for i in top] + ["<query>"]
    member_sims = np.concatenate([sims[top], [q_self_sim]])

    logits = cfg.beta * member_sims
    logits -= logits.max()  # stable softmax
    weights = np.exp(logits)
    weights /= weights.sum()
    return members, weights, member_ids


def expand_query(
    q_centered: np.ndarray,
    database: EmbeddingSet,
    mu_image: np.ndarray,
    proj: Optional[ProjectionOperator],
    cfg: ExpansionConfig,
) -> np.ndarray:
    """Softmax-weighted mean of the query and its top projected neighbors.

    With k_neighbors == 0 the query is returned unchanged. ``proj`` may be
    None, in which case similarities are taken directly on centered vectors.
    """
    q_centered = np.asarray(q_centered, dtype=np.float64)
    if cfg.k_neighbors == 0:
        return q_centered
    members, weights, _ = expansion_members(
        q_centered, database, mu_image, proj, cfg
    )
    return weights @ members
