"""Per-modality similarity, min-normalization, fusion rules, and ranking.

Image similarity is a projected dot product, computed against the raw stored
rows through the query-side identity so the index is never rewritten. Text
similarity is a plain dot product against centered rows. Min-normalization
maps each modality's empirical minimum to 0 and zero similarity to 1, after
which scores are fused multiplicatively with a balance penalty or by any of
the baseline rules.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .calibration import CalibrationStats
from .config import EngineConfig
from .exceptions import (
    ConfigDependencyViolation,
    DimMismatch,
    FingerprintMismatch,
    InvalidWeight,
    NegativeInputForGeometricBlend,
    NonNegativeMinStat,
)
from .projection import ProjectionOperator, query_side_from_centered
from .store import EmbeddingSet

FUSION_MODES = (
    "basic_harris",
    "text_only",
    "image_only",
    "sum",
    "product",
    "weighted_sum",
    "weighted_product",
)


@dataclass(frozen=True)
class FusionConfig:
    """Fusion rule selector; ``weight`` applies to the weighted modes only."""

    mode: str = "basic_harris"
    harris_lambda: float = 0.1
    weight: Optional[float] = None

    def __post_init__(self):
        if self.mode not in FUSION_MODES:
            raise ValueError(f"unknown fusion mode {self.mode!r}")
        if self.mode.startswith("weighted"):
            if self.weight is None or not 0.0 <= self.weight <= 1.0:
                raise InvalidWeight(
                    f"{self.mode} requires a weight in [0, 1], got {self.weight}"
                )


@dataclass(frozen=True)
class ScoredItem:
    """Per-item scores: raw, normalized (when applied), and fused."""

    id: str
    s_v: float
    s_t: float
    s_v_norm: Optional[float]
    s_t_norm: Optional[float]
    fused: float

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "s_v": self.s_v,
            "s_t": self.s_t,
            "s_v_norm": self.s_v_norm,
            "s_t_norm": self.s_t_norm,
            "fused": self.fused,
        }


@dataclass(frozen=True)
class QueryBundle:
    """Prepared composed query: centered (possibly expanded) image vector and
    centered (possibly contextualized) text vector."""

    q_v_centered: np.ndarray
    q_t_centered: np.ndarray


def score_image(x_raw: np.ndarray, w: np.ndarray, c: float) -> float:
    """Projected image similarity via the query-side form: <x, w> - c."""
    x_raw = np.asarray(x_raw, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x_raw.shape != w.shape:
        raise DimMismatch(f"row {x_raw.shape} vs query-side vector {w.shape}")
    return float(x_raw @ w - c)


def score_text(
    x_raw: np.ndarray, mu_image: np.ndarray, q_t_centered: np.ndarray
) -> float:
    """Text similarity <x - mu, q_t> against the centered database row."""
    x_raw = np.asarray(x_raw, dtype=np.float64)
    mu_image = np.asarray(mu_image, dtype=np.float64)
    q_t_centered = np.asarray(q_t_centered, dtype=np.float64)
    if x_raw.shape != mu_image.shape or x_raw.shape != q_t_centered.shape:
        raise DimMismatch(
            f"row {x_raw.shape}, mean {mu_image.shape}, query {q_t_centered.shape}"
        )
    return float((x_raw - mu_image) @ q_t_centered)


def min_normalize(
    s: Union[float, np.ndarray], s_min: float
) -> Union[float, np.ndarray]:
    """Affine map (s - s_min) / |s_min|: s_min -> 0 and 0 -> 1."""
    if not s_min < 0:
        raise NonNegativeMinStat(f"s_min must be negative, got {s_min}")
    out = (np.asarray(s, dtype=np.float64) - s_min) / abs(s_min)
    return float(out) if np.isscalar(s) else out


def harris_fuse(
    s_v_norm: Union[float, np.ndarray],
    s_t_norm: Union[float, np.ndarray],
    lam: float,
) -> Union[float, np.ndarray]:
    """Conjunction score s_v * s_t - lam * (s_v + s_t)^2.

    The product rewards joint activation; the squared-sum penalty suppresses
    items dominated by a single modality.
    """
    s_v = np.asarray(s_v_norm, dtype=np.float64)
    s_t = np.asarray(s_t_norm, dtype=np.float64)
    out = s_v * s_t - lam * (s_v + s_t) ** 2
    if np.isscalar(s_v_norm) and np.isscalar(s_t_norm):
        return float(out)
    return out


def baseline_fuse(
    s_v: Union[float, np.ndarray],
    s_t: Union[float, np.ndarray],
    cfg: FusionConfig,
) -> Union[float, np.ndarray]:
    """Unimodal, additive, multiplicative, and weighted fusion baselines.

    ``weighted_product`` is the sign-preserving geometric blend
    s_t^(1-w) * s_v^w and is only defined on non-negative (min-normalized)
    inputs.
    """
    scalar = np.isscalar(s_v) and np.isscalar(s_t)
    s_v = np.asarray(s_v, dtype=np.float64)
    s_t = np.asarray(s_t, dtype=np.float64)
    if cfg.mode == "text_only":
        out = s_t + 0.0
    elif cfg.mode == "image_only":
        out = s_v + 0.0
    elif cfg.mode == "sum":
        out = s_v + s_t
    elif cfg.mode == "product":
        out = s_v * s_t
    elif cfg.mode == "weighted_sum":
        out = (1.0 - cfg.weight) * s_t + cfg.weight * s_v
    elif cfg.mode == "weighted_product":
        if (s_v < 0).any() or (s_t < 0).any():
            raise NegativeInputForGeometricBlend(
                "geometric blend needs non-negative (min-normalized) scores"
            )
        out = s_t ** (1.0 - cfg.weight) * s_v ** cfg.weight
    else:
        raise ValueError(f"{cfg.mode!r} is not a baseline mode")
    return float(out) if scalar else out


def check_stats_consistency(
    config: EngineConfig,
    stats: Optional[CalibrationStats],
    proj: Optional[ProjectionOperator],
) -> None:
    """Refuse stats measured in a different space than the scores.

    Only the min statistics are space-dependent, so the check applies when
    min-normalization is active: projected stats require the same projection
    operator (by fingerprint); unprojected stats require projection disabled.
    """
    if config.centering or config.min_norm:
        if stats is None:
            raise ConfigDependencyViolation(
                "centering/min_norm require calibration stats"
            )
    if config.projection and proj is None:
        raise ConfigDependencyViolation("projection enabled but no operator given")
    if not config.min_norm or stats is None:
        return
    if stats.projected:
        if not config.projection or proj is None:
            raise FingerprintMismatch(
                "stats were measured in projected space but projection is off"
            )
        if stats.projection_fingerprint != proj.fingerprint:
            raise FingerprintMismatch(
                "stats were measured under a different projection operator"
            )
    elif config.projection:
        raise FingerprintMismatch(
            "stats were measured unprojected but projection is on"
        )


def rank_database(
    query: QueryBundle,
    database: EmbeddingSet,
    stats: Optional[CalibrationStats],
    proj: Optional[ProjectionOperator],
    config: EngineConfig,
    fusion: FusionConfig,
) -> list[ScoredItem]:
    """Score every database row, fuse, and sort.

    Descending by fused score, ties broken by ascending id; accumulation in
    float64 regardless of the float32 storage.
    """
    config.validate()
    check_stats_consistency(config, stats, proj)

    d = database.dim
    if query.q_v_centered.shape != (d,) or query.q_t_centered.shape != (d,):
        raise DimMismatch("query bundle does not match database dimension")

    mu = (
        stats.mu_image
        if (config.centering and stats is not None)
        else np.zeros(d, dtype=np.float64)
    )
    rows = database.matrix.astype(np.float64)

    w, c = query_side_from_centered(
        query.q_v_centered, mu, proj if config.projection else None
    )
    s_v = rows @ w - c
    s_t = rows @ query.q_t_centered - float(mu @ query.q_t_centered)

    if config.min_norm:
        s_v_norm = min_normalize(s_v, stats.s_v_min)
        s_t_norm = min_normalize(s_t, stats.s_t_min)
        fuse_v, fuse_t = s_v_norm, s_t_norm
    else:
        s_v_norm = s_t_norm = None
        fuse_v, fuse_t = s_v, s_t

    if fusion.mode == "basic_harris":
        lam = fusion.harris_lambda if config.harris else 0.0
        fused = harris_fuse(fuse_v, fuse_t, lam)
    else:
        fused = baseline_fuse(fuse_v, fuse_t, fusion)

    order = np.lexsort((np.asarray(database.ids), -fused))
    return [
        ScoredItem(
            id=database.ids[i],
            s_v=float(s_v[i]),
            s_t=float(s_t[i]),
            s_v_norm=None if s_v_norm is None else float(s_v_norm[i]),
            s_t_norm=None if s_t_norm is None else float(s_t_norm[i]),
            fused=float(fused[i]),
        )
        for i in order
    ]
