"""Calibration statistics: modality means and minimum-similarity bounds.

Centering subtracts a precomputed per-modality mean so that downstream dot
products compare debiased directions. Min-normalization later needs empirical
lower bounds of those dot products; both bounds must be negative, which any
sufficiently diverse calibration set yields.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import DimMismatch, EmptySet, NonNegativeMin
from .projection import ProjectionOperator
from .store import EmbeddingSet


@dataclass(frozen=True)
class CalibrationStats:
    """Means for centering plus min-similarity statistics for normalization.

    ``projected`` records whether ``s_v_min`` was measured in the projected
    space; ``projection_fingerprint`` pins down which operator was used so a
    scoring engine can refuse mismatched combinations.
    """

    mu_image: np.ndarray
    mu_text: np.ndarray
    s_v_min: float
    s_t_min: float
    projected: bool = False
    projection_fingerprint: Optional[str] = None

    def __post_init__(self):
        mu_image = np.asarray(self.mu_image, dtype=np.float64)
        mu_text = np.asarray(self.mu_text, dtype=np.float64)
        if mu_image.ndim != 1 or mu_text.ndim != 1:
            raise DimMismatch("means must be 1-d vectors")
        if mu_image.shape != mu_text.shape:
            raise DimMismatch(
                f"mean dims differ: {mu_image.shape[0]} vs {mu_text.shape[0]}"
            )
        if not (self.s_v_min < 0 and self.s_t_min < 0):
            raise NonNegativeMin(
                f"min stats must be negative, got "
                f"s_v_min={self.s_v_min}, s_t_min={self.s_t_min}"
            )
        mu_image.setflags(write=False)
        mu_text.setflags(write=False)
        object.__setattr__(self, "mu_image", mu_image)
        object.__setattr__(self, "mu_text", mu_text)

    @property
    def dim(self) -> int:
        return self.mu_image.shape[0]


def compute_mean(emb_set: EmbeddingSet) -> np.ndarray:
    """Coordinate-wise arithmetic mean of all rows, in float64."""
    if len(emb_set) == 0:
        raise EmptySet("cannot average an empty embedding set")
    return emb_set.matrix.astype(np.float64).mean(axis=0)


def center(v: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Element-wise ``v - mu``."""
    v = np.asarray(v, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if v.shape != mu.shape:
        raise DimMismatch(f"cannot center {v.shape} with mean {mu.shape}")
    return v - mu


def center_rows(matrix: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Center every row of ``matrix`` with ``mu`` (float64 result)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if matrix.shape[1] != mu.shape[0]:
        raise DimMismatch(
            f"cannot center rows of width {matrix.shape[1]} with mean "
            f"of width {mu.shape[0]}"
        )
    return matrix - mu


def compute_min_stats(
    image_set: EmbeddingSet,
    text_set: EmbeddingSet,
    mu_image: np.ndarray,
    mu_text: np.ndarray,
    proj: Optional[ProjectionOperator] = None,
) -> tuple[float, float]:
    """Exhaustive pairwise minimum similarities after centering.

    ``s_v_min`` is the minimum over ordered image pairs (i != j) of the
    image-image dot product, computed in projected space when ``proj`` is
    given. ``s_t_min`` is the minimum over all (text, image) pairs of the
    text-image dot product on unprojected centered embeddings. Both must come
    out negative or the calibration set is too uniform to bound anything.
    """
    if len(image_set) < 2:
        raise EmptySet("need at least two calibration images for pairwise mins")
    if len(text_set) < 1:
        raise EmptySet("need at least one calibration text")

    xbar = center_rows(image_set.matrix, mu_image)
    if proj is not None:
        if proj.dim != xbar.shape[1]:
            raise DimMismatch(
                f"projection built for d={proj.dim}, images have d={xbar.shape[1]}"
            )
        ximg = xbar @ proj.basis.T
    else:
        ximg = xbar
    gram = ximg @ ximg.T
    np.fill_diagonal(gram, np.inf)  # self-similarity excluded
    s_v_min = float(gram.min())

    tbar = center_rows(text_set.matrix, mu_text)
    if tbar.shape[1] != xbar.shape[1]:
        raise DimMismatch(
            f"text dim {tbar.shape[1]} != image dim {xbar.shape[1]}"
        )
    s_t_min = float((tbar @ xbar.T).min())

    if s_v_min >= 0 or s_t_min >= 0:
        raise NonNegativeMin(
            f"calibration set not diverse enough: "
            f"s_v_min={s_v_min:.6f}, s_t_min={s_t_min:.6f}"
        )
    return s_v_min, s_t_min


def build_calibration_stats(
    mean_image_set: EmbeddingSet,
    corpus_text_set: EmbeddingSet,
    pair_image_set: EmbeddingSet,
    pair_text_set: EmbeddingSet,
    proj: Optional[ProjectionOperator] = None,
) -> CalibrationStats:
    """Assemble full stats: means from dedicated sets, mins from paired sets.

    ``mean_image_set`` plays the role of the large external image collection;
    ``corpus_text_set`` holds the content-relevant corpus embeddings whose
    mean centers the text side.
    """
    mu_image = compute_mean(mean_image_set)
    mu_text = compute_mean(corpus_text_set)
    s_v_min, s_t_min = compute_min_stats(
        pair_image_set, pair_text_set, mu_image, mu_text, proj
    )
    return CalibrationStats(
        mu_image=mu_image,
        mu_text=mu_text,
        s_v_min=s_v_min,
        s_t_min=s_t_min,
        projected=proj is not None,
        projection_fingerprint=None if proj is None else proj.fingerprint,
    )


def save_calibration_stats(stats: CalibrationStats, path) -> None:
    doc = {
        "dim": stats.dim,
        "mu_image": stats.mu_image.tolist(),
        "mu_text": stats.mu_text.tolist(),
        "s_v_min": stats.s_v_min,
        "s_t_min": stats.s_t_min,
        "projected": stats.projected,
        "projection_fingerprint": stats.projection_fingerprint,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_calibration_stats(path) -> CalibrationStats:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    stats = CalibrationStats(
        mu_image=np.asarray(doc["mu_image"], dtype=np.float64),
        mu_text=np.asarray(doc["mu_text"], dtype=np.float64),
        s_v_min=float(doc["s_v_min"]),
        s_t_min=float(doc["s_t_min"]),
        projected=bool(doc["projected"]),
        projection_fingerprint=doc.get("projection_fingerprint"),
    )
    if stats.dim != int(doc["dim"]):
        raise DimMismatch(f"{path}: declared dim {doc['dim']} != {stats.dim}")
    return stats
