"""Semantic subspace construction from positive/negative text corpora.

The subspace is spanned by the top eigenvectors of a weighted contrastive
covariance: directions with high variance across object-oriented corpus
embeddings and low variance across stylistic ones. Centered image embeddings
are projected onto it; a query-side identity lets the same scores be computed
against the raw stored database without touching the index.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import (
    BadMagic,
    DimMismatch,
    EmptyPositiveCorpus,
    ManifestMismatch,
    NoConvergence,
    NoPositiveEigenvalues,
    NotSymmetric,
)
from .store import EmbeddingSet

PROJ_MAGIC = b"PRJ1"

# Residual tolerance for the eigendecomposition contract, relative to
# max(1, ||C||_F).
EIG_RESIDUAL_TOL = 1e-8
ORTHONORMALITY_TOL = 1e-8


@dataclass(frozen=True)
class CorpusEmbeddings:
    """Text corpus terms with their embeddings; polarity marks C+ vs C-."""

    terms: tuple[str, ...]
    embeddings: EmbeddingSet
    polarity: str  # "positive" | "negative"

    def __post_init__(self):
        if self.polarity not in ("positive", "negative"):
            raise ValueError(f"polarity must be positive/negative, got {self.polarity!r}")
        if len(self.terms) != len(self.embeddings):
            raise DimMismatch(
                f"{len(self.terms)} terms for {len(self.embeddings)} embeddings"
            )
        object.__setattr__(self, "terms", tuple(self.terms))

    def __len__(self) -> int:
        return len(self.terms)


def load_corpus_terms(path) -> list[str]:
    """Read a UTF-8 corpus file, one term per line; blanks and repeats dropped."""
    terms = []
    seen = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        term = line.strip()
        if term and term not in seen:
            seen.add(term)
            terms.append(term)
    return terms


@dataclass(frozen=True)
class ProjectionOperator:
    """Top-k eigenvectors of the contrastive covariance, rows orthonormal.

    ``basis`` has shape (k_effective, d): row i is the i-th retained
    eigenvector, eigenvalues descending and strictly positive.
    """

    basis: np.ndarray
    eigenvalues: np.ndarray
    alpha: float
    k_requested: int
    k_effective: int
    fingerprint: str = ""

    def __post_init__(self):
        basis = np.ascontiguousarray(self.basis, dtype=np.float64)
        eigenvalues = np.ascontiguousarray(self.eigenvalues, dtype=np.float64)
        if basis.ndim != 2 or basis.shape[0] != self.k_effective:
            raise DimMismatch(f"basis shape {basis.shape} vs k_effective {self.k_effective}")
        if eigenvalues.shape != (self.k_effective,):
            raise DimMismatch("one eigenvalue per retained eigenvector required")
        if self.k_effective < 1:
            raise NoPositiveEigenvalues("operator must retain at least one component")
        if (eigenvalues <= 0).any():
            raise NoPositiveEigenvalues("retained eigenvalues must be positive")
        if (np.diff(eigenvalues) > 0).any():
            raise ValueError("eigenvalues must be sorted descending")
        gram = basis @ basis.T
        if np.abs(gram - np.eye(self.k_effective)).max() > 1e-6:
            raise ValueError("basis rows are not orthonormal within 1e-6")
        basis.setflags(write=False)
        eigenvalues.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "eigenvalues", eigenvalues)
        if not self.fingerprint:
            object.__setattr__(self, "fingerprint", self._compute_fingerprint())

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def _compute_fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(PROJ_MAGIC)
        h.update(struct.pack("<IIId", self.dim, self.k_requested,
                             self.k_effective, self.alpha))
        h.update(self.eigenvalues.astype("<f4").tobytes())
        h.update(self.basis.astype("<f4").tobytes(order="C"))
        return h.hexdigest()


def build_contrastive_covariance(
    pos: CorpusEmbeddings,
    neg: Optional[CorpusEmbeddings],
    mu_text: np.ndarray,
    alpha: float,
) -> np.ndarray:
    """Weighted contrastive covariance (1 - alpha) * C+ - alpha * C-.

    Each side is the mean outer product of corpus embeddings centered with
    the text mean. An absent/empty negative corpus contributes a zero matrix.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if len(pos) == 0:
        raise EmptyPositiveCorpus("positive corpus is empty")
    mu_text = np.asarray(mu_text, dtype=np.float64)
    d = mu_text.shape[0]
    if pos.embeddings.dim != d:
        raise DimMismatch(f"positive corpus dim {pos.embeddings.dim} != {d}")

    def moment(corpus: CorpusEmbeddings) -> np.ndarray:
        centered = corpus.embeddings.matrix.astype(np.float64) - mu_text
        return centered.T @ centered / len(corpus)

    cov = (1.0 - alpha) * moment(pos)
    if neg is not None and len(neg) > 0:
        if neg.embeddings.dim != d:
            raise DimMismatch(f"negative corpus dim {neg.embeddings.dim} != {d}")
        cov -= alpha * moment(neg)
    return cov


def _canonical_order(eigenvalues: np.ndarray, vectors: np.ndarray):
    """Descending eigenvalues; exact ties resolved by the sign-normalized
    eigenvector's lexicographic order so repeated runs agree on the basis."""
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    vectors = vectors[order]

    # Sign convention: first coordinate of non-negligible magnitude positive.
    for i in range(vectors.shape[0]):
        v = vectors[i]
        nz = np.nonzero(np.abs(v) > 1e-12)[0]
        pivot = nz[0] if nz.size else 0
        if v[pivot] < 0:
            vectors[i] = -v

    i = 0
    while i < len(eigenvalues):
        j = i + 1
        while j < len(eigenvalues) and eigenvalues[j] == eigenvalues[i]:
            j += 1
        if j - i > 1:
            tie = sorted(range(i, j), key=lambda r: tuple(vectors[r]))
            vectors[i:j] = vectors[tie]
        i = j
    return eigenvalues, vectors


def eigendecompose_symmetric(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full spectrum of a symmetric matrix.

    Returns (eigenvalues descending, eigenvectors as rows) with the residual
    ||C v - lambda v|| and pairwise orthonormality both verified against the
    1e-8 contract (scaled by max(1, ||C||_F)).
    """
    cov = np.asarray(cov, dtype=np.float64)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise NotSymmetric(f"matrix of shape {cov.shape} is not square")
    scale = max(1.0, float(np.linalg.norm(cov)))
    if np.abs(cov - cov.T).max() > EIG_RESIDUAL_TOL * scale:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    sym = (cov + cov.T) / 2.0  # absorb floating-point asymmetry

    try:
        eigenvalues, vec_cols = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    eigenvalues, vectors = _canonical_order(eigenvalues, vec_cols.T.copy())

    residual = np.linalg.norm(sym @ vectors.T - vectors.T * eigenvalues, axis=0)
    if residual.max() > EIG_RESIDUAL_TOL * scale:
        raise NoConvergence(
            f"eigenpair residual {residual.max():.3e} exceeds tolerance"
        )
    gram = vectors @ vectors.T
    if np.abs(gram - np.eye(len(eigenvalues))).max() > ORTHONORMALITY_TOL:
        raise NoConvergence("eigenvectors are not orthonormal within tolerance")
    return eigenvalues, vectors


def build_projection(cov: np.ndarray, k: int, alpha: float) -> ProjectionOperator:
    """Operator keeping the top min(k, #positive eigenvalues) eigenvectors.

    Negative directions mark variance dominated by the stylistic corpus, so
    the requested rank is clamped to the positive part of the spectrum.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    eigenvalues, vectors = eigendecompose_symmetric(cov)
    # Numerical-rank cutoff: eigenvalues indistinguishable from zero at
    # working precision are not useful components, only rounding dust of a
    # rank-deficient covariance.
    scale = float(np.abs(eigenvalues).max()) if eigenvalues.size else 0.0
    tol = cov.shape[0] * np.finfo(np.float64).eps * scale
    k_positive = int((eigenvalues > tol).sum())
    if k_positive == 0:
        raise NoPositiveEigenvalues("contrastive covariance has no positive eigenvalues")
    k_effective = min(k, k_positive)
    return ProjectionOperator(
        basis=vectors[:k_effective],
        eigenvalues=eigenvalues[:k_effective],
        alpha=alpha,
        k_requested=k,
        k_effective=k_effective,
    )


def build_projection_from_corpora(
    pos: CorpusEmbeddings,
    neg: Optional[CorpusEmbeddings],
    mu_text: np.ndarray,
    alpha: float,
    k: int,
) -> ProjectionOperator:
    """Covariance construction and eigenprojection in one step."""
    cov = build_contrastive_covariance(pos, neg, mu_text, alpha)
    return build_projection(cov, k, alpha)


def project(v: np.ndarray, proj: ProjectionOperator) -> np.ndarray:
    """Map a centered vector into the retained subspace (length k_effective)."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (proj.dim,):
        raise DimMismatch(f"vector of shape {v.shape} vs operator dim {proj.dim}")
    return proj.basis @ v


def project_rows(matrix: np.ndarray, proj: ProjectionOperator) -> np.ndarray:
    """Project each row of a centered matrix."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape[1] != proj.dim:
        raise DimMismatch(f"rows of width {matrix.shape[1]} vs operator dim {proj.dim}")
    return matrix @ proj.basis.T


def query_side_operator(
    q_raw: np.ndarray,
    mu_image: np.ndarray,
    proj: ProjectionOperator,
) -> tuple[np.ndarray, float]:
    """Fold centering and projection into a query-side vector and constant.

    Returns (w, c) with w = P P^T (q - mu) and c = <mu, w>, so that for any
    raw database row x the projected similarity equals <x, w> - c. The stored
    index is never modified.
    """
    q_raw = np.asarray(q_raw, dtype=np.float64)
    mu_image = np.asarray(mu_image, dtype=np.float64)
    if q_raw.shape != mu_image.shape or q_raw.shape != (proj.dim,):
        raise DimMismatch(
            f"query {q_raw.shape}, mean {mu_image.shape}, operator dim {proj.dim}"
        )
    return query_side_from_centered(q_raw - mu_image, mu_image, proj)


def query_side_from_centered(
    q_centered: np.ndarray,
    mu_image: np.ndarray,
    proj: Optional[ProjectionOperator],
) -> tuple[np.ndarray, float]:
    """Query-side form for an already-centered (possibly expanded) query.

    With ``proj`` None the projection is the identity, so the pair reduces to
    (q_centered, <mu, q_centered>).
    """
    q_centered = np.asarray(q_centered, dtype=np.float64)
    mu_image = np.asarray(mu_image, dtype=np.float64)
    if q_centered.shape != mu_image.shape:
        raise DimMismatch(
            f"query {q_centered.shape} vs mean {mu_image.shape}"
        )
    if proj is None:
        w = q_centered
    else:
        if q_centered.shape != (proj.dim,):
            raise DimMismatch(f"query {q_centered.shape} vs operator dim {proj.dim}")
        w = proj.basis.T @ (proj.basis @ q_centered)
    return w, float(mu_image @ w)


def save_projection(proj: ProjectionOperator, path) -> None:
    """Binary basis + eigenvalues with a JSON sidecar of the scalar metadata."""
    path = Path(path)
    header = PROJ_MAGIC + struct.pack("<II", proj.dim, proj.k_effective)
    values = proj.eigenvalues.astype("<f4").tobytes()
    basis = np.ascontiguousarray(proj.basis, dtype="<f4").tobytes(order="C")
    path.write_bytes(header + values + basis)
    sidecar = {
        "alpha": proj.alpha,
        "k_requested": proj.k_requested,
        "k_effective": proj.k_effective,
        "fingerprint": proj.fingerprint,
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True),
                                         encoding="utf-8")


def load_projection(path) -> ProjectionOperator:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 12 or raw[:4] != PROJ_MAGIC:
        raise BadMagic(f"{path}: expected magic {PROJ_MAGIC!r}")
    d, k_effective = struct.unpack("<II", raw[4:12])
    values_end = 12 + 4 * k_effective
    expected = values_end + 4 * k_effective * d
    if len(raw) != expected:
        raise ManifestMismatch(f"{path}: {len(raw)} bytes, header implies {expected}")
    eigenvalues = np.frombuffer(raw[12:values_end], dtype="<f4").astype(np.float64)
    basis = np.frombuffer(raw[values_end:], dtype="<f4").astype(np.float64)
    basis = basis.reshape(k_effective, d)

    side = path.with_suffix(".json")
    if not side.is_file():
        raise ManifestMismatch(f"sidecar manifest {side} not found")
    meta = json.loads(side.read_text(encoding="utf-8"))
    if int(meta["k_effective"]) != k_effective:
        raise ManifestMismatch(f"{side}: k_effective disagrees with header")

    # Stored in f32: re-orthonormalize the tiny rounding drift away so the
    # operator invariants hold exactly for the loaded copy.
    q, r = np.linalg.qr(basis.T)
    basis = (q * np.sign(np.diag(r))).T
    proj = ProjectionOperator(
        basis=basis,
        eigenvalues=eigenvalues,
        alpha=float(meta["alpha"]),
        k_requested=int(meta["k_requested"]),
        k_effective=k_effective,
        fingerprint=str(meta["fingerprint"]),
    )
    return proj
