"""Id-keyed embedding matrices and their on-disk format.

An :class:`EmbeddingSet` is the immutable substrate every other module reads:
``n`` unit-norm float32 rows of dimension ``d``, one string id per row.

On disk a set is a binary file plus a JSON sidecar (same basename, ``.json``):

    magic ``EMB1`` | u32 LE dim | u64 LE count | count*dim f32 LE row-major

Sidecar: ``{"dim": d, "count": n, "modality": "image"|"text", "ids": [...]}``.
Stored floats round-trip byte-identically through save/load.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import (
    BadMagic,
    DimMismatch,
    DuplicateId,
    ManifestMismatch,
    NonFiniteEntry,
    NotUnitNorm,
    UnknownId,
)

MAGIC = b"EMB1"
MODALITIES = ("image", "text")

# Raw (pre-centering) rows must be unit L2 norm within this tolerance.
UNIT_NORM_TOL = 1e-3


@dataclass(frozen=True)
class EmbeddingSet:
    """Validated, immutable id-keyed embedding matrix for one modality."""

    dim: int
    ids: tuple[str, ...]
    matrix: np.ndarray  # (n, dim) float32
    modality: str
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim <= 0:
            raise DimMismatch(f"dimension must be positive, got {self.dim}")
        if self.modality not in MODALITIES:
            raise ManifestMismatch(f"unknown modality {self.modality!r}")
        matrix = np.ascontiguousarray(self.matrix, dtype=np.float32)
        if matrix.ndim != 2 or matrix.shape[1] != self.dim:
            raise DimMismatch(
                f"matrix shape {matrix.shape} does not match dim {self.dim}"
            )
        if len(self.ids) != matrix.shape[0]:
            raise ManifestMismatch(
                f"{len(self.ids)} ids for {matrix.shape[0]} rows"
            )
        index = {}
        for row, item_id in enumerate(self.ids):
            if item_id in index:
                raise DuplicateId(f"duplicate id {item_id!r}")
            index[item_id] = row
        if matrix.size:
            if not np.isfinite(matrix).all():
                bad = int(np.argwhere(~np.isfinite(matrix).all(axis=1))[0, 0])
                raise NonFiniteEntry(f"non-finite entry in row {self.ids[bad]!r}")
            norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
            off = np.abs(norms - 1.0)
            if off.max() > UNIT_NORM_TOL:
                bad = int(np.argmax(off))
                raise NotUnitNorm(
                    f"row {self.ids[bad]!r} has norm {norms[bad]:.6f}"
                )
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def lookup(self, item_id: str) -> np.ndarray:
        """Return the row for ``item_id``; raises :class:`UnknownId` if absent."""
        try:
            return self.matrix[self._index[item_id]]
        except KeyError:
            raise UnknownId(f"id {item_id!r} not in set") from None

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._index

    def select(self, item_ids) -> "EmbeddingSet":
        """Sub-set with the given ids, in the given order."""
        rows = []
        for item_id in item_ids:
            if item_id not in self._index:
                raise UnknownId(f"id {item_id!r} not in set")
            rows.append(self._index[item_id])
        matrix = self.matrix[rows] if rows else self.matrix[:0]
        return EmbeddingSet(self.dim, tuple(item_ids), matrix, self.modality)

    def fingerprint(self) -> str:
        """Content hash over header, ids, and raw matrix bytes."""
        import hashlib

        h = hashlib.sha256()
        h.update(MAGIC)
        h.update(struct.pack("<IQ", self.dim, len(self)))
        h.update(self.modality.encode())
        for item_id in self.ids:
            h.update(item_id.encode())
            h.update(b"\x00")
        h.update(self.matrix.tobytes(order="C"))
        return h.hexdigest()


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def save_embedding_set(emb_set: EmbeddingSet, path) -> None:
    """Write binary file + JSON sidecar; load reproduces the set bit-exactly."""
    path = Path(path)
    header = MAGIC + struct.pack("<IQ", emb_set.dim, len(emb_set))
    body = np.ascontiguousarray(emb_set.matrix, dtype="<f4").tobytes(order="C")
    path.write_bytes(header + body)
    manifest = {
        "dim": emb_set.dim,
        "count": len(emb_set),
        "modality": emb_set.modality,
        "ids": list(emb_set.ids),
    }
    sidecar_path(path).write_text(json.dumps(manifest), encoding="utf-8")


def load_embedding_set(path) -> EmbeddingSet:
    """Load and validate a set written by :func:`save_embedding_set`."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise BadMagic(f"{path}: expected magic {MAGIC!r}")
    dim, count = struct.unpack("<IQ", raw[4:16])
    expected = 16 + count * dim * 4
    if len(raw) != expected:
        raise ManifestMismatch(
            f"{path}: {len(raw)} bytes, header implies {expected}"
        )
    matrix = np.frombuffer(raw[16:], dtype="<f4").reshape(count, dim)

    side = sidecar_path(path)
    if not side.is_file():
        raise ManifestMismatch(f"sidecar manifest {side} not found")
    manifest = json.loads(side.read_text(encoding="utf-8"))
    if int(manifest["dim"]) != dim:
        raise DimMismatch(
            f"{side}: manifest dim {manifest['dim']} != header dim {dim}"
        )
    if int(manifest["count"]) != count:
        raise ManifestMismatch(
            f"{side}: manifest count {manifest['count']} != header count {count}"
        )
    return EmbeddingSet(
        dim=dim,
        ids=tuple(manifest["ids"]),
        matrix=matrix,
        modality=manifest["modality"],
    )
