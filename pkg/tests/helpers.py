"""Synthetic data builders shared across the test suite.

The planted world embeds a controlled geometry: every raw image vector is a
common "imageness" direction plus a structure component orthogonal to it, so
centering provably strips the shared direction. Composed positives align with
both query anchors, hard negatives with exactly one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cirengine.calibration import CalibrationStats, build_calibration_stats
from cirengine.evaluation import DatasetManifest, manifest_from_dict
from cirengine.store import EmbeddingSet


def unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def random_unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """Float32 matrix of unit-norm rows."""
    m = rng.normal(size=(n, d))
    m /= np.linalg.norm(m, axis=1, keepdims=True)
    return m.astype(np.float32)


def make_set(
    rng: np.random.Generator,
    n: int,
    d: int,
    modality: str = "image",
    prefix: str = "item",
) -> EmbeddingSet:
    ids = tuple(f"{prefix}_{i:04d}" for i in range(n))
    return EmbeddingSet(dim=d, ids=ids, matrix=random_unit_rows(rng, n, d),
                        modality=modality)


class StubEmbedder:
    """Embedder double: fixed mapping with a deterministic fallback."""

    def __init__(self, dim: int, mapping: dict[str, np.ndarray] | None = None):
        self.dim = dim
        self.mapping = dict(mapping or {})
        self.calls: list[list[str]] = []

    def _fallback(self, text: str) -> np.ndarray:
        seed = abs(hash(text)) % (2**32)
        rng = np.random.default_rng(seed)
        return unit(rng.normal(size=self.dim)).astype(np.float32)

    def embed_text(self, inputs):
        self.calls.append(list(inputs))
        return [
            np.asarray(self.mapping.get(t, self._fallback(t)), dtype=np.float32)
            for t in inputs
        ]


@dataclass
class PlantedWorld:
    """Engineered retrieval problem with known centered similarities."""

    dim: int
    image_store: EmbeddingSet      # database rows + held-out query images
    text_store: EmbeddingSet       # text query embeddings
    calib_images: EmbeddingSet     # symmetric; mean is exactly the common direction
    calib_texts: EmbeddingSet
    manifest: DatasetManifest
    stats: CalibrationStats
    positive_ids: tuple[str, ...]
    visual_hard_ids: tuple[str, ...]
    textual_hard_ids: tuple[str, ...]
    # centered similarity levels actually planted (after common-direction removal)
    margins: dict


def planted_world(
    d: int = 64,
    n_pos: int = 10,
    n_vis: int = 50,
    n_txt: int = 50,
    n_calib: int = 24,
    seed: int = 7,
    rho: float = 0.5,
    tau: float = 0.3,
    a_pos: float = 0.5,
    b_pos: float = 0.5,
    a_hard: float = 0.6,
    b_low: float = -0.1,
    n_instances: int = 1,
) -> PlantedWorld:
    """Build the planted-structure benchmark.

    Geometry: axis 0 is the shared image direction (coefficient rho for every
    image), axis 1 the shared text direction (tau), axes 2 and 3 the visual
    and textual anchors the queries sit on. Structure components of database
    items live on the anchors plus a per-item filler direction, so dot
    products with the query anchors are exact by construction.
    """
    assert d >= 8
    rng = np.random.default_rng(seed)
    e0 = np.eye(d)[0]
    f0 = np.eye(d)[1]
    u = np.eye(d)[2]   # visual anchor
    t = np.eye(d)[3]   # textual anchor
    img_scale = np.sqrt(1.0 - rho**2)
    txt_scale = np.sqrt(1.0 - tau**2)

    def filler() -> np.ndarray:
        g = rng.normal(size=d)
        g[:4] = 0.0
        return unit(g)

    def image_vec(a: float, b: float) -> np.ndarray:
        c = np.sqrt(max(0.0, 1.0 - a * a - b * b))
        structure = a * u + b * t + c * filler()
        return rho * e0 + img_scale * structure

    ids, rows = [], []
    groups: dict[str, list[str]] = {"pos": [], "vis": [], "txt": []}
    plan = [("pos", n_pos, a_pos, b_pos), ("vis", n_vis, a_hard, b_low),
            ("txt", n_txt, b_low, a_hard)]
    for inst in range(n_instances):
        for kind, count, a, b in plan:
            for i in range(count):
                item_id = f"i{inst}_{kind}_{i:04d}"
                ids.append(item_id)
                rows.append(image_vec(a, b))
                groups[kind].append(item_id)

    query_ids, query_rows = [], []
    for inst in range(n_instances):
        query_ids.append(f"qimg_{inst}")
        query_rows.append(rho * e0 + img_scale * u)
    image_store = EmbeddingSet(
        dim=d,
        ids=tuple(ids + query_ids),
        matrix=np.asarray(rows + query_rows, dtype=np.float32),
        modality="image",
    )

    text_query = tau * f0 + txt_scale * t
    text_store = EmbeddingSet(
        dim=d,
        ids=tuple(f"qtxt_{inst}" for inst in range(n_instances)),
        matrix=np.asarray([text_query] * n_instances, dtype=np.float32),
        modality="text",
    )

    # Symmetric calibration sets: paired +/- structures make the means exact
    # and drive the pairwise minimum to its antipodal bound.
    calib_structs = []
    for _ in range(n_calib // 2):
        s = rng.normal(size=d)
        s[:2] = 0.0
        calib_structs.append(unit(s))
    calib_img_rows = []
    for s in calib_structs:
        calib_img_rows.append(rho * e0 + img_scale * s)
        calib_img_rows.append(rho * e0 - img_scale * s)
    calib_images = EmbeddingSet(
        dim=d,
        ids=tuple(f"cimg_{i:04d}" for i in range(len(calib_img_rows))),
        matrix=np.asarray(calib_img_rows, dtype=np.float32),
        modality="image",
    )
    calib_txt_rows = []
    for s in calib_structs:
        calib_txt_rows.append(tau * f0 + txt_scale * s)
        calib_txt_rows.append(tau * f0 - txt_scale * s)
    calib_texts = EmbeddingSet(
        dim=d,
        ids=tuple(f"ctxt_{i:04d}" for i in range(len(calib_txt_rows))),
        matrix=np.asarray(calib_txt_rows, dtype=np.float32),
        modality="text",
    )

    stats = build_calibration_stats(
        mean_image_set=calib_images,
        corpus_text_set=calib_texts,
        pair_image_set=calib_images,
        pair_text_set=calib_texts,
    )

    instances = []
    for inst in range(n_instances):
        db = [i for i in ids if i.startswith(f"i{inst}_")]
        positives = [i for i in db if "_pos_" in i]
        instances.append({
            "instance_id": f"inst_{inst}",
            "database": db,
            "queries": [{
                "query_id": f"q_{inst}",
                "image_query_id": f"qimg_{inst}",
                "text_query": None,
                "text_embedding_id": f"qtxt_{inst}",
                "positives": positives,
            }],
        })
    manifest = manifest_from_dict(
        {"recall_convention": "fraction", "instances": instances}
    )

    margins = {
        "s_v_pos": img_scale**2 * a_pos,
        "s_t_pos": img_scale * txt_scale * b_pos,
        "s_v_hard": img_scale**2 * a_hard,
        "s_t_low": img_scale * txt_scale * b_low,
    }
    return PlantedWorld(
        dim=d,
        image_store=image_store,
        text_store=text_store,
        calib_images=calib_images,
        calib_texts=calib_texts,
        manifest=manifest,
        stats=stats,
        positive_ids=tuple(groups["pos"]),
        visual_hard_ids=tuple(groups["vis"]),
        textual_hard_ids=tuple(groups["txt"]),
        margins=margins,
    )


def write_world(world: PlantedWorld, root) -> dict:
    """Persist a planted world's artifacts; returns the path map."""
    import json
    from pathlib import Path

    from cirengine.store import save_embedding_set

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    paths = {
        "images": root / "images.emb",
        "texts": root / "texts.emb",
        "calib_images": root / "calib_images.emb",
        "calib_texts": root / "calib_texts.emb",
        "manifest": root / "manifest.json",
    }
    save_embedding_set(world.image_store, paths["images"])
    save_embedding_set(world.text_store, paths["texts"])
    save_embedding_set(world.calib_images, paths["calib_images"])
    save_embedding_set(world.calib_texts, paths["calib_texts"])
    doc = {
        "recall_convention": world.manifest.recall_convention,
        "instances": [
            {
                "instance_id": inst.instance_id,
                "database": list(inst.database),
                "queries": [
                    {
                        "query_id": q.query_id,
                        "image_query_id": q.image_query_id,
                        "text_query": q.text_query,
                        "text_embedding_id": q.text_embedding_id,
                        "positives": sorted(q.positives),
                    }
                    for q in inst.queries
                ],
            }
            for inst in world.manifest.instances
        ],
    }
    paths["manifest"].write_text(json.dumps(doc), encoding="utf-8")
    return {k: str(v) for k, v in paths.items()}


def ap_oracle(ranked_ids, positives) -> float:
    """Brute-force average precision straight from the definition."""
    positives = set(positives)
    precisions = []
    for idx in range(len(ranked_ids)):
        if ranked_ids[idx] in positives:
            top = ranked_ids[: idx + 1]
            rel_in_top = sum(1 for x in top if x in positives)
            precisions.append(rel_in_top / (idx + 1))
    return sum(precisions) / len(positives)
