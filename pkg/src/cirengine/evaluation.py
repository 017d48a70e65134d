"""Retrieval metrics and the instance-level benchmark protocol.

Each instance carries its own candidate database shared by all of its
composed queries; queries are held out of the candidates. AP averages
precision at the ranks of the relevant items; macro-mAP averages per-instance
mAPs so instances weigh equally regardless of query count.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .engine import RetrievalEngine
from .exceptions import (
    EmptyInput,
    InvalidK,
    ManifestInvariantViolation,
    MissingEmbedding,
    NoPositives,
    UnknownId,
)
from .scoring import FusionConfig
from .store import EmbeddingSet

RECALL_CONVENTIONS = ("hit", "fraction")
DEFAULT_CUTOFFS = (1, 5, 10, 50)


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComposedQuery:
    query_id: str
    image_query_id: str
    text_query: Optional[str]
    text_embedding_id: Optional[str]
    positives: frozenset[str]


@dataclass(frozen=True)
class Instance:
    instance_id: str
    database: tuple[str, ...]
    queries: tuple[ComposedQuery, ...]


@dataclass(frozen=True)
class DatasetManifest:
    """Instances with per-instance databases and composed queries.

    ``recall_convention`` selects how recall@k treats multiple positives:
    "hit" (1 if any positive in the top k) suits single-target protocols,
    "fraction" (|pos in top k| / min(|pos|, k)) suits multi-positive ones.
    """

    instances: tuple[Instance, ...]
    recall_convention: str = "fraction"

    def __post_init__(self):
        if self.recall_convention not in RECALL_CONVENTIONS:
            raise ManifestInvariantViolation(
                f"recall_convention must be one of {RECALL_CONVENTIONS}"
            )
        seen_instances = set()
        for inst in self.instances:
            if inst.instance_id in seen_instances:
                raise ManifestInvariantViolation(
                    f"duplicate instance {inst.instance_id!r}"
                )
            seen_instances.add(inst.instance_id)
            db = set(inst.database)
            if len(db) != len(inst.database):
                raise ManifestInvariantViolation(
                    f"instance {inst.instance_id!r} database has duplicate ids"
                )
            for query in inst.queries:
                if not query.positives:
                    raise ManifestInvariantViolation(
                        f"query {query.query_id!r} has no positives"
                    )
                if not query.positives <= db:
                    raise ManifestInvariantViolation(
                        f"query {query.query_id!r} positives not all in database"
                    )
                if query.image_query_id in db:
                    raise ManifestInvariantViolation(
                        f"query image {query.image_query_id!r} must be held "
                        f"out of the database"
                    )


def load_manifest(path) -> DatasetManifest:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return manifest_from_dict(doc)


def manifest_from_dict(doc: dict) -> DatasetManifest:
    instances = []
    for inst in doc["instances"]:
        queries = tuple(
            ComposedQuery(
                query_id=q["query_id"],
                image_query_id=q["image_query_id"],
                text_query=q.get("text_query"),
                text_embedding_id=q.get("text_embedding_id"),
                positives=frozenset(q["positives"]),
            )
            for q in inst["queries"]
        )
        instances.append(
            Instance(
                instance_id=inst["instance_id"],
                database=tuple(inst["database"]),
                queries=queries,
            )
        )
    return DatasetManifest(
        instances=tuple(instances),
        recall_convention=doc.get("recall_convention", "fraction"),
    )


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def average_precision(ranked_ids: Sequence[str], positives) -> float:
    """Mean of precision values at the ranks of all relevant items."""
    positives = set(positives)
    if not positives:
        raise NoPositives("average precision needs at least one positive")
    if not positives <= set(ranked_ids):
        raise ManifestInvariantViolation("positives must all appear in the ranking")
    hits = 0
    precision_sum = 0.0
    for rank, item_id in enumerate(ranked_ids, start=1):
        if item_id in positives:
            hits += 1
            precision_sum += hits / rank
    return precision_sum / len(positives)


def mean_average_precision(aps: Sequence[float]) -> float:
    if len(aps) == 0:
        raise EmptyInput("mAP over an empty AP list")
    return float(np.mean(aps))


def macro_map(per_instance: dict[str, float]) -> float:
    """Mean over instances of their per-instance mAP, query counts ignored."""
    if not per_instance:
        raise EmptyInput("macro-mAP over an empty instance map")
    return float(np.mean(list(per_instance.values())))


def recall_at_k(
    ranked_ids: Sequence[str], positives, k: int, convention: str = "fraction"
) -> float:
    if k < 1:
        raise InvalidK(f"k must be >= 1, got {k}")
    if convention not in RECALL_CONVENTIONS:
        raise ValueError(f"unknown recall convention {convention!r}")
    positives = set(positives)
    if not positives:
        raise NoPositives("recall needs at least one positive")
    found = sum(1 for item_id in ranked_ids[:k] if item_id in positives)
    if convention == "hit":
        return 1.0 if found else 0.0
    return found / min(len(positives), k)


def map_at_k(ranked_ids: Sequence[str], positives, k: int) -> float:
    """AP truncated at rank k with denominator min(|positives|, k)."""
    if k < 1:
        raise InvalidK(f"k must be >= 1, got {k}")
    positives = set(positives)
    if not positives:
        raise NoPositives("mAP@k needs at least one positive")
    hits = 0
    precision_sum = 0.0
    for rank, item_id in enumerate(ranked_ids[:k], start=1):
        if item_id in positives:
            hits += 1
            precision_sum += hits / rank
    return precision_sum / min(len(positives), k)


# ---------------------------------------------------------------------------
# benchmark runner
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvaluationReport:
    per_query_ap: dict[str, float]
    per_instance_map: dict[str, float]
    macro_map: float
    micro_map: float
    recall_at: dict[int, float]
    map_at: dict[int, float]
    config_echo: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "per_query_ap": dict(sorted(self.per_query_ap.items())),
            "per_instance_map": dict(sorted(self.per_instance_map.items())),
            "macro_map": self.macro_map,
            "micro_map": self.micro_map,
            "recall_at": {str(k): v for k, v in sorted(self.recall_at.items())},
            "map_at": {str(k): v for k, v in sorted(self.map_at.items())},
            "config_echo": self.config_echo,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _lookup(store: EmbeddingSet, item_id: str, what: str) -> np.ndarray:
    try:
        return store.lookup(item_id)
    except UnknownId:
        raise MissingEmbedding(f"{what} {item_id!r} not in embedding store") from None


def _evaluate_instance(
    inst: Instance,
    engine: RetrievalEngine,
    fusion: FusionConfig,
    image_store: EmbeddingSet,
    text_store: Optional[EmbeddingSet],
    cutoffs: Sequence[int],
    convention: str,
):
    try:
        database = image_store.select(inst.database)
    except UnknownId as exc:
        raise MissingEmbedding(str(exc)) from None
    results = {}
    for query in inst.queries:
        q_image = _lookup(image_store, query.image_query_id, "image query")
        text_embedding = None
        if query.text_embedding_id is not None:
            if text_store is None:
                raise MissingEmbedding(
                    f"query {query.query_id!r} references a text embedding "
                    f"but no text store was given"
                )
            text_embedding = _lookup(
                text_store, query.text_embedding_id, "text query"
            )
        bundle = engine.prepare_query(
            q_image, text_query=query.text_query, text_embedding=text_embedding
        )
        ranking = [item.id for item in engine.rank(bundle, database, fusion)]
        ap = average_precision(ranking, query.positives)
        recalls = {
            k: recall_at_k(ranking, query.positives, k, convention)
            for k in cutoffs
        }
        maps = {k: map_at_k(ranking, query.positives, k) for k in cutoffs}
        results[query.query_id] = (ap, recalls, maps)
    return results


def run_benchmark(
    manifest: DatasetManifest,
    engine: RetrievalEngine,
    fusion: FusionConfig,
    image_store: EmbeddingSet,
    text_store: Optional[EmbeddingSet] = None,
    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
    threads: int = 1,
) -> EvaluationReport:
    """Score every instance database independently and aggregate metrics.

    Deterministic for fixed inputs: instances may be evaluated concurrently
    but the report is assembled in manifest order.
    """
    if not manifest.instances:
        raise EmptyInput("manifest has no instances")

    def job(inst: Instance):
        return _evaluate_instance(
            inst, engine, fusion, image_store, text_store,
            cutoffs, manifest.recall_convention,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_instance_results = list(pool.map(job, manifest.instances))
    else:
        per_instance_results = [job(inst) for inst in manifest.instances]

    per_query_ap: dict[str, float] = {}
    per_instance_map: dict[str, float] = {}
    recall_sums = {k: 0.0 for k in cutoffs}
    map_sums = {k: 0.0 for k in cutoffs}
    n_queries = 0
    for inst, results in zip(manifest.instances, per_instance_results):
        aps = []
        for query_id, (ap, recalls, maps) in results.items():
            per_query_ap[query_id] = ap
            aps.append(ap)
            for k in cutoffs:
                recall_sums[k] += recalls[k]
                map_sums[k] += maps[k]
            n_queries += 1
        per_instance_map[inst.instance_id] = mean_average_precision(aps)

    return EvaluationReport(
        per_query_ap=per_query_ap,
        per_instance_map=per_instance_map,
        macro_map=macro_map(per_instance_map),
        micro_map=mean_average_precision(list(per_query_ap.values())),
        recall_at={k: recall_sums[k] / n_queries for k in cutoffs},
        map_at={k: map_sums[k] / n_queries for k in cutoffs},
        config_echo={
            "fusion": {
                "mode": fusion.mode,
                "harris_lambda": fusion.harris_lambda,
                "weight": fusion.weight,
            },
            "engine": engine.config.to_dict(),
            "fingerprints": engine.fingerprints(),
            "recall_convention": manifest.recall_convention,
        },
    )


@dataclass(frozen=True)
class SweepResult:
    """Mixing-weight sweep curve with its composition gain."""

    mode: str
    points: tuple[tuple[float, float], ...]  # (weight, macro_map)
    delta: float  # peak minus best endpoint

    def to_csv(self) -> str:
        lines = ["w,map"]
        lines += [f"{w},{value}" for w, value in self.points]
        return "\n".join(lines) + "\n"


def modality_sweep(
    manifest: DatasetManifest,
    engine: RetrievalEngine,
    mode: str,
    steps: int,
    image_store: EmbeddingSet,
    text_store: Optional[EmbeddingSet] = None,
    threads: int = 1,
) -> SweepResult:
    """mAP as a function of the text/image mixing weight.

    The grid is evenly spaced on [0, 1] including both endpoints, which
    reproduce the text-only and image-only rankings. The composition gain is
    the curve's peak minus the better unimodal endpoint.
    """
    if mode not in ("weighted_sum", "weighted_product"):
        raise ValueError(f"sweep mode must be weighted_sum/weighted_product, got {mode!r}")
    if steps < 2:
        raise ValueError(f"steps must be >= 2, got {steps}")
    points = []
    for w in np.linspace(0.0, 1.0, steps):
        fusion = FusionConfig(mode=mode, weight=float(w))
        report = run_benchmark(
            manifest, engine, fusion, image_store, text_store, threads=threads
        )
        points.append((float(w), report.macro_map))
    values = [value for _, value in points]
    delta = max(values) - max(values[0], values[-1])
    return SweepResult(mode=mode, points=tuple(points), delta=delta)
