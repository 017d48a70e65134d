"""Training-free composed image retrieval engine.

Ranks a database of image embeddings against a composed (image + text) query
by refining each modality's similarity independently (centering, semantic
eigenprojection, contextualization, optional query expansion) and fusing the
min-normalized scores with a conjunction-style criterion. Includes the full
instance-level evaluation harness (AP, mAP, macro-mAP, recall@k, sweeps).
"""

from .calibration import (
    CalibrationStats,
    build_calibration_stats,
    center,
    compute_mean,
    compute_min_stats,
    load_calibration_stats,
    save_calibration_stats,
)
from .config import EngineConfig
from .context import ContextualizationConfig, compose_phrases, contextualize, passthrough_text
from .embedder import EmbedderClient
from .engine import RetrievalEngine
from .evaluation import (
    DatasetManifest,
    EvaluationReport,
    average_precision,
    load_manifest,
    macro_map,
    manifest_from_dict,
    map_at_k,
    mean_average_precision,
    modality_sweep,
    recall_at_k,
    run_benchmark,
)
from .expansion import ExpansionConfig, expand_query
from .projection import (
    CorpusEmbeddings,
    ProjectionOperator,
    build_contrastive_covariance,
    build_projection,
    build_projection_from_corpora,
    eigendecompose_symmetric,
    load_corpus_terms,
    load_projection,
    project,
    query_side_operator,
    save_projection,
)
from .scoring import (
    FusionConfig,
    QueryBundle,
    ScoredItem,
    baseline_fuse,
    harris_fuse,
    min_normalize,
    rank_database,
    score_image,
    score_text,
)
from .store import EmbeddingSet, load_embedding_set, save_embedding_set

__version__ = "0.1.0"
