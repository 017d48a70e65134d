"""Operator-facing command suite.

Each command reads validated artifact files, runs one pipeline stage, and
writes its artifact with the config/input fingerprints embedded. Errors go
to stderr as single-line JSON with a nonzero exit status; outputs are
byte-reproducible for identical inputs, configuration, and seed.
"""
from __future__ import annotations

import functools
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional

import click
import numpy as np

from .calibration import (
    CalibrationStats,
    build_calibration_stats,
    compute_mean,
    compute_min_stats,
    load_calibration_stats,
    save_calibration_stats,
)
from .config import EngineConfig
from .embedder import ENV_ENDPOINT, EmbedderClient
from .engine import RetrievalEngine
from .evaluation import load_manifest, modality_sweep, run_benchmark
from .exceptions import ConfigDependencyViolation, EngineError
from .projection import (
    CorpusEmbeddings,
    build_projection_from_corpora,
    load_corpus_terms,
    load_projection,
    save_projection,
)
from .scoring import FusionConfig
from .store import EmbeddingSet, load_embedding_set


def _fail(exc: EngineError) -> None:
    line = json.dumps({"error": type(exc).__name__, "message": str(exc)})
    click.echo(line, err=True)
    sys.exit(1)


def engine_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except EngineError as exc:
            _fail(exc)

    return wrapper


def _file_fingerprint(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _make_embedder(endpoint: Optional[str], dim: int) -> Optional[EmbedderClient]:
    if not endpoint:
        return None
    return EmbedderClient(endpoint, dim=dim)


def _embed_terms(terms, embedder: EmbedderClient, label: str) -> EmbeddingSet:
    vectors = embedder.embed_text(terms)
    return EmbeddingSet(
        dim=embedder.dim,
        ids=tuple(terms),
        matrix=np.asarray(vectors, dtype=np.float32),
        modality="text",
    )


def _load_corpus(
    terms_path, emb_path, embedder: Optional[EmbedderClient], polarity: str
) -> Optional[CorpusEmbeddings]:
    """Corpus from a precomputed embedding set or terms + embedder."""
    if emb_path:
        emb = load_embedding_set(emb_path)
        return CorpusEmbeddings(terms=emb.ids, embeddings=emb, polarity=polarity)
    if terms_path:
        terms = load_corpus_terms(terms_path)
        if embedder is None:
            raise ConfigDependencyViolation(
                f"--{polarity[:3]}-corpus needs --embedder to embed the terms"
            )
        emb = _embed_terms(terms, embedder, polarity)
        return CorpusEmbeddings(terms=tuple(terms), embeddings=emb, polarity=polarity)
    return None


@click.group()
def main():
    """Composed image retrieval engine and evaluation harness."""


# ---------------------------------------------------------------------------
# stats
# ---------------------------------------------------------------------------

@main.command("stats")
@click.option("--images", required=True, type=click.Path(exists=True),
              help="Calibration image embedding set (pairwise mins).")
@click.option("--texts", required=True, type=click.Path(exists=True),
              help="Calibration text embedding set (text-image mins).")
@click.option("--mean-images", type=click.Path(exists=True),
              help="Image set for the visual mean (defaults to --images).")
@click.option("--pos-corpus", type=click.Path(exists=True),
              help="Positive corpus terms file (text mean), embedded via --embedder.")
@click.option("--pos-corpus-emb", type=click.Path(exists=True),
              help="Precomputed positive corpus embedding set (text mean).")
@click.option("--projection", type=click.Path(exists=True),
              help="Measure the image-image mins in this projected space.")
@click.option("--embedder", envvar=ENV_ENDPOINT, default=None)
@click.option("--out", required=True, type=click.Path())
@engine_errors
def cmd_stats(images, texts, mean_images, pos_corpus, pos_corpus_emb,
              projection, embedder, out):
    """Compute modality means and min-similarity statistics."""
    image_set = load_embedding_set(images)
    text_set = load_embedding_set(texts)
    mean_set = load_embedding_set(mean_images) if mean_images else image_set
    client = _make_embedder(embedder, image_set.dim)
    corpus = _load_corpus(pos_corpus, pos_corpus_emb, client, "positive")
    if corpus is None:
        raise ConfigDependencyViolation(
            "--pos-corpus or --pos-corpus-emb is required for the text mean"
        )
    proj = load_projection(projection) if projection else None
    stats = build_calibration_stats(
        mean_image_set=mean_set,
        corpus_text_set=corpus.embeddings,
        pair_image_set=image_set,
        pair_text_set=text_set,
        proj=proj,
    )
    save_calibration_stats(stats, out)
    click.echo(json.dumps({
        "out": str(out),
        "s_v_min": stats.s_v_min,
        "s_t_min": stats.s_t_min,
        "projected": stats.projected,
    }, sort_keys=True))


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------

@main.command("projection")
@click.option("--pos-corpus", type=click.Path(exists=True))
@click.option("--pos-corpus-emb", type=click.Path(exists=True))
@click.option("--neg-corpus", type=click.Path(exists=True))
@click.option("--neg-corpus-emb", type=click.Path(exists=True))
@click.option("--stats", "stats_path", required=True, type=click.Path(exists=True),
              help="Calibration stats providing the text mean.")
@click.option("--alpha", default=0.2, show_default=True)
@click.option("--k", default=250, show_default=True)
@click.option("--embedder", envvar=ENV_ENDPOINT, default=None)
@click.option("--out", required=True, type=click.Path())
@engine_errors
def cmd_projection(pos_corpus, pos_corpus_emb, neg_corpus, neg_corpus_emb,
                   stats_path, alpha, k, embedder, out):
    """Build the semantic projection from positive/negative corpora."""
    stats = load_calibration_stats(stats_path)
    client = _make_embedder(embedder, stats.dim)
    pos = _load_corpus(pos_corpus, pos_corpus_emb, client, "positive")
    if pos is None:
        raise ConfigDependencyViolation(
            "--pos-corpus or --pos-corpus-emb is required"
        )
    neg = _load_corpus(neg_corpus, neg_corpus_emb, client, "negative")
    proj = build_projection_from_corpora(pos, neg, stats.mu_text, alpha, k)
    save_projection(proj, out)
    click.echo(json.dumps({
        "out": str(out),
        "k_requested": proj.k_requested,
        "k_effective": proj.k_effective,
        "fingerprint": proj.fingerprint,
    }, sort_keys=True))


# ---------------------------------------------------------------------------
# contextualize
# ---------------------------------------------------------------------------

@main.command("contextualize")
@click.option("--text", required=True, help="Raw text query.")
@click.option("--pos-corpus", required=True, type=click.Path(exists=True))
@click.option("--stats", "stats_path", required=True, type=click.Path(exists=True))
@click.option("--n-phrases", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--embedder", envvar=ENV_ENDPOINT, required=True)
@click.option("--out", required=True, type=click.Path())
@engine_errors
def cmd_contextualize(text, pos_corpus, stats_path, n_phrases, seed, embedder, out):
    """Emit the centered, contextualized text query embedding as JSON."""
    from .context import ContextualizationConfig, contextualize

    stats = load_calibration_stats(stats_path)
    client = _make_embedder(embedder, stats.dim)
    terms = load_corpus_terms(pos_corpus)
    cfg = ContextualizationConfig(n_phrases=n_phrases, rng_seed=seed)
    vector = contextualize(text, terms, client, stats.mu_text, cfg)
    doc = {
        "dim": stats.dim,
        "vector": vector.tolist(),
        "centered": True,
        "text": text,
        "n_phrases": n_phrases,
        "seed": seed,
        "fingerprints": {
            "stats": _file_fingerprint(stats_path),
            "pos_corpus": _file_fingerprint(pos_corpus),
        },
    }
    Path(out).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")
    click.echo(json.dumps({"out": str(out), "dim": stats.dim}, sort_keys=True))


# ---------------------------------------------------------------------------
# shared engine options
# ---------------------------------------------------------------------------

def engine_options(fn):
    options = [
        click.option("--stats", "stats_path", type=click.Path(exists=True)),
        click.option("--projection", "projection_path", type=click.Path(exists=True)),
        click.option("--pos-corpus", type=click.Path(exists=True),
                     help="Corpus terms for contextualization."),
        click.option("--embedder", envvar=ENV_ENDPOINT, default=None),
        click.option("--centering/--no-centering", default=True, show_default=True),
        click.option("--min-norm/--no-min-norm", default=True, show_default=True),
        click.option("--harris/--no-harris", default=True, show_default=True),
        click.option("--context/--no-context", "contextualization", default=True,
                     show_default=True),
        click.option("--alpha", default=0.2, show_default=True),
        click.option("--k", default=250, show_default=True),
        click.option("--lambda", "harris_lambda", default=0.1, show_default=True),
        click.option("--beta", default=0.1, show_default=True),
        click.option("--expand-k", default=0, show_default=True,
                     help="Expansion neighbor count; 0 disables expansion."),
        click.option("--n-phrases", default=100, show_default=True),
        click.option("--seed", default=0, show_default=True),
        click.option("--fusion", default="basic_harris", show_default=True),
        click.option("--weight", default=None, type=float,
                     help="Mixing weight for weighted fusion modes."),
        click.option("--threads", default=1, show_default=True),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _build_engine(stats_path, projection_path, pos_corpus, embedder,
                  centering, min_norm, harris, contextualization,
                  alpha, k, harris_lambda, beta, expand_k, n_phrases, seed,
                  dim_hint: int):
    config = EngineConfig(
        centering=centering,
        min_norm=min_norm,
        harris=harris,
        contextualization=contextualization,
        projection=bool(projection_path),
        query_expansion=expand_k > 0,
        alpha=alpha,
        k=k,
        harris_lambda=harris_lambda,
        beta=beta,
        k_neighbors=expand_k if expand_k > 0 else 10,
        n_phrases=n_phrases,
        rng_seed=seed,
    )
    stats = load_calibration_stats(stats_path) if stats_path else None
    proj = load_projection(projection_path) if projection_path else None
    client = _make_embedder(embedder, stats.dim if stats else dim_hint)
    terms = load_corpus_terms(pos_corpus) if pos_corpus else None
    return RetrievalEngine(config, stats=stats, proj=proj,
                           embedder=client, corpus_terms=terms)


def _fusion_config(fusion: str, harris_lambda: float, weight) -> FusionConfig:
    return FusionConfig(mode=fusion, harris_lambda=harris_lambda, weight=weight)


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------

@main.command("search")
@click.option("--images", required=True, type=click.Path(exists=True),
              help="Database embedding set.")
@click.option("--queries", required=True, type=click.Path(exists=True),
              help="Embedding set holding image query vectors.")
@click.option("--query-id", required=True, help="Image query id in --queries.")
@click.option("--text", default=None, help="Raw text query.")
@click.option("--texts", type=click.Path(exists=True),
              help="Text embedding set for --text-embedding-id.")
@click.option("--text-embedding-id", default=None)
@click.option("--out", required=True, type=click.Path(),
              help="Ranking JSONL output.")
@click.option("--csv", "csv_out", type=click.Path(), default=None,
              help="Optional compact CSV (id,fused).")
@engine_options
@engine_errors
def cmd_search(images, queries, query_id, text, texts, text_embedding_id,
               out, csv_out, stats_path, projection_path, pos_corpus, embedder,
               centering, min_norm, harris, contextualization, alpha, k,
               harris_lambda, beta, expand_k, n_phrases, seed, fusion, weight,
               threads):
    """Rank a database for one composed query; write JSONL (+ optional CSV)."""
    database = load_embedding_set(images)
    query_set = load_embedding_set(queries)
    engine = _build_engine(stats_path, projection_path, pos_corpus, embedder,
                           centering, min_norm, harris, contextualization,
                           alpha, k, harris_lambda, beta, expand_k, n_phrases,
                           seed, dim_hint=database.dim)
    text_embedding = None
    if text_embedding_id is not None:
        if not texts:
            raise ConfigDependencyViolation("--text-embedding-id needs --texts")
        text_embedding = load_embedding_set(texts).lookup(text_embedding_id)
    bundle = engine.prepare_query(
        query_set.lookup(query_id), text_query=text, text_embedding=text_embedding
    )
    ranked = engine.rank(bundle, database, _fusion_config(fusion, harris_lambda, weight))

    meta = {
        "meta": {
            "fingerprints": {
                **engine.fingerprints(),
                "images": _file_fingerprint(images),
            },
            "query_id": query_id,
            "fusion": fusion,
        }
    }
    lines = [json.dumps(meta, sort_keys=True)]
    lines += [json.dumps(item.to_dict(), sort_keys=True) for item in ranked]
    Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if csv_out:
        rows = [f"# config={engine.config.fingerprint()}", "id,fused"]
        rows += [f"{item.id},{item.fused}" for item in ranked]
        Path(csv_out).write_text("\n".join(rows) + "\n", encoding="utf-8")
    click.echo(json.dumps({"out": str(out), "items": len(ranked)}, sort_keys=True))


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

@main.command("evaluate")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True))
@click.option("--images", required=True, type=click.Path(exists=True))
@click.option("--texts", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@engine_options
@engine_errors
def cmd_evaluate(manifest_path, images, texts, out, stats_path, projection_path,
                 pos_corpus, embedder, centering, min_norm, harris,
                 contextualization, alpha, k, harris_lambda, beta, expand_k,
                 n_phrases, seed, fusion, weight, threads):
    """Run the benchmark protocol and write the metrics report."""
    manifest = load_manifest(manifest_path)
    image_store = load_embedding_set(images)
    text_store = load_embedding_set(texts) if texts else None
    engine = _build_engine(stats_path, projection_path, pos_corpus, embedder,
                           centering, min_norm, harris, contextualization,
                           alpha, k, harris_lambda, beta, expand_k, n_phrases,
                           seed, dim_hint=image_store.dim)
    report = run_benchmark(
        manifest, engine, _fusion_config(fusion, harris_lambda, weight),
        image_store, text_store, threads=threads,
    )
    doc = report.to_dict()
    doc["config_echo"]["inputs"] = {
        "manifest": _file_fingerprint(manifest_path),
        "images": _file_fingerprint(images),
        "texts": _file_fingerprint(texts) if texts else None,
    }
    Path(out).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n",
                         encoding="utf-8")
    click.echo(json.dumps({
        "out": str(out),
        "macro_map": report.macro_map,
        "micro_map": report.micro_map,
    }, sort_keys=True))


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

@main.command("sweep")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True))
@click.option("--images", required=True, type=click.Path(exists=True))
@click.option("--texts", type=click.Path(exists=True))
@click.option("--steps", default=11, show_default=True)
@click.option("--out", required=True, type=click.Path())
@engine_options
@engine_errors
def cmd_sweep(manifest_path, images, texts, steps, out, stats_path,
              projection_path, pos_corpus, embedder, centering, min_norm,
              harris, contextualization, alpha, k, harris_lambda, beta,
              expand_k, n_phrases, seed, fusion, weight, threads):
    """Sweep the modality mixing weight and write the (w, mAP) curve."""
    if fusion == "basic_harris":
        fusion = "weighted_sum"  # sweep is defined for the weighted modes
    manifest = load_manifest(manifest_path)
    image_store = load_embedding_set(images)
    text_store = load_embedding_set(texts) if texts else None
    engine = _build_engine(stats_path, projection_path, pos_corpus, embedder,
                           centering, min_norm, harris, contextualization,
                           alpha, k, harris_lambda, beta, expand_k, n_phrases,
                           seed, dim_hint=image_store.dim)
    result = modality_sweep(manifest, engine, fusion, steps, image_store,
                            text_store, threads=threads)
    header = (
        f"# mode={result.mode} delta={result.delta} "
        f"config={engine.config.fingerprint()}\n"
    )
    Path(out).write_text(header + result.to_csv(), encoding="utf-8")
    click.echo(json.dumps({
        "out": str(out),
        "delta": result.delta,
        "points": len(result.points),
    }, sort_keys=True))


if __name__ == "__main__":
    main()
