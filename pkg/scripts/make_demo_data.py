"""Generate a small synthetic benchmark for driving the CLI end to end.

Writes embedding sets, calibration sets, a corpus terms file, and a dataset
manifest into the target directory. The data plants a known structure:
composed positives align with both query anchors, hard negatives with
exactly one, so the full pipeline should reach macro-mAP 1.0 while unimodal
baselines stay low.
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

from cirengine.store import EmbeddingSet, save_embedding_set


def unit(v):
    return v / np.linalg.norm(v)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    d = args.dim
    rng = np.random.default_rng(args.seed)
    rho, tau = 0.5, 0.3
    img_scale, txt_scale = np.sqrt(1 - rho**2), np.sqrt(1 - tau**2)
    e0, f0, u, t = np.eye(d)[0], np.eye(d)[1], np.eye(d)[2], np.eye(d)[3]

    def filler():
        g = rng.normal(size=d)
        g[:4] = 0.0
        return unit(g)

    def image_vec(a, b):
        c = np.sqrt(max(0.0, 1 - a * a - b * b))
        return rho * e0 + img_scale * (a * u + b * t + c * filler())

    ids, rows = [], []
    plan = [("pos", 10, 0.5, 0.5), ("vis", 50, 0.6, -0.1), ("txt", 50, -0.1, 0.6)]
    for kind, count, a, b in plan:
        for i in range(count):
            ids.append(f"i0_{kind}_{i:04d}")
            rows.append(image_vec(a, b))
    ids.append("qimg_0")
    rows.append(rho * e0 + img_scale * u)
    save_embedding_set(
        EmbeddingSet(d, tuple(ids), np.asarray(rows, np.float32), "image"),
        out / "images.emb",
    )

    save_embedding_set(
        EmbeddingSet(d, ("qtxt_0",),
                     np.asarray([tau * f0 + txt_scale * t], np.float32), "text"),
        out / "texts.emb",
    )

    structs = []
    for _ in range(12):
        s = rng.normal(size=d)
        s[:2] = 0.0
        structs.append(unit(s))
    calib_img = [rho * e0 + sign * img_scale * s
                 for s in structs for sign in (1, -1)]
    calib_txt = [tau * f0 + sign * txt_scale * s
                 for s in structs for sign in (1, -1)]
    save_embedding_set(
        EmbeddingSet(d, tuple(f"cimg_{i}" for i in range(len(calib_img))),
                     np.asarray(calib_img, np.float32), "image"),
        out / "calib_images.emb",
    )
    save_embedding_set(
        EmbeddingSet(d, tuple(f"ctxt_{i}" for i in range(len(calib_txt))),
                     np.asarray(calib_txt, np.float32), "text"),
        out / "calib_texts.emb",
    )

    manifest = {
        "recall_convention": "fraction",
        "instances": [{
            "instance_id": "inst_0",
            "database": ids[:-1],
            "queries": [{
                "query_id": "q_0",
                "image_query_id": "qimg_0",
                "text_query": "with fog",
                "text_embedding_id": "qtxt_0",
                "positives": [i for i in ids if "_pos_" in i],
            }],
        }],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    (out / "corpus_pos.txt").write_text(
        "\n".join(["dog", "building", "sculpture", "bicycle", "mountain"])
    )
    (out / "corpus_neg.txt").write_text(
        "\n".join(["origami", "aerial view", "at night", "in the rain"])
    )
    print(f"demo data written to {out}")


if __name__ == "__main__":
    main()
