#!/usr/bin/env python3
"""Builds landscape input files for a public intent dataset.

Writes corpus.jsonl, tokens.semt and samples.semb into the output
directory. Embeddings come from a sentence-transformers model: each
whitespace word gets the mean of its subword vectors, and each sample the
model's pooled sentence embedding. Predictions come from a nearest class
centroid classifier fitted on the training split, with the softmax of the
scaled cosine similarities as confidence.

Presets:
  banking77  Hugging Face PolyAI/banking77 (test split, 3080 samples)
  clinc150   Hugging Face clinc_oos "plus" (test split without oos, 4500)
  hwu64      local CSV files given with --train and --test

CSV input needs `text` and `label` columns.

    python scripts/prepare_dataset.py banking77 data/banking77
    landscape ingest --corpus data/banking77/corpus.jsonl \\
        --token-emb data/banking77/tokens.semt \\
        --sample-emb data/banking77/samples.semb --id banking77
"""

import argparse
import csv
import json
import struct
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def load_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    return [r["text"] for r in rows], [r["label"] for r in rows]


def load_hf(name, config, label_column, drop=None):
    from datasets import load_dataset

    ds = load_dataset(name, config) if config else load_dataset(name)
    names = ds["train"].features[label_column].names

    def split(part):
        texts, labels = [], []
        for row in ds[part]:
            label = names[row[label_column]]
            if label != drop:
                texts.append(row["text"])
                labels.append(label)
        return texts, labels

    return split("train"), split("test")


def load(args):
    if args.train and args.test:
        return load_csv(args.train), load_csv(args.test)
    if args.preset == "banking77":
        return load_hf("PolyAI/banking77", None, "label")
    if args.preset == "clinc150":
        return load_hf("clinc_oos", "plus", "intent", drop="oos")
    raise SystemExit(f"{args.preset}: pass --train and --test CSV files")


def word_vectors(model, texts, batch_size):
    """Per text: whitespace words and one mean subword vector per word."""
    tokenizer = model.tokenizer
    outputs = model.encode(
        texts, output_value="token_embeddings", batch_size=batch_size, convert_to_numpy=False
    )
    result = []
    for text, emb in zip(texts, outputs):
        words = text.split()
        enc = tokenizer(words, is_split_into_words=True, truncation=True, max_length=emb.shape[0])
        ids = enc.word_ids()
        emb = emb.cpu().numpy()
        sums = np.zeros((len(words), emb.shape[1]))
        counts = np.zeros(len(words))
        for pos, w in enumerate(ids[: emb.shape[0]]):
            if w is not None:
                sums[w] += emb[pos]
                counts[w] += 1
        kept = counts > 0
        result.append(([w for w, k in zip(words, kept) if k], sums[kept] / counts[kept][:, None]))
    return result


def normalize(m):
    return m / np.linalg.norm(m, axis=1, keepdims=True).clip(min=1e-12)


def write_semb(path, matrix):
    m, d = matrix.shape
    with open(path, "wb") as f:
        f.write(b"SEMB" + struct.pack("<III", FORMAT_VERSION, m, d))
        f.write(matrix.astype("<f4").tobytes())


def write_semt(path, matrices, dim):
    with open(path, "wb") as f:
        f.write(b"SEMT" + struct.pack("<III", FORMAT_VERSION, len(matrices), dim))
        for m in matrices:
            f.write(struct.pack("<I", m.shape[0]))
            f.write(m.astype("<f4").tobytes())


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("preset", choices=["banking77", "clinc150", "hwu64"])
    p.add_argument("out", type=Path)
    p.add_argument("--train", type=Path)
    p.add_argument("--test", type=Path)
    p.add_argument("--model", default="sentence-transformers/all-MiniLM-L6-v2")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--temperature", type=float, default=0.05)
    args = p.parse_args()

    from sentence_transformers import SentenceTransformer

    (train_x, train_y), (test_x, test_y) = load(args)
    model = SentenceTransformer(args.model)
    encode = lambda xs: model.encode(xs, batch_size=args.batch_size, convert_to_numpy=True)

    labels = sorted(set(train_y))
    train_emb = normalize(encode(train_x))
    index = {l: i for i, l in enumerate(labels)}
    centroids = np.zeros((len(labels), train_emb.shape[1]))
    for v, y in zip(train_emb, train_y):
        centroids[index[y]] += v
    centroids = normalize(centroids)

    test_emb = encode(test_x)
    logits = normalize(test_emb) @ centroids.T / args.temperature
    probs = np.exp(logits - logits.max(axis=1, keepdims=True))
    probs /= probs.sum(axis=1, keepdims=True)

    words = word_vectors(model, test_x, args.batch_size)
    args.out.mkdir(parents=True, exist_ok=True)
    kept_rows, token_mats = [], []
    with open(args.out / "corpus.jsonl", "w", encoding="utf-8") as f:
        for i, (text, gold) in enumerate(zip(test_x, test_y)):
            tokens, vecs = words[i]
            if not tokens:
                continue
            k = int(probs[i].argmax())
            record = {
                "id": f"{args.preset}-{i:05d}",
                "text": text,
                "tokens": tokens,
                "gold_label": gold,
                "pred_label": labels[k],
                "confidence": float(probs[i, k]),
            }
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
            kept_rows.append(i)
            token_mats.append(vecs)

    write_semt(args.out / "tokens.semt", token_mats, test_emb.shape[1])
    write_semb(args.out / "samples.semb", test_emb[kept_rows])
    accuracy = float(np.mean([labels[int(probs[i].argmax())] == test_y[i] for i in kept_rows]))
    print(f"{args.out}: {len(kept_rows)} samples, {len(set(test_y))} labels, accuracy {accuracy:.3f}")


if __name__ == "__main__":
    main()
