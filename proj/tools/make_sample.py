#!/usr/bin/env python3
"""Writes a small synthetic corpus, ratings grid and config under data/sample/.

The novel has 27 chapters built from topic vocabularies: each chapter revisits
some earlier topics and introduces a few new ones. Ratings come from 49 naive
readers plus a handful who already know the story; a reader's rating is a
chapter effect (tied to how many new topics the chapter brings) plus a reader
effect plus noise, on a 0-100 scale.
"""

import argparse
import json
import random
from pathlib import Path

N_CHAPTERS = 27
N_TOPICS = 40
WORDS_PER_TOPIC = 24
N_NAIVE = 49
N_INFORMED = 6

SYLLABLES = ["ka", "lo", "mi", "ren", "tu", "sa", "vor", "ne", "pi", "dra", "shu", "el", "bo", "qui", "fen", "ar"]
FILLER = ["the", "a", "and", "then", "near", "with", "of", "under", "while", "again", "quietly", "before"]


def word(rng):
    return "".join(rng.choice(SYLLABLES) for _ in range(rng.randint(2, 3)))


def sentence(rng, vocab):
    words = []
    for _ in range(rng.randint(8, 14)):
        words.append(rng.choice(vocab) if rng.random() < 0.75 else rng.choice(FILLER))
    words[0] = words[0].capitalize()
    return " ".join(words) + rng.choice([".", ".", ".", "!", "?"])


def build(out: Path, seed: int):
    rng = random.Random(seed)
    vocab = [[word(rng) for _ in range(WORDS_PER_TOPIC)] for _ in range(N_TOPICS)]

    introduced = 0
    new_counts = []
    lines = ["THE SAMPLE NOVEL", "", "PART ONE", ""]
    for c in range(1, N_CHAPTERS + 1):
        if c == 14:
            lines += ["PART TWO", ""]
        n_new = min(N_TOPICS - introduced, 3 if c == 1 else rng.choice([0, 1, 1, 2, 2, 3]))
        fresh = list(range(introduced, introduced + n_new))
        introduced += n_new
        old = rng.sample(range(introduced - n_new), min(introduced - n_new, rng.randint(2, 4))) if introduced > n_new else []
        order = fresh + old
        rng.shuffle(order)
        new_counts.append(n_new)
        lines += [f"CHAPTER {c}", f"The {word(rng).capitalize()} Affair", ""]
        para = []
        for t in order:
            for _ in range(rng.randint(12, 20)):
                para.append(sentence(rng, vocab[t]))
            lines.append(" ".join(para))
            lines.append("")
            para = []
    (out / "novel.txt").write_text("\n".join(lines) + "\n")

    chapter_effect = [50 + 2.5 * (n - 1.5) + rng.gauss(0, 2.0) for n in new_counts]
    rows = ["participant_id\tchapter_index\tcuriosity\tknows_book\tknows_movie"]
    for p in range(N_NAIVE + N_INFORMED):
        informed = p >= N_NAIVE
        subject = rng.gauss(0, 15)
        for c in range(1, N_CHAPTERS + 1):
            v = chapter_effect[c - 1] + subject + rng.gauss(0, 14.6) - (10 if informed else 0)
            v = min(100.0, max(0.0, v))
            kb = "yes" if informed and p % 2 == 0 else "no"
            km = "yes" if informed and p % 2 == 1 else "no"
            rows.append(f"P{p + 1:03d}\t{c}\t{v:.1f}\t{kb}\t{km}")
    (out / "ratings.tsv").write_text("\n".join(rows) + "\n")

    config = {
        "seed": 42,
        "workers": 1,
        "output_dir": "../../out/sample",
        "inputs": {"novel": "novel.txt", "ratings": "ratings.tsv"},
        "segmenter": {"window_size": 5, "overlap": 2},
        "embedder": {"kind": "deterministic", "name": "hashing", "seed": 17, "dim": 512},
        "reduction": {"method": "pca", "target_dim": 16},
        "cluster": {"min_cluster_size": 5},
        "model": {"basis_dim": 4, "n_permutations": 200},
        "sweep": {
            "embedders": [
                {"kind": "deterministic", "name": "hashing", "seed": 17, "dim": 512},
                {"kind": "deterministic", "name": "hashing_alt", "seed": 99, "dim": 256},
            ],
            "windows": [
                {"window_size": 10, "overlap": 3},
                {"window_size": 7, "overlap": 2},
                {"window_size": 5, "overlap": 2},
                {"window_size": 3, "overlap": 1, "min_cluster_size": 4},
            ],
        },
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data" / "sample")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    build(args.out, args.seed)


if __name__ == "__main__":
    main()
