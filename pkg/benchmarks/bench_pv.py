"""Time paragraph-vector training with the numba and numpy kernels.

    python3 benchmarks/bench_pv.py [--paragraphs 200] [--words 80] [--epochs 10] [--repeat 3]

The numba timing excludes JIT compilation (one warm-up run on a tiny corpus).
Both backends train on the same corpus with the same seed, and the script
reports the largest absolute difference between the resulting vectors.
"""

import argparse
import random
import statistics
import time

import numpy as np

from paraqa.corpus import paragraphs_from_texts
from paraqa.retrieval import PVHyperParams, train_pv
from paraqa.retrieval._kernels import HAVE_NUMBA


def synthetic_corpus(n_paragraphs: int, n_words: int, vocab_size: int = 2000, seed: int = 0):
    rng = random.Random(seed)
    vocab = [f"w{i}" for i in range(vocab_size)]
    # Zipf-ish word frequencies so negative sampling sees a realistic noise distribution
    weights = [1.0 / (i + 1) for i in range(vocab_size)]
    texts = [" ".join(rng.choices(vocab, weights, k=n_words)) for _ in range(n_paragraphs)]
    return paragraphs_from_texts(texts, doc_id="bench")


def time_backend(paragraphs, hp, backend, repeat):
    runs, model = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        model = train_pv(paragraphs, hp, backend=backend)
        runs.append(time.perf_counter() - start)
    return runs, model


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paragraphs", type=int, default=200)
    ap.add_argument("--words", type=int, default=80)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    paragraphs = synthetic_corpus(args.paragraphs, args.words)
    hp = PVHyperParams(dim=args.dim, epochs=args.epochs, min_count=1, seed=1)
    tokens = args.paragraphs * args.words * args.epochs
    print(f"corpus: {args.paragraphs} paragraphs x {args.words} words, dim={args.dim}, "
          f"epochs={args.epochs} ({tokens:,} token updates per run)")

    backends = ["numpy"]
    if HAVE_NUMBA:
        train_pv(synthetic_corpus(4, 10), PVHyperParams(dim=8, epochs=1, min_count=1), backend="numba")
        backends.insert(0, "numba")
    else:
        print("numba not installed; timing numpy only")

    results = {}
    for backend in backends:
        runs, model = time_backend(paragraphs, hp, backend, args.repeat)
        results[backend] = (statistics.median(runs), model)
        print(f"{backend:>6}: median {results[backend][0]:.3f} s over {args.repeat} runs "
              f"({tokens / results[backend][0]:,.0f} tokens/s)")

    if len(results) == 2:
        (t_fast, m_fast), (t_slow, m_slow) = results["numba"], results["numpy"]
        diff = float(np.max(np.abs(m_fast.doc_vectors - m_slow.doc_vectors)))
        print(f"speedup: {t_slow / t_fast:.1f}x   max |numba - numpy| doc vector diff: {diff:.2e}")


if __name__ == "__main__":
    main()
