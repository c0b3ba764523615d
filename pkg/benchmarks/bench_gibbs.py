#!/usr/bin/env python3
"""Benchmark the Gibbs sampling kernel: numba-compiled vs pure fallback.

Both paths share one source and one splitmix64 stream, so assignments are
bit-identical; this script measures the speed difference and verifies the
equivalence on the benchmark workload.

    python3 benchmarks/bench_gibbs.py [--docs 100] [--tokens 200]
                                      [--vocab 500] [--k 10] [--sweeps 100]
"""
import argparse
import time

import numpy as np

from cminer._kernels import NUMBA_AVAILABLE, build_kernels, rng_state


def make_workload(n_docs, tokens_per_doc, vocab_size, seed=0):
    rng = np.random.default_rng(seed)
    doc_of = np.repeat(np.arange(n_docs, dtype=np.int64), tokens_per_doc)
    term_of = rng.integers(0, vocab_size, size=doc_of.shape[0]).astype(np.int64)
    return doc_of, term_of


def run(kernels, doc_of, term_of, k, vocab_size, sweeps, alpha, beta, seed):
    n_docs = int(doc_of.max()) + 1
    z = np.zeros(doc_of.shape[0], dtype=np.int64)
    n_dk = np.zeros((n_docs, k))
    n_kw = np.zeros((k, vocab_size))
    n_k = np.zeros(k)
    n_d = np.zeros(n_docs)
    cumprobs = np.zeros(k)
    state = rng_state(seed)
    with np.errstate(over="ignore"):
        kernels["init_assignments"](doc_of, term_of, z, n_dk, n_kw, n_k, n_d,
                                    alpha, beta, state, cumprobs)
        start = time.perf_counter()
        for _ in range(sweeps):
            kernels["gibbs_sweep"](doc_of, term_of, z, n_dk, n_kw, n_k,
                                   alpha, beta, state, cumprobs)
        elapsed = time.perf_counter() - start
    return z, elapsed


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--docs", type=int, default=100)
    parser.add_argument("--tokens", type=int, default=200,
                        help="tokens per document")
    parser.add_argument("--vocab", type=int, default=500)
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--sweeps", type=int, default=100)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    doc_of, term_of = make_workload(args.docs, args.tokens, args.vocab)
    n_tokens = doc_of.shape[0]
    print(f"workload: {args.docs} docs x {args.tokens} tokens, "
          f"V={args.vocab}, K={args.k}, {args.sweeps} sweeps "
          f"({n_tokens * args.sweeps:,} token updates)")

    results = {}
    if NUMBA_AVAILABLE:
        kernels = build_kernels(jit=True)
        t0 = time.perf_counter()
        run(kernels, doc_of[:64], term_of[:64], args.k, args.vocab, 1,
            0.1, 0.01, 1)
        print(f"numba compile/warm-up: {time.perf_counter() - t0:.2f}s")
        z_jit, results["numba"] = run(kernels, doc_of, term_of, args.k,
                                      args.vocab, args.sweeps, 0.1, 0.01,
                                      args.seed)
    else:
        print("numba not installed; benchmarking the pure path only")

    pure = build_kernels(jit=False)
    z_pure, results["pure"] = run(pure, doc_of, term_of, args.k, args.vocab,
                                  args.sweeps, 0.1, 0.01, args.seed)

    for name, elapsed in results.items():
        rate = n_tokens * args.sweeps / elapsed
        print(f"{name:>6}: {elapsed:8.3f}s  ({rate/1e6:6.2f} M token-updates/s)")
    if "numba" in results:
        print(f"speedup: {results['pure'] / results['numba']:.1f}x")
        print(f"assignments identical: {np.array_equal(z_jit, z_pure)}")


if __name__ == "__main__":
    main()
