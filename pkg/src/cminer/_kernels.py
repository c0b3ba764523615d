"""Hot sampling kernels for the collapsed Gibbs topic sampler.

The kernels are written once as plain Python over numpy arrays and
conditionally compiled with numba. Set ``CM_PURE_NUMPY=1`` to force the
uncompiled path (or it is taken automatically when numba is missing).
Both paths draw from the same splitmix64 stream and produce bit-identical
assignments, so results never depend on which path ran.

splitmix64 is the project's portable RNG: 64-bit state, one add and two
xor-multiply mixes per draw, doubles taken from the top 53 bits.
"""
from __future__ import annotations

import os

import numpy as np


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


PURE_REQUESTED = _env_flag("CM_PURE_NUMPY")

try:
    import numba  # noqa: F401
    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and not PURE_REQUESTED

# splitmix64 constants; np.uint64 so numba and numpy scalar paths agree
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / float(1 << 53)


def build_kernels(jit: bool):
    """Build the kernel set, compiled when ``jit`` is true.

    Exposed as a factory so tests and benchmarks can hold both variants in
    one process and assert they agree.
    """
    if jit:
        from numba import njit
        deco = njit(cache=True)
    else:
        def deco(fn):
            return fn

    @deco
    def rng_next(state):
        # one splitmix64 draw; state is a 1-element uint64 array
        state[0] = state[0] + _GAMMA
        z = state[0]
        z = (z ^ (z >> _S30)) * _MIX1
        z = (z ^ (z >> _S27)) * _MIX2
        z = z ^ (z >> _S31)
        return float(z >> _S11) * _INV53

    @deco
    def init_assignments(doc_of, term_of, z, n_dk, n_kw, n_k, n_d, alpha,
                         beta, state, cumprobs):
        # incremental warm start: each token samples its first topic from
        # the conditional given the tokens placed so far, which finds far
        # better starting modes than a uniform draw
        K = n_dk.shape[1]
        V = n_kw.shape[1]
        vbeta = V * beta
        for i in range(doc_of.shape[0]):
            d = doc_of[i]
            w = term_of[i]
            total = 0.0
            for kk in range(K):
                total += (n_dk[d, kk] + alpha) * (n_kw[kk, w] + beta) / (n_k[kk] + vbeta)
                cumprobs[kk] = total
            u = rng_next(state) * total
            k = 0
            while k < K - 1 and cumprobs[k] <= u:
                k += 1
            z[i] = k
            n_dk[d, k] += 1.0
            n_kw[k, w] += 1.0
            n_k[k] += 1.0
            n_d[d] += 1.0
        return 0

    @deco
    def gibbs_sweep(doc_of, term_of, z, n_dk, n_kw, n_k, alpha, beta, state, cumprobs):
        # one full sweep of p(z_i = k) proportional to
        # (n_dk - i + alpha) * (n_kw - i + beta) / (n_k - i + V*beta)
        K = n_dk.shape[1]
        V = n_kw.shape[1]
        vbeta = V * beta
        for i in range(doc_of.shape[0]):
            d = doc_of[i]
            w = term_of[i]
            k = z[i]
            n_dk[d, k] -= 1.0
            n_kw[k, w] -= 1.0
            n_k[k] -= 1.0
            total = 0.0
            for kk in range(K):
                total += (n_dk[d, kk] + alpha) * (n_kw[kk, w] + beta) / (n_k[kk] + vbeta)
                cumprobs[kk] = total
            u = rng_next(state) * total
            k = 0
            while k < K - 1 and cumprobs[k] <= u:
                k += 1
            z[i] = k
            n_dk[d, k] += 1.0
            n_kw[k, w] += 1.0
            n_k[k] += 1.0
        return 0

    return {"rng_next": rng_next,
            "init_assignments": init_assignments,
            "gibbs_sweep": gibbs_sweep,
            "jit": jit}


KERNELS = build_kernels(USE_NUMBA)


def rng_state(seed: int) -> np.ndarray:
    """Fresh splitmix64 state from a 64-bit seed."""
    return np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64)
