"""Seeded sampling and Monte Carlo estimation with per-replicate substreams.

Replicate r of a run with seed s draws from a Philox generator whose key is
derived from s and whose counter starts at (0, 0, 0, r); variable j consumes
the j-th uniform of that stream.  A realization therefore depends only on
(seed, replicate, model, N), never on which worker produced it or in what
order.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import ndtri

from .chaos_model import Realization
from .dist_moments import DistFamily, Model

THREADS_ENV = "ITERCHAOS_THREADS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@lru_cache(maxsize=64)
def _key(seed: int) -> tuple[int, int]:
    k = np.random.SeedSequence(int(seed)).generate_state(2, np.uint64)
    return int(k[0]), int(k[1])


def uniforms(seed: int, replicate: int, n: int) -> np.ndarray:
    # a replicate owns the counter block with high word r: streams never overlap
    # for n < 2**64 draws
    bitgen = np.random.Philox(key=np.array(_key(seed), dtype=np.uint64), counter=[0, 0, 0, int(replicate)])
    u = np.random.Generator(bitgen).random(n)
    # open interval (0, 1): inverse CDFs stay finite
    return np.where(u == 0.0, np.finfo(float).tiny, u)


def inverse_cdf(family: DistFamily, u: np.ndarray) -> np.ndarray:
    t = family.tag
    if t == "gaussian":
        return ndtri(u)
    if t == "uniform":
        return math.sqrt(3.0) * (2.0 * u - 1.0)
    if t == "centered_exponential":
        return -np.log1p(-u) - 1.0
    (a, p), (b, _) = family.atoms
    return np.where(u < p, a, b)


def sample(model: Model, n: int, seed: int, replicate: int = 0) -> Realization:
    u = uniforms(seed, replicate, n)
    if model.per_index:
        x = np.array([inverse_cdf(model.family(j), u[j : j + 1])[0] for j in range(n)])
    else:
        x = inverse_cdf(model.default, u)
    return Realization(x, seed=seed, replicate=replicate, model=str(model))


def sample_batch(model: Model, n: int, seed: int, replicates: range) -> np.ndarray:
    """Rows are realizations for the given replicate indices."""
    return np.stack([sample(model, n, seed, r).x for r in replicates]) if len(replicates) else np.zeros((0, n))


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    replicates: int
    seed: int
    elapsed: float

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.stderr


def _chunks(M: int, workers: int, size: int = 256):
    starts = range(0, M, size)
    return [range(s, min(s + size, M)) for s in starts]


def replicate_values(
    functional: Callable[[Realization], float],
    model: Model,
    n: int,
    M: int,
    seed: int,
    workers: int | None = None,
) -> np.ndarray:
    """functional evaluated on replicates 0..M-1, stored by replicate index."""
    workers = workers or default_workers()
    out = np.empty(M)

    def run(rng_range):
        for r in rng_range:
            v = float(functional(sample(model, n, seed, r)))
            if not math.isfinite(v):
                raise FloatingPointError(f"non-finite functional value at replicate {r}")
            out[r] = v

    chunks = _chunks(M, workers)
    if workers == 1:
        for c in chunks:
            run(c)
    else:
        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(run, chunks))
    return out


def batch_values(
    functional: Callable[[np.ndarray], np.ndarray],
    model: Model,
    n: int,
    M: int,
    seed: int,
    workers: int | None = None,
    chunk: int = 1024,
) -> np.ndarray:
    """Vectorized variant: functional maps an (m, n) batch to m values or (m, k) rows.

    Chunk boundaries depend only on ``chunk``, so results do not depend on
    the worker count.
    """
    workers = workers or default_workers()
    chunks = [range(s, min(s + chunk, M)) for s in range(0, M, chunk)]
    parts: list[np.ndarray | None] = [None] * len(chunks)

    def run(i):
        rr = chunks[i]
        v = np.asarray(functional(sample_batch(model, n, seed, rr)), dtype=float)
        bad = np.flatnonzero(~np.isfinite(v).reshape(len(rr), -1).all(axis=1))
        if bad.size:
            raise FloatingPointError(f"non-finite functional value at replicate {rr[bad[0]]}")
        parts[i] = v

    if workers == 1:
        for i in range(len(chunks)):
            run(i)
    else:
        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(run, range(len(chunks))))
    return np.concatenate(parts, axis=0)


def summarize(values: np.ndarray, seed: int, elapsed: float = 0.0) -> MCEstimate:
    values = np.asarray(values, dtype=float)
    M = len(values)
    if M < 2:
        raise ValueError("need at least two replicates")
    # np.sum uses a fixed pairwise tree over the replicate-ordered array
    mean = float(np.sum(values) / M)
    var = float(np.sum((values - mean) ** 2) / (M - 1))
    return MCEstimate(mean, math.sqrt(var / M), M, seed, elapsed)


def estimate(
    functional: Callable[[Realization], float],
    model: Model,
    n: int,
    M: int,
    seed: int,
    workers: int | None = None,
) -> MCEstimate:
    t0 = time.perf_counter()
    vals = replicate_values(functional, model, n, M, seed, workers)
    return summarize(vals, seed, time.perf_counter() - t0)
