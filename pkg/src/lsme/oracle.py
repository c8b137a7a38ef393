"""Seeded Monte Carlo estimates of TCE, MTCE and allocations.

Draws are generated in fixed-size chunks.  Chunk ``i`` owns the stream
``SeedSequence(seed, spawn_key=(i,))`` and the per-chunk statistics are merged
in chunk order, so an estimate depends only on ``(model, q, n_samples, seed,
chunk_size)`` and not on how many worker threads produced the chunks.

Thresholds always come from the analytic quantile (:func:`lsme.model.quantile_1d`),
never from the sample, so the comparison isolates the conditional mean.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InsufficientExceedancesError, ValidationError
from .model import LSMEModel, _check_q, aggregate, quantile_1d, sample_model, var_vector

__all__ = ["McEstimate", "mc_tce", "mc_mtce", "mc_allocation", "MIN_SAMPLES", "MIN_EXCEEDANCES"]

MIN_SAMPLES = 10_000
MIN_EXCEEDANCES = 30
DEFAULT_CHUNK = 1 << 17


@dataclass(frozen=True)
class McEstimate:
    """Conditional sample mean with its standard error.

    For allocations ``total``/``total_stderr`` describe the conditional mean
    of the sum; ``total`` is the sum of the component means.
    """

    mean: object
    stderr: object
    n_samples: int
    n_exceedances: int
    seed: int
    threshold: object = None
    total: Optional[float] = None
    total_stderr: Optional[float] = None
    chunk_size: int = field(default=DEFAULT_CHUNK, compare=False)

    def z_score(self, value):
        """``(value - mean) / stderr``, componentwise."""
        return (np.asarray(value, dtype=float) - np.asarray(self.mean)) / np.asarray(self.stderr)

    def to_dict(self) -> dict:
        def plain(v):
            if v is None:
                return None
            arr = np.asarray(v, dtype=float)
            return arr.tolist() if arr.ndim else float(arr)

        return {
            "mean": plain(self.mean),
            "stderr": plain(self.stderr),
            "n_samples": self.n_samples,
            "n_exceedances": self.n_exceedances,
            "seed": self.seed,
            "threshold": plain(self.threshold),
            "total": plain(self.total),
            "total_stderr": plain(self.total_stderr),
        }


@dataclass
class _Moments:
    count: int
    mean: np.ndarray
    m2: np.ndarray

    def merge(self, other: "_Moments") -> "_Moments":
        # pairwise update of count, mean and sum of squared deviations
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + delta * delta * (self.count * other.count / n)
        return _Moments(n, mean, m2)


def _check_run(n_samples, seed, chunk_size):
    n_samples = int(n_samples)
    if n_samples < MIN_SAMPLES:
        raise ValidationError(f"n_samples must be at least {MIN_SAMPLES}, got {n_samples}")
    if seed is None or int(seed) != seed or seed < 0:
        raise ValidationError(f"seed must be a non-negative integer, got {seed!r}")
    if int(chunk_size) < 1:
        raise ValidationError("chunk_size must be positive")
    return n_samples, int(seed), int(chunk_size)


def _run(model, n_samples, seed, chunk_size, workers, select):
    """Merge moments of ``select(draws) -> (mask, values)`` over all chunks."""
    n_chunks = -(-n_samples // chunk_size)

    def chunk(i):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        count = min(chunk_size, n_samples - i * chunk_size)
        mask, values = select(sample_model(model, rng, count))
        hit = values[mask]
        if len(hit) == 0:
            return _Moments(0, np.zeros(values.shape[1]), np.zeros(values.shape[1]))
        mean = hit.mean(axis=0)
        return _Moments(len(hit), mean, ((hit - mean) ** 2).sum(axis=0))

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            parts = list(pool.map(chunk, range(n_chunks)))
    else:
        parts = [chunk(i) for i in range(n_chunks)]
    total = parts[0]
    for p in parts[1:]:
        total = total.merge(p)
    if total.count < MIN_EXCEEDANCES:
        raise InsufficientExceedancesError(
            f"only {total.count} exceedances in {n_samples} draws (need {MIN_EXCEEDANCES})",
            exceedances=total.count,
            n_samples=n_samples,
        )
    stderr = np.sqrt(total.m2 / (total.count - 1)) / math.sqrt(total.count)
    return total, stderr


def mc_tce(
    model: LSMEModel,
    q,
    n_samples: int = 1_000_000,
    seed: int = 0,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
    y_q: Optional[float] = None,
) -> McEstimate:
    """Monte Carlo ``E[Y | Y > y_q]`` for a one-dimensional model."""
    model._require_1d()
    n_samples, seed, chunk_size = _check_run(n_samples, seed, chunk_size)
    y = quantile_1d(model, q).y_q if y_q is None else float(y_q)
    mom, se = _run(model, n_samples, seed, chunk_size, workers, lambda x: (x[:, 0] > y, x))
    return McEstimate(float(mom.mean[0]), float(se[0]), n_samples, mom.count, seed, y, chunk_size=chunk_size)


def mc_mtce(
    model: LSMEModel,
    q,
    n_samples: int = 1_000_000,
    seed: int = 0,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> McEstimate:
    """Monte Carlo ``E[Y | Y_k > VaR_{q_k}(Y_k) for all k]``."""
    n_samples, seed, chunk_size = _check_run(n_samples, seed, chunk_size)
    qs = np.broadcast_to(np.asarray(q, dtype=float), (model.n,))
    for v in qs:
        _check_q(v)
    y = var_vector(model, qs)
    mom, se = _run(model, n_samples, seed, chunk_size, workers, lambda x: (np.all(x > y, axis=1), x))
    return McEstimate(mom.mean.copy(), se, n_samples, mom.count, seed, y, chunk_size=chunk_size)


def mc_allocation(
    model: LSMEModel,
    q,
    n_samples: int = 1_000_000,
    seed: int = 0,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> McEstimate:
    """Monte Carlo ``E[Y_k | S > s_q]`` for every ``k`` plus ``E[S | S > s_q]``."""
    n_samples, seed, chunk_size = _check_run(n_samples, seed, chunk_size)
    s_q = quantile_1d(aggregate(model), q).y_q
    n = model.n

    def select(x):
        s = x.sum(axis=1)
        return s > s_q, np.column_stack([x, s])

    mom, se = _run(model, n_samples, seed, chunk_size, workers, select)
    means = mom.mean[:n].copy()
    return McEstimate(
        means,
        se[:n].copy(),
        n_samples,
        mom.count,
        seed,
        s_q,
        total=math.fsum(means),
        total_stderr=float(se[n]),
        chunk_size=chunk_size,
    )
