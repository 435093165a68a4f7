"""Deterministic-parallel replica harness and statistics.

Replica i always consumes the stream (base_seed, stream_id=i) and the
reduction folds results in replica-index order, so estimates are bit-stable
under any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .env import RngSpec

__all__ = [
    "InsufficientSampleError",
    "Estimate",
    "KSResult",
    "run_replicas",
    "ks_test",
    "ks_test_two_sample",
    "fit_power_exponent",
]


class InsufficientSampleError(ValueError):
    """Too few samples for the requested statistic."""


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    reps: int
    seed: int

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")


@dataclass(frozen=True)
class KSResult:
    statistic: float
    p_value: float
    n: int


def run_replicas(
    experiment: Callable[[np.random.Generator], float],
    reps: int,
    base_seed: int,
    workers: int = 1,
) -> Estimate:
    """Mean and standard error of a pure experiment over independent replicas.

    ``experiment`` receives the replica's generator and returns a float.  Any
    exception is re-raised with the replica index attached.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")

    def one(i: int) -> float:
        gen = RngSpec(base_seed, i).generator()
        try:
            return float(experiment(gen))
        except Exception as exc:  # noqa: BLE001 - annotate and rethrow
            raise RuntimeError(f"replica {i} failed: {exc}") from exc

    if workers <= 1:
        values = [one(i) for i in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(one, range(reps)))
    arr = np.array(values)
    stderr = float(arr.std(ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0
    return Estimate(mean=float(arr.mean()), stderr=stderr, reps=reps, seed=base_seed)


def ks_test(samples: Sequence[float], cdf: Callable) -> KSResult:
    """One-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 10:
        raise InsufficientSampleError("ks_test needs at least 10 samples")
    res = stats.kstest(samples, cdf, mode="asymp")
    return KSResult(statistic=float(res.statistic), p_value=float(res.pvalue), n=samples.size)


def ks_test_two_sample(a: Sequence[float], b: Sequence[float]) -> KSResult:
    """Two-sample KS test (asymptotic p-value)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if min(a.size, b.size) < 10:
        raise InsufficientSampleError("two-sample ks test needs at least 10 samples per side")
    res = stats.ks_2samp(a, b, mode="asymp")
    return KSResult(statistic=float(res.statistic), p_value=float(res.pvalue), n=a.size + b.size)


def fit_power_exponent(xs: Sequence[float], ys: Sequence[float]):
    """Least-squares slope and r^2 of log ys against log xs."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 5:
        raise InsufficientSampleError("need at least 5 points for a power-law fit")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("power-law fit needs positive data")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2
