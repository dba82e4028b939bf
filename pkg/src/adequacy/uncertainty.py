"""Bootstrap uncertainty quantification for the long-run risk metrics.

Two resampling schemes over historical seasons, both treating seasons as
independent blocks:

* season bootstrap -- resample the per-season metric estimates themselves and
  take percentile quantiles of the resample means;
* block bootstrap  -- resample whole season datasets, rerun the pooled
  pipeline (model fit, convolution, metrics) on each replication, and take
  percentile quantiles of the replicated metrics.

Randomness comes from numpy's PCG64 with a per-replication substream
(SeedSequence entropy = (seed, replication index)), so replication r draws
the same indices whether replications run sequentially or in parallel, and
both schemes see identical index matrices for a given seed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

MAX_DROP_RATE = 0.01


@dataclass(frozen=True)
class BootstrapConfig:
    seed: int | tuple[int, ...]
    replications: int = 10_000
    ci_level: float = 0.95

    def __post_init__(self):
        if self.replications < 100:
            raise ValueError("bootstrap needs at least 100 replications")
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must lie strictly between 0 and 1")


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("lower endpoint above upper endpoint")


@dataclass(frozen=True)
class BlockBootstrapResult:
    intervals: dict[str, ConfidenceInterval]
    replications_used: int
    replications_dropped: int


def resample_indices(n: int, replications: int, seed) -> np.ndarray:
    """(replications, n) matrix of i.i.d. uniform indices in [0, n).

    ``seed`` is an integer or a tuple of integers (a derived substream key);
    row r is drawn from PCG64 seeded with entropy (*seed, r).
    """
    if n < 1:
        raise ValueError("n must be positive")
    base = tuple(seed) if isinstance(seed, (tuple, list)) else (int(seed),)
    out = np.empty((replications, n), dtype=np.int64)
    for r in range(replications):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(base + (r,))))
        out[r] = rng.integers(0, n, size=n)
    return out


def percentile_interval(samples: np.ndarray, level: float) -> ConfidenceInterval:
    alpha = (1.0 - level) / 2.0
    lower, upper = np.quantile(samples, [alpha, 1.0 - alpha])
    return ConfidenceInterval(float(lower), float(upper), level)


def season_bootstrap(per_season_values, cfg: BootstrapConfig) -> ConfidenceInterval:
    """Percentile CI for the mean of per-season estimates."""
    values = np.asarray(per_season_values, dtype=float)
    if values.size < 2:
        raise ValueError("season bootstrap needs at least 2 values")
    idx = resample_indices(values.size, cfg.replications, cfg.seed)
    means = values[idx].mean(axis=1)
    return percentile_interval(means, cfg.ci_level)


def block_bootstrap(
    seasons,
    pipeline,
    cfg: BootstrapConfig,
    max_workers: int = 1,
) -> BlockBootstrapResult:
    """Percentile CIs from rerunning ``pipeline`` on resampled season blocks.

    ``pipeline`` maps a list of season datasets to a mapping of metric name to
    value. Failing replications are dropped and counted; more than
    MAX_DROP_RATE of them is an error.
    """
    seasons = list(seasons)
    if len(seasons) < 2:
        raise ValueError("block bootstrap needs at least 2 seasons")
    idx = resample_indices(len(seasons), cfg.replications, cfg.seed)

    results: list[dict | None] = [None] * cfg.replications
    errors: list[str] = []

    def run_one(r: int):
        try:
            return dict(pipeline([seasons[i] for i in idx[r]]))
        except Exception as exc:  # recorded, not fatal unless widespread
            return exc

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(run_one, range(cfg.replications)))
    else:
        outcomes = [run_one(r) for r in range(cfg.replications)]
    for r, outcome in enumerate(outcomes):
        if isinstance(outcome, Exception):
            errors.append(f"replication {r}: {outcome}")
        else:
            results[r] = outcome

    kept = [m for m in results if m is not None]
    dropped = cfg.replications - len(kept)
    if dropped > MAX_DROP_RATE * cfg.replications:
        raise NumericalError(
            f"{dropped}/{cfg.replications} bootstrap replications failed; first: "
            + (errors[0] if errors else "unknown")
        )
    metric_names = kept[0].keys()
    intervals = {
        name: percentile_interval(np.array([m[name] for m in kept]), cfg.ci_level)
        for name in metric_names
    }
    return BlockBootstrapResult(
        intervals=intervals,
        replications_used=len(kept),
        replications_dropped=dropped,
    )
