"""Excess-risk rate study: replicated fits across a sample-size grid.

For each n in the grid, ``replicates`` independent trials draw a sample, fit
the configured estimator, and record the exact excess risk. The per-n readout
is the empirical (1 - delta)-quantile (the natural statistic for a deviation
claim), alongside mean and median; a log-log least-squares line through the
quantile column summarizes the decay rate.

Cells are keyed by (seed, estimator, n, replicate), so the study can fan out
across threads (capped by OFFSET_RISK_THREADS) without affecting any number.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..estimators import midpoint, star
from ..model import (
    Dictionary,
    DiscreteDistribution,
    LossSpec,
    PredictorWeights,
    Sample,
    draw_atom_ids,
    rng_stream,
    squared_loss,
)
from ..risk import population_minimizer, population_risk_of_values
from .config import ExperimentConfig, resolve_instance

__all__ = ["RateFit", "AggregateStudy", "fit_rate", "run_aggregate", "worker_count"]


@dataclass(frozen=True)
class RateFit:
    points: tuple[tuple[int, float], ...]
    slope: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class AggregateStudy:
    estimator: str
    delta: float
    rows: list[tuple[int, int, float]]  # (n, replicate, excess risk)
    summary: list[dict]
    rate: RateFit | None  # None when some quantile is nonpositive (no log-log fit)


def fit_rate(points: list[tuple[int, float]]) -> RateFit:
    """Least squares on log-log transformed (n, statistic) points."""
    ns = np.array([p[0] for p in points], dtype=float)
    stats = np.array([p[1] for p in points], dtype=float)
    if np.any(stats <= 0):
        bad = [int(n) for n, s in points if s <= 0]
        raise ValueError(
            f"rate fit needs positive statistics; nonpositive at n = {bad}"
        )
    lx, ly = np.log(ns), np.log(stats)
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = slope * lx + intercept
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(
        points=tuple((int(n), float(s)) for n, s in points),
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r2,
    )


def worker_count() -> int:
    raw = os.environ.get("OFFSET_RISK_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _fit_excess(
    estimator: str,
    dist: DiscreteDistribution,
    dictionary: Dictionary,
    loss: LossSpec,
    sample: Sample,
    delta: float,
    c1: float,
    gstar_risk: float,
) -> float:
    if estimator == "star":
        weights = star(sample, dist, loss, dictionary).weights
    elif estimator == "midpoint":
        weights = midpoint(sample, dist, loss, dictionary, delta=delta, c1=c1).weights
    elif estimator == "erm":
        from ..estimators import erm as erm_fit

        w = np.zeros(dictionary.m)
        w[erm_fit(sample, dist, loss, dictionary)] = 1.0
        weights = PredictorWeights(weights=w)
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    values = weights.weights @ dictionary.values
    return population_risk_of_values(dist, loss, values) - gstar_risk


def run_aggregate(
    config: ExperimentConfig,
    dist: DiscreteDistribution | None = None,
    dictionary: Dictionary | None = None,
) -> AggregateStudy:
    if dist is None or dictionary is None:
        dist, dictionary = resolve_instance(config)
    loss = squared_loss(dist.b)
    gstar_risk = population_minimizer(dist, loss, dictionary).gstar_risk
    cells = [(n, rep) for n in config.n_grid for rep in range(config.replicates)]

    def run_cell(cell: tuple[int, int]) -> float:
        n, rep = cell
        rng = rng_stream(config.seed, f"aggregate-{config.estimator}-n{n}", rep)
        sample = Sample(indices=draw_atom_ids(dist, n, rng))
        return _fit_excess(
            config.estimator, dist, dictionary, loss, sample,
            config.delta, config.c1, gstar_risk,
        )

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            excesses = list(pool.map(run_cell, cells))
    else:
        excesses = [run_cell(c) for c in cells]
    rows = [(n, rep, ex) for (n, rep), ex in zip(cells, excesses)]

    summary = []
    points = []
    for n in config.n_grid:
        vals = np.array([ex for (cn, _, ex) in rows if cn == n])
        q = float(np.quantile(vals, 1.0 - config.delta))
        summary.append(
            {
                "n": int(n),
                "mean": float(vals.mean()),
                "median": float(np.median(vals)),
                "quantile": q,
                "quantile_level": 1.0 - config.delta,
            }
        )
        points.append((n, q))
    rate = fit_rate(points) if all(q > 0 for _, q in points) else None
    return AggregateStudy(
        estimator=config.estimator,
        delta=config.delta,
        rows=rows,
        summary=summary,
        rate=rate,
    )
