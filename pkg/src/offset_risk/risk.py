"""Exact population and empirical risk functionals over finite supports.

Population quantities are finite sums over the support, so "population" here
means exact, not estimated. Empirical quantities average over an atom-id
sample. The Bernstein-condition checker reports per-function margins instead
of a bare boolean so that failures on non-convex classes are inspectable and
so that feeding it the empirical measure reproduces the offset-condition
check (the two conditions swap the roles of empirical and population terms).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    Dictionary,
    DiscreteDistribution,
    LossSpec,
    PredictorWeights,
    Sample,
    predict_all,
)

__all__ = [
    "RiskValue",
    "ReferenceSolution",
    "BernsteinReport",
    "population_risk",
    "empirical_risk",
    "population_risk_of_values",
    "empirical_risk_of_values",
    "population_minimizer",
    "excess_risk",
    "empirical_sq_norm",
    "population_sq_norm",
    "empirical_measure",
    "bernstein_check",
]


@dataclass(frozen=True)
class RiskValue:
    value: float
    kind: str  # "population" or "empirical"

    def __post_init__(self) -> None:
        if self.kind not in ("population", "empirical"):
            raise ValueError("kind must be 'population' or 'empirical'")
        if self.value < 0:
            raise ValueError("risk of a nonnegative loss cannot be negative")


@dataclass(frozen=True)
class ReferenceSolution:
    """Lowest-index population risk minimizer over the dictionary rows."""

    gstar_index: int
    gstar_risk: float


@dataclass(frozen=True)
class BernsteinReport:
    """Per-function margins of E(f - g*)^2 <= (1/gamma) E[loss_f - loss_g*].

    ``margins[j] = rhs_j - lhs_j``; the condition holds for function j when
    its margin is >= -1e-12.
    """

    lhs: np.ndarray
    rhs: np.ndarray
    margins: np.ndarray
    holds: bool
    gamma: float


def population_risk_of_values(
    dist: DiscreteDistribution, loss: LossSpec, values: np.ndarray
) -> float:
    """Exact risk of a predictor given its values at every atom."""
    values = np.asarray(values, dtype=np.float64)
    return float(loss.eval(values, dist.ys) @ dist.probs)


def empirical_risk_of_values(
    sample: Sample, dist: DiscreteDistribution, loss: LossSpec, values: np.ndarray
) -> float:
    """Average loss of a predictor over the sample, given atom values."""
    idx = sample.indices
    values = np.asarray(values, dtype=np.float64)
    return float(np.mean(loss.eval(values[idx], dist.ys[idx])))


def population_risk(
    dist: DiscreteDistribution,
    loss: LossSpec,
    dictionary: Dictionary,
    predictor: PredictorWeights,
) -> RiskValue:
    dictionary.validate_for(dist)
    vals = predict_all(dictionary, predictor)
    return RiskValue(value=population_risk_of_values(dist, loss, vals), kind="population")


def empirical_risk(
    sample: Sample,
    dist: DiscreteDistribution,
    loss: LossSpec,
    dictionary: Dictionary,
    predictor: PredictorWeights,
) -> RiskValue:
    dictionary.validate_for(dist)
    sample.validate_for(dist)
    vals = predict_all(dictionary, predictor)
    return RiskValue(value=empirical_risk_of_values(sample, dist, loss, vals), kind="empirical")


def _row_population_risks(
    dist: DiscreteDistribution, loss: LossSpec, dictionary: Dictionary
) -> np.ndarray:
    return loss.eval(dictionary.values, dist.ys[None, :]) @ dist.probs


def population_minimizer(
    dist: DiscreteDistribution, loss: LossSpec, dictionary: Dictionary
) -> ReferenceSolution:
    """Best dictionary row by exact risk; ties resolved to the lowest index."""
    dictionary.validate_for(dist)
    risks = _row_population_risks(dist, loss, dictionary)
    j = int(np.argmin(risks))  # np.argmin returns the first minimizer
    return ReferenceSolution(gstar_index=j, gstar_risk=float(risks[j]))


def excess_risk(
    dist: DiscreteDistribution,
    loss: LossSpec,
    dictionary: Dictionary,
    predictor: PredictorWeights,
) -> float:
    """Risk of the predictor minus the best dictionary risk; never clamped.

    Negative values are meaningful: a predictor outside the dictionary can
    beat every row.
    """
    ref = population_minimizer(dist, loss, dictionary)
    return population_risk(dist, loss, dictionary, predictor).value - ref.gstar_risk


def empirical_sq_norm(sample: Sample, dist: DiscreteDistribution, h: np.ndarray) -> float:
    """Averaged empirical square norm (1/n) sum h(X_i)^2 of an atom-indexed h."""
    sample.validate_for(dist)
    h = np.asarray(h, dtype=np.float64)
    if h.shape[0] != dist.size:
        raise ValueError("h must be indexed by the support atoms")
    return float(np.mean(h[sample.indices] ** 2))


def population_sq_norm(dist: DiscreteDistribution, h: np.ndarray) -> float:
    """Exact population square norm E[h(X)^2] of an atom-indexed h."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape[0] != dist.size:
        raise ValueError("h must be indexed by the support atoms")
    return float((h**2) @ dist.probs)


def empirical_measure(sample: Sample, dist: DiscreteDistribution) -> DiscreteDistribution:
    """The sample's empirical measure, as a reweighting of the same support.

    Atom a receives mass count(a)/n. Reusing the support keeps every
    atom-indexed evaluation table valid for the new measure, which is what
    makes the empirical/population duality checks exact.
    """
    sample.validate_for(dist)
    counts = np.bincount(sample.indices, minlength=dist.size).astype(np.float64)
    return DiscreteDistribution(xs=dist.xs, ys=dist.ys, probs=counts / sample.n, b=dist.b)


def bernstein_check(
    dist: DiscreteDistribution,
    loss: LossSpec,
    class_values: np.ndarray,
    gstar_values: np.ndarray,
    gamma: float,
) -> BernsteinReport:
    """Check E(f - g*)^2 <= (1/gamma) E[loss_f - loss_g*] for every class row.

    ``class_values`` is a (k, s) evaluation table of the class members over
    the support; ``gstar_values`` is the length-s table of the reference
    minimizer. Feeding the empirical measure of a sample as ``dist`` together
    with the empirical risk minimizer as ``gstar_values`` turns this into the
    deterministic offset-condition check with the roles of empirical and
    population quantities interchanged.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    class_values = np.atleast_2d(np.asarray(class_values, dtype=np.float64))
    gstar_values = np.asarray(gstar_values, dtype=np.float64).ravel()
    if class_values.shape[1] != dist.size or gstar_values.shape[0] != dist.size:
        raise ValueError("evaluation tables must match the support size")
    diff = class_values - gstar_values[None, :]
    lhs = (diff**2) @ dist.probs
    risk_gap = (
        loss.eval(class_values, dist.ys[None, :]) - loss.eval(gstar_values, dist.ys)[None, :]
    ) @ dist.probs
    rhs = risk_gap / gamma
    margins = rhs - lhs
    return BernsteinReport(
        lhs=lhs,
        rhs=rhs,
        margins=margins,
        holds=bool(np.all(margins >= -1e-12)),
        gamma=gamma,
    )
