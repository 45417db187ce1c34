"""Finite-support data model: distributions, samples, dictionaries, losses.

Everything downstream (risk functionals, complexity estimates, concentration
experiments) is built on joint laws with finite support, so that population
expectations are exact finite sums and the deterministic inequalities checked
elsewhere in this package are not polluted by estimation error on the
population side.

Atoms are addressed by integer id throughout; samples are arrays of atom ids,
and function classes are evaluation tables over atoms. This keeps the exact
population code and the empirical code on one shared evaluation table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "DiscreteDistribution",
    "Sample",
    "Dictionary",
    "LossSpec",
    "PredictorWeights",
    "squared_loss",
    "custom_loss",
    "rng_stream",
    "draw_atom_ids",
    "draw_sample",
    "predict",
    "predict_all",
    "loss_value",
    "load_instance",
    "load_instance_file",
]

_PROB_TOL = 1e-12


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


def _fnv1a64(text: str) -> int:
    """FNV-1a hash of a stream tag; stable across platforms and runs."""
    acc = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        acc ^= byte
        acc = (acc * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return acc


def rng_stream(seed: int, tag: str, replicate: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (master seed, stream tag, replicate).

    Parallel replicate execution order can never change results because every
    replicate owns its own key; repeated calls with equal arguments return
    generators producing identical streams.
    """
    key = np.array(
        [
            (np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ np.uint64(_fnv1a64(tag))),
            np.uint64(replicate & 0xFFFFFFFFFFFFFFFF),
        ],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite-support joint law of (X, Y) with range bound b.

    Parameters
    ----------
    xs : (s, d) array
        Feature vector of each atom.
    ys : (s,) array
        Output value of each atom; must satisfy ``|y| <= b``.
    probs : (s,) array
        Atom probabilities; nonnegative, summing to one within 1e-12.
    b : float
        Positive range bound shared by outputs and by every predictor that is
        required to be bounded.
    """

    xs: np.ndarray
    ys: np.ndarray
    probs: np.ndarray
    b: float
    _cum_probs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        xs = np.atleast_2d(np.asarray(self.xs, dtype=np.float64))
        ys = np.asarray(self.ys, dtype=np.float64).ravel()
        probs = np.asarray(self.probs, dtype=np.float64).ravel()
        if xs.shape[0] != ys.shape[0] or ys.shape[0] != probs.shape[0]:
            raise ValueError("xs, ys and probs must agree on the number of atoms")
        if ys.shape[0] == 0:
            raise ValueError("support must be nonempty")
        if not np.isfinite(self.b) or self.b <= 0:
            raise ValueError("range bound b must be a positive real")
        if np.any(probs < 0):
            raise ValueError("atom probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > _PROB_TOL:
            raise ValueError(
                f"atom probabilities sum to {probs.sum():.17g}, expected 1 within {_PROB_TOL}"
            )
        if np.any(np.abs(ys) > self.b + 1e-15):
            raise ValueError("every |y| must be bounded by b")
        object.__setattr__(self, "xs", _freeze(xs))
        object.__setattr__(self, "ys", _freeze(ys))
        object.__setattr__(self, "probs", _freeze(probs))
        object.__setattr__(self, "_cum_probs", _freeze(np.cumsum(probs)))

    @property
    def size(self) -> int:
        return self.ys.shape[0]

    @property
    def dim(self) -> int:
        return self.xs.shape[1]


@dataclass(frozen=True)
class Sample:
    """Indices of atoms drawn from an owning DiscreteDistribution."""

    indices: np.ndarray
    n: int = 0

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        if idx.size < 1:
            raise ValueError("sample size must be at least 1")
        idx = np.array(idx, copy=True)
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "n", int(idx.size))

    def validate_for(self, dist: DiscreteDistribution) -> None:
        if self.indices.min() < 0 or self.indices.max() >= dist.size:
            raise ValueError("sample contains atom ids outside the support")


@dataclass(frozen=True)
class Dictionary:
    """Finite reference class stored as an m-by-s evaluation table.

    Entry ``values[j, a]`` is the value of reference function j at atom a.
    """

    values: np.ndarray
    b: float
    m: int = 0

    def __post_init__(self) -> None:
        vals = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if vals.shape[0] < 1:
            raise ValueError("dictionary must contain at least one function")
        if not np.isfinite(self.b) or self.b <= 0:
            raise ValueError("dictionary bound b must be positive")
        if np.any(np.abs(vals) > self.b + 1e-15):
            raise ValueError("dictionary values must be bounded by b in absolute value")
        object.__setattr__(self, "values", _freeze(vals))
        object.__setattr__(self, "m", int(vals.shape[0]))

    def validate_for(self, dist: DiscreteDistribution) -> None:
        if self.values.shape[1] != dist.size:
            raise ValueError(
                "dictionary evaluation table has "
                f"{self.values.shape[1]} columns but the support has {dist.size} atoms"
            )


@dataclass(frozen=True)
class LossSpec:
    """Loss with its Lipschitz constant and strong-convexity modulus.

    ``eval`` maps (prediction, outcome) to a nonnegative value and ``grad``
    is its derivative in the prediction argument; both must be vectorized
    over numpy arrays. ``lipschitz`` bounds the prediction-side increments on
    the relevant range and ``strong_convexity`` is the curvature modulus
    there.
    """

    kind: str
    eval: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lipschitz: float
    strong_convexity: float

    def __post_init__(self) -> None:
        if self.lipschitz <= 0 or self.strong_convexity <= 0:
            raise ValueError("lipschitz and strong_convexity must be positive")


def squared_loss(b: float) -> LossSpec:
    """Squared loss on [-b, b]: Lipschitz constant 4b, curvature modulus 2.

    4b is the worst-case derivative of (p - y)^2 in p over [-b, b]^2.
    """
    if b <= 0:
        raise ValueError("range bound b must be positive")
    return LossSpec(
        kind="squared",
        eval=lambda p, y: (np.asarray(p, dtype=np.float64) - y) ** 2,
        grad=lambda p, y: 2.0 * (np.asarray(p, dtype=np.float64) - y),
        lipschitz=4.0 * b,
        strong_convexity=2.0,
    )


def custom_loss(
    eval: Callable[[np.ndarray, np.ndarray], np.ndarray],
    grad: Callable[[np.ndarray, np.ndarray], np.ndarray],
    lipschitz: float,
    strong_convexity: float,
    b: float,
) -> LossSpec:
    """Wrap a user loss; rejects constants inconsistent with the range bound.

    A loss that is both L-Lipschitz and c-strongly convex on [-b, b] must
    satisfy c * b <= L, so that combination is rejected early. Nonnegativity
    is probed on a coarse grid over [-b, b]^2 (a smoke check, not a proof).
    """
    if strong_convexity * b > lipschitz + 1e-12:
        raise ValueError(
            "strong_convexity * b must not exceed the Lipschitz constant on [-b, b]"
        )
    grid = np.linspace(-b, b, 9)
    probe = eval(grid[:, None], grid[None, :])
    if np.any(np.asarray(probe) < -1e-12):
        raise ValueError("loss must be nonnegative on [-b, b]^2")
    return LossSpec(
        kind="custom",
        eval=eval,
        grad=grad,
        lipschitz=lipschitz,
        strong_convexity=strong_convexity,
    )


@dataclass(frozen=True)
class PredictorWeights:
    """Linear combination of dictionary rows; tracks its own sparsity."""

    weights: np.ndarray
    sparsity: int = 0

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        w = np.array(w, copy=True)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "sparsity", int(np.count_nonzero(w)))


def draw_atom_ids(dist: DiscreteDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n atom ids i.i.d. from the atom law via inverse-CDF sampling."""
    u = rng.random(n)
    return np.minimum(np.searchsorted(dist._cum_probs, u, side="right"), dist.size - 1)


def draw_sample(dist: DiscreteDistribution, n: int, seed: int) -> Sample:
    """Draw an i.i.d. sample of n atom ids; pure function of (dist, n, seed)."""
    if n < 1:
        raise ValueError("sample size must be at least 1")
    if abs(dist.probs.sum() - 1.0) > _PROB_TOL:
        raise ValueError("distribution probabilities are not normalized")
    rng = rng_stream(seed, "draw_sample")
    return Sample(indices=draw_atom_ids(dist, n, rng))


def predict(dictionary: Dictionary, w: PredictorWeights, atom_id: int) -> float:
    """Value of the weighted combination at one atom."""
    if w.weights.shape[0] != dictionary.m:
        raise ValueError(
            f"weight vector has length {w.weights.shape[0]} "
            f"but the dictionary has {dictionary.m} functions"
        )
    if atom_id < 0 or atom_id >= dictionary.values.shape[1]:
        raise ValueError("atom id outside the evaluation table")
    return float(w.weights @ dictionary.values[:, atom_id])


def predict_all(dictionary: Dictionary, w: PredictorWeights) -> np.ndarray:
    """Values of the weighted combination at every atom, as a length-s array."""
    if w.weights.shape[0] != dictionary.m:
        raise ValueError(
            f"weight vector has length {w.weights.shape[0]} "
            f"but the dictionary has {dictionary.m} functions"
        )
    return w.weights @ dictionary.values


def loss_value(spec: LossSpec, yhat: float, y: float) -> float:
    """Pointwise loss; not range-checked (iterative schemes may leave [-b, b])."""
    return float(spec.eval(np.float64(yhat), np.float64(y)))


def load_instance(doc: dict) -> tuple[DiscreteDistribution, Dictionary]:
    """Build a distribution and dictionary from a JSON-style document.

    Expected shape::

        {"atoms": [{"x": [...], "y": ...}, ...],
         "probs": [...], "b": ..., "dictionary": [[...], ...]}

    Field order is irrelevant; all numbers are parsed as 64-bit floats.
    """
    try:
        atoms = doc["atoms"]
        probs = doc["probs"]
        b = float(doc["b"])
        table = doc["dictionary"]
    except KeyError as missing:
        raise ValueError(f"instance document is missing field {missing}") from None
    xs = np.array([np.atleast_1d(np.asarray(a["x"], dtype=np.float64)) for a in atoms])
    ys = np.array([float(a["y"]) for a in atoms])
    dist = DiscreteDistribution(xs=xs, ys=ys, probs=np.asarray(probs, dtype=np.float64), b=b)
    dictionary = Dictionary(values=np.asarray(table, dtype=np.float64), b=b)
    dictionary.validate_for(dist)
    return dist, dictionary


def load_instance_file(path: str | Path) -> tuple[DiscreteDistribution, Dictionary]:
    with open(path, "r", encoding="utf-8") as fh:
        return load_instance(json.load(fh))
