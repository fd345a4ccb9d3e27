"""Discrete point laws, measurement kernels and the stone-throwing random measure.

A random measure ``N = (kappa, nu)`` throws ``K ~ kappa`` stones independently
onto the support of ``nu``; ``Nf`` is the sum of ``f`` over the stones. When a
kernel ``Q`` is attached each stone at ``x`` also carries a measurement
``Y ~ Q(x, .)`` and functions take the form ``f(x, y) = a(x) * y**power``.

Functions may take negative values: the moment formulas only need ``f`` to be
square-integrable.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .counting import CountingMeasure
from .errors import InvalidParameterError, KernelSamplingError, UndefinedQuantityError

Label = Hashable

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability measure on finitely many labelled points."""

    points: tuple
    weights: tuple

    def __post_init__(self):
        points = tuple(self.points)
        weights = tuple(float(w) for w in self.weights)
        if len(points) != len(weights):
            raise InvalidParameterError("points and weights differ in length")
        if not points:
            raise InvalidParameterError("a discrete measure needs at least one point")
        if len(set(points)) != len(points):
            dupes = sorted({str(p) for p in points if points.count(p) > 1})
            raise InvalidParameterError(f"duplicate point labels: {dupes}")
        for p, w in zip(points, weights):
            if not (w >= 0.0 and math.isfinite(w)):
                raise InvalidParameterError(f"weight of point {p!r} must be finite and >= 0, got {w}")
        total = math.fsum(weights)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise InvalidParameterError(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_mapping(cls, weights: Mapping[Label, float]) -> "DiscreteMeasure":
        return cls(tuple(weights), tuple(weights.values()))

    @classmethod
    def uniform(cls, points: Iterable[Label]) -> "DiscreteMeasure":
        points = tuple(points)
        return cls(points, (1.0 / len(points),) * len(points))

    @cached_property
    def _index(self) -> dict:
        return {p: i for i, p in enumerate(self.points)}

    @cached_property
    def weight_array(self) -> np.ndarray:
        return np.array(self.weights)

    def __contains__(self, label) -> bool:
        return label in self._index

    def __len__(self) -> int:
        return len(self.points)

    def weight(self, label: Label) -> float:
        return self.weights[self._index[label]]

    def mass(self, labels: Iterable[Label]) -> float:
        return math.fsum(self.weight(x) for x in labels)

    def integrate(self, f: "MeasurableFn") -> float:
        return integrate(self, f)

    def to_dict(self) -> dict:
        return {str(p): w for p, w in zip(self.points, self.weights)}


@dataclass(frozen=True)
class MeasurableFn:
    """``f(x, y) = values[x] * y**power``; ``power == 0`` is a plain function of the point."""

    values: Mapping[Label, float]
    power: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values", {k: float(v) for k, v in dict(self.values).items()})
        if self.power not in (0, 1, 2, 3, 4):
            raise InvalidParameterError(f"power must be an integer in 0..4, got {self.power!r}")

    @classmethod
    def indicator(cls, cell: Iterable[Label], support: Iterable[Label]) -> "MeasurableFn":
        cell = set(cell)
        return cls({x: 1.0 if x in cell else 0.0 for x in support})

    @classmethod
    def constant(cls, value: float, support: Iterable[Label]) -> "MeasurableFn":
        return cls({x: value for x in support})

    def coefficient(self, label: Label) -> float:
        try:
            return self.values[label]
        except KeyError:
            raise UndefinedQuantityError(f"function is not defined at point {label!r}") from None

    def __call__(self, x: Label, y: float = 1.0) -> float:
        return self.coefficient(x) * y**self.power

    def restrict(self, cell: Iterable[Label]) -> "MeasurableFn":
        """``f * 1_cell``."""
        cell = set(cell)
        return MeasurableFn({x: (v if x in cell else 0.0) for x, v in self.values.items()}, self.power)

    def __mul__(self, other):
        if isinstance(other, MeasurableFn):
            keys = self.values.keys() & other.values.keys()
            return MeasurableFn({x: self.values[x] * other.values[x] for x in keys}, self.power + other.power)
        return MeasurableFn({x: v * other for x, v in self.values.items()}, self.power)

    __rmul__ = __mul__

    def __add__(self, other: "MeasurableFn") -> "MeasurableFn":
        if self.power != other.power:
            raise InvalidParameterError("cannot add functions with different measurement powers")
        keys = self.values.keys() & other.values.keys()
        return MeasurableFn({x: self.values[x] + other.values[x] for x in keys}, self.power)

    def to_dict(self) -> dict:
        return {"values": {str(k): v for k, v in self.values.items()}, "power": self.power}


# -- measurement laws -------------------------------------------------------


@dataclass(frozen=True)
class Bernoulli:
    p: float

    def __post_init__(self):
        if not 0.0 <= float(self.p) <= 1.0:
            raise InvalidParameterError(f"Bernoulli p must lie in [0, 1], got {self.p}")
        object.__setattr__(self, "p", float(self.p))

    @property
    def mean(self) -> float:
        return self.p

    @property
    def variance(self) -> float:
        return self.p * (1.0 - self.p)

    def raw_moment(self, order: int) -> float:
        return 1.0 if order == 0 else self.p

    def outcomes(self) -> tuple[tuple[float, float], ...]:
        return ((0.0, 1.0 - self.p), (1.0, self.p))


@dataclass(frozen=True)
class MomentOnly:
    """Measurement law known only through its mean and variance (published summaries)."""

    mean: float
    variance: float

    def __post_init__(self):
        if not float(self.variance) >= 0.0:
            raise InvalidParameterError(f"variance must be >= 0, got {self.variance}")
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "variance", float(self.variance))

    def raw_moment(self, order: int) -> float:
        if order == 0:
            return 1.0
        if order == 1:
            return self.mean
        if order == 2:
            return self.mean**2 + self.variance
        raise UndefinedQuantityError(f"moment of order {order} is unknown for a moment-only law")

    def outcomes(self):
        raise KernelSamplingError("kernel has no sampling law")


@dataclass(frozen=True)
class Empirical:
    """Resampling law over a list of observed measurements."""

    draws: tuple

    def __post_init__(self):
        draws = tuple(float(d) for d in self.draws)
        if not draws:
            raise InvalidParameterError("empirical law needs at least one draw")
        object.__setattr__(self, "draws", draws)

    @cached_property
    def _array(self) -> np.ndarray:
        return np.array(self.draws)

    @property
    def mean(self) -> float:
        return float(self._array.mean())

    @property
    def variance(self) -> float:
        # population variance, so that mean**2 + variance is the raw second moment
        return float(self._array.var())

    def raw_moment(self, order: int) -> float:
        return float(np.mean(self._array**order))

    def outcomes(self) -> tuple[tuple[float, float], ...]:
        values, counts = np.unique(self._array, return_counts=True)
        return tuple(zip(values.tolist(), (counts / counts.sum()).tolist()))


MeasurementLaw = Bernoulli | MomentOnly | Empirical


@dataclass(frozen=True)
class Kernel:
    """Measurement law per support point."""

    laws: Mapping[Label, MeasurementLaw]

    def __post_init__(self):
        object.__setattr__(self, "laws", dict(self.laws))

    def law(self, label: Label) -> MeasurementLaw:
        try:
            return self.laws[label]
        except KeyError:
            raise UndefinedQuantityError(f"kernel is not defined at point {label!r}") from None

    @classmethod
    def from_dict(cls, data: Mapping) -> "Kernel":
        return cls({k: law_from_dict(v) for k, v in data.items()})

    def to_dict(self) -> dict:
        return {str(k): law_to_dict(v) for k, v in self.laws.items()}

    def moments(self, label: Label) -> tuple[float, float]:
        """``(c_x, delta_x**2)``: mean and variance of the measurement at ``label``."""
        law = self.law(label)
        return law.mean, law.variance


def law_from_dict(data: Mapping) -> MeasurementLaw:
    """``{"law": "bernoulli", "p": ..}``, ``{"law": "moments", "mean": .., "variance": ..}``
    or ``{"law": "empirical", "draws": [..]}``."""
    if not isinstance(data, Mapping):
        raise InvalidParameterError(f"measurement law must be an object, got {data!r}")
    law = data.get("law")
    params = {k: v for k, v in data.items() if k != "law"}
    try:
        if law == "bernoulli":
            return Bernoulli(**params)
        if law == "moments":
            return MomentOnly(**params)
        if law == "empirical":
            return Empirical(tuple(params.pop("draws")), **params)
    except (TypeError, KeyError) as exc:
        raise InvalidParameterError(f"bad parameters for law {law!r}: {exc}") from None
    raise InvalidParameterError(f"unknown measurement law {law!r}; expected bernoulli, moments or empirical")


def law_to_dict(law: MeasurementLaw) -> dict:
    if isinstance(law, Bernoulli):
        return {"law": "bernoulli", "p": law.p}
    if isinstance(law, MomentOnly):
        return {"law": "moments", "mean": law.mean, "variance": law.variance}
    return {"law": "empirical", "draws": list(law.draws)}


@dataclass(frozen=True)
class ProductMeasure:
    """The intensity ``nu x Q`` on point-measurement pairs."""

    nu: DiscreteMeasure
    kernel: Kernel

    def __post_init__(self):
        for x in self.nu.points:
            self.kernel.law(x)

    def integrate(self, f: MeasurableFn) -> float:
        return math.fsum(
            w * f.coefficient(x) * self.kernel.law(x).raw_moment(f.power)
            for x, w in zip(self.nu.points, self.nu.weights)
            if w > 0.0 and f.coefficient(x) != 0.0
        )

    def first_moment(self, cell: Iterable[Label]) -> float:
        """``(nu x Q)(1_cell * y) = sum_x nu{x} c_x``."""
        cell = set(cell)
        return self.integrate(MeasurableFn({x: float(x in cell) for x in self.nu.points}, 1))

    def second_moment(self, cell: Iterable[Label]) -> float:
        """``(nu x Q)(1_cell * y**2) = sum_x nu{x} (c_x**2 + delta_x**2)``."""
        cell = set(cell)
        return self.integrate(MeasurableFn({x: float(x in cell) for x in self.nu.points}, 2))

    def discretize(self) -> DiscreteMeasure:
        """Finite product support as a discrete measure on ``(point, measurement)`` labels."""
        points, weights = [], []
        for x, w in zip(self.nu.points, self.nu.weights):
            for y, q in self.kernel.law(x).outcomes():
                points.append((x, y))
                weights.append(w * q)
        return DiscreteMeasure(tuple(points), tuple(weights))


def product(nu: DiscreteMeasure, q: Kernel) -> ProductMeasure:
    return ProductMeasure(nu, q)


def integrate(nu: DiscreteMeasure | ProductMeasure, f: MeasurableFn) -> float:
    """``nu f``, the weighted sum of ``f`` over the support."""
    if isinstance(nu, ProductMeasure):
        return nu.integrate(f)
    if f.power != 0:
        raise InvalidParameterError("function depends on a measurement; integrate against a product measure")
    return math.fsum(w * f.coefficient(x) for x, w in zip(nu.points, nu.weights))


@dataclass(frozen=True)
class RandomMeasure:
    kappa: CountingMeasure
    nu: DiscreteMeasure
    kernel: Kernel | None = None

    @cached_property
    def intensity(self) -> DiscreteMeasure | ProductMeasure:
        return self.nu if self.kernel is None else ProductMeasure(self.nu, self.kernel)


def mean_Nf(N: RandomMeasure, f: MeasurableFn) -> float:
    return N.kappa.mean() * integrate(N.intensity, f)


def cov_Nf(N: RandomMeasure, f: MeasurableFn, g: MeasurableFn) -> float:
    """``c nu(fg) + (delta^2 - c) nu(f) nu(g)``."""
    c, defect = N.kappa.mean(), N.kappa.defect()
    cross = c * integrate(N.intensity, f * g)
    if defect == 0.0:
        return cross
    return cross + defect * integrate(N.intensity, f) * integrate(N.intensity, g)


def var_Nf(N: RandomMeasure, f: MeasurableFn) -> float:
    # the formula is nonnegative; clamp the rounding residue of fixed-count cases
    return max(cov_Nf(N, f, f), 0.0)


@dataclass(frozen=True)
class PointSample:
    """One realization: stone counts per point and, with a kernel, one measurement per stone."""

    counts: Mapping[Label, int]
    marks: tuple = ()

    @property
    def size(self) -> int:
        return sum(self.counts.values())

    def evaluate(self, f: MeasurableFn) -> float:
        if f.power == 0:
            return math.fsum(n * f.coefficient(x) for x, n in self.counts.items())
        if not self.marks and self.size:
            raise InvalidParameterError("sample carries no measurements")
        return math.fsum(f(x, y) for x, y in self.marks)


def _require_sampling_law(law) -> None:
    if isinstance(law, MomentOnly):
        raise KernelSamplingError("kernel has no sampling law")


def _draw_measurements(law, rng: np.random.Generator, size: int) -> np.ndarray:
    _require_sampling_law(law)
    if isinstance(law, Bernoulli):
        return (rng.random(size) < law.p).astype(float)
    return law._array[rng.integers(0, len(law.draws), size=size)]


def sample_measure(N: RandomMeasure, rng: np.random.Generator) -> PointSample:
    """Throw ``K ~ kappa`` stones iid from ``nu``."""
    k = N.kappa.sample(rng)
    idx = rng.choice(len(N.nu), size=k, p=N.nu.weight_array)
    counts = Counter({N.nu.points[i]: int(n) for i, n in zip(*np.unique(idx, return_counts=True))})
    marks = ()
    if N.kernel is not None:
        stones = [N.nu.points[i] for i in idx]
        marks = tuple(
            (x, float(_draw_measurements(N.kernel.law(x), rng, 1)[0])) for x in stones
        )
    return PointSample(counts, marks)


@dataclass(frozen=True)
class MonteCarloMoments:
    mean: float
    var: float
    reps: int
    mean_se: float
    var_se: float
    cov: float | None = None
    cov_se: float | None = None


def _realizations(
    N: RandomMeasure, fns: Sequence[MeasurableFn], reps: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Values of ``Nf`` for each function over ``reps`` independent realizations."""
    weights = N.nu.weight_array
    counts = rng.multinomial(N.kappa.sample(rng, size=reps), weights / weights.sum())
    powers = sorted({f.power for f in fns})
    out = [np.zeros(reps) for _ in fns]
    for j, x in enumerate(N.nu.points):
        n_x = counts[:, j]
        # sums over the stones at x of y**power, from one shared set of draws
        sums = {0: n_x.astype(float)}
        if any(p > 0 for p in powers):
            if N.kernel is None:
                raise InvalidParameterError("function depends on a measurement but no kernel is attached")
            law = N.kernel.law(x)
            _require_sampling_law(law)
            if isinstance(law, Bernoulli):
                hits = rng.binomial(n_x, law.p).astype(float)
                sums.update({p: hits for p in powers if p > 0})
            else:
                y = _draw_measurements(law, rng, int(n_x.sum()))
                owner = np.repeat(np.arange(reps), n_x)
                for p in powers:
                    if p > 0:
                        sums[p] = np.bincount(owner, weights=y**p, minlength=reps)
        for out_f, f in zip(out, fns):
            a = f.coefficient(x)
            if a != 0.0:
                out_f += a * sums[f.power]
    return out


def mc_moments(
    N: RandomMeasure,
    f: MeasurableFn,
    reps: int,
    rng: np.random.Generator,
    g: MeasurableFn | None = None,
) -> MonteCarloMoments:
    """Empirical mean, variance (and covariance with ``g``) of ``Nf`` with standard errors."""
    if reps < 2:
        raise InvalidParameterError(f"reps must be >= 2, got {reps}")
    fns = [f] if g is None else [f, g]
    xs = _realizations(N, fns, reps, rng)
    x = xs[0]
    dx = x - x.mean()
    var = float(dx @ dx / (reps - 1))
    m4 = float(np.mean(dx**4))
    result = dict(
        mean=float(x.mean()),
        var=var,
        reps=reps,
        mean_se=math.sqrt(var / reps),
        var_se=math.sqrt(max(m4 - var**2, 0.0) / reps),
    )
    if g is not None:
        dy = xs[1] - xs[1].mean()
        prod = dx * dy
        result["cov"] = float(prod.sum() / (reps - 1))
        result["cov_se"] = float(prod.std(ddof=1) / math.sqrt(reps))
    return MonteCarloMoments(**result)
