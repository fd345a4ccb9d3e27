"""Partition ANOVA of ``Var Nf``, sensitivity indices, sensitivity measures and entropy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Hashable, Iterable, Mapping

import numpy as np

from .errors import DefectiveIndicesError, InvalidParameterError, UndefinedQuantityError
from .measure import DiscreteMeasure, MeasurableFn, ProductMeasure, RandomMeasure, cov_Nf, integrate, var_Nf

Label = Hashable

PROB_TOL = 1e-12
DEFECT_TOL = 1e-12


@dataclass(frozen=True)
class Partition:
    """Labelled cells of point labels."""

    cells: tuple

    def __post_init__(self):
        cells = tuple((name, frozenset(members)) for name, members in self.cells)
        names = [name for name, _ in cells]
        if len(set(names)) != len(names):
            raise InvalidParameterError("duplicate cell labels in partition")
        for name, members in cells:
            if not members:
                raise InvalidParameterError(f"cell {name!r} is empty")
        seen: dict = {}
        for name, members in cells:
            for x in members:
                if x in seen:
                    raise InvalidParameterError(f"point {x!r} belongs to cells {seen[x]!r} and {name!r}")
                seen[x] = name
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_mapping(cls, cells: Mapping[Label, Iterable[Label]]) -> "Partition":
        return cls(tuple((name, members) for name, members in cells.items()))

    @classmethod
    def singletons(cls, points: Iterable[Label]) -> "Partition":
        return cls(tuple((x, (x,)) for x in points))

    @property
    def labels(self) -> tuple:
        return tuple(name for name, _ in self.cells)

    def __len__(self) -> int:
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells)

    def check_covers(self, support: Iterable[Label]) -> None:
        support = set(support)
        covered = set().union(*(members for _, members in self.cells))
        missing = support - covered
        extra = covered - support
        if missing:
            raise InvalidParameterError(f"partition does not cover points: {sorted(map(str, missing))}")
        if extra:
            raise InvalidParameterError(f"partition names points outside the support: {sorted(map(str, extra))}")

    def to_dict(self) -> dict:
        return {str(name): sorted(map(str, members)) for name, members in self.cells}


@dataclass(frozen=True)
class AnovaDecomposition:
    total_variance: float
    cell_variances: dict
    pair_covariances: dict  # (D', D'') in partition order -> Cov(N f1_D', N f1_D'')
    defect: float
    degenerate: bool = False

    def covariance(self, a: Label, b: Label) -> float:
        return self.pair_covariances[(a, b)] if (a, b) in self.pair_covariances else self.pair_covariances[(b, a)]

    @property
    def components_sum(self) -> float:
        """Cell variances plus covariances over ordered pairs (each unordered pair twice)."""
        return math.fsum(self.cell_variances.values()) + 2.0 * math.fsum(self.pair_covariances.values())

    @property
    def identity_residual(self) -> float:
        return self.total_variance - self.components_sum

    def to_dict(self) -> dict:
        return {
            "total_variance": self.total_variance,
            "cell_variances": {str(k): v for k, v in self.cell_variances.items()},
            "pair_covariances": {f"{a}|{b}": v for (a, b), v in self.pair_covariances.items()},
            "defect": self.defect,
            "degenerate": self.degenerate,
            "identity_residual": self.identity_residual,
        }


def anova_decompose(N: RandomMeasure, f: MeasurableFn, P: Partition) -> AnovaDecomposition:
    """Split ``Var Nf`` into per-cell variances and between-cell covariances."""
    P.check_covers(N.nu.points)
    parts = {name: f.restrict(members) for name, members in P}
    cell_variances = {name: var_Nf(N, fd) for name, fd in parts.items()}
    pair_covariances = {(a, b): cov_Nf(N, parts[a], parts[b]) for a, b in combinations(P.labels, 2)}
    total = var_Nf(N, f)
    scale = N.kappa.mean() * abs(integrate(N.intensity, f * f))
    return AnovaDecomposition(
        total_variance=total,
        cell_variances=cell_variances,
        pair_covariances=pair_covariances,
        defect=N.kappa.defect(),
        degenerate=total <= PROB_TOL * scale,
    )


@dataclass(frozen=True)
class SensitivityReport:
    structural: dict
    correlative: dict
    S_a_total: float
    S_b_total: float
    # "negative" / "positive" when the structural indices are not a probability vector
    defective: str | None = None

    def as_measure(self) -> "SensitivityMeasure":
        if self.defective:
            raise DefectiveIndicesError(
                f"indices are {self.defective}ly defective (S_b = {self.S_b_total:.6g}); "
                "they form a probability vector only for orthogonal measures"
            )
        return SensitivityMeasure({k: max(v, 0.0) for k, v in self.structural.items()})

    def to_dict(self) -> dict:
        return {
            "structural": {str(k): v for k, v in self.structural.items()},
            "correlative": {str(k): v for k, v in self.correlative.items()},
            "S_a_total": self.S_a_total,
            "S_b_total": self.S_b_total,
            "defective": self.defective,
        }


def sensitivity_indices(d: AnovaDecomposition) -> SensitivityReport:
    if d.degenerate or d.total_variance <= 0.0:
        raise UndefinedQuantityError("Var Nf is zero; sensitivity indices cannot be normalized")
    total = d.total_variance
    structural = {k: v / total for k, v in d.cell_variances.items()}
    correlative = {
        k: math.fsum(d.covariance(k, other) for other in d.cell_variances if other != k) / total
        for k in d.cell_variances
    }
    s_a = math.fsum(structural.values())
    s_b = math.fsum(correlative.values())
    defective = None
    if abs(s_b) > DEFECT_TOL:
        defective = "negative" if s_b < 0 else "positive"
    return SensitivityReport(structural, correlative, s_a, s_b, defective)


@dataclass(frozen=True)
class SensitivityMeasure:
    """Probability vector distributing ``Var Nf`` over points or cells."""

    probs: Mapping[Label, float]

    def __post_init__(self):
        probs = {k: float(v) for k, v in dict(self.probs).items()}
        if any(not (v >= 0.0) for v in probs.values()):
            raise InvalidParameterError("sensitivity probabilities must be nonnegative")
        total = math.fsum(probs.values())
        if abs(total - 1.0) > PROB_TOL:
            raise InvalidParameterError(f"sensitivity probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probs", probs)

    def __getitem__(self, label: Label) -> float:
        return self.probs[label]

    def mass(self, labels: Iterable[Label]) -> float:
        return math.fsum(self.probs[x] for x in labels)

    def cell_masses(self, P: Partition) -> dict:
        P.check_covers(self.probs)
        return {name: self.mass(members) for name, members in P}


def sensitivity_measure(nu: DiscreteMeasure | ProductMeasure, f: MeasurableFn) -> SensitivityMeasure:
    """``S(dx) = nu(dx) f(x)^2 / nu(f^2)``.

    Against a product measure ``nu x Q`` the point mass at ``x`` is
    ``nu{x} a_x^2 E[Y^(2 power)]``, i.e. ``nu{x}(c_x^2 + delta_x^2)`` for ``f = 1 * y``.
    """
    f2 = f * f
    if isinstance(nu, ProductMeasure):
        base = nu.nu
        raw = {x: w * f2.coefficient(x) * nu.kernel.law(x).raw_moment(f2.power) if w > 0 else 0.0
               for x, w in zip(base.points, base.weights)}
    else:
        if f.power != 0:
            raise InvalidParameterError("function depends on a measurement; pass a product measure")
        raw = {x: w * f2.coefficient(x) for x, w in zip(nu.points, nu.weights)}
    total = math.fsum(raw.values())
    if not total > 0.0:
        raise UndefinedQuantityError("nu(f^2) = 0: f vanishes almost everywhere, sensitivity measure undefined")
    return SensitivityMeasure({x: v / total for x, v in raw.items()})


def marginal_sensitivity(S: SensitivityMeasure, u: Iterable[int]) -> SensitivityMeasure:
    """Sum the mass of ``S`` over the coordinates not in ``u``."""
    u = sorted(set(u))
    if not u:
        raise InvalidParameterError("coordinate subset must not be empty")
    labels = list(S.probs)
    widths = {len(x) if isinstance(x, tuple) else None for x in labels}
    if None in widths or len(widths) != 1:
        raise InvalidParameterError("marginalization needs tuple labels of a common length")
    (width,) = widths
    if u[0] < 0 or u[-1] >= width:
        raise InvalidParameterError(f"coordinates {u} out of range for {width}-tuples")
    if len(u) == width:
        return S
    acc: dict = {}
    for x, p in S.probs.items():
        key = tuple(x[i] for i in u)
        acc.setdefault(key, []).append(p)
    return SensitivityMeasure({k: math.fsum(v) for k, v in acc.items()})


def entropy(
    S: SensitivityMeasure | SensitivityReport,
    P: Partition | None = None,
    base: str = "natural",
) -> float:
    """Shannon entropy of the cell masses of ``S`` with ``0 log 0 = 0``."""
    if isinstance(S, SensitivityReport):
        S = S.as_measure()
    masses = list(S.probs.values()) if P is None else list(S.cell_masses(P).values())
    h = -math.fsum(p * math.log(p) for p in masses if p > 0.0)
    if base == "binary":
        h /= math.log(2.0)
    elif base != "natural":
        raise InvalidParameterError(f"base must be 'natural' or 'binary', got {base!r}")
    return max(h, 0.0)


def binary_entropy(p):
    """``H_2(p, 1 - p)`` in bits; accepts scalars or arrays."""
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = 0.0 - (np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
    return float(h) if h.ndim == 0 else h
