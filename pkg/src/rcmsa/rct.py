"""Randomized controlled trials as random measures on ``{T, C}``.

Enrollees are stones thrown onto the treatment (``T``) and control (``C``)
groups; each carries a measurement drawn from the group's kernel. Infection
indicators give Bernoulli kernels, published endpoint summaries give
moment-only kernels. Under an orthogonal (Poisson) count the group variances
normalize into a two-point sensitivity measure whose binary entropy is the
uncertainty summary reported here.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from .counting import CountingMeasure
from .errors import InvalidParameterError, UndefinedQuantityError
from .measure import (
    Bernoulli,
    DiscreteMeasure,
    Kernel,
    MeasurableFn,
    MomentOnly,
    RandomMeasure,
    cov_Nf,
    product,
    var_Nf,
)
from .sensitivity import binary_entropy, entropy, sensitivity_measure

GROUPS = ("T", "C")
DEFAULT_REPS = 10_000
CI_CHUNK = 2_500
DISPERSION_RULES = ("normal392", "quarterwidth")
Z975_WIDTH = 3.92  # two-sided normal 95% interval spans 3.92 standard deviations

_Y = MeasurableFn({"T": 1.0, "C": 1.0}, power=1)
_Y_T = MeasurableFn({"T": 1.0, "C": 0.0}, power=1)
_Y_C = MeasurableFn({"T": 0.0, "C": 1.0}, power=1)


def _group_measure(weights: tuple[float, float]) -> DiscreteMeasure:
    return DiscreteMeasure(GROUPS, tuple(weights))


@dataclass(frozen=True)
class VaccineTrial:
    enrollees: int
    cases_treatment: int
    cases_control: int
    weights: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        for name in ("enrollees", "cases_treatment", "cases_control"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise InvalidParameterError(f"{name} must be an integer, got {value!r}")
        if self.enrollees <= 0:
            raise InvalidParameterError(f"enrollees must be positive, got {self.enrollees}")
        if self.cases_treatment < 0 or self.cases_control < 0:
            raise InvalidParameterError("case counts must be nonnegative")
        if self.cases_treatment + self.cases_control > self.enrollees:
            raise InvalidParameterError("more cases than enrollees")
        weights = tuple(float(w) for w in self.weights)
        if len(weights) != 2 or any(not 0.0 < w < 1.0 for w in weights) or abs(sum(weights) - 1.0) > 1e-12:
            raise InvalidParameterError(f"group weights must be two probabilities summing to 1, got {self.weights!r}")
        object.__setattr__(self, "weights", weights)
        for arm, cases, w in zip(("treatment", "control"), (self.cases_treatment, self.cases_control), weights):
            if cases > self.enrollees * w:
                raise InvalidParameterError(
                    f"{cases} {arm} cases exceed the expected arm size {self.enrollees * w:g}")

    @classmethod
    def from_dict(cls, data: dict) -> "VaccineTrial":
        if not isinstance(data, dict):
            raise InvalidParameterError("vaccine trial must be a JSON object")
        allowed = {"enrollees", "cases_treatment", "cases_control", "weights"}
        unknown = set(data) - allowed
        if unknown:
            raise InvalidParameterError(f"unknown vaccine trial fields: {sorted(unknown)}")
        missing = {"enrollees", "cases_treatment", "cases_control"} - set(data)
        if missing:
            raise InvalidParameterError(f"missing vaccine trial fields: {sorted(missing)}")
        return cls(
            data["enrollees"],
            data["cases_treatment"],
            data["cases_control"],
            tuple(data.get("weights", (0.5, 0.5))),
        )

    def to_dict(self) -> dict:
        return {
            "enrollees": self.enrollees,
            "cases_treatment": self.cases_treatment,
            "cases_control": self.cases_control,
            "weights": list(self.weights),
        }

    def arm_risks(self) -> tuple[float, float]:
        """Infection probabilities ``(P(T), P(C))`` over arm sizes ``n * nu{arm}``."""
        w_t, w_c = self.weights
        n = self.enrollees
        return self.cases_treatment / (n * w_t), self.cases_control / (n * w_c)

    def kernel(self) -> Kernel:
        p_t, p_c = self.arm_risks()
        return Kernel({"T": Bernoulli(p_t), "C": Bernoulli(p_c)})


def efficacy(t: VaccineTrial) -> float:
    if t.cases_control == 0:
        raise UndefinedQuantityError("efficacy is undefined without control-arm cases")
    p_t, p_c = t.arm_risks()
    return 1.0 - p_t / p_c


def risk_uncertainty(eff: float) -> float:
    """``2 min(1 - eff, eff)``: zero at the ends of [0, 1], one at the midpoint."""
    if not 0.0 <= eff <= 1.0:
        raise InvalidParameterError(f"efficacy {eff!r} lies outside [0, 1]")
    return 2.0 * min(1.0 - eff, eff)


def vaccine_sensitivity(t: VaccineTrial) -> tuple[float, float, float]:
    """``(S_T, S_C, H_2)`` of the infection indicator under an orthogonal count."""
    if t.cases_treatment + t.cases_control == 0:
        raise UndefinedQuantityError("no cases in either arm; sensitivity measure undefined")
    S = sensitivity_measure(product(_group_measure(t.weights), t.kernel()), _Y)
    return S["T"], S["C"], entropy(S, base="binary")


def _ci_chunk(s_c: float, n: float, size: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    k = rng.poisson(n, size=size)
    empty = k == 0
    while empty.any():
        k[empty] = rng.poisson(n, size=int(empty.sum()))
        empty = k == 0
    s_hat = rng.binomial(k, s_c) / k
    return s_hat, binary_entropy(s_hat)


def vaccine_ci(
    s_C: float,
    n: float,
    reps: int = DEFAULT_REPS,
    rng: np.random.Generator | None = None,
    workers: int = 1,
) -> tuple[tuple[float, float], tuple[float, float]]:
    """95% intervals for ``S_C`` and ``H_2`` from a Poisson(n)-trials mixed binomial process.

    Replicates are generated in fixed-size chunks, each with its own stream
    spawned from ``rng``, so the result does not depend on ``workers``.
    """
    if reps < 100:
        raise InvalidParameterError(f"reps must be >= 100, got {reps}")
    if not 0.0 <= s_C <= 1.0:
        raise InvalidParameterError(f"s_C must be a probability, got {s_C!r}")
    if rng is None:
        rng = np.random.default_rng()
    sizes = [CI_CHUNK] * (reps // CI_CHUNK) + ([reps % CI_CHUNK] if reps % CI_CHUNK else [])
    streams = rng.spawn(len(sizes))
    jobs = list(zip(sizes, streams))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _ci_chunk(s_C, n, *job), jobs))
    else:
        parts = [_ci_chunk(s_C, n, *job) for job in jobs]
    s_hat = np.sort(np.concatenate([p[0] for p in parts]))
    h_hat = np.sort(np.concatenate([p[1] for p in parts]))
    lo_s, hi_s = np.quantile(s_hat, [0.025, 0.975])
    lo_h, hi_h = np.quantile(h_hat, [0.025, 0.975])
    return (float(lo_s), float(hi_s)), (float(lo_h), float(hi_h))


@dataclass(frozen=True)
class VaccineReport:
    eff: float
    unc: float
    s_T: float
    s_C: float
    h2: float
    ci_sC: tuple[float, float]
    ci_h2: tuple[float, float]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci_sC"], d["ci_h2"] = list(self.ci_sC), list(self.ci_h2)
        return d


def vaccine_report(t: VaccineTrial, reps: int = DEFAULT_REPS, seed: int = 0) -> VaccineReport:
    eff = efficacy(t)
    s_t, s_c, h2 = vaccine_sensitivity(t)
    ci_s, ci_h = vaccine_ci(s_c, t.enrollees, reps, np.random.default_rng(seed))
    return VaccineReport(eff, risk_uncertainty(min(max(eff, 0.0), 1.0)), s_t, s_c, h2, ci_s, ci_h)


def vaccine_theoretical_moments(t: VaccineTrial, kappa: CountingMeasure) -> tuple[float, float, float]:
    """``(Var M f_T, Var M f_C, Cov(M f_T, M f_C))`` with plug-in infection risks."""
    M = RandomMeasure(kappa, _group_measure(t.weights), t.kernel())
    return var_Nf(M, _Y_T), var_Nf(M, _Y_C), cov_Nf(M, _Y_T, _Y_C)


# -- clinical endpoints ------------------------------------------------------


@dataclass(frozen=True)
class GroupStat:
    """Group mean with either a 95% interval ``(lower, upper)`` or a standard deviation."""

    mean: float
    lower: float | None = None
    upper: float | None = None
    sd: float | None = None

    def __post_init__(self):
        has_ci = self.lower is not None or self.upper is not None
        if has_ci and self.sd is not None:
            raise InvalidParameterError("give either a 95% interval or a standard deviation, not both")
        if has_ci:
            if self.lower is None or self.upper is None:
                raise InvalidParameterError("a 95% interval needs both bounds")
            if self.lower > self.upper:
                raise InvalidParameterError(f"interval bounds out of order: {self.lower} > {self.upper}")
        elif self.sd is None:
            raise InvalidParameterError("a group needs a 95% interval or a standard deviation")
        elif self.sd < 0:
            raise InvalidParameterError(f"standard deviation must be >= 0, got {self.sd}")


@dataclass(frozen=True)
class EndpointRecord:
    name: str
    treatment: GroupStat
    control: GroupStat


def dispersion_to_variance(g: GroupStat, rule: str = "normal392") -> tuple[float, float]:
    """``(mean, delta^2)`` of a group from its published dispersion.

    ``normal392`` reads the interval as mean +/- 1.96 sd and squares the sd.
    ``quarterwidth`` takes a quarter of the interval width as the variance itself.
    """
    if rule not in DISPERSION_RULES:
        raise InvalidParameterError(f"unknown dispersion rule {rule!r}; expected one of {DISPERSION_RULES}")
    if g.sd is not None:
        return g.mean, g.sd**2
    width = g.upper - g.lower
    if rule == "normal392":
        return g.mean, (width / Z975_WIDTH) ** 2
    return g.mean, width / 4.0


def endpoint_sensitivity(
    e: EndpointRecord, weights: tuple[float, float] = (0.5, 0.5), rule: str = "normal392"
) -> tuple[float, float, float]:
    kernel = Kernel({
        "T": MomentOnly(*dispersion_to_variance(e.treatment, rule)),
        "C": MomentOnly(*dispersion_to_variance(e.control, rule)),
    })
    try:
        S = sensitivity_measure(product(_group_measure(weights), kernel), _Y)
    except UndefinedQuantityError:
        raise UndefinedQuantityError(f"endpoint {e.name!r}: both arms have zero second moment") from None
    return S["T"], S["C"], entropy(S, base="binary")


ENDPOINT_COLUMNS = ("name", "t_mean", "t_lo", "t_hi", "t_sd", "c_mean", "c_lo", "c_hi", "c_sd")


def _optional(row: dict, key: str, line: int) -> float | None:
    raw = (row.get(key) or "").strip()
    if not raw:
        return None
    try:
        return float(raw)
    except ValueError:
        raise InvalidParameterError(f"line {line}: column {key!r} is not a number: {raw!r}") from None


def parse_endpoints_csv(text: str) -> list[EndpointRecord]:
    """Parse the endpoint table; blank cells mean absent."""
    if not text.strip():
        return []
    reader = csv.DictReader(io.StringIO(text))
    header = tuple(h.strip() for h in (reader.fieldnames or ()))
    if header != ENDPOINT_COLUMNS:
        raise InvalidParameterError(f"endpoint CSV header must be {','.join(ENDPOINT_COLUMNS)}; got {','.join(header)}")
    records = []
    for line, row in enumerate(reader, start=2):
        name = (row.get("name") or "").strip()
        arms = []
        for prefix in ("t", "c"):
            mean = _optional(row, f"{prefix}_mean", line)
            if mean is None:
                raise InvalidParameterError(f"line {line} ({name}): {prefix}_mean is required")
            try:
                arms.append(GroupStat(
                    mean,
                    _optional(row, f"{prefix}_lo", line),
                    _optional(row, f"{prefix}_hi", line),
                    _optional(row, f"{prefix}_sd", line),
                ))
            except InvalidParameterError as exc:
                raise InvalidParameterError(f"line {line} ({name}), arm {prefix}: {exc}") from None
        records.append(EndpointRecord(name, *arms))
    return records


def uncertainty_curve(step: float) -> list[tuple[float, float, float]]:
    """Rows ``(p, Unc(p), H_2(p))`` on ``p = 0, step, ..., 1``."""
    if not 0.0 < step <= 0.5:
        raise InvalidParameterError(f"step must lie in (0, 0.5], got {step!r}")
    count = math.floor(1.0 / step + 1e-9)
    grid = [round(k * step, 12) for k in range(count + 1)]
    if grid[-1] < 1.0:
        grid.append(1.0)
    return [curve_point(p) for p in grid]


def curve_point(p: float) -> tuple[float, float, float]:
    return p, risk_uncertainty(p), binary_entropy(p)


def endpoint_table(
    records: Iterable[EndpointRecord], weights: tuple[float, float] = (0.5, 0.5), rule: str = "normal392"
) -> list[tuple[str, float, float, float]]:
    return [(e.name, *endpoint_sensitivity(e, weights, rule)) for e in records]
