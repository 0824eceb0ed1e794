"""
Closed-form channel access success probability for two overlapping BSSs

STAs are placed by a Poisson point process over two equal disks of radius r
whose centres are d apart. A reference-BSS STA fails when another frame
lands in its 2*tau vulnerable window, either from the exclusive part of its
own disk or from the overlap with the neighbouring BSS. Trigger-based and
sharing-based access only change the aggregate contention rate of the
reference-BSS exclusive area.
"""

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy import stats
from scipy.special import gammaln, xlogy

logger = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """Raised when a truncated Poisson series cannot reach its tolerance"""


class ProtocolKind(str, Enum):
    EDCA = "edca"
    TRIGGER_BASED = "trigger"
    SHARING_BASED = "sharing"

    @classmethod
    def parse(cls, name: str) -> "ProtocolKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(p.value for p in cls)
            raise ValueError(f"Unknown protocol {name!r} (expected one of: {valid})")


ALL_PROTOCOLS = (ProtocolKind.EDCA, ProtocolKind.TRIGGER_BASED, ProtocolKind.SHARING_BASED)


def _check_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value}")


@dataclass(frozen=True)
class AnalyticParams:
    """Every symbol of the statistical model in one validated record"""

    r: float = 10.0
    d: float = 15.0
    lambda_A: float = 0.1
    lambda_B: float = 0.1
    tau: float = 0.005
    a: float = 500.0
    beta: float = 1.0
    omega: float = 100.0
    rho_trigger: float = 0.5
    rho_share: float = 0.5

    def __post_init__(self):
        _check_finite(
            r=self.r,
            d=self.d,
            lambda_A=self.lambda_A,
            lambda_B=self.lambda_B,
            tau=self.tau,
            a=self.a,
            beta=self.beta,
            omega=self.omega,
            rho_trigger=self.rho_trigger,
            rho_share=self.rho_share,
        )
        for name in ("r", "tau", "a", "beta", "omega"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("d", "lambda_A", "lambda_B"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("rho_trigger", "rho_share"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {getattr(self, name)}")

    @property
    def lambda_exclusive(self) -> float:
        """Per-STA frame rate in the exclusive area, 1/(a*tau)"""
        return 1.0 / (self.a * self.tau)

    @property
    def lambda_overlap(self) -> float:
        """Per-STA frame rate in the overlap area, 1/(beta*tau)"""
        return 1.0 / (self.beta * self.tau)

    @property
    def lambda_trigger(self) -> float:
        """Trigger frame generation rate, 1/(omega*tau)"""
        return 1.0 / (self.omega * self.tau)

    def with_changes(self, **changes) -> "AnalyticParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class ModelOptions:
    """Evaluation knobs that are not part of the model itself"""

    sum_start: int = 1
    fast_path: bool = True
    tolerance: float = 1e-12
    lens_formula: str = "printed"

    def __post_init__(self):
        if self.sum_start not in (0, 1):
            raise ValueError(f"sum_start must be 0 or 1, got {self.sum_start}")
        if not 0 < self.tolerance < 1:
            raise ValueError(f"tolerance must lie in (0, 1), got {self.tolerance}")
        if self.lens_formula not in ("printed", "exact"):
            raise ValueError(f"lens_formula must be 'printed' or 'exact', got {self.lens_formula!r}")


DEFAULT_OPTIONS = ModelOptions()

# With the sums starting at 1 the curves are only meaningful from here on
MIN_VALID_DISTANCE_M = 3.0


@dataclass(frozen=True)
class Geometry:
    area_total: float
    area_overlap: float
    area_exclusive: float

    @classmethod
    def of(cls, params: AnalyticParams, formula: str = "printed") -> "Geometry":
        total = math.pi * params.r**2
        overlap = lens_overlap_area(params.r, params.d, formula=formula)
        return cls(area_total=total, area_overlap=overlap, area_exclusive=total - overlap)


@dataclass(frozen=True)
class SuccessResult:
    p_fail_exclusive: float
    p_fail_overlap: float
    p_success: float
    tail_bound: float = 0.0


def lens_overlap_area(r: float, d: float, formula: str = "printed") -> float:
    """
    Overlap area of two radius-r disks whose centres are d apart.

    The default keeps the d/4 coefficient the model is stated with; the
    "exact" formula is the geometric equal-circle lens (d/2), which is what a
    point-sampling estimate converges to.
    """
    _check_finite(r=r, d=d)
    if r <= 0:
        raise ValueError(f"r must be > 0, got {r}")
    if d < 0:
        raise ValueError(f"d must be >= 0, got {d}")
    if d >= 2 * r:
        return 0.0

    coefficient = {"printed": 0.25, "exact": 0.5}.get(formula)
    if coefficient is None:
        raise ValueError(f"Unknown lens formula: {formula!r}")

    area = 2 * r**2 * math.acos(d / (2 * r)) - coefficient * d * math.sqrt(4 * r**2 - d**2)
    return min(max(area, 0.0), math.pi * r**2)


def monte_carlo_overlap_area(r: float, d: float, samples: int = 1_000_000, seed: int = 0) -> float:
    """Estimate the lens area by sampling points in the first disk's bounding box"""
    rng = np.random.default_rng(seed)
    points = rng.uniform(-r, r, size=(samples, 2))
    in_first = np.hypot(points[:, 0], points[:, 1]) <= r
    in_second = np.hypot(points[:, 0] - d, points[:, 1]) <= r
    return float(np.mean(in_first & in_second) * (2 * r) ** 2)


def poisson_pmf(mean: float, k: int) -> float:
    """mean^k / k! * exp(-mean), evaluated in log space"""
    if mean < 0 or not math.isfinite(mean):
        raise ValueError(f"Poisson mean must be finite and >= 0, got {mean}")
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    return float(np.exp(xlogy(k, mean) - mean - gammaln(k + 1)))


def _poisson_terms(mean: float, start: int, stop: int) -> np.ndarray:
    k = np.arange(start, stop + 1)
    return np.exp(xlogy(k, mean) - mean - gammaln(k + 1))


def _poisson_tail(mean: float, last: int) -> float:
    """Probability mass strictly beyond `last`"""
    if mean == 0:
        return 0.0
    return float(stats.poisson.sf(last, mean))


def _truncation_point(mean: float, tolerance: float) -> int:
    cap = int(math.ceil(10 * mean)) + 200
    last = max(1, int(math.ceil(mean)))
    while _poisson_tail(mean, last) >= tolerance:
        if last >= cap:
            raise ConvergenceError(
                f"Poisson tail with mean {mean:.6g} still {_poisson_tail(mean, cap):.3g} at cap {cap}"
            )
        last = min(cap, last * 2)
    return last


def _rate_coefficients(protocol: ProtocolKind, params: AnalyticParams) -> Tuple[float, float]:
    """(slope per STA, additive constant) of the exclusive-area aggregate rate"""
    lam = params.lambda_exclusive
    if protocol is ProtocolKind.EDCA:
        return lam, 0.0
    if protocol is ProtocolKind.TRIGGER_BASED:
        return lam * (1 - params.rho_trigger), params.lambda_trigger
    if protocol is ProtocolKind.SHARING_BASED:
        return lam * (1 - params.rho_share), lam
    raise ValueError(f"Unknown protocol: {protocol}")


def effective_exclusive_rate(protocol: ProtocolKind, i: int, params: AnalyticParams) -> float:
    """Aggregate contention rate of i reference-BSS STAs in the exclusive area"""
    if i < 0:
        raise ValueError(f"i must be >= 0, got {i}")
    slope, constant = _rate_coefficients(protocol, params)
    return i * slope + constant


def _means(params: AnalyticParams, geometry: Geometry) -> Tuple[float, float]:
    mean_exclusive = params.lambda_A * geometry.area_exclusive
    mean_overlap = (params.lambda_A + params.lambda_B) * geometry.area_overlap
    return mean_exclusive, mean_overlap


def _series_exclusive(
    protocol: ProtocolKind, params: AnalyticParams, mean: float, start: int, last: int
) -> float:
    if last < start:
        return 0.0
    slope, constant = _rate_coefficients(protocol, params)
    i = np.arange(start, last + 1)
    miss = -np.expm1(-2 * params.tau * (slope * i + constant))
    return float(np.sum(_poisson_terms(mean, start, last) * miss))


def _series_overlap(
    protocol: ProtocolKind,
    params: AnalyticParams,
    mean_exclusive: float,
    mean_overlap: float,
    start: int,
    last_i: int,
    last_j: int,
) -> float:
    if last_i < start or last_j < start:
        return 0.0
    slope, constant = _rate_coefficients(protocol, params)
    i = np.arange(start, last_i + 1)
    j = np.arange(start, last_j + 1)
    rate = (slope * i + constant)[:, None] + params.lambda_overlap * j[None, :]
    weights = np.outer(
        _poisson_terms(mean_exclusive, start, last_i),
        _poisson_terms(mean_overlap, start, last_j),
    )
    return float(np.sum(weights * -np.expm1(-2 * params.tau * rate)))


def _closed_form_exclusive(protocol: ProtocolKind, params: AnalyticParams, mean: float, start: int) -> float:
    slope, constant = _rate_coefficients(protocol, params)
    hit = _generating_sum(mean, 2 * params.tau * slope, 2 * params.tau * constant, start)
    return _mass_from(mean, start) - hit


def _mass_from(mean: float, start: int) -> float:
    """Poisson mass at counts >= start (start is 0 or 1)"""
    return 1.0 if start == 0 else -math.expm1(-mean)


def _generating_sum(mean: float, per_count: float, constant: float, start: int) -> float:
    """sum_{k >= start} Pois(k; mean) * exp(-(per_count * k + constant))"""
    total = math.exp(-constant - mean * -math.expm1(-per_count))
    if start == 1:
        total -= math.exp(-mean - constant)
    return max(total, 0.0)


def _closed_form_overlap(
    protocol: ProtocolKind,
    params: AnalyticParams,
    mean_exclusive: float,
    mean_overlap: float,
    start: int,
) -> float:
    slope, constant = _rate_coefficients(protocol, params)
    both = _mass_from(mean_exclusive, start) * _mass_from(mean_overlap, start)
    hit_i = _generating_sum(mean_exclusive, 2 * params.tau * slope, 2 * params.tau * constant, start)
    hit_j = _generating_sum(mean_overlap, 2 * params.tau * params.lambda_overlap, 0.0, start)
    return both - hit_i * hit_j


def _clip(p: float) -> float:
    return min(max(p, 0.0), 1.0)


def fail_prob_exclusive(
    protocol: ProtocolKind, params: AnalyticParams, options: ModelOptions = DEFAULT_OPTIONS
) -> float:
    """Probability of an intra-BSS collision for a STA in the exclusive area"""
    geometry = Geometry.of(params, options.lens_formula)
    mean, _ = _means(params, geometry)
    if options.fast_path:
        return _clip(_closed_form_exclusive(protocol, params, mean, options.sum_start))
    last = _truncation_point(mean, options.tolerance)
    return _clip(_series_exclusive(protocol, params, mean, options.sum_start, last))


def fail_prob_overlap(
    protocol: ProtocolKind, params: AnalyticParams, options: ModelOptions = DEFAULT_OPTIONS
) -> float:
    """
    Probability of an intra- or inter-BSS collision for a STA in the overlap area.

    With sum_start=1 a failure needs at least one contender in the exclusive
    area as well as in the overlap area. As d goes to 0 the exclusive area
    vanishes, so this term goes to 0 and the success probability climbs back
    to 1; below MIN_VALID_DISTANCE_M the curve is an artefact of that form.
    sum_start=0 drops the requirement.
    """
    geometry = Geometry.of(params, options.lens_formula)
    if geometry.area_overlap == 0:
        return 0.0
    mean_exclusive, mean_overlap = _means(params, geometry)
    if options.fast_path:
        value = _closed_form_overlap(protocol, params, mean_exclusive, mean_overlap, options.sum_start)
        return _clip(value)
    last_i = _truncation_point(mean_exclusive, options.tolerance)
    last_j = _truncation_point(mean_overlap, options.tolerance)
    value = _series_overlap(
        protocol, params, mean_exclusive, mean_overlap, options.sum_start, last_i, last_j
    )
    return _clip(value)


def _combine(geometry: Geometry, p_exclusive: float, p_overlap: float, tail: float = 0.0) -> SuccessResult:
    # Both failure terms are subtracted; a "+" on the overlap term cannot
    # yield a probability.
    weight_exclusive = geometry.area_exclusive / geometry.area_total
    weight_overlap = geometry.area_overlap / geometry.area_total
    p_success = 1.0 - weight_exclusive * p_exclusive - weight_overlap * p_overlap
    return SuccessResult(
        p_fail_exclusive=p_exclusive,
        p_fail_overlap=p_overlap,
        p_success=_clip(p_success),
        tail_bound=tail,
    )


def success_probability(
    protocol: ProtocolKind, params: AnalyticParams, options: ModelOptions = DEFAULT_OPTIONS
) -> SuccessResult:
    """Area-weighted success probability; see fail_prob_overlap for its behaviour at small d"""
    geometry = Geometry.of(params, options.lens_formula)
    p_exclusive = fail_prob_exclusive(protocol, params, options)
    p_overlap = fail_prob_overlap(protocol, params, options)
    return _combine(geometry, p_exclusive, p_overlap)


def series_oracle(
    protocol: ProtocolKind,
    params: AnalyticParams,
    i_max: int,
    j_max: int,
    options: ModelOptions = DEFAULT_OPTIONS,
) -> SuccessResult:
    """
    Brute-force double summation with caller-controlled truncation.

    tail_bound is the Poisson mass left out of the i and j sums; every
    omitted term is at most 1 so it bounds the truncation error of both
    failure probabilities.
    """
    if i_max < 1 or j_max < 1:
        raise ValueError(f"i_max and j_max must be >= 1, got {i_max}, {j_max}")

    geometry = Geometry.of(params, options.lens_formula)
    mean_exclusive, mean_overlap = _means(params, geometry)
    start = options.sum_start

    p_exclusive = _series_exclusive(protocol, params, mean_exclusive, start, i_max)
    if geometry.area_overlap == 0:
        p_overlap = 0.0
        tail = _poisson_tail(mean_exclusive, i_max)
    else:
        p_overlap = _series_overlap(
            protocol, params, mean_exclusive, mean_overlap, start, i_max, j_max
        )
        tail = _poisson_tail(mean_exclusive, i_max) + _poisson_tail(mean_overlap, j_max)

    return _combine(geometry, _clip(p_exclusive), _clip(p_overlap), tail)


def standalone_exclusive_failure(
    mean: float,
    rate_per_sta: float,
    tau: float,
    constant: float = 0.0,
    start: int = 1,
    last: int = 1000,
) -> float:
    """Single-BSS exclusive-area model evaluated term by term"""
    total = 0.0
    for i in range(start, last + 1):
        total += poisson_pmf(mean, i) * (1.0 - math.exp(-2 * tau * (i * rate_per_sta + constant)))
    return total


@dataclass(frozen=True)
class CurveRow:
    protocol: ProtocolKind
    x: float
    result: SuccessResult


@dataclass
class CurveTable:
    """Per-protocol (x, p_success) curves, in insertion order"""

    x_name: str
    rows: List[CurveRow] = field(default_factory=list)

    HEADER = ("protocol", "x", "p_fail_exclusive", "p_fail_overlap", "p_success")

    def curve(self, protocol: ProtocolKind) -> List[Tuple[float, float]]:
        return [(row.x, row.result.p_success) for row in self.rows if row.protocol is protocol]

    def protocols(self) -> List[ProtocolKind]:
        seen: List[ProtocolKind] = []
        for row in self.rows:
            if row.protocol not in seen:
                seen.append(row.protocol)
        return seen

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.HEADER)
        for row in self.rows:
            writer.writerow(
                [
                    row.protocol.value,
                    f"{row.x:.9g}",
                    f"{row.result.p_fail_exclusive:.9g}",
                    f"{row.result.p_fail_overlap:.9g}",
                    f"{row.result.p_success:.9g}",
                ]
            )
        return buffer.getvalue()

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as f:
            f.write(self.to_csv())
        logger.info(f"Wrote {len(self.rows)} curve rows to {path}")


def _sweep(
    protocols: Sequence[ProtocolKind],
    points: Iterable[Tuple[float, AnalyticParams]],
    x_name: str,
    options: ModelOptions,
) -> CurveTable:
    table = CurveTable(x_name=x_name)
    points = list(points)
    for protocol in protocols:
        for x, params in points:
            table.rows.append(CurveRow(protocol, x, success_probability(protocol, params, options)))
    return table


def sweep_distance(
    protocols: Sequence[ProtocolKind],
    params: AnalyticParams,
    d_values: Sequence[float],
    options: ModelOptions = DEFAULT_OPTIONS,
) -> CurveTable:
    if not d_values:
        raise ValueError("d_values must not be empty")
    if any(d < 0 for d in d_values):
        raise ValueError("every d must be >= 0")
    points = [(float(d), params.with_changes(d=float(d))) for d in d_values]
    return _sweep(protocols, points, "d", options)


def sweep_participation(
    protocols: Sequence[ProtocolKind],
    params: AnalyticParams,
    rho_values: Sequence[float],
    options: ModelOptions = DEFAULT_OPTIONS,
) -> CurveTable:
    if not rho_values:
        raise ValueError("rho_values must not be empty")
    if any(not 0.0 <= rho <= 1.0 for rho in rho_values):
        raise ValueError("every rho must lie in [0, 1]")
    points = [
        (float(rho), params.with_changes(rho_share=float(rho), rho_trigger=float(rho)))
        for rho in rho_values
    ]
    return _sweep(protocols, points, "rho", options)


def grid(stop: float, step: float, start: float = 0.0) -> List[float]:
    """Inclusive evenly spaced grid, robust to float step accumulation"""
    if step <= 0:
        raise ValueError(f"step must be > 0, got {step}")
    if stop < start:
        raise ValueError(f"stop must be >= start, got {stop} < {start}")
    count = int(round((stop - start) / step)) + 1
    return [round(start + k * step, 12) for k in range(count)]
