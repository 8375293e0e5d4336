"""Empirical robustness auditing and adversarial witness instances.

The worst-case ratio between an aggregator's squared error (distance to the
mean of a candidate honest subset) and that subset's variance is the
empirical robustness coefficient.  ``INFINITE_RATIO`` marks instances where
the subset variance vanishes but the aggregator output does not match the
subset mean; no such ratio exists, which is a stronger statement than any
finite value.  The marker is only ever assigned, never produced by
arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Optional

import numpy as np

from .aggregators import AggregatorSpec, aggregate, stack_points
from .errors import ParameterError

INFINITE_RATIO = math.inf

# Numerator at or below this is treated as zero when the denominator vanishes.
ZERO_ERROR_EPS = 1e-18


@dataclass(frozen=True)
class AuditResult:
    worst_ratio: float
    worst_subset: tuple
    samples_checked: int
    exhaustive: bool


@dataclass(frozen=True)
class WitnessInstance:
    points: np.ndarray
    honest_set: tuple          # 0-based client indices
    expected_ratio: float
    expected_output: Optional[np.ndarray]


def error_ratio(spec: AggregatorSpec, xs, honest_set) -> float:
    """Squared aggregation error over the variance of the honest subset.

    Returns 0 when both vanish and ``INFINITE_RATIO`` when only the variance
    does.
    """
    pts = stack_points(xs)
    subset = np.asarray(sorted(honest_set), dtype=np.intp)
    if subset.size == 0 or subset.min() < 0 or subset.max() >= pts.shape[0]:
        raise ParameterError("honest_set must be a nonempty subset of client indices")
    if np.unique(subset).size != subset.size:
        raise ParameterError("honest_set contains repeated indices")
    output = aggregate(spec, pts)
    return _ratio_for_output(output, pts, subset)


def _ratio_for_output(output: np.ndarray, pts: np.ndarray, subset: np.ndarray) -> float:
    chosen = pts[subset]
    center = chosen.mean(axis=0)
    err = float(np.sum((output - center) ** 2))
    var = float(((chosen - center) ** 2).sum(axis=1).mean())
    if var == 0.0:
        return 0.0 if err <= ZERO_ERROR_EPS else INFINITE_RATIO
    return err / var


@lru_cache(maxsize=128)
def _all_subsets(n: int, size: int) -> np.ndarray:
    return np.array(list(combinations(range(n), size)), dtype=np.intp)


def _batch_ratios(output: np.ndarray, pts: np.ndarray, subsets: np.ndarray) -> np.ndarray:
    """Ratios for many subsets at once; subsets is (num, size)."""
    chosen = pts[subsets]                       # (num, size, d)
    centers = chosen.mean(axis=1)               # (num, d)
    err = ((output[None, :] - centers) ** 2).sum(axis=1)
    var = ((chosen - centers[:, None, :]) ** 2).sum(axis=2).mean(axis=1)
    ratios = np.empty(subsets.shape[0])
    zero = var == 0.0
    np.divide(err, var, out=ratios, where=~zero)
    ratios[zero] = np.where(err[zero] <= ZERO_ERROR_EPS, 0.0, INFINITE_RATIO)
    return ratios


def empirical_kappa(
    spec: AggregatorSpec,
    xs,
    f: int,
    subset_budget: int = 20000,
    seed: int = 0,
) -> AuditResult:
    """Maximize :func:`error_ratio` over honest subsets of size n - f.

    Enumerates every subset when C(n, f) fits in ``subset_budget``; otherwise
    checks ``subset_budget`` seeded uniform samples plus the two deterministic
    subsets {first n-f} and {last n-f} and reports ``exhaustive=False``.
    """
    pts = stack_points(xs)
    n = pts.shape[0]
    if not 0 <= f < n / 2:
        raise ParameterError(f"require 0 <= f < n/2, got f={f} with n={n}")
    size = n - f
    output = aggregate(spec, pts)
    exhaustive = math.comb(n, f) <= subset_budget
    if exhaustive:
        subsets = _all_subsets(n, size)
    else:
        rng = np.random.default_rng(seed)
        sampled = np.argsort(rng.random((subset_budget, n)), axis=1)[:, :size]
        sampled.sort(axis=1)
        anchors = np.array([list(range(size)), list(range(f, n))], dtype=np.intp)
        subsets = np.vstack([anchors, sampled])
    ratios = _batch_ratios(output, pts, subsets)
    worst = int(np.argmax(ratios))
    return AuditResult(
        worst_ratio=float(ratios[worst]),
        worst_subset=tuple(int(i) for i in subsets[worst]),
        samples_checked=subsets.shape[0],
        exhaustive=exhaustive,
    )


def lower_bound_witness(n: int, f: int, f_hat: int, d: int = 1) -> WitnessInstance:
    """Instance on which every reasonable aggregator with robustness degree
    f_hat attains ratio exactly f_hat/(n - f - f_hat).

    The first n - f_hat points are zero and the rest are the first basis
    vector; zero variance on the all-zeros subset forces the aggregator
    output to zero, while the audited honest set {f, ..., n-1} mixes in the
    nonzero points.
    """
    if not 0 <= f <= f_hat < n / 2:
        raise ParameterError(f"require 0 <= f <= f_hat < n/2, got f={f}, f_hat={f_hat}, n={n}")
    points = np.zeros((n, d))
    points[n - f_hat :, 0] = 1.0
    expected_ratio = f_hat / (n - f - f_hat)
    return WitnessInstance(
        points=points,
        honest_set=tuple(range(f, n)),
        expected_ratio=expected_ratio,
        expected_output=np.zeros(d),
    )


def cwtm_break_witness(n: int, f: int, f_hat: int, d: int = 1) -> WitnessInstance:
    """Instance showing a trimmed mean configured for f_hat < f Byzantine
    clients admits no finite robustness coefficient.

    The n - f honest points are zero with zero variance, yet trimming only
    f_hat per side leaves f - f_hat of the Byzantine ones in the average, so
    the output (f - f_hat)/(n - 2 f_hat) is pulled off the honest mean.
    """
    if not 0 <= f_hat < f < n / 2:
        raise ParameterError(
            f"witness needs underestimation 0 <= f_hat < f < n/2, got f={f}, f_hat={f_hat}, n={n}"
        )
    points = np.zeros((n, d))
    points[n - f :, 0] = 1.0
    expected_output = np.zeros(d)
    expected_output[0] = (f - f_hat) / (n - 2 * f_hat)
    return WitnessInstance(
        points=points,
        honest_set=tuple(range(n - f)),
        expected_ratio=INFINITE_RATIO,
        expected_output=expected_output,
    )


def random_cloud(n: int, d: int, seed) -> np.ndarray:
    """Fuzz instance: standard normal cloud scaled by a random radius in
    [0.1, 10] (exercises scaling equivariance while staying conditioned)."""
    rng = np.random.default_rng(seed)
    radius = rng.uniform(0.1, 10.0)
    return radius * rng.standard_normal((n, d))


def to_jsonl_row(spec: AggregatorSpec, n: int, f: int, result: AuditResult, seed: int) -> dict:
    """Serializable summary of one audit (infinite marker becomes "inf")."""
    ratio = result.worst_ratio
    return {
        "aggregator": spec.name,
        "n": n,
        "f": f,
        "f_hat": spec.f_hat,
        "worst_ratio": "inf" if math.isinf(ratio) else ratio,
        "exhaustive": result.exhaustive,
        "seed": seed,
    }
