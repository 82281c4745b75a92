from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats

from app.errors import ConfigurationError

# Коэффициент критического значения KS для уровня 1 %
KS_COEFFICIENT_1PCT = 1.628


@dataclass(frozen=True, eq=False)
class Histogram:
    """Равномерные полуоткрытые бины [lo, hi); значения вне диапазона идут в under/overflow."""

    edges: np.ndarray
    counts: np.ndarray
    total: int
    underflow: int
    overflow: int
    # по всем значениям, не только попавшим в диапазон
    sample_mean: float
    sample_se: float

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def n_bins(self) -> int:
        return len(self.counts)


class KsResult(NamedTuple):
    statistic: float
    pvalue: float
    critical_1pct: float

    @property
    def passes(self) -> bool:
        return self.statistic < self.critical_1pct


def make_histogram(values, n_bins: int, value_range: tuple[float, float]) -> Histogram:
    lo, hi = (float(v) for v in value_range)
    if n_bins < 1:
        raise ConfigurationError(f"n_bins должно быть >= 1, получено {n_bins}")
    if not lo < hi:
        raise ConfigurationError(f"пустой диапазон гистограммы [{lo}, {hi})")

    values = np.asarray(values, dtype=np.float64).ravel()
    edges = np.linspace(lo, hi, n_bins + 1)
    # side="right": значение на границе e_k попадает в бин k
    idx = np.searchsorted(edges, values, side="right") - 1
    underflow = int(np.count_nonzero(idx < 0))
    overflow = int(np.count_nonzero(idx >= n_bins))
    inside = idx[(idx >= 0) & (idx < n_bins)]
    counts = np.bincount(inside, minlength=n_bins).astype(np.int64)

    total = int(values.size)
    mean = float(values.mean()) if total else 0.0
    se = float(values.std(ddof=1)) / math.sqrt(total) if total > 1 else 0.0
    return Histogram(
        edges=edges,
        counts=counts,
        total=total,
        underflow=underflow,
        overflow=overflow,
        sample_mean=mean,
        sample_se=se,
    )


def ks_critical_1pct(n: int, m: int) -> float:
    return KS_COEFFICIENT_1PCT * math.sqrt((n + m) / (n * m))


def ks_two_sample(a, b) -> KsResult:
    """Двухвыборочный критерий Колмогорова-Смирнова по исходным значениям (не по бинам)."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ConfigurationError("для критерия KS нужны непустые выборки")
    result = stats.ks_2samp(a, b)
    return KsResult(float(result.statistic), float(result.pvalue), ks_critical_1pct(a.size, b.size))
