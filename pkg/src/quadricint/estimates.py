"""Result containers for Monte Carlo estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class StratumEstimate:
    name: str
    value: float
    std_error: float
    n_samples: int


@dataclass(frozen=True)
class IntegralEstimate:
    """Value with statistical error and per-stratum breakdown."""

    value: float
    std_error: float
    n_samples: int
    strata: tuple[StratumEstimate, ...] = field(default_factory=tuple)
    converged: bool = True

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("estimate value must be finite")
        if self.std_error < 0:
            raise ValueError("std_error must be >= 0")

    @staticmethod
    def from_strata(strata: list[StratumEstimate], converged: bool = True) -> "IntegralEstimate":
        value = sum(s.value for s in strata)
        se = math.sqrt(sum(s.std_error ** 2 for s in strata))
        n = sum(s.n_samples for s in strata)
        return IntegralEstimate(value, se, n, tuple(strata), converged)


def mean_and_se(total: float, total_sq: float, n: int) -> tuple[float, float]:
    """Mean and standard error of the mean from raw first/second moments."""
    if n <= 0:
        return 0.0, 0.0
    mean = total / n
    if n == 1:
        return mean, abs(mean)
    var = max(0.0, total_sq / n - mean * mean) * n / (n - 1)
    return mean, math.sqrt(var / n)
