"""Random-scaling inference for averaged stochastic-approximation iterates.

Let ybar_n denote the projected running mean theta'xbar_n over the
post-warm-up window of length T, and define the self-normalizing values

    phi_{n,T} = (n / sqrt(T)) * (ybar_n - ybar_T),   n = 1..T.

The scale statistic of order m is the discrete L^m norm

    sigma_{m,T} = [ (1/T) * sum_n |phi_{n,T}|^m ]**(1/m)

(sup over n for m = infinity). Because the pivot
sqrt(T) * (ybar_T - target) / sigma_{m,T} has a parameter-free limit law,
a confidence interval follows by inversion with a simulated critical value
(see critvals). For even m the statistic is computable online in O(1)
memory from the m+1 running sums S_k = sum_n n^m ybar_n^k via the binomial
expansion of (ybar_n - ybar_T)^m; RandomScalingAccumulator maintains those
sums. Odd m and m = infinity require the stored sequence.

The rectangle rule above is the production default; trapezoid_m2 provides
the exact piecewise-linear integral for m = 2 as a cross-check. Odd m also
uses the breakpoint rectangle rule (splitting at zero crossings of the
piecewise-linear interpolant is deliberately avoided).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

MOrder = Union[int, float]  # an integer >= 1, or math.inf


class DegeneratePivotError(ValueError):
    """The scale statistic vanished, so the pivot is undefined."""


class RandomScalingAccumulator:
    """Online state for sigma_{m,T} with even m: the m+1 sums
    S_k = sum_{n<=t} n^m * ybar_n^k, updated in O(m) per step."""

    def __init__(self, m: int):
        if m < 2 or m % 2 != 0:
            raise ValueError(f"online accumulation needs even m >= 2, got {m}")
        self.m = m
        self.t = 0
        self._S = [0.0] * (m + 1)
        self._binom = [math.comb(m, k) for k in range(m + 1)]

    @property
    def sums(self) -> np.ndarray:
        return np.array(self._S)

    def update(self, ybar_t: float) -> None:
        """Absorb the projected running mean of the next step."""
        self.t += 1
        term = float(self.t) ** self.m
        S = self._S
        for k in range(self.m + 1):
            S[k] += term
            term *= ybar_t

    def sigma(self, ybar_T: float) -> float:
        """sigma_{m,T} evaluated against the final running mean ybar_T.

        Floating cancellation can push the accumulated m-th power slightly
        negative; it is clamped at zero, with a warning when the deficit
        exceeds 1e-9 of the term scale (nearly-constant sequences riding a
        large offset can genuinely lose that much precision).
        """
        T = self.t
        if T < 1:
            raise ValueError("no steps absorbed")
        norm = float(T) ** (self.m / 2 + 1)
        total = 0.0
        scale = 0.0
        sign_y = -ybar_T
        for k in range(self.m + 1):
            term = self._binom[k] * sign_y ** (self.m - k) * self._S[k]
            total += term
            scale += abs(term)
        raw = total / norm
        if raw < -1e-9 * scale / norm:
            warnings.warn(f"sigma^{self.m} = {raw} is negative beyond "
                          "rounding; result clamped to 0", RuntimeWarning)
        return max(raw, 0.0) ** (1.0 / self.m)


def _phi(ybar: np.ndarray) -> np.ndarray:
    T = ybar.shape[0]
    n = np.arange(1, T + 1)
    return n / math.sqrt(T) * (ybar - ybar[-1])


def sigma_m_offline(ybar, m: MOrder) -> float:
    """Scale statistic from the stored running-mean sequence.

    Finite m gives [(1/T) sum |phi_{n,T}|^m]**(1/m); m = math.inf gives
    max_n |phi_{n,T}| (the sup of the piecewise-linear interpolant is
    attained at a breakpoint). Cross-validates the online accumulator for
    even m and is the only route for odd m and m = infinity.
    """
    ybar = np.asarray(ybar, dtype=float)
    if ybar.size == 0:
        raise ValueError("empty trajectory")
    phi = _phi(ybar)
    if m == math.inf:
        return float(np.abs(phi).max())
    m = int(m)
    if m < 1:
        raise ValueError(f"m must be >= 1 or inf, got {m}")
    return float(np.mean(np.abs(phi) ** m) ** (1.0 / m))


def trapezoid_m2(ybar) -> float:
    """Exact sqrt of the integral of the squared centered interpolant.

    Uses the closed form sum_{n=0}^{T-1} (phi_n^2 + phi_n phi_{n+1}
    + phi_{n+1}^2) / (3T) with phi_0 = 0, which integrates the
    piecewise-linear process exactly; the rectangle rule replaces each
    summand by phi_{n+1}^2 / T.
    """
    ybar = np.asarray(ybar, dtype=float)
    if ybar.size == 0:
        raise ValueError("empty trajectory")
    T = ybar.shape[0]
    phi = np.concatenate(([0.0], _phi(ybar)))
    lo, hi = phi[:-1], phi[1:]
    return math.sqrt(float(np.sum(lo * lo + lo * hi + hi * hi)) / (3 * T))


def f_m_statistic(ybar_T: float, target: float, sigma: float, T: int) -> float:
    """Pivot sqrt(T) * (ybar_T - target) / sigma for a hypothesized target."""
    if sigma <= 0.0:
        raise DegeneratePivotError("scale statistic is zero")
    return math.sqrt(T) * (ybar_T - target) / sigma


@dataclass(frozen=True)
class ConfidenceInterval:
    """Two-sided interval [center - halfwidth, center + halfwidth]."""

    center: float
    halfwidth: float
    level: float
    m: Optional[MOrder] = None

    def __post_init__(self):
        if self.halfwidth < 0:
            raise ValueError("halfwidth must be nonnegative")

    @classmethod
    def from_bounds(cls, lo: float, hi: float, level: float,
                    m: Optional[MOrder] = None) -> "ConfidenceInterval":
        return cls(center=(lo + hi) / 2.0, halfwidth=(hi - lo) / 2.0,
                   level=level, m=m)

    @property
    def lo(self) -> float:
        return self.center - self.halfwidth

    @property
    def hi(self) -> float:
        return self.center + self.halfwidth

    @property
    def length(self) -> float:
        return 2.0 * self.halfwidth

    @property
    def degenerate(self) -> bool:
        return self.halfwidth == 0.0

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi


def confidence_interval(ybar_T: float, sigma_mT: float, q: float, T: int,
                        level: float, m: Optional[MOrder] = None
                        ) -> ConfidenceInterval:
    """Invert the pivot: ybar_T +/- q * sigma_{m,T} / sqrt(T).

    A zero sigma yields a zero-width interval, flagged through the
    ``degenerate`` property rather than an error.
    """
    if q < 0:
        raise ValueError("critical value must be nonnegative")
    if T < 1:
        raise ValueError("T must be >= 1")
    return ConfidenceInterval(center=ybar_T,
                              halfwidth=q * sigma_mT / math.sqrt(T),
                              level=level, m=m)
