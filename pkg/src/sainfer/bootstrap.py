"""Online multiplier-bootstrap comparator for linear SA.

B perturbed chains share every data point with an unperturbed base chain;
chain b applies x <- x - eta * W_b * H(x, xi) with i.i.d. multipliers W_b
of mean one and variance one (here 1 + Rademacher, i.e. {0, 2} with equal
probability). The spread of the B averaged chains around the base average
approximates the sampling distribution of the estimator, inverted into a
basic-bootstrap confidence interval. Evaluating H at B+1 different iterates
for one xi requires the multiple-oracle access that only simulation
provides, which is the cost asymmetry this baseline exists to expose; the
ensemble counts its oracle evaluations for that reason.

Only the linear-regression problem is wired up (the method's guarantees do
not extend to the nonlinear problems in this package).
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .engine import StepSchedule
from .inference import ConfidenceInterval

MIN_CHAINS = 20


def batch_oracle_linreg(X: np.ndarray, data) -> np.ndarray:
    """Row-wise squared-loss gradients a * (<a, x_b> - y) for iterates X."""
    a, y = data
    return (X @ a - y)[:, None] * a[None, :]


def rademacher_plus_one(rng: np.random.Generator, size: int) -> np.ndarray:
    """Multipliers on {0, 2} with equal probability: bounded, mean 1, var 1."""
    return 2.0 * rng.integers(0, 2, size=size).astype(float)


class BootstrapEnsemble:
    """Base chain plus B multiplier-perturbed chains sharing one stream."""

    def __init__(self, dim: int, B: int, rng: np.random.Generator,
                 batch_oracle: Callable = batch_oracle_linreg,
                 multiplier: Callable = rademacher_plus_one,
                 x0: Optional[np.ndarray] = None):
        if B < 1:
            raise ValueError("B must be >= 1")
        self.B = B
        self.rng = rng
        self.batch_oracle = batch_oracle
        self.multiplier = multiplier
        # row 0 is the unperturbed base chain
        self.chains = np.zeros((B + 1, dim))
        if x0 is not None:
            self.chains[:] = np.asarray(x0, dtype=float)[None, :]
        self._sums = np.zeros((B + 1, dim))
        self.averaged_steps = 0
        self.oracle_calls = 0

    def step(self, data, eta: float, accumulate: bool = True) -> None:
        """Advance all chains on one shared data point.

        The base chain takes the unperturbed update; each bootstrap chain
        scales its increment by a fresh multiplier. With ``accumulate``
        false the step counts as warm-up and is excluded from the chain
        averages.
        """
        H = self.batch_oracle(self.chains, data)
        self.oracle_calls += self.B + 1
        w = np.empty(self.B + 1)
        w[0] = 1.0
        w[1:] = self.multiplier(self.rng, self.B)
        self.chains -= eta * w[:, None] * H
        if accumulate:
            self.averaged_steps += 1
            self._sums += self.chains

    @property
    def chain_means(self) -> np.ndarray:
        if self.averaged_steps == 0:
            raise ValueError("no post-warm-up steps accumulated")
        return self._sums / self.averaged_steps

    def alive(self) -> np.ndarray:
        """Mask of bootstrap chains that stayed finite (diverged chains are
        flagged per-chain and dropped from the interval)."""
        return np.isfinite(self.chains[1:]).all(axis=1)


def run_bootstrap(ensemble: BootstrapEnsemble, stream,
                  schedule: StepSchedule, total_steps: int,
                  warmup: int = 0) -> BootstrapEnsemble:
    """Drive the ensemble for total_steps stream draws with the given
    schedule, accumulating averages only after the warm-up block."""
    if warmup < 0 or total_steps < warmup:
        raise ValueError("need total_steps >= warmup >= 0")
    for t in range(1, total_steps + 1):
        data = stream.next()
        ensemble.step(data, schedule.step_size(t), accumulate=t > warmup)
    return ensemble


def bootstrap_ci(ensemble: BootstrapEnsemble, theta: np.ndarray,
                 level: float) -> ConfidenceInterval:
    """Basic-bootstrap interval for theta'x from the chain-average spread.

    With center c = theta'xbar (base chain) and deltas theta'(xbar_b - c),
    the interval is [c - q_{1-alpha/2}(deltas), c - q_{alpha/2}(deltas)].
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    means = ensemble.chain_means
    if not np.isfinite(means[0]).all():
        raise ValueError("base chain diverged")
    alive = np.isfinite(means[1:]).all(axis=1)
    survivors = means[1:][alive]
    if survivors.shape[0] < MIN_CHAINS:
        raise ValueError(f"only {survivors.shape[0]} surviving chains, "
                         f"need at least {MIN_CHAINS}")
    center = float(means[0] @ theta)
    deltas = survivors @ theta - center
    q_lo, q_hi = np.quantile(deltas, [level / 2.0, 1.0 - level / 2.0])
    return ConfidenceInterval.from_bounds(center - float(q_hi),
                                          center - float(q_lo), level=level)
