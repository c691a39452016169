"""The stochastic-approximation recursion x_{t+1} = x_t - eta_t H(x_t, xi_t).

`run` drives a pluggable root-finding oracle over a data stream with a
validated polynomial step-size schedule. An initial warm-up block is
executed without inference side effects; afterwards the step counter
restarts at 1, a running average of the post-warm-up iterates is
maintained, and every registered hook observes (t, x_t, xbar_t) so that
inference statistics can be accumulated in O(1) memory per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np


class DivergenceError(RuntimeError):
    """Raised when an iterate stops being finite; carries the step index."""

    def __init__(self, step: int):
        super().__init__(f"non-finite iterate at step {step}")
        self.step = step


@dataclass(frozen=True)
class StepSchedule:
    """Polynomial step-size rule eta_t = eta_scale * (t + offset)**-alpha.

    alpha must lie in (0.5, 1) and eta_scale in (0, 1]; both bounds are the
    validity region of the averaging-based inference this package builds.
    The offset expresses schedules written against a shifted clock, e.g.
    (t+1)**-0.51.
    """

    eta_scale: float
    alpha: float
    offset: int = 0
    kind: str = "polynomial"

    def __post_init__(self):
        if self.kind != "polynomial":
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not 0.5 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0.5, 1), got {self.alpha}")
        if not 0.0 < self.eta_scale <= 1.0:
            raise ValueError(f"eta_scale must be in (0, 1], got {self.eta_scale}")
        if self.offset < 0:
            raise ValueError("offset must be nonnegative")

    def step_size(self, t: int) -> float:
        if t < 1:
            raise ValueError(f"step index must be >= 1, got {t}")
        return self.eta_scale * float(t + self.offset) ** -self.alpha


class SparseUpdate(NamedTuple):
    """A root-finding increment that is zero except at one entry."""

    index: tuple
    value: float


def sigmoid(z: float) -> float:
    """Numerically safe logistic function."""
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def oracle_linreg(x: np.ndarray, data) -> np.ndarray:
    """Squared-loss gradient a * (<a, x> - y) for one observation (a, y)."""
    a, y = data
    if a.shape != x.shape:
        raise ValueError(f"dimension mismatch: a{a.shape} vs x{x.shape}")
    return a * (float(a @ x) - y)


def oracle_logistic(x: np.ndarray, data) -> np.ndarray:
    """Log-loss gradient (sigmoid(<a, x>) - y) * a for a binary label y."""
    a, y = data
    if a.shape != x.shape:
        raise ValueError(f"dimension mismatch: a{a.shape} vs x{x.shape}")
    return (sigmoid(float(a @ x)) - y) * a


def qlearning_oracle(gamma: float) -> Callable[[np.ndarray, tuple], SparseUpdate]:
    """Asynchronous Q-learning increment for a transition (s, a, R, s_next).

    The increment is zero except at entry (s, a), where it equals
    Q(s, a) - R - gamma * max_a' Q(s_next, a'), so that the generic update
    x <- x - eta * H reproduces the classical asynchronous rule.
    """
    if not 0 <= gamma < 1:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")

    def oracle(Q: np.ndarray, data) -> SparseUpdate:
        s, a, reward, s_next = data
        n_states, n_actions = Q.shape
        if not (0 <= s < n_states and 0 <= a < n_actions and 0 <= s_next < n_states):
            raise IndexError(f"transition ({s}, {a}, ., {s_next}) out of range")
        value = Q[s, a] - reward - gamma * Q[s_next].max()
        return SparseUpdate((s, a), float(value))

    return oracle


@dataclass
class SARun:
    """Final state of one recursion: last iterate, post-warm-up step count,
    and the running average of post-warm-up iterates (None when the
    inference window is empty)."""

    x: np.ndarray
    steps: int
    xbar: Optional[np.ndarray]
    total_steps: int
    oracle_calls: int = 0
    _xsum: np.ndarray = field(default=None, repr=False)


Hook = Callable[[int, np.ndarray, np.ndarray], None]


def run(oracle, stream, schedule: StepSchedule, total_steps: int,
        warmup: int = 0, hooks: Sequence[Hook] = (), *,
        x0: np.ndarray) -> SARun:
    """Run the recursion for total_steps draws from the stream.

    The first `warmup` steps update the iterate but are invisible to
    inference. For each later step, hooks fire with (t, x_t, xbar_t) where
    t restarts at 1 after warm-up and xbar_t averages the t post-warm-up
    iterates seen so far. Step sizes use the global step index, so the
    schedule is unaffected by warm-up.

    Raises DivergenceError (with the global step index) as soon as any
    coordinate of the iterate stops being finite.
    """
    if warmup < 0 or total_steps < warmup:
        raise ValueError(f"need total_steps >= warmup >= 0, "
                         f"got total_steps={total_steps}, warmup={warmup}")
    x = np.array(x0, dtype=float, copy=True)
    xsum = np.zeros_like(x)
    n = 0
    calls = 0
    for t in range(1, total_steps + 1):
        data = stream.next()
        h = oracle(x, data)
        calls += 1
        eta = schedule.step_size(t)
        if isinstance(h, SparseUpdate):
            x[h.index] -= eta * h.value
            if not math.isfinite(x[h.index]):
                raise DivergenceError(t)
        else:
            x -= eta * h
            if not np.isfinite(x).all():
                raise DivergenceError(t)
        if t > warmup:
            n += 1
            xsum += x
            if hooks:
                xbar = xsum / n
                for hook in hooks:
                    hook(n, x, xbar)
    xbar = xsum / n if n > 0 else None
    return SARun(x=x, steps=n, xbar=xbar, total_steps=total_steps,
                 oracle_calls=calls, _xsum=xsum)
