"""Single-trajectory Markovian data generators for the three worked problems.

Each stream owns a numpy Generator and is advanced one observation at a
time through ``next()``. Identical seeds give bit-identical trajectories.
Independent sub-streams (one per stream, one per Monte-Carlo repetition)
are derived from a master seed with ``SeedSequence(seed, spawn_key=...)``;
``child_rng`` below is the documented split function used everywhere in
this package, so serial and parallel runs agree exactly.

A stream is single-threaded; distinct streams may run on distinct threads.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .engine import sigmoid
from .mdp import MDP

_ROW_SUM_TOL = 1e-12


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Derive an independent generator from a master seed and a spawn key."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def scaled_ball_coordinate(rng: np.random.Generator, d: int) -> float:
    """sqrt(d) times the first coordinate of a uniform draw from the unit
    d-ball, sampled as Gaussian direction times radius U**(1/d).

    Bounded by sqrt(d), symmetric, mean zero, with variance d/(d+2).
    """
    g = rng.standard_normal(d)
    radius = rng.random() ** (1.0 / d)
    return math.sqrt(d) * radius * g[0] / math.sqrt(float(g @ g))


class LinRegARStream:
    """Linear-regression data with AR(1) observation noise.

    Each call draws a ~ N(0, I_d), advances the scalar noise state
    zeta <- rho_eps * zeta + eps with eps from ``scaled_ball_coordinate``,
    and returns (a, y) with y = <a, x_star> + zeta.
    """

    def __init__(self, d: int, rho_eps: float, x_star: np.ndarray,
                 rng, zeta0: float = 0.0):
        if d < 1:
            raise ValueError("d must be >= 1")
        if not 0.0 <= rho_eps < 1.0:
            raise ValueError(f"rho_eps must be in [0, 1), got {rho_eps}")
        x_star = np.asarray(x_star, dtype=float)
        if x_star.shape != (d,) or not np.isfinite(x_star).all():
            raise ValueError("x_star must be a finite vector of length d")
        self.d = d
        self.rho_eps = rho_eps
        self.x_star = x_star
        self.zeta = zeta0
        self.rng = _as_rng(rng)

    def next(self):
        a = self.rng.standard_normal(self.d)
        eps = scaled_ball_coordinate(self.rng, self.d)
        self.zeta = self.rho_eps * self.zeta + eps
        return a, float(a @ self.x_star) + self.zeta


class LogisticARStream:
    """Logistic-regression data whose covariates follow a vector AR recursion.

    The transition matrix A is zero except for subdiagonal entries drawn
    once at construction from U[0.8, 0.99] and then frozen. Each call
    advances a <- A a + e_1 W with W ~ N(0, 1) and returns (a, y) with
    y ~ Bernoulli(sigmoid(<a, x_star>)). A is nilpotent, so a_t is an exact
    finite moving sum of the last d shocks. The covariate state starts at
    the zero vector.
    """

    def __init__(self, d: int, x_star: np.ndarray, rng,
                 subdiag_range=(0.8, 0.99)):
        if d < 1:
            raise ValueError("d must be >= 1")
        x_star = np.asarray(x_star, dtype=float)
        if x_star.shape != (d,) or not np.isfinite(x_star).all():
            raise ValueError("x_star must be a finite vector of length d")
        self.d = d
        self.x_star = x_star
        self.rng = _as_rng(rng)
        lo, hi = subdiag_range
        A = np.zeros((d, d))
        if d > 1:
            A[np.arange(1, d), np.arange(d - 1)] = self.rng.uniform(lo, hi, d - 1)
        self.A = A
        self._subdiag = np.diagonal(A, offset=-1).copy()
        self.a = np.zeros(d)

    def next(self):
        shifted = np.empty(self.d)
        shifted[0] = self.rng.standard_normal()
        shifted[1:] = self._subdiag * self.a[:-1]
        self.a = shifted
        p = sigmoid(float(shifted @ self.x_star))
        y = 1.0 if self.rng.random() < p else 0.0
        return shifted, y


class MDPStream:
    """A single trajectory of an MDP under a behavior policy.

    Each call samples a ~ pi_b(s), a reward N(r(s, a), 1), a successor
    s' ~ P(.|s, a), advances the state, and returns (s, a, reward, s').
    The behavior policy defaults to uniformly random actions; the initial
    state is drawn uniformly.
    """

    def __init__(self, mdp: MDP, rng,
                 behavior_policy: Optional[np.ndarray] = None):
        self.mdp = mdp
        self.rng = _as_rng(rng)
        S, A = mdp.n_states, mdp.n_actions
        if behavior_policy is None:
            behavior_policy = np.full((S, A), 1.0 / A)
        behavior_policy = np.asarray(behavior_policy, dtype=float)
        if behavior_policy.shape != (S, A):
            raise ValueError(f"behavior policy must have shape ({S}, {A})")
        if np.any(behavior_policy < 0):
            raise ValueError("behavior policy entries must be >= 0")
        if np.max(np.abs(behavior_policy.sum(axis=1) - 1.0)) > _ROW_SUM_TOL:
            raise ValueError("behavior policy rows must sum to 1 within 1e-12")
        self.behavior_policy = behavior_policy
        # cumulative rows for O(log) categorical draws in the hot loop
        self._policy_cum = behavior_policy.cumsum(axis=1)
        self._trans_cum = mdp.P.cumsum(axis=2)
        self.state = int(self.rng.integers(S))

    def next(self):
        s = self.state
        a = int(np.searchsorted(self._policy_cum[s], self.rng.random()))
        reward = self.mdp.r[s, a] + self.rng.standard_normal()
        s_next = int(np.searchsorted(self._trans_cum[s, a], self.rng.random()))
        self.state = s_next
        return s, a, float(reward), s_next


def replay_covariate_sum(A: np.ndarray, shocks: Sequence[float]) -> np.ndarray:
    """Closed-form covariate state sum_k A^k e_1 W_{t-k} for given shocks.

    Reference implementation for LogisticARStream: A is nilpotent of index
    at most d, so the sum is finite and exact.
    """
    d = A.shape[0]
    e1 = np.zeros(d)
    e1[0] = 1.0
    out = np.zeros(d)
    Ak_e1 = e1.copy()
    for w in reversed(list(shocks)[-d:]):
        out += Ak_e1 * w
        Ak_e1 = A @ Ak_e1
    return out
