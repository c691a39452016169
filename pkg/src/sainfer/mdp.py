"""Tabular MDPs: random generation, exact ground truth, and diagnostics.

The Q-learning experiments estimate the uniform average of the optimal
action-value table Q*. Everything here is offline and deterministic given
the generator state: random MDP construction, value iteration to machine
precision, the optimality-gap diagnostic used to reject degenerate
instances, and a plain-text serialization for reproducibility audits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class MDP:
    """A finite discounted MDP.

    Parameters
    ----------
    P : ndarray, shape (n_states, n_actions, n_states)
        Transition probabilities; P[s, a] is the distribution of the next
        state and must sum to one.
    r : ndarray, shape (n_states, n_actions)
        Mean rewards, each in [0, 1]. Observed rewards are mean plus unit
        Gaussian noise (see streams.MDPStream).
    gamma : float
        Discount factor in [0, 1).
    """

    P: np.ndarray
    r: np.ndarray
    gamma: float

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        r = np.asarray(self.r, dtype=float)
        if P.ndim != 3 or P.shape[0] != P.shape[2] or P.shape[:2] != r.shape:
            raise ValueError(f"inconsistent shapes P{P.shape} r{r.shape}")
        if np.any(P < 0):
            raise ValueError("transition probabilities must be nonnegative")
        if np.max(np.abs(P.sum(axis=2) - 1.0)) > _ROW_SUM_TOL:
            raise ValueError("every P[s, a] must sum to 1 within 1e-12")
        if np.any(r < 0) or np.any(r > 1):
            raise ValueError("mean rewards must lie in [0, 1]")
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "r", r)

    @property
    def n_states(self) -> int:
        return self.r.shape[0]

    @property
    def n_actions(self) -> int:
        return self.r.shape[1]


def random_mdp(n_states: int, n_actions: int, gamma: float,
               rng: np.random.Generator) -> MDP:
    """Draw a random MDP: r(s,a) ~ U[0,1], P(.|s,a) = u/sum(u) with u ~ U(0,1)."""
    if n_states < 1 or n_actions < 1:
        raise ValueError("n_states and n_actions must be >= 1")
    r = rng.uniform(0.0, 1.0, size=(n_states, n_actions))
    u = rng.uniform(0.0, 1.0, size=(n_states, n_actions, n_states))
    P = u / u.sum(axis=2, keepdims=True)
    return MDP(P=P, r=r, gamma=gamma)


def value_iteration(mdp: MDP, tol: float = 1e-10) -> np.ndarray:
    """Compute Q* by iterating the Bellman operator Q <- r + gamma P max_a Q.

    Stops when the sup-norm change drops below tol*(1-gamma)/gamma, which
    bounds the sup-norm distance to the fixed point by tol. Returns the
    (n_states, n_actions) table.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    gamma = mdp.gamma
    threshold = tol if gamma == 0.0 else tol * (1.0 - gamma) / gamma
    Q = np.zeros_like(mdp.r)
    while True:
        Qn = mdp.r + gamma * (mdp.P @ Q.max(axis=1))
        delta = np.abs(Qn - Q).max()
        Q = Qn
        if delta < threshold:
            return Q


def bellman_residual(mdp: MDP, Q: np.ndarray) -> float:
    """Sup-norm residual ||Q - (r + gamma P max_a Q)||_inf."""
    return float(np.abs(Q - (mdp.r + mdp.gamma * (mdp.P @ Q.max(axis=1)))).max())


def optimality_gap(q_star: np.ndarray) -> float:
    """Margin between best and second-best action values, minimized over states.

    Returns +inf when there is a single action (no competing action exists).
    A zero gap means some state has tied optimal actions.
    """
    q_star = np.asarray(q_star, dtype=float)
    if q_star.shape[1] < 2:
        return math.inf
    top2 = np.partition(q_star, -2, axis=1)[:, -2:]
    return float((top2[:, 1] - top2[:, 0]).min())


def uniform_q_average(q_star: np.ndarray) -> float:
    """Uniform average of the table entries, the estimation target."""
    return float(np.mean(q_star))


def save_mdp(mdp: MDP, path) -> None:
    """Write an MDP as plain text.

    Layout: a header with sizes and gamma, the mean-reward rows in (s, a)
    lexicographic order, then one transition row P(.|s, a) per (s, a) pair
    in the same order. Floats are written with repr so load_mdp round-trips
    bit-exactly.
    """
    S, A = mdp.n_states, mdp.n_actions
    lines = [f"n_states {S}", f"n_actions {A}", f"gamma {mdp.gamma!r}", "r"]
    for s in range(S):
        for a in range(A):
            lines.append(repr(float(mdp.r[s, a])))
    lines.append("P")
    for s in range(S):
        for a in range(A):
            lines.append(" ".join(repr(float(p)) for p in mdp.P[s, a]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mdp(path) -> MDP:
    """Read an MDP written by save_mdp."""
    with open(path) as fh:
        tokens = [line.strip() for line in fh if line.strip()]
    if tokens[0].split()[0] != "n_states":
        raise ValueError(f"not an MDP file: {path}")
    S = int(tokens[0].split()[1])
    A = int(tokens[1].split()[1])
    gamma = float(tokens[2].split()[1])
    assert tokens[3] == "r"
    r = np.array([float(tokens[4 + i]) for i in range(S * A)]).reshape(S, A)
    assert tokens[4 + S * A] == "P"
    rows = [[float(x) for x in tokens[5 + S * A + i].split()] for i in range(S * A)]
    P = np.array(rows).reshape(S, A, S)
    return MDP(P=P, r=r, gamma=gamma)
