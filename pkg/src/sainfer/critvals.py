"""Monte-Carlo critical values of the random-scaling pivot.

The pivot's limit law is f_m(W) = W(1) / h_m(W) with W standard Brownian
motion on [0, 1] and h_m the same breakpoint rectangle-rule scale used by
the inference module (keeping critical values and test statistics on one
convention). Paths are simulated as normalized sums of i.i.d. N(0, 1)
deviates; two-sided critical values are nearest-rank upper quantiles of
|f_m(W)|. A table of pre-simulated defaults at the standard budget of
1,000 steps x 50,000 replications is embedded.

Replications are embarrassingly parallel: work is cut into fixed chunks
with per-chunk derived seeds and reassembled in chunk order, so results
are identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from .inference import MOrder

_CHUNK = 2048

DEFAULT_STEPS = 1000
DEFAULT_REPS = 50_000

# Two-sided tail probabilities resolvable from the embedded level grid.
EMBEDDED_LEVELS = (0.01, 0.025, 0.05, 0.10, 0.50, 0.90, 0.95, 0.975, 0.99)

# Signed quantiles of f_m(W) at EMBEDDED_LEVELS, simulated at the default
# budget; rows follow EMBEDDED_M. The 50% column is exactly zero by
# symmetry of the law.
EMBEDDED_M: Tuple[MOrder, ...] = (1, 2, 3, 4, 6, math.inf)
_EMBEDDED_Q = np.array([
    [-10.705, -8.334, -6.569, -4.749, 0.000, 4.749, 6.569, 8.334, 10.705],
    [-8.628, -6.758, -5.316, -3.873, 0.000, 3.873, 5.316, 6.758, 8.628],
    [-7.495, -5.899, -4.650, -3.403, 0.000, 3.403, 4.650, 5.899, 7.495],
    [-6.798, -5.344, -4.232, -3.108, 0.000, 3.108, 4.232, 5.344, 6.798],
    [-5.969, -4.705, -3.728, -2.754, 0.000, 2.754, 3.728, 4.705, 5.969],
    [-3.408, -2.711, -2.175, -1.626, 0.000, 1.626, 2.175, 2.711, 3.408],
])


def _chunk_seeds(rng_seed, n_chunks: int):
    root = (rng_seed if isinstance(rng_seed, np.random.SeedSequence)
            else np.random.SeedSequence(rng_seed))
    return root.spawn(n_chunks)


def _functional_samples(m: MOrder, steps: int, reps: int, seed,
                        which: str, threads: int = 1) -> np.ndarray:
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    n_chunks = (reps + _CHUNK - 1) // _CHUNK
    seeds = _chunk_seeds(seed, n_chunks)
    grid = np.arange(1, steps + 1) / steps

    def one_chunk(i: int) -> np.ndarray:
        size = min(_CHUNK, reps - i * _CHUNK)
        rng = np.random.default_rng(seeds[i])
        dW = rng.standard_normal((size, steps)) / math.sqrt(steps)
        W = np.cumsum(dW, axis=1)
        W1 = W[:, -1]
        bridge = W - grid[None, :] * W1[:, None]
        if m == math.inf:
            h = np.abs(bridge).max(axis=1)
        else:
            h = (np.abs(bridge) ** m).mean(axis=1) ** (1.0 / m)
        return h if which == "h" else W1 / h

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(one_chunk, range(n_chunks)))
    else:
        chunks = [one_chunk(i) for i in range(n_chunks)]
    return np.concatenate(chunks)


def simulate_fm_samples(m: MOrder, steps: int, reps: int, seed,
                        threads: int = 1) -> np.ndarray:
    """Draw `reps` samples of f_m(W), each from a fresh discretized path.

    The same seed replays the same paths, so samples for different m can
    be compared pathwise.
    """
    return _functional_samples(m, steps, reps, seed, "f", threads)


def simulate_hm_samples(m: MOrder, steps: int, reps: int, seed,
                        threads: int = 1) -> np.ndarray:
    """Draw samples of the denominator h_m(W) alone."""
    return _functional_samples(m, steps, reps, seed, "h", threads)


def two_sided_quantile(samples, alpha: float) -> float:
    """Nearest-rank (1 - alpha) quantile of |samples|.

    This is the two-sided critical value: the smallest sample value q with
    at most an alpha fraction of |samples| at or beyond q.
    """
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ValueError("empty samples")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    ordered = np.sort(np.abs(samples))
    rank = max(math.ceil((1.0 - alpha) * ordered.size), 1)
    return float(ordered[rank - 1])


def signed_quantile(samples, level: float) -> float:
    """Nearest-rank quantile of the signed samples at the given level."""
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ValueError("empty samples")
    ordered = np.sort(samples)
    rank = max(math.ceil(level * ordered.size), 1)
    return float(ordered[rank - 1])


@dataclass(frozen=True)
class CriticalValueTable:
    """Grid of signed critical values q over (m, level).

    Levels are quantile levels of the signed pivot law; a two-sided value
    at tail probability alpha is the magnitude of the (1 - alpha/2) column.
    Provenance is "embedded" for the built-in defaults or
    "simulated(steps=..., reps=..., seed=...)" for freshly simulated grids.
    """

    m_list: Tuple[MOrder, ...]
    levels: Tuple[float, ...]
    q: np.ndarray
    provenance: str

    def quantile(self, m: MOrder, level: float) -> float:
        i = self.m_list.index(m)
        j = self.levels.index(level)
        return float(self.q[i, j])

    def two_sided(self, m: MOrder, alpha: float) -> float:
        """Critical value for P(|f_m(W)| >= q) = alpha."""
        level = 1.0 - alpha / 2.0
        for j, lv in enumerate(self.levels):
            if math.isclose(lv, level, rel_tol=0, abs_tol=1e-12):
                return abs(float(self.q[self.m_list.index(m), j]))
        raise KeyError(f"level {level} not in table (alpha={alpha})")

    def rows(self) -> Iterable[tuple]:
        """(m, level, q, provenance) tuples in row-major order."""
        for i, m in enumerate(self.m_list):
            for j, level in enumerate(self.levels):
                yield m, level, float(self.q[i, j]), self.provenance


def embedded_table() -> CriticalValueTable:
    """The built-in default critical values for m in {1, 2, 3, 4, 6, inf}."""
    return CriticalValueTable(m_list=EMBEDDED_M, levels=EMBEDDED_LEVELS,
                              q=_EMBEDDED_Q.copy(), provenance="embedded")


def simulate_table(m_list: Sequence[MOrder] = EMBEDDED_M,
                   levels: Sequence[float] = EMBEDDED_LEVELS,
                   steps: int = DEFAULT_STEPS, reps: int = DEFAULT_REPS,
                   seed: Union[int, None] = 0,
                   threads: int = 1) -> CriticalValueTable:
    """Simulate a fresh critical-value grid at the given budget.

    Columns are stored antisymmetrically around the 50% level as plus or
    minus the two-sided value at the matching tail probability, which makes
    ``two_sided`` exactly the |f|-quantile definition.
    """
    q = np.empty((len(m_list), len(levels)))
    for i, m in enumerate(m_list):
        samples = simulate_fm_samples(m, steps, reps, seed, threads)
        for j, level in enumerate(levels):
            if math.isclose(level, 0.5, abs_tol=1e-12):
                q[i, j] = 0.0
            elif level > 0.5:
                q[i, j] = two_sided_quantile(samples, 2.0 * (1.0 - level))
            else:
                q[i, j] = -two_sided_quantile(samples, 2.0 * level)
    return CriticalValueTable(
        m_list=tuple(m_list), levels=tuple(levels), q=q,
        provenance=f"simulated(steps={steps},reps={reps},seed={seed})")


@dataclass(frozen=True)
class DensityHistogram:
    """Normalized histogram: densities over consecutive bin edges."""

    edges: np.ndarray
    density: np.ndarray

    def mass(self) -> float:
        return float(np.sum(self.density * np.diff(self.edges)))


def empirical_density(samples, bins: int,
                      nonnegative: bool = False) -> DensityHistogram:
    """Histogram normalized to integrate to one.

    The range is symmetric about zero for signed samples (the f_m mode) or
    [0, max] when ``nonnegative`` is set (the denominator h_m mode).
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("empty samples")
    if nonnegative:
        lo, hi = 0.0, float(np.max(samples))
    else:
        half = float(np.max(np.abs(samples)))
        lo, hi = -half, half
    density, edges = np.histogram(samples, bins=bins, range=(lo, hi),
                                  density=True)
    return DensityHistogram(edges=edges, density=density)
