"""Configuration-driven Monte-Carlo coverage experiments.

A coverage study runs `reps` independent repetitions of one problem. Each
repetition derives its own generator from the master seed (see
streams.child_rng), builds a fresh problem instance, runs the SA recursion
with inference hooks, forms a confidence interval per functional order m,
and records whether the true projected target lies inside. Aggregation is
a fold over repetitions in index order, so reports are byte-identical for
any degree of parallelism.

Config files are flat ``section.key = value`` text (diff-friendly) or a
nested JSON object with the same sections; see ExperimentConfig.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from . import bootstrap as bt
from .critvals import CriticalValueTable, embedded_table
from .engine import (DivergenceError, StepSchedule, oracle_linreg,
                     oracle_logistic, qlearning_oracle, run)
from .inference import (RandomScalingAccumulator, confidence_interval,
                        sigma_m_offline, trapezoid_m2)
from .mdp import optimality_gap, random_mdp, uniform_q_average, value_iteration
from .streams import LinRegARStream, LogisticARStream, MDPStream

THREADS_ENV_VAR = "SAINFER_THREADS"

PROBLEMS = ("linreg_ar", "logistic_ar", "qlearning")
METHODS = ("random_scaling", "bootstrap")
ALLOWED_M = (1, 2, 3, 4, 6, math.inf)

# reject Q-learning instances whose optimal policy is effectively tied
MIN_OPTIMALITY_GAP = 1e-6
# a coverage experiment with more than this fraction of divergent
# repetitions is reported as an error, not a coverage number
MAX_FAILED_FRACTION = 0.05

REPORT_HEADER = "method,m,T,reps,failed,coverage,mean_length,std_length,seed"


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One coverage experiment.

    Field names mirror the config-file keys: problem.kind, problem.d,
    problem.rho_eps, problem.n_states, problem.n_actions, problem.gamma,
    schedule.eta, schedule.alpha, schedule.offset, run.T (total steps,
    warm-up included), run.warmup, run.reps, run.seed, inference.m (list),
    inference.level, inference.trapezoid, method, bootstrap.B, output.path.
    """

    problem: str
    eta_scale: float
    alpha: float
    T: int
    warmup: int
    reps: int
    eta_offset: int = 0
    seed: int = 0
    d: Optional[int] = None
    rho_eps: Optional[float] = None
    n_states: Optional[int] = None
    n_actions: Optional[int] = None
    gamma: Optional[float] = None
    m_list: Tuple[float, ...] = (2,)
    level: float = 0.05
    trapezoid: bool = False
    method: str = "random_scaling"
    bootstrap_B: int = 200
    out: Optional[str] = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem.kind must be one of {PROBLEMS}, "
                              f"got {self.problem!r}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, "
                              f"got {self.method!r}")
        try:
            StepSchedule(self.eta_scale, self.alpha, self.eta_offset)
        except ValueError as exc:
            raise ConfigError(f"schedule: {exc}") from exc
        if not 0 <= self.warmup < self.T:
            raise ConfigError("run.warmup must satisfy 0 <= warmup < run.T")
        if self.reps < 1:
            raise ConfigError("run.reps must be >= 1")
        if not 0.0 < self.level <= 1.0:
            raise ConfigError("inference.level must be in (0, 1]")
        for m in self.m_list:
            if m not in ALLOWED_M:
                raise ConfigError(f"inference.m entries must be in "
                                  f"{{1,2,3,4,6,inf}}, got {m}")
        if not self.m_list and self.method == "random_scaling":
            raise ConfigError("inference.m must be non-empty")
        if self.problem in ("linreg_ar", "logistic_ar"):
            if self.d is None or self.d < 1:
                raise ConfigError("problem.d must be a positive integer")
            if self.problem == "linreg_ar" and self.rho_eps is None:
                raise ConfigError("problem.rho_eps is required for linreg_ar")
        else:
            if self.n_states is None or self.n_states < 1:
                raise ConfigError("problem.n_states must be a positive integer")
            if self.n_actions is None or self.n_actions < 1:
                raise ConfigError("problem.n_actions must be a positive integer")
            if self.gamma is None or not 0 <= self.gamma < 1:
                raise ConfigError("problem.gamma must be in [0, 1)")
        if self.method == "bootstrap":
            if self.problem != "linreg_ar":
                raise ConfigError("method=bootstrap supports only "
                                  "problem.kind=linreg_ar")
            if self.bootstrap_B < bt.MIN_CHAINS:
                raise ConfigError(f"bootstrap.B must be >= {bt.MIN_CHAINS}")

    @property
    def schedule(self) -> StepSchedule:
        return StepSchedule(self.eta_scale, self.alpha, self.eta_offset)

    @property
    def window(self) -> int:
        """Post-warm-up inference horizon."""
        return self.T - self.warmup

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed)


_KEY_MAP = {
    "problem.kind": "problem",
    "problem.d": "d",
    "problem.rho_eps": "rho_eps",
    "problem.n_states": "n_states",
    "problem.n_actions": "n_actions",
    "problem.gamma": "gamma",
    "schedule.eta": "eta_scale",
    "schedule.alpha": "alpha",
    "schedule.offset": "eta_offset",
    "run.T": "T",
    "run.warmup": "warmup",
    "run.reps": "reps",
    "run.seed": "seed",
    "inference.m": "m_list",
    "inference.level": "level",
    "inference.trapezoid": "trapezoid",
    "method": "method",
    "bootstrap.B": "bootstrap_B",
    "output.path": "out",
}


def _parse_m(value) -> Tuple[float, ...]:
    if isinstance(value, (int, float)):
        value = [value]
    elif isinstance(value, str):
        value = [v.strip() for v in value.split(",") if v.strip()]
    out = []
    for v in value:
        if isinstance(v, str) and v.lower() in ("inf", "infinity"):
            out.append(math.inf)
        else:
            out.append(int(v))
    return tuple(out)


def _parse_scalar(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def config_from_mapping(flat: dict) -> ExperimentConfig:
    """Build a config from a flat {dotted-key: value} mapping."""
    kwargs = {}
    for key, value in flat.items():
        if key not in _KEY_MAP:
            raise ConfigError(f"unknown config key {key!r}")
        field = _KEY_MAP[key]
        if field == "m_list":
            value = _parse_m(value)
        kwargs[field] = value
    missing = {"problem", "eta_scale", "alpha", "T", "warmup", "reps"} \
        - set(kwargs)
    if missing:
        dotted = sorted(k for k, v in _KEY_MAP.items() if v in missing)
        raise ConfigError(f"missing required config keys: {', '.join(dotted)}")
    return ExperimentConfig(**kwargs)


def _flatten_json(obj: dict) -> dict:
    flat = {}
    for key, value in obj.items():
        if isinstance(value, dict):
            for sub, v in value.items():
                flat[f"{key}.{sub}"] = v
        else:
            flat[key] = value
    return flat


def load_config(path) -> ExperimentConfig:
    """Read a config file, accepting the key-value text or JSON encoding."""
    with open(path) as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return config_from_mapping(_flatten_json(json.loads(text)))
    flat = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        flat[key.strip()] = _parse_scalar(value.strip())
    return config_from_mapping(flat)


def resolve_threads(requested: Optional[int] = None) -> int:
    """Thread count: the SAINFER_THREADS environment variable overrides the
    requested value; default 1."""
    env = os.environ.get(THREADS_ENV_VAR)
    if env is not None:
        return max(1, int(env))
    return max(1, requested or 1)


# ---------------------------------------------------------------------------
# coverage experiment


@dataclass(frozen=True)
class CoverageRow:
    method: str
    m: Optional[float]  # None for methods without a functional order
    T: int
    reps: int
    failed: int
    coverage: float
    mean_length: float
    std_length: float
    seed: int


@dataclass(frozen=True)
class CoverageReport:
    rows: Tuple[CoverageRow, ...]


def _sig6(x: float) -> float:
    return float(f"{x:.6g}")


def _m_str(m: Optional[float]) -> str:
    if m is None:
        return "-"
    if m == math.inf:
        return "inf"
    return str(int(m))


def _m_from_str(s: str) -> Optional[float]:
    if s == "-":
        return None
    if s == "inf":
        return math.inf
    return int(s)


def emit_report(report: CoverageReport, path) -> None:
    """Write the report as CSV with the documented fixed column order.

    Floating columns carry 6 significant digits; aggregate statistics are
    already rounded to that precision when the report is built, so
    parse_report(emit_report(r)) == r fieldwise.
    """
    lines = [REPORT_HEADER]
    for r in report.rows:
        lines.append(",".join([
            r.method, _m_str(r.m), str(r.T), str(r.reps), str(r.failed),
            f"{r.coverage:.6g}", f"{r.mean_length:.6g}",
            f"{r.std_length:.6g}", str(r.seed),
        ]))
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def parse_report(path) -> CoverageReport:
    """Read back a CSV written by emit_report."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if lines[0] != REPORT_HEADER:
        raise ValueError(f"unexpected report header in {path}: {lines[0]!r}")
    rows = []
    for ln in lines[1:]:
        (method, m, T, reps, failed, cov, mean_len, std_len, seed) = \
            ln.split(",")
        rows.append(CoverageRow(
            method=method, m=_m_from_str(m), T=int(T), reps=int(reps),
            failed=int(failed), coverage=float(cov),
            mean_length=float(mean_len), std_length=float(std_len),
            seed=int(seed)))
    return CoverageReport(rows=tuple(rows))


def _regression_target(config: ExperimentConfig):
    d = config.d
    x_star = np.linspace(0.0, 1.0, d)
    theta = np.ones(d) / math.sqrt(d)
    return x_star, theta, float(theta @ x_star)


def _scaling_rep(config: ExperimentConfig, rep: int, table: CriticalValueTable):
    root = np.random.SeedSequence(config.seed, spawn_key=(rep,))
    if config.problem == "qlearning":
        mdp_rng, stream_rng = [np.random.default_rng(s) for s in root.spawn(2)]
        while True:
            mdp = random_mdp(config.n_states, config.n_actions, config.gamma,
                             mdp_rng)
            q_star = value_iteration(mdp)
            if optimality_gap(q_star) >= MIN_OPTIMALITY_GAP:
                break
        target = uniform_q_average(q_star)
        theta = np.full((config.n_states, config.n_actions),
                        1.0 / (config.n_states * config.n_actions))
        stream = MDPStream(mdp, stream_rng)
        oracle = qlearning_oracle(config.gamma)
        x0 = np.zeros((config.n_states, config.n_actions))
    else:
        rng = np.random.default_rng(root)
        x_star, theta, target = _regression_target(config)
        if config.problem == "linreg_ar":
            stream = LinRegARStream(config.d, config.rho_eps, x_star, rng)
            oracle = oracle_linreg
        else:
            stream = LogisticARStream(config.d, x_star, rng)
            oracle = oracle_logistic
        x0 = np.zeros(config.d)

    even_ms = [int(m) for m in config.m_list if m != math.inf and m % 2 == 0]
    accs = {m: RandomScalingAccumulator(m) for m in even_ms}
    need_traj = config.trapezoid or any(
        m == math.inf or int(m) % 2 == 1 for m in config.m_list)
    traj = [] if need_traj else None

    def hook(n, x, xbar):
        ybar = float(np.vdot(theta, xbar))
        for acc in accs.values():
            acc.update(ybar)
        if traj is not None:
            traj.append(ybar)

    try:
        result = run(oracle, stream, config.schedule, config.T,
                     warmup=config.warmup, hooks=(hook,), x0=x0)
    except DivergenceError:
        return None  # failed repetition

    T = result.steps
    ybar_T = float(np.vdot(theta, result.xbar))
    ybar_seq = np.asarray(traj) if traj is not None else None
    entries = []
    for m in config.m_list:
        if m in accs:
            sigma = accs[m].sigma(ybar_T)
        else:
            sigma = sigma_m_offline(ybar_seq, m)
        q = table.two_sided(m, config.level)
        ci = confidence_interval(ybar_T, sigma, q, T, config.level, m=m)
        entries.append(("random_scaling", m, ci.contains(target), ci.length))
    if config.trapezoid and 2 in config.m_list:
        sigma = trapezoid_m2(ybar_seq)
        q = table.two_sided(2, config.level)
        ci = confidence_interval(ybar_T, sigma, q, T, config.level, m=2)
        entries.append(("random_scaling_trapezoid", 2, ci.contains(target),
                        ci.length))
    return entries


def _bootstrap_rep(config: ExperimentConfig, rep: int):
    root = np.random.SeedSequence(config.seed, spawn_key=(rep,))
    stream_ss, mult_ss = root.spawn(2)
    x_star, theta, target = _regression_target(config)
    # separate multiplier stream: the shared data (and hence the interval
    # center) is unchanged when B changes
    stream = LinRegARStream(config.d, config.rho_eps, x_star,
                            np.random.default_rng(stream_ss))
    ensemble = bt.BootstrapEnsemble(config.d, config.bootstrap_B,
                                    np.random.default_rng(mult_ss))
    bt.run_bootstrap(ensemble, stream, config.schedule, config.T,
                     warmup=config.warmup)
    try:
        ci = bt.bootstrap_ci(ensemble, theta, config.level)
    except ValueError:
        return None  # failed repetition (diverged base or too few chains)
    return [("bootstrap", None, ci.contains(target), ci.length)]


def _coverage_rep(config: ExperimentConfig, rep: int):
    if config.method == "bootstrap":
        return _bootstrap_rep(config, rep)
    table = embedded_table() if _REP_TABLE is None else _REP_TABLE
    return _scaling_rep(config, rep, table)


# Optional override of the critical-value table used by repetitions. Kept
# module-global so worker processes inherit it through fork.
_REP_TABLE: Optional[CriticalValueTable] = None


def run_coverage(config: ExperimentConfig, threads: int = 1,
                 table: Optional[CriticalValueTable] = None) -> CoverageReport:
    """Run the Monte-Carlo coverage study described by the config.

    Repetitions use derived seeds indexed by repetition number and are
    aggregated in index order, so the report is identical for any thread
    count. Raises RuntimeError when more than 5% of repetitions diverge.
    """
    lookup = embedded_table() if table is None else table
    for m in (config.m_list if config.method == "random_scaling" else ()):
        try:
            lookup.two_sided(m, config.level)
        except KeyError as exc:
            raise ConfigError(
                f"inference.level={config.level} has no critical value for "
                f"m={_m_str(m)} in the supplied table") from exc

    global _REP_TABLE
    _REP_TABLE = table
    try:
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(_coverage_rep,
                                        [config] * config.reps,
                                        range(config.reps),
                                        chunksize=max(1, config.reps // (4 * threads))))
        else:
            results = [_coverage_rep(config, rep) for rep in range(config.reps)]
    finally:
        _REP_TABLE = None

    failed = sum(1 for r in results if r is None)
    if failed > MAX_FAILED_FRACTION * config.reps:
        raise RuntimeError(
            f"{failed} of {config.reps} repetitions diverged "
            f"(> {MAX_FAILED_FRACTION:.0%}); check the configuration")

    keys = []
    per_key = {}
    for result in results:
        if result is None:
            continue
        for method, m, covered, length in result:
            key = (method, m)
            if key not in per_key:
                keys.append(key)
                per_key[key] = ([], [])
            per_key[key][0].append(bool(covered))
            per_key[key][1].append(float(length))

    rows = []
    for method, m in keys:
        covered, lengths = per_key[(method, m)]
        lengths = np.asarray(lengths)
        rows.append(CoverageRow(
            method=method, m=m, T=config.window, reps=config.reps,
            failed=failed,
            coverage=_sig6(float(np.mean(covered))),
            mean_length=_sig6(float(np.mean(lengths))),
            std_length=_sig6(float(np.std(lengths))),
            seed=config.seed))
    return CoverageReport(rows=tuple(rows))


# ---------------------------------------------------------------------------
# single-run CI trace


@dataclass(frozen=True)
class SingleRunTrace:
    """Per-step confidence intervals along one trajectory."""

    steps: np.ndarray
    centers: np.ndarray
    halfwidths: np.ndarray
    target: float
    m: float
    level: float


def single_run_trace(config: ExperimentConfig, stride: int = 100,
                     table: Optional[CriticalValueTable] = None
                     ) -> SingleRunTrace:
    """Run one repetition, recording the online CI every `stride` steps.

    Uses the first entry of inference.m, which must be even (the trace is
    built from the online accumulator alone).
    """
    if table is None:
        table = embedded_table()
    m = config.m_list[0]
    if m == math.inf or int(m) % 2 != 0:
        raise ConfigError("single-run tracing needs an even inference.m")
    m = int(m)
    q = table.two_sided(m, config.level)

    root = np.random.SeedSequence(config.seed, spawn_key=(0,))
    if config.problem == "qlearning":
        mdp_rng, stream_rng = [np.random.default_rng(s) for s in root.spawn(2)]
        while True:
            mdp = random_mdp(config.n_states, config.n_actions, config.gamma,
                             mdp_rng)
            q_star = value_iteration(mdp)
            if optimality_gap(q_star) >= MIN_OPTIMALITY_GAP:
                break
        target = uniform_q_average(q_star)
        theta = np.full((config.n_states, config.n_actions),
                        1.0 / (config.n_states * config.n_actions))
        stream = MDPStream(mdp, stream_rng)
        oracle = qlearning_oracle(config.gamma)
        x0 = np.zeros((config.n_states, config.n_actions))
    else:
        rng = np.random.default_rng(root)
        x_star, theta, target = _regression_target(config)
        if config.problem == "linreg_ar":
            stream = LinRegARStream(config.d, config.rho_eps, x_star, rng)
            oracle = oracle_linreg
        else:
            stream = LogisticARStream(config.d, x_star, rng)
            oracle = oracle_logistic
        x0 = np.zeros(config.d)

    acc = RandomScalingAccumulator(m)
    steps, centers, halfwidths = [], [], []

    def hook(n, x, xbar):
        ybar = float(np.vdot(theta, xbar))
        acc.update(ybar)
        if n % stride == 0 or n == config.window:
            ci = confidence_interval(ybar, acc.sigma(ybar), q, n,
                                     config.level, m=m)
            steps.append(n)
            centers.append(ci.center)
            halfwidths.append(ci.halfwidth)

    run(oracle, stream, config.schedule, config.T, warmup=config.warmup,
        hooks=(hook,), x0=x0)
    return SingleRunTrace(steps=np.asarray(steps),
                          centers=np.asarray(centers),
                          halfwidths=np.asarray(halfwidths),
                          target=target, m=m, level=config.level)


# ---------------------------------------------------------------------------
# step-size guidance


def _j_small(p: float) -> float:
    return (p - 2.0) * p / (2.0 * (3.0 * p * p + 2.0 * p - 1.0))


def _j_mid(p: float) -> float:
    return ((2.0 * p - 1.0) - math.sqrt(3.0 * (p * p - p + 1.0))) \
        / (2.0 * (p + 1.0))


def _alpha_small(p: float) -> float:
    return (2.0 * p * p + p - 4.0) / (3.0 * p * p + 2.0 * p - 4.0)


def _alpha_mid(p: float) -> float:
    return (math.sqrt(3.0 * (p * p - p + 1.0)) - (p + 1.0)) / (p - 2.0)


_P0_CACHE: Optional[float] = None


def _branch_point() -> float:
    """Moment order where the two polynomial rate branches meet (the point
    making the rate exponent continuous), found by bisection."""
    global _P0_CACHE
    if _P0_CACHE is None:
        lo, hi = 2.0 + 1e-9, 8.0
        f = lambda p: _j_small(p) - _j_mid(p)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(lo) * f(mid) <= 0:
                hi = mid
            else:
                lo = mid
        _P0_CACHE = 0.5 * (lo + hi)
    return _P0_CACHE


def optimal_alpha(p: float, markovian_or_nonlinear: bool,
                  eps: float = 0.0) -> Tuple[float, float]:
    """Step-size exponent minimizing the weak-convergence error bound.

    For i.i.d. linear problems the optimum sits at the lower edge of the
    admissible range, alpha = 0.5 + eps, with rate exponent
    [(p-2)/(4(p+1)) ^ 1/6] * (1 - 2 eps). Otherwise a three-branch closed
    form applies, constant at alpha = (sqrt(19)-3)/2 ~ 0.679 and rate
    (5-sqrt(19))/6 ~ 0.107 for p >= 8. Returns (alpha_star, rate_exponent).
    """
    if p <= 2:
        raise ValueError(f"moment order p must exceed 2, got {p}")
    if not markovian_or_nonlinear:
        rate = min((p - 2.0) / (4.0 * (p + 1.0)), 1.0 / 6.0) * (1.0 - 2.0 * eps)
        return 0.5 + eps, rate
    if p >= 8.0:
        return (math.sqrt(19.0) - 3.0) / 2.0, (5.0 - math.sqrt(19.0)) / 6.0
    if p <= _branch_point():
        return _alpha_small(p), _j_small(p)
    return _alpha_mid(p), _j_mid(p)
