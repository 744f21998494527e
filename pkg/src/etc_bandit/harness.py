"""Seeded Monte Carlo runner for explore-then-commit experiments.

For every exploration size ``N`` and replication the runner draws a fresh
exploration log from its own seed, lets each configured policy commit to an
arm, and scores the commitment against the ground-truth win probabilities.
Per-replication outcomes are integer indicators, so totals (and therefore
the written CSV) do not depend on how replications are split across workers.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .arm_models import ORACLE_DRAWS, BanditModel, model_from_dict, win_probability_oracle
from .errors import CapacityError, InputError
from .estimators import ExplorationLog
from .policies import (
    PolicyDecision,
    empirical_mean_commit,
    expexp,
    fte_mab,
    marab_commit,
    ote_mab,
    ucb1_commit,
)

log = logging.getLogger(__name__)

THREADS_ENV = "ETC_BANDIT_THREADS"

POLICY_NAMES = (
    "ote-paired",
    "ote-independent",
    "fte-paired",
    "fte-independent",
    "ucb1",
    "expexp",
    "marab",
    "mean",
)

CSV_COLUMNS = (
    "policy", "hyper", "n", "m", "replications",
    "strong_regret", "strong_regret_se",
    "delta_regret", "delta_regret_se",
    "win_rate", "win_rate_se",
)

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
ORACLE_STREAM = 1 << 63


def _mix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_replication_seed(master_seed: int, n_index: int, replication_index: int) -> int:
    """Stable 64-bit seed for one (grid point, replication) pair."""
    h = _mix64(master_seed + _GOLDEN)
    h = _mix64(h + _GOLDEN + (n_index & _MASK))
    return _mix64(h + _GOLDEN + (replication_index & _MASK))


@dataclass(frozen=True)
class PolicySpec:
    name: str
    rho: float | None = None
    alpha: float | None = None
    budget: int | None = None
    threshold: float | None = None

    def __post_init__(self) -> None:
        if self.name not in POLICY_NAMES:
            raise InputError(f"unknown policy {self.name!r}; known: {', '.join(POLICY_NAMES)}")
        if self.name == "expexp" and (self.rho is None or self.rho < 0):
            raise InputError("expexp needs rho >= 0")
        if self.name == "marab" and (self.alpha is None or not 0 < self.alpha < 1):
            raise InputError("marab needs alpha in (0, 1)")

    @property
    def hyper(self) -> float | None:
        if self.name == "expexp":
            return self.rho
        if self.name == "marab":
            return self.alpha
        return None

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PolicySpec":
        if "name" not in d:
            raise InputError(f"policy entry without a name: {dict(d)}")
        unknown = set(d) - {"name", "rho", "alpha", "budget", "threshold"}
        if unknown:
            raise InputError(f"unknown policy keys {sorted(unknown)}")
        return cls(
            name=d["name"],
            rho=None if d.get("rho") is None else float(d["rho"]),
            alpha=None if d.get("alpha") is None else float(d["alpha"]),
            budget=None if d.get("budget") is None else int(d["budget"]),
            threshold=None if d.get("threshold") is None else float(d["threshold"]),
        )

    def decide(self, log_: ExplorationLog, model: BanditModel, M: int,
               rng: np.random.Generator) -> PolicyDecision:
        name = self.name
        if name == "ote-paired":
            return ote_mab(log_, paired=True, threshold=self.threshold)
        if name == "ote-independent":
            return ote_mab(log_, paired=False, threshold=self.threshold)
        if name == "fte-paired":
            return fte_mab(log_, M, paired=True, budget=self.budget, rng=rng)
        if name == "fte-independent":
            return fte_mab(log_, M, paired=False, budget=self.budget, rng=rng)
        if name == "ucb1":
            return ucb1_commit(model, log_.N * log_.K, rng)
        if name == "expexp":
            return expexp(log_, self.rho)
        if name == "marab":
            return marab_commit(log_, self.alpha)
        return empirical_mean_commit(log_)


@dataclass(frozen=True)
class ExperimentConfig:
    model: BanditModel
    n_grid: tuple[int, ...]
    replications: int
    policies: tuple[PolicySpec, ...]
    master_seed: int = 0
    M: int = 1
    delta_p: float | None = None
    threads: int | None = None
    oracle_draws: int = ORACLE_DRAWS

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "policies", tuple(self.policies))
        if not self.n_grid:
            raise InputError("n_grid must be nonempty")
        if self.n_grid[0] < 1 or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise InputError("n_grid must be strictly ascending positive integers")
        if self.replications < 1:
            raise InputError("replications must be >= 1")
        if self.M < 1:
            raise InputError("m must be a positive integer")
        if not self.policies:
            raise InputError("at least one policy is required")
        if not 0 <= self.master_seed <= _MASK:
            raise InputError("seed must be a 64-bit unsigned integer")
        if self.delta_p is not None and not 0 < self.delta_p < 1:
            raise InputError("delta_p must lie in (0, 1)")
        if self.threads is not None and self.threads < 1:
            raise InputError("threads must be a positive integer")
        if self.M > 1 and any(p.name.startswith("fte") for p in self.policies) and self.n_grid[0] < self.M:
            raise InputError(f"every N in n_grid must be >= m={self.M} for FTE policies")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ExperimentConfig":
        known = {"model", "n_grid", "replications", "m", "policies", "seed", "delta_p", "threads",
                 "oracle_draws"}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown config keys {sorted(unknown)}")
        for key in ("model", "n_grid", "replications", "policies"):
            if key not in d:
                raise InputError(f"config is missing required key {key!r}")
        try:
            return cls(
                model=model_from_dict(d["model"]),
                n_grid=tuple(int(n) for n in d["n_grid"]),
                replications=int(d["replications"]),
                policies=tuple(PolicySpec.from_dict(p) for p in d["policies"]),
                master_seed=int(d.get("seed", 0)),
                M=int(d.get("m", 1)),
                delta_p=None if d.get("delta_p") is None else float(d["delta_p"]),
                threads=None if d.get("threads") is None else int(d["threads"]),
                oracle_draws=int(d.get("oracle_draws", ORACLE_DRAWS)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"malformed config: {exc}") from exc

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        """Read a JSON config; ``json.JSONDecodeError`` propagates with its position."""
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class RegretPoint:
    policy: str
    hyper: float | None
    n: int
    m: int
    replications: int
    strong_regret: float
    strong_regret_se: float
    delta_regret: float | None
    delta_regret_se: float | None
    win_rate: float
    win_rate_se: float

    def sort_key(self) -> tuple:
        return (self.policy, self.hyper is not None, self.hyper or 0.0, self.n)


@dataclass
class RegretCurve:
    points: list[RegretPoint] = field(default_factory=list)
    model_label: str = ""
    k_star: int = 0
    win_probabilities: np.ndarray | None = None
    delta_p_star: float | None = None
    warnings: list[str] = field(default_factory=list)

    def get(self, policy: str, n: int, hyper: float | None = None) -> RegretPoint:
        for p in self.points:
            if p.policy == policy and p.n == n and p.hyper == hyper:
                return p
        raise KeyError((policy, n, hyper))


def _rate(hits: int, reps: int) -> tuple[float, float]:
    r = hits / reps
    return r, math.sqrt(r * (1.0 - r) / reps)


def resolve_workers(threads: int | None) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise InputError(f"{THREADS_ENV} must be a positive integer, got {env!r}") from exc
        if value < 1:
            raise InputError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        return value
    return threads or 1


@dataclass(frozen=True)
class _Block:
    model: BanditModel
    policies: tuple[PolicySpec, ...]
    M: int
    N: int
    n_index: int
    seed: int
    start: int
    stop: int
    k_star: int
    p: tuple[float, ...]
    delta_p: float | None


def _run_block(b: _Block) -> np.ndarray:
    """Integer outcome totals, one row per policy: [strong misses, delta misses, wins]."""
    totals = np.zeros((len(b.policies), 3), dtype=np.int64)
    p_star = b.p[b.k_star]
    for rep in range(b.start, b.stop):
        rng = np.random.Generator(np.random.PCG64(derive_replication_seed(b.seed, b.n_index, rep)))
        log_ = ExplorationLog(b.model.sample(b.N, rng), paired=True)
        fresh = b.model.sample(b.M, rng).sum(axis=0)
        for i, spec in enumerate(b.policies):
            try:
                arm = spec.decide(log_, b.model, b.M, rng).chosen_arm
            except CapacityError as exc:
                raise CapacityError(f"N={b.N}, M={b.M}: {exc}") from exc
            if arm != b.k_star:
                totals[i, 0] += 1
            if b.delta_p is not None and p_star - b.p[arm] >= b.delta_p:
                totals[i, 1] += 1
            rivals = np.delete(fresh, arm)
            if fresh[arm] > rivals.max():
                totals[i, 2] += 1
    return totals


def ground_truth(config: ExperimentConfig):
    rng = np.random.Generator(
        np.random.PCG64(derive_replication_seed(config.master_seed, ORACLE_STREAM, 0))
    )
    return win_probability_oracle(config.model, config.M, draws=config.oracle_draws, rng=rng)


def run_experiment(config: ExperimentConfig, *, workers: int | None = None) -> RegretCurve:
    """Run every policy at every N and aggregate regret estimates.

    ``workers`` overrides ``config.threads``; the environment variable
    ``ETC_BANDIT_THREADS`` overrides both.
    """
    workers = resolve_workers(workers if workers is not None else config.threads)
    truth = ground_truth(config)
    p = np.asarray(truth.values, dtype=float)
    order = np.argsort(-p, kind="stable")
    k_star = int(order[0])
    curve = RegretCurve(
        model_label=config.model.label, k_star=k_star, win_probabilities=p,
        delta_p_star=float(p[order[0]] - p[order[1]]),
    )
    if p[order[0]] == p[order[1]]:
        msg = f"oracle win probabilities tie for the maximum; k* = arm {k_star} by lowest index"
        log.warning(msg)
        curve.warnings.append(msg)
    log.info("ground truth for %s (M=%d): p=%s, k*=%d", config.model.label, config.M, p, k_star)

    reps = config.replications
    chunk = max(1, math.ceil(reps / (workers * 4)))
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for n_index, N in enumerate(config.n_grid):
            blocks = [
                _Block(config.model, config.policies, config.M, N, n_index, config.master_seed,
                       s, min(reps, s + chunk), k_star, tuple(float(x) for x in p), config.delta_p)
                for s in range(0, reps, chunk)
            ]
            results = pool.map(_run_block, blocks) if pool else map(_run_block, blocks)
            totals = sum(results, np.zeros((len(config.policies), 3), dtype=np.int64))
            for spec, (strong, delta, wins) in zip(config.policies, totals):
                sr, sr_se = _rate(int(strong), reps)
                wr, wr_se = _rate(int(wins), reps)
                dr, dr_se = _rate(int(delta), reps) if config.delta_p is not None else (None, None)
                curve.points.append(RegretPoint(
                    spec.name, spec.hyper, N, config.M, reps, sr, sr_se, dr, dr_se, wr, wr_se,
                ))
            log.info("N=%d done (%d/%d)", N, n_index + 1, len(config.n_grid))
    finally:
        if pool:
            pool.shutdown()
    curve.points.sort(key=RegretPoint.sort_key)
    return curve


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_results(curve: RegretCurve, path: str | os.PathLike) -> None:
    """CSV with one row per (policy, N), sorted by policy tag then N."""
    path = Path(path)
    rows = sorted(curve.points, key=RegretPoint.sort_key)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for pt in rows:
                writer.writerow([pt.policy] + [_fmt(getattr(pt, c)) for c in CSV_COLUMNS[1:]])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {path}: {exc.strerror}") from exc


def read_results(path: str | os.PathLike) -> list[RegretPoint]:
    def opt(s: str) -> float | None:
        return float(s) if s != "" else None

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [
            RegretPoint(
                policy=row["policy"], hyper=opt(row["hyper"]), n=int(row["n"]), m=int(row["m"]),
                replications=int(row["replications"]),
                strong_regret=float(row["strong_regret"]),
                strong_regret_se=float(row["strong_regret_se"]),
                delta_regret=opt(row["delta_regret"]), delta_regret_se=opt(row["delta_regret_se"]),
                win_rate=float(row["win_rate"]), win_rate_se=float(row["win_rate_se"]),
            )
            for row in reader
        ]
