"""Closed-form regret, cost/regret trade-off and exploration-budget curves."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp, xlog1py, xlogy

from .errors import InputError
from .estimators import sample_size_fte, sample_size_ote

MAX_EXACT_N = 10**5


@dataclass(frozen=True)
class RegretSpec:
    delta_p: float
    epsilon_r: float
    M: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.delta_p <= 1:
            raise InputError(f"delta_p must lie in (0, 1], got {self.delta_p}")
        if not 0 < self.epsilon_r < 1:
            raise InputError(f"epsilon_r must lie in (0, 1), got {self.epsilon_r}")
        if self.M < 1:
            raise InputError(f"M must be a positive integer, got {self.M}")

    def sample_size(self, K: int) -> int:
        return sample_size_fte(K, self.epsilon_r, self.delta_p, self.M)


@dataclass(frozen=True)
class CostSpec:
    """Linear experimentation cost ``N / divisor`` traded against ``alpha * regret``."""

    cost_per_experiment_divisor: float
    tradeoff_alpha: float
    n_grid: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if not self.cost_per_experiment_divisor > 0:
            raise InputError("cost divisor must be positive")
        if not self.tradeoff_alpha >= 0:
            raise InputError("trade-off alpha must be >= 0")
        if not self.n_grid:
            raise InputError("n_grid must be nonempty")
        if self.n_grid[0] < 1 or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise InputError("n_grid must be strictly ascending positive integers")


class TradeoffResult(NamedTuple):
    n_opt: int
    n_grid: np.ndarray
    cost: np.ndarray
    regret: np.ndarray
    objective: np.ndarray


class HoeffdingInterval(NamedTuple):
    halfwidth: float
    confidence: float


def exact_regret_two_arm(p_star: float, N: int) -> float:
    """Probability that a majority vote of N comparisons picks the wrong arm.

    Each comparison favours the better arm with probability ``p_star``; an
    even-N tie is split evenly. Terms are accumulated in log space.
    """
    if not 0 <= p_star <= 1:
        raise InputError(f"p_star must lie in [0, 1], got {p_star}")
    if not (isinstance(N, (int, np.integer)) and 1 <= N <= MAX_EXACT_N):
        raise InputError(f"N must be an integer in [1, {MAX_EXACT_N}], got {N}")
    N = int(N)
    i = np.arange(N // 2 + 1, N + 1, dtype=float)
    log_c = gammaln(N + 1) - gammaln(i + 1) - gammaln(N - i + 1)
    log_terms = log_c + xlog1py(i, -p_star) + xlogy(N - i, p_star)
    if N % 2 == 0:
        h = N / 2
        tie = (gammaln(N + 1) - 2 * gammaln(h + 1) + xlog1py(h, -p_star) + xlogy(h, p_star)
               + math.log(0.5))
        log_terms = np.append(log_terms, tie)
    with np.errstate(divide="ignore"):
        total = logsumexp(log_terms)
    return float(min(1.0, max(0.0, math.exp(total))))


def cost_regret_argmin(p_star: float, spec: CostSpec) -> TradeoffResult:
    grid = np.array(spec.n_grid, dtype=np.int64)
    cost = grid / spec.cost_per_experiment_divisor
    regret = np.array([exact_regret_two_arm(p_star, int(n)) for n in grid])
    objective = cost + spec.tradeoff_alpha * regret
    best = int(np.argmin(objective))
    return TradeoffResult(int(grid[best]), grid, cost, regret, objective)


def min_exploration_curve(
    delta_p_star: float, K: int, M: int, epsilon_grid: Sequence[float]
) -> list[tuple[float, int]]:
    """Exploration budget guaranteeing regret below each epsilon in the grid."""
    if not len(epsilon_grid):
        raise InputError("epsilon_grid must be nonempty")
    if M == 1:
        return [(float(e), sample_size_ote(K, e, delta_p_star)) for e in epsilon_grid]
    return [(float(e), sample_size_fte(K, e, delta_p_star, M)) for e in epsilon_grid]


def hoeffding_halfwidth(a: float, samples: int) -> HoeffdingInterval:
    if not (a > 0 and samples > 0):
        raise InputError("a and samples must be positive")
    return HoeffdingInterval(a / (2.0 * math.sqrt(samples)), 1.0 - 2.0 * math.exp(-a * a / 2.0))
