"""Commitment rules: pick one arm after the exploration phase.

Every rule returns a :class:`PolicyDecision`; ties in the score vector go to
the lowest arm index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .estimators import (
    ExplorationLog,
    WinProbabilities,
    estimate_fte,
    estimate_ote_independent,
    estimate_ote_paired,
)


@dataclass(frozen=True)
class PolicyDecision:
    chosen_arm: int
    scores: np.ndarray
    policy: str
    hyper: float | None = None


def _from_estimate(est: WinProbabilities, policy: str) -> PolicyDecision:
    return PolicyDecision(est.argmax(), est.values, policy)


def ote_mab(log: ExplorationLog, paired: bool = False, threshold: float | None = None) -> PolicyDecision:
    """Commit to the arm with the largest estimated one-shot win probability."""
    if paired:
        return _from_estimate(estimate_ote_paired(log, threshold), "ote-paired")
    return _from_estimate(estimate_ote_independent(log, threshold), "ote-independent")


def fte_mab(
    log: ExplorationLog,
    M: int,
    paired: bool = False,
    budget: int | None = None,
    *,
    rng: np.random.Generator | None = None,
) -> PolicyDecision:
    """Commit to the arm whose M-sum most often comes out on top."""
    mode = "paired" if paired else "independent"
    est = estimate_fte(log, M, mode, budget, rng=rng)
    return _from_estimate(est, f"fte-{mode}")


def empirical_mean_commit(log: ExplorationLog) -> PolicyDecision:
    means = log.rewards.mean(axis=0)
    return PolicyDecision(int(np.argmax(means)), means, "mean")


def ucb1_commit(model, total_pulls: int, rng: np.random.Generator) -> PolicyDecision:
    """Run UCB1 for ``total_pulls`` rounds, then commit to the best empirical mean.

    ``model`` only needs ``K`` and ``sample(n, rng) -> (n, K) array``. Each
    arm's reward stream is drawn up front; pulls consume it in order.
    """
    K = model.K
    if total_pulls < K:
        raise InputError(f"total_pulls must be at least K={K}, got {total_pulls}")
    streams = model.sample(total_pulls - K + 1, rng)
    counts = [1] * K
    sums = [float(streams[0, k]) for k in range(K)]
    for t in range(K + 1, total_pulls + 1):
        log_t = 2.0 * math.log(t - 1)
        best, best_index = 0, -math.inf
        for k in range(K):
            index = sums[k] / counts[k] + math.sqrt(log_t / counts[k])
            if index > best_index:
                best, best_index = k, index
        sums[best] += float(streams[counts[best], best])
        counts[best] += 1
    means = np.array(sums) / np.array(counts)
    return PolicyDecision(int(np.argmax(means)), means, "ucb1")


def expexp(log: ExplorationLog, rho: float) -> PolicyDecision:
    """Mean-variance rule: minimise ``sample_variance - rho * sample_mean``."""
    if log.N < 2:
        raise InputError("ExpExp needs at least 2 observations per arm")
    if not rho >= 0:
        raise InputError(f"rho must be >= 0, got {rho}")
    r = log.rewards
    scores = r.var(axis=0, ddof=1) - rho * r.mean(axis=0)
    return PolicyDecision(int(np.argmin(scores)), scores, "expexp", float(rho))


def empirical_cvar(rewards: np.ndarray, alpha: float) -> np.ndarray:
    """Mean of the ceil(alpha * N) smallest observations, per column."""
    if not 0 < alpha < 1:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    rewards = np.asarray(rewards, dtype=float)
    N = rewards.shape[0]
    m = min(N, max(1, math.ceil(alpha * N - 1e-9)))
    low = np.partition(rewards, m - 1, axis=0)[:m]
    return low.mean(axis=0)


def marab_commit(log: ExplorationLog, alpha: float) -> PolicyDecision:
    """Commit to the arm with the largest empirical CVaR at level ``alpha``."""
    scores = empirical_cvar(log.rewards, alpha)
    return PolicyDecision(int(np.argmax(scores)), scores, "marab", float(alpha))
