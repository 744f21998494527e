"""Win-probability estimators and sample-size bounds.

The independent-arm estimators average an indicator over every cross-arm
tuple of observations. They are evaluated with a rank-counting identity
instead of tuple enumeration: for arm ``k``, the number of tuples in which
observation ``x`` of arm ``k`` is a weak maximum equals the product over the
other arms of ``#{observations <= x}``. Counts stay in exact integers and are
divided once at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import chain, combinations

import numpy as np

from .errors import CapacityError, InputError

INDEPENDENT_EXACT = "independent-exact"
INDEPENDENT_SAMPLED = "independent-sampled"
PAIRED = "paired"

DEFAULT_CAP = 10**6

_INT64_SAFE = 2**62


@dataclass(frozen=True)
class WinProbabilities:
    values: np.ndarray
    M: int
    method: str
    samples_used: int
    counts: tuple[int, ...] | None = None
    denominator: int | None = None
    standard_error: np.ndarray | None = None

    @property
    def fractions(self) -> tuple[Fraction, ...]:
        if self.counts is None or self.denominator is None:
            raise ValueError(f"{self.method} estimate carries no exact counts")
        return tuple(Fraction(c, self.denominator) for c in self.counts)

    def argmax(self) -> int:
        """Lowest index attaining the maximum, compared on exact counts when present."""
        if self.counts is not None:
            best = max(self.counts)
            return self.counts.index(best)
        return int(np.argmax(self.values))


@dataclass(frozen=True)
class ExplorationLog:
    """``rewards[n, k]`` is the n-th observation of arm k."""

    rewards: np.ndarray
    paired: bool = True

    def __post_init__(self) -> None:
        r = np.asarray(self.rewards, dtype=float)
        if r.ndim != 2:
            raise InputError(f"rewards must be an N x K matrix, got shape {r.shape}")
        if r.shape[0] < 1:
            raise InputError("exploration log is empty")
        if r.shape[1] < 2:
            raise InputError(f"need at least 2 arms, got {r.shape[1]}")
        if not np.all(np.isfinite(r)):
            raise InputError("exploration log contains non-finite rewards")
        object.__setattr__(self, "rewards", r)

    @property
    def N(self) -> int:
        return self.rewards.shape[0]

    @property
    def K(self) -> int:
        return self.rewards.shape[1]


@dataclass(frozen=True)
class MSumSet:
    """All size-M subset sums per arm, same subset order for every arm."""

    sums: np.ndarray  # K x C(N, M)
    M: int
    subsets: np.ndarray = field(repr=False)  # C(N, M) x M, lexicographic

    @property
    def size(self) -> int:
        return self.sums.shape[1]


def _tuple_counts(columns: list[np.ndarray], threshold: float | None = None) -> tuple[int, ...]:
    """Per-arm number of cross-arm tuples where that arm is a weak maximum."""
    K = len(columns)
    sorted_cols = [np.sort(c) for c in columns]
    longest = max(c.size for c in columns)
    exact_int64 = longest ** (K - 1) < _INT64_SAFE
    out = []
    for k in range(K):
        x = sorted_cols[k]  # sorted queries keep searchsorted cache friendly
        if threshold is not None:
            x = x[x >= threshold]
        if x.size == 0:
            out.append(0)
            continue
        if exact_int64:
            prod = np.ones(x.size, dtype=np.int64)
        else:
            prod = np.ones(x.size, dtype=object)
        for j in range(K):
            if j == k:
                continue
            cnt = np.searchsorted(sorted_cols[j], x, side="right")
            prod = prod * (cnt if exact_int64 else cnt.astype(object))
        out.append(int(prod.sum()))
    return tuple(out)


def _row_win_counts(matrix: np.ndarray, threshold: float | None = None) -> tuple[int, ...]:
    """Rows of ``matrix`` (n x K) where each column is a weak maximum."""
    # K is small, so loop over arms with elementwise ufuncs; a reduce over the
    # short axis is far slower than this on long inputs
    by_arm = [np.ascontiguousarray(matrix[:, k]) for k in range(matrix.shape[1])]
    top = by_arm[0].copy()
    for col in by_arm[1:]:
        np.maximum(top, col, out=top)
    out = []
    for col in by_arm:
        wins = col >= top
        if threshold is not None:
            wins &= col >= threshold
        out.append(int(np.count_nonzero(wins)))
    return tuple(out)


def estimate_ote_independent(log: ExplorationLog, threshold: float | None = None) -> WinProbabilities:
    """Average of the weak-maximum indicator over all N**K cross-arm tuples.

    With ``threshold`` the constant is appended to the comparison set, so an
    arm only scores where its observation is also ``>= threshold``.
    """
    cols = [log.rewards[:, k] for k in range(log.K)]
    counts = _tuple_counts(cols, threshold)
    denom = log.N ** log.K
    return WinProbabilities(
        values=np.array([c / denom for c in counts]), M=1, method=INDEPENDENT_EXACT,
        samples_used=denom, counts=counts, denominator=denom,
    )


def estimate_ote_paired(log: ExplorationLog, threshold: float | None = None) -> WinProbabilities:
    """Fraction of simultaneous observation rows where each arm is a weak maximum."""
    if not log.paired:
        raise InputError("paired estimation needs a log of simultaneous observations")
    counts = _row_win_counts(log.rewards, threshold)
    return WinProbabilities(
        values=np.array([c / log.N for c in counts]), M=1, method=PAIRED,
        samples_used=log.N, counts=counts, denominator=log.N,
    )


@lru_cache(maxsize=32)
def _subset_index(N: int, M: int) -> np.ndarray:
    if M == 1:
        idx = np.arange(N).reshape(N, 1)
    elif M == 2:
        idx = np.column_stack(np.triu_indices(N, k=1))
    else:
        flat = np.fromiter(chain.from_iterable(combinations(range(N), M)), dtype=np.int64)
        idx = flat.reshape(-1, M)
    idx = np.asfortranarray(idx)  # each position's column is gathered contiguously
    idx.setflags(write=False)
    return idx


def _check_m(N: int, M: int) -> None:
    if not (isinstance(M, (int, np.integer)) and 1 <= M <= N):
        raise InputError(f"M must be an integer in [1, N={N}], got {M}")


def build_m_sums(log: ExplorationLog, M: int, cap: int = DEFAULT_CAP) -> MSumSet:
    _check_m(log.N, M)
    size = math.comb(log.N, M)
    if size > cap:
        raise CapacityError(
            f"C({log.N}, {M}) = {size} subset sums exceed the cap of {cap}; "
            "use the sampled estimator (pass a budget)"
        )
    idx = _subset_index(log.N, M)
    sums = np.empty((log.K, size))
    for k in range(log.K):
        col = np.ascontiguousarray(log.rewards[:, k])
        acc = col[idx[:, 0]]
        for j in range(1, M):
            acc += col[idx[:, j]]
        sums[k] = acc
    return MSumSet(sums=sums, M=M, subsets=idx)


def _random_subset_sums(rewards: np.ndarray, M: int, count: int, rng: np.random.Generator,
                        shared: bool) -> np.ndarray:
    """``count`` x K matrix of M-sums over uniformly random M-subsets."""
    N, K = rewards.shape
    out = np.empty((count, K))
    rows = max(1, 2_000_000 // N)
    for start in range(0, count, rows):
        stop = min(count, start + rows)
        if shared:
            pick = np.argpartition(rng.random((stop - start, N)), M - 1, axis=1)[:, :M]
            out[start:stop] = rewards[pick].sum(axis=1)
        else:
            for k in range(K):
                pick = np.argpartition(rng.random((stop - start, N)), M - 1, axis=1)[:, :M]
                out[start:stop, k] = rewards[pick, k].sum(axis=1)
    return out


def estimate_fte(
    log: ExplorationLog,
    M: int,
    mode: str = "independent",
    budget: int | None = None,
    *,
    cap: int = DEFAULT_CAP,
    rng: np.random.Generator | None = None,
) -> WinProbabilities:
    """Win probabilities of M-sums estimated from all size-M subsets of the log.

    ``independent`` compares every cross-arm tuple of subset sums;
    ``paired`` compares the arms' sums over the same subset. When the number
    of subsets exceeds ``cap`` and ``budget`` is given, ``budget`` random
    subset tuples are used instead of the full enumeration.
    """
    if mode not in ("independent", "paired"):
        raise InputError(f"mode must be 'independent' or 'paired', got {mode!r}")
    _check_m(log.N, M)
    if mode == "paired" and not log.paired:
        raise InputError("paired estimation needs a log of simultaneous observations")
    size = math.comb(log.N, M)
    if size <= cap:
        ms = build_m_sums(log, M, cap)
        if mode == "independent":
            counts = _tuple_counts([ms.sums[k] for k in range(log.K)])
            denom = size ** log.K
            method = INDEPENDENT_EXACT
        else:
            counts = _row_win_counts(ms.sums.T)
            denom = size
            method = PAIRED
        return WinProbabilities(
            values=np.array([c / denom for c in counts]), M=M, method=method,
            samples_used=denom, counts=counts, denominator=denom,
        )
    if budget is None:
        raise CapacityError(
            f"C({log.N}, {M}) = {size} exceeds the cap of {cap} and no sampling budget was given"
        )
    if budget < 1:
        raise InputError(f"budget must be positive, got {budget}")
    rng = np.random.default_rng(0) if rng is None else rng
    sums = _random_subset_sums(log.rewards, M, budget, rng, shared=(mode == "paired"))
    counts = _row_win_counts(sums)
    return WinProbabilities(
        values=np.array([c / budget for c in counts]), M=M,
        method=PAIRED if mode == "paired" else INDEPENDENT_SAMPLED,
        samples_used=budget, counts=counts, denominator=budget,
    )


def _check_bound_args(K: int, epsilon_r: float, delta_p: float) -> None:
    if not (isinstance(K, (int, np.integer)) and K >= 2):
        raise InputError(f"K must be an integer >= 2, got {K}")
    if not 0 < epsilon_r < 1:
        raise InputError(f"epsilon_r must lie in (0, 1), got {epsilon_r}")
    if not 0 < delta_p <= 1:
        raise InputError(f"delta_p must lie in (0, 1], got {delta_p}")


def hoeffding_exploration_bound(K: int, epsilon_r: float, delta_p: float) -> float:
    """The real-valued lower bound 2 ln(2K / epsilon_r) / delta_p**2."""
    _check_bound_args(K, epsilon_r, delta_p)
    return 2.0 * math.log(2.0 * K / epsilon_r) / delta_p**2


def _ceil(x: float) -> int:
    # absorbs round-off such as 2*ln(e**2) evaluating to 4.000000000000001
    n = math.ceil(x)
    if n - 1 >= x - 1e-9 * max(1.0, abs(x)):
        n -= 1
    return max(n, 1)


def sample_size_ote(K: int, epsilon_r: float, delta_p: float) -> int:
    """Smallest N with N >= 2 ln(2K / epsilon_r) / delta_p**2."""
    return _ceil(hoeffding_exploration_bound(K, epsilon_r, delta_p))


def sample_size_fte(K: int, epsilon_r: float, delta_p: float, M: int) -> int:
    """Smallest N with floor(N / M) >= 2 ln(2K / epsilon_r) / delta_p**2."""
    if not (isinstance(M, (int, np.integer)) and M >= 1):
        raise InputError(f"M must be a positive integer, got {M}")
    return int(M) * sample_size_ote(K, epsilon_r, delta_p)
