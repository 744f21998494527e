"""Reward distributions for bandit arms and their ground-truth quantities.

Every arm is a weighted mixture of truncated Gaussian bumps
``exp(-scale * (u - mean)**2)`` and flat (uniform) components, restricted to a
bounded support and normalised internally. Sampling is exact (component
selection followed by rejection against a flat envelope on the support); the
oracles below use quadrature, or Monte Carlo for sums of several rewards.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import integrate, special

from .errors import InputError, NumericError, SamplingError
from .estimators import WinProbabilities

GAUSSIAN = "truncated-gaussian"
UNIFORM = "uniform"
KINDS = (GAUSSIAN, UNIFORM)

ATTEMPT_CAP = 10**6
ORACLE_DRAWS = 10**7

_QUAD_OPTS = dict(epsabs=1e-11, epsrel=1e-10, limit=500)


@dataclass(frozen=True)
class Component:
    kind: str
    weight: float
    mean: float | None = None
    scale: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InputError(f"unknown component kind {self.kind!r}; expected one of {KINDS}")
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise InputError(f"component weight must be positive, got {self.weight}")
        if self.kind == GAUSSIAN:
            if self.mean is None or not math.isfinite(self.mean):
                raise InputError("truncated-gaussian component needs a finite mean")
            if self.scale is None or not (self.scale > 0 and math.isfinite(self.scale)):
                raise InputError("truncated-gaussian component needs a positive scale")


def _erf_diff(a, b):
    """erf(b) - erf(a) without cancellation in the far tails."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = special.erf(b) - special.erf(a)
    right = a > 0
    left = b < 0
    out = np.where(right, special.erfc(a) - special.erfc(b), out)
    out = np.where(left, special.erfc(-b) - special.erfc(-a), out)
    return out


@dataclass(frozen=True)
class ArmDistribution:
    """One arm's reward law on ``[support_lo, support_hi]``."""

    components: tuple[Component, ...]
    support_lo: float
    support_hi: float
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise InputError("an arm needs at least one component")
        if not (math.isfinite(self.support_lo) and math.isfinite(self.support_hi)):
            raise InputError("support bounds must be finite")
        if not self.support_hi > self.support_lo:
            raise InputError(
                f"support_hi must exceed support_lo, got [{self.support_lo}, {self.support_hi}]"
            )
        if not np.all(self._masses > 0):
            raise InputError(f"arm {self.label or '?'} has a component with no mass on its support")

    # -- per-component pieces -------------------------------------------------

    def _partial_mass(self, c: Component, x):
        """Unnormalised mass of component ``c`` on ``[support_lo, x]``."""
        x = np.clip(np.asarray(x, dtype=float), self.support_lo, self.support_hi)
        if c.kind == UNIFORM:
            return x - self.support_lo
        rb = math.sqrt(c.scale)
        return 0.5 * math.sqrt(math.pi / c.scale) * _erf_diff(
            rb * (self.support_lo - c.mean), rb * (x - c.mean)
        )

    def _shape(self, c: Component, u):
        u = np.asarray(u, dtype=float)
        if c.kind == UNIFORM:
            return np.ones_like(u)
        return np.exp(-c.scale * (u - c.mean) ** 2)

    def _peak(self, c: Component) -> float:
        if c.kind == UNIFORM:
            return 1.0
        top = min(max(c.mean, self.support_lo), self.support_hi)
        return float(np.exp(-c.scale * (top - c.mean) ** 2))

    @cached_property
    def _masses(self) -> np.ndarray:
        return np.array(
            [c.weight * float(self._partial_mass(c, self.support_hi)) for c in self.components]
        )

    @cached_property
    def normalizer(self) -> float:
        """Total unnormalised mass; the density is the mixture divided by this."""
        return float(self._masses.sum())

    @cached_property
    def component_probs(self) -> np.ndarray:
        return self._masses / self.normalizer

    @property
    def width(self) -> float:
        return self.support_hi - self.support_lo

    def breakpoints(self) -> list[float]:
        """Interior points where the density has a peak, for quadrature."""
        pts = {
            c.mean
            for c in self.components
            if c.kind == GAUSSIAN and self.support_lo < c.mean < self.support_hi
        }
        return sorted(pts)

    # -- density / cdf --------------------------------------------------------

    def pdf(self, u):
        u = np.asarray(u, dtype=float)
        total = sum(c.weight * self._shape(c, u) for c in self.components)
        inside = (u >= self.support_lo) & (u <= self.support_hi)
        return np.where(inside, total / self.normalizer, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        total = sum(c.weight * self._partial_mass(c, x) for c in self.components)
        return np.clip(total / self.normalizer, 0.0, 1.0)

    # -- sampling -------------------------------------------------------------

    @cached_property
    def _envelope(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Per-component mean, scale, peak height, acceptance rate, plus cumulative selection probs."""
        means = np.array([c.mean if c.kind == GAUSSIAN else 0.0 for c in self.components])
        scales = np.array([c.scale if c.kind == GAUSSIAN else 0.0 for c in self.components])
        peaks = np.array([self._peak(c) for c in self.components])
        accept = (self._masses / np.array([c.weight for c in self.components])) / (peaks * self.width)
        cum = np.cumsum(self.component_probs)
        cum[-1] = 1.0
        return means, scales, peaks, accept, cum

    def _rejection(self, i: int, n: int, rng: np.random.Generator, cap: int) -> np.ndarray:
        means, scales, peaks, accept, _ = self._envelope
        lo, width = self.support_lo, self.width
        if self.components[i].kind == UNIFORM:
            return lo + width * rng.random(n)
        mean, scale, peak, rate = means[i], scales[i], peaks[i], accept[i]
        chunks = []
        filled = 0
        attempts = 0
        while filled < n:
            batch = min(int((n - filled) / rate * 1.25) + 8, 1 << 20)
            u = lo + width * rng.random(batch)
            v = peak * rng.random(batch)
            kept = u[v < np.exp(-scale * (u - mean) ** 2)]
            chunks.append(kept)
            filled += kept.size
            attempts += batch
            if filled < n and attempts > cap * n:
                raise SamplingError(
                    f"rejection sampling for arm {self.label or '?'} exceeded {cap} attempts per draw"
                )
        out = chunks[0] if len(chunks) == 1 else np.concatenate(chunks)
        return out[:n]

    def sample(self, n: int, rng: np.random.Generator, *, attempt_cap: int = ATTEMPT_CAP) -> np.ndarray:
        """Draw ``n`` i.i.d. rewards.

        Each draw picks a component with probability proportional to its mass,
        then proposes uniformly on the support and accepts under that
        component's bump.
        """
        if len(self.components) == 1:
            return self._rejection(0, n, rng, attempt_cap)
        labels = np.searchsorted(self._envelope[4], rng.random(n), side="right")
        out = np.empty(n)
        for i in range(len(self.components)):
            where = labels == i
            count = int(np.count_nonzero(where))
            if count:
                out[where] = self._rejection(i, count, rng, attempt_cap)
        return out


@dataclass(frozen=True)
class BanditModel:
    """K mutually independent arms."""

    arms: tuple[ArmDistribution, ...]
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "arms", tuple(self.arms))
        if len(self.arms) < 2:
            raise InputError(f"a bandit model needs at least 2 arms, got {len(self.arms)}")

    @property
    def K(self) -> int:
        return len(self.arms)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """An ``n x K`` matrix; row ``i`` is one simultaneous draw of all arms."""
        out = np.empty((n, self.K))
        for k, arm in enumerate(self.arms):
            try:
                out[:, k] = arm.sample(n, rng)
            except SamplingError as exc:
                raise SamplingError(f"arm {k}: {exc}") from exc
        return out


def sample(model: BanditModel, rng: np.random.Generator) -> np.ndarray:
    """One reward vector of length K."""
    return model.sample(1, rng)[0]


# -- oracles --------------------------------------------------------------------


def _quad(func, lo: float, hi: float, points: Sequence[float] = ()) -> float:
    pts = [p for p in points if lo < p < hi]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(func, lo, hi, points=pts or None, **_QUAD_OPTS)
        except integrate.IntegrationWarning as exc:
            raise NumericError(f"quadrature on [{lo}, {hi}] did not converge: {exc}") from exc
    return float(value)


def normalization_integral(arm: ArmDistribution) -> float:
    """Quadrature of the normalised density over its support (should be 1)."""
    return _quad(lambda u: float(arm.pdf(u)), arm.support_lo, arm.support_hi, arm.breakpoints())


def moments_oracle(arm: ArmDistribution) -> dict[str, float]:
    lo, hi, pts = arm.support_lo, arm.support_hi, arm.breakpoints()
    mean = _quad(lambda u: u * float(arm.pdf(u)), lo, hi, pts)
    var = _quad(lambda u: (u - mean) ** 2 * float(arm.pdf(u)), lo, hi, pts)
    return {"mean": mean, "variance": var}


def cvar_oracle(arm: ArmDistribution, alpha: float) -> float:
    """Expected reward conditioned on falling below the ``alpha`` quantile."""
    if not 0 < alpha < 1:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    lo, hi = arm.support_lo, arm.support_hi
    a, b = lo, hi
    for _ in range(200):
        mid = 0.5 * (a + b)
        if float(arm.cdf(mid)) < alpha:
            a = mid
        else:
            b = mid
        if b - a <= 1e-14 * max(1.0, abs(mid)):
            break
    v = 0.5 * (a + b)
    partial = _quad(lambda u: u * float(arm.pdf(u)), lo, v, arm.breakpoints())
    return partial / float(arm.cdf(v))


def _win_integrand(model: BanditModel, k: int):
    arm = model.arms[k]
    others = [a for j, a in enumerate(model.arms) if j != k]

    def f(u: float) -> float:
        val = float(arm.pdf(u))
        for o in others:
            val *= float(o.cdf(u))
        return val

    return f


def win_probability_oracle(
    model: BanditModel,
    M: int = 1,
    *,
    draws: int = ORACLE_DRAWS,
    rng: np.random.Generator | None = None,
    chunk: int = 10**6,
) -> WinProbabilities:
    """Ground-truth probability that each arm's M-sum is the (weak) maximum.

    ``M == 1`` integrates ``f_k * prod_j F_j`` numerically; larger ``M`` falls
    back to Monte Carlo over ``draws`` simultaneous M-sums and reports the
    per-arm standard error.
    """
    if M < 1:
        raise InputError(f"M must be a positive integer, got {M}")
    if M == 1:
        pts = sorted(
            {a.support_lo for a in model.arms}
            | {a.support_hi for a in model.arms}
            | {p for a in model.arms for p in a.breakpoints()}
        )
        values = []
        for k, arm in enumerate(model.arms):
            values.append(_quad(_win_integrand(model, k), arm.support_lo, arm.support_hi, pts))
        return WinProbabilities(
            values=np.array(values), M=1, method="oracle-quadrature", samples_used=0,
            standard_error=np.zeros(model.K),
        )

    rng = np.random.default_rng(0) if rng is None else rng
    wins = np.zeros(model.K, dtype=np.int64)
    done = 0
    while done < draws:
        size = min(chunk, draws - done)
        sums = np.empty((size, model.K))
        for k, arm in enumerate(model.arms):
            sums[:, k] = arm.sample(size * M, rng).reshape(size, M).sum(axis=1)
        top = sums.max(axis=1, keepdims=True)
        wins += (sums >= top).sum(axis=0)
        done += size
    p = wins / draws
    return WinProbabilities(
        values=p, M=M, method="oracle-monte-carlo", samples_used=draws,
        standard_error=np.sqrt(p * (1 - p) / draws), counts=tuple(int(w) for w in wins),
        denominator=draws,
    )


# -- declarations and built-in models -----------------------------------------


def truncated_gaussian(mean: float, variance: float, lo: float = 0.0, hi: float = 10.0,
                       label: str = "") -> ArmDistribution:
    """Single-bump arm parameterised by the untruncated mean and variance."""
    return ArmDistribution((Component(GAUSSIAN, 1.0, mean, 1.0 / (2.0 * variance)),), lo, hi, label)


def uniform(lo: float, hi: float, label: str = "") -> ArmDistribution:
    return ArmDistribution((Component(UNIFORM, 1.0),), lo, hi, label)


def example1() -> BanditModel:
    arm1 = ArmDistribution((Component(GAUSSIAN, 1.0, 3.0, 2.0),), 0.0, 10.0, "ex1-arm1")
    arm2 = ArmDistribution(
        (Component(GAUSSIAN, 3.0, 1.0, 8.0), Component(GAUSSIAN, 2.0, 8.0, 8.0)), 0.0, 10.0, "ex1-arm2"
    )
    return BanditModel((arm1, arm2), "example1")


def example2() -> BanditModel:
    arm1 = ArmDistribution((Component(GAUSSIAN, 1.0, 2.0, 0.5),), 0.0, 10.0, "ex2-arm1")
    arm2 = ArmDistribution((Component(GAUSSIAN, 1.0, 1.0, 0.5),), 0.0, 10.0, "ex2-arm2")
    return BanditModel((arm1, arm2), "example2")


def example3() -> BanditModel:
    """Stand-in for the unspecified "best arm has the larger variance" case."""
    return BanditModel(
        (truncated_gaussian(6.0, 4.0, label="ex3-arm1"), truncated_gaussian(3.0, 0.5, label="ex3-arm2")),
        "example3-standin",
    )


def example4() -> BanditModel:
    return BanditModel((truncated_gaussian(3.0, 2.0, label="ex4-arm1"), example1().arms[1]), "example4")


def mean_variance_toy() -> BanditModel:
    """Disjoint uniform arms with (mean, variance) = (10, 10) and (1, 1)."""
    h1, h2 = math.sqrt(30.0), math.sqrt(3.0)
    return BanditModel(
        (uniform(10.0 - h1, 10.0 + h1, "mv-arm1"), uniform(1.0 - h2, 1.0 + h2, "mv-arm2")),
        "mean-variance-toy",
    )


BUILTIN_MODELS = {
    "example1": example1,
    "example2": example2,
    "example3": example3,
    "example4": example4,
    "mean-variance-toy": mean_variance_toy,
}


def arm_from_dict(decl: Mapping[str, Any], label: str = "") -> ArmDistribution:
    try:
        lo, hi = decl["support"]
        comps = tuple(
            Component(
                kind=c["kind"],
                weight=float(c.get("weight", 1.0)),
                mean=None if c.get("mean") is None else float(c["mean"]),
                scale=None if c.get("scale") is None else float(c["scale"]),
            )
            for c in decl["components"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed arm declaration {label or ''}: {exc!r}") from exc
    return ArmDistribution(comps, float(lo), float(hi), decl.get("label", label))


def model_from_dict(decl: Mapping[str, Any] | str) -> BanditModel:
    """Build a model from a config declaration or a built-in model name."""
    if isinstance(decl, str):
        if decl not in BUILTIN_MODELS:
            raise InputError(f"unknown built-in model {decl!r}; known: {sorted(BUILTIN_MODELS)}")
        return BUILTIN_MODELS[decl]()
    if "arms" not in decl:
        raise InputError("model declaration needs an 'arms' array")
    arms = tuple(arm_from_dict(a, f"arm{k}") for k, a in enumerate(decl["arms"]))
    return BanditModel(arms, decl.get("label", ""))


def model_to_dict(model: BanditModel) -> dict[str, Any]:
    arms = []
    for arm in model.arms:
        comps = []
        for c in arm.components:
            rec: dict[str, Any] = {"kind": c.kind, "weight": c.weight}
            if c.kind == GAUSSIAN:
                rec.update(mean=c.mean, scale=c.scale)
            comps.append(rec)
        arms.append({"label": arm.label, "support": [arm.support_lo, arm.support_hi], "components": comps})
    return {"label": model.label, "arms": arms}
