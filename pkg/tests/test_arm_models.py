import math

import numpy as np
import pytest

from etc_bandit.arm_models import (
    GAUSSIAN,
    ArmDistribution,
    BanditModel,
    Component,
    cvar_oracle,
    example1,
    example3,
    example4,
    mean_variance_toy,
    model_from_dict,
    model_to_dict,
    moments_oracle,
    normalization_integral,
    sample,
    truncated_gaussian,
    uniform,
    win_probability_oracle,
)
from etc_bandit.errors import InputError, SamplingError


def test_uniform_draws_stay_in_support(rng):
    arm = uniform(0.0, 1.0)
    x = arm.sample(10_000, rng)
    assert x.min() >= 0.0 and x.max() <= 1.0


@pytest.mark.parametrize("k,expected", [(0, 3.0), (1, 3.8)])
def test_example1_sample_means(k, expected):
    x = example1().arms[k].sample(10**6, np.random.default_rng(7))
    assert abs(x.mean() - expected) < 0.01


def test_sample_returns_one_reward_per_arm(rng):
    v = sample(example1(), rng)
    assert v.shape == (2,)


def test_sample_log_rows_are_exchangeable(rng):
    # component labels are drawn per position, so a prefix has the full mixture law
    x = example1().arms[1].sample(20_000, rng)
    first, second = x[:10_000], x[10_000:]
    assert abs((first > 4.5).mean() - 0.4) < 0.02
    assert abs((second > 4.5).mean() - 0.4) < 0.02


def test_moments_uniform_closed_form():
    m = moments_oracle(uniform(0.0, 1.0))
    assert m["mean"] == pytest.approx(0.5, abs=1e-9)
    assert m["variance"] == pytest.approx(1 / 12, abs=1e-9)


def test_moments_example1():
    a1, a2 = example1().arms
    assert moments_oracle(a1)["mean"] == pytest.approx(3.0, abs=1e-3)
    assert moments_oracle(a2)["mean"] == pytest.approx(3.8, abs=5e-3)


def test_narrow_gaussian_mean_is_centre():
    arm = ArmDistribution((Component(GAUSSIAN, 1.0, 5.0, 50.0),), 0.0, 10.0)
    assert moments_oracle(arm)["mean"] == pytest.approx(5.0, abs=1e-3)


@pytest.mark.parametrize(
    "arm",
    [
        uniform(-2.0, 3.0),
        example1().arms[0],
        example1().arms[1],
        example3().arms[0],
        example4().arms[0],
        ArmDistribution((Component(GAUSSIAN, 1.0, 14.0, 3.0), Component("uniform", 0.5)), 0.0, 10.0),
    ],
)
def test_density_normalised(arm):
    assert normalization_integral(arm) == pytest.approx(1.0, abs=1e-6)


def test_cdf_matches_quadrature_of_pdf():
    from scipy import integrate

    arm = example1().arms[1]
    for x in (0.5, 1.0, 3.0, 8.0, 9.9):
        q, _ = integrate.quad(lambda u: float(arm.pdf(u)), 0.0, x, points=[1.0, 8.0] if x > 8 else [1.0] if x > 1 else None, limit=200)
        assert float(arm.cdf(x)) == pytest.approx(q, abs=1e-9)


@pytest.mark.parametrize("k", [0, 1])
def test_empirical_moments_converge(k):
    arm = example1().arms[k]
    truth = moments_oracle(arm)
    x = arm.sample(10**6, np.random.default_rng(99 + k))
    se_mean = math.sqrt(truth["variance"] / x.size)
    assert abs(x.mean() - truth["mean"]) < 3 * se_mean
    fourth = np.mean((x - truth["mean"]) ** 4)
    se_var = math.sqrt((fourth - truth["variance"] ** 2) / x.size)
    assert abs(x.var() - truth["variance"]) < 3 * se_var


def test_win_probability_identical_arms():
    arm = truncated_gaussian(4.0, 1.0)
    wp = win_probability_oracle(BanditModel((arm, arm)))
    np.testing.assert_allclose(wp.values, [0.5, 0.5], atol=1e-4)


def test_win_probability_example1():
    wp = win_probability_oracle(example1())
    assert wp.values[0] == pytest.approx(0.6, abs=0.01)


def test_win_probability_uniform_pair():
    # p1 = 1/2 * (int_0^1 u du + int_1^2 1 du) = 3/4
    wp = win_probability_oracle(BanditModel((uniform(0, 2), uniform(0, 1))))
    assert wp.values[0] == pytest.approx(0.75, abs=1e-4)
    assert wp.values[1] == pytest.approx(0.25, abs=1e-4)


@pytest.mark.parametrize(
    "model",
    [example1(), example3(), example4(), BanditModel((uniform(0, 2), truncated_gaussian(1, 0.3, 0, 3), uniform(0.5, 1.5)))],
)
def test_win_probabilities_sum_to_one(model):
    assert win_probability_oracle(model).values.sum() == pytest.approx(1.0, abs=1e-4)


def test_win_probability_disjoint_supports():
    wp = win_probability_oracle(mean_variance_toy())
    np.testing.assert_allclose(wp.values, [1.0, 0.0], atol=1e-9)


def test_win_probability_m_sums_monte_carlo():
    model = BanditModel((uniform(0, 2), uniform(0, 1)))
    wp = win_probability_oracle(model, 2, draws=10**6, rng=np.random.default_rng(3))
    assert wp.method == "oracle-monte-carlo"
    assert wp.values.sum() == pytest.approx(1.0, abs=1e-12)
    # S_big = sum of two U(0,2) has cdf s**2 / 8 on [0, 2]; S_small = sum of two U(0,1)
    # has mean 1 and variance 1/6, so P(S_big >= S_small) = 1 - E[S_small**2] / 8 = 41/48
    exact = 41 / 48
    assert abs(wp.values[0] - exact) < 4 * wp.standard_error[0]


def test_cvar_uniform_closed_form():
    assert cvar_oracle(uniform(0, 1), 0.5) == pytest.approx(0.25, abs=1e-9)
    assert cvar_oracle(uniform(0, 1), 0.2) == pytest.approx(0.1, abs=1e-9)


def test_cvar_example1_arm2_against_samples():
    arm = example1().arms[1]
    value = cvar_oracle(arm, 0.25)
    assert 0.0 <= value < moments_oracle(arm)["mean"]
    x = np.sort(arm.sample(10**7, np.random.default_rng(2024)))
    empirical = x[: int(0.25 * x.size)].mean()
    assert value == pytest.approx(empirical, abs=2e-3)


@pytest.mark.parametrize("arm", [example1().arms[0], example1().arms[1], example3().arms[0]])
def test_cvar_bounded_by_mean_and_monotone(arm):
    mean = moments_oracle(arm)["mean"]
    values = [cvar_oracle(arm, a) for a in (0.05, 0.2, 0.4, 0.6, 0.8, 0.95)]
    assert all(v <= mean + 1e-9 for v in values)
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))


def test_arm_validation():
    with pytest.raises(InputError):
        ArmDistribution((), 0, 1)
    with pytest.raises(InputError):
        ArmDistribution((Component("uniform", 1.0),), 1, 1)
    with pytest.raises(InputError):
        Component("uniform", 0.0)
    with pytest.raises(InputError):
        Component(GAUSSIAN, 1.0, 3.0, None)
    with pytest.raises(InputError):
        Component("laplace", 1.0)
    with pytest.raises(InputError):
        BanditModel((uniform(0, 1),))


def test_sampling_attempt_cap_names_arm(rng):
    # acceptance rate ~ 9e-8: one draw needs far more than 10**6 proposals
    needle = ArmDistribution((Component(GAUSSIAN, 1.0, 0.0, 1e8),), -1000.0, 1000.0, "needle")
    with pytest.raises(SamplingError, match="needle"):
        needle.sample(5, rng, attempt_cap=10)
    with pytest.raises(SamplingError, match="arm 1"):
        BanditModel((uniform(0, 1), needle)).sample(1, rng)


def test_model_declaration_round_trip():
    model = example1()
    again = model_from_dict(model_to_dict(model))
    assert again == model
    assert model_from_dict("example1") == model
    with pytest.raises(InputError):
        model_from_dict("nope")
    with pytest.raises(InputError):
        model_from_dict({"arms": [{"support": [0, 1]}]})


def test_variance_parameterisation():
    arm = truncated_gaussian(3.0, 2.0)
    assert arm.components[0].scale == pytest.approx(0.25)
    # wide support: truncation is negligible, variance is recovered
    wide = truncated_gaussian(0.0, 2.0, -40, 40)
    assert moments_oracle(wide)["variance"] == pytest.approx(2.0, abs=1e-6)
