import csv
import json
import math

import numpy as np
import pytest

from etc_bandit.arm_models import BanditModel, example1, example2, truncated_gaussian, uniform, win_probability_oracle
from etc_bandit.errors import InputError
from etc_bandit.estimators import sample_size_ote
from etc_bandit.harness import (
    CSV_COLUMNS,
    POLICY_NAMES,
    THREADS_ENV,
    ExperimentConfig,
    PolicySpec,
    RegretCurve,
    derive_replication_seed,
    read_results,
    resolve_workers,
    run_experiment,
    write_results,
)


def _config(model, n_grid, reps, names=("ote-paired",), **kw):
    return ExperimentConfig(model, n_grid, reps, tuple(PolicySpec(n) for n in names), **kw)


def test_seed_derivation_is_stable_and_distinct():
    seeds = {derive_replication_seed(7, i, r) for i in range(5) for r in range(200)}
    assert len(seeds) == 1000
    assert derive_replication_seed(7, 2, 3) == derive_replication_seed(7, 2, 3)
    assert derive_replication_seed(7, 2, 3) != derive_replication_seed(8, 2, 3)
    assert all(0 <= s < 2**64 for s in seeds)


def test_identical_arms_regret_half_and_tie_warning():
    arm = truncated_gaussian(4.0, 1.0)
    model = BanditModel((arm, arm), "twins")
    # quadrature gives 0.5 for both arms up to round-off, so an exact tie is not guaranteed
    curve = run_experiment(_config(model, (11,), 2000, master_seed=3))
    pt = curve.get("ote-paired", 11)
    assert abs(pt.strong_regret - 0.5) < 4 * pt.strong_regret_se
    if curve.win_probabilities[0] == curve.win_probabilities[1]:
        assert curve.warnings and "tie" in curve.warnings[0]


def test_exact_tie_records_warning():
    model = BanditModel((uniform(0, 1), uniform(0, 1)), "flat-twins")
    curve = run_experiment(_config(model, (5,), 10))
    assert curve.win_probabilities[0] == curve.win_probabilities[1]
    assert curve.k_star == 0
    assert any("tie" in w for w in curve.warnings)


def test_example2_all_policies_low_regret():
    names = [n for n in POLICY_NAMES if n not in ("expexp", "marab")]
    policies = tuple(PolicySpec(n) for n in names) + (PolicySpec("expexp", rho=1.0), PolicySpec("marab", alpha=0.25))
    config = ExperimentConfig(example2(), (100,), 300, policies, master_seed=1, M=2)
    curve = run_experiment(config)
    for pt in curve.points:
        assert pt.strong_regret < 0.2, pt


@pytest.mark.parametrize("K", [2, 3])
@pytest.mark.parametrize("eps", [0.1, 0.3])
def test_sample_size_bound_holds_in_simulation(K, eps):
    arms = (uniform(0, 1.25), uniform(0, 1), uniform(0, 0.8))[:K]
    model = BanditModel(arms)
    p = np.sort(win_probability_oracle(model).values)[::-1]
    N = sample_size_ote(K, eps, p[0] - p[1])
    curve = run_experiment(_config(model, (N,), 400, ("ote-independent", "ote-paired"), master_seed=K))
    for pt in curve.points:
        assert pt.strong_regret <= eps + 3 * pt.strong_regret_se


def test_regret_decreases_with_exploration():
    curve = run_experiment(_config(example1(), (4, 20, 100), 800, ("ote-independent",), master_seed=5))
    r = [curve.get("ote-independent", n).strong_regret for n in (4, 20, 100)]
    assert r[0] > r[1] > r[2]


def test_same_seed_same_results():
    cfg = _config(example1(), (5, 10), 200, ("ote-paired", "ucb1"), master_seed=9)
    assert run_experiment(cfg).points == run_experiment(cfg).points
    other = _config(example1(), (5, 10), 200, ("ote-paired", "ucb1"), master_seed=10)
    assert run_experiment(cfg).points != run_experiment(other).points


def test_worker_count_does_not_change_results(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    cfg = _config(example1(), (5, 20), 300, ("ote-paired", "mean"),
                  master_seed=4)
    assert run_experiment(cfg, workers=1).points == run_experiment(cfg, workers=8).points


def test_threads_env_override(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert resolve_workers(1) == 3
    monkeypatch.setenv(THREADS_ENV, "zero")
    with pytest.raises(InputError):
        resolve_workers(1)
    monkeypatch.delenv(THREADS_ENV)
    assert resolve_workers(None) == 1 and resolve_workers(5) == 5


def test_delta_regret_column():
    cfg = _config(example1(), (5,), 200, delta_p=0.1)
    pt = run_experiment(cfg).points[0]
    # the only suboptimal arm trails by about 0.2 >= 0.1, so both regret notions coincide
    assert pt.delta_regret == pt.strong_regret
    assert run_experiment(_config(example1(), (5,), 50)).points[0].delta_regret is None


def test_win_rate_matches_direct_comparison():
    model = BanditModel((uniform(0, 2), uniform(0, 1)))
    pt = run_experiment(_config(model, (200,), 2000, master_seed=2)).points[0]
    # the policy nearly always picks arm 0, which then beats a fresh draw of arm 1 w.p. 3/4
    assert abs(pt.win_rate - 0.75) < 4 * pt.win_rate_se + 0.005


def test_csv_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    write_results(RegretCurve(), path)
    assert path.read_text() == ",".join(CSV_COLUMNS) + "\n"
    assert read_results(path) == []


def test_csv_two_rows_round_trip(tmp_path):
    curve = run_experiment(_config(example1(), (3, 7), 50, ("ote-independent",), delta_p=0.1))
    path = tmp_path / "out.csv"
    write_results(curve, path)
    rows = list(csv.reader(open(path)))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 3
    assert [r[2] for r in rows[1:]] == ["3", "7"]
    for a, b in zip(read_results(path), curve.points):
        for col in CSV_COLUMNS:
            x, y = getattr(a, col), getattr(b, col)
            if isinstance(y, float):
                assert math.isclose(x, y, rel_tol=1e-12, abs_tol=0.0)
            else:
                assert x == y


def test_csv_rows_sorted_by_policy_then_n(tmp_path):
    policies = (PolicySpec("ucb1"), PolicySpec("expexp", rho=2.0), PolicySpec("expexp", rho=0.5))
    curve = run_experiment(ExperimentConfig(example1(), (2, 4), 20, policies))
    path = tmp_path / "sorted.csv"
    write_results(curve, path)
    keys = [(r.policy, r.hyper, r.n) for r in read_results(path)]
    assert keys == [("expexp", 0.5, 2), ("expexp", 0.5, 4), ("expexp", 2.0, 2), ("expexp", 2.0, 4),
                    ("ucb1", None, 2), ("ucb1", None, 4)]


def test_write_to_missing_directory(tmp_path):
    with pytest.raises(OSError):
        write_results(RegretCurve(), tmp_path / "nope" / "x.csv")


def test_config_from_json(tmp_path):
    d = {"model": "example1", "n_grid": [5, 10], "replications": 10, "m": 1,
         "policies": [{"name": "marab", "alpha": 0.25}, {"name": "ote-paired"}], "seed": 3}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(d))
    cfg = ExperimentConfig.load(path)
    assert cfg.n_grid == (5, 10) and cfg.master_seed == 3
    assert cfg.policies[0].hyper == 0.25


@pytest.mark.parametrize("patch", [
    {"n_grid": []}, {"n_grid": [10, 5]}, {"replications": 0}, {"policies": []},
    {"policies": [{"name": "thompson"}]}, {"policies": [{"name": "expexp"}]},
    {"policies": [{"name": "marab", "alpha": 1.5}]}, {"seed": -1}, {"delta_p": 1.5},
    {"bogus": 1}, {"m": 20, "policies": [{"name": "fte-paired"}]}, {"model": "nope"},
])
def test_config_validation(patch):
    d = {"model": "example1", "n_grid": [5, 10], "replications": 10, "policies": [{"name": "ote-paired"}]}
    d.update(patch)
    with pytest.raises(InputError):
        ExperimentConfig.from_dict(d)
