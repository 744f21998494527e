"""Data pipelines behind figures 1-7: one CSV (plus a JSON sidecar) per figure."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Callable

from .analysis import CostSpec, cost_regret_argmin, min_exploration_curve
from .arm_models import BanditModel, example1, example2, example3, example4, model_to_dict, win_probability_oracle
from .harness import (
    CSV_COLUMNS,
    ExperimentConfig,
    PolicySpec,
    RegretCurve,
    RegretPoint,
    _fmt,
    run_experiment,
    write_results,
)

log = logging.getLogger(__name__)

FIGURES = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7")

DEFAULT_SEED = 20190601
DEFAULT_REPS = 100_000
WIN_RATE_REPS = 500_000

N_GRID = (2, 5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100)
RHO_CHOICES = (0.5, 1.0, 2.0)
ALPHA_CHOICES = (0.1, 0.25, 0.5)
RHO_SWEEP = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 12.0, 16.0, 20.0, 30.0, 50.0)
ALPHA_SWEEP = tuple(round(0.05 * i, 2) for i in range(1, 20))
EPSILON_GRID = tuple(round(0.01 * i, 2) for i in range(1, 51))
FIG6_DELTA_P = 0.28
FIG7_DIVISOR = 5.0
FIG7_ALPHA = 100.0
FIG7_N_GRID = tuple(range(1, 201))

STANDIN_NOTE = (
    "example3 is a stand-in (arm 1: truncated Gaussian mean 6, variance 4; arm 2: mean 3, "
    "variance 0.5; both on [0, 10]) for an example whose exact parameters were not published"
)


def comparison_policies() -> tuple[PolicySpec, ...]:
    """OTE (both estimators), UCB1 and the three-choice ExpExp / MaRaB baselines."""
    return (
        PolicySpec("ote-paired"),
        PolicySpec("ote-independent"),
        PolicySpec("ucb1"),
        *(PolicySpec("expexp", rho=r) for r in RHO_CHOICES),
        *(PolicySpec("marab", alpha=a) for a in ALPHA_CHOICES),
    )


def _sidecar(path: Path, meta: dict) -> None:
    with open(path.with_suffix(".json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _truth_meta(curve: RegretCurve) -> dict:
    return {
        "model": curve.model_label,
        "k_star": curve.k_star,
        "win_probabilities": [float(p) for p in curve.win_probabilities],
        "delta_p_star": curve.delta_p_star,
        "warnings": curve.warnings,
    }


def _regret_figure(name: str, model: BanditModel, out: Path, reps: int, seed: int,
                   threads: int | None) -> Path:
    config = ExperimentConfig(model, N_GRID, reps, comparison_policies(), seed, threads=threads)
    curve = run_experiment(config)
    path = out / f"{name}.csv"
    write_results(curve, path)
    _sidecar(path, {
        "figure": name, "replications": reps, "seed": seed, "n_grid": list(N_GRID),
        "model_declaration": model_to_dict(model), "ground_truth": _truth_meta(curve),
    })
    return path


def _sweep_figure(name: str, models: tuple[BanditModel, ...], policies: tuple[PolicySpec, ...],
                  out: Path, reps: int, seed: int, threads: int | None, notes: list[str]) -> Path:
    path = out / f"{name}.csv"
    truths = []
    rows: list[tuple[str, RegretPoint]] = []
    for model in models:
        config = ExperimentConfig(model, (100,), reps, policies, seed, threads=threads)
        curve = run_experiment(config)
        truths.append(_truth_meta(curve))
        rows.extend((model.label, pt) for pt in curve.points)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("model",) + CSV_COLUMNS)
        for label, pt in rows:
            writer.writerow([label, pt.policy] + [_fmt(getattr(pt, c)) for c in CSV_COLUMNS[1:]])
    _sidecar(path, {
        "figure": name, "replications": reps, "seed": seed, "n": 100,
        "model_declarations": [model_to_dict(m) for m in models], "ground_truth": truths,
        "notes": notes,
    })
    return path


def fig1(out: Path, reps: int, seed: int, threads: int | None) -> Path:
    return _regret_figure("fig1", example1(), out, reps, seed, threads)


def fig2(out: Path, reps: int, seed: int, threads: int | None) -> Path:
    return _regret_figure("fig2", example2(), out, reps, seed, threads)


def fig3(out: Path, reps: int, seed: int, threads: int | None) -> Path:
    # same runs as fig1; the win_rate column is the plotted quantity
    return _regret_figure("fig3", example1(), out, reps, seed, threads)


def fig4(out: Path, reps: int, seed: int, threads: int | None) -> Path:
    policies = tuple(PolicySpec("expexp", rho=r) for r in RHO_SWEEP)
    return _sweep_figure("fig4", (example1(), example3()), policies, out, reps, seed, threads,
                         [STANDIN_NOTE])


def fig5(out: Path, reps: int, seed: int, threads: int | None) -> Path:
    policies = tuple(PolicySpec("marab", alpha=a) for a in ALPHA_SWEEP)
    return _sweep_figure("fig5", (example1(), example4()), policies, out, reps, seed, threads, [])


def fig6_rows(delta_p_star: float = FIG6_DELTA_P, K: int = 2) -> list[tuple[float, int, int, int]]:
    one = min_exploration_curve(delta_p_star, K, 1, EPSILON_GRID)
    two = min_exploration_curve(delta_p_star, K, 2, EPSILON_GRID)
    return [(e, n1, n2, 2 * n1) for (e, n1), (_, n2) in zip(one, two)]


def fig6(out: Path, reps: int, seed: int, threads: int | None) -> Path:
    path = out / "fig6.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("epsilon_r", "n_min_m1", "n_min_m2", "n_min_m1_x2"))
        for e, n1, n2, ref in fig6_rows():
            writer.writerow((_fmt(e), n1, n2, ref))
    _sidecar(path, {"figure": "fig6", "K": 2, "delta_p_star": FIG6_DELTA_P})
    return path


def fig7(out: Path, reps: int, seed: int, threads: int | None) -> Path:
    p_star = float(win_probability_oracle(example1()).values[0])
    res = cost_regret_argmin(p_star, CostSpec(FIG7_DIVISOR, FIG7_ALPHA, FIG7_N_GRID))
    path = out / "fig7.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("n", "cost", "regret", "objective"))
        for row in zip(res.n_grid, res.cost, res.regret, res.objective):
            writer.writerow([_fmt(v) for v in row])
    _sidecar(path, {
        "figure": "fig7", "p_star": p_star, "cost_divisor": FIG7_DIVISOR,
        "tradeoff_alpha": FIG7_ALPHA, "n_opt": res.n_opt,
    })
    return path


PIPELINES: dict[str, Callable[..., Path]] = {
    "fig1": fig1, "fig2": fig2, "fig3": fig3, "fig4": fig4,
    "fig5": fig5, "fig6": fig6, "fig7": fig7,
}


def reproduce(figure: str, out_dir: str | Path, reps: int | None = None,
              seed: int = DEFAULT_SEED, threads: int | None = None) -> Path:
    if figure not in PIPELINES:
        raise KeyError(figure)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if reps is None:
        reps = WIN_RATE_REPS if figure == "fig3" else DEFAULT_REPS
    log.info("reproducing %s into %s (%d replications)", figure, out, reps)
    return PIPELINES[figure](out, reps, seed, threads)
