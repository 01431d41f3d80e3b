import io

import numpy as np
import pytest

from oracles import random_dataset
from relaxed_eo.analysis import (
    alpha_grid,
    bootstrap,
    select_best,
    sweep,
    write_frontier_csv,
)
from relaxed_eo.data import LabeledPredictions, LossSpec, prevalences, read_predictions_file
from relaxed_eo.exceptions import DegenerateGroupError, MismatchedRowsError
from relaxed_eo.postprocess import ThresholdPolicy, evaluate_policy, policy_from_solution
from relaxed_eo.roc import ALWAYS_POSITIVE, build_hulls
from relaxed_eo.solver import unprocess


def test_alpha_grid():
    assert alpha_grid(0.01, 0.03) == [0.0, 0.01, 0.02, 0.03]
    assert alpha_grid(0.5, 0.7) == [0.0, 0.5]
    assert alpha_grid(0.1, 0.0) == [0.0]
    with pytest.raises(ValueError):
        alpha_grid(0.0, 0.5)


def test_sweep_point_count(fixtures_dir):
    data = read_predictions_file(fixtures_dir / "two_groups.csv")
    points = sweep(data, grid_step=0.01, alpha_max=0.03)
    assert [p.alpha for p in points] == [0.0, 0.01, 0.02, 0.03]


def test_sweep_defaults_to_unprocessed_violation(fixtures_dir):
    data = read_predictions_file(fixtures_dir / "perfect_anti.csv")
    free = unprocess(build_hulls(data), prevalences(data), LossSpec())
    points = sweep(data, grid_step=0.1)
    assert points[-1].alpha <= free.certified_alpha + 1e-12
    assert len(points) == int(free.certified_alpha / 0.1 + 1e-9) + 1
    losses = [p.fit_expected_loss for p in points]
    assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))
    assert points[-1].accuracy >= points[0].accuracy


def test_sweep_single_group():
    rng = np.random.default_rng(1)
    s = np.round(rng.uniform(size=30), 2)
    y = (rng.uniform(size=30) < s).astype(int)
    data = LabeledPredictions.from_arrays(s, y, ["A"] * 30)
    points = sweep(data, grid_step=0.25, alpha_max=1.0)
    assert len(points) == 5
    assert len({(p.accuracy, p.expected_loss, p.violation) for p in points}) == 1
    free = unprocess(build_hulls(data), prevalences(data), LossSpec())
    assert points[0].expected_loss == pytest.approx(free.expected_loss, abs=1e-12)


def test_sweep_monotone_on_random_fixtures():
    rng = np.random.default_rng(12)
    for _ in range(10):
        data = LabeledPredictions.from_arrays(*random_dataset(rng))
        points = sweep(data, grid_step=0.05, alpha_max=0.6)
        losses = [p.expected_loss for p in points]
        assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))


def test_sweep_group_mismatch():
    a = LabeledPredictions.from_arrays([0.1, 0.9], [0, 1], ["A", "A"])
    b = LabeledPredictions.from_arrays([0.1, 0.9], [0, 1], ["Z", "Z"])
    with pytest.raises(MismatchedRowsError):
        sweep(a, b)


def _candidates():
    rng = np.random.default_rng(5)
    n = 400
    groups = rng.choice(["A", "B"], n)
    latent = rng.normal(size=n)
    labels = (rng.uniform(size=n) < 1 / (1 + np.exp(-2 * latent))).astype(int)
    good = 1 / (1 + np.exp(-2 * latent))
    bad = 1 / (1 + np.exp(-(2 * latent + rng.normal(0, 3, n))))
    return (
        LabeledPredictions.from_arrays(np.round(good, 3), labels, groups),
        LabeledPredictions.from_arrays(np.round(bad, 3), labels, groups),
    )


def test_select_best_prefers_separable_scores():
    good, bad = _candidates()
    sel = select_best({"noisy": bad, "sharp": good})
    # oracle: direct comparison of unprocessed accuracies
    acc = {}
    for name, d in (("noisy", bad), ("sharp", good)):
        sol = unprocess(build_hulls(d), prevalences(d), LossSpec())
        acc[name] = evaluate_policy(policy_from_solution(sol), d).accuracy
    assert acc["sharp"] > acc["noisy"]
    assert sel.winner == "sharp"
    assert dict((m, a) for m, a, _ in sel.candidates) == pytest.approx(acc)


def test_select_best_ties_and_single():
    good, _ = _candidates()
    assert select_best({"b": good, "a": good}).winner == "a"
    assert select_best({"only": good}).winner == "only"


def test_select_best_mismatch():
    good, _ = _candidates()
    other = LabeledPredictions.from_arrays(good.scores, 1 - good.labels, good.group_labels)
    with pytest.raises(MismatchedRowsError):
        select_best({"a": good, "b": other})


def test_bootstrap_single_resample(fixtures_dir):
    data = read_predictions_file(fixtures_dir / "two_groups.csv")
    policy = ThresholdPolicy({"A": [(0.5, 1.0)], "B": [(0.45, 0.5), (0.6, 0.5)]})
    ci = bootstrap(data, policy, n_resamples=1, seed=3)
    for lo, hi in ci.values():
        assert lo == hi


def test_bootstrap_deterministic(fixtures_dir):
    data = read_predictions_file(fixtures_dir / "two_groups.csv")
    policy = ThresholdPolicy({"A": [(0.5, 1.0)], "B": [(0.45, 1.0)]})
    a = bootstrap(data, policy, n_resamples=50, seed=9)
    assert a == bootstrap(data, policy, n_resamples=50, seed=9)
    assert a != bootstrap(data, policy, n_resamples=50, seed=10)
    strat = bootstrap(data, policy, n_resamples=50, seed=9, stratified=True)
    assert set(strat) == {"accuracy", "violation", "expected_loss"}


def test_bootstrap_width_scaling():
    rng = np.random.default_rng(0)
    widths = {}
    for n in (100, 10_000):
        labels = (rng.uniform(size=n) < 0.3).astype(int)
        labels[:2] = [0, 1]
        data = LabeledPredictions.from_arrays(rng.uniform(size=n), labels, ["A"] * n)
        policy = ThresholdPolicy({"A": [(ALWAYS_POSITIVE, 1.0)]})
        lo, hi = bootstrap(data, policy, n_resamples=2000, seed=1)["accuracy"]
        widths[n] = hi - lo
    # binomial standard error scales as 1/sqrt(n): expected ratio 10
    assert 5 <= widths[100] / widths[10_000] <= 20


def test_bootstrap_degenerate_gives_up():
    data = LabeledPredictions.from_arrays([0.2, 0.8, 0.1, 0.3, 0.5], [0, 1, 0, 0, 0], list("AABBB"))
    policy = ThresholdPolicy({"A": [(0.5, 1.0)], "B": [(0.5, 1.0)]})
    with pytest.raises(DegenerateGroupError):
        bootstrap(data, policy, n_resamples=3)


def test_frontier_csv(fixtures_dir):
    data = read_predictions_file(fixtures_dir / "two_groups.csv")
    points = sweep(data, grid_step=0.1, alpha_max=0.2, bootstrap_n=20)
    buf = io.StringIO()
    write_frontier_csv(points, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == (
        "alpha,accuracy,violation,expected_loss,accuracy_p2_5,accuracy_p97_5,"
        "violation_p2_5,violation_p97_5"
    )
    assert len(lines) == 4
    assert all(cell != "" for cell in lines[1].split(","))
