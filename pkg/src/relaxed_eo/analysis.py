"""Fairness-accuracy frontiers, best-model selection and bootstrap intervals."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Mapping, Optional

import numpy as np

from .data import LabeledPredictions, LossSpec, prevalences
from .exceptions import DegenerateGroupError, MismatchedRowsError
from .postprocess import (
    ThresholdPolicy,
    evaluate_policy,
    policy_from_solution,
    positive_probability,
    violation,
)
from .roc import build_hulls
from .solver import RelaxedProblem, solve_relaxed, unprocess

METRICS = ("accuracy", "violation", "expected_loss")
MAX_REDRAWS = 100


@dataclass(frozen=True)
class FrontierPoint:
    """One point of a frontier sweep.

    ``accuracy``, ``expected_loss`` and ``violation`` are measured on the
    evaluation data; ``fit_expected_loss`` is the optimum on the fit data.
    """

    alpha: float
    accuracy: float
    expected_loss: float
    violation: float
    fit_expected_loss: float
    ci: Optional[dict] = None


@dataclass(frozen=True)
class ModelSelection:
    candidates: list  # [(model_id, unprocessed_accuracy, unprocessed_violation)]
    winner: str

    def to_dict(self, ndigits: int = 12) -> dict:
        def num(x):
            return float(f"{x:.{ndigits}g}")

        return {
            "winner": self.winner,
            "candidates": [
                {"model_id": m, "unprocessed_accuracy": num(a), "unprocessed_violation": num(v)}
                for m, a, v in self.candidates
            ],
        }


def alpha_grid(grid_step: float, alpha_max: float) -> list:
    """Multiples of ``grid_step`` from 0 up to ``alpha_max`` inclusive."""
    if not 0 < grid_step <= 1:
        raise ValueError(f"grid_step must be in (0, 1], got {grid_step}")
    if alpha_max < 0:
        raise ValueError(f"alpha_max must be >= 0, got {alpha_max}")
    n = int(math.floor(alpha_max / grid_step + 1e-9))
    return [round(k * grid_step, 12) for k in range(n + 1)]


def sweep(
    data_fit: LabeledPredictions,
    data_eval: Optional[LabeledPredictions] = None,
    loss: LossSpec = LossSpec(),
    grid_step: float = 0.01,
    alpha_max: Optional[float] = None,
    bootstrap_n: int = 0,
    seed: int = 42,
    allow_degenerate: bool = False,
) -> list:
    """Fit on ``data_fit`` along a grid of slacks and score each fit on ``data_eval``.

    ``alpha_max`` defaults to the violation of the unconstrained optimum on
    the fit data.
    """
    data_eval = data_fit if data_eval is None else data_eval
    if set(data_eval.groups) - set(data_fit.groups):
        raise MismatchedRowsError(
            f"evaluation groups {sorted(set(data_eval.groups) - set(data_fit.groups))} "
            "are absent from the fit data"
        )
    hulls = build_hulls(data_fit, allow_degenerate)
    prev = prevalences(data_fit)
    if alpha_max is None:
        alpha_max = unprocess(hulls, prev, loss, allow_degenerate).certified_alpha
    points = []
    for alpha in alpha_grid(grid_step, alpha_max):
        sol = solve_relaxed(RelaxedProblem(hulls, prev, loss, alpha, allow_degenerate))
        policy = policy_from_solution(sol, seed=seed)
        report = evaluate_policy(policy, data_eval, loss, allow_degenerate=allow_degenerate)
        ci = None
        if bootstrap_n > 0:
            ci = bootstrap(data_eval, policy, loss, bootstrap_n, seed)
        points.append(
            FrontierPoint(
                alpha=alpha,
                accuracy=report.accuracy,
                expected_loss=report.expected_loss,
                violation=report.violation,
                fit_expected_loss=sol.expected_loss,
                ci=ci,
            )
        )
    return points


def select_best(models: Mapping[str, LabeledPredictions], loss: LossSpec = LossSpec()) -> ModelSelection:
    """Unprocess every candidate and pick the most accurate one.

    Ties go to the lower unprocessed violation, then to the smaller model id.
    """
    if not models:
        raise ValueError("no candidate models")
    ids = list(models)
    ref = models[ids[0]]
    for m in ids[1:]:
        if not ref.same_rows(models[m]):
            raise MismatchedRowsError(
                f"candidate {m!r} disagrees with {ids[0]!r} on labels or groups"
            )
    candidates = []
    for m in ids:
        data = models[m]
        sol = unprocess(build_hulls(data), prevalences(data), loss)
        report = evaluate_policy(policy_from_solution(sol), data, loss)
        candidates.append((str(m), report.accuracy, report.violation))
    winner = min(candidates, key=lambda c: (-c[1], c[2], c[0]))[0]
    return ModelSelection(candidates=candidates, winner=winner)


def _resample(rng, data, stratified):
    n = len(data)
    if not stratified:
        return rng.integers(0, n, size=n)
    parts = []
    for k in range(len(data.groups)):
        rows = np.flatnonzero(data.group_codes == k)
        parts.append(rows[rng.integers(0, rows.size, size=rows.size)])
    return np.concatenate(parts)


def bootstrap(
    data: LabeledPredictions,
    policy: ThresholdPolicy,
    loss: LossSpec = LossSpec(),
    n_resamples: int = 1000,
    seed: int = 42,
    stratified: bool = False,
) -> dict:
    """2.5 and 97.5 percentiles of accuracy, violation and expected loss.

    The policy stays fixed; only evaluation rows are resampled. Resample ``r``
    draws from a generator seeded with ``(seed, r, attempt)``, and a resample
    leaving some group without positives or negatives is redrawn.
    """
    if n_resamples < 1:
        raise ValueError("n_resamples must be >= 1")
    n = len(data)
    n_groups = len(data.groups)
    prob = positive_probability(policy, data.scores, data.group_labels)
    cell = data.group_codes * 2 + data.labels
    values = {m: np.empty(n_resamples) for m in METRICS}
    for r in range(n_resamples):
        for attempt in range(MAX_REDRAWS):
            rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, r, attempt])
            mult = np.bincount(_resample(rng, data, stratified), minlength=n)
            counts = np.bincount(cell, weights=mult, minlength=2 * n_groups).reshape(-1, 2)
            if counts.min() > 0:
                break
        else:
            k, y = np.argwhere(counts == 0)[0]
            raise DegenerateGroupError(data.groups[k], int(y))
        positives = np.bincount(cell, weights=mult * prob, minlength=2 * n_groups).reshape(-1, 2)
        rates = positives / counts
        fp = positives[:, 0].sum()
        fn = (counts[:, 1] - positives[:, 1]).sum()
        values["accuracy"][r] = 1.0 - (fp + fn) / n
        values["expected_loss"][r] = (loss.fp_cost * fp + loss.fn_cost * fn) / n
        values["violation"][r] = violation(rates)
    return {
        m: tuple(float(q) for q in np.percentile(v, [2.5, 97.5])) for m, v in values.items()
    }


FRONTIER_COLUMNS = (
    "alpha",
    "accuracy",
    "violation",
    "expected_loss",
    "accuracy_p2_5",
    "accuracy_p97_5",
    "violation_p2_5",
    "violation_p97_5",
)


def write_frontier_csv(points, stream: IO[str], ndigits: int = 12):
    def fmt(x):
        return "" if x is None else f"{x:.{ndigits}g}"

    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(FRONTIER_COLUMNS)
    for p in points:
        ci = p.ci or {}
        acc = ci.get("accuracy", (None, None))
        vio = ci.get("violation", (None, None))
        writer.writerow(
            (
                fmt(p.alpha),
                fmt(p.accuracy),
                fmt(p.violation),
                fmt(p.expected_loss),
                fmt(acc[0]),
                fmt(acc[1]),
                fmt(vio[0]),
                fmt(vio[1]),
            )
        )
