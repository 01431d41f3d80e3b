"""Randomized group-threshold classifiers and their evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .data import LabeledPredictions, LossSpec
from .exceptions import DegenerateGroupError, UnknownGroupError
from .roc import ALWAYS_NEGATIVE, ALWAYS_POSITIVE, threshold_from_json, threshold_to_json

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _splitmix64(x):
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = x + _GOLDEN
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def counter_uniforms(seed: int, index) -> np.ndarray:
    """Uniform draws in [0, 1) that depend only on (seed, index).

    Draw ``i`` is the same whether rows are processed together, in chunks or
    in any order.
    """
    key = _splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    idx = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        bits = _splitmix64(key ^ _splitmix64(idx))
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


@dataclass(frozen=True)
class ThresholdPolicy:
    """Per-group mixture of decision thresholds.

    ``per_group[g]`` is a tuple of ``(threshold, weight)`` pairs. Thresholds
    ``inf`` and ``-inf`` stand for always-negative and always-positive.
    """

    per_group: Mapping[str, tuple]
    seed: int = 42

    def __post_init__(self):
        clean = {}
        for g, entries in self.per_group.items():
            entries = tuple((float(t), float(w)) for t, w in entries)
            total = sum(w for _, w in entries)
            if not entries or abs(total - 1.0) > 1e-9 or any(w < 0 for _, w in entries):
                raise ValueError(f"weights of group {g!r} must be >= 0 and sum to 1")
            clean[str(g)] = entries
        object.__setattr__(self, "per_group", clean)

    @property
    def groups(self):
        return tuple(self.per_group)

    def entries(self, group):
        try:
            return self.per_group[str(group)]
        except KeyError:
            raise UnknownGroupError(group) from None

    @property
    def is_deterministic(self) -> bool:
        return all(len(e) == 1 for e in self.per_group.values())

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "groups": {
                g: [{"threshold": threshold_to_json(t), "weight": w} for t, w in entries]
                for g, entries in self.per_group.items()
            },
        }

    @classmethod
    def from_dict(cls, obj: dict, seed: Optional[int] = None) -> "ThresholdPolicy":
        """Read a policy, or the ``groups`` section of a serialized solution."""
        per_group = {
            g: [(threshold_from_json(e["threshold"]), e["weight"]) for e in spec["mixture"]]
            if isinstance(spec, dict)
            else [(threshold_from_json(e["threshold"]), e["weight"]) for e in spec]
            for g, spec in obj["groups"].items()
        }
        if seed is None:
            seed = obj.get("seed", 42)
        return cls(per_group, int(seed))


def policy_from_solution(solution, hulls=None, seed: int = 42) -> ThresholdPolicy:
    """Replace each mixture's hull vertices by the thresholds that generate them."""
    hulls = hulls if hulls is not None else solution.hulls
    per_group = {
        g: tuple(mix.thresholds(hulls[g]))
        for g, mix in zip(solution.groups, solution.group_mixtures)
    }
    return ThresholdPolicy(per_group, seed)


def _choose(entries, draw):
    cum = 0.0
    for t, w in entries:
        cum += w
        if draw < cum:
            return t
    return entries[-1][0]


def predict(policy: ThresholdPolicy, score: float, group, draw: float) -> int:
    """Decision for one instance; ``draw`` picks a threshold by inverse CDF."""
    t = _choose(policy.entries(group), draw)
    if t == ALWAYS_NEGATIVE:
        return 0
    if t == ALWAYS_POSITIVE:
        return 1
    return int(score >= t)


def predict_batch(policy: ThresholdPolicy, scores, groups, row_index=None, seed=None):
    """Sampled decisions for many rows.

    Row ``i`` uses the draw ``counter_uniforms(seed, row_index[i])``.

    Returns
    -------
    predictions : ndarray of int8
    thresholds : ndarray of float
        The threshold drawn for each row.
    """
    scores = np.asarray(scores, dtype=float)
    groups = np.asarray([str(g) for g in np.asarray(groups, dtype=object).ravel()], dtype=object)
    if row_index is None:
        row_index = np.arange(scores.shape[0])
    seed = policy.seed if seed is None else seed
    draws = counter_uniforms(seed, row_index)
    drawn = np.empty(scores.shape[0])
    for g in np.unique(groups) if groups.size else []:
        entries = policy.entries(g)
        mask = groups == g
        cum = np.cumsum([w for _, w in entries])
        k = np.minimum(np.searchsorted(cum, draws[mask], side="right"), len(entries) - 1)
        drawn[mask] = np.array([t for t, _ in entries])[k]
    return (scores >= drawn).astype(np.int8), drawn


def positive_probability(policy: ThresholdPolicy, scores, groups) -> np.ndarray:
    """P[prediction = 1] of each row under the policy's randomization."""
    scores = np.asarray(scores, dtype=float)
    groups = np.asarray([str(g) for g in np.asarray(groups, dtype=object).ravel()], dtype=object)
    out = np.zeros(scores.shape[0])
    for g in np.unique(groups) if groups.size else []:
        mask = groups == g
        for t, w in policy.entries(g):
            out[mask] += w * (scores[mask] >= t)
    return np.clip(out, 0.0, 1.0)


def _rate(sorted_scores, entries):
    n = sorted_scores.shape[0]
    return sum(
        w * (n - np.searchsorted(sorted_scores, t, side="left")) / n for t, w in entries
    )


def group_rates(policy: ThresholdPolicy, data: LabeledPredictions, allow_degenerate=False) -> dict:
    """Expected (fpr, tpr) of every group in ``data``, computed analytically."""
    rates = {}
    for k, g in enumerate(data.groups):
        entries = policy.entries(g)
        mask = data.group_codes == k
        s, y = data.scores[mask], data.labels[mask]
        pair = []
        for label in (0, 1):
            sel = np.sort(s[y == label])
            if sel.size == 0:
                if not allow_degenerate:
                    raise DegenerateGroupError(g, label)
                pair.append(float("nan"))
            else:
                pair.append(float(_rate(sel, entries)))
        rates[g] = tuple(pair)
    return rates


def violation(rates) -> float:
    """Largest gap in FPR or TPR between any two groups (0 for one group).

    ``rates`` maps groups to (fpr, tpr) pairs, or is a sequence of pairs.
    Undefined (NaN) rates are ignored.
    """
    pts = np.asarray(list(rates.values()) if isinstance(rates, Mapping) else list(rates), float)
    if pts.size == 0:
        return 0.0
    gap = 0.0
    for y in (0, 1):
        col = pts[:, y]
        col = col[~np.isnan(col)]
        if col.size > 1:
            gap = max(gap, float(col.max() - col.min()))
    return gap


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    expected_loss: float
    violation: float
    n: int
    per_group_rates: dict = field(default_factory=dict)

    def to_dict(self, ndigits: int = 12) -> dict:
        def num(x):
            return None if np.isnan(x) else float(f"{x:.{ndigits}g}")

        return {
            "accuracy": num(self.accuracy),
            "expected_loss": num(self.expected_loss),
            "violation": num(self.violation),
            "n": self.n,
            "per_group_rates": {
                g: {"fpr": num(r[0]), "tpr": num(r[1])} for g, r in self.per_group_rates.items()
            },
        }


def _report(rates, counts, loss, groups, n):
    fp = fn = 0.0
    for k, g in enumerate(groups):
        fpr, tpr = rates[g]
        if counts[k, 0]:
            fp += fpr * counts[k, 0]
        if counts[k, 1]:
            fn += (1.0 - tpr) * counts[k, 1]
    return EvalReport(
        accuracy=1.0 - (fp + fn) / n,
        expected_loss=(loss.fp_cost * fp + loss.fn_cost * fn) / n,
        violation=violation(rates),
        n=int(n),
        per_group_rates=rates,
    )


def evaluate_policy(
    policy: ThresholdPolicy,
    data: LabeledPredictions,
    loss: LossSpec = LossSpec(),
    sampled: bool = False,
    allow_degenerate: bool = False,
) -> EvalReport:
    """Accuracy, expected loss, group rates and violation of ``policy`` on ``data``.

    Rates are expectations over the policy's randomization unless ``sampled``
    is set, in which case one realization (seeded by ``policy.seed``) is scored.
    """
    if not sampled:
        rates = group_rates(policy, data, allow_degenerate)
        return _report(rates, data.counts(), loss, data.groups, len(data))
    preds, _ = predict_batch(policy, data.scores, data.group_labels)
    return evaluate_decisions(preds, data, loss, allow_degenerate)


def evaluate_decisions(decisions, data: LabeledPredictions, loss=LossSpec(), allow_degenerate=False):
    """Score fixed (or fractional) decisions row by row."""
    decisions = np.asarray(decisions, dtype=float)
    counts = data.counts()
    sums = np.zeros((len(data.groups), 2))
    np.add.at(sums, (data.group_codes, data.labels), decisions)
    rates = {}
    for k, g in enumerate(data.groups):
        pair = []
        for y in (0, 1):
            if counts[k, y] == 0:
                if not allow_degenerate:
                    raise DegenerateGroupError(g, y)
                pair.append(float("nan"))
            else:
                pair.append(float(sums[k, y] / counts[k, y]))
        rates[g] = tuple(pair)
    return _report(rates, counts, loss, data.groups, len(data))
