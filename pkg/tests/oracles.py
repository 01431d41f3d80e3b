"""Independent reference computations used by the tests.

Nothing here imports the solver or the hull code under test.
"""

import itertools

import numpy as np
import shapely
from shapely.geometry import MultiPoint, Point


def brute_roc_points(scores, labels):
    """(fpr, tpr) for every candidate threshold, by direct counting."""
    scores = np.asarray(scores, float)
    labels = np.asarray(labels)
    cands = sorted(set(scores.tolist()) | {np.inf, -np.inf}, reverse=True)
    pts = []
    for t in cands:
        pred = scores >= t
        pts.append((pred[labels == 0].mean(), pred[labels == 1].mean()))
    return pts


def shapely_hull(scores, labels):
    return MultiPoint(brute_roc_points(scores, labels)).convex_hull


def group_arrays(scores, labels, groups):
    scores, labels, groups = map(np.asarray, (scores, labels, groups))
    order = list(dict.fromkeys(groups.tolist()))
    return [(g, scores[groups == g], labels[groups == g]) for g in order]


def grid_oracle_loss(scores, labels, groups, fp_cost, fn_cost, alpha, step=0.02):
    """Best loss over group points restricted to a square grid inside each hull.

    A joint choice satisfies every pairwise |diff| <= alpha iff all points fit
    in an axis-aligned box of side alpha anchored at their coordinate minima,
    so the search runs over box anchors with a per-group minimum in each box.
    """
    labels = np.asarray(labels)
    n = labels.size
    p0 = np.mean(labels == 0)
    p1 = 1 - p0
    ticks = np.round(np.arange(0, 1 + step / 2, step), 12)
    m = ticks.size
    xx, yy = np.meshgrid(ticks, ticks, indexing="ij")
    total = np.zeros((m, m))
    k = int(np.floor(alpha / step + 1e-9))
    for _, s, y in group_arrays(scores, labels, groups):
        hull = shapely_hull(s, y)
        inside = shapely.intersects_xy(hull.buffer(1e-12), xx.ravel(), yy.ravel()).reshape(m, m)
        ps0 = np.sum(y == 0) / np.sum(labels == 0)
        ps1 = np.sum(y == 1) / np.sum(labels == 1)
        cost = fp_cost * p0 * ps0 * xx - fn_cost * p1 * ps1 * yy
        cost = np.where(inside, cost, np.inf)
        # box minimum over [i, i+k] x [j, j+k]
        padded = np.full((m + k, m + k), np.inf)
        padded[:m, :m] = cost
        win = np.lib.stride_tricks.sliding_window_view(padded, (k + 1, k + 1))
        total += win.min(axis=(2, 3))[:m, :m]
    return float(total.min() + fn_cost * p1)


def threshold_grid_oracle(scores, labels, groups, fp_cost, fn_cost, alpha, step=0.01):
    """Best loss over per-group randomized mixtures of two thresholds.

    Two groups only. Each group mixes two of its ROC curve points with weight in a ``step``
    grid; the pairwise constraint is checked directly.
    """
    labels = np.asarray(labels)
    p0 = np.mean(labels == 0)
    p1 = 1 - p0
    options = []
    for _, s, y in group_arrays(scores, labels, groups):
        pts = np.array(brute_roc_points(s, y))
        ws = np.round(np.arange(0, 1 + step / 2, step), 12)
        cand = []
        for i, j in itertools.combinations_with_replacement(range(len(pts)), 2):
            for w in ws:
                cand.append(w * pts[i] + (1 - w) * pts[j])
        ps0 = np.sum(y == 0) / np.sum(labels == 0)
        ps1 = np.sum(y == 1) / np.sum(labels == 1)
        options.append((np.unique(np.round(cand, 12), axis=0), ps0, ps1))
    (a, a0, a1), (b, b0, b1) = options  # two groups only
    ok = (np.abs(a[:, None, 0] - b[None, :, 0]) <= alpha + 1e-12) & (
        np.abs(a[:, None, 1] - b[None, :, 1]) <= alpha + 1e-12
    )
    g0 = a0 * a[:, None, 0] + b0 * b[None, :, 0]
    g1 = a1 * a[:, None, 1] + b1 * b[None, :, 1]
    loss = fp_cost * p0 * g0 + fn_cost * p1 * (1 - g1)
    return float(np.where(ok, loss, np.inf).min())


def point_in_polygon_distance(polygon, point):
    return polygon.distance(Point(point))


def random_dataset(rng, n_max=40, n_groups_range=(2, 3), decimals=1):
    """Small dataset where every group has both labels; scores are rounded to force ties."""
    n_groups = rng.integers(n_groups_range[0], n_groups_range[1] + 1)
    scores, labels, groups = [], [], []
    per = max(4, n_max // n_groups)
    for k in range(n_groups):
        size = rng.integers(4, per + 1)
        y = rng.integers(0, 2, size)
        y[0], y[1] = 0, 1
        shift = rng.normal(0, 1.5)
        raw = 1 / (1 + np.exp(-(rng.normal(0, 1, size) + shift * (2 * y - 1) * rng.uniform(0, 1))))
        scores.extend(np.round(raw, decimals).tolist())
        labels.extend(y.tolist())
        groups.extend([f"g{k}"] * size)
    return np.array(scores), np.array(labels), np.array(groups)
