"""Group-wise empirical ROC curves, their convex hulls, and hull geometry.

Thresholds follow the closed rule ``predict 1 iff score >= t``. The sentinel
threshold ``+inf`` never predicts positive and ``-inf`` always does; they
generate the corners (0, 0) and (1, 1).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Iterable, Optional

import numpy as np

from .data import LabeledPredictions
from .exceptions import DegenerateGroupError, OutsideHullError

COLLINEAR_TOL = 1e-12
CONTAINS_TOL = 1e-9
SNAP_TOL = 1e-9

ALWAYS_NEGATIVE = np.inf
ALWAYS_POSITIVE = -np.inf


def threshold_to_json(t: float):
    if t == ALWAYS_NEGATIVE:
        return "always_negative"
    if t == ALWAYS_POSITIVE:
        return "always_positive"
    return float(t)


def threshold_from_json(value) -> float:
    if value == "always_negative":
        return ALWAYS_NEGATIVE
    if value == "always_positive":
        return ALWAYS_POSITIVE
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"invalid threshold {value!r}")
    return float(value)


@dataclass(frozen=True, eq=False)
class RocCurve:
    """Empirical ROC curve of one group.

    ``points[k]`` is the (fpr, tpr) obtained with ``thresholds[k]``.
    Thresholds are strictly decreasing, points are deduplicated.
    ``missing_label`` is set only for a group lacking one label (built with
    ``allow_degenerate=True``); the corresponding coordinate then holds the
    group's positive-prediction rate and carries no meaning.
    """

    group: str
    thresholds: np.ndarray
    points: np.ndarray
    missing_label: Optional[int] = None


@dataclass(frozen=True, eq=False)
class RocHull:
    """Convex hull of a ROC curve, vertices counter-clockwise from (0, 0)."""

    group: str
    vertices: np.ndarray
    vertex_thresholds: np.ndarray
    missing_label: Optional[int] = None

    def __len__(self):
        return int(self.vertices.shape[0])

    @property
    def area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


@dataclass(frozen=True)
class VertexMixture:
    """Convex combination of at most three hull vertices."""

    entries: tuple  # ((vertex_index, weight), ...)

    def point(self, hull: RocHull) -> np.ndarray:
        idx = [i for i, _ in self.entries]
        w = np.array([w for _, w in self.entries])
        return w @ hull.vertices[idx]

    def thresholds(self, hull: RocHull) -> list:
        return [(float(hull.vertex_thresholds[i]), w) for i, w in self.entries]


def _freeze(arr):
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _rates(sorted_scores, thresholds):
    """Fraction of ``sorted_scores`` (ascending) that are >= each threshold."""
    n = sorted_scores.shape[0]
    return (n - np.searchsorted(sorted_scores, thresholds, side="left")) / n


def roc_from_scores(group, scores, labels, allow_degenerate=False) -> RocCurve:
    """Build a :class:`RocCurve` from the scores and labels of one group."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    neg = np.sort(scores[labels == 0])
    pos = np.sort(scores[labels == 1])
    missing = None
    if neg.size == 0 or pos.size == 0:
        missing = 0 if neg.size == 0 else 1
        if not allow_degenerate or scores.size == 0:
            raise DegenerateGroupError(group, missing)

    distinct = np.unique(scores)[::-1]
    thresholds = np.concatenate(([ALWAYS_NEGATIVE], distinct, [ALWAYS_POSITIVE]))
    both = np.sort(scores)
    fpr = _rates(neg, thresholds) if neg.size else _rates(both, thresholds)
    tpr = _rates(pos, thresholds) if pos.size else _rates(both, thresholds)

    keep = np.ones(thresholds.shape[0], dtype=bool)
    keep[1:] = (np.diff(fpr) != 0) | (np.diff(tpr) != 0)
    thresholds, fpr, tpr = thresholds[keep], fpr[keep], tpr[keep]
    # The run of thresholds reaching (1, 1) is represented by the sentinel.
    thresholds[-1] = ALWAYS_POSITIVE
    return RocCurve(
        group=str(group),
        thresholds=_freeze(thresholds),
        points=_freeze(np.column_stack((fpr, tpr))),
        missing_label=missing,
    )


def build_roc(data: LabeledPredictions, group, allow_degenerate=False) -> RocCurve:
    scores, labels = data.subset(group)
    return roc_from_scores(str(group), scores, labels, allow_degenerate)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull_indices(points, tol=COLLINEAR_TOL) -> list:
    """Monotone-chain hull of 2-D points, returned as indices in CCW order.

    Starts from the lexicographically smallest point. Points within ``tol``
    (cross product) of an edge are dropped, so no three vertices are collinear.
    """
    pts = [tuple(p) for p in np.asarray(points, dtype=float).tolist()]
    order = sorted(range(len(pts)), key=lambda i: pts[i])
    uniq = []
    for i in order:
        if not uniq or pts[uniq[-1]] != pts[i]:
            uniq.append(i)
    if len(uniq) <= 2:
        return uniq

    def chain(seq):
        out = []
        for i in seq:
            while len(out) >= 2 and _cross(pts[out[-2]], pts[out[-1]], pts[i]) <= tol:
                out.pop()
            out.append(i)
        return out

    lower = chain(uniq)
    upper = chain(reversed(uniq))
    hull = lower[:-1] + upper[:-1]
    return hull


def build_hull(curve: RocCurve, tol=COLLINEAR_TOL) -> RocHull:
    idx = convex_hull_indices(curve.points, tol)
    return RocHull(
        group=curve.group,
        vertices=_freeze(curve.points[idx]),
        vertex_thresholds=_freeze(curve.thresholds[idx]),
        missing_label=curve.missing_label,
    )


def build_hulls(data: LabeledPredictions, allow_degenerate=False) -> dict:
    """Hull of every group in ``data``, keyed and ordered like ``data.groups``."""
    out = {}
    for k, g in enumerate(data.groups):
        mask = data.group_codes == k
        curve = roc_from_scores(g, data.scores[mask], data.labels[mask], allow_degenerate)
        out[g] = build_hull(curve)
    return out


def _segment_distance(a, b, p):
    ab = b - a
    denom = float(ab @ ab)
    u = 0.0 if denom == 0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.hypot(*(a + u * ab - p))), u


def contains(hull: RocHull, point, tol=CONTAINS_TOL) -> bool:
    """Whether ``point`` lies inside ``hull`` or within ``tol`` of it."""
    p = np.asarray(point, dtype=float)
    v = hull.vertices
    if len(v) < 3:
        return _segment_distance(v[0], v[-1], p)[0] <= tol
    nxt = np.roll(v, -1, axis=0)
    edge = nxt - v
    cross = edge[:, 0] * (p[1] - v[:, 1]) - edge[:, 1] * (p[0] - v[:, 0])
    return bool(np.all(cross >= -tol * np.hypot(edge[:, 0], edge[:, 1])))


def decompose(hull: RocHull, point, tol=1e-7) -> VertexMixture:
    """Write ``point`` as a convex combination of at most three hull vertices.

    A point within ``SNAP_TOL`` of a vertex maps to that vertex alone, one
    within ``SNAP_TOL`` of an edge to the two endpoints of that edge, and any
    other point to the lowest-index triangle of the fan rooted at vertex 0.
    """
    p = np.asarray(point, dtype=float)
    if not contains(hull, p, tol):
        raise OutsideHullError(f"point {p.tolist()} outside hull of group {hull.group!r}")
    v = hull.vertices
    m = len(v)

    d = np.hypot(v[:, 0] - p[0], v[:, 1] - p[1])
    k = int(np.argmin(d))
    if d[k] <= SNAP_TOL:
        return VertexMixture(((k, 1.0),))

    n_edges = 1 if m == 2 else m
    best = None
    for i in range(n_edges):
        j = (i + 1) % m
        dist, u = _segment_distance(v[i], v[j], p)
        if best is None or dist < best[0]:
            best = (dist, i, j, u)
        if dist <= SNAP_TOL:
            return _mixture(((i, 1.0 - u), (j, u)))
    if m == 2:
        _, i, j, u = best
        return _mixture(((i, 1.0 - u), (j, u)))

    chosen = None
    for i in range(1, m - 1):
        lam = _barycentric(v[0], v[i], v[i + 1], p)
        if lam.min() >= -1e-12:
            chosen = (i, lam)
            break
        if chosen is None or lam.min() > chosen[1].min():
            chosen = (i, lam)
    i, lam = chosen
    lam = np.clip(lam, 0.0, None)
    lam /= lam.sum()
    return _mixture(((0, lam[0]), (i, lam[1]), (i + 1, lam[2])))


def _barycentric(a, b, c, p):
    t = np.column_stack((b - a, c - a))
    l1, l2 = np.linalg.solve(t, p - a)
    return np.array([1.0 - l1 - l2, l1, l2])


def _mixture(entries):
    entries = [(int(i), float(w)) for i, w in entries if w > 0.0]
    total = sum(w for _, w in entries)
    return VertexMixture(tuple((i, w / total) for i, w in entries))


def export_roc_csv(curves: Iterable[RocCurve], stream: IO[str], hulls=None):
    """Debug dump with columns group, fpr, tpr, threshold, is_vertex."""
    hulls = hulls or {}
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("group", "fpr", "tpr", "threshold", "is_vertex"))
    for curve in curves:
        hull = hulls.get(curve.group) or build_hull(curve)
        vertex_set = {tuple(p) for p in hull.vertices.tolist()}
        for (x, y), t in zip(curve.points.tolist(), curve.thresholds.tolist()):
            writer.writerow(
                (curve.group, f"{x:.12g}", f"{y:.12g}", repr(t), int((x, y) in vertex_set))
            )
