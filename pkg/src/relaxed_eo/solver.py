"""Loss-optimal group ROC points under a relaxed equalized-odds constraint.

Each group's operating point is a convex combination of its hull vertices;
the combination weights are the variables of a linear program whose
objective is the expected loss at the prevalence-weighted global ROC point.
Every pair of groups must have FPRs and TPRs within ``alpha`` of each other.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linprog

from .data import LossSpec, Prevalences
from .exceptions import DegenerateGroupError, SolverError
from .roc import VertexMixture, decompose, threshold_to_json

UNCONSTRAINED = math.inf
# Relative slack on the loss bound in the gap-minimizing stage. Any positive
# value is spent by that stage, so it stays 0; HiGHS' tolerance covers rounding.
LOSS_SLACK = 0.0
FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class RelaxedProblem:
    hulls: dict
    prevalences: Prevalences
    loss: LossSpec
    alpha: float = 0.0
    allow_degenerate: bool = False

    def __post_init__(self):
        groups = tuple(self.prevalences.groups)
        if tuple(self.hulls) != groups:
            if set(self.hulls) != set(groups):
                raise ValueError(
                    f"hull groups {sorted(self.hulls)} do not match data groups {sorted(groups)}"
                )
            object.__setattr__(self, "hulls", {g: self.hulls[g] for g in groups})
        alpha = float(self.alpha)
        if math.isnan(alpha) or alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha!r}")
        object.__setattr__(self, "alpha", alpha)
        if not self.allow_degenerate:
            for g, hull in self.hulls.items():
                if hull.missing_label is not None:
                    raise DegenerateGroupError(g, hull.missing_label)

    @property
    def groups(self):
        return tuple(self.hulls)


@dataclass(frozen=True, eq=False)
class RelaxedSolution:
    """Optimal per-group ROC points and their randomized realization.

    Attributes
    ----------
    groups : tuple of str
    group_points : ndarray, shape (n_groups, 2)
        (fpr, tpr) of each group; exactly the point realized by its mixture.
    group_mixtures : tuple of VertexMixture
    global_point : ndarray, shape (2,)
    expected_loss : float
    certified_alpha : float
        Largest pairwise FPR or TPR gap between groups.
    alpha : float
        Requested slack; ``inf`` for the unconstrained solution.
    hulls : dict
        The hulls the mixtures index into.
    """

    groups: tuple
    group_points: np.ndarray
    group_mixtures: tuple
    global_point: np.ndarray
    expected_loss: float
    certified_alpha: float
    alpha: float
    hulls: dict = field(repr=False)

    def mixture(self, group) -> VertexMixture:
        return self.group_mixtures[self.groups.index(group)]

    def point(self, group) -> np.ndarray:
        return self.group_points[self.groups.index(group)]


def global_point(group_points, prevalences: Prevalences) -> np.ndarray:
    """Prevalence-weighted mixture of group ROC points."""
    pts = np.asarray(group_points, dtype=float)
    w = prevalences.p_s_given_y
    return np.array([w[:, 0] @ pts[:, 0], w[:, 1] @ pts[:, 1]])


def pairwise_gap(group_points, missing=None) -> float:
    """Largest absolute FPR or TPR difference over all group pairs."""
    pts = np.asarray(group_points, dtype=float)
    missing = missing or [None] * len(pts)
    gap = 0.0
    for y in (0, 1):
        vals = [p[y] for p, m in zip(pts, missing) if m != y]
        if len(vals) > 1:
            gap = max(gap, max(vals) - min(vals))
    return float(gap)


def _constrained_pairs(problem):
    """(a, b, y) triples whose coordinate-y rates are tied by the constraint."""
    missing = [h.missing_label for h in problem.hulls.values()]
    out = []
    for a, b in itertools.combinations(range(len(missing)), 2):
        for y in (0, 1):
            if missing[a] != y and missing[b] != y:
                out.append((a, b, y))
    return out


@dataclass(frozen=True)
class LinearProgram:
    """minimize c @ x  s.t.  A_ub @ x <= b_ub,  A_eq @ x == b_eq,  x >= 0."""

    c: np.ndarray
    A_ub: Optional[np.ndarray]
    b_ub: Optional[np.ndarray]
    A_eq: np.ndarray
    b_eq: np.ndarray
    upper: Optional[np.ndarray] = None


def highs_solve(lp: LinearProgram) -> tuple:
    """Default backend: scipy's HiGHS. Returns (x, objective)."""
    bounds = (
        [(0, None)] * len(lp.c)
        if lp.upper is None
        else [(0, None if math.isinf(u) else u) for u in lp.upper]
    )
    res = linprog(
        lp.c,
        A_ub=lp.A_ub,
        b_ub=lp.b_ub,
        A_eq=lp.A_eq,
        b_eq=lp.b_eq,
        bounds=bounds,
        method="highs",
        options={
            "primal_feasibility_tolerance": FEASIBILITY_TOL,
            "dual_feasibility_tolerance": FEASIBILITY_TOL,
        },
    )
    if res.status != 0:
        raise SolverError(f"LP solver failed (status {res.status}): {res.message}")
    return res.x, float(res.fun)


class _Layout:
    """Column layout of the per-group vertex weights."""

    def __init__(self, problem):
        self.hulls = list(problem.hulls.values())
        sizes = [len(h) for h in self.hulls]
        self.offsets = np.concatenate(([0], np.cumsum(sizes)))
        self.n = int(self.offsets[-1])

    def block(self, s):
        return slice(self.offsets[s], self.offsets[s + 1])

    def coordinate_row(self, s, y, width):
        """Row vector mapping weights to group s's coordinate y."""
        row = np.zeros(width)
        row[self.block(s)] = self.hulls[s].vertices[:, y]
        return row


def _loss_coefficients(problem, layout):
    """Linear cost per weight and the constant term of the loss."""
    prev, loss = problem.prevalences, problem.loss
    c = np.zeros(layout.n)
    for s, hull in enumerate(layout.hulls):
        c[layout.block(s)] = (
            loss.fp_cost * prev.p0 * prev.p_s_given_y[s, 0] * hull.vertices[:, 0]
            - loss.fn_cost * prev.p1 * prev.p_s_given_y[s, 1] * hull.vertices[:, 1]
        )
    return c, loss.fn_cost * prev.p1


def build_lp(problem: RelaxedProblem, layout=None) -> LinearProgram:
    """Loss-minimization LP over vertex weights for a finite ``alpha``."""
    layout = layout or _Layout(problem)
    c, _ = _loss_coefficients(problem, layout)
    n_groups = len(layout.hulls)
    A_eq = np.zeros((n_groups, layout.n))
    for s in range(n_groups):
        A_eq[s, layout.block(s)] = 1.0
    rows = []
    for a, b, y in _constrained_pairs(problem):
        diff = layout.coordinate_row(a, y, layout.n) - layout.coordinate_row(b, y, layout.n)
        rows.extend((diff, -diff))
    A_ub = np.array(rows) if rows else None
    b_ub = np.full(len(rows), problem.alpha) if rows else None
    return LinearProgram(c, A_ub, b_ub, A_eq, np.ones(n_groups))


def _gap_lp(problem, layout, loss_bound):
    """Second stage: minimize the largest pairwise gap at near-optimal loss."""
    width = layout.n + 1
    c_loss, const = _loss_coefficients(problem, layout)
    c = np.zeros(width)
    c[-1] = 1.0
    rows, rhs = [], []
    for a, b, y in _constrained_pairs(problem):
        diff = layout.coordinate_row(a, y, width) - layout.coordinate_row(b, y, width)
        for sign in (1.0, -1.0):
            row = sign * diff
            row[-1] = -1.0
            rows.append(row)
            rhs.append(0.0)
    rows.append(np.append(c_loss, 0.0))
    rhs.append(loss_bound - const)
    A_eq = np.zeros((len(layout.hulls), width))
    for s in range(len(layout.hulls)):
        A_eq[s, layout.block(s)] = 1.0
    upper = np.full(width, np.inf)
    upper[-1] = problem.alpha
    return LinearProgram(
        c, np.array(rows), np.array(rhs), A_eq, np.ones(len(layout.hulls)), upper
    )


def _assemble(problem, weights_per_group):
    """Turn per-group vertex weights into a :class:`RelaxedSolution`."""
    prev, loss = problem.prevalences, problem.loss
    mixtures, points = [], []
    for hull, w in zip(problem.hulls.values(), weights_per_group):
        w = np.clip(np.asarray(w, dtype=float), 0.0, None)
        target = (w / w.sum()) @ hull.vertices
        mix = decompose(hull, target)
        mixtures.append(mix)
        points.append(mix.point(hull))
    points = np.array(points)
    gpoint = global_point(points, prev)
    missing = [h.missing_label for h in problem.hulls.values()]
    return RelaxedSolution(
        groups=problem.groups,
        group_points=points,
        group_mixtures=tuple(mixtures),
        global_point=gpoint,
        expected_loss=float(loss.loss(gpoint[0], gpoint[1], prev.p0, prev.p1)),
        certified_alpha=pairwise_gap(points, missing),
        alpha=problem.alpha,
        hulls=dict(problem.hulls),
    )


LPBackend = Callable[[LinearProgram], tuple]


def solve_relaxed(problem: RelaxedProblem, backend: LPBackend = highs_solve) -> RelaxedSolution:
    """Minimum-loss solution with all pairwise rate gaps at most ``problem.alpha``.

    Among loss-optimal solutions the one with the smallest largest gap is
    returned (a second LP with the loss pinned to its optimum).
    """
    if math.isinf(problem.alpha):
        return unprocess(problem.hulls, problem.prevalences, problem.loss, problem.allow_degenerate)
    layout = _Layout(problem)
    x, objective = backend(build_lp(problem, layout))
    if _constrained_pairs(problem):
        _, const = _loss_coefficients(problem, layout)
        bound = objective + const + LOSS_SLACK * max(1.0, abs(objective + const))
        try:
            x2, _ = backend(_gap_lp(problem, layout, bound))
            x = x2[:-1]
        except SolverError:
            pass  # keep the first-stage optimum
    return _assemble(problem, [x[layout.block(s)] for s in range(len(layout.hulls))])


def solve_strict(hulls, prevalences, loss, allow_degenerate=False, backend=highs_solve):
    """Equal FPR and TPR across groups (``alpha = 0``)."""
    return solve_relaxed(
        RelaxedProblem(hulls, prevalences, loss, 0.0, allow_degenerate), backend
    )


def unprocess(hulls, prevalences, loss, allow_degenerate=False) -> RelaxedSolution:
    """Unconstrained optimum: each group independently takes its best vertex."""
    problem = RelaxedProblem(hulls, prevalences, loss, UNCONSTRAINED, allow_degenerate)
    layout = _Layout(problem)
    c, _ = _loss_coefficients(problem, layout)
    weights = []
    for s, hull in enumerate(layout.hulls):
        cost = c[layout.block(s)]
        w = np.zeros(len(hull))
        w[int(np.argmin(cost))] = 1.0
        weights.append(w)
    return _assemble(problem, weights)


def solution_to_dict(solution: RelaxedSolution, ndigits: int = 12) -> dict:
    """JSON-ready view of a solution.

    Thresholds keep full precision so they reproduce the same decisions;
    the two sentinels become the strings ``always_negative`` and
    ``always_positive``.
    """
    def num(x):
        return float(f"{x:.{ndigits}g}")

    groups = {}
    for g, pt, mix in zip(solution.groups, solution.group_points, solution.group_mixtures):
        hull = solution.hulls[g]
        groups[g] = {
            "point": [num(pt[0]), num(pt[1])],
            "mixture": [
                {"threshold": threshold_to_json(t), "weight": num(w)}
                for t, w in mix.thresholds(hull)
            ],
        }
    return {
        "alpha_requested": None if math.isinf(solution.alpha) else num(solution.alpha),
        "expected_loss": num(solution.expected_loss),
        "certified_alpha": num(solution.certified_alpha),
        "global_point": [num(v) for v in solution.global_point],
        "groups": groups,
    }
