"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 solver error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

from .analysis import bootstrap, select_best, sweep, write_frontier_csv
from .data import LossSpec, infer_format, load_scores, prevalences, read_predictions_file
from .exceptions import DataError, OutsideHullError, SolverError
from .postprocess import ThresholdPolicy, evaluate_policy, policy_from_solution, predict_batch
from .roc import build_hulls, threshold_to_json
from .solver import RelaxedProblem, solution_to_dict, solve_relaxed, unprocess

SCHEMA_VERSION = 1
EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 2, 3, 4

COMMANDS = ("fit", "predict", "eval", "sweep", "unprocess", "select", "calibrated-threshold")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    data: Optional[str] = None
    eval_data: Optional[str] = None
    solution: Optional[str] = None
    models: list = field(default_factory=list)
    alpha: float = 0.0
    alpha_max: Optional[float] = None
    fp_cost: float = 1.0
    fn_cost: float = 1.0
    grid_step: float = 0.01
    bootstrap_n: int = 0
    seed: int = 42
    output: Optional[str] = None
    format: Optional[str] = None
    allow_degenerate: bool = False

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise UsageError(f"--alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 < self.grid_step <= 1.0:
            raise UsageError(f"--grid-step must be in (0, 1], got {self.grid_step}")
        if self.alpha_max is not None and not 0.0 <= self.alpha_max <= 1.0:
            raise UsageError(f"--alpha-max must be in [0, 1], got {self.alpha_max}")
        if self.bootstrap_n < 0:
            raise UsageError("--bootstrap-n must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise UsageError("--seed must be a 64-bit unsigned integer")
        try:
            LossSpec(self.fp_cost, self.fn_cost)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        needs_data = {"fit", "predict", "eval", "sweep", "unprocess"}
        if self.command in needs_data and not self.data:
            raise UsageError(f"{self.command} requires --data")
        if self.command in ("predict", "eval") and not self.solution:
            raise UsageError(f"{self.command} requires --solution")
        if self.command == "select" and not self.models:
            raise UsageError("select requires at least one --model ID=PATH")

    @property
    def loss(self):
        return LossSpec(self.fp_cost, self.fn_cost)


def _num(x, ndigits=12):
    return float(f"{x:.{ndigits}g}")


def _envelope(config, kind, payload):
    out = {"schema_version": SCHEMA_VERSION, "kind": kind}
    out.update(payload)
    out["config"] = asdict(config)
    return out


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _load_solution(path, seed):
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        return obj, ThresholdPolicy.from_dict(obj, seed=seed)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"invalid solution file {path}: {exc}") from None


def _solve(config, alpha):
    data = read_predictions_file(config.data, config.format)
    hulls = build_hulls(data, config.allow_degenerate)
    prev = prevalences(data)
    if math.isinf(alpha):
        return unprocess(hulls, prev, config.loss, config.allow_degenerate)
    return solve_relaxed(RelaxedProblem(hulls, prev, config.loss, alpha, config.allow_degenerate))


def cmd_fit(config):
    sol = _solve(config, config.alpha)
    return _dump_json(_envelope(config, "solution", solution_to_dict(sol)))


def cmd_unprocess(config):
    sol = _solve(config, math.inf)
    return _dump_json(_envelope(config, "solution", solution_to_dict(sol)))


def cmd_predict(config):
    _, policy = _load_solution(config.solution, config.seed)
    with open(config.data, "rb") as fh:
        scores, groups = load_scores(fh, infer_format(config.data, config.format))
    preds, drawn = predict_batch(policy, scores, groups, seed=config.seed)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("row_index", "group", "score", "prediction", "threshold_drawn"))
    for i, (g, s, p, t) in enumerate(zip(groups, scores.tolist(), preds.tolist(), drawn.tolist())):
        t = threshold_to_json(t)
        writer.writerow((i, g, f"{s:.12g}", p, t if isinstance(t, str) else f"{t:.12g}"))
    return buf.getvalue()


def cmd_eval(config):
    _, policy = _load_solution(config.solution, config.seed)
    data = read_predictions_file(config.data, config.format)
    report = evaluate_policy(policy, data, config.loss, allow_degenerate=config.allow_degenerate)
    payload = report.to_dict()
    if config.bootstrap_n:
        ci = bootstrap(data, policy, config.loss, config.bootstrap_n, config.seed)
        payload["ci"] = {m: [_num(lo), _num(hi)] for m, (lo, hi) in ci.items()}
    return _dump_json(_envelope(config, "eval_report", payload))


def cmd_sweep(config):
    fit = read_predictions_file(config.data, config.format)
    ev = read_predictions_file(config.eval_data, config.format) if config.eval_data else fit
    points = sweep(
        fit,
        ev,
        config.loss,
        config.grid_step,
        config.alpha_max,
        config.bootstrap_n,
        config.seed,
        config.allow_degenerate,
    )
    buf = io.StringIO()
    write_frontier_csv(points, buf)
    return buf.getvalue()


def cmd_select(config):
    models = {}
    for spec in config.models:
        model_id, sep, path = spec.partition("=")
        if not sep or not model_id or not path:
            raise UsageError(f"--model expects ID=PATH, got {spec!r}")
        if model_id in models:
            raise UsageError(f"duplicate model id {model_id!r}")
        models[model_id] = read_predictions_file(path, config.format)
    selection = select_best(models, config.loss)
    return _dump_json(_envelope(config, "model_selection", selection.to_dict()))


def cmd_calibrated_threshold(config):
    return f"{config.loss.calibrated_threshold:.12g}\n"


HANDLERS = {
    "fit": cmd_fit,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "unprocess": cmd_unprocess,
    "select": cmd_select,
    "calibrated-threshold": cmd_calibrated_threshold,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="relaxed-eo",
        description="Postprocess scores under relaxed equalized odds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        if data:
            p.add_argument("--data", required=True, help="score,label,group table (CSV or JSON)")
        p.add_argument("--fp-cost", type=float, default=1.0)
        p.add_argument("--fn-cost", type=float, default=1.0)
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--output", "-o", help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), help="input format (default: by extension)")
        p.add_argument("--allow-degenerate", action="store_true")

    p = sub.add_parser("fit", help="solve for a given slack and write the solution JSON")
    common(p)
    p.add_argument("--alpha", type=float, default=0.0)

    p = sub.add_parser("unprocess", help="unconstrained optimum as solution JSON")
    common(p)

    p = sub.add_parser("predict", help="sampled decisions as CSV")
    common(p)
    p.add_argument("--solution", required=True)

    p = sub.add_parser("eval", help="evaluate a solution on labeled data")
    common(p)
    p.add_argument("--solution", required=True)
    p.add_argument("--bootstrap-n", type=int, default=0)

    p = sub.add_parser("sweep", help="frontier over a slack grid as CSV")
    common(p)
    p.add_argument("--eval-data", help="evaluation table (default: --data)")
    p.add_argument("--grid-step", type=float, default=0.01)
    p.add_argument("--alpha-max", type=float)
    p.add_argument("--bootstrap-n", type=int, default=0)

    p = sub.add_parser("select", help="pick the candidate with best unprocessed accuracy")
    common(p, data=False)
    p.add_argument("--model", action="append", dest="models", default=[], metavar="ID=PATH")

    p = sub.add_parser("calibrated-threshold", help="optimal threshold for calibrated scores")
    p.add_argument("--fp-cost", type=float, default=1.0)
    p.add_argument("--fn-cost", type=float, default=1.0)
    return parser


def config_from_args(args) -> RunConfig:
    fields = RunConfig.__dataclass_fields__
    return RunConfig(**{k: v for k, v in vars(args).items() if k in fields})


def run(config: RunConfig) -> int:
    """Execute ``config``; returns the process exit status."""
    try:
        config.validate()
        text = HANDLERS[config.command](config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DataError, OutsideHullError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if config.output:
        with open(config.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(config_from_args(args))


if __name__ == "__main__":
    sys.exit(main())
