"""Command line entry point: gen, train, eval, sweep and plot.

Exit codes: 0 success, 2 usage or input error, 3 numerical divergence.
Settings come from an optional JSON file (``--config``) with sections
``gen``, ``train`` and ``sweep``; command-line flags override it.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import datagen
from .dataset import DatasetError, load_dataset, save_dataset
from .model import DivergenceError, load_checkpoint, save_checkpoint
from .pipeline import (
    AGGREGATE_COLUMNS,
    FRONTIER_COLUMNS,
    TrainConfig,
    alpha_sweep,
    default_model,
    evaluate,
    train,
    write_csv,
    write_history,
    write_instance_csv,
)
from .plot import PlotError, plot_frontier
from .solve import NumericalFailure

log = logging.getLogger("odece")

EXIT_OK, EXIT_INPUT, EXIT_DIVERGED = 0, 2, 3
PROBLEMS = sorted(datagen.GENERATORS)


class InputError(Exception):
    pass


def _load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise InputError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{p}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise InputError(f"{p}: top level must be an object")
    return cfg


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise InputError(f"output directory {out} is not writable")
    return out


def _train_config(args, conf: dict, **extra) -> TrainConfig:
    section = dict(conf.get("train", {}))
    if getattr(args, "seed", None) is not None:
        section["seed"] = args.seed
    if getattr(args, "alpha", None) is not None:
        section["alpha"] = args.alpha
    if getattr(args, "loss", None) is not None:
        section["loss_kind"] = args.loss
    if getattr(args, "epochs", None) is not None:
        section["epochs"] = args.epochs
    if getattr(args, "workers", None) is not None:
        section["workers"] = args.workers
    section.update(extra)
    try:
        return TrainConfig(**section)
    except TypeError as exc:
        raise InputError(f"bad train config: {exc}") from None


def _check_problem(args, ds):
    if args.problem is not None and args.problem != ds.problem:
        raise InputError(f"--problem {args.problem} does not match dataset problem {ds.problem}")


def run_gen(args, conf) -> int:
    problem = args.problem or conf.get("problem") or "mdkp_weights"
    overrides = dict(conf.get("gen", {}))
    seed = args.seed if args.seed is not None else conf.get("seed")
    if seed is not None:
        overrides["seed"] = int(seed)
    cfg = datagen.config_for(problem, overrides)
    out = _out_dir(args.out)
    ds = datagen.generate(problem, cfg)
    save_dataset(ds, out)
    sizes = {k: len(v) for k, v in ds.splits.items()}
    xs = np.array([inst.x_star for inst in ds.instances])
    if ds.family.value == "covering_lhs":
        trivial = float(np.mean(np.all(xs == 0, axis=1)))
    else:
        trivial = float(np.mean([not datagen.nontrivial(x) for x in xs]))
    print(f"wrote {len(ds)} {problem} instances to {out}")
    print(f"splits: train={sizes['train']} val={sizes['val']} test={sizes['test']}")
    print(f"trivial optima: {trivial:.3%}")
    return EXIT_OK


def run_train(args, conf) -> int:
    ds = load_dataset(args.data)
    _check_problem(args, ds)
    cfg = _train_config(args, conf)
    out = _out_dir(args.out)
    model, history = train(ds, default_model(ds, cfg.seed), cfg)
    save_checkpoint(model, out / "model.json")
    write_history(out / "history.csv", history)
    (out / "train_config.json").write_text(
        json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n"
    )
    last = history[-1]
    print(f"trained {cfg.loss_kind.value} model for {len(history)} epochs; last val loss {last.val_loss:.6g}")
    return EXIT_OK


def run_eval(args, conf) -> int:
    ds = load_dataset(args.data)
    _check_problem(args, ds)
    try:
        model = load_checkpoint(args.model)
    except (FileNotFoundError, ValueError) as exc:
        raise InputError(str(exc)) from None
    if model.in_dim != ds.num_features or model.out_dim != ds.system(0).predicted_slot_count:
        raise InputError("model dimensions do not match the dataset")
    out = _out_dir(args.out)
    report = evaluate(ds, model, args.split, workers=args.workers or 1)
    (out / "eval_report.json").write_text(report.to_json(), encoding="utf-8", newline="\n")
    write_instance_csv(out / "eval_instances.csv", report)
    reg = "n/a" if report.normalized_regret is None else f"{report.normalized_regret:.6g}"
    print(f"infeasibility {report.infeasibility_ratio:.6g}  regret {reg}  (K={report.num_instances})")
    return EXIT_OK


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def run_sweep(args, conf) -> int:
    ds = load_dataset(args.data)
    _check_problem(args, ds)
    section = conf.get("sweep", {})
    alphas = args.alphas or section.get("alphas") or [0.2, 0.35, 0.5, 0.65, 0.8]
    if args.alpha is not None:
        alphas = [args.alpha]
    seeds = args.seeds or section.get("seeds") or [0, 1, 2, 3, 4]
    if args.seed is not None:
        seeds = [args.seed]
    base = _train_config(argparse.Namespace(epochs=args.epochs), conf, workers=1)
    out = _out_dir(args.out)
    rows, agg = alpha_sweep(
        ds, alphas, seeds, base, include_mse=not args.no_mse, workers=args.workers or 1
    )
    write_csv(out / "frontier.csv", FRONTIER_COLUMNS, rows)
    write_csv(out / "frontier_aggregate.csv", AGGREGATE_COLUMNS, agg)
    failed = sum(r.get("infeasibility") is None for r in rows)
    print(f"wrote {len(rows)} runs to {out / 'frontier.csv'} ({failed} failed)")
    return EXIT_OK


def run_plot(args, conf) -> int:
    target = Path(args.out)
    if target.suffix.lower() != ".svg":
        target = _out_dir(target) / "frontier.svg"
    plot_frontier(args.frontier, target)
    print(f"wrote {target}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--seed", type=int)
    common.add_argument("--problem", choices=PROBLEMS)
    common.add_argument("--workers", type=int, help="parallel solves or sweep runs (default 1)")

    parser = argparse.ArgumentParser(prog="odece", description="Decision-focused constraint-parameter learning")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="dataset directory")
    p.set_defaults(func=run_gen)

    p = sub.add_parser("train", parents=[common], help="train a predictor")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--loss", choices=["odece", "mse"])
    p.add_argument("--epochs", type=int)
    p.set_defaults(func=run_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--alpha", type=float, help=argparse.SUPPRESS)
    p.set_defaults(func=run_eval)

    p = sub.add_parser("sweep", parents=[common], help="alpha x seed frontier")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, help="run a single alpha")
    p.add_argument("--alphas", type=_float_list)
    p.add_argument("--seeds", type=_int_list)
    p.add_argument("--epochs", type=int)
    p.add_argument("--no-mse", action="store_true", help="skip the MSE baseline runs")
    p.set_defaults(func=run_sweep)

    p = sub.add_parser("plot", parents=[common], help="SVG scatter of a frontier CSV")
    p.add_argument("--frontier", required=True)
    p.add_argument("--out", required=True, help="SVG file or directory")
    p.set_defaults(func=run_plot)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("ODECE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers is not None and args.workers < 1:
        parser.error("--workers must be at least 1")
    try:
        conf = _load_config(args.config)
        if args.problem is None and "problem" in conf and args.command == "gen":
            args.problem = conf["problem"]
        return args.func(args, conf)
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except NumericalFailure as exc:
        print(f"error: solver breakdown: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (InputError, DatasetError, datagen.ConfigError, PlotError, FileNotFoundError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
