"""Command-line entry point: reproducible experiment presets plus the
individual gen / train / eval / plot stages they chain together.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error. The
MOP_SEED environment variable overrides the base seed everywhere.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

from . import __version__, evaluation, model, svgplot, training
from .distributions import DISTRIBUTIONS, get_distribution
from .manifest import (read_csv, sha256_file, sha256_json, write_csv,
                       write_json, write_manifest)
from .model import ModelConfig
from .presets import EXPERIMENTS, desk_model_config, get_experiment
from .systems import systems_to_json
from .training import TrainConfig

CSV_FIELDS = ["experiment", "preset", "predictor", "t", "mean_err", "stderr",
              "n_systems", "seed"]


class UsageError(Exception):
    pass


def _resolve_seed(args_seed, fallback=0) -> int:
    env = os.environ.get("MOP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"MOP_SEED must be an integer, got {env!r}") from None
    return fallback if args_seed is None else int(args_seed)


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)} - {"model"}
_MODEL_KEYS = {f.name for f in dataclasses.fields(ModelConfig)}


def train_config_from_dict(obj: dict) -> TrainConfig:
    if not isinstance(obj, dict):
        raise UsageError("train config must be a JSON object")
    bad = sorted(set(obj) - _TRAIN_KEYS - {"model"})
    model_obj = obj.get("model", None)
    bad_model = []
    if model_obj is not None:
        if not isinstance(model_obj, dict):
            raise UsageError("config key 'model' must be an object")
        bad_model = sorted(f"model.{k}" for k in set(model_obj) - _MODEL_KEYS)
    if bad or bad_model:
        raise UsageError(f"invalid config keys: {', '.join(bad + bad_model)}")
    kwargs = {k: v for k, v in obj.items() if k != "model"}
    preset = kwargs.get("preset", "linear-dense")
    if preset not in DISTRIBUTIONS:
        raise UsageError(f"unknown distribution preset {preset!r}; "
                         f"valid: {', '.join(sorted(DISTRIBUTIONS))}")
    if model_obj is None:
        mcfg = desk_model_config(preset)
    else:
        mcfg = ModelConfig(**model_obj)
    try:
        return TrainConfig(model=mcfg, **kwargs)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid train config: {exc}") from exc


def train_config_to_dict(cfg: TrainConfig) -> dict:
    out = dataclasses.asdict(cfg)
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.preset not in DISTRIBUTIONS:
        raise UsageError(f"unknown distribution preset {args.preset!r}; "
                         f"valid: {', '.join(sorted(DISTRIBUTIONS))}")
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    seed = _resolve_seed(args.seed)
    dist = get_distribution(args.preset)
    t0 = time.time()
    systems = [dist.sample_system(seed, "gen", i) for i in range(args.count)]
    payload = {"preset": args.preset, "seed": seed, "count": args.count,
               "systems": systems_to_json(systems)}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_json(out, payload)
    write_manifest(out.parent, "gen", {"preset": args.preset, "count": args.count},
                   seed, dataset_hash=sha256_json(payload),
                   wallclock_s=time.time() - t0, outputs=[str(out)])
    print(f"wrote {args.count} systems to {out}")
    return 0


def cmd_train(args) -> int:
    obj = {}
    if args.config:
        try:
            obj = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise UsageError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from exc
        if "config" in obj and isinstance(obj["config"], dict):
            obj = obj["config"]          # accept a manifest as config source
    if args.steps is not None:
        obj["steps"] = args.steps
    if args.seed is not None or os.environ.get("MOP_SEED"):
        obj["seed"] = _resolve_seed(args.seed, obj.get("seed", 0))
    cfg = train_config_from_dict(obj)
    out_dir = Path(args.out_dir)
    t0 = time.time()
    result = training.train(cfg, out_dir, resume=args.resume, quiet=args.quiet)
    _write_train_outputs(out_dir, result, t0)
    print(f"final checkpoint: {result.final_checkpoint}")
    return 0


def _write_train_outputs(out_dir: Path, result: training.TrainResult, t0) -> None:
    write_csv(out_dir / "loss.csv", result.loss_rows,
              ["step", "loss", "grad_norm", "wallclock_s"])
    write_json(out_dir / "dataset.json", result.dataset_manifest)
    ckpt_hashes = {Path(p).name: sha256_file(p) for p in result.checkpoints}
    write_manifest(out_dir, "train", train_config_to_dict(result.config),
                   result.config.seed,
                   dataset_hash=sha256_json(result.dataset_manifest),
                   checkpoint_hashes=ckpt_hashes,
                   wallclock_s=time.time() - t0,
                   outputs=[str(out_dir / "loss.csv"), result.final_checkpoint])


def _load_weights_for(dist, path):
    weights = model.load_checkpoint(path)
    if weights.config.token_dim != dist.token_dim \
            or weights.config.output_dim != dist.output_dim:
        raise UsageError(
            f"checkpoint/preset dimensionality mismatch: checkpoint tokens "
            f"{weights.config.token_dim}->{weights.config.output_dim}, preset "
            f"{dist.name} wants {dist.token_dim}->{dist.output_dim}")
    return weights


def cmd_eval(args) -> int:
    try:
        preset = get_experiment(args.preset)
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    dist = get_distribution(preset.distribution)
    seed = _resolve_seed(args.seed, 1)
    n = args.n or preset.eval_n
    horizon = args.horizon or preset.eval_horizon
    predictors = (args.predictors.split(",") if args.predictors
                  else ["mop", *preset.baselines])
    weights = None
    if "mop" in predictors:
        if not args.ckpt:
            raise UsageError("--ckpt is required when evaluating the mop predictor")
        weights = _load_weights_for(dist, args.ckpt)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()

    population = evaluation.test_population(dist, n, horizon, seed,
                                            preset.switch_at)
    curves = [evaluation.error_curve(kind, dist, n, horizon, seed,
                                     weights=weights,
                                     switch_at=preset.switch_at,
                                     threads=args.threads,
                                     population=population)
              for kind in predictors]
    rows = evaluation.curves_to_csv_rows(args.preset, curves)
    csv_path = out_dir / "curves.csv"
    write_csv(csv_path, rows, CSV_FIELDS)
    report = {"experiment": args.preset, "curves": [c.to_json() for c in curves]}
    if len(curves) == 2:
        report["ratio"] = evaluation.compare_predictors(curves[0], curves[1]).to_json()
    write_json(out_dir / "report.json", report)
    hashes = {Path(args.ckpt).name: sha256_file(args.ckpt)} if args.ckpt else {}
    write_manifest(out_dir, "eval",
                   {"preset": args.preset, "n": n, "horizon": horizon,
                    "predictors": predictors, "ckpt": args.ckpt,
                    "threads": args.threads},
                   seed, checkpoint_hashes=hashes,
                   wallclock_s=time.time() - t0, outputs=[str(csv_path)])
    print(f"wrote {csv_path}")
    return 0


def cmd_plot(args) -> int:
    rows = read_csv(args.csv)
    required = {"predictor", "t", "mean_err", "stderr"}
    if rows and not required.issubset(rows[0]):
        raise UsageError(f"{args.csv}: missing columns "
                         f"{sorted(required - set(rows[0]))}")
    if not rows:
        raise UsageError(f"{args.csv}: no data rows")
    svg = svgplot.render_from_rows(rows, ratio=args.ratio, title=args.title)
    Path(args.svg).parent.mkdir(parents=True, exist_ok=True)
    Path(args.svg).write_text(svg)
    print(f"wrote {args.svg}")
    return 0


def cmd_experiment(args) -> int:
    try:
        preset = get_experiment(args.name)
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    seed = _resolve_seed(args.seed, preset.train.seed)
    root = Path(args.out_dir) / preset.name
    root.mkdir(parents=True, exist_ok=True)
    t0 = time.time()

    if preset.scaling_grid is not None:
        return _experiment_scaling(preset, seed, root, args, t0)

    if preset.trains_model:
        ckpt = _ensure_trained(preset, seed, root, quiet=args.quiet)
    else:
        ckpt = args.ckpt or str(Path(args.out_dir) / "linear-iid" / "train"
                                / "ckpt-final.ckpt")
        if not Path(ckpt).exists():
            raise UsageError(
                f"{preset.name} reuses the linear-iid model; run "
                f"`moplab experiment linear-iid` first or pass --ckpt "
                f"(looked at {ckpt})")

    dist = get_distribution(preset.distribution)
    weights = _load_weights_for(dist, ckpt)

    if preset.shift_sigma2 is not None:
        report = evaluation.distribution_shift_sweep(
            weights, dist, preset.shift_sigma2, preset.eval_n,
            preset.eval_horizon, derive_eval_seed(seed))
        rows = []
        for s2 in preset.shift_sigma2:
            pair = report.curves[s2]
            rows += evaluation.curves_to_csv_rows(
                f"{preset.name}-s{s2}", [pair["mop"], pair["kf"]])
        write_csv(root / "curves.csv", rows, CSV_FIELDS)
        write_json(root / "report.json", report.to_json())
    else:
        eval_dir = root / "eval"
        eval_args = argparse.Namespace(
            preset=preset.name, ckpt=ckpt, seed=derive_eval_seed(seed),
            n=None, horizon=None, predictors=None, threads=args.threads,
            out_dir=str(eval_dir))
        cmd_eval(eval_args)
        rows = read_csv(eval_dir / "curves.csv")
        svg = svgplot.render_from_rows(rows, title=preset.name)
        (root / "curves.svg").write_text(svg)
        if len({r["predictor"] for r in rows}) == 2:
            (root / "ratio.svg").write_text(
                svgplot.render_from_rows(rows, ratio=True,
                                         title=f"{preset.name} ratio"))

    write_manifest(root, "experiment", {"name": preset.name}, seed,
                   wallclock_s=time.time() - t0)
    print(f"experiment {preset.name} done under {root}")
    return 0


def derive_eval_seed(seed: int) -> int:
    # eval populations must not reuse training draws even at equal seeds
    return seed + 10_000


def _ensure_trained(preset, seed, root: Path, quiet=True) -> str:
    cfg = dataclasses.replace(preset.train, seed=seed)
    train_dir = root / "train"
    final = train_dir / "ckpt-final.ckpt"
    manifest_path = train_dir / "manifest.json"
    want = sha256_json(train_config_to_dict(cfg))
    if final.exists() and manifest_path.exists():
        prev = json.loads(manifest_path.read_text())
        if sha256_json(prev.get("config", {})) == want:
            return str(final)
    t0 = time.time()
    result = training.train(cfg, train_dir, quiet=quiet)
    _write_train_outputs(train_dir, result, t0)
    return result.final_checkpoint


def _experiment_scaling(preset, seed, root: Path, args, t0) -> int:
    cfg = dataclasses.replace(preset.train, seed=seed)
    report = evaluation.scaling_experiment(
        preset.scaling_grid, cfg, preset.eval_n, preset.eval_horizon,
        derive_eval_seed(seed), root / "cells")
    write_json(root / "scaling.json", report.to_json())
    write_csv(root / "cells.csv",
              [{k: ("" if c[k] is None else c[k]) for k in
                ("m_systems", "train_len", "mt", "delta", "stderr", "flagged")}
               for c in report.cells],
              ["m_systems", "train_len", "mt", "delta", "stderr", "flagged"])
    write_manifest(root, "experiment", {"name": preset.name}, seed,
                   wallclock_s=time.time() - t0)
    print(f"scaling: spearman(delta, MT) = {report.spearman_delta_vs_mt:+.3f}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moplab",
        description="meta-output-predictor lab: train and evaluate an "
                    "in-context transformer against model-aware filters")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample a system collection to JSON")
    p.add_argument("--preset", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="meta-train a model from a config file")
    p.add_argument("--config", default=None, help="JSON train config (or a "
                   "manifest containing one)")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--quiet", action="store_true", default=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="error curves for a trained model and baselines")
    p.add_argument("--ckpt", default=None)
    p.add_argument("--preset", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--predictors", default=None,
                   help="comma list (default: mop plus the preset baselines)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="one-shot gen->train->eval->plot")
    p.add_argument("--name", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--ckpt", default=None,
                   help="model to reuse (dist-shift preset)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", default="runs")
    p.add_argument("--quiet", action="store_true", default=False)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("plot", help="render an error-curve CSV as SVG")
    p.add_argument("--csv", required=True)
    p.add_argument("--svg", required=True)
    p.add_argument("--ratio", action="store_true", default=False)
    p.add_argument("--title", default=None)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except training.TrainingAborted as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:                      # runtime failure contract
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
