"""Command-line front end: dataset generation, training, evaluation, sweeps, plots."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import plotting, stats
from .agent import (
    MODES,
    EstimatorConfig,
    EvalConfig,
    StateEstimator,
    fit_normalization,
    generate_dataset,
    run_evaluation,
    train_denoiser,
    windows_from_dataset,
    Dataset,
)
from .diffusion import VpSchedule, build_denoiser, load_checkpoint, save_checkpoint
from .maze import Maze, build_offset_schedule
from .numkit import Rng
from .series import SYNTH_KINDS, Series, load_series_csv, normalize, synth_series

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

_DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
BUILTIN_MAZES = {
    "large": os.path.join(_DATA_DIR, "maze_large.txt"),
    "corridors": os.path.join(_DATA_DIR, "maze_corridors.txt"),
}

DEFAULT_CONFIG = {
    "maze": "large",
    "series": [{"kind": "seasonal"}, {"kind": "random-walk"}],
    "mask": [0, 1],
    "alpha": 1.0,
    "modes": ["dcm", "forecast-mean", "raw-obs"],
    "baseline": "raw-obs",
    "P": 10,
    "C": 64,
    "l": 50,
    "k": 50,
    "w": 16,
    "N": 10,
    "blocks": 5,
    "seeds": [0, 1, 2, 3, 4],
    "offset_mode": "per-episode",
    "f": 50,
    "forecast_method": "seasonal-naive-bootstrap",
    "dataset_episodes": 500,
    "exploration_noise": 0.3,
    "train_steps": 20000,
    "batch_size": 128,
    "lr": 9e-4,
    "series_length": 2048,
    "out": "runs",
}


class ConfigError(Exception):
    pass


def load_config(path: str | None, overrides: dict) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path) as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        unknown = set(user) - set(DEFAULT_CONFIG)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(user)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    if cfg["P"] < 1 or cfg["k"] < 1 or cfg["l"] < 1 or cfg["w"] < 1 or cfg["blocks"] < 1:
        raise ConfigError("P, k, l, w, blocks must all be >= 1")
    if cfg["alpha"] < 0:
        raise ConfigError("alpha must be >= 0")
    if cfg["offset_mode"] not in ("per-episode", "intra-episode"):
        raise ConfigError(f"bad offset_mode {cfg['offset_mode']!r}")
    for mode in cfg["modes"] + [cfg["baseline"]]:
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r} (choose from {MODES})")
    if len(cfg["series"]) != len(cfg["mask"]):
        raise ConfigError("need one series spec per masked dimension")
    for spec in cfg["series"]:
        if "csv" in spec:
            if not os.path.exists(spec["csv"]):
                raise ConfigError(f"series file not found: {spec['csv']}")
        elif spec.get("kind") not in SYNTH_KINDS:
            raise ConfigError(f"series spec needs 'csv' or a kind from {SYNTH_KINDS}")
    maze_path = BUILTIN_MAZES.get(cfg["maze"], cfg["maze"])
    if not os.path.exists(maze_path):
        raise ConfigError(f"maze file not found: {maze_path}")


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:10]


def load_maze(cfg: dict) -> Maze:
    return Maze.from_file(BUILTIN_MAZES.get(cfg["maze"], cfg["maze"]))


def build_series(cfg: dict, seed: int) -> list[Series]:
    """One normalized driver series per masked dim.

    Synthetic series are seeded by (seed, dim) so runs are reproducible; CSV
    series are normalized with context-prefix stats.
    """
    out = []
    for d, spec in enumerate(cfg["series"]):
        if "csv" in spec:
            raw = load_series_csv(spec["csv"], spec.get("column"), spec.get("skip_header", False))
        else:
            params = {k: v for k, v in spec.items() if k != "kind"}
            raw = synth_series(spec["kind"], cfg["series_length"], Rng(seed, 7000 + d), **params)
        norm, _ = normalize(raw, cfg["C"])
        out.append(norm)
    return out


def eval_schedule_and_context(cfg: dict, maze: Maze, seed: int):
    series = build_series(cfg, seed)
    ranges = maze.state_ranges()
    episodes = cfg["blocks"] * cfg["P"]
    schedule = build_offset_schedule(
        [s.values for s in series], cfg["alpha"], cfg["offset_mode"], episodes,
        ranges, tuple(cfg["mask"]), cfg["f"], maze.t_max, start=cfg["C"],
    )
    context = [cfg["alpha"] * ranges[d] * series[i].values[:cfg["C"]]
               for i, d in enumerate(cfg["mask"])]
    return schedule, context


def run_one(cfg: dict, maze: Maze, model, mode: str, seed: int, alpha: float | None = None):
    local = dict(cfg)
    if alpha is not None:
        local["alpha"] = alpha
    schedule, context = eval_schedule_and_context(local, maze, seed)
    est_cfg = EstimatorConfig(
        mode=mode, window=local["w"], k=local["k"], l=local["l"],
        mask=tuple(local["mask"]),
        offset_ranges=maze.state_ranges()[list(local["mask"])] * local["alpha"],
        hist_context=local["C"], hist_method=local["forecast_method"],
    )
    estimator = StateEstimator(est_cfg, model)
    eval_cfg = EvalConfig(local["P"], local["blocks"], local["C"], local["l"],
                          local["forecast_method"])
    return run_evaluation(maze, schedule, estimator, eval_cfg, Rng(seed), context)


def write_logs_jsonl(logs, path: str) -> None:
    with open(path, "w") as fh:
        for log in logs:
            for t in range(len(log.states)):
                rec = {
                    "ep": log.episode, "t": t,
                    "s": log.states[t].tolist(), "o": log.observations[t].tolist(),
                    "est": log.estimates[t].tolist(),
                    "a": log.actions[t - 1].tolist() if t > 0 else None,
                    "r": float(log.rewards[t - 1]) if t > 0 else 0.0,
                }
                fh.write(json.dumps(rec) + "\n")


# -- commands ---------------------------------------------------------------------

def _overrides(args) -> dict:
    ov = {"maze": getattr(args, "maze", None)}
    if getattr(args, "mode", None):
        ov["modes"] = args.mode.split(",")
    if getattr(args, "series", None):
        ov["series"] = [{"kind": k} for k in args.series.split(",")]
    if getattr(args, "alpha", None) is not None:
        ov["alpha"] = args.alpha
    if getattr(args, "jobs", 1) < 1:
        raise ConfigError("--jobs must be >= 1")
    return ov


def cmd_gen_data(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    maze = load_maze(cfg)
    seed = args.seed if args.seed is not None else 0
    dataset = generate_dataset(maze, cfg["dataset_episodes"], cfg["exploration_noise"], Rng(seed))
    dataset.save_jsonl(args.out)
    print(f"wrote {len(dataset)} transitions to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    seed = args.seed if args.seed is not None else 0
    dataset = Dataset.load_jsonl(args.data)
    states, windows = windows_from_dataset(dataset, cfg["w"])
    rng = Rng(seed, 1)
    model = build_denoiser(4, 2, cfg["w"], rng.child(0), VpSchedule(cfg["N"]))
    model = fit_normalization(model, states, windows)
    model, curve = train_denoiser(model, states, windows, cfg["train_steps"], rng,
                                  cfg["batch_size"], cfg["lr"])
    save_checkpoint(model, args.out)
    curve_path = args.out + ".loss.csv"
    with open(curve_path, "w") as fh:
        fh.write("step,loss,val_loss\n")
        for s, loss, val in curve:
            fh.write(f"{s},{loss!r},{val!r}\n")
    print(f"final loss {curve[-1][1]:.4f} (val {curve[-1][2]:.4f}); "
          f"checkpoint {args.out}, curve {curve_path}")
    return EXIT_OK


def _load_model_checked(path: str, cfg: dict):
    model = load_checkpoint(path)
    if model.window != cfg["w"] or model.schedule.n_steps != cfg["N"]:
        raise ConfigError(
            f"checkpoint (w={model.window}, N={model.schedule.n_steps}) does not match "
            f"config (w={cfg['w']}, N={cfg['N']})"
        )
    return model


def cmd_eval(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    maze = load_maze(cfg)
    needs_model = any(m not in ("oracle", "raw-obs", "forecast-mean", "forecast-median")
                      for m in cfg["modes"])
    model = _load_model_checked(args.ckpt, cfg) if needs_model else None
    out_dir = args.out or os.path.join(cfg["out"], config_hash(cfg))
    os.makedirs(out_dir, exist_ok=True)
    seeds = [args.seed] if args.seed is not None else cfg["seeds"]
    summaries = []
    per_mode_scores: dict[str, list[float]] = {m: [] for m in cfg["modes"]}
    series_name = "+".join(s.get("kind", os.path.basename(s.get("csv", "?")))
                           for s in cfg["series"])
    for mode in cfg["modes"]:
        for seed in seeds:
            logs = run_one(cfg, maze, model, mode, seed)
            summary = stats.RunSummary.from_logs(mode, series_name, seed, logs)
            summaries.append(summary)
            per_mode_scores[mode].append(summary.score_mean)
            write_logs_jsonl(logs, os.path.join(out_dir, f"logs_{mode}_s{seed}.jsonl"))
            print(f"{mode} seed={seed}: score {summary.score_mean:.1f} "
                  f"err_mean {summary.err_mean:.3f}")
    stats.write_summary_csv(summaries, os.path.join(out_dir, "summary.csv"))
    baseline = cfg["baseline"]
    if baseline in per_mode_scores and len(seeds) >= 2:
        with open(os.path.join(out_dir, "welch.csv"), "w") as fh:
            fh.write("mode,baseline,t,dof,p\n")
            for mode in cfg["modes"]:
                if mode == baseline:
                    continue
                try:
                    t, dof, p = stats.welch_t_test(per_mode_scores[mode],
                                                   per_mode_scores[baseline])
                    fh.write(f"{mode},{baseline},{t!r},{dof!r},{p!r}\n")
                except ValueError:
                    fh.write(f"{mode},{baseline},nan,nan,nan\n")
    print(f"outputs in {out_dir}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    grid = [float(x) for x in (args.grid.split(",") if args.grid else
                               ["0", "0.25", "0.5", "0.75", "1.0"])]
    if any(g < 0 for g in grid):
        raise ConfigError("alpha grid values must be >= 0")
    maze = load_maze(cfg)
    needs_model = any(m not in ("oracle", "raw-obs", "forecast-mean", "forecast-median")
                      for m in cfg["modes"])
    model = _load_model_checked(args.ckpt, cfg) if needs_model else None
    out_dir = args.out or os.path.join(cfg["out"], "sweep-" + config_hash(cfg))
    os.makedirs(out_dir, exist_ok=True)
    seeds = [args.seed] if args.seed is not None else cfg["seeds"]
    cells: dict[tuple[float, str], list[float]] = {}
    for alpha in grid:
        for mode in cfg["modes"]:
            scores = []
            for seed in seeds:
                logs = run_one(cfg, maze, model, mode, seed, alpha=alpha)
                scores.append(float(np.mean([log.score for log in logs])))
            cells[(alpha, mode)] = scores
            print(f"alpha={alpha} {mode}: {np.mean(scores):.1f}")
    result = stats.aggregate_sweep(grid, cfg["modes"], cells)
    csv_path = os.path.join(out_dir, "sweep.csv")
    result.to_csv(csv_path)
    rows = [{"alpha": a, **{m: result.score_mean[i, j] for j, m in enumerate(result.modes)}}
            for i, a in enumerate(result.grid)]
    plotting.emit_plot_data(rows, "lines", os.path.join(out_dir, "sweep_plot.csv"),
                            os.path.join(out_dir, "sweep.svg"))
    print(f"outputs in {out_dir}")
    return EXIT_OK


def cmd_plot(args) -> int:
    if not os.path.exists(args.csv):
        raise ConfigError(f"input CSV not found: {args.csv}")
    with open(args.csv) as fh:
        header = fh.readline().strip().split(",")
        rows = []
        for line in fh:
            if not line.strip():
                continue
            cells = line.strip().split(",")
            row = {}
            for key, cell in zip(header, cells):
                try:
                    row[key] = float(cell)
                except ValueError:
                    row[key] = cell
            rows.append(row)
    plotting.emit_plot_data(rows, args.kind, args.out + ".csv", args.out + ".svg")
    print(f"wrote {args.out}.csv and {args.out}.svg")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftrl",
        description="State estimation under time-varying observation offsets: "
                    "dataset generation, denoiser training, evaluation, sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (flags override fields)")
        p.add_argument("--seed", type=int, help="seed; fully determines outputs")
        p.add_argument("--maze", help="builtin maze name or maze text file")

    p = sub.add_parser("gen-data", help="generate an offline dataset (JSONL)")
    common(p)
    p.add_argument("--out", required=True, help="output JSONL path")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the denoiser on a dataset")
    common(p)
    p.add_argument("--data", required=True, help="dataset JSONL")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.set_defaults(func=cmd_train)

    def eval_common(p):
        p.add_argument("--ckpt", help="denoiser checkpoint")
        p.add_argument("--mode", help="comma-separated estimator modes")
        p.add_argument("--series", help="comma-separated synthetic series kinds, "
                                        "one per masked dimension")
        p.add_argument("--jobs", type=int, default=1,
                       help="evaluation worker count; outputs are identical for "
                            "any value (episodes are independently seeded)")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("eval", help="run the evaluation protocol")
    common(p)
    eval_common(p)
    p.add_argument("--alpha", type=float, help="offset scale override")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="offset-scale sweep over modes")
    common(p)
    eval_common(p)
    p.add_argument("--grid", help="comma-separated alpha values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="render plot data from a CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--kind", choices=("bars", "lines", "histogram"), default="lines")
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
