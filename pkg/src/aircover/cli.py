"""Command line front end.

    aircover run      [config.json] [--seed N] [--episodes N] [--out DIR] [--baseline ARM]
    aircover compare  [config.json] [--seed N] [--episodes N] [--seeds K] [--out DIR]
    aircover cluster  scene.json [--uav-range-m M] [--sweep-interval-m M] [--out FILE]
    aircover plot     metrics.csv [--out FILE]

Without a config file, the reference defaults are used. Validation errors
print to stderr and exit with status 2.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import harness
from .clustering import assign_uavs, assignments_to_json, zigzag_sweep
from .harness import RunConfig, compare_baselines, load_config, run_experiment
from .plots import plot_metrics
from .scenario import Scene


def _load_or_default(config_path) -> RunConfig:
    if config_path is None:
        return RunConfig()
    return load_config(config_path)


def _apply_overrides(cfg: RunConfig, args, compare: bool = False) -> RunConfig:
    run = cfg.run
    if getattr(args, "seed", None) is not None:
        run = dataclasses.replace(run, seed=args.seed)
    if getattr(args, "episodes", None) is not None:
        if compare:
            run = dataclasses.replace(run, compare_episodes=args.episodes)
        else:
            run = dataclasses.replace(run, episodes=args.episodes)
    if getattr(args, "baseline", None) is not None:
        run = dataclasses.replace(run, baseline=args.baseline)
    if getattr(args, "seeds", None) is not None:
        run = dataclasses.replace(run, compare_seeds=args.seeds)
    cfg = dataclasses.replace(cfg, run=run)
    harness.validate_config(cfg)
    return cfg


def _cmd_run(args) -> int:
    cfg = _apply_overrides(_load_or_default(args.config), args)
    summary = run_experiment(cfg, args.out)
    json.dump(summary, sys.stdout, indent=2)
    print()
    return 0


def _cmd_compare(args) -> int:
    cfg = _apply_overrides(_load_or_default(args.config), args, compare=True)
    comparison = compare_baselines(cfg, args.out)
    json.dump(comparison, sys.stdout, indent=2)
    print()
    return 0


def _cmd_cluster(args) -> int:
    scene = Scene.from_json(Path(args.scene).read_text(encoding="utf-8"))
    scale = scene.scale_m_per_unit
    uav_units = args.uav_range_m / scale
    interval_m = args.sweep_interval_m or args.uav_range_m
    threshold_m = args.threshold_m or args.uav_range_m / 4.0
    discovered = zigzag_sweep(scene, interval_m / scale)
    if not discovered:
        doc = assignments_to_json([])
    else:
        clusters = harness.cluster_unserved(
            discovered,
            threshold_units=threshold_m / scale,
            branching=args.branching,
            leaf_capacity=args.leaf_capacity,
        )
        doc = assignments_to_json(assign_uavs(clusters, scene, uav_units))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(doc, encoding="utf-8")
    else:
        sys.stdout.write(doc)
    return 0


def _cmd_plot(args) -> int:
    out = args.out or str(Path(args.metrics).with_suffix(".svg"))
    path = plot_metrics(args.metrics, out)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aircover",
        description="UAV base-station coverage restoration simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train one fleet and write run artifacts")
    p_run.add_argument("config", nargs="?", default=None, help="config JSON path")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--episodes", type=int, default=None)
    p_run.add_argument("--out", default="runs/run")
    p_run.add_argument("--baseline", choices=["birch", "no-birch"], default=None)
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser(
        "compare", help="train both workspace arms across replicate seeds"
    )
    p_cmp.add_argument("config", nargs="?", default=None)
    p_cmp.add_argument("--seed", type=int, default=None)
    p_cmp.add_argument("--episodes", type=int, default=None)
    p_cmp.add_argument("--seeds", type=int, default=None, help="replicate count")
    p_cmp.add_argument("--out", default="runs/compare")
    p_cmp.set_defaults(func=_cmd_compare)

    p_clu = sub.add_parser(
        "cluster", help="sweep a scene and print/write the workspace partition"
    )
    p_clu.add_argument("scene", help="scene JSON path")
    p_clu.add_argument("--uav-range-m", type=float, default=1200.0)
    p_clu.add_argument("--sweep-interval-m", type=float, default=0.0)
    p_clu.add_argument(
        "--threshold-m", type=float, default=0.0, help="0 = a quarter of the UAV range"
    )
    p_clu.add_argument("--branching", type=int, default=8)
    p_clu.add_argument("--leaf-capacity", type=int, default=8)
    p_clu.add_argument("--out", default=None)
    p_clu.set_defaults(func=_cmd_cluster)

    p_plt = sub.add_parser("plot", help="render metrics.csv to an SVG chart")
    p_plt.add_argument("metrics", help="metrics CSV path")
    p_plt.add_argument("--out", default=None, help="output SVG path")
    p_plt.set_defaults(func=_cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
