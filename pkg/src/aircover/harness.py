"""Experiment harness: configuration, the end-to-end pipeline, baselines.

A run builds the scene, applies the outage, sweeps for unserved users,
partitions them into UAV workspaces, trains the fleet, and writes four
artifacts: scene.json, clusters.json, metrics.csv, summary.json.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import EpisodeMetrics, FleetQLearner
from .clustering import (
    Assignment,
    CfTreeClusterer,
    assign_uavs,
    assignments_to_json,
    shared_assignments,
    zigzag_sweep,
)
from .propagation import ChannelParams
from .scenario import Scene, apply_disaster, build_grid_scene


@dataclass
class ScenarioSettings:
    n_side: int = 2
    quadrant_m: float = 5200.0
    altitude_cap_m: float = 1200.0
    scale_m_per_unit: float = 20.0
    tbs_coverage_m: float = 2400.0
    tbs_height_m: float = 100.0
    ue_height_m: float = 1.5
    total_ues: int = 400
    tbs_state: tuple[int, ...] = (0, 1, 1, 0)


@dataclass
class ChannelSettings:
    f_c: float = 2e9
    p_t_w: float = 4000.0
    g_t: float = 1.0
    g_r: float = 1.0
    bandwidth_hz: float = 0.18e6
    noise_dbm_hz: float = -174.0
    alpha: float = 1.0
    beta: float = 1.0
    mu_los_db: float = 3.0
    mu_nlos_db: float = 23.0
    eta_ohm: float = 376.73
    light_speed: float = 3e8
    n_env: float = 5.0


@dataclass
class AgentSettings:
    lr: float = 0.5
    gamma: float = 0.9
    epsilon: float = 0.9
    decay: float = 0.999
    epsilon_min: float = 0.01
    battery: int = 300
    rate_threshold_bps: float = 0.1e6
    decay_per_step: bool = False
    uav_coverage_m: float = 1200.0


@dataclass
class RunSettings:
    episodes: int = 10000
    seed: int = 0
    baseline: str = "birch"
    birch_branching: int = 8
    birch_leaf_capacity: int = 8
    # 0 means: a quarter of the UAV coverage radius. Two pressures push the
    # default below the full radius. The merge test bounds a cluster's RMS
    # radius, not its enclosing radius, so thresholds near the coverage
    # radius let the enclosing circle overshoot the link range and fail
    # assignment. And the workspace box grows with the square of the
    # threshold; above roughly half the coverage radius the boxes get too
    # large for tabular learning to converge within the battery budget
    # (see the sensitivity notes in the README).
    birch_threshold_m: float = 0.0
    sweep_interval_m: float = 0.0  # 0 means: use the UAV coverage radius
    compare_seeds: int = 5
    # the unpartitioned baseline never stops early, so its tabular values
    # grow with every episode; the default keeps a two-arm sweep at desk
    # scale (memory in the low GB) while leaving the scoring window intact
    compare_episodes: int = 3000
    compare_window: int = 1000
    summary_window: int = 500


@dataclass
class RunConfig:
    scenario: ScenarioSettings = field(default_factory=ScenarioSettings)
    channel: ChannelSettings = field(default_factory=ChannelSettings)
    agents: AgentSettings = field(default_factory=AgentSettings)
    run: RunSettings = field(default_factory=RunSettings)


_SECTIONS = {
    "scenario": ScenarioSettings,
    "channel": ChannelSettings,
    "agents": AgentSettings,
    "run": RunSettings,
}


def _build_section(cls, doc: dict, path: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(
            f"unknown config key(s) under '{path}': {sorted(unknown)}"
        )
    values = dict(doc)
    if "tbs_state" in values and values["tbs_state"] is not None:
        values["tbs_state"] = tuple(values["tbs_state"])
    return cls(**values)


def config_from_dict(doc: dict) -> RunConfig:
    """Build a config from a parsed JSON object; unknown keys are errors and
    unset fields keep the reference defaults."""
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise ValueError(f"unknown config section(s): {sorted(unknown)}")
    cfg = RunConfig(
        **{
            name: _build_section(cls, doc.get(name, {}), name)
            for name, cls in _SECTIONS.items()
        }
    )
    validate_config(cfg)
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as f:
        return config_from_dict(json.load(f))


def config_to_dict(cfg: RunConfig) -> dict:
    doc = dataclasses.asdict(cfg)
    doc["scenario"]["tbs_state"] = list(cfg.scenario.tbs_state)
    return doc


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config_to_dict(cfg), f, indent=2)
        f.write("\n")


def validate_config(cfg: RunConfig) -> None:
    s, c, a, r = cfg.scenario, cfg.channel, cfg.agents, cfg.run
    if s.n_side < 1:
        raise ValueError("scenario.n_side must be at least 1")
    if s.scale_m_per_unit <= 0:
        raise ValueError("scenario.scale_m_per_unit must be positive")
    if s.quadrant_m <= 0 or s.altitude_cap_m < 0:
        raise ValueError("scenario extents must be positive")
    if s.total_ues < 0:
        raise ValueError("scenario.total_ues must be non-negative")
    if len(s.tbs_state) != s.n_side * s.n_side:
        raise ValueError(
            f"scenario.tbs_state needs {s.n_side * s.n_side} entries, "
            f"got {len(s.tbs_state)}"
        )
    if any(v not in (0, 1) for v in s.tbs_state):
        raise ValueError("scenario.tbs_state entries must be 0 or 1")
    if c.f_c <= 0 or c.bandwidth_hz <= 0 or c.p_t_w <= 0:
        raise ValueError("channel frequency, bandwidth and power must be positive")
    if not 0.0 <= a.epsilon <= 1.0:
        raise ValueError("agents.epsilon must lie in [0, 1]")
    if not 0.0 < a.decay <= 1.0:
        raise ValueError("agents.decay must lie in (0, 1]")
    if a.epsilon_min < 0:
        raise ValueError("agents.epsilon_min must be non-negative")
    if not 0.0 < a.lr <= 1.0:
        raise ValueError("agents.lr must lie in (0, 1]")
    if not 0.0 <= a.gamma < 1.0:
        raise ValueError("agents.gamma must lie in [0, 1)")
    if a.battery < 1:
        raise ValueError("agents.battery must be at least 1")
    if a.rate_threshold_bps < 0:
        raise ValueError("agents.rate_threshold_bps must be non-negative")
    if a.uav_coverage_m <= 0:
        raise ValueError("agents.uav_coverage_m must be positive")
    if r.episodes < 1:
        raise ValueError("run.episodes must be at least 1")
    if r.baseline not in ("birch", "no-birch"):
        raise ValueError("run.baseline must be 'birch' or 'no-birch'")
    if r.birch_branching < 2 or r.birch_leaf_capacity < 1:
        raise ValueError("run.birch_branching >= 2 and run.birch_leaf_capacity >= 1")
    if r.birch_threshold_m < 0 or r.sweep_interval_m < 0:
        raise ValueError("run.birch_threshold_m and run.sweep_interval_m must be >= 0")
    if r.compare_seeds < 1 or r.compare_window < 1 or r.summary_window < 1:
        raise ValueError("run compare/summary settings must be at least 1")
    if r.compare_episodes < 1:
        raise ValueError("run.compare_episodes must be at least 1")


def channel_params(cfg: RunConfig) -> ChannelParams:
    c = cfg.channel
    return ChannelParams(
        f_c=c.f_c,
        p_t_w=c.p_t_w,
        g_t=c.g_t,
        g_r=c.g_r,
        bandwidth_hz=c.bandwidth_hz,
        noise_dbm_hz=c.noise_dbm_hz,
        alpha=c.alpha,
        beta=c.beta,
        mu_los_db=c.mu_los_db,
        mu_nlos_db=c.mu_nlos_db,
        eta_ohm=c.eta_ohm,
        light_speed=c.light_speed,
        n_env=c.n_env,
    )


def build_scene(cfg: RunConfig) -> Scene:
    """The pre-outage world for this config."""
    s = cfg.scenario
    scale = s.scale_m_per_unit
    return build_grid_scene(
        n_side=s.n_side,
        quadrant_units=s.quadrant_m / scale,
        altitude_units=s.altitude_cap_m / scale,
        scale_m_per_unit=scale,
        tbs_coverage_units=s.tbs_coverage_m / scale,
        tbs_height_units=s.tbs_height_m / scale,
        total_ues=s.total_ues,
        seed=cfg.run.seed,
        ue_height_units=s.ue_height_m / scale,
    )


def cluster_unserved(
    discovered, *, threshold_units: float, branching: int, leaf_capacity: int
) -> list[list[int]]:
    """Partition discovered users into clusters of UE ids.

    Insertion order is ascending UE id regardless of the discovery order, so
    the partition is reproducible independent of the sweep geometry.
    """
    ordered = sorted(discovered, key=lambda ue: ue.id)
    points = np.array([(ue.position.x, ue.position.y) for ue in ordered])
    clusterer = CfTreeClusterer(
        threshold=threshold_units,
        branching_factor=branching,
        leaf_capacity=leaf_capacity,
    ).fit(points)
    return [[ordered[row].id for row in ids] for ids in clusterer.cluster_members_]


def prepare_assignments(
    cfg: RunConfig, scene: Scene
) -> tuple[tuple, list[Assignment]]:
    """Sweep the outage area and partition the unserved users.

    Returns the discovered users (sweep order) and the arm-appropriate
    assignments: the tree partition, or shared workspaces with the same UAV
    count for the unpartitioned baseline.
    """
    scale = cfg.scenario.scale_m_per_unit
    uav_units = cfg.agents.uav_coverage_m / scale
    interval_m = cfg.run.sweep_interval_m or cfg.agents.uav_coverage_m
    threshold_m = cfg.run.birch_threshold_m or cfg.agents.uav_coverage_m / 4.0
    discovered = zigzag_sweep(scene, interval_m / scale)
    if not discovered:
        raise ValueError("no unserved users discovered: nothing to assign")
    clusters = cluster_unserved(
        discovered,
        threshold_units=threshold_m / scale,
        branching=cfg.run.birch_branching,
        leaf_capacity=cfg.run.birch_leaf_capacity,
    )
    if cfg.run.baseline == "no-birch":
        return discovered, shared_assignments(
            scene, len(clusters), [ue.id for ue in discovered]
        )
    return discovered, assign_uavs(clusters, scene, uav_units)


def make_trainer(cfg: RunConfig) -> FleetQLearner:
    a = cfg.agents
    return FleetQLearner(
        lr=a.lr,
        gamma=a.gamma,
        epsilon=a.epsilon,
        decay=a.decay,
        epsilon_min=a.epsilon_min,
        battery=a.battery,
        rate_threshold_bps=a.rate_threshold_bps,
        episodes=cfg.run.episodes,
        seed=cfg.run.seed,
        decay_per_step=a.decay_per_step,
        association="nearest" if cfg.run.baseline == "no-birch" else "cluster",
        uav_range_units=a.uav_coverage_m / cfg.scenario.scale_m_per_unit,
        channel=channel_params(cfg),
    )


def metrics_header(n_agents: int) -> list[str]:
    return (
        ["episode", "steps", "coverage", "r_sys"]
        + [f"r_agent_{i}" for i in range(n_agents)]
        + ["epsilon"]
    )


def metrics_row(m: EpisodeMetrics) -> list:
    return (
        [m.episode, m.steps, m.coverage, m.r_sys]
        + list(m.r_agents)
        + [m.epsilon]
    )


def _summarize(history: list[EpisodeMetrics], window: int, battery: int) -> dict:
    tail = history[-window:]
    wins = [m for m in tail if m.coverage == 1.0 and m.steps < battery]
    return {
        "window": len(tail),
        "mean_steps_final": float(np.mean([m.steps for m in tail])),
        "mean_coverage_final": float(np.mean([m.coverage for m in tail])),
        "mean_r_sys_final": float(np.mean([m.r_sys for m in tail])),
        "win_rate_final": len(wins) / len(tail),
    }


def run_experiment(cfg: RunConfig, out_dir) -> dict:
    """Full pipeline for one arm; writes the four artifacts, returns the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()

    scene = apply_disaster(build_scene(cfg), cfg.scenario.tbs_state)
    discovered, assignments = prepare_assignments(cfg, scene)
    (out / "scene.json").write_text(scene.to_json(), encoding="utf-8")
    (out / "clusters.json").write_text(
        assignments_to_json(assignments), encoding="utf-8"
    )

    trainer = make_trainer(cfg)
    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(metrics_header(len(assignments)))
        trainer.fit(
            scene, assignments, on_episode=lambda m: writer.writerow(metrics_row(m))
        )

    summary = {
        "baseline": cfg.run.baseline,
        "seed": cfg.run.seed,
        "episodes": cfg.run.episodes,
        "n_agents": len(assignments),
        "n_unserved": len(discovered),
        **_summarize(trainer.history_, cfg.run.summary_window, cfg.agents.battery),
        "wall_time_s": time.perf_counter() - t0,
    }
    with open(out / "summary.json", "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)
        f.write("\n")
    return summary


def replicate_seeds(master_seed: int, count: int) -> list[int]:
    """Derived per-replicate seeds (spawn key purpose 4)."""
    return [
        int(np.random.SeedSequence(master_seed, spawn_key=(4, k)).generate_state(1)[0])
        for k in range(count)
    ]


def compare_baselines(cfg: RunConfig, out_dir) -> dict:
    """Run both arms over the replicate seed family and score them.

    Each replicate uses one seed for both arms (same scene, same UAV count);
    the score is the mean per-episode system reward over the final window.
    Arm runs last ``compare_episodes`` episodes each.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = replicate_seeds(cfg.run.seed, cfg.run.compare_seeds)
    window = cfg.run.compare_window
    results = []
    wins = 0
    for k, seed in enumerate(seeds):
        arm_summaries = {}
        for arm in ("birch", "no-birch"):
            sub = RunConfig(
                scenario=dataclasses.replace(cfg.scenario),
                channel=dataclasses.replace(cfg.channel),
                agents=dataclasses.replace(cfg.agents),
                run=dataclasses.replace(
                    cfg.run,
                    seed=seed,
                    baseline=arm,
                    episodes=cfg.run.compare_episodes,
                    summary_window=window,
                ),
            )
            arm_summaries[arm] = run_experiment(sub, out / f"seed{k}-{arm}")
        birch_r = arm_summaries["birch"]["mean_r_sys_final"]
        nobirch_r = arm_summaries["no-birch"]["mean_r_sys_final"]
        better = birch_r > nobirch_r
        wins += int(better)
        results.append(
            {
                "replicate": k,
                "seed": seed,
                "birch_mean_r_sys": birch_r,
                "nobirch_mean_r_sys": nobirch_r,
                "birch_mean_steps": arm_summaries["birch"]["mean_steps_final"],
                "nobirch_mean_steps": arm_summaries["no-birch"]["mean_steps_final"],
                "birch_better": better,
            }
        )
    comparison = {
        "n_seeds": len(seeds),
        "window": window,
        "results": results,
        "birch_wins": wins,
    }
    with open(out / "comparison.json", "w", encoding="utf-8") as f:
        json.dump(comparison, f, indent=2)
        f.write("\n")
    return comparison
