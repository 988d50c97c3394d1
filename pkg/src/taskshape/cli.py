"""Command-line entry point.

Subcommands: shape, train, disentangle, calibrate, verify, fetch. Every
command is deterministic given the config and seed; outputs are CSV/JSON
files meant for offline analysis.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import disentangle, verify
from .agent import GridExperimentConfig, episodes_to_success_rate, run_experiment
from .config import RunConfig
from .dataio import build_stage_machine, fetch_embeddings, load_manifest, read_dataset, write_dataset
from .errors import TaskShapeError
from .geometry import ProjectionConfig, TaskDirection
from .shaping import NoiseCalibrator, RewardShaper
from .synthetic import LatentTaskModel, gen_trajectory

EXIT_CHECK_FAILED = 1
EXIT_BAD_INPUT = 2


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seeds = [args.seed]
    return cfg


def _synthetic_machine(cfg: RunConfig):
    """Noise-free-compatible single-stage setup mirroring the latent model."""
    rng = np.random.default_rng(cfg.seeds[0])
    d_vec = rng.normal(size=cfg.embed_dim)
    d_vec /= np.linalg.norm(d_vec)
    e_start = rng.normal(size=cfg.embed_dim)
    e_start -= np.dot(e_start, d_vec) * d_vec
    e_start /= np.linalg.norm(e_start)
    model = LatentTaskModel(e_start=e_start,
                            direction=TaskDirection.from_vector(d_vec),
                            noise_sigma=cfg.noise_sigma, seed=cfg.seeds[0])
    from .stages import StageMachine, StageSpec
    spec = StageSpec(instruction_embedding=e_start + d_vec,
                     baseline_embedding=e_start,
                     start_image_embedding=e_start,
                     goal_image_embedding=e_start + d_vec)
    machine = StageMachine(stages=[spec],
                           transition_threshold=cfg.transition_threshold,
                           patience=cfg.patience)
    return model, machine


def _read_trajectory_csv(path) -> list[np.ndarray]:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(np.array([float(x) for x in line.split(",")]))
    return rows


def cmd_shape(args) -> int:
    cfg = _load_config(args)
    if args.synthetic:
        model, machine = _synthetic_machine(cfg)
        embeddings = [e for _, e in gen_trajectory(model, cfg.trajectory_steps)]
    else:
        if not args.dataset or not args.manifest:
            print("shape: need --dataset and --manifest (or --synthetic)",
                  file=sys.stderr)
            return EXIT_BAD_INPUT
        dataset = read_dataset(args.dataset)
        manifest = load_manifest(args.manifest)
        machine = build_stage_machine(dataset, manifest,
                                      cfg.transition_threshold, cfg.patience)
        if not args.trajectory:
            print("shape: need --trajectory", file=sys.stderr)
            return EXIT_BAD_INPUT
        embeddings = _read_trajectory_csv(args.trajectory)

    import copy
    machine_raw = copy.deepcopy(machine)
    geom = ProjectionConfig(alpha=cfg.alpha)
    geom_raw = ProjectionConfig(alpha=0.0)

    # offline calibration: theta from the projected scores of this trajectory
    projected_scores = []
    probe = copy.deepcopy(machine)
    for e in embeddings:
        raw_reward, _ = probe.step(e, geom)
        projected_scores.append(raw_reward)
    cal = NoiseCalibrator(calibration_steps=max(2, len(projected_scores)), m=cfg.m)
    for s in projected_scores:
        cal.observe(s)
    shaper = RewardShaper(kind=cfg.filter_kind, m=cfg.m, kappa=cfg.kappa,
                          ema_beta=cfg.ema_beta, ema_band=cfg.ema_band,
                          kalman_q=cfg.kalman_q, kalman_r=cfg.kalman_r,
                          theta_override=cal.threshold())

    out_path = Path(cfg.output_dir) / "shaped_rewards.csv"
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "raw", "projected", "gated", "stage", "transition"])
        for t, e in enumerate(embeddings):
            stage_idx = machine.current
            raw_reward, _ = machine_raw.step(e, geom_raw)
            proj_reward, transitioned = machine.step(e, geom)
            gated = shaper.shape(proj_reward)
            writer.writerow([t, f"{raw_reward:.9f}", f"{proj_reward:.9f}",
                             f"{gated:.9f}", stage_idx, int(transitioned)])
    print(f"wrote {out_path}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    grid_cfg = GridExperimentConfig(
        grid_size=cfg.grid_size, max_steps=cfg.max_steps, episodes=cfg.episodes,
        alpha=cfg.alpha, rho=cfg.rho, kappa=cfg.kappa, m=cfg.m,
        calibration_steps=cfg.grid_calibration_steps, gamma=cfg.gamma,
        transition_threshold=cfg.transition_threshold, patience=cfg.patience)
    out_dir = Path(cfg.output_dir)
    summary = {}
    for arm, shaping in (("shaped", True), ("sparse", False)):
        logs_by_seed = run_experiment(grid_cfg, shaping, cfg.seeds)
        path = out_dir / f"learning_curve_{arm}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["seed", "episode", "success", "steps", "return"])
            for seed, logs in logs_by_seed.items():
                for log in logs:
                    writer.writerow([seed, log.episode, int(log.success),
                                     log.steps, f"{log.fused_return:.6f}"])
        eps = sorted(episodes_to_success_rate(logs, grid_cfg.success_window)
                     for logs in logs_by_seed.values())
        summary[arm] = eps[len(eps) // 2]
        print(f"wrote {path}")
    print(f"episodes-to-90%-success: shaped={summary['shaped']} "
          f"sparse={summary['sparse']}")
    return 0


def cmd_disentangle(args) -> int:
    cfg = _load_config(args)
    ds = disentangle.make_factor_dataset(seed=cfg.seeds[0])
    result = disentangle.train(ds, seed=cfg.seeds[0])
    out_dir = Path(cfg.output_dir)
    path = out_dir / "disentangle_history.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        fieldnames = list(result.history[0].keys())
        writer.writerow(fieldnames)
        for row in result.history:
            writer.writerow([row[k] for k in fieldnames])
    metrics = disentangle.disentanglement_metrics(result.encoders, ds)
    print(json.dumps(metrics, indent=2))
    print(f"wrote {path}")
    return 0


def cmd_calibrate(args) -> int:
    cfg = _load_config(args)
    with open(args.scores) as fh:
        scores = [float(line) for line in fh if line.strip()]
    cal = NoiseCalibrator(calibration_steps=max(2, len(scores)), m=cfg.m)
    for s in scores:
        cal.observe(s)
    print(json.dumps({"theta": cal.threshold(), "m": cfg.m,
                      "observations": len(cal)}))
    return 0


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    report = verify.run_all(fast=args.fast)
    path = Path(cfg.output_dir) / "verify_report.json"
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
    for check in report["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"[{status}] {check['name']}")
    print(f"wrote {path}")
    return 0 if report["passed"] else EXIT_CHECK_FAILED


def cmd_fetch(args) -> int:
    cfg = _load_config(args)
    with open(args.items) as fh:
        items = json.load(fh)
    ds = fetch_embeddings(args.endpoint, items, bearer_token=args.token)
    out = Path(cfg.output_dir) / "fetched_embeddings.mrvl"
    write_dataset(ds, out)
    print(f"wrote {out} ({len(ds.entries)} entries, dim {ds.dim})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taskshape",
        description="Reward shaping over vision-language embeddings")
    parser.add_argument("--config", help="path to a JSON run config")
    parser.add_argument("--seed", type=int, help="override the config seeds")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("shape", help="shape an offline trajectory into rewards")
    p.add_argument("--dataset", help="embedding dataset file")
    p.add_argument("--manifest", help="stage manifest JSON")
    p.add_argument("--trajectory", help="CSV of embedding rows")
    p.add_argument("--synthetic", action="store_true",
                   help="use a generated trajectory instead of files")
    p.set_defaults(func=cmd_shape)

    p = sub.add_parser("train", help="gridworld Q-learning, shaped vs sparse")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("disentangle", help="train the toy scene-view model")
    p.set_defaults(func=cmd_disentangle)

    p = sub.add_parser("calibrate", help="noise threshold from a score file")
    p.add_argument("--scores", required=True, help="one score per line")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("verify", help="run the property-verification suite")
    p.add_argument("--fast", action="store_true",
                   help="skip the slower training-based checks")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("fetch", help="fetch embeddings from a remote service")
    p.add_argument("--endpoint", required=True)
    p.add_argument("--items", required=True, help="JSON list of request items")
    p.add_argument("--token", help="bearer token")
    p.set_defaults(func=cmd_fetch)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except TaskShapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
