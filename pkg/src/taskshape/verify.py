"""Property-verification suite behind the `verify` CLI command.

Each check returns a dict with at least {"name", "passed"} plus the
measured quantities, so the CLI can emit a machine-readable report and the
acceptance tests can assert on the same numbers.
"""
from __future__ import annotations

import statistics

import numpy as np

from . import disentangle
from .agent import GridExperimentConfig, episodes_to_success_rate, run_experiment
from .config import RunConfig
from .geometry import ProjectionConfig, TaskDirection, cosine_similarity, make_projector
from .shaping import GateConfig, NoiseCalibrator, gate
from .stages import StageMachine, StageSpec
from .synthetic import (
    LatentTaskModel,
    ViewpointModel,
    gen_trajectory,
    measure_snr,
    monotonicity_violation_rate,
    viewpoint_shift,
)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def check_snr_gain(alphas=(0.5, 0.8, 0.95), dim: int = 64, T: int = 10_000,
                   noise_sigma: float = 0.1, seed: int = 0,
                   rel_tol: float = 0.05,
                   applied_alpha_offset: float = 0.0) -> dict:
    """Projection must improve the SNR by (1 - alpha)^-2 within rel_tol.

    `applied_alpha_offset` miswires the measured projector on purpose; it
    exists only so mutation tests can confirm the check has teeth.
    """
    rng = np.random.default_rng(seed)
    d = TaskDirection.from_vector(_unit(rng.normal(size=dim)))
    e_start = rng.normal(size=dim)
    model = LatentTaskModel(e_start=e_start, direction=d,
                            noise_sigma=noise_sigma, seed=seed)
    traj = gen_trajectory(model, T)
    results = {}
    passed = True
    for alpha in alphas:
        raw, proj = measure_snr(traj, e_start, d,
                                min(alpha + applied_alpha_offset, 0.999))
        ratio = proj / raw
        expected = (1.0 - alpha) ** -2
        ok = abs(ratio - expected) <= rel_tol * expected
        passed = passed and ok
        results[alpha] = {"ratio": ratio, "expected": expected, "ok": ok}
    return {"name": "snr_gain", "passed": passed, "per_alpha": results}


def check_monotonicity(T: int = 1000, dim: int = 64, n_seeds: int = 20,
                       noise_sigma: float = 0.004, alpha: float = 0.95) -> dict:
    """Projected rewards must be near-monotone while raw rewards are not.

    The text target is taken parallel to the task direction, which
    satisfies the angular alignment condition by construction (its cosine
    with the direction is 1, an upper bound for the right-hand product).
    """
    raw_rates, proj_rates = [], []
    for seed in range(n_seeds):
        rng = np.random.default_rng(seed)
        d_vec = _unit(rng.normal(size=dim))
        d = TaskDirection.from_vector(d_vec)
        e_start = rng.normal(size=dim)
        e_start -= np.dot(e_start, d_vec) * d_vec
        e_start = _unit(e_start)
        e_l = d_vec  # target parallel to the task direction
        model = LatentTaskModel(e_start=e_start, direction=d,
                                noise_sigma=noise_sigma, seed=seed)
        traj = gen_trajectory(model, T)
        proj = make_projector(d, ProjectionConfig(alpha=alpha))
        raw_r = [cosine_similarity(e, e_l) for _, e in traj]
        proj_r = [cosine_similarity(proj.apply(e - e_start) + e_start, e_l)
                  for _, e in traj]
        raw_rates.append(monotonicity_violation_rate(raw_r))
        proj_rates.append(monotonicity_violation_rate(proj_r))
    raw_mean = float(np.mean(raw_rates))
    proj_mean = float(np.mean(proj_rates))
    passed = raw_mean > 0.25 and proj_mean < 0.05 and proj_mean < raw_mean
    return {"name": "monotonicity", "passed": passed,
            "raw_violation_rate": raw_mean, "projected_violation_rate": proj_mean}


def check_noise_floor(n_calibration: int = 10_000, n_eval: int = 100_000,
                      m: float = 0.97, kappa: float = 100.0,
                      seed: int = 0, tol: float = 0.01) -> dict:
    """Gated pure-noise streams must exceed 0.5 with probability 1 - m."""
    rng = np.random.default_rng(seed)
    cal = NoiseCalibrator(calibration_steps=n_calibration, m=m)
    for s in rng.normal(size=n_calibration):
        cal.observe(float(s))
    theta = cal.threshold()
    cfg = GateConfig(theta=theta, kappa=kappa)
    stream = rng.normal(size=n_eval)
    frac = float(np.mean([gate(float(s), cfg) > 0.5 for s in stream]))
    expected = 1.0 - m
    passed = abs(frac - expected) <= tol
    return {"name": "noise_floor", "passed": passed,
            "fraction_above": frac, "expected": expected, "theta": theta}


def check_gate_and_defaults() -> dict:
    """Gate midpoint is exactly 0.5 and an empty config carries the defaults."""
    cfg = RunConfig.from_dict({})
    midpoint = gate(0.42, GateConfig(theta=0.42, kappa=cfg.kappa))
    checks = {
        "gate_midpoint": midpoint == 0.5,
        "kappa": cfg.kappa == 100.0,
        "rho": cfg.rho == 0.05,
        "alpha": cfg.alpha == 0.8,
        "m": cfg.m == 0.97,
        "transition_threshold": cfg.transition_threshold == 0.997,
        "patience": cfg.patience == 4,
    }
    return {"name": "gate_and_defaults", "passed": all(checks.values()),
            "checks": checks}


def _oracle_transition_steps(pattern: list[bool], patience: int) -> list[bool]:
    """Brute-force reference: consecutive-count transition flags per step."""
    out = []
    count = 0
    terminal = False
    for above in pattern:
        fired = False
        if not terminal:
            count = count + 1 if above else 0
            if count >= patience:
                fired = True
                count = 0
                terminal = True  # single-stage machine
        out.append(fired)
    return out


def check_stage_machine(patience: int = 4, threshold: float = 0.997) -> dict:
    """Exhaustive check of all length-8 above/below similarity patterns."""
    goal = np.array([0.0, 1.0, 0.0])
    start = np.array([1.0, 0.0, 0.0])
    e_above = goal * 2.0           # cosine 1 with the goal embedding
    e_below = np.array([1.0, 0.0, 1.0])  # cosine 0
    geom = ProjectionConfig(alpha=0.8)
    failures = []
    for bits in range(256):
        pattern = [(bits >> i) & 1 == 1 for i in range(8)]
        machine = StageMachine(
            stages=[StageSpec(instruction_embedding=goal,
                              baseline_embedding=start,
                              start_image_embedding=start,
                              goal_image_embedding=goal)],
            transition_threshold=threshold, patience=patience)
        got = []
        for above in pattern:
            _, fired = machine.step(e_above if above else e_below, geom)
            got.append(fired)
        want = _oracle_transition_steps(pattern, patience)
        if got != want:
            failures.append(bits)
    return {"name": "stage_machine", "passed": not failures,
            "cases": 256, "failures": failures}


def check_disentanglement(seed: int = 0) -> dict:
    """Gradient correctness plus separation after training on clean data."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for draw in range(10):
        ds = disentangle.make_factor_dataset(seed=seed + draw)
        enc = disentangle.ToyEncoders.init_random(ds.data_dim, ds.texts.shape[1],
                                                  3, rng)
        dec = disentangle.ToyDecoder.init_random(ds.data_dim, enc.W_s.shape[1],
                                                 enc.W_v.shape[1], rng)
        batch = disentangle.build_batch(ds, 8, rng)
        err = disentangle.grad_check(enc, dec, batch,
                                     disentangle.LossWeights(),
                                     clip_stage_index=2, seed=seed + draw)
        worst = max(worst, err)

    ds = disentangle.make_factor_dataset(noise=0.0, seed=seed)
    result = disentangle.train(ds, seed=seed)
    metrics = disentangle.disentanglement_metrics(result.encoders, ds)
    gap = metrics["scene_consistency"] - metrics["cross_scene_similarity"]
    dd2 = result.diag_dominance_by_stage[1]
    dd3 = result.diag_dominance_by_stage[2]
    passed = (worst < 1e-4
              and metrics["scene_consistency"] >= 0.95
              and gap >= 0.3
              and dd3 > dd2)
    return {"name": "disentanglement", "passed": passed,
            "grad_check_max_rel_error": worst,
            "scene_consistency": metrics["scene_consistency"],
            "scene_gap": gap,
            "diag_dominance_stage2": dd2, "diag_dominance_stage3": dd3}


def check_gridworld(seeds=(0, 1, 2, 3, 4)) -> dict:
    """Shaped learning must halve the episodes needed to hit 90% success."""
    cfg = GridExperimentConfig()
    shaped = run_experiment(cfg, True, list(seeds))
    sparse = run_experiment(cfg, False, list(seeds))
    shaped_eps = [episodes_to_success_rate(logs, cfg.success_window)
                  for logs in shaped.values()]
    sparse_eps = [episodes_to_success_rate(logs, cfg.success_window)
                  for logs in sparse.values()]
    shaped_median = statistics.median(shaped_eps)
    sparse_median = statistics.median(sparse_eps)
    passed = shaped_median <= 0.5 * sparse_median
    return {"name": "gridworld_efficiency", "passed": passed,
            "shaped_median_episodes": shaped_median,
            "sparse_median_episodes": sparse_median,
            "shaped_per_seed": shaped_eps, "sparse_per_seed": sparse_eps}


def check_viewpoint_robustness(dim: int = 64, T: int = 200, n_views: int = 4,
                               offset_scale: float = 0.5, seed: int = 0,
                               max_ratio: float = 0.10) -> dict:
    """Removing the view subspace must collapse cross-view reward variance."""
    rng = np.random.default_rng(seed)
    d_vec = _unit(rng.normal(size=dim))
    d = TaskDirection.from_vector(d_vec)
    e_start = _unit(rng.normal(size=dim))
    e_l = _unit(d_vec + 0.3 * e_start)
    model = LatentTaskModel(e_start=e_start, direction=d,
                            noise_sigma=0.02, seed=seed)
    traj = gen_trajectory(model, T)
    offsets = [rng.normal(0, offset_scale, size=dim) for _ in range(n_views)]

    # orthonormal basis of the view-offset subspace, for scene alignment
    basis = np.linalg.qr(np.stack(offsets).T)[0][:, :n_views]

    raw_rewards = np.zeros((n_views, T))
    aligned_rewards = np.zeros((n_views, T))
    for v in range(n_views):
        vm = ViewpointModel(view_offsets=[offsets[v]], switch_period=T, seed=seed)
        shifted = viewpoint_shift(traj, vm)
        for t, (_, e) in enumerate(shifted):
            raw_rewards[v, t] = cosine_similarity(e, e_l)
            e_scene = e - basis @ (basis.T @ e)
            aligned_rewards[v, t] = cosine_similarity(e_scene, e_l)
    raw_var = float(np.mean(np.var(raw_rewards, axis=0)))
    aligned_var = float(np.mean(np.var(aligned_rewards, axis=0)))
    passed = aligned_var <= max_ratio * raw_var
    return {"name": "viewpoint_robustness", "passed": passed,
            "raw_variance": raw_var, "aligned_variance": aligned_var,
            "ratio": aligned_var / raw_var if raw_var > 0 else float("inf")}


def run_all(fast: bool = False) -> dict:
    checks = [
        check_snr_gain(),
        check_monotonicity(),
        check_noise_floor(),
        check_gate_and_defaults(),
        check_stage_machine(),
        check_viewpoint_robustness(),
    ]
    if not fast:
        checks.append(check_disentanglement())
        checks.append(check_gridworld())
    return {"passed": all(c["passed"] for c in checks), "checks": checks}
