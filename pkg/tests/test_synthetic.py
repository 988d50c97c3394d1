"""Synthetic trajectories, the gridworld, and viewpoint perturbation."""
import numpy as np
import pytest

from taskshape.errors import (
    BadDimensionError,
    DegenerateNoiseError,
    EmptyOffsetsError,
    InvalidActionError,
    TooShortError,
)
from taskshape.geometry import TaskDirection
from taskshape.synthetic import (
    ACTIONS,
    GridWorld,
    LatentTaskModel,
    ViewpointModel,
    gen_trajectory,
    grid_embedding,
    identity_progress,
    measure_snr,
    monotonicity_violation_rate,
    sqrt_progress,
    viewpoint_shift,
)


def small_model(noise_sigma=0.1, seed=0, progress_fn=identity_progress):
    d = TaskDirection.from_vector([0.0, 1.0, 0.0, 0.0])
    return LatentTaskModel(e_start=np.array([1.0, 0.0, 0.0, 0.0]),
                           direction=d, noise_sigma=noise_sigma,
                           progress_fn=progress_fn, seed=seed)


# --- latent model -----------------------------------------------------------

def test_noise_is_exactly_orthogonal_to_direction():
    model = small_model(noise_sigma=0.5)
    rng = np.random.default_rng(3)
    d = model.direction.d
    for _ in range(50):
        eps = model._orthogonal_noise(rng)
        assert abs(np.dot(eps, d)) < 1e-12


def test_noise_free_endpoints():
    model = small_model(noise_sigma=0.0)
    rng = np.random.default_rng(0)
    np.testing.assert_allclose(model.embed(0.0, rng), model.e_start)
    np.testing.assert_allclose(model.embed(1.0, rng),
                               model.e_start + model.direction.d)


def test_progress_fn_must_increase():
    with pytest.raises(ValueError):
        small_model(progress_fn=lambda lam: -lam)


def test_sqrt_progress_is_accepted():
    model = small_model(progress_fn=sqrt_progress, noise_sigma=0.0)
    rng = np.random.default_rng(0)
    e = model.embed(0.25, rng)
    np.testing.assert_allclose(e, model.e_start + 0.5 * model.direction.d)


def test_dimension_mismatch_rejected():
    with pytest.raises(BadDimensionError):
        LatentTaskModel(e_start=np.array([1.0, 0.0, 0.0]),
                        direction=TaskDirection.from_vector([0.0, 1.0]))


def test_negative_noise_rejected():
    with pytest.raises(ValueError):
        small_model(noise_sigma=-0.1)


# --- trajectories -----------------------------------------------------------

def test_trajectory_grid_and_determinism():
    model = small_model(seed=7)
    traj_a = gen_trajectory(model, 11)
    traj_b = gen_trajectory(model, 11)
    assert len(traj_a) == 11
    lams = [lam for lam, _ in traj_a]
    np.testing.assert_allclose(lams, np.linspace(0.0, 1.0, 11))
    for (_, ea), (_, eb) in zip(traj_a, traj_b):
        np.testing.assert_array_equal(ea, eb)


def test_trajectory_too_short():
    with pytest.raises(TooShortError):
        gen_trajectory(small_model(), 1)


def test_measure_snr_rejects_zero_noise():
    model = small_model(noise_sigma=0.0)
    traj = gen_trajectory(model, 10)
    with pytest.raises(DegenerateNoiseError):
        measure_snr(traj, model.e_start, model.direction, 0.8)


def test_snr_gain_matches_inverse_square_law():
    """Quick desk check at one alpha; the acceptance suite sweeps three."""
    rng = np.random.default_rng(1)
    d_vec = rng.normal(size=16)
    d_vec /= np.linalg.norm(d_vec)
    d = TaskDirection.from_vector(d_vec)
    model = LatentTaskModel(e_start=rng.normal(size=16), direction=d,
                            noise_sigma=0.1, seed=1)
    traj = gen_trajectory(model, 2000)
    raw, proj = measure_snr(traj, model.e_start, d, alpha=0.8)
    assert proj / raw == pytest.approx((1 - 0.8) ** -2, rel=0.05)


def test_violation_rate_oracles():
    assert monotonicity_violation_rate([1.0, 2.0, 3.0]) == 0.0
    assert monotonicity_violation_rate([3.0, 2.0, 1.0]) == 1.0
    assert monotonicity_violation_rate([0.1, 0.3, 0.2, 0.4]) == pytest.approx(1 / 3)


def test_violation_rate_too_short():
    with pytest.raises(TooShortError):
        monotonicity_violation_rate([1.0])


# --- gridworld --------------------------------------------------------------

def test_grid_defaults_and_reset():
    env = GridWorld(size=20)
    state, steps = env.reset()
    assert state == (0, 0) and steps == 0
    assert env.goal == (19, 19)


def test_wall_moves_are_no_ops():
    env = GridWorld(size=5)
    state, r, done = env.step((0, 0), "up", 0)
    assert state == (0, 0) and r == 0.0 and not done
    state, _, _ = env.step((0, 0), "left", 0)
    assert state == (0, 0)


def test_goal_step_rewards_and_terminates():
    env = GridWorld(size=5, max_steps=100)
    state, r, done = env.step((4, 3), "down", 10)
    assert state == (4, 4) and r == 1.0 and done


def test_budget_exhaustion_terminates_without_reward():
    env = GridWorld(size=5, max_steps=3)
    _, r, done = env.step((1, 1), "right", 2)
    assert done and r == 0.0


def test_unknown_action():
    env = GridWorld(size=5)
    with pytest.raises(InvalidActionError):
        env.step((0, 0), "jump", 0)


def test_progress_oracles():
    env = GridWorld(size=5)
    assert env.progress((0, 0)) == 0.0
    assert env.progress((4, 4)) == 1.0
    assert env.progress((2, 2)) == pytest.approx(0.5)


def test_action_order_is_stable():
    # the tie-break contract in the agent depends on this exact order
    assert ACTIONS == ("up", "down", "left", "right")


def test_grid_embedding_noise_free_start():
    env = GridWorld(size=5)
    model = small_model(noise_sigma=0.0)
    rng = np.random.default_rng(0)
    np.testing.assert_allclose(grid_embedding(env, (0, 0), model, rng),
                               model.e_start)


# --- viewpoints -------------------------------------------------------------

def test_viewpoint_offsets_switch_per_block():
    offsets = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    vm = ViewpointModel(view_offsets=offsets, switch_period=5, seed=0)
    per_step = vm.offsets_for(20)
    assert len(per_step) == 20
    for block in range(4):
        chunk = per_step[5 * block:5 * (block + 1)]
        for off in chunk[1:]:
            np.testing.assert_array_equal(off, chunk[0])


def test_viewpoint_shift_adds_offsets():
    model = small_model(noise_sigma=0.0)
    traj = gen_trajectory(model, 6)
    off = np.array([10.0, 0.0, 0.0, 0.0])
    vm = ViewpointModel(view_offsets=[off], switch_period=3, seed=0)
    shifted = viewpoint_shift(traj, vm)
    for (lam_a, e_a), (lam_b, e_b) in zip(traj, shifted):
        assert lam_a == lam_b
        np.testing.assert_allclose(e_b - e_a, off)


def test_viewpoint_validation():
    with pytest.raises(EmptyOffsetsError):
        ViewpointModel(view_offsets=[])
    with pytest.raises(BadDimensionError):
        ViewpointModel(view_offsets=[np.array([1.0, 0.0]),
                                     np.array([1.0, 0.0, 0.0])])
    with pytest.raises(ValueError):
        ViewpointModel(view_offsets=[np.array([1.0, 0.0])], switch_period=0)
