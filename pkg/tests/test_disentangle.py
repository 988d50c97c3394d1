"""Loss terms, hand-written gradients, and the scene-view trainer."""
import math

import numpy as np
import pytest

from taskshape import disentangle
from taskshape.disentangle import (
    FactorDataset,
    LossWeights,
    SwapBatch,
    ToyDecoder,
    ToyEncoders,
    build_batch,
    consistency_loss,
    grad_check,
    infonce_loss,
    loss_and_grad,
    make_factor_dataset,
    recon_loss,
    scene_text_diag_dominance,
    shuffle_loss,
    train,
)
from taskshape.errors import DimMismatchError, EmptyBatchError


# --- individual loss terms --------------------------------------------------

def test_recon_loss_oracle():
    assert recon_loss(np.array([[0.0, 0.0]]), np.array([[3.0, -1.0]])) == 2.0


def test_recon_loss_shape_mismatch():
    with pytest.raises(DimMismatchError):
        recon_loss(np.zeros((2, 3)), np.zeros((2, 4)))


def test_infonce_oracle_two_classes():
    z = np.array([[1.0, 0.0], [0.0, 1.0]])
    anchors = np.array([[2.0, 0.0], [0.0, 2.0]])
    expected = math.log(1.0 + math.exp(-2.0))   # ln(e^2 + 1) - 2
    assert infonce_loss(z, anchors, tau=1.0) == pytest.approx(expected)


def test_infonce_uniform_logits_give_log_k():
    z = np.ones((3, 2))
    anchors = np.ones((3, 2))
    assert infonce_loss(z, anchors, tau=0.5) == pytest.approx(math.log(3))


def test_infonce_needs_a_batch():
    with pytest.raises(EmptyBatchError):
        infonce_loss(np.ones((1, 2)), np.ones((1, 2)), tau=1.0)


def test_consistency_loss_identical_codes():
    z = np.array([1.0, 2.0])
    assert consistency_loss((z, z), (z, z)) == pytest.approx(0.0)


def test_consistency_loss_orthogonal_codes():
    a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert consistency_loss((a, b), (a, b)) == pytest.approx(2.0)


def test_shuffle_loss_zero_when_swaps_match():
    rng = np.random.default_rng(0)
    dec = ToyDecoder.init_random(6, 2, 2, rng)
    zs = rng.normal(size=(4, 2))
    zv = rng.normal(size=(4, 2))
    assert shuffle_loss(dec, zs, zs, zv, zv) == pytest.approx(0.0)


def test_loss_weights_defaults():
    w = LossWeights()
    assert w.lambda_shuffle == 1.0
    assert w.lambda_scene_consistency == 1.0
    assert w.lambda_view_consistency == 0.25
    assert w.scene_contrastive == 1.0
    assert w.view_contrastive == 0.25
    assert w.tau == 0.07
    assert w.lambda_clip_schedule == (0.0, 0.5, 1.0)


def test_clip_schedule_must_be_nondecreasing():
    with pytest.raises(ValueError):
        LossWeights(lambda_clip_schedule=(1.0, 0.5))


def test_clip_weight_saturates_past_schedule_end():
    w = LossWeights()
    assert w.clip_weight(0) == 0.0
    assert w.clip_weight(2) == 1.0
    assert w.clip_weight(7) == 1.0


# --- dataset and batches ----------------------------------------------------

def test_factor_dataset_needs_two_of_each():
    with pytest.raises(ValueError):
        FactorDataset(observations=np.zeros((1, 4, 8)), texts=np.zeros((1, 3)),
                      n_scenes=1, n_views=4)


def test_make_factor_dataset_shapes_and_determinism():
    ds_a = make_factor_dataset(n_scenes=5, n_views=3, data_dim=12, seed=4)
    ds_b = make_factor_dataset(n_scenes=5, n_views=3, data_dim=12, seed=4)
    assert ds_a.observations.shape == (5, 3, 12)
    np.testing.assert_array_equal(ds_a.observations, ds_b.observations)
    np.testing.assert_allclose(np.linalg.norm(ds_a.texts, axis=1), 1.0)


def test_build_batch_pairs_differ():
    ds = make_factor_dataset(seed=0)
    rng = np.random.default_rng(0)
    batch = build_batch(ds, 64, rng)
    # scene swap must pick a genuinely different scene, same for views
    assert not np.any(np.all(batch.x_im == batch.x_jm, axis=1))
    assert not np.any(np.all(batch.x_im == batch.x_in, axis=1))


def test_build_batch_rejects_empty():
    ds = make_factor_dataset(seed=0)
    with pytest.raises(EmptyBatchError):
        build_batch(ds, 0, np.random.default_rng(0))


# --- gradients --------------------------------------------------------------

def test_backprop_matches_finite_differences():
    rng = np.random.default_rng(11)
    ds = make_factor_dataset(seed=11)
    enc = ToyEncoders.init_random(ds.data_dim, ds.texts.shape[1], 3, rng)
    dec = ToyDecoder.init_random(ds.data_dim, enc.W_s.shape[1],
                                 enc.W_v.shape[1], rng)
    batch = build_batch(ds, 8, rng)
    err = grad_check(enc, dec, batch, LossWeights(), clip_stage_index=2,
                     seed=11)
    assert err < 1e-4


def test_grad_check_epsilon_range():
    rng = np.random.default_rng(0)
    ds = make_factor_dataset(seed=0)
    enc = ToyEncoders.init_random(ds.data_dim, ds.texts.shape[1], 3, rng)
    dec = ToyDecoder.init_random(ds.data_dim, enc.W_s.shape[1],
                                 enc.W_v.shape[1], rng)
    batch = build_batch(ds, 4, rng)
    with pytest.raises(ValueError):
        grad_check(enc, dec, batch, LossWeights(), epsilon=1.0)


def test_decoder_only_mode_freezes_encoders():
    rng = np.random.default_rng(2)
    ds = make_factor_dataset(seed=2)
    enc = ToyEncoders.init_random(ds.data_dim, ds.texts.shape[1], 3, rng)
    dec = ToyDecoder.init_random(ds.data_dim, enc.W_s.shape[1],
                                 enc.W_v.shape[1], rng)
    batch = build_batch(ds, 8, rng)
    _, _, grads = loss_and_grad(enc, dec, batch, LossWeights(), 0,
                                decoder_only=True)
    assert np.all(grads["W_s"] == 0.0) and np.all(grads["W_v"] == 0.0)
    assert np.any(grads["W_d"] != 0.0)


# --- training ---------------------------------------------------------------

def test_train_history_and_determinism():
    ds = make_factor_dataset(seed=1)
    res_a = train(ds, stage_epochs=(5, 5, 5), seed=1)
    res_b = train(ds, stage_epochs=(5, 5, 5), seed=1)
    assert len(res_a.history) == 15
    assert [h["stage"] for h in res_a.history] == [0] * 5 + [1] * 5 + [2] * 5
    np.testing.assert_array_equal(res_a.encoders.W_s, res_b.encoders.W_s)
    assert set(res_a.diag_dominance_by_stage) == {0, 1, 2}


def test_training_separates_scenes():
    ds = make_factor_dataset(noise=0.0, seed=0)
    res = train(ds, seed=0)
    metrics = disentangle.disentanglement_metrics(res.encoders, ds)
    assert metrics["scene_consistency"] >= 0.95
    assert metrics["scene_consistency"] - metrics["cross_scene_similarity"] >= 0.3


def test_clip_stage_raises_text_alignment():
    ds = make_factor_dataset(noise=0.0, seed=0)
    res = train(ds, seed=0)
    assert res.diag_dominance_by_stage[2] > res.diag_dominance_by_stage[1]


def test_diag_dominance_is_bounded():
    ds = make_factor_dataset(seed=3)
    rng = np.random.default_rng(3)
    enc = ToyEncoders.init_random(ds.data_dim, ds.texts.shape[1], 3, rng)
    dd = scene_text_diag_dominance(enc, ds)
    assert -2.0 <= dd <= 2.0
