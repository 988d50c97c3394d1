"""Acceptance gate: one test (and one printed pass/fail line) per criterion.

Each criterion re-runs the corresponding verification check and enforces
its runtime budget, so `pytest tests/test_acceptance.py -s` prints the
full scorecard.
"""
import struct
import time

import numpy as np
import pytest

from taskshape import verify
from taskshape.dataio import (
    DatasetEntry,
    EmbeddingDataset,
    read_dataset,
    write_dataset,
)
from taskshape.errors import (
    BadMagicError,
    DatasetFormatError,
    TruncatedError,
    UnsupportedVersionError,
)


def report(name, passed, elapsed, budget):
    status = "PASS" if passed else "FAIL"
    print(f"[{status}] {name}  ({elapsed:.1f}s, budget {budget:.0f}s)")


def run_with_budget(check_fn, name, budget, **kwargs):
    t0 = time.time()
    result = check_fn(**kwargs)
    elapsed = time.time() - t0
    report(name, result["passed"] and elapsed < budget, elapsed, budget)
    assert result["passed"], result
    assert elapsed < budget, f"{name} took {elapsed:.1f}s, budget {budget}s"
    return result


def test_snr_gain_inverse_square_law():
    result = run_with_budget(verify.check_snr_gain, "snr-gain", 5.0)
    for alpha, entry in result["per_alpha"].items():
        assert entry["ratio"] == pytest.approx((1 - alpha) ** -2, rel=0.05)


def test_snr_check_has_teeth():
    """Mutation probe: a miswired projector alpha must fail the check."""
    broken = verify.check_snr_gain(applied_alpha_offset=0.1)
    assert not broken["passed"]


def test_monotonicity_projection_cleans_raw_violations():
    result = run_with_budget(verify.check_monotonicity, "monotonicity", 10.0)
    assert result["raw_violation_rate"] > 0.25
    assert result["projected_violation_rate"] < 0.05


def test_noise_floor_matches_quantile_level():
    result = run_with_budget(verify.check_noise_floor, "noise-floor", 2.0)
    assert result["fraction_above"] == pytest.approx(0.03, abs=0.01)


def test_gate_midpoint_and_published_defaults():
    t0 = time.time()
    result = verify.check_gate_and_defaults()
    report("gate-and-defaults", result["passed"], time.time() - t0, 1.0)
    assert result["passed"], result["checks"]


def test_stage_machine_against_brute_force_oracle():
    t0 = time.time()
    result = verify.check_stage_machine()
    report("stage-machine", result["passed"], time.time() - t0, 5.0)
    assert result["cases"] == 256
    assert result["failures"] == []


def test_disentanglement_gradients_and_separation():
    result = run_with_budget(verify.check_disentanglement,
                             "disentanglement", 60.0)
    assert result["grad_check_max_rel_error"] < 1e-4
    assert result["scene_consistency"] >= 0.95
    assert result["scene_gap"] >= 0.3
    assert result["diag_dominance_stage3"] > result["diag_dominance_stage2"]


def test_gridworld_shaping_halves_episodes_to_success():
    result = run_with_budget(verify.check_gridworld, "gridworld", 60.0)
    assert (result["shaped_median_episodes"]
            <= 0.5 * result["sparse_median_episodes"])


def test_viewpoint_alignment_collapses_reward_variance():
    result = run_with_budget(verify.check_viewpoint_robustness,
                             "viewpoint", 5.0)
    assert result["ratio"] <= 0.10


def test_file_format_hundred_random_round_trips(tmp_path):
    t0 = time.time()
    rng = np.random.default_rng(42)
    kinds = ("text", "image")
    for case in range(100):
        dim = int(rng.integers(2, 9))
        count = int(rng.integers(0, 6))
        ds = EmbeddingDataset(
            dim=dim,
            entries=[DatasetEntry(
                id=f"case{case}-e{i}",
                kind=kinds[int(rng.integers(2))],
                values=rng.normal(size=dim).astype(np.float32))
                for i in range(count)],
            metadata={"case": str(case)})
        p1 = tmp_path / f"{case}a.mrvl"
        p2 = tmp_path / f"{case}b.mrvl"
        write_dataset(ds, p1)
        write_dataset(read_dataset(p1), p2)
        assert p1.read_bytes() == p2.read_bytes(), f"case {case} not stable"
    report("file-format-round-trip", True, time.time() - t0, 10.0)


def test_file_format_corrupt_headers_all_rejected(tmp_path):
    good = tmp_path / "good.mrvl"
    write_dataset(EmbeddingDataset(
        dim=2, entries=[DatasetEntry(id="a", kind="text",
                                     values=[1.0, 2.0])]), good)
    blob = good.read_bytes()

    cases = {
        "magic": (b"XXXX" + blob[4:], BadMagicError),
        "version": (blob[:4] + struct.pack("<I", 2) + blob[8:],
                    UnsupportedVersionError),
        "header-cut": (blob[:10], TruncatedError),
        "entry-cut": (blob[:20], TruncatedError),
        # an inflated count walks into garbage: either the reader runs out
        # of bytes or trips over an invalid kind byte, both format errors
        "count-overrun": (blob[:12] + struct.pack("<I", 50) + blob[16:],
                          DatasetFormatError),
    }
    for name, (corrupted, expected) in cases.items():
        bad = tmp_path / f"{name}.mrvl"
        bad.write_bytes(corrupted)
        with pytest.raises(expected):
            read_dataset(bad)
        # every format error shares the documented base class
        with pytest.raises(DatasetFormatError):
            read_dataset(bad)
    report("file-format-fuzz", True, 0.0, 1.0)
