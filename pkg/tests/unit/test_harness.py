# tests/unit/test_harness.py

import csv
import json

import numpy as np
import pytest

from pncsim.errors import ConstructionError
from pncsim.operations.harness import (
    CSV_HEADER,
    SimContext,
    aggregate,
    atomic_write,
    build_code_from_config,
    ebn0_to_sigma2,
    format_csv,
    frame_rng,
    manifest_path,
    parse_ebn0,
    pool_points,
    run_point,
    run_trial,
    sweep,
)
from pncsim.schemas import FrameOutcome, SimConfig


def rect_config(**overrides):
    params = dict(code="cyclic-eg", n=15, pulse="rectangular", delta_theta=0.7,
                  ebn0_db=[3.0], frames=5, seed=7)
    params.update(overrides)
    return SimConfig(**params)


def outcome(frame_index, bit_errors):
    return FrameOutcome(snr_index=0, frame_index=frame_index, iota=0, bit_errors=bit_errors,
                        frame_error=bit_errors > 0, converged=bit_errors == 0,
                        outer_iters=1, inner_iters=2)


# ---------------------------------------------
# Noise scaling and parsing
# ---------------------------------------------

@pytest.mark.parametrize(
    "ebn0_db, rate, expected",
    [
        (0.0, 0.5, 1.0),
        (10.0, 0.5, 0.1),
        (3.0103, 0.5, 0.5),
        (0.0, 1.0, 0.5),
    ],
    ids=["zero_db", "ten_db", "three_db", "rate_one"],
)
def test_ebn0_to_sigma2(ebn0_db, rate, expected):
    assert ebn0_to_sigma2(ebn0_db, rate) == pytest.approx(expected, rel=1e-4)


def test_ebn0_to_sigma2_rejects_bad_rate():
    for rate in (0.0, 1.5):
        with pytest.raises(ValueError):
            ebn0_to_sigma2(1.0, rate)


@pytest.mark.parametrize(
    "text, expected",
    [
        ("1:2:0.5", [1.0, 1.5, 2.0]),
        ("0:0.3:0.1", [0.0, 0.1, 0.2, 0.3]),
        ("2", [2.0]),
        ("1, 3,5", [1.0, 3.0, 5.0]),
    ],
    ids=["range", "float_range", "single", "list"],
)
def test_parse_ebn0(text, expected):
    assert parse_ebn0(text) == expected


@pytest.mark.parametrize("text", ["2:1:0.5", "1:2:0", "1:2", ","], ids=["reversed", "zero_step", "short", "empty"])
def test_parse_ebn0_invalid(text):
    with pytest.raises(ValueError):
        parse_ebn0(text)


def test_frame_rng_is_keyed_by_coordinates():
    first = frame_rng(3, 1, 4).integers(0, 1 << 30, size=5)
    again = frame_rng(3, 1, 4).integers(0, 1 << 30, size=5)
    other = frame_rng(3, 1, 5).integers(0, 1 << 30, size=5)
    np.testing.assert_array_equal(first, again)
    assert not np.array_equal(first, other)


def test_crc_needs_room_in_the_message():
    with pytest.raises(ConstructionError):
        build_code_from_config(rect_config(crc=True))


@pytest.mark.parametrize(
    "overrides",
    [{"code": "alist:{missing}", "n": 1008}, {"code": "mn-regular", "n": 24, "generator_poly_path": "{missing}"}],
    ids=["alist", "generator_polynomial"],
)
def test_unreadable_code_file_is_a_construction_error(tmp_path, overrides):
    missing = str(tmp_path / "absent.txt")
    params = {key: value.format(missing=missing) if isinstance(value, str) else value
              for key, value in overrides.items()}
    with pytest.raises(ConstructionError, match="cannot read") as excinfo:
        build_code_from_config(rect_config(**params))
    assert missing not in str(excinfo.value)


# ---------------------------------------------
# Trials
# ---------------------------------------------

def test_run_trial_is_deterministic():
    cfg = rect_config(ebn0_db=[1.0])
    ctx = SimContext.from_config(cfg)
    assert run_trial(cfg, 0, 3, ctx) == run_trial(cfg, 0, 3, ctx)


def test_run_trial_clean_channel_has_no_errors():
    cfg = rect_config(ebn0_db=[30.0])
    ctx = SimContext.from_config(cfg)
    for i in range(5):
        out = run_trial(cfg, 0, i, ctx)
        assert out.bit_errors == 0 and out.converged, f"Frame {i} failed: {out}"
        assert not out.delay_attempted and out.recovered_a is None


@pytest.mark.parametrize("decoder", ["gspa", "jcnc"])
def test_run_trial_shifted_frame_with_crc(decoder):
    cfg = rect_config(n=63, ebn0_db=[30.0], crc=True, iota=2, iota_max=3, decoder=decoder)
    ctx = SimContext.from_config(cfg)
    out = run_trial(cfg, 0, 0, ctx)
    assert out.iota == 2
    assert out.bit_errors == 0, f"Expected the shifted XOR to decode, got {out.bit_errors} errors"
    assert out.delay_attempted and out.delay_resolved
    assert out.recovered_a and out.recovered_b


def test_random_offsets_stay_in_range():
    cfg = rect_config(n=63, ebn0_db=[30.0], iota_mode="random", iota_max=3)
    ctx = SimContext.from_config(cfg)
    offsets = {run_trial(cfg, 0, i, ctx).iota for i in range(12)}
    assert offsets <= set(range(-3, 4))


# ---------------------------------------------
# Aggregation and sweeps
# ---------------------------------------------

def test_aggregate_counts():
    point = aggregate(2.0, 15, [outcome(0, 0), outcome(1, 3), outcome(2, 1)])
    assert point.frames_run == 3
    assert point.xor_bit_errors == 4
    assert point.xor_ber == pytest.approx(4 / 45)
    assert point.frame_errors == 2 and point.fer == pytest.approx(2 / 3)
    assert point.mean_inner_iters == 2.0


def test_run_point_matches_individual_trials():
    cfg = rect_config(ebn0_db=[1.5], frames=6)
    ctx = SimContext.from_config(cfg)
    expected = aggregate(1.5, 15, [run_trial(cfg, 0, i, ctx) for i in range(6)])
    assert run_point(ctx, 0) == expected


def test_split_runs_pool_to_the_full_run():
    cfg = rect_config(ebn0_db=[0.5], frames=8, max_frame_errors=100)
    full = run_point(SimContext.from_config(cfg), 0)
    halves = [run_point(SimContext.from_config(cfg.model_copy(update={"first_frame": start, "frames": 4})), 0)
              for start in (0, 4)]
    pooled = pool_points(halves, 15)
    assert pooled.frames_run == full.frames_run == 8
    assert pooled.xor_bit_errors == full.xor_bit_errors
    assert pooled.frame_errors == full.frame_errors
    assert pooled.xor_ber == pytest.approx(full.xor_ber)
    assert pooled.mean_inner_iters == pytest.approx(full.mean_inner_iters)


def test_first_frame_offsets_the_frame_keys():
    cfg = rect_config(ebn0_db=[1.0], frames=2, first_frame=3)
    ctx = SimContext.from_config(cfg)
    expected = aggregate(1.0, 15, [run_trial(cfg, 0, i, ctx) for i in (3, 4)])
    assert run_point(ctx, 0) == expected


def test_pool_points_rejects_mixed_snr():
    with pytest.raises(ValueError):
        pool_points([aggregate(1.0, 15, [outcome(0, 0)]), aggregate(2.0, 15, [outcome(1, 0)])], 15)


def test_early_stop_at_error_budget():
    cfg = rect_config(ebn0_db=[-5.0], frames=50, max_frame_errors=2)
    point = run_point(SimContext.from_config(cfg), 0)
    assert point.frame_errors == 2
    assert point.frames_run < 50


def test_worker_count_does_not_change_results():
    serial = sweep(rect_config(ebn0_db=[0.0, 2.0], frames=6))
    parallel = sweep(rect_config(ebn0_db=[0.0, 2.0], frames=6, workers=2))
    assert serial.points == parallel.points


def test_sweep_writes_csv_and_manifest(tmp_path):
    out = tmp_path / "run" / "ber.csv"
    result = sweep(rect_config(ebn0_db=[1.0, 30.0], frames=4), out)

    with open(out, newline="") as handle:
        rows = list(csv.reader(handle))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 3
    assert [float(r[0]) for r in rows[1:]] == [1.0, 30.0]
    for row in rows[1:]:
        assert int(row[4]) <= int(row[1])

    manifest = json.loads(manifest_path(out).read_text())
    assert manifest["n"] == 15 and manifest["k"] == 7
    assert manifest["h_sha256"] == result.manifest.h_sha256
    assert manifest["config"]["seed"] == 7
    assert sorted(p.name for p in out.parent.iterdir()) == ["ber.csv", "ber.manifest.json"]


def test_format_csv_round_trips_floats():
    point = aggregate(0.1, 7, [outcome(0, 1), outcome(1, 0), outcome(2, 0)])
    row = format_csv([point]).splitlines()[1].split(",")
    assert float(row[3]) == point.xor_ber


def test_atomic_write_replaces_file(tmp_path):
    path = tmp_path / "x.csv"
    atomic_write(path, "old")
    atomic_write(path, "new")
    assert path.read_text() == "new"
    assert [p.name for p in tmp_path.iterdir()] == ["x.csv"]


def test_manifest_path():
    assert manifest_path("out/ber.csv").name == "ber.manifest.json"
