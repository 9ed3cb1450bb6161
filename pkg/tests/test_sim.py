import json
import math

import numpy as np
import pytest

from orthoprecoding.frame import ConfigurationError, FrameConfig
from orthoprecoding.sim import (
    BerRecord,
    LinkContext,
    SimulationPlan,
    ebn0_at_ber,
    frame_seed,
    read_records,
    resolve_scenario,
    run_curves,
    run_point,
    run_sweep,
    select,
    write_records,
)

SMALL = FrameConfig(n_subcarriers=16, n_symbols=12, cp_length=4, n_pilot_symbols=2)


def small_plan(**kw):
    base = dict(frame=SMALL, scenarios=["doubly-selective"], bases=["dsft"], ebn0_db=[2.0, 6.0], max_frames=6)
    base.update(kw)
    return SimulationPlan(**base)


def test_validation():
    with pytest.raises(ConfigurationError):
        SimulationPlan(bases=[]).validate()
    with pytest.raises(ConfigurationError):
        SimulationPlan(ebn0_db=[]).validate()
    with pytest.raises(ConfigurationError):
        SimulationPlan(estimation="oracle").validate()
    with pytest.raises(ConfigurationError):
        SimulationPlan(min_errors=0).validate()
    with pytest.raises(ConfigurationError):
        SimulationPlan.from_dict({"bases": ["ofdm"]})
    with pytest.raises(ConfigurationError):
        SimulationPlan.from_dict({"colour": "red"})


def test_scenarios():
    assert resolve_scenario("doubly-selective", FrameConfig()).nu_d == 0.009
    v = resolve_scenario("v200", FrameConfig())
    assert v.pdp == "exponential" and v.nu_d == pytest.approx(0.00874, abs=1e-4)
    with pytest.raises(ConfigurationError):
        resolve_scenario("vfast", FrameConfig())


def test_plan_roundtrip(tmp_path):
    plan = small_plan(generators=(0o5, 0o7), constraint_length=3)
    path = tmp_path / "plan.json"
    path.write_text(json.dumps(plan.to_dict()))
    again = SimulationPlan.from_file(path)
    assert again == plan and again.config_hash() == plan.config_hash()


def test_frame_seed_is_order_free():
    a = frame_seed(1, 2, 3).generate_state(2)
    b = frame_seed(1, 2, 3).generate_state(2)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, frame_seed(1, 2, 4).generate_state(2))


def test_high_snr_is_error_free():
    plan = SimulationPlan(scenarios=["non-selective"], bases=["dsft"], ebn0_db=[60.0], max_frames=50, min_errors=1)
    recs = run_point(plan, "non-selective", "dsft", 60.0)
    assert all(r.errors == 0 and r.frames == 50 for r in recs)
    assert recs[0].stop_reason == "max_frames"


def test_stopping_rule_hits_min_errors():
    plan = small_plan(ebn0_db=[-2.0], min_errors=10, max_frames=500)
    recs = run_curves(plan)
    assert recs[-1].stop_reason == "min_errors" and recs[-1].errors >= 10
    assert recs[-1].frames % 25 == 0


def test_iterative_estimation_runs():
    recs = run_curves(small_plan(estimation="iterative", ebn0_db=[4.0], max_frames=4))
    assert [r.iteration for r in recs] == [1, 2, 3]
    assert all(r.bits == 4 * LinkContext(small_plan(), "doubly-selective", "dsft").n_info for r in recs)


def test_deterministic_files(tmp_path):
    plan = small_plan(bases=["dsft", "none"], estimation="pilot-only")
    a = run_sweep(plan, tmp_path / "a").read_bytes()
    b = run_sweep(plan, tmp_path / "b").read_bytes()
    assert a == b
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["config_hash"] == plan.config_hash()


def test_workers_do_not_change_results():
    plan = small_plan(ebn0_db=[3.0], max_frames=30)
    serial = [(r.errors, r.frames) for r in run_curves(plan, workers=1)]
    parallel = [(r.errors, r.frames) for r in run_curves(plan, workers=2)]
    assert serial == parallel


def test_records_roundtrip(tmp_path):
    recs = [BerRecord(1.0, "dsft", "v200", "perfect-csi", 1, 1000, 7, 2, 29, "max_frames")]
    write_records(tmp_path / "r.csv", recs)
    back = read_records(tmp_path / "r.csv")
    assert back == recs
    assert back[0].ber == pytest.approx(7e-3)


def test_confidence_halfwidth():
    # two frames with 2 and 4 errors out of 100 bits each
    rec = BerRecord(0.0, "dsft", "x", "perfect-csi", 1, 200, 6, 2, 20, "max_frames")
    assert rec.confidence_halfwidth() == pytest.approx(1.96 * math.sqrt(2 / 2) / 100)


def test_ebn0_at_ber_interpolates():
    recs = [
        BerRecord(0.0, "b", "s", "e", 1, 10_000, 100, 1, 0, ""),  # 1e-2
        BerRecord(2.0, "b", "s", "e", 1, 10_000, 1, 1, 0, ""),  # 1e-4
    ]
    assert ebn0_at_ber(recs, 1e-3) == pytest.approx(1.0)
    assert math.isnan(ebn0_at_ber(recs, 1e-6))
    assert select(recs[::-1], basis="b")[0].ebn0_db == 0.0
