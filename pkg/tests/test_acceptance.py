"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

The Monte-Carlo criteria share a few BER sweeps that are computed once per
session and written to ``acceptance_results/`` for inspection.
``ORTHO_ACCEPT_FRAMES`` sets the per-point frame cap (default 2000) and
``ORTHO_ACCEPT_ERRORS`` the error target (default 100).
"""

import math
import os
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from conftest import report_criterion
from orthoprecoding.channel import PRESETS, ScatteringConfig, covariance_flat, draw_paths, realize
from orthoprecoding.frame import FrameConfig, default_pilot_pattern
from orthoprecoding.hardening import GammaDistribution, gamma_monte_carlo, gamma_variance, ks_statistic
from orthoprecoding.precoding import make_basis
from orthoprecoding.receiver import effective_gamma
from orthoprecoding.selftest import run_selftest
from orthoprecoding.sim import LinkContext, SimulationPlan, ebn0_at_ber, run_point, select, write_records

MAX_FRAMES = int(os.environ.get("ORTHO_ACCEPT_FRAMES", 2000))
MIN_ERRORS = int(os.environ.get("ORTHO_ACCEPT_ERRORS", 100))
RESULTS_DIR = Path(__file__).resolve().parents[1] / "acceptance_results"
SCENARIO = "v200"
# The reference results are stated for "a rate-1/2 convolutional code" only. The
# memory-2 (5, 7) code reproduces them; with the stronger K=7 default coded OFDM
# already collects most of the diversity and the precoding gain shrinks.
CODE = dict(generators=(0o5, 0o7), constraint_length=3)
GRID = [5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0]
FLOOR = 5e-5  # stop a curve once every iteration is below this

pytestmark = pytest.mark.acceptance


def sweep(basis, estimation, n_iterations, reference=None, seed=2024):
    """BER curve over GRID.

    With ``reference`` records, every Eb/N0 point the reference covers runs
    exactly the same frames (common random numbers), so paired differences
    are not swamped by the rare frames that dominate the error count.
    """
    plan = SimulationPlan(
        frame=FrameConfig(n_iterations=n_iterations),
        scenarios=[SCENARIO],
        bases=[basis],
        estimation=estimation,
        ebn0_db=GRID,
        min_errors=MIN_ERRORS,
        max_frames=MAX_FRAMES,
        seed=seed,
        **CODE,
    )
    ctx = LinkContext(plan, SCENARIO, basis)
    records = []
    paired = {r.ebn0_db: r.frames for r in select(reference or [], iteration=1)}
    for idx, ebn0 in enumerate(GRID):
        point_plan = plan
        if ebn0 in paired:
            point_plan = replace(plan, min_frames=paired[ebn0], max_frames=paired[ebn0], min_errors=1)
        recs = run_point(point_plan, SCENARIO, basis, ebn0, idx, context=ctx)
        records.extend(recs)
        if all(r.ber < FLOOR for r in recs) and ebn0 >= max(paired, default=-math.inf):
            break
    return records


_CACHE = {}
REFERENCE = ("dsft", "perfect-csi", 4)  # every other curve is paired with this one


def curves(basis, estimation="perfect-csi", n_iterations=4):
    key = (basis, estimation, n_iterations)
    if key not in _CACHE:
        ref = None if key == REFERENCE else curves(*REFERENCE)
        _CACHE[key] = sweep(basis, estimation, n_iterations, reference=ref)
        RESULTS_DIR.mkdir(exist_ok=True)
        write_records(RESULTS_DIR / f"{SCENARIO}_{basis}_{estimation}.csv", _CACHE[key])
    return _CACHE[key]


def crossing(records, iteration, target=1e-4):
    return ebn0_at_ber(select(records, iteration=iteration), target)


def crossing_band(records, iteration, target=1e-4):
    """Crossings of the lower and upper 95% BER envelopes (early, late)."""
    pts = select(records, iteration=iteration)
    x = np.array([r.ebn0_db for r in pts])
    ber = np.array([max(r.errors, 0.5) / r.bits for r in pts])
    hw = np.array([r.confidence_halfwidth() for r in pts])
    out = []
    for y in (np.maximum(ber - hw, ber * 0.05), ber + hw):
        ly, t = np.log10(y), math.log10(target)
        val = float("nan")
        for i in range(len(x) - 1):
            if ly[i] >= t >= ly[i + 1] and ly[i] != ly[i + 1]:
                val = x[i] + (t - ly[i]) * (x[i + 1] - x[i]) / (ly[i + 1] - ly[i])
                break
        out.append(val)
    return tuple(out)


def test_criterion_1_table_reproduction():
    cfg = FrameConfig()
    N, M = cfg.grid_shape
    expected = {"non-selective": 1.00, "time-selective": 0.76, "frequency-selective": 0.09, "doubly-selective": 0.07}
    got = {k: gamma_variance(covariance_flat(*PRESETS[k], M, N)) for k in expected}
    ok = all(abs(got[k] - v) <= (0.05 if k == "non-selective" else 0.02) for k, v in expected.items())
    detail = " ".join(f"{k}={got[k]:.3f}(ref {v:.2f})" for k, v in expected.items())
    assert report_criterion(1, ok, detail), detail


def test_criterion_2_constant_modulus_equivalence():
    cfg = FrameConfig()
    pattern = default_pilot_pattern(cfg)
    dsft, wht = make_basis("dsft", cfg), make_basis("wht", cfg)
    scat = ScatteringConfig.from_physical(cfg, 200)
    rng = np.random.default_rng(7)
    gamma_err = 0.0
    for _ in range(100):
        g = pattern.data_part(realize(draw_paths(scat, rng), cfg).vector)
        gamma_err = max(gamma_err, np.abs(effective_gamma(dsft, g) - effective_gamma(wht, g)).max())
    a, b = curves("dsft"), curves("wht")
    worst = 0.0
    for ra, rb in zip(select(a, iteration=3), select(b, iteration=3)):
        assert ra.ebn0_db == rb.ebn0_db
        se = math.hypot(ra.confidence_halfwidth(), rb.confidence_halfwidth())
        diff = abs(ra.ber - rb.ber)
        if diff > 0:
            worst = max(worst, diff / se if se > 0 else math.inf)
    ok = gamma_err <= 1e-12 and worst <= 1.0
    detail = f"max|gamma_dsft-gamma_wht|={gamma_err:.1e}; worst BER gap = {worst:.2f} x combined 95% CI"
    assert report_criterion(2, ok, detail), detail


def test_criterion_3_gain_over_ofdm():
    ofdm, op = curves("none"), curves("dsft")
    gap4 = crossing(ofdm, 1) - crossing(op, 3, 1e-4)
    gap3 = crossing(ofdm, 1, 1e-3) - crossing(op, 3, 1e-3)
    gap4_it3 = crossing(ofdm, 3) - crossing(op, 3)
    ok = abs(gap4 - 4.8) <= 1.5 and gap3 >= 2.5
    detail = (
        f"gap@1e-4={gap4:.2f} dB (target 4.8+-1.5), gap@1e-3={gap3:.2f} dB (target >=2.5); "
        f"vs iterative OFDM receiver gap@1e-4={gap4_it3:.2f} dB"
    )
    assert report_criterion(3, ok, detail), detail


def test_criterion_4_iteration_gains():
    recs = curves("dsft")
    x = [crossing(recs, i) for i in (1, 2, 3, 4)]
    g2, g3, g4 = x[0] - x[1], x[1] - x[2], x[2] - x[3]
    ok = abs(g2 - 2.5) <= 1.0 and abs(g3 - 0.3) <= 0.3 and g4 < 0.2
    detail = f"crossings {['%.2f' % v for v in x]} dB; it2 gain={g2:.2f} it3 gain={g3:.2f} it4 gain={g4:.2f}"
    assert report_criterion(4, ok, detail), detail


def test_criterion_5_estimation_penalty():
    perfect = curves("dsft")
    estimated = curves("dsft", "iterative", 3)
    penalty = crossing(estimated, 3) - crossing(perfect, 3)
    ok = abs(penalty - 1.0) <= 0.5
    detail = f"iterative-estimation penalty @1e-4 = {penalty:.2f} dB (target 1.0+-0.5)"
    assert report_criterion(5, ok, detail), detail


def test_criterion_6_dps_ordering():
    dsft, dps = curves("dsft"), curves("dps2d")
    gain = crossing(dsft, 3) - crossing(dps, 3)
    dps_early, _ = crossing_band(dps, 3)
    _, dsft_late = crossing_band(dsft, 3)
    within = abs(gain - 0.2) <= 0.2
    ordered = dps_early <= dsft_late
    ok = within or ordered
    detail = (
        f"2DDPS gain over DSFT @1e-4 = {gain:.2f} dB (target 0.2+-0.2); "
        f"2DDPS early-envelope {dps_early:.2f} dB vs DSFT late-envelope {dsft_late:.2f} dB"
    )
    assert report_criterion(6, ok, detail), detail


def test_criterion_7_oracle_suite():
    results = run_selftest(seed=0)
    again = run_selftest(seed=0)
    deterministic = [r.error for r in results] == [r.error for r in again]
    failed = [r.name for r in results if not r.passed]
    ok = not failed and deterministic
    detail = f"{len(results) - len(failed)}/{len(results)} oracle checks passed; repeatable={deterministic}"
    if failed:
        detail += f"; failed: {failed}"
    assert report_criterion(7, ok, detail), detail


def test_criterion_8_gamma_distribution():
    cfg = FrameConfig()
    N, M = cfg.grid_shape
    scat = ScatteringConfig.preset("doubly-selective")
    mc = gamma_monte_carlo(scat, cfg, 10_000, seed=8)
    dist = GammaDistribution.from_covariance(covariance_flat(scat.nu_d, scat.theta_p, M, N))
    ks = ks_statistic(mc.gamma, dist)
    pv = mc.point_variance
    ok = ks <= 0.05 and abs(pv - 1) <= 0.05
    detail = f"KS={ks:.4f} (<=0.05) over 10^4 frames; per-point |g|^2 variance={pv:.3f} (1+-0.05)"
    assert report_criterion(8, ok, detail), detail
