"""Monte Carlo harness: determinism, oracle agreement, calibration, sweeps."""

import math

import numpy as np
import pytest

from crsense import (
    ChannelPlan,
    ImpairmentConfig,
    NonlinearityParams,
    OccupancyMap,
    PhaseNoiseParams,
    PrecisionError,
    ScenarioConfig,
    calibrate_threshold,
    estimate_roc,
    ideal_pd,
    ideal_pfa,
    ideal_threshold,
    mismatch_from_irr,
    pd_at_pfa,
    psd_stages,
    run_trials,
    sweep_impairment,
    wilson_interval,
)
from crsense.experiments import STAGE_NAMES

PLAN = ChannelPlan(4, 40)  # B=9, small and fast
IDEAL = ImpairmentConfig.ideal()


def _scenario(occupied=(1,), snr_db=0.0, plan=PLAN):
    return ScenarioConfig(plan, OccupancyMap(occupied), snr_db=snr_db, noise_psd=1.0)


# ----------------------------------------------------------------- run_trials

def test_run_trials_deterministic():
    sc = _scenario()
    a = run_trials(sc, IDEAL, 200, 11)
    b = run_trials(sc, IDEAL, 200, 11)
    assert np.array_equal(a.energies, b.energies)


def test_run_trials_worker_invariance():
    sc = _scenario()
    serial = run_trials(sc, IDEAL, 300, 12, workers=1)
    parallel = run_trials(sc, IDEAL, 300, 12, workers=2)
    assert np.array_equal(serial.energies, parallel.energies)


def test_run_trials_start_offset_changes_substreams():
    sc = _scenario()
    a = run_trials(sc, IDEAL, 100, 13, start_trial=0)
    b = run_trials(sc, IDEAL, 100, 13, start_trial=100)
    assert not np.array_equal(a.energies, b.energies)
    # but trials are indexed absolutely: batch [100,200) restarted matches
    c = run_trials(sc, IDEAL, 100, 13, start_trial=100)
    assert np.array_equal(b.energies, c.energies)


@pytest.mark.parametrize("n", [0, -5])
def test_run_trials_rejects_bad_counts(n):
    with pytest.raises(ValueError):
        run_trials(_scenario(), IDEAL, n, 1)


def test_run_trials_h0_mean_matches_noise_floor():
    sc = _scenario(occupied=())
    batch = run_trials(sc, IDEAL, 20000, 14)
    for k in PLAN.channels:
        ts = batch.energies_for(k)
        stderr = ts.std(ddof=1) / math.sqrt(ts.size)
        assert abs(ts.mean() - 1.0) < 3 * stderr


def test_run_trials_pfa_matches_gamma_oracle():
    sc = _scenario(occupied=())
    batch = run_trials(sc, IDEAL, 20000, 15)
    ts = batch.energies_for(1)
    for target in (0.3, 0.2, 0.1, 0.05, 0.02):
        lam = ideal_threshold(target, 1.0, PLAN.bins_per_channel)
        p_hat = np.count_nonzero(ts > lam) / ts.size
        stderr = math.sqrt(target * (1 - target) / ts.size)
        assert abs(p_hat - target) < 3 * stderr, f"target {target}: {p_hat}"


# --------------------------------------------------------------------- wilson

def test_wilson_interval_basics():
    lo, hi = wilson_interval(5, 50)
    assert 0.0 <= lo < 0.1 < hi <= 1.0
    assert wilson_interval(0, 10)[0] == 0.0
    assert wilson_interval(10, 10)[1] == 1.0
    with pytest.raises(ValueError):
        wilson_interval(11, 10)


# --------------------------------------------------------------- estimate_roc

def _h0_h1_batches(n=8000, seed=21, snr_db=0.0):
    h0 = run_trials(_scenario(occupied=(-2,), snr_db=snr_db), IDEAL, n, seed)
    h1 = run_trials(_scenario(occupied=(-2, 1), snr_db=snr_db), IDEAL, n, seed,
                    start_trial=n)
    return h0, h1


def test_estimate_roc_extreme_thresholds():
    h0, h1 = _h0_h1_batches(n=2000)
    top = float(max(h0.energies_for(1).max(), h1.energies_for(1).max())) + 1.0
    curve = estimate_roc(h0, h1, [0.0, top], channel=1)
    assert curve.points[0].pfa == 0.0 and curve.points[0].pd == 0.0
    assert curve.points[-1].pfa == 1.0 and curve.points[-1].pd == 1.0


def test_estimate_roc_matches_gamma_curve():
    h0, h1 = _h0_h1_batches(n=20000, seed=22)
    bins = PLAN.bins_per_channel
    lams = [ideal_threshold(p, 1.0, bins) for p in (0.05, 0.1, 0.2, 0.4, 0.6)]
    curve = estimate_roc(h0, h1, lams, channel=1)
    for point in curve.points:
        pfa = ideal_pfa(point.threshold, 1.0, bins)
        pd = ideal_pd(point.threshold, 1.0, 1.0, bins)
        assert point.pfa_lo <= pfa <= point.pfa_hi, f"pfa at {point.threshold}"
        assert point.pd_lo <= pd <= point.pd_hi, f"pd at {point.threshold}"


def test_estimate_roc_monotone_and_dominating():
    h0, h1 = _h0_h1_batches(n=5000, seed=23, snr_db=3.0)
    lams = np.linspace(0.2, 2.5, 12)
    curve = estimate_roc(h0, h1, lams, channel=1)
    # thresholds descending -> both coordinates nondecreasing
    assert np.all(np.diff(curve.pfa) >= 0)
    assert np.all(np.diff(curve.pd) >= 0)
    # positive SNR, no impairments: detection dominates false alarm
    slack = 3.0 / math.sqrt(curve.n_h0)
    assert np.all(curve.pd >= curve.pfa - slack)


def test_estimate_roc_validation():
    h0, h1 = _h0_h1_batches(n=200)
    with pytest.raises(ValueError):
        estimate_roc(h0, h1, [], channel=1)
    with pytest.raises(ValueError):
        estimate_roc(h1, h0, [1.0], channel=1)   # hypotheses swapped
    other = run_trials(_scenario(plan=ChannelPlan(4, 48), occupied=()),
                       IDEAL, 200, 1)
    with pytest.raises(ValueError):
        estimate_roc(other, h1, [1.0], channel=1)


def test_pd_at_pfa_interpolates():
    h0, h1 = _h0_h1_batches(n=5000, seed=24, snr_db=5.0)
    lams = [ideal_threshold(p, 1.0, PLAN.bins_per_channel)
            for p in (0.02, 0.05, 0.1, 0.2, 0.4)]
    curve = estimate_roc(h0, h1, lams, channel=1)
    mid = pd_at_pfa(curve, 0.1)
    assert 0.0 <= mid <= 1.0
    assert pd_at_pfa(curve, 0.999) >= mid


# -------------------------------------------------------- calibrate_threshold

def test_calibrate_median_case():
    h0 = run_trials(_scenario(occupied=()), IDEAL, 500, 31)
    lam = calibrate_threshold(h0, 1, 0.5)
    assert lam == pytest.approx(float(np.median(h0.energies_for(1))))


def test_calibrate_matches_gamma_inverse():
    h0 = run_trials(_scenario(occupied=()), IDEAL, 40000, 32)
    target = 0.1
    lam = calibrate_threshold(h0, 1, target)
    # compare in probability units against the exact inverse
    achieved = ideal_pfa(lam, 1.0, PLAN.bins_per_channel)
    tol = 3 * math.sqrt(target * (1 - target) / h0.n_trials)
    assert abs(achieved - target) < tol
    assert lam == pytest.approx(
        ideal_threshold(target, 1.0, PLAN.bins_per_channel), rel=0.05)


def test_calibrate_with_nonlinearity_exceeds_ideal_threshold():
    # Strong occupied neighbors drive the cubic; the idle channel's H0
    # quantile moves, so its calibrated threshold must differ from the
    # ideal chain's at the same target.
    plan = ChannelPlan(6, 96)
    sc = ScenarioConfig(plan, OccupancyMap([1, 3]), snr_db=20.0, noise_psd=1.0)
    power = (6 * plan.bins_per_channel * 1.0
             + 2 * plan.bins_per_channel * 100.0) / plan.dft_size
    nl = ImpairmentConfig(nonlinearity=NonlinearityParams(
        a1=1.0, iip3=math.sqrt(10 * power)))
    n = 8000
    with pytest.warns(RuntimeWarning):
        impaired = run_trials(sc, nl, n, 33)
    ideal_batch = run_trials(sc, IDEAL, n, 33)
    lam_nl = calibrate_threshold(impaired, 2, 0.1)
    lam_ideal = calibrate_threshold(ideal_batch, 2, 0.1)
    assert lam_nl > lam_ideal


def test_calibrate_rejects_occupied_channel_and_small_batches():
    h0 = run_trials(_scenario(occupied=(1,)), IDEAL, 600, 34)
    with pytest.raises(ValueError):
        calibrate_threshold(h0, 1, 0.1)
    with pytest.raises(PrecisionError):
        calibrate_threshold(h0, 2, 0.01)   # needs 5000 trials
    with pytest.raises(ValueError):
        calibrate_threshold(h0, 2, 1.5)


def test_calibration_closure_on_fresh_batch():
    sc = _scenario(occupied=())
    target = 0.1
    cal = run_trials(sc, IDEAL, 20000, 35)
    lam = calibrate_threshold(cal, 1, target)
    fresh = run_trials(sc, IDEAL, 10000, 35, start_trial=20000)
    hits = int(np.count_nonzero(fresh.energies_for(1) > lam))
    lo, hi = wilson_interval(hits, fresh.n_trials)
    assert lo <= target <= hi


# ------------------------------------------------------------------ sweeps

def test_sweep_single_ideal_member_equals_standalone():
    sc = ScenarioConfig(PLAN, OccupancyMap([-1, 2]), snr_db=0.0, noise_psd=1.0)
    table = sweep_impairment(sc, IDEAL, "beta", [0.0], [0.1, 0.3],
                             channel_under_test=1, n_trials=500, seed=41)
    assert len(table) == 1 and table[0][0] == 0.0

    h0 = run_trials(ScenarioConfig(PLAN, OccupancyMap([-1, 2])), IDEAL, 500, 41)
    h1 = run_trials(ScenarioConfig(PLAN, OccupancyMap([-1, 1, 2])), IDEAL, 500, 41,
                    start_trial=500)
    lams = sorted({ideal_threshold(p, 1.0, PLAN.bins_per_channel)
                   for p in (0.1, 0.3)}, reverse=True)
    standalone = estimate_roc(h0, h1, lams, channel=1)
    for a, b in zip(table[0][1].points, standalone.points):
        assert a == b


def test_sweep_paired_members_share_signal_and_noise():
    # The ideal member of a beta sweep is bit-identical to the standalone
    # ideal curve even when other members exist.
    sc = ScenarioConfig(PLAN, OccupancyMap([-1, 2]), snr_db=0.0, noise_psd=1.0)
    full = sweep_impairment(sc, IDEAL, "beta", [0.0, 0.005], [0.1, 0.3],
                            channel_under_test=1, n_trials=400, seed=42)
    alone = sweep_impairment(sc, IDEAL, "beta", [0.0], [0.1, 0.3],
                             channel_under_test=1, n_trials=400, seed=42)
    assert full[0][1] == alone[0][1]


def test_sweep_validation():
    sc = ScenarioConfig(PLAN, OccupancyMap([-1, 2]), snr_db=0.0, noise_psd=1.0)
    with pytest.raises(ValueError):
        sweep_impairment(sc, IDEAL, "beta", [], [0.1], 1, 100, 1)
    with pytest.raises(ValueError):
        sweep_impairment(sc, IDEAL, "beta", [0.0, 0.1, 0.05], [0.1], 1, 100, 1)
    with pytest.raises(ValueError):
        sweep_impairment(sc, IDEAL, "gain", [0.0], [0.1], 1, 100, 1)
    with pytest.raises(ValueError):
        sweep_impairment(sc, IDEAL, "beta", [0.0], [], 1, 100, 1)
    # beta sweep requires both spectral neighbors of the channel occupied
    sparse = ScenarioConfig(PLAN, OccupancyMap([2]), snr_db=0.0, noise_psd=1.0)
    with pytest.raises(ValueError):
        sweep_impairment(sparse, IDEAL, "beta", [0.0], [0.1], 1, 100, 1)
    # irr sweep requires the mirror occupied
    with pytest.raises(ValueError):
        sweep_impairment(sparse, IDEAL, "irr_db", [20.0], [0.1], 1, 100, 1)


def test_sweep_irr_values_map_to_mismatch():
    sc = ScenarioConfig(PLAN, OccupancyMap([-1]), snr_db=0.0, noise_psd=1.0)
    table = sweep_impairment(sc, IDEAL, "irr_db", [math.inf, 20.0], [0.2],
                             channel_under_test=1, n_trials=300, seed=43)
    assert [v for v, _ in table] == [math.inf, 20.0]


# -------------------------------------------------------------- psd_stages

def test_psd_stages_all_identity():
    sc = _scenario(occupied=(1,), snr_db=5.0)
    stages = psd_stages(sc, IDEAL, 16, 51)
    base = stages.power["input"]
    for name in STAGE_NAMES[1:]:
        assert np.array_equal(stages.power[name], base)


def test_psd_stages_gain_only_scales_by_a1_squared():
    sc = _scenario(occupied=(1,), snr_db=5.0)
    cfg = ImpairmentConfig(nonlinearity=NonlinearityParams(a1=2.0))
    stages = psd_stages(sc, cfg, 16, 51)
    np.testing.assert_allclose(stages.power["after_lna"],
                               4.0 * stages.power["input"], rtol=1e-12)
    np.testing.assert_allclose(stages.power["joint"],
                               4.0 * stages.power["input"], rtol=1e-12)
    assert np.array_equal(stages.power["phase_noise_only"], stages.power["input"])
    assert np.array_equal(stages.power["iqi_only"], stages.power["input"])


def test_psd_stages_iqi_only_mirror_floor():
    # Occupied +2 at high SNR through IQI only: the mirror channel's
    # above-floor level sits 1/IRR below the occupied channel's.
    plan = ChannelPlan(6, 96)
    sc = ScenarioConfig(plan, OccupancyMap([2]), snr_db=30.0, noise_psd=1.0)
    irr_db = 20.0
    cfg = ImpairmentConfig(iqi=mismatch_from_irr(irr_db))
    stages = psd_stages(sc, cfg, 1200, 52)
    floor = np.mean([stages.channel_level(plan, "iqi_only", k)
                     for k in (1, 3, -1, -3)])
    occupied = stages.channel_level(plan, "iqi_only", 2) - floor
    mirror = stages.channel_level(plan, "iqi_only", -2) - floor
    measured_db = 10 * math.log10(occupied / mirror)
    assert abs(measured_db - irr_db) < 0.5


def test_psd_stages_joint_pattern():
    # Joint impairments with occupied +2: every channel fingered by the
    # neighbor/mirror interference pattern rises above the far floor.
    plan = ChannelPlan(6, 96)
    sc = ScenarioConfig(plan, OccupancyMap([2]), snr_db=30.0, noise_psd=1.0)
    cfg = ImpairmentConfig(
        phase_noise=PhaseNoiseParams(beta=1e-3),
        iqi=mismatch_from_irr(20.0),
    )
    stages = psd_stages(sc, cfg, 800, 53)
    levels = {k: stages.channel_level(plan, "joint", k) for k in plan.channels}
    assert levels[2] > 100
    for k in (1, 3, -2, -1, -3):
        assert levels[k] > 1.25, f"channel {k}: {levels[k]}"


def test_psd_stages_validation():
    with pytest.raises(ValueError):
        psd_stages(_scenario(), IDEAL, 0, 1)
