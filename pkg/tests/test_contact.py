import numpy as np
import pytest

from kinoretarget.contact import (
    ContactParams,
    ContactPoint,
    build_schedule,
    classify_heel_toe,
    detect_stance,
    interval_summary,
    rescale_grf,
)
from kinoretarget.dataio import GaitParams, GrfRecord, synth_gait, vertical_grf_profile


def test_all_zero_force_has_no_intervals():
    assert detect_stance(np.zeros(500), 20.0, 0.01) == []


def test_detect_synthetic_double_bump_interval():
    dt = 0.01
    fz = np.zeros(300)
    s = np.linspace(0, 1, 60, endpoint=False)
    fz[100:160] = vertical_grf_profile(s, 0.6, 1.35, 70 * 9.81)
    ivs = detect_stance(fz, 20.0, dt)
    # oracle: direct thresholding of the closed-form profile
    expected = np.nonzero(fz > 20.0)[0]
    assert len(ivs) == 1
    assert abs(ivs[0][0] - expected[0]) <= 1
    assert abs(ivs[0][1] - (expected[-1] + 1)) <= 1
    # the 20 N threshold shaves at most a frame or two off the true support
    assert abs(ivs[0][0] - 100) <= 2 and abs(ivs[0][1] - 160) <= 2


def test_sub_threshold_dip_is_merged():
    dt = 0.001  # 1 ms frames: a 10 ms dip is far below the 50 ms debounce
    fz = np.zeros(1000)
    fz[100:400] = 500.0
    fz[400:410] = 5.0   # 10 ms dip below threshold
    fz[410:700] = 500.0
    ivs = detect_stance(fz, 20.0, dt)
    # oracle: enumeration of the debounce rule (gap 10 ms < 50 ms -> merged)
    assert ivs == [(100, 700)]


def test_short_blip_dropped():
    dt = 0.01
    fz = np.zeros(200)
    fz[50:53] = 400.0   # 30 ms blip
    assert detect_stance(fz, 20.0, dt) == []


def test_empty_series_rejected():
    with pytest.raises(ValueError, match="empty"):
        detect_stance(np.array([]), 20.0, 0.01)


def test_classify_symmetric_profile():
    n = 100
    s = np.linspace(0, 1, n, endpoint=False)
    fz = vertical_grf_profile(s, 0.6, 1.35, 70 * 9.81)
    si = classify_heel_toe((0, n), fz, dt=0.01, flat_window_fraction=0.4)
    # closed-form dip is at the stance midpoint
    assert abs(si.dip - n // 2) <= 1
    assert abs(si.flat_start - 30) <= 2
    assert abs(si.flat_stop - 70) <= 2
    assert si.phase(0) == "heel"
    assert si.phase(50) == "flat"
    assert si.phase(99) == "toe"


def test_classify_monotone_plateau_falls_back_to_midpoint():
    fz = np.linspace(100, 110, 60)
    si = classify_heel_toe((0, 60), fz, dt=0.01)
    assert si.dip == 30


def test_classify_fraction_one_is_all_flat():
    n = 100
    s = np.linspace(0, 1, n, endpoint=False)
    fz = vertical_grf_profile(s, 0.6, 1.35, 70 * 9.81)
    si = classify_heel_toe((0, n), fz, dt=0.01, flat_window_fraction=1.0)
    assert si.flat_start == 0 and si.flat_stop == n


def test_classify_short_interval_all_flat(caplog):
    si = classify_heel_toe((10, 13), np.ones(20), dt=0.01)
    assert si.flat_start == 10 and si.flat_stop == 13


def test_rescale_exact():
    grf = GrfRecord(dt=0.01, forces=np.array([[[0, 0, 700.0], [30, -10, 680.0]]]))
    ref = rescale_grf(35.0, 70.0, grf)
    assert np.array_equal(ref.forces[0, 0], [0, 0, 350.0])
    assert np.array_equal(ref.forces[0, 1], [15.0, -5.0, 340.0])
    same = rescale_grf(70.0, 70.0, grf)
    assert np.array_equal(same.forces, grf.forces)


def test_rescale_is_linear():
    rng = np.random.default_rng(3)
    forces = rng.normal(size=(50, 2, 3))
    grf_1 = GrfRecord(dt=0.01, forces=forces)
    grf_3 = GrfRecord(dt=0.01, forces=3.0 * forces)
    assert np.allclose(
        rescale_grf(42.0, 70.0, grf_3).forces,
        3.0 * rescale_grf(42.0, 70.0, grf_1).forces,
        atol=1e-12,
    )


def test_rescale_rejects_bad_mass():
    grf = GrfRecord(dt=0.01, forces=np.zeros((2, 2, 3)))
    with pytest.raises(ValueError, match="positive"):
        rescale_grf(-1.0, 70.0, grf)


def test_schedule_stance_fraction_and_phase_order():
    params = GaitParams(cycles=4)
    bundle = synth_gait(params)
    schedule, ref = build_schedule(bundle, m_robot=42.0)
    per = int(round(params.cycle_duration / params.dt))
    for foot, cols in (("left", (0, 1)), ("right", (2, 3))):
        foot_stance = schedule.stance[:, cols[0]] | schedule.stance[:, cols[1]]
        # interior cycles only (boundary stances are clipped by the window)
        frac = foot_stance[per:3 * per].sum() / (2 * per)
        assert abs(frac - params.stance_fraction) < 0.02
        for si in schedule.intervals[foot]:
            phases = [si.phase(f) for f in range(si.start, si.stop)]
            order = {"heel": 0, "flat": 1, "toe": 2}
            ranks = [order[p] for p in phases]
            assert ranks == sorted(ranks)
    assert ref.forces.shape == bundle.grf.forces.shape
    assert np.allclose(ref.forces, (42.0 / params.mass) * bundle.grf.forces, atol=1e-12)


def test_heel_and_toe_flags_overlap_exactly_on_flat():
    bundle = synth_gait(GaitParams(cycles=3))
    schedule, _ = build_schedule(bundle, m_robot=42.0)
    for foot, (hc, tc) in (("left", (0, 1)), ("right", (2, 3))):
        for si in schedule.intervals[foot]:
            both = schedule.stance[:, hc].astype(bool) & schedule.stance[:, tc].astype(bool)
            flat = np.zeros(schedule.frames, dtype=bool)
            flat[si.flat_start: si.flat_stop] = True
            span = slice(si.start, si.stop)
            assert np.array_equal(both[span], flat[span])


def test_walking_always_has_a_contact():
    bundle = synth_gait(GaitParams(cycles=4))
    schedule, _ = build_schedule(bundle, m_robot=42.0)
    assert np.all(schedule.stance.sum(axis=1) >= 1)


def test_all_swing_input_gives_empty_schedule():
    bundle = synth_gait(GaitParams(cycles=2))
    bundle.grf.forces[:] = 0.0
    schedule, _ = build_schedule(bundle, m_robot=42.0)
    assert schedule.stance.sum() == 0


def test_schedule_invariant_under_uniform_scaling():
    bundle = synth_gait(GaitParams(cycles=3))
    s1, _ = build_schedule(bundle, m_robot=42.0,
                           params=ContactParams(threshold_mode="relative"))
    bundle.grf.forces *= 2.5
    bundle.motion.mass *= 2.5
    s2, _ = build_schedule(bundle, m_robot=42.0,
                           params=ContactParams(threshold_mode="relative"))
    assert np.array_equal(s1.stance, s2.stance)


def test_dip_matches_profile_minimum():
    params = GaitParams(cycles=3)
    bundle = synth_gait(params)
    per = int(round(params.cycle_duration / params.dt))
    stance_frames = params.stance_fraction * per
    schedule, _ = build_schedule(bundle, m_robot=42.0)
    assert len(schedule.intervals["left"]) >= 3
    for si in schedule.intervals["left"][1:-1]:
        # closed-form oracle: the profile minimum sits mid-stance
        k = int(round(si.start / per))
        expected = int(round(k * per + 0.5 * stance_frames))
        assert abs(si.dip - expected) <= 1


def test_contact_point_site_names():
    assert ContactPoint.LEFT_HEEL.site_name == "left_heel"
    assert ContactPoint.RIGHT_TOE.site_name == "right_toe"
    assert [int(c) for c in ContactPoint] == [0, 1, 2, 3]


def test_schedule_csv_roundtrip(tmp_path):
    bundle = synth_gait(GaitParams(cycles=1))
    schedule, _ = build_schedule(bundle, m_robot=42.0)
    path = tmp_path / "schedule.csv"
    schedule.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,LH,LT,RH,RT"
    assert len(lines) == schedule.frames + 1
    summary = interval_summary(schedule)
    assert "left" in summary and "dip" in summary
