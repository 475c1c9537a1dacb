import numpy as np
import pytest

from kinoretarget import dataio
from kinoretarget.dataio import (
    GaitParams,
    IngestConfig,
    SchemaError,
    ingest,
    synth_gait,
    vertical_grf_profile,
    write_grf_csv,
    write_motion_csv,
)
from kinoretarget.rotations import euler_xyz_to_quat, quat_slerp


def _write_pair(tmp_path, times_m, pos, quat, times_g, forces, names=("pelvis",)):
    mpath = tmp_path / "motion.csv"
    gpath = tmp_path / "grf.csv"
    write_motion_csv(mpath, times_m, names, pos, quat)
    write_grf_csv(gpath, times_g, forces)
    return mpath, gpath


def test_two_frame_resample_midpoint(tmp_path):
    times = np.array([0.0, 0.1])
    pos = np.zeros((2, 1, 3))
    pos[1, 0] = [1.0, 2.0, 3.0]
    quat = np.zeros((2, 1, 4))
    quat[0, 0] = [1, 0, 0, 0]
    quat[1, 0] = euler_xyz_to_quat([0.0, 0.0, 1.0])
    forces = np.zeros((2, 2, 3))
    forces[1] = 10.0
    mp, gp = _write_pair(tmp_path, times, pos, quat, times, forces)
    bundle = ingest(mp, gp, IngestConfig(dt=0.05))
    assert bundle.frames == 3
    assert np.allclose(bundle.motion.pos[1, 0], [0.5, 1.0, 1.5], atol=1e-12)
    assert np.allclose(bundle.motion.pos[2, 0], [1.0, 2.0, 3.0], atol=1e-12)
    expected_mid = quat_slerp(quat[0, 0], quat[1, 0], 0.5)
    assert np.allclose(bundle.motion.quat[1, 0], expected_mid, atol=1e-12)
    assert np.allclose(bundle.grf.forces[1], 5.0, atol=1e-12)


def test_declared_grf_offset_realigns(tmp_path):
    rng = np.random.default_rng(0)
    dt = 0.01
    times = np.arange(100) * dt
    pos = np.zeros((100, 1, 3))
    pos[:, 0, 0] = np.sin(times)
    quat = np.zeros((100, 1, 4))
    quat[:, :, 0] = 1.0
    forces = np.zeros((100, 2, 3))
    forces[:, 0, 2] = 100.0 + 50.0 * np.sin(5 * times)
    shift = 0.02
    mp, gp = _write_pair(tmp_path, times, pos, quat, times + shift, forces)
    bundle = ingest(mp, gp, IngestConfig(dt=dt, grf_time_offset=-shift))
    # declared offset undoes the shift: resampled forces match the originals
    t0 = bundle.meta["t0"]
    k0 = int(round(t0 / dt))
    n = bundle.frames
    assert np.allclose(bundle.grf.forces[:, 0, 2], forces[k0:k0 + n, 0, 2], atol=1e-9)


def test_missing_site_value_names_column(tmp_path):
    times = np.array([0.0, 0.1])
    pos = np.zeros((2, 1, 3))
    quat = np.zeros((2, 1, 4))
    quat[:, :, 0] = 1.0
    mp, gp = _write_pair(tmp_path, times, pos, quat, times, np.zeros((2, 2, 3)))
    lines = mp.read_text().splitlines()
    cells = lines[2].split(",")
    cells[3] = ""  # pelvis_pz of the second frame
    lines[2] = ",".join(cells)
    mp.write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaError, match="pelvis_pz"):
        ingest(mp, gp, IngestConfig(dt=0.05))


def test_non_monotone_time_rejected(tmp_path):
    times = np.array([0.0, 0.1, 0.1])
    pos = np.zeros((3, 1, 3))
    quat = np.zeros((3, 1, 4))
    quat[:, :, 0] = 1.0
    mp, gp = _write_pair(tmp_path, times, pos, quat, times, np.zeros((3, 2, 3)))
    with pytest.raises(SchemaError, match="strictly increasing"):
        ingest(mp, gp)


def test_empty_overlap_rejected(tmp_path):
    times_m = np.array([0.0, 0.1, 0.2])
    times_g = times_m + 5.0
    pos = np.zeros((3, 1, 3))
    quat = np.zeros((3, 1, 4))
    quat[:, :, 0] = 1.0
    mp, gp = _write_pair(tmp_path, times_m, pos, quat, times_g, np.zeros((3, 2, 3)))
    with pytest.raises(SchemaError, match="overlap"):
        ingest(mp, gp)


def test_resampling_at_native_rate_is_identity(tmp_path):
    params = GaitParams(cycles=1, dt=0.01)
    bundle = synth_gait(params)
    mp = tmp_path / "m.csv"
    gp = tmp_path / "g.csv"
    write_motion_csv(mp, bundle.motion.times, bundle.motion.site_names,
                     bundle.motion.pos, bundle.motion.quat)
    write_grf_csv(gp, bundle.motion.times, bundle.grf.forces)
    again = ingest(mp, gp, IngestConfig(dt=0.01, mass=params.mass))
    assert again.frames == bundle.frames
    assert np.array_equal(again.motion.pos, bundle.motion.pos)
    assert np.array_equal(again.grf.forces, bundle.grf.forces)


def test_short_dropout_bridged_long_dropout_zeroed(tmp_path):
    dt = 0.01
    times = np.arange(20) * dt
    pos = np.zeros((20, 1, 3))
    quat = np.zeros((20, 1, 4))
    quat[:, :, 0] = 1.0
    forces = np.zeros((20, 2, 3))
    forces[:, 0, 2] = 100.0
    mp, gp = _write_pair(tmp_path, times, pos, quat, times, forces)
    lines = gp.read_text().splitlines()
    for row in (5, 10, 11, 12, 13):  # one isolated dropout, one 4-frame run
        cells = lines[1 + row].split(",")
        cells[3] = "nan"
        lines[1 + row] = ",".join(cells)
    gp.write_text("\n".join(lines) + "\n")
    bundle = ingest(mp, gp, IngestConfig(dt=dt))
    assert np.isclose(bundle.grf.forces[5, 0, 2], 100.0)        # bridged
    assert np.allclose(bundle.grf.forces[10:14, 0, 2], 0.0)     # treated as swing


# -- synthetic gait ------------------------------------------------------------

def bump_profile_extrema(sf, peak_scale, weight, n=2001):
    """Direct scan of the closed-form stance profile (the oracle)."""
    s = np.linspace(0, 1, n)
    fz = vertical_grf_profile(s, sf, peak_scale, weight)
    maxima = [i for i in range(1, n - 1) if fz[i] >= fz[i - 1] and fz[i] > fz[i + 1]]
    minima = [
        i for i in range(1, n - 1)
        if fz[i] <= fz[i - 1] and fz[i] < fz[i + 1] and fz[i] > 0
    ]
    return s, fz, maxima, minima


def test_vertical_profile_has_double_peak_and_dip():
    weight = 70 * 9.81
    s, fz, maxima, minima = bump_profile_extrema(0.6, 1.35, weight)
    assert len(maxima) == 2
    assert all(fz[i] > weight for i in maxima)
    assert len(minima) == 1
    assert fz[minima[0]] < weight
    assert abs(s[minima[0]] - 0.5) < 1e-2


def test_synth_gait_grf_shape_per_stance():
    params = GaitParams(cycles=3)
    bundle = synth_gait(params)
    weight = params.mass * 9.81
    fz = bundle.grf.forces[:, 0, 2]
    # examine one full interior stance of the left foot
    start = int(round(params.cycle_duration / params.dt))
    stop = start + int(round(params.stance_fraction * params.cycle_duration / params.dt))
    seg = fz[start:stop]
    maxima = [i for i in range(1, len(seg) - 1) if seg[i] >= seg[i - 1] and seg[i] > seg[i + 1]]
    above = [i for i in maxima if seg[i] > weight]
    assert len(above) == 2
    interior_min = min(
        (seg[i], i) for i in range(min(above) + 1, max(above))
    )
    assert interior_min[0] < weight


def test_zero_step_length_marches_in_place():
    bundle = synth_gait(GaitParams(cycles=2, step_length=0.0))
    lh = bundle.motion.pos[:, bundle.motion.site_index("l_heel")]
    assert np.ptp(lh[:, 0]) < 1e-12
    # swing foot height returns to zero each cycle
    per = int(round(1.0 / 0.01))
    assert abs(lh[per - 1, 2]) < 1e-3
    assert lh[:, 2].max() > 0.02


def test_impulse_balance_over_full_cycles():
    params = GaitParams(cycles=4)
    bundle = synth_gait(params)
    total_fz = bundle.grf.forces[:, :, 2].sum(axis=1)
    avg = total_fz.mean()
    assert abs(avg - params.mass * 9.81) / (params.mass * 9.81) < 0.02


def test_swing_zero_stance_positive_and_continuous():
    params = GaitParams(cycles=3)
    bundle = synth_gait(params)
    weight = params.mass * 9.81
    for fi in range(2):
        fz = bundle.grf.forces[:, fi, 2]
        heel_z = bundle.motion.pos[:, 1 + 2 * fi, 2]
        swing = heel_z > 1e-6
        assert np.all(fz[swing] == 0.0)
        # continuity at touchdown/liftoff: no step into or out of stance
        loaded = fz > 0.0
        edges = np.nonzero(np.diff(loaded.astype(int)))[0]
        for e in edges:
            assert abs(fz[e + 1] - fz[e]) < 0.05 * weight


def test_bad_parameters_rejected():
    with pytest.raises(ValueError, match="stance fraction"):
        synth_gait(GaitParams(stance_fraction=1.2))
    with pytest.raises(ValueError, match="double support"):
        synth_gait(GaitParams(stance_fraction=0.4))
    with pytest.raises(ValueError, match="peak_scale"):
        synth_gait(GaitParams(peak_scale=3.0))


def test_motion_record_validation():
    with pytest.raises(SchemaError, match="two frames"):
        dataio.MotionRecord(
            dt=0.01, site_names=("a",), pos=np.zeros((1, 1, 3)),
            quat=np.zeros((1, 1, 4)), mass=70.0,
        )
