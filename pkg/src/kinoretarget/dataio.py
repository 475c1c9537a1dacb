"""Dataset ingestion and synthesis: synchronized site-pose and ground
reaction force time series on a uniform grid.

CSV schemas (full round-trip precision, times in s, lengths in m, forces in N):

* motion: ``t, <site>_px, _py, _pz, _qw, _qx, _qy, _qz`` per site,
* GRF:    ``t, L_fx, L_fy, L_fz, R_fx, R_fy, R_fz`` with x forward, y lateral,
  z vertical.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .rotations import quat_normalize, quat_slerp

log = logging.getLogger(__name__)

FEET = ("left", "right")


class SchemaError(ValueError):
    pass


@dataclass
class MotionRecord:
    dt: float
    site_names: tuple
    pos: np.ndarray        # (T, S, 3)
    quat: np.ndarray       # (T, S, 4)
    mass: float
    segment_lengths: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.pos.shape[0] < 2:
            raise SchemaError("motion record needs at least two frames")
        if self.dt <= 0:
            raise SchemaError("motion record needs a positive sample period")
        if self.pos.shape[:2] != self.quat.shape[:2] or self.pos.shape[1] != len(self.site_names):
            raise SchemaError("motion record arrays are inconsistent")

    @property
    def frames(self) -> int:
        return self.pos.shape[0]

    def site_index(self, name: str) -> int:
        try:
            return self.site_names.index(name)
        except ValueError:
            raise SchemaError(f"motion record has no site {name!r}") from None

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.frames) * self.dt


@dataclass
class GrfRecord:
    dt: float
    forces: np.ndarray     # (T, 2, 3), feet ordered (left, right)

    def __post_init__(self):
        if self.forces.ndim != 3 or self.forces.shape[1:] != (2, 3):
            raise SchemaError("GRF record must have shape (T, 2, 3)")

    @property
    def frames(self) -> int:
        return self.forces.shape[0]

    def vertical(self, foot: str) -> np.ndarray:
        return self.forces[:, FEET.index(foot), 2]


@dataclass
class DatasetBundle:
    motion: MotionRecord
    grf: GrfRecord
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.motion.frames != self.grf.frames:
            raise SchemaError(
                f"motion ({self.motion.frames}) and GRF ({self.grf.frames}) lengths differ"
            )
        if abs(self.motion.dt - self.grf.dt) > 1e-12:
            raise SchemaError("motion and GRF sample periods differ")

    @property
    def frames(self) -> int:
        return self.motion.frames

    @property
    def dt(self) -> float:
        return self.motion.dt


# -- CSV I/O -------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_motion_csv(path, times, site_names, pos, quat) -> None:
    cols = ["t"]
    for name in site_names:
        cols += [f"{name}_{c}" for c in ("px", "py", "pz", "qw", "qx", "qy", "qz")]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for i, t in enumerate(times):
            row = [_fmt(t)]
            for s in range(len(site_names)):
                row += [_fmt(x) for x in pos[i, s]]
                row += [_fmt(x) for x in quat[i, s]]
            fh.write(",".join(row) + "\n")


def write_grf_csv(path, times, forces) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,L_fx,L_fy,L_fz,R_fx,R_fy,R_fz\n")
        for i, t in enumerate(times):
            row = [_fmt(t)] + [_fmt(x) for x in forces[i].reshape(6)]
            fh.write(",".join(row) + "\n")


def _read_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header:
            raise SchemaError(f"{path}: empty file")
        cols = [c.strip() for c in header.split(",")]
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != len(cols):
                raise SchemaError(
                    f"{path}:{lineno}: expected {len(cols)} fields, found {len(cells)}"
                )
            rows.append(cells)
    return cols, rows


def _parse_cell(cell: str, path, lineno, col) -> float:
    cell = cell.strip()
    if cell == "" or cell.lower() == "nan":
        return np.nan
    try:
        return float(cell)
    except ValueError:
        raise SchemaError(f"{path}:{lineno}: bad value {cell!r} in column {col!r}") from None


def read_motion_csv(path):
    """Returns (times, site_names, pos (T,S,3), quat (T,S,4))."""
    cols, rows = _read_csv(path)
    if not cols or cols[0] != "t":
        raise SchemaError(f"{path}: first column must be 't'")
    suffixes = ("_px", "_py", "_pz", "_qw", "_qx", "_qy", "_qz")
    site_names = []
    for c in cols[1:]:
        if c.endswith("_px"):
            site_names.append(c[:-3])
    expected = ["t"] + [f"{n}{s}" for n in site_names for s in suffixes]
    if cols != expected:
        missing = sorted(set(expected) - set(cols))
        raise SchemaError(f"{path}: motion columns do not match schema; missing/misordered: {missing or cols}")
    T, S = len(rows), len(site_names)
    if T < 2:
        raise SchemaError(f"{path}: motion file needs at least two frames")
    times = np.empty(T)
    pos = np.empty((T, S, 3))
    quat = np.empty((T, S, 4))
    for i, cells in enumerate(rows):
        lineno = i + 2
        vals = [_parse_cell(c, path, lineno, cols[j]) for j, c in enumerate(cells)]
        if any(np.isnan(v) for v in vals):
            j = next(j for j, v in enumerate(vals) if np.isnan(v))
            raise SchemaError(f"{path}:{lineno}: missing value in column {cols[j]!r}")
        times[i] = vals[0]
        arr = np.array(vals[1:]).reshape(S, 7)
        pos[i] = arr[:, 0:3]
        quat[i] = arr[:, 3:7]
    return times, tuple(site_names), pos, quat


def read_grf_csv(path):
    """Returns (times, forces (T,2,3)); missing cells become NaN (dropout)."""
    cols, rows = _read_csv(path)
    expected = ["t", "L_fx", "L_fy", "L_fz", "R_fx", "R_fy", "R_fz"]
    if cols != expected:
        raise SchemaError(f"{path}: GRF columns must be {','.join(expected)}")
    T = len(rows)
    times = np.empty(T)
    forces = np.empty((T, 2, 3))
    for i, cells in enumerate(rows):
        lineno = i + 2
        vals = [_parse_cell(c, path, lineno, cols[j]) for j, c in enumerate(cells)]
        if np.isnan(vals[0]):
            raise SchemaError(f"{path}:{lineno}: missing timestamp")
        times[i] = vals[0]
        forces[i] = np.array(vals[1:]).reshape(2, 3)
    return times, forces


# -- ingestion -----------------------------------------------------------------

@dataclass
class IngestConfig:
    dt: float = 0.01                 # uniform resampling grid
    grf_time_offset: float = 0.0     # added to the GRF time column before sync
    mass: float = 70.0               # subject mass, kg
    dropout_swing_frames: int = 3    # NaN runs at least this long become swing
    segment_lengths: dict = field(default_factory=dict)


def _check_monotone(times, path):
    if np.any(np.diff(times) <= 0):
        raise SchemaError(f"{path}: timestamps are not strictly increasing")


def _bridge_dropouts(forces: np.ndarray, min_swing: int) -> np.ndarray:
    """NaN runs shorter than min_swing are linearly bridged; longer runs are
    force-plate swing and become zero."""
    out = forces.copy()
    T = out.shape[0]
    for foot in range(2):
        bad = np.isnan(out[:, foot, :]).any(axis=1)
        i = 0
        while i < T:
            if not bad[i]:
                i += 1
                continue
            j = i
            while j < T and bad[j]:
                j += 1
            if (j - i) >= min_swing or i == 0 or j == T:
                out[i:j, foot, :] = 0.0
            else:
                for k in range(i, j):
                    s = (k - (i - 1)) / (j - (i - 1))
                    out[k, foot, :] = (1 - s) * out[i - 1, foot, :] + s * out[j, foot, :]
            i = j
    return out


def _interp_linear(grid, times, values):
    out = np.empty((len(grid),) + values.shape[1:])
    flat = values.reshape(len(times), -1)
    res = np.empty((len(grid), flat.shape[1]))
    for k in range(flat.shape[1]):
        res[:, k] = np.interp(grid, times, flat[:, k])
    return res.reshape(out.shape)


def ingest(motion_csv, grf_csv, config: IngestConfig = None) -> DatasetBundle:
    """Load, synchronize and resample a motion/GRF pair onto a uniform grid."""
    cfg = config or IngestConfig()
    m_times, site_names, pos, quat = read_motion_csv(motion_csv)
    g_times, forces = read_grf_csv(grf_csv)
    _check_monotone(m_times, motion_csv)
    _check_monotone(g_times, grf_csv)
    g_times = g_times + cfg.grf_time_offset
    forces = _bridge_dropouts(forces, cfg.dropout_swing_frames)
    forces[:, :, 2] = np.maximum(forces[:, :, 2], 0.0)

    t0 = max(m_times[0], g_times[0])
    t1 = min(m_times[-1], g_times[-1])
    if t1 - t0 < cfg.dt:
        raise SchemaError("motion and GRF time ranges do not overlap")
    n = int(np.floor((t1 - t0) / cfg.dt + 1e-9)) + 1
    grid = t0 + cfg.dt * np.arange(n)

    new_pos = _interp_linear(grid, m_times, pos)
    new_quat = np.empty((n, len(site_names), 4))
    idx = np.clip(np.searchsorted(m_times, grid, side="right") - 1, 0, len(m_times) - 2)
    for i in range(n):
        k = idx[i]
        span = m_times[k + 1] - m_times[k]
        alpha = np.clip((grid[i] - m_times[k]) / span, 0.0, 1.0)
        for s in range(len(site_names)):
            if alpha == 0.0:
                new_quat[i, s] = quat_normalize(quat[k, s])
            else:
                new_quat[i, s] = quat_slerp(quat[k, s], quat[k + 1, s], alpha)
    new_forces = _interp_linear(grid, g_times, forces)

    motion = MotionRecord(
        dt=cfg.dt, site_names=site_names, pos=new_pos, quat=new_quat,
        mass=cfg.mass, segment_lengths=dict(cfg.segment_lengths),
    )
    grf = GrfRecord(dt=cfg.dt, forces=new_forces)
    return DatasetBundle(motion=motion, grf=grf, meta={
        "source": f"{motion_csv}+{grf_csv}",
        "t0": float(t0),
        "grf_time_offset": cfg.grf_time_offset,
    })


# -- synthetic gait -------------------------------------------------------------

GAIT_SITES = ("pelvis", "l_heel", "l_toe", "r_heel", "r_toe")


@dataclass
class GaitParams:
    cycle_duration: float = 1.0
    stance_fraction: float = 0.6
    step_length: float = 0.25
    hip_height: float = 0.90
    hip_width: float = 0.2222
    heel_offset: float = -0.0667
    toe_offset: float = 0.1556
    clearance: float = 0.05
    bob_amplitude: float = 0.02
    sway_amplitude: float = 0.02
    mass: float = 70.0
    peak_scale: float = 1.35        # vertical GRF peak as a multiple of body weight
    fx_fraction: float = 0.12       # braking/propulsion amplitude relative to fz
    fy_fraction: float = 0.05
    cycles: int = 4
    dt: float = 0.01
    noise: float = 0.0              # optional sensor noise, N and m scales
    seed: int = 0


GRF_CLIP = 0.03   # clipped fraction of the raised cosine; gives a steep onset


def _clipped_cosine(s, center, width, clip=GRF_CLIP):
    """Raised-cosine bump with its bottom `clip` removed and the argument
    stretched so the bump still reaches zero exactly at |s - center| = width.
    The clip turns the flat quadratic onset into a steep linear one, the way
    measured vertical GRF rises at heel strike."""
    w_eff = np.pi * width / np.arccos(2.0 * clip - 1.0)
    out = np.zeros_like(s, dtype=float)
    m = np.abs(s - center) < width
    rc = 0.5 * (1.0 + np.cos(np.pi * (s[m] - center) / w_eff))
    out[m] = np.maximum(0.0, rc - clip) / (1.0 - clip)
    return out


def _bump_area_per_width(clip=GRF_CLIP) -> float:
    # closed form of integral(clipped bump) / width
    phi = np.arccos(2.0 * clip - 1.0)
    return ((1.0 - 2.0 * clip) + np.sin(phi) / phi) / (1.0 - clip)


def grf_bump_width(stance_fraction: float, peak_scale: float) -> float:
    """Bump width (normalized stance time) solving the impulse balance: the
    cycle-average vertical force per foot equals half of the body weight."""
    w = 1.0 / (4.0 * stance_fraction * peak_scale * _bump_area_per_width())
    if not (0.25 < w <= 1.0 / 3.0):
        raise ValueError(
            f"peak_scale {peak_scale} incompatible with stance fraction "
            f"{stance_fraction}: bump width {w:.3f} outside (0.25, 1/3]"
        )
    return w


def vertical_grf_profile(s: np.ndarray, stance_fraction: float, peak_scale: float,
                         weight: float) -> np.ndarray:
    """Double-bump vertical force over normalized stance time s in [0, 1):
    weight-acceptance and push-off peaks at peak_scale times body weight with
    a mid-stance dip below it, zero at both stance boundaries."""
    w = grf_bump_width(stance_fraction, peak_scale)
    amp = peak_scale * weight
    dip = 2.0 * amp * _clipped_cosine(np.array([0.5]), w, w)[0]
    if peak_scale * weight <= 1.05 * weight or dip >= 0.95 * weight:
        raise ValueError(
            f"peak_scale {peak_scale}: profile loses the double-peak shape "
            f"(dip {dip / weight:.2f} of body weight)"
        )
    return amp * (_clipped_cosine(s, w, w) + _clipped_cosine(s, 1.0 - w, w))


def grf_dip_location(stance_fraction: float, peak_scale: float) -> float:
    """Normalized stance time of the mid-stance minimum (by symmetry, 0.5)."""
    return 0.5


def _smoothstep(s):
    return s * s * (3.0 - 2.0 * s)


def synth_gait(params: GaitParams = None) -> DatasetBundle:
    """Periodic biped walking: stance feet pinned to the ground, swing feet on
    clearance arcs, pelvis bobbing twice per cycle, and per-foot double-bump
    vertical GRF with antisymmetric fore-aft force."""
    p = params or GaitParams()
    if not (0.0 < p.stance_fraction < 1.0):
        raise ValueError(f"stance fraction must be in (0, 1), got {p.stance_fraction}")
    if p.stance_fraction <= 0.5:
        raise ValueError("walking needs stance fraction > 0.5 (double support)")
    if p.cycle_duration <= 0 or p.dt <= 0 or p.cycles < 1:
        raise ValueError("cycle duration, dt and cycles must be positive")
    if p.hip_height <= 0 or p.mass <= 0:
        raise ValueError("hip height and mass must be positive")

    Tc = p.cycle_duration
    sf = p.stance_fraction
    stride = 2.0 * p.step_length
    speed = stride / Tc
    weight = p.mass * 9.81
    n = int(round(p.cycles * Tc / p.dt))
    t = np.arange(n) * p.dt

    # force profile validated up front (raises on bad peak_scale)
    vertical_grf_profile(np.array([0.5]), sf, p.peak_scale, weight)

    pos = np.zeros((n, len(GAIT_SITES), 3))
    quat = np.zeros((n, len(GAIT_SITES), 4))
    quat[:, :, 0] = 1.0
    forces = np.zeros((n, 2, 3))

    tau = t / Tc
    pelvis = np.stack(
        [
            speed * t,
            p.sway_amplitude * np.cos(2.0 * np.pi * (tau - 0.3)),
            p.hip_height + p.bob_amplitude * np.cos(4.0 * np.pi * (tau - 0.3)),
        ],
        axis=1,
    )
    pos[:, 0, :] = pelvis

    for fi, (phase0, y_side) in enumerate(((0.0, 1.0), (0.5, -1.0))):
        y = y_side * p.hip_width / 2.0
        local = np.mod(tau - phase0, 1.0)
        k = np.floor(tau - phase0 + 1e-12)
        anchor_x = stride * (k + phase0 + 0.3)
        in_stance = local < sf
        foot_x = np.where(in_stance, anchor_x, 0.0)
        foot_z = np.zeros(n)
        sw = ~in_stance
        s_sw = (local[sw] - sf) / (1.0 - sf)
        foot_x_sw = anchor_x[sw] + stride * _smoothstep(s_sw)
        foot_z_sw = p.clearance * np.sin(np.pi * s_sw) ** 2
        foot_x[sw] = foot_x_sw
        foot_z[sw] = foot_z_sw

        heel_i, toe_i = 1 + 2 * fi, 2 + 2 * fi
        pos[:, heel_i, 0] = foot_x + p.heel_offset
        pos[:, toe_i, 0] = foot_x + p.toe_offset
        pos[:, heel_i, 1] = y
        pos[:, toe_i, 1] = y
        pos[:, heel_i, 2] = foot_z
        pos[:, toe_i, 2] = foot_z

        s_st = local[in_stance] / sf
        fz = vertical_grf_profile(s_st, sf, p.peak_scale, weight)
        forces[in_stance, fi, 2] = fz
        forces[in_stance, fi, 0] = -p.fx_fraction * fz * np.sin(2.0 * np.pi * s_st)
        forces[in_stance, fi, 1] = -y_side * p.fy_fraction * fz * np.sin(np.pi * s_st)

    if p.noise > 0.0:
        rng = np.random.default_rng(p.seed)
        pos += rng.normal(scale=1e-3 * p.noise, size=pos.shape)
        forces += rng.normal(scale=p.noise, size=forces.shape)
        forces[:, :, 2] = np.maximum(forces[:, :, 2], 0.0)

    motion = MotionRecord(
        dt=p.dt,
        site_names=GAIT_SITES,
        pos=pos,
        quat=quat,
        mass=p.mass,
        segment_lengths={
            "hip_height": p.hip_height,
            "hip_width": p.hip_width,
            "foot_length": p.toe_offset - p.heel_offset,
        },
    )
    grf = GrfRecord(dt=p.dt, forces=forces)
    return DatasetBundle(motion=motion, grf=grf, meta={"source": "synth", "params": vars(p).copy()})
