"""Contact scheduling from vertical GRF: stance detection, heel/flat/toe
phase classification around the mid-stance dip, and mass-ratio force
rescaling."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .dataio import FEET, DatasetBundle, GrfRecord

log = logging.getLogger(__name__)


class ContactPoint(IntEnum):
    """Schedule column order; values index the stance matrix."""

    LEFT_HEEL = 0
    LEFT_TOE = 1
    RIGHT_HEEL = 2
    RIGHT_TOE = 3

    @property
    def foot(self) -> str:
        return "left" if self < 2 else "right"

    @property
    def part(self) -> str:
        return "heel" if self % 2 == 0 else "toe"

    @property
    def site_name(self) -> str:
        return f"{self.foot}_{self.part}"


PHASE_HEEL, PHASE_FLAT, PHASE_TOE = "heel", "flat", "toe"


@dataclass
class StanceInterval:
    foot: str
    start: int              # half-open frame range [start, stop)
    stop: int
    dip: int                # frame of the mid-stance force minimum
    flat_start: int
    flat_stop: int

    def phase(self, frame: int) -> str:
        if not (self.start <= frame < self.stop):
            raise ValueError(f"frame {frame} outside interval [{self.start}, {self.stop})")
        if frame < self.flat_start:
            return PHASE_HEEL
        if frame < self.flat_stop:
            return PHASE_FLAT
        return PHASE_TOE

    @property
    def frames(self) -> int:
        return self.stop - self.start


@dataclass
class ContactSchedule:
    dt: float
    stance: np.ndarray      # (T, 4) of 0/1, columns per ContactPoint
    intervals: dict = field(default_factory=lambda: {"left": [], "right": []})

    @property
    def frames(self) -> int:
        return self.stance.shape[0]

    def active_sites(self, frame: int):
        return tuple(cp.site_name for cp in ContactPoint if self.stance[frame, cp])

    def column(self, cp: ContactPoint) -> np.ndarray:
        return self.stance[:, int(cp)]

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,LH,LT,RH,RT\n")
            for i in range(self.frames):
                fh.write(
                    f"{repr(i * self.dt)},{','.join(str(int(x)) for x in self.stance[i])}\n"
                )


@dataclass
class ForceReference:
    dt: float
    forces: np.ndarray      # (T, 2, 3), rescaled to the robot's mass

    def foot(self, name: str) -> np.ndarray:
        return self.forces[:, FEET.index(name), :]


@dataclass
class ContactParams:
    threshold_n: float = 20.0
    threshold_mode: str = "absolute"     # or "relative" (fraction of body weight)
    relative_fraction: float = 0.03
    min_duration_s: float = 0.05
    flat_window_fraction: float = 0.4
    smooth_window: int = 5

    def threshold(self, subject_mass: float) -> float:
        if self.threshold_mode == "absolute":
            return self.threshold_n
        if self.threshold_mode == "relative":
            return self.relative_fraction * subject_mass * 9.81
        raise ValueError(f"unknown threshold mode {self.threshold_mode!r}")


def detect_stance(fz: np.ndarray, threshold: float, dt: float,
                  min_duration_s: float = 0.05):
    """Maximal frame intervals with fz above threshold; sub-minimum swing gaps
    are merged and sub-minimum stance blips dropped (50 ms debounce)."""
    fz = np.asarray(fz, dtype=float)
    if fz.size == 0:
        raise ValueError("empty force series")
    if threshold <= 0:
        raise ValueError("stance threshold must be positive")
    mask = fz > threshold
    intervals = _runs(mask)
    # merge swing gaps shorter than the minimum duration
    merged = []
    for iv in intervals:
        if merged and (iv[0] - merged[-1][1]) * dt < min_duration_s:
            merged[-1] = (merged[-1][0], iv[1])
        else:
            merged.append(iv)
    return [iv for iv in merged if (iv[1] - iv[0]) * dt >= min_duration_s]


def _runs(mask: np.ndarray):
    out = []
    i = 0
    n = len(mask)
    while i < n:
        if mask[i]:
            j = i
            while j < n and mask[j]:
                j += 1
            out.append((i, j))
            i = j
        else:
            i += 1
    return out


def _smooth(x: np.ndarray, window: int) -> np.ndarray:
    if window <= 1 or len(x) < window:
        return x.astype(float)
    pad = window // 2
    padded = np.concatenate([np.full(pad, x[0]), x, np.full(pad, x[-1])])
    kernel = np.full(window, 1.0 / window)
    return np.convolve(padded, kernel, mode="valid")[: len(x)]


def _interior_maxima(x: np.ndarray):
    idx = []
    for i in range(1, len(x) - 1):
        if x[i] >= x[i - 1] and x[i] > x[i + 1]:
            idx.append(i)
    return idx


def classify_heel_toe(interval, fz: np.ndarray, dt: float,
                      flat_window_fraction: float = 0.4,
                      smooth_window: int = 5, foot: str = "left") -> StanceInterval:
    """Split one stance interval into heel-only / flat / toe-only around the
    mid-stance dip of the (smoothed) vertical force."""
    if not (0.0 < flat_window_fraction <= 1.0):
        raise ValueError("flat window fraction must be in (0, 1]")
    start, stop = interval
    n = stop - start
    if n < 5:
        log.warning("stance interval [%d, %d) too short to classify; labeled flat", start, stop)
        return StanceInterval(foot, start, stop, start + n // 2, start, stop)
    seg = _smooth(np.asarray(fz[start:stop], dtype=float), smooth_window)
    peaks = _interior_maxima(seg)
    if len(peaks) >= 2:
        top = sorted(sorted(peaks, key=lambda i: seg[i], reverse=True)[:2])
        dip_local = top[0] + int(np.argmin(seg[top[0]: top[1] + 1]))
    else:
        log.warning(
            "stance interval [%d, %d): no interior force dip found; using midpoint", start, stop
        )
        dip_local = n // 2
    width = int(round(flat_window_fraction * n))
    half_lo = width // 2
    half_hi = width - half_lo
    flat_start = max(start, start + dip_local - half_lo)
    flat_stop = min(stop, start + dip_local + half_hi)
    return StanceInterval(foot, start, stop, start + dip_local, flat_start, flat_stop)


def rescale_grf(m_robot: float, m_human: float, grf: GrfRecord) -> ForceReference:
    """Scale every force component by the robot/human mass ratio."""
    if m_robot <= 0 or m_human <= 0:
        raise ValueError("masses must be positive")
    return ForceReference(dt=grf.dt, forces=(m_robot / m_human) * grf.forces)


def build_schedule(bundle: DatasetBundle, m_robot: float,
                   params: ContactParams = None):
    """Full schedule: per-foot stance detection + heel/toe phase labels, and
    the mass-rescaled force reference. Heel is active on heel-only and flat
    frames, toe on flat and toe-only frames."""
    p = params or ContactParams()
    T = bundle.frames
    stance = np.zeros((T, 4), dtype=np.uint8)
    intervals = {"left": [], "right": []}
    threshold = p.threshold(bundle.motion.mass)
    for fi, foot in enumerate(FEET):
        fz = bundle.grf.forces[:, fi, 2]
        for iv in detect_stance(fz, threshold, bundle.dt, p.min_duration_s):
            si = classify_heel_toe(
                iv, fz, bundle.dt, p.flat_window_fraction, p.smooth_window, foot=foot
            )
            intervals[foot].append(si)
            heel_col = 2 * fi
            toe_col = 2 * fi + 1
            stance[si.start: si.flat_stop, heel_col] = 1
            stance[si.flat_start: si.stop, toe_col] = 1
    schedule = ContactSchedule(dt=bundle.dt, stance=stance, intervals=intervals)
    force_ref = rescale_grf(m_robot, bundle.motion.mass, bundle.grf)
    return schedule, force_ref


def interval_summary(schedule: ContactSchedule) -> str:
    lines = []
    for foot in FEET:
        for si in schedule.intervals[foot]:
            lines.append(
                f"{foot:5s} stance [{si.start:5d}, {si.stop:5d})  "
                f"heel-only [{si.start}, {si.flat_start})  "
                f"flat [{si.flat_start}, {si.flat_stop})  "
                f"toe-only [{si.flat_stop}, {si.stop})  dip @ {si.dip}"
            )
    return "\n".join(lines) if lines else "(no stance intervals)"
