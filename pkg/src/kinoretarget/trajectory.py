"""Robot configuration trajectories on a uniform time grid, with CSV I/O.

Trajectory CSV columns: ``t, px, py, pz, qw, qx, qy, qz`` then one column per
actuated joint (named after the model's joints).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import config_difference
from .model import KinematicModel, ModelError


@dataclass
class ReferenceTrajectory:
    dt: float
    q: np.ndarray              # (T, nq)
    vel: np.ndarray = None     # (T, nv), optional

    def __post_init__(self):
        if self.q.ndim != 2 or self.q.shape[0] < 1:
            raise ModelError("trajectory must hold at least one configuration")
        if self.dt <= 0:
            raise ModelError("trajectory sample period must be positive")

    @property
    def frames(self) -> int:
        return self.q.shape[0]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.frames) * self.dt

    def check_limits(self, model: KinematicModel, tol: float = 1e-9) -> None:
        joints = self.q[:, 7:] if model.floating else self.q
        lo = np.min(joints - model.q_min[None, :])
        hi = np.min(model.q_max[None, :] - joints)
        if lo < -tol or hi < -tol:
            raise ModelError(f"trajectory violates joint limits by {max(-lo, -hi):g}")

    def fd_velocities(self, model: KinematicModel) -> np.ndarray:
        """Central-difference velocities (one-sided at the ends)."""
        T = self.frames
        v = np.zeros((T, model.nv))
        for t in range(T):
            if t == 0:
                v[t] = config_difference(model, self.q[0], self.q[1], self.dt)
            elif t == T - 1:
                v[t] = config_difference(model, self.q[T - 2], self.q[T - 1], self.dt)
            else:
                v[t] = config_difference(model, self.q[t - 1], self.q[t + 1], 2 * self.dt)
        return v


def write_trajectory_csv(path, model: KinematicModel, traj: ReferenceTrajectory) -> None:
    cols = ["t", "px", "py", "pz", "qw", "qx", "qy", "qz"] + list(model.joint_names)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(traj.frames):
            row = [repr(float(i * traj.dt))] + [repr(float(x)) for x in traj.q[i]]
            fh.write(",".join(row) + "\n")


def read_trajectory_csv(path, model: KinematicModel) -> ReferenceTrajectory:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        expected = ["t", "px", "py", "pz", "qw", "qx", "qy", "qz"] + list(model.joint_names)
        if header != expected:
            raise ModelError(f"{path}: trajectory columns do not match the model "
                             f"({header[:4]}... vs {expected[:4]}...)")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if len(rows) < 1:
        raise ModelError(f"{path}: empty trajectory")
    times = np.array([float(r[0]) for r in rows])
    q = np.array([[float(c) for c in r[1:]] for r in rows])
    if len(times) > 1:
        dts = np.diff(times)
        if np.max(np.abs(dts - dts[0])) > 1e-9:
            raise ModelError(f"{path}: non-uniform time grid")
        dt = float(dts[0])
    else:
        dt = 1.0
    return ReferenceTrajectory(dt=dt, q=q)
