"""Velocity-level differential inverse kinematics: map scaled human site-pose
trajectories onto the robot by solving, per frame, a box-constrained QP over
joint velocities (task tracking in a weighted least-squares sense, hard joint
position and velocity limits via the integration preview)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .blockfile import BlockParseError, parse_blockfile_path
from .boxqp import BoxQpResult, solve_box_qp
from .dataio import MotionRecord, SchemaError
from .kinematics import forward_kinematics, frames, integrate_config, site_jacobian, site_world
from .model import KinematicModel, ModelError
from .rotations import quat_conj, quat_log, quat_mul, quat_to_mat, so3_log
from .trajectory import ReferenceTrajectory

log = logging.getLogger(__name__)


@dataclass
class CorrespondenceMap:
    """Pairs (human site -> robot site) with per-pair task weights (rows of the
    tracking metric, ordered linear xyz then angular xyz) and position scale."""

    pairs: list                     # [(human_site, robot_site, w6, scale)]
    base_height_scale: float = 1.0
    pelvis_site: str = "pelvis"

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("correspondence map needs at least one pair")
        for human, robot, w, s in self.pairs:
            w = np.asarray(w, dtype=float)
            if w.shape != (6,) or np.any(w < 0):
                raise ValueError(f"pair {human}->{robot}: weights must be 6 nonnegative values")
            if s <= 0:
                raise ValueError(f"pair {human}->{robot}: scale must be positive")
        if self.base_height_scale <= 0:
            raise ValueError("base height scale must be positive")

    @property
    def robot_sites(self):
        return tuple(p[1] for p in self.pairs)

    def validate_against(self, model: KinematicModel, motion: MotionRecord = None) -> None:
        for human, robot, _, _ in self.pairs:
            model.site(robot)
            if motion is not None:
                motion.site_index(human)
        if motion is not None:
            motion.site_index(self.pelvis_site)


def load_correspondence(path) -> CorrespondenceMap:
    try:
        root = parse_blockfile_path(path)
    except BlockParseError as exc:
        raise SchemaError(f"cannot parse correspondence map: {exc}") from exc
    pairs = []
    for node in root.blocks("pair"):
        pairs.append(
            (
                node.str_("human_site"),
                node.str_("robot_site"),
                np.array(node.floats("w", [1, 1, 1, 1, 1, 1]), dtype=float),
                node.float_("scale", 1.0),
            )
        )
    return CorrespondenceMap(
        pairs=pairs,
        base_height_scale=root.float_("base_height_scale", 1.0),
        pelvis_site=root.str_("pelvis_site", "pelvis"),
    )


@dataclass
class ScaledTargets:
    """Per-frame world pose targets for the robot sites of a correspondence map."""

    robot_sites: tuple
    pos: np.ndarray     # (T, P, 3)
    quat: np.ndarray    # (T, P, 4)
    dt: float

    @property
    def frames(self) -> int:
        return self.pos.shape[0]


def scale_targets(motion: MotionRecord, cmap: CorrespondenceMap) -> ScaledTargets:
    """Express each mapped human site relative to the pelvis, apply its pair
    scale, and re-anchor at the height-scaled pelvis; orientations pass
    through unchanged."""
    pelvis_i = motion.site_index(cmap.pelvis_site)
    pelvis = motion.pos[:, pelvis_i, :]
    anchor = pelvis.copy()
    anchor[:, 2] *= cmap.base_height_scale

    P = len(cmap.pairs)
    T = motion.frames
    pos = np.empty((T, P, 3))
    quat = np.empty((T, P, 4))
    for k, (human, _, _, scale) in enumerate(cmap.pairs):
        hi = motion.site_index(human)
        pos[:, k, :] = anchor + scale * (motion.pos[:, hi, :] - pelvis)
        quat[:, k, :] = motion.quat[:, hi, :]
    return ScaledTargets(robot_sites=cmap.robot_sites, pos=pos, quat=quat, dt=motion.dt)


def target_velocities(targets: ScaledTargets) -> np.ndarray:
    """Spatial velocity (linear, angular) per frame and pair: central
    differences inside, one-sided at the ends; angular part via the log map of
    the relative rotation."""
    T, P = targets.pos.shape[:2]
    dt = targets.dt
    out = np.zeros((T, P, 6))
    for k in range(P):
        for t in range(T):
            if t == 0:
                ta, tb, span = 0, 1, dt
            elif t == T - 1:
                ta, tb, span = T - 2, T - 1, dt
            else:
                ta, tb, span = t - 1, t + 1, 2 * dt
            out[t, k, 0:3] = (targets.pos[tb, k] - targets.pos[ta, k]) / span
            rel = quat_to_mat(targets.quat[tb, k]) @ quat_to_mat(targets.quat[ta, k]).T
            out[t, k, 3:6] = so3_log(rel) / span
    return out


@dataclass
class DiffIkParams:
    damping: float = 1e-6
    kkt_tol: float = 1e-8
    feedback: float = 0.5          # fraction of the pose error fed back per step
    warmstart_iters: int = 50
    nominal_pose: np.ndarray = None  # joint vector, defaults to mid-range
    limit_tol: float = 1e-9


@dataclass
class DiffIkInfo:
    pg_norm: float
    comp_slack: float
    active: int
    iterations: int


def _velocity_bounds(model: KinematicModel, q: np.ndarray, dt: float, tol: float):
    nv = model.nv
    lb = np.full(nv, -np.inf)
    ub = np.full(nv, np.inf)
    joints = model.joint_slice(q)
    if np.any(joints < model.q_min - 1e-6) or np.any(joints > model.q_max + 1e-6):
        raise ModelError("configuration outside joint limits; cannot solve the velocity QP")
    j0 = nv - model.nl
    lb[j0:] = np.maximum(model.qd_min, (model.q_min - joints) / dt)
    ub[j0:] = np.minimum(model.qd_max, (model.q_max - joints) / dt)
    # clamp tiny inversions caused by configurations sitting on a limit
    bad = lb > ub
    mid = 0.5 * (lb[bad] + ub[bad])
    lb[bad] = mid
    ub[bad] = mid
    if model.floating:
        lb[0:6] = -1e6
        ub[0:6] = 1e6
    return lb, ub


def solve_diff_ik(model: KinematicModel, q: np.ndarray, xdot: np.ndarray,
                  cmap: CorrespondenceMap, dt: float,
                  params: DiffIkParams = None):
    """One frame: minimize the weighted task-velocity error over the
    generalized velocity, subject to velocity limits and the joint-limit
    preview box. Returns (qdot, DiffIkInfo)."""
    p = params or DiffIkParams()
    nv = model.nv
    fr = frames(model, q)
    H = p.damping * np.eye(nv)
    g = np.zeros(nv)
    for k, (_, robot, w, _) in enumerate(cmap.pairs):
        J = site_jacobian(model, q, robot, fr=fr)
        Jw = J * w[:, None]
        H += J.T @ Jw
        g -= Jw.T @ xdot[k]
    lb, ub = _velocity_bounds(model, q, dt, p.limit_tol)
    res = solve_box_qp(H, g, lb, ub, tol=min(1e-10, p.kkt_tol))
    info = DiffIkInfo(
        pg_norm=res.pg_norm,
        comp_slack=res.comp_slack,
        active=int(np.sum(res.active_lo) + np.sum(res.active_hi)),
        iterations=res.iterations,
    )
    return res.x, info


def pose_errors(model: KinematicModel, q: np.ndarray, targets: ScaledTargets,
                frame: int) -> np.ndarray:
    """Stacked (P, 6) world-frame pose errors target - current."""
    fr = frames(model, q)
    P = len(targets.robot_sites)
    err = np.zeros((P, 6))
    for k, name in enumerate(targets.robot_sites):
        cur = site_world(model, fr, name)
        err[k, 0:3] = targets.pos[frame, k] - cur.pos
        rel = quat_mul(targets.quat[frame, k], quat_conj(cur.quat))
        err[k, 3:6] = quat_log(rel)
    return err


def warm_start(model: KinematicModel, targets: ScaledTargets, cmap: CorrespondenceMap,
               params: DiffIkParams) -> np.ndarray:
    """Initial configuration: base from the first pelvis target, joints from
    the nominal pose, then damped position-level iterations on frame 0."""
    q = model.neutral_q()
    nominal = params.nominal_pose
    if nominal is None:
        nominal = 0.5 * (model.q_min + model.q_max)
    q[-model.nl:] = np.clip(nominal, model.q_min, model.q_max)
    if model.floating:
        try:
            k = cmap.robot_sites.index(
                next(r for h, r, _, _ in cmap.pairs if h == cmap.pelvis_site)
            )
            q[0:3] = targets.pos[0, k]
            q[3:7] = targets.quat[0, k]
        except StopIteration:
            log.info("no pelvis pair in the correspondence map; neutral base warm start")
    for _ in range(params.warmstart_iters):
        err = pose_errors(model, q, targets, 0)
        qdot, _ = solve_diff_ik(model, q, err, cmap, dt=1.0, params=params)
        q = integrate_config(model, q, qdot, 1.0)
        if np.max(np.abs(qdot)) < 1e-12:
            break
    return q


def retarget_trajectory(model: KinematicModel, motion: MotionRecord,
                        cmap: CorrespondenceMap,
                        params: DiffIkParams = None,
                        collect_diagnostics: bool = False):
    """Differential-IK sweep over the motion: per frame solve the velocity QP
    on the feedforward target velocity plus a pose-error feedback term, then
    integrate with the same step the limit preview used.

    Returns a ReferenceTrajectory (and the per-frame DiffIkInfo list when
    collect_diagnostics is set)."""
    p = params or DiffIkParams()
    cmap.validate_against(model, motion)
    targets = scale_targets(motion, cmap)
    xdots = target_velocities(targets)
    dt = motion.dt
    T = motion.frames

    q = warm_start(model, targets, cmap, p)
    qs = np.zeros((T, model.nq))
    vels = np.zeros((T, model.nv))
    diags = []
    for t in range(T):
        qs[t] = q
        err = pose_errors(model, q, targets, t)
        cmd = xdots[t] + (p.feedback / dt) * err
        qdot, info = solve_diff_ik(model, q, cmd, cmap, dt, p)
        vels[t] = qdot
        if collect_diagnostics:
            diags.append(info)
        if t < T - 1:
            q = integrate_config(model, q, qdot, dt)

    traj = ReferenceTrajectory(dt=dt, q=qs, vel=vels)
    traj.check_limits(model, tol=p.limit_tol)
    if collect_diagnostics:
        return traj, diags
    return traj
