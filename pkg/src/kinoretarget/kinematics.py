"""Forward kinematics, site Jacobians and world-frame velocity/acceleration
propagation over the body tree.

All body/site quantities are expressed in the world frame. A site Jacobian
maps the generalized velocity (layout in :mod:`kinoretarget.model`) to the
site's world spatial velocity, rows ordered (linear xyz, angular xyz).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import KinematicModel, ModelError
from .rotations import (
    cross,
    mat_to_quat,
    quat_from_rotvec,
    quat_log,
    quat_mul,
    quat_conj,
    quat_normalize,
    quat_to_mat,
    rotation_angle_axis,
)

GRAVITY = np.array([0.0, 0.0, -9.81])


@dataclass(frozen=True)
class SitePose:
    pos: np.ndarray
    quat: np.ndarray

    @property
    def rot(self) -> np.ndarray:
        return quat_to_mat(self.quat)


class FrameData:
    """World pose of every body for one configuration, plus per-joint world
    axes and origins (filled lazily by the velocity pass and Jacobians)."""

    __slots__ = ("R", "x", "axis_w", "q")

    def __init__(self, model: KinematicModel, q: np.ndarray):
        q = model.check_q(q)
        nb = model.nb
        R = np.empty((nb, 3, 3))
        x = np.empty((nb, 3))
        axis_w = np.zeros((nb, 3))
        if model.floating:
            R[0] = quat_to_mat(q[3:7])
            x[0] = q[0:3]
            joints = q[7:]
        else:
            R[0] = model._R_fix[0]
            x[0] = model._t_fix[0]
            joints = q
        for i in range(1, nb):
            p = model.parent[i]
            Rj = model._R_fix[i] @ rotation_angle_axis(model._axes[i], joints[i - 1])
            R[i] = R[p] @ Rj
            x[i] = x[p] + R[p] @ model._t_fix[i]
            axis_w[i] = R[i] @ model._axes[i]
        self.R = R
        self.x = x
        self.axis_w = axis_w
        self.q = q


def frames(model: KinematicModel, q: np.ndarray) -> FrameData:
    return FrameData(model, q)


def site_world(model: KinematicModel, fr: FrameData, name: str) -> SitePose:
    s = model.site(name)
    Rb = fr.R[s.body]
    pos = fr.x[s.body] + Rb @ s.pos
    quat = quat_normalize(quat_mul(mat_to_quat(Rb), s.quat))
    return SitePose(pos=pos, quat=quat)


def forward_kinematics(model: KinematicModel, q: np.ndarray) -> dict:
    """World pose of every site."""
    fr = frames(model, q)
    return {name: site_world(model, fr, name) for name in model.sites}


def _ancestors(model: KinematicModel, body: int):
    chain = []
    i = body
    while i > 0:
        chain.append(i)
        i = model.parent[i]
    return chain


def site_jacobian(model: KinematicModel, q: np.ndarray, name: str, fr: FrameData = None) -> np.ndarray:
    """6 x nv geometric Jacobian of a site, rows (linear xyz, angular xyz)."""
    if fr is None:
        fr = frames(model, q)
    s = model.site(name)
    p_site = fr.x[s.body] + fr.R[s.body] @ s.pos
    J = np.zeros((6, model.nv))
    if model.floating:
        R0 = fr.R[0]
        J[0:3, 0:3] = np.eye(3)
        # base angular velocity is body-frame: world omega = R0 @ w_b
        r = p_site - fr.x[0]
        J[0:3, 3:6] = -_skew(r) @ R0
        J[3:6, 3:6] = R0
    for i in _ancestors(model, s.body):
        col = model.dof_col[i]
        a = fr.axis_w[i]
        J[0:3, col] = cross(a, p_site - fr.x[i])
        J[3:6, col] = a
    return J


def _skew(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


class MotionData:
    """World angular/linear velocity and acceleration of each body origin for
    one (q, v, a) state. ``a = None`` propagates zero acceleration, which is
    what the Jacobian drift term needs."""

    __slots__ = ("w", "vel", "alpha", "acc", "fr")

    def __init__(self, model: KinematicModel, fr: FrameData, v: np.ndarray, a: np.ndarray = None,
                 base_lin_acc_offset: np.ndarray = None):
        nb = model.nb
        v = np.asarray(v, dtype=float)
        if v.shape != (model.nv,):
            raise ModelError(f"velocity length {v.shape} != ({model.nv},)")
        if a is None:
            a = np.zeros(model.nv)
        else:
            a = np.asarray(a, dtype=float)
            if a.shape != (model.nv,):
                raise ModelError(f"acceleration length {a.shape} != ({model.nv},)")
        w = np.zeros((nb, 3))
        vel = np.zeros((nb, 3))
        alpha = np.zeros((nb, 3))
        acc = np.zeros((nb, 3))
        if model.floating:
            R0 = fr.R[0]
            w[0] = R0 @ v[3:6]
            vel[0] = v[0:3]
            alpha[0] = R0 @ a[3:6]
            acc[0] = a[0:3]
            jv = v[6:]
            ja = a[6:]
        else:
            jv = v
            ja = a
        if base_lin_acc_offset is not None:
            acc[0] = acc[0] + base_lin_acc_offset
        for i in range(1, nb):
            p = model.parent[i]
            aw = fr.axis_w[i]
            r = fr.x[i] - fr.x[p]
            td, tdd = jv[i - 1], ja[i - 1]
            w[i] = w[p] + aw * td
            vel[i] = vel[p] + cross(w[p], r)
            alpha[i] = alpha[p] + aw * tdd + cross(w[p], aw * td)
            acc[i] = acc[p] + cross(alpha[p], r) + cross(w[p], cross(w[p], r))
        self.w = w
        self.vel = vel
        self.alpha = alpha
        self.acc = acc
        self.fr = fr


def site_velocity(model: KinematicModel, q: np.ndarray, v: np.ndarray, name: str,
                  fr: FrameData = None, mo: MotionData = None) -> np.ndarray:
    """World spatial velocity (linear xyz, angular xyz) of a site."""
    if fr is None:
        fr = frames(model, q)
    if mo is None:
        mo = MotionData(model, fr, v)
    s = model.site(name)
    r = fr.R[s.body] @ s.pos
    lin = mo.vel[s.body] + cross(mo.w[s.body], r)
    return np.concatenate([lin, mo.w[s.body]])


def jacobian_drift(model: KinematicModel, q: np.ndarray, v: np.ndarray, name: str,
                   fr: FrameData = None) -> np.ndarray:
    """Site spatial acceleration under zero generalized acceleration, i.e. the
    drift term that pairs with the site Jacobian; rows (linear, angular)."""
    if fr is None:
        fr = frames(model, q)
    mo = MotionData(model, fr, v, a=None)
    s = model.site(name)
    r = fr.R[s.body] @ s.pos
    lin = mo.acc[s.body] + cross(mo.alpha[s.body], r) + cross(
        mo.w[s.body], cross(mo.w[s.body], r)
    )
    return np.concatenate([lin, mo.alpha[s.body]])


def site_acceleration(model: KinematicModel, q: np.ndarray, v: np.ndarray, a: np.ndarray,
                      name: str) -> np.ndarray:
    """World spatial acceleration of a site for a full (q, v, a) state."""
    fr = frames(model, q)
    mo = MotionData(model, fr, v, a=a)
    s = model.site(name)
    r = fr.R[s.body] @ s.pos
    lin = mo.acc[s.body] + cross(mo.alpha[s.body], r) + cross(
        mo.w[s.body], cross(mo.w[s.body], r)
    )
    return np.concatenate([lin, mo.alpha[s.body]])


# -- configuration-space helpers ----------------------------------------------

def integrate_config(model: KinematicModel, q: np.ndarray, v: np.ndarray, dt: float) -> np.ndarray:
    """Explicit step q (+) dt v; quaternion via the exponential map, renormalized."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if not model.floating:
        return q + dt * v
    out = q.copy()
    out[0:3] += dt * v[0:3]
    out[3:7] = quat_normalize(quat_mul(q[3:7], quat_from_rotvec(dt * v[3:6])))
    out[7:] += dt * v[6:]
    return out


def config_difference(model: KinematicModel, q0: np.ndarray, q1: np.ndarray, dt: float) -> np.ndarray:
    """Velocity that carries q0 to q1 in dt under integrate_config."""
    if not model.floating:
        return (q1 - q0) / dt
    v = np.zeros(model.nv)
    v[0:3] = (q1[0:3] - q0[0:3]) / dt
    v[3:6] = quat_log(quat_mul(quat_conj(q0[3:7]), q1[3:7])) / dt
    v[6:] = (q1[7:] - q0[7:]) / dt
    return v
