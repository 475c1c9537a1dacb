"""Quaternion and SO(3) utilities shared by the kinematics and optimization code.

Conventions used throughout the package:

* quaternions are scalar-first ``[w, x, y, z]`` and unit norm,
* rotation vectors (``rotvec``) are body-frame / right perturbations:
  ``R(q (+) eta) = R(q) @ so3_exp(eta)``,
* Euler angles are intrinsic XYZ: ``R = Rx(a) @ Ry(b) @ Rz(c)``,
  used only in model files and human-readable summaries.
"""

from __future__ import annotations

import numpy as np

_EPS = 1e-12


def cross(a, b):
    """Cross product over the last axis; same math as np.cross for 3-vectors
    but without its per-call axis bookkeeping (hot path)."""
    a = np.asarray(a)
    b = np.asarray(b)
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


def skew(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n < _EPS:
        raise ValueError("cannot normalize near-zero quaternion")
    return q / n


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector v by quaternion q (world = R(q) @ body)."""
    return quat_to_mat(q) @ np.asarray(v, dtype=float)


def quat_to_mat(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def mat_to_quat(R: np.ndarray) -> np.ndarray:
    """Shepperd's method; returns the quaternion with non-negative scalar part."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(R)))
        if i == 0:
            s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
            q = np.array(
                [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
            )
        elif i == 1:
            s = np.sqrt(1.0 - R[0, 0] + R[1, 1] - R[2, 2]) * 2.0
            q = np.array(
                [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
            )
        else:
            s = np.sqrt(1.0 - R[0, 0] - R[1, 1] + R[2, 2]) * 2.0
            q = np.array(
                [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
            )
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def quat_from_rotvec(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    angle = np.linalg.norm(r)
    if angle < 1e-10:
        # second-order series keeps unit norm to machine precision
        q = np.array([1.0 - angle * angle / 8.0, 0.5 * r[0], 0.5 * r[1], 0.5 * r[2]])
        return q / np.linalg.norm(q)
    axis = r / angle
    half = 0.5 * angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


def quat_log(q: np.ndarray) -> np.ndarray:
    """Rotation vector of q, shortest arc (angle in [0, pi])."""
    q = quat_normalize(q)
    if q[0] < 0.0:
        q = -q
    s = np.linalg.norm(q[1:])
    if s < 1e-10:
        return 2.0 * q[1:] / q[0]
    angle = 2.0 * np.arctan2(s, q[0])
    return angle * q[1:] / s


def so3_exp(r: np.ndarray) -> np.ndarray:
    return quat_to_mat(quat_from_rotvec(r))


def so3_log(R: np.ndarray) -> np.ndarray:
    return quat_log(mat_to_quat(R))


def so3_right_jacobian(r: np.ndarray) -> np.ndarray:
    """J_r with so3_exp(r + d) = so3_exp(r) @ so3_exp(J_r(r) @ d) to first order."""
    r = np.asarray(r, dtype=float)
    t = np.linalg.norm(r)
    K = skew(r)
    if t < 1e-6:
        return np.eye(3) - 0.5 * K + (1.0 / 6.0) * (K @ K)
    return (
        np.eye(3)
        - ((1.0 - np.cos(t)) / t**2) * K
        + ((t - np.sin(t)) / t**3) * (K @ K)
    )


def so3_right_jacobian_inv(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    t = np.linalg.norm(r)
    K = skew(r)
    if t < 1e-6:
        return np.eye(3) + 0.5 * K + (1.0 / 12.0) * (K @ K)
    c = 1.0 / t**2 - (1.0 + np.cos(t)) / (2.0 * t * np.sin(t))
    return np.eye(3) + 0.5 * K + c * (K @ K)


def quat_slerp(q0: np.ndarray, q1: np.ndarray, t: float) -> np.ndarray:
    """Shortest-arc spherical interpolation."""
    q0 = quat_normalize(q0)
    q1 = quat_normalize(q1)
    d = float(np.dot(q0, q1))
    if d < 0.0:
        q1 = -q1
        d = -d
    if d > 1.0 - 1e-10:
        q = (1.0 - t) * q0 + t * q1
        return q / np.linalg.norm(q)
    ang = np.arccos(np.clip(d, -1.0, 1.0))
    s = np.sin(ang)
    q = (np.sin((1.0 - t) * ang) / s) * q0 + (np.sin(t * ang) / s) * q1
    return q / np.linalg.norm(q)


def quat_integrate(q: np.ndarray, omega_body: np.ndarray, dt: float) -> np.ndarray:
    """One exponential-map step with body-frame angular velocity; renormalized."""
    return quat_normalize(quat_mul(q, quat_from_rotvec(np.asarray(omega_body) * dt)))


def euler_xyz_to_quat(angles) -> np.ndarray:
    a, b, c = angles
    qx = np.array([np.cos(a / 2), np.sin(a / 2), 0.0, 0.0])
    qy = np.array([np.cos(b / 2), 0.0, np.sin(b / 2), 0.0])
    qz = np.array([np.cos(c / 2), 0.0, 0.0, np.sin(c / 2)])
    return quat_mul(quat_mul(qx, qy), qz)


def quat_to_euler_xyz(q: np.ndarray) -> np.ndarray:
    """Intrinsic XYZ angles; pitch clamped at +-pi/2 near the gimbal singularity."""
    R = quat_to_mat(q)
    b = np.arcsin(np.clip(R[0, 2], -1.0, 1.0))
    if abs(R[0, 2]) < 1.0 - 1e-9:
        a = np.arctan2(-R[1, 2], R[2, 2])
        c = np.arctan2(-R[0, 1], R[0, 0])
    else:
        a = np.arctan2(R[2, 1], R[1, 1])
        c = 0.0
    return np.array([a, b, c])


def rotation_angle_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a (unit) axis."""
    axis = np.asarray(axis, dtype=float)
    K = skew(axis)
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)
