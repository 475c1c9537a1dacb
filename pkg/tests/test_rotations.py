import numpy as np
import pytest

from kinoretarget import rotations as rot


def random_quat(rng):
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def test_quat_mat_roundtrip():
    rng = np.random.default_rng(0)
    for _ in range(50):
        q = random_quat(rng)
        R = rot.quat_to_mat(q)
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert np.isclose(np.linalg.det(R), 1.0, atol=1e-12)
        q2 = rot.mat_to_quat(R)
        # same rotation up to sign
        assert min(np.linalg.norm(q - q2), np.linalg.norm(q + q2)) < 1e-9


def test_exp_log_roundtrip():
    rng = np.random.default_rng(1)
    for _ in range(50):
        r = rng.normal(size=3)
        r = r / np.linalg.norm(r) * rng.uniform(1e-8, np.pi - 1e-3)
        assert np.allclose(rot.quat_log(rot.quat_from_rotvec(r)), r, atol=1e-9)
        assert np.allclose(rot.so3_log(rot.so3_exp(r)), r, atol=1e-9)


def test_right_jacobian_matches_finite_differences():
    rng = np.random.default_rng(2)
    h = 1e-7
    for _ in range(20):
        r = rng.normal(size=3)
        Jr = rot.so3_right_jacobian(r)
        R0 = rot.so3_exp(r)
        J_fd = np.zeros((3, 3))
        for k in range(3):
            d = np.zeros(3)
            d[k] = h
            # so3_exp(r + d) = R0 @ so3_exp(Jr d)
            J_fd[:, k] = rot.so3_log(R0.T @ rot.so3_exp(r + d)) / h
        assert np.allclose(Jr, J_fd, atol=1e-6)
        assert np.allclose(rot.so3_right_jacobian_inv(r) @ Jr, np.eye(3), atol=1e-9)


def test_slerp_endpoints_and_midpoint():
    rng = np.random.default_rng(3)
    q0 = random_quat(rng)
    q1 = random_quat(rng)
    assert np.allclose(rot.quat_slerp(q0, q1, 0.0), q0 if np.dot(q0, q1) >= 0 else q0, atol=1e-12)
    qm = rot.quat_slerp(q0, q1, 0.5)
    assert np.isclose(np.linalg.norm(qm), 1.0, atol=1e-12)
    # midpoint is equidistant in angle from both ends
    a0 = np.linalg.norm(rot.quat_log(rot.quat_mul(rot.quat_conj(q0), qm)))
    a1 = np.linalg.norm(rot.quat_log(rot.quat_mul(rot.quat_conj(qm), q1 if np.dot(q0, q1) >= 0 else -q1)))
    assert np.isclose(a0, a1, atol=1e-9)


def test_euler_xyz_roundtrip():
    rng = np.random.default_rng(4)
    for _ in range(50):
        ang = rng.uniform([-np.pi, -np.pi / 2 + 0.05, -np.pi], [np.pi, np.pi / 2 - 0.05, np.pi])
        q = rot.euler_xyz_to_quat(ang)
        assert np.allclose(rot.quat_to_euler_xyz(q), ang, atol=1e-9)


def test_euler_convention_is_intrinsic_xyz():
    ang = np.array([0.3, -0.2, 0.7])
    Rx = rot.rotation_angle_axis([1, 0, 0], ang[0])
    Ry = rot.rotation_angle_axis([0, 1, 0], ang[1])
    Rz = rot.rotation_angle_axis([0, 0, 1], ang[2])
    assert np.allclose(rot.quat_to_mat(rot.euler_xyz_to_quat(ang)), Rx @ Ry @ Rz, atol=1e-12)


def test_quat_integrate_preserves_norm():
    q = np.array([1.0, 0.0, 0.0, 0.0])
    rng = np.random.default_rng(5)
    for _ in range(100):
        q = rot.quat_integrate(q, rng.normal(size=3), 0.01)
    assert abs(np.linalg.norm(q) - 1.0) < 1e-12


def test_zero_quaternion_rejected():
    with pytest.raises(ValueError):
        rot.quat_normalize(np.zeros(4))
