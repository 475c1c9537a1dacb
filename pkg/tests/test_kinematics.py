import numpy as np
import pytest

from kinoretarget import kinematics as kin
from kinoretarget.model import ModelError
from kinoretarget.rotations import quat_to_mat, so3_log
from tests.conftest import random_state


def test_pendulum_tip_quarter_turn(pendulum):
    pose = kin.forward_kinematics(pendulum, np.array([np.pi / 2]))["tip"]
    assert np.allclose(pose.pos, [0.0, 0.0, 1.0], atol=1e-12)


def test_pendulum_tip_identity(pendulum):
    pose = kin.forward_kinematics(pendulum, np.array([0.0]))["tip"]
    assert np.allclose(pose.pos, [1.0, 0.0, 0.0], atol=1e-12)


def symbolic_two_link_tip(t1, t2):
    # planar chain in the x-z plane, links of length 1, angles about -y
    return np.array(
        [np.cos(t1) + np.cos(t1 + t2), 0.0, np.sin(t1) + np.sin(t1 + t2)]
    )


def test_double_pendulum_matches_symbolic_fk(double_pendulum):
    rng = np.random.default_rng(7)
    for t1, t2 in [(np.pi / 2, -np.pi / 2)] + list(rng.uniform(-3, 3, size=(20, 2))):
        pose = kin.forward_kinematics(double_pendulum, np.array([t1, t2]))["tip"]
        assert np.allclose(pose.pos, symbolic_two_link_tip(t1, t2), atol=1e-12)
    tip = kin.forward_kinematics(double_pendulum, np.array([np.pi / 2, -np.pi / 2]))["tip"]
    assert np.allclose(tip.pos, [1.0, 0.0, 1.0], atol=1e-12)


def test_base_site_jacobian_identity_block(biped5):
    q = biped5.neutral_q()
    J = kin.site_jacobian(biped5, q, "pelvis_site")
    assert np.allclose(J[0:3, 0:3], np.eye(3), atol=1e-12)
    assert np.allclose(J[0:3, 6:], 0.0, atol=1e-12)


def fd_site_jacobian(model, q, name, h=1e-6):
    """Central-difference Jacobian of the site pose in velocity coordinates."""
    J = np.zeros((6, model.nv))
    for k in range(model.nv):
        d = np.zeros(model.nv)
        d[k] = 1.0
        qp = kin.integrate_config(model, q, d, h)
        qm = kin.integrate_config(model, q, d, -h)
        pp = kin.forward_kinematics(model, qp)[name]
        pm = kin.forward_kinematics(model, qm)[name]
        J[0:3, k] = (pp.pos - pm.pos) / (2 * h)
        J[3:6, k] = so3_log(quat_to_mat(pp.quat) @ quat_to_mat(pm.quat).T) / (2 * h)
    return J


@pytest.mark.parametrize("site", ["tip"])
def test_pendulum_tip_jacobian_finite_difference(pendulum, site):
    q = np.array([0.0])
    J = kin.site_jacobian(pendulum, q, site)
    J_fd = fd_site_jacobian(pendulum, q, site)
    assert np.allclose(J, J_fd, atol=1e-6)
    # at theta=0 the tip moves straight up for this axis convention
    assert np.isclose(J[2, 0], 1.0, atol=1e-9)


def test_site_jacobians_match_fd_on_random_states(biped12, walker, double_pendulum):
    rng = np.random.default_rng(11)
    for model in (biped12, walker, double_pendulum):
        for _ in range(5):
            q, _ = random_state(model, rng)
            for name in model.sites:
                J = kin.site_jacobian(model, q, name)
                J_fd = fd_site_jacobian(model, q, name)
                scale = max(1.0, np.max(np.abs(J_fd)))
                assert np.max(np.abs(J - J_fd)) / scale < 1e-5


def test_drift_zero_for_zero_velocity(biped5):
    q = biped5.neutral_q()
    drift = kin.jacobian_drift(biped5, q, np.zeros(biped5.nv), "left_heel")
    assert np.allclose(drift, 0.0, atol=1e-14)


def test_pendulum_drift_is_centripetal(pendulum):
    omega = 3.0
    drift = kin.jacobian_drift(pendulum, np.array([0.0]), np.array([omega]), "tip")
    # tip at (1,0,0), rotating about the pivot: acceleration l*w^2 toward it
    assert np.allclose(drift[0:3], [-omega**2, 0.0, 0.0], atol=1e-12)
    assert np.allclose(drift[3:6], 0.0, atol=1e-12)


def test_drift_matches_fd_of_site_velocity(biped12, double_pendulum):
    rng = np.random.default_rng(13)
    h = 1e-6
    for model in (biped12, double_pendulum):
        for _ in range(5):
            q, v = random_state(model, rng)
            for name in list(model.sites)[:3]:
                drift = kin.jacobian_drift(model, q, v, name)
                qp = kin.integrate_config(model, q, v, h)
                qm = kin.integrate_config(model, q, v, -h)
                fd = (
                    kin.site_velocity(model, qp, v, name)
                    - kin.site_velocity(model, qm, v, name)
                ) / (2 * h)
                scale = max(1.0, np.max(np.abs(fd)))
                assert np.max(np.abs(drift - fd)) / scale < 1e-4


def test_site_velocity_equals_jacobian_times_v(walker):
    rng = np.random.default_rng(17)
    q, v = random_state(walker, rng)
    for name in walker.sites:
        J = kin.site_jacobian(walker, q, name)
        assert np.allclose(kin.site_velocity(walker, q, v, name), J @ v, atol=1e-10)


def test_quaternion_norm_after_many_steps(walker):
    rng = np.random.default_rng(19)
    q = walker.neutral_q()
    v = np.zeros(walker.nv)
    for _ in range(10_000):
        v[3:6] = rng.normal(size=3)
        q = kin.integrate_config(walker, q, v, 1e-3)
    assert abs(np.linalg.norm(q[3:7]) - 1.0) < 1e-9


def test_integrate_and_difference_are_inverse(walker):
    rng = np.random.default_rng(23)
    q, v = random_state(walker, rng)
    dt = 0.01
    q1 = kin.integrate_config(walker, q, v, dt)
    assert np.allclose(kin.config_difference(walker, q, q1, dt), v, atol=1e-9)


def test_bad_velocity_length(walker):
    with pytest.raises(ModelError):
        kin.site_velocity(walker, walker.neutral_q(), np.zeros(3), "pelvis_site")
