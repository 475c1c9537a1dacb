import numpy as np
import pytest

from kinoretarget import dynamics as dyn
from kinoretarget import kinematics as kin
from kinoretarget.model import ModelError
from tests.conftest import random_state


def test_pendulum_mass_matrix_is_ml2(pendulum):
    D = dyn.mass_matrix(pendulum, np.array([0.3]))
    assert np.allclose(D, [[1.0]], atol=1e-12)


def test_mass_matrix_symmetric_positive_definite(biped12, walker):
    rng = np.random.default_rng(29)
    for model in (biped12, walker):
        for _ in range(10):
            q, _ = random_state(model, rng)
            D = dyn.mass_matrix(model, q)
            assert np.max(np.abs(D - D.T)) < 1e-10
            assert np.min(np.linalg.eigvalsh(D)) > 0.0


def test_crba_columns_match_unit_acceleration_rnea(biped12, walker, double_pendulum):
    rng = np.random.default_rng(31)
    for model in (biped12, walker, double_pendulum):
        for _ in range(5):
            q, _ = random_state(model, rng)
            D = dyn.mass_matrix(model, q)
            G = dyn.gravity_forces(model, q)
            scale = max(1.0, np.max(np.abs(D)))
            for k in range(model.nv):
                e = np.zeros(model.nv)
                e[k] = 1.0
                col = dyn.rnea(model, q, np.zeros(model.nv), e) - G
                assert np.max(np.abs(D[:, k] - col)) / scale < 1e-8


def test_hanging_pendulum_equilibrium(pendulum_hanging):
    H = dyn.bias_forces(pendulum_hanging, np.array([0.0]), np.zeros(1))
    assert np.allclose(H, 0.0, atol=1e-12)


def test_horizontal_pendulum_gravity_torque(pendulum):
    H = dyn.bias_forces(pendulum, np.array([0.0]), np.zeros(1))
    assert np.isclose(abs(H[0]), 9.81, atol=1e-12)


def test_passive_rollout_conserves_energy(double_pendulum):
    model = double_pendulum
    q = np.array([0.4, -0.2])
    v = np.array([0.5, -0.3])

    def rhs(state):
        qq, vv = state[: model.nv], state[model.nv:]
        return np.concatenate([vv, dyn.forward_dynamics(model, qq, vv, np.zeros(model.nl))])

    state = np.concatenate([q, v])
    e0 = dyn.kinetic_energy(model, q, v) + dyn.potential_energy(model, q)
    dt = 1e-3
    for _ in range(1000):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * dt * k1)
        k3 = rhs(state + 0.5 * dt * k2)
        k4 = rhs(state + dt * k3)
        state = state + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    qf, vf = state[: model.nv], state[model.nv:]
    e1 = dyn.kinetic_energy(model, qf, vf) + dyn.potential_energy(model, qf)
    assert abs(e1 - e0) < 1e-6


def test_static_pendulum_with_compensating_torque(pendulum):
    q = np.array([0.0])
    u = dyn.bias_forces(pendulum, q, np.zeros(1))  # gravity torque
    res = dyn.dynamics_residual(pendulum, q, np.zeros(1), np.zeros(1), u, {})
    assert np.max(np.abs(res)) < 1e-10


def test_standing_force_balance_zeroes_base_z(walker, walker_standing_q):
    model = walker
    q = walker_standing_q
    fz = model.total_mass * 9.81 / 4.0
    forces = {name: np.array([0.0, 0.0, fz]) for name in model.contact_site_names}
    res = dyn.dynamics_residual(model, q, np.zeros(model.nv), np.zeros(model.nv),
                                np.zeros(model.nl), forces)
    assert abs(res[2]) < 1e-9


def test_residual_closes_through_forward_dynamics(biped12, walker):
    rng = np.random.default_rng(37)
    for model in (biped12, walker):
        for _ in range(5):
            q, v = random_state(model, rng)
            u = rng.uniform(-50, 50, size=model.nl)
            forces = {
                name: rng.uniform(-30, 120, size=3) for name in model.contact_site_names[:2]
            }
            a = dyn.forward_dynamics(model, q, v, u, forces)
            res = dyn.dynamics_residual(model, q, v, a, u, forces)
            assert np.max(np.abs(res)) < 1e-9


def test_residual_linear_in_accel_torque_forces(walker):
    rng = np.random.default_rng(41)
    model = walker
    q, v = random_state(model, rng)
    site = model.contact_site_names[0]

    def res(a, u, f):
        return dyn.dynamics_residual(model, q, v, a, u, {site: f})

    a1, a2 = rng.normal(size=(2, model.nv))
    u1, u2 = rng.normal(size=(2, model.nl))
    f1, f2 = rng.normal(size=(2, 3))
    base = res(np.zeros(model.nv), np.zeros(model.nl), np.zeros(3))
    lhs = res(a1 + a2, u1 + u2, f1 + f2)
    rhs = res(a1, u1, f1) + res(a2, u2, f2) - base
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_force_on_unknown_site_rejected(walker):
    with pytest.raises(ModelError, match="unknown site"):
        dyn.dynamics_residual(
            walker,
            walker.neutral_q(),
            np.zeros(walker.nv),
            np.zeros(walker.nv),
            np.zeros(walker.nl),
            {"nope": np.zeros(3)},
        )


def fd_residual_jacobians(model, q, v, a, u, forces, h=1e-6):
    nv = model.nv

    def val(qq, vv):
        return dyn.dynamics_residual(model, qq, vv, a, u, forces)

    dq = np.zeros((nv, nv))
    dv = np.zeros((nv, nv))
    for k in range(nv):
        d = np.zeros(nv)
        d[k] = 1.0
        qp = kin.integrate_config(model, q, d, h)
        qm = kin.integrate_config(model, q, d, -h)
        dq[:, k] = (val(qp, v) - val(qm, v)) / (2 * h)
        dv[:, k] = (val(q, v + h * d) - val(q, v - h * d)) / (2 * h)
    return dq, dv


def test_knot_dynamics_derivatives_match_fd(biped12, walker):
    rng = np.random.default_rng(43)
    for model in (biped12, walker):
        for _ in range(3):
            q, v = random_state(model, rng)
            a = rng.normal(size=model.nv)
            u = rng.uniform(-40, 40, size=model.nl)
            sites = list(model.contact_site_names)
            forces = {sites[0]: rng.uniform(-50, 150, size=3),
                      sites[2]: rng.uniform(-50, 150, size=3)}
            knot = dyn.KnotDyn(model, q, v, a, u, forces, sites=sites)
            assert np.allclose(
                knot.residual, dyn.dynamics_residual(model, q, v, a, u, forces), atol=1e-10
            )
            dq_fd, dv_fd = fd_residual_jacobians(model, q, v, a, u, forces)
            scale = max(1.0, np.max(np.abs(dq_fd)))
            assert np.max(np.abs(knot.dres_dq - dq_fd)) / scale < 1e-5
            scale_v = max(1.0, np.max(np.abs(dv_fd)))
            assert np.max(np.abs(knot.dres_dv - dv_fd)) / scale_v < 1e-5
            # acceleration block is the mass matrix
            assert np.allclose(knot.mass, dyn.mass_matrix(model, q), atol=1e-10)


def test_knot_site_derivatives_match_fd(walker):
    rng = np.random.default_rng(47)
    model = walker
    h = 1e-6
    q, v = random_state(model, rng)
    a = rng.normal(size=model.nv)
    sites = list(model.contact_site_names)
    knot = dyn.KnotDyn(model, q, v, a, np.zeros(model.nl), {}, sites=sites)
    for name in sites:
        d = knot.site_data[name]
        assert np.allclose(d["vel"], kin.site_velocity(model, q, v, name)[0:3], atol=1e-10)
        assert np.allclose(d["acc"], kin.site_acceleration(model, q, v, a, name)[0:3], atol=1e-10)
        assert np.allclose(d["dpos_dq"], d["J"], atol=1e-10)
        for k in range(model.nv):
            e = np.zeros(model.nv)
            e[k] = 1.0
            qp = kin.integrate_config(model, q, e, h)
            qm = kin.integrate_config(model, q, e, -h)
            fd_vel_q = (kin.site_velocity(model, qp, v, name)[0:3]
                        - kin.site_velocity(model, qm, v, name)[0:3]) / (2 * h)
            fd_acc_q = (kin.site_acceleration(model, qp, v, a, name)[0:3]
                        - kin.site_acceleration(model, qm, v, a, name)[0:3]) / (2 * h)
            fd_acc_v = (kin.site_acceleration(model, q, v + h * e, a, name)[0:3]
                        - kin.site_acceleration(model, q, v - h * e, a, name)[0:3]) / (2 * h)
            assert np.max(np.abs(d["dvel_dq"][:, k] - fd_vel_q)) < 2e-5 * max(1, np.max(np.abs(fd_vel_q)))
            assert np.max(np.abs(d["dacc_dq"][:, k] - fd_acc_q)) < 2e-5 * max(1, np.max(np.abs(fd_acc_q)))
            assert np.max(np.abs(d["dacc_dv"][:, k] - fd_acc_v)) < 2e-5 * max(1, np.max(np.abs(fd_acc_v)))
        assert np.allclose(d["dvel_dv"], d["J"], atol=1e-9)
