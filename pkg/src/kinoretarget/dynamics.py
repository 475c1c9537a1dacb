"""Rigid-body dynamics over the model tree: composite-rigid-body mass matrix,
recursive Newton-Euler inverse dynamics, contact-aware residuals, and
hand-propagated first derivatives of all of it for the trajectory optimizer.

Spatial quantities are expressed at the world origin with (angular, linear)
block ordering; per-dof motion vectors are

* base linear i:   (0, e_i)
* base angular k:  (R0 e_k, x0 x R0 e_k)        (body-frame rate)
* revolute joint:  (a_w,   x_j x a_w)

so the generalized-force dual of the base angular dofs is the body-frame
torque about the base origin, consistent with the velocity layout.
"""

from __future__ import annotations

import numpy as np

from .kinematics import GRAVITY, FrameData, MotionData, frames, site_jacobian
from .model import KinematicModel, ModelError
from .rotations import cross, skew


def _dof_table(model: KinematicModel, fr: FrameData):
    """(body, S) per velocity coordinate, S a 6-vector (angular, linear)."""
    dofs = []
    if model.floating:
        R0, x0 = fr.R[0], fr.x[0]
        for i in range(3):
            S = np.zeros(6)
            S[3 + i] = 1.0
            dofs.append((0, S))
        for k in range(3):
            a = R0[:, k]
            dofs.append((0, np.concatenate([a, cross(x0, a)])))
    for i in range(1, model.nb):
        a = fr.axis_w[i]
        dofs.append((i, np.concatenate([a, cross(fr.x[i], a)])))
    return dofs


def _spatial_inertia_origin(mass: float, c_world: np.ndarray, I_com_world: np.ndarray) -> np.ndarray:
    cx = skew(c_world)
    I6 = np.zeros((6, 6))
    I6[0:3, 0:3] = I_com_world + mass * (cx @ cx.T)
    I6[0:3, 3:6] = mass * cx
    I6[3:6, 0:3] = mass * cx.T
    I6[3:6, 3:6] = mass * np.eye(3)
    return I6


def mass_matrix(model: KinematicModel, q: np.ndarray, fr: FrameData = None) -> np.ndarray:
    """Composite-rigid-body recursion; symmetric positive definite."""
    if fr is None:
        fr = frames(model, q)
    nb = model.nb
    Ic = np.zeros((nb, 6, 6))
    for i in range(nb):
        b = model.bodies[i]
        c_w = fr.x[i] + fr.R[i] @ b.com
        Ic[i] = _spatial_inertia_origin(b.mass, c_w, fr.R[i] @ b.inertia @ fr.R[i].T)
    for i in range(nb - 1, 0, -1):
        Ic[model.parent[i]] += Ic[i]

    dofs = _dof_table(model, fr)
    body_dofs = {}
    for idx, (b, _) in enumerate(dofs):
        body_dofs.setdefault(b, []).append(idx)

    D = np.zeros((model.nv, model.nv))
    for i, (bi, Si) in enumerate(dofs):
        F = Ic[bi] @ Si
        b = bi
        while b != -1:
            for j in body_dofs.get(b, ()):
                if j <= i:
                    D[i, j] = D[j, i] = dofs[j][1] @ F
            b = model.parent[b]
    return D


def rnea(model: KinematicModel, q: np.ndarray, v: np.ndarray, a: np.ndarray,
         gravity: np.ndarray = GRAVITY, fr: FrameData = None, mo: MotionData = None) -> np.ndarray:
    """Generalized force D a + H(q, v) required to realize acceleration a."""
    if fr is None:
        fr = frames(model, q)
    if mo is None:
        mo = MotionData(model, fr, v, a=a)
    nb = model.nb
    gravity = np.asarray(gravity, dtype=float)

    f_sub = np.zeros((nb, 3))
    n_sub = np.zeros((nb, 3))
    for i in range(nb):
        b = model.bodies[i]
        if b.mass == 0.0 and not np.any(b.inertia):
            continue
        c_w = fr.x[i] + fr.R[i] @ b.com
        rc = c_w - fr.x[i]
        a_c = (
            mo.acc[i]
            - gravity
            + cross(mo.alpha[i], rc)
            + cross(mo.w[i], cross(mo.w[i], rc))
        )
        Iw = fr.R[i] @ b.inertia @ fr.R[i].T
        F = b.mass * a_c
        N = Iw @ mo.alpha[i] + cross(mo.w[i], Iw @ mo.w[i])
        f_sub[i] += F
        n_sub[i] += N + cross(c_w, F)
    for i in range(nb - 1, 0, -1):
        p = model.parent[i]
        f_sub[p] += f_sub[i]
        n_sub[p] += n_sub[i]

    tau = np.zeros(model.nv)
    if model.floating:
        R0, x0 = fr.R[0], fr.x[0]
        tau[0:3] = f_sub[0]
        tau[3:6] = R0.T @ (n_sub[0] - cross(x0, f_sub[0]))
    for i in range(1, nb):
        col = model.dof_col[i]
        tau[col] = fr.axis_w[i] @ (n_sub[i] - cross(fr.x[i], f_sub[i]))
    return tau


def bias_forces(model: KinematicModel, q: np.ndarray, v: np.ndarray,
                gravity: np.ndarray = GRAVITY) -> np.ndarray:
    """Coriolis, centrifugal and gravity generalized forces H(q, v)."""
    return rnea(model, q, v, np.zeros(model.nv), gravity=gravity)


def gravity_forces(model: KinematicModel, q: np.ndarray, gravity: np.ndarray = GRAVITY) -> np.ndarray:
    return rnea(model, q, np.zeros(model.nv), np.zeros(model.nv), gravity=gravity)


def actuation_matrix(model: KinematicModel) -> np.ndarray:
    B = np.zeros((model.nv, model.nl))
    B[model.nv - model.nl:, :] = np.eye(model.nl)
    return B


def contact_force_generalized(model: KinematicModel, fr: FrameData, site_name: str,
                              f_world: np.ndarray) -> np.ndarray:
    """J_lin(q)^T f for a point contact at a site (linear force only)."""
    s = model.site(site_name)
    p_s = fr.x[s.body] + fr.R[s.body] @ s.pos
    g = np.zeros(model.nv)
    if model.floating:
        g[0:3] = f_world
        g[3:6] = fr.R[0].T @ cross(p_s - fr.x[0], f_world)
    i = s.body
    while i > 0:
        g[model.dof_col[i]] = fr.axis_w[i] @ cross(p_s - fr.x[i], f_world)
        i = model.parent[i]
    return g


def dynamics_residual(model: KinematicModel, q: np.ndarray, v: np.ndarray, a: np.ndarray,
                      u: np.ndarray, forces: dict, gravity: np.ndarray = GRAVITY) -> np.ndarray:
    """D a + H - B u - sum_sites J_lin^T f; zero along a feasible trajectory."""
    u = np.asarray(u, dtype=float)
    if u.shape != (model.nl,):
        raise ModelError(f"torque length {u.shape} != ({model.nl},)")
    fr = frames(model, q)
    res = rnea(model, q, v, a, gravity=gravity, fr=fr)
    res[model.nv - model.nl:] -= u
    for name, f in forces.items():
        if name not in model.sites:
            raise ModelError(f"contact force supplied for unknown site {name!r}")
        res -= contact_force_generalized(model, fr, name, np.asarray(f, dtype=float))
    return res


def forward_dynamics(model: KinematicModel, q: np.ndarray, v: np.ndarray, u: np.ndarray,
                     forces: dict = None, gravity: np.ndarray = GRAVITY) -> np.ndarray:
    """Acceleration from torques and contact forces (dense solve)."""
    fr = frames(model, q)
    rhs = -bias_forces(model, q, v, gravity=gravity)
    rhs[model.nv - model.nl:] += np.asarray(u, dtype=float)
    for name, f in (forces or {}).items():
        rhs += contact_force_generalized(model, fr, name, np.asarray(f, dtype=float))
    return np.linalg.solve(mass_matrix(model, q, fr=fr), rhs)


def kinetic_energy(model: KinematicModel, q: np.ndarray, v: np.ndarray) -> float:
    return 0.5 * float(v @ mass_matrix(model, q) @ v)


def potential_energy(model: KinematicModel, q: np.ndarray, gravity: np.ndarray = GRAVITY) -> float:
    fr = frames(model, q)
    pe = 0.0
    for i, b in enumerate(model.bodies):
        c_w = fr.x[i] + fr.R[i] @ b.com
        pe -= b.mass * float(np.asarray(gravity) @ c_w)
    return pe


# -- batched first derivatives for the trajectory optimizer --------------------




class KnotDyn:
    """Values and analytic Jacobian blocks of everything the transcription
    needs at one knot: the contact-aware dynamics residual and, per requested
    contact site, the point's world position, linear velocity and linear
    acceleration.

    Derivatives are propagated through the same recursions as the values
    (forward mode, batched over the 2*nv tangent directions: configuration
    perturbations in velocity coordinates first, then velocity perturbations).
    Derivatives with respect to accelerations, torques and forces are assembled
    from the mass matrix, the actuation map and the site Jacobians.
    """

    def __init__(self, model: KinematicModel, q, v, a, u, forces: dict,
                 gravity=GRAVITY, sites=(), want_derivs: bool = True):
        self.model = model
        nv = model.nv
        nb = model.nb
        gravity = np.asarray(gravity, dtype=float)
        fr = frames(model, q)
        self.fr = fr
        K = 2 * nv if want_derivs else 0
        self.K = K

        v = np.asarray(v, dtype=float)
        a = np.asarray(a, dtype=float)
        u = np.asarray(u, dtype=float)

        R, x = fr.R, fr.x
        w = np.zeros((nb, 3))
        vel = np.zeros((nb, 3))
        alpha = np.zeros((nb, 3))
        acc = np.zeros((nb, 3))
        if want_derivs:
            dR = np.zeros((nb, K, 3, 3))
            dx = np.zeros((nb, K, 3))
            dw = np.zeros((nb, K, 3))
            dvel = np.zeros((nb, K, 3))
            dalpha = np.zeros((nb, K, 3))
            dacc = np.zeros((nb, K, 3))

        if model.floating:
            R0 = R[0]
            w[0] = R0 @ v[3:6]
            vel[0] = v[0:3]
            alpha[0] = R0 @ a[3:6]
            jv, ja = v[6:], a[6:]
            acc[0] = a[0:3]
            if want_derivs:
                for k in range(3):
                    e = np.zeros(3)
                    e[k] = 1.0
                    dx[0][k] = e                      # config dir: base position
                    dR[0][3 + k] = R0 @ skew(e)       # config dir: base orientation
                    dvel[0][nv + k] = e               # velocity dir: base linear
                dw[0] = np.einsum("kij,j->ki", dR[0], v[3:6])
                dalpha[0] = np.einsum("kij,j->ki", dR[0], a[3:6])
                for k in range(3):
                    dw[0][nv + 3 + k] += R0[:, k]     # velocity dir: base angular
        else:
            jv, ja = v, a

        for i in range(1, nb):
            p = model.parent[i]
            aw = fr.axis_w[i]
            r = x[i] - x[p]
            td, tdd = jv[i - 1], ja[i - 1]
            w[i] = w[p] + aw * td
            vel[i] = vel[p] + cross(w[p], r)
            alpha[i] = alpha[p] + aw * tdd + cross(w[p], aw * td)
            acc[i] = acc[p] + cross(alpha[p], r) + cross(w[p], cross(w[p], r))
            if want_derivs:
                col = model.dof_col[i]
                M = R[p].T @ R[i]          # fixed transform times joint rotation
                dR[i] = dR[p] @ M
                dR[i][col] += R[i] @ skew(model._axes[i])
                dx[i] = dx[p] + np.einsum("kij,j->ki", dR[p], model._t_fix[i])
                daw = np.einsum("kij,j->ki", dR[i], model._axes[i])
                dr = dx[i] - dx[p]
                dw[i] = dw[p] + daw * td
                dw[i][nv + col] += aw
                dvel[i] = dvel[p] + cross(dw[p], r) + cross(w[p], dr)
                dalpha[i] = dalpha[p] + daw * tdd + cross(dw[p], aw * td) + cross(w[p], daw * td)
                dalpha[i][nv + col] += cross(w[p], aw)
                dacc[i] = (
                    dacc[p]
                    + cross(dalpha[p], r)
                    + cross(alpha[p], dr)
                    + cross(dw[p], cross(w[p], r))
                    + cross(w[p], cross(dw[p], r) + cross(w[p], dr))
                )

        # Newton-Euler sweep with gravity offset, with sensitivities
        f_sub = np.zeros((nb, 3))
        n_sub = np.zeros((nb, 3))
        if want_derivs:
            df_sub = np.zeros((nb, K, 3))
            dn_sub = np.zeros((nb, K, 3))
        for i in range(nb):
            b = model.bodies[i]
            if b.mass == 0.0 and not np.any(b.inertia):
                continue
            c_w = x[i] + R[i] @ b.com
            rc = c_w - x[i]
            a_c = acc[i] - gravity + cross(alpha[i], rc) + cross(w[i], cross(w[i], rc))
            Iw = R[i] @ b.inertia @ R[i].T
            F = b.mass * a_c
            N = Iw @ alpha[i] + cross(w[i], Iw @ w[i])
            f_sub[i] += F
            n_sub[i] += N + cross(c_w, F)
            if want_derivs:
                dc = dx[i] + np.einsum("kij,j->ki", dR[i], b.com)
                drc = dc - dx[i]
                da_c = (
                    dacc[i]
                    + cross(dalpha[i], rc)
                    + cross(alpha[i], drc)
                    + cross(dw[i], cross(w[i], rc))
                    + cross(w[i], cross(dw[i], rc) + cross(w[i], drc))
                )
                IRt = b.inertia @ R[i].T
                dIw = np.einsum("kij,jl->kil", dR[i], IRt) + np.einsum(
                    "ij,klj->kil", R[i] @ b.inertia, dR[i]
                )
                dF = b.mass * da_c
                dN = (
                    np.einsum("kij,j->ki", dIw, alpha[i])
                    + np.einsum("ij,kj->ki", Iw, dalpha[i])
                    + cross(dw[i], Iw @ w[i])
                    + cross(w[i], np.einsum("kij,j->ki", dIw, w[i]) + np.einsum("ij,kj->ki", Iw, dw[i]))
                )
                df_sub[i] += dF
                dn_sub[i] += dN + cross(dc, F) + cross(c_w, dF)
        for i in range(nb - 1, 0, -1):
            p = model.parent[i]
            f_sub[p] += f_sub[i]
            n_sub[p] += n_sub[i]
            if want_derivs:
                df_sub[p] += df_sub[i]
                dn_sub[p] += dn_sub[i]

        tau = np.zeros(nv)
        dtau = np.zeros((K, nv)) if want_derivs else None
        if model.floating:
            R0, x0 = R[0], x[0]
            tau[0:3] = f_sub[0]
            m0 = n_sub[0] - cross(x0, f_sub[0])
            tau[3:6] = R0.T @ m0
            if want_derivs:
                dtau[:, 0:3] = df_sub[0]
                dm0 = dn_sub[0] - cross(dx[0], f_sub[0]) - cross(x0, df_sub[0])
                dtau[:, 3:6] = np.einsum("kji,j->ki", dR[0], m0) + np.einsum(
                    "ji,kj->ki", R0, dm0
                )
        for i in range(1, nb):
            col = model.dof_col[i]
            mi = n_sub[i] - cross(x[i], f_sub[i])
            tau[col] = fr.axis_w[i] @ mi
            if want_derivs:
                daw = np.einsum("kij,j->ki", dR[i], model._axes[i])
                dmi = dn_sub[i] - cross(dx[i], f_sub[i]) - cross(x[i], df_sub[i])
                dtau[:, col] = daw @ mi + np.einsum("j,kj->k", fr.axis_w[i], dmi)

        # contact forces enter as generalized forces J_lin^T f
        self.site_data = {}
        res = tau.copy()
        res[nv - model.nl:] -= u
        dres = dtau.copy() if want_derivs else None
        for name, f in forces.items():
            s = model.site(name)
            f = np.asarray(f, dtype=float)
            g = contact_force_generalized(model, fr, name, f)
            res -= g
            if want_derivs:
                bidx = s.body
                p_s = x[bidx] + R[bidx] @ s.pos
                dp_s = dx[bidx] + np.einsum("kij,j->ki", dR[bidx], s.pos)
                dg = np.zeros((K, nv))
                if model.floating:
                    rs0 = p_s - x[0]
                    m_f = cross(rs0, f)
                    dg[:, 3:6] = np.einsum("kji,j->ki", dR[0], m_f) + np.einsum(
                        "ji,kj->ki", R[0], cross(dp_s - dx[0], f)
                    )
                ib = bidx
                while ib > 0:
                    colb = model.dof_col[ib]
                    awb = fr.axis_w[ib]
                    dawb = np.einsum("kij,j->ki", dR[ib], model._axes[ib])
                    rj = p_s - x[ib]
                    dg[:, colb] = dawb @ cross(rj, f) + np.einsum(
                        "j,kj->k", awb, cross(dp_s - dx[ib], f)
                    )
                    ib = model.parent[ib]
                dres -= dg

        self.residual = res
        self.mass = mass_matrix(model, q, fr=fr)   # d residual / d a
        if want_derivs:
            self.dres_dq = dres[:nv].T.copy()
            self.dres_dv = dres[nv:].T.copy()

        # point-contact kinematics for the requested sites (linear components)
        for name in sites:
            s = model.site(name)
            bidx = s.body
            r_s = R[bidx] @ s.pos
            p_s = x[bidx] + r_s
            vel_s = vel[bidx] + cross(w[bidx], r_s)
            acc_s = (
                acc[bidx]
                + cross(alpha[bidx], r_s)
                + cross(w[bidx], cross(w[bidx], r_s))
            )
            entry = {"pos": p_s, "vel": vel_s, "acc": acc_s}
            entry["J"] = site_jacobian(model, q, name, fr=fr)[0:3, :]
            if want_derivs:
                dr_s = np.einsum("kij,j->ki", dR[bidx], s.pos)
                dp_s = dx[bidx] + dr_s
                dvel_s = dvel[bidx] + cross(dw[bidx], r_s) + cross(w[bidx], dr_s)
                dacc_s = (
                    dacc[bidx]
                    + cross(dalpha[bidx], r_s)
                    + cross(alpha[bidx], dr_s)
                    + cross(dw[bidx], cross(w[bidx], r_s))
                    + cross(w[bidx], cross(dw[bidx], r_s) + cross(w[bidx], dr_s))
                )
                entry["dpos_dq"] = dp_s[:nv].T.copy()
                entry["dvel_dq"] = dvel_s[:nv].T.copy()
                entry["dvel_dv"] = dvel_s[nv:].T.copy()
                entry["dacc_dq"] = dacc_s[:nv].T.copy()
                entry["dacc_dv"] = dacc_s[nv:].T.copy()
            self.site_data[name] = entry
