"""Multi-contact direct transcription: refine a kinematic reference into a
dynamically feasible trajectory.

Per knot the decision variables are configuration (base position, base
orientation as a log-map offset from the reference quaternion, joints),
velocity, acceleration, joint torques, and one 3-D force per active contact
point (swing forces are structurally absent). Constraints: contact-aware
dynamics, zero velocity and acceleration of active contact points, friction
pyramid with a strict normal-force margin, trapezoidal integration between
knots, joint and torque bounds. The cost tracks the reference, smooths
velocities and forces, regularizes torques, and softly pins active contact
heights to the ground.

Long trajectories are solved in overlapping windows stitched by pinning each
window's first knot to the previous solution; seams snap to contact-phase
boundaries so a flat-foot window is never split.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .contact import ContactPoint, ContactSchedule
from scipy.linalg import lu_factor, lu_solve

from .dynamics import KnotDyn, bias_forces, contact_force_generalized, forward_dynamics, rnea
from .kinematics import GRAVITY, frames, site_jacobian
from .model import KinematicModel, ModelError
from .nlp import NlpProblem, SolverOptions, solve
from .rotations import (
    quat_conj,
    quat_from_rotvec,
    quat_log,
    quat_mul,
    quat_to_mat,
    so3_log,
    so3_right_jacobian,
    so3_right_jacobian_inv,
)
from .trajectory import ReferenceTrajectory

log = logging.getLogger(__name__)


class RetargetError(RuntimeError):
    pass


def default_joint_weights(nl: int) -> np.ndarray:
    """Per-leg pattern (hip-heavy knees, lighter distal joints) when the joint
    count splits into 6-dof legs, uniform otherwise."""
    if nl % 6 == 0 and nl > 0:
        return np.tile([2.0, 5.0, 5.0, 2.0, 2.0, 2.0], nl // 6)
    return np.full(nl, 2.0)


@dataclass
class DynRetargetConfig:
    w_base: np.ndarray = field(default_factory=lambda: np.array([10.0, 10.0, 3.0, 5.0, 5.0, 5.0]))
    w_joint: np.ndarray = None          # defaults per default_joint_weights
    w_vel: float = 1e-3
    w_force: float = 1e-4
    w_torque: float = 1e-4
    w_ground: float = 1e3
    mu: float = 0.7
    eps_force: float = 1.0              # strict normal-force margin, N
    window: int = 100
    overlap: int = 10
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())
    dynamics_tol: float = 1e-4          # raw dynamics residual target, N / N m
    integration_tol: float = 1e-8       # raw trapezoid residual target
    contact_tol: float = 1e-5           # raw contact velocity target, m/s
    contact_acc_tol: float = 1e-3       # raw contact acceleration target, m/s^2
    solver: SolverOptions = field(default_factory=lambda: SolverOptions(
        max_outer=60, max_inner=60, mu0=1e4, mu_max=1e6,
        tol_eq=1e-6, tol_in=1e-6, tol_stat=1e-3,
    ))
    on_fail: str = "raise"              # or "continue"

    def resolved_joint_weights(self, nl: int) -> np.ndarray:
        w = default_joint_weights(nl) if self.w_joint is None else np.asarray(self.w_joint, float)
        if w.shape != (nl,):
            raise RetargetError(f"joint weight vector has length {w.shape}, expected ({nl},)")
        return w

    def validate(self) -> None:
        wb = np.asarray(self.w_base, dtype=float)
        if wb.shape != (6,) or np.any(wb < 0):
            raise RetargetError("base weights must be 6 nonnegative values")
        for name in ("w_vel", "w_force", "w_torque", "w_ground"):
            if getattr(self, name) < 0:
                raise RetargetError(f"{name} must be nonnegative")
        if self.mu <= 0:
            raise RetargetError("friction coefficient must be positive")
        if not (0 <= self.overlap < self.window):
            raise RetargetError("need 0 <= overlap < window")


@dataclass
class RetargetSolution:
    dt: float
    q: np.ndarray          # (T, nq)
    vel: np.ndarray        # (T, nv)
    acc: np.ndarray        # (T, nv)
    u: np.ndarray          # (T, nl)
    forces: np.ndarray     # (T, 4, 3) ordered per ContactPoint; zero on swing
    reports: list = field(default_factory=list)
    seams: list = field(default_factory=list)

    @property
    def frames(self) -> int:
        return self.q.shape[0]

    @property
    def converged(self) -> bool:
        return all(r.status == "converged" for r in self.reports)

    def force_dict(self, t: int) -> dict:
        return {
            cp.site_name: self.forces[t, int(cp)]
            for cp in ContactPoint
            if np.any(self.forces[t, int(cp)] != 0.0)
        }

    def total_cost(self) -> float:
        return float(sum(r.cost for r in self.reports))


def _schedule_sites(schedule: ContactSchedule, t: int):
    return [cp.site_name for cp in ContactPoint if schedule.stance[t, int(cp)]]


class Transcription:
    """One window's NLP plus the bookkeeping to decode its solution."""

    def __init__(self, model: KinematicModel, q_ref: ReferenceTrajectory,
                 schedule_rows: np.ndarray, cfg: DynRetargetConfig,
                 v_ref: np.ndarray = None):
        if not model.floating:
            raise RetargetError("dynamic retargeting needs a floating-base model")
        model.require_biped_sites()
        cfg.validate()
        T = q_ref.frames
        if schedule_rows.shape[0] != T:
            raise RetargetError(
                f"schedule length {schedule_rows.shape[0]} != trajectory length {T}"
            )
        self.model = model
        self.cfg = cfg
        self.T = T
        self.dt = q_ref.dt
        self.q_ref = q_ref.q
        self.v_ref = v_ref if v_ref is not None else q_ref.fd_velocities(model)
        self.schedule_rows = schedule_rows
        self.active = [
            [cp.site_name for cp in ContactPoint if schedule_rows[t, int(cp)]]
            for t in range(T)
        ]
        self.ref_quat = np.stack([self.q_ref[t, 3:7] for t in range(T)])
        self.nl = model.nl
        self.nv = model.nv
        self.nx = 6 + model.nl
        self.nlp = NlpProblem()
        self._build()

    # -- variable blocks ---------------------------------------------------------
    def _build(self):
        model, cfg, T = self.model, self.cfg, self.T
        nl, nv, nx = self.nl, self.nv, self.nx
        p = self.nlp
        force_scale = model.total_mass * abs(cfg.gravity[2]) / 4.0
        for t in range(T):
            lb = np.full(nx, -np.inf)
            ub = np.full(nx, np.inf)
            lb[6:] = model.q_min
            ub[6:] = model.q_max
            p.add_block(f"x{t}", nx, lb, ub)
            p.add_block(f"v{t}", nv)
            p.add_block(f"u{t}", nl, -model.u_max, model.u_max, scale=model.u_max)
            for s in self.active[t]:
                lb_f = np.array([-np.inf, -np.inf, cfg.eps_force])
                p.add_block(f"f{t}_{s}", 3, lb_f, None, scale=force_scale)
        self._add_costs()
        self._add_dynamics_terms()
        self._add_friction()
        self._add_integration()

    def _add_costs(self):
        model, cfg, T = self.model, self.cfg, self.T
        nl, nv = self.nl, self.nv
        p = self.nlp
        w_b = np.asarray(cfg.w_base, dtype=float)
        w_j = cfg.resolved_joint_weights(nl)
        track_J = np.zeros((6 + nl, self.nx))
        scale = np.concatenate([np.sqrt(2.0 * w_b), np.sqrt(2.0 * w_j)])
        track_J[:, :] = np.diag(scale) @ np.eye(self.nx)
        for t in range(T):
            # the orientation offset is the log-map residual to the reference
            r0 = np.zeros(6 + nl)
            r0[0:3] = -scale[0:3] * self.q_ref[t, 0:3]
            r0[6:] = -scale[6:] * self.q_ref[t, 7:]
            p.add_affine_residual(f"track{t}", [f"x{t}"], [track_J], r0)
            if cfg.w_torque > 0:
                p.add_affine_residual(
                    f"torque{t}", [f"u{t}"],
                    [np.sqrt(2.0 * cfg.w_torque) * np.eye(nl)], np.zeros(nl),
                )
        if cfg.w_vel > 0:
            sv = np.sqrt(2.0 * cfg.w_vel)
            for t in range(T - 1):
                p.add_affine_residual(
                    f"vsmooth{t}", [f"v{t}", f"v{t + 1}"],
                    [-sv * np.eye(nv), sv * np.eye(nv)], np.zeros(nv),
                )
        if cfg.w_force > 0:
            sf = np.sqrt(2.0 * cfg.w_force)
            for t in range(T - 1):
                for s in self.active[t]:
                    if s in self.active[t + 1]:
                        p.add_affine_residual(
                            f"fsmooth{t}_{s}", [f"f{t}_{s}", f"f{t + 1}_{s}"],
                            [-sf * np.eye(3), sf * np.eye(3)], np.zeros(3),
                        )

    # -- condensed dynamics: a := forward dynamics of (q, v, u, forces) --------
    def _knot_cache(self, t):
        """KnotDyn evaluation of knot t with the acceleration eliminated via
        forward dynamics; memoized on the knot's variable values."""
        cache = self._kcache[t]

        def get(x, v, u, fvals, want_jac):
            key = (want_jac, x.tobytes(), v.tobytes(), u.tobytes(),
                   tuple(f.tobytes() for f in fvals))
            if cache.get("key") == key:
                return cache["val"]
            model, cfg = self.model, self.cfg
            actives = self.active[t]
            theta = x[3:6]
            q = np.concatenate(
                [x[0:3], quat_mul(self.ref_quat[t], quat_from_rotvec(theta)), x[6:]]
            )
            forces = {s: fvals[i] for i, s in enumerate(actives)}
            # a is eliminated: solve the dynamics for it, then differentiate
            # the residual at that acceleration (implicit function rule)
            probe = KnotDyn(model, q, v, np.zeros(model.nv), u, forces,
                            gravity=cfg.gravity, sites=(), want_derivs=False)
            Dfac = lu_factor(probe.mass)
            acc = lu_solve(Dfac, -probe.residual)
            knot = KnotDyn(model, q, v, acc, u, forces,
                           gravity=cfg.gravity, sites=actives, want_derivs=want_jac)
            out = {"acc": acc, "knot": knot, "q": q}
            if want_jac:
                nv, nl = model.nv, model.nl
                Jr_theta = so3_right_jacobian(theta)
                dres_dq = knot.dres_dq.copy()
                dres_dq[:, 3:6] = knot.dres_dq[:, 3:6] @ Jr_theta
                out["dacc_dx"] = -lu_solve(Dfac, dres_dq)
                out["dacc_dv"] = -lu_solve(Dfac, knot.dres_dv)
                B = np.zeros((nv, nl))
                B[nv - nl:, :] = np.eye(nl)
                out["dacc_du"] = lu_solve(Dfac, B)
                out["dacc_df"] = [
                    lu_solve(Dfac, knot.site_data[s]["J"].T) for s in actives
                ]
                out["Jr_theta"] = Jr_theta
            cache["key"] = key
            cache["val"] = out
            return out

        return get

    def _add_dynamics_terms(self):
        model, cfg = self.model, self.cfg
        nv, nl, nx = self.nv, self.nl, self.nx
        acc_scale = abs(cfg.gravity[2])
        tol_eq = cfg.solver.tol_eq
        dt = self.dt
        self._kcache = [dict() for _ in range(self.T)]
        getters = [self._knot_cache(t) for t in range(self.T)]

        # collocation: velocity trapezoid with the eliminated acceleration
        for t in range(self.T - 1):
            blocks = (
                [f"x{t}", f"v{t}", f"u{t}"] + [f"f{t}_{s}" for s in self.active[t]]
                + [f"x{t + 1}", f"v{t + 1}", f"u{t + 1}"]
                + [f"f{t + 1}_{s}" for s in self.active[t + 1]]
            )
            n0 = 3 + len(self.active[t])

            def colloc_fun(xs, want_jac=True, t=t, n0=n0):
                g0 = getters[t](xs[0], xs[1], xs[2], xs[3:n0], want_jac)
                g1 = getters[t + 1](xs[n0], xs[n0 + 1], xs[n0 + 2], xs[n0 + 3:], want_jac)
                r = xs[n0 + 1] - xs[1] - 0.5 * dt * (g0["acc"] + g1["acc"])
                if not want_jac:
                    return r, None
                I = np.eye(nv)
                Js = [
                    -0.5 * dt * g0["dacc_dx"],
                    -I - 0.5 * dt * g0["dacc_dv"],
                    -0.5 * dt * g0["dacc_du"],
                ]
                Js += [-0.5 * dt * Jf for Jf in g0["dacc_df"]]
                Js += [
                    -0.5 * dt * g1["dacc_dx"],
                    I - 0.5 * dt * g1["dacc_dv"],
                    -0.5 * dt * g1["dacc_du"],
                ]
                Js += [-0.5 * dt * Jf for Jf in g1["dacc_df"]]
                return r, Js

            self.nlp.add_equality(
                f"colloc{t}", blocks, nv, colloc_fun,
                tol_scale=cfg.integration_tol / tol_eq, hard=True,
            )

        # contact-point pins: zero velocity, zero (eliminated) acceleration
        for t in range(self.T):
            actives = self.active[t]
            if not actives:
                continue
            axes = []
            for s in actives:
                if s.endswith("_toe") and s.replace("_toe", "_heel") in actives:
                    axes.append([1, 2])     # flat foot is a rank-5 pin
                else:
                    axes.append([0, 1, 2])
            n_rows = sum(len(ax) for ax in axes)
            blocks = [f"x{t}", f"v{t}", f"u{t}"] + [f"f{t}_{s}" for s in actives]

            def contact_fun(xs, want_jac=True, t=t, actives=actives, axes=axes,
                            n_rows=n_rows):
                g = getters[t](xs[0], xs[1], xs[2], xs[3:], want_jac)
                knot = g["knot"]
                parts = []
                for s, ax in zip(actives, axes):
                    d = knot.site_data[s]
                    parts.append(d["vel"][ax])
                    parts.append(d["acc"][ax] / acc_scale)
                r = np.concatenate(parts)
                if not want_jac:
                    return r, None
                dim = 2 * n_rows
                Jx = np.zeros((dim, nx))
                Jv = np.zeros((dim, nv))
                Ju = np.zeros((dim, nl))
                Jf = [np.zeros((dim, 3)) for _ in actives]
                Jr_theta = g["Jr_theta"]
                r0 = 0
                for s, ax in zip(actives, axes):
                    d = knot.site_data[s]
                    k = len(ax)
                    dvel_dx = d["dvel_dq"].copy()
                    dvel_dx[:, 3:6] = d["dvel_dq"][:, 3:6] @ Jr_theta
                    Jx[r0:r0 + k] = dvel_dx[ax]
                    Jv[r0:r0 + k] = d["J"][ax]
                    dacc_dx = d["dacc_dq"].copy()
                    dacc_dx[:, 3:6] = d["dacc_dq"][:, 3:6] @ Jr_theta
                    JA = d["J"][ax]
                    Jx[r0 + k:r0 + 2 * k] = (dacc_dx[ax] + JA @ g["dacc_dx"]) / acc_scale
                    Jv[r0 + k:r0 + 2 * k] = (d["dacc_dv"][ax] + JA @ g["dacc_dv"]) / acc_scale
                    Ju[r0 + k:r0 + 2 * k] = (JA @ g["dacc_du"]) / acc_scale
                    for i in range(len(actives)):
                        Jf[i][r0 + k:r0 + 2 * k] = (JA @ g["dacc_df"][i]) / acc_scale
                    r0 += 2 * k
                return r, [Jx, Jv, Ju] + Jf

            scale_parts = []
            for ax in axes:
                k = len(ax)
                scale_parts.append(np.full(k, cfg.contact_tol / tol_eq))
                scale_parts.append(np.full(k, cfg.contact_acc_tol / (tol_eq * acc_scale)))
            self.nlp.add_equality(f"contact{t}", blocks, 2 * n_rows, contact_fun,
                                  tol_scale=np.concatenate(scale_parts))

            if cfg.w_ground > 0:
                sg = np.sqrt(2.0 * cfg.w_ground)
                ref_quat = self.ref_quat[t]

                def ground_fun(xs, want_jac=True, actives=actives, ref_quat=ref_quat):
                    x = xs[0]
                    theta = x[3:6]
                    q = np.concatenate(
                        [x[0:3], quat_mul(ref_quat, quat_from_rotvec(theta)), x[6:]]
                    )
                    fr = frames(model, q)
                    vals = np.zeros(len(actives))
                    J = np.zeros((len(actives), nx)) if want_jac else None
                    Jr_theta = so3_right_jacobian(theta) if want_jac else None
                    for i, s in enumerate(actives):
                        site = model.site(s)
                        p_s = fr.x[site.body] + fr.R[site.body] @ site.pos
                        vals[i] = sg * p_s[2]
                        if want_jac:
                            row = site_jacobian(model, q, s, fr=fr)[2, :].copy()
                            row[3:6] = row[3:6] @ Jr_theta
                            J[i] = sg * row
                    return vals, ([J] if want_jac else None)

                self.nlp.add_residual(f"ground{t}", [f"x{t}"], len(actives), ground_fun)

    def _add_friction(self):
        mu_t = self.cfg.mu / np.sqrt(2.0)
        A = np.array(
            [
                [-1.0, 0.0, mu_t],
                [1.0, 0.0, mu_t],
                [0.0, -1.0, mu_t],
                [0.0, 1.0, mu_t],
            ]
        )
        for t in range(self.T):
            for s in self.active[t]:
                self.nlp.add_affine_inequality(
                    f"fric{t}_{s}", [f"f{t}_{s}"], [A], np.zeros(4)
                )

    def _add_integration(self):
        model, cfg = self.model, self.cfg
        nv, nl, nx = self.nv, self.nl, self.nx
        dt = self.dt
        tol_eq = cfg.solver.tol_eq
        for t in range(self.T - 1):
            Qrel = quat_to_mat(self.ref_quat[t]).T @ quat_to_mat(self.ref_quat[t + 1])

            def integ_fun(xs, want_jac=True, Qrel=Qrel):
                x0, x1, v0, v1 = xs
                r = np.zeros(nx)
                r[0:3] = x1[0:3] - x0[0:3] - 0.5 * dt * (v0[0:3] + v1[0:3])
                th0, th1 = x0[3:6], x1[3:6]
                X = quat_to_mat(quat_from_rotvec(th0)).T @ Qrel @ quat_to_mat(
                    quat_from_rotvec(th1)
                )
                rlog = so3_log(X)
                r[3:6] = rlog - 0.5 * dt * (v0[3:6] + v1[3:6])
                r[6:] = x1[6:] - x0[6:] - 0.5 * dt * (v0[6:] + v1[6:])
                if not want_jac:
                    return r, None
                Jx0 = np.zeros((nx, nx))
                Jx1 = np.zeros((nx, nx))
                Jv0 = np.zeros((nx, nv))
                Jv1 = np.zeros((nx, nv))
                Jx0[0:3, 0:3] = -np.eye(3)
                Jx1[0:3, 0:3] = np.eye(3)
                Jinv = so3_right_jacobian_inv(rlog)
                Jinv_l = so3_right_jacobian_inv(-rlog)
                Jx0[3:6, 3:6] = -Jinv_l @ so3_right_jacobian(th0)
                Jx1[3:6, 3:6] = Jinv @ so3_right_jacobian(th1)
                for k in range(nl):
                    Jx0[6 + k, 6 + k] = -1.0
                    Jx1[6 + k, 6 + k] = 1.0
                Jv0[0:3, 0:3] = -0.5 * dt * np.eye(3)
                Jv1[0:3, 0:3] = -0.5 * dt * np.eye(3)
                Jv0[3:6, 3:6] = -0.5 * dt * np.eye(3)
                Jv1[3:6, 3:6] = -0.5 * dt * np.eye(3)
                Jv0[6:, 6:] = -0.5 * dt * np.eye(nl)
                Jv1[6:, 6:] = -0.5 * dt * np.eye(nl)
                return r, [Jx0, Jx1, Jv0, Jv1]

            self.nlp.add_equality(
                f"integ{t}", [f"x{t}", f"x{t + 1}", f"v{t}", f"v{t + 1}"], nx,
                integ_fun, tol_scale=cfg.integration_tol / tol_eq, hard=True,
            )


    # -- initial guess and boundary pin --------------------------------------------
    def initial_guess(self) -> np.ndarray:
        """Reference kinematics with inverse-dynamics-consistent torques and
        forces: per knot, the torque-regularized least-squares (u, f) that
        exactly balances the reference state's dynamics. Near-stationary
        starts keep the first subproblem's minimizer close by."""
        model, cfg = self.model, self.cfg
        z = np.zeros(self.nlp.n)
        g_mag = abs(cfg.gravity[2])
        nv, nl = self.nv, self.nl
        w_u = max(cfg.w_torque, 1e-8)
        for t in range(self.T):
            x = np.zeros(self.nx)
            x[0:3] = self.q_ref[t, 0:3]
            x[6:] = np.clip(self.q_ref[t, 7:], model.q_min, model.q_max)
            z[self.nlp.block_slice(f"x{t}")] = x
            z[self.nlp.block_slice(f"v{t}")] = self.v_ref[t]

            actives = self.active[t]
            if t == 0 or t == self.T - 1:
                a_des = np.zeros(nv)
            else:
                a_des = (self.v_ref[t + 1] - self.v_ref[t - 1]) / (2.0 * self.dt)
            tau_need = rnea(model, self.q_ref[t], self.v_ref[t], a_des,
                            gravity=cfg.gravity)
            fr = frames(model, self.q_ref[t])
            k = len(actives)
            A = np.zeros((nv, nl + 3 * k))
            A[nv - nl:, 0:nl] = np.eye(nl)
            for i, s in enumerate(actives):
                A[:, nl + 3 * i: nl + 3 * (i + 1)] = site_jacobian(
                    model, self.q_ref[t], s, fr=fr
                )[0:3].T
            # weighted least squares: regularize torques by the tracking cost
            # weight and keep forces near an even vertical split
            W = np.concatenate([np.full(nl, w_u), np.full(3 * k, 1e-7)])
            x0 = np.zeros(nl + 3 * k)
            if k:
                fz_even = model.total_mass * g_mag / k
                for i in range(k):
                    x0[nl + 3 * i + 2] = fz_even
            Ws = np.sqrt(W)
            # min ||Ws (y - x0)||^2 s.t. A y = tau_need
            B_mat = A / Ws[None, :]
            yy, *_ = np.linalg.lstsq(B_mat, tau_need - A @ x0, rcond=None)
            y = x0 + yy / Ws
            u = np.clip(y[0:nl], -model.u_max, model.u_max)
            z[self.nlp.block_slice(f"u{t}")] = u
            for i, s in enumerate(actives):
                f = y[nl + 3 * i: nl + 3 * (i + 1)].copy()
                f[2] = max(f[2], cfg.eps_force)
                z[self.nlp.block_slice(f"f{t}_{s}")] = f
        return z

    def pin_boundary(self, q0: np.ndarray, v0: np.ndarray) -> None:
        x = np.zeros(self.nx)
        x[0:3] = q0[0:3]
        x[3:6] = quat_log(quat_mul(quat_conj(self.ref_quat[0]), q0[3:7]))
        x[6:] = q0[7:]
        self.nlp.fix_block("x0", x)
        self.nlp.fix_block("v0", v0)

    # -- decoding -------------------------------------------------------------------
    def decode(self, z: np.ndarray, report) -> RetargetSolution:
        model = self.model
        T = self.T
        q = np.zeros((T, model.nq))
        vel = np.zeros((T, model.nv))
        acc = np.zeros((T, model.nv))
        u = np.zeros((T, model.nl))
        forces = np.zeros((T, 4, 3))
        for t in range(T):
            x = z[self.nlp.block_slice(f"x{t}")]
            q[t, 0:3] = x[0:3]
            q[t, 3:7] = quat_mul(self.ref_quat[t], quat_from_rotvec(x[3:6]))
            q[t, 7:] = x[6:]
            vel[t] = z[self.nlp.block_slice(f"v{t}")]
            u[t] = z[self.nlp.block_slice(f"u{t}")]
            for cp in ContactPoint:
                s = cp.site_name
                if s in self.active[t]:
                    forces[t, int(cp)] = z[self.nlp.block_slice(f"f{t}_{s}")]
            acc[t] = forward_dynamics(
                self.model, q[t], vel[t], u[t],
                {s: forces[t, int(cp)] for cp in ContactPoint
                 for s in [cp.site_name] if s in self.active[t]},
                gravity=self.cfg.gravity,
            )
        return RetargetSolution(
            dt=self.dt, q=q, vel=vel, acc=acc, u=u, forces=forces, reports=[report]
        )


def build_problem(model: KinematicModel, q_ref: ReferenceTrajectory,
                  schedule: ContactSchedule, cfg: DynRetargetConfig = None) -> Transcription:
    """Assemble the transcription for the whole trajectory (one window)."""
    return Transcription(model, q_ref, schedule.stance, cfg or DynRetargetConfig())


def solve_window(model: KinematicModel, q_ref: ReferenceTrajectory,
                 schedule_rows: np.ndarray, cfg: DynRetargetConfig,
                 boundary=None, v_ref: np.ndarray = None) -> RetargetSolution:
    """Solve one window; boundary (q0, v0) pins the first knot."""
    tr = Transcription(model, q_ref, schedule_rows, cfg, v_ref=v_ref)
    if boundary is not None:
        tr.pin_boundary(*boundary)
    z0 = tr.initial_guess()
    z, mult, report = solve(tr.nlp, z0, cfg.solver)
    if report.status != "converged":
        msg = f"window did not converge: {report}"
        if cfg.on_fail == "raise":
            raise RetargetError(msg)
        log.warning(msg)
    return tr.decode(z, report)


def snap_seam(schedule: ContactSchedule, seam: int, lo: int, hi: int) -> int:
    """Move a seam off any flat-foot window to the nearest contact-state
    change inside [lo, hi]; returns the seam unchanged when it is clean."""
    in_flat = any(
        si.flat_start < seam < si.flat_stop
        for foot in ("left", "right")
        for si in schedule.intervals[foot]
    )
    if not in_flat:
        return seam
    changes = [
        f for f in range(max(lo, 1), hi + 1)
        if not np.array_equal(schedule.stance[f], schedule.stance[f - 1])
    ]
    if not changes:
        log.warning("seam %d sits in a flat window but no phase boundary is in range", seam)
        return seam
    best = min(changes, key=lambda f: abs(f - seam))
    log.info("seam moved %d -> %d (flat window avoidance)", seam, best)
    return best


def solve_full(model: KinematicModel, q_ref: ReferenceTrajectory,
               schedule: ContactSchedule, cfg: DynRetargetConfig = None) -> RetargetSolution:
    """Sequential overlapping windows over the whole trajectory; later windows
    replace earlier knots beyond their boundary pin."""
    cfg = cfg or DynRetargetConfig()
    cfg.validate()
    T = q_ref.frames
    if schedule.frames != T:
        raise RetargetError(f"schedule length {schedule.frames} != trajectory length {T}")
    v_ref_full = q_ref.vel if q_ref.vel is not None else q_ref.fd_velocities(model)

    window = max(2, cfg.window)
    overlap = max(1, cfg.overlap) if T > window else 0

    q = np.zeros((T, model.nq))
    vel = np.zeros((T, model.nv))
    acc = np.zeros((T, model.nv))
    u = np.zeros((T, model.nl))
    forces = np.zeros((T, 4, 3))
    reports = []
    seams = []

    b = 0
    boundary = None
    while True:
        c = min(b + window, T)
        seg = ReferenceTrajectory(dt=q_ref.dt, q=q_ref.q[b:c])
        sol = solve_window(
            model, seg, schedule.stance[b:c], cfg,
            boundary=boundary, v_ref=v_ref_full[b:c],
        )
        reports.append(sol.reports[0])
        q[b:c] = sol.q
        vel[b:c] = sol.vel
        acc[b:c] = sol.acc
        u[b:c] = sol.u
        forces[b:c] = sol.forces
        if c >= T:
            break
        seam = c - overlap
        seam = snap_seam(schedule, seam, b + 1, c - 1)
        seam = int(np.clip(seam, b + 1, c - 1))
        seams.append(seam)
        boundary = (q[seam].copy(), vel[seam].copy())
        b = seam
    return RetargetSolution(
        dt=q_ref.dt, q=q, vel=vel, acc=acc, u=u, forces=forces,
        reports=reports, seams=seams,
    )


# -- solution CSV -----------------------------------------------------------------

def write_solution_csv(path, model: KinematicModel, sol: RetargetSolution) -> None:
    qcols = ["px", "py", "pz", "qw", "qx", "qy", "qz"] + list(model.joint_names)
    vcols = ["vx", "vy", "vz", "wx", "wy", "wz"] + [f"qd_{n}" for n in model.joint_names]
    acols = ["ax", "ay", "az", "dwx", "dwy", "dwz"] + [f"qdd_{n}" for n in model.joint_names]
    ucols = [f"u_{n}" for n in model.joint_names]
    fcols = [f"{tag}_f{ax}" for tag in ("LH", "LT", "RH", "RT") for ax in "xyz"]
    cols = ["t"] + qcols + vcols + acols + ucols + fcols
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for t in range(sol.frames):
            row = np.concatenate(
                [[t * sol.dt], sol.q[t], sol.vel[t], sol.acc[t], sol.u[t],
                 sol.forces[t].reshape(12)]
            )
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def read_solution_csv(path, model: KinematicModel) -> RetargetSolution:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    nq, nv, nl = model.nq, model.nv, model.nl
    expected = 1 + nq + nv + nv + nl + 12
    if len(header) != expected:
        raise ModelError(
            f"{path}: solution file has {len(header)} columns, expected {expected}"
        )
    data = np.array([[float(c) for c in r] for r in rows])
    times = data[:, 0]
    dt = float(times[1] - times[0]) if len(times) > 1 else 1.0
    o = 1
    q = data[:, o:o + nq]; o += nq
    vel = data[:, o:o + nv]; o += nv
    acc = data[:, o:o + nv]; o += nv
    u = data[:, o:o + nl]; o += nl
    forces = data[:, o:o + 12].reshape(-1, 4, 3)
    return RetargetSolution(dt=dt, q=q, vel=vel, acc=acc, u=u, forces=forces)
