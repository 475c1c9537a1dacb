"""Block-structured nonlinear least-squares programming:

    min  0.5 * sum ||r_k(z)||^2
    s.t. c_eq(z) = 0,  c_in(z) >= 0,  lb <= z <= ub

solved with a bound-constrained augmented Lagrangian outer loop
(Powell-Hestenes-Rockafellar handling of inequalities) and a projected,
Levenberg-damped Gauss-Newton inner loop on sparse normal equations.

Callers register decision-variable blocks and terms over those blocks; every
term supplies analytic Jacobians (audited against finite differences in
``audit_jacobians``). Linear terms can be registered as affine for one-time
Jacobian assembly. Constraint groups may declare ``tol_scale``: a group
counts as feasible when ``|c| <= tol * tol_scale``, so groups with different
units can demand proportionally different absolute accuracies without
touching the penalty conditioning.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class NlpError(RuntimeError):
    pass


@dataclass
class SolverOptions:
    max_outer: int = 30
    max_inner: int = 100
    mu0: float = 10.0
    mu_growth: float = 10.0
    mu_max: float = 1e8
    tol_eq: float = 1e-6
    tol_in: float = 1e-6
    tol_stat: float = 1e-5
    damping0: float = 1e-4
    damping_factor: float = 3.0
    damping_min: float = 1e-12
    damping_floor: float = 1e-6   # working lower bound during iterations
    damping_max: float = 1e10
    radius0: float = 0.1          # trust-region cap on scaled steps
    radius_min: float = 1e-7
    radius_max: float = 2.0
    prox0: float = 1.0            # per-outer proximal anchor weight
    prox_floor: float = 1e-4
    inner_tol0: float = 1e-2      # stationarity target of the first inner solve
    inner_tol_shrink: float = 0.2
    warm_multipliers: bool = True  # least-squares multiplier estimate at z0
    verbose: bool = False

    def __post_init__(self):
        for name in ("tol_eq", "tol_in", "tol_stat", "mu0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SolveReport:
    status: str                      # converged | max_iter | diverged
    cost: float
    viol_eq: float                   # scaled infinity norms
    viol_in: float
    stationarity: float
    outer_iters: int
    inner_iters: int
    mu_final: float
    cost_history: list = field(default_factory=list)
    merit_history: list = field(default_factory=list)      # per outer: (before, after) per step
    group_violations: dict = field(default_factory=dict)   # raw units per group
    z0_clamped: bool = False
    wall_time: float = 0.0

    def __str__(self):
        return (
            f"status={self.status} cost={self.cost:.6g} "
            f"eq={self.viol_eq:.3g} in={self.viol_in:.3g} stat={self.stationarity:.3g} "
            f"outer={self.outer_iters} inner={self.inner_iters} mu={self.mu_final:.3g} "
            f"t={self.wall_time:.2f}s"
        )


class _Term:
    __slots__ = ("name", "blocks", "dim", "fun", "row0", "scale", "affine", "J0", "r0", "hard")

    def __init__(self, name, blocks, dim, fun, scale, affine=False, J0=None, r0=None, hard=False):
        self.name = name
        self.blocks = blocks
        self.dim = dim
        self.fun = fun
        self.row0 = 0
        self.scale = scale
        self.affine = affine
        self.J0 = J0
        self.r0 = r0
        self.hard = hard


class NlpProblem:
    def __init__(self):
        self._block_names = []
        self._block_dims = {}
        self._block_off = {}
        self._lb = []
        self._ub = []
        self._scale = []
        self._n = 0
        self._terms = {"res": [], "eq": [], "in": []}
        self._frozen = False

    # -- construction ----------------------------------------------------------
    def add_block(self, name: str, dim: int, lb=None, ub=None, scale=None) -> None:
        """scale is the typical magnitude of the block's entries; the solver
        preconditions its iterations with it (results are unaffected)."""
        if self._frozen:
            raise NlpError("problem is frozen after first solve/evaluate")
        if name in self._block_dims:
            raise NlpError(f"duplicate block {name!r}")
        lo = np.full(dim, -np.inf) if lb is None else np.asarray(lb, dtype=float) * np.ones(dim)
        hi = np.full(dim, np.inf) if ub is None else np.asarray(ub, dtype=float) * np.ones(dim)
        if lo.shape != (dim,) or hi.shape != (dim,):
            raise NlpError(f"block {name!r}: bound shapes do not match dim {dim}")
        if np.any(lo > hi):
            raise NlpError(f"block {name!r}: lower bound exceeds upper bound")
        s = np.ones(dim) if scale is None else np.asarray(scale, dtype=float) * np.ones(dim)
        if np.any(s <= 0):
            raise NlpError(f"block {name!r}: variable scale must be positive")
        self._block_names.append(name)
        self._block_dims[name] = dim
        self._block_off[name] = self._n
        self._lb.append(lo)
        self._ub.append(hi)
        self._scale.append(s)
        self._n += dim

    def fix_block(self, name: str, value) -> None:
        """Pin a block to a value (equal bounds)."""
        off = self._block_off[name]
        dim = self._block_dims[name]
        value = np.asarray(value, dtype=float)
        if value.shape != (dim,):
            raise NlpError(f"fix_block {name!r}: value length {value.shape} != ({dim},)")
        idx = self._block_names.index(name)
        self._lb[idx] = value.copy()
        self._ub[idx] = value.copy()

    def _add(self, kind, name, blocks, dim, fun, scale, affine=False, J0=None, r0=None,
             hard=False):
        if self._frozen:
            raise NlpError("problem is frozen after first solve/evaluate")
        for b in blocks:
            if b not in self._block_dims:
                raise NlpError(f"term {name!r}: unknown block {b!r}")
        s = np.ones(dim) if scale is None else np.asarray(scale, dtype=float) * np.ones(dim)
        if np.any(s <= 0):
            raise NlpError(f"term {name!r}: tol_scale must be positive")
        self._terms[kind].append(_Term(name, tuple(blocks), dim, fun, s, affine, J0, r0, hard))

    def add_residual(self, name, blocks, dim, fun) -> None:
        """Cost contribution 0.5 * ||fun(z)||^2; fun(xs, want_jac) returns
        (r, [J per block]) and may skip the Jacobians when want_jac is False."""
        self._add("res", name, blocks, dim, fun, None)

    def add_equality(self, name, blocks, dim, fun, tol_scale=None, hard=False) -> None:
        """hard marks affine or mildly curved rows the solver should satisfy
        exactly at every step (KKT block) instead of penalizing."""
        self._add("eq", name, blocks, dim, fun, tol_scale, hard=hard)

    def add_inequality(self, name, blocks, dim, fun, tol_scale=None) -> None:
        """Constraint fun(z) >= 0."""
        self._add("in", name, blocks, dim, fun, tol_scale)

    def _affine(self, kind, name, blocks, J_blocks, r0, scale=None, hard=False):
        J0 = [np.asarray(J, dtype=float) for J in J_blocks]
        r0 = np.asarray(r0, dtype=float)
        dim = r0.shape[0]
        for b, J in zip(blocks, J0):
            if J.shape != (dim, self._block_dims[b]):
                raise NlpError(f"affine term {name!r}: Jacobian shape mismatch on {b!r}")
        self._add(kind, name, blocks, dim, None, scale, affine=True, J0=J0, r0=r0, hard=hard)

    def add_affine_residual(self, name, blocks, J_blocks, r0) -> None:
        """r(z) = r0 + sum_b J_b z_b, assembled once."""
        self._affine("res", name, blocks, J_blocks, r0)

    def add_affine_equality(self, name, blocks, J_blocks, r0, tol_scale=None,
                            hard=True) -> None:
        self._affine("eq", name, blocks, J_blocks, r0, tol_scale, hard=hard)

    def add_affine_inequality(self, name, blocks, J_blocks, r0, tol_scale=None) -> None:
        self._affine("in", name, blocks, J_blocks, r0, tol_scale)

    # -- structure -------------------------------------------------------------
    @property
    def n(self) -> int:
        return self._n

    def block_slice(self, name: str) -> slice:
        off = self._block_off[name]
        return slice(off, off + self._block_dims[name])

    def bounds(self):
        return np.concatenate(self._lb), np.concatenate(self._ub)

    def variable_scale(self) -> np.ndarray:
        return np.concatenate(self._scale)

    def _freeze(self):
        if self._frozen:
            return
        self._frozen = True
        self._rows = {}
        self._structure = {}
        for kind in ("res", "eq", "in"):
            r = 0
            rows_idx = []
            cols_idx = []
            for t in self._terms[kind]:
                t.row0 = r
                for b in t.blocks:
                    off = self._block_off[b]
                    bd = self._block_dims[b]
                    rr, cc = np.meshgrid(
                        np.arange(r, r + t.dim), np.arange(off, off + bd), indexing="ij"
                    )
                    rows_idx.append(rr.ravel())
                    cols_idx.append(cc.ravel())
                r += t.dim
            self._rows[kind] = r
            self._structure[kind] = (
                np.concatenate(rows_idx) if rows_idx else np.zeros(0, dtype=int),
                np.concatenate(cols_idx) if cols_idx else np.zeros(0, dtype=int),
            )
        self._scales = {
            kind: (
                np.concatenate([t.scale for t in self._terms[kind]])
                if self._terms[kind]
                else np.zeros(0)
            )
            for kind in ("eq", "in")
        }
        mask = np.zeros(self._rows["eq"], dtype=bool)
        for t in self._terms["eq"]:
            if t.hard:
                mask[t.row0: t.row0 + t.dim] = True
        self._hard_mask = mask

    def rows(self, kind: str) -> int:
        self._freeze()
        return self._rows[kind]

    def hard_mask(self) -> np.ndarray:
        self._freeze()
        return self._hard_mask

    def scales(self, kind: str) -> np.ndarray:
        self._freeze()
        return self._scales[kind]

    # -- evaluation --------------------------------------------------------------
    def _eval_kind(self, kind, z, want_jac):
        self._freeze()
        vals = np.zeros(self._rows[kind])
        data = [] if want_jac else None
        for t in self._terms[kind]:
            xs = [z[self.block_slice(b)] for b in t.blocks]
            if t.affine:
                r = t.r0.copy()
                for J, x in zip(t.J0, xs):
                    r += J @ x
                Js = t.J0 if want_jac else None
            else:
                out = t.fun(xs, want_jac)
                r, Js = out[0], (out[1] if want_jac else None)
                r = np.asarray(r, dtype=float)
                if r.shape != (t.dim,):
                    raise NlpError(f"term {t.name!r}: value length {r.shape} != ({t.dim},)")
            vals[t.row0: t.row0 + t.dim] = r
            if want_jac:
                for b, J in zip(t.blocks, Js):
                    J = np.asarray(J, dtype=float)
                    if J.shape != (t.dim, self._block_dims[b]):
                        raise NlpError(
                            f"term {t.name!r}: Jacobian for block {b!r} has shape "
                            f"{J.shape}, expected {(t.dim, self._block_dims[b])}"
                        )
                    data.append(J.ravel())
        if not want_jac:
            return vals, None
        rows_idx, cols_idx = self._structure[kind]
        flat = np.concatenate(data) if data else np.zeros(0)
        J = sp.coo_matrix(
            (flat, (rows_idx, cols_idx)), shape=(self._rows[kind], self._n)
        ).tocsr()
        return vals, J

    def evaluate(self, z, want_jac=True):
        """(R, J_R, C, J_C, G, J_G) with scaled constraint rows."""
        R, JR = self._eval_kind("res", z, want_jac)
        C, JC = self._eval_kind("eq", z, want_jac)
        G, JG = self._eval_kind("in", z, want_jac)
        return R, JR, C, JC, G, JG

    def cost(self, z) -> float:
        R, _, _, _, _, _ = self.evaluate(z, want_jac=False)
        return 0.5 * float(R @ R)

    def group_violations(self, z) -> dict:
        """Raw-unit infinity-norm violation per constraint term."""
        self._freeze()
        out = {}
        for kind in ("eq", "in"):
            vals, _ = self._eval_kind(kind, z, want_jac=False)
            for t in self._terms[kind]:
                raw = vals[t.row0: t.row0 + t.dim]
                v = np.max(np.abs(raw)) if kind == "eq" else max(0.0, -np.min(raw, initial=0.0))
                out[f"{kind}:{t.name}"] = float(v)
        return out

    # -- finite-difference audit ---------------------------------------------------
    def audit_jacobians(self, z, rtol=1e-5, h=1e-6) -> dict:
        """Central-difference check of every non-affine term; returns the worst
        relative error per term and raises on failure."""
        self._freeze()
        worst = {}
        for kind in ("res", "eq", "in"):
            for t in self._terms[kind]:
                if t.affine:
                    continue
                xs = [z[self.block_slice(b)].copy() for b in t.blocks]
                _, Js = t.fun(xs, True)
                err = 0.0
                for bi, b in enumerate(t.blocks):
                    J = np.asarray(Js[bi], dtype=float)
                    fd = np.zeros_like(J)
                    for k in range(self._block_dims[b]):
                        xs[bi][k] += h
                        rp = np.asarray(t.fun(xs, False)[0], dtype=float)
                        xs[bi][k] -= 2 * h
                        rm = np.asarray(t.fun(xs, False)[0], dtype=float)
                        xs[bi][k] += h
                        fd[:, k] = (rp - rm) / (2 * h)
                    scale = max(1.0, float(np.max(np.abs(fd))))
                    err = max(err, float(np.max(np.abs(J - fd))) / scale)
                worst[f"{kind}:{t.name}"] = err
                if err > rtol:
                    raise NlpError(f"Jacobian audit failed for {kind}:{t.name}: rel err {err:.3g}")
        return worst


def _merit(R, C, G, lam, nu, mu):
    phi = 0.5 * float(R @ R) - float(lam @ C) + 0.5 * mu * float(C @ C)
    if G.size:
        s = np.maximum(0.0, nu - mu * G)
        phi += float(s @ s - nu @ nu) / (2.0 * mu)
    return phi


def _merit_grad(JR, R, JC, C, JG, G, lam, nu, mu):
    g = JR.T @ R
    if C.size:
        g += JC.T @ (mu * C - lam)
    if G.size:
        s = np.maximum(0.0, nu - mu * G)
        g -= JG.T @ s
    return g


def _projected_gradient_norm(g, z, lb, ub):
    pg = g.copy()
    at_lo = z <= lb + 1e-12
    at_hi = z >= ub - 1e-12
    pg[at_lo] = np.minimum(pg[at_lo], 0.0)
    pg[at_hi & ~at_lo] = np.maximum(pg[at_hi & ~at_lo], 0.0)
    pg[at_lo & at_hi] = 0.0
    return float(np.max(np.abs(pg))) if pg.size else 0.0


def solve(problem: NlpProblem, z0, opts: SolverOptions = None):
    """Returns (z, multipliers, SolveReport); multipliers is a dict with
    'eq' and 'in' arrays over the constraint rows.

    Hybrid augmented-Lagrangian / SQP: equality rows marked hard (affine or
    nearly so) are linearized exactly inside each damped Gauss-Newton step via
    a dual-regularized KKT block, so their residuals sit at solver precision
    from the first accepted step; the remaining (curved) equalities and the
    inequalities are handled by the Powell-Hestenes-Rockafellar augmented
    Lagrangian, whose penalty absorbs the constraint curvature that a
    Gauss-Newton model cannot see. Iterations run in scaled variables
    (per-block `scale`); results are unscaled."""
    o = opts or SolverOptions()
    t_start = time.perf_counter()
    S = problem.variable_scale()
    Sdiag = sp.diags(S)
    lb, ub = problem.bounds()
    lb = lb / S
    ub = ub / S
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (problem.n,):
        raise NlpError(f"initial point length {z0.shape} != ({problem.n},)")
    z = np.clip(z0 / S, lb, ub)
    clamped = bool(np.max(np.abs(z - z0 / S)) > 0.0)
    if clamped:
        log.info("initial point clamped to bounds (max shift %.3g)",
                 np.max(np.abs(S * z - z0)))

    def _eval(zh, want_jac=True):
        R, JR, C, JC, G, JG = problem.evaluate(S * zh, want_jac)
        if want_jac:
            JR = JR @ Sdiag
            JC = JC @ Sdiag
            JG = JG @ Sdiag
        return R, JR, C, JC, G, JG

    n = problem.n
    hard = problem.hard_mask()
    soft = ~hard
    m_h = int(hard.sum())
    lam = np.zeros(problem.rows("eq"))
    nu = np.zeros(problem.rows("in"))
    sc_eq = problem.scales("eq")
    sc_in = problem.scales("in")
    mu = o.mu0
    inner_tol = o.inner_tol0
    damping = o.damping0
    radius = o.radius0            # trust-region cap on the scaled step
    prev_viol = np.inf
    prev_stat = np.inf
    stagnant = 0
    total_inner = 0
    cost_history = []
    merit_history = []
    status = "max_iter"
    stat_norm = np.inf

    def merit(R, C, G):
        phi = 0.5 * float(R @ R)
        if C.size:
            cs = C[soft]
            phi += -float(lam[soft] @ cs) + 0.5 * mu * float(cs @ cs)
            phi += 10.0 * float(np.sum(np.abs(C[hard])))
        if G.size:
            s = np.maximum(0.0, nu - mu * G)
            phi += float(s @ s - nu @ nu) / (2.0 * mu)
        return phi

    R, JR, C, JC, G, JG = _eval(z)
    if not (np.all(np.isfinite(R)) and np.all(np.isfinite(C)) and np.all(np.isfinite(G))):
        report = SolveReport(
            status="diverged", cost=np.inf, viol_eq=np.inf, viol_in=np.inf,
            stationarity=np.inf, outer_iters=0, inner_iters=0, mu_final=mu,
            z0_clamped=clamped, wall_time=time.perf_counter() - t_start,
        )
        return S * z, {"eq": lam, "in": nu}, report

    hard_idx = np.nonzero(hard)[0]
    if o.warm_multipliers and C.size:
        # least-squares multiplier fit at the initial point via the saddle
        # system (well conditioned even with redundant rows): keeps the first
        # augmented-Lagrangian subproblem's minimum near a near-feasible start
        g0 = JR.T @ R
        m_all = JC.shape[0]
        Ksad = sp.bmat(
            [[sp.eye(n, format="csc"), JC.T],
             [JC, -1e-6 * sp.eye(m_all, format="csc")]], format="csc",
        )
        try:
            lam = -spla.splu(Ksad).solve(np.concatenate([-g0, np.zeros(m_all)]))[n:]
        except RuntimeError:
            log.info("multiplier warm start failed; starting from zero")
    outer = 0
    prox = o.prox0
    for outer in range(1, o.max_outer + 1):
        anchor = z.copy()
        phi = merit(R, C, G) + 0.5 * prox * float((z - anchor) @ (z - anchor))
        merit_history.append([])
        pg = np.inf
        inner_stalled = False
        for _ in range(o.max_inner):
            total_inner += 1
            s_act = np.maximum(0.0, nu - mu * G) if G.size else np.zeros(0)
            # step gradient: cost, soft penalty, and the proximal anchor; the
            # hard rows and their multipliers enter through the KKT block
            g_step = JR.T @ R + prox * (z - anchor)
            if C.size and np.any(soft):
                g_step = g_step + JC.T @ np.where(soft, mu * C - lam, 0.0)
            if G.size:
                g_step = g_step - JG.T @ s_act
            # stationarity measure: the full Lagrangian gradient
            g = g_step - (JC.T @ np.where(hard, lam, 0.0) if m_h else 0.0)
            pg = _projected_gradient_norm(g, z, lb, ub)
            viol_hard = float(np.max(np.abs(C[hard]) / sc_eq[hard])) if m_h else 0.0
            if pg <= inner_tol and viol_hard <= o.tol_eq:
                break

            mats = [JR]
            if np.any(soft):
                mats.append(np.sqrt(mu) * JC[np.nonzero(soft)[0], :])
            if G.size:
                act = s_act > 0.0
                if np.any(act):
                    mats.append(np.sqrt(mu) * JG[np.nonzero(act)[0], :])
            Jstack = sp.vstack(mats, format="csr")
            H = ((Jstack.T @ Jstack) + prox * sp.eye(n, format="csc")).tocsc()
            Hfull = H

            fixed = ((z <= lb + 1e-12) & (g > 0)) | ((z >= ub - 1e-12) & (g < 0))
            free_diag = sp.diags((~fixed).astype(float))
            H = free_diag @ H @ free_diag + sp.diags(fixed.astype(float))
            g_mod = np.where(fixed, 0.0, g_step)

            accepted = False
            # variables are scaled to O(1): flooring the Marquardt diagonal at
            # one adds proximal damping along cost-flat directions
            Hdiag = np.maximum(np.asarray(H.diagonal()), 1.0)
            Dreg = sp.diags(Hdiag)
            for _refactor in range(3):
                Hd = (H + damping * Dreg).tocsc()
                if m_h:
                    JH = (JC[hard_idx, :] @ free_diag).tocsr()
                    eps_d = 1e-11
                    K = sp.bmat(
                        [[Hd, JH.T], [JH, -eps_d * sp.eye(m_h, format="csc")]],
                        format="csc",
                    )
                    rhs = np.concatenate([-g_mod, -C[hard_idx] - eps_d * lam[hard_idx]])
                else:
                    K = Hd
                    rhs = -g_mod
                try:
                    lu = spla.splu(K)
                    sol_kkt = lu.solve(rhs)
                except RuntimeError:
                    damping = min(damping * 100.0, o.damping_max)
                    continue
                step = sol_kkt[:n]
                if not np.all(np.isfinite(step)):
                    damping = min(damping * 100.0, o.damping_max)
                    continue
                if m_h:
                    lam[hard_idx] = -sol_kkt[n:]
                break
            else:
                inner_stalled = True
                break
            # Levenberg step control: the merit model is the Gauss-Newton
            # quadratic plus the exact hard-row restoration; damping follows
            # the measured model quality rho
            smax = float(np.max(np.abs(step)))
            alpha_cap = min(1.0, radius / max(smax, 1e-300))
            gTs = float(g_step @ step)
            sHs = float(step @ (Hfull @ step))
            c1_hard = float(np.sum(np.abs(C[hard]))) if m_h else 0.0
            alpha = alpha_cap
            rho = 0.0
            for _bt in range(16):
                pred = -alpha * gTs - 0.5 * alpha * alpha * sHs \
                    + 10.0 * alpha * c1_hard
                cand = np.clip(z + alpha * step, lb, ub)
                Rc, _, Cc, _, Gc, _ = _eval(cand, want_jac=False)
                finite = (np.all(np.isfinite(Rc)) and np.all(np.isfinite(Cc))
                          and np.all(np.isfinite(Gc)))
                if finite:
                    d_anchor = cand - anchor
                    phi_c = merit(Rc, Cc, Gc) + 0.5 * prox * float(d_anchor @ d_anchor)
                    if phi_c < phi - 1e-14 * max(1.0, abs(phi)):
                        z = cand
                        merit_history[-1].append((phi, phi_c))
                        rho = (phi - phi_c) / max(pred, 1e-300)
                        phi = phi_c
                        accepted = True
                        break
                alpha *= 0.5
            if not accepted:
                damping = min(damping * 10.0, o.damping_max)
                radius = max(radius * 0.25, o.radius_min)
                if damping >= o.damping_max * 0.99:
                    inner_stalled = True
                    break
                continue
            if rho > 0.75 and alpha >= 0.99 * alpha_cap:
                damping = max(damping / o.damping_factor, o.damping_floor)
                if smax * alpha >= 0.5 * radius:
                    radius = min(radius * 2.0, o.radius_max)
            elif rho < 0.25 or alpha < 0.25 * alpha_cap:
                damping = min(damping * o.damping_factor, o.damping_max)
                radius = max(radius * 0.5, o.radius_min)
            if o.verbose and log.isEnabledFor(logging.DEBUG):
                log.debug("    inner: pg=%.3g phi=%.8g damp=%.2e rho=%.2f |step|=%.2e alpha=%.3g",
                          pg, phi, damping, rho, smax, alpha)
            R, JR, C, JC, G, JG = _eval(z)

        viol_eq = float(np.max(np.abs(C) / sc_eq)) if C.size else 0.0
        viol_in = float(max(0.0, -np.min(G / sc_in, initial=0.0))) if G.size else 0.0
        viol = max(viol_eq, viol_in)

        # safeguarded first-order update of the soft multipliers; hard
        # multipliers come from the KKT solves
        cap = 10.0 * (1.0 + float(np.max(np.abs(lam[soft]), initial=0.0)))
        lam[soft] = lam[soft] - np.clip(mu * C[soft], -cap, cap)
        prox = max(prox * 0.5, o.prox_floor)
        nu = np.maximum(0.0, nu - mu * G) if G.size else nu
        stat_norm = pg
        cost_history.append(0.5 * float(R @ R))
        if o.verbose:
            log.info(
                "outer %d: cost=%.6g eq=%.3g in=%.3g stat=%.3g mu=%.3g inner=%d",
                outer, cost_history[-1], viol_eq, viol_in, stat_norm, mu, total_inner,
            )
        if viol_eq <= o.tol_eq and viol_in <= o.tol_in and stat_norm <= o.tol_stat:
            status = "converged"
            break
        feasible = viol_eq <= o.tol_eq and viol_in <= o.tol_in
        if inner_stalled and feasible:
            log.info("stopping at the numerical floor: viol=%.3g stat=%.3g", viol, stat_norm)
            break
        if viol > 0.25 * prev_viol and viol > min(o.tol_eq, o.tol_in) and mu < o.mu_max:
            mu = min(mu * o.mu_growth, o.mu_max)
        if viol > 0.95 * prev_viol and viol > min(o.tol_eq, o.tol_in) \
                and stat_norm > 0.7 * prev_stat:
            stagnant += 1
            if stagnant >= 5:
                log.info("no progress over %d outer passes", stagnant)
                break
        else:
            stagnant = 0
        prev_viol = max(viol, 1e-300)
        prev_stat = max(stat_norm, 1e-300)
        inner_tol = max(o.tol_stat * 0.5, inner_tol * o.inner_tol_shrink)

    report = SolveReport(
        status=status,
        cost=cost_history[-1] if cost_history else problem.cost(S * z),
        viol_eq=float(np.max(np.abs(C) / sc_eq)) if C.size else 0.0,
        viol_in=float(max(0.0, -np.min(G / sc_in, initial=0.0))) if G.size else 0.0,
        stationarity=stat_norm,
        outer_iters=outer,
        inner_iters=total_inner,
        mu_final=mu,
        cost_history=cost_history,
        merit_history=merit_history,
        group_violations=problem.group_violations(S * z),
        z0_clamped=clamped,
        wall_time=time.perf_counter() - t_start,
    )
    return S * z, {"eq": lam, "in": nu}, report


@dataclass
class KktReport:
    stationarity: float
    primal_eq: float
    primal_in: float
    dual_feasibility: float      # most negative inequality multiplier
    complementarity: float
    ok: bool


def check_kkt(problem: NlpProblem, z, multipliers, tol=1e-6) -> KktReport:
    """First-order optimality of (z, multipliers) for the scaled problem;
    bound constraints are handled through gradient projection."""
    lam = multipliers["eq"]
    nu = multipliers["in"]
    R, JR, C, JC, G, JG = problem.evaluate(z)
    lb, ub = problem.bounds()
    grad = JR.T @ R
    if C.size:
        grad = grad - JC.T @ lam
    if G.size:
        grad = grad - JG.T @ nu
    stat = _projected_gradient_norm(grad, z, lb, ub)
    primal_eq = float(np.max(np.abs(C) / problem.scales("eq"))) if C.size else 0.0
    primal_in = float(max(0.0, -np.min(G / problem.scales("in"), initial=0.0))) if G.size else 0.0
    dual = float(min(0.0, np.min(nu, initial=0.0)))
    comp = float(np.max(np.abs(nu * G))) if G.size else 0.0
    ok = stat <= tol and primal_eq <= tol and primal_in <= tol and -dual <= tol and comp <= tol
    return KktReport(stat, primal_eq, primal_in, dual, comp, ok)
