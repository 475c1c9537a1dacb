"""Dense active-set solver for strictly convex box-constrained QPs:

    min 0.5 x^T H x + g^T x   s.t.  lb <= x <= ub

Problems here are small (tens of variables), so exact active-set pivoting
beats iterative methods: the returned point satisfies the KKT conditions to
linear-solve precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class BoxQpError(RuntimeError):
    pass


@dataclass
class BoxQpResult:
    x: np.ndarray
    grad: np.ndarray
    pg_norm: float            # projected-gradient infinity norm
    comp_slack: float         # complementary-slackness violation
    active_lo: np.ndarray
    active_hi: np.ndarray
    iterations: int

    @property
    def multipliers(self) -> np.ndarray:
        """Bound multipliers (>= 0): gradient at the active bounds."""
        mult = np.zeros_like(self.x)
        mult[self.active_lo] = np.maximum(self.grad[self.active_lo], 0.0)
        mult[self.active_hi] = np.maximum(-self.grad[self.active_hi], 0.0)
        return mult


def projected_gradient_norm(grad, x, lb, ub, tol=1e-11) -> float:
    pg = grad.copy()
    at_lo = x <= lb + tol
    at_hi = x >= ub - tol
    pg[at_lo] = np.minimum(grad[at_lo], 0.0)
    pg[at_hi] = np.maximum(grad[at_hi], 0.0)
    pg[at_lo & at_hi] = 0.0
    return float(np.max(np.abs(pg))) if pg.size else 0.0


def solve_box_qp(H: np.ndarray, g: np.ndarray, lb: np.ndarray, ub: np.ndarray,
                 x0: np.ndarray = None, tol: float = 1e-10,
                 max_iter: int = None) -> BoxQpResult:
    n = len(g)
    if np.any(lb > ub):
        raise BoxQpError("infeasible box: lb > ub")
    x = np.clip(x0 if x0 is not None else np.zeros(n), lb, ub)
    at_lo = np.isclose(x, lb, rtol=0.0, atol=1e-14) & np.isfinite(lb)
    at_hi = np.isclose(x, ub, rtol=0.0, atol=1e-14) & np.isfinite(ub)
    max_iter = max_iter or 50 * max(n, 4)

    for it in range(1, max_iter + 1):
        free = ~(at_lo | at_hi)
        cand = x.copy()
        cand[at_lo] = lb[at_lo]
        cand[at_hi] = ub[at_hi]
        if np.any(free):
            F = np.nonzero(free)[0]
            rhs = -(g[F] + H[np.ix_(F, ~free)] @ cand[~free])
            cand[F] = np.linalg.solve(H[np.ix_(F, F)], rhs)

        viol_lo = free & (cand < lb - tol)
        viol_hi = free & (cand > ub + tol)
        if np.any(viol_lo) or np.any(viol_hi):
            # ratio test from the current feasible point toward the candidate
            d = cand - x
            alpha = 1.0
            block = -1
            block_hi = False
            for i in np.nonzero(free)[0]:
                if d[i] < -1e-15 and np.isfinite(lb[i]):
                    a = (lb[i] - x[i]) / d[i]
                    if a < alpha:
                        alpha, block, block_hi = a, i, False
                elif d[i] > 1e-15 and np.isfinite(ub[i]):
                    a = (ub[i] - x[i]) / d[i]
                    if a < alpha:
                        alpha, block, block_hi = a, i, True
            x = np.clip(x + max(alpha, 0.0) * d, lb, ub)
            if block >= 0:
                if block_hi:
                    at_hi[block] = True
                    x[block] = ub[block]
                else:
                    at_lo[block] = True
                    x[block] = lb[block]
            continue

        # candidate is feasible for the working set: check multipliers
        x = np.clip(cand, lb, ub)
        grad = H @ x + g
        release = -1
        worst = tol
        for i in np.nonzero(at_lo)[0]:
            if grad[i] < -worst:
                worst = -grad[i]
                release = i
        for i in np.nonzero(at_hi)[0]:
            if grad[i] > worst:
                worst = grad[i]
                release = i
        if release < 0:
            comp = 0.0
            for i in range(n):
                if at_lo[i]:
                    comp = max(comp, abs(grad[i] * (x[i] - lb[i])))
                elif at_hi[i]:
                    comp = max(comp, abs(grad[i] * (ub[i] - x[i])))
            return BoxQpResult(
                x=x, grad=grad,
                pg_norm=projected_gradient_norm(grad, x, lb, ub),
                comp_slack=comp,
                active_lo=at_lo.copy(), active_hi=at_hi.copy(), iterations=it,
            )
        at_lo[release] = False
        at_hi[release] = False

    raise BoxQpError(f"active-set QP did not converge in {max_iter} iterations")
