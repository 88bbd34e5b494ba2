"""Small dense QP solver for the action-projection filter.

Solves

    min_u  1/2 (u - u_ref)' P (u - u_ref)
    s.t.   coeff_i . u >= rhs_i   (barrier rows)
           u in box               (actuator limits, never relaxed)

with a primal active-set method and Cholesky-factored KKT solves.  Problems
here are tiny (a handful of inputs, tens of rows at most), active sets are
warm-started across consecutive control steps, and tie-breaking is by lowest
row index so identical problems yield identical solutions.

If the barrier rows are jointly infeasible inside the box (detected by a
phase-1 LP), the solve is repeated with one quadratic slack per barrier row
penalized by ``rho``; the box stays hard.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from .barriers import AffineConstraint
from .dynamics import BoxSet
from .errors import SolverFailedError

_FEAS_TOL = 1e-9
_ZERO_STEP = 1e-11
_DUAL_TOL = 1e-9


@dataclass(frozen=True)
class QpProblem:
    weight: np.ndarray
    u_ref: np.ndarray
    ineqs: Sequence[AffineConstraint]
    box: BoxSet

    def __post_init__(self):
        P = np.asarray(self.weight, dtype=float)
        u_ref = np.asarray(self.u_ref, dtype=float)
        object.__setattr__(self, "weight", P)
        object.__setattr__(self, "u_ref", u_ref)
        object.__setattr__(self, "ineqs", tuple(self.ineqs))
        m = u_ref.size
        if P.shape != (m, m):
            raise ValueError(f"weight must be {m}x{m}, got {P.shape}")
        if not np.allclose(P, P.T, atol=1e-12):
            raise ValueError("weight matrix must be symmetric")
        try:
            np.linalg.cholesky(P)
        except np.linalg.LinAlgError as exc:
            raise ValueError("weight matrix must be positive definite") from exc
        if self.box.dim != m:
            raise ValueError("box dimension does not match u_ref")
        if len(self.ineqs) > 32:
            raise ValueError("at most 32 inequality rows are supported")
        for c in self.ineqs:
            if c.coeff.size != m:
                raise ValueError("constraint row dimension does not match u_ref")

    @property
    def dim(self) -> int:
        return self.u_ref.size

    def objective(self, u: np.ndarray) -> float:
        du = np.asarray(u, dtype=float) - self.u_ref
        return 0.5 * float(du @ self.weight @ du)


@dataclass
class QpSolution:
    u: np.ndarray
    status: str                      # "optimal" | "relaxed" | "failed"
    slacks: np.ndarray               # per original inequality row
    kkt_residual: float
    iterations: int
    multipliers: np.ndarray | None = None   # per canonical row (ineqs, box lo, box hi)


def canonical_rows(problem: QpProblem) -> tuple[np.ndarray, np.ndarray]:
    """Stack barrier rows and box faces as G u >= b."""
    m = problem.dim
    r = len(problem.ineqs)
    G = np.zeros((r + 2 * m, m))
    b = np.zeros(r + 2 * m)
    for i, c in enumerate(problem.ineqs):
        G[i] = c.coeff
        b[i] = c.rhs
    for j in range(m):
        G[r + 2 * j, j] = 1.0
        b[r + 2 * j] = problem.box.lower[j]
        G[r + 2 * j + 1, j] = -1.0
        b[r + 2 * j + 1] = -problem.box.upper[j]
    return G, b


class ActiveSetQp:
    """Warm-startable primal active-set solver.

    One instance per control trajectory: the optimal active set of each solve
    seeds the next, which usually terminates the follow-up solve in a single
    KKT factorization.  Instances hold mutable workspace and must not be
    shared across threads.
    """

    def __init__(self, max_iter_factor: int = 100, rho: float = 1e6,
                 tikhonov: float = 1e-10):
        self.max_iter_factor = max_iter_factor
        self.rho = rho
        self.tikhonov = tikhonov
        self._warm: tuple[int, ...] | None = None

    # -- equality-constrained subproblem ------------------------------------

    def _kkt_step(self, cho, grad, A):
        """Minimize 1/2 p'Hp + grad'p s.t. A p = 0; returns (p, mu)."""
        if A.shape[0] == 0:
            return -scipy.linalg.cho_solve(cho, grad), np.zeros(0)
        HiA = scipy.linalg.cho_solve(cho, A.T)
        Hig = scipy.linalg.cho_solve(cho, grad)
        S = A @ HiA
        rhs = -(A @ Hig)
        try:
            mu = np.linalg.solve(S, rhs)
        except np.linalg.LinAlgError:
            S = S + self.tikhonov * np.eye(S.shape[0])
            try:
                mu = np.linalg.solve(S, rhs)
            except np.linalg.LinAlgError as exc:
                raise SolverFailedError("KKT system singular after regularization") from exc
        p = -Hig - HiA @ mu
        return p, mu

    def _active_set_core(self, H, c, G, b, z0, W0, max_iter):
        """Primal active-set loop on G z >= b from a feasible z0."""
        cho = scipy.linalg.cho_factor(H)
        z = z0.astype(float).copy()
        W = sorted(W0)
        n_rows = G.shape[0]
        lam_full = np.zeros(n_rows)
        for it in range(1, max_iter + 1):
            A = G[W] if W else np.zeros((0, z.size))
            grad = H @ z + c
            p, mu = self._kkt_step(cho, grad, A)
            if np.linalg.norm(p, np.inf) <= _ZERO_STEP * (1.0 + np.linalg.norm(z, np.inf)):
                lam = -mu
                if lam.size == 0 or np.min(lam) >= -_DUAL_TOL:
                    lam_full[:] = 0.0
                    for idx, row in enumerate(W):
                        lam_full[row] = max(0.0, lam[idx])
                    return z, lam_full, it, "optimal"
                drop = W[int(np.argmin(lam))]
                W.remove(drop)
                continue
            # longest feasible step along p; blocking row with lowest index wins ties
            alpha = 1.0
            blocker = -1
            Gp = G @ p
            Gz = G @ z
            for i in range(n_rows):
                if i in W or Gp[i] >= -1e-13:
                    continue
                step = max(0.0, (Gz[i] - b[i])) / (-Gp[i])
                if step < alpha - 1e-15:
                    alpha = step
                    blocker = i
            z = z + alpha * p
            if blocker >= 0:
                if len(W) < z.size:
                    W = sorted(W + [blocker])
                else:
                    # full working set cannot accept another row; drop the one
                    # with the smallest multiplier to make room
                    lam = -mu
                    drop = W[int(np.argmin(lam))]
                    W.remove(drop)
                    W = sorted(W + [blocker])
        return z, lam_full, max_iter, "failed"

    # -- feasibility handling ------------------------------------------------

    @staticmethod
    def _active_rows(G, b, z, limit):
        idx = [i for i in range(G.shape[0]) if abs(G[i] @ z - b[i]) <= 1e-10]
        return idx[:limit]

    def _phase_one(self, problem: QpProblem):
        """Max-margin LP over the box; returns (t_star, u) or raises."""
        m = problem.dim
        rows = [c for c in problem.ineqs]
        A_ub = np.zeros((len(rows), m + 1))
        b_ub = np.zeros(len(rows))
        for i, c in enumerate(rows):
            A_ub[i, :m] = -c.coeff
            A_ub[i, m] = 1.0
            b_ub[i] = -c.rhs
        cost = np.zeros(m + 1)
        cost[m] = -1.0
        cap = 1e6 * (1.0 + float(np.max(np.abs(b_ub))) if len(rows) else 1.0)
        bounds = [(problem.box.lower[j], problem.box.upper[j]) for j in range(m)]
        bounds.append((None, cap))
        res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if not res.success:
            raise SolverFailedError(f"phase-1 LP failed: {res.message}")
        return float(res.x[m]), problem.box.clip(res.x[:m])

    # -- public entry ---------------------------------------------------------

    def solve(self, problem: QpProblem) -> QpSolution:
        m = problem.dim
        P = problem.weight
        u_ref = problem.u_ref
        G, b = canonical_rows(problem)
        r = len(problem.ineqs)
        max_iter = self.max_iter_factor * m

        # duplicated barrier rows: identical coefficients keep only the
        # tightest right-hand side (multipliers of the dropped copies are 0)
        keep: list[int] = []
        seen: dict[bytes, int] = {}
        for i in range(r):
            key = G[i].tobytes()
            if key in seen:
                j = seen[key]
                if b[i] > b[keep[j]]:
                    keep[j] = i
            else:
                seen[key] = len(keep)
                keep.append(i)
        solve_rows = keep + list(range(r, r + 2 * m))
        Gs, bs = G[solve_rows], b[solve_rows]

        # a zero row with positive rhs is unsatisfiable for every u
        forced_infeasible = any(
            not np.any(Gs[i]) and bs[i] > _FEAS_TOL for i in range(len(keep)))

        def finish_optimal(u, lam_solve, iterations):
            u = problem.box.clip(u)
            lam_full = np.zeros(r + 2 * m)
            for local, row in enumerate(solve_rows):
                lam_full[row] = lam_solve[local]
            sol = QpSolution(u=u, status="optimal", slacks=np.zeros(r),
                             kkt_residual=0.0, iterations=iterations,
                             multipliers=lam_full)
            sol.kkt_residual = verify_kkt(problem, sol)
            self._warm = tuple(int(i) for i in np.flatnonzero(lam_full > _DUAL_TOL))
            return sol

        # fast path: the reference action already satisfies everything
        if not forced_infeasible and np.all(G @ u_ref - b >= -1e-12):
            sol = QpSolution(u=u_ref.copy(), status="optimal", slacks=np.zeros(r),
                             kkt_residual=0.0, iterations=0,
                             multipliers=np.zeros(r + 2 * m))
            sol.kkt_residual = verify_kkt(problem, sol)
            self._warm = ()
            return sol

        # warm start: re-solve the equality problem of the previous active set
        if not forced_infeasible and self._warm:
            warm = [i for i in self._warm if i < r + 2 * m]
            local = [solve_rows.index(i) for i in warm if i in solve_rows]
            if local and len(local) <= m:
                A = Gs[local]
                try:
                    cho = scipy.linalg.cho_factor(P)
                    PiA = scipy.linalg.cho_solve(cho, A.T)
                    S = A @ PiA
                    lam = np.linalg.solve(S + self.tikhonov * np.eye(S.shape[0]),
                                          bs[local] - A @ u_ref)
                    u = u_ref + PiA @ lam
                    if (np.all(Gs @ u - bs >= -_FEAS_TOL)
                            and np.all(lam >= -_DUAL_TOL)):
                        lam_solve = np.zeros(len(solve_rows))
                        for k, loc in enumerate(local):
                            lam_solve[loc] = max(0.0, lam[k])
                        return finish_optimal(u, lam_solve, 1)
                except np.linalg.LinAlgError:
                    pass

        # feasible start for the exact solve
        u0 = None
        if not forced_infeasible:
            candidate = problem.box.clip(u_ref)
            if np.all(Gs @ candidate - bs >= -_FEAS_TOL):
                u0 = candidate
            else:
                t_star, lp_u = self._phase_one(problem)
                if t_star >= -1e-12 and np.all(Gs @ lp_u - bs >= -_FEAS_TOL):
                    u0 = lp_u

        if u0 is not None:
            c = -(P @ u_ref)
            W0 = self._active_rows(Gs, bs, u0, m)
            z, lam_solve, iters, status = self._active_set_core(
                P, c, Gs, bs, u0, W0, max_iter)
            if status == "failed":
                return QpSolution(u=problem.box.clip(z), status="failed",
                                  slacks=np.zeros(r), kkt_residual=np.inf,
                                  iterations=iters, multipliers=None)
            return finish_optimal(z, lam_solve, iters)

        # infeasible barrier rows: quadratic slack on them, box stays hard
        return self._solve_relaxed(problem, Gs, bs, len(keep), keep, max_iter)

    def _solve_relaxed(self, problem, Gs, bs, n_barrier, keep, max_iter):
        m = problem.dim
        r = len(problem.ineqs)
        nz = m + n_barrier
        H = np.zeros((nz, nz))
        H[:m, :m] = problem.weight
        H[m:, m:] = 2.0 * self.rho * np.eye(n_barrier)
        c = np.zeros(nz)
        c[:m] = -(problem.weight @ problem.u_ref)

        # rows: barrier with slack, slack nonnegativity, box faces
        n_rows = n_barrier + n_barrier + 2 * m
        Gz = np.zeros((n_rows, nz))
        bz = np.zeros(n_rows)
        for i in range(n_barrier):
            Gz[i, :m] = Gs[i]
            Gz[i, m + i] = 1.0
            bz[i] = bs[i]
        for i in range(n_barrier):
            Gz[n_barrier + i, m + i] = 1.0
        for j in range(m):
            Gz[2 * n_barrier + 2 * j, j] = 1.0
            bz[2 * n_barrier + 2 * j] = problem.box.lower[j]
            Gz[2 * n_barrier + 2 * j + 1, j] = -1.0
            bz[2 * n_barrier + 2 * j + 1] = -problem.box.upper[j]

        u0 = problem.box.clip(problem.u_ref)
        s0 = np.maximum(0.0, bs[:n_barrier] - Gs[:n_barrier] @ u0)
        z0 = np.concatenate([u0, s0])
        W0 = self._active_rows(Gz, bz, z0, nz)
        z, lam_ext, iters, status = self._active_set_core(
            H, c, Gz, bz, z0, W0, max_iter * 2)
        u = problem.box.clip(z[:m])
        slacks = np.array([max(0.0, cns.rhs - float(cns.coeff @ u))
                           for cns in problem.ineqs])
        if status == "failed":
            return QpSolution(u=u, status="failed", slacks=slacks,
                              kkt_residual=np.inf, iterations=iters,
                              multipliers=None)

        lam_full = np.zeros(r + 2 * m)
        for i in range(n_barrier):
            lam_full[keep[i]] = lam_ext[i]
        for j in range(2 * m):
            lam_full[r + j] = lam_ext[2 * n_barrier + j]
        grad = H @ z + c
        active = Gz @ z - bz
        kkt = max(
            float(np.linalg.norm(grad - Gz.T @ lam_ext, np.inf)),
            float(max(0.0, np.max(bz - Gz @ z))),
            float(np.max(np.abs(lam_ext * active))),
        )
        self._warm = None
        return QpSolution(u=u, status="relaxed", slacks=slacks,
                          kkt_residual=kkt, iterations=iters,
                          multipliers=lam_full)


def solve(problem: QpProblem) -> QpSolution:
    """One-shot solve with a fresh (cold) solver instance."""
    return ActiveSetQp().solve(problem)


def verify_kkt(problem: QpProblem, sol: QpSolution) -> float:
    """Max-norm of the first-order optimality residuals of a solution.

    Recomputes stationarity, primal feasibility, dual feasibility and
    complementary slackness for the original (unrelaxed) problem.
    """
    G, b = canonical_rows(problem)
    u = np.asarray(sol.u, dtype=float)
    lam = sol.multipliers if sol.multipliers is not None else np.zeros(G.shape[0])
    stationarity = float(np.linalg.norm(
        problem.weight @ (u - problem.u_ref) - G.T @ lam, np.inf))
    residual = G @ u - b
    primal = float(max(0.0, np.max(-residual))) if residual.size else 0.0
    dual = float(max(0.0, -np.min(lam))) if lam.size else 0.0
    comp = float(np.max(np.abs(lam * residual))) if lam.size else 0.0
    return max(stationarity, primal, dual, comp)
