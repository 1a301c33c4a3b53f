"""Convex QP container and solver wrapper.

Problems are stated as  min 1/2 z'Pz + q'z  s.t.  l <= Az <= u  and handed to
the Clarabel interior-point solver. Residuals are recomputed here from the
returned primal/dual pair so the tolerance contract does not depend on the
solver's internal scaling.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp

from ..errors import MaxIterations, NumericalFailure


@dataclass(eq=False)
class ConvexQP:
    P: sp.csc_matrix
    q: np.ndarray
    A: sp.csc_matrix
    l: np.ndarray
    u: np.ndarray
    labels: dict = field(default_factory=dict)  # named index ranges into z

    @property
    def n(self) -> int:
        return len(self.q)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def objective(self, z: np.ndarray) -> float:
        return float(0.5 * z @ (self.P @ z) + self.q @ z)


@dataclass
class QPResult:
    x: np.ndarray
    y: np.ndarray  # multipliers of l <= Az <= u (positive on active upper bounds)
    status: str
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    solve_time: float


def residuals(qp: ConvexQP, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Scaled primal infeasibility and stationarity residuals."""
    Ax = qp.A @ x
    viol = np.maximum(Ax - qp.u, 0.0) + np.maximum(qp.l - Ax, 0.0)
    fin = np.concatenate([np.abs(qp.u[np.isfinite(qp.u)]), np.abs(qp.l[np.isfinite(qp.l)]), [0.0]])
    prim = float(viol.max(initial=0.0)) / (1.0 + max(float(np.abs(Ax).max(initial=0.0)), float(fin.max())))
    Px, Aty = qp.P @ x, qp.A.T @ y
    stat = Px + qp.q + Aty
    scale = 1.0 + max(float(np.abs(Px).max(initial=0.0)), float(np.abs(qp.q).max(initial=0.0)),
                      float(np.abs(Aty).max(initial=0.0)))
    return prim, float(np.abs(stat).max(initial=0.0)) / scale


def _settings(tolerance: float, max_iter: int) -> clarabel.DefaultSettings:
    s = clarabel.DefaultSettings()
    s.verbose = False
    s.max_iter = max_iter
    s.tol_gap_abs = s.tol_gap_rel = min(1e-8, tolerance * 1e-2)
    s.tol_feas = min(1e-8, tolerance * 1e-2)
    s.max_threads = 1
    return s


def solve_qp(qp: ConvexQP, tolerance: float = 1e-6, max_iter: int = 200) -> QPResult:
    """Solve ``qp``; raises MaxIterations / NumericalFailure (with the best iterate attached)."""
    t0 = time.perf_counter()
    A = sp.coo_matrix(qp.A)
    l, u = np.asarray(qp.l, float), np.asarray(qp.u, float)
    eq = np.isfinite(l) & np.isfinite(u) & (np.abs(u - l) <= 1e-12)
    up = np.isfinite(u) & ~eq
    lo = np.isfinite(l) & ~eq
    ie, iu, il = np.nonzero(eq)[0], np.nonzero(up)[0], np.nonzero(lo)[0]
    # stack [A_eq; A_up; -A_lo] by remapping row indices of the triplets
    rows, cols, vals = [], [], []
    offset = 0
    for idx, sign in ((ie, 1.0), (iu, 1.0), (il, -1.0)):
        pos = np.full(qp.m, -1)
        pos[idx] = np.arange(len(idx)) + offset
        sel = pos[A.row] >= 0
        rows.append(pos[A.row[sel]]); cols.append(A.col[sel]); vals.append(sign * A.data[sel])
        offset += len(idx)
    Ac = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(offset, qp.n))
    b = np.concatenate([u[ie], u[iu], -l[il]])
    cones = []
    if len(ie):
        cones.append(clarabel.ZeroConeT(len(ie)))
    if len(iu) + len(il):
        cones.append(clarabel.NonnegativeConeT(len(iu) + len(il)))
    Pc = sp.coo_matrix(qp.P)
    up_tri = Pc.row <= Pc.col
    P = sp.csc_matrix((Pc.data[up_tri], (Pc.row[up_tri], Pc.col[up_tri])), shape=(qp.n, qp.n))
    solver = clarabel.DefaultSolver(P, np.asarray(qp.q, float), Ac, b, cones, _settings(tolerance, max_iter))
    sol = solver.solve()
    x = np.array(sol.x)
    z = np.array(sol.z)
    y = np.zeros(qp.m)
    ne, nu = len(ie), len(iu)
    y[ie] += z[:ne]
    y[iu] += z[ne:ne + nu]
    y[il] -= z[ne + nu:]
    prim, dual = residuals(qp, x, y)
    status = str(sol.status)
    res = QPResult(x, y, status, qp.objective(x) if len(x) else 0.0, int(sol.iterations), prim, dual,
                   time.perf_counter() - t0)
    if status == "MaxIterations" or status == "MaxTime":
        raise MaxIterations(f"QP stopped after {res.iterations} iterations", res)
    if status not in ("Solved", "AlmostSolved") or not np.all(np.isfinite(x)):
        raise NumericalFailure(f"QP solver status {status}", res)
    if prim > tolerance or dual > tolerance:
        raise NumericalFailure(f"residuals above tolerance (primal {prim:.2e}, dual {dual:.2e})", res)
    res.status = "solved"
    return res
