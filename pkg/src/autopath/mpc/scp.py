"""Corridor MPC solved by sequential convex programming.

Each SCP iteration linearises the spatial bicycle model around the current
trajectory, re-fits the corridor lines to that trajectory (from the second
iteration on), and solves one QP. Decision vector layout:
``z = [x_1..x_N (5N), u_0..u_{N-1} (2N), sigma_l (N), sigma_r (N)]``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..corridor import Corridor, relinearize
from ..errors import AutopathError, HorizonTooShort, MaxIterations, NumericalFailure, SolverError
from ..geometry import wrap_angle
from .dynamics import linearize_dynamics, rollout, step_raw
from .model import ControlInput, MpcParams, VehicleState
from .qp import ConvexQP, solve_qp

NX, NU = 5, 2
GUESS_LOOKAHEAD = 4  # steps ahead the initial-guess rollout aims at


@dataclass
class IterationInfo:
    iteration: int
    cost: float
    defect: float  # max_k |x_{k+1} - f(x_k, u_k)| of the nonlinear model
    solve_time: float
    max_slack: float


@dataclass
class TrajectorySolution:
    states: np.ndarray  # (N, 5): x_1..x_N
    controls: np.ndarray  # (N, 2): u_0..u_{N-1}
    slack_left: np.ndarray
    slack_right: np.ndarray
    cost: float
    iterations: list[IterationInfo] = field(default_factory=list)
    initial_defect: float = 0.0
    corridor: Corridor | None = None
    status: str = "solved"

    @property
    def total_solve_time(self) -> float:
        return float(sum(i.solve_time for i in self.iterations))

    @property
    def defect(self) -> float:
        return self.iterations[-1].defect if self.iterations else self.initial_defect

    @property
    def first_control(self) -> ControlInput:
        return ControlInput(float(self.controls[0, 0]), float(self.controls[0, 1]))


def nonlinear_defect(x0: np.ndarray, states: np.ndarray, controls: np.ndarray, p: MpcParams) -> float:
    prev = np.vstack([x0[None, :], states[:-1]])
    worst = 0.0
    for k in range(len(controls)):
        worst = max(worst, float(np.abs(states[k] - step_raw(prev[k], controls[k], p)).max()))
    return worst


def steering_limits(v_expected: np.ndarray, p: MpcParams) -> np.ndarray:
    """|psi| bound per step: the hard limit, tightened so v^2 tan(psi) / l stays within lat_accel_max."""
    v2 = np.maximum(np.asarray(v_expected, float) ** 2, 1e-6)
    return np.minimum(p.psi_max, np.arctan(p.lat_accel_max * p.l / v2))


def horizon_cost(states, controls, sl, sr, corridor: Corridor, v_ref, p: MpcParams) -> float:
    """Nonlinear-form objective of one horizon, slack penalised through its positive part."""
    n = len(controls)
    w5 = np.array([p.w5 if corridor.steps[k].has_reference else 0.0 for k in range(n)])
    ref = np.array([corridor.steps[k].reference[:2] if corridor.steps[k].has_reference else (0.0, 0.0)
                    for k in range(n)]).reshape(-1, 2)
    track = w5 * ((states[:, 0] - ref[:, 0]) ** 2 + (states[:, 1] - ref[:, 1]) ** 2)
    c = (p.w1 * (states[:, 3] - v_ref[:n]) ** 2 + p.w2 * states[:, 4] ** 2 + p.w3 * controls[:, 0] ** 2
         + p.w4 * controls[:, 1] ** 2 + track + p.w6 * np.maximum(sl, 0) + p.w7 * np.maximum(sr, 0))
    return float(c.sum())


def assemble_subproblem(
    x0: np.ndarray,
    states_bar: np.ndarray,
    controls_bar: np.ndarray,
    corridor: Corridor,
    params: MpcParams,
    v_ref: Sequence[float],
    affine=None,
    trust_region: bool | None = None,
) -> ConvexQP:
    """QP for one SCP iteration around (states_bar, controls_bar)."""
    p = params
    n = min(len(controls_bar), len(corridor), p.N)
    if n < 2:
        raise HorizonTooShort(f"horizon of {n} steps after truncation")
    states_bar, controls_bar = states_bar[:n], controls_bar[:n]
    v_ref = np.asarray(v_ref, float)[:n]
    As, Bs, cs = affine if affine is not None else linearize_dynamics(states_bar, controls_bar, x0, p)
    As, Bs, cs = As[:n], Bs[:n], cs[:n]
    ix, iu, il, ir = 0, NX * n, (NX + NU) * n, (NX + NU + 1) * n
    nz = (NX + NU + 2) * n

    # dynamics: x_{k+1} - A_k x_k - B_k u_k = c_k
    ii = np.arange(NX)
    k5 = NX * np.arange(n)
    r_a = (k5[1:, None, None] + ii[None, :, None]) + np.zeros((1, 1, NX), int)
    c_a = (ix + k5[:-1, None, None] + ii[None, None, :]) + np.zeros((1, NX, 1), int)
    r_b = (k5[:, None, None] + ii[None, :, None]) + np.zeros((1, 1, NU), int)
    c_b = (iu + NU * np.arange(n)[:, None, None] + np.arange(NU)[None, None, :]) + np.zeros((1, NX, 1), int)
    dyn_r = np.concatenate([np.arange(NX * n), r_a.ravel(), r_b.ravel()])
    dyn_c = np.concatenate([ix + np.arange(NX * n), c_a.ravel(), c_b.ravel()])
    dyn_v = np.concatenate([np.ones(NX * n), -As[1:].ravel(), -Bs.ravel()])
    rhs = cs.copy()
    rhs[0] += As[0] @ x0
    b_dyn = rhs.ravel()

    # corridor: alpha x + beta y - sigma <= gamma - half_width - sigma_buffer
    coef = corridor.coefficients()[:n]
    tight = p.vehicle_width / 2.0 + p.sigma_buffer
    kk = np.arange(n)
    cor_r = NX * n + np.concatenate([2 * kk, 2 * kk, 2 * kk, 2 * kk + 1, 2 * kk + 1, 2 * kk + 1])
    cor_c = np.concatenate([ix + NX * kk, ix + NX * kk + 1, il + kk, ix + NX * kk, ix + NX * kk + 1, ir + kk])
    cor_v = np.concatenate([coef[:, 0], coef[:, 1], -np.ones(n), coef[:, 3], coef[:, 4], -np.ones(n)])
    u_cor = np.empty(2 * n)
    u_cor[0::2] = coef[:, 2] - tight
    u_cor[1::2] = coef[:, 5] - tight

    # variable bounds (box limits, slack band, trust region)
    lo = np.full(nz, -np.inf)
    hi = np.full(nz, np.inf)
    X = slice(ix, iu)
    lo_x, hi_x = lo[X].reshape(n, NX), hi[X].reshape(n, NX)
    psi_lim = steering_limits(np.maximum(states_bar[:, 3], v_ref), p)
    lo_x[:, 3], hi_x[:, 3] = 0.0, p.v_max
    lo_x[:, 4], hi_x[:, 4] = -psi_lim, psi_lim
    if p.trust_region if trust_region is None else trust_region:
        boxes = [(2, p.trust_angle), (4, p.trust_angle)]
        if p.trust_pos is not None:
            boxes += [(0, p.trust_pos), (1, p.trust_pos)]
        for j, r in boxes:
            nlo = np.maximum(lo_x[:, j], states_bar[:, j] - r)
            nhi = np.minimum(hi_x[:, j], states_bar[:, j] + r)
            ok = nlo <= nhi
            lo_x[ok, j], hi_x[ok, j] = nlo[ok], nhi[ok]
    lo[X], hi[X] = lo_x.ravel(), hi_x.ravel()
    lo[iu:il:2], hi[iu:il:2] = -p.a_max, p.a_max
    lo[iu + 1:il:2], hi[iu + 1:il:2] = -p.dpsi_max, p.dpsi_max
    lo[il:], hi[il:] = 0.0, p.sigma_buffer
    bounded = np.nonzero(np.isfinite(lo) | np.isfinite(hi))[0]
    m0 = (NX + 2) * n
    rows = np.concatenate([dyn_r, cor_r, m0 + np.arange(len(bounded))])
    cols = np.concatenate([dyn_c, cor_c, bounded])
    vals = np.concatenate([dyn_v, cor_v, np.ones(len(bounded))])
    keep = vals != 0.0
    A = sp.csc_matrix((vals[keep], (rows[keep], cols[keep])), shape=(m0 + len(bounded), nz))
    l = np.concatenate([b_dyn, np.full(2 * n, -np.inf), lo[bounded]])
    u = np.concatenate([b_dyn, u_cor, hi[bounded]])

    # objective
    w5 = np.array([p.w5 if corridor.steps[k].has_reference else 0.0 for k in range(n)])
    ref = np.array([corridor.steps[k].reference[:2] if corridor.steps[k].has_reference else (0.0, 0.0)
                    for k in range(n)]).reshape(-1, 2)
    pdiag = np.zeros(nz)
    q = np.zeros(nz)
    px = pdiag[X].reshape(n, NX)
    qx = q[X].reshape(n, NX)
    px[:, 0] = px[:, 1] = 2 * w5
    qx[:, 0], qx[:, 1] = -2 * w5 * ref[:, 0], -2 * w5 * ref[:, 1]
    px[:, 3] = 2 * p.w1
    qx[:, 3] = -2 * p.w1 * v_ref
    px[:, 4] = 2 * p.w2
    pdiag[X], q[X] = px.ravel(), qx.ravel()
    pdiag[iu:il:2] = 2 * p.w3
    pdiag[iu + 1:il:2] = 2 * p.w4
    q[il:ir] = p.w6
    q[ir:] = p.w7
    labels = {"states": (ix, iu), "controls": (iu, il), "slack_left": (il, ir), "slack_right": (ir, nz),
              "n": n, "constant": float((p.w1 * v_ref ** 2).sum() + (w5 * (ref ** 2).sum(axis=1)).sum())}
    return ConvexQP(sp.diags(pdiag).tocsc(), q, A, l, u, labels)


def unpack(qp: ConvexQP, z: np.ndarray):
    n = qp.labels["n"]
    a, b = qp.labels["states"]
    states = z[a:b].reshape(n, NX)
    a, b = qp.labels["controls"]
    controls = z[a:b].reshape(n, NU)
    a, b = qp.labels["slack_left"]
    sl = z[a:b]
    a, b = qp.labels["slack_right"]
    return states, controls, sl, z[a:b]


def path_guess(x0: np.ndarray, corridor: Corridor, v_ref: np.ndarray, p: MpcParams) -> np.ndarray:
    """Controls from inverse kinematics of the corridor's path poses (v = v_ref).

    Headings come from consecutive positions, steering from the heading change
    per step, acceleration from the speed-reference change; all are clipped to
    the box limits so the rollout stays dynamically consistent.
    """
    n = len(v_ref)
    pos = np.vstack([np.asarray(x0[:2], float)[None, :],
                     np.array([[s.path_pose.x, s.path_pose.y] for s in corridor.steps[:n]])])
    heads = np.arctan2(np.diff(pos[:, 1]), np.diff(pos[:, 0]))
    if n > 1:
        heads[0] = corridor.steps[0].path_pose.heading if np.hypot(*(pos[1] - pos[0])) < 1e-9 else heads[0]
    dth = np.array([wrap_angle(b - a) for a, b in zip(heads[:-1], heads[1:])] + [0.0])
    psi_lim = steering_limits(v_ref, p)
    psi = np.clip(np.arctan(p.l * dth / p.d), -psi_lim, psi_lim)
    controls = np.zeros((n, NU))
    prev_psi = float(x0[4])
    v = float(x0[3])
    for k in range(n):
        dpsi = float(np.clip(psi[k] - prev_psi, -p.dpsi_max, p.dpsi_max))
        a = float(np.clip((v_ref[k] ** 2 - v ** 2) / (2 * p.d), -p.a_max, p.a_max))
        controls[k] = (a, dpsi)
        prev_psi += dpsi
        v = math.sqrt(max(v * v + 2 * a * p.d, 0.0))
    return controls


def tracking_guess(x0: np.ndarray, targets: np.ndarray, v_ref: np.ndarray, p: MpcParams) -> np.ndarray:
    """Controls that steer a rollout through ``targets`` (inverse kinematics, one step look-ahead)."""
    n = len(targets)
    controls = np.zeros((n, NU))
    x = np.asarray(x0, float).copy()
    for k in range(n):
        nxt_pos = x[:2] + p.d * np.array([math.cos(x[2]), math.sin(x[2])])
        aim = targets[min(k + GUESS_LOOKAHEAD, n - 1)]
        if k + 1 >= n or np.hypot(*(aim - nxt_pos)) < 1e-9:
            dth = 0.0
        else:
            dth = wrap_angle(math.atan2(aim[1] - nxt_pos[1], aim[0] - nxt_pos[0]) - x[2])
        dist = max(float(np.hypot(*(aim - nxt_pos))), p.d)
        steer = math.atan(2.0 * p.l * math.sin(dth) / dist)  # pure pursuit
        psi_lim = float(steering_limits(np.array([max(x[3], v_ref[k])]), p)[0])
        steer = float(np.clip(steer, -psi_lim, psi_lim))
        dpsi = float(np.clip(steer - x[4], -p.dpsi_max, p.dpsi_max))
        a = float(np.clip((v_ref[k] ** 2 - x[3] ** 2) / (2 * p.d), -p.a_max, p.a_max))
        controls[k] = (a, dpsi)
        x = step_raw(x, controls[k], p)
    return controls


def scp_solve(
    initial_state: VehicleState,
    corridor: Corridor,
    params: MpcParams,
    v_ref: float | Sequence[float],
    warm_controls: np.ndarray | None = None,
    iterations: int | None = None,
) -> TrajectorySolution:
    """Run ``params.scp_iterations`` (or ``iterations``) SCP iterations.

    The first iteration uses the corridor as built from the planner path;
    later ones re-fit it to the latest trajectory.
    """
    p = params
    k_iter = p.scp_iterations if iterations is None else iterations
    n = min(p.N, len(corridor))
    if n < 2:
        raise HorizonTooShort(f"horizon of {n} steps after truncation")
    vr = np.full(n, float(v_ref)) if np.ndim(v_ref) == 0 else np.asarray(v_ref, float)[:n]
    if len(vr) < n:
        raise ValueError("v_ref shorter than the horizon")
    x0 = initial_state.as_array()
    targets = np.array([[s.path_pose.x, s.path_pose.y] for s in corridor.steps[:n]])
    if warm_controls is not None and len(warm_controls):
        wc = np.asarray(warm_controls, float)[:n]
        if len(wc) < n:
            wc = np.vstack([wc, np.repeat(wc[-1:], n - len(wc), axis=0)])
        controls = wc.copy()
    elif p.initial_guess == "path":
        controls = path_guess(x0, corridor, vr, p)
    else:
        controls = tracking_guess(x0, targets, vr, p)
    states = rollout(x0, controls, p)
    init_defect = nonlinear_defect(x0, states, controls, p)
    cor = Corridor(corridor.steps[:n], corridor.candidates[:n], corridor.sigma_buffer, corridor.narrow_steps)
    infos: list[IterationInfo] = []
    sl = sr = np.zeros(n)
    for it in range(1, k_iter + 1):
        t0 = time.perf_counter()
        if it > 1:
            cor = relinearize(cor, states, p.vehicle_width)
        affine = linearize_dynamics(states, controls, x0, p)
        # the first expansion is a heuristic guess, so the trust region only
        # applies once the expansion is itself a QP solution
        qp = assemble_subproblem(x0, states, controls, cor, p, vr, affine, trust_region=p.trust_region and it > 1)
        try:
            res = solve_qp(qp, p.qp_tolerance)
        except (MaxIterations, NumericalFailure) as exc:
            raise SolverError(str(exc), it, exc) from exc
        states, controls, sl, sr = (np.array(a) for a in unpack(qp, res.x))
        infos.append(IterationInfo(it, horizon_cost(states, controls, sl, sr, cor, vr, p),
                                   nonlinear_defect(x0, states, controls, p), time.perf_counter() - t0,
                                   float(max(sl.max(), sr.max()))))
    return TrajectorySolution(states, controls, sl, sr, infos[-1].cost, infos, init_defect, cor)


class MpcController:
    """Receding-horizon wrapper: warm starts by shifting the previous controls
    along the distance travelled, and falls back to braking on failure."""

    def __init__(self, params: MpcParams | None = None):
        self.params = params or MpcParams()
        self._prev: np.ndarray | None = None
        self._prev_xy: np.ndarray | None = None

    def reset(self) -> None:
        self._prev = None
        self._prev_xy = None

    def _warm(self, state: VehicleState) -> np.ndarray | None:
        if self._prev is None or not self.params.warm_start:
            return None
        moved = float(np.hypot(state.x - self._prev_xy[0], state.y - self._prev_xy[1]))
        idx = np.arange(len(self._prev)) + moved / self.params.d
        base = np.arange(len(self._prev))
        return np.column_stack([np.interp(idx, base, self._prev[:, j]) for j in range(NU)])

    def tick(self, state: VehicleState, corridor: Corridor, v_ref) -> tuple[ControlInput, TrajectorySolution]:
        p = self.params
        try:
            sol = scp_solve(state, corridor, p, v_ref, self._warm(state))
        except (AutopathError, ValueError) as exc:
            self.reset()
            n = max(1, min(p.N, len(corridor)))
            ctrl = np.tile([-p.fallback_brake, 0.0], (n, 1))
            fb = TrajectorySolution(rollout(state.as_array(), ctrl, p), ctrl, np.zeros(n), np.zeros(n),
                                    float("nan"), status=f"fallback: {type(exc).__name__}: {exc}")
            return ControlInput(-p.fallback_brake, 0.0), fb
        self._prev = sol.controls.copy()
        self._prev_xy = np.array([state.x, state.y])
        return sol.first_control, sol


def mpc_tick(measured_state: VehicleState, corridor: Corridor, params: MpcParams, v_ref,
             controller: MpcController | None = None) -> tuple[ControlInput, TrajectorySolution]:
    """One MPC step; pass a persistent ``controller`` to enable warm starts."""
    ctl = controller or MpcController(params)
    return ctl.tick(measured_state, corridor, v_ref)
