"""Spatially discretised kinematic bicycle model and its linearisation."""
from __future__ import annotations

import math

import numpy as np

from ..geometry import wrap_angle
from .model import ControlInput, MpcParams, VehicleState


def step_raw(x: np.ndarray, u: np.ndarray, p: MpcParams) -> np.ndarray:
    """One step of length ``d`` without heading wrapping (used inside the SCP)."""
    px, py, th, v, psi = x
    a, dpsi = u
    steer = psi + dpsi
    pos_angle = steer if p.paper_literal else th
    return np.array([
        px + p.d * math.cos(pos_angle),
        py + p.d * math.sin(pos_angle),
        th + p.d * math.tan(steer) / p.l,
        math.sqrt(max(v * v + 2.0 * a * p.d, 0.0)),
        steer,
    ])


def step_dynamics(state: VehicleState, control: ControlInput, params: MpcParams) -> VehicleState:
    nxt = step_raw(state.as_array(), control.as_array(), params)
    return VehicleState(nxt[0], nxt[1], wrap_angle(nxt[2]), nxt[3], nxt[4])


def rollout(x0: np.ndarray, controls: np.ndarray, p: MpcParams) -> np.ndarray:
    """States x_1..x_n for controls u_0..u_{n-1}."""
    xs = np.empty((len(controls), 5))
    x = np.asarray(x0, dtype=float)
    for k, u in enumerate(controls):
        x = step_raw(x, u, p)
        xs[k] = x
    return xs


def jacobians(x: np.ndarray, u: np.ndarray, p: MpcParams) -> tuple[np.ndarray, np.ndarray]:
    _, _, th, v, psi = x
    a, dpsi = u
    d, l = p.d, p.l
    steer = psi + dpsi
    sec2 = 1.0 / math.cos(steer) ** 2
    vn = max(math.sqrt(max(v * v + 2.0 * a * d, 0.0)), p.v_floor)
    A = np.eye(5)
    B = np.zeros((5, 2))
    if p.paper_literal:
        A[0, 4] = -d * math.sin(steer)
        A[1, 4] = d * math.cos(steer)
        B[0, 1] = A[0, 4]
        B[1, 1] = A[1, 4]
    else:
        A[0, 2] = -d * math.sin(th)
        A[1, 2] = d * math.cos(th)
    A[2, 4] = d * sec2 / l
    B[2, 1] = d * sec2 / l
    A[3, 3] = v / vn
    B[3, 0] = d / vn
    B[4, 1] = 1.0
    return A, B


def linearize_dynamics(states: np.ndarray, controls: np.ndarray, x0: np.ndarray, p: MpcParams):
    """Affine maps x_{k+1} ~= A_k x_k + B_k u_k + c_k around (x_bar_k, u_bar_k).

    ``states`` holds x_1..x_n and ``x0`` the fixed initial state, so step k
    expands around x_k for k = 0..n-1. ``c_k`` makes the map exact at the anchor.
    """
    n = len(controls)
    prev = np.vstack([np.asarray(x0, dtype=float)[None, :], states[: n - 1]])
    As = np.empty((n, 5, 5))
    Bs = np.empty((n, 5, 2))
    cs = np.empty((n, 5))
    for k in range(n):
        A, B = jacobians(prev[k], controls[k], p)
        As[k], Bs[k] = A, B
        cs[k] = step_raw(prev[k], controls[k], p) - A @ prev[k] - B @ controls[k]
    return As, Bs, cs
