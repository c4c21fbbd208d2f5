"""Exact gradients of the infidelity functionals over piecewise-constant controls.

The derivative of one interval propagator ``exp(dt L)`` along ``B`` is

    dt * integral_0^1 exp((1 - s) dt L) B exp(s dt L) ds,

evaluated with the composite trapezoidal rule. Gradients are assembled with a
forward pass over states and a backward pass over costates, so the cost is
linear in the number of intervals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objectives import (
    CHANNEL_WEIGHTS,
    SPECIAL_NORMS,
    ObjectiveKind,
    evaluate,
    j_grk_sd,
    j_grk_sp,
    j_sd,
)
from .propagator import (
    ControlGrid,
    ControlVector,
    ParamVector,
    backward_products,
    matrix_exp,
    propagate_channel,
    propagate_state,
    step_generators,
)
from .qmodel import BETA, SPECIAL, GateTarget, GeneratorSet


@dataclass(frozen=True)
class GradOptions:
    segments: int = 20
    fd_step: float = 1e-5

    def __post_init__(self):
        if self.segments < 1:
            raise ValueError("segments must be >= 1")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")


def _trapezoid_weights(segments: int) -> np.ndarray:
    w = np.full(segments + 1, 1.0 / segments)
    w[0] = w[-1] = 0.5 / segments
    return w


def dexp_integral(L, B, dt: float, segments: int = 20) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    B = np.asarray(B, dtype=float)
    if segments < 1:
        raise ValueError("segments must be >= 1")
    e1 = matrix_exp(dt / segments * L)
    powers = [np.eye(L.shape[0])]
    for _ in range(segments):
        powers.append(e1 @ powers[-1])
    w = _trapezoid_weights(segments)
    out = np.zeros_like(L)
    for j in range(segments + 1):
        out += w[j] * powers[segments - j] @ B @ powers[j]
    return dt * out


def grad_channel(
    gen: GeneratorSet, grid: ControlGrid, f: ControlVector, segments: int = 20
) -> np.ndarray:
    """``out[k, mu] = d Psi_T / d f_{k, mu}``, shape (K, 3, 16, 16)."""
    traj = propagate_channel(gen, grid, f)
    back = backward_products(traj.steps)
    gens = step_generators(gen, f)
    out = np.empty((grid.K, 3) + gen.A.shape)
    for k in range(grid.K):
        for mu, b in enumerate(gen.controls):
            d = dexp_integral(gens[k], b, grid.dt, segments)
            out[k, mu] = back[k + 1] @ d @ traj.channels[k]
    return out


def _forward_and_costate(kind, gen, grid, f, gate):
    """Objective value, forward checkpoints and terminal costate.

    The derivative along interval ``k`` and direction ``B`` is
    ``sum_m lam_k[:, m] . D_k(B) x_k[:, m]``, where ``x_k`` are the forward
    checkpoints at the interval start and ``lam_k`` is the terminal costate
    pulled back to the interval end.
    """
    if kind is ObjectiveKind.SD:
        traj = propagate_channel(gen, grid, f)
        psi = traj.channels[-1]
        value = j_sd(psi, gate)
        costate = CHANNEL_WEIGHTS * (psi - gate.psi_u) / 16.0
        return value, traj.steps, traj.channels, costate
    traj = propagate_state(gen, grid, f, SPECIAL.xs.T, strict=False)
    final = traj.states[-1].T
    if kind is ObjectiveKind.GRK_SD:
        value = j_grk_sd(final, gate)
        costate = (BETA * (final - gate.target_states)).T / 3.0
    else:
        value = j_grk_sp(final, gate)
        costate = -(BETA * gate.target_states / SPECIAL_NORMS[:, None]).T / 3.0
    return value, traj.steps, traj.states, costate


def _control_gradient(gen, grid, f, steps, forward, costate, segments):
    K = grid.K
    lam = np.empty((K,) + costate.shape)
    lam[K - 1] = costate
    for k in range(K - 1, 0, -1):
        lam[k - 1] = steps[k].T @ lam[k]

    e1 = matrix_exp(grid.dt / segments * step_generators(gen, f))
    e1t = np.swapaxes(e1, 1, 2)
    a = np.empty((segments + 1, K) + costate.shape)
    b = np.empty_like(a)
    a[0] = forward[:K]
    b[segments] = lam
    for j in range(segments):
        a[j + 1] = e1 @ a[j]
        b[segments - j - 1] = e1t @ b[segments - j]
    w = _trapezoid_weights(segments)
    n = costate.shape[0]
    # q[k] = sum_j w_j b_j[k] a_j[k]^T, contracted over quadrature nodes and columns at once
    bw = (b * w[:, None, None, None]).transpose(1, 2, 0, 3).reshape(K, n, -1)
    at = a.transpose(1, 0, 3, 2).reshape(K, -1, n)
    q = (bw @ at).reshape(K, n * n)
    bs = np.stack(gen.controls).reshape(3, n * n)
    return grid.dt * (bs @ q.T)


def value_and_grad_controls(
    kind, gen: GeneratorSet, grid: ControlGrid, f: ControlVector, gate: GateTarget, segments: int = 20
):
    """Objective value and gradient w.r.t. ``f = (u, n1, n2)``, shape (3, K)."""
    kind = ObjectiveKind(kind)
    value, steps, forward, costate = _forward_and_costate(kind, gen, grid, f, gate)
    return value, _control_gradient(gen, grid, f, steps, forward, costate, segments)


def value_and_grad(
    kind, gen: GeneratorSet, grid: ControlGrid, g: ParamVector, gate: GateTarget,
    opts: GradOptions = GradOptions(),
):
    """Objective value and flat gradient w.r.t. ``g = (u, w1, w2)``."""
    value, gf = value_and_grad_controls(kind, gen, grid, g.controls(), gate, opts.segments)
    gf[1] *= 2.0 * g.w1
    gf[2] *= 2.0 * g.w2
    return value, gf.reshape(-1)


def grad_objective(kind, gen, grid, g: ParamVector, gate, opts: GradOptions = GradOptions()):
    return value_and_grad(kind, gen, grid, g, gate, opts)[1]


def central_difference(func, x, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector."""
    if not step > 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        out[i] = (func(xp) - func(xm)) / (2 * step)
    return out


def central_jacobian(func, x, step: float = 1e-5) -> np.ndarray:
    """Symmetrized central-difference Jacobian of a vector-valued gradient function."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        cols.append((np.asarray(func(xp)) - np.asarray(func(xm))) / (2 * step))
    h = np.column_stack(cols)
    return 0.5 * (h + h.T)


def fd_gradient(kind, gen, grid, g: ParamVector, gate, step: float = 1e-5) -> np.ndarray:
    kind = ObjectiveKind(kind)

    def func(flat):
        return evaluate(kind, gen, grid, ParamVector.from_flat(flat).controls(), gate)

    return central_difference(func, g.flat(), step)


def fd_hessian(kind, gen, grid, g: ParamVector, gate, step: float = 1e-5,
               opts: GradOptions = GradOptions()) -> np.ndarray:
    kind = ObjectiveKind(kind)

    def grad(flat):
        return grad_objective(kind, gen, grid, ParamVector.from_flat(flat), gate, opts)

    return central_jacobian(grad, g.flat(), step)


def relative_error(approx, exact) -> float:
    approx = np.asarray(approx)
    exact = np.asarray(exact)
    denom = np.linalg.norm(exact)
    return float(np.linalg.norm(approx - exact) / (denom if denom > 0 else 1.0))
