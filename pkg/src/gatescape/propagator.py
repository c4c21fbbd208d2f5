"""Piecewise-constant propagation of realified channels and states."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .qmodel import DIM, TRACE_ROW, GeneratorSet, derealify


@dataclass(frozen=True)
class ControlGrid:
    T: float
    K: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("final time T must be positive")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be a positive integer")
        object.__setattr__(self, "K", int(self.K))

    @property
    def dt(self) -> float:
        return self.T / self.K

    def left_endpoints(self) -> np.ndarray:
        return np.arange(self.K) * self.dt

    def right_endpoints(self) -> np.ndarray:
        return np.arange(1, self.K + 1) * self.dt

    def nodes(self) -> np.ndarray:
        return np.arange(self.K + 1) * self.dt


@dataclass(frozen=True)
class ControlVector:
    """Piecewise-constant controls ``f = (u, n1, n2)``, one value per interval."""

    u: np.ndarray
    n1: np.ndarray
    n2: np.ndarray

    def __post_init__(self):
        arrs = [np.array(a, dtype=float).reshape(-1) for a in (self.u, self.n1, self.n2)]
        if len({a.size for a in arrs}) != 1:
            raise ValueError("u, n1, n2 must have equal length")
        for name, a in zip(("u", "n1", "n2"), arrs):
            object.__setattr__(self, name, a)

    @property
    def K(self) -> int:
        return self.u.size

    def validate(self):
        if np.any(self.n1 < 0) or np.any(self.n2 < 0):
            raise ValueError("incoherent controls must be non-negative")
        if not np.all(np.isfinite(self.flat())):
            raise ValueError("controls must be finite")
        return self

    def flat(self) -> np.ndarray:
        return np.concatenate([self.u, self.n1, self.n2])

    @classmethod
    def from_flat(cls, f) -> "ControlVector":
        u, n1, n2 = np.split(np.asarray(f, dtype=float), 3)
        return cls(u, n1, n2)

    @classmethod
    def zeros(cls, K: int) -> "ControlVector":
        return cls(np.zeros(K), np.zeros(K), np.zeros(K))


@dataclass(frozen=True)
class ParamVector:
    """Unconstrained parameters ``g = (u, w1, w2)`` with ``n_l = w_l**2``."""

    u: np.ndarray
    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        arrs = [np.array(a, dtype=float).reshape(-1) for a in (self.u, self.w1, self.w2)]
        if len({a.size for a in arrs}) != 1:
            raise ValueError("u, w1, w2 must have equal length")
        for name, a in zip(("u", "w1", "w2"), arrs):
            object.__setattr__(self, name, a)

    @property
    def K(self) -> int:
        return self.u.size

    def controls(self) -> ControlVector:
        return ControlVector(self.u, self.w1**2, self.w2**2)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.u, self.w1, self.w2])

    @classmethod
    def from_flat(cls, g) -> "ParamVector":
        u, w1, w2 = np.split(np.asarray(g, dtype=float), 3)
        return cls(u, w1, w2)


def reference_guess(grid: ControlGrid) -> ParamVector:
    """Deterministic reference guess ``u = cos(0.3 t)``, ``w = exp(-5 (t/T - 1/2)^2)``.

    Sampled at the right endpoint ``t_k = k dt`` of each interval.
    """
    t = grid.right_endpoints()
    w = np.exp(-5.0 * (t / grid.T - 0.5) ** 2)
    return ParamVector(np.cos(0.3 * t), w, w.copy())


@dataclass
class Trajectory:
    """Checkpoints at the grid nodes ``t_0..t_K``.

    ``channels`` has shape (K+1, 16, 16); ``states`` has shape (K+1, 16, m)
    for ``m`` propagated columns. ``steps`` holds the per-interval
    propagators ``exp(dt L_k)``.
    """

    grid: ControlGrid
    steps: np.ndarray
    channels: np.ndarray | None = None
    states: np.ndarray | None = None

    @property
    def final(self) -> np.ndarray:
        return self.channels[-1] if self.channels is not None else self.states[-1]


def step_generator(gen: GeneratorSet, u: float, n1: float, n2: float) -> np.ndarray:
    if n1 < 0 or n2 < 0:
        raise ValueError("incoherent controls must be non-negative")
    return gen.A + u * gen.B_u + n1 * gen.B_n1 + n2 * gen.B_n2


def step_generators(gen: GeneratorSet, f: ControlVector) -> np.ndarray:
    """Stack of generators, shape (K, 16, 16)."""
    f.validate()
    return (
        gen.A[None]
        + f.u[:, None, None] * gen.B_u[None]
        + f.n1[:, None, None] * gen.B_n1[None]
        + f.n2[:, None, None] * gen.B_n2[None]
    )


def matrix_exp(m) -> np.ndarray:
    """Matrix exponential (Pade scaling-and-squaring); accepts stacks (..., n, n)."""
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix exponential of non-finite input")
    return scipy.linalg.expm(m)


def step_propagators(gen: GeneratorSet, grid: ControlGrid, f: ControlVector) -> np.ndarray:
    _check_grid(grid, f)
    return matrix_exp(grid.dt * step_generators(gen, f))


def _check_grid(grid, f):
    if f.K != grid.K:
        raise ValueError(f"controls have {f.K} intervals, grid has {grid.K}")


def propagate_channel(gen: GeneratorSet, grid: ControlGrid, f: ControlVector) -> Trajectory:
    steps = step_propagators(gen, grid, f)
    psi = np.empty((grid.K + 1, DIM, DIM))
    psi[0] = np.eye(DIM)
    for k in range(grid.K):
        psi[k + 1] = steps[k] @ psi[k]
    return Trajectory(grid, steps, channels=psi)


def check_state(x, tol: float = 1e-8, strict: bool = True):
    x = np.asarray(x, dtype=float)
    problems = []
    if abs(TRACE_ROW @ x - 1.0) > tol:
        problems.append("trace differs from 1")
    if np.linalg.eigvalsh(derealify(x)).min() < -tol:
        problems.append("negative eigenvalue")
    if problems:
        msg = "initial vector is not a density matrix: " + ", ".join(problems)
        if strict:
            raise ValueError(msg)
        warnings.warn(msg)


def propagate_state(
    gen: GeneratorSet,
    grid: ControlGrid,
    f: ControlVector,
    x0,
    *,
    strict: bool = True,
    steps: np.ndarray | None = None,
) -> Trajectory:
    """Propagate one state (shape (16,)) or several columns (shape (16, m))."""
    x0 = np.asarray(x0, dtype=float)
    cols = x0.reshape(DIM, -1)
    for j in range(cols.shape[1]):
        check_state(cols[:, j], strict=strict)
    if steps is None:
        steps = step_propagators(gen, grid, f)
    xs = np.empty((grid.K + 1,) + cols.shape)
    xs[0] = cols
    for k in range(grid.K):
        xs[k + 1] = steps[k] @ xs[k]
    return Trajectory(grid, steps, states=xs)


def backward_products(steps: np.ndarray) -> np.ndarray:
    """``out[k] = steps[K-1] @ ... @ steps[k]``, i.e. the propagator from t_k to T.

    ``out[K]`` is the identity; computed in one reverse pass.
    """
    K = steps.shape[0]
    out = np.empty((K + 1,) + steps.shape[1:])
    out[K] = np.eye(steps.shape[1])
    for k in range(K - 1, -1, -1):
        out[k] = out[k + 1] @ steps[k]
    return out


def ode_oracle(gen: GeneratorSet, grid: ControlGrid, f: ControlVector, x0, tol: float = 1e-10):
    """Integrate ``dx/dt = L(t) x`` with an adaptive Runge-Kutta scheme.

    Each interval is integrated separately so that the control jumps never fall
    inside an integration step.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    _check_grid(grid, f)
    gens = step_generators(gen, f)
    x = np.asarray(x0, dtype=float).copy()
    for k in range(grid.K):
        lk = gens[k]
        sol = solve_ivp(
            lambda t, y: lk @ y,
            (0.0, grid.dt),
            x,
            method="DOP853",
            rtol=tol,
            atol=tol,
        )
        if not sol.success:
            raise RuntimeError(f"ODE oracle failed on interval {k}: {sol.message}")
        x = sol.y[:, -1]
    return x


def read_controls_csv(path) -> ControlVector:
    """Read ``t,u,n1,n2`` rows; raises ValueError with the offending line number."""
    import csv

    us, n1s, n2s = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "u", "n1", "n2"]:
            raise ValueError(f"{path}:1: expected header 't,u,n1,n2'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            try:
                _, u, n1, n2 = (float(c) for c in row)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric entry") from None
            if n1 < 0 or n2 < 0:
                raise ValueError(f"{path}:{lineno}: incoherent control must be non-negative")
            us.append(u)
            n1s.append(n1)
            n2s.append(n2)
    if not us:
        raise ValueError(f"{path}: no control rows")
    return ControlVector(us, n1s, n2s)


def write_controls_csv(path, grid: ControlGrid, f: ControlVector):
    t = grid.left_endpoints()
    with open(path, "w") as fh:
        fh.write("t,u,n1,n2\n")
        for row in zip(t, f.u, f.n1, f.n2):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def write_trajectory_csv(path, grid: ControlGrid, states: np.ndarray):
    """``states`` has shape (K+1, 16)."""
    header = "t," + ",".join(f"x{j}" for j in range(1, DIM + 1))
    data = np.column_stack([grid.nodes(), states])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")
