"""inGRAPE gradient descent and generalized simulated annealing."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .gradients import GradOptions, value_and_grad, value_and_grad_controls
from .objectives import ObjectiveKind, evaluate
from .propagator import ControlGrid, ControlVector, ParamVector
from .qmodel import GateTarget, GeneratorSet


@dataclass(frozen=True)
class GrapeParams:
    h0: float = 1.0
    a: float = 1.1
    beta_step: float = 0.5
    eps_acc: float = 2.5e-3
    max_iter: int = 5000
    max_backtracks: int = 60
    segments: int = 20
    grad_scale: str = "per_time"

    def __post_init__(self):
        if self.grad_scale not in ("per_time", "partial"):
            raise ValueError("grad_scale must be 'per_time' or 'partial'")
        if self.a < 1:
            raise ValueError("step growth factor a must be >= 1")
        if not 0 < self.beta_step < 1:
            raise ValueError("beta_step must lie in (0, 1)")
        if not self.eps_acc > 0:
            raise ValueError("eps_acc must be positive")
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")


@dataclass(frozen=True)
class AnnealParams:
    initial_temp: float = 2e4
    maxiter: int = 2000
    maxfun: int = 30000
    visit: float = 2.62
    accept: float = -5.0
    restart_temp_ratio: float = 2e-5
    u_max: float = 30.0
    n_max: float = 10.0
    seed: int | None = 0
    local_search: bool = True
    local_iter: int = 1000
    local_eps: float = 2.5e-3
    segments: int = 20

    def __post_init__(self):
        if not self.initial_temp > 0:
            raise ValueError("initial_temp must be positive")
        if not (self.u_max > 0 and self.n_max > 0):
            raise ValueError("bounds must be positive")
        if self.maxfun < 1:
            raise ValueError("maxfun must be >= 1")
        if not 1 < self.visit <= 3:
            raise ValueError("visiting parameter must lie in (1, 3]")


@dataclass
class RunRecord:
    method: str
    config: dict
    seed: int | None
    iterations: int
    history: list
    final_value: float
    grad_norm: float
    controls: dict
    termination: str
    wall_time: float = 0.0
    params: dict | None = None
    extra: dict = field(default_factory=dict)

    def control_vector(self) -> ControlVector:
        return ControlVector(self.controls["u"], self.controls["n1"], self.controls["n2"])

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**d)

    def save(self, path, deterministic: bool = False):
        d = self.to_dict()
        if deterministic:
            d["wall_time"] = 0.0
        with open(path, "w") as fh:
            json.dump(d, fh, indent=1)


def _controls_dict(f: ControlVector) -> dict:
    return {"u": f.u.tolist(), "n1": f.n1.tolist(), "n2": f.n2.tolist()}


def ingrape_run(
    kind,
    gen: GeneratorSet,
    grid: ControlGrid,
    g0: ParamVector,
    gate: GateTarget,
    params: GrapeParams = GrapeParams(),
    config: dict | None = None,
    seed: int | None = None,
) -> RunRecord:
    """Adaptive-step gradient descent in ``g = (u, w1, w2)``.

    A step is accepted only on strict decrease; then the step length grows by
    ``a``. Otherwise it is shrunk by ``beta_step`` and retried.

    With ``grad_scale="per_time"`` the descent direction and the stopping test
    use the gradient per unit time, ``dF/dg_k / dt``; ``"partial"`` uses the
    plain partial derivatives.
    """
    kind = ObjectiveKind(kind)
    opts = GradOptions(segments=params.segments)
    start = time.perf_counter()
    g = g0.flat().copy()
    if not np.all(np.isfinite(g)):
        raise ValueError("initial parameters must be finite")

    scale = grid.dt if params.grad_scale == "per_time" else 1.0

    def vg(flat):
        v, gr = value_and_grad(kind, gen, grid, ParamVector.from_flat(flat), gate, opts)
        return v, gr / scale

    def value(flat):
        return evaluate(kind, gen, grid, ParamVector.from_flat(flat).controls(), gate)

    fval, grad = vg(g)
    history = [fval]
    h = params.h0
    it = 0
    reason = "converged"
    while True:
        gnorm = float(np.linalg.norm(grad))
        if not (np.isfinite(fval) and np.isfinite(gnorm)):
            reason = "non-finite objective or gradient"
            break
        if gnorm < params.eps_acc:
            reason = "converged"
            break
        if it >= params.max_iter:
            reason = "max_iter"
            break
        for _ in range(params.max_backtracks + 1):
            trial = g - h * grad
            ftrial = value(trial)
            if ftrial < fval:
                break
            h *= params.beta_step
        else:
            reason = "max_backtracks"
            break
        g = trial
        fval, grad = vg(g)
        history.append(fval)
        h *= params.a
        it += 1

    p = ParamVector.from_flat(g)
    return RunRecord(
        method="ingrape",
        config=config or {},
        seed=seed,
        iterations=it,
        history=history,
        final_value=float(fval),
        grad_norm=float(np.linalg.norm(grad)),
        controls=_controls_dict(p.controls()),
        termination=reason,
        wall_time=time.perf_counter() - start,
        params=asdict(params),
        extra={"g": p.flat().tolist(), "partial_grad_norm": float(np.linalg.norm(grad) * scale)},
    )


# --- generalized simulated annealing -----------------------------------------


class _Budget(Exception):
    pass


class _Counter:
    def __init__(self, func, maxfun):
        self.func = func
        self.maxfun = maxfun
        self.nfev = 0
        self.best_x = None
        self.best_f = math.inf

    def __call__(self, x):
        if self.nfev >= self.maxfun:
            raise _Budget
        self.nfev += 1
        fx = self.func(x)
        if not np.isfinite(fx):
            return math.inf
        if fx < self.best_f:
            self.best_f = fx
            self.best_x = x.copy()
        return fx


class _Visitor:
    """Tsallis-Stariolo visiting distribution, drawn as in the generalized annealing algorithm."""

    TAIL_LIMIT = 1e8
    MIN_VISIT_BOUND = 1e-10

    def __init__(self, lower, upper, qv, rng):
        self.lower = lower
        self.upper = upper
        self.width = upper - lower
        self.qv = qv
        self.rng = rng
        self._factor2 = np.exp((4.0 - qv) * np.log(qv - 1.0))
        self._factor3 = np.exp((2.0 - qv) * np.log(2.0) / (qv - 1.0))
        self._factor4p = np.sqrt(np.pi) * self._factor2 / (self._factor3 * (3.0 - qv))
        self._factor5 = 1.0 / (qv - 1.0) - 0.5
        self._d1 = 2.0 - self._factor5
        self._factor6 = np.pi * (1.0 - self._factor5) / np.sin(np.pi * (1.0 - self._factor5)) / np.exp(
            math.lgamma(self._d1)
        )

    def _distribution(self, temperature, size):
        qv = self.qv
        factor1 = np.exp(np.log(temperature) / (qv - 1.0))
        factor4 = self._factor4p * factor1
        x = self.rng.normal(size=size)
        x *= np.exp(-(qv - 1.0) * np.log(self._factor6 / factor4) / (3.0 - qv))
        den = np.exp((qv - 1.0) * np.log(np.abs(self.rng.normal(size=size))) / (3.0 - qv))
        return x / den

    def visit(self, x, step, temperature):
        dim = x.size
        if step < dim:
            v = self._distribution(temperature, dim)
            v = np.clip(v, -self.TAIL_LIMIT, self.TAIL_LIMIT)
            xn = x + v
        else:
            xn = x.copy()
            v = self._distribution(temperature, 1)[0]
            v = float(np.clip(v, -self.TAIL_LIMIT, self.TAIL_LIMIT))
            i = step - dim
            xn[i] = x[i] + v
        # wrap into the box, as the reference algorithm does
        a = xn - self.lower
        b = np.fmod(a, self.width) + self.width
        xn = np.fmod(b, self.width) + self.lower
        tiny = np.abs(xn - self.lower) < self.MIN_VISIT_BOUND
        xn[tiny] += 1e-10
        return xn


def projected_descent(value_grad, x0, lower, upper, fx0=None, max_iter=50, h0=1.0, a=1.1,
                      beta_step=0.5, eps_acc=2.5e-3, max_backtracks=30):
    """Bounded adaptive-step descent with the gradient projected at active bounds."""
    x = np.clip(x0, lower, upper)
    fx, grad = value_grad(x)
    h = h0
    for _ in range(max_iter):
        pg = grad.copy()
        pg[(x <= lower) & (pg > 0)] = 0.0
        pg[(x >= upper) & (pg < 0)] = 0.0
        if np.linalg.norm(pg) < eps_acc:
            break
        for _ in range(max_backtracks):
            trial = np.clip(x - h * pg, lower, upper)
            ft, gt = value_grad(trial)
            if ft < fx:
                break
            h *= beta_step
        else:
            break
        x, fx, grad = trial, ft, gt
        h *= a
    return x, fx


def anneal_run(
    kind,
    gen: GeneratorSet,
    grid: ControlGrid,
    f0: ControlVector | None,
    gate: GateTarget,
    params: AnnealParams = AnnealParams(),
    config: dict | None = None,
) -> RunRecord:
    """Generalized simulated annealing over ``[-u_max, u_max]^K x [0, n_max]^2K``.

    Visiting steps follow the Tsallis distribution, acceptance is the
    generalized Metropolis rule, and the best point found is periodically
    polished by bounded gradient descent. Every function evaluation, including
    those inside the local polish, counts against ``maxfun``.
    """
    kind = ObjectiveKind(kind)
    start = time.perf_counter()
    rng = np.random.default_rng(params.seed)
    K = grid.K
    lower = np.concatenate([np.full(K, -params.u_max), np.zeros(2 * K)])
    upper = np.concatenate([np.full(K, params.u_max), np.full(2 * K, params.n_max)])
    dim = 3 * K

    def func(flat):
        return evaluate(kind, gen, grid, ControlVector.from_flat(flat), gate)

    counter = _Counter(func, params.maxfun)

    def value_grad(flat):
        fx = counter(flat)
        if not np.isfinite(fx):
            return math.inf, np.zeros_like(flat)
        _, gf = value_and_grad_controls(
            kind, gen, grid, ControlVector.from_flat(flat), gate, params.segments
        )
        return fx, gf.reshape(-1)

    if f0 is None:
        x0 = lower + rng.uniform(size=dim) * (upper - lower)
    else:
        x0 = np.clip(f0.flat(), lower, upper)

    visitor = _Visitor(lower, upper, params.visit, rng)
    qv = params.visit
    qa = params.accept
    t1 = np.exp((qv - 1) * np.log(2.0)) - 1.0
    history = []
    reason = "maxiter"
    try:
        x_cur = x0.copy()
        f_cur = counter(x_cur)
        history.append(counter.best_f)
        x_best, f_best = x_cur.copy(), f_cur
        not_improved, not_improved_max = 0, 1000
        i = 0
        while i < params.maxiter:
            s = float(i + 2)
            t2 = np.exp((qv - 1) * np.log(s)) - 1.0
            temperature = params.initial_temp * t1 / t2
            if temperature < params.initial_temp * params.restart_temp_ratio:
                # reannealing restart from a fresh random point
                x_cur = lower + rng.uniform(size=dim) * (upper - lower)
                f_cur = counter(x_cur)
                i = 0
                continue
            t_accept = temperature / float(i + 1)
            improved = i == 0
            not_improved += 1
            for j in range(2 * dim):
                x_new = visitor.visit(x_cur, j, temperature)
                f_new = counter(x_new)
                if f_new < f_cur:
                    x_cur, f_cur = x_new, f_new
                    if f_new < f_best:
                        x_best, f_best = x_new.copy(), f_new
                        improved = True
                        not_improved = 0
                else:
                    pqv_temp = 1.0 - (1.0 - qa) * (f_new - f_cur) / t_accept
                    pqv = 0.0 if pqv_temp <= 0 else np.exp(np.log(pqv_temp) / (1.0 - qa))
                    if rng.uniform() <= pqv:
                        x_cur, f_cur = x_new, f_new
            if params.local_search and (improved or not_improved >= not_improved_max):
                if not improved:
                    not_improved, not_improved_max = 0, dim
                xl, fl = projected_descent(value_grad, x_best, lower, upper,
                                           max_iter=params.local_iter, eps_acc=params.local_eps)
                if fl < f_best:
                    x_best, f_best = xl, fl
                    x_cur, f_cur = xl.copy(), fl
                    not_improved = 0
            history.append(counter.best_f)
            i += 1
    except _Budget:
        reason = "maxfun"

    x_final = counter.best_x if counter.best_x is not None else x0
    f_final = counter.best_f if np.isfinite(counter.best_f) else math.inf
    fv = ControlVector.from_flat(x_final)
    return RunRecord(
        method="anneal",
        config=config or {},
        seed=params.seed,
        iterations=len(history) - 1,
        history=history,
        final_value=float(f_final),
        grad_norm=float("nan"),
        controls=_controls_dict(fv),
        termination=reason,
        wall_time=time.perf_counter() - start,
        params=asdict(params),
        extra={"nfev": counter.nfev},
    )
