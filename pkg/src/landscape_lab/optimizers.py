"""Fixed-step first-order methods and trace analysis."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .sphere import retract, riemannian_grad

GRAD_TOL = "GradTol"
MAX_ITERS = "MaxIters"


class DivergenceError(ArithmeticError):
    def __init__(self, iteration: int, value: float):
        self.iteration = iteration
        self.value = value
        super().__init__(f"non-finite objective value {value!r} at iteration {iteration}; step size too large?")


@dataclass(frozen=True)
class GdConfig:
    step_size: float
    max_iters: int = 100_000
    grad_tol: float = 1e-8

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")


@dataclass(frozen=True)
class PerturbedGdConfig:
    """Perturbed GD settings.

    ``None`` fields resolve from ``base``: cooldown ``ceil(2/step)``,
    threshold ``10*grad_tol``, escape decrease ``perturb_radius**2``.
    """

    base: GdConfig
    perturb_radius: float = 1e-3
    perturb_grad_threshold: float | None = None
    perturb_cooldown_iters: int | None = None
    escape_decrease: float | None = None

    def __post_init__(self):
        if self.perturb_grad_threshold is None:
            object.__setattr__(self, "perturb_grad_threshold", 10.0 * self.base.grad_tol)
        if self.perturb_cooldown_iters is None:
            object.__setattr__(self, "perturb_cooldown_iters", int(np.ceil(2.0 / self.base.step_size)))
        if self.escape_decrease is None:
            object.__setattr__(self, "escape_decrease", self.perturb_radius**2)
        if not self.perturb_radius > 0:
            raise ValueError("perturb_radius must be positive")
        if not self.perturb_grad_threshold > 0:
            raise ValueError("perturb_grad_threshold must be positive")
        if self.perturb_cooldown_iters < 1:
            raise ValueError("perturb_cooldown_iters must be >= 1")
        if self.escape_decrease < 0:
            raise ValueError("escape_decrease must be non-negative")


@dataclass
class OptimizerTrace:
    points: list = field(default_factory=list)
    point_iters: list = field(default_factory=list)
    values: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    termination: str = MAX_ITERS
    perturbation_events: list = field(default_factory=list)

    @property
    def x(self) -> np.ndarray:
        """Final iterate."""
        return self.points[-1]

    @property
    def n_iters(self) -> int:
        return len(self.values) - 1

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "value", "grad_norm", "perturbed_flag"])
        events = set(self.perturbation_events)
        for k, (v, g) in enumerate(zip(self.values, self.grad_norms)):
            w.writerow([k, repr(float(v)), repr(float(g)), int(k in events)])
        return buf.getvalue()


class _Recorder:
    def __init__(self, d: int):
        self.trace = OptimizerTrace()
        self.stride = 1 if d <= 50 else 10

    def record(self, k: int, x, value: float, gnorm: float):
        if not np.isfinite(value):
            raise DivergenceError(k, value)
        t = self.trace
        t.values.append(float(value))
        t.grad_norms.append(float(gnorm))
        if k % self.stride == 0:
            t.points.append(np.array(x, dtype=float))
            t.point_iters.append(k)

    def finish(self, k: int, x, termination: str) -> OptimizerTrace:
        t = self.trace
        if not t.point_iters or t.point_iters[-1] != k:
            t.points.append(np.array(x, dtype=float))
            t.point_iters.append(k)
        t.termination = termination
        return t


def gradient_descent(obj, x0, cfg: GdConfig) -> OptimizerTrace:
    x = np.array(x0, dtype=float)
    rec = _Recorder(x.size)
    for k in range(cfg.max_iters + 1):
        g = obj.gradient(x)
        gn = float(np.linalg.norm(g))
        rec.record(k, x, obj.value(x), gn)
        if gn <= cfg.grad_tol:
            return rec.finish(k, x, GRAD_TOL)
        if k == cfg.max_iters:
            break
        x = x - cfg.step_size * g
    return rec.finish(k, x, MAX_ITERS)


def uniform_ball(rng: np.random.Generator, d: int, radius: float) -> np.ndarray:
    g = rng.standard_normal(d)
    return radius * rng.random() ** (1.0 / d) * g / np.linalg.norm(g)


def perturbed_gradient_descent(obj, x0, cfg: PerturbedGdConfig, seed=0) -> OptimizerTrace:
    """Gradient descent with uniform-ball kicks at small-gradient points.

    When the gradient falls below ``perturb_grad_threshold`` and the last kick
    is at least ``perturb_cooldown_iters`` old, the method compares the value
    with the one recorded at that kick. A drop of at least
    ``escape_decrease`` means the kick escaped a saddle and another kick is
    issued; otherwise the point is declared approximately second-order and
    plain descent finishes it off down to ``grad_tol``.
    """
    base = cfg.base
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = np.array(x0, dtype=float)
    d = x.size
    rec = _Recorder(d)
    last_kick = None
    f_at_kick = np.inf
    settled = False
    for k in range(base.max_iters + 1):
        g = obj.gradient(x)
        gn = float(np.linalg.norm(g))
        fx = obj.value(x)
        rec.record(k, x, fx, gn)
        if settled and gn <= base.grad_tol:
            return rec.finish(k, x, GRAD_TOL)
        if k == base.max_iters:
            break
        cooled = last_kick is None or k - last_kick >= cfg.perturb_cooldown_iters
        if not settled and gn <= cfg.perturb_grad_threshold and cooled:
            if last_kick is not None and fx > f_at_kick - cfg.escape_decrease:
                settled = True
                if gn <= base.grad_tol:
                    return rec.finish(k, x, GRAD_TOL)
            else:
                f_at_kick = fx
                last_kick = k
                rec.trace.perturbation_events.append(k)
                x = x + uniform_ball(rng, d, cfg.perturb_radius)
                continue
        x = x - base.step_size * g
    return rec.finish(k, x, MAX_ITERS)


def riemannian_ascent(obj, x0, cfg: GdConfig) -> OptimizerTrace:
    """Gradient ascent on the unit sphere with normalization retraction."""
    x = np.array(getattr(x0, "coords", x0), dtype=float)
    if abs(np.linalg.norm(x) - 1.0) > 1e-10:
        raise ValueError("riemannian_ascent needs a unit-norm starting point")
    rec = _Recorder(x.size)
    for k in range(cfg.max_iters + 1):
        g = riemannian_grad(obj, x)
        gn = float(np.linalg.norm(g))
        rec.record(k, x, obj.value(x), gn)
        if gn <= cfg.grad_tol:
            return rec.finish(k, x, GRAD_TOL)
        if k == cfg.max_iters:
            break
        x = retract(x, cfg.step_size * g)
    return rec.finish(k, x, MAX_ITERS)


@dataclass(frozen=True)
class DecayFit:
    is_geometric: bool
    rate: float
    r_squared: float

    def __iter__(self):
        return iter((self.is_geometric, self.rate, self.r_squared))


def usable_errors(values, f_star: float, floor: float = 1e-13) -> np.ndarray:
    """Leading run of ``f_k - f_star`` that stays above ``floor * max(1, e_0)``."""
    err = np.asarray(values, dtype=float) - f_star
    if err.size == 0:
        return err
    cutoff = floor * max(1.0, err[0])
    below = np.nonzero(err <= cutoff)[0]
    return err[: below[0]] if below.size else err


def geometric_decay_check(trace: OptimizerTrace, f_star: float, min_r_squared: float = 0.99) -> DecayFit:
    """Least-squares fit of ``log(f_k - f_star)`` against ``k``.

    ``rate`` is the fitted per-iteration contraction factor ``exp(slope)``.
    """
    err = usable_errors(trace.values, f_star)
    if err.size < 10:
        raise ValueError(f"only {err.size} usable iterations; need at least 10 for a decay fit")
    k = np.arange(err.size, dtype=float)
    y = np.log(err)
    slope, intercept = np.polyfit(k, y, 1)
    resid = y - (slope * k + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    return DecayFit(bool(slope < 0 and r2 >= min_r_squared), float(np.exp(slope)), r2)
