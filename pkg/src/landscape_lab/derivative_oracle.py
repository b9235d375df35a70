"""Central finite-difference oracles for gradients and Hessians.

Every analytic derivative in the package is checked against these before it
is trusted. Only function values are used here, so the oracle stays
independent of the analytic code paths it validates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

ScalarField = Callable[[np.ndarray], float]


class NonFiniteProbeError(ValueError):
    """A probe evaluation returned inf or nan."""

    def __init__(self, coordinate: int | tuple[int, int], value: float):
        self.coordinate = coordinate
        self.value = value
        super().__init__(f"non-finite function value {value!r} when probing coordinate {coordinate}")


@dataclass(frozen=True)
class FdConfig:
    step_h: float = 1e-5
    scheme: str = "central"
    rel_tol: float = 1e-5

    def __post_init__(self):
        if not self.step_h > 0:
            raise ValueError(f"step_h must be positive, got {self.step_h}")
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.scheme != "central":
            raise ValueError(f"unsupported scheme {self.scheme!r}; only 'central' is available")


@dataclass(frozen=True)
class DerivativeCheckReport:
    max_rel_err_grad: float
    max_rel_err_hess: float
    worst_point_index: int
    passed: bool


def _probe(f: ScalarField, x: np.ndarray, coord) -> float:
    val = float(f(x))
    if not np.isfinite(val):
        raise NonFiniteProbeError(coord, val)
    return val


def fd_gradient(f: ScalarField, x, cfg: FdConfig = FdConfig()) -> np.ndarray:
    """Gradient by central differences, one coordinate at a time."""
    x = np.asarray(x, dtype=float)
    h = cfg.step_h
    grad = np.empty(x.size)
    xp = x.copy()
    for i in range(x.size):
        xp[i] = x[i] + h
        fp = _probe(f, xp, i)
        xp[i] = x[i] - h
        fm = _probe(f, xp, i)
        xp[i] = x[i]
        grad[i] = (fp - fm) / (2.0 * h)
    return grad


def fd_hessian(f: ScalarField, x, cfg: FdConfig = FdConfig()) -> np.ndarray:
    """Hessian by central second differences of function values.

    Off-diagonal entries use the four-point stencil
    ``[f(++) - f(+-) - f(-+) + f(--)] / 4h^2``; diagonal entries use
    ``[f(x+2h e_i) - 2 f(x) + f(x-2h e_i)] / 4h^2`` (the same stencil with
    i == j). The result is symmetrized, so it is exactly symmetric.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    h = cfg.step_h
    f0 = _probe(f, x, -1)
    H = np.empty((d, d))
    xp = x.copy()
    for i in range(d):
        xp[i] = x[i] + 2 * h
        fpp = _probe(f, xp, i)
        xp[i] = x[i] - 2 * h
        fmm = _probe(f, xp, i)
        xp[i] = x[i]
        H[i, i] = (fpp - 2.0 * f0 + fmm) / (4.0 * h * h)
        for j in range(i + 1, d):
            vals = []
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                xp[i] = x[i] + si * h
                xp[j] = x[j] + sj * h
                vals.append(_probe(f, xp, (i, j)))
            xp[i] = x[i]
            xp[j] = x[j]
            H[i, j] = H[j, i] = (vals[0] - vals[1] - vals[2] + vals[3]) / (4.0 * h * h)
    return 0.5 * (H + H.T)


def relative_error(analytic: np.ndarray, reference: np.ndarray) -> float:
    """``||analytic - reference|| / max(1, ||reference||)`` (Frobenius for matrices)."""
    analytic = np.asarray(analytic, dtype=float)
    reference = np.asarray(reference, dtype=float)
    return float(np.linalg.norm(analytic - reference) / max(1.0, np.linalg.norm(reference)))


def check_objective_derivatives(obj, points: Sequence, cfg: FdConfig = FdConfig()) -> DerivativeCheckReport:
    """Compare ``obj.gradient``/``obj.hessian`` to the FD oracles at every point."""
    points = list(points)
    if not points:
        raise ValueError("check_objective_derivatives needs at least one point")
    worst_g = worst_h = 0.0
    worst_idx = 0
    worst_score = -1.0
    for k, x in enumerate(points):
        x = np.asarray(x, dtype=float)
        eg = relative_error(obj.gradient(x), fd_gradient(obj.value, x, cfg))
        eh = relative_error(obj.hessian(x), fd_hessian(obj.value, x, cfg))
        worst_g = max(worst_g, eg)
        worst_h = max(worst_h, eh)
        if max(eg, eh) > worst_score:
            worst_score = max(eg, eh)
            worst_idx = k
    passed = worst_g <= cfg.rel_tol and worst_h <= cfg.rel_tol
    return DerivativeCheckReport(worst_g, worst_h, worst_idx, passed)
