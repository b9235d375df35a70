"""Riemannian calculus on the unit sphere S^{d-1}.

Points are plain unit-norm arrays; ``SpherePoint`` and ``TangentVector``
exist for callers that want the invariants checked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNIT_TOL = 1e-10


@dataclass(frozen=True)
class SpherePoint:
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float)
        if abs(np.linalg.norm(c) - 1.0) > UNIT_TOL:
            raise ValueError(f"not on the unit sphere: norm = {np.linalg.norm(c)}")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)


@dataclass(frozen=True)
class TangentVector:
    at: SpherePoint
    vec: np.ndarray

    def __post_init__(self):
        v = np.array(self.vec, dtype=float)
        if abs(self.at.coords @ v) > UNIT_TOL * max(1.0, np.linalg.norm(v)):
            raise ValueError("vector is not tangent at the base point")
        v.setflags(write=False)
        object.__setattr__(self, "vec", v)


def _coords(x) -> np.ndarray:
    return x.coords if isinstance(x, SpherePoint) else np.asarray(x, dtype=float)


def tangent_projector(x) -> np.ndarray:
    """``P_x = I - x x^T``."""
    x = _coords(x)
    return np.eye(x.size) - np.outer(x, x)


def project_tangent(x, v) -> np.ndarray:
    x = _coords(x)
    v = np.asarray(v, dtype=float)
    return v - (x @ v) * x


def riemannian_grad(obj, x) -> np.ndarray:
    x = _coords(x)
    return project_tangent(x, obj.gradient(x))


def riemannian_hess(obj, x) -> np.ndarray:
    """``P_x H P_x - <x, grad> P_x`` for the ambient Hessian H and gradient."""
    x = _coords(x)
    P = tangent_projector(x)
    H = P @ obj.hessian(x) @ P - (x @ obj.gradient(x)) * P
    return 0.5 * (H + H.T)


def retract(x, step) -> np.ndarray:
    """Metric projection ``(x + step) / ||x + step||``."""
    y = _coords(x) + np.asarray(step, dtype=float)
    nrm = np.linalg.norm(y)
    if nrm == 0.0:
        raise ValueError("retraction undefined: x + step is the zero vector")
    return y / nrm


@dataclass(frozen=True)
class TangentSpectrum:
    lambda_min: float
    lambda_max: float
    dir_min: np.ndarray
    dir_max: np.ndarray

    def __iter__(self):
        # unpacks as (lambda_min, lambda_max, directions)
        return iter((self.lambda_min, self.lambda_max, (self.dir_min, self.dir_max)))


def tangent_extreme_eigs(H, x, tol: float = 1e-6) -> TangentSpectrum:
    """Extreme eigenvalues of ``H`` restricted to the tangent space at ``x``.

    The normal direction is pushed out of the way with a shift
    ``H +/- c x x^T`` where ``c`` exceeds the spectral radius of ``H``.
    """
    H = np.asarray(H, dtype=float)
    x = _coords(x)
    if np.linalg.norm(H @ x) > tol:
        raise ValueError(f"H is not a tangent operator: ||H x|| = {np.linalg.norm(H @ x):.3e}")
    c = 2.0 * np.linalg.norm(H, 2) + 1.0
    xx = np.outer(x, x)
    w_up, v_up = np.linalg.eigh(H + c * xx)
    w_dn, v_dn = np.linalg.eigh(H - c * xx)
    # top of w_up and bottom of w_dn belong to x; the next ones are tangent extremes
    dmax = project_tangent(x, v_up[:, -2])
    dmin = project_tangent(x, v_dn[:, 1])
    return TangentSpectrum(
        lambda_min=float(w_dn[1]),
        lambda_max=float(w_up[-2]),
        dir_min=dmin / np.linalg.norm(dmin),
        dir_max=dmax / np.linalg.norm(dmax),
    )
