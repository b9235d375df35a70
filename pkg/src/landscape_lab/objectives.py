"""Problem instances and their objectives with exact value/gradient/Hessian.

Four families are covered: the squared risk of a generalized linear model
with sigmoid activation, rank-one PCA, rank-one symmetric matrix completion
and the fourth-order orthogonal tensor objective. All derivatives are the
exact derivatives of the stated value functions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

_TOL = 1e-10


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# activation


def sigmoid(t):
    t = np.asarray(t, dtype=float)
    # split by sign so exp never overflows
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid_prime(t):
    s = sigmoid(t)
    return s * (1.0 - s)


def sigmoid_second(t):
    s = sigmoid(t)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


# ---------------------------------------------------------------------------
# objective interface


class Objective:
    """Smooth scalar field on R^dim with dense derivatives."""

    dim: int

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x) -> np.ndarray:
        raise NotImplementedError

    def __neg__(self) -> "Objective":
        return NegatedObjective(self)


class NegatedObjective(Objective):
    """``-f``; used to classify maximizers with minimization tooling."""

    def __init__(self, base: Objective):
        self.base = base
        self.dim = base.dim

    def value(self, x):
        return -self.base.value(x)

    def gradient(self, x):
        return -self.base.gradient(x)

    def hessian(self, x):
        return -self.base.hessian(x)


class QuadraticObjective(Objective):
    """``0.5 x^T A x - b^T x`` with symmetric ``A``."""

    def __init__(self, A, b=None):
        A = np.asarray(A, dtype=float)
        self.A = 0.5 * (A + A.T)
        self.dim = A.shape[0]
        self.b = np.zeros(self.dim) if b is None else np.asarray(b, dtype=float)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.A @ x - self.b @ x)

    def gradient(self, x):
        return self.A @ np.asarray(x, dtype=float) - self.b

    def hessian(self, x):
        return self.A.copy()

    def minimizer(self) -> np.ndarray:
        return np.linalg.solve(self.A, self.b)


class CallableObjective(Objective):
    """Wrap plain callables; handy for one-off test functions."""

    def __init__(self, dim: int, value: Callable, gradient: Callable, hessian: Callable):
        self.dim = dim
        self._v, self._g, self._h = value, gradient, hessian

    def value(self, x):
        return float(self._v(np.asarray(x, dtype=float)))

    def gradient(self, x):
        return np.asarray(self._g(np.asarray(x, dtype=float)), dtype=float)

    def hessian(self, x):
        return np.asarray(self._h(np.asarray(x, dtype=float)), dtype=float)


# ---------------------------------------------------------------------------
# instances


@dataclass(frozen=True)
class GlmInstance:
    X: np.ndarray
    y: np.ndarray
    w_star: np.ndarray
    B: float
    R: float
    gamma: float
    lambda_min_cov: float
    noise_bound: float = 0.0
    activation: str = "sigmoid"
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "X", _frozen(self.X))
        object.__setattr__(self, "y", _frozen(self.y))
        object.__setattr__(self, "w_star", _frozen(self.w_star))
        n, d = self.X.shape
        if self.y.shape != (n,) or self.w_star.shape != (d,):
            raise ValueError("GlmInstance: X is n x d, y needs length n and w_star length d")
        if self.activation != "sigmoid":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if self.B * self.R < 1:
            raise ValueError(f"B*R must be >= 1, got {self.B * self.R}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not 0.0 <= self.noise_bound <= 1.0:
            raise ValueError("noise_bound must lie in [0, 1]")
        if np.linalg.norm(self.w_star) > self.R * (1 + 1e-12):
            raise ValueError("||w_star|| exceeds R")
        if np.max(np.linalg.norm(self.X, axis=1)) > self.B * (1 + 1e-12):
            raise ValueError("some row of X has norm above B")
        resid = self.y - sigmoid(self.X @ self.w_star)
        if np.max(np.abs(resid), initial=0.0) > self.noise_bound + 1e-12:
            raise ValueError("labels deviate from sigma(w_star . x) by more than noise_bound")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def population_lambda(self) -> float:
        """Population covariance floor for the uniform-on-sphere design: B^2/d."""
        return self.B**2 / self.d


@dataclass(frozen=True)
class PcaInstance:
    M: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "M", _frozen(self.M))
        object.__setattr__(self, "eigvals", _frozen(self.eigvals))
        object.__setattr__(self, "eigvecs", _frozen(self.eigvecs))
        d = self.M.shape[0]
        if self.M.shape != (d, d) or self.eigvecs.shape != (d, d) or self.eigvals.shape != (d,):
            raise ValueError("PcaInstance: inconsistent shapes")
        if np.any(np.diff(self.eigvals) > 0) or np.any(self.eigvals < 0):
            raise ValueError("eigvals must be non-negative and descending")
        if np.max(np.abs(self.M - self.M.T)) > _TOL:
            raise ValueError("M must be symmetric")
        V = self.eigvecs
        if np.max(np.abs(V.T @ V - np.eye(d))) > _TOL:
            raise ValueError("eigvecs must be orthonormal")
        if np.max(np.abs(V @ np.diag(self.eigvals) @ V.T - self.M)) > _TOL * max(1.0, np.abs(self.M).max()):
            raise ValueError("M does not match its eigendecomposition")

    @property
    def d(self) -> int:
        return self.M.shape[0]

    @property
    def global_min_value(self) -> float:
        """``0.5 * sum_{i>=2} lambda_i^2``."""
        return float(0.5 * np.sum(self.eigvals[1:] ** 2))


@dataclass(frozen=True)
class McInstance:
    """Rank-one symmetric completion problem.

    ``omega`` holds the observed pairs with ``i <= j``, sorted; the pair
    ``(j, i)`` is implied.
    """

    z: np.ndarray
    mu: float
    p: float
    omega: np.ndarray
    epsilon: float
    seed: int | None = None
    _mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        z = _frozen(self.z)
        object.__setattr__(self, "z", z)
        om = np.asarray(self.omega, dtype=np.int64).reshape(-1, 2)
        d = z.size
        if om.size and (om.min() < 0 or om.max() >= d):
            raise ValueError("omega index out of range")
        if np.any(om[:, 0] > om[:, 1]):
            raise ValueError("omega pairs must satisfy i <= j")
        order = np.lexsort((om[:, 1], om[:, 0]))
        om = om[order]
        if len(om) > 1 and np.any(np.all(np.diff(om, axis=0) == 0, axis=1)):
            raise ValueError("omega contains duplicate pairs")
        om.setflags(write=False)
        object.__setattr__(self, "omega", om)
        if abs(np.linalg.norm(z) - 1.0) > 1e-12:
            raise ValueError("z must have unit norm")
        if np.max(np.abs(z)) > self.mu / np.sqrt(d) * (1 + 1e-12):
            raise ValueError("z violates the incoherence bound ||z||_inf <= mu/sqrt(d)")
        if not 0 < self.p <= 1:
            raise ValueError("p must lie in (0, 1]")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        mask = np.zeros((d, d), dtype=bool)
        mask[om[:, 0], om[:, 1]] = True
        mask[om[:, 1], om[:, 0]] = True
        mask.setflags(write=False)
        object.__setattr__(self, "_mask", mask)

    def __eq__(self, other):
        if not isinstance(other, McInstance):
            return NotImplemented
        return (
            np.array_equal(self.z, other.z)
            and np.array_equal(self.omega, other.omega)
            and (self.mu, self.p, self.epsilon, self.seed) == (other.mu, other.p, other.epsilon, other.seed)
        )

    __hash__ = None

    @property
    def d(self) -> int:
        return self.z.size

    @property
    def mask(self) -> np.ndarray:
        """Dense symmetric boolean observation mask."""
        return self._mask

    def project(self, A) -> np.ndarray:
        """P_Omega: zero every entry outside the observed set."""
        return np.where(self._mask, A, 0.0)

    def in_domain(self, x) -> bool:
        """Membership in the incoherent ball ``||x||_inf < 2 mu / sqrt(d)``."""
        return bool(np.max(np.abs(x)) < 2 * self.mu / np.sqrt(self.d))


@dataclass(frozen=True)
class TensorInstance:
    components: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        A = _frozen(np.atleast_2d(self.components))
        object.__setattr__(self, "components", A)
        n, d = A.shape
        if n > d:
            raise ValueError("need n_components <= d")
        if np.max(np.abs(A @ A.T - np.eye(n))) > _TOL:
            raise ValueError("tensor components must be orthonormal")

    @property
    def n(self) -> int:
        return self.components.shape[0]

    @property
    def d(self) -> int:
        return self.components.shape[1]


def _eq_arrays(self, other):
    if type(other) is not type(self):
        return NotImplemented
    for name in self.__dataclass_fields__:
        a, b = getattr(self, name), getattr(other, name)
        if isinstance(a, np.ndarray):
            if not np.array_equal(a, b):
                return False
        elif a != b:
            return False
    return True


for _cls in (GlmInstance, PcaInstance, TensorInstance):
    _cls.__eq__ = _eq_arrays
    _cls.__hash__ = None


# ---------------------------------------------------------------------------
# objectives


class GlmRisk(Objective):
    """Squared risk ``(1/2n) sum (y_i - sigmoid(w.x_i))^2`` over a fixed sample."""

    def __init__(self, X, y):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.n, self.dim = self.X.shape
        self.warning: str | None = None

    def value(self, w):
        r = sigmoid(self.X @ np.asarray(w, dtype=float)) - self.y
        return float(0.5 * np.mean(r * r))

    def gradient(self, w):
        t = self.X @ np.asarray(w, dtype=float)
        coef = (sigmoid(t) - self.y) * sigmoid_prime(t)
        return self.X.T @ coef / self.n

    def hessian(self, w):
        t = self.X @ np.asarray(w, dtype=float)
        coef = sigmoid_prime(t) ** 2 + (sigmoid(t) - self.y) * sigmoid_second(t)
        H = (self.X.T * coef) @ self.X / self.n
        return 0.5 * (H + H.T)


def glm_empirical(inst: GlmInstance) -> GlmRisk:
    return GlmRisk(inst.X, inst.y)


def glm_population_proxy(inst: GlmInstance, eval_sample_size: int = 100_000, seed: int = 0) -> GlmRisk:
    """Monte-Carlo stand-in for the population risk.

    Draws a fresh sample of ``eval_sample_size`` points from the same design
    (uniform on the sphere of radius B, uniform label noise) and returns the
    empirical risk on it. This is a frozen proxy, not the exact expectation.
    """
    from .generators import sample_glm_data

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0x504F50])))
    X, y = sample_glm_data(rng, inst.w_star, eval_sample_size, inst.B, inst.noise_bound)
    obj = GlmRisk(X, y)
    if eval_sample_size < 10 * inst.n:
        obj.warning = f"eval_sample_size={eval_sample_size} is below 10*n={10 * inst.n}; proxy may be noisy"
        warnings.warn(obj.warning, stacklevel=2)
    return obj


class PcaObjective(Objective):
    """``g(x) = 0.5 ||M - x x^T||_F^2``."""

    def __init__(self, M):
        self.M = np.asarray(M, dtype=float)
        self.dim = self.M.shape[0]

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * np.sum((self.M - np.outer(x, x)) ** 2))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * ((x @ x) * x - self.M @ x)

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        return 4.0 * np.outer(x, x) + 2.0 * (x @ x) * np.eye(self.dim) - 2.0 * self.M


def pca_objective(inst: PcaInstance) -> PcaObjective:
    return PcaObjective(inst.M)


class McObjective(Objective):
    """``f(x) = 0.5 sum_{(i,j) in Omega} (z_i z_j - x_i x_j)^2`` over ordered pairs."""

    def __init__(self, inst: McInstance):
        self.inst = inst
        self.dim = inst.d
        self._W = inst.mask.astype(float)
        self._zz = np.outer(inst.z, inst.z)
        self._i, self._j = inst.omega[:, 0], inst.omega[:, 1]
        # off-diagonal pairs appear twice in the ordered sum
        self._mult = np.where(self._i == self._j, 0.5, 1.0)
        self._zij = inst.z[self._i] * inst.z[self._j]

    def _residual(self, x):
        # P_Omega(x x^T - z z^T)
        return self._W * (np.outer(x, x) - self._zz)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        r = x[self._i] * x[self._j] - self._zij
        return float(self._mult @ (r * r))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * self._residual(x) @ x

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        W = self._W
        H = 2.0 * np.diag(W @ (x * x)) + 2.0 * W * np.outer(x, x) + 2.0 * self._residual(x)
        return 0.5 * (H + H.T)


def mc_objective(inst: McInstance) -> McObjective:
    return McObjective(inst)


class TensorObjective(Objective):
    """Ambient ``sum_i <a_i, x>^4``; the d^4 tensor is never formed."""

    def __init__(self, components):
        self.A = np.asarray(components, dtype=float)
        self.dim = self.A.shape[1]

    def value(self, x):
        c = self.A @ np.asarray(x, dtype=float)
        return float(np.sum(c**4))

    def gradient(self, x):
        c = self.A @ np.asarray(x, dtype=float)
        return 4.0 * self.A.T @ c**3

    def hessian(self, x):
        c = self.A @ np.asarray(x, dtype=float)
        H = 12.0 * (self.A.T * c**2) @ self.A
        return 0.5 * (H + H.T)


def tensor_ambient(inst: TensorInstance) -> TensorObjective:
    return TensorObjective(inst.components)
