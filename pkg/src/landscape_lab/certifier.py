"""Landscape verification: point classification, condition probes, oracles."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .objectives import GlmInstance, McInstance, PcaInstance, mc_objective
from .sphere import riemannian_grad, riemannian_hess, tangent_extreme_eigs

LARGE_GRADIENT = "LargeGradient"
STRICT_SADDLE = "StrictSaddle"
CANDIDATE_LOCAL_MIN = "CandidateLocalMin"
VERDICTS = (LARGE_GRADIENT, STRICT_SADDLE, CANDIDATE_LOCAL_MIN)

WEAK_QUASI_CONVEX = "WeakQuasiConvex"
RSI = "RSI"
PL = "PL"
CONDITIONS = (WEAK_QUASI_CONVEX, RSI, PL)


@dataclass(frozen=True)
class ClassifierThresholds:
    alpha: float = 1e-6
    beta: float = 1e-6
    hess_psd_tol: float = 1e-9

    def __post_init__(self):
        for name in ("alpha", "beta", "hess_psd_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class PointClassification:
    grad_norm: float
    hess_min_eig: float
    verdict: str
    dist_to_known_min: float | None = None


def verdict_for(grad_norm: float, hess_min_eig: float, thr: ClassifierThresholds) -> str:
    if grad_norm >= thr.alpha:
        return LARGE_GRADIENT
    if hess_min_eig <= -thr.beta:
        return STRICT_SADDLE
    return CANDIDATE_LOCAL_MIN


def classify_point(obj, x, thr: ClassifierThresholds = ClassifierThresholds(),
                   known_minima: Sequence | Callable | None = None, manifold: bool = False) -> PointClassification:
    """Apply the gradient / negative-curvature / near-minimum trichotomy at ``x``.

    With ``manifold=True`` the Riemannian gradient and the tangent-restricted
    Hessian on the unit sphere are used. Maximization problems are classified
    by passing ``-obj``. ``known_minima`` is either a list of points or a
    callable returning the distance to the minimizer set.
    """
    x = np.asarray(x, dtype=float)
    if manifold:
        gn = float(np.linalg.norm(riemannian_grad(obj, x)))
        lam = tangent_extreme_eigs(riemannian_hess(obj, x), x).lambda_min
    else:
        gn = float(np.linalg.norm(obj.gradient(x)))
        lam = float(np.linalg.eigvalsh(obj.hessian(x))[0])
    dist = None
    if callable(known_minima):
        dist = float(known_minima(x))
    elif known_minima is not None and len(known_minima):
        dist = float(min(np.linalg.norm(x - np.asarray(m)) for m in known_minima))
    return PointClassification(gn, lam, verdict_for(gn, lam, thr), dist)


# ---------------------------------------------------------------------------
# condition probes


@dataclass(frozen=True)
class ConditionProbeReport:
    condition: str
    parameter: float
    n_samples: int
    n_violations: int
    worst_margin: float
    worst_point: np.ndarray | None = None


def condition_margin(obj, x, x_star, condition: str, parameter: float, f_star: float | None = None) -> float:
    """LHS - RHS of the chosen inequality at ``x``; negative means violated."""
    x = np.asarray(x, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    if f_star is None:
        f_star = obj.value(x_star)
    g = obj.gradient(x)
    if condition == WEAK_QUASI_CONVEX:
        return float(g @ (x - x_star) - parameter * (obj.value(x) - f_star))
    if condition == RSI:
        diff = x - x_star
        return float(g @ diff - parameter * (diff @ diff))
    if condition == PL:
        return float(g @ g - parameter * (obj.value(x) - f_star))
    raise ValueError(f"unknown condition {condition!r}; expected one of {CONDITIONS}")


def ball_sampler(d: int, radius: float, center=None) -> Callable[[np.random.Generator], np.ndarray]:
    """Uniform sampler on the closed ball of ``radius`` around ``center``."""
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)

    def draw(rng: np.random.Generator) -> np.ndarray:
        g = rng.standard_normal(d)
        return c + radius * rng.random() ** (1.0 / d) * g / np.linalg.norm(g)

    return draw


def probe_condition(obj, x_star, condition: str, parameter: float, sampler, n_samples: int,
                    seed=0, slack: float = 0.0) -> ConditionProbeReport:
    """Check an inequality at ``n_samples`` sampled points.

    A sample is a violation when its margin is below ``-slack``.
    """
    if condition not in CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}; expected one of {CONDITIONS}")
    rng = np.random.default_rng(seed)
    f_star = obj.value(np.asarray(x_star, dtype=float))
    worst = np.inf
    worst_pt = None
    violations = 0
    for _ in range(n_samples):
        x = sampler(rng)
        m = condition_margin(obj, x, x_star, condition, parameter, f_star)
        if m < -slack:
            violations += 1
        if m < worst:
            worst, worst_pt = m, x
    return ConditionProbeReport(condition, float(parameter), n_samples, violations, float(worst), worst_pt)


# ---------------------------------------------------------------------------
# PCA


@dataclass(frozen=True)
class StationaryPoint:
    point: np.ndarray
    eigenvalue: float
    degenerate: bool = False


def pca_stationary_oracle(inst: PcaInstance, degeneracy_tol: float = 1e-9) -> list[StationaryPoint]:
    """The origin and ``+/- sqrt(lambda_i) v_i`` for every positive eigenvalue.

    Points whose eigenvalue is repeated are flagged ``degenerate``: they are
    basis representatives of a whole sphere of stationary points.
    """
    lam = inst.eigvals
    out = [StationaryPoint(np.zeros(inst.d), 0.0)]
    for i, li in enumerate(lam):
        if li <= 0:
            continue
        degen = bool(np.sum(np.abs(lam - li) <= degeneracy_tol) > 1)
        v = math.sqrt(li) * inst.eigvecs[:, i]
        out.append(StationaryPoint(v, float(li), degen))
        out.append(StationaryPoint(-v, float(li), degen))
    return out


def pca_global_min_distance(inst: PcaInstance, x, degeneracy_tol: float = 1e-9) -> float:
    """Distance from ``x`` to the set of global minimizers of the PCA objective.

    The minimizers form the sphere of radius ``sqrt(lambda_1)`` inside the
    top eigenspace; for a simple top eigenvalue this is just ``{+v1, -v1}``
    scaled.
    """
    x = np.asarray(x, dtype=float)
    lam1 = inst.eigvals[0]
    U = inst.eigvecs[:, inst.eigvals >= lam1 - degeneracy_tol]
    c = U.T @ x
    perp = x - U @ c
    cn = np.linalg.norm(c)
    r = math.sqrt(lam1)
    if cn == 0:
        return float(math.sqrt(perp @ perp + r * r))
    return float(math.sqrt(perp @ perp + (cn - r) ** 2))


# ---------------------------------------------------------------------------
# tensor

ENUMERATION_CAP = 1_000_000


def tensor_pattern_count(n: int, max_support: int) -> int:
    return sum(math.comb(n, s) * 2**s for s in range(1, max_support + 1))


def tensor_stationary_oracle(n: int, max_support: int | None = None) -> list[np.ndarray]:
    """All sign-and-support patterns with entries ``+/- 1/sqrt(s)`` on ``s`` coordinates.

    Expressed in the basis of the components (``a_i = e_i``), ordered by
    support size, then support set, then sign pattern.
    """
    if max_support is None:
        max_support = n
    if not 1 <= max_support <= n:
        raise ValueError("need 1 <= max_support <= n")
    count = tensor_pattern_count(n, max_support)
    if count > ENUMERATION_CAP:
        raise ValueError(f"enumeration of {count} points exceeds the cap of {ENUMERATION_CAP}")
    pts = []
    for s in range(1, max_support + 1):
        tau = 1.0 / math.sqrt(s)
        for support in itertools.combinations(range(n), s):
            idx = list(support)
            for signs in itertools.product((1.0, -1.0), repeat=s):
                x = np.zeros(n)
                x[idx] = tau * np.asarray(signs)
                pts.append(x)
    return pts


def saddle_test_direction(x) -> np.ndarray:
    """Unit tangent direction mixing the first two support coordinates.

    For a pattern point with support ``s >= 2`` the tensor Hessian's quadratic
    form along this direction equals ``8/s``.
    """
    x = np.asarray(x, dtype=float)
    i, j = np.flatnonzero(x)[:2]
    v = np.zeros(x.size)
    v[i] = 1.0
    v[j] = -np.sign(x[i]) * np.sign(x[j])
    return v / math.sqrt(2.0)


# ---------------------------------------------------------------------------
# matrix completion


@dataclass(frozen=True)
class ConcentrationResult:
    max_abs_deviation: float
    quantile_99: float
    z_deviation: float
    p: float
    n_trials: int

    def __iter__(self):
        return iter((self.max_abs_deviation, self.quantile_99))


def incoherent_test_vector(rng: np.random.Generator, d: int, mu: float) -> np.ndarray:
    """Random signs / sqrt(d), clipped to ``2 mu / sqrt(d)`` and renormalized to unit norm."""
    u = rng.choice([-1.0, 1.0], size=d) / math.sqrt(d)
    u = np.clip(u, -2 * mu / math.sqrt(d), 2 * mu / math.sqrt(d))
    return u / np.linalg.norm(u)


def _deviation_weights(inst: McInstance) -> np.ndarray:
    # 1_Omega / p - 1: exactly zero everywhere under full observation with p = 1
    return inst.mask / inst.p - 1.0


def sampled_inner(inst: McInstance, u, v) -> float:
    """``<P_Omega(u u^T), v v^T> / p - <u u^T, v v^T>``, as one weighted sum."""
    a = np.asarray(u, dtype=float) * np.asarray(v, dtype=float)
    return float(a @ _deviation_weights(inst) @ a)


def mc_concentration_probe(inst: McInstance, n_trials: int = 1000, seed=0) -> ConcentrationResult:
    d = inst.d
    if inst.p * d * d < 10:
        raise ValueError("p * d^2 < 10: too few expected observations to probe")
    rng = np.random.default_rng(seed)
    D = _deviation_weights(inst)
    U = np.stack([incoherent_test_vector(rng, d, inst.mu) for _ in range(n_trials)])
    V = np.stack([incoherent_test_vector(rng, d, inst.mu) for _ in range(n_trials)])
    A = U * V
    dev = np.abs(np.einsum("ti,ti->t", A @ D, A))
    z = inst.z
    return ConcentrationResult(
        max_abs_deviation=float(dev.max()),
        quantile_99=float(np.quantile(dev, 0.99)),
        z_deviation=abs(sampled_inner(inst, z, z)),
        p=inst.p,
        n_trials=n_trials,
    )


@dataclass(frozen=True)
class McClaimReport:
    grad_norm: float
    hess_min_eig: float
    first_order_ok: bool
    second_order_ok: bool
    claim1_margin: float
    claim2_margin: float
    distance: float
    distance_bound: float

    @property
    def claim1_holds(self) -> bool:
        return self.claim1_margin >= 0

    @property
    def claim2_holds(self) -> bool:
        return self.claim2_margin >= 0

    @property
    def localized(self) -> bool:
        return self.distance <= self.distance_bound

    @property
    def passed(self) -> bool:
        return self.claim1_holds and self.claim2_holds and self.localized


def mc_claim_check(inst: McInstance, x, epsilon: float | None = None, tol: float = 1e-6,
                   C: float = 5.0) -> McClaimReport:
    """Evaluate both claim inequalities and the ``C sqrt(eps)`` localization at ``x``.

    Claim 1: ``<x,z>^2 >= ||x||^4 - eps``. Claim 2: ``||x||^2 >= 1/3 - eps/3``.
    Whether ``x`` is actually approximately second-order (gradient norm and
    Hessian floor within ``tol``) is reported, not enforced.
    """
    x = np.asarray(x, dtype=float)
    if not inst.in_domain(x):
        raise ValueError("x lies outside the incoherent domain ||x||_inf < 2 mu / sqrt(d)")
    eps = inst.epsilon if epsilon is None else epsilon
    obj = mc_objective(inst)
    gn = float(np.linalg.norm(obj.gradient(x)))
    lam = float(np.linalg.eigvalsh(obj.hessian(x))[0])
    z = inst.z
    nx2 = float(x @ x)
    return McClaimReport(
        grad_norm=gn,
        hess_min_eig=lam,
        first_order_ok=gn <= tol,
        second_order_ok=lam >= -tol,
        claim1_margin=float((x @ z) ** 2 - nx2**2 + eps),
        claim2_margin=float(nx2 - (1.0 / 3.0 - eps / 3.0)),
        distance=float(min(np.linalg.norm(x - z), np.linalg.norm(x + z))),
        distance_bound=C * math.sqrt(eps),
    )


# ---------------------------------------------------------------------------
# GLM


@dataclass(frozen=True)
class GlmLocalizationReport:
    distances: list
    bound: float | None
    within_bound: list | None
    max_pairwise_distance: float = 0.0

    @property
    def max_distance(self) -> float:
        return max(self.distances) if self.distances else 0.0


def glm_localization_bound(inst: GlmInstance, C1: float, C2: float, delta: float = 0.05,
                           lam: float | None = None) -> float:
    """``(C1 B / (gamma^2 lambda)) sqrt((d (C2 + log(n B R)) + log(1/delta)) / n)``.

    ``lam`` defaults to the population covariance floor ``B^2/d``.
    """
    lam = inst.population_lambda if lam is None else lam
    n, d = inst.n, inst.d
    inner = (d * (C2 + math.log(n * inst.B * inst.R)) + math.log(1.0 / delta)) / n
    return C1 * inst.B / (inst.gamma**2 * lam) * math.sqrt(inner)


def glm_stationary_localization(inst: GlmInstance, stationary_points: Sequence,
                                bound_constants: tuple[float, float] | None = None,
                                delta: float = 0.05) -> GlmLocalizationReport:
    """Distances of stationary points to ``w_star``; bound only when constants are given."""
    pts = [np.asarray(w, dtype=float) for w in stationary_points]
    dists = [float(np.linalg.norm(w - inst.w_star)) for w in pts]
    pair = max((float(np.linalg.norm(a - b)) for a, b in itertools.combinations(pts, 2)), default=0.0)
    if bound_constants is None:
        return GlmLocalizationReport(dists, None, None, pair)
    bound = glm_localization_bound(inst, *bound_constants, delta=delta)
    return GlmLocalizationReport(dists, bound, [dd <= bound for dd in dists], pair)
