"""Seeded instance generation for the four problem families.

Randomness comes from a counter-based Philox stream keyed by
``(seed, family, index)``, so an instance depends only on its spec and never
on generation order or thread schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .objectives import GlmInstance, McInstance, PcaInstance, TensorInstance, sigmoid, sigmoid_prime

FAMILIES = ("glm", "pca", "mc", "tensor")
_FAMILY_CODE = {name: k + 1 for k, name in enumerate(FAMILIES)}

# Defaults for every family parameter; resolved specs echo these explicitly.
FAMILY_DEFAULTS: dict[str, dict[str, Any]] = {
    "glm": {"n": 200, "B": 1.0, "R": 1.0, "noise_bound": 0.0, "activation": "sigmoid"},
    "pca": {"spectrum": None},
    "mc": {"mu": 1.0, "epsilon": 0.1, "p": None, "c_p": 1.0, "z_kind": "signs"},
    "tensor": {"n_components": None, "standard_basis": False},
}


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    d: int
    family_params: dict = field(default_factory=dict)
    seed: int = 0
    index: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if int(self.d) < 2:
            raise ValueError(f"d must be >= 2, got {self.d}")
        unknown = set(self.family_params) - set(FAMILY_DEFAULTS[self.family])
        if unknown:
            raise ValueError(f"unknown {self.family} parameters: {sorted(unknown)}")

    def resolved_params(self) -> dict:
        params = dict(FAMILY_DEFAULTS[self.family])
        params.update(self.family_params)
        if self.family == "pca" and params["spectrum"] is None:
            params["spectrum"] = default_spectrum(self.d)
        if self.family == "tensor" and params["n_components"] is None:
            params["n_components"] = self.d
        return params

    def rng(self) -> np.random.Generator:
        return make_rng(self.seed, _FAMILY_CODE[self.family], self.index)


def make_rng(*keys: int) -> np.random.Generator:
    """Philox generator keyed by a tuple of non-negative integers."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in keys])))


def default_spectrum(d: int) -> list[float]:
    """Top eigenvalue 2, the rest evenly spaced on [0.1, 1]; gap of 1."""
    return [2.0] + [float(v) for v in np.linspace(1.0, 0.1, d - 1)]


def uniform_sphere(rng: np.random.Generator, n: int, d: int, radius: float = 1.0) -> np.ndarray:
    g = rng.standard_normal((n, d))
    return radius * g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_glm_data(rng, w_star, n: int, B: float, noise_bound: float):
    """Draw ``(X, y)`` with rows uniform on the radius-B sphere and bounded uniform noise."""
    X = uniform_sphere(rng, n, len(w_star), B)
    noise = rng.uniform(-noise_bound, noise_bound, size=n) if noise_bound > 0 else np.zeros(n)
    y = sigmoid(X @ w_star) + noise
    return X, y


def gen_glm(spec: GeneratorSpec) -> GlmInstance:
    p = spec.resolved_params()
    B, R = float(p["B"]), float(p["R"])
    if B * R < 1:
        raise ValueError(f"B*R must be >= 1, got {B * R}")
    rng = spec.rng()
    w_star = uniform_sphere(rng, 1, spec.d, R)[0]
    X, y = sample_glm_data(rng, w_star, int(p["n"]), B, float(p["noise_bound"]))
    # sigma' is even and decreasing in |t|, so its infimum on [-BR, BR] sits at BR
    gamma = float(sigmoid_prime(B * R))
    lam = float(np.linalg.eigvalsh(X.T @ X / X.shape[0])[0])
    return GlmInstance(
        X=X, y=y, w_star=w_star, B=B, R=R, gamma=gamma, lambda_min_cov=lam,
        noise_bound=float(p["noise_bound"]), activation=p["activation"], seed=spec.seed,
    )


def gen_pca(spec: GeneratorSpec) -> PcaInstance:
    spectrum = np.asarray(spec.resolved_params()["spectrum"], dtype=float)
    if spectrum.shape != (spec.d,):
        raise ValueError(f"spectrum needs {spec.d} entries, got {spectrum.size}")
    if np.any(spectrum < 0):
        raise ValueError("spectrum entries must be non-negative")
    if np.any(np.diff(spectrum) > 0):
        raise ValueError("spectrum must be sorted in descending order")
    Q, Rm = np.linalg.qr(spec.rng().standard_normal((spec.d, spec.d)))
    Q = Q * np.sign(np.diag(Rm))
    M = (Q * spectrum) @ Q.T
    M = 0.5 * (M + M.T)
    return PcaInstance(M=M, eigvals=spectrum, eigvecs=Q, seed=spec.seed)


def sampling_probability(d: int, mu: float, epsilon: float, c_p: float = 1.0) -> float:
    """``min(1, c_p mu^4 (log d)^3 / (d eps^2))``."""
    return min(1.0, c_p * mu**4 * math.log(d) ** 3 / (d * epsilon**2))


def sample_omega(rng: np.random.Generator, d: int, p: float) -> np.ndarray:
    """Bernoulli(p) mask over unordered pairs ``i <= j`` (diagonal included)."""
    iu, ju = np.triu_indices(d)
    if p >= 1.0:
        keep = np.ones(iu.size, dtype=bool)
    else:
        keep = rng.random(iu.size) < p
    return np.column_stack([iu[keep], ju[keep]])


def gen_mc(spec: GeneratorSpec) -> McInstance:
    prm = spec.resolved_params()
    d, mu, eps = spec.d, float(prm["mu"]), float(prm["epsilon"])
    if mu < 1:
        raise ValueError("mu must be >= 1")
    if not 0 < eps < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    p = float(prm["p"]) if prm["p"] is not None else sampling_probability(d, mu, eps, float(prm["c_p"]))
    n_pairs = d * (d + 1) // 2
    if p * n_pairs < 10 * d:
        raise ValueError(f"expected |Omega| = {p * n_pairs:.1f} is below 10*d = {10 * d}; instance too sparse")
    rng = spec.rng()
    if prm["z_kind"] == "signs":
        z = rng.choice([-1.0, 1.0], size=d) / math.sqrt(d)
    elif prm["z_kind"] == "gaussian":
        # rejection-sample a Gaussian direction until it is mu-incoherent
        for _ in range(10_000):
            g = rng.standard_normal(d)
            z = g / np.linalg.norm(g)
            if np.max(np.abs(z)) <= mu / math.sqrt(d):
                break
        else:
            raise ValueError(f"could not sample a Gaussian z with incoherence mu={mu}")
    else:
        raise ValueError(f"unknown z_kind {prm['z_kind']!r}")
    omega = sample_omega(rng, d, p)
    return McInstance(z=z, mu=mu, p=p, omega=omega, epsilon=eps, seed=spec.seed)


def gen_tensor(spec: GeneratorSpec) -> TensorInstance:
    prm = spec.resolved_params()
    n = int(prm["n_components"])
    if n > spec.d:
        raise ValueError(f"n_components={n} exceeds d={spec.d}")
    if n < 1:
        raise ValueError("need at least one component")
    if prm["standard_basis"]:
        return TensorInstance(components=np.eye(spec.d)[:n], seed=spec.seed)
    Q, _ = np.linalg.qr(spec.rng().standard_normal((spec.d, n)))
    return TensorInstance(components=Q.T, seed=spec.seed)


_DISPATCH = {"glm": gen_glm, "pca": gen_pca, "mc": gen_mc, "tensor": gen_tensor}


def generate(spec: GeneratorSpec):
    return _DISPATCH[spec.family](spec)
