"""Experiment configuration: parsing, validation and default resolution."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .certifier import ClassifierThresholds
from .generators import FAMILIES, FAMILY_DEFAULTS, GeneratorSpec

EXPERIMENTS = ("check-grad", "optimize", "certify", "landscape-sweep", "concentration", "scaling-study")
OPTIMIZER_KINDS = ("gd", "perturbed", "riemannian")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass
class OptimizerSpec:
    """Optimizer settings as written in a config.

    ``None`` means "resolve per instance"; the resolved numbers are echoed in
    every run row.
    """

    kind: str | None = None
    step_size: float | None = None
    max_iters: int = 100_000
    grad_tol: float = 1e-8
    perturb_radius: float = 1e-3
    perturb_grad_threshold: float | None = None
    perturb_cooldown_iters: int | None = None
    escape_decrease: float | None = None


# experiment-specific knobs and their defaults
EXPERIMENT_PARAMS: dict[str, dict[str, Any]] = {
    "check-grad": {"families": None, "n_points": 100, "rel_tol": 1e-5, "step_h": 1e-5},
    "optimize": {"value_tol": 1e-6, "dist_tol": 1e-3, "align_tol": 1e-5, "mc_C": 5.0},
    "certify": {"dist_tol": 1e-3, "mc_C": 5.0},
    "landscape-sweep": {},
    "concentration": {"n_trials": 1000},
    "scaling-study": {"n_values": None, "ratio_range": [1.3, 3.0]},
}

DEFAULT_CHECK_GRAD_FAMILIES = {
    "glm": {"n": 200},
    "pca": {},
    "mc": {"d": 50, "p": 0.5},
    "tensor": {},
}


@dataclass
class ExperimentConfig:
    experiment: str
    generator: GeneratorSpec
    optimizer: OptimizerSpec = field(default_factory=OptimizerSpec)
    certifier: ClassifierThresholds = field(default_factory=ClassifierThresholds)
    n_runs: int = 1
    master_seed: int = 0
    output_dir: str = "out"
    params: dict = field(default_factory=dict)

    def resolved_params(self) -> dict:
        out = dict(EXPERIMENT_PARAMS[self.experiment])
        out.update(self.params)
        if self.experiment == "check-grad" and out["families"] is None:
            out["families"] = DEFAULT_CHECK_GRAD_FAMILIES
        if self.experiment == "scaling-study" and out["n_values"] is None:
            n = self.generator.resolved_params()["n"]
            out["n_values"] = [n, 4 * n]
        return out

    def echo(self) -> dict:
        """Fully resolved config, every filled-in default included."""
        gen = {
            "family": self.generator.family,
            "d": self.generator.d,
            "family_params": self.generator.resolved_params(),
            "seed": self.generator.seed,
        }
        return {
            "experiment": self.experiment,
            "generator": gen,
            "optimizer": asdict(self.optimizer),
            "certifier": asdict(self.certifier),
            "n_runs": self.n_runs,
            "master_seed": self.master_seed,
            "output_dir": str(self.output_dir),
            "params": self.resolved_params(),
        }


def _expect(cond: bool, path: str, msg: str):
    if not cond:
        raise ConfigError(path, msg)


def _check_keys(doc: dict, allowed, path: str):
    _expect(isinstance(doc, dict), path, "expected a JSON object")
    unknown = sorted(set(doc) - set(allowed))
    _expect(not unknown, path, f"unknown field(s) {unknown}")


def parse_generator(doc: dict, master_seed: int, path: str = "generator") -> GeneratorSpec:
    _check_keys(doc, ("family", "d", "family_params", "seed"), path)
    _expect("family" in doc, f"{path}.family", "required")
    _expect(doc["family"] in FAMILIES, f"{path}.family", f"must be one of {list(FAMILIES)}")
    _expect("d" in doc, f"{path}.d", "required")
    _expect(isinstance(doc["d"], int) and doc["d"] >= 2, f"{path}.d", "must be an integer >= 2")
    fp = doc.get("family_params", {})
    _check_keys(fp, FAMILY_DEFAULTS[doc["family"]], f"{path}.family_params")
    try:
        return GeneratorSpec(doc["family"], doc["d"], dict(fp), int(doc.get("seed", master_seed)))
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def parse_config(doc: dict, seed_override: int | None = None, out_override: str | None = None,
                 experiment_override: str | None = None) -> ExperimentConfig:
    _check_keys(doc, ("experiment", "generator", "optimizer", "certifier", "n_runs", "master_seed",
                      "output_dir", "params"), "config")
    experiment = experiment_override or doc.get("experiment")
    _expect(experiment in EXPERIMENTS, "experiment", f"must be one of {list(EXPERIMENTS)}")
    if experiment_override and doc.get("experiment") not in (None, experiment_override):
        raise ConfigError("experiment", f"config says {doc['experiment']!r} but {experiment_override!r} was requested")
    master_seed = seed_override if seed_override is not None else doc.get("master_seed", 0)
    _expect(isinstance(master_seed, int) and 0 <= master_seed < 2**64, "master_seed", "must be a 64-bit unsigned integer")
    _expect("generator" in doc, "generator", "required")
    gen = parse_generator(doc["generator"], master_seed)
    if seed_override is not None:
        gen = GeneratorSpec(gen.family, gen.d, gen.family_params, master_seed)

    opt_doc = doc.get("optimizer") or {}
    _check_keys(opt_doc, OptimizerSpec.__dataclass_fields__, "optimizer")
    opt = OptimizerSpec(**opt_doc)
    _expect(opt.kind is None or opt.kind in OPTIMIZER_KINDS, "optimizer.kind", f"must be one of {list(OPTIMIZER_KINDS)}")
    _expect(opt.step_size is None or opt.step_size > 0, "optimizer.step_size", "must be positive")
    _expect(isinstance(opt.max_iters, int) and opt.max_iters >= 0, "optimizer.max_iters", "must be a non-negative integer")
    _expect(opt.grad_tol > 0, "optimizer.grad_tol", "must be positive")
    _expect(opt.perturb_radius > 0, "optimizer.perturb_radius", "must be positive")
    _expect(opt.perturb_cooldown_iters is None or opt.perturb_cooldown_iters >= 1,
            "optimizer.perturb_cooldown_iters", "must be >= 1")

    cert_doc = doc.get("certifier") or {}
    _check_keys(cert_doc, ClassifierThresholds.__dataclass_fields__, "certifier")
    try:
        cert = ClassifierThresholds(**cert_doc)
    except ValueError as exc:
        raise ConfigError("certifier", str(exc)) from exc

    n_runs = doc.get("n_runs", 1)
    _expect(isinstance(n_runs, int) and n_runs >= 1, "n_runs", "must be an integer >= 1")
    params = doc.get("params") or {}
    _check_keys(params, EXPERIMENT_PARAMS[experiment], "params")
    if experiment == "landscape-sweep":
        _expect(gen.family in ("pca", "tensor"), "generator.family", "landscape-sweep supports pca and tensor")
    if experiment == "concentration":
        _expect(gen.family == "mc", "generator.family", "concentration needs the mc family")
    if experiment == "scaling-study":
        _expect(gen.family == "glm", "generator.family", "scaling-study needs the glm family")
    out = out_override if out_override is not None else doc.get("output_dir", "out")
    return ExperimentConfig(experiment, gen, opt, cert, n_runs, master_seed, str(out), dict(params))


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}", f"malformed JSON ({exc.msg})") from exc
    return parse_config(doc, **overrides)
