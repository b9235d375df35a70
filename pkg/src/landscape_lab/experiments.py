"""Experiment orchestration and report emission.

Each experiment is a function ``(cfg, run_index) -> RunResult``; runs are
independent, seeded from ``(master_seed, run_index)``, and assembled by
index so the output does not depend on execution order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .certifier import (
    CANDIDATE_LOCAL_MIN, LARGE_GRADIENT, STRICT_SADDLE, classify_point, glm_stationary_localization,
    mc_claim_check, mc_concentration_probe, pca_global_min_distance, pca_stationary_oracle,
    tensor_stationary_oracle,
)
from .config import ExperimentConfig
from .derivative_oracle import FdConfig, check_objective_derivatives
from .generators import GeneratorSpec, generate, make_rng
from .objectives import (
    GlmInstance, McInstance, PcaInstance, TensorInstance, glm_empirical, mc_objective, pca_objective,
    tensor_ambient,
)
from .optimizers import (
    GdConfig, OptimizerTrace, PerturbedGdConfig, gradient_descent, perturbed_gradient_descent,
    riemannian_ascent,
)

# stream tags for make_rng
_X0, _OPT = 11, 12

SIGMOID_SECOND_MAX = 1.0 / (6.0 * math.sqrt(3.0))


@dataclass
class RunResult:
    row: dict
    checks: dict = field(default_factory=dict)
    trace: OptimizerTrace | None = None
    f_star: float | None = None
    sweep: list = field(default_factory=list)


@dataclass
class ExperimentReport:
    config_echo: dict
    per_run_rows: list
    summary: dict
    wall_time: float
    version: str = __version__
    traces: list = field(default_factory=list)
    sweep_points: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.summary["checks"])

    def failed_checks(self) -> list[str]:
        return [c["name"] for c in self.summary["checks"] if not c["passed"]]

    def to_json(self) -> str:
        doc = {
            "config_echo": self.config_echo,
            "per_run_rows": self.per_run_rows,
            "summary": self.summary,
            "wall_time": self.wall_time,
            "version": self.version,
        }
        return json.dumps(doc, indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# ---------------------------------------------------------------------------
# per-family helpers


def objective_for(inst):
    if isinstance(inst, GlmInstance):
        return glm_empirical(inst)
    if isinstance(inst, PcaInstance):
        return pca_objective(inst)
    if isinstance(inst, McInstance):
        return mc_objective(inst)
    if isinstance(inst, TensorInstance):
        return tensor_ambient(inst)
    raise TypeError(f"unknown instance type {type(inst).__name__}")


def glm_lipschitz_bound(inst: GlmInstance) -> float:
    """Upper bound on the empirical-risk Hessian norm."""
    cov_max = float(np.linalg.eigvalsh(inst.X.T @ inst.X / inst.n)[-1])
    return cov_max * (1.0 / 16.0 + (1.0 + inst.noise_bound) * SIGMOID_SECOND_MAX)


def default_step_size(inst) -> float:
    if isinstance(inst, PcaInstance):
        return 1.0 / (8.0 * float(np.linalg.norm(inst.M)))
    if isinstance(inst, McInstance):
        # ||z z^T||_F = 1
        return 1.0 / 8.0
    if isinstance(inst, GlmInstance):
        return 1.0 / (2.0 * glm_lipschitz_bound(inst))
    return 0.1


def default_kind(inst) -> str:
    if isinstance(inst, TensorInstance):
        return "riemannian"
    if isinstance(inst, GlmInstance):
        return "gd"
    return "perturbed"


def sample_domain_point(inst, rng: np.random.Generator) -> np.ndarray:
    """A random point from the family's natural domain."""
    d = inst.d
    if isinstance(inst, GlmInstance):
        g = rng.standard_normal(d)
        return inst.R * rng.random() ** (1.0 / d) * g / np.linalg.norm(g)
    if isinstance(inst, PcaInstance):
        g = rng.standard_normal(d)
        return 2.0 * rng.random() ** (1.0 / d) * g / np.linalg.norm(g)
    if isinstance(inst, McInstance):
        return rng.uniform(-1.0, 1.0, d) * 0.99 * 2.0 * inst.mu / math.sqrt(d)
    g = rng.standard_normal(d)
    return g / np.linalg.norm(g)


def initial_point(inst, rng: np.random.Generator) -> np.ndarray:
    d = inst.d
    if isinstance(inst, PcaInstance):
        return rng.standard_normal(d) / math.sqrt(d)
    if isinstance(inst, McInstance):
        return rng.uniform(-1.0, 1.0, d) * inst.mu / math.sqrt(d)
    return sample_domain_point(inst, rng)


def run_optimizer(inst, cfg: ExperimentConfig, x0, rng) -> tuple[OptimizerTrace, dict]:
    o = cfg.optimizer
    kind = o.kind or default_kind(inst)
    step = o.step_size or default_step_size(inst)
    gd = GdConfig(step, o.max_iters, o.grad_tol)
    obj = objective_for(inst)
    if kind == "riemannian":
        trace = riemannian_ascent(obj, x0 / np.linalg.norm(x0), gd)
    elif kind == "perturbed":
        pcfg = PerturbedGdConfig(gd, o.perturb_radius, o.perturb_grad_threshold, o.perturb_cooldown_iters,
                                 o.escape_decrease)
        trace = perturbed_gradient_descent(obj, x0, pcfg, rng)
    else:
        trace = gradient_descent(obj, x0, gd)
    return trace, {"optimizer": kind, "step_size": step}


def run_instance(cfg: ExperimentConfig, run: int, spec: GeneratorSpec | None = None):
    s = spec or cfg.generator
    return generate(GeneratorSpec(s.family, s.d, s.family_params, cfg.master_seed, run))


def endpoint_metrics(inst, x, params: dict) -> tuple[dict, dict]:
    """Distance of an endpoint to the known optimum set plus the family's pass check."""
    obj = objective_for(inst)
    row, checks = {}, {}
    if isinstance(inst, PcaInstance):
        f_star = inst.global_min_value
        row["f_star"] = f_star
        row["gap"] = obj.value(x) - f_star
        row["dist_to_global"] = pca_global_min_distance(inst, x)
        if "value_tol" in params:
            checks["value_within_tol"] = row["gap"] <= params["value_tol"]
        checks["dist_within_tol"] = row["dist_to_global"] <= params["dist_tol"]
    elif isinstance(inst, McInstance):
        row["f_star"] = 0.0
        row["gap"] = obj.value(x)
        row["dist_to_global"] = float(min(np.linalg.norm(x - inst.z), np.linalg.norm(x + inst.z)))
        checks["dist_within_C_sqrt_eps"] = row["dist_to_global"] <= params["mc_C"] * math.sqrt(inst.epsilon)
    elif isinstance(inst, TensorInstance):
        align = float(np.max(np.abs(inst.components @ x)))
        row["f_star"] = 1.0
        row["gap"] = 1.0 - obj.value(x)
        row["max_alignment"] = align
        if "align_tol" in params:
            checks["aligned_with_component"] = align >= 1.0 - params["align_tol"]
    else:
        row["dist_to_w_star"] = float(np.linalg.norm(x - inst.w_star))
    return row, checks


# ---------------------------------------------------------------------------
# experiments


def _check_grad(cfg: ExperimentConfig, run: int) -> RunResult:
    prm = cfg.resolved_params()
    fd = FdConfig(step_h=prm["step_h"], rel_tol=prm["rel_tol"])
    row, checks = {"run": run}, {}
    for family, fam_params in sorted(prm["families"].items()):
        fam_params = dict(fam_params)
        d = fam_params.pop("d", cfg.generator.d)
        if family == cfg.generator.family:
            fam_params = {**cfg.generator.family_params, **fam_params}
        inst = run_instance(cfg, run, GeneratorSpec(family, d, fam_params))
        rng = make_rng(cfg.master_seed, _X0, run)
        pts = [sample_domain_point(inst, rng) for _ in range(prm["n_points"])]
        rep = check_objective_derivatives(objective_for(inst), pts, fd)
        row[f"{family}_grad_err"] = rep.max_rel_err_grad
        row[f"{family}_hess_err"] = rep.max_rel_err_hess
        checks[f"{family}_derivatives"] = rep.passed
    return RunResult(row, checks)


def _optimize(cfg: ExperimentConfig, run: int) -> RunResult:
    prm = cfg.resolved_params()
    inst = run_instance(cfg, run)
    x0 = initial_point(inst, make_rng(cfg.master_seed, _X0, run))
    trace, info = run_optimizer(inst, cfg, x0, make_rng(cfg.master_seed, _OPT, run))
    row = {"run": run, **info, "n_iters": trace.n_iters, "termination": trace.termination,
           "n_perturbations": len(trace.perturbation_events), "final_value": trace.values[-1],
           "final_grad_norm": trace.grad_norms[-1]}
    metrics, checks = endpoint_metrics(inst, trace.x, prm)
    row.update(metrics)
    checks["converged"] = trace.termination == "GradTol"
    return RunResult(row, checks, trace, metrics.get("f_star"))


def _certify(cfg: ExperimentConfig, run: int) -> RunResult:
    prm = cfg.resolved_params()
    inst = run_instance(cfg, run)
    x0 = initial_point(inst, make_rng(cfg.master_seed, _X0, run))
    trace, info = run_optimizer(inst, cfg, x0, make_rng(cfg.master_seed, _OPT, run))
    x = trace.x
    obj = objective_for(inst)
    row = {"run": run, **info, "n_iters": trace.n_iters}
    checks = {}
    if isinstance(inst, TensorInstance):
        cls = classify_point(-obj, x, cfg.certifier, known_minima=list(inst.components) + list(-inst.components),
                             manifold=True)
    elif isinstance(inst, PcaInstance):
        cls = classify_point(obj, x, cfg.certifier, known_minima=lambda y: pca_global_min_distance(inst, y))
    elif isinstance(inst, McInstance):
        cls = classify_point(obj, x, cfg.certifier, known_minima=[inst.z, -inst.z])
        claims = mc_claim_check(inst, x, C=prm["mc_C"])
        row.update(claim1_margin=claims.claim1_margin, claim2_margin=claims.claim2_margin,
                   mc_distance=claims.distance, mc_distance_bound=claims.distance_bound)
        checks["mc_claims"] = claims.passed
    else:
        cls = classify_point(obj, x, cfg.certifier, known_minima=[inst.w_star])
    row.update(verdict=cls.verdict, grad_norm=cls.grad_norm, hess_min_eig=cls.hess_min_eig,
               dist_to_known_min=cls.dist_to_known_min)
    checks["endpoint_candidate_local_min"] = cls.verdict == CANDIDATE_LOCAL_MIN
    if not isinstance(inst, GlmInstance):
        checks["endpoint_near_global"] = cls.dist_to_known_min <= (
            prm["mc_C"] * math.sqrt(inst.epsilon) if isinstance(inst, McInstance) else prm["dist_tol"])
    return RunResult(row, checks, trace, None, [(cls.grad_norm, cls.hess_min_eig)])


def _landscape_sweep(cfg: ExperimentConfig, run: int) -> RunResult:
    inst = run_instance(cfg, run)
    obj = objective_for(inst)
    counts = {LARGE_GRADIENT: 0, STRICT_SADDLE: 0, CANDIDATE_LOCAL_MIN: 0}
    sweep = []
    checks = {}
    if isinstance(inst, PcaInstance):
        pts = pca_stationary_oracle(inst)
        expected_min = [p for p in pts if p.eigenvalue == inst.eigvals[0] and p.eigenvalue > 0]
        for sp in pts:
            c = classify_point(obj, sp.point, cfg.certifier)
            counts[c.verdict] += 1
            sweep.append((c.grad_norm, c.hess_min_eig))
        n_pts = len(pts)
        checks["minima_count"] = counts[CANDIDATE_LOCAL_MIN] == len(expected_min)
        checks["saddle_count"] = counts[STRICT_SADDLE] == n_pts - len(expected_min)
    else:
        A = inst.components
        pattern = tensor_stationary_oracle(inst.n)
        neg = -obj
        support1 = 0
        for c_pt in pattern:
            x = A.T @ c_pt
            c = classify_point(neg, x, cfg.certifier, manifold=True)
            counts[c.verdict] += 1
            sweep.append((c.grad_norm, c.hess_min_eig))
            support1 += int(np.count_nonzero(c_pt) == 1)
        n_pts = len(pattern)
        checks["maxima_count"] = counts[CANDIDATE_LOCAL_MIN] == support1
        checks["saddle_count"] = counts[STRICT_SADDLE] == n_pts - support1
    checks["no_large_gradient"] = counts[LARGE_GRADIENT] == 0
    row = {"run": run, "n_points": n_pts, "n_candidate_local_min": counts[CANDIDATE_LOCAL_MIN],
           "n_strict_saddle": counts[STRICT_SADDLE], "n_large_gradient": counts[LARGE_GRADIENT],
           "max_grad_norm": max(s[0] for s in sweep)}
    return RunResult(row, checks, sweep=sweep)


def _concentration(cfg: ExperimentConfig, run: int) -> RunResult:
    prm = cfg.resolved_params()
    inst = run_instance(cfg, run)
    res = mc_concentration_probe(inst, prm["n_trials"], make_rng(cfg.master_seed, _OPT, run))
    row = {"run": run, "p": inst.p, "n_observed_pairs": len(inst.omega), "epsilon": inst.epsilon,
           "quantile_99": res.quantile_99, "max_abs_deviation": res.max_abs_deviation,
           "z_deviation": res.z_deviation}
    return RunResult(row, {"quantile_99_le_epsilon": res.quantile_99 <= inst.epsilon})


def _scaling_study(cfg: ExperimentConfig, run: int) -> RunResult:
    prm = cfg.resolved_params()
    n_values = prm["n_values"]
    row = {"run": run}
    checks = {}
    for j, n in enumerate(n_values):
        fp = {**cfg.generator.family_params, "n": int(n)}
        inst = generate(GeneratorSpec("glm", cfg.generator.d, fp, cfg.master_seed, run * len(n_values) + j))
        x0 = initial_point(inst, make_rng(cfg.master_seed, _X0, run, j))
        trace, info = run_optimizer(inst, cfg, x0, make_rng(cfg.master_seed, _OPT, run, j))
        rep = glm_stationary_localization(inst, [trace.x])
        row[f"dist_n{n}"] = rep.distances[0]
        checks[f"converged_n{n}"] = trace.termination == "GradTol"
    row["ratio"] = row[f"dist_n{n_values[0]}"] / row[f"dist_n{n_values[-1]}"]
    return RunResult(row, checks)


_EXPERIMENTS = {
    "check-grad": _check_grad,
    "optimize": _optimize,
    "certify": _certify,
    "landscape-sweep": _landscape_sweep,
    "concentration": _concentration,
    "scaling-study": _scaling_study,
}


def summarize(cfg: ExperimentConfig, results: list[RunResult]) -> dict:
    """Aggregate rows into counts, medians and named pass/fail checks."""
    rows = [r.row for r in results]
    names = sorted({k for r in results for k in r.checks})
    checks = []
    for name in names:
        n_pass = sum(bool(r.checks.get(name, True)) for r in results)
        checks.append({"name": name, "passed": n_pass == len(results), "n_pass": n_pass, "n_runs": len(results)})
    summary = {"n_runs": len(rows), "checks": checks}
    numeric = sorted({k for r in rows for k, v in r.items() if isinstance(v, (int, float)) and not isinstance(v, bool)} - {"run"})
    for k in numeric:
        vals = [r[k] for r in rows if isinstance(r.get(k), (int, float)) and r.get(k) is not None]
        if vals:
            summary[f"median_{k}"] = float(np.median(vals))
            summary[f"max_{k}"] = float(np.max(vals))
            summary[f"min_{k}"] = float(np.min(vals))
    if cfg.experiment == "scaling-study":
        lo, hi = cfg.resolved_params()["ratio_range"]
        n_values = cfg.resolved_params()["n_values"]
        med_a = float(np.median([r[f"dist_n{n_values[0]}"] for r in rows]))
        med_b = float(np.median([r[f"dist_n{n_values[-1]}"] for r in rows]))
        summary["median_distance_ratio"] = med_a / med_b
        checks.append({"name": "median_ratio_in_range", "passed": lo <= med_a / med_b <= hi,
                       "n_pass": None, "n_runs": len(rows)})
    if cfg.experiment in ("landscape-sweep", "certify"):
        verdicts = {}
        for r in rows:
            for key in ("verdict",):
                if key in r:
                    verdicts[r[key]] = verdicts.get(r[key], 0) + 1
        if verdicts:
            summary["verdict_counts"] = dict(sorted(verdicts.items()))
    return summary


def _n_workers() -> int:
    try:
        return max(1, int(os.environ.get("LANDSCAPE_LAB_THREADS", "1")))
    except ValueError:
        return 1


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """Run every seeded repetition, then optionally write report.json and rows.csv."""
    t0 = time.perf_counter()
    fn = _EXPERIMENTS[cfg.experiment]
    workers = min(_n_workers(), cfg.n_runs)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda r: fn(cfg, r), range(cfg.n_runs)))
    else:
        results = [fn(cfg, r) for r in range(cfg.n_runs)]
    report = ExperimentReport(
        config_echo=cfg.echo(),
        per_run_rows=[r.row for r in results],
        summary=summarize(cfg, results),
        wall_time=time.perf_counter() - t0,
        traces=[(r.row["run"], r.trace, r.f_star) for r in results if r.trace is not None],
        sweep_points=[p for r in results for p in r.sweep],
    )
    if write:
        write_report(report, cfg.output_dir)
    return report


# ---------------------------------------------------------------------------
# output


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    columns = []
    for r in rows:
        for k in r:
            if k not in columns:
                columns.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def write_report(report: ExperimentReport, output_dir) -> None:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json() + "\n")
    (out / "rows.csv").write_text(rows_to_csv(report.per_run_rows))


def decay_csv(trace: OptimizerTrace, f_star: float) -> str:
    """Two columns ``iter,log10_err`` with ``err = |f_k - f_star|``; exact hits are skipped."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iter", "log10_err"])
    if trace is not None:
        for k, v in enumerate(trace.values):
            err = abs(v - f_star)
            if err > 0:
                w.writerow([k, repr(math.log10(err))])
    return buf.getvalue()


def emit_plots_data(report: ExperimentReport, output_dir) -> list[Path]:
    """Write plot-ready CSVs: one decay file per trace with a known optimum, plus the sweep scatter."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    decays = [(run, tr, fs) for run, tr, fs in report.traces if fs is not None]
    if decays:
        for run, tr, fs in decays:
            p = out / f"decay_run{run:03d}.csv"
            p.write_text(decay_csv(tr, fs))
            written.append(p)
    else:
        p = out / "decay.csv"
        p.write_text(decay_csv(None, 0.0))
        written.append(p)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["grad_norm", "hess_min_eig"])
    for g, h in report.sweep_points:
        w.writerow([repr(float(g)), repr(float(h))])
    p = out / "sweep.csv"
    p.write_text(buf.getvalue())
    written.append(p)
    return written
