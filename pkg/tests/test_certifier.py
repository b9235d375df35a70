import math

import numpy as np
import pytest

from landscape_lab.certifier import (
    CANDIDATE_LOCAL_MIN,
    ENUMERATION_CAP,
    LARGE_GRADIENT,
    PL,
    RSI,
    STRICT_SADDLE,
    WEAK_QUASI_CONVEX,
    ClassifierThresholds,
    ball_sampler,
    classify_point,
    condition_margin,
    glm_localization_bound,
    glm_stationary_localization,
    mc_claim_check,
    mc_concentration_probe,
    pca_global_min_distance,
    pca_stationary_oracle,
    probe_condition,
    sampled_inner,
    tensor_pattern_count,
    tensor_stationary_oracle,
    verdict_for,
)
from landscape_lab.generators import GeneratorSpec, gen_glm, gen_mc, gen_pca, gen_tensor, sample_omega
from landscape_lab.objectives import (
    CallableObjective,
    McInstance,
    PcaInstance,
    QuadraticObjective,
    glm_empirical,
    pca_objective,
    tensor_ambient,
)
from landscape_lab.optimizers import GdConfig, gradient_descent
from landscape_lab.sphere import riemannian_grad


def diag_pca(vals):
    vals = np.asarray(vals, dtype=float)
    return PcaInstance(M=np.diag(vals), eigvals=vals, eigvecs=np.eye(vals.size))


def spd(d, seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((d, d))
    return B @ B.T + 0.5 * np.eye(d)


# --- classification ----------------------------------------------------------


def test_verdict_ordering():
    thr = ClassifierThresholds(alpha=1e-3, beta=1e-3)
    assert verdict_for(1.0, -5.0, thr) == LARGE_GRADIENT
    assert verdict_for(1e-4, -5.0, thr) == STRICT_SADDLE
    assert verdict_for(1e-4, -1e-4, thr) == CANDIDATE_LOCAL_MIN
    with pytest.raises(ValueError):
        ClassifierThresholds(alpha=0.0)


def test_classify_pca_points():
    obj = pca_objective(diag_pca([2.0, 1.0]))
    top = classify_point(obj, [math.sqrt(2), 0.0], known_minima=[[math.sqrt(2), 0], [-math.sqrt(2), 0]])
    assert top.verdict == CANDIDATE_LOCAL_MIN and top.dist_to_known_min == 0.0
    assert classify_point(obj, [0.0, 1.0]).verdict == STRICT_SADDLE
    assert classify_point(obj, [0.0, 1.0]).hess_min_eig == pytest.approx(-2.0)
    assert classify_point(obj, [0.0, 0.0]).hess_min_eig == pytest.approx(-4.0)
    assert classify_point(obj, [1.0, 1.0]).verdict == LARGE_GRADIENT


def test_degenerate_point_is_only_a_candidate():
    obj = CallableObjective(2, lambda x: x[0] ** 2 + x[1] ** 3,
                            lambda x: np.array([2 * x[0], 3 * x[1] ** 2]),
                            lambda x: np.diag([2.0, 6 * x[1]]))
    assert classify_point(obj, np.zeros(2)).verdict == CANDIDATE_LOCAL_MIN


def test_classify_on_sphere_for_maximization():
    neg = -tensor_ambient(gen_tensor(GeneratorSpec("tensor", 3, {"standard_basis": True})))
    assert classify_point(neg, np.eye(3)[0], manifold=True).verdict == CANDIDATE_LOCAL_MIN
    mid = classify_point(neg, np.array([1.0, 1.0, 0.0]) / math.sqrt(2), manifold=True)
    assert mid.verdict == STRICT_SADDLE
    assert mid.hess_min_eig == pytest.approx(-4.0, abs=1e-12)


def test_classify_with_distance_callable():
    inst = diag_pca([2.0, 1.0])
    c = classify_point(pca_objective(inst), [0.0, 1.0], known_minima=lambda x: pca_global_min_distance(inst, x))
    assert c.dist_to_known_min == pytest.approx(math.sqrt(3.0))


# --- condition probes --------------------------------------------------------


def test_quadratic_satisfies_all_three_conditions():
    A = spd(4, 1)
    lmin = np.linalg.eigvalsh(A)[0]
    obj = QuadraticObjective(A, np.zeros(4))
    sampler = ball_sampler(4, 3.0)
    for cond, param in [(WEAK_QUASI_CONVEX, 1.0), (WEAK_QUASI_CONVEX, 2.0), (PL, 2 * lmin), (RSI, lmin)]:
        rep = probe_condition(obj, np.zeros(4), cond, param, sampler, 500, seed=0, slack=1e-9)
        assert rep.n_violations == 0, (cond, param, rep.worst_margin)


def test_quadratic_violates_overstated_parameters():
    A = spd(4, 2)
    lmin = np.linalg.eigvalsh(A)[0]
    obj = QuadraticObjective(A, np.zeros(4))
    sampler = ball_sampler(4, 1.0)
    assert probe_condition(obj, np.zeros(4), WEAK_QUASI_CONVEX, 2.5, sampler, 200).n_violations == 200
    assert probe_condition(obj, np.zeros(4), RSI, 1.5 * np.linalg.eigvalsh(A)[-1], sampler, 200).n_violations == 200
    assert condition_margin(obj, np.eye(4)[0] @ np.linalg.eigh(A)[1].T, np.zeros(4), PL, 2 * lmin) == pytest.approx(
        0.0, abs=1e-10)


def test_pca_pl_fails_near_saddle():
    inst = diag_pca([2.0, 1.0])
    obj = pca_objective(inst)
    rep = probe_condition(obj, np.array([math.sqrt(2), 0.0]), PL, 0.1, ball_sampler(2, 0.05, [0.0, 1.0]), 100)
    assert rep.n_violations > 0
    assert np.linalg.norm(rep.worst_point - [0.0, 1.0]) <= 0.05


def test_unknown_condition_rejected():
    obj = QuadraticObjective(np.eye(2), np.zeros(2))
    with pytest.raises(ValueError):
        probe_condition(obj, np.zeros(2), "Convex", 1.0, ball_sampler(2, 1.0), 3)


# --- PCA oracle ---------------------------------------------------------------


def test_pca_oracle_diag_example():
    inst = diag_pca([2.0, 1.0])
    pts = pca_stationary_oracle(inst)
    assert len(pts) == 5
    coords = sorted(tuple(np.round(p.point, 12)) for p in pts)
    r2 = round(math.sqrt(2), 12)
    assert coords == sorted([(0.0, 0.0), (r2, 0.0), (-r2, 0.0), (0.0, 1.0), (0.0, -1.0)])
    obj = pca_objective(inst)
    assert all(np.linalg.norm(obj.gradient(p.point)) <= 1e-12 for p in pts)
    assert not any(p.degenerate for p in pts)


def test_pca_oracle_flags_repeated_eigenvalues():
    pts = pca_stationary_oracle(diag_pca([1.0, 1.0]))
    assert [p.degenerate for p in pts] == [False, True, True, True, True]
    assert pca_global_min_distance(diag_pca([1.0, 1.0]), [0.6, 0.8]) == pytest.approx(0.0, abs=1e-15)


def test_pca_oracle_skips_zero_eigenvalues():
    pts = pca_stationary_oracle(diag_pca([3.0, 1.0, 0.0]))
    assert len(pts) == 5


def test_pca_oracle_random_instance_is_stationary():
    inst = gen_pca(GeneratorSpec("pca", 6, seed=9))
    obj = pca_objective(inst)
    for p in pca_stationary_oracle(inst):
        assert np.linalg.norm(obj.gradient(p.point)) <= 1e-10


# --- tensor oracle -------------------------------------------------------------


def test_tensor_pattern_counts():
    assert tensor_pattern_count(2, 2) == 8
    assert len(tensor_stationary_oracle(2)) == 8
    assert tensor_pattern_count(3, 3) == 26
    assert len(tensor_stationary_oracle(3)) == 26


def test_tensor_oracle_cap():
    assert tensor_pattern_count(13, 13) > ENUMERATION_CAP
    with pytest.raises(ValueError, match="cap"):
        tensor_stationary_oracle(13)
    assert len(tensor_stationary_oracle(13, max_support=1)) == 26


def test_tensor_oracle_points_are_riemannian_stationary():
    obj = tensor_ambient(gen_tensor(GeneratorSpec("tensor", 4, {"standard_basis": True})))
    for x in tensor_stationary_oracle(4):
        assert np.linalg.norm(x) == pytest.approx(1.0)
        assert np.linalg.norm(riemannian_grad(obj, x)) <= 1e-14


def test_tensor_oracle_maps_through_components():
    inst = gen_tensor(GeneratorSpec("tensor", 5, {"n_components": 3}, seed=1))
    obj = tensor_ambient(inst)
    for c in tensor_stationary_oracle(3):
        x = inst.components.T @ c
        assert np.linalg.norm(riemannian_grad(obj, x)) <= 1e-12


# --- matrix completion ---------------------------------------------------------


def full_mc(d):
    rng = np.random.default_rng(0)
    z = rng.choice([-1.0, 1.0], d) / math.sqrt(d)
    return McInstance(z=z, mu=1.0, p=1.0, omega=sample_omega(rng, d, 1.0), epsilon=0.1)


def test_concentration_exactly_zero_under_full_observation():
    res = mc_concentration_probe(full_mc(30), n_trials=50, seed=1)
    assert res.max_abs_deviation == 0.0 and res.quantile_99 == 0.0 and res.z_deviation == 0.0


def test_concentration_positive_under_subsampling():
    inst = gen_mc(GeneratorSpec("mc", 100, {"p": 0.4}, seed=2))
    res = mc_concentration_probe(inst, n_trials=200, seed=1)
    assert 0.0 < res.quantile_99 <= res.max_abs_deviation
    assert res.z_deviation == pytest.approx(abs(sampled_inner(inst, inst.z, inst.z)))


def test_sampled_inner_matches_definition():
    inst = gen_mc(GeneratorSpec("mc", 40, {"p": 0.5}, seed=3))
    rng = np.random.default_rng(4)
    u, v = rng.standard_normal(40), rng.standard_normal(40)
    U, V = np.outer(u, u), np.outer(v, v)
    expected = np.sum(inst.project(U) * V) / inst.p - np.sum(U * V)
    assert sampled_inner(inst, u, v) == pytest.approx(expected, rel=1e-10)


def test_claims_at_ground_truth_and_origin():
    inst = gen_mc(GeneratorSpec("mc", 40, {"p": 0.6}, seed=5))
    at_z = mc_claim_check(inst, inst.z)
    assert at_z.passed and at_z.first_order_ok and at_z.distance == 0.0
    at_zero = mc_claim_check(inst, np.zeros(40))
    assert at_zero.claim1_holds and not at_zero.claim2_holds
    assert at_zero.hess_min_eig < 0


def test_claim_check_rejects_points_outside_domain():
    inst = gen_mc(GeneratorSpec("mc", 40, {"p": 0.6}, seed=5))
    x = np.zeros(40)
    x[0] = 2.0 / math.sqrt(40)
    with pytest.raises(ValueError):
        mc_claim_check(inst, x)


# --- GLM ----------------------------------------------------------------------


def test_glm_bound_formula():
    inst = gen_glm(GeneratorSpec("glm", 4, {"n": 100}, seed=1))
    b = glm_localization_bound(inst, 1.0, 0.0, delta=0.05)
    lam = 1.0 / 4
    expected = 1.0 / (inst.gamma**2 * lam) * math.sqrt((4 * math.log(100) + math.log(20)) / 100)
    assert b == pytest.approx(expected, rel=1e-12)


def test_glm_noise_free_stationary_point_is_w_star():
    inst = gen_glm(GeneratorSpec("glm", 3, {"n": 200}, seed=2))
    tr = gradient_descent(glm_empirical(inst), np.zeros(3), GdConfig(step_size=4.0, grad_tol=1e-12))
    rep = glm_stationary_localization(inst, [tr.x])
    assert rep.bound is None and rep.max_distance <= 1e-8
    with_bound = glm_stationary_localization(inst, [tr.x, inst.w_star], bound_constants=(1.0, 1.0))
    assert all(with_bound.within_bound)
    assert with_bound.max_pairwise_distance <= 1e-8
