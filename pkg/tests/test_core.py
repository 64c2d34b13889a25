import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from banditlab.core import (
    Allocation,
    ArmSet,
    BanditStats,
    DesignMatrix,
    Feedback,
    Instance,
    RegretTrace,
    SemiStats,
    SimplexWeights,
    coordinate_estimate,
    delta_max_upper_bound,
    design_matrix,
    least_squares_estimate,
    sample_feedback,
    true_gaps,
)
from banditlab.errors import InvalidInputError, NonUniqueOptimumError, SingularDesignError
from banditlab.oracles import InstanceSpec, build_instance

from conftest import random_binary_arms


def eye_set(d):
    return ArmSet.from_arms(np.eye(d))


# ---- types -----------------------------------------------------------------

def test_armset_rejects_duplicates_and_bad_shapes():
    with pytest.raises(InvalidInputError):
        ArmSet.from_arms([[1, 0], [1, 0]])
    with pytest.raises(InvalidInputError):
        ArmSet(np.eye(2), 3)
    with pytest.raises(InvalidInputError):
        ArmSet(np.zeros((0, 2)), 2)


def test_armset_k_and_binary_flag():
    a = ArmSet.from_arms([[1, 1, 0], [0, 0, 1]])
    assert a.binary and a.k == 2 and a.m == 2
    b = ArmSet.from_arms([[0.5, 0.0], [0.0, 1.0]])
    assert not b.binary and b.k is None


def test_allocation_total_and_validation():
    a = Allocation(np.eye(3), [1.0, 2.0, 0.5])
    assert a.total == pytest.approx(3.5, rel=1e-12)
    with pytest.raises(InvalidInputError):
        Allocation(np.eye(2), [1.0, -1.0])
    with pytest.raises(InvalidInputError):
        Allocation(np.eye(2), [1.0])


def test_simplex_weights_sum_to_one():
    with pytest.raises(InvalidInputError):
        SimplexWeights(np.eye(2), [0.5, 0.6])
    s = SimplexWeights.normalize(np.eye(2), [1.0, 3.0])
    assert s.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(s.weights, [0.25, 0.75])


def test_dense_round_trip(rng):
    arms = random_binary_arms(rng, 6, 4)
    aset = ArmSet.from_arms(arms)
    w = rng.random(len(arms))
    w[0] = 0.0
    a = Allocation.from_dense(aset, w)
    assert a.support_size == len(arms) - 1
    assert np.allclose(a.to_dense(aset), w)


def test_instance_rejects_ties_and_out_of_range_theta():
    with pytest.raises(NonUniqueOptimumError):
        Instance(eye_set(2), [0.5, 0.5], "semi")
    with pytest.raises(InvalidInputError):
        Instance(eye_set(2), [1.5, 0.0], "semi")
    with pytest.raises(InvalidInputError):
        Instance(ArmSet.from_arms([[0.5, 0.0], [0.0, 1.0]]), [1.0, 0.0], "semi")


# ---- design_matrix ---------------------------------------------------------

def test_design_matrix_semi_two_singletons():
    lam = SimplexWeights(np.eye(2), [0.5, 0.5])
    A = design_matrix(lam, "semi")
    assert A.kind is Feedback.SEMI
    assert np.allclose(A.dense(), np.diag([0.5, 0.5]))


def test_design_matrix_band_single_outer_product():
    A = design_matrix(SimplexWeights([[1.0, 1.0]], [1.0]), "bandit")
    assert np.array_equal(A.dense(), np.ones((2, 2)))


def test_design_matrix_matches_direct_sum(rng):
    arms = random_binary_arms(rng, 6, 4)
    w = rng.random(len(arms))
    lam = Allocation(arms, w)
    direct = sum(wi * np.outer(x, x) for x, wi in zip(arms, w))
    assert np.max(np.abs(design_matrix(lam, "bandit").dense() - direct)) <= 1e-12
    assert np.max(np.abs(design_matrix(lam, "semi").values - np.diag(direct))) <= 1e-12


def test_design_matrix_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        design_matrix(SimplexWeights(np.eye(2), [0.5, 0.5]), "semi", eye_set(3))


def test_semi_design_needs_binary_arms():
    with pytest.raises(InvalidInputError):
        design_matrix(SimplexWeights([[0.5, 0.0]], [1.0]), "semi")


@given(st.integers(0, 10_000), st.floats(0.01, 100.0))
def test_design_matrix_homogeneous(seed, c):
    rng = np.random.default_rng(seed)
    arms = random_binary_arms(rng, 5, 4)
    lam = Allocation(arms, rng.random(len(arms)))
    for fb in ("semi", "bandit"):
        A1 = design_matrix(lam.scaled(c), fb).values
        A0 = design_matrix(lam, fb).values
        assert np.max(np.abs(A1 - c * A0)) <= 1e-12 * max(1.0, np.abs(A1).max())


@given(st.integers(0, 10_000))
def test_semi_diagonal_equals_mean_arm_and_trace(seed):
    rng = np.random.default_rng(seed)
    arms = random_binary_arms(rng, 7, 5)
    lam = SimplexWeights.normalize(arms, rng.random(len(arms)) + 1e-3)
    A = design_matrix(lam, "semi")
    assert np.max(np.abs(A.values - lam.weights @ arms)) <= 1e-12
    assert A.values.sum() == pytest.approx(float(lam.weights @ arms.sum(axis=1)), abs=1e-12)
    assert np.all(A.values >= 0)


def test_pseudo_inverse_and_range_check():
    A = DesignMatrix(Feedback.SEMI, np.array([2.0, 0.0]))
    assert np.allclose(A.inv_sqrt(), [2 ** -0.5, 0.0])
    A.check_range([[1.0, 0.0]])
    with pytest.raises(SingularDesignError):
        A.check_range([[0.0, 1.0]])
    B = design_matrix(Allocation([[1.0, 1.0]], [1.0]), "bandit")
    assert B.rank == 1
    B.check_range([[2.0, 2.0]])
    with pytest.raises(SingularDesignError):
        B.check_range([[1.0, 0.0]])


# ---- feedback --------------------------------------------------------------

def test_bandit_feedback_zero_parameter_moments(rng):
    # the arm (0, 1) has mean reward exactly 0
    inst0 = Instance(eye_set(2), [1e-3, 0.0], "bandit")
    n = 100_000
    ys = np.array([sample_feedback(inst0, [0.0, 1.0], rng).values[0] for _ in range(n)])
    se = 1 / math.sqrt(n)
    assert abs(ys.mean()) <= 3 * se
    # variance of a sample variance is about 2 / n for Gaussians
    assert abs(ys.var() - 1.0) <= 3 * math.sqrt(2.0 / n)


def test_bandit_feedback_mean(rng):
    inst = Instance(ArmSet.from_arms([[0.7, 0.0], [0.0, 0.5]]), [1.0, 0.0], "bandit")
    ys = np.array([sample_feedback(inst, 0, rng).values[0] for _ in range(100_000)])
    assert abs(ys.mean() - 0.7) <= 0.01


def test_semi_feedback_support(rng):
    inst = Instance(eye_set(3), [0.3, 0.2, 0.1], "semi")
    obs = sample_feedback(inst, [1.0, 0.0, 0.0], rng)
    assert list(obs.coords) == [0] and obs.values.shape == (1,)
    with pytest.raises(InvalidInputError):
        sample_feedback(inst, [0.5, 0.0, 0.0], rng)


# ---- estimators ------------------------------------------------------------

def test_least_squares_identity_design_exact():
    theta = np.array([0.3, -0.2, 0.9])
    hist = [(x, float(x @ theta)) for x in np.eye(3)]
    assert np.allclose(least_squares_estimate(hist), theta, atol=1e-10)


def test_least_squares_singular_reports_rank():
    theta = np.array([0.3, -0.2])
    hist = [([1.0, 1.0], 0.1)] * 3
    with pytest.raises(SingularDesignError) as e:
        least_squares_estimate(hist)
    assert e.value.rank == 1
    # with the estimation ridge the projection onto the span is recovered
    x = np.array([1.0, 1.0])
    est = least_squares_estimate([(x, float(x @ theta))] * 3, ridge=1e-10)
    assert est @ x == pytest.approx(x @ theta, abs=1e-8)


def test_least_squares_matches_independent_solver(rng):
    X = rng.normal(size=(40, 4))
    y = X @ rng.normal(size=4) + rng.normal(size=40)
    ours = least_squares_estimate(list(zip(X, y)))
    ref = np.linalg.pinv(X) @ y
    assert np.max(np.abs(ours - ref)) <= 1e-8


@given(st.integers(0, 10_000))
def test_least_squares_noiseless_reproduces_span_rewards(seed):
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-1, 1, 4)
    X = rng.normal(size=(3, 4))  # rank-deficient: span of three vectors
    hist = [(x, float(x @ theta)) for x in X for _ in range(2)]
    est = least_squares_estimate(hist, ridge=1e-10)
    for x in X:
        assert est @ x == pytest.approx(x @ theta, abs=1e-6)


def test_coordinate_estimate_mean_and_flags():
    hist = [(np.array([1.0, 0.0, 0.0]), np.array([v])) for v in (1.0, 2.0, 3.0, 10.0)]
    theta, counts = coordinate_estimate(hist)
    assert theta[0] == pytest.approx(4.0)
    assert list(counts) == [4, 0, 0] and theta[1] == 0.0


def test_coordinate_estimate_all_ones_noiseless():
    theta = np.array([0.1, -0.4, 0.7])
    est, counts = coordinate_estimate([(np.ones(3), theta)])
    assert np.array_equal(est, theta) and list(counts) == [1, 1, 1]


def test_coordinate_estimate_matches_streaming(rng):
    inst = Instance(ArmSet.from_arms(random_binary_arms(rng, 6, 4)), rng.uniform(-0.9, 0.9, 4), "semi")
    hist, stats = [], SemiStats(4)
    for _ in range(500):
        x = inst.arm_set.arms[rng.integers(inst.arm_set.m)]
        obs = sample_feedback(inst, x, rng)
        hist.append((x, obs))
        stats.add(x, 1, obs.values)
    est, _ = coordinate_estimate(hist)
    assert np.max(np.abs(est - stats.estimate())) <= 1e-12


def test_bandit_stats_matches_least_squares(rng):
    X = rng.normal(size=(30, 3))
    y = rng.normal(size=30)
    s = BanditStats(3)
    for x, v in zip(X, y):
        s.add(x, 1, v)
    assert np.allclose(s.estimate(), least_squares_estimate(list(zip(X, y))), atol=1e-8)


# ---- gaps and bounds -------------------------------------------------------

def test_true_gaps_two_arms():
    g = true_gaps(Instance(eye_set(2), [1.0, 0.0], "semi"))
    assert list(g.gaps) == [0.0, 1.0] and g.delta_min == 1.0 and g.delta_max == 1.0


def test_true_gaps_end_of_optimism():
    inst, _ = build_instance(InstanceSpec("end_of_optimism", {"eps": 0.01}))
    g = true_gaps(inst)
    assert g.gaps[1] == pytest.approx(1.0)
    assert g.gaps[2] == pytest.approx(0.01, abs=1e-12)


@given(st.integers(0, 10_000))
def test_true_gaps_brute_force(seed):
    rng = np.random.default_rng(seed)
    arms = random_binary_arms(rng, 8, 5)
    theta = rng.uniform(-1, 1, 5)
    vals = arms @ theta
    if np.sort(vals)[-1] - np.sort(vals)[-2] <= 1e-9:
        return
    g = true_gaps(Instance(ArmSet.from_arms(arms), theta, "semi"))
    best = arms[np.argmax(vals)]
    assert np.allclose(g.gaps, [(best - x) @ theta for x in arms], atol=1e-12)


def test_true_gaps_tie_rejected():
    inst = Instance(eye_set(2), [1.0, 0.0], "semi")
    object.__setattr__(inst, "theta_star", np.array([0.5, 0.5]))
    with pytest.raises(NonUniqueOptimumError):
        true_gaps(inst)


def test_delta_max_upper_bound_examples():
    assert delta_max_upper_bound(eye_set(2)) == pytest.approx(2.0)
    assert delta_max_upper_bound(ArmSet.from_arms([[1.0, 0.0]])) == 0.0
    inst, oracle = build_instance(InstanceSpec("top_k", {"m": 6, "k": 2}))
    X = inst.arm_set.arms
    diam = max(np.linalg.norm(a - b) for a in X for b in X)
    assert delta_max_upper_bound(inst.arm_set) == pytest.approx(math.sqrt(6) * diam, rel=1e-12)


@given(st.integers(0, 10_000))
def test_delta_max_upper_bound_dominates_true_gap(seed):
    rng = np.random.default_rng(seed)
    arms = random_binary_arms(rng, 6, 4)
    theta = rng.uniform(-1, 1, 4)
    v = np.sort(arms @ theta)
    if len(v) > 1 and v[-1] - v[-2] <= 1e-9:
        return
    inst = Instance(ArmSet.from_arms(arms), theta, "semi")
    assert delta_max_upper_bound(inst.arm_set) >= true_gaps(inst).delta_max - 1e-12


# ---- regret traces ---------------------------------------------------------

def test_regret_trace_invariants():
    RegretTrace(np.array([0.0, 1.0, 1.0]), {0: 2, 1: 1}, 3)
    with pytest.raises(InvalidInputError):
        RegretTrace(np.array([0.0, 1.0, 0.5]), {0: 3}, 3)
    with pytest.raises(InvalidInputError):
        RegretTrace(np.array([0.0, 1.0]), {0: 3}, 3)
    with pytest.raises(InvalidInputError):
        RegretTrace(np.array([0.0, 1.0, 1.0]), {0: 2}, 3)
