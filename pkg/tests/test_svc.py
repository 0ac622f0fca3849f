import math
import warnings

import numpy as np
import pytest

from speccompact import svc
from speccompact.errors import DegenerateLabels, DimensionMismatch, NonConvergence
from speccompact.svc import Hyperparams, KernelSpec, SvcModel

from qp_oracle import solve_dual

HARD = Hyperparams(kernel=KernelSpec.linear(), c=1e6, kkt_tol=1e-9)


def _two_point():
    return svc.train_svc([[0.0], [1.0]], [-1, 1], HARD)


def test_kernel_values():
    assert svc.kernel_eval(KernelSpec.rbf(1.0), [0.3, 0.4], [0.3, 0.4]) == 1.0
    assert svc.kernel_eval(KernelSpec.linear(), [1, 2], [3, 4]) == 11.0
    assert svc.kernel_eval(KernelSpec.rbf(0.5), [0, 0], [1, 1]) == pytest.approx(math.exp(-1.0), abs=1e-15)
    with pytest.raises(DimensionMismatch):
        svc.kernel_eval(KernelSpec.linear(), [1, 2], [1, 2, 3])


def test_kernel_matrix_matches_pointwise():
    rng = np.random.default_rng(1)
    X, Z = rng.normal(size=(7, 3)), rng.normal(size=(5, 3))
    for k in (KernelSpec.linear(), KernelSpec.rbf(0.7)):
        K = svc.kernel_matrix(k, X, Z)
        ref = np.array([[svc.kernel_eval(k, x, z) for z in Z] for x in X])
        np.testing.assert_allclose(K, ref, rtol=1e-13, atol=1e-15)


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec.rbf(0.0)
    with pytest.raises(ValueError):
        KernelSpec("poly", 1.0)


def test_two_point_boundary_at_midpoint():
    # max-margin solution: w = 2, b = -1
    m = _two_point()
    assert svc.decision_value(m, [0.5]) == pytest.approx(0.0, abs=1e-6)
    assert svc.decision_value(m, [0.0]) == pytest.approx(-1.0, abs=1e-4)
    assert svc.decision_value(m, [1.0]) == pytest.approx(1.0, abs=1e-4)
    np.testing.assert_allclose(m.state.alphas, [2.0, 2.0], atol=1e-6)


def test_xor_rbf_fits_training_set():
    X = [[0, 0], [1, 1], [0, 1], [1, 0]]
    y = [-1, -1, 1, 1]
    m = svc.train_svc(X, y, Hyperparams(kernel=KernelSpec.rbf(1.0), c=10.0))
    assert svc.predict_many(m, X).tolist() == y


def test_xor_objective_matches_oracle():
    X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
    y = np.array([-1, -1, 1, 1], dtype=float)
    K = svc.kernel_matrix(KernelSpec.rbf(1.0), X, X)
    st = svc.smo_solve(K, y, 10.0, tol=1e-10)
    _, ref = solve_dual(K * np.outer(y, y), y, 10.0)
    assert st.objective == pytest.approx(ref, abs=1e-8)


def test_single_class_rejected():
    with pytest.raises(DegenerateLabels):
        svc.train_svc([[0.0], [1.0], [2.0]], [1, 1, 1])


def test_bad_inputs():
    with pytest.raises(DimensionMismatch):
        svc.train_svc([[0.0], [1.0]], [1, -1, 1])
    with pytest.raises(ValueError):
        svc.train_svc([[0.0], [1.0]], [1, 0])


def test_hard_margin_support_vectors_on_margin():
    rng = np.random.default_rng(4)
    X = np.vstack([rng.normal(size=(15, 2)) + 3, rng.normal(size=(15, 2)) - 3])
    y = np.array([1] * 15 + [-1] * 15)
    m = svc.train_svc(X, y, HARD)
    sv_y = np.sign(m.coefficients)
    np.testing.assert_allclose(svc.decision_values(m, m.support_vectors), sv_y, atol=1e-4)


def test_prediction_sign_rule():
    base = SvcModel(np.zeros((1, 1)), [0.0], 0.0, KernelSpec.linear())
    for bias, expected in ((0.73, 1), (-0.002, -1), (0.0, 1)):
        m = SvcModel(base.support_vectors, base.coefficients, bias, base.kernel)
        assert svc.predict(m, [0.0]) == expected


def test_model_error():
    m = SvcModel(np.zeros((1, 1)), [0.0], 1.0, KernelSpec.linear())
    assert svc.model_error(m, [0.0], 1) == 0.0
    m = SvcModel(np.zeros((1, 1)), [0.0], 0.2, KernelSpec.linear())
    assert svc.model_error(m, [0.0], -1) == pytest.approx(-1.2)


def test_model_error_bounded_by_slack_on_training_set():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(40, 2))
    y = np.where(X[:, 0] + 0.4 * rng.normal(size=40) > 0, 1, -1)
    hp = Hyperparams(kernel=KernelSpec.rbf(0.5), c=1.0, kkt_tol=1e-8)
    m = svc.train_svc(X, y, hp)
    f = svc.decision_values(m, X)
    xi = m.state.slacks
    np.testing.assert_allclose(xi, np.maximum(0.0, 1.0 - y * f), atol=1e-9)
    # |e_m| = |y - f| = |1 - y f|, bounded by eps + xi away from free SVs
    e = np.abs(y - f)
    free = (m.state.alphas > 1e-8) & (m.state.alphas < hp.c - 1e-8)
    assert np.all(e[free] <= hp.epsilon + xi[free] + 1e-6)
    assert np.all(e[m.state.alphas >= hp.c - 1e-8] <= 1.0 + xi[m.state.alphas >= hp.c - 1e-8] + 1e-9)


def test_empty_model_is_impossible():
    with pytest.raises(ValueError):
        SvcModel(np.zeros((0, 2)), [], 0.0, KernelSpec.linear())


def test_training_is_deterministic():
    rng = np.random.default_rng(8)
    X = rng.uniform(size=(200, 3))
    y = np.where(X.sum(axis=1) + 0.2 * rng.normal(size=200) > 1.5, 1, -1)
    a = svc.train_svc(X, y, seed=1)
    b = svc.train_svc(X, y, seed=2)
    assert a == b
    assert a.training_meta["seed"] == 1


@pytest.mark.parametrize("selection", ["first", "second"])
def test_selection_rules_agree(selection):
    rng = np.random.default_rng(9)
    X = rng.uniform(size=(150, 2))
    y = np.where(rng.uniform(size=150) < 0.3 + 0.4 * X[:, 0], 1, -1)
    K = svc.kernel_matrix(KernelSpec.rbf(2.0), X, X)
    ref = svc.smo_solve(K, y.astype(float), 5.0, tol=1e-9, selection="second").objective
    got = svc.smo_solve(K, y.astype(float), 5.0, tol=1e-9, selection=selection).objective
    assert got == pytest.approx(ref, abs=1e-6)


def test_non_convergence_warns():
    rng = np.random.default_rng(2)
    X = rng.uniform(size=(100, 2))
    y = np.where(rng.uniform(size=100) < 0.5, 1, -1)
    with pytest.warns(NonConvergence):
        m = svc.train_svc(X, y, Hyperparams(c=100.0, kkt_tol=1e-12, max_passes=1))
    assert not m.training_meta["converged"]


def test_lipschitz_bound_holds():
    rng = np.random.default_rng(10)
    X = rng.uniform(size=(80, 2))
    y = np.where(X[:, 0] > X[:, 1], 1, -1)
    for k in (KernelSpec.rbf(3.0), KernelSpec.linear()):
        m = svc.train_svc(X, y, Hyperparams(kernel=k, c=10.0))
        L = svc.lipschitz_bound(m)
        a, b = rng.uniform(-1, 2, size=(500, 2)), rng.uniform(-1, 2, size=(500, 2))
        ratio = np.abs(svc.decision_values(m, a) - svc.decision_values(m, b)) / np.linalg.norm(a - b, axis=1)
        assert ratio.max() <= L + 1e-9


def test_json_round_trip(tmp_path):
    m = _two_point()
    p = tmp_path / "m.json"
    svc.save_model(m, p)
    back = svc.load_model(p)
    assert back == m
    assert svc.decision_value(back, [0.25]) == svc.decision_value(m, [0.25])
    hp = Hyperparams(kernel=KernelSpec.rbf(0.3), c=2.0, selection="first")
    assert Hyperparams.from_json(hp.to_json()) == hp


def test_predict_dimension_check():
    with pytest.raises(DimensionMismatch):
        svc.decision_value(_two_point(), [0.1, 0.2])
