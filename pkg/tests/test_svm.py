import numpy as np
import pytest

import oracles
from dyskit import svm
from dyskit.errors import DimensionMismatch, EmptyDataset, ModelFormatError, SingleClassDataset
from dyskit.labels import ClassLabel
from dyskit.svm import KernelKind, KernelSpec, SvmTrainConfig, kernel_eval, kkt_violations, svm_train

D, F = ClassLabel.DYSFLUENT, ClassLabel.FLUENT
RBF = KernelSpec(KernelKind.RBF)


def linear_weights(model):
    return model.dual_coeffs @ model.support_vectors


def test_kernels():
    assert kernel_eval(KernelSpec(), [1, 2], [3, 4]) == 11.0
    assert kernel_eval(KernelSpec(KernelKind.RBF, 0.5), [0, 0], [1, 1]) == pytest.approx(np.exp(-1))
    assert kernel_eval(RBF, [1, 2], [1, 2]) == 1.0
    assert RBF.resolve(4).gamma == 0.25
    with pytest.raises(DimensionMismatch):
        kernel_eval(KernelSpec(), [1], [1, 2])
    with pytest.raises(ValueError):
        KernelSpec(KernelKind.RBF, -1.0)


def test_two_point_analytic():
    # w = 2/|x2 - x1| and the boundary sits at the midpoint
    m = svm_train([[0.0], [2.0]], [-1, 1], SvmTrainConfig(C=10.0))
    assert linear_weights(m)[0] == pytest.approx(1.0, abs=1e-2)
    assert m.bias == pytest.approx(-1.0, abs=1e-2)
    assert m.decision([1.0]) == pytest.approx(0.0, abs=1e-2)


def test_unit_gap_case():
    m = svm_train([[1.0], [2.0]], [-1, 1], SvmTrainConfig(C=10.0))
    assert linear_weights(m)[0] == pytest.approx(2.0, abs=1e-2)
    assert m.bias == pytest.approx(-3.0, abs=1e-2)


def test_dual_matches_grid_search():
    for X, y, C in oracles.tiny_svm_cases():
        K = X @ X.T
        res = svm.smo_solve(K, y, C)
        ref, _ = oracles.grid_dual_max(K, y, C)
        assert svm.dual_objective(K, y, res.alpha) == pytest.approx(ref, abs=1e-3)


def test_kkt_and_feasibility(rng):
    for _ in range(20):
        n = int(rng.integers(4, 40))
        X = rng.normal(size=(n, 3))
        y = np.where(X[:, 0] + 0.5 * rng.normal(size=n) > 0, 1.0, -1.0)
        y[:2] = [1, -1]
        cfg = SvmTrainConfig(C=float(rng.choice([0.1, 1, 10])), seed=int(rng.integers(100)))
        res = svm.smo_solve(X @ X.T, y, cfg.C, cfg.tolerance)
        assert res.converged
        assert np.all(res.alpha >= 0) and np.all(res.alpha <= cfg.C)
        assert abs(res.alpha @ y) <= 1e-9
        viol = kkt_violations(X @ X.T, y, res.alpha, res.bias, cfg.C)
        assert viol.max() <= cfg.tolerance


def test_rbf_xor():
    X = [[0, 0], [1, 1], [0, 1], [1, 0]]
    y = [-1, -1, 1, 1]
    m = svm_train(X, y, SvmTrainConfig(C=10.0, kernel=RBF))
    assert [np.sign(m.decision(x)) for x in X] == y


def test_hard_margin_separable(rng):
    X = np.vstack([rng.normal(size=(15, 2)) + 3, rng.normal(size=(15, 2)) - 3])
    y = np.array([1.0] * 15 + [-1.0] * 15)
    m = svm_train(X, y, SvmTrainConfig(C=1e6))
    assert np.all(y * m.decision(X) >= 1 - 1e-2)


def test_label_swap_negates_decision(rng):
    X = rng.normal(size=(20, 3))
    labels = [D if v > 0 else F for v in X[:, 1]]
    a = svm.svm_fit(X, labels, positive_label=D)
    b = svm.svm_fit(X, labels, positive_label=F)
    q = rng.normal(size=(10, 3))
    assert np.allclose(a.decision(q), -b.decision(q), atol=1e-2)
    for x in q:
        if abs(a.decision(x)) > 1e-2:
            assert a.classify(x) is b.classify(x)


def test_zero_decision_goes_positive():
    m = svm.SvmModel(np.array([[1.0]]), np.array([1.0]), -1.0, KernelSpec())
    assert m.decision([1.0]) == 0.0
    assert m.classify([1.0]) is D


def test_training_errors():
    with pytest.raises(EmptyDataset):
        svm_train(np.zeros((0, 2)), [])
    with pytest.raises(SingleClassDataset):
        svm_train([[0], [1]], [1, 1])
    with pytest.raises(ValueError):
        svm_train([[0], [1]], [0, 1])
    with pytest.raises(ValueError):
        SvmTrainConfig(C=0)


def test_serialization_round_trip(rng):
    X = rng.normal(size=(20, 4))
    m = svm.svm_fit(X, [D, F] * 10, SvmTrainConfig(kernel=RBF))
    back = svm.loads(svm.dumps(m))
    q = rng.normal(size=(5, 4))
    assert np.array_equal(back.decision(q), m.decision(q))
    assert back.kernel == m.kernel and back.converged == m.converged
    with pytest.raises(ModelFormatError):
        svm.loads("DYSKIT-SVM-v1\nkernel linear\n")
    with pytest.raises(DimensionMismatch):
        back.decision([1.0])


def test_seeded_training_is_reproducible(rng):
    X = rng.normal(size=(30, 3))
    y = np.where(X[:, 0] > 0, 1.0, -1.0)
    a = svm_train(X, y, SvmTrainConfig(seed=3))
    b = svm_train(X, y, SvmTrainConfig(seed=3))
    assert np.array_equal(a.dual_coeffs, b.dual_coeffs) and a.bias == b.bias


def test_four_point_boundary():
    X = [[0, 0], [0, 1], [2, 0], [2, 1]]
    m = svm_train(X, [-1, -1, 1, 1], SvmTrainConfig(C=10.0))
    assert m.decision([2, 0.5]) > 0
    for yy in (-1.0, 0.3, 4.0):
        assert m.decision([1.0, yy]) == pytest.approx(0.0, abs=1e-2)


def test_grid_oracle_hits_analytic_optimum():
    # alpha = (1/2, 1/2), w = 1, so the dual value is 1 - 1/2
    K = np.array([[0.0, 0.0], [0.0, 4.0]])
    value, alpha = oracles.grid_dual_max(K, [-1.0, 1.0], 2.0)
    assert value == pytest.approx(0.5, abs=1e-6)
    assert np.allclose(alpha, [0.5, 0.5], atol=1e-4)
