import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import DISK
from steklov.estimator import SteklovSolver
from steklov.geometry import build_curve


def test_params_round_trip():
    est = SteklovSolver(basis_order=16, k_max=6)
    assert est.get_params() == {"basis_order": 16, "svd_tol": 1e-12, "k_max": 6, "cluster_tol": 1e-5}
    est.set_params(k_max=8)
    assert clone(est).get_params()["k_max"] == 8


def test_fit_spec_and_curve():
    a = SteklovSolver(basis_order=16).fit(DISK)
    b = SteklovSolver(basis_order=16).fit(build_curve(DISK))
    assert np.allclose(a.eigenvalues_, [0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5], atol=1e-8)
    assert np.array_equal(a.eigenvalues_, b.eigenvalues_)
    assert a.n_features_in_ == 64 and a.eigenfields().shape == (11, 64)


def test_transform_applies_dtn():
    est = SteklovSolver(basis_order=16).fit(DISK)
    th = est.curve_.theta
    X = np.array([np.cos(2 * th), np.sin(3 * th)])
    out = est.transform(X)
    assert np.allclose(out, [2 * np.cos(2 * th), 3 * np.sin(3 * th)], atol=1e-9)


def test_transform_validation():
    with pytest.raises(NotFittedError):
        SteklovSolver().transform(np.zeros((1, 64)))
    est = SteklovSolver(basis_order=16).fit(DISK)
    with pytest.raises(ValueError):
        est.transform(np.zeros((1, 32)))
    with pytest.raises(ValueError):
        est.transform(np.full((1, 64), np.nan))


def test_bad_input():
    with pytest.raises(TypeError):
        SteklovSolver().fit(np.zeros((4, 4)))
    with pytest.raises(TypeError):
        SteklovSolver().fit_transform(DISK)
