"""sklearn API tests for the estimator facade."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import cross_val_score
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from sklearn.datasets import make_blobs

from fedprobe.estimator import FederatedProbeClassifier


def blobs(seed=0):
    return make_blobs(n_samples=120, centers=3, n_features=8, cluster_std=0.5,
                      center_box=(-8.0, 8.0), random_state=seed)


def test_fit_predict_separable():
    X, y = blobs()
    clf = FederatedProbeClassifier(rounds=5, num_clients=4, random_state=0)
    clf.fit(X, y)
    assert clf.score(X, y) == 1.0


def test_classes_preserved_and_mapped():
    X, y = blobs()
    clf = FederatedProbeClassifier(rounds=3, num_clients=3, random_state=0)
    clf.fit(X, y + 10)
    assert list(clf.classes_) == [10, 11, 12]
    assert set(np.unique(clf.predict(X))) <= {10, 11, 12}


def test_get_set_params_and_clone():
    clf = FederatedProbeClassifier(rounds=7, lr=0.3)
    params = clf.get_params()
    assert params["rounds"] == 7 and params["lr"] == 0.3
    other = clone(clf).set_params(rounds=2)
    assert other.get_params()["rounds"] == 2
    assert clf.get_params()["rounds"] == 7


def test_not_fitted_errors():
    clf = FederatedProbeClassifier()
    with pytest.raises(NotFittedError):
        clf.predict(np.zeros((1, 3)))
    with pytest.raises(NotFittedError):
        clf.predict_proba(np.zeros((1, 3)))


def test_predict_proba_rows_sum_to_one():
    X, y = blobs()
    for method in ("lp_softmax", "ova_two_stage"):
        clf = FederatedProbeClassifier(method=method, rounds=3, num_clients=3,
                                       random_state=0).fit(X, y)
        proba = clf.predict_proba(X[:7])
        assert proba.shape == (7, 3)
        assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)


def test_feature_count_checked():
    X, y = blobs()
    clf = FederatedProbeClassifier(rounds=2, num_clients=2).fit(X, y)
    with pytest.raises(ValueError):
        clf.predict(X[:, :4])


def test_deterministic_in_random_state():
    X, y = blobs()
    a = FederatedProbeClassifier(rounds=3, num_clients=4, random_state=7).fit(X, y)
    b = FederatedProbeClassifier(rounds=3, num_clients=4, random_state=7).fit(X, y)
    assert np.array_equal(a.coef_, b.coef_)


def test_partition_parameter_accepted():
    X, y = blobs()
    clf = FederatedProbeClassifier(rounds=3, num_clients=3, partition="shard-1",
                                   random_state=0).fit(X, y)
    assert clf.score(X, y) > 0.9


def test_composes_with_sklearn_pipeline_and_cv():
    X, y = blobs()
    pipe = make_pipeline(
        StandardScaler(),
        FederatedProbeClassifier(rounds=3, num_clients=2, random_state=0),
    )
    scores = cross_val_score(pipe, X, y, cv=3)
    assert scores.mean() > 0.9


def test_single_class_rejected():
    X = np.zeros((5, 2))
    y = np.zeros(5, dtype=int)
    with pytest.raises(ValueError):
        FederatedProbeClassifier(rounds=1, num_clients=1).fit(X, y)
