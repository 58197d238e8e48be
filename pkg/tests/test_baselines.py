import math

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from models.baselines import KnnModel, gnb_fit, gnb_predict, knn_predict
from models.normalizer import FeatureNormalizer
from utils.errors import ValidationError


def embed(points):
    """2-D points placed in the first two of 36 features"""
    points = np.asarray(points, dtype=np.float64)
    out = np.zeros((points.shape[0], 36))
    out[:, :2] = points
    return out


def test_knn_exact_match_with_k1():
    X = np.random.default_rng(0).normal(size=(10, 36))
    y = np.arange(10) % 8
    model = KnnModel.fit(X, y, k=1)
    scores = knn_predict(model, X[4])
    assert scores[y[4]] == 1.0
    assert scores.sum() == 1.0


def test_knn_majority_of_three():
    points = [(0, 0), (1, 0), (0, 1), (5, 5), (6, 5), (5, 6), (0.5, 0.5)]
    labels = [2, 2, 4, 4, 4, 4, 6]
    model = KnnModel.fit(embed(points), labels, k=3)
    # nearest to (0.2, 0.2): (0,0), (0.5,0.5), then (1,0) ahead of the equally distant (0,1)
    scores = knn_predict(model, embed([(0.2, 0.2)])[0])
    np.testing.assert_allclose(scores, np.bincount([2, 6, 2], minlength=8) / 3)
    assert int(np.argmax(scores)) == 2


def test_knn_vote_tie_goes_to_smallest_class():
    model = KnnModel.fit(embed([(0, 0), (2, 0)]), [5, 3], k=2)
    scores = knn_predict(model, embed([(1, 0)])[0])
    assert scores[3] == scores[5] == 0.5
    assert int(np.argmax(scores)) == 3


def test_knn_duplicated_training_set_with_even_k():
    gen = np.random.default_rng(3)
    X = gen.normal(size=(30, 36))
    y = gen.integers(0, 8, size=30)
    queries = gen.normal(size=(15, 36))
    single = KnnModel.fit(X, y, k=3)
    doubled = KnnModel.fit(np.concatenate([X, X]), np.concatenate([y, y]), k=6)
    np.testing.assert_array_equal(np.argmax(single.scores(queries), axis=1),
                                  np.argmax(doubled.scores(queries), axis=1))


def test_knn_k_larger_than_training_set_rejected():
    with pytest.raises(ValidationError):
        KnnModel.fit(np.zeros((3, 36)), [0, 1, 2], k=4)


@given(st.integers(0, 2 ** 16), st.integers(-4, 4))
def test_knn_invariant_to_common_rescaling(seed, power):
    gen = np.random.default_rng(seed)
    X = gen.normal(size=(40, 36))
    y = gen.integers(0, 8, size=40)
    queries = gen.normal(size=(10, 36))
    scale = 2.0 ** power
    base = KnnModel.fit(X, y, k=5)
    scaled = KnnModel.fit(X * scale, y, k=5)
    np.testing.assert_array_equal(np.argmax(base.scores(queries), axis=1),
                                  np.argmax(scaled.scores(queries * scale), axis=1))


def two_class_fixture():
    X = np.zeros((4, 36))
    X[:, 0] = [-2.0, -1.0, 1.0, 2.0]
    y = np.array([0, 0, 1, 1])
    return X, y


def test_gnb_symmetric_boundary_at_midpoint():
    X, y = two_class_fixture()
    model = gnb_fit(X, y, n_classes=2)
    at_mid = gnb_predict(model, np.zeros(36))
    assert at_mid[0] == pytest.approx(0.5, abs=1e-12)
    left, right = np.zeros(36), np.zeros(36)
    left[0], right[0] = -0.1, 0.1
    assert gnb_predict(model, left)[0] > 0.5 > gnb_predict(model, right)[0]


def test_gnb_single_point_per_class():
    X = np.random.default_rng(4).normal(size=(8, 36))
    model = gnb_fit(X, np.arange(8))
    assert np.all(model.variances > 0)
    for c in range(8):
        assert int(np.argmax(gnb_predict(model, X[c]))) == c


def test_gnb_missing_class_rejected():
    X = np.random.default_rng(0).normal(size=(7, 36))
    with pytest.raises(ValidationError):
        gnb_fit(X, np.arange(7))


def test_gnb_priors_and_posteriors_normalised():
    gen = np.random.default_rng(6)
    X = gen.normal(size=(50, 36))
    y = np.concatenate([np.arange(8), gen.integers(0, 8, size=42)])
    model = gnb_fit(X, y)
    assert model.priors.sum() == pytest.approx(1.0, abs=1e-12)
    posts = model.scores(gen.normal(size=(20, 36)))
    np.testing.assert_allclose(posts.sum(axis=1), 1.0, atol=1e-12)


def test_gnb_matches_direct_density_oracle():
    gen = np.random.default_rng(8)
    n_features = 3
    X = gen.normal(size=(20, n_features))
    y = np.array([0, 1, 2, 3] * 5)
    model = gnb_fit(X, y, n_classes=4)
    query = gen.normal(size=n_features) * 0.5

    joint = []
    for c in range(4):
        members = X[y == c]
        density = float(np.mean(y == c))
        for f in range(n_features):
            mu = members[:, f].mean()
            var = max(members[:, f].var(), 1e-9 * X.var(axis=0).max())
            density *= math.exp(-(query[f] - mu) ** 2 / (2 * var)) / math.sqrt(2 * math.pi * var)
        joint.append(density)
    expected = np.array(joint) / sum(joint)
    np.testing.assert_allclose(gnb_predict(model, query), expected, atol=1e-10)


def test_baselines_share_the_frozen_normalizer():
    X, y = two_class_fixture()
    normalizer = FeatureNormalizer.fit(np.random.default_rng(0).normal(size=(10, 36)))
    model = KnnModel.fit(X, y, k=1, normalizer=normalizer, n_classes=2)
    np.testing.assert_allclose(model.features, normalizer.transform(X))


def test_baselines_are_deterministic():
    gen = np.random.default_rng(9)
    X = gen.normal(size=(40, 36))
    y = np.concatenate([np.arange(8), gen.integers(0, 8, size=32)])
    q = gen.normal(size=(5, 36))
    np.testing.assert_array_equal(gnb_fit(X, y).scores(q), gnb_fit(X, y).scores(q))
    np.testing.assert_array_equal(KnnModel.fit(X, y).scores(q), KnnModel.fit(X, y).scores(q))


@pytest.mark.parametrize("labels", [
    np.r_[np.arange(8), -1],
    np.r_[np.arange(8), 8],
    np.r_[np.arange(8), 2.5],
    np.arange(8),
])
def test_gnb_rejects_bad_labels(labels):
    X = np.random.default_rng(1).normal(size=(9, 36))
    with pytest.raises(ValidationError):
        gnb_fit(X, labels)


def test_knn_rejects_labels_outside_class_range():
    with pytest.raises(ValidationError):
        KnnModel.fit(np.zeros((2, 36)), [0, 9], k=1)
    with pytest.raises(ValidationError):
        KnnModel.fit(np.zeros((2, 36)), [0.0, 1.5], k=1)
