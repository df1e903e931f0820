import numpy as np
import scipy.sparse as sp
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_partition
from privshard.clustering import (
    ClusterModel,
    _update_centroids,
    assign_cluster,
    full_scan,
    kmeans_fit,
    nearest_clusters,
    ranked_search,
)
from privshard.vectors import TfIdfVector, fit_vocabulary, tfidf_vector

POINTS = [0.0, 0.1, 10.0, 10.1]


def one_d(points):
    return [TfIdfVector({0: p}) for p in points]


def partition(model):
    groups = {}
    for i, c in enumerate(model.assignment):
        groups.setdefault(int(c), []).append(i)
    return sorted(groups.values())


def test_one_d_matches_brute_force():
    sse, labels = brute_force_partition(POINTS, 2)
    expected = sorted(
        [[i for i, l in enumerate(labels) if l == c] for c in set(labels)]
    )
    assert expected == [[0, 1], [2, 3]]
    for seed in range(10):
        model = kmeans_fit(one_d(POINTS), 2, seed=seed)
        assert partition(model) == expected
        assert sorted(model.centroids[:, 0]) == pytest.approx([0.05, 10.05], abs=1e-12)
        assert model.final_sse == pytest.approx(sse, abs=1e-9)


def test_k_one_is_mean():
    vs = [TfIdfVector({0: 1.0, 1: 2.0}), TfIdfVector({1: 4.0}), TfIdfVector({2: 3.0})]
    model = kmeans_fit(vs, 1, seed=0)
    assert set(model.assignment) == {0}
    assert model.centroids[0] == pytest.approx([1 / 3, 2.0, 1.0])


def test_k_equals_n_gives_zero_sse():
    vs = one_d([0.0, 1.0, 5.0, 9.0, 20.0])
    model = kmeans_fit(vs, 5, seed=4)
    assert len(set(model.assignment)) == 5
    assert model.final_sse == pytest.approx(0.0, abs=1e-12)


def test_argument_errors():
    vs = one_d(POINTS)
    with pytest.raises(ValueError):
        kmeans_fit(vs, 5)
    with pytest.raises(ValueError):
        kmeans_fit(vs, 0)
    with pytest.raises(ValueError):
        kmeans_fit(vs, 2, max_iter=0)


def test_duplicate_points_still_seed_k_centers():
    model = kmeans_fit(one_d([1.0] * 6), 3, seed=2)
    assert model.k == 3
    assert model.final_sse == pytest.approx(0.0)


points_2d = st.lists(
    st.tuples(st.floats(0, 10, allow_nan=False), st.floats(0, 10, allow_nan=False)),
    min_size=3,
    max_size=40,
)


@settings(max_examples=60)
@given(points_2d, st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_sse_monotone_and_nearest_assignment(pts, k, seed):
    k = min(k, len(pts))
    vs = [TfIdfVector({0: x, 1: y}) for x, y in pts]
    model = kmeans_fit(vs, k, seed=seed, max_iter=50)
    hist = model.sse_history
    assert all(b <= a + 1e-9 * max(1.0, a) for a, b in zip(hist, hist[1:]))
    X = np.array(pts)
    d2 = ((X[:, None, :] - model.centroids[None, :, :]) ** 2).sum(axis=2)
    for i, c in enumerate(model.assignment):
        assert d2[i, c] <= d2[i].min() + 1e-9


def test_deterministic(corpus):
    texts = [d.text for d in corpus[:120]]
    v = fit_vocabulary(texts)
    vs = [tfidf_vector(t, v) for t in texts]
    a = kmeans_fit(vs, 6, seed=17)
    b = kmeans_fit(vs, 6, seed=17)
    assert np.array_equal(a.assignment, b.assignment)
    assert np.array_equal(a.centroids, b.centroids)
    assert a.sse_history == b.sse_history


def test_empty_cluster_repair_keeps_k_clusters():
    # three tight groups; k=4 forces at least one reseed when groups collapse
    pts = [0.0, 0.0, 0.0, 5.0, 5.0, 5.0, 9.0, 9.0, 9.5]
    for seed in range(20):
        model = kmeans_fit(one_d(pts), 4, seed=seed)
        assert all(size > 0 for size in model.cluster_sizes())
        assert model.final_sse <= model.sse_history[0] + 1e-12


def test_empty_cluster_reseeded_at_farthest_point():
    X = sp.csr_matrix(np.array([[0.0], [1.0], [10.0]]))
    labels = np.array([0, 0, 0])
    d2 = np.array([[0.0, 100.0], [1.0, 81.0], [100.0, 0.0]])
    C = _update_centroids(X, labels, 2, d2)
    assert C[:, 0].tolist() == pytest.approx([11 / 3, 10.0])


def _model(centroids, assignment=None):
    c = np.array(centroids, dtype=float)
    if assignment is None:
        assignment = list(range(len(c)))
    return ClusterModel(len(c), c, assignment, 0, 0.0, 0)


def test_assign_cluster_rules():
    m = _model([[1.0, 0.0], [0.0, 3.0], [2.0, 2.0]])
    assert assign_cluster(TfIdfVector({1: 3.0}), m) == 1
    assert assign_cluster(TfIdfVector({}), m) == 0
    tie = _model([[1.0, 0.0], [0.0, 1.0]])
    assert assign_cluster(TfIdfVector({0: 1.0, 1: 1.0}), tie) == 0
    assert assign_cluster(TfIdfVector({}), _model([[0.0, 2.0], [2.0, 0.0]])) == 0
    assert nearest_clusters(TfIdfVector({1: 3.0}), m, probe=2) == [1, 2]


def _two_topic_corpus():
    a = ["alpha beta gamma", "alpha beta delta", "beta gamma delta alpha", "gamma alpha"]
    b = ["omega sigma tau", "sigma tau rho", "omega rho tau", "rho sigma"]
    texts = a + b
    v = fit_vocabulary(texts)
    return texts, v, [tfidf_vector(t, v) for t in texts]


def test_ranked_search_separable_topics():
    texts, v, vs = _two_topic_corpus()
    model = kmeans_fit(vs, 2, seed=1)
    topic_a = model.assignment[0]
    assert set(model.assignment[:4]) == {topic_a}
    assert topic_a not in set(model.assignment[4:])
    q = tfidf_vector("alpha gamma", v)
    stats = {}
    got = ranked_search(q, model, vs, top_n=10, stats=stats)
    assert got and all(doc < 4 for doc, _ in got)
    assert stats["evaluations"] <= len(model.members(topic_a))
    assert got[0][0] == full_scan(q, vs, 1)[0][0]


def test_ranked_search_self_query():
    texts, v, vs = _two_topic_corpus()
    model = kmeans_fit(vs, 2, seed=1)
    for i, t in enumerate(texts):
        top = ranked_search(tfidf_vector(t, v), model, vs, top_n=1)
        assert top[0] == (i, pytest.approx(1.0, abs=1e-9))


def test_single_cluster_equals_full_scan(corpus):
    texts = [d.text for d in corpus]
    v = fit_vocabulary(texts)
    vs = [tfidf_vector(t, v) for t in texts]
    model = kmeans_fit(vs, 1, seed=0)
    for t in texts[:30]:
        q = tfidf_vector(" ".join(t.split()[:4]), v)
        assert ranked_search(q, model, vs, 15) == full_scan(q, vs, 15)


def test_ordering_and_limits(corpus):
    texts = [d.text for d in corpus]
    v = fit_vocabulary(texts)
    vs = [tfidf_vector(t, v) for t in texts]
    model = kmeans_fit(vs, 4, seed=0)
    q = tfidf_vector("invoice payment policy", v)
    res = ranked_search(q, model, vs, top_n=7, probe=4)
    assert len(res) <= 7
    scores = [s for _, s in res]
    assert scores == sorted(scores, reverse=True)
    assert res == full_scan(q, vs, 7)
    with pytest.raises(ValueError):
        ranked_search(q, model, vs, top_n=0)


def test_empty_cluster_gives_empty_result():
    vs = one_d([1.0, 2.0])
    model = ClusterModel(2, np.array([[1.5], [100.0]]), [0, 0], 1, 0.5, 0)
    assert ranked_search(TfIdfVector({0: 100.0}), model, vs, 5) == []
