"""K-means over sparse TF-IDF vectors and cluster-restricted ranked search.

Fitting uses Lloyd's iteration with k-means++ seeding and squared Euclidean
distance. Ranking inside the selected cluster(s) uses cosine similarity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from privshard.vectors import TfIdfVector, cosine_similarity

SSE_RTOL = 1e-9


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignment: np.ndarray
    iterations_run: int
    final_sse: float
    seed: int
    sse_history: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        self.assignment = np.asarray(self.assignment, dtype=np.int64)
        self._centroid_sq = np.einsum("ij,ij->i", self.centroids, self.centroids)
        self._members = [np.flatnonzero(self.assignment == c).tolist() for c in range(self.k)]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def members(self, cluster: int) -> list[int]:
        return self._members[cluster]

    def cluster_sizes(self) -> list[int]:
        return [len(m) for m in self._members]

    def distances(self, q: TfIdfVector) -> np.ndarray:
        """Squared Euclidean distance from ``q`` to every centroid."""
        ids = [t for t in q.weights if t < self.dim]
        w = np.fromiter((q.weights[t] for t in ids), dtype=np.float64, count=len(ids))
        cross = self.centroids[:, ids] @ w if ids else np.zeros(self.k)
        q_sq = float(np.dot(w, w))
        return np.maximum(self._centroid_sq - 2.0 * cross + q_sq, 0.0)


def to_matrix(vectors: Sequence[TfIdfVector], dim: int | None = None) -> sp.csr_matrix:
    if dim is None:
        dim = 1 + max((max(v.weights, default=-1) for v in vectors), default=-1)
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for v in vectors:
        for t, w in v.weights.items():
            if t >= dim:
                raise ValueError(f"term id {t} outside dimension {dim}")
            indices.append(t)
            data.append(w)
        indptr.append(len(indices))
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), max(dim, 1)), dtype=np.float64)


def _sq_distances(X: sp.csr_matrix, row_sq: np.ndarray, C: np.ndarray) -> np.ndarray:
    cross = np.asarray(X @ C.T)
    c_sq = np.einsum("ij,ij->i", C, C)
    return np.maximum(row_sq[:, None] - 2.0 * cross + c_sq[None, :], 0.0)


def _kmeans_pp(X: sp.csr_matrix, row_sq: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    closest = _sq_distances(X, row_sq, X[chosen[0]].toarray())[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a chosen center; pick any unused one
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(free[rng.integers(len(free))])
        chosen.append(idx)
        closest = np.minimum(closest, _sq_distances(X, row_sq, X[idx].toarray())[:, 0])
    return X[chosen].toarray()


def _update_centroids(X: sp.csr_matrix, labels: np.ndarray, k: int, d2: np.ndarray) -> np.ndarray:
    n = X.shape[0]
    onehot = sp.csr_matrix((np.ones(n), (labels, np.arange(n))), shape=(k, n))
    counts = np.asarray(onehot.sum(axis=1)).ravel()
    sums = np.asarray((onehot @ X).todense())
    C = sums / np.maximum(counts, 1)[:, None]
    empty = np.flatnonzero(counts == 0)
    if len(empty):
        # reseed each empty cluster at the point farthest from its own centroid
        own = d2[np.arange(n), labels]
        order = np.argsort(-own, kind="stable")
        for c, idx in zip(empty, order):
            C[c] = X[idx].toarray()[0]
    return C


def kmeans_fit(
    vectors: Sequence[TfIdfVector],
    k: int,
    max_iter: int = 100,
    seed: int = 0,
    dim: int | None = None,
) -> ClusterModel:
    """Cluster ``vectors`` into ``k`` groups.

    Deterministic for a given ``(vectors, k, max_iter, seed)``. Stops when an
    iteration leaves every assignment unchanged or after ``max_iter``
    centroid updates. The SSE after each assignment step is recorded in
    ``sse_history`` and checked to be non-increasing.
    """
    n = len(vectors)
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of vectors ({n})")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")

    X = to_matrix(vectors, dim)
    row_sq = np.asarray(X.multiply(X).sum(axis=1)).ravel()
    rng = np.random.default_rng(seed)
    C = _kmeans_pp(X, row_sq, k, rng)

    d2 = _sq_distances(X, row_sq, C)
    labels = d2.argmin(axis=1)
    history = [float(d2[np.arange(n), labels].sum())]
    iterations = 0
    for _ in range(max_iter):
        C = _update_centroids(X, labels, k, d2)
        iterations += 1
        d2 = _sq_distances(X, row_sq, C)
        new_labels = d2.argmin(axis=1)
        sse = float(d2[np.arange(n), new_labels].sum())
        prev = history[-1]
        assert sse <= prev + SSE_RTOL * max(1.0, prev), f"SSE increased: {prev} -> {sse}"
        history.append(sse)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    return ClusterModel(k, C, labels, iterations, history[-1], seed, history)


def assign_cluster(q: TfIdfVector, model: ClusterModel) -> int:
    """Nearest centroid to ``q``; the lowest id wins ties."""
    return int(np.argmin(model.distances(q)))


def nearest_clusters(q: TfIdfVector, model: ClusterModel, probe: int = 1) -> list[int]:
    d = model.distances(q)
    order = np.lexsort((np.arange(model.k), d))
    return [int(c) for c in order[: max(1, probe)]]


def _rank(q: TfIdfVector, candidates, corpus: Sequence[TfIdfVector], top_n: int, stats: dict | None):
    scored = []
    for doc_id in candidates:
        s = cosine_similarity(q, corpus[doc_id])
        if s > 0.0:
            scored.append((doc_id, s))
    if stats is not None:
        stats["evaluations"] = stats.get("evaluations", 0) + len(candidates)
    scored.sort(key=lambda r: (-r[1], r[0]))
    return scored[:top_n]


def ranked_search(
    q: TfIdfVector,
    model: ClusterModel,
    corpus: Sequence[TfIdfVector],
    top_n: int = 10,
    probe: int = 1,
    stats: dict | None = None,
) -> list[tuple[int, float]]:
    """Score only the documents in the ``probe`` clusters nearest to ``q``.

    Results are ``(doc_id, score)`` sorted by descending score, then
    ascending doc id. Documents with zero similarity are not returned.
    If ``stats`` is given, ``stats["evaluations"]`` is incremented by the
    number of cosine evaluations performed.
    """
    if top_n < 1:
        raise ValueError("top_n must be at least 1")
    candidates: list[int] = []
    for c in nearest_clusters(q, model, probe):
        candidates.extend(model.members(c))
    if probe > 1:
        candidates.sort()
    return _rank(q, candidates, corpus, top_n, stats)


def full_scan(
    q: TfIdfVector,
    corpus: Sequence[TfIdfVector],
    top_n: int = 10,
    stats: dict | None = None,
) -> list[tuple[int, float]]:
    """Unclustered baseline: score every document."""
    if top_n < 1:
        raise ValueError("top_n must be at least 1")
    return _rank(q, range(len(corpus)), corpus, top_n, stats)
