"""UMAP dimensionality reduction.

Stages: exact kNN graph -> per-point (rho, sigma) calibration -> directed
membership weights -> fuzzy union -> seeded SGD layout from uniform noise.
Everything is a pure function of the input matrix and the config seed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from topicctl.errors import ConfigError

log = logging.getLogger(__name__)

# layout constants
GRADIENT_CLIP = 4.0
INIT_HALF_WIDTH = 10.0
REPULSION_EPS = 1e-3
# smooth-kNN constants
SMOOTH_KNN_ITERS = 64
SMOOTH_KNN_TOL = 1e-5
SIGMA_FLOOR = 1e-3
SIGMA_ALL_ZERO = 1.0
# curve fit constants
AB_FIT_POINTS = 300
AB_FIT_MAX_D = 3.0
AB_GN_ITERS = 100

METRICS = ("cosine", "euclidean")


@dataclass
class LayoutConfig:
    n_neighbors: int = 15
    min_dist: float = 0.1
    n_components: int = 2
    metric: str = "cosine"
    n_epochs: int = 200
    negative_sample_rate: int = 5
    initial_learning_rate: float = 1.0
    seed: int = 42

    def validate(self) -> None:
        if self.n_neighbors < 2:
            raise ConfigError("n_neighbors must be >= 2")
        if not 0 <= self.min_dist < 2:
            raise ConfigError("min_dist must lie in [0, 2)")
        if self.n_components < 1:
            raise ConfigError("n_components must be >= 1")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}")
        if self.n_epochs < 1 or self.negative_sample_rate < 0:
            raise ConfigError("n_epochs must be >= 1 and negative_sample_rate >= 0")
        if not np.isfinite(self.initial_learning_rate):
            raise ConfigError("initial_learning_rate must be finite")


@dataclass(frozen=True)
class KnnGraph:
    indices: np.ndarray  # (n, k) int64, self excluded
    distances: np.ndarray  # (n, k) float64, ascending per row


# ---------------------------------------------------------------------------
# nearest neighbours


def pairwise_distances(X: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if metric == "euclidean":
        return cdist(X, X)
    if metric == "cosine":
        norms = np.linalg.norm(X, axis=1)
        zero = np.flatnonzero(norms == 0)
        if zero.size:
            raise ConfigError(f"row {zero[0]} is a zero vector; cosine distance undefined")
        Xn = X / norms[:, None]
        D = 1.0 - Xn @ Xn.T
        np.clip(D, 0.0, 2.0, out=D)
        D = (D + D.T) / 2
        np.fill_diagonal(D, 0.0)
        return D
    raise ConfigError(f"unknown metric {metric!r}")


def knn_graph(X: np.ndarray, k: int, metric: str = "cosine") -> KnnGraph:
    """Exact k nearest other points; distance ties go to the lower index."""
    X = np.asarray(X)
    n = X.shape[0]
    if n < k + 1:
        raise ConfigError(f"need at least k+1={k + 1} points, got {n}")
    D = pairwise_distances(X, metric)
    np.fill_diagonal(D, np.inf)
    order = np.argsort(D, axis=1, kind="stable")[:, :k]
    return KnnGraph(order.astype(np.int64), np.take_along_axis(D, order, axis=1))


# ---------------------------------------------------------------------------
# calibration


def smooth_knn_rows(distances: np.ndarray, k: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`smooth_knn` over the rows of ``distances``."""
    distances = np.atleast_2d(np.asarray(distances, dtype=np.float64))
    n, width = distances.shape
    k = width if k is None else k
    if k < 2:
        raise ConfigError("smooth_knn needs k >= 2")
    target = np.log2(k)
    rho = distances[:, 0].copy()
    shifted = np.maximum(distances - rho[:, None], 0.0)

    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    mid = np.ones(n)
    active = np.ones(n, dtype=bool)
    for _ in range(SMOOTH_KNN_ITERS):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        psum = np.exp(-shifted[idx] / mid[idx, None]).sum(axis=1)
        done = np.abs(psum - target) < SMOOTH_KNN_TOL
        active[idx[done]] = False
        idx, psum = idx[~done], psum[~done]
        over = psum > target
        up, down = idx[over], idx[~over]
        hi[up] = mid[up]
        mid[up] = (lo[up] + hi[up]) / 2
        lo[down] = mid[down]
        bounded = np.isfinite(hi[down])
        mid[down] = np.where(bounded, (lo[down] + hi[down]) / 2, mid[down] * 2)

    sigma = np.maximum(mid, SIGMA_FLOOR)
    sigma[np.all(distances == 0, axis=1)] = SIGMA_ALL_ZERO
    return rho, sigma


def smooth_knn(row_distances, k: int) -> tuple[float, float]:
    """Return ``(rho, sigma)`` for one ascending row of neighbour distances.

    ``rho`` is the nearest-neighbour distance; ``sigma`` is bisected until
    ``sum(exp(-max(0, d - rho) / sigma)) == log2(k)`` within 1e-5.
    """
    rho, sigma = smooth_knn_rows(np.asarray(row_distances, dtype=np.float64)[None, :], k)
    return float(rho[0]), float(sigma[0])


def membership_strengths(knn: KnnGraph, k: int | None = None) -> sp.csr_matrix:
    n, width = knn.indices.shape
    rho, sigma = smooth_knn_rows(knn.distances, k or width)
    w = np.exp(-np.maximum(knn.distances - rho[:, None], 0.0) / sigma[:, None])
    rows = np.repeat(np.arange(n), width)
    directed = sp.csr_matrix((w.ravel(), (rows, knn.indices.ravel())), shape=(n, n))
    directed.eliminate_zeros()
    return directed


def fuzzy_union(directed: sp.spmatrix) -> sp.csr_matrix:
    """Symmetrise with the probabilistic t-conorm ``a + b - a*b``."""
    A = sp.csr_matrix(directed, dtype=np.float64)
    A.setdiag(0.0)
    A.eliminate_zeros()
    At = A.T.tocsr()
    W = (A + At - A.multiply(At)).tocsr()
    W.eliminate_zeros()
    W.sort_indices()
    return W


def fuzzy_graph(X: np.ndarray, n_neighbors: int, metric: str = "cosine") -> sp.csr_matrix:
    return fuzzy_union(membership_strengths(knn_graph(X, n_neighbors, metric), n_neighbors))


# ---------------------------------------------------------------------------
# output-space curve


def _curve(d: np.ndarray, a: float, b: float) -> np.ndarray:
    return 1.0 / (1.0 + a * d ** (2 * b))


def ab_target(min_dist: float) -> tuple[np.ndarray, np.ndarray]:
    d = np.linspace(0.0, AB_FIT_MAX_D, AB_FIT_POINTS)
    return d, np.where(d <= min_dist, 1.0, np.exp(-(d - min_dist)))


def fit_ab(min_dist: float) -> tuple[float, float]:
    """Least-squares ``(a, b)`` for ``1 / (1 + a d^(2b))`` against the min_dist target.

    Coarse grid search, then damped Gauss-Newton on ``(log a, b)``.
    """
    if not 0 <= min_dist < 2:
        raise ConfigError("min_dist must lie in [0, 2)")
    d, y = ab_target(min_dist)
    pos = d > 0
    logd = np.zeros_like(d)
    logd[pos] = np.log(d[pos])

    def sse(la, b):
        r = _curve(d, np.exp(la), b) - y
        return float(r @ r)

    grid_la = np.linspace(np.log(0.05), np.log(50.0), 80)
    grid_b = np.linspace(0.2, 3.0, 80)
    best = min((sse(la, b), la, b) for la in grid_la for b in grid_b)
    _, la, b = best

    damping = 1e-3
    for _ in range(AB_GN_ITERS):
        a = np.exp(la)
        p = np.zeros_like(d)
        p[pos] = d[pos] ** (2 * b)
        f = 1.0 / (1.0 + a * p)
        r = f - y
        # df/dla = -a p f^2 ; df/db = -a p 2 log d f^2
        J = np.column_stack([-a * p * f * f, -a * p * 2 * logd * f * f])
        g = J.T @ r
        H = J.T @ J
        step = np.linalg.solve(H + damping * np.diag(np.diag(H) + 1e-12), -g)
        cand = (la + step[0], b + step[1])
        if sse(*cand) < r @ r:
            la, b = cand
            damping = max(damping / 3, 1e-9)
        else:
            damping *= 4
    return float(np.exp(la)), float(b)


# ---------------------------------------------------------------------------
# layout


def _epochs_per_sample(weights: np.ndarray) -> np.ndarray:
    return weights.max() / weights


@numba.njit(cache=True)
def _splitmix64(state):
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _clip(v, c):
    if v > c:
        return c
    if v < -c:
        return -c
    return v


@numba.njit(cache=True)
def _sgd(Y, head, tail, epochs_per_sample, a, b, n_epochs, neg_rate, lr0, clip, rng_state):
    n, dim = Y.shape
    n_edges = head.shape[0]
    epochs_per_neg = epochs_per_sample / neg_rate if neg_rate > 0 else epochs_per_sample * 0 + np.inf
    next_sample = epochs_per_sample.copy()
    next_neg = epochs_per_neg.copy()
    for epoch in range(n_epochs):
        alpha = lr0 * (1.0 - epoch / n_epochs)
        for e in range(n_edges):
            if next_sample[e] > epoch:
                continue
            i = head[e]
            j = tail[e]
            dist_sq = 0.0
            for d in range(dim):
                diff = Y[i, d] - Y[j, d]
                dist_sq += diff * diff
            coeff = 0.0
            if dist_sq > 0.0:
                coeff = -2.0 * a * b * dist_sq ** (b - 1.0) / (a * dist_sq ** b + 1.0)
            if not np.isfinite(coeff):
                return 1
            for d in range(dim):
                g = _clip(coeff * (Y[i, d] - Y[j, d]), clip)
                Y[i, d] += g * alpha
                Y[j, d] -= g * alpha
            next_sample[e] += epochs_per_sample[e]

            n_neg = 0
            if neg_rate > 0:
                n_neg = int((epoch - next_neg[e]) / epochs_per_neg[e])
            for _ in range(n_neg):
                k = np.int64(_splitmix64(rng_state) % np.uint64(n))
                if k == i:
                    continue
                dist_sq = 0.0
                for d in range(dim):
                    diff = Y[i, d] - Y[k, d]
                    dist_sq += diff * diff
                coeff = 0.0
                if dist_sq > 0.0:
                    coeff = 2.0 * b / ((REPULSION_EPS + dist_sq) * (a * dist_sq ** b + 1.0))
                if not np.isfinite(coeff):
                    return 1
                for d in range(dim):
                    if coeff > 0.0:
                        g = _clip(coeff * (Y[i, d] - Y[k, d]), clip)
                    else:
                        g = clip
                    Y[i, d] += g * alpha
            if neg_rate > 0:
                next_neg[e] += n_neg * epochs_per_neg[e]
    return 0


def initial_layout(n: int, n_components: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.uniform(-INIT_HALF_WIDTH, INIT_HALF_WIDTH, size=(n, n_components))


def optimize_layout(
    graph: sp.spmatrix,
    config: LayoutConfig,
    ab: tuple[float, float] | None = None,
) -> np.ndarray:
    """SGD layout of a symmetric fuzzy graph; deterministic given ``config.seed``.

    Edges are visited on a schedule proportional to their weight; each visit
    applies one attractive update and ``negative_sample_rate`` repulsive ones
    against uniformly drawn points.
    """
    n = graph.shape[0]
    if n < 2:
        raise ConfigError("layout needs at least 2 points")
    a, b = ab if ab is not None else fit_ab(config.min_dist)
    Y = initial_layout(n, config.n_components, config.seed)

    coo = sp.coo_matrix(graph)
    mask = coo.data > 0
    head = coo.row[mask].astype(np.int64)
    tail = coo.col[mask].astype(np.int64)
    weights = coo.data[mask].astype(np.float64)
    if weights.size == 0:
        return Y
    order = np.lexsort((tail, head))
    head, tail, weights = head[order], tail[order], weights[order]

    seed_words = np.random.SeedSequence(config.seed).generate_state(1, dtype=np.uint64)
    rng_state = np.array(seed_words, dtype=np.uint64)
    status = _sgd(
        Y, head, tail, _epochs_per_sample(weights), float(a), float(b),
        int(config.n_epochs), int(config.negative_sample_rate),
        float(config.initial_learning_rate), GRADIENT_CLIP, rng_state,
    )
    if status != 0 or not np.all(np.isfinite(Y)):
        raise FloatingPointError("non-finite gradient during layout optimisation")
    return Y


def reduce(X: np.ndarray, config: LayoutConfig) -> np.ndarray:
    """Embed the rows of ``X`` into ``config.n_components`` dimensions."""
    config.validate()
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise ConfigError("reduce needs at least 2 points")
    k = config.n_neighbors
    if k >= n:
        log.warning("n_neighbors=%d >= n=%d; using %d", k, n, n - 1)
        k = n - 1
    graph = fuzzy_union(membership_strengths(knn_graph(X, k, config.metric), max(k, 2)))
    return optimize_layout(graph, config)
