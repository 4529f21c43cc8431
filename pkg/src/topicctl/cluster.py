"""HDBSCAN clustering, O(n^2) exact.

core distances -> mutual reachability -> Prim MST -> single-linkage
dendrogram -> condensed tree -> excess-of-mass (or leaf) selection.

Merges that happen at exactly the same distance are condensed as one
multi-way split: at such a level every component smaller than
``min_cluster_size`` falls out and, if two or more large components remain,
each becomes a new cluster. This makes the result independent of the order in
which tied MST edges were processed, so labels are permutation-equivariant.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from topicctl.errors import ConfigError

log = logging.getLogger(__name__)

LAMBDA_CAP = 1e12
SELECTIONS = ("eom", "leaf")


@dataclass
class ClusterConfig:
    min_cluster_size: int = 10
    min_samples: int | None = None
    selection: str = "eom"
    allow_single_cluster: bool = False

    def validate(self) -> None:
        if self.min_cluster_size < 2:
            raise ConfigError("min_cluster_size must be >= 2")
        if self.min_samples is not None and self.min_samples < 1:
            raise ConfigError("min_samples must be >= 1")
        if self.selection not in SELECTIONS:
            raise ConfigError(f"selection must be one of {SELECTIONS}")


@dataclass
class CondensedTree:
    """Rows ``(parent, child, lambda_val, child_size)``.

    Points are ``0..n-1``; clusters are numbered from ``n`` (the root) upward in
    breadth-first order, so a parent always has a smaller id than its children.
    """

    n_points: int
    parent: np.ndarray
    child: np.ndarray
    lambda_val: np.ndarray
    child_size: np.ndarray
    stability: dict[int, float] = field(default_factory=dict)

    @property
    def root(self) -> int:
        return self.n_points

    def cluster_ids(self) -> list[int]:
        kids = self.child[self.child >= self.n_points]
        return [self.root] + sorted(int(c) for c in kids)

    def child_clusters(self, c: int) -> list[int]:
        mask = (self.parent == c) & (self.child >= self.n_points)
        return sorted(int(x) for x in self.child[mask])

    def birth_lambda(self, c: int) -> float:
        if c == self.root:
            return 0.0
        return float(self.lambda_val[self.child == c][0])

    def parent_of(self) -> dict[int, int]:
        mask = self.child >= self.n_points
        return {int(c): int(p) for p, c in zip(self.parent[mask], self.child[mask])}

    def rows(self):
        return zip(self.parent.tolist(), self.child.tolist(), self.lambda_val.tolist(), self.child_size.tolist())

    def to_csv(self) -> str:
        lines = ["parent,child,lambda,size"]
        lines += [f"{p},{c},{lam!r},{s}" for p, c, lam, s in self.rows()]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# distances


def euclidean_distances(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return cdist(X, X)


def core_distances(X: np.ndarray, min_samples: int, D: np.ndarray | None = None) -> np.ndarray:
    """Distance from each point to its ``min_samples``-th nearest other point."""
    D = euclidean_distances(X) if D is None else D
    n = D.shape[0]
    if not 1 <= min_samples < n:
        raise ConfigError(f"min_samples must lie in [1, n-1] = [1, {n - 1}], got {min_samples}")
    off = D.copy()
    np.fill_diagonal(off, np.inf)
    return np.partition(off, min_samples - 1, axis=1)[:, min_samples - 1]


def mutual_reachability(d_ij: float, core_i: float, core_j: float) -> float:
    return max(core_i, core_j, d_ij)


def mutual_reachability_matrix(D: np.ndarray, core: np.ndarray) -> np.ndarray:
    M = np.maximum(D, np.maximum.outer(core, core))
    np.fill_diagonal(M, 0.0)
    return M


# ---------------------------------------------------------------------------
# tree construction


def minimum_spanning_tree(M: np.ndarray) -> np.ndarray:
    """Prim's algorithm on a dense symmetric weight matrix.

    Returns ``(n-1, 3)`` rows ``(u, v, w)`` with ``u < v``, sorted by
    ``(w, u, v)``. Among equal-weight candidates the edge with the
    lexicographically smaller endpoint pair is taken.
    """
    M = np.asarray(M, dtype=np.float64)
    n = M.shape[0]
    if n < 2:
        raise ConfigError("minimum spanning tree needs n >= 2")
    idx = np.arange(n)
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best_w = M[0].copy()
    best_lo = np.minimum(0, idx)
    best_hi = np.maximum(0, idx)
    edges = np.empty((n - 1, 3))
    for step in range(n - 1):
        out = np.flatnonzero(~in_tree)
        order = np.lexsort((best_hi[out], best_lo[out], best_w[out]))
        v = out[order[0]]
        edges[step] = (best_lo[v], best_hi[v], best_w[v])
        in_tree[v] = True
        w = M[v]
        lo, hi = np.minimum(v, idx), np.maximum(v, idx)
        better = (w < best_w) | (
            (w == best_w) & ((lo < best_lo) | ((lo == best_lo) & (hi < best_hi)))
        )
        better &= ~in_tree
        best_w[better] = w[better]
        best_lo[better] = lo[better]
        best_hi[better] = hi[better]
    order = np.lexsort((edges[:, 1], edges[:, 0], edges[:, 2]))
    return edges[order]


def build_hierarchy(mst: np.ndarray, n: int | None = None) -> np.ndarray:
    """Single-linkage merge tree from MST edges, scipy ``linkage`` layout.

    Row ``i`` creates node ``n + i`` from ``(left, right, distance, size)``.
    """
    mst = np.asarray(mst, dtype=np.float64)
    n = mst.shape[0] + 1 if n is None else n
    order = np.lexsort((mst[:, 1], mst[:, 0], mst[:, 2]))
    parent = np.arange(2 * n - 1)
    size = np.ones(2 * n - 1, dtype=np.int64)

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    linkage = np.empty((n - 1, 4))
    for i, e in enumerate(order):
        u, v, w = int(mst[e, 0]), int(mst[e, 1]), mst[e, 2]
        ru, rv = find(u), find(v)
        node = n + i
        parent[ru] = parent[rv] = node
        size[node] = size[ru] + size[rv]
        linkage[i] = (min(ru, rv), max(ru, rv), w, size[node])
    return linkage


def _lambda(distance: float) -> float:
    return LAMBDA_CAP if distance <= 0 else min(1.0 / distance, LAMBDA_CAP)


def condense_tree(linkage: np.ndarray, min_cluster_size: int) -> CondensedTree:
    linkage = np.asarray(linkage)
    n = linkage.shape[0] + 1
    root_node = 2 * n - 2

    def kids(node):
        row = linkage[node - n]
        return int(row[0]), int(row[1])

    def dist(node):
        return linkage[node - n, 2]

    def size(node):
        return 1 if node < n else int(linkage[node - n, 3])

    min_leaf = np.arange(2 * n - 1)
    for i in range(n - 1):
        min_leaf[n + i] = min(min_leaf[int(linkage[i, 0])], min_leaf[int(linkage[i, 1])])

    def leaves(node):
        out, stack = [], [node]
        while stack:
            x = stack.pop()
            if x < n:
                out.append(x)
            else:
                stack.extend(kids(x))
        return sorted(out)

    def components(node):
        # children reached through merges at the same distance form one split
        level = dist(node)
        out, stack = [], list(kids(node))
        while stack:
            x = stack.pop()
            if x >= n and dist(x) == level:
                stack.extend(kids(x))
            else:
                out.append(x)
        return sorted(out, key=lambda x: min_leaf[x])

    rows: list[tuple[int, int, float, int]] = []
    if n == 1 or n < min_cluster_size:
        # root only; every point leaves at the root's first split level
        lam = _lambda(dist(root_node)) if n > 1 else 0.0
        rows = [(n, p, lam, 1) for p in range(n)]
    else:
        next_label = n + 1
        queue = deque([(root_node, n)])
        while queue:
            node, label = queue.popleft()
            while True:
                lam = _lambda(dist(node))
                comps = components(node)
                big = [c for c in comps if size(c) >= min_cluster_size]
                for c in comps:
                    if size(c) < min_cluster_size:
                        rows.extend((label, p, lam, 1) for p in leaves(c))
                if len(big) >= 2:
                    for c in big:
                        rows.append((label, next_label, lam, size(c)))
                        queue.append((c, next_label))
                        next_label += 1
                    break
                if len(big) == 1 and big[0] >= n:
                    node = big[0]
                    continue
                break

    tree = CondensedTree(
        n_points=n,
        parent=np.array([r[0] for r in rows], dtype=np.int64),
        child=np.array([r[1] for r in rows], dtype=np.int64),
        lambda_val=np.array([r[2] for r in rows], dtype=np.float64),
        child_size=np.array([r[3] for r in rows], dtype=np.int64),
    )
    tree.stability = compute_stability(tree)
    return tree


def compute_stability(tree: CondensedTree) -> dict[int, float]:
    """Sum over member points of (exit lambda - birth lambda), exactly rounded."""
    births = {tree.root: 0.0}
    for p, c, lam, _ in tree.rows():
        if c >= tree.n_points:
            births[c] = lam
    terms: dict[int, list[float]] = {c: [] for c in births}
    for p, c, lam, s in tree.rows():
        terms[p].extend([lam - births[p]] * s)
    return {c: math.fsum(t) for c, t in terms.items()}


# ---------------------------------------------------------------------------
# selection


def _selected_clusters(tree: CondensedTree, selection: str, allow_single_cluster: bool) -> set[int]:
    clusters = tree.cluster_ids()
    children = {c: tree.child_clusters(c) for c in clusters}
    root = tree.root
    candidates = clusters if allow_single_cluster else [c for c in clusters if c != root]
    if not candidates:
        return set()

    if selection == "leaf":
        leaves = {c for c in candidates if not children[c]}
        return leaves

    selected: dict[int, bool] = {}
    best: dict[int, float] = {}
    for c in sorted(candidates, reverse=True):
        child_sum = math.fsum(best[ch] for ch in children[c])
        if children[c] and child_sum > tree.stability[c]:
            selected[c] = False
            best[c] = child_sum
        else:
            selected[c] = True
            best[c] = tree.stability[c]
            stack = list(children[c])
            while stack:
                d = stack.pop()
                selected[d] = False
                stack.extend(children[d])
    return {c for c, s in selected.items() if s}


def select_clusters(
    tree: CondensedTree,
    selection: str = "eom",
    allow_single_cluster: bool = False,
) -> np.ndarray:
    """Flat labels from a condensed tree; ``-1`` is noise.

    Labels are renumbered ``0..T-1`` by decreasing cluster size, ties by the
    smallest member point id.
    """
    if selection not in SELECTIONS:
        raise ConfigError(f"selection must be one of {SELECTIONS}")
    n = tree.n_points
    chosen = _selected_clusters(tree, selection, allow_single_cluster)
    up = tree.parent_of()
    raw = np.full(n, -1, dtype=np.int64)
    for p, c, _, _ in tree.rows():
        if c >= n:
            continue
        node = p
        while node is not None and node not in chosen:
            node = up.get(node)
        if node is not None:
            raw[c] = node
    return renumber_by_size(raw)


def renumber_by_size(raw: np.ndarray) -> np.ndarray:
    raw = np.asarray(raw)
    ids = [c for c in np.unique(raw) if c != -1]
    key = {c: (-int(np.sum(raw == c)), int(np.flatnonzero(raw == c)[0])) for c in ids}
    mapping = {c: i for i, c in enumerate(sorted(ids, key=key.__getitem__))}
    return np.array([mapping.get(c, -1) for c in raw], dtype=np.int64)


# ---------------------------------------------------------------------------


def cluster(X: np.ndarray, config: ClusterConfig, *, return_tree: bool = False):
    """Run the full HDBSCAN chain on the rows of ``X``."""
    config.validate()
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    mcs = config.min_cluster_size
    if n < mcs or n < 2:
        log.warning("only %d points for min_cluster_size=%d; everything is noise", n, mcs)
        labels = np.full(n, -1, dtype=np.int64)
        if return_tree:
            tree = CondensedTree(n, *(np.zeros(0, dtype=t) for t in (np.int64, np.int64, np.float64, np.int64)))
            return labels, tree
        return labels
    min_samples = config.min_samples or mcs
    if min_samples > n - 1:
        log.warning("min_samples=%d exceeds n-1=%d; clamped", min_samples, n - 1)
        min_samples = n - 1
    D = euclidean_distances(X)
    core = core_distances(X, min_samples, D)
    M = mutual_reachability_matrix(D, core)
    linkage = build_hierarchy(minimum_spanning_tree(M), n)
    tree = condense_tree(linkage, mcs)
    labels = select_clusters(tree, config.selection, config.allow_single_cluster)
    return (labels, tree) if return_tree else labels
