"""True dissimilarities, the triplet universe and noisy comparison sampling.

Entity ids are 0-based everywhere in memory.  The text formats (tree
files, observation CSVs) use 1-based ids, and the readers and writers
convert.
"""

import csv
import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .exceptions import DimensionError, DomainError, GenerationError, ValidityError

JITTER = 1e-6


def make_rng(seed, *key) -> np.random.Generator:
    """Independent generator for the stream ``key`` under a master ``seed``.

    Streams with different keys are statistically independent and each is
    reproducible on its own, whatever order they are created in.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    entropy = 0 if seed is None else int(seed)
    spawn_key = tuple(int(k) for k in key)
    return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=spawn_key))


# ---------------------------------------------------------------------------
# Triplets


def triplet_count(n: int) -> int:
    """``n (n - 1) (n - 2) / 2``."""
    return n * (n - 1) * (n - 2) // 2 if n >= 3 else 0


def enumerate_triplets(n: int) -> np.ndarray:
    """All ``(i, j, k)`` with ``j < k`` and ``i`` distinct from both, in
    lexicographic order, as an ``(|T|, 3)`` int array."""
    if n < 0:
        raise DomainError("entity count must be nonnegative")
    if n < 3:
        return np.empty((0, 3), dtype=np.int64)
    j, k = np.triu_indices(n, k=1)
    i = np.repeat(np.arange(n), j.size)
    jj = np.tile(j, n)
    kk = np.tile(k, n)
    keep = (i != jj) & (i != kk)
    return np.stack([i[keep], jj[keep], kk[keep]], axis=1).astype(np.int64)


def check_triplets(triplets, n: int = None) -> np.ndarray:
    """Validate an ``(m, 3)`` integer array of members of the triplet set."""
    T = np.asarray(triplets)
    if T.ndim != 2 or T.shape[1] != 3:
        raise DimensionError(f"triplets must have shape (m, 3), got {T.shape}")
    if T.size and not np.issubdtype(T.dtype, np.integer):
        if not np.all(T == np.round(T)):
            raise DomainError("triplet ids must be integers")
    T = T.astype(np.int64)
    if T.size == 0:
        return T
    i, j, k = T.T
    if np.any(T < 0) or (n is not None and np.any(T >= n)):
        raise DomainError("triplet id out of range")
    if np.any(j >= k) or np.any(i == j) or np.any(i == k):
        raise DomainError("triplets must satisfy j < k and i != j, i != k")
    return T


def check_labels(labels, m: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.shape != (m,):
        raise DimensionError(f"expected {m} labels, got shape {y.shape}")
    if not np.all(np.isin(y, (-1, 1))):
        raise DomainError("labels must be -1 or +1")
    return y.astype(np.int64)


# ---------------------------------------------------------------------------
# Trees and dissimilarities


@dataclass(frozen=True)
class WeightedTree:
    """A tree on entities ``0..n-1`` with positive edge weights."""

    n: int
    edges: Tuple[Tuple[int, int, float], ...]

    def __post_init__(self):
        edges = tuple((int(u), int(v), float(w)) for u, v, w in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.n < 1:
            raise ValidityError("a tree needs at least one vertex")
        if len(edges) != self.n - 1:
            raise ValidityError(f"a tree on {self.n} vertices has {self.n - 1} edges, got {len(edges)}")
        parent = list(range(self.n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for u, v, w in edges:
            if not (0 <= u < self.n and 0 <= v < self.n) or u == v:
                raise ValidityError(f"bad edge ({u}, {v})")
            if not (w > 0 and math.isfinite(w)):
                raise ValidityError(f"edge weight must be positive, got {w}")
            ru, rv = find(u), find(v)
            if ru == rv:
                raise ValidityError("edges contain a cycle")
            parent[ru] = rv

    def adjacency(self):
        adj = [[] for _ in range(self.n)]
        for u, v, w in self.edges:
            adj[u].append((v, w))
            adj[v].append((u, w))
        return adj


def tree_distances(tree: WeightedTree) -> np.ndarray:
    """Path-length metric of a weighted tree as an ``(n, n)`` array."""
    adj = tree.adjacency()
    D = np.zeros((tree.n, tree.n))
    for src in range(tree.n):
        seen = [False] * tree.n
        seen[src] = True
        queue = deque([src])
        while queue:
            a = queue.popleft()
            for b, w in adj[a]:
                if not seen[b]:
                    seen[b] = True
                    D[src, b] = D[src, a] + w
                    queue.append(b)
    # Sums along a path depend on the direction of traversal by an ulp.
    upper = np.triu(D, k=1)
    return upper + upper.T


def pair_values(D) -> np.ndarray:
    """Off-diagonal values over unordered pairs."""
    D = np.asarray(D)
    iu = np.triu_indices(D.shape[0], k=1)
    return D[iu]


def has_distinct_pairs(D) -> bool:
    vals = np.sort(pair_values(D))
    return bool(np.all(np.diff(vals) > 0))


def check_dissimilarity(D, require_distinct: bool = True) -> np.ndarray:
    """Validate a symmetric, zero-diagonal, nonnegative dissimilarity."""
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise DimensionError("dissimilarity must be a square matrix")
    if not np.all(np.isfinite(D)) or np.any(D < 0):
        raise ValidityError("dissimilarities must be finite and nonnegative")
    if not np.array_equal(D, D.T):
        raise ValidityError("dissimilarity must be symmetric")
    if np.any(np.diag(D) != 0):
        raise ValidityError("dissimilarity must have a zero diagonal")
    if require_distinct and not has_distinct_pairs(D):
        raise ValidityError("dissimilarities over distinct pairs must be distinct")
    return D


def _random_tree(n, rng, weight_min, weight_max):
    edges = []
    for v in range(1, n):
        u = int(rng.integers(v))
        w = rng.uniform(weight_min, weight_max) * (1.0 + rng.uniform(0.0, JITTER))
        edges.append((u, v, w))
    return WeightedTree(n, tuple(edges))


def generate_weighted_tree(n: int, seed=None, weight_min: float = 1.0,
                           weight_max: float = 2.0,
                           max_attempts: int = 100) -> WeightedTree:
    """Random tree by uniform attachment with jittered uniform weights.

    Vertex ``v`` attaches to a uniformly chosen earlier vertex.  The tree
    is regenerated until all path distances are pairwise distinct.
    """
    if n < 2:
        raise DomainError("a random tree needs n >= 2")
    if not 0 < weight_min < weight_max:
        raise DomainError("weights need 0 < weight_min < weight_max")
    rng = make_rng(seed)
    for _ in range(max_attempts):
        tree = _random_tree(n, rng, weight_min, weight_max)
        if has_distinct_pairs(tree_distances(tree)):
            return tree
    raise GenerationError(f"no tree with distinct distances after {max_attempts} attempts")


def star_tree(n_leaves: int, seed=None, weight_min: float = 1.0,
              weight_max: float = 2.0, max_attempts: int = 100) -> WeightedTree:
    """Star with centre 0 and ``n_leaves`` leaves, distinct path distances."""
    if n_leaves < 1:
        raise DomainError("a star needs at least one leaf")
    rng = make_rng(seed)
    for _ in range(max_attempts):
        w = rng.uniform(weight_min, weight_max, n_leaves) * (1.0 + rng.uniform(0.0, JITTER, n_leaves))
        tree = WeightedTree(n_leaves + 1, tuple((0, a + 1, w[a]) for a in range(n_leaves)))
        if has_distinct_pairs(tree_distances(tree)):
            return tree
    raise GenerationError(f"no star with distinct distances after {max_attempts} attempts")


# ---------------------------------------------------------------------------
# Link functions and sampling


@dataclass(frozen=True)
class LinkFunction:
    """Probability of label +1 given the dissimilarity gap
    ``D(i, j) - D(i, k)``.

    ``kind="step"`` returns ``1/2 + alpha`` for positive gaps and
    ``1/2 - alpha`` for negative ones; ``kind="logistic"`` returns
    ``1 / (1 + exp(-x / scale))``.
    """

    kind: str = "step"
    alpha: float = 0.4
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("step", "logistic"):
            raise DomainError(f"unknown link kind {self.kind!r}")
        if self.kind == "step" and not 0.0 <= self.alpha <= 0.5:
            raise DomainError("step link needs 0 <= alpha <= 1/2")
        if self.kind == "logistic" and not self.scale > 0:
            raise DomainError("logistic link needs a positive scale")

    @classmethod
    def step(cls, alpha: float) -> "LinkFunction":
        return cls("step", alpha=alpha)

    @classmethod
    def logistic(cls, scale: float = 1.0) -> "LinkFunction":
        return cls("logistic", scale=scale)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "step":
            if np.any(x == 0):
                raise DomainError("step link is undefined at a zero gap")
            return np.where(x > 0, 0.5 + self.alpha, 0.5 - self.alpha)
        return 0.5 * (1.0 + np.tanh(0.5 * x / self.scale))


def link_probability(link: LinkFunction, x):
    return link(x)


def label_probabilities(D, triplets, link: LinkFunction) -> np.ndarray:
    """``P(y = +1)`` for each triplet."""
    D = np.asarray(D, dtype=float)
    T = np.asarray(triplets)
    return link(D[T[:, 0], T[:, 1]] - D[T[:, 0], T[:, 2]])


def noiseless_labels(D, triplets) -> np.ndarray:
    """``+1`` where ``D(i, j) > D(i, k)``, else ``-1``."""
    D = np.asarray(D, dtype=float)
    T = np.asarray(triplets)
    return np.where(D[T[:, 0], T[:, 1]] > D[T[:, 0], T[:, 2]], 1, -1)


def sample_observations(D, link: LinkFunction, m: int, seed=None):
    """Draw ``m`` i.i.d. (triplet, label) pairs.

    Triplets are uniform over the triplet set; the label is +1 with
    probability ``link(D(i, j) - D(i, k))``.  Returns ``(triplets, labels)``.
    """
    D = check_dissimilarity(D, require_distinct=False)
    n = D.shape[0]
    if n < 3:
        raise DomainError("the triplet set is empty for n < 3")
    if m < 0:
        raise DomainError("sample size must be nonnegative")
    rng = make_rng(seed)
    universe = enumerate_triplets(n)
    T = universe[rng.integers(len(universe), size=m)]
    p = label_probabilities(D, T, link) if m else np.empty(0)
    y = np.where(rng.random(m) < p, 1, -1).astype(np.int64)
    return T, y


# ---------------------------------------------------------------------------
# File formats


def write_tree(tree: WeightedTree, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# weighted tree, n={tree.n}; columns: u v weight (1-based)\n")
        for u, v, w in tree.edges:
            fh.write(f"{u + 1} {v + 1} {w!r}\n")


def read_tree(path) -> WeightedTree:
    edges = []
    ids = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValidityError(f"{path}:{lineno}: expected 'u v weight'")
            u, v, w = int(parts[0]) - 1, int(parts[1]) - 1, float(parts[2])
            ids.update((u, v))
            edges.append((u, v, w))
    n = max(ids) + 1 if ids else 1
    return WeightedTree(n, tuple(edges))


def write_observations(triplets, labels, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "i", "j", "k", "y"])
        for t, ((i, j, k), y) in enumerate(zip(np.asarray(triplets), labels), 1):
            writer.writerow([t, int(i) + 1, int(j) + 1, int(k) + 1, int(y)])


def read_observations(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["t", "i", "j", "k", "y"]:
            raise ValidityError(f"{path}: header must be t,i,j,k,y")
        for row in reader:
            rows.append((int(row["i"]) - 1, int(row["j"]) - 1, int(row["k"]) - 1, int(row["y"])))
    arr = np.array(rows, dtype=np.int64).reshape(-1, 4)
    T = check_triplets(arr[:, :3])
    return T, check_labels(arr[:, 3], len(T))


def observations_to_list(triplets: np.ndarray, labels: Sequence[int]):
    """``[(i, j, k, y), ...]`` with plain ints, handy for debugging."""
    return [(int(i), int(j), int(k), int(y)) for (i, j, k), y in zip(triplets, labels)]
