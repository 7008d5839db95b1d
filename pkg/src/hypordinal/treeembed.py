"""Margin-scaled tree embeddings in the hyperbolic plane.

A weighted tree is laid out in L^2 with every edge stretched by a scale
``tau``: each vertex carries a Lorentz frame, and a child's frame is its
parent's frame rotated towards the child's direction and boosted by
``tau * w``.  Directions around a vertex are spread evenly, with the
parent always at angle ``pi``.  For large ``tau`` the embedding distances
approach ``tau`` times the tree distances, so every strict inequality
between tree distances turns into a gap larger than 1.

Coordinates grow like ``exp(tau * radius)``, far beyond what float64 can
resolve, so the layout is computed with mpmath at a precision chosen from
the radius.  Distances are exact to float64 accuracy; the float64 points
are only an export and are refused (``ScaleError``) once they overflow.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import mpmath
import numpy as np

from .dataset import (LinkFunction, check_dissimilarity, enumerate_triplets,
                      label_probabilities, pair_values, tree_distances, WeightedTree)
from .embed import LossFunction, expected_risk_from_hypotheses
from .exceptions import ConstructionError, DomainError, ScaleError, ValidityError
from .hypgeo import pairwise_distances

INF_MARGIN = float(np.finfo(float).max)
MAX_DOUBLINGS = 20
_FLOAT_LOG_MAX = 700.0


@dataclass(frozen=True)
class TreeMarginStats:
    """``min_weight`` is the smallest edge weight; ``min_ratio_gap`` is the
    smallest ``1 - a / b`` over pairs of tree distances ``a < b``."""

    min_weight: float
    min_ratio_gap: float

    @property
    def epsilon(self) -> float:
        return self.min_ratio_gap / 3.0


def tree_margin_stats(tree: WeightedTree) -> TreeMarginStats:
    """Exact minima by brute force over all pair distances."""
    w_min = min(w for _, _, w in tree.edges)
    vals = np.sort(pair_values(tree_distances(tree)))
    if len(vals) < 2:
        return TreeMarginStats(w_min, 1.0)
    gaps = 1.0 - vals[:-1] / vals[1:]
    gap = float(gaps.min())
    if not gap > 0:
        raise ValidityError("tree distances are not pairwise distinct")
    return TreeMarginStats(w_min, gap)


def tree_center(tree: WeightedTree) -> int:
    """Vertex minimizing the largest weighted distance to any other."""
    return int(np.argmin(tree_distances(tree).max(axis=1)))


def _rooted(tree, root):
    """Parent array and children lists in BFS order from ``root``."""
    adj = tree.adjacency()
    parent = [-1] * tree.n
    weight = [0.0] * tree.n
    children = [[] for _ in range(tree.n)]
    order = [root]
    seen = {root}
    for v in order:
        for u, w in sorted(adj[v]):
            if u not in seen:
                seen.add(u)
                parent[u], weight[u] = v, w
                children[v].append(u)
                order.append(u)
    return parent, weight, children, order


def _rotation(theta):
    c, s = mpmath.cos(theta), mpmath.sin(theta)
    return mpmath.matrix([[1, 0, 0], [0, c, -s], [0, s, c]])


def _boost(t):
    ch, sh = mpmath.cosh(t), mpmath.sinh(t)
    return mpmath.matrix([[ch, sh, 0], [sh, ch, 0], [0, 0, 1]])


@dataclass(frozen=True)
class TreeLayout:
    """Result of :func:`sarkar_layout`.

    ``distances`` are exact embedding distances (float64); ``points`` are
    the float64 coordinates, or ``None`` when they would overflow.
    """

    tau: float
    root: int
    distances: np.ndarray
    points: Optional[np.ndarray]


def _working_dps(tree, tau, root):
    reach = float(tree_distances(tree)[root].max()) * tau
    return int(2.0 * reach / math.log(10.0)) + 40


def sarkar_layout(tree: WeightedTree, tau: float, root: Optional[int] = None) -> TreeLayout:
    """Lay out ``tree`` in L^2 with edge lengths scaled by ``tau``."""
    if not tau > 0:
        raise DomainError("tau must be positive")
    root = tree_center(tree) if root is None else int(root)
    parent, weight, children, order = _rooted(tree, root)
    n = tree.n
    with mpmath.workdps(_working_dps(tree, tau, root)):
        frames = [None] * n
        frames[root] = mpmath.eye(3)
        two_pi = 2 * mpmath.pi
        for v in order:
            kids = children[v]
            if v == root:
                angles = [two_pi * c / len(kids) for c in range(len(kids))]
            else:
                deg = len(kids) + 1
                angles = [mpmath.pi + two_pi * c / deg for c in range(1, deg)]
            for u, theta in zip(kids, angles):
                frames[u] = frames[v] * _rotation(theta) * _boost(mpmath.mpf(tau) * weight[u])
        pts = [[frames[v][a, 0] for a in range(3)] for v in range(n)]
        dist = np.zeros((n, n))
        for a in range(n):
            for b in range(a + 1, n):
                p, q = pts[a], pts[b]
                inner = p[0] * q[0] - p[1] * q[1] - p[2] * q[2]
                dist[a, b] = dist[b, a] = float(mpmath.acosh(max(inner, mpmath.mpf(1))))
        log_max = max(float(mpmath.log(pts[v][0])) for v in range(n))
        points = None
        if log_max < _FLOAT_LOG_MAX:
            points = np.array([[float(c) for c in pts[v]] for v in range(n)])
    return TreeLayout(float(tau), root, dist, points)


def sarkar_embed(tree: WeightedTree, tau: float) -> np.ndarray:
    """Float64 hyperboloid points of the layout at scale ``tau``.

    Raises ``ScaleError`` when the coordinates overflow float64; use
    :func:`sarkar_layout` for the exact distances in that regime.
    """
    layout = sarkar_layout(tree, tau)
    if layout.points is None:
        raise ScaleError(f"coordinates at tau={tau:g} overflow float64; use a smaller tree "
                         "or read distances from sarkar_layout")
    return layout.points


def distortion_ok(distances, D, tau: float, eps: float) -> bool:
    """``(1 - eps) tau D < d <= (1 + eps) tau D`` on every pair."""
    iu = np.triu_indices(np.asarray(D).shape[0], k=1)
    d = np.asarray(distances)[iu]
    t = tau * np.asarray(D)[iu]
    return bool(np.all((d > (1 - eps) * t) & (d <= (1 + eps) * t)))


def verify_margin(points, D, margin: float = 1.0, distances=None):
    """Exhaustive margin check over all ordered pairs of entity pairs.

    Whenever ``D[p] > D[q]`` the embedding must satisfy
    ``dist[p] - dist[q] > margin``.  Pass hyperboloid ``points`` or a
    precomputed ``distances`` matrix.  Returns ``(ok, worst_gap, witness)``
    with ``witness = ((i, j), (i2, j2))`` attaining the worst gap, or
    ``None`` when no two pairs compete (``worst_gap`` is then the largest
    float).
    """
    D = check_dissimilarity(D, require_distinct=False)
    n = D.shape[0]
    if n < 2:
        raise DomainError("verify_margin needs n >= 2")
    dist = pairwise_distances(points) if distances is None else np.asarray(distances, dtype=float)
    if dist.shape != D.shape:
        raise DomainError("distance and dissimilarity shapes differ")
    iu, ju = np.triu_indices(n, k=1)
    xi = D[iu, ju]
    de = dist[iu, ju]
    longer = xi[:, None] > xi[None, :]
    if not np.any(longer):
        return True, INF_MARGIN, None
    gaps = np.where(longer, de[:, None] - de[None, :], np.inf)
    p, q = np.unravel_index(int(np.argmin(gaps)), gaps.shape)
    worst = float(gaps[p, q])
    witness = ((int(iu[p]), int(ju[p])), (int(iu[q]), int(ju[q])))
    return bool(worst > margin), worst, witness


@dataclass(frozen=True)
class MarginEmbedding:
    """A layout certified to separate every distance comparison by more
    than ``margin``."""

    points: Optional[np.ndarray]
    scale_tau: float
    achieved_margin: float
    distances: np.ndarray
    epsilon: float
    margin_ok: bool
    witness: Optional[Tuple] = None


def embed_with_margin(tree: WeightedTree, margin: float = 1.0) -> MarginEmbedding:
    """Double ``tau`` from ``(1 + eps) / (w_min eps)`` until the layout is
    within distortion ``1 +- eps`` and every comparison gap exceeds
    ``margin``; ``eps`` is a third of the smallest distance ratio gap.

    Points are ``None`` when the certified scale is too large for float64
    coordinates; the certificate itself relies only on ``distances``.
    """
    D = tree_distances(tree)
    if tree.n < 2:
        raise DomainError("need at least two vertices")
    stats = tree_margin_stats(tree)
    eps = stats.epsilon
    tau = max(1.0 / (stats.min_weight * eps), (1.0 + eps) / (stats.min_weight * eps))
    last = None
    for _ in range(MAX_DOUBLINGS + 1):
        layout = sarkar_layout(tree, tau)
        ok, worst, witness = verify_margin(None, D, margin, distances=layout.distances)
        last = (tau, worst, witness)
        if ok and distortion_ok(layout.distances, D, tau, eps):
            return MarginEmbedding(layout.points, tau, worst, layout.distances, eps, True, witness)
        tau *= 2.0
    raise ConstructionError(f"margin {margin} not reached after {MAX_DOUBLINGS} doublings; "
                            f"last tau={last[0]:g}, worst gap={last[1]:g} at {last[2]}")


def certificate_hypotheses(distances, triplets) -> np.ndarray:
    """``cosh(d_ij) - cosh(d_ik)`` as ``2 sinh((a+b)/2) sinh((a-b)/2)``,
    which keeps the sign and the order of magnitude at huge distances
    (overflowing to a signed infinity)."""
    dist = np.asarray(distances, dtype=float)
    T = np.asarray(triplets)
    a = dist[T[:, 0], T[:, 1]]
    b = dist[T[:, 0], T[:, 2]]
    with np.errstate(over="ignore", invalid="ignore"):
        return 2.0 * np.sinh(0.5 * (a + b)) * np.sinh(0.5 * (a - b))


def zero_risk_certificate(tree: WeightedTree, link: LinkFunction,
                          loss: Optional[LossFunction] = None,
                          embedding: Optional[MarginEmbedding] = None):
    """Margin embedding and its exact expected risk under ``link``.

    With the step link and the ramp loss, a margin above 1 puts every term
    on a flat piece of the loss, giving the floor ``1/2 - alpha``.
    Pass ``embedding`` to reuse an earlier :func:`embed_with_margin`
    result.  Returns ``(margin_embedding, expected_risk)``.
    """
    loss = loss or LossFunction("ramp")
    if link.kind != "step":
        raise DomainError("the certificate is defined for the step link")
    if tree.n < 3:
        raise DomainError("need n >= 3 for triplets")
    emb = embed_with_margin(tree) if embedding is None else embedding
    D = tree_distances(tree)
    T = enumerate_triplets(tree.n)
    h = certificate_hypotheses(emb.distances, T)
    p = label_probabilities(D, T, link)
    return emb, expected_risk_from_hypotheses(h, p, loss)


def format_summary(emb: MarginEmbedding) -> str:
    """One-line summary ``{tau=..., margin_ok=..., worst_gap=...}``."""
    return (f"{{tau={emb.scale_tau!r}, margin_ok={str(emb.margin_ok).lower()}, "
            f"worst_gap={emb.achieved_margin!r}}}")
