"""Losses, hypotheses, risks and the HOE / EOE minimizers.

The hypothesis of a triplet ``(i, j, k)`` is ``f(d(x_i, x_j)) - f(d(x_i, x_k))``
with ``f = cosh`` on the hyperboloid and ``f(x) = x**2`` in Euclidean
space.  A label ``y = +1`` says ``i`` is closer to ``k`` than to ``j``,
so the loss of an observation is ``loss(-y * h)``.
"""

import csv
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from . import hypgeo
from .dataset import (LinkFunction, check_dissimilarity, check_labels,
                      check_triplets, enumerate_triplets, label_probabilities,
                      make_rng, noiseless_labels, triplet_count)
from .exceptions import (CapacityError, DimensionError, DomainError,
                         TrainingError, ValidityError)
from .hypgeo import BallRestriction

HYPERBOLIC = "hyperbolic"
EUCLIDEAN = "euclidean"
MAX_TRIPLETS = 10_000_000


@dataclass(frozen=True)
class LossFunction:
    """Hinge ``max(0, x + 1)`` or ramp ``min(1, max(0, x + 1))``.

    Both are nondecreasing and 1-Lipschitz.  At the knots the derivative
    is taken to be 0.
    """

    kind: str = "hinge"

    def __post_init__(self):
        if self.kind not in ("hinge", "ramp"):
            raise DomainError(f"unknown loss kind {self.kind!r}")

    @property
    def lipschitz_constant(self) -> float:
        return 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        v = np.maximum(0.0, x + 1.0)
        return np.minimum(v, 1.0) if self.kind == "ramp" else v

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        inside = x > -1.0
        if self.kind == "ramp":
            inside &= x < 0.0
        return inside.astype(float)


def loss_value(loss: LossFunction, x):
    return loss(x)


@dataclass(frozen=True)
class Transform:
    """Dissimilarity transform: ``cosh`` (HOE) or ``x**2`` (EOE)."""

    kind: str = "cosh_hoe"

    def __post_init__(self):
        if self.kind not in ("cosh_hoe", "square_eoe"):
            raise DomainError(f"unknown transform {self.kind!r}")

    @classmethod
    def for_space(cls, space: str) -> "Transform":
        return cls("cosh_hoe" if space == HYPERBOLIC else "square_eoe")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.cosh(x) if self.kind == "cosh_hoe" else x * x


@dataclass
class Embedding:
    """Representations of ``n`` entities.

    ``points`` is ``(n, 1 + d)`` on the hyperboloid or ``(n, d)`` in
    Euclidean space.  ``risk_trace`` holds ``(epoch, empirical_risk)``
    pairs recorded by the fitters.
    """

    space: str
    points: np.ndarray
    risk_trace: List[tuple] = field(default_factory=list)

    def __post_init__(self):
        if self.space not in (HYPERBOLIC, EUCLIDEAN):
            raise DomainError(f"unknown space {self.space!r}")
        self.points = np.array(self.points, dtype=float)
        if self.points.ndim != 2:
            raise DimensionError("points must be a 2-d array")
        if self.space == HYPERBOLIC:
            hypgeo.check_hyperpoints(self.points)
        elif not np.all(np.isfinite(self.points)):
            raise ValidityError("points contain non-finite coordinates")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1] - (1 if self.space == HYPERBOLIC else 0)

    def distances(self) -> np.ndarray:
        if self.space == HYPERBOLIC:
            return hypgeo.pairwise_distances(self.points)
        diff = self.points[:, None, :] - self.points[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def radii(self) -> np.ndarray:
        """Distance of each point from the base point (or origin)."""
        if self.space == HYPERBOLIC:
            return hypgeo.distance_from_base(self.points)
        return np.linalg.norm(self.points, axis=1)

    def satisfies(self, restriction: BallRestriction, tol: float = 1e-9) -> bool:
        return bool(np.all(self.radii() <= restriction.radius + tol))


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings.

    ``batch_size = 0`` means full batch.  ``max_step`` caps the length of a
    single update (tangent norm or Euclidean norm per point), which keeps
    cosh-sized gradients at large radii from throwing points across the
    ball.  ``epochs = 0`` returns the initialization.
    """

    restriction: BallRestriction = BallRestriction(3.0)
    step_size: float = 0.05
    epochs: int = 200
    batch_size: int = 0
    seed: int = 0
    init_scale: float = 0.1
    decay: bool = False
    max_step: float = 0.5
    restarts: int = 3

    def __post_init__(self):
        if not self.step_size > 0:
            raise DomainError("step_size must be positive")
        if self.epochs < 0 or self.batch_size < 0:
            raise DomainError("epochs and batch_size must be nonnegative")
        if self.init_scale < 0:
            raise DomainError("init_scale must be nonnegative")
        if not self.max_step > 0:
            raise DomainError("max_step must be positive")
        if self.restarts < 1:
            raise DomainError("restarts must be >= 1")


# ---------------------------------------------------------------------------
# Hypotheses and risks


def _points_of(emb):
    if isinstance(emb, Embedding):
        return emb.space, emb.points
    raise TypeError("expected an Embedding")


def _raw_hypotheses(space, X, T):
    """Canonical-transform hypotheses without input validation."""
    i, j, k = T.T
    if space == HYPERBOLIC:
        return hypgeo.minkowski_inner(X[i], X[k]) - hypgeo.minkowski_inner(X[i], X[j])
    return np.sum((X[i] - X[j]) ** 2, axis=1) - np.sum((X[i] - X[k]) ** 2, axis=1)


def hypotheses(emb: Embedding, triplets, transform: Optional[Transform] = None,
               method: str = "auto") -> np.ndarray:
    """Hypothesis values for an ``(m, 3)`` triplet array.

    ``method="distance"`` evaluates ``f(d_ij) - f(d_ik)`` from distances;
    ``method="lorentz"`` uses the linear form ``-<x_i, x_j> + <x_i, x_k>``
    (hyperboloid with cosh only).  ``"auto"`` picks the linear form when
    it applies.
    """
    space, X = _points_of(emb)
    f = transform or Transform.for_space(space)
    T = check_triplets(triplets, len(X))
    i, j, k = T.T
    linear = space == HYPERBOLIC and f.kind == "cosh_hoe"
    if method == "auto":
        method = "lorentz" if linear else "distance"
    if method == "lorentz":
        if not linear:
            raise DomainError("the Lorentz form needs hyperbolic points and cosh")
        return hypgeo.minkowski_inner(X[i], X[k]) - hypgeo.minkowski_inner(X[i], X[j])
    if method != "distance":
        raise DomainError(f"unknown method {method!r}")
    if space == HYPERBOLIC:
        dij = hypgeo.hyperbolic_distance(X[i], X[j])
        dik = hypgeo.hyperbolic_distance(X[i], X[k])
    elif f.kind == "square_eoe":
        return np.sum((X[i] - X[j]) ** 2, axis=1) - np.sum((X[i] - X[k]) ** 2, axis=1)
    else:
        dij = np.linalg.norm(X[i] - X[j], axis=1)
        dik = np.linalg.norm(X[i] - X[k], axis=1)
    return f(dij) - f(dik)


def hypothesis(i: int, j: int, k: int, emb: Embedding,
               transform: Optional[Transform] = None, method: str = "distance") -> float:
    """Hypothesis of a single triplet."""
    if not all(0 <= a < emb.n for a in (i, j, k)):
        raise DomainError(f"triplet ({i}, {j}, {k}) out of range for n={emb.n}")
    return float(hypotheses(emb, [[i, j, k]], transform, method)[0])


def empirical_risk(emb: Embedding, triplets, labels, loss: LossFunction,
                   transform: Optional[Transform] = None) -> float:
    """``mean(loss(-y * h))``."""
    T = check_triplets(triplets, emb.n)
    if len(T) == 0:
        raise DomainError("empirical risk needs at least one observation")
    y = check_labels(labels, len(T))
    return float(np.mean(loss(-y * hypotheses(emb, T, transform))))


def expected_risk_from_hypotheses(h, p, loss: LossFunction) -> float:
    """``mean(p * loss(-h) + (1 - p) * loss(h))``.

    Infinite hypotheses are allowed: the ramp loss saturates and the
    zero-probability branch is dropped instead of forming ``0 * inf``.
    """
    h = np.asarray(h, dtype=float)
    p = np.asarray(p, dtype=float)
    if h.size == 0:
        raise DomainError("no triplets to average over")
    with np.errstate(invalid="ignore"):
        pos = np.where(p > 0, p * loss(-h), 0.0)
        neg = np.where(p < 1, (1.0 - p) * loss(h), 0.0)
    return float(np.mean(pos + neg))


def _universe(n):
    if n < 3:
        raise DomainError("expected risk needs n >= 3")
    if triplet_count(n) > MAX_TRIPLETS:
        raise CapacityError(f"|T| = {triplet_count(n)} exceeds {MAX_TRIPLETS}")
    return enumerate_triplets(n)


def expected_risk_exact(emb: Embedding, D, link: LinkFunction, loss: LossFunction,
                        transform: Optional[Transform] = None) -> float:
    """Exact expected risk under uniform triplets and the given link."""
    D = check_dissimilarity(D, require_distinct=False)
    if D.shape[0] != emb.n:
        raise DimensionError("dissimilarity and embedding sizes differ")
    T = _universe(emb.n)
    p = label_probabilities(D, T, link)
    return expected_risk_from_hypotheses(hypotheses(emb, T, transform), p, loss)


def accuracy(emb: Embedding, triplets, labels) -> float:
    """Fraction of observations whose label matches ``sign(h)``."""
    h = hypotheses(emb, triplets)
    return float(np.mean(np.where(h > 0, 1, -1) == np.asarray(labels)))


# ---------------------------------------------------------------------------
# Gradients


def _check_pairing(space, transform):
    if transform is not None and transform != Transform.for_space(space):
        raise DomainError("gradients are implemented for cosh/hyperbolic and square/euclidean")


def hypothesis_weight_gradient(space: str, X, triplets, weights) -> np.ndarray:
    """Ambient gradient of ``sum_t weights[t] * h_t`` with respect to ``X``.

    For the hyperboloid the returned array is the Minkowski gradient
    ``J * grad``, ready for ``project_to_tangent``.
    """
    X = np.asarray(X, dtype=float)
    T = np.asarray(triplets)
    g = np.asarray(weights, dtype=float)[:, None]
    i, j, k = T.T
    G = np.zeros_like(X)
    if space == HYPERBOLIC:
        np.add.at(G, i, g * (X[k] - X[j]))
        np.add.at(G, j, -g * X[i])
        np.add.at(G, k, g * X[i])
    else:
        np.add.at(G, i, 2.0 * g * (X[k] - X[j]))
        np.add.at(G, j, -2.0 * g * (X[i] - X[j]))
        np.add.at(G, k, 2.0 * g * (X[i] - X[k]))
    return G


def empirical_risk_gradient(emb: Embedding, triplets, labels, loss: LossFunction,
                            riemannian: bool = True) -> np.ndarray:
    """Gradient of the empirical risk.

    Hyperbolic points get the Riemannian gradient (a tangent vector per
    point) unless ``riemannian`` is false, in which case the Minkowski
    ambient gradient is returned.
    """
    T = check_triplets(triplets, emb.n)
    y = check_labels(labels, len(T))
    h = hypotheses(emb, T)
    w = -y * loss.derivative(-y * h) / len(T)
    G = hypothesis_weight_gradient(emb.space, emb.points, T, w)
    if emb.space == HYPERBOLIC and riemannian:
        G = hypgeo.project_to_tangent(emb.points, G)
    return G


def _expected_weights(h, p, loss):
    return (-p * loss.derivative(-h) + (1.0 - p) * loss.derivative(h)) / len(h)


def expected_risk_gradient(emb: Embedding, D, link: LinkFunction, loss: LossFunction) -> np.ndarray:
    T = _universe(emb.n)
    p = label_probabilities(D, T, link)
    w = _expected_weights(hypotheses(emb, T), p, loss)
    G = hypothesis_weight_gradient(emb.space, emb.points, T, w)
    if emb.space == HYPERBOLIC:
        G = hypgeo.project_to_tangent(emb.points, G)
    return G


# ---------------------------------------------------------------------------
# Optimization


def initial_points(space: str, n: int, d: int, scale: float, rng) -> np.ndarray:
    """Gaussian start: exp map at the base point (hyperbolic) or plain
    Gaussian coordinates (Euclidean)."""
    if n < 1 or d < 1:
        raise DimensionError("need n >= 1 and d >= 1")
    v = scale * rng.standard_normal((n, d))
    if space == EUCLIDEAN:
        return v
    tangent = np.concatenate([np.zeros((n, 1)), v], axis=1)
    return hypgeo.exp_map(hypgeo.base_point(d), tangent)


def project_points(space: str, X, radius: float) -> np.ndarray:
    """Project every point into the closed ball of ``radius``."""
    if space == HYPERBOLIC:
        return hypgeo.project_to_ball(X, radius)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    scale = np.where(norms > radius, radius / np.where(norms > 0, norms, 1.0), 1.0)
    return X * scale


def _clip(space, X, G, max_step):
    if space == HYPERBOLIC:
        norms = hypgeo.tangent_norm(G)[:, None]
    else:
        norms = np.linalg.norm(G, axis=1, keepdims=True)
    return G * np.minimum(1.0, max_step / np.maximum(norms, 1e-300))


def _step(space, X, G, lr, config):
    update = _clip(space, X, -lr * G, config.max_step)
    if space == HYPERBOLIC:
        X = hypgeo.exp_map(X, update)
    else:
        X = X + update
    return project_points(space, X, config.restriction.radius)


def _descend(space, X, objective, gradient, config, n_items, rng, keep_best=True):
    """Projected (Riemannian) gradient descent.

    ``gradient(X, idx)`` returns the gradient of the objective restricted
    to items ``idx`` (already averaged); ``objective(X)`` is evaluated once
    per epoch for the trace.  Returns ``(X, trace)``.
    """
    trace = [(0, objective(X))]
    best_X, best_val = X, trace[0][1]
    batch = config.batch_size if 0 < config.batch_size < n_items else n_items
    t = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_items) if batch < n_items else np.arange(n_items)
        for start in range(0, n_items, batch):
            t += 1
            lr = config.step_size / np.sqrt(t) if config.decay else config.step_size
            G = gradient(X, order[start:start + batch])
            if not np.all(np.isfinite(G)):
                raise TrainingError(f"non-finite gradient at epoch {epoch}, step {t}; "
                                    "reduce the radius or the step size")
            X = _step(space, X, G, lr, config)
        val = objective(X)
        if not np.isfinite(val):
            raise TrainingError(f"non-finite objective at epoch {epoch}")
        trace.append((epoch, val))
        if val < best_val:
            best_X, best_val = X, val
    return (best_X if keep_best else X), trace


def _as_observations(data, n):
    """Accept ``(triplets, labels)`` or a dissimilarity matrix (all
    triplets with noiseless labels)."""
    if isinstance(data, tuple) and len(data) == 2:
        T = check_triplets(data[0], n)
        return T, check_labels(data[1], len(T))
    D = check_dissimilarity(data, require_distinct=False)
    if n is not None and D.shape[0] != n:
        raise DimensionError("dissimilarity size does not match n")
    T = _universe(D.shape[0])
    return T, noiseless_labels(D, T)


def fit_embedding(space: str, data, config: FitConfig, loss: LossFunction, n: int, d: int,
                  init=None) -> Embedding:
    """Shared body of :func:`fit_hoe` and :func:`fit_eoe`."""
    T, y = _as_observations(data, n)
    if len(T) == 0 and config.epochs > 0:
        raise DomainError("cannot fit without observations")
    rng = make_rng(config.seed, 0)
    if init is None:
        X = initial_points(space, n, d, config.init_scale, rng)
    else:
        X = np.array(init.points if isinstance(init, Embedding) else init, dtype=float)
    X = project_points(space, X, config.restriction.radius)

    def objective(Z):
        return float(np.mean(loss(-y * _raw_hypotheses(space, Z, T)))) if len(T) else float("nan")

    def gradient(Z, idx):
        h = _raw_hypotheses(space, Z, T[idx])
        w = -y[idx] * loss.derivative(-y[idx] * h) / len(idx)
        G = hypothesis_weight_gradient(space, Z, T[idx], w)
        return hypgeo.project_to_tangent(Z, G) if space == HYPERBOLIC else G

    if config.epochs == 0:
        trace = [(0, objective(X))] if len(T) else []
        return Embedding(space, X, trace)
    X, trace = _descend(space, X, objective, gradient, config, len(T), rng)
    return Embedding(space, X, trace)


def fit_hoe(data, config: FitConfig, loss: LossFunction, n: int, d: int, init=None) -> Embedding:
    """Empirical risk minimization on the hyperboloid within ``B_R``.

    ``data`` is ``(triplets, labels)`` or a dissimilarity matrix, in which
    case all triplets are used with noiseless labels.  Returns the
    lowest-risk iterate seen; the full trajectory is in ``risk_trace``.
    """
    return fit_embedding(HYPERBOLIC, data, config, loss, n, d, init)


def fit_eoe(data, config: FitConfig, loss: LossFunction, n: int, d: int, init=None) -> Embedding:
    """Euclidean counterpart of :func:`fit_hoe` with ``f(x) = x**2`` and
    projection onto the origin-centred ball of radius ``R``."""
    return fit_embedding(EUCLIDEAN, data, config, loss, n, d, init)


def scale_points(space: str, X, factor: float) -> np.ndarray:
    """Multiply every point's distance from the base point (origin) by
    ``factor``."""
    if space == HYPERBOLIC:
        return hypgeo.scale_radii(X, factor)
    return np.asarray(X, dtype=float) * factor


def rescale_search(space: str, X, objective, radius: float, n_grid: int = 25) -> np.ndarray:
    """Best radial rescaling of ``X`` on a geometric grid that keeps every
    point inside the ball.

    A hinge fit settles where margins are about 1; stretching it outwards
    enlarges every margin without changing the ordering, which is what the
    saturating ramp loss rewards.
    """
    r_max = float(np.max(Embedding(space, X).radii())) if len(X) else 0.0
    if r_max <= 0:
        return X
    top = radius / r_max
    best_X, best_val = X, objective(X)
    for factor in np.geomspace(min(1.0, top), max(1.0, top), n_grid):
        Y = project_points(space, scale_points(space, X, factor), radius)
        val = objective(Y)
        if val < best_val:
            best_X, best_val = Y, val
    return best_X


def minimize_expected_risk(D, link: LinkFunction, loss: LossFunction, space: str,
                           config: FitConfig, d: int, inits=None,
                           warm_start: bool = True) -> Embedding:
    """Multi-start descent on the exact expected risk.

    Each restart starts from a seeded Gaussian initialization (plus any
    extra ``inits``).  With the ramp loss, a hinge phase over the first
    half of the epochs comes first, because the ramp gradient vanishes on
    triplets with the wrong sign; the hinge iterate is then stretched
    radially by :func:`rescale_search` before the ramp phase.  The returned embedding has the lowest
    expected risk among all iterates and initializations.
    """
    D = check_dissimilarity(D, require_distinct=False)
    n = D.shape[0]
    T = _universe(n)
    p = label_probabilities(D, T, link)
    radius = config.restriction.radius

    def make_objective(lossfn):
        def objective(Z):
            return expected_risk_from_hypotheses(_raw_hypotheses(space, Z, T), p, lossfn)
        return objective

    def make_gradient(lossfn):
        def gradient(Z, idx):
            w = _expected_weights(_raw_hypotheses(space, Z, T), p, lossfn)
            G = hypothesis_weight_gradient(space, Z, T, w)
            return hypgeo.project_to_tangent(Z, G) if space == HYPERBOLIC else G
        return gradient

    target = make_objective(loss)
    starts = []
    for r in range(config.restarts):
        rng = make_rng(config.seed, 1, r)
        starts.append((initial_points(space, n, d, config.init_scale, rng), rng))
    for extra in inits or ():
        X0 = extra.points if isinstance(extra, Embedding) else extra
        starts.append((np.array(X0, dtype=float), make_rng(config.seed, 2, len(starts))))

    full = replace(config, batch_size=0)
    best_X, best_val, best_trace = None, np.inf, []
    for X0, rng in starts:
        X = project_points(space, X0, radius)
        val = target(X)
        if val < best_val:
            best_X, best_val, best_trace = X, val, [(0, val)]
        phases = [(loss, full)]
        if warm_start and loss.kind == "ramp" and config.epochs >= 2:
            half = config.epochs // 2
            phases = [(LossFunction("hinge"), replace(full, epochs=half)),
                      (loss, replace(full, epochs=config.epochs - half))]
        trace = []
        for phase, (lossfn, cfg) in enumerate(phases):
            X, _ = _descend(space, X, target, make_gradient(lossfn), cfg, len(T), rng,
                            keep_best=False)
            if phase == 0 and len(phases) > 1:
                X = rescale_search(space, X, target, radius)
            val = target(X)
            trace.append((len(trace) + 1, val))
            if val < best_val:
                best_X, best_val, best_trace = X, val, trace[:]
    return Embedding(space, best_X, best_trace)


# ---------------------------------------------------------------------------
# File formats


def embedding_to_csv(emb: Embedding) -> str:
    """Embedding CSV text: ``id,c0..cd`` (hyperbolic) or ``id,c1..cd``."""
    offset = 0 if emb.space == HYPERBOLIC else 1
    header = ["id"] + [f"c{a + offset}" for a in range(emb.points.shape[1])]
    lines = [",".join(header)]
    for a, row in enumerate(emb.points, 1):
        lines.append(",".join([str(a)] + [repr(float(v)) for v in row]))
    return "\n".join(lines) + "\n"


def write_embedding(emb: Embedding, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(embedding_to_csv(emb))


def read_embedding(path) -> Embedding:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "id" or len(rows[0]) < 2:
        raise ValidityError(f"{path}: missing embedding header")
    space = HYPERBOLIC if rows[0][1] == "c0" else EUCLIDEAN
    pts = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float)
    return Embedding(space, pts.reshape(len(rows) - 1, len(rows[0]) - 1))


def write_risk_trace(trace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "empirical_risk"])
        for epoch, risk in trace:
            writer.writerow([epoch, repr(float(risk))])
