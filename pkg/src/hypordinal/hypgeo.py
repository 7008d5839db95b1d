"""Hyperboloid-model geometry.

Points of the hyperbolic space L^d are stored as float64 arrays of length
``1 + d``; index 0 is the time coordinate.  Every function accepts batches
along leading axes, so an ``(n, 1 + d)`` array is a set of ``n`` points.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DimensionError, DomainError, ValidityError

MANIFOLD_TOL = 1e-9
_SMALL_NORM = 1e-12


def base_point(d: int) -> np.ndarray:
    """Return the base point ``[1, 0, ..., 0]`` of L^d."""
    if d < 1:
        raise DimensionError(f"dimension must be >= 1, got {d}")
    x = np.zeros(d + 1)
    x[0] = 1.0
    return x


def minkowski_inner(u, v):
    """Lorentz inner product ``-u0 v0 + sum_a u_a v_a`` along the last axis."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[-1] != v.shape[-1]:
        raise DimensionError(
            f"length mismatch: {u.shape[-1]} vs {v.shape[-1]}")
    if u.shape[-1] < 2:
        raise DimensionError("Minkowski vectors need length >= 2")
    return np.sum(u[..., 1:] * v[..., 1:], axis=-1) - u[..., 0] * v[..., 0]


def lorentz_sign(dim: int) -> np.ndarray:
    """Diagonal of the metric tensor, ``[-1, 1, ..., 1]``."""
    s = np.ones(dim)
    s[0] = -1.0
    return s


def hyperbolic_distance(p, q):
    """Geodesic distance ``arcosh(-<p, q>)``.

    The argument is clamped to ``[1, inf)``; roundoff otherwise produces
    values such as ``1 - 1e-16`` and a NaN.
    """
    return np.arccosh(np.maximum(-minkowski_inner(p, q), 1.0))


def distance_from_base(p):
    """Distance from the base point, ``arcosh(p0)``."""
    p = np.asarray(p, dtype=float)
    return np.arccosh(np.maximum(p[..., 0], 1.0))


def pairwise_distances(points) -> np.ndarray:
    """All pairwise hyperbolic distances of an ``(n, 1 + d)`` array."""
    X = np.asarray(points, dtype=float)
    gram = X[:, 1:] @ X[:, 1:].T - np.outer(X[:, 0], X[:, 0])
    D = np.arccosh(np.maximum(-gram, 1.0))
    np.fill_diagonal(D, 0.0)
    return D


def lift(spatial):
    """Complete spatial coordinates to a point on the upper sheet."""
    s = np.asarray(spatial, dtype=float)
    if s.ndim == 0 or s.shape[-1] < 1:
        raise DimensionError("spatial part needs at least one coordinate")
    if not np.all(np.isfinite(s)):
        raise DomainError("spatial coordinates must be finite")
    x0 = np.sqrt(1.0 + np.sum(s * s, axis=-1, keepdims=True))
    return np.concatenate([x0, s], axis=-1)


def is_on_hyperboloid(p, tol: float = MANIFOLD_TOL):
    """Check ``<p, p> = -1`` and ``p0 >= 1``.

    The residual is measured relative to ``p0 ** 2`` because the
    cancellation in ``-p0^2 + |p_s|^2`` grows with the radius.
    """
    p = np.asarray(p, dtype=float)
    resid = np.abs(minkowski_inner(p, p) + 1.0)
    scale = np.maximum(1.0, p[..., 0] ** 2)
    return (resid <= tol * scale) & (p[..., 0] >= 1.0 - tol)


def check_hyperpoints(points, tol: float = MANIFOLD_TOL) -> np.ndarray:
    """Validate an array of hyperboloid points and return it as float64."""
    X = np.asarray(points, dtype=float)
    if X.ndim < 1 or X.shape[-1] < 2:
        raise DimensionError("points need a last axis of length >= 2")
    if not np.all(np.isfinite(X)):
        raise ValidityError("points contain non-finite coordinates")
    ok = is_on_hyperboloid(X, tol)
    if not np.all(ok):
        bad = np.flatnonzero(~np.atleast_1d(ok))
        raise ValidityError(f"points off the hyperboloid at indices {bad.tolist()}")
    return X


def project_to_tangent(p, ambient):
    """Minkowski-orthogonal projection onto the tangent space at ``p``."""
    p = np.asarray(p, dtype=float)
    g = np.asarray(ambient, dtype=float)
    return g + minkowski_inner(p, g)[..., None] * p


def tangent_norm(v):
    """``sqrt(<v, v>)`` for tangent vectors (clamped at zero)."""
    return np.sqrt(np.maximum(minkowski_inner(v, v), 0.0))


def exp_map(p, v):
    """Exponential map ``cosh(|v|) p + sinh(|v|) v / |v|``.

    Vectors shorter than 1e-12 return ``p``.  The result is re-lifted so it
    sits on the upper sheet to machine precision.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    norm = tangent_norm(v)[..., None]
    small = norm < _SMALL_NORM
    safe = np.where(small, 1.0, norm)
    out = np.cosh(norm) * p + np.sinh(norm) * v / safe
    out = np.where(small, p, out)
    return lift(out[..., 1:])


def log_map(p, q):
    """Tangent vector at ``p`` pointing to ``q`` with length ``d(p, q)``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    dist = hyperbolic_distance(p, q)[..., None]
    u = project_to_tangent(p, q)
    un = tangent_norm(u)[..., None]
    safe = np.where(un < _SMALL_NORM, 1.0, un)
    return np.where(un < _SMALL_NORM, 0.0, dist * u / safe)


def project_to_ball(p, radius: float):
    """Move points farther than ``radius`` from the base point onto the sphere
    of that radius, along the geodesic through the base point."""
    if radius < 0:
        raise DomainError(f"radius must be nonnegative, got {radius}")
    p = np.asarray(p, dtype=float)
    r = distance_from_base(p)[..., None]
    s = p[..., 1:]
    snorm = np.linalg.norm(s, axis=-1, keepdims=True)
    outside = r > radius
    safe = np.where(snorm > 0, snorm, 1.0)
    shrunk = np.sinh(radius) * s / safe
    return np.where(outside, lift(shrunk), p)


def scale_radii(points, factor: float) -> np.ndarray:
    """Rescale every point's distance from the base point by ``factor``,
    keeping its direction."""
    X = np.asarray(points, dtype=float)
    r = distance_from_base(X)[..., None]
    s = X[..., 1:]
    snorm = np.linalg.norm(s, axis=-1, keepdims=True)
    safe = np.where(snorm > 0, snorm, 1.0)
    return lift(np.sinh(factor * r) * s / safe)


def random_points(n: int, d: int, radius: float, rng) -> np.ndarray:
    """``n`` points with directions uniform and radii uniform on
    ``[0, radius]``."""
    dirs = rng.standard_normal((n, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    r = rng.uniform(0.0, radius, size=(n, 1))
    return lift(np.sinh(r) * dirs)


@dataclass(frozen=True)
class BallRestriction:
    """Radius restriction on an embedding.

    ``radius`` bounds every point's distance from the base point;
    ``mean_radius`` bounds the mean of ``cosh^2`` of those distances by
    ``cosh^2(mean_radius)`` and defaults to ``radius``.
    """

    radius: float
    mean_radius: Optional[float] = None

    def __post_init__(self):
        if not self.radius >= 0:
            raise DomainError(f"radius must be nonnegative, got {self.radius}")
        if self.mean_radius is None:
            object.__setattr__(self, "mean_radius", float(self.radius))
        if not 0 <= self.mean_radius <= self.radius:
            raise DomainError("mean radius must satisfy 0 <= C <= R")

    def contains(self, points, tol: float = MANIFOLD_TOL) -> bool:
        r = distance_from_base(points)
        return bool(np.all(r <= self.radius + tol))

    def mean_contains(self, points, tol: float = MANIFOLD_TOL) -> bool:
        c2 = np.asarray(points, dtype=float)[..., 0] ** 2
        return bool(np.mean(c2) <= np.cosh(self.mean_radius) ** 2 * (1 + tol))
