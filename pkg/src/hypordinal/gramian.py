"""Gramian and Lorentz-Gramian algebra.

Covers the Euclidean norm identities, comparison matrices and the linear
form of the HOE risk, and the decomposition ``H = G_plus - G_minus`` of a
Lorentz Gramian with its condition checks and point reconstruction.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from . import hypgeo
from .dataset import check_labels, check_triplets
from .embed import HYPERBOLIC, Embedding, LossFunction
from .exceptions import DimensionError, DomainError, ReconstructionError

COND_TOL = 1e-8
RANK_RTOL = 1e-8


def _as_points(points_or_emb):
    if isinstance(points_or_emb, Embedding):
        return points_or_emb.points
    return np.asarray(points_or_emb, dtype=float)


def gramian(points) -> np.ndarray:
    """Euclidean Gramian ``X X^T`` of an ``(n, d)`` array."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    return X @ X.T


def nuclear_norm(A) -> float:
    return float(np.sum(np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)))


def max_norm(A) -> float:
    A = np.asarray(A, dtype=float)
    return float(np.max(np.abs(A))) if A.size else 0.0


def euclidean_norm_identities(points) -> Tuple[float, float]:
    """Nuclear and max norms of the Gramian, computed from distances to
    the origin alone: ``sum |x_i|^2`` and ``max |x_i|^2``."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    if X.shape[0] < 1:
        raise DomainError("need at least one point")
    sq = np.sum(X * X, axis=1)
    return float(np.sum(sq)), float(np.max(sq))


def lorentz_gramian(points) -> np.ndarray:
    """``H[a, b] = <x_a, x_b>_M`` for hyperboloid points."""
    X = hypgeo.check_hyperpoints(np.atleast_2d(_as_points(points)))
    return X[:, 1:] @ X[:, 1:].T - np.outer(X[:, 0], X[:, 0])


@dataclass(frozen=True)
class DecomposedGramian:
    """A rank-one time part and a spatial part with ``H = g_plus - g_minus``."""

    g_minus: np.ndarray
    g_plus: np.ndarray

    def __post_init__(self):
        gm = np.asarray(self.g_minus, dtype=float)
        gp = np.asarray(self.g_plus, dtype=float)
        if gm.ndim != 2 or gm.shape != gp.shape or gm.shape[0] != gm.shape[1]:
            raise DimensionError("g_minus and g_plus must be square and of equal size")
        object.__setattr__(self, "g_minus", gm)
        object.__setattr__(self, "g_plus", gp)

    @property
    def lorentz(self) -> np.ndarray:
        return self.g_plus - self.g_minus


def coordinate_decompose(points) -> DecomposedGramian:
    """Split the Lorentz Gramian into time and spatial Gramians."""
    X = hypgeo.check_hyperpoints(np.atleast_2d(_as_points(points)))
    t = X[:, 0]
    S = X[:, 1:]
    return DecomposedGramian(np.outer(t, t), S @ S.T)


@dataclass(frozen=True)
class ConditionResult:
    ok: bool
    slack: float


def _eigvalsh(A):
    return np.linalg.eigvalsh(0.5 * (A + A.T))


def numerical_rank(A, rtol: float = RANK_RTOL) -> int:
    ev = _eigvalsh(np.asarray(A, dtype=float))
    scale = np.max(np.abs(ev)) if ev.size else 0.0
    if scale == 0:
        return 0
    return int(np.sum(ev > rtol * scale))


def check_conditions(dec: DecomposedGramian, d: int, R: Optional[float] = None,
                     C: Optional[float] = None, tol: float = COND_TOL) -> Dict[str, ConditionResult]:
    """Evaluate the decomposition conditions.

    Keys ``a-``/``a+`` (PSD), ``b-``/``b+`` (rank exactly 1 / at most d),
    ``c`` (unit negative diagonal of the difference), ``d`` (off-diagonal
    entries at most -1), and, when a radius is given, ``e-``/``e+`` (max
    norms against ``cosh^2 R``/``sinh^2 R``) and ``f-``/``f+`` (nuclear
    norms against ``n cosh^2 C``/``n sinh^2 C``).  Each entry carries a
    slack: nonnegative when the condition holds.
    """
    gm, gp = dec.g_minus, dec.g_plus
    n = gm.shape[0]
    H = gp - gm
    out = {}
    for key, G in (("-", gm), ("+", gp)):
        ev = _eigvalsh(G)
        lo = float(ev.min()) if ev.size else 0.0
        out["a" + key] = ConditionResult(lo >= -tol, lo + tol)
    rm, rp = numerical_rank(gm), numerical_rank(gp)
    out["b-"] = ConditionResult(rm == 1, float(-abs(rm - 1)))
    out["b+"] = ConditionResult(rp <= d, float(d - rp))
    diag_err = float(np.max(np.abs(np.diag(H) + 1.0))) if n else 0.0
    out["c"] = ConditionResult(diag_err <= tol, tol - diag_err)
    if n > 1:
        off = H[~np.eye(n, dtype=bool)]
        worst = float(off.max())
        out["d"] = ConditionResult(worst <= -1.0 + tol, -1.0 + tol - worst)
    else:
        out["d"] = ConditionResult(True, np.inf)
    if R is not None:
        for key, G, cap in (("-", gm, np.cosh(R) ** 2), ("+", gp, np.sinh(R) ** 2)):
            val = max_norm(G)
            bound = cap * (1 + tol) + tol
            out["e" + key] = ConditionResult(val <= bound, bound - val)
    if C is not None:
        for key, G, cap in (("-", gm, np.cosh(C) ** 2), ("+", gp, np.sinh(C) ** 2)):
            val = nuclear_norm(G)
            bound = n * cap * (1 + tol) + tol
            out["f" + key] = ConditionResult(val <= bound, bound - val)
    return out


def all_ok(report: Dict[str, ConditionResult], keys=None) -> bool:
    keys = report.keys() if keys is None else keys
    return all(report[k].ok for k in keys)


def eigen_decompose(H, d: int, rtol: float = RANK_RTOL) -> DecomposedGramian:
    """Decomposition of a Lorentz Gramian from its eigendecomposition:
    the negative eigenpair gives ``g_minus`` and the positive ones
    ``g_plus``."""
    X = reconstruct_points(H, d, rtol)
    return coordinate_decompose(X)


def reconstruct_points(H, d: int, rtol: float = RANK_RTOL) -> np.ndarray:
    """Hyperboloid points whose Lorentz Gramian is ``H``.

    The single negative eigenpair ``(lam, u)`` gives time coordinates
    ``sqrt(-lam) u``, signed so they are positive; the positive eigenpairs
    give spatial coordinates, padded with zeros up to ``d``.  Points are
    determined only up to a Lorentz isometry.
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] == 0:
        raise DimensionError("H must be a nonempty square matrix")
    if d < 1:
        raise DimensionError("d must be >= 1")
    n = H.shape[0]
    scale = max(1.0, float(np.max(np.abs(H))))
    if not np.allclose(H, H.T, rtol=0, atol=1e-10 * scale):
        raise ReconstructionError("H is not symmetric")
    if np.max(np.abs(np.diag(H) + 1.0)) > 1e-8 * scale:
        raise ReconstructionError("diagonal of H must be -1")
    lam, U = np.linalg.eigh(0.5 * (H + H.T))
    thresh = rtol * float(np.max(np.abs(lam)))
    neg = np.flatnonzero(lam < -thresh)
    pos = np.flatnonzero(lam > thresh)
    if len(neg) != 1:
        raise ReconstructionError(f"H needs exactly one negative eigenvalue, found {len(neg)}")
    if len(pos) > d:
        raise ReconstructionError(f"H has {len(pos)} positive eigenvalues but d = {d}")
    t = np.sqrt(-lam[neg[0]]) * U[:, neg[0]]
    if t[0] < 0:
        t = -t
    if np.any(t <= 0):
        raise ReconstructionError("time coordinates do not share one sign")
    spatial = np.zeros((n, d))
    if len(pos):
        spatial[:, :len(pos)] = U[:, pos] * np.sqrt(lam[pos])
    # Re-lift so each point sits on the sheet to machine precision.
    return hypgeo.lift(spatial) if n else spatial


def comparison_matrix(i: int, j: int, k: int, n: int) -> np.ndarray:
    """Dense ``M`` with ``-1/2`` at ``(i, j), (j, i)`` and ``+1/2`` at
    ``(i, k), (k, i)``, so ``<H, M> = -H[i, j] + H[i, k]``."""
    check_triplets([[i, j, k]], n)
    M = np.zeros((n, n))
    M[i, j] = M[j, i] = -0.5
    M[i, k] = M[k, i] = 0.5
    return M


def frobenius_products(H, triplets) -> np.ndarray:
    """``<H, M_t>`` for every triplet without forming the matrices."""
    H = np.asarray(H, dtype=float)
    T = check_triplets(triplets, H.shape[0])
    i, j, k = T.T
    return 0.5 * (H[i, k] + H[k, i]) - 0.5 * (H[i, j] + H[j, i])


def signed_comparison_sum(triplets, weights, n: int) -> np.ndarray:
    """``sum_t weights[t] M_t``."""
    T = np.asarray(triplets)
    w = 0.5 * np.asarray(weights, dtype=float)
    S = np.zeros((n, n))
    i, j, k = T.T
    np.add.at(S, (i, j), -w)
    np.add.at(S, (j, i), -w)
    np.add.at(S, (i, k), w)
    np.add.at(S, (k, i), w)
    return S


def gramian_empirical_risk(H, triplets, labels, loss: LossFunction) -> float:
    """``mean(loss(-y <H, M_t>))``."""
    T = check_triplets(triplets, np.asarray(H).shape[0])
    if len(T) == 0:
        raise DomainError("empirical risk needs at least one observation")
    y = check_labels(labels, len(T))
    return float(np.mean(loss(-y * frobenius_products(H, T))))


def gramian_of_embedding(emb: Embedding) -> np.ndarray:
    """Lorentz Gramian for hyperbolic embeddings, plain Gramian otherwise."""
    return lorentz_gramian(emb) if emb.space == HYPERBOLIC else gramian(emb.points)


# ---------------------------------------------------------------------------
# Matrix file format


def write_matrix(A, path) -> None:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    with open(path, "w", encoding="utf-8") as fh:
        for row in A:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        rows = [line.strip() for line in fh if line.strip()]
    try:
        A = np.array([[float(v) for v in r.split(",")] for r in rows], dtype=float)
    except ValueError as exc:
        raise DimensionError(f"{path}: ragged or non-numeric matrix") from exc
    if A.ndim != 2:
        raise DimensionError(f"{path}: ragged matrix")
    return A
