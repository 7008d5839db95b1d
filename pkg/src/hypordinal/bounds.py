"""Closed-form generalization bounds and Monte Carlo checks of them.

``ln`` is the natural logarithm throughout.  Formula evaluators accept
``n >= 2`` so that ``ln n > 0``; anything that enumerates triplets needs
``n >= 3``.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import hypgeo
from .dataset import enumerate_triplets
from .exceptions import DomainError
from .gramian import signed_comparison_sum

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
SQRT12 = math.sqrt(12.0)
VARIANTS = ("theorem1", "lemma5_stated")


@dataclass(frozen=True)
class BoundInputs:
    """Parameters shared by the bound formulas.

    ``loss_range_B`` is the range of the loss over the class (HOE);
    ``nuclear_gamma`` and ``max_B`` bound the Gramian norms (EOE).
    ``mean_radius_C`` defaults to ``radius_R``.
    """

    lipschitz_L: float = 1.0
    radius_R: float = 1.0
    mean_radius_C: float = None
    loss_range_B: float = None
    n: int = 10
    m: int = 1000
    delta: float = 0.1
    nuclear_gamma: float = 0.0
    max_B: float = 0.0

    def __post_init__(self):
        if self.mean_radius_C is None:
            object.__setattr__(self, "mean_radius_C", float(self.radius_R))
        if self.loss_range_B is None:
            object.__setattr__(self, "loss_range_B", loss_range_hoe(self.lipschitz_L, self.radius_R))
        _check_common(self.n, self.m, self.delta)
        if not self.lipschitz_L > 0:
            raise DomainError("Lipschitz constant must be positive")
        for name in ("radius_R", "mean_radius_C", "loss_range_B", "nuclear_gamma", "max_B"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class BoundReport:
    variant: str
    complexity_term: float
    concentration_term: float

    @property
    def total(self) -> float:
        return self.complexity_term + self.concentration_term


def _check_nm(n, m):
    if n < 2:
        raise DomainError("bounds need n >= 2")
    if m < 1:
        raise DomainError("bounds need m >= 1")


def _check_common(n, m, delta):
    _check_nm(n, m)
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")


def loss_range_hoe(L: float, R: float) -> float:
    """Loss range over ``B_R``: ``2 L cosh^2(2R)``."""
    return 2.0 * L * math.cosh(2.0 * R) ** 2


def _bracket(n, m, variant):
    ln = math.log(n)
    if variant == "theorem1":
        return math.sqrt(2.0 * (n + 1) * ln / m) + n * ln / (SQRT12 * m)
    if variant == "lemma5_stated":
        return math.sqrt(2.0 * n * ln / m) + n * ln / (6.0 * m)
    raise DomainError(f"unknown variant {variant!r}")


def rademacher_bound_hoe(C: float, n: int, m: int, variant: str = "theorem1") -> float:
    """Rademacher complexity bound of the HOE class over ``B^C``."""
    _check_nm(n, m)
    if C < 0:
        raise DomainError("C must be nonnegative")
    return (math.cosh(C) ** 2 + math.sinh(C) ** 2) * _bracket(n, m, variant)


def hoe_excess_bound(inputs: BoundInputs, variant: str = "theorem1") -> BoundReport:
    """Excess-risk bound for HOE with explicit ``C`` and loss range."""
    L, m = inputs.lipschitz_L, inputs.m
    complexity = 2.0 * L * rademacher_bound_hoe(inputs.mean_radius_C, inputs.n, m, variant)
    concentration = 2.0 * inputs.loss_range_B * math.sqrt(2.0 * math.log(2.0 / inputs.delta) / m)
    return BoundReport("hoe_" + variant, complexity, concentration)


def hoe_excess_bound_radius(L: float, R: float, n: int, m: int, delta: float) -> BoundReport:
    """HOE bound with ``C = R`` and loss range ``2 L cosh^2(2R)``."""
    rep = hoe_excess_bound(BoundInputs(L, R, R, loss_range_hoe(L, R), n, m, delta))
    return BoundReport("hoe_radius", rep.complexity_term, rep.concentration_term)


def eoe_excess_bound(L: float, gamma: float, B: float, n: int, m: int, delta: float) -> BoundReport:
    """EOE bound for Gramians with nuclear norm ``<= gamma`` and max norm
    ``<= B``."""
    _check_common(n, m, delta)
    if gamma < 0 or B < 0 or not L > 0:
        raise DomainError("need L > 0 and gamma, B >= 0")
    a = n * math.log(n) / m
    c = 12.0 * SQRT2 * L
    complexity = c * (gamma / n) * (math.sqrt(a) + SQRT3 / 9.0 * a)
    concentration = c * B * math.sqrt(math.log(2.0 / delta) / m)
    return BoundReport("eoe", complexity, concentration)


def eoe_excess_bound_radius(L: float, R: float, n: int, m: int, delta: float) -> BoundReport:
    """EOE bound over the radius-``R`` ball, where ``gamma = n R^2`` and
    ``B = R^2``."""
    if R < 0:
        raise DomainError("R must be nonnegative")
    rep = eoe_excess_bound(L, n * R * R, R * R, n, m, delta)
    return BoundReport("eoe_radius", rep.complexity_term, rep.concentration_term)


def decomposed_class_bound(gamma: float, n: int, m: int) -> float:
    """Rademacher bound for one PSD part with nuclear norm ``<= gamma``."""
    _check_nm(n, m)
    return (gamma / n) * _bracket(n, m, "theorem1")


@dataclass(frozen=True)
class ComparisonStats:
    sigma_op: float
    diag_mean: float
    offdiag_mean: float
    variance_per_sample: float


def comparison_matrix_stats(n: int) -> ComparisonStats:
    """Closed-form statistics of a uniformly drawn comparison matrix.

    ``E[M^2]`` has diagonal ``1/n`` and off-diagonal ``-1/(2n(n-1))``;
    every ``M`` has operator norm ``1/sqrt(2)``.
    """
    if n < 3:
        raise DomainError("comparison matrices need n >= 3")
    off = -1.0 / (2.0 * n * (n - 1))
    return ComparisonStats(1.0 / SQRT2, 1.0 / n, off, 1.0 / n - off)


def comparison_second_moment(n: int) -> np.ndarray:
    """``E[M^2]`` by exhaustive enumeration (exact in binary for small n
    up to the final division)."""
    T = enumerate_triplets(n)
    acc = np.zeros((n, n))
    for i, j, k in T:
        M = np.zeros((n, n))
        M[i, j] = M[j, i] = -0.5
        M[i, k] = M[k, i] = 0.5
        acc += M @ M
    return acc / len(T)


def matrix_bernstein_bound(variance_v: float, sigma: float, n: float) -> float:
    """``sqrt(2 v ln n) + sigma ln n / 3``."""
    if variance_v < 0 or sigma < 0:
        raise DomainError("v and sigma must be nonnegative")
    if n < 2:
        raise DomainError("n must be >= 2")
    ln = math.log(n)
    return math.sqrt(2.0 * variance_v * ln) + sigma * ln / 3.0


def scaled_bernstein_class_bound(gamma: float, n: int, m: int) -> float:
    """``(gamma / m)`` times the Bernstein bound at ``v = m (n+1)/n^2`` and
    ``sigma = 1/sqrt(2)``: the chain of inequalities that should reproduce
    :func:`decomposed_class_bound`."""
    return (gamma / m) * matrix_bernstein_bound(m * (n + 1) / n ** 2, 1.0 / SQRT2, n)


def _draw_seed_sequences(seed, draws):
    return np.random.SeedSequence(int(seed)).spawn(draws)


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def mc_operator_norm(n: int, m: int, draws: int = 200, seed: int = 0, threads: int = 1):
    """Monte Carlo mean and standard error of ``||sum_t sigma_t M_t||_op``
    for ``m`` uniform triplets and Rademacher signs."""
    T = enumerate_triplets(n)
    seqs = _draw_seed_sequences(seed, draws)

    def one(ss):
        rng = np.random.default_rng(ss)
        idx = rng.integers(len(T), size=m)
        sig = rng.choice([-1.0, 1.0], size=m)
        S = signed_comparison_sum(T[idx], sig, n)
        return float(np.max(np.abs(np.linalg.eigvalsh(S))))

    vals = np.array(_map(one, seqs, threads))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(draws))


def _mean_cosh2(s, r):
    c = np.cosh(s * r)
    return float(c @ c) / len(r)


def _mean_ball_factor(r, cap, iters=30):
    """Largest ``s`` in ``[0, 1]`` with ``mean cosh^2(s r) <= cap``.

    The map is convex and increasing in ``s``, so Newton from ``s = 1``
    approaches the root from the infeasible side; the final nudge lands on
    the feasible side.
    """
    s = 1.0
    for _ in range(iters):
        g = _mean_cosh2(s, r) - cap
        if g <= 0:
            return s
        step = g * len(r) / float(r @ np.sinh(2.0 * s * r))
        s -= step
        if step <= 1e-15 * s:
            break
    while s > 0 and _mean_cosh2(s, r) > cap:
        s *= 1.0 - 1e-12
    return max(s, 0.0)


def _shrink_to_mean_ball(X, C):
    """Largest common radial scaling keeping ``mean cosh^2 <= cosh^2 C``."""
    cap = math.cosh(C) ** 2
    t = X[:, 0]
    if float(t @ t) / len(t) <= cap:
        return X
    r = np.arccosh(np.maximum(t, 1.0))
    s = _mean_ball_factor(r, cap)
    spatial = X[:, 1:]
    norms = np.sqrt(np.einsum("ij,ij->i", spatial, spatial))
    factor = np.sinh(s * r) / np.where(norms > 0, norms, 1.0)
    return hypgeo.lift(spatial * factor[:, None])


def _lorentz_correlation(X, S):
    return float(np.sum((X[:, 1:] @ X[:, 1:].T - np.outer(X[:, 0], X[:, 0])) * S))


def _ascent_step(X, S, step, max_step):
    """One Riemannian ascent step on ``<H, S>``, written out inline because
    it is the inner loop of the Monte Carlo estimator."""
    G = 2.0 * (S @ X)
    inner = np.einsum("ij,ij->i", X[:, 1:], G[:, 1:]) - X[:, 0] * G[:, 0]
    G += inner[:, None] * X
    norm = np.sqrt(np.maximum(np.einsum("ij,ij->i", G[:, 1:], G[:, 1:]) - G[:, 0] ** 2, 0.0))
    length = np.minimum(step * norm, max_step)
    safe = np.where(norm > 1e-12, norm, 1.0)
    spatial = (np.cosh(length)[:, None] * X[:, 1:]
               + (np.sinh(length) / safe)[:, None] * G[:, 1:])
    return hypgeo.lift(spatial)


def _sup_correlation(S, n, d, C, m, budget, rng, restarts=3, step=0.1, max_step=0.5):
    """Heuristic sup over ``B^C`` of ``<H, S> / m`` by Riemannian ascent.

    The mean-ball constraint is restored by a common radial shrink after
    each step.
    """
    if C == 0:
        return 0.0
    best = 0.0  # all points at the base point give 0
    for _ in range(restarts):
        r = rng.uniform(0.0, C, size=n)
        dirs = rng.standard_normal((n, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        X = _shrink_to_mean_ball(hypgeo.lift(np.sinh(r)[:, None] * dirs), C)
        for _ in range(budget):
            best = max(best, _lorentz_correlation(X, S) / m)
            X = _shrink_to_mean_ball(_ascent_step(X, S, step, max_step), C)
        best = max(best, _lorentz_correlation(X, S) / m)
    return best


def estimate_rademacher_mc(n: int, m: int, C: float, d: int = 2, sigma_draws: int = 200,
                           opt_budget: int = 30, seed: int = 0, threads: int = 1):
    """Monte Carlo lower estimate of the HOE Rademacher complexity.

    Each draw samples ``m`` uniform triplets and Rademacher signs, then
    approximates ``sup (1/m) sum_t sigma_t h_t`` over ``B^C`` by multi-start
    ascent.  The sup is under-approximated, so the estimate is a lower
    estimate.  Draw ``r`` uses the ``r``-th spawned seed, so the result
    does not depend on ``threads``.  Returns ``(estimate, stderr)``.
    """
    if n < 3:
        raise DomainError("need n >= 3")
    if C < 0:
        raise DomainError("C must be nonnegative")
    T = enumerate_triplets(n)
    seqs = _draw_seed_sequences(seed, sigma_draws)

    def one(ss):
        rng = np.random.default_rng(ss)
        idx = rng.integers(len(T), size=m)
        sig = rng.choice([-1.0, 1.0], size=m)
        S = signed_comparison_sum(T[idx], sig, n)
        return _sup_correlation(S, n, d, C, m, opt_budget, rng)

    vals = np.array(_map(one, seqs, threads))
    stderr = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return float(vals.mean()), stderr
