import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypordinal import dataset as ds, gramian as gm, hypgeo
from hypordinal.embed import EUCLIDEAN, HYPERBOLIC, Embedding, LossFunction, empirical_risk
from hypordinal.exceptions import DimensionError, ReconstructionError


def _lorentz_oracle(X):
    n = len(X)
    return np.array([[hypgeo.minkowski_inner(X[a], X[b]) for b in range(n)] for a in range(n)])


class TestEuclideanNorms:
    def test_identities(self, rng):
        X = rng.normal(size=(9, 3))
        G = X @ X.T
        nuc, mx = gm.euclidean_norm_identities(X)
        np.testing.assert_allclose(nuc, np.sum(np.linalg.svd(G, compute_uv=False)), rtol=1e-10)
        np.testing.assert_allclose(mx, np.max(np.abs(G)), rtol=1e-12)
        assert nuc <= len(X) * mx

    def test_norm_helpers(self):
        A = np.diag([3.0, -4.0])
        assert gm.nuclear_norm(A) == 7.0 and gm.max_norm(A) == 4.0
        assert gm.max_norm(np.zeros((0, 0))) == 0.0


class TestLorentzGramian:
    def test_matches_loop(self, rng):
        X = hypgeo.random_points(6, 3, 2.0, rng)
        np.testing.assert_allclose(gm.lorentz_gramian(X), _lorentz_oracle(X), atol=1e-12)

    def test_accepts_embedding(self, rng):
        emb = Embedding(HYPERBOLIC, hypgeo.random_points(4, 2, 1.0, rng))
        np.testing.assert_array_equal(gm.gramian_of_embedding(emb), gm.lorentz_gramian(emb.points))

    def test_decomposition_sums(self, rng):
        X = hypgeo.random_points(5, 2, 2.0, rng)
        dec = gm.coordinate_decompose(X)
        np.testing.assert_allclose(dec.lorentz, gm.lorentz_gramian(X))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            gm.DecomposedGramian(np.eye(2), np.eye(3))


class TestConditions:
    def test_valid_instance_passes(self, rng):
        X = hypgeo.random_points(8, 3, 1.5, rng)
        report = gm.check_conditions(gm.coordinate_decompose(X), 3, R=1.5, C=1.5)
        assert gm.all_ok(report)
        assert set(report) == {"a-", "a+", "b-", "b+", "c", "d", "e-", "e+", "f-", "f+"}

    def test_radius_violation(self, rng):
        X = hypgeo.random_points(6, 2, 1.0, rng)
        X[0] = hypgeo.lift(np.array([np.sinh(1.5), 0.0]))
        report = gm.check_conditions(gm.coordinate_decompose(X), 2, R=1.0)
        assert not report["e-"].ok and not report["e+"].ok
        assert report["e-"].slack < 0

    def test_rank_violation(self, rng):
        X = hypgeo.random_points(6, 3, 1.0, rng)
        report = gm.check_conditions(gm.coordinate_decompose(X), 2)
        assert not report["b+"].ok

    def test_broken_diagonal(self, rng):
        dec = gm.coordinate_decompose(hypgeo.random_points(4, 2, 1.0, rng))
        bad = gm.DecomposedGramian(dec.g_minus, dec.g_plus + np.eye(4))
        assert not gm.check_conditions(bad, 2)["c"].ok

    def test_rank(self):
        assert gm.numerical_rank(np.diag([1.0, 1e-12, 0.0])) == 1
        assert gm.numerical_rank(np.zeros((3, 3))) == 0


class TestReconstruction:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 15), st.integers(1, 4), st.floats(0.1, 3.0), st.integers(0, 10**6))
    def test_distances_round_trip(self, n, d, R, seed):
        X = hypgeo.random_points(n, d, R, np.random.default_rng(seed))
        Y = gm.reconstruct_points(gm.lorentz_gramian(X), d)
        np.testing.assert_allclose(hypgeo.pairwise_distances(Y), hypgeo.pairwise_distances(X),
                                   atol=1e-7)

    def test_eigen_decompose(self, rng):
        X = hypgeo.random_points(5, 2, 1.0, rng)
        dec = gm.eigen_decompose(gm.lorentz_gramian(X), 2)
        np.testing.assert_allclose(dec.lorentz, gm.lorentz_gramian(X), atol=1e-9)

    def test_rejects_non_symmetric(self):
        H = -np.ones((2, 2))
        H[0, 1] = -2.0
        with pytest.raises(ReconstructionError):
            gm.reconstruct_points(H, 2)

    def test_rejects_diagonal(self):
        with pytest.raises(ReconstructionError):
            gm.reconstruct_points(np.eye(2), 2)

    def test_rejects_too_many_positive(self, rng):
        X = hypgeo.random_points(6, 3, 1.0, rng)
        with pytest.raises(ReconstructionError):
            gm.reconstruct_points(gm.lorentz_gramian(X), 1)

    def test_rejects_two_negative(self):
        H = -np.eye(3)
        with pytest.raises(ReconstructionError):
            gm.reconstruct_points(H, 2)


class TestComparisonMatrices:
    def test_dense_matches_fast(self, rng):
        H = rng.normal(size=(5, 5))
        H = H + H.T
        T = ds.enumerate_triplets(5)
        dense = [np.sum(H * gm.comparison_matrix(i, j, k, 5)) for i, j, k in T]
        np.testing.assert_allclose(gm.frobenius_products(H, T), dense, atol=1e-14)

    def test_signed_sum(self, rng):
        T = ds.enumerate_triplets(4)
        w = rng.normal(size=len(T))
        dense = sum(wt * gm.comparison_matrix(*t, 4) for wt, t in zip(w, T))
        np.testing.assert_allclose(gm.signed_comparison_sum(T, w, 4), dense, atol=1e-14)

    def test_risk_equivalence(self, rng):
        X = hypgeo.random_points(7, 2, 2.0, rng)
        D = ds.tree_distances(ds.generate_weighted_tree(7, seed=0))
        T, y = ds.sample_observations(D, ds.LinkFunction.step(0.3), 300, seed=1)
        loss = LossFunction("ramp")
        np.testing.assert_allclose(
            gm.gramian_empirical_risk(gm.lorentz_gramian(X), T, y, loss),
            empirical_risk(Embedding(HYPERBOLIC, X), T, y, loss), atol=1e-10)

    def test_euclidean_gramian(self, rng):
        emb = Embedding(EUCLIDEAN, rng.normal(size=(3, 2)))
        np.testing.assert_allclose(gm.gramian_of_embedding(emb), emb.points @ emb.points.T)


class TestMatrixFiles:
    def test_round_trip(self, tmp_path, rng):
        A = rng.normal(size=(3, 3))
        gm.write_matrix(A, tmp_path / "a.csv")
        np.testing.assert_array_equal(gm.read_matrix(tmp_path / "a.csv"), A)

    def test_ragged(self, tmp_path):
        (tmp_path / "a.csv").write_text("1,2\n3\n")
        with pytest.raises(DimensionError):
            gm.read_matrix(tmp_path / "a.csv")


def _at(r):
    return hypgeo.lift(np.array([np.sinh(r), 0.0]))


class TestDocumentedExamples:
    def test_euclidean_small_cases(self):
        np.testing.assert_array_equal(gm.gramian(np.zeros((1, 2))), [[0.0]])
        np.testing.assert_allclose(gm.gramian(np.eye(2)), np.eye(2))
        nuc, mx = gm.euclidean_norm_identities(np.array([[1.0, 0.0], [0.0, 2.0]]))
        np.testing.assert_allclose((nuc, mx), (5.0, 4.0), rtol=1e-14)
        assert gm.euclidean_norm_identities(np.zeros((4, 3))) == (0.0, 0.0)

    def test_lorentz_small_cases(self):
        x0 = hypgeo.base_point(2)[None, :]
        np.testing.assert_allclose(gm.lorentz_gramian(x0), [[-1.0]])
        dec = gm.coordinate_decompose(x0)
        np.testing.assert_allclose(dec.g_minus, [[1.0]])
        np.testing.assert_allclose(dec.g_plus, [[0.0]])
        r = 1.3
        H = gm.lorentz_gramian(np.stack([_at(0.0), _at(r)]))
        np.testing.assert_allclose(H[0, 1], -np.cosh(r), rtol=1e-14)

    def test_broken_conditions(self):
        X = np.stack([_at(0.2), _at(0.9), _at(-0.4)])
        dec = gm.coordinate_decompose(X)
        rep = gm.check_conditions(gm.DecomposedGramian(np.zeros((3, 3)), dec.g_plus), d=2)
        assert not rep["b-"].ok
        gp = dec.g_plus.copy()
        gp[1, 1] += 0.1
        assert not gm.check_conditions(gm.DecomposedGramian(dec.g_minus, gp), d=2)["c"].ok

    def test_reconstruction_small_cases(self):
        np.testing.assert_allclose(gm.reconstruct_points([[-1.0]], 2), [[1.0, 0.0, 0.0]])
        c = np.cosh(1.0)
        X = gm.reconstruct_points([[-1.0, -c], [-c, -1.0]], 2)
        np.testing.assert_allclose(hypgeo.hyperbolic_distance(X[0], X[1]), 1.0, rtol=1e-12)

    def test_comparison_matrix_n3(self):
        M = gm.comparison_matrix(0, 1, 2, 3)
        np.testing.assert_array_equal(M, [[0, -0.5, 0.5], [-0.5, 0, 0], [0.5, 0, 0]])
        np.testing.assert_array_equal(M.sum(axis=1), [0.0, -0.5, 0.5])
        assert np.trace(M) == 0.0

    def test_gramian_risk_cases(self):
        hinge = LossFunction("hinge")
        T = ds.enumerate_triplets(4)
        y = np.ones(len(T))
        assert gm.gramian_empirical_risk(-np.ones((4, 4)), T, y, hinge) == 1.0
        H = np.zeros((3, 3))
        H[0, 2] = H[2, 0] = 2.0
        assert gm.gramian_empirical_risk(H, [[0, 1, 2]], [1], hinge) == 0.0
