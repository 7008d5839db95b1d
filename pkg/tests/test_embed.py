import numpy as np
import pytest

import oracles
from hypordinal import dataset as ds, embed, hypgeo
from hypordinal.embed import (EUCLIDEAN, HYPERBOLIC, Embedding, FitConfig, LossFunction,
                              Transform)
from hypordinal.exceptions import (CapacityError, DimensionError, DomainError,
                                   TrainingError, ValidityError)
from hypordinal.hypgeo import BallRestriction

HINGE = LossFunction("hinge")
RAMP = LossFunction("ramp")


def _axis_point(r, angle=0.0):
    return hypgeo.lift(np.sinh(r) * np.array([np.cos(angle), np.sin(angle)]))


class TestLosses:
    def test_hinge(self):
        np.testing.assert_allclose(HINGE([-2.0, -1.0, 0.0, 1.5]), [0.0, 0.0, 1.0, 2.5])

    def test_ramp(self):
        np.testing.assert_allclose(RAMP([-2.0, -0.5, 0.0, 3.0]), [0.0, 0.5, 1.0, 1.0])

    def test_knots_have_zero_derivative(self):
        np.testing.assert_array_equal(HINGE.derivative([-1.0, -0.5]), [0.0, 1.0])
        np.testing.assert_array_equal(RAMP.derivative([-1.0, -0.5, 0.0]), [0.0, 1.0, 0.0])

    def test_lipschitz(self, rng):
        a, b = rng.normal(size=(2, 500)) * 3
        for loss in (HINGE, RAMP):
            assert np.all(np.abs(loss(a) - loss(b)) <= np.abs(a - b) + 1e-12)
            assert loss.lipschitz_constant == 1.0

    def test_unknown(self):
        with pytest.raises(DomainError):
            LossFunction("logistic")


class TestHypotheses:
    def test_cosh_example(self):
        X = np.stack([hypgeo.base_point(2), _axis_point(1.0), _axis_point(2.0, np.pi)])
        emb = Embedding(HYPERBOLIC, X)
        h = embed.hypothesis(0, 1, 2, emb)
        np.testing.assert_allclose(h, oracles.FROZEN["hypothesis_cosh_1_2"], rtol=1e-12)

    def test_lorentz_matches_distance_form(self, rng):
        emb = Embedding(HYPERBOLIC, hypgeo.random_points(8, 3, 2.0, rng))
        T = ds.enumerate_triplets(8)
        np.testing.assert_allclose(embed.hypotheses(emb, T, method="lorentz"),
                                   embed.hypotheses(emb, T, method="distance"), rtol=1e-9,
                                   atol=1e-9)

    def test_euclidean_square(self):
        emb = Embedding(EUCLIDEAN, [[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
        assert embed.hypothesis(0, 1, 2, emb) == 1.0 - 4.0

    def test_antisymmetry(self, rng):
        emb = Embedding(EUCLIDEAN, rng.normal(size=(4, 2)))
        h = embed.hypotheses(emb, [[0, 1, 2]], Transform("cosh_hoe"))[0]
        X = emb.points
        dij, dik = np.linalg.norm(X[0] - X[1]), np.linalg.norm(X[0] - X[2])
        np.testing.assert_allclose(h, np.cosh(dij) - np.cosh(dik))

    def test_lorentz_needs_cosh(self, rng):
        emb = Embedding(EUCLIDEAN, rng.normal(size=(4, 2)))
        with pytest.raises(DomainError):
            embed.hypotheses(emb, [[0, 1, 2]], method="lorentz")

    def test_out_of_range(self, rng):
        emb = Embedding(EUCLIDEAN, rng.normal(size=(4, 2)))
        with pytest.raises(DomainError):
            embed.hypothesis(0, 1, 9, emb)

    def test_invalid_embedding(self):
        with pytest.raises(ValidityError):
            Embedding(HYPERBOLIC, [[0.5, 0.0, 0.0]])
        with pytest.raises(DimensionError):
            Embedding(EUCLIDEAN, [1.0, 2.0])


class TestRisks:
    def test_empirical_risk_manual(self):
        emb = Embedding(EUCLIDEAN, [[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
        # h = -3; loss(-y h) for y=+1 is hinge(3) = 4, for y=-1 hinge(-3) = 0
        assert embed.empirical_risk(emb, [[0, 1, 2], [0, 1, 2]], [1, -1], HINGE) == 2.0

    def test_empty_sample(self, rng):
        emb = Embedding(EUCLIDEAN, rng.normal(size=(3, 2)))
        with pytest.raises(DomainError):
            embed.empirical_risk(emb, np.zeros((0, 3), dtype=int), [], HINGE)

    def test_expected_risk_monte_carlo(self, rng):
        D = ds.tree_distances(ds.generate_weighted_tree(6, seed=3))
        link = ds.LinkFunction.step(0.3)
        emb = Embedding(HYPERBOLIC, hypgeo.random_points(6, 2, 1.0, rng))
        exact = embed.expected_risk_exact(emb, D, link, HINGE)
        T, y = ds.sample_observations(D, link, 200_000, seed=1)
        np.testing.assert_allclose(embed.empirical_risk(emb, T, y, HINGE), exact, rtol=0.02)

    def test_expected_risk_infinite_h(self):
        h = np.array([np.inf, -np.inf])
        assert embed.expected_risk_from_hypotheses(h, np.array([1.0, 0.0]), RAMP) == 0.0

    def test_capacity(self, monkeypatch):
        monkeypatch.setattr(embed, "MAX_TRIPLETS", 10)
        with pytest.raises(CapacityError):
            embed._universe(5)

    def test_accuracy(self):
        emb = Embedding(EUCLIDEAN, [[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
        assert embed.accuracy(emb, [[0, 1, 2], [1, 0, 2]], [-1, 1]) == 0.5


class TestGradients:
    @pytest.mark.parametrize("space", [HYPERBOLIC, EUCLIDEAN])
    def test_finite_difference(self, space, rng):
        n, d = 6, 2
        X = (hypgeo.random_points(n, d, 1.0, rng) if space == HYPERBOLIC
             else rng.normal(size=(n, d)))
        T = ds.enumerate_triplets(n)
        w = rng.normal(size=len(T))

        def f(Z):
            return float(np.sum(w * embed._raw_hypotheses(space, Z, T)))

        G = embed.hypothesis_weight_gradient(space, X, T, w)
        if space == HYPERBOLIC:
            G = G * hypgeo.lorentz_sign(d + 1)
        num = np.zeros_like(X)
        eps = 1e-6
        for a in range(X.shape[0]):
            for b in range(X.shape[1]):
                E = np.zeros_like(X)
                E[a, b] = eps
                num[a, b] = (f(X + E) - f(X - E)) / (2 * eps)
        np.testing.assert_allclose(G, num, rtol=1e-6, atol=1e-6)

    def test_riemannian_directional_derivative(self, rng):
        n = 5
        D = ds.tree_distances(ds.generate_weighted_tree(n, seed=0))
        T, y = ds.sample_observations(D, ds.LinkFunction.step(0.3), 400, seed=0)
        emb = Embedding(HYPERBOLIC, hypgeo.random_points(n, 2, 1.0, rng))
        G = embed.empirical_risk_gradient(emb, T, y, HINGE)
        np.testing.assert_allclose(hypgeo.minkowski_inner(emb.points, G), 0.0, atol=1e-10)
        V = hypgeo.project_to_tangent(emb.points, rng.normal(size=emb.points.shape))
        t = 1e-6
        up = Embedding(HYPERBOLIC, hypgeo.exp_map(emb.points, t * V))
        down = Embedding(HYPERBOLIC, hypgeo.exp_map(emb.points, -t * V))
        num = (embed.empirical_risk(up, T, y, HINGE)
               - embed.empirical_risk(down, T, y, HINGE)) / (2 * t)
        np.testing.assert_allclose(np.sum(hypgeo.minkowski_inner(G, V)), num, rtol=1e-4)

    def test_expected_gradient_tangent(self, rng):
        D = ds.tree_distances(ds.generate_weighted_tree(5, seed=0))
        emb = Embedding(HYPERBOLIC, hypgeo.random_points(5, 2, 1.0, rng))
        G = embed.expected_risk_gradient(emb, D, ds.LinkFunction.step(0.3), HINGE)
        np.testing.assert_allclose(hypgeo.minkowski_inner(emb.points, G), 0.0, atol=1e-10)


class TestFitting:
    @pytest.fixture(scope="class")
    @classmethod
    def data(cls):
        D = ds.tree_distances(ds.generate_weighted_tree(8, seed=1))
        T, y = ds.sample_observations(D, ds.LinkFunction.step(0.4), 1500, seed=2)
        return D, T, y

    @pytest.mark.parametrize("fit", [embed.fit_hoe, embed.fit_eoe])
    def test_risk_decreases(self, fit, data):
        _, T, y = data
        cfg = FitConfig(BallRestriction(2.0), step_size=0.5, epochs=100, init_scale=0.5)
        emb = fit((T, y), cfg, HINGE, 8, 2)
        first = emb.risk_trace[0][1]
        assert min(r for _, r in emb.risk_trace) < 0.6 * first
        np.testing.assert_allclose(embed.empirical_risk(emb, T, y, HINGE),
                                   min(r for _, r in emb.risk_trace))

    @pytest.mark.parametrize("space", [HYPERBOLIC, EUCLIDEAN])
    def test_ball_respected(self, space, data):
        _, T, y = data
        cfg = FitConfig(BallRestriction(0.7), step_size=0.5, epochs=30, batch_size=64)
        emb = embed.fit_embedding(space, (T, y), cfg, HINGE, 8, 3)
        assert emb.satisfies(cfg.restriction)

    def test_epochs_zero(self, data):
        _, T, y = data
        cfg = FitConfig(epochs=0, seed=4)
        a = embed.fit_hoe((T, y), cfg, HINGE, 8, 2)
        b = embed.fit_hoe((T, y), cfg, HINGE, 8, 2)
        np.testing.assert_array_equal(a.points, b.points)
        assert len(a.risk_trace) == 1

    def test_deterministic(self, data):
        _, T, y = data
        cfg = FitConfig(epochs=10, batch_size=100, seed=3)
        a = embed.fit_eoe((T, y), cfg, HINGE, 8, 2)
        b = embed.fit_eoe((T, y), cfg, HINGE, 8, 2)
        np.testing.assert_array_equal(a.points, b.points)

    def test_dissimilarity_input(self, data):
        D, _, _ = data
        cfg = FitConfig(BallRestriction(3.0), step_size=0.2, epochs=150)
        emb = embed.fit_hoe(D, cfg, HINGE, 8, 2)
        T = ds.enumerate_triplets(8)
        assert embed.accuracy(emb, T, ds.noiseless_labels(D, T)) > 0.9

    def test_training_error(self, rng):
        X = hypgeo.random_points(4, 2, 1.0, rng)

        def gradient(Z, idx):
            return np.full_like(Z, np.nan)

        with pytest.raises(TrainingError):
            embed._descend(HYPERBOLIC, X, lambda Z: 1.0, gradient, FitConfig(epochs=2), 4, rng)

    def test_bad_config(self):
        with pytest.raises(DomainError):
            FitConfig(step_size=0.0)
        with pytest.raises(DomainError):
            FitConfig(epochs=-1)

    def test_minimize_expected_risk_beats_fit(self, data):
        D, T, y = data
        link = ds.LinkFunction.step(0.4)
        cfg = FitConfig(BallRestriction(2.0), step_size=0.2, epochs=100, restarts=2)
        star = embed.minimize_expected_risk(D, link, HINGE, HYPERBOLIC, cfg, 2)
        fitted = embed.fit_hoe((T, y), cfg, HINGE, 8, 2)
        assert (embed.expected_risk_exact(star, D, link, HINGE)
                <= embed.expected_risk_exact(fitted, D, link, HINGE) + 1e-9)

    def test_rescale_search_never_worse(self, rng):
        D = ds.tree_distances(ds.generate_weighted_tree(6, seed=0))
        T = ds.enumerate_triplets(6)
        p = ds.label_probabilities(D, T, ds.LinkFunction.step(0.4))

        def objective(Z):
            return embed.expected_risk_from_hypotheses(
                embed._raw_hypotheses(EUCLIDEAN, Z, T), p, RAMP)

        X = rng.normal(size=(6, 2)) * 0.1
        Y = embed.rescale_search(EUCLIDEAN, X, objective, 3.0)
        assert objective(Y) <= objective(X)
        assert np.all(np.linalg.norm(Y, axis=1) <= 3.0 + 1e-12)


class TestFiles:
    @pytest.mark.parametrize("space", [HYPERBOLIC, EUCLIDEAN])
    def test_round_trip(self, space, tmp_path, rng):
        X = (hypgeo.random_points(5, 2, 1.0, rng) if space == HYPERBOLIC
             else rng.normal(size=(5, 2)))
        embed.write_embedding(Embedding(space, X), tmp_path / "e.csv")
        back = embed.read_embedding(tmp_path / "e.csv")
        assert back.space == space
        np.testing.assert_array_equal(back.points, X)

    def test_header(self, rng):
        text = embed.embedding_to_csv(Embedding(EUCLIDEAN, rng.normal(size=(2, 3))))
        assert text.splitlines()[0] == "id,c1,c2,c3"

    def test_trace(self, tmp_path):
        embed.write_risk_trace([(0, 1.5), (1, 0.25)], tmp_path / "t.csv")
        assert (tmp_path / "t.csv").read_text() == "epoch,empirical_risk\n0,1.5\n1,0.25\n"


class TestDocumentedExamples:
    def test_same_point_gives_zero(self, rng):
        X = hypgeo.random_points(3, 2, 1.0, rng)
        X[2] = X[1]
        assert embed.hypothesis(0, 1, 2, Embedding(HYPERBOLIC, X)) == 0.0

    def test_euclidean_one_and_three(self):
        emb = Embedding(EUCLIDEAN, [[0.0, 0.0], [1.0, 0.0], [-3.0, 0.0]])
        assert embed.hypothesis(0, 1, 2, emb) == -8.0

    def test_loss_values(self):
        np.testing.assert_array_equal(HINGE([-2.0, 0.0, 1.0]), [0.0, 1.0, 2.0])
        np.testing.assert_array_equal(RAMP([-2.0, -0.5, 2.0]), [0.0, 0.5, 1.0])
        assert HINGE(-1.0) == RAMP(-1.0) == 0.0
        assert embed.loss_value(HINGE, 1.0) == 2.0

    def test_sign_bookkeeping(self):
        X = np.stack([hypgeo.base_point(2), _axis_point(1.0), _axis_point(2.0, np.pi)])
        assert embed.empirical_risk(Embedding(HYPERBOLIC, X), [[0, 1, 2]], [-1], HINGE) == 0.0

    @pytest.mark.parametrize("loss", [HINGE, RAMP])
    def test_identical_points(self, loss):
        emb = Embedding(HYPERBOLIC, np.tile(hypgeo.base_point(2), (5, 1)))
        D = ds.tree_distances(ds.generate_weighted_tree(5, seed=0))
        T, y = ds.sample_observations(D, ds.LinkFunction.step(0.3), 50, seed=0)
        assert embed.empirical_risk(emb, T, y, loss) == 1.0
        assert embed.expected_risk_exact(emb, D, ds.LinkFunction.step(0.3), loss) == 1.0

    def test_noiseless_margin_zero_ramp_risk(self):
        pos = np.array([0.0, 1.0, 3.0, 7.0])
        D = np.abs(np.subtract.outer(pos, pos))
        emb = Embedding(EUCLIDEAN, 5.0 * pos[:, None])
        assert embed.expected_risk_exact(emb, D, ds.LinkFunction.step(0.5), RAMP) == 0.0

    def test_expected_risk_million_samples(self, rng):
        D = ds.tree_distances(ds.generate_weighted_tree(5, seed=8))
        link = ds.LinkFunction.step(0.3)
        emb = Embedding(HYPERBOLIC, hypgeo.random_points(5, 2, 1.0, rng))
        exact = embed.expected_risk_exact(emb, D, link, HINGE)
        T, y = ds.sample_observations(D, link, 1_000_000, seed=5)
        values = HINGE(-y * embed.hypotheses(emb, T))
        se = values.std(ddof=1) / np.sqrt(len(values))
        assert abs(values.mean() - exact) <= 3 * se

    def test_noiseless_star_hoe(self):
        D = ds.tree_distances(ds.star_tree(4, seed=0))
        cfg = FitConfig(BallRestriction(3.0), step_size=0.5, epochs=300, init_scale=0.5)
        emb = embed.fit_hoe(D, cfg, HINGE, 5, 2)
        T = ds.enumerate_triplets(5)
        y = ds.noiseless_labels(D, T)
        assert embed.empirical_risk(emb, T, y, HINGE) < 0.05
        assert embed.accuracy(emb, T, y) > 0.95

    def test_final_risk_not_above_initial(self):
        D = ds.tree_distances(ds.generate_weighted_tree(6, seed=2))
        T, y = ds.sample_observations(D, ds.LinkFunction.step(0.3), 300, seed=2)
        for seed in range(10):
            cfg = FitConfig(BallRestriction(2.0), epochs=20, seed=seed, batch_size=32)
            emb = embed.fit_hoe((T, y), cfg, HINGE, 6, 2)
            assert emb.risk_trace[-1][1] <= emb.risk_trace[0][1]

    def test_collinear_eoe(self):
        D = np.abs(np.subtract.outer(np.arange(4.0), np.arange(4.0)))
        D[0, 3] = D[3, 0] = 3.5  # pairwise-distinct variant of a line
        D[1, 3] = D[3, 1] = 2.2
        cfg = FitConfig(BallRestriction(2.0), step_size=0.2, epochs=200)
        emb = embed.fit_eoe(D, cfg, HINGE, 4, 2)
        T = ds.enumerate_triplets(4)
        assert embed.accuracy(emb, T, ds.noiseless_labels(D, T)) > 0.95
        assert np.all(np.linalg.norm(emb.points, axis=1) <= 2.0 + 1e-9)

    def test_minimizer_identical_start(self):
        D = ds.tree_distances(ds.generate_weighted_tree(5, seed=1))
        cfg = FitConfig(BallRestriction(2.0), epochs=0, init_scale=0.0, restarts=3)
        emb = embed.minimize_expected_risk(D, ds.LinkFunction.step(0.3), HINGE, HYPERBOLIC, cfg, 2)
        assert embed.expected_risk_exact(emb, D, ds.LinkFunction.step(0.3), HINGE) == 1.0

    def test_minimizer_not_worse_than_inits(self, rng):
        D = ds.tree_distances(ds.generate_weighted_tree(5, seed=1))
        link = ds.LinkFunction.step(0.3)
        inits = [hypgeo.random_points(5, 2, 1.5, rng) for _ in range(2)]
        cfg = FitConfig(BallRestriction(2.0), epochs=30, step_size=0.2, restarts=3)
        emb = embed.minimize_expected_risk(D, link, RAMP, HYPERBOLIC, cfg, 2, inits=inits)
        best = embed.expected_risk_exact(emb, D, link, RAMP)
        for X in inits:
            assert best <= embed.expected_risk_exact(Embedding(HYPERBOLIC, X), D, link, RAMP)

    def test_noiseless_tree_large_radius(self):
        D = ds.tree_distances(ds.generate_weighted_tree(6, seed=4))
        link = ds.LinkFunction.step(0.5)
        cfg = FitConfig(BallRestriction(6.0), step_size=1.0, epochs=400, init_scale=0.5,
                        restarts=3)
        emb = embed.minimize_expected_risk(D, link, RAMP, HYPERBOLIC, cfg, 2)
        assert embed.expected_risk_exact(emb, D, link, RAMP) <= 0.02
