"""scikit-learn style wrappers around the HOE and EOE fitters.

``X`` is an ``(m, 3)`` integer array of triplets ``(i, j, k)`` with
``j < k`` and ``y`` holds the +-1 labels.  ``predict`` returns the sign of
the hypothesis.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .dataset import check_labels, check_triplets
from .embed import (EUCLIDEAN, HYPERBOLIC, FitConfig, LossFunction, fit_embedding,
                    empirical_risk, hypotheses)
from .hypgeo import BallRestriction


class _OrdinalEmbedding(ClassifierMixin, BaseEstimator):
    _space = None

    def __init__(self, n_components=2, radius=3.0, loss="hinge", step_size=0.05,
                 epochs=200, batch_size=0, init_scale=0.1, decay=False,
                 max_step=0.5, n_entities=None, random_state=0):
        self.n_components = n_components
        self.radius = radius
        self.loss = loss
        self.step_size = step_size
        self.epochs = epochs
        self.batch_size = batch_size
        self.init_scale = init_scale
        self.decay = decay
        self.max_step = max_step
        self.n_entities = n_entities
        self.random_state = random_state

    def _config(self):
        return FitConfig(BallRestriction(float(self.radius)), step_size=self.step_size,
                         epochs=int(self.epochs), batch_size=int(self.batch_size),
                         seed=self.random_state, init_scale=self.init_scale,
                         decay=bool(self.decay), max_step=self.max_step)

    def fit(self, X, y):
        T = check_triplets(X)
        labels = check_labels(y, len(T))
        n = self.n_entities if self.n_entities is not None else int(T.max()) + 1
        self.n_entities_ = int(n)
        self.classes_ = np.array([-1, 1])
        self.embedding_ = fit_embedding(self._space, (T, labels), self._config(),
                                        LossFunction(self.loss), self.n_entities_,
                                        int(self.n_components))
        self.risk_trace_ = list(self.embedding_.risk_trace)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "embedding_")
        return hypotheses(self.embedding_, check_triplets(X, self.n_entities_))

    def predict(self, X):
        return np.where(self.decision_function(X) > 0, 1, -1)

    def risk(self, X, y):
        """Empirical risk of the fitted embedding on ``(X, y)``."""
        check_is_fitted(self, "embedding_")
        return empirical_risk(self.embedding_, X, y, LossFunction(self.loss))

    @property
    def points_(self):
        check_is_fitted(self, "embedding_")
        return self.embedding_.points


class HyperbolicOrdinalEmbedding(_OrdinalEmbedding):
    """Ordinal embedding on the hyperboloid with ``f = cosh``."""

    _space = HYPERBOLIC


class EuclideanOrdinalEmbedding(_OrdinalEmbedding):
    """Ordinal embedding in Euclidean space with ``f(x) = x**2``."""

    _space = EUCLIDEAN
