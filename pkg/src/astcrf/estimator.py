"""Estimator wrappers with the familiar fit/predict interface."""

from __future__ import annotations

import json
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .evaluation import BaselineModel, baseline_rank, build_baseline
from .features import build_vocabulary
from .inference import map_assignment, top_k
from .learner import TrainConfig, train
from .model import Model, build_admissible_sets
from .transforms import TransformLabeling
from .trees import Ast


def _check_training(X, y) -> list[TransformLabeling]:
    """Accept labelings directly, or ASTs with labelings/position maps as ``y``."""
    if y is None:
        data = list(X)
        if not all(isinstance(d, TransformLabeling) for d in data):
            raise TypeError("without y, X must be a sequence of TransformLabeling")
    else:
        X, y = list(X), list(y)
        if len(X) != len(y):
            raise ValueError(f"X has {len(X)} trees but y has {len(y)} labelings")
        data = []
        for ast, lab in zip(X, y):
            if not isinstance(ast, Ast):
                raise TypeError(f"expected Ast, got {type(ast).__name__}")
            if isinstance(lab, TransformLabeling):
                lab = lab.labels
            data.append(TransformLabeling(ast, dict(lab)))
    if not data:
        raise ValueError("training data is empty")
    return data


def _check_asts(X) -> list[Ast]:
    if isinstance(X, Ast):
        raise TypeError("X must be a sequence of Ast; wrap a single tree in a list")
    out = []
    for x in X:
        if isinstance(x, TransformLabeling):
            x = x.ast
        if not isinstance(x, Ast):
            raise TypeError(f"expected Ast, got {type(x).__name__}")
        out.append(x)
    return out


class TransformCRF(BaseEstimator):
    """Tree CRF predicting a transform (or EMPTY) for every node of an AST.

    Parameters
    ----------
    delta2 : float
        Gaussian prior variance; the penalty is ``sum(w**2) / (2 * delta2)``.
    q : float
        Strength of the per-example prior that up-weights rare transform counts.
    G : int
        Budget of objective/gradient evaluations for L-BFGS.
    lbfgs_history : int
        Number of correction pairs kept by L-BFGS.
    grad_tol : float
        Stop once the gradient infinity norm falls below this.
    use_observation, use_indicator : bool
        Which feature families to build.
    """

    def __init__(self, delta2: float = 500.0, q: float = 0.5, G: int = 200,
                 lbfgs_history: int = 10, grad_tol: float = 1e-6,
                 use_observation: bool = True, use_indicator: bool = True):
        self.delta2 = delta2
        self.q = q
        self.G = G
        self.lbfgs_history = lbfgs_history
        self.grad_tol = grad_tol
        self.use_observation = use_observation
        self.use_indicator = use_indicator

    def fit(self, X, y=None, callback=None):
        data = _check_training(X, y)
        config = TrainConfig(self.delta2, self.q, self.G, self.lbfgs_history, self.grad_tol)
        vocab = build_vocabulary(data, self.use_observation, self.use_indicator)
        admissible = build_admissible_sets(data)
        result = train(data, vocab, admissible, config, callback=callback)
        self.model_ = result.model
        self.train_log_ = result.log
        self.n_features_ = len(vocab)
        self.converged_ = result.converged
        self.objective_ = result.objective
        return self

    @classmethod
    def from_model(cls, model: Model) -> TransformCRF:
        h = model.hyper
        est = cls(delta2=h.get("delta2") or 500.0, q=h.get("q") if h.get("q") is not None else 0.5,
                  G=h.get("G") if h.get("G") is not None else 200)
        est.model_ = model
        est.n_features_ = model.n_features
        est.train_log_ = []
        return est

    def predict(self, X) -> list[TransformLabeling]:
        check_is_fitted(self, "model_")
        return [map_assignment(a, self.model_) for a in _check_asts(X)]

    def predict_ranked(self, X, k: int = 3) -> list[list[tuple[TransformLabeling, float]]]:
        check_is_fitted(self, "model_")
        if int(k) != k or k < 1:
            raise ValueError("k must be a positive integer")
        return [top_k(a, self.model_, int(k)) for a in _check_asts(X)]

    def rank(self, ast: Ast, k: int) -> list[tuple[TransformLabeling, float]]:
        check_is_fitted(self, "model_")
        return top_k(ast, self.model_, k)

    def score(self, X, y=None) -> float:
        """Top-1 exact-match accuracy."""
        data = _check_training(X, y)
        preds = self.predict([d.ast for d in data])
        return float(np.mean([p.labels == d.labels for p, d in zip(preds, data)]))

    def save(self, path) -> None:
        check_is_fitted(self, "model_")
        self.model_.save(path)

    @classmethod
    def load(cls, path) -> TransformCRF:
        return cls.from_model(Model.load(path))


class BaselineRanker(BaseEstimator):
    """Frequency baseline: rank (node, transform) pairs by P(label, transform)."""

    def __init__(self, max_nodes: int = 3):
        self.max_nodes = max_nodes

    def fit(self, X, y=None):
        self.baseline_ = build_baseline(_check_training(X, y))
        return self

    def rank(self, ast: Ast, k: int) -> list[TransformLabeling]:
        check_is_fitted(self, "baseline_")
        return baseline_rank(ast, self.baseline_, k, self.max_nodes)

    def predict_ranked(self, X, k: int = 3) -> list[list[TransformLabeling]]:
        return [self.rank(a, k) for a in _check_asts(X)]

    def predict(self, X) -> list[TransformLabeling]:
        out = []
        for a, ranked in zip(_check_asts(X), self.predict_ranked(X, 1)):
            out.append(ranked[0] if ranked else TransformLabeling(a, {}))
        return out

    def save(self, path) -> None:
        check_is_fitted(self, "baseline_")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.baseline_.to_obj(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> BaselineRanker:
        with open(path, encoding="utf-8") as fh:
            est = cls()
            est.baseline_ = BaselineModel.from_obj(json.load(fh))
        return est
