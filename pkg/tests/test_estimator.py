import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from astcrf.estimator import BaselineRanker, TransformCRF
from astcrf.synthetic import generate
from astcrf.transforms import TransformLabeling


@pytest.fixture(scope="module")
def data():
    return generate(30, 15, seed=0, noise=0.1)


@pytest.fixture(scope="module")
def fitted(data):
    return TransformCRF(G=60).fit(data)


class TestTransformCRF:
    def test_params(self):
        est = TransformCRF(q=1.0, G=5)
        assert est.get_params()["q"] == 1.0
        assert clone(est).get_params() == est.get_params()

    def test_fitted_attributes(self, fitted):
        assert fitted.n_features_ == fitted.model_.n_features
        assert fitted.train_log_
        assert np.isfinite(fitted.objective_)

    def test_predict(self, fitted, data):
        preds = fitted.predict([d.ast for d in data[:5]])
        assert all(isinstance(p, TransformLabeling) for p in preds)
        assert fitted.score(data) > 0.8

    def test_predict_ranked(self, fitted, data):
        ranked = fitted.predict_ranked(data[:3], k=3)
        assert all(len(r) == 3 for r in ranked)
        for r in ranked:
            probs = [p for _, p in r]
            assert probs == sorted(probs, reverse=True)
        with pytest.raises(ValueError):
            fitted.predict_ranked(data[:1], k=0)

    def test_x_y_form(self, data):
        est = TransformCRF(G=10).fit([d.ast for d in data], [d.labels for d in data])
        assert est.model_.n_features > 0
        with pytest.raises(ValueError):
            TransformCRF(G=1).fit([d.ast for d in data], [d.labels for d in data[:-1]])

    def test_input_checks(self, fitted, data):
        with pytest.raises(TypeError):
            fitted.predict(data[0].ast)
        with pytest.raises(TypeError):
            TransformCRF().fit([data[0].ast])
        with pytest.raises(ValueError):
            TransformCRF().fit([])

    def test_not_fitted(self, data):
        with pytest.raises(NotFittedError):
            TransformCRF().predict([data[0].ast])

    def test_save_load(self, fitted, data, tmp_path):
        fitted.save(tmp_path / "m.json")
        again = TransformCRF.load(tmp_path / "m.json")
        assert again.predict([d.ast for d in data[:10]]) == fitted.predict([d.ast for d in data[:10]])
        assert again.G == 60


class TestBaselineRanker:
    def test_fit_rank(self, data, tmp_path):
        est = BaselineRanker().fit(data)
        ranked = est.rank(data[0].ast, 3)
        assert 1 <= len(ranked) <= 3
        est.save(tmp_path / "b.json")
        again = BaselineRanker.load(tmp_path / "b.json")
        assert again.rank(data[0].ast, 3) == ranked
        assert len(est.predict(data[:4])) == 4

    def test_not_fitted(self, data):
        with pytest.raises(NotFittedError):
            BaselineRanker().rank(data[0].ast, 1)
