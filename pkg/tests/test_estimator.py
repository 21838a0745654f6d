import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from cachedof.estimator import DeliveryTimeEstimator
from cachedof.model import Regime

F_EX = [0.2, 0.1, 0, 0.15, 0.25, 0.35, 0]


def test_predict_example():
    est = DeliveryTimeEstimator().fit()
    assert est.regime_ is Regime.MID
    assert est.n_features_in_ == 7
    assert est.predict([F_EX])[0] == pytest.approx(7 / 30)


def test_schemes():
    X = np.array([F_EX, np.zeros(7)])
    ts = DeliveryTimeEstimator(scheme="time-sharing").fit().predict(X)
    assert ts == pytest.approx([7 / 20, 0])


def test_transform_and_bounds():
    est = DeliveryTimeEstimator().fit(np.array([F_EX]))
    d = est.transform([F_EX])
    assert d[0] == pytest.approx([6 / 7, 3 / 7, 0, 9 / 14, 15 / 14, 3 / 2, 0], abs=1e-8)
    b = est.bounds([F_EX])
    assert b[0] == pytest.approx([0.21, 7 / 30, 7 / 30], abs=1e-9)
    low = DeliveryTimeEstimator(M=2, N=3).fit().bounds([F_EX])
    assert np.isnan(low[0, 2]) and low[0, 0] == pytest.approx(low[0, 1])


def test_params_and_clone():
    est = DeliveryTimeEstimator(K=2, M=3, N=2)
    assert est.get_params() == {"K": 2, "M": 3, "N": 2, "scheme": "proposed"}
    other = clone(est).set_params(M=5)
    assert other.fit().regime_ is Regime.HIGH_M
    assert not hasattr(est, "config_")


def test_pipeline_fit_transform():
    pipe = make_pipeline(DeliveryTimeEstimator(K=2, M=3, N=2))
    out = pipe.fit_transform(np.array([[0.5, 0.5, 0.0], [0.0, 0.0, 1.0]]))
    assert out.shape == (2, 3)


def test_validation():
    with pytest.raises(NotFittedError):
        DeliveryTimeEstimator().predict([F_EX])
    est = DeliveryTimeEstimator().fit()
    with pytest.raises(ValueError):
        est.predict([[0.1, 0.2]])
    with pytest.raises(ValueError):
        est.predict([[1.5, 0, 0, 0, 0, 0, 0]])
    with pytest.raises(ValueError):
        DeliveryTimeEstimator(scheme="greedy").fit()
