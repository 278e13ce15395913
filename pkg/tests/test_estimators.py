import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from photonreadout.core import GHZ, MHZ, US
from photonreadout.estimators import ReadoutContrast

X = np.array([[5 * GHZ, 4.09 * GHZ, 53.6 * MHZ, 4.08 * MHZ, 1 * US],
              [20 * GHZ, 16.36 * GHZ, 180 * MHZ, 9.99 * MHZ, 0.6 * US]])


def test_params_and_clone():
    est = ReadoutContrast(model="full", eta=0.9)
    assert est.get_params()["eta"] == 0.9
    c = clone(est)
    assert c.get_params() == est.get_params()
    est.set_params(eta=0.5)
    assert est.eta == 0.5


def test_predict_both_models():
    d = ReadoutContrast().fit(X).predict(X)
    f = ReadoutContrast(model="full").fit(X).predict(X)
    assert d.shape == f.shape == (2,)
    assert np.all(np.abs(d - f) < 0.05)


def test_score_is_r2():
    est = ReadoutContrast().fit(X)
    assert est.score(X, est.predict(X)) == pytest.approx(1.0)


def test_errors():
    with pytest.raises(NotFittedError):
        ReadoutContrast().predict(X)
    with pytest.raises(ValueError):
        ReadoutContrast().fit(X[:, :4])
    with pytest.raises(ValueError):
        ReadoutContrast(model="other").fit(X)
    with pytest.raises(ValueError):
        ReadoutContrast().fit(np.array([[5 * GHZ, 5 * GHZ, 1.0, 1.0, 1.0]]))
