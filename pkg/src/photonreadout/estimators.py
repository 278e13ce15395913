"""scikit-learn style wrapper around the contrast models.

Rows of the feature matrix are parameter sets
``[omega_q, omega_r, g, kappa, t_m]`` in rad/s and seconds. Nothing is
learned from data: :meth:`ReadoutContrast.fit` only validates inputs and
records the feature count, so the estimator plugs into pipelines and
parameter searches without pretending to be a trained model.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import PulseParams, SystemParams, make_dimensionless
from .dispersive import contrast_dispersive
from .transport_full import SolverOptions, full_contrast

FEATURES = ("omega_q", "omega_r", "g", "kappa", "t_m")


class ReadoutContrast(RegressorMixin, BaseEstimator):
    """Predict readout contrast for parameter sets.

    Parameters
    ----------
    model : {"dispersive", "full"}
    eta : float
        Detector efficiency applied to every row.
    ratio_tm_tph : float
        t_m / t_ph; the probe is resonant with the up-state cavity line.
    equations, click_formula : str
        Forwarded to :class:`SolverOptions` for ``model="full"``.

    Examples
    --------
    >>> from photonreadout.core import GHZ, MHZ, US
    >>> X = [[5 * GHZ, 4.09 * GHZ, 53.6 * MHZ, 4.08 * MHZ, 1 * US]]
    >>> est = ReadoutContrast().fit(X)
    >>> round(float(est.predict(X)[0]), 2)
    0.71
    """

    def __init__(self, model="dispersive", eta=1.0, ratio_tm_tph=6.0,
                 equations="hermitian", click_formula="physical"):
        self.model = model
        self.eta = eta
        self.ratio_tm_tph = ratio_tm_tph
        self.equations = equations
        self.click_formula = click_formula

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if X.shape[1] != len(FEATURES):
            raise ValueError(f"expected {len(FEATURES)} columns {FEATURES}, got {X.shape[1]}")
        if self.model not in ("dispersive", "full"):
            raise ValueError(f"unknown model {self.model!r}")
        for row in X:
            self._system(row)
        self.n_features_in_ = X.shape[1]
        return self

    def _system(self, row):
        wq, wr, g, k, _ = row
        return SystemParams(wq, wr, g, k, self.eta)

    def _one(self, row):
        p = self._system(row)
        t_m = row[4]
        pulse = PulseParams(t_m / self.ratio_tm_tph)
        if self.model == "dispersive":
            d = make_dimensionless(p, pulse)
            return float(contrast_dispersive(d.K, d.X, p.eta, tau_m=self.ratio_tm_tph, D_up=d.D_up))
        opts = SolverOptions(self.equations, self.click_formula)
        return full_contrast(p, pulse, t_m, options=opts).contrast

    def predict(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError("feature count differs from fit")
        return np.array([self._one(r) for r in X])
