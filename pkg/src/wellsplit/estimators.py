"""scikit-learn style wrapper: fit the classical data once, predict splittings for many hbar."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .dynamics import compute_instanton, libration_scan
from .errors import ConfigError
from .formulas import crossing_splitting, ground_splitting, transverse_splitting
from .potentials import FAMILIES, PotentialSpec, check_quasi1d_assumptions
from .wkb import wkb_constants


class SplittingRegressor(RegressorMixin, BaseEstimator):
    """Semiclassical splitting of the (m, 0) pair as a function of hbar.

    ``fit`` ignores y; the model has no free parameters and only computes the
    instanton, the WKB constants and a libration scan. ``predict`` maps a
    column of hbar values to splittings. ``score`` is minus the mean absolute
    log ratio to reference splittings, since R^2 means little for quantities
    spanning many decades.
    """

    def __init__(self, family="curved-quartic", alpha=0.25, a=1.0, omega=2.5, c=0.0, d=0.3,
                 method="transverse", m=0, factor=2.0, tol=1e-10, e_min=0.005, e_max=0.7, n_e=50):
        self.family = family
        self.alpha = alpha
        self.a = a
        self.omega = omega
        self.c = c
        self.d = d
        self.method = method
        self.m = m
        self.factor = factor
        self.tol = tol
        self.e_min = e_min
        self.e_max = e_max
        self.n_e = n_e

    def _potential(self) -> PotentialSpec:
        keys = FAMILIES.get(self.family)
        if keys is None:
            raise ConfigError(f"unknown family {self.family!r}")
        coeffs = {k: getattr(self, k) for k in keys}
        return PotentialSpec(family=self.family, **coeffs)

    def fit(self, X=None, y=None):
        if self.method not in ("transverse", "crossing", "ground"):
            raise ConfigError(f"method must be transverse, crossing or ground, not {self.method!r}")
        pot = self._potential()
        inst = compute_instanton(pot, tol=self.tol)
        self.potential_ = pot
        self.assumptions_ = check_quasi1d_assumptions(pot)
        self.arrival_ok_ = inst.arrival_direction_ok
        self.constants_ = wkb_constants(inst)
        self.S0_ = inst.S0
        if self.method != "crossing":
            grid = pot.barrier * np.geomspace(self.e_min, self.e_max, self.n_e)
            self.table_ = libration_scan(pot, grid, tol=self.tol, inst=inst)
        return self

    def _one(self, h: float) -> float:
        w = self.constants_
        if self.method == "crossing":
            return crossing_splitting(w, self.m, h).value
        if self.method == "ground":
            return ground_splitting(h, w.lambda1, self.table_.S_of).value
        return transverse_splitting(self.table_, w.lambda1, w.lambda2, self.m, h, self.assumptions_,
                                    self.arrival_ok_, factor=self.factor).value

    def predict(self, X):
        check_is_fitted(self, "constants_")
        h = np.asarray(X, float).reshape(-1)
        if np.any(h <= 0):
            raise ConfigError("hbar values must be positive")
        return np.array([self._one(v) for v in h])

    def score(self, X, y, sample_weight=None):
        pred = self.predict(X)
        err = np.abs(np.log(pred / np.asarray(y, float).reshape(-1)))
        return -float(np.average(err, weights=sample_weight))
