"""Estimator-style front end for the robust precoder designs.

RobustPrecoderDesigner follows the scikit-learn fit/predict convention:
``fit`` takes the K x Nt matrix of channel estimates (one row per user)
and designs the precoder; ``predict`` evaluates per-user achievable total
rates at given true channels under the fitted design. get_params /
set_params come from BaseEstimator, so the designer plugs into grid
search and friends when sweeping radii or budgets.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .ao import AoConfig, DesignSpec, run_ao
from .model import SystemConfig, common_rate, sinr_and_rate, total_rates
from .uncertainty import UncertaintyRegion

__all__ = ["RobustPrecoderDesigner", "validate_channel_matrix"]


def validate_channel_matrix(X) -> np.ndarray:
    """Coerce to a complex 2-D (K, Nt) array with K <= Nt."""
    X = np.asarray(X)
    if X.ndim != 2:
        raise ValueError("expected a 2-D (users x antennas) channel matrix")
    if X.shape[0] > X.shape[1]:
        raise ValueError("need at least as many antennas as users")
    if not np.all(np.isfinite(X.real)) or not np.all(np.isfinite(np.imag(X))):
        raise ValueError("channel matrix contains non-finite entries")
    return X.astype(complex)


class RobustPrecoderDesigner(BaseEstimator):
    """Designs a robust linear precoder from channel estimates.

    Parameters mirror the underlying optimization: `strategy` chooses
    rate splitting ("rs") or the conventional scheme ("nors"),
    `objective` chooses max-min rate at `power_budget` or power
    minimization at `target_rate`, and `delta` is the per-user
    uncertainty radius (scalar or length-K array).
    """

    def __init__(self, strategy="rs", objective="maxmin", delta=0.0,
                 sigma2=1.0, power_budget=1.0, target_rate=None,
                 tol_rel=1e-4, max_iter=200, warm_start=None):
        self.strategy = strategy
        self.objective = objective
        self.delta = delta
        self.sigma2 = sigma2
        self.power_budget = power_budget
        self.target_rate = target_rate
        self.tol_rel = tol_rel
        self.max_iter = max_iter
        self.warm_start = warm_start

    def fit(self, X, y=None):
        X = validate_channel_matrix(X)
        K, Nt = X.shape
        if self.strategy not in ("rs", "nors"):
            raise ValueError("strategy must be 'rs' or 'nors'")
        deltas = np.broadcast_to(np.asarray(self.delta, dtype=float), (K,))
        regions = [UncertaintyRegion(X[k], float(deltas[k])) for k in range(K)]
        cfg = SystemConfig(K=K, Nt=Nt, sigma2=self.sigma2, Pt=self.power_budget)
        spec = DesignSpec(self.objective, rs=self.strategy == "rs",
                          target=self.target_rate)
        ao = AoConfig(tol_rel=self.tol_rel, max_iter=self.max_iter,
                      warm_start=self.warm_start)
        result = run_ao(spec, regions, cfg, ao)
        self.result_ = result
        self.precoder_ = result.precoder
        self.split_ = result.split
        self.objective_ = result.objective
        self.rates_ = result.per_user_conservative_rates
        self.trace_ = result.trace
        self.status_ = result.status
        self.n_iter_ = result.iterations
        return self

    def predict(self, X):
        """Per-user achievable total rates at the given true channels.

        The common-stream contribution is the fitted split, capped by the
        common rate each channel row actually supports.
        """
        check_is_fitted(self, "precoder_")
        X = validate_channel_matrix(X)
        K = X.shape[0]
        if K != self.split_.c.shape[0]:
            raise ValueError("user count differs from the fitted design")
        private = np.empty(K)
        common = np.empty(K)
        for k in range(K):
            _, _, r_c, r = sinr_and_rate(X[k], self.precoder_, self.sigma2, k)
            private[k] = r
            common[k] = r_c
        if float(np.sum(self.split_.c)) == 0.0:
            return private
        achievable_common = common_rate(common)
        scale = min(1.0, achievable_common / self.split_.r_c) if self.split_.r_c > 0 else 0.0
        return total_rates(private, type(self.split_)(self.split_.c * scale,
                                                      self.split_.r_c * scale))

    def score(self, X, y=None):
        """Max-min fairness score: the minimum predicted total rate."""
        return float(np.min(self.predict(X)))
