"""Estimator-style front end: fit a channel configuration once, then map
batches of message-length vectors to delivery times."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .experiments import SCHEMES, scheme_ndt
from .model import Regime, SystemConfig
from .ndt import lower_bound_ndt, solve_ndt, upper_bound_ndt
from .region import corner_points, inner_bound

__all__ = ["DeliveryTimeEstimator"]


class DeliveryTimeEstimator(TransformerMixin, BaseEstimator):
    """Delivery time of coded-message length vectors on a K-user MIMO broadcast channel.

    Parameters
    ----------
    K : int, default=3
        Number of users.
    M : int, default=5
        Transmit antennas.
    N : int, default=3
        Receive antennas per user.
    scheme : {"proposed", "time-sharing", "group-by-group"}, default="proposed"
        Delivery scheme used by :meth:`predict`.

    Attributes
    ----------
    regime_ : Regime
    corner_points_ : ndarray of shape (n_points, 2**K - 1)
        Corner points of the inner region (origin excluded).
    n_features_in_ : int
        ``2**K - 1``; one column per multicast group in canonical order.

    Examples
    --------
    >>> est = DeliveryTimeEstimator(K=3, M=5, N=3).fit()
    >>> float(est.predict([[0.2, 0.1, 0, 0.15, 0.25, 0.35, 0]])[0])  # doctest: +ELLIPSIS
    0.2333...
    """

    def __init__(self, K=3, M=5, N=3, scheme="proposed"):
        self.K = K
        self.M = M
        self.N = N
        self.scheme = scheme

    def fit(self, X=None, y=None):
        """Validate the configuration and enumerate the region's corner points.

        ``X`` is optional; when given only its width is checked.
        """
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        cfg = SystemConfig(self.K, self.M, self.N)
        self.config_ = cfg
        self.regime_ = cfg.regime
        self.n_features_in_ = cfg.n_groups
        self.corner_points_ = corner_points(inner_bound(cfg)).points
        if X is not None:
            self._validate(X)
        return self

    def _validate(self, X):
        X = check_array(X, dtype=float, ensure_min_samples=1)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        if np.any(X < 0) or np.any(X > 1):
            raise ValueError("message lengths must lie in [0, 1]")
        return X

    def predict(self, X):
        """Delivery time of every row under ``scheme``."""
        check_is_fitted(self, "corner_points_")
        X = self._validate(X)
        return np.array([scheme_ndt(row, self.config_, self.scheme) for row in X])

    def transform(self, X):
        """Optimal DoF tuple ``f / tau`` of every row (zero rows map to zero)."""
        check_is_fitted(self, "corner_points_")
        X = self._validate(X)
        return np.vstack([solve_ndt(row, self.config_, sparse_phases=False).d_star for row in X])

    def bounds(self, X):
        """Columns ``tau_l, tau_a, tau_u`` (``nan`` outside the Mid regime)."""
        check_is_fitted(self, "corner_points_")
        X = self._validate(X)
        out = np.full((X.shape[0], 3), np.nan)
        for k, row in enumerate(X):
            out[k, 0] = lower_bound_ndt(row, self.config_)
            out[k, 1] = solve_ndt(row, self.config_, sparse_phases=False).tau
            if self.regime_ is Regime.MID:
                out[k, 2] = upper_bound_ndt(row, self.config_)
        return out
