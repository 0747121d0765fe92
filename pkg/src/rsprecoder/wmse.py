"""Augmented weighted-MSE transform and its rate identity.

The augmented WMSE of a stream with MSE eps and weight u > 0 is
u*eps - log2(u); minimized over equalizer and weight it equals 1 - rate.
Swapping that inner minimization with the worst-case maximization over
the uncertainty ball gives a conservative (lower-bound) rate in which one
equalizer/weight pair serves the whole region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Precoder, mmse_values, sinr_and_rate

__all__ = [
    "WmseState",
    "wmse",
    "optimal_weight",
    "rate_wmse_identity_check",
    "conservative_rate",
]


@dataclass
class WmseState:
    """Abstracted equalizers and weights for the common and private streams."""

    g_c: np.ndarray  # complex, length K
    g: np.ndarray    # complex, length K
    u_c: np.ndarray  # positive weights, length K
    u: np.ndarray

    def __post_init__(self):
        self.g_c = np.asarray(self.g_c, dtype=complex).reshape(-1)
        self.g = np.asarray(self.g, dtype=complex).reshape(-1)
        self.u_c = np.asarray(self.u_c, dtype=float).reshape(-1)
        self.u = np.asarray(self.u, dtype=float).reshape(-1)
        if np.any(self.u_c <= 0) or np.any(self.u <= 0):
            raise ValueError("weights must be strictly positive")

    @staticmethod
    def initial(K: int) -> "WmseState":
        return WmseState(np.zeros(K, complex), np.zeros(K, complex), np.ones(K), np.ones(K))


def wmse(eps: float, u: float) -> float:
    """Augmented weighted MSE u*eps - log2(u)."""
    if u <= 0:
        raise ValueError("weight must be positive")
    return u * eps - float(np.log2(u))


def optimal_weight(eps_mmse: float) -> float:
    """Reciprocal weight update: at u = 1/eps the WMSE equals 1 - rate.

    This is the fixed point of the alternating scheme. When the MSE does
    not increase between updates (the equalizer step guarantees that),
    re-applying the reciprocal rule never increases the WMSE, which is
    what the convergence argument needs.
    """
    if eps_mmse <= 0:
        raise ValueError("MMSE must be positive")
    return 1.0 / eps_mmse


def rate_wmse_identity_check(h, P: Precoder, sigma2: float, k: int):
    """Residuals |min WMSE - (1 - rate)| for the common and private streams."""
    eps_c, eps = mmse_values(h, P, sigma2, k)
    _, _, r_c, r = sinr_and_rate(h, P, sigma2, k)
    res_c = abs(wmse(eps_c, optimal_weight(eps_c)) - (1.0 - r_c))
    res_p = abs(wmse(eps, optimal_weight(eps)) - (1.0 - r))
    return res_c, res_p


def conservative_rate(tau: float, g: complex, u: float, sigma2: float) -> float:
    """Lower bound 1 - [u*(tau + |g|^2 sigma2) - log2(u)] on the worst-case rate.

    tau must certify the worst-case squared equalized residual over the
    uncertainty ball (an S-procedure LMI provides that certificate).
    """
    if u <= 0:
        raise ValueError("weight must be positive")
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return 1.0 - wmse(tau + abs(g) ** 2 * sigma2, u)
