"""Constructive DoF-achieving schemes and scaling-slope estimation.

Best-effort zero-forcing private precoders built from the channel
estimates, optionally superimposed with a random common precoder, achieve
the optimal max-min DoF scaling: alpha for the conventional scheme and
(1 + (K-1) alpha) / K with rate splitting. This module constructs those
precoders, evaluates their sampled worst-case min rate, and fits rate
slopes against log2(Pt).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Precoder
from .uncertainty import worst_case_oracle

__all__ = [
    "SchemeExponents",
    "DofEstimate",
    "zf_private_precoders",
    "random_common_precoder",
    "constructive_scheme",
    "evaluate_scheme_minrate",
    "dof_estimate",
    "optimal_dof_pair",
]


@dataclass(frozen=True)
class SchemeExponents:
    """Power-scaling exponents of the common and private precoders."""

    a_c: float
    a: float

    def __post_init__(self):
        for v in (self.a_c, self.a):
            if not 0.0 <= v <= 1.0:
                raise ValueError("exponents must lie in [0, 1]")


@dataclass(frozen=True)
class DofEstimate:
    slope: float
    intercept: float
    r2: float
    points: tuple


class RankDeficientChannel(ValueError):
    """Estimate matrix is not full column rank; caller should resample."""


def zf_private_precoders(H_hat: np.ndarray, alpha: float, Pt: float) -> np.ndarray:
    """Best-effort ZF columns with total power Pt^alpha split equally.

    Column k is the normalized kth column of pinv(H_hat^H), so it nulls
    every estimated cross channel.
    """
    H_hat = np.asarray(H_hat, dtype=complex)
    Nt, K = H_hat.shape
    if Pt < 1:
        raise ValueError("Pt must be >= 1 so Pt^alpha <= Pt")
    if np.linalg.matrix_rank(H_hat) < K:
        raise RankDeficientChannel("channel estimate matrix is rank deficient")
    pinv = np.linalg.pinv(H_hat.conj().T)  # Nt x K, column k orthogonal to h_j, j != k
    cols = pinv / np.linalg.norm(pinv, axis=0, keepdims=True)
    return cols * np.sqrt(Pt ** alpha / K)


def random_common_precoder(rng: np.random.Generator, Nt: int, power: float) -> np.ndarray:
    """Isotropic direction with squared norm exactly `power`."""
    if power < 0:
        raise ValueError("power must be nonnegative")
    if power == 0:
        return np.zeros(Nt, dtype=complex)
    d = rng.standard_normal(Nt) + 1j * rng.standard_normal(Nt)
    return d * (np.sqrt(power) / np.linalg.norm(d))


def constructive_scheme(H_hat: np.ndarray, alpha: float, Pt: float,
                        rng: np.random.Generator) -> Precoder:
    """ZF private precoders plus a random common precoder using the
    leftover power Pt - Pt^alpha (zero when alpha = 1)."""
    pp = zf_private_precoders(H_hat, alpha, Pt)
    common_power = max(Pt - Pt ** alpha, 0.0)
    pc = random_common_precoder(rng, H_hat.shape[0], common_power)
    return Precoder(pc, pp)


def evaluate_scheme_minrate(P: Precoder, instances, sigma2: float,
                            n_samples: int, rng: np.random.Generator,
                            split_rule: str = "equal") -> float:
    """Sampled worst-case min total rate under an equal common-rate split."""
    if split_rule != "equal":
        raise ValueError("only the equal split rule is supported")
    K = len(instances)
    rs = np.linalg.norm(P.pc) > 0
    private = np.empty(K)
    common = np.empty(K)
    for k, inst in enumerate(instances):
        private[k], _ = worst_case_oracle(
            inst.region, P, sigma2, k, "private", n_samples, rng)
        if rs:
            common[k], _ = worst_case_oracle(
                inst.region, P, sigma2, k, "common", n_samples, rng)
    if not rs:
        return float(np.min(private))
    r_c = float(np.min(common))
    return float(np.min(private + r_c / K))


def dof_estimate(points) -> DofEstimate:
    """Least-squares slope of rate versus log2(Pt)."""
    points = [(float(p), float(r)) for p, r in points]
    if len(points) < 3:
        raise ValueError("need at least 3 points")
    pts = np.array(points)
    if np.any(np.diff(pts[:, 0]) <= 0):
        raise ValueError("Pt values must be distinct and increasing")
    x = np.log2(pts[:, 0])
    y = pts[:, 1]
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return DofEstimate(float(slope), float(intercept), max(0.0, min(1.0, r2)),
                       tuple(map(tuple, pts)))


def optimal_dof_pair(K: int, alpha: float):
    """Optimal max-min DoF: alpha without splitting, (1+(K-1)alpha)/K with."""
    if K < 2:
        raise ValueError("predictions need K >= 2")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return float(alpha), (1.0 + (K - 1) * alpha) / K
