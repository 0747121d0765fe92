"""Channel and CSIT-error generation plus uncertainty-region geometry.

The transmitter only knows an estimate h_hat of each user's channel and a
radius delta bounding the estimation error in Euclidean norm. This module
draws channels and errors, evaluates the SNR-scaling law for the radius,
and provides a sampling-based worst-case rate oracle used for validating
the certified conservative designs.

PRNG policy: all randomness flows through numpy's counter-based Philox
generator. Independent streams are derived from (seed, stream-index)
pairs so Monte-Carlo runs are reproducible regardless of execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Precoder, sinr_and_rate

__all__ = [
    "UncertaintyRegion",
    "RadiusLaw",
    "ChannelInstance",
    "derived_rng",
    "sample_channel",
    "sample_error",
    "radius_at",
    "worst_case_oracle",
]


@dataclass(frozen=True)
class UncertaintyRegion:
    """Sphere of radius delta around the channel estimate h_hat."""

    h_hat: np.ndarray
    delta: float

    def __post_init__(self):
        h_hat = np.asarray(self.h_hat, dtype=complex).reshape(-1)
        object.__setattr__(self, "h_hat", h_hat)
        if self.delta < 0:
            raise ValueError("radius must be nonnegative")

    def contains(self, h: np.ndarray, tol: float = 1e-12) -> bool:
        return float(np.linalg.norm(np.asarray(h) - self.h_hat)) <= self.delta + tol


@dataclass(frozen=True)
class RadiusLaw:
    """Radius shrinking with transmit power: delta0 * sqrt(scale * Pt^-alpha).

    alpha = 0 reproduces a constant radius; alpha = 1 corresponds to CSIT
    quality improving fast enough to be perfect in the asymptotic sense.
    """

    delta0: float
    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        if self.delta0 <= 0 or self.scale <= 0:
            raise ValueError("delta0 and scale must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


@dataclass(frozen=True)
class ChannelInstance:
    """A true channel together with the region the transmitter sees."""

    h_true: np.ndarray
    region: UncertaintyRegion

    def __post_init__(self):
        h_true = np.asarray(self.h_true, dtype=complex).reshape(-1)
        object.__setattr__(self, "h_true", h_true)
        if not self.region.contains(h_true):
            raise ValueError("true channel lies outside the uncertainty region")


def derived_rng(seed: int, *indices: int) -> np.random.Generator:
    """Independent Philox stream keyed by (seed, indices)."""
    key = np.random.SeedSequence([seed, *indices]).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_channel(rng: np.random.Generator, Nt: int) -> np.ndarray:
    """i.i.d. CN(0,1) channel vector of length Nt."""
    if Nt < 1:
        raise ValueError("Nt must be >= 1")
    return (rng.standard_normal(Nt) + 1j * rng.standard_normal(Nt)) / np.sqrt(2.0)


def sample_error(rng: np.random.Generator, delta: float, mode: str, Nt: int) -> np.ndarray:
    """Error vector drawn from the radius-delta ball.

    mode="interior": uniform over the 2*Nt-real-dimensional ball;
    mode="boundary": uniform on the sphere of radius delta.
    """
    if delta < 0:
        raise ValueError("radius must be nonnegative")
    if mode not in ("interior", "boundary"):
        raise ValueError(f"unknown mode {mode!r}")
    direction = rng.standard_normal(Nt) + 1j * rng.standard_normal(Nt)
    nrm = np.linalg.norm(direction)
    if nrm == 0.0:  # probability zero, but keep it defined
        direction = np.ones(Nt, dtype=complex)
        nrm = np.linalg.norm(direction)
    direction = direction / nrm
    if mode == "interior":
        # radius CDF of the uniform ball in 2*Nt real dimensions
        r = delta * rng.uniform() ** (1.0 / (2 * Nt))
    else:
        r = delta
    return r * direction


def radius_at(law: RadiusLaw, Pt: float) -> float:
    """Evaluate the scaling law at transmit power Pt."""
    if Pt <= 0:
        raise ValueError("Pt must be positive")
    return law.delta0 * np.sqrt(law.scale * Pt ** (-law.alpha))


def _rate_at(h, P: Precoder, sigma2: float, k: int, stream: str) -> float:
    gc, g, rc, r = sinr_and_rate(h, P, sigma2, k)
    return rc if stream == "common" else r


def worst_case_oracle(
    region: UncertaintyRegion,
    P: Precoder,
    sigma2: float,
    k: int,
    stream: str,
    n_samples: int,
    rng: np.random.Generator,
    refine_steps: int = 50,
):
    """Sampled (upper-bound) estimate of the worst-case rate over the ball.

    Draws the region center, boundary points (90%) and interior points
    (10%), keeps the channel with the minimum rate, then sharpens it with
    projected random-direction descent. The result upper-bounds the true
    worst case, so any certified conservative rate must lie below it.
    """
    if stream not in ("common", "private"):
        raise ValueError(f"unknown stream {stream!r}")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    Nt = region.h_hat.shape[0]
    delta = region.delta

    best_h = region.h_hat.copy()
    best = _rate_at(best_h, P, sigma2, k, stream)
    n_boundary = int(np.ceil(0.9 * n_samples))
    for i in range(n_samples):
        mode = "boundary" if i < n_boundary else "interior"
        h = region.h_hat + sample_error(rng, delta, mode, Nt)
        r = _rate_at(h, P, sigma2, k, stream)
        if r < best:
            best, best_h = r, h

    if delta > 0:
        step = 0.25 * delta
        for _ in range(refine_steps):
            d = rng.standard_normal(Nt) + 1j * rng.standard_normal(Nt)
            d *= step / np.linalg.norm(d)
            cand = best_h + d
            # project back into the ball
            err = cand - region.h_hat
            nrm = np.linalg.norm(err)
            if nrm > delta:
                cand = region.h_hat + err * (delta / nrm)
            r = _rate_at(cand, P, sigma2, k, stream)
            if r < best:
                best, best_h = r, cand
            else:
                step = max(step * 0.7, 1e-4 * delta)
    return best, best_h
