"""Deterministic signal-model arithmetic for the MISO downlink.

Receive-power decomposition, MSEs, MMSE equalizers, SINRs, achievable
rates and the rate-splitting bookkeeping. Everything here is a pure
function of its inputs; rates are in bits/s/Hz, powers linear.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SystemConfig",
    "Precoder",
    "PowerTerms",
    "RateSplit",
    "receive_powers",
    "mse_pair",
    "mmse_equalizers",
    "mmse_values",
    "sinr_and_rate",
    "common_rate",
    "total_rates",
    "precoder_power",
]

_SPLIT_TOL = 1e-9


@dataclass(frozen=True)
class SystemConfig:
    """Static system parameters: K users, Nt antennas, noise power, budget."""

    K: int
    Nt: int
    sigma2: float = 1.0
    Pt: float = 1.0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.Nt < self.K:
            raise ValueError("need Nt >= K")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if self.Pt <= 0:
            raise ValueError("Pt must be positive")

    @property
    def snr(self) -> float:
        return self.Pt / self.sigma2


@dataclass(frozen=True)
class Precoder:
    """Common precoding vector plus the Nt x K private precoding matrix."""

    pc: np.ndarray
    pp: np.ndarray

    def __post_init__(self):
        pc = np.asarray(self.pc, dtype=complex).reshape(-1)
        pp = np.asarray(self.pp, dtype=complex)
        if pp.ndim != 2:
            raise ValueError("private precoders must form an Nt x K matrix")
        if pp.shape[0] != pc.shape[0]:
            raise ValueError("common and private precoders disagree on Nt")
        object.__setattr__(self, "pc", pc)
        object.__setattr__(self, "pp", pp)

    @property
    def Nt(self) -> int:
        return self.pc.shape[0]

    @property
    def K(self) -> int:
        return self.pp.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        """Full Nt x (K+1) matrix with the common column first."""
        return np.column_stack([self.pc, self.pp])

    @staticmethod
    def zeros(Nt: int, K: int) -> "Precoder":
        return Precoder(np.zeros(Nt, dtype=complex), np.zeros((Nt, K), dtype=complex))


@dataclass(frozen=True)
class PowerTerms:
    """Per-user receive power decomposition (all linear, nonnegative)."""

    s_c: float  # common signal power
    s: float    # private signal power
    i: float    # private interference plus noise
    i_c: float  # interference seen by the common stream (= t)
    t: float    # total private receive power
    t_c: float  # total receive power including the common stream


@dataclass(frozen=True)
class RateSplit:
    """Per-user common-rate portions c_k summing to the common rate r_c."""

    c: np.ndarray
    r_c: float

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        object.__setattr__(self, "c", c)
        if np.any(c < -_SPLIT_TOL):
            raise ValueError("common-rate portions must be nonnegative")
        if abs(float(np.sum(c)) - self.r_c) > _SPLIT_TOL * max(1.0, abs(self.r_c)):
            raise ValueError("portions must sum to the common rate")

    @staticmethod
    def zeros(K: int) -> "RateSplit":
        return RateSplit(np.zeros(K), 0.0)

    @staticmethod
    def equal(r_c: float, K: int) -> "RateSplit":
        return RateSplit(np.full(K, r_c / K), r_c)


def _check_user(P: Precoder, h: np.ndarray, k: int) -> np.ndarray:
    h = np.asarray(h, dtype=complex).reshape(-1)
    if h.shape[0] != P.Nt:
        raise ValueError("channel vector length does not match precoder")
    if not 0 <= k < P.K:
        raise ValueError("user index out of range")
    return h


def receive_powers(h: np.ndarray, P: Precoder, sigma2: float, k: int) -> PowerTerms:
    """Receive-power decomposition T_c = S_c + S + I at user k."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    h = _check_user(P, h, k)
    gains = np.abs(h.conj() @ P.pp) ** 2
    s_c = float(np.abs(h.conj() @ P.pc) ** 2)
    s = float(gains[k])
    i = float(np.sum(gains) - gains[k] + sigma2)
    t = s + i
    return PowerTerms(s_c=s_c, s=s, i=i, i_c=t, t=t, t_c=s_c + t)


def mse_pair(h, P: Precoder, g_c: complex, g: complex, sigma2: float, k: int):
    """Common and private MSEs at the given scalar equalizers."""
    pw = receive_powers(h, P, sigma2, k)
    h = np.asarray(h, dtype=complex).reshape(-1)
    eps_c = abs(g_c) ** 2 * pw.t_c - 2 * np.real(g_c * (h.conj() @ P.pc)) + 1.0
    eps = abs(g) ** 2 * pw.t - 2 * np.real(g * (h.conj() @ P.pp[:, k])) + 1.0
    return float(eps_c), float(eps)


def mmse_equalizers(h, P: Precoder, sigma2: float, k: int):
    """MMSE equalizers g_c = pc^H h / T_c and g = p_k^H h / T."""
    pw = receive_powers(h, P, sigma2, k)
    h = np.asarray(h, dtype=complex).reshape(-1)
    g_c = complex(P.pc.conj() @ h) / pw.t_c
    g = complex(P.pp[:, k].conj() @ h) / pw.t
    return g_c, g


def mmse_values(h, P: Precoder, sigma2: float, k: int):
    """MMSEs (I_c/T_c, I/T); both lie in (0, 1]."""
    pw = receive_powers(h, P, sigma2, k)
    return pw.i_c / pw.t_c, pw.i / pw.t


def sinr_and_rate(h, P: Precoder, sigma2: float, k: int):
    """SINRs and achievable rates for the common and private streams."""
    pw = receive_powers(h, P, sigma2, k)
    gamma_c = pw.s_c / pw.i_c
    gamma = pw.s / pw.i
    return gamma_c, gamma, float(np.log2(1 + gamma_c)), float(np.log2(1 + gamma))


def common_rate(rates_c: np.ndarray) -> float:
    """Multicast common rate: the minimum over users."""
    rates_c = np.asarray(rates_c, dtype=float).reshape(-1)
    if rates_c.size == 0:
        raise ValueError("need at least one user rate")
    return float(np.min(rates_c))


def total_rates(private_rates: np.ndarray, split: RateSplit) -> np.ndarray:
    """Per-user total rates R_k + C_k."""
    private_rates = np.asarray(private_rates, dtype=float).reshape(-1)
    if private_rates.shape != split.c.shape:
        raise ValueError("rate vector and split length mismatch")
    return private_rates + split.c


def precoder_power(P: Precoder) -> float:
    """Total transmit power tr(P P^H)."""
    return float(np.sum(np.abs(P.pc) ** 2) + np.sum(np.abs(P.pp) ** 2))
