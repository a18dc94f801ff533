"""Rayleigh block fading: exponential power gains for the two channels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import DomainError

__all__ = [
    "RayleighFadingPair",
    "ChannelState",
    "ChannelSamples",
    "pdf",
    "cdf",
    "quantile",
    "sample",
]


@dataclass(frozen=True)
class RayleighFadingPair:
    """Mean power gains of the main (legitimate) and eavesdropper channels."""

    gamma_m: float
    gamma_e: float

    def __post_init__(self):
        if not (self.gamma_m > 0 and self.gamma_e > 0):
            raise ValueError(
                f"mean gains must be positive, got gamma_m={self.gamma_m}, gamma_e={self.gamma_e}"
            )


@dataclass(frozen=True)
class ChannelState:
    h_m: float
    h_e: float

    def __post_init__(self):
        if not (np.isfinite(self.h_m) and np.isfinite(self.h_e)) or self.h_m < 0 or self.h_e < 0:
            raise ValueError(f"invalid channel state ({self.h_m}, {self.h_e})")


@dataclass(frozen=True)
class ChannelSamples:
    """Column-wise batch of i.i.d. channel states."""

    h_m: np.ndarray
    h_e: np.ndarray

    def __len__(self):
        return len(self.h_m)

    def __getitem__(self, i) -> ChannelState:
        return ChannelState(float(self.h_m[i]), float(self.h_e[i]))


def pdf(gain, gamma: float):
    """Exponential density (1/gamma) exp(-gain/gamma) of a Rayleigh power gain."""
    g = np.asarray(gain, dtype=float)
    if np.any(g < 0):
        raise DomainError("power gain must be non-negative")
    out = np.exp(-g / gamma) / gamma
    return float(out) if out.ndim == 0 else out


def cdf(gain, gamma: float):
    g = np.asarray(gain, dtype=float)
    out = -np.expm1(-np.maximum(g, 0.0) / gamma)
    return float(out) if out.ndim == 0 else out


def quantile(p, gamma: float):
    """Inverse of :func:`cdf`: -gamma * log(1 - p), defined for 0 <= p < 1."""
    q = np.asarray(p, dtype=float)
    if np.any(q < 0) or np.any(q >= 1):
        raise DomainError("quantile level must satisfy 0 <= p < 1")
    out = -gamma * np.log1p(-q)
    return float(out) if out.ndim == 0 else out


def sample(model: RayleighFadingPair, rng_seed, n: int) -> ChannelSamples:
    """Draw ``n`` independent (h_M, h_E) pairs.

    ``rng_seed`` is anything ``numpy.random.default_rng`` accepts (an int or a
    ``SeedSequence``); the same seed gives the same draws.
    """
    if n < 1:
        raise ValueError("sample size must be >= 1")
    rng = np.random.default_rng(rng_seed)
    h_m = rng.exponential(model.gamma_m, n)
    h_e = rng.exponential(model.gamma_e, n)
    return ChannelSamples(h_m, h_e)
