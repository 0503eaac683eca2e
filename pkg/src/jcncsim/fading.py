"""Nakagami-m fading and complex AWGN sample generation.

Amplitudes follow Nakagami(m, omega) (sqrt of a Gamma(m, omega/m) draw);
phases are uniform on [0, 2pi) and independent of amplitude.  Samplers take an
explicit numpy Generator so concurrent workers own independent streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FadingParams:
    """Nakagami shape m, mean-square amplitude omega, antenna counts."""

    m: float
    omega: float = 1.0
    n_r: int = 2
    n_t: int = 2

    def __post_init__(self):
        if not self.m >= 0.5:
            raise ValueError("Nakagami shape m must be >= 0.5")
        if not self.omega > 0:
            raise ValueError("omega must be > 0")
        if self.n_r not in (1, 2) or self.n_t not in (1, 2):
            raise ValueError("antenna counts must be 1 or 2")


@dataclass(frozen=True, eq=False)
class BlockChannel:
    """Fading coefficients for one transmission block.

    ``h[z, mu, k]``: source z (0 = A, 1 = B), transmit antenna mu, relay
    antenna k.  Coefficients are complex and nonzero.
    """

    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.complex128)
        object.__setattr__(self, "h", h)
        if h.ndim != 3 or h.shape[0] != 2:
            raise ValueError("h must have shape (2, n_t, n_r)")
        if not np.isfinite(h).all() or (h == 0).any():
            raise ValueError("fading coefficients must be finite and nonzero")

    @property
    def n_t(self) -> int:
        return self.h.shape[1]

    @property
    def n_r(self) -> int:
        return self.h.shape[2]


def sample_amplitude(params: FadingParams, rng: np.random.Generator) -> float:
    """One Nakagami(m, omega) amplitude draw."""
    return float(np.sqrt(rng.gamma(shape=params.m, scale=params.omega / params.m)))


def sample_amplitudes(params: FadingParams, size, rng: np.random.Generator) -> np.ndarray:
    """Array of Nakagami(m, omega) amplitude draws."""
    return np.sqrt(rng.gamma(shape=params.m, scale=params.omega / params.m, size=size))


def sample_complex_coeffs(params: FadingParams, size, rng: np.random.Generator) -> np.ndarray:
    """Nakagami amplitudes with independent uniform phases; exact zeros resampled."""
    amp = sample_amplitudes(params, size, rng)
    zero = amp == 0.0
    while zero.any():  # probability-zero event, guards degenerate channels
        amp[zero] = sample_amplitudes(params, int(zero.sum()), rng)
        zero = amp == 0.0
    phase = rng.uniform(0.0, 2.0 * np.pi, size=size)
    return amp * np.exp(1j * phase)


def sample_block_channel(params: FadingParams, rng: np.random.Generator) -> BlockChannel:
    """Independent coefficients for both sources, all antenna pairs."""
    return BlockChannel(sample_complex_coeffs(params, (2, params.n_t, params.n_r), rng))


def sample_noise(sigma_n2: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. complex noise, each real dimension N(0, sigma_n2)."""
    if not sigma_n2 > 0:
        raise ValueError("sigma_n2 must be > 0")
    scale = np.sqrt(sigma_n2)
    return rng.normal(0.0, scale, size=count) + 1j * rng.normal(0.0, scale, size=count)
