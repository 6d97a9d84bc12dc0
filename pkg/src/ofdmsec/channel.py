"""Block-fading channel sampling for the Alice-Bob and Alice-Eve links.

Randomness protocol
-------------------
Every trial owns independent substreams derived from the master seed with
``numpy.random.SeedSequence(seed, spawn_key=(trial, lane))``:

* lane 0 — channel taps, drawn in a frozen order (Bob real, Bob imaginary,
  Eve real, Eve imaginary);
* lane 1 — per-trial partition randomness (random encrypted-set selection).

The (seed, trial) pair therefore fully determines a realization no matter how
trials are scheduled, which is what makes parallel Monte Carlo runs
byte-identical to serial ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ofdm import OfdmStructure, SystemConfig, toeplitz_channel

CHANNEL_LANE = 0
PARTITION_LANE = 1


def substream(seed: int, trial: int, lane: int) -> np.random.Generator:
    """Independent per-(trial, lane) random stream derived from the master seed."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(trial, lane)))
    )


@dataclass(frozen=True)
class ChannelRealization:
    """One block-fading draw of both links in time and frequency domain.

    ``h_*`` is the Alice-Bob link, ``g_*`` the Alice-Eve link. The time
    matrices are (N+N_cp)^2 lower-triangular Toeplitz; the frequency vectors
    are the diagonal coefficients seen after the CP/DFT receiver chain.
    """

    taps_bob: np.ndarray
    taps_eve: np.ndarray
    h_time: np.ndarray
    g_time: np.ndarray
    h_freq: np.ndarray
    g_freq: np.ndarray


def sample_taps(rng: np.random.Generator, n_taps: int, variance: float) -> np.ndarray:
    """I.i.d. circularly-symmetric complex Gaussian taps of the given variance."""
    re = rng.standard_normal(n_taps)
    im = rng.standard_normal(n_taps)
    return (re + 1j * im) * np.sqrt(variance / 2.0)


def sample_realization(config: SystemConfig, structure: OfdmStructure,
                       rng: np.random.Generator) -> ChannelRealization:
    """Draw one independent realization of both links.

    The frequency response of a CP-covered Toeplitz channel is the N-point DFT
    of its zero-padded taps, so the diagonal is computed directly with an FFT;
    agreement with the full matrix sandwich is a tested invariant.
    """
    n = config.n_subchannels
    size = config.block_length
    taps_bob = sample_taps(rng, config.delay_spread_bob + 1, config.tap_variance_bob)
    taps_eve = sample_taps(rng, config.delay_spread_eve + 1, config.tap_variance_eve)
    return ChannelRealization(
        taps_bob=taps_bob,
        taps_eve=taps_eve,
        h_time=toeplitz_channel(taps_bob, size),
        g_time=toeplitz_channel(taps_eve, size),
        h_freq=np.fft.fft(taps_bob, n),
        g_freq=np.fft.fft(taps_eve, n),
    )
