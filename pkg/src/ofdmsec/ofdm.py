"""Structural matrices of a cyclic-prefix OFDM link.

Everything here is deterministic: cyclic-prefix insertion/removal operators,
the unitary DFT, lower-triangular Toeplitz time-domain channel matrices, and
the diagonal frequency response obtained by sandwiching a time channel between
the receiver DFT chain and the transmitter IDFT chain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of the simulated link.

    Defaults are the standard evaluation setting used throughout the test
    suite and the CLI: 64 sub-channels, 16-sample cyclic prefix, 17-tap
    uniform power-delay profile on both links, unit noise power, and a total
    power budget of N * 10**3 (30 dB average SNR per sub-channel).

    Parameters
    ----------
    n_subchannels : int
        FFT size N (number of data sub-channels).
    n_cp : int
        Cyclic-prefix length N_cp; must cover both channel memories.
    delay_spread_bob, delay_spread_eve : int
        Channel memory L (the impulse response has L + 1 taps).
    tap_variance_bob, tap_variance_eve : float
        Per-tap variance of the circularly-symmetric Gaussian taps.
    noise_power_bob, noise_power_eve : float
        Per-sub-channel noise power (linear).
    total_power : float
        Total transmit power budget P shared by data and artificial noise.
    """

    n_subchannels: int = 64
    n_cp: int = 16
    delay_spread_bob: int = 16
    delay_spread_eve: int = 16
    tap_variance_bob: float = 1.0 / 17.0
    tap_variance_eve: float = 1.0 / 17.0
    noise_power_bob: float = 1.0
    noise_power_eve: float = 1.0
    total_power: float = 64000.0

    def __post_init__(self):
        if self.n_subchannels < 1:
            raise ValueError(f"n_subchannels must be >= 1, got {self.n_subchannels}")
        if self.n_cp < 0:
            raise ValueError(f"n_cp must be >= 0, got {self.n_cp}")
        if self.delay_spread_bob < 0 or self.delay_spread_eve < 0:
            raise ValueError("delay spreads must be non-negative")
        if self.n_cp < max(self.delay_spread_bob, self.delay_spread_eve):
            raise ValueError(
                "cyclic prefix shorter than the channel memory: "
                f"n_cp={self.n_cp} < max(L_B={self.delay_spread_bob}, "
                f"L_E={self.delay_spread_eve})"
            )
        if max(self.delay_spread_bob, self.delay_spread_eve) >= self.n_cp + self.n_subchannels:
            raise ValueError("delay spread exceeds the OFDM block length")
        for name in ("tap_variance_bob", "tap_variance_eve",
                     "noise_power_bob", "noise_power_eve", "total_power"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def block_length(self) -> int:
        """Samples per OFDM block including the cyclic prefix (N + N_cp)."""
        return self.n_subchannels + self.n_cp


@dataclass(frozen=True)
class OfdmStructure:
    """CP insertion/removal operators and the unitary DFT for one block size.

    Attributes
    ----------
    cp_insert : (N + N_cp, N) float array
        Prepends a copy of the last N_cp samples of a length-N block.
    cp_remove : (N, N + N_cp) float array
        Discards the first N_cp received samples: ``[0 | I_N]``.
    dft : (N, N) complex array
        Unitary DFT, entries ``exp(-2j*pi*k*l/N) / sqrt(N)``.
    """

    cp_insert: np.ndarray
    cp_remove: np.ndarray
    dft: np.ndarray

    @property
    def n_subchannels(self) -> int:
        return self.dft.shape[0]

    @property
    def n_cp(self) -> int:
        return self.cp_insert.shape[0] - self.cp_insert.shape[1]


def build_structure(n_subchannels: int, n_cp: int) -> OfdmStructure:
    """Build the CP and DFT operators for a block of N sub-channels.

    ``cp_remove @ cp_insert`` is exactly the identity, and the DFT is unitary,
    so a channel whose memory fits inside the prefix is diagonalized by
    ``dft @ cp_remove @ H_time @ cp_insert @ dft.conj().T``.
    """
    if n_subchannels < 1:
        raise ValueError(f"n_subchannels must be >= 1, got {n_subchannels}")
    if n_cp < 0:
        raise ValueError(f"n_cp must be >= 0, got {n_cp}")
    if n_cp > n_subchannels:
        raise ValueError("a cyclic prefix longer than the symbol is not supported")

    n, m = n_subchannels, n_subchannels + n_cp
    cp_insert = np.zeros((m, n))
    cp_insert[n_cp:, :] = np.eye(n)
    cp_insert[:n_cp, n - n_cp:] = np.eye(n_cp)

    cp_remove = np.zeros((n, m))
    cp_remove[:, n_cp:] = np.eye(n)

    k = np.arange(n)
    dft = np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)
    return OfdmStructure(cp_insert=cp_insert, cp_remove=cp_remove, dft=dft)


def toeplitz_channel(taps: np.ndarray, size: int) -> np.ndarray:
    """Lower-triangular Toeplitz convolution matrix of a causal channel.

    Entry (i, j) is ``taps[i - j]`` for 0 <= i - j <= L and exactly zero
    elsewhere; the first column is the zero-padded impulse response.
    """
    taps = np.asarray(taps, dtype=complex)
    if taps.ndim != 1 or taps.size == 0:
        raise ValueError("taps must be a non-empty 1-D vector")
    if taps.size > size:
        raise ValueError(f"{taps.size} taps do not fit a {size}x{size} matrix")
    col = np.zeros(size, dtype=complex)
    col[: taps.size] = taps
    return scipy.linalg.toeplitz(col, np.zeros(size, dtype=complex))


def frequency_response(structure: OfdmStructure, time_channel: np.ndarray,
                       rel_tol: float = 1e-10) -> np.ndarray:
    """Diagonal of ``F R_cp H_time T_cp F*`` with an off-diagonal check.

    For a channel whose memory fits inside the cyclic prefix the product is
    diagonal and its k-th entry equals the N-point DFT of the zero-padded tap
    vector at bin k. Off-diagonal energy above ``rel_tol`` (relative to the
    largest diagonal entry) means the prefix is too short or the matrix is not
    the expected Toeplitz convolution operator.

    Returns
    -------
    (N,) complex array of per-sub-channel coefficients.
    """
    full = structure.dft @ (structure.cp_remove @ time_channel @ structure.cp_insert) \
        @ structure.dft.conj().T
    diag = np.diag(full).copy()
    off = full - np.diag(diag)
    scale = np.max(np.abs(diag))
    if scale == 0:
        scale = 1.0
    worst = np.max(np.abs(off)) if off.size else 0.0
    if worst > rel_tol * scale:
        raise ValueError(
            "time channel is not diagonalized by the OFDM chain "
            f"(max off-diagonal {worst:.3e} vs tolerance {rel_tol:.1e} * {scale:.3e}); "
            "check that the channel memory fits inside the cyclic prefix"
        )
    return diag
