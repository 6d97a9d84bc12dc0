"""Instantaneous rate and secrecy-rate formulas for one channel realization.

Bob sees clean parallel Gaussian sub-channels (the AN lives in his null
space). Eve sees the same data symbols through her own channel plus colored
artificial noise; she either whitens the AN jointly across her retained
sub-channels (log-det rate) or treats each sub-channel's AN as independent
noise (per-sub-channel rate). The secrecy rate credits encrypted sub-channels
in full and clamps the unencrypted surplus at zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .ofdm import SystemConfig
from .power import PowerAllocation
from .precoder import EveAnFootprint


@dataclass(frozen=True)
class TrialResult:
    """All rates of one realization, in bits per OFDM block."""

    rate_bob: float
    rate_eve_joint: float
    rate_eve_per_sub: float
    secrecy_joint: float
    secrecy_per_sub: float


def rate_bob(allocation: PowerAllocation, h_freq: np.ndarray,
             noise_power_bob: float):
    """Bob's rate split into (encrypted, unencrypted) sums of
    log2(1 + p_k |H_k|^2 / eta_B), in bits per OFDM block."""
    gains = np.abs(h_freq) ** 2
    enc = allocation.encrypted
    une = allocation.unencrypted
    encrypted_term = float(np.sum(np.log2(
        1.0 + allocation.power[enc] * gains[enc] / noise_power_bob)))
    unencrypted_term = float(np.sum(np.log2(
        1.0 + allocation.power[une] * gains[une] / noise_power_bob)))
    return encrypted_term, unencrypted_term


def _signal_powers(allocation: PowerAllocation, g_freq: np.ndarray) -> np.ndarray:
    """Per-retained-sub-channel data signal power at Eve: p_i |G_i|^2."""
    idx = allocation.retained
    return allocation.power[idx] * np.abs(g_freq[idx]) ** 2


def rate_eve_joint(allocation: PowerAllocation, g_freq: np.ndarray,
                   footprint: EveAnFootprint, noise_power_eve: float) -> float:
    """Eve's rate with joint whitening of the AN across retained sub-channels.

    Computes log2 det(I + D Sigma^-1) with D = diag(p_i |G_i|^2) and
    Sigma = p_z Q~ Q~* + eta_E I, via Cholesky whitening: factor Sigma = L L*,
    then take a second Cholesky of I + L^-1 D L^-*. No explicit inverses.
    """
    d = _signal_powers(allocation, g_freq)
    if d.size == 0:
        return 0.0
    if footprint.q_tilde.shape[0] != d.size:
        raise ValueError(
            f"footprint has {footprint.q_tilde.shape[0]} rows but the "
            f"allocation retains {d.size} sub-channels")
    pz = footprint.an_symbol_power
    if pz == 0.0 or footprint.q_tilde.shape[1] == 0:
        return float(np.sum(np.log2(1.0 + d / noise_power_eve)))

    sigma = pz * (footprint.q_tilde @ footprint.q_tilde.conj().T)
    sigma[np.diag_indices_from(sigma)] += noise_power_eve
    sigma = (sigma + sigma.conj().T) / 2.0
    chol = np.linalg.cholesky(sigma)
    x = scipy.linalg.solve_triangular(chol, np.diag(np.sqrt(d)), lower=True)
    inner = x @ x.conj().T
    inner[np.diag_indices_from(inner)] += 1.0
    inner = (inner + inner.conj().T) / 2.0
    chol2 = np.linalg.cholesky(inner)
    return float(2.0 * np.sum(np.log2(np.real(np.diag(chol2)))))


def rate_eve_per_sub(allocation: PowerAllocation, g_freq: np.ndarray,
                     footprint: EveAnFootprint, noise_power_eve: float) -> float:
    """Eve's rate treating each retained sub-channel's AN as independent
    noise: sum log2(1 + p_i |G_i|^2 / (eta_i + eta_E))."""
    d = _signal_powers(allocation, g_freq)
    if d.size == 0:
        return 0.0
    eta = footprint.an_power_per_subchannel
    if eta.shape[0] != d.size:
        raise ValueError(
            f"footprint has {eta.shape[0]} rows but the allocation retains "
            f"{d.size} sub-channels")
    return float(np.sum(np.log2(1.0 + d / (eta + noise_power_eve))))


def secrecy_rate(bob_terms, eve_rate: float) -> float:
    """Instantaneous secrecy rate: the encrypted-data rate in full, plus the
    unencrypted rate surplus over Eve clamped at zero."""
    encrypted_term, unencrypted_term = bob_terms
    return encrypted_term + max(0.0, unencrypted_term - eve_rate)


def normalize_rate(bits_per_block: float, config: SystemConfig) -> float:
    """Convert bits per OFDM block to bits/sec/Hz by dividing by N + N_cp
    (the cyclic prefix costs air time)."""
    return bits_per_block / config.block_length
