"""Temporal artificial-noise precoding.

The AN precoder Q spans the null space of Bob's CP-removed time channel
``R_cp @ H_time`` (an N x (N+N_cp) matrix), so noise injected through Q is
erased by Bob's cyclic-prefix removal while still reaching Eve through her
different channel. Eve's view of the AN is the footprint matrix
``W = F R_cp G_time Q`` restricted to the sub-channels she retains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ofdm import OfdmStructure

# Singular values below NULL_SPACE_RTOL * sigma_max count as zero when
# extracting the null space.
NULL_SPACE_RTOL = 1e-8


class DegenerateChannelError(RuntimeError):
    """Channel draw whose null space does not have the expected dimension.

    Occurs with probability zero under continuous fading; Monte Carlo drivers
    resample the channel and count the event.
    """


@dataclass(frozen=True)
class AnPrecoder:
    """Orthonormal AN basis and the achieved null-space residual.

    Attributes
    ----------
    q : (N + N_cp, N_cp) complex array
        Orthonormal columns spanning null(R_cp @ H_time).
    null_residual : float
        Frobenius norm of ``R_cp @ H_time @ q`` (should be ~1e-13 relative).
    """

    q: np.ndarray
    null_residual: float


@dataclass(frozen=True)
class EveAnFootprint:
    """AN as seen on Eve's retained data sub-channels.

    Attributes
    ----------
    q_tilde : (n_retained, N_cp) complex array
        Rows of ``F R_cp G_time Q`` indexed by the retained sub-channels.
    an_power_per_subchannel : (n_retained,) float array
        Per-sub-channel AN power: p_z * diag(q_tilde @ q_tilde*).
    an_symbol_power : float
        Power p_z of each AN stream (kept so consumers can rebuild the full
        AN covariance p_z * q_tilde @ q_tilde*).
    """

    q_tilde: np.ndarray
    an_power_per_subchannel: np.ndarray
    an_symbol_power: float


def compute_precoder(structure: OfdmStructure, h_time: np.ndarray) -> AnPrecoder:
    """Orthonormal basis of the null space of Bob's CP-removed channel.

    Uses the SVD of ``R_cp @ H_time``: the right singular vectors whose
    singular values fall below ``NULL_SPACE_RTOL * sigma_max`` span the null
    space. For a full-row-rank draw that space has dimension exactly N_cp;
    anything else raises :class:`DegenerateChannelError`.
    """
    reduced = structure.cp_remove @ h_time
    n, m = reduced.shape
    n_cp = m - n
    _, sv, vh = np.linalg.svd(reduced)
    tol = NULL_SPACE_RTOL * sv[0] if sv.size else 0.0
    rank = int(np.count_nonzero(sv > tol))
    if m - rank != n_cp:
        raise DegenerateChannelError(
            f"null space has dimension {m - rank}, expected {n_cp} "
            f"(rank {rank} of a {n}x{m} channel)"
        )
    q = vh[rank:].conj().T
    residual = float(np.linalg.norm(reduced @ q))
    return AnPrecoder(q=q, null_residual=residual)


def eve_footprint(structure: OfdmStructure, g_time: np.ndarray, precoder: AnPrecoder,
                  retained_rows: np.ndarray, an_symbol_power: float) -> EveAnFootprint:
    """Eve-side AN footprint on the retained sub-channels.

    Parameters
    ----------
    retained_rows : integer index array
        The unencrypted sub-channels that carry power (Eve drops the rest).
    an_symbol_power : float
        Power p_z of each of the N_cp AN streams.
    """
    if an_symbol_power < 0:
        raise ValueError("an_symbol_power must be non-negative")
    retained_rows = np.asarray(retained_rows, dtype=int)
    w = structure.dft @ (structure.cp_remove @ (g_time @ precoder.q))
    q_tilde = w[retained_rows, :]
    an_power = an_symbol_power * np.sum(np.abs(q_tilde) ** 2, axis=1)
    return EveAnFootprint(q_tilde=q_tilde, an_power_per_subchannel=an_power,
                          an_symbol_power=an_symbol_power)
