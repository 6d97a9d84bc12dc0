"""Per-sub-channel transmit power optimization (levels one and two).

Level one selects the active sub-channel set by iteratively water-filling the
total data budget and discarding sub-channels that would receive non-positive
power. Level two splits the active set into encrypted and unencrypted parts
and water-fills each with its own budget share. Both levels optimize the
legitimate link only; the eavesdropper's channel never enters here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ofdm import SystemConfig

#: Relative power threshold below which an unencrypted sub-channel is treated
#: as unused and dropped from the eavesdropper's retained set.
RETAINED_POWER_RTOL = 1e-12

METHODS = ("highest", "lowest", "random")


@dataclass(frozen=True)
class PowerFractions:
    """Shares of the total power given to encrypted data, unencrypted data,
    and artificial noise. Must be non-negative and sum to one."""

    theta1: float
    theta2: float
    theta3: float

    def __post_init__(self):
        for name in ("theta1", "theta2", "theta3"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        total = self.theta1 + self.theta2 + self.theta3
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"power fractions sum to {total}, expected 1")

    @classmethod
    def with_remainder(cls, theta1: float, theta2: float) -> "PowerFractions":
        """Fractions with theta3 taking up the remainder (clipped at zero so
        grid points on the theta1 + theta2 = 1 boundary stay valid)."""
        return cls(theta1, theta2, max(0.0, 1.0 - theta1 - theta2))


@dataclass(frozen=True)
class PowerAllocation:
    """Outcome of levels one and two for a single channel realization.

    ``power`` is a length-N vector, zero outside the active set. ``retained``
    lists the unencrypted sub-channels that actually carry power; these are
    the rows the eavesdropper keeps for decoding.
    """

    active: np.ndarray
    encrypted: np.ndarray
    unencrypted: np.ndarray
    power: np.ndarray
    retained: np.ndarray


def water_fill(gains, noise_power: float, budget: float):
    """Water-filling over parallel Gaussian sub-channels.

    Maximizes sum log2(1 + p_k * gain_k / noise) subject to sum(p) = budget,
    p >= 0. Returns the power vector (same order as ``gains``) and the water
    level mu, with p_k = max(0, mu - noise/gain_k).
    """
    gains = np.asarray(gains, dtype=float)
    if budget < 0:
        raise ValueError(f"budget must be non-negative, got {budget}")
    if noise_power <= 0:
        raise ValueError("noise_power must be strictly positive")
    if gains.size and np.min(gains) <= 0:
        raise ValueError("gains must be strictly positive")
    if gains.size == 0 or budget == 0:
        return np.zeros(gains.size), 0.0

    floor = noise_power / gains          # a_k: water-vessel floor heights
    order = np.argsort(floor, kind="stable")
    a = floor[order]
    cum = np.cumsum(a)
    m = np.arange(1, a.size + 1)
    # Candidate water level when exactly the m lowest floors are submerged;
    # the optimum keeps the largest m whose highest submerged floor stays
    # below its level.
    mu = (budget + cum) / m
    feasible = np.nonzero(a < mu)[0]
    m_star = int(feasible[-1]) + 1 if feasible.size else 1
    level = (budget + cum[m_star - 1]) / m_star
    p_sorted = np.maximum(level - a, 0.0)
    p_sorted[m_star:] = 0.0
    powers = np.empty_like(p_sorted)
    powers[order] = p_sorted
    return powers, float(level)


def select_active(h_gains, noise_power: float, data_budget: float) -> np.ndarray:
    """Active sub-channel set: iterative water-level pruning (level one).

    Repeatedly computes the water level C over the surviving set with the full
    data budget and removes sub-channels whose surplus C - noise/gain is
    non-positive, until the set is stable. The fixed point coincides with the
    support of plain water-filling; that equivalence is a tested invariant,
    not an assumption.
    """
    h_gains = np.asarray(h_gains, dtype=float)
    if data_budget < 0:
        raise ValueError(f"data_budget must be non-negative, got {data_budget}")
    if noise_power <= 0:
        raise ValueError("noise_power must be strictly positive")
    if h_gains.size and np.min(h_gains) <= 0:
        raise ValueError("gains must be strictly positive")

    floor = noise_power / h_gains
    keep = np.arange(h_gains.size)
    while keep.size:
        level = (data_budget + np.sum(floor[keep])) / keep.size
        surplus = level - floor[keep]
        survivors = surplus > 0
        if survivors.all():
            break
        keep = keep[survivors]
    return keep


def partition_encrypted(active, h_gains, n_encrypted: int, method: str,
                        rng: np.random.Generator | None = None):
    """Split the active set into encrypted and unencrypted sub-channels.

    ``highest``/``lowest`` pick by instantaneous gain (ties broken by lowest
    sub-channel index via stable sorting); ``random`` draws a fresh uniform
    ranking of all sub-channels from ``rng`` and encrypts the n_e active ones
    with the lowest rank, so growing n_e yields nested sets. n_encrypted is
    capped at the active-set size.
    """
    active = np.asarray(active, dtype=int)
    h_gains = np.asarray(h_gains, dtype=float)
    if n_encrypted < 0:
        raise ValueError("n_encrypted must be non-negative")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
    n_e = min(int(n_encrypted), active.size)

    if method == "highest":
        order = np.argsort(-h_gains[active], kind="stable")
    elif method == "lowest":
        order = np.argsort(h_gains[active], kind="stable")
    else:
        if rng is None:
            raise ValueError("method 'random' needs an rng stream")
        perm = rng.permutation(h_gains.size)
        rank = np.empty(h_gains.size, dtype=int)
        rank[perm] = np.arange(h_gains.size)
        order = np.argsort(rank[active], kind="stable")

    encrypted = np.sort(active[order[:n_e]])
    unencrypted = np.sort(active[order[n_e:]])
    return encrypted, unencrypted


def allocate(config: SystemConfig, fractions: PowerFractions, h_gains,
             n_encrypted: int, method: str = "highest",
             rng: np.random.Generator | None = None,
             equal_power: bool = False) -> PowerAllocation:
    """Levels one and two for a single realization.

    Selects the active set with the combined data budget (theta1 + theta2) * P,
    partitions it, then water-fills the encrypted set with theta1 * P and the
    unencrypted set with theta2 * P independently. With ``equal_power`` the
    water-filling is bypassed and every active sub-channel gets the same share
    of the data budget (the allocation used by the equal-power experiments).
    """
    h_gains = np.asarray(h_gains, dtype=float)
    p_total = config.total_power
    data_budget = (fractions.theta1 + fractions.theta2) * p_total
    noise = config.noise_power_bob

    active = select_active(h_gains, noise, data_budget)
    encrypted, unencrypted = partition_encrypted(active, h_gains, n_encrypted, method, rng)

    power = np.zeros(h_gains.size)
    if equal_power:
        if active.size:
            power[active] = data_budget / active.size
    else:
        if encrypted.size:
            power[encrypted], _ = water_fill(h_gains[encrypted], noise,
                                             fractions.theta1 * p_total)
        if unencrypted.size:
            power[unencrypted], _ = water_fill(h_gains[unencrypted], noise,
                                               fractions.theta2 * p_total)

    retained = unencrypted[power[unencrypted] > RETAINED_POWER_RTOL * p_total] \
        if unencrypted.size else unencrypted
    return PowerAllocation(active=active, encrypted=encrypted,
                           unencrypted=unencrypted, power=power, retained=retained)
