"""Monte Carlo secrecy-rate estimation and the power-fraction grid search.

Design notes
------------
* Common random numbers: each trial's channel draw, precoder, and Eve
  footprint are computed once and reused for every (theta, N_e, method) cell
  and both Eve decoders, so curves compared across cells share their noise.
* The average secrecy rate uses the ergodic convention: the [.]+ clamp is
  applied to the averaged unencrypted-minus-eavesdropper difference, not per
  realization. Per-realization clamping adds a rectification bias of roughly
  0.4 sigma even when Bob's and Eve's rates are identically distributed; with
  symmetric statistics and no protection the reported average is then zero,
  as it should be. Per-realization clamped values remain available through
  :func:`evaluate_trial` / :class:`~ofdmsec.rates.TrialResult`.
* Determinism under parallelism: trials are processed in fixed-size chunks
  whose boundaries do not depend on the worker count, and per-chunk partial
  sums are reduced in chunk order. Serial and parallel runs of the same seed
  produce byte-identical results.
* The hot loop evaluates Eve's joint rate through the rank-N_cp determinant
  lemma (two small Cholesky factorizations) instead of whitening the full
  retained-set covariance; the two forms are algebraically identical and the
  agreement with :func:`ofdmsec.rates.rate_eve_joint` is a tested invariant.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import CHANNEL_LANE, PARTITION_LANE, sample_realization, substream
from .ofdm import OfdmStructure, SystemConfig, build_structure
from .power import METHODS, RETAINED_POWER_RTOL, PowerFractions, allocate
from .precoder import DegenerateChannelError, compute_precoder, eve_footprint
from .rates import (TrialResult, rate_bob, rate_eve_joint, rate_eve_per_sub,
                    secrecy_rate)

logger = logging.getLogger(__name__)

DECODERS = ("joint", "per_subchannel")

#: Trials per reduction chunk. Fixed (never derived from the worker count) so
#: that serial and parallel runs accumulate partial sums in the same order.
CHUNK_TRIALS = 256

#: Give up after this many consecutive degenerate channel draws in one trial.
MAX_RESAMPLES = 100


@dataclass(frozen=True)
class MonteCarloPlan:
    """What to estimate and how: trial count, grid resolution, seed, the
    encrypted-set size and selection method, and Eve's decoder model."""

    n_trials: int = 2000
    grid_points: int = 21
    seed: int = 7
    n_encrypted: int = 0
    method: str = "highest"
    eve_decoder: str = "joint"
    equal_power: bool = False
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")
        if self.n_encrypted < 0:
            raise ValueError("n_encrypted must be >= 0")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.eve_decoder not in DECODERS:
            raise ValueError(f"unknown eve_decoder {self.eve_decoder!r}")
        if self.n_jobs < 1:
            raise ValueError("n_jobs must be >= 1")


@dataclass(frozen=True)
class SweepRow:
    """One Monte Carlo estimate at a fixed (theta, N_e, decoder) cell."""

    theta1: float
    theta2: float
    theta3: float
    n_encrypted: int
    eve_decoder: str
    avg_secrecy: float
    std_error: float
    n_trials: int


@dataclass(frozen=True)
class SweepReport:
    """All evaluated rows plus the best row per (n_encrypted, decoder) group."""

    rows: tuple
    best: tuple


def grid_fractions(grid_points: int):
    """The feasible (theta1, theta2) lattice: both axes on {i/(M-1)} with
    theta1 + theta2 <= 1, theta3 the remainder. Row-major in (theta1, theta2).
    Contains M(M+1)/2 points."""
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    m = grid_points
    out = []
    for i in range(m):
        for j in range(m - i):
            out.append(PowerFractions.with_remainder(i / (m - 1), j / (m - 1)))
    return out


# --------------------------------------------------------------------------
# Per-trial context and the fused evaluation kernel
# --------------------------------------------------------------------------

@dataclass
class _TrialContext:
    """Channel-dependent quantities shared by every cell of one trial, in
    Bob-noise-over-gain ascending order (best sub-channel first)."""

    a_sorted: np.ndarray      # eta_B / |H_k|^2, ascending
    cum_a: np.ndarray         # prefix sums of a_sorted
    order: np.ndarray         # original sub-channel index at each position
    ge_sorted: np.ndarray     # |G_k|^2 aligned with a_sorted
    w_sorted: np.ndarray      # Eve AN footprint rows aligned with a_sorted
    rownorm2_sorted: np.ndarray
    rank: np.ndarray | None   # lazy per-trial random priority (partition lane)
    seed: int
    trial: int


def _build_context(config: SystemConfig, structure: OfdmStructure,
                   seed: int, trial: int):
    """Sample one trial's channels and precoder, resampling degenerate draws
    from the same stream. Returns (context, n_resampled)."""
    rng = substream(seed, trial, CHANNEL_LANE)
    resamples = 0
    while True:
        realization = sample_realization(config, structure, rng)
        try:
            precoder = compute_precoder(structure, realization.h_time)
            break
        except DegenerateChannelError:
            resamples += 1
            if resamples >= MAX_RESAMPLES:
                raise
    footprint = eve_footprint(structure, realization.g_time, precoder,
                              np.arange(config.n_subchannels), 1.0)
    gains_bob = np.abs(realization.h_freq) ** 2
    a = config.noise_power_bob / gains_bob
    order = np.argsort(a, kind="stable")
    a_sorted = a[order]
    ge = np.abs(realization.g_freq) ** 2
    return _TrialContext(
        a_sorted=a_sorted,
        cum_a=np.cumsum(a_sorted),
        order=order,
        ge_sorted=ge[order],
        w_sorted=footprint.q_tilde[order],
        rownorm2_sorted=footprint.an_power_per_subchannel[order],
        rank=None,
        seed=seed,
        trial=trial,
    ), resamples


def _support_size(a_sorted, cum_a, budget):
    """Size of the water-filling support (number of powered sub-channels)."""
    if budget <= 0 or a_sorted.size == 0:
        return 0
    m = np.arange(1, a_sorted.size + 1)
    feasible = np.nonzero(a_sorted < (budget + cum_a) / m)[0]
    return int(feasible[-1]) + 1 if feasible.size else 1


def _waterfill_sorted(a, budget):
    """Water-fill over an ascending floor vector; returns the power vector."""
    if a.size == 0 or budget <= 0:
        return np.zeros(a.size)
    cum = np.cumsum(a)
    m = np.arange(1, a.size + 1)
    feasible = np.nonzero(a < (budget + cum) / m)[0]
    m_star = int(feasible[-1]) + 1 if feasible.size else 1
    p = np.maximum((budget + cum[m_star - 1]) / m_star - a, 0.0)
    p[m_star:] = 0.0
    return p


def _logdet2_cholesky(mat):
    """log2 det of a Hermitian positive-definite matrix via Cholesky."""
    chol = np.linalg.cholesky((mat + mat.conj().T) / 2.0)
    return 2.0 * float(np.sum(np.log2(np.real(np.diag(chol)))))


def _eval_cell(ctx: _TrialContext, config: SystemConfig, n_encrypted: int,
               theta1: float, theta2: float, theta3: float, method: str,
               equal_power: bool, with_joint: bool):
    """One (cell, trial) evaluation.

    Returns (encrypted, unencrypted, eve_joint, eve_per_sub) in bits/block.
    Matches the composition of allocate / rate_bob / rate_eve_* exactly; the
    equivalence is asserted in the test suite.
    """
    p_total = config.total_power
    data_budget = (theta1 + theta2) * p_total
    if data_budget <= 0:
        return 0.0, 0.0, 0.0, 0.0

    n_active = _support_size(ctx.a_sorted, ctx.cum_a, data_budget)
    n_e = min(n_encrypted, n_active)

    # Positions index the a-ascending ordering, so the active set is always
    # the prefix 0..n_active-1 and "highest gains" is the front of it. The
    # position arrays are kept ascending so each set's floors stay sorted for
    # the water-fill.
    if method == "highest":
        enc = np.arange(0, n_e)
        une = np.arange(n_e, n_active)
    elif method == "lowest":
        # Stable sort on -a so that gain ties still resolve to the lowest
        # sub-channel index, matching partition_encrypted.
        sel = np.argsort(-ctx.a_sorted[:n_active], kind="stable")
        enc = np.sort(sel[:n_e])
        une = np.sort(sel[n_e:])
    else:
        if ctx.rank is None:
            n = ctx.a_sorted.size
            perm = substream(ctx.seed, ctx.trial, PARTITION_LANE).permutation(n)
            rank = np.empty(n, dtype=int)
            rank[perm] = np.arange(n)
            ctx.rank = rank
        keys = ctx.rank[ctx.order[:n_active]]
        sel = np.argsort(keys, kind="stable")
        enc = np.sort(sel[:n_e])
        une = np.sort(sel[n_e:])

    eta_b_ratio = ctx.a_sorted  # noise/gain; SNR per unit power is 1/a

    if equal_power:
        p_each = data_budget / n_active
        p_enc = np.full(enc.size, p_each)
        p_une = np.full(une.size, p_each)
    else:
        p_enc = _waterfill_sorted(eta_b_ratio[enc], theta1 * p_total)
        p_une = _waterfill_sorted(eta_b_ratio[une], theta2 * p_total)

    enc_rate = float(np.sum(np.log2(1.0 + p_enc / eta_b_ratio[enc])))
    une_rate = float(np.sum(np.log2(1.0 + p_une / eta_b_ratio[une])))

    mask = p_une > RETAINED_POWER_RTOL * p_total
    ret = une[mask]
    d = p_une[mask] * ctx.ge_sorted[ret]
    eta_e = config.noise_power_eve
    pz = theta3 * p_total / config.n_cp if config.n_cp else 0.0

    if d.size == 0:
        return enc_rate, une_rate, 0.0, 0.0

    eve_psub = float(np.sum(np.log2(
        1.0 + d / (pz * ctx.rownorm2_sorted[ret] + eta_e))))

    if not with_joint:
        return enc_rate, une_rate, 0.0, eve_psub

    if pz == 0.0 or config.n_cp == 0:
        eve_joint = float(np.sum(np.log2(1.0 + d / eta_e)))
    else:
        w = ctx.w_sorted[ret]
        n_cp = w.shape[1]
        eye = np.eye(n_cp)
        t1 = (w.conj().T / (eta_e + d)) @ w
        t2 = w.conj().T @ w
        eve_joint = (float(np.sum(np.log2(1.0 + d / eta_e)))
                     + _logdet2_cholesky(eye + pz * t1)
                     - _logdet2_cholesky(eye + (pz / eta_e) * t2))

    return enc_rate, une_rate, eve_joint, eve_psub


# --------------------------------------------------------------------------
# Chunked, order-stable reduction engine
# --------------------------------------------------------------------------

def _chunk_bounds(n_trials):
    return [(s, min(s + CHUNK_TRIALS, n_trials)) for s in range(0, n_trials, CHUNK_TRIALS)]


def _run_chunk(config, seed, start, stop, cells, with_joint):
    """Evaluate every cell for trials [start, stop).

    Returns a (n_cells, 6) array of partial sums — encrypted, unencrypted,
    eve-joint, eve-per-sub, and the squared per-trial secrecy sums for both
    decoders — plus the number of resampled degenerate draws. Sums are taken
    with np.sum over the trial axis so the reduction order is a function of
    the chunk contents only.
    """
    structure = build_structure(config.n_subchannels, config.n_cp)
    vals = np.empty((stop - start, len(cells), 4))
    resamples = 0
    for row, trial in enumerate(range(start, stop)):
        try:
            ctx, n_res = _build_context(config, structure, seed, trial)
            resamples += n_res
            for c, (n_enc, t1, t2, t3, method, equal_power) in enumerate(cells):
                vals[row, c] = _eval_cell(ctx, config, n_enc, t1, t2, t3,
                                          method, equal_power, with_joint)
        except Exception as exc:
            raise RuntimeError(
                f"numerical failure at trial {trial} (seed {seed}): {exc}"
            ) from exc

    acc = np.empty((len(cells), 6))
    acc[:, :4] = np.sum(vals, axis=0)
    s_joint = vals[:, :, 0] + vals[:, :, 1] - vals[:, :, 2]
    s_psub = vals[:, :, 0] + vals[:, :, 1] - vals[:, :, 3]
    acc[:, 4] = np.sum(s_joint * s_joint, axis=0)
    acc[:, 5] = np.sum(s_psub * s_psub, axis=0)
    return acc, resamples


def _run_cells(config, seed, n_trials, cells, n_jobs=1, with_joint=True):
    """Accumulate partial sums over all trials, serially or in parallel.

    Chunk boundaries and the chunk-order reduction are identical either way,
    so the result is byte-identical for any n_jobs.
    """
    bounds = _chunk_bounds(n_trials)
    acc = np.zeros((len(cells), 6))
    resamples = 0
    if n_jobs <= 1 or len(bounds) == 1:
        parts = (_run_chunk(config, seed, s, e, cells, with_joint) for s, e in bounds)
    else:
        pool = ProcessPoolExecutor(max_workers=min(n_jobs, len(bounds)))
        try:
            parts = list(pool.map(_run_chunk_star,
                                  [(config, seed, s, e, cells, with_joint)
                                   for s, e in bounds]))
        finally:
            pool.shutdown()
    for part_acc, part_res in parts:
        acc += part_acc
        resamples += part_res
    if resamples:
        logger.info("resampled %d degenerate channel draw(s)", resamples)
    return acc


def _run_chunk_star(args):
    return _run_chunk(*args)


def _make_row(acc_row, n_trials, config, cell, eve_decoder):
    """Fold one cell's partial sums into a SweepRow.

    avg_secrecy applies the ergodic clamp: mean encrypted rate plus the
    positive part of (mean unencrypted - mean eve). std_error is the standard
    error of the per-trial unclamped secrecy sum.
    """
    n_enc, t1, t2, t3, _method, _equal = cell
    k = n_trials
    block = config.block_length
    eve_col, sq_col = (2, 4) if eve_decoder == "joint" else (3, 5)
    mean_enc = float(acc_row[0]) / k
    mean_diff = float(acc_row[1] - acc_row[eve_col]) / k
    avg = (mean_enc + max(0.0, mean_diff)) / block
    sum_s = float(acc_row[0] + acc_row[1] - acc_row[eve_col])
    if k > 1:
        var = max(acc_row[sq_col] - sum_s * sum_s / k, 0.0) / (k - 1)
        se = float(np.sqrt(var / k)) / block
    else:
        se = 0.0
    return SweepRow(theta1=t1, theta2=t2, theta3=t3, n_encrypted=n_enc,
                    eve_decoder=eve_decoder, avg_secrecy=avg, std_error=se,
                    n_trials=k)


def _best_per_group(rows):
    """Highest-avg row for each (n_encrypted, eve_decoder) group, first wins ties."""
    best = {}
    for row in rows:
        key = (row.n_encrypted, row.eve_decoder)
        if key not in best or row.avg_secrecy > best[key].avg_secrecy:
            best[key] = row
    return tuple(best.values())


# --------------------------------------------------------------------------
# Public operations
# --------------------------------------------------------------------------

def average_secrecy(config: SystemConfig, fractions: PowerFractions,
                    plan: MonteCarloPlan):
    """Monte Carlo estimate of the average secrecy rate at fixed fractions.

    Returns (mean, std_error) in bits/sec/Hz under plan.eve_decoder. The mean
    is the ergodic secrecy rate: E[encrypted] + max(0, E[unencrypted] -
    E[eve]); see the module docstring for why the clamp sits outside the
    average.
    """
    cell = (plan.n_encrypted, fractions.theta1, fractions.theta2,
            fractions.theta3, plan.method, plan.equal_power)
    acc = _run_cells(config, plan.seed, plan.n_trials, [cell], plan.n_jobs,
                     with_joint=plan.eve_decoder == "joint")
    row = _make_row(acc[0], plan.n_trials, config, cell, plan.eve_decoder)
    return row.avg_secrecy, row.std_error


def grid_search(config: SystemConfig, plan: MonteCarloPlan) -> SweepReport:
    """Evaluate the full (theta1, theta2) lattice at plan.n_encrypted.

    All grid points share the same channel realizations (common random
    numbers), so the argmax is deterministic and comparisons between points
    are variance-reduced.
    """
    points = grid_fractions(plan.grid_points)
    cells = [(plan.n_encrypted, f.theta1, f.theta2, f.theta3, plan.method,
              plan.equal_power) for f in points]
    acc = _run_cells(config, plan.seed, plan.n_trials, cells, plan.n_jobs,
                     with_joint=plan.eve_decoder == "joint")
    rows = tuple(_make_row(acc[i], plan.n_trials, config, cells[i], plan.eve_decoder)
                 for i in range(len(cells)))
    return SweepReport(rows=rows, best=_best_per_group(rows))


def sweep_ne(config: SystemConfig, plan: MonteCarloPlan, ne_values,
             fractions: PowerFractions | None = None) -> SweepReport:
    """Sweep the encrypted-set size N_e.

    With ``fractions`` fixed, one row per N_e is evaluated. With
    ``fractions=None`` the full fraction grid is evaluated at every N_e in a
    single common-random-numbers pass; ``rows`` then contains every grid row
    and ``best`` the per-N_e argmax.
    """
    ne_values = [int(v) for v in ne_values]
    if fractions is not None:
        cells = [(ne, fractions.theta1, fractions.theta2, fractions.theta3,
                  plan.method, plan.equal_power) for ne in ne_values]
    else:
        points = grid_fractions(plan.grid_points)
        cells = [(ne, f.theta1, f.theta2, f.theta3, plan.method, plan.equal_power)
                 for ne in ne_values for f in points]
    acc = _run_cells(config, plan.seed, plan.n_trials, cells, plan.n_jobs,
                     with_joint=plan.eve_decoder == "joint")
    rows = tuple(_make_row(acc[i], plan.n_trials, config, cells[i], plan.eve_decoder)
                 for i in range(len(cells)))
    return SweepReport(rows=rows, best=_best_per_group(rows))


# --------------------------------------------------------------------------
# Single-trial orchestration through the production rate formulas
# --------------------------------------------------------------------------

def evaluate_trial(config: SystemConfig, structure: OfdmStructure, realization,
                   fractions: PowerFractions, n_encrypted: int,
                   method: str = "highest",
                   partition_rng: np.random.Generator | None = None,
                   equal_power: bool = False) -> TrialResult:
    """Full per-realization evaluation via the dense production formulas.

    This is the reference composition (allocate -> precoder -> footprint ->
    rates) used by the structural validation suite and as the oracle the
    optimized Monte Carlo kernel is tested against. Secrecy values here are
    the per-realization clamped ones.
    """
    gains_bob = np.abs(realization.h_freq) ** 2
    alloc = allocate(config, fractions, gains_bob, n_encrypted, method,
                     partition_rng, equal_power)
    prec = compute_precoder(structure, realization.h_time)
    pz = fractions.theta3 * config.total_power / config.n_cp if config.n_cp else 0.0
    footprint = eve_footprint(structure, realization.g_time, prec,
                              alloc.retained, pz)
    bob_terms = rate_bob(alloc, realization.h_freq, config.noise_power_bob)
    eve_joint = rate_eve_joint(alloc, realization.g_freq, footprint,
                               config.noise_power_eve)
    eve_psub = rate_eve_per_sub(alloc, realization.g_freq, footprint,
                                config.noise_power_eve)
    return TrialResult(
        rate_bob=bob_terms[0] + bob_terms[1],
        rate_eve_joint=eve_joint,
        rate_eve_per_sub=eve_psub,
        secrecy_joint=secrecy_rate(bob_terms, eve_joint),
        secrecy_per_sub=secrecy_rate(bob_terms, eve_psub),
    )
