"""Monte Carlo engine: fraction grid, kernel-vs-reference equivalence,
common random numbers, the ergodic clamp, and order-stable parallelism."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from ofdmsec import (
    MonteCarloPlan,
    PowerFractions,
    SweepRow,
    SystemConfig,
    allocate,
    average_secrecy,
    build_structure,
    compute_precoder,
    eve_footprint,
    evaluate_trial,
    grid_fractions,
    grid_search,
    rate_bob,
    rate_eve_joint,
    sample_realization,
    substream,
    sweep_ne,
)
from ofdmsec.channel import CHANNEL_LANE, PARTITION_LANE
from ofdmsec.montecarlo import _best_per_group, _build_context, _eval_cell

CFG = SystemConfig()
STRUCTURE = build_structure(CFG.n_subchannels, CFG.n_cp)

# a small link keeps the statistical tests fast without changing any code path
SMALL = SystemConfig(n_subchannels=16, n_cp=4, delay_spread_bob=4,
                     delay_spread_eve=4, tap_variance_bob=0.2,
                     tap_variance_eve=0.2, total_power=16000.0)


# ---------------------------------------------------------------------------
# fraction grid
# ---------------------------------------------------------------------------

def test_grid_fractions_two_point_oracle():
    grid = grid_fractions(2)
    assert [(f.theta1, f.theta2, f.theta3) for f in grid] == [
        (0.0, 0.0, 1.0), (0.0, 1.0, 0.0), (1.0, 0.0, 0.0)]


@pytest.mark.parametrize("m", [2, 3, 5, 21])
def test_grid_fractions_count_and_lattice(m):
    grid = grid_fractions(m)
    assert len(grid) == m * (m + 1) // 2
    step = 1.0 / (m - 1)
    seen = set()
    for f in grid:
        i = round(f.theta1 / step)
        j = round(f.theta2 / step)
        assert f.theta1 == pytest.approx(i * step)
        assert f.theta2 == pytest.approx(j * step)
        assert i + j <= m - 1
        assert f.theta3 == pytest.approx(1.0 - f.theta1 - f.theta2, abs=1e-12)
        seen.add((i, j))
    assert len(seen) == len(grid)
    # row-major: theta1 blocks in order, theta2 ascending inside each block
    pairs = [(f.theta1, f.theta2) for f in grid]
    assert pairs == sorted(pairs)


def test_grid_fractions_rejects_single_point():
    with pytest.raises(ValueError):
        grid_fractions(1)


# ---------------------------------------------------------------------------
# fused kernel == reference composition
# ---------------------------------------------------------------------------

KERNEL_CASES = [
    (0, 0, (0.35, 0.35, 0.30), "highest", False),
    (1, 8, (0.35, 0.35, 0.30), "highest", False),
    (2, 16, (0.2, 0.5, 0.3), "lowest", False),
    (3, 24, (0.5, 0.25, 0.25), "random", False),
    (4, 32, (0.375, 0.375, 0.25), "highest", True),
    (5, 48, (0.375, 0.375, 0.25), "random", True),
    (6, 64, (1.0, 0.0, 0.0), "highest", False),
    (7, 0, (0.0, 1.0, 0.0), "highest", False),
    (8, 12, (0.0, 0.0, 1.0), "lowest", False),
]


@pytest.mark.parametrize("trial, n_e, theta, method, equal_power", KERNEL_CASES)
def test_kernel_matches_reference_composition(trial, n_e, theta, method, equal_power):
    """The fused sweep kernel reproduces the dense allocate/precoder/rates
    chain to near machine precision for every selection method."""
    seed = 7
    fractions = PowerFractions(*theta)
    ctx, n_res = _build_context(CFG, STRUCTURE, seed, trial)
    assert n_res == 0
    enc, une, eve_j, eve_p = _eval_cell(ctx, CFG, n_e, *theta, method,
                                        equal_power, with_joint=True)

    realization = sample_realization(CFG, STRUCTURE, substream(seed, trial, CHANNEL_LANE))
    ref = evaluate_trial(CFG, STRUCTURE, realization, fractions, n_e, method,
                         partition_rng=substream(seed, trial, PARTITION_LANE),
                         equal_power=equal_power)

    tol = 1e-9 * max(1.0, abs(ref.rate_bob))
    assert abs((enc + une) - ref.rate_bob) <= tol
    assert abs(eve_j - ref.rate_eve_joint) <= tol
    assert abs(eve_p - ref.rate_eve_per_sub) <= tol
    assert abs((enc + max(0.0, une - eve_j)) - ref.secrecy_joint) <= tol
    assert abs((enc + max(0.0, une - eve_p)) - ref.secrecy_per_sub) <= tol


def test_kernel_random_reuses_one_priority_draw():
    """Within a trial, every cell using the random method shares the same
    priority permutation, so the encrypted sets are nested across n_e."""
    ctx, _ = _build_context(CFG, STRUCTURE, 7, 2)
    rates = [_eval_cell(ctx, CFG, n_e, 0.4, 0.4, 0.2, "random", False, True)
             for n_e in (4, 8)]
    # nested sets mean the n_e=8 cell can only move rate from the unencrypted
    # to the encrypted bucket relative to n_e=4, never reshuffle it
    assert rates[1][0] > rates[0][0]
    assert ctx.rank is not None
    # the draw matches the public partition stream
    expected_perm = substream(7, 2, PARTITION_LANE).permutation(CFG.n_subchannels)
    rank = np.empty(CFG.n_subchannels, dtype=int)
    rank[expected_perm] = np.arange(CFG.n_subchannels)
    assert_array_equal(ctx.rank, rank)


# ---------------------------------------------------------------------------
# averaging semantics
# ---------------------------------------------------------------------------

def manual_cell_moments(config, seed, n_trials, fractions, n_e, method="highest"):
    """Reference pass over the same substreams with the production chain."""
    structure = build_structure(config.n_subchannels, config.n_cp)
    enc_sum = une_sum = eve_sum = 0.0
    clamped = []
    for trial in range(n_trials):
        real = sample_realization(config, structure,
                                  substream(seed, trial, CHANNEL_LANE))
        alloc = allocate(config, fractions, np.abs(real.h_freq) ** 2, n_e, method)
        prec = compute_precoder(structure, real.h_time)
        pz = fractions.theta3 * config.total_power / config.n_cp
        fp = eve_footprint(structure, real.g_time, prec, alloc.retained, pz)
        enc, une = rate_bob(alloc, real.h_freq, config.noise_power_bob)
        eve = rate_eve_joint(alloc, real.g_freq, fp, config.noise_power_eve)
        enc_sum += enc
        une_sum += une
        eve_sum += eve
        clamped.append(enc + max(0.0, une - eve))
    k = n_trials
    return enc_sum / k, une_sum / k, eve_sum / k, np.array(clamped)


def test_average_secrecy_uses_ergodic_clamp():
    """The average is E[encrypted] + max(0, E[unencrypted] - E[eve]) — the
    clamp sits outside the expectation, not inside."""
    fractions = PowerFractions(0.3, 0.3, 0.4)
    plan = MonteCarloPlan(n_trials=48, seed=11, n_encrypted=4)
    avg, se = average_secrecy(SMALL, fractions, plan)
    m_enc, m_une, m_eve, clamped = manual_cell_moments(SMALL, 11, 48, fractions, 4)
    expected = (m_enc + max(0.0, m_une - m_eve)) / SMALL.block_length
    assert avg == pytest.approx(expected, rel=1e-9)
    assert avg >= 0.0
    assert se > 0.0


def test_ergodic_clamp_binds_against_strong_eavesdropper():
    """With Eve's link much stronger than Bob's, the unencrypted surplus is
    negative on average: the ergodic average keeps only the encrypted term,
    while a per-realization clamp would report strictly more."""
    strong_eve = SystemConfig(n_subchannels=16, n_cp=4, delay_spread_bob=4,
                              delay_spread_eve=4, tap_variance_bob=0.05,
                              tap_variance_eve=4.0, total_power=16000.0)
    fractions = PowerFractions(0.3, 0.3, 0.4)
    plan = MonteCarloPlan(n_trials=48, seed=3, n_encrypted=4)
    avg, _ = average_secrecy(strong_eve, fractions, plan)
    m_enc, m_une, m_eve, clamped = manual_cell_moments(strong_eve, 3, 48, fractions, 4)
    assert m_une - m_eve < 0.0
    assert avg == pytest.approx(m_enc / strong_eve.block_length, rel=1e-9)
    assert np.mean(clamped) / strong_eve.block_length > avg


def test_average_secrecy_std_error_formula():
    fractions = PowerFractions(0.4, 0.4, 0.2)
    plan = MonteCarloPlan(n_trials=32, seed=5, n_encrypted=2)
    _, se = average_secrecy(SMALL, fractions, plan)

    structure = build_structure(SMALL.n_subchannels, SMALL.n_cp)
    unclamped = []
    for trial in range(32):
        real = sample_realization(SMALL, structure, substream(5, trial, CHANNEL_LANE))
        alloc = allocate(SMALL, fractions, np.abs(real.h_freq) ** 2, 2, "highest")
        prec = compute_precoder(structure, real.h_time)
        pz = fractions.theta3 * SMALL.total_power / SMALL.n_cp
        fp = eve_footprint(structure, real.g_time, prec, alloc.retained, pz)
        enc, une = rate_bob(alloc, real.h_freq, SMALL.noise_power_bob)
        eve = rate_eve_joint(alloc, real.g_freq, fp, SMALL.noise_power_eve)
        unclamped.append(enc + une - eve)
    expected = np.std(unclamped, ddof=1) / np.sqrt(32) / SMALL.block_length
    assert se == pytest.approx(expected, rel=1e-9)


# ---------------------------------------------------------------------------
# determinism, common random numbers, parallel reduction
# ---------------------------------------------------------------------------

def test_average_secrecy_is_deterministic():
    fractions = PowerFractions(0.35, 0.35, 0.30)
    plan = MonteCarloPlan(n_trials=24, seed=7, n_encrypted=8)
    first = average_secrecy(SMALL, fractions, plan)
    second = average_secrecy(SMALL, fractions, plan)
    assert first == second


def test_grid_rows_match_single_point_runs():
    """Common random numbers: every grid row equals the estimate obtained by
    evaluating that fraction point alone with the same plan."""
    plan = MonteCarloPlan(n_trials=16, grid_points=2, seed=9, n_encrypted=4)
    report = grid_search(SMALL, plan)
    assert len(report.rows) == 3
    for row in report.rows:
        avg, se = average_secrecy(SMALL, PowerFractions(row.theta1, row.theta2,
                                                        row.theta3), plan)
        # the batched pass reduces a wider array, so agreement is to rounding
        assert row.avg_secrecy == pytest.approx(avg, rel=1e-12, abs=1e-12)
        assert row.std_error == pytest.approx(se, rel=1e-9, abs=1e-12)


def test_parallel_reduction_is_order_stable():
    """n_jobs changes the schedule, never the floats: chunked partial sums
    are combined in chunk order regardless of worker count."""
    fractions = PowerFractions(0.35, 0.35, 0.30)
    serial = average_secrecy(
        SMALL, fractions, MonteCarloPlan(n_trials=600, seed=7, n_encrypted=4, n_jobs=1))
    parallel = average_secrecy(
        SMALL, fractions, MonteCarloPlan(n_trials=600, seed=7, n_encrypted=4, n_jobs=2))
    assert serial == parallel


# ---------------------------------------------------------------------------
# sweeps and reports
# ---------------------------------------------------------------------------

def test_sweep_ne_fixed_fractions():
    plan = MonteCarloPlan(n_trials=16, seed=7)
    ne_values = (0, 4, 8)
    report = sweep_ne(SMALL, plan, ne_values, PowerFractions(0.35, 0.35, 0.30))
    assert [r.n_encrypted for r in report.rows] == list(ne_values)
    assert report.best == report.rows
    for row in report.rows:
        assert row.eve_decoder == "joint"
        assert row.n_trials == 16
        assert row.avg_secrecy >= 0.0


def test_sweep_ne_grid_mode_selects_per_ne_argmax():
    plan = MonteCarloPlan(n_trials=16, grid_points=2, seed=7)
    ne_values = (0, 8)
    report = sweep_ne(SMALL, plan, ne_values, fractions=None)
    assert len(report.rows) == 2 * 3
    assert len(report.best) == 2
    for ne, best_row in zip(ne_values, report.best):
        group = [r for r in report.rows if r.n_encrypted == ne]
        assert best_row.n_encrypted == ne
        assert best_row.avg_secrecy == max(r.avg_secrecy for r in group)


def test_report_rows_never_negative():
    plan = MonteCarloPlan(n_trials=16, grid_points=3, seed=13, n_encrypted=2,
                          eve_decoder="per_subchannel")
    report = grid_search(SMALL, plan)
    assert len(report.rows) == 6
    assert all(row.avg_secrecy >= 0.0 for row in report.rows)
    assert all(row.eve_decoder == "per_subchannel" for row in report.rows)


def test_best_per_group_first_wins_ties():
    def row(ne, decoder, avg, t1=0.1):
        return SweepRow(theta1=t1, theta2=0.2, theta3=1.0 - t1 - 0.2,
                        n_encrypted=ne, eve_decoder=decoder, avg_secrecy=avg,
                        std_error=0.0, n_trials=4)

    rows = [row(0, "joint", 1.0, t1=0.1), row(0, "joint", 1.0, t1=0.3),
            row(0, "joint", 2.0, t1=0.5), row(8, "joint", 0.5),
            row(0, "per_subchannel", 3.0)]
    best = _best_per_group(rows)
    assert [(b.n_encrypted, b.eve_decoder, b.avg_secrecy, b.theta1) for b in best] == [
        (0, "joint", 2.0, 0.5), (8, "joint", 0.5, 0.1),
        (0, "per_subchannel", 3.0, 0.1)]


@pytest.mark.parametrize("kwargs", [
    dict(n_trials=0),
    dict(grid_points=1),
    dict(n_encrypted=-1),
    dict(method="best"),
    dict(eve_decoder="mmse"),
    dict(n_jobs=0),
])
def test_plan_validation(kwargs):
    with pytest.raises(ValueError):
        MonteCarloPlan(**kwargs)
