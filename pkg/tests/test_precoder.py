"""Artificial-noise precoder: null-space structure and Eve-side footprint."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from ofdmsec import (
    DegenerateChannelError,
    SystemConfig,
    build_structure,
    compute_precoder,
    eve_footprint,
    sample_realization,
    substream,
)
from ofdmsec.channel import CHANNEL_LANE

CFG = SystemConfig()
STRUCTURE = build_structure(CFG.n_subchannels, CFG.n_cp)
REALIZATIONS = [
    sample_realization(CFG, STRUCTURE, substream(123, t, CHANNEL_LANE))
    for t in range(6)
]


@pytest.mark.parametrize("trial", range(6))
def test_precoder_is_orthonormal(trial):
    prec = compute_precoder(STRUCTURE, REALIZATIONS[trial].h_time)
    assert prec.q.shape == (CFG.block_length, CFG.n_cp)
    gram = prec.q.conj().T @ prec.q
    assert_allclose(gram, np.eye(CFG.n_cp), atol=1e-10)


@pytest.mark.parametrize("trial", range(6))
def test_precoder_lives_in_bob_null_space(trial):
    real = REALIZATIONS[trial]
    prec = compute_precoder(STRUCTURE, real.h_time)
    residual = STRUCTURE.cp_remove @ real.h_time @ prec.q
    scale = np.linalg.norm(STRUCTURE.cp_remove @ real.h_time)
    assert np.linalg.norm(residual) <= 1e-9 * scale
    assert prec.null_residual == pytest.approx(np.linalg.norm(residual))


def test_null_dimension_matches_prefix_length():
    cfg = SystemConfig(n_subchannels=16, n_cp=5, delay_spread_bob=5,
                       delay_spread_eve=4, total_power=1000.0)
    structure = build_structure(cfg.n_subchannels, cfg.n_cp)
    real = sample_realization(cfg, structure, substream(9, 0, CHANNEL_LANE))
    prec = compute_precoder(structure, real.h_time)
    assert prec.q.shape == (21, 5)


def test_degenerate_channel_raises():
    """A rank-deficient draw (all-zero taps) has an oversized null space."""
    h_zero = np.zeros((CFG.block_length, CFG.block_length), dtype=complex)
    with pytest.raises(DegenerateChannelError):
        compute_precoder(STRUCTURE, h_zero)
    # the error is a RuntimeError so generic handlers still catch it
    assert issubclass(DegenerateChannelError, RuntimeError)


def test_footprint_rows_match_direct_product():
    real = REALIZATIONS[0]
    prec = compute_precoder(STRUCTURE, real.h_time)
    retained = np.array([0, 3, 17, 40, 63])
    pz = 2.5
    fp = eve_footprint(STRUCTURE, real.g_time, prec, retained, pz)

    w_full = STRUCTURE.dft @ STRUCTURE.cp_remove @ real.g_time @ prec.q
    assert_allclose(fp.q_tilde, w_full[retained, :], atol=1e-12)
    assert_allclose(
        fp.an_power_per_subchannel,
        pz * np.sum(np.abs(w_full[retained, :]) ** 2, axis=1),
        rtol=1e-12,
    )
    assert fp.an_symbol_power == pz


def test_footprint_empty_retained_set():
    real = REALIZATIONS[1]
    prec = compute_precoder(STRUCTURE, real.h_time)
    fp = eve_footprint(STRUCTURE, real.g_time, prec, np.array([], dtype=int), 1.0)
    assert fp.q_tilde.shape == (0, CFG.n_cp)
    assert fp.an_power_per_subchannel.shape == (0,)


def test_footprint_rejects_negative_power():
    real = REALIZATIONS[1]
    prec = compute_precoder(STRUCTURE, real.h_time)
    with pytest.raises(ValueError):
        eve_footprint(STRUCTURE, real.g_time, prec, np.array([0]), -1.0)


def test_an_covariance_invariant_under_basis_rotation():
    """Only the span of the precoder matters: rotating its columns by any
    unitary leaves the AN covariance on Eve's side unchanged."""
    real = REALIZATIONS[2]
    prec = compute_precoder(STRUCTURE, real.h_time)
    retained = np.arange(0, 64, 3)
    fp = eve_footprint(STRUCTURE, real.g_time, prec, retained, 1.0)

    rng = np.random.default_rng(5)
    z = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    u, _ = np.linalg.qr(z)
    rotated = type(prec)(q=prec.q @ u, null_residual=prec.null_residual)
    fp_rot = eve_footprint(STRUCTURE, real.g_time, rotated, retained, 1.0)

    cov = fp.q_tilde @ fp.q_tilde.conj().T
    cov_rot = fp_rot.q_tilde @ fp_rot.q_tilde.conj().T
    assert_allclose(cov_rot, cov, atol=1e-10)
    assert_allclose(fp_rot.an_power_per_subchannel, fp.an_power_per_subchannel,
                    atol=1e-10)
