"""Block structure (CP operators, DFT) and Toeplitz channel diagonalization."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from ofdmsec import SystemConfig, build_structure, frequency_response, toeplitz_channel

rng = np.random.default_rng(20260301)


class TestBuildStructure:
    """Exact shapes and entries of the CP insert/remove and DFT operators."""

    def test_cp_insert_prepends_block_tail(self):
        s = build_structure(2, 1)
        assert_array_equal(s.cp_insert, [[0, 1], [1, 0], [0, 1]])

    def test_cp_remove_drops_prefix(self):
        s = build_structure(2, 1)
        assert_array_equal(s.cp_remove, [[0, 1, 0], [0, 0, 1]])

    @pytest.mark.parametrize("n, n_cp", [(2, 1), (8, 3), (64, 16), (5, 0)])
    def test_remove_after_insert_is_identity(self, n, n_cp):
        s = build_structure(n, n_cp)
        assert_array_equal(s.cp_remove @ s.cp_insert, np.eye(n))

    @pytest.mark.parametrize("n", [1, 2, 7, 64])
    def test_dft_is_unitary(self, n):
        s = build_structure(n, 0)
        assert_allclose(s.dft @ s.dft.conj().T, np.eye(n), atol=1e-12)

    def test_dft_entries(self):
        s = build_structure(4, 1)
        k, l = 3, 2
        assert s.dft[k, l] == pytest.approx(np.exp(-2j * np.pi * k * l / 4) / 2.0)

    def test_properties_report_dimensions(self):
        s = build_structure(8, 3)
        assert s.n_subchannels == 8
        assert s.n_cp == 3

    @pytest.mark.parametrize("n, n_cp", [(0, 0), (4, -1), (4, 5)])
    def test_rejects_bad_dimensions(self, n, n_cp):
        with pytest.raises(ValueError):
            build_structure(n, n_cp)


class TestToeplitzChannel:
    def test_two_tap_matrix(self):
        h = toeplitz_channel(np.array([1.0, 0.5]), 3)
        assert_array_equal(h, [[1, 0, 0], [0.5, 1, 0], [0, 0.5, 1]])

    def test_first_column_is_padded_impulse_response(self):
        taps = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        h = toeplitz_channel(taps, 9)
        assert_array_equal(h[:, 0], np.concatenate([taps, np.zeros(5)]))
        # every diagonal is constant
        for d in range(9):
            band = np.diagonal(h, -d)
            expected = taps[d] if d < 4 else 0.0
            assert_array_equal(band, np.full(band.size, expected))
        assert_array_equal(np.triu(h, 1), np.zeros((9, 9)))

    def test_rejects_taps_longer_than_matrix(self):
        with pytest.raises(ValueError):
            toeplitz_channel(np.ones(5), 4)

    def test_rejects_empty_taps(self):
        with pytest.raises(ValueError):
            toeplitz_channel(np.array([]), 4)


class TestFrequencyResponse:
    """The CP/DFT chain diagonalizes any channel whose memory fits the prefix,
    and the diagonal equals the zero-padded FFT of the taps."""

    def test_two_point_oracle(self):
        s = build_structure(2, 1)
        h = toeplitz_channel(np.array([1.0, 1.0]), 3)
        assert_allclose(frequency_response(s, h), [2.0, 0.0], atol=1e-12)

    @pytest.mark.parametrize("n, n_cp, n_taps", [(8, 2, 3), (16, 4, 5), (64, 16, 17)])
    def test_matches_fft_of_taps(self, n, n_cp, n_taps):
        s = build_structure(n, n_cp)
        taps = (rng.standard_normal(n_taps) + 1j * rng.standard_normal(n_taps)) / np.sqrt(2)
        h = toeplitz_channel(taps, n + n_cp)
        diag = frequency_response(s, h)
        assert_allclose(diag, np.fft.fft(taps, n), rtol=1e-10, atol=1e-12)

    def test_rejects_memory_exceeding_prefix(self):
        s = build_structure(8, 1)
        h = toeplitz_channel(np.array([1.0, 0.7, 0.4]), 9)  # L = 2 > N_cp = 1
        with pytest.raises(ValueError, match="cyclic prefix"):
            frequency_response(s, h)


class TestSystemConfig:
    def test_defaults(self):
        cfg = SystemConfig()
        assert cfg.n_subchannels == 64
        assert cfg.n_cp == 16
        assert cfg.block_length == 80
        assert cfg.tap_variance_bob == pytest.approx(1.0 / 17.0)
        assert cfg.total_power == pytest.approx(64000.0)

    def test_rejects_prefix_shorter_than_memory(self):
        with pytest.raises(ValueError, match="cyclic prefix shorter"):
            SystemConfig(n_cp=8, delay_spread_bob=16)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_subchannels=0),
            dict(n_cp=-1),
            dict(delay_spread_eve=-2),
            dict(noise_power_bob=0.0),
            dict(tap_variance_eve=-1.0),
            dict(total_power=0.0),
        ],
    )
    def test_rejects_nonpositive_parameters(self, kwargs):
        with pytest.raises(ValueError):
            SystemConfig(**kwargs)
