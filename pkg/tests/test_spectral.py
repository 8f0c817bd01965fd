import numpy as np
import pytest

from noiseblend.audio import AudioClip
from noiseblend.spectral import (
    AMP_FLOOR,
    MEL_BANDS,
    STFT_BINS,
    SpectralConfig,
    SpectrogramGrid,
    _istft,
    _stft,
    amp_to_db,
    db_to_amp,
    griffin_lim,
    mel_filter,
    mel_filterbank,
    mel_inverse,
    stft_magnitude,
)

from conftest import sine_clip


def spectral_convergence(clip, grid):
    rebuilt = stft_magnitude(clip, grid.config)
    return np.linalg.norm(rebuilt.values - grid.values) / np.linalg.norm(grid.values)


class TestConfig:
    def test_defaults_are_canonical(self):
        cfg = SpectralConfig()
        assert cfg.n_bins == 1025
        assert cfg.clip_samples == 512 * 441

    def test_validation(self):
        with pytest.raises(ValueError):
            SpectralConfig(n_fft=1000)  # not a power of two
        with pytest.raises(ValueError):
            SpectralConfig(f_min=500.0, f_max=100.0)
        with pytest.raises(ValueError):
            SpectralConfig(hop_length=4096)


class TestStft:
    def test_zero_clip_gives_zero_grid(self, small_cfg):
        clip = AudioClip(np.zeros(small_cfg.clip_samples), small_cfg.sample_rate)
        grid = stft_magnitude(clip, small_cfg)
        assert grid.axis_kind == STFT_BINS
        assert grid.shape == (small_cfg.n_bins, small_cfg.n_frames)
        assert np.all(grid.values == 0.0)

    def test_bin_centered_sine_peaks_at_bin(self, small_cfg):
        k = 16
        freq = k * small_cfg.sample_rate / small_cfg.n_fft  # 500 Hz
        grid = stft_magnitude(sine_clip(freq, small_cfg), small_cfg)
        # frames whose window overlaps the reflection padding see a phase
        # flip; every fully interior frame must peak at the sine's bin
        margin = -(-small_cfg.n_fft // (2 * small_cfg.hop_length))
        interior = grid.values[:, margin:-margin]
        assert np.all(np.argmax(interior, axis=0) == k)

    def test_homogeneity(self, small_cfg):
        clip = sine_clip(710.0, small_cfg)
        doubled = AudioClip(2.0 * clip.samples, small_cfg.sample_rate)
        g1 = stft_magnitude(clip, small_cfg)
        g2 = stft_magnitude(doubled, small_cfg)
        np.testing.assert_allclose(g2.values, 2.0 * g1.values, rtol=1e-12, atol=1e-12)

    def test_wrong_rate_rejected(self, small_cfg):
        clip = AudioClip(np.zeros(small_cfg.clip_samples), 44100)
        with pytest.raises(ValueError):
            stft_magnitude(clip, small_cfg)

    def test_wrong_length_rejected(self, small_cfg):
        clip = AudioClip(np.zeros(small_cfg.clip_samples - 1), small_cfg.sample_rate)
        with pytest.raises(ValueError):
            stft_magnitude(clip, small_cfg)

    def test_istft_inverts_stft(self, small_cfg):
        rng = np.random.default_rng(0)
        x = rng.uniform(-0.5, 0.5, small_cfg.clip_samples)
        back = _istft(_stft(x, small_cfg), small_cfg, len(x))
        np.testing.assert_allclose(back, x, atol=1e-10)


class TestMelFilterbank:
    def test_zero_grid(self, small_cfg):
        zero = SpectrogramGrid(
            np.zeros((small_cfg.n_bins, small_cfg.n_frames)), STFT_BINS, small_cfg
        )
        out = mel_filter(zero, small_cfg)
        assert out.axis_kind == MEL_BANDS
        assert np.all(out.values == 0.0)

    def test_linearity(self, small_cfg):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 1, (small_cfg.n_bins, small_cfg.n_frames))
        g = SpectrogramGrid(x, STFT_BINS, small_cfg)
        g3 = SpectrogramGrid(3.0 * x, STFT_BINS, small_cfg)
        np.testing.assert_allclose(
            mel_filter(g3, small_cfg).values, 3.0 * mel_filter(g, small_cfg).values, rtol=1e-12
        )

    def test_impulse_hits_only_covering_bands(self, small_cfg):
        fb = mel_filterbank(small_cfg)
        bin_idx = small_cfg.n_bins // 3
        x = np.zeros((small_cfg.n_bins, small_cfg.n_frames))
        x[bin_idx, 0] = 1.0
        out = mel_filter(SpectrogramGrid(x, STFT_BINS, small_cfg), small_cfg)
        np.testing.assert_allclose(out.values[:, 0], fb[:, bin_idx], atol=1e-15)
        covering = np.flatnonzero(fb[:, bin_idx])
        assert 1 <= covering.size <= 2

    def test_every_interior_bin_covered(self, small_cfg):
        fb = mel_filterbank(small_cfg)
        bin_hz = np.arange(small_cfg.n_bins) * small_cfg.sample_rate / small_cfg.n_fft
        interior = (bin_hz > small_cfg.f_min) & (bin_hz < small_cfg.f_max)
        assert np.all(fb.sum(axis=0)[interior] > 0)

    def test_filters_nonnegative_and_normalized(self, small_cfg):
        fb = mel_filterbank(small_cfg)
        assert np.all(fb >= 0)
        sums = fb.sum(axis=1)
        np.testing.assert_allclose(sums[sums > 0], 1.0, rtol=1e-12)


class TestMelInverse:
    def test_zero(self, small_cfg):
        zero = SpectrogramGrid(
            np.zeros((small_cfg.n_mels, small_cfg.n_frames)), MEL_BANDS, small_cfg
        )
        assert np.all(mel_inverse(zero, small_cfg).values == 0.0)

    def test_constant_roundtrip_per_band(self, small_cfg):
        const = SpectrogramGrid(
            np.full((small_cfg.n_mels, small_cfg.n_frames), 0.3), MEL_BANDS, small_cfg
        )
        back = mel_filter(mel_inverse(const, small_cfg), small_cfg)
        rel = np.abs(back.values - 0.3) / 0.3
        assert rel.max() <= 0.1

    def test_single_band_stays_under_triangle(self, small_cfg):
        fb = mel_filterbank(small_cfg)
        band = small_cfg.n_mels // 2
        y = np.zeros((small_cfg.n_mels, small_cfg.n_frames))
        y[band] = 1.0
        out = mel_inverse(SpectrogramGrid(y, MEL_BANDS, small_cfg), small_cfg)
        support = fb[band] > 0
        assert np.all(out.values[~support] == 0.0)
        assert out.values[support].max() > 0

    @pytest.mark.parametrize("cfg_name", ["small", "default"])
    def test_double_projection_stable_on_smooth_grids(self, cfg_name, small_cfg):
        cfg = small_cfg if cfg_name == "small" else SpectralConfig()
        ramps = [
            np.full((cfg.n_bins, cfg.n_frames), 0.5),
            np.linspace(0.1, 1.0, cfg.n_bins)[:, None]
            * np.linspace(0.5, 1.5, cfg.n_frames)[None, :],
        ]
        for values in ramps:
            g = SpectrogramGrid(values, STFT_BINS, cfg)
            m1 = mel_filter(g, cfg)
            m2 = mel_filter(mel_inverse(m1, cfg), cfg)
            err = np.linalg.norm(m2.values - m1.values) / np.linalg.norm(m1.values)
            assert err <= 0.02


class TestGriffinLim:
    def test_zero_grid_gives_zero_audio(self, small_cfg):
        zero = SpectrogramGrid(
            np.zeros((small_cfg.n_bins, small_cfg.n_frames)), STFT_BINS, small_cfg
        )
        out = griffin_lim(zero, iters=8)
        assert np.all(out.samples == 0.0)
        assert len(out) == small_cfg.clip_samples

    def test_convergence_improves_over_zero_phase(self, small_cfg):
        clip = sine_clip(500.0, small_cfg)
        other = sine_clip(1250.0, small_cfg)
        harmonic = AudioClip(clip.samples + 0.5 * other.samples, small_cfg.sample_rate)
        grid = stft_magnitude(harmonic, small_cfg)
        err0 = spectral_convergence(griffin_lim(grid, iters=0), grid)
        err32 = spectral_convergence(griffin_lim(grid, iters=32), grid)
        assert err32 <= err0

    def test_sine_reconstruction_error(self, mid_cfg):
        grid = stft_magnitude(sine_clip(440.0, mid_cfg), mid_cfg)
        out = griffin_lim(grid, iters=64)
        assert spectral_convergence(out, grid) <= 0.05

    def test_deterministic(self, small_cfg):
        grid = stft_magnitude(sine_clip(777.0, small_cfg), small_cfg)
        a = griffin_lim(grid, iters=16)
        b = griffin_lim(grid, iters=16)
        assert np.array_equal(a.samples, b.samples)

    def test_rejects_mel_grid(self, small_cfg):
        mel = SpectrogramGrid(
            np.zeros((small_cfg.n_mels, small_cfg.n_frames)), MEL_BANDS, small_cfg
        )
        with pytest.raises(ValueError):
            griffin_lim(mel)


class TestDb:
    def test_unit_amplitude_is_zero_db(self):
        assert amp_to_db(1.0) == 0.0

    def test_smr_scale_factor(self):
        ratio = db_to_amp(21.0) / db_to_amp(0.0)
        assert abs(ratio - 11.2202) <= 1e-4
        assert ratio == pytest.approx(11.220184543019636, rel=1e-12)

    def test_floor_clamp(self):
        assert amp_to_db(0.0) == -100.0
        assert amp_to_db(AMP_FLOOR / 10) == -100.0

    def test_roundtrip_above_floor(self):
        for x in (1e-4, 0.03, 1.0, 7.5):
            assert db_to_amp(amp_to_db(x)) == pytest.approx(x, rel=1e-12)


class TestGridValidation:
    def test_negative_rejected(self, small_cfg):
        bad = np.full((small_cfg.n_bins, small_cfg.n_frames), -1.0)
        with pytest.raises(ValueError):
            SpectrogramGrid(bad, STFT_BINS, small_cfg)

    def test_non_finite_rejected(self, small_cfg):
        bad = np.zeros((small_cfg.n_bins, small_cfg.n_frames))
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            SpectrogramGrid(bad, STFT_BINS, small_cfg)

    def test_shape_must_match_kind(self, small_cfg):
        with pytest.raises(ValueError):
            SpectrogramGrid(np.zeros((3, 3)), STFT_BINS, small_cfg)
