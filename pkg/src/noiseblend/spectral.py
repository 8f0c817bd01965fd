"""Time-frequency transforms: STFT magnitude, mel filterbank and its
approximate inverse, dB conversions, and Griffin-Lim phase reconstruction.

Grid convention everywhere: rows index frequency (low band first), columns
index time frames.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from .audio import AudioClip

# Amplitudes below AMP_FLOOR are treated as -100 dB; keeps log10 finite and
# is far below audibility for this application.
AMP_FLOOR = 1e-5
DB_FLOOR = -100.0

STFT_BINS = "stft-bins"
MEL_BANDS = "mel-bands"


@dataclass(frozen=True)
class SpectralConfig:
    """Transform parameters shared by every grid within one pipeline run.

    The canonical clip is exactly `n_frames * hop_length` samples so the
    image representation has a fixed width.
    """

    sample_rate: int = 44100
    n_fft: int = 2048
    hop_length: int = 441
    window: str = "hann"
    n_mels: int = 512
    f_min: float = 0.0
    f_max: float = 10000.0
    n_frames: int = 512

    def __post_init__(self) -> None:
        if self.n_fft < 2 or self.n_fft & (self.n_fft - 1):
            raise ValueError(f"n_fft must be a power of two, got {self.n_fft}")
        if not 0 < self.hop_length <= self.n_fft:
            raise ValueError("hop_length must be in (0, n_fft]")
        if not 0 <= self.f_min < self.f_max <= self.sample_rate / 2:
            raise ValueError("need 0 <= f_min < f_max <= sample_rate / 2")
        if self.n_mels < 1 or self.n_frames < 1:
            raise ValueError("n_mels and n_frames must be >= 1")

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def clip_samples(self) -> int:
        return self.n_frames * self.hop_length


@dataclass(frozen=True)
class SpectrogramGrid:
    """Nonnegative linear-magnitude matrix on either STFT bins or mel bands."""

    values: np.ndarray
    axis_kind: str
    config: SpectralConfig

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("grid values must be 2-D")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid contains non-finite values")
        if values.size and values.min() < 0:
            raise ValueError("grid contains negative magnitudes")
        expected_rows = {STFT_BINS: self.config.n_bins, MEL_BANDS: self.config.n_mels}
        if self.axis_kind not in expected_rows:
            raise ValueError(f"unknown axis_kind {self.axis_kind!r}")
        if values.shape != (expected_rows[self.axis_kind], self.config.n_frames):
            raise ValueError(
                f"{self.axis_kind} grid must be "
                f"{expected_rows[self.axis_kind]}x{self.config.n_frames}, "
                f"got {values.shape[0]}x{values.shape[1]}"
            )
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple:
        return self.values.shape


def amp_to_db(x):
    """20*log10 with the floor clamp; scalar in, scalar out."""
    return 20.0 * np.log10(np.maximum(x, AMP_FLOOR))


def db_to_amp(d):
    return np.power(10.0, np.asarray(d, dtype=np.float64) / 20.0)


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (np.power(10.0, np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def band_center_hz(cfg: SpectralConfig) -> np.ndarray:
    """Center frequency of each mel band."""
    edges = _mel_to_hz(np.linspace(_hz_to_mel(cfg.f_min), _hz_to_mel(cfg.f_max), cfg.n_mels + 2))
    return edges[1:-1]


@lru_cache(maxsize=8)
def mel_filterbank(cfg: SpectralConfig) -> np.ndarray:
    """Triangular HTK-mel filterbank, each filter normalized to unit weight sum.

    Rows whose triangle covers no FFT bin (possible for very narrow bands)
    stay zero.
    """
    bin_hz = np.arange(cfg.n_bins) * cfg.sample_rate / cfg.n_fft
    edges = _mel_to_hz(np.linspace(_hz_to_mel(cfg.f_min), _hz_to_mel(cfg.f_max), cfg.n_mels + 2))
    fb = np.zeros((cfg.n_mels, cfg.n_bins))
    for m in range(cfg.n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rise = (bin_hz - lo) / max(mid - lo, 1e-12)
        fall = (hi - bin_hz) / max(hi - mid, 1e-12)
        fb[m] = np.maximum(np.minimum(rise, fall), 0.0)
    sums = fb.sum(axis=1)
    nonzero = sums > 0
    fb[nonzero] /= sums[nonzero, None]
    fb.flags.writeable = False
    return fb


@lru_cache(maxsize=8)
def _analysis_window(cfg: SpectralConfig) -> np.ndarray:
    win = get_window(cfg.window, cfg.n_fft, fftbins=True)
    win.flags.writeable = False
    return win


def _stft(x: np.ndarray, cfg: SpectralConfig) -> np.ndarray:
    """Complex STFT with centered frames and reflection padding.

    Returns (n_bins, n_frames); frame t is centered on sample t*hop_length.
    """
    pad = cfg.n_fft // 2
    xp = np.pad(x, pad, mode="reflect")
    frames = sliding_window_view(xp, cfg.n_fft)[:: cfg.hop_length][: cfg.n_frames]
    return np.fft.rfft(frames * _analysis_window(cfg), axis=1).T


def _istft(spec: np.ndarray, cfg: SpectralConfig, length: int) -> np.ndarray:
    """Least-squares overlap-add inverse of :func:`_stft`."""
    win = _analysis_window(cfg)
    frames = np.fft.irfft(spec.T, n=cfg.n_fft, axis=1) * win
    pad = cfg.n_fft // 2
    out = np.zeros(length + 2 * pad)
    wsum = np.zeros(length + 2 * pad)
    wsq = win * win
    for i in range(frames.shape[0]):
        j = i * cfg.hop_length
        out[j : j + cfg.n_fft] += frames[i]
        wsum[j : j + cfg.n_fft] += wsq
    good = wsum > 1e-11
    out[good] /= wsum[good]
    return out[pad : pad + length]


def stft_magnitude(clip: AudioClip, cfg: SpectralConfig) -> SpectrogramGrid:
    """Magnitude spectrogram of a canonical-length clip."""
    if clip.sample_rate != cfg.sample_rate:
        raise ValueError(f"clip rate {clip.sample_rate} != config rate {cfg.sample_rate}")
    if len(clip) != cfg.clip_samples:
        raise ValueError(f"clip length {len(clip)} != canonical {cfg.clip_samples}")
    return SpectrogramGrid(np.abs(_stft(clip.samples, cfg)), STFT_BINS, cfg)


def mel_filter(grid: SpectrogramGrid, cfg: SpectralConfig) -> SpectrogramGrid:
    """Project linear magnitudes onto mel bands."""
    if grid.axis_kind != STFT_BINS or grid.config != cfg:
        raise ValueError("mel_filter expects an stft-bins grid built with the same config")
    return SpectrogramGrid(mel_filterbank(cfg) @ grid.values, MEL_BANDS, cfg)


def mel_inverse(grid: SpectrogramGrid, cfg: SpectralConfig) -> SpectrogramGrid:
    """Approximate inverse mel projection via the weight-normalized transpose.

    Each STFT bin becomes the weighted mean of the band values whose
    triangles cover it; uncovered bins decode to 0.
    """
    if grid.axis_kind != MEL_BANDS or grid.config != cfg:
        raise ValueError("mel_inverse expects a mel-bands grid built with the same config")
    fb = mel_filterbank(cfg)
    colsum = fb.sum(axis=0)
    out = fb.T @ grid.values
    covered = colsum > 1e-12
    out[covered] /= colsum[covered, None]
    out[~covered] = 0.0
    return SpectrogramGrid(np.maximum(out, 0.0), STFT_BINS, cfg)


def griffin_lim(grid: SpectrogramGrid, iters: int = 32, momentum: float = 0.99) -> AudioClip:
    """Reconstruct audio whose STFT magnitude approximates `grid`.

    Fast accelerated iteration with zero-phase initialization; fully
    deterministic. `iters=0` returns the zero-phase inverse.
    """
    if grid.axis_kind != STFT_BINS:
        raise ValueError("griffin_lim expects an stft-bins grid")
    if iters < 0:
        raise ValueError("iters must be >= 0")
    if not 0.0 <= momentum < 1.0:
        raise ValueError("momentum must be in [0, 1)")
    cfg = grid.config
    length = cfg.clip_samples
    mag = grid.values
    angles = np.ones_like(mag, dtype=np.complex128)
    prev = None
    for _ in range(iters):
        x = _istft(mag * angles, cfg, length)
        rebuilt = _stft(x, cfg)
        accel = rebuilt if prev is None else rebuilt - (momentum / (1.0 + momentum)) * prev
        angles = accel / np.maximum(np.abs(accel), 1e-16)
        prev = rebuilt
    x = _istft(mag * angles, cfg, length)
    return AudioClip(x, cfg.sample_rate)
