"""Mono WAV I/O and sample-level utilities (mixing, gain, length fitting)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import ArtifactIOError, InputError

log = logging.getLogger(__name__)

PIPELINE_RATE = 44100

# 16-bit PCM scaling: integer q decodes to q / 32768, so +32767 maps just
# below full scale and the round trip stays within one quantization step.
_PCM_SCALE = 32768.0


@dataclass(frozen=True)
class AudioClip:
    """Immutable mono audio: float64 samples, nominally in [-1, 1].

    `overflow` is set by :func:`mix` when the sum left [-1, 1]; nothing is
    clipped silently.
    """

    samples: np.ndarray
    sample_rate: int
    overflow: bool = False

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("clip must hold a non-empty 1-D sample array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("clip contains non-finite samples")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        samples = samples.copy()
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples)))


def read_wav(path) -> AudioClip:
    """Read a PCM WAV (16-bit int or 32-bit float, mono or stereo) as mono.

    Stereo is averaged to mono; integer samples are scaled to [-1, 1].
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except Exception as exc:  # scipy raises ValueError on non-WAV content
        raise InputError(f"unreadable WAV {path}: {exc}") from None

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / _PCM_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise InputError(
            f"unsupported WAV sample format {data.dtype} in {path}; "
            "expected 16-bit PCM or 32-bit float"
        )
    if samples.ndim == 2:
        if samples.shape[1] > 2:
            raise InputError(f"{path}: {samples.shape[1]} channels; expected mono or stereo")
        samples = samples.mean(axis=1)
    if samples.size == 0:
        raise InputError(f"{path}: zero-length audio")
    return AudioClip(samples, int(rate))


def write_wav(clip: AudioClip, path, *, allow_clipping: bool = False) -> None:
    """Write 16-bit PCM little-endian WAV.

    Samples outside [-1, 1] are an error unless `allow_clipping` is set,
    in which case they are clamped at the quantization step.
    """
    s = clip.samples
    if not allow_clipping and (s.min() < -1.0 or s.max() > 1.0):
        raise InputError(
            f"samples outside [-1, 1] (peak {clip.peak:.4f}); "
            "pass allow_clipping=True to clip on write"
        )
    q = np.floor(s * _PCM_SCALE + 0.5)
    q = np.clip(q, -32768, 32767).astype(np.int16)
    try:
        wavfile.write(path, clip.sample_rate, q)
    except OSError as exc:
        raise ArtifactIOError(f"cannot write WAV {path}: {exc}") from None


def mix(a: AudioClip, b: AudioClip) -> AudioClip:
    """Sample-wise sum; the shorter clip is zero-padded.

    Sets `overflow` on the result if any output sample exceeds [-1, 1].
    """
    if a.sample_rate != b.sample_rate:
        raise InputError(f"sample-rate mismatch: {a.sample_rate} vs {b.sample_rate}")
    n = max(len(a), len(b))
    out = np.zeros(n, dtype=np.float64)
    out[: len(a)] += a.samples
    out[: len(b)] += b.samples
    overflow = bool(np.any(np.abs(out) > 1.0))
    return AudioClip(out, a.sample_rate, overflow=overflow)


def apply_gain(clip: AudioClip, gain_db: float) -> AudioClip:
    """Scale every sample by 10^(gain_db / 20)."""
    if not math.isfinite(gain_db):
        raise ValueError(f"gain_db must be finite, got {gain_db}")
    return replace(clip, samples=clip.samples * 10.0 ** (gain_db / 20.0), overflow=False)


def fit_length(clip: AudioClip, n_samples: int) -> AudioClip:
    """Zero-pad (at the end) or truncate to exactly `n_samples`."""
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    n = len(clip)
    if n == n_samples:
        return clip
    if n < n_samples:
        log.info("padding clip from %d to %d samples", n, n_samples)
        samples = np.concatenate([clip.samples, np.zeros(n_samples - n)])
    else:
        log.info("truncating clip from %d to %d samples", n, n_samples)
        samples = clip.samples[:n_samples]
    return replace(clip, samples=samples)


def ensure_rate(clip: AudioClip, sample_rate: int, *, resample: bool = False) -> AudioClip:
    """Check (or convert) the clip's rate.

    By default a mismatched rate is rejected; with `resample=True` the clip
    is converted with a polyphase windowed-sinc filter.
    """
    if clip.sample_rate == sample_rate:
        return clip
    if not resample:
        raise InputError(
            f"clip rate {clip.sample_rate} Hz != pipeline rate {sample_rate} Hz; "
            "pass resample=True (or --resample) to convert"
        )
    g = math.gcd(sample_rate, clip.sample_rate)
    out = resample_poly(clip.samples, sample_rate // g, clip.sample_rate // g)
    log.info("resampled %d Hz -> %d Hz", clip.sample_rate, sample_rate)
    return AudioClip(out, sample_rate)
