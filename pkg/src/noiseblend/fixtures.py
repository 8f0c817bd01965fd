"""Deterministic synthetic noise fixtures so the whole pipeline and its
acceptance suite run with zero external data."""

from __future__ import annotations

import numpy as np
from scipy.signal import butter, sosfilt

from .audio import AudioClip
from .spectral import SpectralConfig

FIXTURE_KINDS = ("clicks", "hum", "am-broadband")


def _finalize(x: np.ndarray, cfg: SpectralConfig, peak: float = 0.5) -> AudioClip:
    top = np.max(np.abs(x))
    if top > 0:
        x = x * (peak / top)
    return AudioClip(x, cfg.sample_rate)


def clicks_train(cfg: SpectralConfig | None = None, seed: int = 0, rate_hz: float = 2.0) -> AudioClip:
    """Impulsive click train: decaying two-tone bursts plus a little burst noise."""
    cfg = cfg or SpectralConfig()
    rng = np.random.default_rng(seed)
    n = cfg.clip_samples
    fs = cfg.sample_rate
    burst_len = int(0.03 * fs)
    t = np.arange(burst_len) / fs
    burst = np.exp(-t / 0.008) * (
        np.sin(2 * np.pi * 1800.0 * t)
        + 0.5 * np.sin(2 * np.pi * 3700.0 * t)
        + 0.3 * rng.standard_normal(burst_len)
    )
    x = 0.02 * rng.standard_normal(n)  # faint room-tone bed under the clicks
    period = int(fs / rate_hz)
    for start in range(period // 4, n - burst_len, period):
        x[start : start + burst_len] += burst
    return _finalize(x, cfg)


def band_hum(cfg: SpectralConfig | None = None, seed: int = 0, fundamental: float = 120.0) -> AudioClip:
    """Machine-like hum: harmonic stack with slow amplitude wobble."""
    cfg = cfg or SpectralConfig()
    rng = np.random.default_rng(seed)
    n = cfg.clip_samples
    t = np.arange(n) / cfg.sample_rate
    x = np.zeros(n)
    for k in range(1, 7):
        x += (1.0 / k) * np.sin(2 * np.pi * fundamental * k * t + rng.uniform(0, 2 * np.pi))
    x *= 1.0 + 0.2 * np.sin(2 * np.pi * 0.5 * t)
    return _finalize(x, cfg)


def am_broadband(cfg: SpectralConfig | None = None, seed: int = 0, mod_hz: float = 4.0) -> AudioClip:
    """Amplitude-modulated broadband noise band-limited to the mel range."""
    cfg = cfg or SpectralConfig()
    rng = np.random.default_rng(seed)
    n = cfg.clip_samples
    fs = cfg.sample_rate
    lo = max(cfg.f_min, 100.0)
    sos = butter(4, [lo, cfg.f_max], btype="bandpass", fs=fs, output="sos")
    x = sosfilt(sos, rng.standard_normal(n))
    t = np.arange(n) / fs
    x *= 0.55 + 0.45 * np.sin(2 * np.pi * mod_hz * t)
    return _finalize(x, cfg)


def make_fixture(kind: str, cfg: SpectralConfig | None = None, seed: int = 0) -> AudioClip:
    if kind == "clicks":
        return clicks_train(cfg, seed)
    if kind == "hum":
        return band_hum(cfg, seed)
    if kind == "am-broadband":
        return am_broadband(cfg, seed)
    raise ValueError(f"unknown fixture kind {kind!r}; choose from {FIXTURE_KINDS}")
