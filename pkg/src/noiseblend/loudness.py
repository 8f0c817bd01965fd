"""Integrated loudness per ITU-R BS.1770-4: K-weighting pre-filter, 400 ms
gated blocks, absolute gate at -70 LUFS and relative gate 10 LU below the
ungated mean.

The K-weighting biquads are re-derived from the standard's analog
prototypes at the clip's sample rate (bilinear redesign), so 44.1 kHz is
measured without the bias of reusing 48 kHz coefficients verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import sosfilt

from .audio import AudioClip, apply_gain
from .errors import InputError

BLOCK_SECONDS = 0.4
BLOCK_OVERLAP = 0.75
ABSOLUTE_GATE_LUFS = -70.0
RELATIVE_GATE_LU = 10.0
_OFFSET = -0.691

# Analog prototype parameters behind the published 48 kHz tables:
# stage 1 high-shelf, stage 2 high-pass.
_SHELF_F0 = 1681.9744509555319
_SHELF_GAIN_DB = 3.99984385397
_SHELF_Q = 0.7071752369554193
_HIGHPASS_F0 = 38.13547087613982
_HIGHPASS_Q = 0.5003270373253953


@dataclass(frozen=True)
class LoudnessMeasurement:
    """Integrated loudness; `integrated_lufs` is None when every block was
    gated out (silence), never NaN."""

    integrated_lufs: float | None
    gated_block_count: int
    ungated_block_count: int

    @property
    def measurable(self) -> bool:
        return self.integrated_lufs is not None


@lru_cache(maxsize=8)
def k_weighting_sos(sample_rate: int) -> np.ndarray:
    """Second-order sections for the two K-weighting stages at any rate."""
    k = np.tan(np.pi * _SHELF_F0 / sample_rate)
    vh = 10.0 ** (_SHELF_GAIN_DB / 20.0)
    vb = vh**0.499666774155
    a0 = 1.0 + k / _SHELF_Q + k * k
    shelf = [
        (vh + vb * k / _SHELF_Q + k * k) / a0,
        2.0 * (k * k - vh) / a0,
        (vh - vb * k / _SHELF_Q + k * k) / a0,
        1.0,
        2.0 * (k * k - 1.0) / a0,
        (1.0 - k / _SHELF_Q + k * k) / a0,
    ]
    k = np.tan(np.pi * _HIGHPASS_F0 / sample_rate)
    a0 = 1.0 + k / _HIGHPASS_Q + k * k
    highpass = [
        1.0,
        -2.0,
        1.0,
        1.0,
        2.0 * (k * k - 1.0) / a0,
        (1.0 - k / _HIGHPASS_Q + k * k) / a0,
    ]
    sos = np.array([shelf, highpass])
    sos.flags.writeable = False
    return sos


def _block_mean_squares(clip: AudioClip) -> np.ndarray:
    step = int(round(BLOCK_SECONDS * clip.sample_rate))
    hop = int(round(step * (1.0 - BLOCK_OVERLAP)))
    if len(clip) < step:
        raise InputError(
            f"clip too short for loudness measurement: {clip.duration * 1000:.0f} ms < 400 ms"
        )
    # sosfilt wants writable buffers; the cached array stays frozen.
    weighted = sosfilt(k_weighting_sos(clip.sample_rate).copy(), clip.samples)
    csum = np.concatenate([[0.0], np.cumsum(weighted * weighted)])
    starts = np.arange(0, len(clip) - step + 1, hop)
    return (csum[starts + step] - csum[starts]) / step


def _lufs(mean_square) -> np.ndarray:
    return _OFFSET + 10.0 * np.log10(np.maximum(mean_square, 1e-30))


def measure_lufs(clip: AudioClip) -> LoudnessMeasurement:
    """Integrated loudness of a mono clip (center channel weight 1.0)."""
    z = _block_mean_squares(clip)
    levels = _lufs(z)
    above_abs = levels > ABSOLUTE_GATE_LUFS
    if not above_abs.any():
        return LoudnessMeasurement(None, 0, len(z))
    relative_gate = _lufs(z[above_abs].mean()) - RELATIVE_GATE_LU
    survivors = above_abs & (levels > relative_gate)
    if not survivors.any():
        return LoudnessMeasurement(None, 0, len(z))
    return LoudnessMeasurement(
        float(_lufs(z[survivors].mean())), int(survivors.sum()), len(z)
    )


def normalize_lufs(clip: AudioClip, target: float) -> AudioClip:
    """Gain the clip so its integrated loudness lands on `target` (+-0.1 LU).

    A second gain pass runs if gating shifted enough to miss the window.
    """
    measured = measure_lufs(clip)
    if not measured.measurable:
        raise InputError("clip is immeasurable (all blocks gated out); cannot normalize")
    out = apply_gain(clip, target - measured.integrated_lufs)
    for _ in range(2):
        check = measure_lufs(out)
        if not check.measurable:
            raise InputError("clip became immeasurable during normalization")
        if abs(check.integrated_lufs - target) <= 0.1:
            break
        out = apply_gain(out, target - check.integrated_lufs)
    return out
