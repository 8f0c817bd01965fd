import numpy as np
import pytest

from noiseblend.masking import AmplificationProblem, MaskingThresholds
from noiseblend.specimage import BinaryMask
from noiseblend.spectral import MEL_BANDS, SpectralConfig, SpectrogramGrid

# Small config keeping STFT/Griffin-Lim tests fast; all mel filters are
# non-empty at 32 bands over 0-3500 Hz with a 256-point FFT.
SMALL_CFG = SpectralConfig(
    sample_rate=8000,
    n_fft=256,
    hop_length=64,
    n_mels=32,
    f_min=0.0,
    f_max=3500.0,
    n_frames=64,
)

# Mid-size config for phase-reconstruction accuracy checks.
MID_CFG = SpectralConfig(
    sample_rate=22050,
    n_fft=1024,
    hop_length=256,
    n_mels=64,
    f_min=0.0,
    f_max=10000.0,
    n_frames=128,
)


@pytest.fixture
def small_cfg():
    return SMALL_CFG


@pytest.fixture
def mid_cfg():
    return MID_CFG


def cfg_for(rows: int, cols: int) -> SpectralConfig:
    """A throwaway config whose mel grid is rows x cols."""
    return SpectralConfig(
        sample_rate=8000,
        n_fft=512,
        hop_length=64,
        n_mels=rows,
        f_min=0.0,
        f_max=3500.0,
        n_frames=cols,
    )


def mel_grid(values: np.ndarray) -> SpectrogramGrid:
    return SpectrogramGrid(values, MEL_BANDS, cfg_for(*values.shape))


def problem_from_arrays(
    s: np.ndarray,
    t: np.ndarray,
    core: np.ndarray,
    alpha: float,
    bounds=(0.0, 100.0),
) -> AmplificationProblem:
    cfg = cfg_for(*s.shape)
    core = np.asarray(core, dtype=np.uint8)
    return AmplificationProblem(
        music=SpectrogramGrid(s, MEL_BANDS, cfg),
        thresholds=MaskingThresholds(SpectrogramGrid(t, MEL_BANDS, cfg)),
        core=BinaryMask(core, core.sum() / core.size),
        alpha=alpha,
        lambda_bounds=bounds,
    )


def random_problem(seed: int, alpha: float, max_side: int = 64) -> AmplificationProblem:
    rng = np.random.default_rng(seed)
    rows = int(rng.integers(4, max_side + 1))
    cols = int(rng.integers(4, max_side + 1))
    s = rng.uniform(0.0, 1.0, (rows, cols))
    t = rng.uniform(0.0, 12.0, (rows, cols))
    core = (rng.uniform(size=(rows, cols)) < 0.2).astype(np.uint8)
    return problem_from_arrays(s, t, core, alpha)


def sine_clip(freq: float, cfg: SpectralConfig, amplitude: float = 0.5):
    from noiseblend.audio import AudioClip

    t = np.arange(cfg.clip_samples) / cfg.sample_rate
    return AudioClip(amplitude * np.sin(2 * np.pi * freq * t), cfg.sample_rate)
