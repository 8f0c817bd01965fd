"""noiseblend: blend environmental noise into generated music.

Pipeline: noise clip -> mel-spectrogram image -> masked outpaint/inpaint
through a pluggable generator -> psychoacoustic gain optimization ->
Griffin-Lim reconstruction -> loudness-normalized blend plus reports.
"""

from .audio import AudioClip, apply_gain, ensure_rate, fit_length, mix, read_wav, write_wav
from .errors import (
    ArtifactIOError,
    BackendError,
    InputError,
    NoiseBlendError,
    SolverError,
)
from .genpipe import (
    GeneratorBackend,
    GeneratorRequest,
    GeneratorResponse,
    IdentityBackend,
    StageOneResult,
    StubBackend,
    SubprocessBackend,
    stage_one,
)
from .loudness import LoudnessMeasurement, measure_lufs, normalize_lufs
from .masking import (
    AmplificationProblem,
    AmplificationSolution,
    MaskingThresholds,
    amplify,
    coverage,
    masking_thresholds,
    objective,
    residual_deficit,
    solve_breakpoint,
    solve_subgradient,
)
from .pipeline import RunConfig, make_backend, run_blend
from .report import BlendReport, DiffHeatmap, diff_heatmap, emit_report, loudness_sweep
from .specimage import (
    BinaryMask,
    ImageMapping,
    SpecImage,
    apply_mask,
    composite,
    dilate_core,
    extract_core_mask,
    image_to_mel,
    mel_to_image,
    smooth_core,
)
from .spectral import (
    SpectralConfig,
    SpectrogramGrid,
    amp_to_db,
    db_to_amp,
    griffin_lim,
    mel_filter,
    mel_inverse,
    stft_magnitude,
)

__version__ = "0.1.0"
