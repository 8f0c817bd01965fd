"""End-to-end blend run: noise in, report plus WAV/PNG artifacts out."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

from .audio import ensure_rate, fit_length, mix, read_wav, write_wav
from .errors import InputError
from .genpipe import GeneratorBackend, StubBackend, SubprocessBackend, stage_one
from .loudness import measure_lufs, normalize_lufs
from .masking import (
    DEFAULT_ALPHA,
    DEFAULT_SMR_DB,
    AmplificationProblem,
    amplify,
    coverage,
    masking_thresholds,
    residual_deficit,
    solve_breakpoint,
    solve_subgradient,
)
from .report import BlendReport, diff_heatmap, emit_report, save_heatmap_png
from .specimage import extract_core_mask, image_to_mel, mel_to_image, save_image_png, save_keep_png
from .spectral import SpectralConfig, griffin_lim, mel_filter, mel_inverse, stft_magnitude

BACKEND_ENV_VAR = "BNMUSIC_BACKEND"

# The blend solves over [1, lambda_max]: blending may amplify the generated
# music but never attenuates it, which keeps coverage/deficit monotone
# against their unity-gain baselines. Standalone solving keeps [0, lambda_max].
BLEND_LAMBDA_MIN = 1.0


@dataclass
class RunConfig:
    noise_path: str
    out_dir: str
    prompt: str = "calm rhythmic ambient music"
    backend: str | None = None  # "stub" | "exec:CMD" | None -> env var or stub
    seed: int = 0
    alpha: float = DEFAULT_ALPHA
    smr_db: float = DEFAULT_SMR_DB
    core_fraction: float = 0.15
    target_lufs_noise: float = -18.0
    solver: str = "subgradient"
    lambda_max: float = 100.0
    griffin_lim_iters: int = 32
    inpaint_dilation: int = 0
    resample: bool = False
    backend_timeout: float = 120.0
    spectral: SpectralConfig = field(default_factory=SpectralConfig)

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise InputError(f"alpha must be >= 0, got {self.alpha}")
        if not 0.05 <= self.core_fraction <= 0.5:
            raise InputError(f"core_fraction must be in [0.05, 0.5], got {self.core_fraction}")
        if self.solver not in ("subgradient", "breakpoint"):
            raise InputError(f"solver must be subgradient or breakpoint, got {self.solver!r}")


def make_backend(spec: str | None, cfg: SpectralConfig, timeout: float = 120.0) -> GeneratorBackend:
    """Build a backend from its CLI spec ("stub" or "exec:CMD"); falls back
    to the BNMUSIC_BACKEND environment variable, then to the stub."""
    spec = spec or os.environ.get(BACKEND_ENV_VAR) or "stub"
    if spec == "stub":
        return StubBackend(cfg)
    if spec.startswith("exec:"):
        cmd = spec[len("exec:") :].strip()
        if not cmd:
            raise InputError("empty command in backend spec 'exec:'")
        return SubprocessBackend(cmd, timeout=timeout)
    raise InputError(f"unknown backend spec {spec!r}; expected 'stub' or 'exec:CMD'")


def _config_snapshot(cfg: RunConfig) -> dict:
    spectral = cfg.spectral
    return {
        "noise_path": str(cfg.noise_path),
        "prompt": cfg.prompt,
        "backend": cfg.backend or os.environ.get(BACKEND_ENV_VAR) or "stub",
        "seed": cfg.seed,
        "alpha": cfg.alpha,
        "smr_db": cfg.smr_db,
        "core_fraction": cfg.core_fraction,
        "target_lufs_noise": cfg.target_lufs_noise,
        "solver": cfg.solver,
        "lambda_bounds": [BLEND_LAMBDA_MIN, cfg.lambda_max],
        "griffin_lim_iters": cfg.griffin_lim_iters,
        "inpaint_dilation": cfg.inpaint_dilation,
        "spectral": {
            "sample_rate": spectral.sample_rate,
            "n_fft": spectral.n_fft,
            "hop_length": spectral.hop_length,
            "window": spectral.window,
            "n_mels": spectral.n_mels,
            "f_min": spectral.f_min,
            "f_max": spectral.f_max,
            "n_frames": spectral.n_frames,
        },
    }


def run_blend(cfg: RunConfig) -> BlendReport:
    """Execute the full two-stage blend and write all artifacts to
    cfg.out_dir. Returns the report (also persisted as report.json)."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    spectral = cfg.spectral
    artifacts: dict = {}

    def art(name: str, filename: str) -> str:
        path = os.path.join(cfg.out_dir, filename)
        artifacts[name] = path
        return path

    t_start = time.perf_counter()

    # Preprocess: load, normalize, transform, image + core mask.
    clip = read_wav(cfg.noise_path)
    clip = ensure_rate(clip, spectral.sample_rate, resample=cfg.resample)
    clip = fit_length(clip, spectral.clip_samples)
    noise = normalize_lufs(clip, cfg.target_lufs_noise)
    noise_stft = stft_magnitude(noise, spectral)
    noise_mel = mel_filter(noise_stft, spectral)
    noise_img = mel_to_image(noise_mel)
    mask = extract_core_mask(noise_img, cfg.core_fraction)
    save_image_png(noise_img, art("x_noise", "x_noise.png"))
    save_keep_png(mask.cells == 1, art("mask", "mask.png"))
    # Loudness normalization can push impulsive clips past full scale; the
    # pipeline math stays in float, so WAV artifacts clip explicitly.
    write_wav(noise, art("noise", "noise.wav"), allow_clipping=True)
    t_pre = time.perf_counter()

    # Stage 1: outpaint then inpaint through the backend.
    backend = make_backend(cfg.backend, spectral, timeout=cfg.backend_timeout)
    with backend:
        stage1 = stage_one(
            noise_img,
            mask,
            cfg.prompt,
            cfg.seed,
            backend,
            inpaint_dilation=cfg.inpaint_dilation,
        )
    save_image_png(stage1.x_mid, art("x_mid", "x_mid.png"))
    save_image_png(stage1.x_music, art("x_music", "x_music.png"))
    t_stage1 = time.perf_counter()

    # Stage 2: thresholds, gain optimization, amplification.
    music_mel = image_to_mel(stage1.x_music, spectral)
    thresholds = masking_thresholds(noise_stft, cfg.smr_db, spectral)
    problem = AmplificationProblem(
        music=music_mel,
        thresholds=thresholds,
        core=mask,
        alpha=cfg.alpha,
        lambda_bounds=(BLEND_LAMBDA_MIN, cfg.lambda_max),
    )
    solve = solve_subgradient if cfg.solver == "subgradient" else solve_breakpoint
    solution = solve(problem)
    amplified = amplify(music_mel, solution.lambda_star)
    t_stage2 = time.perf_counter()

    # Reconstruct audio and render analysis artifacts.
    music = griffin_lim(mel_inverse(amplified, spectral), cfg.griffin_lim_iters)
    write_wav(music, art("music", "music.wav"), allow_clipping=True)
    blended = mix(noise, music)
    write_wav(blended, art("mix", "mix.wav"), allow_clipping=True)
    save_heatmap_png(diff_heatmap(amplified, noise_mel), art("diff_heatmap", "diff_heatmap.png"))
    t_reconstruct = time.perf_counter()

    noise_measure = measure_lufs(noise)
    music_measure = measure_lufs(music)
    mix_measure = measure_lufs(blended)

    report = BlendReport(
        config=_config_snapshot(cfg),
        lambda_star=solution.lambda_star,
        solver={
            "name": solution.solver,
            "iterations": solution.iterations,
            "objective_value": solution.objective_value,
        },
        coverage_before=coverage(music_mel, thresholds, mask, 1.0),
        coverage_after=solution.coverage,
        residual_deficit_before=residual_deficit(music_mel, thresholds, mask, 1.0),
        residual_deficit_after=residual_deficit(music_mel, thresholds, mask, solution.lambda_star),
        unmaskable_count=solution.unmaskable_count,
        loudness_noise_lufs=noise_measure.integrated_lufs,
        loudness_music_lufs=music_measure.integrated_lufs,
        loudness_mix_lufs=mix_measure.integrated_lufs,
        mix_overflow=blended.overflow,
        timing={
            "preprocess": t_pre - t_start,
            "stage1": t_stage1 - t_pre,
            "stage2": t_stage2 - t_stage1,
            "reconstruct": t_reconstruct - t_stage2,
            "total": time.perf_counter() - t_start,
        },
        artifacts=artifacts,
    )
    emit_report(report, cfg.out_dir)
    return report
