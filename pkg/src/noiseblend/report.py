"""Run analysis artifacts: signed difference heatmaps, loudness sweeps, and
the machine-readable JSON report."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .audio import AudioClip, mix
from .errors import ArtifactIOError
from .loudness import measure_lufs, normalize_lufs
from .masking import (
    DEFAULT_SMR_DB,
    coverage,
    masking_thresholds,
    residual_deficit,
)
from .specimage import extract_core_mask, mel_to_image
from .spectral import SpectralConfig, SpectrogramGrid, amp_to_db, mel_filter, stft_magnitude

SCHEMA_VERSION = 1
HEATMAP_CLIP_DB = 40.0
IMMEASURABLE = "immeasurable"


@dataclass(frozen=True)
class DiffHeatmap:
    """Signed per-cell dB difference (music - noise) and its RGB rendering:
    positive = red, negative = blue, magnitude = darkness, zero = white."""

    values: np.ndarray
    rendered: np.ndarray  # (bands, frames, 3) uint8


@dataclass
class BlendReport:
    config: dict
    lambda_star: float
    solver: dict
    coverage_before: float
    coverage_after: float
    residual_deficit_before: float
    residual_deficit_after: float
    unmaskable_count: int
    loudness_noise_lufs: float | None
    loudness_music_lufs: float | None
    loudness_mix_lufs: float | None
    mix_overflow: bool
    timing: dict
    artifacts: dict = field(default_factory=dict)


def diff_heatmap(music: SpectrogramGrid, noise: SpectrogramGrid) -> DiffHeatmap:
    """dB difference grid with a symmetric rendering clip at +-40 dB."""
    if music.shape != noise.shape:
        raise ValueError(f"shape mismatch: {music.shape} vs {noise.shape}")
    values = amp_to_db(music.values) - amp_to_db(noise.values)
    intensity = np.clip(np.abs(values), 0.0, HEATMAP_CLIP_DB) / HEATMAP_CLIP_DB
    fade = np.floor(255.0 * (1.0 - intensity) + 0.5).astype(np.uint8)
    full = np.full_like(fade, 255)
    positive = values > 0
    r = np.where(positive, full, fade)
    b = np.where(positive, fade, full)
    g = fade.copy()
    neutral = values == 0
    r[neutral] = 255
    b[neutral] = 255
    rendered = np.stack([r, g, b], axis=-1)
    return DiffHeatmap(values, rendered)


def save_heatmap_png(heatmap: DiffHeatmap, path) -> None:
    try:
        Image.fromarray(np.flipud(heatmap.rendered), mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write PNG {path}: {exc}") from None


def loudness_sweep(
    music: AudioClip,
    noise: AudioClip,
    targets,
    cfg: SpectralConfig | None = None,
    smr_db: float = DEFAULT_SMR_DB,
    core_fraction: float = 0.15,
    noise_target_lufs: float = -18.0,
) -> list:
    """Normalize the music to each target, overlay the -18 LUFS noise, and
    record mix loudness plus unity-gain masking stats.

    Returns a list of row dicts; an empty target list gives an empty table.
    """
    targets = list(targets)
    if not targets:
        return []
    cfg = cfg or SpectralConfig()
    noise_ref = normalize_lufs(noise, noise_target_lufs)
    noise_stft = stft_magnitude(noise_ref, cfg)
    thresholds = masking_thresholds(noise_stft, smr_db, cfg)
    noise_mel = mel_filter(noise_stft, cfg)
    core = extract_core_mask(mel_to_image(noise_mel), core_fraction)
    rows = []
    for target in targets:
        music_t = normalize_lufs(music, target)
        mel = mel_filter(stft_magnitude(music_t, cfg), cfg)
        blended = mix(noise_ref, music_t)
        mix_measure = measure_lufs(blended)
        rows.append(
            {
                "target_lufs": float(target),
                "music_lufs": float(measure_lufs(music_t).integrated_lufs),
                "mix_lufs": mix_measure.integrated_lufs,
                "coverage": coverage(mel, thresholds, core, 1.0),
                "residual_deficit": residual_deficit(mel, thresholds, core, 1.0),
            }
        )
    return rows


SWEEP_COLUMNS = ("target_lufs", "music_lufs", "mix_lufs", "coverage", "residual_deficit")


def write_sweep_csv(rows: list, path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SWEEP_COLUMNS)
            for row in rows:
                writer.writerow(
                    [_csv_cell(row[column]) for column in SWEEP_COLUMNS]
                )
    except OSError as exc:
        raise ArtifactIOError(f"cannot write CSV {path}: {exc}") from None


def _csv_cell(value):
    if value is None:
        return IMMEASURABLE
    return repr(float(value))


def _json_number(value, label: str):
    if value is None:
        return IMMEASURABLE
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value for report field {label}: {value}")
    return value


def report_to_dict(report: BlendReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config": report.config,
        "lambda_star": _json_number(report.lambda_star, "lambda_star"),
        "solver": report.solver,
        "coverage_before": _json_number(report.coverage_before, "coverage_before"),
        "coverage_after": _json_number(report.coverage_after, "coverage_after"),
        "residual_deficit_before": _json_number(
            report.residual_deficit_before, "residual_deficit_before"
        ),
        "residual_deficit_after": _json_number(
            report.residual_deficit_after, "residual_deficit_after"
        ),
        "unmaskable_count": int(report.unmaskable_count),
        "loudness_noise_lufs": _json_number(report.loudness_noise_lufs, "loudness_noise_lufs"),
        "loudness_music_lufs": _json_number(report.loudness_music_lufs, "loudness_music_lufs"),
        "loudness_mix_lufs": _json_number(report.loudness_mix_lufs, "loudness_mix_lufs"),
        "mix_overflow": bool(report.mix_overflow),
        "timing": {k: _json_number(v, f"timing.{k}") for k, v in report.timing.items()},
        "artifacts": dict(report.artifacts),
        "external_metrics": {"fad": None, "kl": None},
    }


def emit_report(report: BlendReport, out_dir) -> str:
    """Write report.json under `out_dir`; artifact paths are stored relative
    to that directory."""
    payload = report_to_dict(report)
    payload["artifacts"] = {
        name: os.path.relpath(path, out_dir) for name, path in report.artifacts.items()
    }
    target = os.path.join(out_dir, "report.json")
    try:
        with open(target, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write report {target}: {exc}") from None
    return target
