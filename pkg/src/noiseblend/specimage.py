"""Grayscale spectrogram images with the inverted loudness mapping, core-mask
extraction, mask algebra, and PNG codecs.

Pixel convention: lower pixel value = louder cell. In-memory arrays keep the
grid orientation (row 0 = lowest band); PNGs are written image-style with
row 0 = highest band, width = time frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy.ndimage import binary_dilation, convolve

from .errors import ArtifactIOError, InputError
from .spectral import (
    AMP_FLOOR,
    MEL_BANDS,
    SpectralConfig,
    SpectrogramGrid,
    amp_to_db,
    db_to_amp,
)

KEEP_PIXEL = 255  # mask PNG byte meaning "keep"; 0 means "generate"


@dataclass(frozen=True)
class ImageMapping:
    """Amplitude <-> pixel mapping: db_max maps to pixel 0, and
    `dynamic_range` dB below it maps to pixel 255."""

    db_max: float
    dynamic_range: float = 80.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.db_max) or not np.isfinite(self.dynamic_range):
            raise ValueError("mapping parameters must be finite")
        if self.dynamic_range <= 0:
            raise ValueError("dynamic_range must be positive")


@dataclass(frozen=True)
class SpecImage:
    """8-bit grayscale spectrogram plot plus its amplitude mapping."""

    pixels: np.ndarray
    mapping: ImageMapping

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2 or pixels.dtype != np.uint8:
            raise ValueError("pixels must be a 2-D uint8 array")
        pixels = pixels.copy()
        pixels.flags.writeable = False
        object.__setattr__(self, "pixels", pixels)

    @property
    def n_bands(self) -> int:
        return self.pixels.shape[0]

    @property
    def n_frames(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class BinaryMask:
    """{0,1} grid where 1 marks the high-energy core region."""

    cells: np.ndarray
    core_fraction: float

    def __post_init__(self) -> None:
        cells = np.asarray(self.cells, dtype=np.uint8)
        if cells.ndim != 2:
            raise ValueError("mask cells must be 2-D")
        if not np.isin(cells, (0, 1)).all():
            raise ValueError("mask cells must be 0 or 1")
        k = int(np.floor(self.core_fraction * cells.size + 0.5))
        if int(cells.sum()) != k:
            raise ValueError(
                f"core count {int(cells.sum())} != round(core_fraction * area) = {k}"
            )
        cells = cells.copy()
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)

    @property
    def core_count(self) -> int:
        return int(self.cells.sum())


def default_mapping(grid: SpectrogramGrid, dynamic_range: float = 80.0) -> ImageMapping:
    """Per-clip mapping: the grid maximum maps to pixel 0."""
    return ImageMapping(db_max=float(amp_to_db(grid.values.max())), dynamic_range=dynamic_range)


def mel_to_image(grid: SpectrogramGrid, mapping: ImageMapping | None = None) -> SpecImage:
    """Quantize a mel grid into the inverted 8-bit mapping (louder = darker)."""
    if grid.axis_kind != MEL_BANDS:
        raise ValueError("mel_to_image expects a mel-bands grid")
    if mapping is None:
        mapping = default_mapping(grid)
    d = amp_to_db(grid.values)
    n = np.clip((mapping.db_max - d) / mapping.dynamic_range, 0.0, 1.0)
    pixels = np.floor(255.0 * n + 0.5).astype(np.uint8)
    return SpecImage(pixels, mapping)


def image_to_mel(img: SpecImage, cfg: SpectralConfig) -> SpectrogramGrid:
    """Decode pixels back to linear mel amplitudes; sub-floor values become 0."""
    d = img.mapping.db_max - img.mapping.dynamic_range * (img.pixels.astype(np.float64) / 255.0)
    values = db_to_amp(d)
    values[values < AMP_FLOOR] = 0.0
    return SpectrogramGrid(values, MEL_BANDS, cfg)


def extract_core_mask(img: SpecImage, core_fraction: float = 0.15) -> BinaryMask:
    """Mark exactly round(core_fraction * area) cells with the smallest pixel
    values as core.

    Ties at the threshold are broken by scan order: time-major, low band
    first within each frame.
    """
    if not 0.05 <= core_fraction <= 0.5:
        raise InputError(f"core_fraction must be in [0.05, 0.5], got {core_fraction}")
    n_bands, n_frames = img.pixels.shape
    area = n_bands * n_frames
    k = int(np.floor(core_fraction * area + 0.5))
    flat = img.pixels.T.reshape(-1)  # index = frame * n_bands + band
    order = np.argsort(flat, kind="stable")
    chosen = np.zeros(area, dtype=np.uint8)
    chosen[order[:k]] = 1
    cells = chosen.reshape(n_frames, n_bands).T
    return BinaryMask(cells, core_fraction)


def _keep_cells(mask: BinaryMask, keep: str) -> np.ndarray:
    if keep == "core":
        return mask.cells == 1
    if keep == "complement":
        return mask.cells == 0
    raise ValueError(f"keep must be 'core' or 'complement', got {keep!r}")


def apply_mask(img: SpecImage, mask: BinaryMask, keep: str = "core") -> SpecImage:
    """Copy kept cells; fill the rest with pixel 255 (decodes to silence)."""
    if img.pixels.shape != mask.cells.shape:
        raise ValueError(f"shape mismatch: image {img.pixels.shape} vs mask {mask.cells.shape}")
    out = np.where(_keep_cells(mask, keep), img.pixels, np.uint8(255))
    return SpecImage(out.astype(np.uint8), img.mapping)


def composite(
    generated: SpecImage, original: SpecImage, mask: BinaryMask, keep: str = "core"
) -> SpecImage:
    """Kept cells from `original`, everything else from `generated`.

    Run after every backend call so kept-pixel preservation never depends on
    backend behavior.
    """
    if generated.pixels.shape != original.pixels.shape:
        raise ValueError(
            f"shape mismatch: generated {generated.pixels.shape} vs "
            f"original {original.pixels.shape}"
        )
    if original.pixels.shape != mask.cells.shape:
        raise ValueError(f"shape mismatch: image {original.pixels.shape} vs mask {mask.cells.shape}")
    out = np.where(_keep_cells(mask, keep), original.pixels, generated.pixels)
    return SpecImage(out.astype(np.uint8), original.mapping)


def dilate_core(mask: BinaryMask, cells: int) -> BinaryMask:
    """Grow the core region by `cells` dilation steps (4-connected)."""
    if cells < 0:
        raise ValueError("dilation cells must be >= 0")
    if cells == 0:
        return mask
    grown = binary_dilation(mask.cells.astype(bool), iterations=cells)
    count = int(grown.sum())
    return BinaryMask(grown.astype(np.uint8), count / mask.cells.size)


def smooth_core(mask: BinaryMask) -> BinaryMask:
    """Optional 3x3 majority filter for speckle cleanup (off by default in
    the pipeline). Cells beyond the border count as non-core."""
    neighbors = convolve(mask.cells.astype(np.int16), np.ones((3, 3), dtype=np.int16),
                         mode="constant", cval=0)
    smoothed = (neighbors >= 5).astype(np.uint8)
    return BinaryMask(smoothed, int(smoothed.sum()) / mask.cells.size)


def save_image_png(img: SpecImage, path) -> None:
    """8-bit grayscale PNG, row 0 = highest band."""
    try:
        Image.fromarray(np.flipud(img.pixels)).save(path, format="PNG")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write PNG {path}: {exc}") from None


def load_image_png(path, mapping: ImageMapping) -> SpecImage:
    try:
        with Image.open(path) as im:
            if im.mode != "L":
                raise InputError(f"{path}: expected 8-bit grayscale PNG, got mode {im.mode}")
            arr = np.asarray(im, dtype=np.uint8)
    except FileNotFoundError:
        raise InputError(f"no such image: {path}") from None
    except InputError:
        raise
    except Exception as exc:
        raise InputError(f"unreadable PNG {path}: {exc}") from None
    return SpecImage(np.flipud(arr), mapping)


def save_keep_png(keep_cells: np.ndarray, path) -> None:
    """Mask PNG for the generator protocol: byte 255 = keep, 0 = generate."""
    arr = np.where(keep_cells, np.uint8(KEEP_PIXEL), np.uint8(0))
    try:
        Image.fromarray(np.flipud(arr)).save(path, format="PNG")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write PNG {path}: {exc}") from None
