"""Weights-free generator: seeded uniform noise in the generate region."""

from __future__ import annotations

import hashlib

import numpy as np


def mock_fill(image: np.ndarray, keep: np.ndarray, prompt: str, seed: int) -> np.ndarray:
    """Fill non-kept pixels with uniform noise derived from (prompt, seed).

    Deterministic for identical inputs; kept pixels pass through untouched.
    """
    digest = hashlib.sha256(f"{prompt}\x00{seed}".encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
    noise = rng.integers(0, 256, image.shape, dtype=np.int16).astype(np.uint8)
    return np.where(keep, image, noise)
