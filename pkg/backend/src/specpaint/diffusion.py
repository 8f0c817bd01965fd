"""Latent-diffusion inpainting wrapper (model mode).

Wraps a pretrained image-inpainting pipeline (a Riffusion-style spectrogram
checkpoint or any Stable-Diffusion inpainting model). Heavy dependencies are
imported lazily so mock mode carries none of them; same-seed determinism is
per software stack, not across machines.
"""

from __future__ import annotations

import numpy as np

from .config import BackendConfig
from .protocol import RequestError


class DiffusionInpainter:
    def __init__(self, cfg: BackendConfig):
        try:
            import torch
            from diffusers import AutoPipelineForInpainting
        except ImportError as exc:
            raise RequestError(
                "model mode needs the [model] extra (torch, diffusers, "
                f"transformers); import failed: {exc}"
            ) from None
        self._torch = torch
        self._cfg = cfg
        dtype = torch.float16 if cfg.device.startswith("cuda") else torch.float32
        self._pipe = AutoPipelineForInpainting.from_pretrained(
            cfg.model, torch_dtype=dtype
        ).to(cfg.device)

    def fill(self, image: np.ndarray, keep: np.ndarray, prompt: str, seed: int) -> np.ndarray:
        """Run masked inpainting; returns a grayscale canvas of input size.

        Kept-region fidelity is best-effort; the caller re-imposes kept
        pixels."""
        from PIL import Image

        h, w = image.shape
        rgb = Image.fromarray(np.stack([image] * 3, axis=-1), "RGB")
        # diffusers convention: white = repaint, black = preserve
        paint = Image.fromarray(np.where(keep, 0, 255).astype(np.uint8), "L")
        generator = self._torch.Generator(self._cfg.device).manual_seed(seed)
        result = self._pipe(
            prompt=prompt,
            image=rgb,
            mask_image=paint,
            num_inference_steps=self._cfg.steps,
            guidance_scale=self._cfg.guidance,
            width=w,
            height=h,
            generator=generator,
        ).images[0]
        if result.size != (w, h):
            result = result.resize((w, h), Image.BICUBIC)
        return np.asarray(result.convert("L"), dtype=np.uint8)
