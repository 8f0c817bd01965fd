"""Two-step outpaint/inpaint orchestration against a pluggable generator
backend, plus the built-in deterministic stub and a subprocess client.

Kept-region preservation is enforced here by compositing after every backend
call; backends are never trusted to leave kept pixels alone.
"""

from __future__ import annotations

import hashlib
import json
import os
import queue
import shlex
import shutil
import subprocess
import tempfile
import threading
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import BackendError
from .specimage import (
    BinaryMask,
    SpecImage,
    apply_mask,
    composite,
    dilate_core,
    save_image_png,
    save_keep_png,
)
from .spectral import SpectralConfig, band_center_hz

PROTOCOL_VERSION = 1

# A-minor pentatonic roots over three octaves; arbitrary but fixed so stub
# output is reproducible and its alignment behavior testable.
_PENTATONIC_HZ = [
    f * mult for mult in (1.0, 2.0, 4.0) for f in (220.0, 261.63, 293.66, 329.63, 392.0)
]


@dataclass(frozen=True)
class GeneratorRequest:
    """One generation call: the current image plus which cells to keep."""

    mode: str  # "outpaint" | "inpaint"
    image: SpecImage
    keep_cells: np.ndarray  # bool grid, True = keep (PNG byte 255)
    prompt: str
    seed: int

    def __post_init__(self) -> None:
        if self.mode not in ("outpaint", "inpaint"):
            raise ValueError(f"mode must be outpaint or inpaint, got {self.mode!r}")
        keep = np.asarray(self.keep_cells, dtype=bool)
        if keep.shape != self.image.pixels.shape:
            raise ValueError(
                f"keep mask {keep.shape} does not match image {self.image.pixels.shape}"
            )
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        keep = keep.copy()
        keep.flags.writeable = False
        object.__setattr__(self, "keep_cells", keep)


@dataclass(frozen=True)
class GeneratorResponse:
    image: SpecImage


@dataclass(frozen=True)
class StageOneResult:
    """Outputs of the outpaint->inpaint sequence.

    `x_mid` equals the source on core cells exactly; `x_music` equals `x_mid`
    on complement cells exactly (of the effective inpaint mask)."""

    x_mid: SpecImage
    x_music: SpecImage
    mask: BinaryMask
    prompt: str
    seed: int
    backend_id: str


class GeneratorBackend:
    """Interface for pluggable generators."""

    backend_id = "abstract"

    def generate(self, request: GeneratorRequest) -> GeneratorResponse:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class IdentityBackend(GeneratorBackend):
    """Returns the request image unchanged; loopback testing only."""

    backend_id = "identity"

    def generate(self, request: GeneratorRequest) -> GeneratorResponse:
        return GeneratorResponse(request.image)


def stage_one(
    noise_img: SpecImage,
    mask: BinaryMask,
    prompt: str,
    seed: int,
    backend: GeneratorBackend,
    inpaint_dilation: int = 0,
    inpaint_prompt: str | None = None,
    outpaint_passes: int = 1,
    inpaint_passes: int = 1,
) -> StageOneResult:
    """Outpaint around the kept core, then inpaint the core with the mask
    inverted; kept pixels are re-imposed after each call.

    The first outpaint request carries the masked noise image (non-core
    cells silenced); the inpaint requests carry the intermediate image
    as-is, with the inversion expressed through the keep mask. Extra passes
    (experimentation knob) refine the previous composite under a per-pass
    seed offset."""
    if noise_img.pixels.shape != mask.cells.shape:
        raise ValueError("noise image and mask shapes differ")
    if outpaint_passes < 1 or inpaint_passes < 1:
        raise ValueError("pass counts must be >= 1")

    x_mid = noise_img
    for i in range(outpaint_passes):
        request_img = apply_mask(noise_img, mask, keep="core") if i == 0 else x_mid
        r = _checked(
            backend,
            GeneratorRequest("outpaint", request_img, mask.cells == 1, prompt, seed + i),
        )
        x_mid = composite(r.image, noise_img, mask, keep="core")

    inpaint_mask = dilate_core(mask, inpaint_dilation)
    x_music = x_mid
    for i in range(inpaint_passes):
        r = _checked(
            backend,
            GeneratorRequest(
                "inpaint", x_music, inpaint_mask.cells == 0,
                inpaint_prompt or prompt, seed + i,
            ),
        )
        x_music = composite(r.image, x_mid, inpaint_mask, keep="complement")
    return StageOneResult(x_mid, x_music, mask, prompt, seed, backend.backend_id)


def _checked(backend: GeneratorBackend, request: GeneratorRequest) -> GeneratorResponse:
    response = backend.generate(request)
    if response.image.pixels.shape != request.image.pixels.shape:
        raise BackendError(
            f"backend {backend.backend_id} returned shape "
            f"{response.image.pixels.shape}, expected {request.image.pixels.shape}"
        )
    return response


class StubBackend(GeneratorBackend):
    """Weights-free deterministic generator.

    Fills generate-regions with a procedural rhythmic texture: harmonic
    stacks (pentatonic fundamental + 3 partials, chosen from the prompt/seed
    hash) placed at frames where the kept region's energy envelope exceeds
    its median, so generated content is onset-aligned with the kept noise.
    """

    backend_id = "stub"

    def __init__(self, cfg: SpectralConfig | None = None):
        self._cfg = cfg

    def generate(self, request: GeneratorRequest) -> GeneratorResponse:
        px = request.image.pixels
        keep = request.keep_cells
        gen = ~keep
        if not gen.any():
            return GeneratorResponse(request.image)

        n_bands, n_frames = px.shape
        cfg = self._cfg
        if cfg is None or cfg.n_mels != n_bands:
            cfg = SpectralConfig(n_mels=n_bands, n_frames=max(n_frames, 1))

        digest = hashlib.sha256(f"{request.prompt}\x00{request.seed}".encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))

        amp = _decode_amplitudes(request.image)
        envelope = (amp * keep).sum(axis=0)
        if envelope.max() > envelope.min():
            onsets = np.flatnonzero(envelope > np.median(envelope))
        else:
            offset = int(rng.integers(0, 8))
            onsets = np.arange(offset, n_frames, 8)

        # Dense texture from two ingredients, taking the louder per cell:
        # a separable pad from the kept content's band/frame profiles
        # (row+col-global in pixel space = product model in amplitude), and
        # a content mirror of the request image a few dB quieter with a
        # seeded wobble. Image-conditioned generators keep the conditioning
        # structure audible in their output; the mirror reproduces that, and
        # the wobble spreads threshold ratios so downstream gain search has
        # a graded landscape instead of one breakpoint cluster.
        kept_count = keep.sum()
        global_px = float(px[keep].mean()) if kept_count else 150.0
        row_n = keep.sum(axis=1)
        col_n = keep.sum(axis=0)
        row_px = np.where(row_n > 0, (px * keep).sum(axis=1) / np.maximum(row_n, 1), global_px)
        col_px = np.where(col_n > 0, (px * keep).sum(axis=0) / np.maximum(col_n, 1), global_px)
        pad = row_px[:, None] + col_px[None, :] - global_px + 25.0
        phase = rng.uniform(0, 2 * np.pi)
        rows_idx = np.arange(n_bands)[:, None]
        cols_idx = np.arange(n_frames)[None, :]
        wobble = 12.0 * np.sin(2 * np.pi * (cols_idx / 32.0 + rows_idx / 64.0) + phase)
        mirror = px.astype(np.float64) + 30.0 + wobble
        canvas = np.clip(np.minimum(pad, mirror), 10, 254).astype(np.int16)

        root = float(rng.choice(_PENTATONIC_HZ))
        centers = band_center_hz(cfg)
        for partial in range(4):
            freq = root * (partial + 1)
            if freq > cfg.f_max:
                break
            row = int(np.argmin(np.abs(centers - freq)))
            drop = 35 - 8 * partial  # pixels darker than the local pad
            for decay in range(3):
                frames = onsets + decay
                frames = frames[frames < n_frames]
                for r in (row - 1, row, row + 1):
                    if 0 <= r < n_bands:
                        edge = 10 if r != row else 0
                        level = canvas[r, frames] - drop + 12 * decay + edge
                        canvas[r, frames] = np.minimum(canvas[r, frames], level)
        out = np.where(gen, np.clip(canvas, 0, 255).astype(np.uint8), px)
        return GeneratorResponse(SpecImage(out, request.image.mapping))


def _decode_amplitudes(img: SpecImage) -> np.ndarray:
    d = img.mapping.db_max - img.mapping.dynamic_range * (img.pixels.astype(np.float64) / 255.0)
    return np.power(10.0, d / 20.0)


class _LinePump(threading.Thread):
    """Drains a child's stdout into a queue so reads can time out."""

    def __init__(self, stream):
        super().__init__(daemon=True)
        self._stream = stream
        self.lines: queue.Queue = queue.Queue()
        self.start()

    def run(self):
        try:
            for line in self._stream:
                self.lines.put(line)
        finally:
            self.lines.put(None)


class SubprocessBackend(GeneratorBackend):
    """Client for external generators speaking the line-JSON protocol.

    One request = one JSON line on the child's stdin; the child answers with
    one JSON line and writes the result PNG where the request asked.
    """

    backend_id = "subprocess"

    def __init__(self, cmd, timeout: float = 120.0, keep_workspaces: bool = False):
        self._cmd = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        if not self._cmd:
            raise BackendError("empty backend command")
        self._timeout = timeout
        self._keep = keep_workspaces
        self._child = None
        self._pump = None
        self._stderr_file = None
        self.backend_id = f"subprocess:{self._cmd[0]}"

    def _ensure_child(self):
        if self._child is not None and self._child.poll() is None:
            return
        self._stderr_file = tempfile.TemporaryFile(mode="w+")
        try:
            self._child = subprocess.Popen(
                self._cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=self._stderr_file,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BackendError(f"cannot launch backend {self._cmd!r}: {exc}") from None
        self._pump = _LinePump(self._child.stdout)

    def _stderr_tail(self, limit: int = 4000) -> str:
        if self._stderr_file is None:
            return ""
        try:
            self._stderr_file.seek(0, os.SEEK_END)
            size = self._stderr_file.tell()
            self._stderr_file.seek(max(0, size - limit))
            return self._stderr_file.read().strip()
        except OSError:
            return ""

    def generate(self, request: GeneratorRequest) -> GeneratorResponse:
        self._ensure_child()
        workspace = tempfile.mkdtemp(prefix="nbgen-")
        try:
            image_path = os.path.join(workspace, "image.png")
            mask_path = os.path.join(workspace, "mask.png")
            out_path = os.path.join(workspace, "out.png")
            save_image_png(request.image, image_path)
            save_keep_png(request.keep_cells, mask_path)
            line = json.dumps(
                {
                    "version": PROTOCOL_VERSION,
                    "mode": request.mode,
                    "image": image_path,
                    "mask": mask_path,
                    "prompt": request.prompt,
                    "seed": int(request.seed),
                    "out": out_path,
                }
            )
            try:
                self._child.stdin.write(line + "\n")
                self._child.stdin.flush()
            except (BrokenPipeError, OSError):
                raise BackendError(
                    f"backend died before accepting a request; stderr: {self._stderr_tail()}"
                ) from None
            reply = self._read_reply()
            return self._load_response(reply, request)
        finally:
            if not self._keep:
                shutil.rmtree(workspace, ignore_errors=True)

    def _read_reply(self) -> dict:
        try:
            raw = self._pump.lines.get(timeout=self._timeout)
        except queue.Empty:
            self.close()
            raise BackendError(f"backend timed out after {self._timeout:.0f}s") from None
        if raw is None:
            code = self._child.poll()
            raise BackendError(
                f"backend exited (code {code}) without replying; stderr: {self._stderr_tail()}"
            )
        try:
            reply = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise BackendError(f"malformed backend response {raw!r}: {exc}") from None
        if not isinstance(reply, dict) or reply.get("version") != PROTOCOL_VERSION:
            raise BackendError(f"unsupported backend response: {raw!r}")
        return reply

    def _load_response(self, reply: dict, request: GeneratorRequest) -> GeneratorResponse:
        if "error" in reply:
            raise BackendError(f"backend error: {reply['error']}")
        path = reply.get("image")
        if not path:
            raise BackendError(f"backend response missing image path: {reply!r}")
        try:
            with Image.open(path) as im:
                if im.mode != "L":
                    raise BackendError(f"backend PNG must be 8-bit grayscale, got {im.mode}")
                arr = np.asarray(im, dtype=np.uint8)
        except FileNotFoundError:
            raise BackendError(f"backend response image missing: {path}") from None
        except OSError as exc:
            raise BackendError(f"illegible backend image {path}: {exc}") from None
        pixels = np.flipud(arr)
        if pixels.shape != request.image.pixels.shape:
            raise BackendError(
                f"backend returned {pixels.shape[1]}x{pixels.shape[0]} image, "
                f"expected {request.image.pixels.shape[1]}x{request.image.pixels.shape[0]}"
            )
        return GeneratorResponse(SpecImage(pixels, request.image.mapping))

    def close(self) -> None:
        if self._child is None:
            return
        try:
            if self._child.stdin:
                self._child.stdin.close()
            self._child.wait(timeout=5)
        except (OSError, subprocess.TimeoutExpired):
            self._child.kill()
            self._child.wait()
        finally:
            if self._stderr_file is not None:
                self._stderr_file.close()
                self._stderr_file = None
            self._child = None
            self._pump = None
