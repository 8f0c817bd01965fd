"""Request parsing and PNG helpers for the line-JSON wire protocol.

Request: {"version":1, "mode":"outpaint"|"inpaint", "image":<png path>,
          "mask":<png path, byte 255=keep / 0=generate>, "prompt":<text>,
          "seed":<uint>, "out":<png path to write>}
Response: {"version":1, "image":<path>} or {"version":1, "error":<message>}
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from PIL import Image

PROTOCOL_VERSION = 1


class RequestError(Exception):
    """Malformed or unserviceable request; answered with an error response."""


@dataclass(frozen=True)
class Request:
    mode: str
    image_path: str
    mask_path: str
    prompt: str
    seed: int
    out_path: str


def parse_request(line: str) -> Request:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RequestError(f"malformed JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise RequestError("request must be a JSON object")
    if raw.get("version") != PROTOCOL_VERSION:
        raise RequestError(f"unsupported protocol version {raw.get('version')!r}")
    mode = raw.get("mode")
    if mode not in ("outpaint", "inpaint"):
        raise RequestError(f"mode must be outpaint or inpaint, got {mode!r}")
    for key in ("image", "mask", "prompt", "out"):
        if not isinstance(raw.get(key), str) or not raw[key]:
            raise RequestError(f"missing or invalid field {key!r}")
    seed = raw.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise RequestError(f"seed must be a nonnegative integer, got {seed!r}")
    return Request(mode, raw["image"], raw["mask"], raw["prompt"], seed, raw["out"])


def load_gray_png(path: str) -> np.ndarray:
    try:
        with Image.open(path) as im:
            if im.mode != "L":
                raise RequestError(f"{path}: expected 8-bit grayscale PNG, got {im.mode}")
            return np.asarray(im, dtype=np.uint8)
    except FileNotFoundError:
        raise RequestError(f"missing file: {path}") from None
    except RequestError:
        raise
    except Exception as exc:
        raise RequestError(f"unreadable PNG {path}: {exc}") from None


def load_keep_mask(path: str, shape) -> np.ndarray:
    arr = load_gray_png(path)
    if arr.shape != shape:
        raise RequestError(f"mask size {arr.shape} does not match image {shape}")
    valid = np.isin(arr, (0, 255))
    if not valid.all():
        raise RequestError("mask PNG must contain only bytes 0 and 255")
    return arr == 255


def write_png(pixels: np.ndarray, path: str) -> None:
    try:
        Image.fromarray(pixels.astype(np.uint8)).save(path, format="PNG")
    except OSError as exc:
        raise RequestError(f"cannot write {path}: {exc}") from None


def success(path: str) -> str:
    return json.dumps({"version": PROTOCOL_VERSION, "image": path})


def failure(message: str) -> str:
    return json.dumps({"version": PROTOCOL_VERSION, "error": message})
