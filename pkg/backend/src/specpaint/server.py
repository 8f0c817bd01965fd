"""Serial request loop: one JSON line in, one JSON line out, never crash on
a bad request. Only protocol JSON goes to stdout; diagnostics go to stderr."""

from __future__ import annotations

import shutil
import sys

from .config import BackendConfig
from .mock import mock_fill
from .protocol import (
    RequestError,
    failure,
    load_gray_png,
    load_keep_mask,
    parse_request,
    success,
    write_png,
)


def serve(cfg: BackendConfig, stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    inpainter = None
    if cfg.model:
        from .diffusion import DiffusionInpainter

        try:
            inpainter = DiffusionInpainter(cfg)
        except RequestError as exc:
            # surface the load failure on the first request instead of dying
            print(f"model load failed: {exc}", file=sys.stderr)
            load_error = str(exc)
        else:
            load_error = None
    else:
        load_error = None

    for line in stdin:
        if not line.strip():
            continue
        try:
            request = parse_request(line)
            if cfg.model and inpainter is None:
                raise RequestError(load_error or "model unavailable")
            image = load_gray_png(request.image_path)
            keep = load_keep_mask(request.mask_path, image.shape)
            if keep.all():
                # nothing to generate: answer with a byte-exact copy
                shutil.copyfile(request.image_path, request.out_path)
            else:
                if cfg.mock:
                    result = mock_fill(image, keep, request.prompt, request.seed)
                else:
                    result = inpainter.fill(image, keep, request.prompt, request.seed)
                if result.shape != image.shape:
                    raise RequestError(
                        f"generator produced {result.shape}, expected {image.shape}"
                    )
                write_png(result, request.out_path)
            reply = success(request.out_path)
        except RequestError as exc:
            reply = failure(str(exc))
        except Exception as exc:  # a single bad request must not kill the loop
            reply = failure(f"internal error: {exc}")
        print(reply, file=stdout, flush=True)
    return 0
