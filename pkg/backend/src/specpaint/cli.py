import argparse
import sys

from .config import BackendConfig
from .server import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="specpaint-backend",
        description="Spectrogram inpainting generator; line-JSON protocol on stdin/stdout.",
    )
    parser.add_argument("--mock", action="store_true", help="weights-free deterministic fill")
    parser.add_argument("--model", default=None, help="model id or local path for inpainting")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--steps", type=int, default=30)
    parser.add_argument("--guidance", type=float, default=7.5)
    args = parser.parse_args(argv)
    try:
        cfg = BackendConfig(
            model=args.model,
            device=args.device,
            steps=args.steps,
            guidance=args.guidance,
            mock=args.mock,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return serve(cfg)


if __name__ == "__main__":
    sys.exit(main())
