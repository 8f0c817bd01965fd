#!/usr/bin/env python3
"""Run the full two-stage blend on a synthesized noise fixture and print the
key numbers from the report.

Usage: python scripts/run_stub_blend.py [--kind clicks|hum|am-broadband]
       [--seed N] [--out DIR] [--backend stub|exec:CMD]
"""

import argparse
import json
import os

from noiseblend.audio import write_wav
from noiseblend.fixtures import FIXTURE_KINDS, make_fixture
from noiseblend.pipeline import RunConfig, run_blend
from noiseblend.spectral import SpectralConfig


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--kind", choices=FIXTURE_KINDS, default="clicks")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="out/stub-blend")
    parser.add_argument("--backend", default="stub")
    parser.add_argument("--prompt", default="calm rhythmic ambient music")
    args = parser.parse_args()

    cfg = SpectralConfig()
    os.makedirs(args.out, exist_ok=True)
    noise_path = os.path.join(args.out, f"{args.kind}.wav")
    write_wav(make_fixture(args.kind, cfg, args.seed), noise_path)

    report = run_blend(
        RunConfig(
            noise_path=noise_path,
            out_dir=args.out,
            prompt=args.prompt,
            backend=args.backend,
            seed=args.seed,
            spectral=cfg,
        )
    )
    print(f"noise fixture : {args.kind} (seed {args.seed})")
    print(f"lambda*       : {report.lambda_star:.4f} ({report.solver['name']})")
    print(f"coverage      : {report.coverage_before:.4f} -> {report.coverage_after:.4f}")
    print(
        "deficit       : "
        f"{report.residual_deficit_before:.3g} -> {report.residual_deficit_after:.3g}"
    )
    print(
        f"loudness LUFS : noise {report.loudness_noise_lufs:.2f}, "
        f"music {report.loudness_music_lufs:.2f}, mix {report.loudness_mix_lufs:.2f}"
    )
    timing = ", ".join(f"{k} {v:.2f}s" for k, v in report.timing.items())
    print(f"timing        : {timing}")
    print(f"artifacts     : {os.path.join(args.out, 'report.json')}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
