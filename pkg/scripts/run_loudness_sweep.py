#!/usr/bin/env python3
"""Sweep the generated music's loudness against a fixed -18 LUFS noise and
record mix loudness plus unity-gain masking stats per level.

Runs a stub blend first to obtain the music track, then sweeps its target
loudness from --lo to --hi and writes a CSV.

Usage: python scripts/run_loudness_sweep.py [--kind hum] [--out DIR]
"""

import argparse
import os

from noiseblend.audio import fit_length, read_wav, write_wav
from noiseblend.fixtures import FIXTURE_KINDS, make_fixture
from noiseblend.pipeline import RunConfig, run_blend
from noiseblend.report import loudness_sweep, write_sweep_csv
from noiseblend.spectral import SpectralConfig


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--kind", choices=FIXTURE_KINDS, default="hum")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="out/sweep")
    parser.add_argument("--lo", type=float, default=-24.0)
    parser.add_argument("--hi", type=float, default=-3.0)
    parser.add_argument("--step", type=float, default=3.0)
    args = parser.parse_args()

    cfg = SpectralConfig()
    os.makedirs(args.out, exist_ok=True)
    noise_path = os.path.join(args.out, f"{args.kind}.wav")
    noise = make_fixture(args.kind, cfg, args.seed)
    write_wav(noise, noise_path)

    run_blend(RunConfig(noise_path=noise_path, out_dir=args.out, seed=args.seed, spectral=cfg))
    music = fit_length(read_wav(os.path.join(args.out, "music.wav")), cfg.clip_samples)

    targets = []
    level = args.lo
    while level <= args.hi + 1e-9:
        targets.append(round(level, 3))
        level += args.step
    rows = loudness_sweep(music, noise, targets, cfg=cfg)

    csv_path = os.path.join(args.out, "sweep.csv")
    write_sweep_csv(rows, csv_path)
    print(f"{'target':>8} {'mix LUFS':>10} {'coverage':>9} {'deficit':>12}")
    for row in rows:
        mix = row["mix_lufs"]
        mix_str = f"{mix:10.2f}" if mix is not None else "   immeas."
        print(
            f"{row['target_lufs']:8.1f} {mix_str} "
            f"{row['coverage']:9.4f} {row['residual_deficit']:12.4g}"
        )
    print(f"wrote {csv_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
