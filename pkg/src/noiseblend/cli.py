"""Command-line interface.

Exit codes are a stable scripting contract: 0 success, 2 input error,
3 backend error, 4 solver error, 5 I/O error. With --json each subcommand
prints exactly one JSON document on stdout and nothing else there.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .audio import AudioClip, ensure_rate, fit_length, mix, read_wav, write_wav
from .errors import InputError, NoiseBlendError
from .fixtures import FIXTURE_KINDS, make_fixture
from .loudness import measure_lufs, normalize_lufs
from .masking import (
    AmplificationProblem,
    coverage,
    masking_thresholds,
    residual_deficit,
    solve_breakpoint,
    solve_subgradient,
)
from .pipeline import RunConfig, run_blend
from .report import (
    IMMEASURABLE,
    loudness_sweep,
    report_to_dict,
    write_sweep_csv,
)
from .specimage import extract_core_mask, mel_to_image, save_image_png, save_keep_png
from .spectral import SpectralConfig, amp_to_db, mel_filter, stft_magnitude


def _add_spectral_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("spectral overrides")
    g.add_argument("--sample-rate", type=int, default=44100)
    g.add_argument("--n-fft", type=int, default=2048)
    g.add_argument("--hop-length", type=int, default=441)
    g.add_argument("--n-mels", type=int, default=512)
    g.add_argument("--f-min", type=float, default=0.0)
    g.add_argument("--f-max", type=float, default=10000.0)
    g.add_argument("--n-frames", type=int, default=512)


def _spectral_from(args) -> SpectralConfig:
    return SpectralConfig(
        sample_rate=args.sample_rate,
        n_fft=args.n_fft,
        hop_length=args.hop_length,
        n_mels=args.n_mels,
        f_min=args.f_min,
        f_max=args.f_max,
        n_frames=args.n_frames,
    )


def _emit(args, payload: dict, human_lines) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in human_lines:
            print(line)


def _lufs_str(value) -> str:
    return IMMEASURABLE if value is None else f"{value:.2f} LUFS"


def _load_canonical(path, cfg: SpectralConfig, resample: bool) -> AudioClip:
    clip = read_wav(path)
    clip = ensure_rate(clip, cfg.sample_rate, resample=resample)
    return fit_length(clip, cfg.clip_samples)


def cmd_blend(args) -> int:
    cfg = RunConfig(
        noise_path=args.noise,
        out_dir=args.out,
        prompt=args.prompt,
        backend=args.backend,
        seed=args.seed,
        alpha=args.alpha,
        smr_db=args.smr_db,
        core_fraction=args.core_fraction,
        target_lufs_noise=args.target_lufs,
        solver=args.solver,
        griffin_lim_iters=args.griffin_lim_iters,
        inpaint_dilation=args.inpaint_dilation,
        resample=args.resample,
        backend_timeout=args.backend_timeout,
        spectral=_spectral_from(args),
    )
    report = run_blend(cfg)
    payload = report_to_dict(report)
    _emit(
        args,
        payload,
        [
            f"lambda* = {report.lambda_star:.4f} "
            f"(coverage {report.coverage_before:.3f} -> {report.coverage_after:.3f})",
            f"noise {_lufs_str(report.loudness_noise_lufs)}, "
            f"music {_lufs_str(report.loudness_music_lufs)}, "
            f"mix {_lufs_str(report.loudness_mix_lufs)}",
            f"report: {os.path.join(args.out, 'report.json')}",
        ],
    )
    return 0


def cmd_analyze(args) -> int:
    cfg = _spectral_from(args)
    clip = _load_canonical(args.noise, cfg, args.resample)
    grid = stft_magnitude(clip, cfg)
    mel = mel_filter(grid, cfg)
    image = mel_to_image(mel)
    mask = extract_core_mask(image, args.core_fraction)
    thresholds = masking_thresholds(grid, args.smr_db, cfg)
    os.makedirs(args.out, exist_ok=True)
    image_path = os.path.join(args.out, "x_noise.png")
    mask_path = os.path.join(args.out, "mask.png")
    save_image_png(image, image_path)
    save_keep_png(mask.cells == 1, mask_path)
    t_db = amp_to_db(thresholds.values.values)
    payload = {
        "image": image_path,
        "mask": mask_path,
        "core_count": mask.core_count,
        "core_fraction": args.core_fraction,
        "threshold_db": {
            "min": float(t_db.min()),
            "median": float(np.median(t_db)),
            "max": float(t_db.max()),
        },
    }
    stats_path = os.path.join(args.out, "analysis.json")
    with open(stats_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit(
        args,
        payload,
        [
            f"wrote {image_path}, {mask_path}, {stats_path}",
            f"core cells: {mask.core_count}",
            "threshold dB (min/median/max): "
            f"{payload['threshold_db']['min']:.1f} / "
            f"{payload['threshold_db']['median']:.1f} / "
            f"{payload['threshold_db']['max']:.1f}",
        ],
    )
    return 0


def cmd_amplify(args) -> int:
    cfg = _spectral_from(args)
    music = _load_canonical(args.music, cfg, args.resample)
    noise = _load_canonical(args.noise, cfg, args.resample)
    noise_stft = stft_magnitude(noise, cfg)
    thresholds = masking_thresholds(noise_stft, args.smr_db, cfg)
    noise_image = mel_to_image(mel_filter(noise_stft, cfg))
    core = extract_core_mask(noise_image, args.core_fraction)
    music_mel = mel_filter(stft_magnitude(music, cfg), cfg)
    problem = AmplificationProblem(
        music=music_mel,
        thresholds=thresholds,
        core=core,
        alpha=args.alpha,
        lambda_bounds=(0.0, args.lambda_max),
    )
    solve = solve_subgradient if args.solver == "subgradient" else solve_breakpoint
    solution = solve(problem)
    payload = {
        "lambda_star": solution.lambda_star,
        "objective_value": solution.objective_value,
        "coverage_before": coverage(music_mel, thresholds, core, 1.0),
        "coverage_after": solution.coverage,
        "residual_deficit_before": residual_deficit(music_mel, thresholds, core, 1.0),
        "residual_deficit_after": residual_deficit(
            music_mel, thresholds, core, solution.lambda_star
        ),
        "unmaskable_count": solution.unmaskable_count,
        "solver": {"name": solution.solver, "iterations": solution.iterations},
    }
    if args.write_wav:
        amplified = AudioClip(music.samples * solution.lambda_star, music.sample_rate)
        write_wav(amplified, args.write_wav, allow_clipping=True)
        payload["amplified_wav"] = args.write_wav
    # This subcommand's default output is the JSON document itself.
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_mix(args) -> int:
    a = read_wav(args.a)
    b = read_wav(args.b)
    blended = mix(a, b)
    write_wav(blended, args.out, allow_clipping=True)
    payload = {"out": args.out, "overflow": blended.overflow, "samples": len(blended)}
    _emit(
        args,
        payload,
        [f"wrote {args.out}" + (" (overflow: summed peak exceeded 1.0)" if blended.overflow else "")],
    )
    return 0


def cmd_loudness(args) -> int:
    clip = read_wav(args.path)
    measure = measure_lufs(clip)
    payload = {
        "integrated_lufs": measure.integrated_lufs,
        "gated_block_count": measure.gated_block_count,
        "ungated_block_count": measure.ungated_block_count,
    }
    lines = [f"integrated loudness: {_lufs_str(measure.integrated_lufs)}"]
    if args.normalize is not None:
        if not args.out:
            raise InputError("--normalize requires --out")
        normalized = normalize_lufs(clip, args.normalize)
        write_wav(normalized, args.out, allow_clipping=True)
        check = measure_lufs(normalized)
        payload["normalized_lufs"] = check.integrated_lufs
        payload["out"] = args.out
        lines.append(f"normalized to {_lufs_str(check.integrated_lufs)} -> {args.out}")
    if payload.get("integrated_lufs") is None:
        payload["integrated_lufs"] = IMMEASURABLE
    _emit(args, payload, lines)
    return 0


def cmd_sweep(args) -> int:
    cfg = _spectral_from(args)
    music = _load_canonical(args.music, cfg, args.resample)
    noise = _load_canonical(args.noise, cfg, args.resample)
    targets = list(args.targets)
    rows = loudness_sweep(
        music,
        noise,
        targets,
        cfg=cfg,
        smr_db=args.smr_db,
        core_fraction=args.core_fraction,
        noise_target_lufs=args.target_lufs,
    )
    write_sweep_csv(rows, args.out)
    payload = {"out": args.out, "rows": rows}
    _emit(args, payload, [f"wrote {len(rows)} rows to {args.out}"])
    return 0


def cmd_fixtures(args) -> int:
    cfg = _spectral_from(args)
    kinds = FIXTURE_KINDS if args.kind == "all" else (args.kind,)
    os.makedirs(args.out, exist_ok=True)
    written = []
    for kind in kinds:
        clip = make_fixture(kind, cfg, args.seed)
        path = os.path.join(args.out, f"{kind}.wav")
        write_wav(clip, path)
        written.append(path)
    _emit(args, {"written": written}, [f"wrote {p}" for p in written])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noiseblend",
        description="Blend environmental noise into generated music and mask its high-energy core.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, spectral=True):
        p.add_argument("--json", action="store_true", help="print one JSON document on stdout")
        p.add_argument("--resample", action="store_true", help="resample inputs to the pipeline rate")
        if spectral:
            _add_spectral_args(p)

    p = sub.add_parser("blend", help="full two-stage blend run")
    p.add_argument("--noise", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--prompt", default="calm rhythmic ambient music")
    p.add_argument("--backend", default=None, help="stub | exec:\"CMD\" (default: $BNMUSIC_BACKEND or stub)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.14)
    p.add_argument("--smr-db", type=float, default=21.0)
    p.add_argument("--core-fraction", type=float, default=0.15)
    p.add_argument("--target-lufs", type=float, default=-18.0)
    p.add_argument("--solver", choices=("subgradient", "breakpoint"), default="subgradient")
    p.add_argument("--griffin-lim-iters", type=int, default=32)
    p.add_argument("--inpaint-dilation", type=int, default=0)
    p.add_argument("--backend-timeout", type=float, default=120.0)
    common(p)
    p.set_defaults(func=cmd_blend)

    p = sub.add_parser("analyze", help="emit mel image, core mask, threshold stats")
    p.add_argument("--noise", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--core-fraction", type=float, default=0.15)
    p.add_argument("--smr-db", type=float, default=21.0)
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("amplify", help="solve the gain problem for a music/noise pair")
    p.add_argument("--music", required=True)
    p.add_argument("--noise", required=True)
    p.add_argument("--alpha", type=float, default=0.14)
    p.add_argument("--smr-db", type=float, default=21.0)
    p.add_argument("--core-fraction", type=float, default=0.15)
    p.add_argument("--lambda-max", type=float, default=100.0)
    p.add_argument("--solver", choices=("subgradient", "breakpoint"), default="breakpoint")
    p.add_argument("--write-wav", default=None, help="write the amplified music here")
    common(p)
    p.set_defaults(func=cmd_amplify)

    p = sub.add_parser("mix", help="overlay two clips sample-wise")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True)
    common(p, spectral=False)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("loudness", help="measure (and optionally normalize) integrated loudness")
    p.add_argument("path")
    p.add_argument("--normalize", type=float, default=None, help="target LUFS")
    p.add_argument("--out", default=None)
    common(p, spectral=False)
    p.set_defaults(func=cmd_loudness)

    p = sub.add_parser("sweep", help="loudness sweep: music level vs masking of fixed noise")
    p.add_argument("--music", required=True)
    p.add_argument("--noise", required=True)
    p.add_argument(
        "--targets",
        nargs="*",
        type=float,
        default=[-24.0, -21.0, -18.0, -15.0, -12.0, -9.0, -6.0, -3.0],
        help="music loudness targets in LUFS, e.g. --targets -24 -18 -12",
    )
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--smr-db", type=float, default=21.0)
    p.add_argument("--core-fraction", type=float, default=0.15)
    p.add_argument("--target-lufs", type=float, default=-18.0, help="fixed noise loudness")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fixtures", help="synthesize deterministic test noises")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=("all",) + FIXTURE_KINDS, default="all")
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_fixtures)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NoiseBlendError as exc:
        print(f"{exc.category}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"input: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
