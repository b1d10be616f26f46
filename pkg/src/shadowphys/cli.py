"""Command-line entry point exposing every pipeline stage.

Subcommands: chroma (invariant-angle search and shadow-free
chromaticity maps), mask (soft shadow mask from an input/output pair),
boundary (shadow-boundary map from a mask), losses (full loss report
for an input/output pair), eval (dataset metrics), synth (synthetic
scenes with ground truth), gradcheck (finite-difference gradient
audit).

Exit codes: 0 success, 1 usage error, 2 file/IO error, 3 validation
failure. Every JSON output embeds the tool version and the resolved
flags; identical argv and seed produce bit-identical files regardless
of --threads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .chroma import chroma_loss, chromaticity_map, shadow_free_chromaticity
from .evaluation import DatasetLayout, run_dataset
from .features import standin_features
from .gradcheck import FD_STEP, PASS_THRESHOLD, run_gradcheck
from .imagecore import (
    SoftMask,
    TensorFormatError,
    TruncatedFileError,
    UnsupportedFormatError,
    read_image,
    read_mask,
    read_tensor,
    write_image,
    write_mask,
)
from .losses import LossWeights, build_report, loss_consistency, loss_feature, loss_identity
from .maskbound import DEFAULT_TAU, boundary, loss_smooth, shadow_mask
from .synth import SceneParams, generate

__all__ = ["main"]

_THREADS_ENV = "SHADOWPHYS_THREADS"


class _UsageError(Exception):
    """Bad argv; maps to exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we reserve 2 for IO
        raise _UsageError(message)


def _nonnegative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_nonnegative_int, default=0, help="RNG seed (default 0)")
    common.add_argument(
        "--threads",
        type=_positive_int,
        default=None,
        help=f"worker parallelism bound (default: ${_THREADS_ENV} or logical cores); "
        "never changes output bytes",
    )
    common.add_argument("--quiet", action="store_true", help="suppress informational stdout")

    parser = _Parser(prog="shadowphys", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"shadowphys {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser(
        "chroma",
        parents=[common],
        help="invariant projection angle and shadow-free chromaticity maps",
    )
    p.add_argument("input", type=Path, help="shadow image (PNG/PPM)")
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("mask", parents=[common], help="soft shadow mask from input/output pair")
    p.add_argument("input", type=Path, help="shadow image")
    p.add_argument("output", type=Path, help="shadow-free result image")
    p.add_argument("--out-dir", type=Path, default=Path("."))

    p = sub.add_parser("boundary", parents=[common], help="shadow-boundary map from a mask")
    p.add_argument("mask", type=Path, help="soft mask image")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="affinity bandwidth")
    p.add_argument("--out-dir", type=Path, default=Path("."))

    p = sub.add_parser("losses", parents=[common], help="loss report for an input/output pair")
    p.add_argument("--input", type=Path, required=True, help="shadow image")
    p.add_argument("--output", type=Path, required=True, help="shadow-free result image")
    p.add_argument("--features-in", type=Path, help="SPTN features of the input")
    p.add_argument("--features-out", type=Path, help="SPTN features of the output")
    p.add_argument("--weights", type=Path, help="JSON file overriding loss weights")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="boundary affinity bandwidth")
    p.add_argument(
        "--chroma-target",
        choices=("input", "physics"),
        default="input",
        help="chromaticity the output is held to: the input's own map "
        "(identity-consistent) or the entropy-compensated shadow-free map",
    )
    p.add_argument("--out-dir", type=Path, default=Path("."))

    p = sub.add_parser("eval", parents=[common], help="dataset evaluation report")
    p.add_argument("--results", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--masks", type=Path, default=None)
    p.add_argument("--space", choices=("lab", "rgb"), default="lab")
    p.add_argument("--resize", choices=("256", "native"), default="256")
    p.add_argument(
        "--mask-fallback",
        choices=("otsu",),
        default=None,
        help="derive missing masks from the result/gt difference (labeled in reports)",
    )
    p.add_argument("--out", type=Path, required=True, help="report JSON path (CSV written beside)")

    p = sub.add_parser("synth", parents=[common], help="synthetic scenes with exact ground truth")
    p.add_argument("--n", type=_positive_int, required=True, help="number of scenes")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument(
        "--soft",
        action="store_true",
        help="draw per-scene penumbra width and shadow strength instead of fixed defaults",
    )

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient audit")
    p.add_argument("--trials", type=_positive_int, default=100, help="points per loss")

    return parser


def _resolve_threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(_THREADS_ENV)
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            raise _UsageError(f"{_THREADS_ENV} must be an integer, got {env!r}")
        if value < 1:
            raise _UsageError(f"{_THREADS_ENV} must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


def _resolved_flags(args, threads: int) -> dict:
    # threads is excluded: it bounds parallelism without changing any
    # output byte, and echoing it would break cross-thread file identity
    flags = {}
    for key in sorted(vars(args)):
        if key == "threads":
            continue
        value = getattr(args, key)
        flags[key] = str(value) if isinstance(value, Path) else value
    return flags


def _provenance(args, threads: int) -> dict:
    return {"tool_version": __version__, "resolved_flags": _resolved_flags(args, threads)}


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n")


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


# ---------- subcommands ----------


def _cmd_chroma(args, threads: int) -> int:
    img = read_image(args.input)
    result = shadow_free_chromaticity(img)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_image(result.compensated.data, args.out_dir / "sigma_phy.png")
    write_image(result.projected.data, args.out_dir / "sigma_ent.png")
    payload = _provenance(args, threads)
    payload.update(
        {
            "angle_degrees": result.angle.degrees,
            "entropy_bits": result.angle.entropy_bits,
            "offset": result.offset,
            "flat_profile": result.profile.flat,
            "profile_bits": [float(b) for b in np.asarray(result.profile.bits)],
        }
    )
    _write_json(args.out_dir / "theta.json", payload)
    if result.profile.flat:
        print("warning: entropy profile is flat; angle carries no information", file=sys.stderr)
    _say(args, f"theta = {result.angle.degrees:.1f} deg ({result.angle.entropy_bits:.4f} bits)")
    return 0


def _cmd_mask(args, threads: int) -> int:
    mask = shadow_mask(read_image(args.input), read_image(args.output))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_mask(mask, args.out_dir / "mask.png")
    _say(args, f"mask.png written (mean {float(np.asarray(mask.data).mean()):.3f})")
    return 0


def _cmd_boundary(args, threads: int) -> int:
    bound = boundary(read_mask(args.mask), tau=args.tau)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    # boundary strength is unbounded above; PNG view clips at 1
    write_mask(SoftMask(np.clip(np.asarray(bound.data), 0.0, 1.0)), args.out_dir / "boundary.png")
    _say(args, f"boundary.png written (max {float(np.asarray(bound.data).max()):.3f})")
    return 0


def _load_weights(path: Path) -> LossWeights:
    mapping = json.loads(path.read_text())
    if not isinstance(mapping, dict):
        raise ValueError(f"{path}: weights file must hold a JSON object")
    known = set(LossWeights.__dataclass_fields__)
    unknown = set(mapping) - known
    if unknown:
        raise ValueError(f"{path}: unknown weight keys {sorted(unknown)}")
    return LossWeights(**mapping)


def _cmd_losses(args, threads: int) -> int:
    if (args.features_in is None) != (args.features_out is None):
        raise _UsageError("--features-in and --features-out must be given together")
    i_img = read_image(args.input)
    z_img = read_image(args.output)
    weights = LossWeights() if args.weights is None else _load_weights(args.weights)

    if args.features_in is not None:
        feats_i = read_tensor(args.features_in)
        feats_z = read_tensor(args.features_out)
        feature_source = "sptn"
    else:
        feats_i = standin_features(i_img)
        feats_z = standin_features(z_img)
        feature_source = "standin"
    feature_val, _ = loss_feature(feats_z, feats_i)

    if args.chroma_target == "input":
        target = chromaticity_map(i_img)
    else:
        target = shadow_free_chromaticity(i_img).compensated
    chroma_val, _ = chroma_loss(z_img, target)

    bound = boundary(shadow_mask(i_img, z_img), tau=args.tau)
    smooth_val, _ = loss_smooth(z_img, bound)
    cons_val, _ = loss_consistency(z_img, i_img)
    iden_val, _ = loss_identity(z_img, i_img)

    report = build_report(
        chroma=chroma_val,
        feature=feature_val,
        smooth=smooth_val,
        domcls_g=0.0,
        domcls_d=0.0,
        adv_s_to_sf=0.0,
        adv_sf_to_s=0.0,
        cons_s=cons_val,
        cons_sf=0.0,
        iden_s=iden_val,
        iden_sf=0.0,
        weights=weights,
    )
    payload = _provenance(args, threads)
    payload.update(report.as_dict())
    payload["feature_source"] = feature_source
    payload["note"] = (
        "classifier/adversarial slots and the reverse-direction cycle "
        "and identity slots need model outputs this tool does not have; "
        "they are reported as zero"
    )
    args.out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(args.out_dir / "loss_report.json", payload)
    _say(args, f"total = {report.total:.6f}")
    return 0


def _cmd_eval(args, threads: int) -> int:
    layout = DatasetLayout(args.results, args.gt, args.masks)
    size = None if args.resize == "native" else 256
    report = run_dataset(
        layout,
        space=args.space,
        size=size,
        mask_fallback=args.mask_fallback,
        threads=threads,
        protocol_extra=_provenance(args, threads),
    )
    args.out.parent.mkdir(parents=True, exist_ok=True)
    report.write_json(args.out)
    report.write_csv(args.out.with_suffix(".csv"))
    if report.aggregate is not None:
        agg = report.aggregate
        shadow = "absent" if agg.mae_shadow is None else f"{agg.mae_shadow:.4f}"
        nonshadow = "absent" if agg.mae_nonshadow is None else f"{agg.mae_nonshadow:.4f}"
        _say(
            args,
            f"{len(report.records)} pairs: MAE all {agg.mae_all:.4f} "
            f"shadow {shadow} nonshadow {nonshadow} PSNR {agg.psnr:.2f} dB",
        )
    if not report.clean:
        for stem in report.unpaired_results:
            print(f"unpaired result: {stem}", file=sys.stderr)
        for stem in report.unpaired_gt:
            print(f"unpaired ground truth: {stem}", file=sys.stderr)
        return 3
    return 0


def _cmd_synth(args, threads: int) -> int:
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.n):
        if args.soft:
            # varied wide penumbrae; 5000 K keeps high strengths within
            # the short-chord regime the angle search handles reliably
            draw = np.random.default_rng((args.seed, i))
            params = SceneParams(
                seed=args.seed + i,
                shadow_temperature=5000.0,
                penumbra_sigma=float(draw.uniform(4.0, 6.0)),
                shadow_strength=float(draw.uniform(0.4, 1.0)),
            )
        else:
            params = SceneParams(seed=args.seed + i)
        scene = generate(params)
        dest = args.out_dir if args.n == 1 else args.out_dir / f"scene_{i:03d}"
        dest.mkdir(parents=True, exist_ok=True)
        # 16-bit: 8-bit quantization noise is enough to blur the tight
        # reflectance clusters the entropy search depends on
        write_image(scene.shadow_image, dest / "shadow.png", bits=16)
        write_image(scene.shadowfree_image, dest / "shadowfree.png", bits=16)
        write_mask(scene.gt_mask, dest / "mask.png")
        meta = _provenance(args, threads)
        meta.update(
            {
                "scene_index": i,
                "gt_angle": scene.gt_angle.degrees,
                "params": asdict(params),
            }
        )
        _write_json(dest / "meta.json", meta)
        _say(args, f"scene {i}: gt_angle = {scene.gt_angle.degrees:.2f} deg -> {dest}")
    return 0


def _cmd_gradcheck(args, threads: int) -> int:
    results = run_gradcheck(trials=args.trials, seed=args.seed)
    for name, worst in results.items():
        print(f"{name:18s} max_rel {worst:.3e}")
    failed = {name: worst for name, worst in results.items() if worst >= PASS_THRESHOLD}
    if failed:
        print(
            f"gradcheck FAIL: {sorted(failed)} at or above {PASS_THRESHOLD:g} "
            f"(central step {FD_STEP:g})",
            file=sys.stderr,
        )
        return 3
    _say(args, f"gradcheck PASS (threshold {PASS_THRESHOLD:g}, central step {FD_STEP:g})")
    return 0


_COMMANDS = {
    "chroma": _cmd_chroma,
    "mask": _cmd_mask,
    "boundary": _cmd_boundary,
    "losses": _cmd_losses,
    "eval": _cmd_eval,
    "synth": _cmd_synth,
    "gradcheck": _cmd_gradcheck,
}

_IO_ERRORS = (OSError, UnsupportedFormatError, TruncatedFileError, TensorFormatError)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        threads = _resolve_threads(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.subcommand](args, threads)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except _IO_ERRORS as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
