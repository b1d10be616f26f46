"""export-features: pretrained conv feature maps to SPTN files.

Exit codes: 0 success, 1 usage error, 2 unreadable/unwritable files
(including missing weights), 3 validation error (unsupported layer,
non-finite activations).
"""

from __future__ import annotations

import argparse
import sys

from shadowphys import TensorFormatError, TruncatedFileError, UnsupportedFormatError

from .exporter import DEFAULT_LAYER, TOOL_VERSION, export

_IO_ERRORS = (OSError, UnsupportedFormatError, TruncatedFileError, TensorFormatError)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="export-features",
        description="Export pretrained VGG-16 feature maps as SPTN tensors.",
    )
    parser.add_argument("image", help="input image (PNG or PPM)")
    parser.add_argument(
        "--layer", default=DEFAULT_LAYER,
        help=f"conv layer name, post-activation (default {DEFAULT_LAYER})",
    )
    parser.add_argument("--out", required=True, help="output SPTN path")
    parser.add_argument(
        "--weights", default=None,
        help="weights file (full-model or features-only state dict); "
        "defaults to the torch hub checkpoint cache",
    )
    parser.add_argument(
        "--size", nargs=2, type=int, metavar=("H", "W"), default=None,
        help="resize the image bilinearly before export (default: native)",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress the summary line")
    parser.add_argument("--version", action="version", version=TOOL_VERSION)
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"export-features: {exc}", file=sys.stderr)
        return 1
    try:
        manifest = export(
            args.image, args.out,
            layer=args.layer, weights=args.weights,
            size=None if args.size is None else tuple(args.size),
        )
    except _IO_ERRORS as exc:  # MissingWeightsError is a FileNotFoundError
        print(f"export-features: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"export-features: {exc}", file=sys.stderr)
        return 3
    if not args.quiet:
        shape = "x".join(str(d) for d in manifest.shape)
        print(f"{manifest.output}: {manifest.layer_name} {shape}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
