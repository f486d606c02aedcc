"""Command-line interface.

One subcommand, ``export``: run the backbone over a set of images and
drop one ``.dfea`` bundle per image into the output directory. Exit
codes: 0 all images exported, 1 domain error or partial failure
(details on stderr as ``error: <Code>: <message>``), 2 usage error.
Expanded input paths are deduplicated and sorted, so equal invocations
process files in the same order.
"""

from __future__ import annotations

import argparse
import glob
import sys

from .backbone import FACETS, ExporterConfig
from .errors import ConfigError, ExporterError
from .export import export_images


def _expand(patterns) -> list[str]:
    paths: list[str] = []
    for pattern in patterns:
        hits = glob.glob(pattern, recursive=True)
        if hits:
            paths.extend(hits)
        elif glob.escape(pattern) == pattern:
            # No wildcard characters: a literal path. Keep it so a missing
            # file is reported per-file instead of vanishing silently.
            paths.append(pattern)
    return sorted(dict.fromkeys(paths))


def _cmd_export(args) -> int:
    paths = _expand(args.images)
    if not paths:
        raise ConfigError("no images match " + " ".join(args.images))
    config = ExporterConfig(
        model=args.model,
        layer=args.layer,
        facet=args.facet,
        resize=args.resize,
        out_dir=args.out,
        batch_size=args.batch_size,
    )
    report = export_images(
        paths,
        config,
        on_error=lambda e: print(f"error: {e.code}: {e}", file=sys.stderr),
    )
    print(f"exported {len(report.written)} of {len(paths)} images to {args.out}")
    return 0 if report.complete else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dinobot-export",
        description="Extract CLS + patch descriptor bundles (.dfea) from RGB images.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    export = sub.add_parser("export", help="write one .dfea bundle per input image")
    export.add_argument(
        "--images",
        nargs="+",
        required=True,
        metavar="GLOB",
        help="image paths or globs (recursive ** supported)",
    )
    export.add_argument("--out", required=True, help="output directory for .dfea bundles")
    export.add_argument(
        "--model",
        default="seeded:vit-b16",
        help="checkpoint name, or seeded:vit-b16[:N] for a reproducible untrained encoder",
    )
    export.add_argument(
        "--layer", type=int, default=9, help="encoder block the patch descriptors come from"
    )
    export.add_argument(
        "--facet", choices=FACETS, default="key", help="which per-token signal to keep"
    )
    export.add_argument("--resize", type=int, default=224, help="square input size in pixels")
    export.add_argument("--batch-size", type=int, default=8, help="images per forward pass")
    export.set_defaults(func=_cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ExporterError as e:
        print(f"error: {e.code}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: IoError: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
