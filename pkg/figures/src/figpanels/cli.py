"""render --spec <path> --out <dir>: draw the layouts described by a
JSON figure spec from CSV error tables."""

from __future__ import annotations

import argparse
import json
import sys

from .render import FigureSpec, RenderError, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="render", description="Render error-curve CSV tables into figure panels."
    )
    parser.add_argument("--spec", required=True, help="JSON figure spec")
    parser.add_argument("--out", required=True, help="output directory for PNG panels")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec.from_json(args.spec)
        report = render(spec, args.out)
    except (RenderError, OSError, json.JSONDecodeError) as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    if not args.quiet:
        for panel, info in report.items():
            print(f"{panel}: {info['path']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
