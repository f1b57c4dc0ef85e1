"""One console script per figure kind, each taking --spec <path>."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .render import render
from .spec import FigplotsError, SpecError, load_spec


def _main(kind: str, argv: Optional[Sequence[str]]) -> int:
    ap = argparse.ArgumentParser(
        prog=f"figplot-{kind}",
        description=f"Render a {kind} figure from CSV inputs.")
    ap.add_argument("--spec", required=True,
                    help="TOML plot spec (inputs, axes, output)")
    args = ap.parse_args(argv)
    try:
        spec = load_spec(args.spec, default_kind=kind)
        if spec.kind != kind:
            raise SpecError(f"spec names kind {spec.kind!r} but this tool "
                            f"renders {kind!r}")
        out = render(spec)
    except FigplotsError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(out)
    return 0


def main_hysteresis(argv: Optional[Sequence[str]] = None) -> int:
    return _main("hysteresis", argv)


def main_tongue(argv: Optional[Sequence[str]] = None) -> int:
    return _main("tongue", argv)


def main_intermittency(argv: Optional[Sequence[str]] = None) -> int:
    return _main("intermittency", argv)


def main_ramp(argv: Optional[Sequence[str]] = None) -> int:
    return _main("ramp", argv)
