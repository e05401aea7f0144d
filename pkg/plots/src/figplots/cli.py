"""One thin command per figure kind; all share --in/--out/--kind flags."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureSpec, render


def _run(default_kind: str | None, argv=None) -> int:
    parser = argparse.ArgumentParser(description="Render a harness CSV into PNG + SVG")
    parser.add_argument("--in", dest="input_path", required=True, help="harness CSV to plot")
    parser.add_argument("--out", dest="output_path", required=True, help="output path (extension ignored)")
    parser.add_argument(
        "--kind",
        choices=KINDS,
        default=default_kind,
        required=default_kind is None,
        help="figure kind",
    )
    parser.add_argument("--linear", action="store_true", help="linear instead of log gap axis")
    args = parser.parse_args(argv)
    spec = FigureSpec(
        input_path=args.input_path,
        kind=args.kind,
        output_path=args.output_path,
        log_scale=not args.linear,
    )
    png, svg = render(spec)
    print(png)
    print(svg)
    return 0


def main(argv=None) -> int:
    return _run(None, argv)


def main_scaling(argv=None) -> int:
    return _run("scaling", argv)


def main_win_fraction(argv=None) -> int:
    return _run("win_fraction", argv)


def main_m_sweep(argv=None) -> int:
    return _run("m_sweep", argv)


def main_theta_vs_n(argv=None) -> int:
    return _run("theta_vs_n", argv)


def main_theta_vs_p(argv=None) -> int:
    return _run("theta_vs_p", argv)


def main_magnetization(argv=None) -> int:
    return _run("magnetization", argv)


if __name__ == "__main__":
    sys.exit(main())
