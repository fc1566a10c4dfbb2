"""Shared loading and rendering machinery for the evidence figures.

Inputs are the CSV/JSON files the simulation lab writes; they are read,
never modified. Output is deterministic for identical inputs: fixed figure
geometry, pinned SVG hash salt, and no embedded dates.
"""

import argparse
import csv
import json
from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

plt.rcParams["svg.hashsalt"] = "bflab-figures"

FIGSIZE = (6.0, 4.0)
DPI = 120

KINDS = ("decay", "lipschitz", "smoothing", "lyapunov", "sweep")


class FigureError(ValueError):
    """Bad or incomplete input evidence."""


@dataclass
class FigureSpec:
    kind: str
    csv_path: str
    output_path: str
    verdict_path: str | None = None
    image_format: str = "png"
    envelope: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FigureError(f"unknown figure kind {self.kind!r}")
        if self.image_format not in ("png", "svg"):
            raise FigureError(f"format must be png or svg, got {self.image_format!r}")


def load_columns(path, required):
    """Read a CSV into {column: array}, demanding the required columns."""
    with open(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FigureError(f"{path}: empty CSV") from None
        rows = [row for row in reader if row]
    for name in required:
        if name not in header:
            raise FigureError(f"{path}: missing column {name!r}")
    if not rows:
        raise FigureError(f"{path}: no data rows")
    data = np.array([[float(v) for v in row] for row in rows])
    cols = {name: data[:, i] for i, name in enumerate(header)}
    for name, vals in cols.items():
        if not np.all(np.isfinite(vals)):
            raise FigureError(f"{path}: non-finite values in column {name!r}")
    return cols


def load_verdict(path):
    """Fitted parameters from a verdict JSON ('fitted' block) or a flat summary."""
    with open(path) as fh:
        payload = json.load(fh)
    params = payload.get("fitted", payload)
    if not isinstance(params, dict):
        raise FigureError(f"{path}: no parameter mapping found")
    return params


def new_axes(title, xlabel, ylabel):
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    return fig, ax


def save(fig, spec):
    kwargs = {}
    if spec.image_format == "svg":
        kwargs["metadata"] = {"Date": None}
    fig.savefig(spec.output_path, format=spec.image_format,
                bbox_inches="tight", **kwargs)
    plt.close(fig)


def render(spec):
    """Render one figure; returns the annotation values actually drawn."""
    from . import decay, lipschitz, lyapunov, smoothing, sweep
    table = {"decay": decay.render, "lipschitz": lipschitz.render,
             "smoothing": smoothing.render, "lyapunov": lyapunov.render,
             "sweep": sweep.render}
    return table[spec.kind](spec)


def standard_parser(kind, needs_verdict):
    p = argparse.ArgumentParser(
        prog=f"fig-{kind}", description=f"Render the {kind} evidence figure")
    p.add_argument("csv", help="input evidence CSV")
    if needs_verdict == "required":
        p.add_argument("verdict", help="verdict/summary JSON")
    elif needs_verdict == "optional":
        p.add_argument("verdict", nargs="?", default=None,
                       help="verdict JSON (optional)")
    p.add_argument("output", help="output image path")
    p.add_argument("--format", default="png", choices=("png", "svg"))
    return p


def run_cli(kind, argv, needs_verdict="optional"):
    args = standard_parser(kind, needs_verdict).parse_args(argv)
    spec = FigureSpec(kind=kind, csv_path=args.csv,
                      verdict_path=getattr(args, "verdict", None),
                      output_path=args.output, image_format=args.format)
    try:
        info = render(spec)
    except (FigureError, OSError) as exc:
        print(f"error: {exc}")
        return 1
    extras = ", ".join(f"{k}={v:.6g}" for k, v in sorted(info.items())
                       if isinstance(v, float))
    print(f"wrote {spec.output_path}" + (f" ({extras})" if extras else ""))
    return 0
