"""Regularity-sweep figure: log-log H2 response with the fitted slope."""

import sys

import numpy as np

from .core import FigureError, load_columns, load_verdict, new_axes, save


def render(spec):
    cols = load_columns(spec.csv_path, ("g_l2", "w_h2"))
    g, w = cols["g_l2"], cols["w_h2"]
    mask = (g > 0) & (w > 0)
    if not np.any(mask):
        raise FigureError(f"{spec.csv_path}: no positive rows to plot")
    g, w = g[mask], w[mask]

    params = dict(spec.envelope)
    if spec.verdict_path:
        params = {**load_verdict(spec.verdict_path), **params}
    if "slope_h2_vs_l2" not in params:
        raise FigureError("fitted slope missing (pass the sweep summary JSON)")
    slope = float(params["slope_h2_vs_l2"])

    fig, ax = new_axes("Steady regularity scaling", "||g||_L2", "||w||_H2")
    ax.loglog(g, w, "o", ms=4, label="sweep rows")
    # anchor the fitted line at the largest load
    c = w[-1] / g[-1] ** slope
    ax.loglog(g, c * g ** slope, "k--", lw=1.0,
              label=f"fitted slope = {slope:.8f}")
    ax.legend(loc="best")
    save(fig, spec)
    return {"slope": slope}


def main(argv=None):
    from .core import run_cli
    sys.exit(run_cli("sweep", argv, needs_verdict="required"))
