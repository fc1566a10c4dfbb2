"""Smoothing figure: the t^3 ||du/dt|| curve on log-log axes."""

import sys

from .core import load_columns, new_axes, save


def render(spec):
    cols = load_columns(spec.csv_path, ("t", "t3_dtu_l2"))
    t, curve = cols["t"], cols["t3_dtu_l2"]
    fig, ax = new_axes("Parabolic smoothing from rough data", "t",
                       "t^3 ||du/dt||_L2")
    ax.loglog(t, curve, "o-", ms=3, lw=1.2, label="t^3 ||du/dt||")
    peak = float(curve.max())
    ax.axhline(peak, color="k", ls="--", lw=0.8, label=f"peak = {peak:.4g}")
    ax.legend(loc="best")
    save(fig, spec)
    return {"peak": peak}


def main(argv=None):
    from .core import run_cli
    sys.exit(run_cli("smoothing", argv))
