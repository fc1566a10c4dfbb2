"""Lyapunov descent figure: L(u(t)) against time."""

import sys

from .core import load_columns, new_axes, save


def render(spec):
    cols = load_columns(spec.csv_path, ("t", "lyapunov"))
    t, lyap = cols["t"], cols["lyapunov"]
    fig, ax = new_axes("Lyapunov functional descent", "t", "L(u(t))")
    ax.plot(t, lyap, lw=1.5, label="L(u(t))")
    final = float(lyap[-1])
    ax.axhline(final, color="k", ls="--", lw=0.8,
               label=f"plateau = {final:.6g}")
    ax.legend(loc="best")
    save(fig, spec)
    return {"final_value": final, "total_drop": float(lyap[0] - lyap[-1])}


def main(argv=None):
    from .core import run_cli
    sys.exit(run_cli("lyapunov", argv))
