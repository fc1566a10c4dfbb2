"""Energy decay figure: ||u(t)|| on a log-linear scale."""

import sys

import numpy as np

from .core import load_columns, load_verdict, new_axes, save


def render(spec):
    cols = load_columns(spec.csv_path, ("t", "l2"))
    t, l2 = cols["t"], cols["l2"]
    fig, ax = new_axes("Energy decay", "t", "||u(t)||_L2")
    positive = l2 > 0
    if np.any(positive):
        ax.semilogy(t[positive], l2[positive], lw=1.5, label="||u(t)||")
    else:
        ax.plot(t, l2, lw=1.5, label="||u(t)||")  # identically zero run
    info = {}
    params = dict(spec.envelope)
    if spec.verdict_path:
        params = {**load_verdict(spec.verdict_path), **params}
    if "lambda1" in params and "K" in params and l2[0] > 0:
        rate = params["lambda1"] - params["K"]
        ax.semilogy(t, l2[0] * np.exp(-rate * t), "k--", lw=1.0,
                    label=f"exp(-{rate:.3g} t) envelope")
        info["decay_rate"] = float(rate)
    ax.legend(loc="best")
    save(fig, spec)
    return info


def main(argv=None):
    from .core import run_cli
    sys.exit(run_cli("decay", argv))
