"""Separation figure with the exp((K - lambda1) t) contraction envelope."""

import sys

import numpy as np

from .core import FigureError, load_columns, load_verdict, new_axes, save


def render(spec):
    cols = load_columns(spec.csv_path, ("t", "sep_l2"))
    t, sep = cols["t"], cols["sep_l2"]
    params = dict(spec.envelope)
    if spec.verdict_path:
        params = {**load_verdict(spec.verdict_path), **params}
    for key in ("lambda1", "K"):
        if key not in params:
            raise FigureError(f"envelope parameter {key!r} missing "
                              "(pass the lipschitz verdict JSON)")
    lam1, K = float(params["lambda1"]), float(params["K"])
    sep0 = float(params.get("sep0", sep[0]))

    fig, ax = new_axes("Two-trajectory separation", "t", "||u1 - u2||_L2")
    positive = sep > 0
    ax.semilogy(t[positive], sep[positive], lw=1.5, label="separation")
    env = sep0 * np.exp((K - lam1) * t)
    ax.semilogy(t, env, "k--", lw=1.0,
                label=f"sep(0) exp(({K:.3g} - {lam1:.3g}) t)")
    ax.legend(loc="best")
    save(fig, spec)
    return {"lambda1": lam1, "K": K, "sep0": sep0}


def main(argv=None):
    from .core import run_cli
    sys.exit(run_cli("lipschitz", argv, needs_verdict="required"))
