import hashlib
import json
import os
import re

import pytest

from bflab_figures import FigureError, FigureSpec, render
from bflab_figures.sweep import main as sweep_main

DATA = os.path.join(os.path.dirname(__file__), "data")


def data(name):
    return os.path.join(DATA, name)


def spec_for(kind, tmp_path, fmt="png"):
    table = {
        "decay": ("trajectory.csv", None),
        "lyapunov": ("trajectory.csv", None),
        "lipschitz": ("lipschitz_separation.csv", "lipschitz_verdict.json"),
        "smoothing": ("smoothing_curve.csv", None),
        "sweep": ("sweep.csv", "sweep_summary.json"),
    }
    csv_name, verdict = table[kind]
    return FigureSpec(kind=kind, csv_path=data(csv_name),
                      verdict_path=data(verdict) if verdict else None,
                      output_path=str(tmp_path / f"{kind}.{fmt}"),
                      image_format=fmt)


@pytest.mark.parametrize("kind", ["decay", "lipschitz", "smoothing",
                                  "lyapunov", "sweep"])
def test_every_kind_renders(kind, tmp_path):
    spec = spec_for(kind, tmp_path)
    info = render(spec)
    out = tmp_path / f"{kind}.png"
    assert out.exists() and out.stat().st_size > 1000
    assert isinstance(info, dict)
    print(f"ACCEPTANCE figure-{kind}: PASS")


def test_sweep_annotation_matches_json(tmp_path):
    spec = spec_for("sweep", tmp_path, fmt="svg")
    info = render(spec)
    fitted = json.loads(open(data("sweep_summary.json")).read())["slope_h2_vs_l2"]
    assert abs(info["slope"] - fitted) <= 1e-6
    svg = (tmp_path / "sweep.svg").read_text()
    match = re.search(r"fitted slope = ([0-9.+-eE]+)", svg)
    assert match, "slope annotation not embedded in the SVG"
    assert abs(float(match.group(1)) - fitted) <= 1e-6
    print("ACCEPTANCE figure-sweep-annotation: PASS")


def test_lipschitz_envelope_from_verdict(tmp_path):
    info = render(spec_for("lipschitz", tmp_path))
    verdict = json.loads(open(data("lipschitz_verdict.json")).read())["fitted"]
    assert info["lambda1"] == verdict["lambda1"]
    assert info["K"] == verdict["K"]


def test_lipschitz_requires_envelope_params(tmp_path):
    spec = FigureSpec(kind="lipschitz", csv_path=data("lipschitz_separation.csv"),
                      output_path=str(tmp_path / "x.png"))
    with pytest.raises(FigureError, match="lambda1"):
        render(spec)


def test_missing_column_named(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,wrong\n0.0,1.0\n")
    spec = FigureSpec(kind="decay", csv_path=str(bad),
                      output_path=str(tmp_path / "x.png"))
    with pytest.raises(FigureError, match="'l2'"):
        render(spec)


def test_empty_csv_rejected(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    spec = FigureSpec(kind="decay", csv_path=str(empty),
                      output_path=str(tmp_path / "x.png"))
    with pytest.raises(FigureError, match="empty"):
        render(spec)
    header_only = tmp_path / "h.csv"
    header_only.write_text("t,l2\n")
    spec2 = FigureSpec(kind="decay", csv_path=str(header_only),
                       output_path=str(tmp_path / "x.png"))
    with pytest.raises(FigureError, match="no data rows"):
        render(spec2)


def test_bad_kind_and_format():
    with pytest.raises(FigureError):
        FigureSpec(kind="pie", csv_path="x", output_path="y")
    with pytest.raises(FigureError):
        FigureSpec(kind="decay", csv_path="x", output_path="y",
                   image_format="gif")


def test_inputs_read_only(tmp_path):
    before = {}
    for name in os.listdir(DATA):
        with open(data(name), "rb") as fh:
            before[name] = hashlib.sha256(fh.read()).hexdigest()
    for kind in ("decay", "lipschitz", "smoothing", "lyapunov", "sweep"):
        render(spec_for(kind, tmp_path))
    for name, digest in before.items():
        with open(data(name), "rb") as fh:
            assert hashlib.sha256(fh.read()).hexdigest() == digest, name


@pytest.mark.parametrize("fmt", ["png", "svg"])
def test_deterministic_output(fmt, tmp_path):
    a = spec_for("sweep", tmp_path, fmt=fmt)
    render(a)
    first = open(a.output_path, "rb").read()
    render(a)
    assert open(a.output_path, "rb").read() == first


def test_cli_entry(tmp_path, capsys):
    out = tmp_path / "cli.png"
    with pytest.raises(SystemExit) as exc:
        sweep_main([data("sweep.csv"), data("sweep_summary.json"), str(out)])
    assert exc.value.code == 0
    assert out.exists()
    assert "wrote" in capsys.readouterr().out

    with pytest.raises(SystemExit) as exc2:
        sweep_main([data("trajectory.csv"), data("sweep_summary.json"),
                    str(tmp_path / "no.png")])
    assert exc2.value.code == 1
