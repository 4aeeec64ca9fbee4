"""Markdown, CSV and SVG reports of stored runs."""

import re

import numpy as np
import pytest

from gw_electric.harness import ExperimentConfig, run_experiment, write_result
from gw_electric.report import Curve, build_report, resolve_run, svg_plot, write_report
from gw_electric.errors import MissingRun


def pool_run(tmp_path, seed, resistance, **pool):
    cfg = ExperimentConfig(
        {
            "mode": "pool",
            "seed": seed,
            "offspring": {"deterministic": 2},
            "resistance": resistance,
            "pool": {"size": 1000, "replicates": 4, "n_max": 30, **pool},
        }
    )
    rec = run_experiment(cfg)
    write_result(rec, cfg, tmp_path)
    return rec


UNIT = {"family": "point-mass", "value": 1.0}
UNIFORM = {"family": "uniform", "a": 0.5, "b": 1.5}


def test_symmetric_run_is_flat_at_one(tmp_path):
    rec = pool_run(tmp_path, 1, UNIT)
    _, v = rec.series("n_x", "mean")
    assert np.allclose(v, 1.0, rtol=1e-12)
    files = build_report([rec])
    assert "n_x.svg" in files and "1/c1 = 1" in files["report.md"]


def test_two_seeds_overlaid_with_legend(tmp_path):
    a = pool_run(tmp_path, 1, UNIFORM)
    b = pool_run(tmp_path, 2, UNIFORM)
    svg = build_report([a, b])["n_x.svg"]
    assert svg.count("<polyline") == 2
    assert "seed 1" in svg and "seed 2" in svg


def test_uniform_slope_annotation():
    rec = run_experiment(
        {
            "mode": "pool",
            "seed": 3,
            "offspring": {"deterministic": 2},
            "resistance": UNIFORM,
            "pool": {"size": 100_000, "replicates": 4, "n_max": 200, "fit": [50, 200]},
        }
    )
    files = build_report([rec])
    line = next(s for s in files["report.md"].splitlines() if "slope" in s and rec.run_id in s)
    slope = float(re.search(r"slope ([-0-9.e]+),", line).group(1))
    assert slope == pytest.approx(1 / 12, rel=0.3)
    assert "reference -c4/c1^2 = 0.083333" in line
    assert "log_correction.svg" in files


def test_lambda_curve(tmp_path):
    rec = pool_run(tmp_path, 1, UNIT, **{"lambda": 3.0})
    rec = run_experiment({**rec.config, "mode": "lambda"})
    files = build_report([rec])
    assert "lambda.svg" in files and "limit 0.33333" in files["report.md"]


def test_report_is_deterministic_and_resolvable(tmp_path):
    a = pool_run(tmp_path, 1, UNIFORM)
    assert resolve_run(a.run_id, tmp_path).to_json() == a.to_json()
    assert resolve_run(str(tmp_path / a.run_id)).run_id == a.run_id
    out1 = [p.read_bytes() for p in write_report([a], tmp_path / "r1")]
    out2 = [p.read_bytes() for p in write_report([resolve_run(a.run_id, tmp_path)], tmp_path / "r2")]
    assert out1 == out2
    csv = (tmp_path / "r1" / "report.csv").read_text()
    assert csv.splitlines()[0] == "run_id,mode,n,observable,statistic,value"
    with pytest.raises(MissingRun):
        resolve_run("0000", tmp_path)


def test_svg_handles_degenerate_input():
    svg = svg_plot([Curve("flat", np.arange(3.0), np.ones(3))], "t", "x", "y", [("ref", 1.0)])
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    empty = svg_plot([], "t", "x", "y")
    assert "<polyline" not in empty
