from __future__ import annotations

import json

import numpy as np
import pytest

from jumptopo.config import PhaseResult, SweepConfig, curve_metrics, default_w_grid, load_config_file
from jumptopo.errors import ConfigError
from jumptopo.jumptime import TrajectoryRecord
from jumptopo.output import CSV_COLUMNS, fmt, phase_csv, svg_plot, trajectories_jsonl


def test_default_grid_excludes_singular_point():
    grid = default_w_grid()
    assert len(grid) == 38
    assert grid[0] == 0.1 and grid[-1] == 2.0
    assert 1.0 not in grid


def test_defaults_match_reference_settings():
    cfg = SweepConfig()
    assert (cfg.n_final, cfg.n_cir, cfg.delta_p, cfg.t_final, cfg.ancilla_dim, cfg.v) == (300, 500, 0.01, 300.0, 3, 1.0)


@pytest.mark.parametrize(
    "bad",
    [
        dict(w_grid=()),
        dict(method="exact"),
        dict(rule="simpson"),
        dict(ancilla_dim=4),
        dict(n_cir=2),
        dict(n_final=0),
        dict(delta_p=0.0),
        dict(t_final=-1.0),
        dict(gamma=0.0),
        dict(delta_q=-0.1),
    ],
)
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        SweepConfig(**bad)


def test_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# settings\nn_cir = 40\nw_grid = 0.5, 1.5 2.0\ncorrected_sum = yes\nmethod = analytic  # inline\n\n")
    vals = load_config_file(path)
    assert vals == {"n_cir": 40, "w_grid": (0.5, 1.5, 2.0), "corrected_sum": True, "method": "analytic"}
    assert SweepConfig(**vals).n_cir == 40


@pytest.mark.parametrize("text", ["bogus = 1\n", "n_cir = many\n", "n_cir 40\n", "corrected_sum = maybe\n"])
def test_config_file_errors(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config_file(path)


def test_curve_metrics_step_curve():
    w = np.linspace(0.1, 2.0, 20)
    t = (w > 1).astype(float)
    m = curve_metrics(w, t)
    assert m.jump == 1.0 and m.plateau_deviation == 0.0 and m.max_reversal == 0.0 and m.step_at_transition == 1.0


def test_curve_metrics_reversal():
    w = np.array([0.2, 0.5, 0.8, 1.2, 1.5, 1.8])
    t = np.array([0.0, 0.3, 0.1, 0.9, 1.2, 1.0])
    m = curve_metrics(w, t)
    assert m.max_reversal == pytest.approx(0.2)
    with pytest.raises(ValueError):
        curve_metrics([0.9, 1.1], [0, 1])


def test_csv_layout():
    cfg = SweepConfig(w_grid=(0.5, 2.0), method="analytic")
    result = PhaseResult(rows=[(0.5, 1 / 3, -1e-20), (2.0, 1.0, 0.0)], settings=cfg)
    lines = phase_csv(result).splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[1] == "0.5,0.333333333333,-1e-20,500,0.01,0,300,300,3,analytic"
    assert len(lines) == 3


def test_fmt():
    assert fmt(3) == "3" and fmt(np.int64(4)) == "4" and fmt(0.1 + 0.2) == "0.3" and fmt("x") == "x"


def test_result_to_dict_is_json():
    result = PhaseResult(rows=[(0.5, 0.0, 0.0)], settings=SweepConfig(), skipped=[(1.0, "singular")])
    data = json.loads(json.dumps(result.to_dict()))
    assert data["settings"]["n_cir"] == 500 and data["skipped"] == [[1.0, "singular"]]


def test_jsonl_layout():
    recs = [TrajectoryRecord(seed=0, jump_events=[(0.5, 0), (2.5, 0)]), TrajectoryRecord(seed=1)]
    lines = [json.loads(x) for x in trajectories_jsonl(recs, 2.0, {"model": "m"}).splitlines()]
    assert lines[0] == {"seed": 0, "jump_events": [[0.5, 0], [2.5, 0]], "histogram": {"1": 1}}
    assert lines[1]["histogram"] == {"0": 1}
    assert lines[2]["summary"] is True and lines[2]["histogram"] == {"0": 1, "1": 1} and lines[2]["model"] == "m"


def test_svg_plot():
    svg = svg_plot([("a", [0, 1, 2], [0, 0.5, 1]), ("b", [0, 2], [1, 0])])
    assert svg.startswith("<svg") and svg.count("<polyline") == 2
