import csv
import json

import numpy as np
import pytest

from stochdice import cli
from stochdice.cli import main, render_fan_chart, resolve_settings
from stochdice.simulate import OUTPUT_VARIABLES

SMALL = ["N=6", "k-nodes=3", "other-nodes=2", "a-nodes=3", "restarts=1"]


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def a1_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("a1")
    assert main(["run", "--out", str(out), "--svg", "scenario=A1", "trajectories=20",
                 "seed=42", *SMALL]) == 0
    return out


def test_rerun_is_byte_identical(a1_run, tmp_path):
    assert main(["run", "--out", str(tmp_path), "--svg", "scenario=A1", "trajectories=20",
                 "seed=42", *SMALL]) == 0
    first = json.loads((a1_run / "manifest.json").read_text())
    second = json.loads((tmp_path / "manifest.json").read_text())
    assert first["files"] == second["files"]
    assert first["config_hash"] == second["config_hash"]
    for name in first["files"]:
        assert (a1_run / name).read_bytes() == (tmp_path / name).read_bytes()


def test_manifest_lists_outputs(a1_run):
    m = json.loads((a1_run / "manifest.json").read_text())
    for name in ("config.ini", "reference.csv", "trajectories.csv", "bands.csv"):
        assert name in m["files"]
    assert set(m["timings"]) >= {"reference", "backward_induction", "simulation"}
    assert m["scenario"] == "A1" and m["settings"]["seed"] == 42


def test_saved_config_reproduces_settings(a1_run):
    s = resolve_settings(a1_run / "config.ini")
    assert s.params.N == 6 and s.seed == 42 and s.trajectories == 20 and s.k_nodes == 3


def test_deterministic_band_has_zero_width(tmp_path):
    assert main(["run", "--out", str(tmp_path), "scenario=deterministic", "trajectories=5",
                 *SMALL]) == 0
    for var in OUTPUT_VARIABLES:
        rows = _rows(tmp_path / f"band_{var}.csv")
        data = np.array(rows[1:], dtype=float)
        np.testing.assert_array_equal(data[:, 1], data[:, 2])
        np.testing.assert_array_equal(data[:, 2], data[:, 3])
        np.testing.assert_array_equal(data[:, 2], data[:, 4])


def test_report_periods_limit_rows(tmp_path):
    assert main(["run", "--out", str(tmp_path), "scenario=C", "trajectories=2",
                 "n-periods=12", "report-periods=8", "restarts=1"]) == 0
    rows = _rows(tmp_path / "band_TATM.csv")
    assert [int(r[0]) for r in rows[1:]] == list(range(9))
    assert len(_rows(tmp_path / "reference.csv")) == 10
    long = _rows(tmp_path / "trajectories.csv")
    assert max(int(r[2]) for r in long[1:]) == 8


def test_unknown_key_is_named(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path), "damage.pi3=1"]) == 2
    assert "pi3" in capsys.readouterr().err
    ini = tmp_path / "bad.ini"
    ini.write_text("[run]\nscenari = A1\n", encoding="utf-8")
    assert main(["run", "--config", str(ini), "--out", str(tmp_path)]) == 2
    assert "scenari" in capsys.readouterr().err


def test_bad_value_is_named(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path), "N=forty"]) == 2
    assert "N" in capsys.readouterr().err


def test_precedence():
    s = resolve_settings(None, fast=True, overrides=["trajectories=7"], seed=3)
    assert s.params.N == 40 and s.k_nodes == 5 and s.other_nodes == 3
    assert s.trajectories == 7 and s.seed == 3
    assert resolve_settings(None, fast=True).trajectories == 200


def test_stage_failure_exit_code(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise FloatingPointError("no convergence")

    monkeypatch.setattr(cli, "backward_induction", boom)
    assert main(["run", "--out", str(tmp_path), "scenario=B", *SMALL]) == 1
    assert "backward_induction" in capsys.readouterr().err


# -- fan charts -----------------------------------------------------------------

def test_one_chart_per_variable(a1_run):
    charts = sorted(a1_run.glob("fan_*.svg"))
    assert len(charts) == 11
    for path in charts:
        text = path.read_text()
        assert text.startswith("<svg") and text.rstrip().endswith("</svg>")
        assert "stroke-dasharray" in text
        assert "<polygon" in text
        for token in ("href", "<script", "url(", "@import", "<image"):
            assert token not in text


def test_fan_subcommand_on_combined_file(a1_run, tmp_path):
    out = tmp_path / "k.svg"
    assert main(["fan", str(a1_run / "bands.csv"), "K", str(out)]) == 0
    assert "2015" in out.read_text()


def test_missing_column_lists_available(a1_run, tmp_path, capsys):
    assert main(["fan", str(a1_run / "bands.csv"), "GDP", str(tmp_path / "x.svg")]) == 2
    err = capsys.readouterr().err
    assert "GDP" in err and "TATM" in err


def test_zero_width_band_renders(tmp_path):
    band = tmp_path / "flat.csv"
    band.write_text("t,q025,mean,q975,deterministic\n0,1,1,1,1\n1,1,1,1,1\n", encoding="utf-8")
    path = render_fan_chart(band, "K", tmp_path / "flat.svg")
    text = path.read_text()
    assert "nan" not in text.lower() and "inf" not in text.lower()
