import json
import math

import pytest

from enclosure import cli, stationary
from enclosure.errors import ConvergenceError
from enclosure.reconstruct import LogSeries
from enclosure.scene import Scene, cfg1, load_scene


@pytest.fixture
def scene_file(tmp_path):
    path = tmp_path / "cfg1.json"
    path.write_text(cfg1().to_json())
    return path


def _run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_stationary(capsys, scene_file):
    code, out, _ = _run(capsys, "stationary", scene_file)
    assert code == 0
    doc = json.loads(out)
    assert doc["lengths"]["l0"] == pytest.approx(2.0, abs=1e-12)
    assert len(doc["pairs"]) == 1
    assert doc["pairs"][0]["nondegenerate"] is True
    assert doc["pairs"][0]["det_hess_L"] == pytest.approx(36.0, rel=1e-10)


def test_asympt(capsys, scene_file, tmp_path):
    code, out, _ = _run(capsys, "asympt", scene_file, "--T", 5, "--output-dir", tmp_path / "o")
    assert code == 0
    doc = json.loads(out)
    assert doc["T0"] == pytest.approx(-1 / 24, rel=1e-14)
    assert doc["classification"] == "minus_infinity"
    assert json.loads((tmp_path / "o" / "asympt.json").read_text()) == doc


def test_report(capsys, scene_file, tmp_path):
    code, out, _ = _run(capsys, "report", scene_file, "--T", 5, "--tau-grid", "10:40:2",
                        "--output-dir", tmp_path)
    assert code == 0
    doc = json.loads(out)
    assert doc["l0_relative_error"] < 0.02
    assert doc["reconstruction"]["sign_class"] == "minus"
    assert doc["reconstruction"]["classification"] == "minus_infinity"
    assert doc["sign_consistent"] and not doc["forward_approximate"]
    assert len(LogSeries.from_csv(tmp_path / "forward.csv")) == 16


def test_forward_csv_feeds_reconstruct(capsys, scene_file, tmp_path):
    code, out, _ = _run(capsys, "forward", scene_file, "--output-dir", tmp_path)
    assert code == 0
    series = LogSeries.from_csv(out)
    assert len(series) == 9 and set(series.signs.tolist()) == {-1}
    again = LogSeries.from_csv(tmp_path / "forward.csv")
    assert again.log_mags.tobytes() == series.log_mags.tobytes()
    code, out, _ = _run(capsys, "reconstruct", "--input", tmp_path / "forward.csv", "--T", 3)
    assert code == 0
    doc = json.loads(out)
    assert doc["l0_hat"] == pytest.approx(2.0, rel=0.02)
    assert doc["classification"] == "zero"


def test_oracle(capsys, scene_file):
    code, out, _ = _run(capsys, "oracle", scene_file, "--tau-grid", "12,16")
    assert code == 0
    table = json.loads(out)["tables"][0]
    assert table["cavity_id"] == "c1"
    assert [r["tau"] for r in table["rows"]] == [12.0, 16.0]
    assert all(0.5 < r["ratio"] < 1.0 for r in table["rows"])


@pytest.mark.parametrize("text", ["{", '{"gamma0": 1.0}'])
def test_malformed_scene_exits_2(capsys, tmp_path, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    code, _, err = _run(capsys, "stationary", path)
    assert code == 2 and err.startswith("error:")


def test_invalid_scene_exits_2(capsys, tmp_path):
    path = tmp_path / "margin.json"
    path.write_text(cfg1("neumann_plus", 1.0).to_json())
    code, _, err = _run(capsys, "asympt", path)
    assert code == 2 and "margin" in err


def test_missing_scene_exits_2(capsys):
    assert _run(capsys, "reconstruct")[0] == 2
    assert _run(capsys, "stationary", "/nonexistent/scene.json")[0] == 2


def test_nonconvergence_exits_3(capsys, scene_file, monkeypatch):
    def stall(scene):
        raise ConvergenceError("stalled")

    monkeypatch.setattr(stationary, "find_pairs", stall)
    code, _, err = _run(capsys, "asympt", scene_file)
    assert code == 3 and "stalled" in err


def test_tau_grid_parsing():
    assert cli.parse_tau_grid("8:40:4", []) == [8.0 + 4 * k for k in range(9)]
    assert cli.parse_tau_grid("8, 12,16", []) == [8.0, 12.0, 16.0]
    assert cli.parse_tau_grid(None, [1.0]) == [1.0]
    assert cli.parse_tau_grid("0.1:0.3:0.1", []) == pytest.approx([0.1, 0.2, 0.3])


def test_scene_round_trip(tmp_path):
    sc = cfg1("neumann_plus", 0.25, 0.5, gamma0=2.0)
    path = tmp_path / "s.json"
    path.write_text(sc.to_json())
    back = load_scene(path)
    assert back.to_dict() == sc.to_dict()
    assert Scene.from_dict(json.loads(back.to_json())).to_dict() == sc.to_dict()
    assert math.isclose(back.gamma0, 2.0)
