import csv
import json

import pytest
from hypothesis import given, settings, strategies as st

from yamabe_blowup import cli
from yamabe_blowup import curvature as cv
from yamabe_blowup import reduced_energy as re


def rep_hash(path):
    return json.loads((path / "landscape.json").read_text())["config_hash"]


def _run(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path)])


def test_constants_report(tmp_path):
    assert _run(tmp_path, "constants") == 0
    rows = list(csv.reader(open(tmp_path / "constants.csv")))
    assert rows[0][0].startswith("# yamabe_blowup")
    table = {r[0]: r for r in rows[2:]}
    assert table["C"][-1] == "PASS" and float(table["C"][1]) > 0
    assert float(table["I1"][3]) < 1e-8
    brows = list(csv.reader(open(tmp_path / "constants_B.csv")))[2:]
    assert float(brows[0][0]) == 0.0 and float(brows[0][1]) == 0.0


def test_landscape_marker_inside(tmp_path):
    C = re.const_C(8)
    ph = -C / (4 * 2.0 ** 4)
    assert _run(tmp_path, "landscape", "--set", f"phi={ph!r}", "--lambda-a", "0.5", "--lambda-b", "5") == 0
    rep = json.loads((tmp_path / "landscape.json").read_text())["payload"]
    assert rep["interior"] and 0.5 < rep["lambda_max"] < 5
    assert rep["lambda_star_closed"] == pytest.approx(2.0, rel=1e-10)
    svg = (tmp_path / "landscape.svg").read_text()
    assert "lambda*" in svg and "<svg" in svg and rep_hash(tmp_path) in svg


def test_corrector_cached_identical_bytes(tmp_path, capsys):
    assert _run(tmp_path, "corrector") == 0
    first = (tmp_path / "corrector.json").read_bytes()
    assert _run(tmp_path, "corrector") == 0
    assert "served from cache" in capsys.readouterr().out
    assert (tmp_path / "corrector.json").read_bytes() == first


def test_profile_and_curvature_file(tmp_path):
    c = cv.random_admissible(3, 1.0, 8)
    path = tmp_path / "curv.json"
    cv.save_curvature(c, path)
    assert _run(tmp_path, "profile", "--set", f"curvature_file={json.dumps(str(path))}") == 0
    rep = json.loads((tmp_path / "profile.json").read_text())
    assert rep["payload"]["min"] > 0 and rep["config"]["curvature_file"] == str(path)


def test_usage_errors(tmp_path):
    assert _run(tmp_path, "nonsense") == 2
    assert _run(tmp_path, "constants", "--eps-min", "0.5", "--eps-max", "0.1") == 2
    assert _run(tmp_path, "constants", "--set", "bogus=1") == 2
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    assert _run(tmp_path, "constants", "--config", str(bad)) == 2


def test_config_file_and_flag_override(tmp_path):
    cfg = cli.StudyConfig(n=9, seed=4)
    path = tmp_path / "cfg.json"
    path.write_text(cfg.to_json())
    args = cli.build_parser().parse_args(["constants", "--config", str(path), "--seed", "7"])
    got = cli.resolve_config(args)
    assert got.n == 9 and got.seed == 7


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 20), st.integers(0, 10 ** 6), st.floats(0.01, 100), st.floats(1e-9, 1e-3))
def test_config_roundtrip(n, seed, scale, eps_min):
    cfg = cli.StudyConfig(n=n, seed=seed, scale=scale, eps_min=eps_min)
    back = cli.StudyConfig.from_mapping(json.loads(cfg.to_json()))
    assert back == cfg and back.hash() == cfg.hash()


def test_hash_ignores_output_dir():
    assert cli.StudyConfig(out="a").hash() == cli.StudyConfig(out="b").hash()
    assert cli.StudyConfig(seed=2).hash() != cli.StudyConfig().hash()


def test_every_file_embeds_stamp(tmp_path):
    assert _run(tmp_path, "constants") == 0
    h = cli.StudyConfig(out=str(tmp_path)).hash()
    for f in tmp_path.glob("*.*"):
        text = f.read_text()
        assert h in text and cli.__version__ in text
