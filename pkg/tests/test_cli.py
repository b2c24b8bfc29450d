import csv
import json

import pytest

from reggecurv import cli
from reggecurv.checks import CheckResult
from reggecurv.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_PROPERTY, main
from reggecurv.studies import ConfigError, bundled_config_names, parse_config

SMALL_MESH = {"n0": 2, "levels": 2, "perturb_amplitude": 0.25, "seed": 3}


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return str(path)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_bundled_configurations_present():
    names = bundled_config_names()
    for name in ("paper_fig6", "connection_bdm", "connection_rt", "connection_bdm0", "curl", "inc",
                 "interpolate", "ops_check", "curvature_flat"):
        assert name in names


def test_flat_metric_study_has_zero_errors(tmp_path, capsys):
    assert main(["curvature", "--config", "curvature_flat", "--out", str(tmp_path)]) == EXIT_OK
    printed = capsys.readouterr().out.split()
    assert len(printed) == 2
    for path in printed:
        for row in _rows(path):
            assert float(row["l2"]) <= 1e-12 and float(row["hm1"]) <= 1e-12


def test_same_seed_gives_identical_bytes(tmp_path):
    cfg = {"metric": {"graph": "x^2/4 + x*y/8"}, "mesh": SMALL_MESH, "degrees": [1]}
    path = _write(tmp_path, cfg)
    for cmd in ("interpolate", "curvature", "connection"):
        assert main([cmd, "--config", path, "--out", str(tmp_path / "a")]) == EXIT_OK
        assert main([cmd, "--config", path, "--out", str(tmp_path / "b")]) == EXIT_OK
    a = sorted((tmp_path / "a").iterdir())
    assert len(a) == 3
    for f in a:
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_seed_override_changes_meshes(tmp_path):
    path = _write(tmp_path, {"metric": {"graph": "x^2/4"}, "mesh": SMALL_MESH, "degrees": [0]})
    main(["interpolate", "--config", path, "--out", str(tmp_path / "a")])
    main(["interpolate", "--config", path, "--out", str(tmp_path / "b"), "--seed", "99"])
    a = (tmp_path / "a" / "interpolate_k0.csv").read_text()
    b = (tmp_path / "b" / "interpolate_k0.csv").read_text()
    assert a.splitlines()[0] == b.splitlines()[0] and a != b


def test_csv_format(tmp_path):
    path = _write(tmp_path, {"metric": {"graph": "x*y/2"}, "mesh": SMALL_MESH, "degrees": [1],
                             "output": {"prefix": "run"}})
    main(["interpolate", "--config", path, "--out", str(tmp_path)])
    raw = (tmp_path / "run_k1.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    lines = raw.decode().splitlines()
    assert lines[0] == "level,n,h,ndof,l2,max,l2_eoc,max_eoc"
    assert lines[1].endswith(",,")
    assert len(lines[1].split(",")[4].replace(".", "").replace("e-", "").lstrip("0")) <= 17


def test_vtk_output(tmp_path, capsys):
    path = _write(tmp_path, {"metric": {"graph": "x*y/2"}, "mesh": SMALL_MESH, "degrees": [0],
                             "output": {"vtk": True}})
    assert main(["curvature", "--config", path, "--out", str(tmp_path)]) == EXIT_OK
    vtk = tmp_path / "curvature_k0.vtk"
    assert vtk.exists() and vtk.read_text().startswith("# vtk DataFile Version 3.0")


def test_missing_boundary_data_names_the_tag(tmp_path, capsys):
    cfg = {"metric": {"graph": "x^2/4"}, "mesh": SMALL_MESH,
           "boundary": {"dirichlet": {"bottom": "0", "right": "0"}, "neumann": {"left": "0"}}}
    assert main(["curvature", "--config", _write(tmp_path, cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "'top'" in capsys.readouterr().err


@pytest.mark.parametrize("text, fragment", [
    ('{"metric": {"graph": "x"},\n "mesh": {"n0": 0}}', ":2: at mesh/n0"),
    ('{"metric": {"graph": "x"},\n\n "colour": 1}', ":1: at (root)"),
    ('{"metric": {"graph": "x"}\n "mesh": {}}', ":2:"),
    ('{"metric": {"graph": "x +* y"}}', "metric.graph"),
])
def test_config_errors_carry_location(text, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "c.json")
    assert fragment in str(info.value)


def test_config_error_exit_codes(tmp_path, capsys):
    assert main(["curvature", "--config", str(tmp_path / "absent.json")]) == EXIT_CONFIG
    assert main(["curvature", "--config", "no_such_bundle"]) == EXIT_CONFIG
    bad = _write(tmp_path, {"metric": {"graph": "x"}, "connection": {"space": "nedelec"}})
    assert main(["connection", "--config", bad]) == EXIT_CONFIG
    assert main(["curvature", "--config", "curvature_flat", "--quad-degree", "-1"]) == EXIT_CONFIG
    assert main(["curvature", "--config", "curvature_flat", "--seed", "-5"]) == EXIT_CONFIG
    no_sigma = _write(tmp_path, {"metric": {"graph": "x"}, "mesh": SMALL_MESH})
    assert main(["curl", "--config", no_sigma, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_indefinite_metric_is_a_numerical_failure(tmp_path, capsys):
    cfg = {"metric": {"entries": ["1", "2", "1"]}, "mesh": SMALL_MESH, "degrees": [0]}
    assert main(["curvature", "--config", _write(tmp_path, cfg), "--out", str(tmp_path)]) == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


def test_ops_check_passes_and_writes_report(tmp_path, capsys):
    cfg = {"metric": {"graph": "x^2/4 - y^2/8"}, "sigma": {"entries": ["x*y", "1", "sin(y)"]},
           "mesh": {"n0": 2, "levels": 1, "perturb_amplitude": 0.25, "seed": 0}, "degrees": [0, 1]}
    assert main(["ops-check", "--config", _write(tmp_path, cfg), "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "0 failed" in out
    report = (tmp_path / "ops_check.txt").read_text().splitlines()
    assert report and all(line.startswith("level 0: PASS") for line in report)


def test_ops_check_failure_exit_code(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(cli, "run_all", lambda *a, **k: [CheckResult("forced", 1.0, 0.5)])
    assert main(["ops-check", "--config", "ops_check", "--out", str(tmp_path)]) == EXIT_PROPERTY
    assert "FAIL forced" in capsys.readouterr().out


def test_subcommand_required(capsys):
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2
