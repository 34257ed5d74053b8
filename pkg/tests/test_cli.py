import json
import subprocess
import sys

import pytest

from qchilbert.cli import (DEFAULT_NUMERICS, main, make_fixture, parse_problem, problem_from_dict,
                           write_fixture)
from qchilbert.errors import InputError

UNIT = {"parametric": {"kind": "circle", "params": {"center": [0.0, 0.0], "radius": 1.0}}}


def write(tmp_path, obj, name="p.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj, indent=2))
    return path


@pytest.fixture(scope="module")
def unit_fixture(tmp_path_factory):
    out = tmp_path_factory.mktemp("unit-disk")
    write_fixture("unit-disk", out)
    return out


class TestParsing:
    def test_malformed_json_names_line(self, tmp_path):
        path = write(tmp_path, '{\n  "kind": "hilbert",\n  "phi": cos\n}\n')
        with pytest.raises(InputError, match="line 3"):
            parse_problem(path)

    def test_unknown_numerics_key_names_line(self, tmp_path):
        text = json.dumps({"kind": "dirichlet", "domain": UNIT, "phi": "1",
                           "numerics": {"modez": 64}}, indent=2)
        with pytest.raises(InputError, match=r"line \d+: unknown numerics key 'modez'"):
            problem_from_dict(json.loads(text), text)

    @pytest.mark.parametrize("key, value", [("fourier_modes", 100), ("grid_size", 0),
                                            ("tol", 2.0), ("radii", [0.5, 0.9])])
    def test_invalid_numerics(self, key, value):
        with pytest.raises(InputError):
            problem_from_dict({"kind": "dirichlet", "domain": UNIT, "phi": "1",
                               "numerics": {key: value}})

    def test_defaults_fill_missing_numerics(self):
        spec = problem_from_dict({"kind": "dirichlet", "domain": UNIT, "phi": "1",
                                  "numerics": {"fourier_modes": 64}})
        assert spec.numerics["fourier_modes"] == 64
        assert spec.numerics["grid_size"] == DEFAULT_NUMERICS["grid_size"]

    def test_kind_mismatch_and_unknown_kind(self):
        with pytest.raises(InputError, match="does not match"):
            problem_from_dict({"kind": "dirichlet", "domain": UNIT}, kind="hilbert")
        with pytest.raises(InputError, match="unknown problem kind"):
            problem_from_dict({"kind": "robin", "domain": UNIT})

    def test_wrong_version_and_missing_domain(self):
        with pytest.raises(InputError, match="version"):
            problem_from_dict({"version": 2, "kind": "hilbert", "domain": UNIT})
        with pytest.raises(InputError, match="domain"):
            problem_from_dict({"kind": "hilbert"})

    def test_serialization_roundtrip(self):
        obj = make_fixture("unit-disk")["hilbert-identity.json"]
        spec = problem_from_dict(obj)
        assert problem_from_dict(spec.to_json()) == spec


class TestMain:
    def test_missing_file_exits_2(self, tmp_path, capsys):
        assert main(["solve-hilbert", "--input", str(tmp_path / "none.json")]) == 2
        assert "not found" in capsys.readouterr().err

    def test_parse_error_exits_2(self, tmp_path, capsys):
        path = write(tmp_path, '{"kind": "hilbert",\n "domain": }')
        assert main(["solve-hilbert", "--input", str(path)]) == 2
        assert "line 2" in capsys.readouterr().err

    def test_unknown_fixture_exits_2(self, tmp_path):
        assert main(["fixtures", "annulus", "--out", str(tmp_path)]) == 2

    def test_non_power_of_two_flag_exits_2(self, unit_fixture):
        assert main(["solve-dirichlet", "--input", str(unit_fixture / "dirichlet-cos.json"),
                     "--modes", "100"]) == 2

    def test_fixture_files(self, unit_fixture):
        names = sorted(p.name for p in unit_fixture.iterdir())
        assert names == sorted(make_fixture("unit-disk"))

    @pytest.mark.parametrize("command, name", [
        ("solve-hilbert", "hilbert-identity.json"),
        ("solve-hilbert", "hilbert-negative.json"),
        ("solve-dirichlet", "dirichlet-cos.json"),
        ("solve-neumann", "neumann-cos.json"),
        ("solve-directional", "directional-sin.json"),
        ("solve-poincare", "poincare-b2.json"),
        ("capacity", "capacity-circle.json"),
    ])
    def test_unit_disk_fixtures_pass(self, unit_fixture, tmp_path, capsys, command, name):
        assert main([command, "--input", str(unit_fixture / name), "--out", str(tmp_path)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["verdict"] == "pass"
        assert json.loads((tmp_path / "report.json").read_text()) == report
        assert set(json.loads((tmp_path / "timings.json").read_text()))

    def test_field_csv(self, unit_fixture, tmp_path):
        main(["solve-hilbert", "--input", str(unit_fixture / "hilbert-identity.json"),
              "--out", str(tmp_path)])
        lines = (tmp_path / "field.csv").read_text().splitlines()
        assert lines[0] == "x,y,u,v"
        x, y, u, v = map(float, lines[5].split(","))
        assert (u, v) == pytest.approx((x, y), abs=1e-8)

    def test_text_report(self, unit_fixture, capsys):
        assert main(["solve-dirichlet", "--input", str(unit_fixture / "dirichlet-cos.json"),
                     "--report", "text"]) == 0
        assert capsys.readouterr().out.startswith("dirichlet: PASS")

    def test_wrong_subcommand_for_file(self, unit_fixture):
        assert main(["solve-neumann", "--input", str(unit_fixture / "dirichlet-cos.json")]) == 2

    def test_unmet_tolerance_exits_3(self, tmp_path):
        obj = {"kind": "hilbert", "domain": UNIT, "lambda": "1", "phi": "cos(theta)",
               "numerics": {"fourier_modes": 64, "residual_tol": 1e-30}}
        assert main(["solve-hilbert", "--input", str(write(tmp_path, obj))]) == 3


def test_repeated_runs_are_byte_identical(unit_fixture, tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / str(k)
        main(["solve-neumann", "--input", str(unit_fixture / "neumann-cos.json"), "--out", str(out)])
        outs.append(((out / "report.json").read_bytes(), (out / "field.csv").read_bytes()))
    assert outs[0] == outs[1]


def test_module_entry_point(unit_fixture):
    proc = subprocess.run([sys.executable, "-m", "qchilbert", "solve-hilbert", "--input",
                           str(unit_fixture / "hilbert-identity.json"), "--report", "text"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("hilbert: PASS")
