import json
import math

import pytest

from excitonsim import cli


def run_cli(argv):
    return cli.main(argv)


def read_csv(path):
    meta, columns, rows = {}, None, []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
        elif columns is None:
            columns = line.split(",")
        else:
            rows.append(line.split(","))
    return meta, columns, rows


def chain_config(tmp_path, **extra):
    config = {
        "sites": 3,
        "couplings": [[0, 1, 1.0], [1, 2, 1.0]],
        "dephasing": 0.5,
        "exit_site": 2,
        "sink_rate": 1.0,
        "alphas": [0.1, 0.2, 0.4],
        "t_final": 20 * math.pi,
        "time_points": 121,
    }
    config.update(extra)
    path = tmp_path / "network.json"
    path.write_text(json.dumps(config))
    return path


def test_dimer_command_schema_and_goldens(tmp_path):
    out = tmp_path / "dimer.csv"
    assert run_cli(["dimer", "--alpha", "0.3", "--gt-steps", "97",
                    "--out", str(out)]) == 0
    meta, columns, rows = read_csv(out)
    assert meta["tool"] == "excitonsim"
    assert "version" in meta
    assert columns == ["gt", "concurrence_full", "concurrence_p1",
                       "concurrence_p01", "concurrence_decohered"]
    assert len(rows) == 97

    by_gt = {float(r[0]): [float(v) for v in r[1:]] for r in rows}
    first = by_gt[0.0]
    assert all(abs(v) < 1e-12 for v in first)
    quarter = min(by_gt, key=lambda g: abs(g - math.pi / 4))
    assert quarter == pytest.approx(math.pi / 4, abs=1e-12)
    c_full, c_p1, c_p01, c_dec = by_gt[quarter]
    assert c_full <= 1e-7
    assert c_p1 == pytest.approx(1.0, abs=1e-9)
    assert c_p01 == pytest.approx(0.082569, abs=1e-6)
    assert c_dec == pytest.approx(0.082569, abs=1e-6)


def test_dimer_byte_identical(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    run_cli(["dimer", "--alpha", "0.2", "--gt-steps", "33", "--out", str(out1)])
    run_cli(["dimer", "--alpha", "0.2", "--gt-steps", "33", "--out", str(out2)])
    assert out1.read_bytes() == out2.read_bytes()


def test_cmax_scan_monotone(tmp_path):
    out = tmp_path / "scan.csv"
    assert run_cli(["cmax-scan", "--alpha", "0.3", "0.5", "--n-max", "5",
                    "--out", str(out)]) == 0
    _, columns, rows = read_csv(out)
    assert columns == ["alpha", "n_levels", "max_concurrence"]
    values = {}
    for alpha_s, n_s, c_s in rows:
        values.setdefault(float(alpha_s), []).append((int(n_s), float(c_s)))
    for alpha, series in values.items():
        series.sort()
        cs = [c for _, c in series]
        assert all(b < a for a, b in zip(cs, cs[1:]))
    assert values[0.3][0] == (2, pytest.approx(0.09 / 1.09, abs=1e-9))
    assert values[0.3][1] == (3, pytest.approx(0.017935, abs=1e-6))


def test_fn_table_json(tmp_path):
    out = tmp_path / "fn.json"
    assert run_cli(["fn-table", "--out", str(out), "--format", "json"]) == 0
    payload = json.loads(out.read_text())
    assert payload["command"] == "fn-table"
    assert payload["max_abs_delta"] <= 5e-4
    refs = (1.0, 0.7071, 0.3819, 0.1768, 0.0734, 0.0280)
    for row, ref in zip(payload["rows"], refs):
        assert row[1] == pytest.approx(ref, abs=5e-4)
        assert row[4] == 0  # no precision-loss flag


def test_fn_table_tolerance_exit_code(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "FN_TOLERANCE", 1e-16)
    assert run_cli(["fn-table", "--n-max", "3", "--out",
                    str(tmp_path / "fn.csv")]) == 3


def test_transport_command_json(tmp_path):
    config = chain_config(tmp_path)
    out = tmp_path / "report.json"
    assert run_cli(["transport", "--config", str(config),
                    "--out", str(out), "--format", "json"]) == 0
    payload = json.loads(out.read_text())
    assert payload["version"]
    assert payload["config"]["sites"] == 3
    reports = payload["reports"]
    assert [r["alpha"] for r in reports] == [0.1, 0.2, 0.4]
    for rep in reports:
        assert 0.0 <= rep["efficiency_full"] <= 1.0
        assert 0.0 <= rep["efficiency_restricted"] <= 1.0
    coeffs = payload["alpha_sq_scaling_coefficients"]
    assert max(coeffs) <= 2.0 * min(coeffs)
    assert payload["alpha_sq_fit_coefficient"] == pytest.approx(coeffs[0])


def test_transport_zero_alpha(tmp_path):
    config = chain_config(tmp_path, alphas=[0.0], t_final=5.0, time_points=11)
    out = tmp_path / "zero.json"
    assert run_cli(["transport", "--config", str(config),
                    "--out", str(out), "--format", "json"]) == 0
    rep = json.loads(out.read_text())["reports"][0]
    assert rep["efficiency_full"] == pytest.approx(0.0, abs=1e-12)
    assert rep["relative_difference"] == 0.0


def test_transport_fixed_step_reproducible(tmp_path):
    config = chain_config(tmp_path, alphas=[0.2], t_final=6.0, time_points=13)
    out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
    for out in (out1, out2):
        assert run_cli(["transport", "--config", str(config), "--fixed-step",
                        "--out", str(out), "--format", "json"]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_transport_config_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  \"sites\": 3,\n")
    assert run_cli(["transport", "--config", str(bad)]) == 2
    assert "line" in capsys.readouterr().err


def test_transport_missing_key(tmp_path):
    bad = tmp_path / "incomplete.json"
    bad.write_text(json.dumps({"sites": 2, "couplings": [[0, 1, 1.0]]}))
    assert run_cli(["transport", "--config", str(bad)]) == 2


def test_transport_missing_file():
    assert run_cli(["transport", "--config", "/nonexistent/config.json"]) == 2


def test_unknown_argument_exits_2():
    with pytest.raises(SystemExit) as err:
        run_cli(["dimer", "--bogus"])
    assert err.value.code == 2


def test_console_entry_point(tmp_path):
    import subprocess
    import sys

    result = subprocess.run(
        [sys.executable, "-m", "excitonsim.cli", "dimer", "--alpha", "0.1",
         "--gt-steps", "5"],
        capture_output=True, text=True, check=True)
    assert "concurrence_p1" in result.stdout
