from __future__ import annotations

import json
import math
from pathlib import Path

import pytest

from squeezedbath.cli import (
    EXIT_CONFIG,
    EXIT_FLAGGED,
    EXIT_OK,
    EXIT_RUNTIME,
    SCHEMAS,
    ConfigError,
    grid_values,
    main,
    parse_config,
    run,
)
from squeezedbath.io import data_section, from_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _run_cli(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# --------------------------------------------------------------------------
# configuration


def test_defaults_fill_every_schema_key():
    for command, schema in SCHEMAS.items():
        cfg = parse_config(command, {})
        assert set(cfg.values) == set(schema)


def test_negative_gamma_names_constraint():
    with pytest.raises(ConfigError, match="gamma > 0") as exc:
        parse_config("single-mode", {"gamma": -1})
    assert exc.value.key == "gamma"


def test_unknown_key_is_rejected():
    with pytest.raises(ConfigError, match="unknown key") as exc:
        parse_config("single-mode", {"gama": 1})
    assert exc.value.key == "gama"


def test_invalid_json_text():
    with pytest.raises(ConfigError, match="invalid JSON"):
        parse_config("single-mode", "{not json")


def test_overrides_parse_json_and_dotted_keys():
    cfg = parse_config("ep-scan", {}, ["gammas=[2.0]", "m1_grid.count=5"])
    assert cfg["gammas"] == [2.0]
    assert len(grid_values(cfg["m1_grid"])) == 5
    assert grid_values(cfg["m1_grid"])[0] == -1.2


def test_complex_value_forms():
    assert parse_config("single-mode", {"M": 0.3})["M"] == [0.3, 0.0]
    assert parse_config("single-mode", {"M": [0.1, -0.2]})["M"] == [0.1, -0.2]
    with pytest.raises(ConfigError):
        parse_config("single-mode", {"M": "big"})


def test_physical_bound_grid():
    cfg = parse_config("purity-scan", {})
    R = grid_values(cfg["R_grid"], bound=math.sqrt(0.75))
    assert R[-1] == math.sqrt(0.75) and len(R) == 51


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_are_valid(path):
    doc = json.loads(path.read_text())
    command = {
        "single_mode": "single-mode",
        "two_mode_current": "two-mode",
        "acceptance_evolve": "evolve",
        "fig3_purity": "purity-scan",
        "entropy_scan": "entropy-scan",
    }.get(path.stem, "ep-scan")
    parse_config(command, doc)


# --------------------------------------------------------------------------
# commands


def test_single_mode_output(capsys):
    code, out, _ = _run_cli(capsys, ["single-mode", "--config", str(CONFIGS / "single_mode.json")])
    assert code == EXIT_OK
    res = from_csv(out)
    assert res.column("n_closed") == [0.5]
    assert res.column("max_abs_diff")[0] <= 1e-10
    assert res.metadata["config"]["command"] == "single-mode"
    assert res.metadata["failures"] == 0
    assert len(res.sections["covariance"][1]) == 4


def test_bad_config_exit_code_and_stderr(capsys):
    code, out, err = _run_cli(capsys, ["single-mode", "gamma=-1"])
    assert code == EXIT_CONFIG and out == ""
    record = json.loads(err)
    assert record["error"] == "config" and record["key"] == "gamma"
    assert "gamma > 0" in record["message"]


def test_missing_config_file(capsys, tmp_path):
    code, _, err = _run_cli(capsys, ["single-mode", "--config", str(tmp_path / "none.json")])
    assert code == EXIT_CONFIG
    assert "cannot read" in json.loads(err)["message"]


def test_runtime_error_exit_code(capsys):
    # squeezing strong enough to make the drift unstable
    code, _, err = _run_cli(capsys, ["single-mode", "gamma=2", "M=3", "N=3"])
    assert code == EXIT_RUNTIME
    assert json.loads(err)["error"] == "UnstableDriftError"


def test_purity_scan_flags_unphysical_points(capsys):
    code, out, err = _run_cli(capsys, ["purity-scan", "gammas=[1.0]", "R_grid=[0.5, 0.9]"])
    assert code == EXIT_FLAGGED
    res = from_csv(out)
    assert res.column("error")[1].startswith("R = 0.9 exceeds") or "exceeds" in res.column("error")[1]
    assert json.loads(err)["error"] == "flagged"


def test_purity_scan_reaches_physical_bound(capsys):
    code, out, _ = _run_cli(capsys, ["purity-scan", "--config", str(CONFIGS / "fig3_purity.json")])
    assert code == EXIT_OK
    res = from_csv(out)
    assert max(res.column("R")) == math.sqrt(0.75)
    for g in (0.5, 1.0, 2.0):
        p = [pu for gg, pu in zip(res.column("gamma"), res.column("purity")) if gg == g]
        assert all(b > a for a, b in zip(p, p[1:]))


def test_single_mode_ep_scan(capsys):
    code, out, _ = _run_cli(capsys, ["ep-scan", "--config", str(CONFIGS / "acceptance_ep_single.json")])
    assert code == EXIT_OK
    res = from_csv(out)
    assert res.column("M", section="contours")[0] == pytest.approx(0.5, abs=1e-6)


def test_evolve_without_noise_stays_zero():
    cfg = parse_config("evolve", {"initial": "zero", "diffusion": "none", "times": [0, 1, 2]})
    res = run(cfg)
    values = [v for r in res.rows for c, v in zip(res.columns, r) if c.startswith("s")]
    assert all(v == 0.0 for v in values)


def test_evolve_reaches_closed_form(capsys):
    code, out, _ = _run_cli(capsys, ["evolve", "--config", str(CONFIGS / "acceptance_evolve.json")])
    assert code == EXIT_OK
    res = from_csv(out)
    assert res.column("s22_re")[-1] == pytest.approx(0.5, abs=1e-7)


def test_two_mode_current_columns(capsys):
    code, out, _ = _run_cli(capsys, ["two-mode", "--config", str(CONFIGS / "two_mode_current.json")])
    assert code == EXIT_OK
    res = from_csv(out)
    assert res.column("energy_current")[0] == pytest.approx(res.column("thermal_current_formula")[0], rel=1e-10)


def test_convention_flag_overrides_config(capsys):
    _, out, _ = _run_cli(capsys, ["entropy-scan", "--convention", "literal", "m_grid=[0.01]"])
    res = from_csv(out)
    assert res.metadata["config"]["convention"] == "literal"
    assert res.column("sigma14_numeric_re")[0] == pytest.approx(res.column("sigma14_closed_re")[0], abs=1e-14)


def test_json_output_to_file(capsys, tmp_path):
    target = tmp_path / "o.json"
    code, out, _ = _run_cli(capsys, ["single-mode", "--format", "json", "--out", str(target)])
    assert code == EXIT_OK and out == ""
    doc = json.loads(target.read_text())
    assert doc["columns"][0] == "omega"


def test_unwritable_output(capsys, tmp_path):
    code, _, err = _run_cli(capsys, ["single-mode", "--out", str(tmp_path / "no" / "x.csv")])
    assert code == EXIT_RUNTIME
    assert json.loads(err)["error"] == "io"


def test_data_sections_are_deterministic(capsys):
    argv = ["entropy-scan", "--config", str(CONFIGS / "entropy_scan.json")]
    _, a, _ = _run_cli(capsys, argv)
    _, b, _ = _run_cli(capsys, argv)
    assert data_section(a) == data_section(b)
