import csv
import json
import math
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from corner_cgo.cli import main
from corner_cgo.config import COMMANDS, config_from_dict, emit, load_config, save_config
from corner_cgo.errors import ConfigurationError
from corner_cgo.runner import EXIT_CHECK, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, run

GOLDEN = Path(__file__).parent / "golden"


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj, encoding="utf-8")
    return p


# -- loading and validation


def test_minimal_config_loads(tmp_path):
    cfg = load_config(write(tmp_path, {"command": "rate-sweep", "alpha": 0.5, "theta0": 1.0472}))
    assert cfg.h_grid == (0.16, 0.08, 0.04, 0.02)
    assert cfg.rate["quantity"] == "moment" and cfg.tolerances["slope_rel"] == 0.03
    assert cfg.grid_resolution == (96, 96) and cfg.threads == 0


def test_theta0_half_pi_rejected(tmp_path):
    with pytest.raises(ConfigurationError, match="theta0 must differ from π/2"):
        load_config(write(tmp_path, {"command": "rate-sweep", "theta0": 1.5708}))


def test_alpha_out_of_range_rejected(tmp_path):
    with pytest.raises(ConfigurationError, match="alpha"):
        load_config(write(tmp_path, {"command": "rate-sweep", "alpha": 2.0}))


@pytest.mark.parametrize(
    "raw,match",
    [
        ({"command": "rate-sweep", "bogus": 1}, "unknown key"),
        ({"command": "rate-sweep", "rate": {"betta": 1}}, "unknown key"),
        ({"command": "verdict", "media": {"c1": 1, "c2": 0, "gamma": 2}}, "unknown key"),
        ({"command": "nope"}, "unknown command"),
        ({"theta0": 1.0}, "command"),
        ({"command": "witness", "witness": {"a0": 1.0}}, "a0"),
        ({"command": "cgo-build", "grid_resolution": [90, 96]}, "multiple"),
        ({"command": "rate-sweep", "h_grid": [0.1, 0.1, 0.05, 0.025]}, "distinct"),
        ({"command": "rate-sweep", "rate": {"quantity": "corner-integral"}}, "media"),
        ({"command": "verdict", "media": {"c1": 0, "c2": -2}}, "rho"),
        ({"command": "verdict", "descriptor": {"value_nonzero": True, "gradient_nonzero": True, "N0": 2}}, "N0"),
        ({"command": "rate-sweep", "theta0": 2.5, "alpha": 0.9}, "alpha"),
        ({"command": "constants", "incident": {"k": 1, "terms": [[0, 1, -1]]}}, "zero"),
    ],
)
def test_invalid_configs_name_the_violation(raw, match):
    with pytest.raises(ConfigurationError, match=match):
        config_from_dict(raw)


def test_json_syntax_error_reports_line_and_column(tmp_path):
    p = write(tmp_path, '{\n  "command": "witness",\n  "alpha": ,\n}')
    with pytest.raises(ConfigurationError, match=r"cfg\.json:3:12:"):
        load_config(p)


configs = st.fixed_dictionaries(
    {"command": st.sampled_from(COMMANDS)},
    optional={
        "theta0": st.sampled_from([0.4, math.pi / 3, 1.2, 2.0]),
        "alpha": st.sampled_from([0.25, 0.5, 0.7]),
        "h": st.floats(0.01, 0.5),
        "h_grid": st.lists(st.floats(0.001, 0.5), min_size=1, max_size=5, unique=True),
        "grid_resolution": st.tuples(st.integers(2, 40).map(lambda n: 4 * n), st.integers(8, 200)).map(list),
        "media": st.fixed_dictionaries({"c1": st.floats(-2, 2), "c2": st.floats(0, 2)}),
        "incident": st.fixed_dictionaries(
            {"k": st.floats(0.5, 3), "terms": st.just([[0, 1.0, 0.0], [2, [0.5, -1.0], 0.25]])}
        ),
        "witness": st.fixed_dictionaries({"k1": st.integers(1, 5), "a0": st.sampled_from([0.5, 2.0, 3.0])}),
        "tolerances": st.fixed_dictionaries({"residual": st.floats(1e-3, 1)}),
        "threads": st.integers(0, 8),
    },
)


@given(raw=configs)
def test_emit_round_trip(raw):
    try:
        cfg = config_from_dict(raw)
    except ConfigurationError:
        return  # e.g. α θ0 ≥ π/2 for a sweep command
    again = config_from_dict(json.loads(emit(cfg)))
    assert again == cfg
    assert emit(again) == emit(cfg)


def test_save_and_load(tmp_path):
    cfg = config_from_dict({"command": "witness", "witness": {"k1": 3, "a2": -0.5}})
    save_config(cfg, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == cfg


# -- runs and exit codes


def test_witness_default_exit_zero(tmp_path, capsys):
    assert main(["witness", "--out", str(tmp_path)]) == EXIT_OK
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "OK" and man["exit_code"] == 0
    residuals = {k: v["value"] for k, v in man["checks"].items() if k != "classify_consistent"}
    assert len(residuals) == 6 and max(residuals.values()) <= 1e-12
    assert "PASS wD_dirichlet" in capsys.readouterr().out


def test_verdict_I_a_row(tmp_path):
    p = write(tmp_path, {"command": "verdict", "media": {"c1": 0.0, "c2": 0.5}})
    assert main(["verdict", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_OK
    data = (tmp_path / "o" / "verdict.csv").read_bytes()
    assert data.split(b"\r\n")[1].startswith(b"AlwaysScatters,I-a")  # RFC 4180 line ends


def test_validation_exit_code(tmp_path):
    p = write(tmp_path, {"command": "rate-sweep", "theta0": 1.5708})
    assert main(["rate-sweep", "--config", str(p), "--out", str(tmp_path)]) == EXIT_VALIDATION
    p = write(tmp_path, {"command": "witness"}, "w.json")
    assert main(["verdict", "--config", str(p), "--out", str(tmp_path)]) == EXIT_VALIDATION
    bad = write(tmp_path, "{", "bad.json")
    assert main(["witness", "--config", str(bad)]) == EXIT_VALIDATION


def test_numerical_failure_exit_code(tmp_path):
    cfg = config_from_dict({"command": "cgo-build", "q": 50.0, "h_grid": [1.0], "grid_resolution": [16, 16]})
    man = run(cfg, tmp_path, serial=True)
    assert man.exit_code == EXIT_NUMERICAL and man.status == "FAILED"
    assert "DivergenceError" in man.error
    assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "FAILED"


def test_check_failure_exit_code(tmp_path):
    cfg = config_from_dict({"command": "witness", "witness": {"k1": 3, "k2": 2}, "tolerances": {"witness": 1e-300}})
    man = run(cfg, tmp_path)
    assert man.exit_code == EXIT_CHECK and man.status == "CHECK-FAILED"


def test_rate_sweep_beta0_slope(tmp_path):
    p = write(tmp_path, {"command": "rate-sweep", "alpha": 0.5, "theta0": math.pi / 3, "rate": {"beta": 0}})
    assert main(["rate-sweep", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "o" / "rate-sweep.csv").open(newline="")))
    slopes = {float(r["measured_slope"]) for r in rows if r["quantity"] == "moment"}
    assert len(slopes) == 1
    assert abs(slopes.pop() / 4.0 - 1) <= 0.03


def test_csv_byte_identical_across_runs_and_thread_modes(tmp_path):
    raw = {"command": "cgo-build", "h_grid": [0.2, 0.1], "grid_resolution": [24, 24]}
    cfg = config_from_dict(raw)
    run(cfg, tmp_path / "a", serial=True)
    run(cfg, tmp_path / "b", threads=2)
    run(cfg, tmp_path / "c", serial=True)
    a, b, c = ((tmp_path / d / "cgo-build.csv").read_bytes() for d in "abc")
    assert a == c and a == b


def test_manifest_contents(tmp_path):
    cfg = config_from_dict({"command": "cgo-build", "h_grid": [0.2], "grid_resolution": [16, 16]})
    man = run(cfg, tmp_path, serial=True)
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["version"] and m["threads"] == 1
    assert m["config"] == cfg.to_dict()
    assert "sector_grid" in m["grid_checksums"] and "total" in m["stage_seconds"]
    assert all("source" in v for v in m["values"])
    assert m["files"] == ["cgo-build.csv", "manifest.json"]
    # the config echo is enough to rerun the same experiment
    assert config_from_dict(m["config"]) == cfg
    assert man.status in ("OK", "CHECK-FAILED")


def test_verify_lemma_small(tmp_path):
    raw = {
        "command": "verify-lemma",
        "grid_resolution": [32, 32],
        "h_grid": [0.2, 0.1],
        "lemma": {"cauchy_resolution": [64, 48]},
    }
    man = run(config_from_dict(raw), tmp_path)
    assert man.checks["gamma_bound_violations"]["passed"]
    assert {"cauchy_error", "cauchy_refinement_ratio", "smapping_slope"} <= set(man.checks)


# -- golden constants table


def _constants_rows(tmp_path):
    raw = {
        "command": "constants",
        "alpha": 0.5,
        "media": {"c1": 1.0, "c2": 0.3},
        "incident": {"k": 1.3, "terms": [[0, 0.8, 0.0], [2, 0.2, [0.1, 0.3]]]},
        "constants": {"theta0_grid": [0.4, math.pi / 3, 2.0, 2.5]},
    }
    assert run(config_from_dict(raw), tmp_path).exit_code == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "constants.csv").open(newline="")))
    return {r["quantity"]: complex(float(r["re"]), float(r["im"])) for r in rows}


def test_constants_match_golden_file(tmp_path):
    got = _constants_rows(tmp_path)
    want = {}
    with (GOLDEN / "constants.csv").open(newline="") as fh:
        for r in csv.DictReader(fh):
            want[r["quantity"]] = complex(float(r["re"]), float(r["im"]))
    assert set(got) == set(want)
    for key, w in want.items():
        g = got[key]
        assert abs(g - w) <= 1e-12 * max(abs(w), 1e-300) * 10, (key, g, w)  # 12 significant digits
