import csv
import json
import math

import pytest

from bernoulli_lab.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    SWEEP_CAP,
    expand_sweep,
    main,
    normalize_config,
)
from bernoulli_lab.errors import ConfigInvalid

ZERO = {"domain": {"h": 1 / 16}, "boundary": {"preset": "zero"}, "lambda_plus": 2, "lambda_minus": 1}
SLAB = {
    "domain": {"h": 1 / 32},
    "boundary": {"preset": "slab", "params": {"b": 0.5}},
    "lambda_plus": 2,
    "lambda_minus": 1,
}


def _write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc), encoding="utf-8")
    return str(p)


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def zero_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("zero")
    out = tmp / "out"
    code = main(["run", _write(tmp, "zero.json", ZERO), "--out", str(out)])
    return code, out


def test_zero_preset(zero_run):
    code, out = zero_run
    assert code == EXIT_OK
    res = json.loads((out / "result.json").read_text(encoding="utf-8"))
    assert res["energy"]["total"] == pytest.approx(math.pi / 2, abs=3 / 16)
    assert res["free_boundary"]["count"] == 0
    assert res["cone"]["no_contact"]
    for name in ("phi.fbfield", "u.fbfield", "sigma.csv", "blowup.csv"):
        assert (out / name).exists()


def test_csv_layout(zero_run):
    _, out = zero_run
    sigma = _read_csv(out / "sigma.csv")
    assert sigma[0] == ["rho", "s_rho", "violations"]
    blow = _read_csv(out / "blowup.csv")
    assert blow[0] == ["j", "r_j", "uniform_dist", "h1_seminorm", "fit_c", "fit_residual"]
    raw = (out / "sigma.csv").read_bytes()
    assert b"\r\n" not in raw and raw.endswith(b"\n")


def test_result_json_is_sorted_and_indented(zero_run):
    _, out = zero_run
    text = (out / "result.json").read_text(encoding="utf-8")
    doc = json.loads(text)
    assert text == json.dumps(doc, sort_keys=True, indent=2) + "\n"


def test_run_is_deterministic(tmp_path):
    cfg = _write(tmp_path, "slab.json", SLAB)
    for k in (1, 2):
        assert main(["--seed", "5", "run", cfg, "--out", str(tmp_path / f"o{k}")]) == EXIT_OK
    a = (tmp_path / "o1" / "result.json").read_bytes()
    b = (tmp_path / "o2" / "result.json").read_bytes()
    assert a == b
    assert (tmp_path / "o1" / "u.fbfield").read_bytes() == (tmp_path / "o2" / "u.fbfield").read_bytes()


def test_seed_override(tmp_path):
    cfg = normalize_config({**ZERO, "seed": 3}, seed=11)
    assert cfg["seed"] == 11
    assert normalize_config({**ZERO, "seed": 3})["seed"] == 3


def test_lambda_ordering_rejected(tmp_path, capsys):
    cfg = _write(tmp_path, "bad.json", {**ZERO, "lambda_plus": 1, "lambda_minus": 2})
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "0 < lambda_minus < lambda_plus" in err


@pytest.mark.parametrize(
    "doc",
    [
        {**ZERO, "colour": "red"},
        {**ZERO, "domain": {"h": 1 / 16, "shape": "cube"}},
        {k: v for k, v in ZERO.items() if k != "lambda_plus"},
        {**ZERO, "boundary": {"preset": "wedge"}},
        {**ZERO, "blowup": {"radii": [0.25, 0.5]}},
    ],
)
def test_schema_rejections(tmp_path, doc):
    with pytest.raises(ConfigInvalid):
        normalize_config(doc)
    assert main(["run", _write(tmp_path, "c.json", doc)]) == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_sweep_two_by_two(tmp_path, capsys):
    doc = {
        "base": {**SLAB, "coefficients": {"preset": "hoelder_bump", "m": 0.3}},
        "grid": {"lambda_plus": [1.5, 2], "coefficients.alpha": [0.3, 0.5]},
    }
    out = tmp_path / "sw"
    assert main(["sweep", _write(tmp_path, "sw.json", doc), "--out", str(out)]) == EXIT_OK
    rows = json.loads((out / "summary.json").read_text(encoding="utf-8"))["rows"]
    assert len(rows) == 4 and all(r["status"] == "ok" for r in rows)
    assert {(r["params"]["lambda_plus"], r["params"]["coefficients.alpha"]) for r in rows} == {
        (1.5, 0.3), (1.5, 0.5), (2, 0.3), (2, 0.5)
    }
    table = _read_csv(out / "summary.csv")
    assert len(table) == 5 and table[0][:3] == ["index", "coefficients.alpha", "lambda_plus"]
    assert "4 rows, 4 ok" in capsys.readouterr().out


def test_sweep_row_failure_isolated(tmp_path):
    doc = {"base": ZERO, "grid": {"lambda_plus": [2, 0.5]}}
    out = tmp_path / "sw"
    assert main(["sweep", _write(tmp_path, "sw.json", doc), "--out", str(out)]) == EXIT_OK
    rows = json.loads((out / "summary.json").read_text(encoding="utf-8"))["rows"]
    assert [r["status"] for r in rows] == ["ok", "error"]


def test_sweep_empty_grid(tmp_path):
    out = tmp_path / "sw0"
    doc = {"base": ZERO, "grid": {}}
    assert main(["sweep", _write(tmp_path, "sw0.json", doc), "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "summary.json").read_text(encoding="utf-8"))["rows"] == []


def test_sweep_cap(tmp_path):
    doc = {"base": ZERO, "grid": {"lambda_plus": list(range(2, 102)), "M": list(range(1, 1001))}}
    assert 100 * 1000 > SWEEP_CAP
    with pytest.raises(ConfigInvalid):
        expand_sweep(doc)
    assert main(["sweep", _write(tmp_path, "big.json", doc)]) == EXIT_CONFIG


def test_verify_stored_field(zero_run, tmp_path, capsys):
    _, out = zero_run
    cfg = _write(tmp_path, "zero.json", ZERO)
    code = main(["verify", str(out / "u.fbfield"), cfg, "--out", str(tmp_path / "v")])
    assert code == EXIT_OK
    res = json.loads((tmp_path / "v" / "result.json").read_text(encoding="utf-8"))
    assert res["checks"]["audit"]["passed"]
    assert "audit: pass" in capsys.readouterr().out


def test_oracle1d_verb(capsys):
    assert main(["oracle1d", "0", "0.5", "2", "1"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["s"] == pytest.approx(0.5) and doc["energy"] == pytest.approx(2.0)
    assert main(["oracle1d", "0", "0.5", "1", "2"]) == EXIT_CONFIG
