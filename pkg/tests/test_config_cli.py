import csv
import io
import json

import numpy as np
import pytest

from lsme.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, build_parser, main, run
from lsme.config import load_config, parse_config
from lsme.errors import ValidationError
from lsme.univariate import Mode

BASE = {
    "family": {"kind": "studentt", "m": 5},
    "mu": [0.0, 0.5],
    "sigma": [[1.0, 0.3], [0.3, 2.0]],
    "beta": [0.2, -0.1],
    "mixing": {"kind": "gamma", "params": {"shape": 2.0, "rate": 1.0}},
}


def write(tmp_path, data, name="model.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return str(path)


def invoke(argv):
    return run(build_parser().parse_args(argv))


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def test_parse_defaults():
    cfg = parse_config({k: v for k, v in BASE.items() if k != "beta"})
    assert cfg.options.mode is Mode.WEIGHTED
    np.testing.assert_array_equal(cfg.model.beta, [0, 0])


@pytest.mark.parametrize(
    "patch,where",
    [
        ({"sigma": [[1.0, 0.3], [0.3, "x"]]}, "sigma[1][1]"),
        ({"sigma": [[1.0, 2.0], [2.0, 1.0]]}, "sigma"),
        ({"mu": [0.0]}, "sigma"),
        ({"beta": [0.0]}, "beta"),
        ({"family": {"kind": "studentt"}}, "family.m"),
        ({"family": "cauchy"}, "family.kind"),
        ({"family": {"kind": "normal", "m": 3}}, "family.m"),
        ({"mixing": {"kind": "gamma", "params": {"shape": -1}}}, "mixing"),
        ({"options": {"mode": "mean"}}, "options.mode"),
        ({"options": {"quadrature_nodes": 1}}, "options.quadrature_nodes"),
        ({"options": {"colour": 1}}, "options"),
        ({"extra": 1}, "<root>"),
    ],
)
def test_errors_name_the_field(patch, where):
    data = dict(BASE, **patch)
    with pytest.raises(ValidationError, match=f"^{__import__('re').escape(where)}"):
        parse_config(data)


def test_missing_field():
    data = dict(BASE)
    del data["mixing"]
    with pytest.raises(ValidationError, match="^mixing: missing"):
        parse_config(data)


def test_invalid_json(tmp_path):
    with pytest.raises(ValidationError, match="line 1 column"):
        load_config(write(tmp_path, "{bad"))


def test_family_aliases():
    for name in ("t", "student_t", "student-t"):
        assert parse_config(dict(BASE, family={"kind": name, "m": 5})).model.family.m == 5
    assert parse_config(dict(BASE, family="gaussian")).model.family.kind.value == "normal"


def test_round_trip():
    cfg = parse_config(dict(BASE, options={"mode": "literal"}))
    again = parse_config(cfg.to_dict())
    assert again.model == cfg.model and again.options == cfg.options


# ---------------------------------------------------------------------------
# cli
# ---------------------------------------------------------------------------


def test_tce_csv_precision(tmp_path):
    path = write(tmp_path, {"family": "normal", "mu": [0], "sigma": [[1]], "mixing": {"kind": "point_mass"}})
    code, out, err = invoke(["tce", path, "--q", "0.95", "--format", "csv"])
    assert code == EXIT_OK and err == ""
    row = list(csv.DictReader(io.StringIO(out)))[0]
    assert float(row["tce"]) == pytest.approx(2.0627128075074284, abs=1e-12)
    assert len(row["tce"].replace(".", "").lstrip("0")) >= 16


def test_tce_json_echoes_request(tmp_path):
    path = write(tmp_path, BASE)
    code, out, _ = invoke(["tce", path, "--q", "0.9,0.95", "--mode", "literal"])
    rep = json.loads(out)
    assert code == EXIT_OK
    assert rep["request"]["model"]["options"]["mode"] == "literal"
    assert [r["q"] for r in rep["results"]] == [0.9, 0.95]
    assert "timing" not in rep
    assert parse_config(rep["request"]["model"]).model == load_config(path).model


def test_mtce_and_allocate(tmp_path):
    path = write(tmp_path, BASE)
    code, out, _ = invoke(["mtce", path, "--q", "0.9", "--q", "0.8"])
    assert code == EXIT_OK and json.loads(out)["results"]["q"] == [0.9, 0.8]
    code, out, _ = invoke(["allocate", path, "--q", "0.95", "--timing"])
    rep = json.loads(out)
    assert code == EXIT_OK and "timing" in rep
    assert abs(sum(rep["results"]["contributions"]) - rep["results"]["total"]) < 1e-10
    code, out, _ = invoke(["mtce", path, "--q", "0.9,0.8,0.7"])
    assert code == EXIT_VALIDATION and out == ""


@pytest.mark.parametrize("q", ["1.0", "abc", "0"])
def test_bad_q(tmp_path, q):
    code, out, err = invoke(["tce", write(tmp_path, BASE), "--q", q])
    assert code == EXIT_VALIDATION and out == "" and err.startswith("error: --q")


def test_non_positive_definite_exit(tmp_path):
    code, out, err = invoke(["tce", write(tmp_path, dict(BASE, sigma=[[1, 2], [2, 1]])), "--q", "0.9"])
    assert code == EXIT_VALIDATION and out == "" and "sigma" in err


def test_numerical_exit(tmp_path):
    path = write(tmp_path, {"family": "normal", "mu": [0], "sigma": [[1]], "mixing": {"kind": "point_mass"}})
    code, out, _ = invoke(["validate", path, "--q", "0.9999", "--seed", "0", "--samples", "10000"])
    assert code == EXIT_NUMERICAL and out == ""


def test_validate_is_byte_identical(tmp_path):
    path = write(tmp_path, BASE)
    argv = ["validate", path, "--q", "0.9", "--seed", "42", "--samples", "20000"]
    first, second = invoke(argv), invoke(argv)
    assert first[0] == EXIT_OK and first == second
    rep = json.loads(first[1])
    assert rep["diagnostics"]["all_pass"]["weighted"] is True
    assert {r["quantity"] for r in rep["results"]} >= {"tce_sum", "allocation[1]", "mtce[2]"}


def test_sample(tmp_path, capsys):
    path = write(tmp_path, BASE)
    assert main(["sample", path, "--seed", "3", "--count", "5"]) == 0
    first = capsys.readouterr().out
    main(["sample", path, "--seed", "3", "--samples", "5"])
    assert capsys.readouterr().out == first
    rows = list(csv.reader(io.StringIO(first)))
    assert rows[0] == ["y1", "y2"] and len(rows) == 6


@pytest.mark.parametrize("name", ["normal.json", "t5_gamma_pair.json", "laplace_portfolio.json"])
def test_shipped_configs_parse(name):
    from pathlib import Path

    cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / name)
    assert cfg.model.n >= 1


def test_stray_arithmetic_error_exits_numerical(tmp_path, monkeypatch):
    import lsme.cli as cli

    def boom(*args, **kwargs):
        raise OverflowError("math range error")

    monkeypatch.setattr(cli, "tce_1d", boom)
    path = write(tmp_path, {"family": "normal", "mu": [0], "sigma": [[1]], "mixing": {"kind": "point_mass"}})
    code, out, err = invoke(["tce", path, "--q", "0.9"])
    assert code == EXIT_NUMERICAL and out == "" and "OverflowError" in err
