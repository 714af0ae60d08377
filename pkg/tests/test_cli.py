import csv
import io
import json

import pytest

from conftest import DATA
from mrrpa import cli
from mrrpa.errors import ConfigError
from mrrpa.integrals import write_fcidump
from toys import hubbard_dimer, random_integrals


def _write(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def _base(**extra):
    doc = {"inputs": [{"path": str(DATA / "lih_sto3g_casscf.fcidump"), "label": "LiH"}],
           "partition": {"ncore": 1, "nact": 2},
           "methods": ["MR-dRPA"], "routes": ["plasmon"]}
    doc.update(extra)
    return doc


def test_single_row_csv(tmp_path, capsys):
    code = cli.main(["run", str(_write(tmp_path, _base()))])
    assert code == 0
    out = capsys.readouterr().out
    rows = _rows(out)
    assert len(rows) == 1
    row = rows[0]
    assert list(row) == list(cli.CSV_COLUMNS)
    assert row["status"] == "ok" and row["method"] == "MR-dRPA"
    e_ref, e_corr, e_total = float(row["e_ref"]), float(row["e_corr"]), float(row["e_total"])
    assert e_total == pytest.approx(e_ref + e_corr, abs=2e-9)
    assert len(row["e_total"].split(".")[1]) == 9


def test_hf_published_total(tmp_path):
    doc = _base(inputs=[{"path": str(DATA / "hf_ccpvdz_r1p0_casscf.fcidump"), "label": "HF", "R_over_R0": 1.0}],
                partition={"ncore": 4, "nact": 2, "n_elec": 10})
    rows, code = cli.run(cli.load_config(_write(tmp_path, doc)))
    assert code == 0
    assert rows[0]["e_total"] == pytest.approx(-100.251928, abs=2e-5)


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d.update(methods=[]), "methods"),
    (lambda d: d.update(methods=["MR-ppRPA-e"]), "methods/0"),
    (lambda d: d.update(routes=["contour"]), "routes/0"),
    (lambda d: d["partition"].update(ncore=-1), "partition/ncore"),
    (lambda d: d["inputs"][0].pop("path"), "inputs/0"),
    (lambda d: d.update(quadrature={"n_points": 0}), "quadrature/n_points"),
    (lambda d: d.update(output={"format": "xml"}), "output/format"),
    (lambda d: d.update(unknown=1), "<root>"),
])
def test_config_errors_carry_field_paths(tmp_path, mutate, path):
    doc = _base()
    mutate(doc)
    with pytest.raises(ConfigError) as err:
        cli.load_config(_write(tmp_path, doc))
    assert str(err.value).startswith(path + ":")


def test_mr_method_needs_partition(tmp_path):
    doc = _base()
    doc.pop("partition")
    with pytest.raises(ConfigError, match="inputs/0/partition"):
        cli.load_config(_write(tmp_path, doc))


def test_config_error_exit_code(tmp_path, capsys):
    assert cli.main(["run", str(_write(tmp_path, {"inputs": []}))]) == cli.EXIT_ERROR
    assert "config error" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "missing.json")]) == cli.EXIT_ERROR


def test_failures_are_isolated(tmp_path):
    doc = _base(inputs=[{"path": "nowhere.fcidump", "label": "bad"},
                        {"path": str(DATA / "lih_sto3g_casscf.fcidump"), "label": "good"}])
    rows, code = cli.run(cli.load_config(_write(tmp_path, doc)))
    assert [r["label"] for r in rows] == ["bad", "good"]
    assert rows[0]["status"] == "error" and rows[1]["status"] == "ok"
    assert code == cli.EXIT_ERROR


def test_electron_count_mismatch_is_an_input_error(tmp_path):
    doc = _base(partition={"ncore": 1, "nact": 2, "n_elec": 6})
    rows, code = cli.run(cli.load_config(_write(tmp_path, doc)))
    assert rows[0]["status"] == "error" and "NELEC" in rows[0]["message"]
    assert code == cli.EXIT_ERROR


def test_instability_exit_code(tmp_path):
    doc = {"inputs": [{"path": str(DATA / "h2_sto3g_stretched_rhf.fcidump")}],
           "methods": ["SR-dRPA", "SR-RPAx"]}
    rows, code = cli.run(cli.load_config(_write(tmp_path, doc)))
    by_method = {r["method"]: r for r in rows}
    assert by_method["SR-dRPA"]["status"] == "ok"
    assert by_method["SR-RPAx"]["status"] == "unstable"
    assert by_method["SR-RPAx"]["e_total"] is None
    assert code == cli.EXIT_UNSTABLE
    text = cli.format_csv(rows)
    assert "nan" not in text.lower()


def test_route_inconsistency_exit_code(tmp_path):
    doc = _base(routes=["plasmon", "quadrature"], quadrature={"n_points": 2})
    rows, code = cli.run(cli.load_config(_write(tmp_path, doc)))
    assert rows[0]["status"] == "inconsistent"
    assert code == cli.EXIT_INCONSISTENT


def test_exit_code_precedence():
    assert cli.exit_code(["ok", "unstable", "inconsistent"]) == cli.EXIT_INCONSISTENT
    assert cli.exit_code(["unstable", "error"]) == cli.EXIT_ERROR
    assert cli.exit_code(["ok"]) == cli.EXIT_OK


def test_reports_are_deterministic_and_ordered(tmp_path):
    doc = _base(inputs=[{"path": str(DATA / "h2_631g_casscf.fcidump"), "label": "H2",
                         "partition": {"ncore": 0, "nact": 2}},
                        {"path": str(DATA / "lih_sto3g_casscf.fcidump"), "label": "LiH"}],
                methods=["MR-dRPA", "MR-RPAx-e", "MR-ppRPA", "SR-ppRPA"],
                routes=["plasmon", "riccati", "quadrature"], orders=4)
    cfg = cli.load_config(_write(tmp_path, doc))
    serial = cli.format_csv(cli.run(cfg, jobs=1)[0])
    parallel = cli.format_csv(cli.run(cfg, jobs=2)[0])
    assert serial == parallel == cli.format_csv(cli.run(cfg, jobs=1)[0])
    rows = _rows(serial)
    assert [(r["label"], r["method"]) for r in rows] == [
        (lab, m) for lab in ("H2", "LiH") for m in doc["methods"]]
    assert all(r["status"] == "ok" for r in rows)
    assert all(len(r["orders"].split(";")) == 3 for r in rows)


def test_json_output_file(tmp_path):
    doc = _base(output={"format": "json", "path": "report.json"})
    code = cli.main(["run", str(_write(tmp_path, doc)), "--jobs", "1"])
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["schema"] == "mrrpa-run-report" and report["schema_version"] == cli.REPORT_VERSION
    row = report["rows"][0]
    assert row["e_total"] == pytest.approx(row["e_ref"] + row["e_corr"]["plasmon"])


def test_extensivity_hubbard_dimers(tmp_path):
    write_fcidump(tmp_path / "dimer.fcidump", hubbard_dimer(t=1.0, U=2.0))
    doc = {"inputs": [{"path": "dimer.fcidump"}], "partition": {"ncore": 0, "nact": 2},
           "methods": ["MR-dRPA", "MR-RPAx", "MR-ppRPA"], "routes": ["plasmon"]}
    rows, code = cli.extensivity_check(cli.load_config(_write(tmp_path, doc)))
    assert code == 0 and all(r["passed"] for r in rows)


def test_extensivity_pairs_and_csv_layout(tmp_path, capsys):
    write_fcidump(tmp_path / "a.fcidump", random_integrals(5, 4, seed=1, spread=1.5, eri_scale=0.2))
    write_fcidump(tmp_path / "b.fcidump", random_integrals(4, 4, seed=1, spread=1.5, eri_scale=0.2))
    doc = {"inputs": [{"path": "a.fcidump"}, {"path": "b.fcidump"}],
           "partition": {"ncore": 1, "nact": 2},
           "methods": ["MR-dRPA", "MR-RPAx", "MR-ppRPA", "SR-dRPA"], "routes": ["plasmon"]}
    code = cli.main(["extensivity", str(_write(tmp_path, doc))])
    rows = _rows(capsys.readouterr().out)
    assert code == 0
    assert list(rows[0]) == list(cli.EXTENSIVITY_COLUMNS)
    for r in rows:
        assert r["label"] == "a+b" and r["passed"] == "true"
        assert float(r["difference"]) < 1e-8
        assert float(r["e_corr_A_plus_B"]) == pytest.approx(float(r["e_corr_A"]) + float(r["e_corr_B"]), abs=2e-9)


def test_extensivity_needs_pairs(tmp_path):
    doc = {"inputs": [{"path": "a"}, {"path": "b"}, {"path": "c"}], "methods": ["SR-dRPA"]}
    with pytest.raises(ConfigError):
        cli.extensivity_check(cli.load_config(_write(tmp_path, doc)))


def test_determinant_cap_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MRRPA_DET_CAP", "2")
    rows, code = cli.run(cli.load_config(_write(tmp_path, _base())))
    assert rows[0]["status"] == "error" and "DeterminantCapError" in rows[0]["message"]
    assert code == cli.EXIT_ERROR
