import csv
import io
import json

import pytest

from ecmkit import builtin_haswell, serialize_machine
from ecmkit.cli import run


def invoke(*argv):
    out = io.StringIO()
    code = run(list(argv), out=out)
    return code, out.getvalue()


def test_predict_ddot_shorthand():
    code, text = invoke("predict", "-m", "haswell", "-k", "ddot")
    assert code == 0
    assert "{1 || 2 | 2 | 4 | 9.1}" in text
    assert "{2 \\ 4 \\ 8 \\ 17.1}" in text


def test_predict_penalty_memory_value():
    code, text = invoke("predict", "-m", "haswell", "-k", "ddot", "--penalty")
    assert code == 0
    assert "21.1" in text


def test_predict_unknown_kernel_lists_builtins(capsys):
    code, _ = invoke("predict", "-k", "nosuch")
    assert code == 2
    err = capsys.readouterr().err
    assert "ddot" in err and "schoenauer_triad" in err


def test_predict_invalid_machine_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    code, _ = invoke("predict", "-m", str(bad), "-k", "ddot")
    assert code == 2


def test_traffic_copy():
    code, text = invoke("traffic", "-k", "copy")
    assert code == 0
    cells = [line.split() for line in text.splitlines()]
    assert ["L1L2", "3"] in cells and ["L2L3", "3"] in cells and ["L3MEM", "3"] in cells
    assert "24 B with write-allocate" in text


def test_traffic_nt_variant():
    code, text = invoke("traffic", "-k", "stream_triad_nt", "--format", "csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[1:] == [["L1L2", "2"], ["L2L3", "2"], ["L3MEM", "3"]]


def test_traffic_load_single_line():
    code, text = invoke("traffic", "-k", "load", "--format", "csv")
    assert code == 0
    assert text.splitlines()[1:] == ["L1L2,1", "L2L3,1", "L3MEM,1"]


def test_scale_ddot_ceiling():
    code, text = invoke("scale", "-k", "ddot", "--mode", "cod", "--cores", "14")
    assert code == 0
    assert "ceiling: 4050 MUp/s" in text


def test_scale_single_core_matches_predict():
    code, text = invoke("scale", "-k", "ddot", "--cores", "1", "--format", "csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["cores", "mups", "bound"]
    assert rows[1][0] == "1"
    assert float(rows[1][1]) == pytest.approx(1076.9)


def test_scale_out_of_range_cores():
    code, _ = invoke("scale", "-k", "ddot", "--cores", "99")
    assert code == 2


def test_scale_csv_matches_json_values():
    _, csv_text = invoke("scale", "-k", "stream_triad", "--cores", "5", "--format", "csv")
    _, json_text = invoke("scale", "-k", "stream_triad", "--cores", "5", "--format", "json")
    csv_rows = list(csv.reader(io.StringIO(csv_text)))[1:]
    json_points = json.loads(json_text)["points"]
    assert len(csv_rows) == len(json_points) == 5
    for row, point in zip(csv_rows, json_points):
        assert int(row[0]) == point["cores"]
        assert float(row[1]) == float(point["mups"])
        assert row[2] == point["bound"]


def test_compare_embedded_measurements():
    code, text = invoke("compare", "-k", "copy", "--format", "csv")
    assert code == 0
    rows = {r["level"]: r for r in csv.DictReader(io.StringIO(text))}
    assert rows["MEM"]["abs_error_pct"] == "3"


def test_compare_schoenauer_l2_error():
    code, text = invoke("compare", "-k", "schoenauer_triad", "--format", "csv")
    assert code == 0
    rows = {r["level"]: r for r in csv.DictReader(io.StringIO(text))}
    assert rows["L2"]["abs_error_pct"] == "24"


def test_compare_synthetic_exact_measurements(tmp_path):
    meas = tmp_path / "exact.csv"
    lines = ["kernel,level,cycles_per_cl", "ddot,L1,2", "ddot,L2,4", "ddot,L3,8", f"ddot,MEM,{17.0864197530864198:.10f}"]
    meas.write_text("\n".join(lines) + "\n")
    code, text = invoke("compare", "-k", "ddot", "--measurements", str(meas), "--no-penalty", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [r["abs_error_pct"] for r in rows] == ["0", "0", "0", "0"]


def test_compare_malformed_csv(tmp_path, capsys):
    meas = tmp_path / "bad.csv"
    meas.write_text("kernel,level,cycles_per_cl\nddot,L1\n")
    code, _ = invoke("compare", "--measurements", str(meas))
    assert code == 2
    assert "row 2" in capsys.readouterr().err


def test_compare_missing_level_warns(tmp_path, capsys):
    meas = tmp_path / "partial.csv"
    meas.write_text("kernel,level,cycles_per_cl\nddot,L1,2.1\n")
    code, text = invoke("compare", "-k", "ddot", "--measurements", str(meas), "--format", "csv")
    assert code == 0
    assert "no MEM measurement" in capsys.readouterr().err
    assert len(list(csv.DictReader(io.StringIO(text)))) == 1


def test_validate_passes_on_builtins():
    code, text = invoke("validate")
    assert code == 0
    assert "35/35 input cells match" in text
    assert "28/28 prediction cells match" in text


def test_validate_json_format():
    code, text = invoke("validate", "--format", "json")
    assert code == 0
    report = json.loads(text)
    assert report["ok"] is True
    assert report["predictions"]["matched"] == 28


def test_validate_detects_misconfigured_boundary(tmp_path):
    data = serialize_machine(builtin_haswell())
    for boundary in data["boundaries"]:
        if boundary["name"] == "L2L3":
            boundary["bytes_per_cycle"] = 64
    path = tmp_path / "wide.json"
    path.write_text(json.dumps(data))
    code, text = invoke("validate", "-m", str(path))
    assert code == 1
    assert "ddot" in text and "L3" in text


def test_list_kernels_has_all_builtins():
    code, text = invoke("list-kernels", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 10
    names = {r["kernel"] for r in rows}
    assert {"ddot", "stream_triad_nt", "schoenauer_triad_opt"} <= names


def test_show_machine_haswell():
    code, text = invoke("show-machine", "haswell")
    assert code == 0
    assert "2.3" in text
    assert "L1L2" in text and "64" in text


def test_show_machine_from_env_path(tmp_path, monkeypatch):
    path = tmp_path / "custom.json"
    data = serialize_machine(builtin_haswell())
    data["name"] = "custom"
    path.write_text(json.dumps(data))
    monkeypatch.setenv("ECM_MACHINE_PATH", str(tmp_path))
    code, text = invoke("show-machine", "custom")
    assert code == 0
    assert "custom" in text


def test_nt_estimate_stream_triad():
    code, text = invoke("nt-estimate", "-k", "stream_triad", "--format", "json")
    assert code == 0
    payload = json.loads(text)
    assert payload["volume_ratio"] == pytest.approx(1.3)
    assert payload["measured_reference"]["domain_mups"]["nontemporal"] == 1181


def test_predict_table_csv_json_same_values():
    _, table_text = invoke("predict", "-k", "copy")
    _, csv_text = invoke("predict", "-k", "copy", "--format", "csv")
    _, json_text = invoke("predict", "-k", "copy", "--format", "json")
    csv_rows = {r["level"]: r for r in csv.DictReader(io.StringIO(csv_text))}
    json_rows = {r["level"]: r for r in json.loads(json_text)["levels"]}
    for level in ("L1", "L2", "L3", "MEM"):
        assert float(csv_rows[level]["cycles_per_cl"]) == float(json_rows[level]["cycles_per_cl"])
        assert f"{level}" in table_text
        assert csv_rows[level]["cycles_per_cl"] in table_text
