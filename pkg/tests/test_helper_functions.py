import numpy as np
import pandas as pd
import pytest

from vreatlas.HelperFunctions import parse_code_list, thread_count, write_csv_file


def _pandas_bytes(tmp_path, table, fieldnames, float_format="%.6g"):
    path = tmp_path / "pandas.csv"
    table.reindex(columns=fieldnames).to_csv(path, index=False, float_format=float_format, lineterminator="\n", encoding="utf-8")
    return path.read_bytes()


@pytest.mark.parametrize("float_format", ["%.6g", "%.17g"])
def test_numeric_table_matches_pandas_bytes(tmp_path, float_format):
    rng = np.random.default_rng(17)
    table = pd.DataFrame({
        "cumulative_TWh": np.cumsum(rng.uniform(0.0, 1e-3, 2000)),
        "lcoe_GBP_per_kWh": rng.uniform(0.03, 0.2, 2000),
        "site_id": rng.permutation(2000).astype(np.int64),
        "tiny": rng.normal(0.0, 1e-12, 2000),
        "big": rng.normal(0.0, 1e12, 2000),
    })
    fields = ["site_id", "cumulative_TWh", "lcoe_GBP_per_kWh", "tiny", "big"]
    path = write_csv_file(str(tmp_path), table, fields, "curve.csv", float_format=float_format)
    assert open(path, "rb").read() == _pandas_bytes(tmp_path, table, fields, float_format)

def test_empty_numeric_table_writes_the_header(tmp_path):
    table = pd.DataFrame({"a": np.array([], dtype=float), "b": np.array([], dtype=np.int64)})
    path = write_csv_file(str(tmp_path), table, ["a", "b"], "empty.csv")
    assert open(path, "rb").read() == b"a,b\n" == _pandas_bytes(tmp_path, table, ["a", "b"])

@pytest.mark.parametrize("table, fields", [
    (pd.DataFrame({"code": ["E06000001", "S12000033"], "gwh": [1.5, 2.25]}), ["code", "gwh"]),
    (pd.DataFrame({"gwh": [1.5, np.nan]}), ["gwh"]),
    (pd.DataFrame({"gwh": [1.5, 2.0]}), ["gwh", "missing"]),
    (pd.DataFrame({"flag": [True, False]}), ["flag"]),
])
def test_mixed_tables_still_match_pandas(tmp_path, table, fields):
    path = write_csv_file(str(tmp_path / "out"), table, fields, "mixed.csv")
    assert open(path, "rb").read() == _pandas_bytes(tmp_path, table, fields)


def test_parse_code_list():
    assert parse_code_list("1, 2,3") == frozenset({1, 2, 3})
    assert parse_code_list([4, 5]) == frozenset({4, 5})
    assert parse_code_list("") == frozenset()
    with pytest.raises(ValueError):
        parse_code_list("1,x")

@pytest.mark.parametrize("raw, expected", [("3", 3), ("0", 1), ("many", None), ("", None)])
def test_thread_count_from_environment(monkeypatch, raw, expected):
    monkeypatch.setenv("VRE_ATLAS_THREADS", raw)
    assert thread_count() == expected
