from shadowbag.utils.json_storage import read_csv, read_json, write_csv, write_json


def test_json_round_trip(tmp_path):
    path = tmp_path / "nested" / "data.json"
    write_json(path, {"a": 1, "b": [1.5, "x"]})
    assert read_json(path) == {"a": 1, "b": [1.5, "x"]}
    assert list(path.parent.iterdir()) == [path]


def test_missing_json_reads_empty(tmp_path):
    assert read_json(tmp_path / "absent.json") == {}


def test_csv_round_trip(tmp_path):
    path = tmp_path / "table.csv"
    write_csv(path, ["string", "value"], [["XZ", 0.25], ["ZZ", -1.0]])
    assert read_csv(path) == [{"string": "XZ", "value": "0.25"}, {"string": "ZZ", "value": "-1.0"}]
