import logging

import pytest

from ucr.cqidb import (
    HEADER,
    CqiDatabase,
    CqiNotFound,
    CqiParseError,
    CqiRecord,
    CqiValidationError,
    read_records,
)
from ucr.partial import RayleighCqi


class TestCqiRecord:
    def test_key_and_fields(self):
        record = CqiRecord("node-a", "cell-1", 0.25, 1760000100.5)
        assert record.key == ("node-a", "cell-1")
        assert record.to_fields() == (
            "node-a",
            "cell-1",
            "2.5000000000000000e-01",
            "1760000100.5",
        )

    @pytest.mark.parametrize("mean", [0.0, -1.0, float("nan"), float("inf")])
    def test_rejects_nonpositive_mean(self, mean):
        with pytest.raises(CqiValidationError):
            CqiRecord("node-a", "cell-1", mean)

    @pytest.mark.parametrize("node_id", ["", "a,b", 'quoted"', "two\nlines"])
    def test_rejects_unstorable_ids(self, node_id):
        with pytest.raises(CqiValidationError):
            CqiRecord(node_id, "cell-1", 1.0)

    def test_rejects_negative_timestamp(self):
        with pytest.raises(CqiValidationError):
            CqiRecord("node-a", "cell-1", 1.0, updated_at=-1.0)


class TestReadRecords:
    def test_line_numbers_skip_blank_rows(self, fixture_path):
        lines = [line for line, _ in read_records(fixture_path("cqi_duplicate.csv"))]
        assert lines == [2, 4, 5]

    def test_header_must_match(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("node,cell,mean,when\n")
        with pytest.raises(CqiParseError) as excinfo:
            list(read_records(path))
        assert excinfo.value.data == {"line": 1}

    def test_field_count(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text(",".join(HEADER) + "\nnode-a,cell-1,0.5\n")
        with pytest.raises(CqiParseError) as excinfo:
            list(read_records(path))
        assert "line 2" in excinfo.value.message


class TestCqiDatabase:
    def test_empty_file_is_an_empty_store(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        db = CqiDatabase.from_file(path)
        assert len(db) == 0
        assert list(db) == []

    def test_load_and_lookup(self, fixture_path):
        db = CqiDatabase.from_file(fixture_path("cqi_good.csv"))
        assert len(db) == 3
        assert ("node-a", "cell-2") in db
        assert db.lookup("node-a", "cell-1") == RayleighCqi(0.01)

    def test_lookup_missing(self, fixture_path):
        db = CqiDatabase.from_file(fixture_path("cqi_good.csv"))
        with pytest.raises(CqiNotFound) as excinfo:
            db.lookup("node-z", "cell-1")
        assert excinfo.value.status == 1
        assert excinfo.value.data == {"node_id": "node-z", "cell_id": "cell-1"}

    def test_duplicates_keep_the_later_line(self, fixture_path, caplog):
        db = CqiDatabase()
        with caplog.at_level(logging.WARNING, logger="ucr"):
            count = db.load(fixture_path("cqi_duplicate.csv"))
        assert count == 2
        assert db.duplicate_count == 1
        assert db.lookup("node-a", "cell-1").mean_gain2 == 0.01
        assert "duplicate key node-a/cell-1" in caplog.text

    def test_malformed_line_reports_its_number(self, fixture_path):
        db = CqiDatabase()
        with pytest.raises(CqiParseError) as excinfo:
            db.load(fixture_path("cqi_malformed.csv"))
        assert excinfo.value.data["line"] == 3
        assert "mean_gain2" in excinfo.value.message
        # nothing from a rejected file is merged
        assert len(db) == 0

    def test_nonpositive_mean_is_rejected_with_line(self, fixture_path):
        with pytest.raises(CqiValidationError) as excinfo:
            CqiDatabase.from_file(fixture_path("cqi_nonpositive.csv"))
        assert excinfo.value.data["line"] == 3
        assert excinfo.value.message.startswith("line 3:")

    def test_load_merges_into_existing(self, fixture_path):
        db = CqiDatabase()
        db.put(CqiRecord("node-a", "cell-1", 9.0))
        db.put(CqiRecord("node-x", "cell-9", 2.0))
        db.load(fixture_path("cqi_good.csv"))
        assert len(db) == 4
        assert db.lookup("node-a", "cell-1").mean_gain2 == 0.01

    def test_export_is_sorted(self, tmp_path):
        db = CqiDatabase()
        for node, cell in (("b", "2"), ("a", "9"), ("b", "1"), ("a", "10")):
            db.put(CqiRecord(node, cell, 1.0))
        path = tmp_path / "out.csv"
        assert db.export(path) == 4
        rows = path.read_text().splitlines()
        assert rows[0] == ",".join(HEADER)
        assert [row.split(",")[:2] for row in rows[1:]] == [
            ["a", "10"],
            ["a", "9"],
            ["b", "1"],
            ["b", "2"],
        ]

    def test_canonical_file_round_trips_byte_for_byte(self, fixture_path, tmp_path):
        source = fixture_path("cqi_good.csv")
        path = tmp_path / "copy.csv"
        CqiDatabase.from_file(source).export(path)
        with open(source, "rb") as original:
            assert path.read_bytes() == original.read()

    def test_export_preserves_values(self, tmp_path):
        db = CqiDatabase()
        db.put(CqiRecord("n", "c", 0.1 + 0.2, 1760000000.123))
        path = tmp_path / "out.csv"
        db.export(path)
        (record,) = CqiDatabase.from_file(path)
        assert record.mean_gain2 == 0.1 + 0.2
        assert record.updated_at == 1760000000.123
