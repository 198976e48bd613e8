import pytest

from qga.errors import ParsingError
from qga.models import BenchRecord, FitResult
from qga.reading import JsonLinesReader, JsonLinesWriter, load_records, load_spectral_reports

def make_record(init):
    return BenchRecord(2, "abc", "uqcm/off", init, 5, "haar-full", [0.5, 0.75], [1.5, 1.25], FitResult(0.8, -0.3, 0.5, 0.0))

def test_records_survive_the_file(tmp_path):
    path = str(tmp_path / "records.jsonl")
    writer = JsonLinesWriter(path)
    writer.write_all([make_record(0).to_dict(), make_record(1).to_dict()])
    writer.close()
    records = load_records(path)
    assert [r.init_index for r in records] == [0, 1]
    assert records[0].fit.gamma == 0.5
    assert records[1].fidelity_series == [0.5, 0.75]

def test_writer_appends(tmp_path):
    path = str(tmp_path / "records.jsonl")
    for init in range(2):
        writer = JsonLinesWriter(path)
        writer.write_all([make_record(init).to_dict()])
        writer.close()
    assert len(load_records(path)) == 2

def test_blank_lines_are_skipped(tmp_path):
    path = tmp_path / "data.jsonl"
    path.write_text('{"a": 1}\n\n{"a": 2}\n', encoding="utf-8")
    reader = JsonLinesReader(str(path))
    assert [d["a"] for d in reader] == [1, 2]
    reader.close()

def test_bad_line_reports_position(tmp_path):
    path = tmp_path / "data.jsonl"
    path.write_text('{"a": 1}\n{broken\n', encoding="utf-8")
    reader = JsonLinesReader(str(path))
    with pytest.raises(ParsingError, match=":2:"):
        list(reader)
    reader.close()

def test_missing_fields(tmp_path):
    path = tmp_path / "records.jsonl"
    path.write_text('{"ham_index": 0}\n', encoding="utf-8")
    with pytest.raises(ParsingError):
        load_records(str(path))

def test_missing_file(tmp_path):
    with pytest.raises(ParsingError):
        load_records(str(tmp_path / "absent.jsonl"))
    assert load_spectral_reports(str(tmp_path / "absent.jsonl")) == []
