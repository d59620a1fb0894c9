import json

from vosbench.metrics import SequenceReport, dataset_aggregate
from vosbench.report import COLUMNS, build_report, format_csv, format_table, load_report, write_report


def rows():
    return [SequenceReport("bear", 1, 0.9, 0.8, 0.85, None, 0.5, 10),
            SequenceReport("cat", 2, 0.5, 0.25, 0.5, 1.0, None, 10)]


def test_table_layout():
    r = rows()
    doc = build_report(r, dataset_aggregate(r))
    lines = format_table(doc).splitlines()
    assert lines[0].split() == ["Sequence", "Obj", *COLUMNS]
    assert lines[2].split() == ["bear", "1", "90.00", "80.00", "85.00", "85.00", "87.50", "n/a", "50.00"]
    assert lines[-1].split()[:3] == ["MEAN", "2", "70.00"]
    assert len({len(line) for line in lines[:1] + lines[2:4]}) == 1


def test_csv_and_json(tmp_path):
    r = rows()
    doc = build_report(r, dataset_aggregate(r), {"k": 1})
    text = format_csv(doc)
    assert text.splitlines()[1].startswith("bear,1,90.0000,80.0000")
    assert text.splitlines()[-1].startswith("MEAN,,70.0000")
    paths = write_report(tmp_path, doc)
    assert [p.name for p in paths] == ["report.json", "report.txt", "report.csv"]
    back = load_report(tmp_path / "report.json")
    assert back == json.loads(json.dumps(doc))
    assert back["summary"]["J&F_dot_d"] == 1.0
