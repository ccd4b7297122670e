import pandas as pd

from spiralrg.output import header_lines, read_csv, write_csv


def test_header_lines_sorted_with_extras():
    lines = header_lines({"N": "20", "E": "0.0"}, {"trajectory": "red"}, timestamp=False)
    assert lines == ["# spiralrg 0.1.0", "# E=0.0", "# N=20", "# trajectory=red"]
    stamped = header_lines({}, timestamp=True)
    assert stamped[-1].startswith("# timestamp=") and stamped[-1].endswith("Z")


def test_write_then_read_skips_header(tmp_path):
    frame = pd.DataFrame({"k": [0, 1], "value": [0.1, 1 / 3]})
    path = write_csv(tmp_path / "nested" / "data.csv", frame, {"g": "1.0"}, timestamp=False)
    assert path.read_text().startswith("# spiralrg 0.1.0\n# g=1.0\nk,value\n")
    loaded = read_csv(path)
    assert list(loaded["k"]) == [0, 1]
    assert abs(loaded["value"].iloc[1] - 1 / 3) < 1e-16
    assert [p.name for p in path.parent.iterdir()] == ["data.csv"]
