from __future__ import annotations

from pathlib import Path

import pytest

from ugfrel.loadcsv import LoadSeriesError, read_load_series


def _write(tmp_path: Path, text: str) -> Path:
    p = tmp_path / "load.csv"
    p.write_bytes(text.encode("utf-8"))
    return p


def test_reads_header_comments_and_extra_columns(tmp_path: Path):
    p = _write(tmp_path, "load_kw,hour\n# winter peak\n2954.1,1\n\n2777.75,2\r\n3100\r\n")
    assert read_load_series(p).tolist() == [2954.1, 2777.75, 3100.0]


def test_headerless_file(tmp_path: Path):
    p = _write(tmp_path, "1\n2\n3\n")
    assert read_load_series(p).tolist() == [1.0, 2.0, 3.0]


def test_bad_value_reports_line(tmp_path: Path):
    p = _write(tmp_path, "load_kw\n10\nabc\n")
    with pytest.raises(LoadSeriesError) as err:
        read_load_series(p)
    assert err.value.line == 3
    assert f"{p}:3" in str(err.value)


def test_negative_and_non_finite_values_rejected(tmp_path: Path):
    with pytest.raises(LoadSeriesError):
        read_load_series(_write(tmp_path, "10\n-1\n"))
    with pytest.raises(LoadSeriesError):
        read_load_series(_write(tmp_path, "10\nnan\n"))


def test_second_header_line_rejected(tmp_path: Path):
    with pytest.raises(LoadSeriesError):
        read_load_series(_write(tmp_path, "load\nkw\n10\n"))


def test_missing_and_empty_files(tmp_path: Path):
    with pytest.raises(LoadSeriesError) as err:
        read_load_series(tmp_path / "nope.csv")
    assert err.value.line is None
    with pytest.raises(LoadSeriesError):
        read_load_series(_write(tmp_path, "load_kw\n# nothing\n"))
