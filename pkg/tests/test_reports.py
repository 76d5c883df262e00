import math
import xml.etree.ElementTree as ET

from reports import _nice_ticks, format_csv, svg_line_chart, write_csv


def test_format_csv_uses_unix_newlines():
    text = format_csv(["a", "b"], [{"a": 1, "b": "x"}, {"a": 2, "b": "y"}])
    assert text == "a,b\n1,x\n2,y\n"


def test_write_csv(tmp_path):
    path = tmp_path / "out.csv"
    write_csv(path, ["mz", "ts"], [{"mz": 1, "ts": "0.5"}])
    assert path.read_bytes() == b"mz,ts\n1,0.5\n"


def test_nice_ticks_cover_the_range():
    ticks = _nice_ticks(0.0, 0.93)
    assert ticks[0] <= 0.0 and ticks[-1] >= 0.93
    assert len(ticks) <= 8
    assert _nice_ticks(2.0, 2.0)[-1] >= 3.0


def test_svg_chart_is_well_formed_and_deterministic():
    series = {"MZ=1": [(1, 0.5), (2, 0.25)], "MZ=<2>": [(1, 0.4), (2, math.nan)]}
    svg = svg_line_chart("TS & j", series, "j", "TS(j)")
    assert svg == svg_line_chart("TS & j", series, "j", "TS(j)")
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    polylines = [el for el in root.iter() if el.tag.endswith("polyline")]
    assert len(polylines) == 2
    assert "MZ=&lt;2&gt;" in svg


def test_svg_chart_with_no_points():
    assert svg_line_chart("empty", {}).startswith("<svg")
