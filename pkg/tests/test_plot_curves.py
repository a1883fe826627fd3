import logging
import re
import xml.etree.ElementTree as ET

import pytest

from vreatlas.Errors import DataError
from vreatlas.PlotCurves import CURVE_GID, emit_plot

SVG = "{http://www.w3.org/2000/svg}"
HEADER = "cumulative_TWh,lcoe_GBP_per_kWh,site_id\n"


def _curve(tmp_path, body, name="curve.csv"):
    path = tmp_path / name
    path.write_text(HEADER + body, encoding="utf-8")
    return str(path)

def _curve_paths(svg_path):
    root = ET.parse(svg_path).getroot()
    groups = [g for g in root.iter(SVG + "g") if g.get("id") == CURVE_GID]
    return [p for g in groups for p in g.iter(SVG + "path")]


def test_three_point_curve_is_one_line(tmp_path):
    svg = emit_plot(_curve(tmp_path, "1.0,0.05,7\n2.5,0.06,2\n4.0,0.09,5\n"))
    assert svg.endswith("curve.svg")
    paths = _curve_paths(svg)
    assert len(paths) == 1
    vertices = re.findall(r"[ML]", paths[0].get("d"))
    assert len(vertices) == 3

def test_same_curve_gives_same_bytes(tmp_path):
    csv = _curve(tmp_path, "1.0,0.05,7\n2.5,0.06,2\n")
    first = open(emit_plot(csv, str(tmp_path / "a.svg")), "rb").read()
    second = open(emit_plot(csv, str(tmp_path / "b.svg")), "rb").read()
    assert first == second

def test_empty_curve_still_writes_a_plot(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        svg = emit_plot(_curve(tmp_path, ""), title="empty")
    assert "is empty" in caplog.text
    assert _curve_paths(svg) == []

def test_decreasing_curve_is_rejected(tmp_path):
    with pytest.raises(DataError):
        emit_plot(_curve(tmp_path, "2.0,0.05,1\n1.0,0.06,2\n"))
