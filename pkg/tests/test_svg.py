import xml.etree.ElementTree as ET

import numpy as np

from survodds import svg
from survodds.km import km_fit

NS = "{http://www.w3.org/2000/svg}"


def _parse(text):
    root = ET.fromstring(text.encode("utf-8"))
    assert root.tag == NS + "svg" and root.get("version") == "1.1"
    assert "href" not in text
    return root


def test_km_figure():
    t = np.array([1.0, 2, 3, 4, 5, 6])
    e = np.array([1, 0, 1, 1, 0, 1])
    curves = {"a": km_fit((t[:3], e[:3])), "b": km_fit((t[3:], e[3:]))}
    text = svg.km_figure(curves, {"a": t[:3], "b": t[3:]}, p_value=0.03)
    root = _parse(text)
    paths = [p for p in root.iter(NS + "path") if p.get("class") == "curve"]
    assert len(paths) == 2
    assert text == svg.km_figure(curves, {"a": t[:3], "b": t[3:]}, p_value=0.03)


def test_forest_one_row():
    root = _parse(svg.forest_plot([("Age (years)", 1.047, 1.03, 1.06)]))
    groups = [g for g in root.iter(NS + "g") if g.get("class") == "estimate"]
    assert len(groups) == 1


def test_histogram_and_escaping():
    root = _parse(svg.histogram_figure([0, 1, 2], [3, 4], title="a < b & c"))
    assert len([r for r in root.iter(NS + "rect") if r.get("class") == "bar"]) == 2


def test_nice_ticks():
    assert svg.nice_ticks(0, 100) == [0, 20, 40, 60, 80, 100]
    assert svg._f(-0.001) == "0.00"
