import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wavebeam.continuation import BranchCurve, TraceLimits, trace, trunk_seed
from wavebeam.model import make_point
from wavebeam.reducible import reducible_tree
from wavebeam.serialization import (
    curve_from_csv,
    curve_from_json,
    curve_to_csv,
    curve_to_json,
    field_samples,
    field_to_csv,
    fmt,
    multipliers_to_json,
    point_from_json,
    point_to_json,
    read_curve,
    scan_to_csv,
    tree_to_csv,
)


def test_fmt_is_lossless():
    for x in (math.pi, 1e-300, -2.5e17, 0.1):
        s = fmt(x)
        assert float(s) == x and "e" in s


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.data())
def test_point_json_roundtrip(M, N, data):
    c = data.draw(arrays(float, (M, N), elements=st.floats(-5, 5)))
    om = data.draw(st.floats(0.5, 4.0))
    p = make_point(c, om, data.draw(st.sampled_from([1, 2])))
    q = point_from_json(point_to_json(p))
    np.testing.assert_array_equal(p.coeffs, q.coeffs)
    assert q.omega == p.omega and q.energy == p.energy
    assert abs(q.residual_norm - p.residual_norm) <= 1e-13


def test_point_json_fields():
    p = trunk_seed(2, 2, 2, 1.3).with_stability("stable")
    obj = json.loads(point_to_json(p))
    assert set(obj) == {"nu", "M", "N", "omega", "energy", "residual_norm", "coeffs", "stability"}
    assert len(obj["coeffs"]) == 4 and obj["stability"] == "stable"


def test_point_json_rejects_bad_input():
    with pytest.raises(ValueError):
        point_from_json('{"nu": 1, "M": 2, "N": 2, "omega": 1.2, "coeffs": [1.0]}')
    with pytest.raises(ValueError):
        point_from_json('{"nu": 1}')


def _curve():
    c = trace(trunk_seed(4, 2, 2), 1, TraceLimits(max_points=12))
    c.events.append((3, "fold"))
    return c


def test_curve_csv_header_and_roundtrip():
    c = _curve()
    text = curve_to_csv(c)
    head = text.splitlines()[0]
    assert head == "index,omega,energy,residual_norm,u00,u01,u10,u11,u20,u21,u30,u31,event"
    back = curve_from_csv(text, 2)
    assert len(back) == len(c)
    for a, b in zip(c.points, back.points):
        np.testing.assert_array_equal(a.coeffs, b.coeffs)
        assert a.omega == b.omega
    assert sorted(back.events) == sorted(c.events)
    assert curve_to_csv(back) == text


def test_curve_csv_wide_grid_names():
    p = make_point(np.zeros((11, 2)), 1.2, 1)
    text = curve_to_csv(BranchCurve([p]))
    assert "u10_1" in text.splitlines()[0]
    assert curve_from_csv(text, 1).points[0].M == 11


def test_curve_csv_errors():
    with pytest.raises(ValueError):
        curve_from_csv("", 1)
    with pytest.raises(ValueError):
        curve_from_csv("a,b,c\n", 1)
    with pytest.raises(ValueError):
        curve_from_csv("index,omega,energy,residual_norm,u00,event\n0,1.2\n", 1)


def test_curve_json_roundtrip(tmp_path):
    c = _curve()
    text = curve_to_json(c)
    back = curve_from_json(text)
    assert back.provenance == c.provenance and back.events == c.events
    assert curve_to_json(back) == text
    (tmp_path / "c.json").write_text(text)
    (tmp_path / "c.csv").write_text(curve_to_csv(c))
    assert len(read_curve(tmp_path / "c.json")) == len(c)
    assert len(read_curve(tmp_path / "c.csv", nu=2)) == len(c)
    with pytest.raises(ValueError):
        read_curve(tmp_path / "c.csv")


def test_curve_json_rejects_bad_events():
    with pytest.raises(ValueError):
        curve_from_json('{"points": [], "events": [[0, "fold"]]}')
    with pytest.raises(ValueError):
        curve_from_json("[]")


def test_empty_curve_csv():
    text = curve_to_csv(BranchCurve(), shape=(1, 1))
    assert text == "index,omega,energy,residual_norm,u00,event\n"
    assert len(curve_from_csv(text, 1)) == 0


def test_scan_and_multipliers_output():
    c = _curve()
    text = scan_to_csv(c, [0.0] * len(c))
    lines = text.splitlines()
    assert lines[0] == "index,omega,energy,verdict,max_dev"
    assert lines[1].split(",")[3] == "unknown"
    assert scan_to_csv(c, [float("nan")] * len(c)).splitlines()[1].endswith(",nan")
    js = json.loads(multipliers_to_json([np.array([1j, -1j]), None]))
    assert js[0]["multipliers"] == [[0.0, 1.0], [0.0, -1.0]] and js[1]["multipliers"] == []
    assert multipliers_to_json([]) == "[]\n"


def test_field_samples():
    p = make_point(np.array([[1.5]]), 1.3, 1)
    tau, x, u = field_samples(p, 5, 4)
    assert tau[0] == 0 and tau[-1] == pytest.approx(2 * np.pi) and x[-1] == pytest.approx(np.pi)
    np.testing.assert_allclose(u, 1.5 * np.outer(np.cos(tau), np.sin(x)), atol=1e-15)
    t1, x1, u1 = field_samples(p, 1, 1)
    assert u1.shape == (1, 1) and u1[0, 0] == 0.0
    z = make_point(np.zeros((2, 2)), 1.3, 2)
    assert not field_samples(z, 3, 3)[2].any()
    with pytest.raises(ValueError):
        field_samples(p, 0, 2)
    assert field_to_csv(t1, x1, u1).splitlines()[0] == "tau,x,u"


def test_tree_csv():
    text = tree_to_csv(reducible_tree(2, 2, np.linspace(1, 4, 5)))
    lines = text.splitlines()
    assert lines[0] == "omega,energy,family,m,n,A,B"
    assert lines[1].split(",")[2] == "trunk"
