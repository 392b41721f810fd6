import json
import math

import numpy as np
import pytest

import oracles
from emsim import geometry
from emsim.errors import EmptyLayout, NonConductive


def test_layout_defaults_match_reference_parameters():
    layout = geometry.ConductorLayout(centers=((0.0, 0.0),))
    assert layout.radius_m == 5.0e-3
    assert layout.boundary_margin_m == pytest.approx(15.0e-3)
    mat = geometry.MaterialSpec()
    assert mat.conductivity_S_per_m == 58.1e6
    exc = geometry.ExcitationSpec()
    assert exc.frequency_Hz == 50.0
    assert exc.current_amplitude_A == 1.0


def test_boundary_margin_scales_with_radius():
    small = geometry.ConductorLayout(centers=((0.0, 0.0),), radius_m=1e-3)
    assert small.boundary_margin_m == pytest.approx(3e-3)
    explicit = geometry.ConductorLayout(centers=((0.0, 0.0),), radius_m=1e-3,
                                        boundary_margin_m=0.5)
    assert explicit.boundary_margin_m == 0.5


def test_empty_layout_rejected():
    with pytest.raises(EmptyLayout):
        geometry.ConductorLayout(centers=())
    with pytest.raises(EmptyLayout):
        geometry.centroid([])


def test_bad_values_rejected():
    with pytest.raises(ValueError):
        geometry.ConductorLayout(centers=((float("nan"), 0.0),))
    with pytest.raises(ValueError):
        geometry.ConductorLayout(centers=((0.0, 0.0),), radius_m=0.0)
    with pytest.raises(ValueError):
        geometry.ConductorLayout(centers=((0.0, 0.0),), boundary_margin_m=-1.0)
    with pytest.raises(ValueError):
        geometry.ExcitationSpec(frequency_Hz=-1.0)
    with pytest.raises(ValueError):
        geometry.MaterialSpec(conductivity_S_per_m=-1.0)
    with pytest.raises(ValueError):
        geometry.MaterialSpec(reluctivity=0.0)


def test_boundary_circle_encloses_all_conductors():
    pts = oracles.circle_layout(12, 0.03)
    layout = geometry.ConductorLayout.from_points(pts, radius_m=5e-3)
    dom = geometry.boundary(layout)
    assert dom.center[0] == pytest.approx(0.0, abs=1e-15)
    assert dom.center[1] == pytest.approx(0.0, abs=1e-15)
    # ring radius 0.03 plus the default margin of three conductor radii
    assert dom.radius_m == pytest.approx(0.03 + 3 * 5e-3)
    for x, y in pts:
        assert math.hypot(x - dom.center[0], y - dom.center[1]) + layout.radius_m \
            <= dom.radius_m + 1e-12


def test_boundary_of_asymmetric_layout_uses_centroid():
    layout = geometry.ConductorLayout.from_points(
        [(0.0, 0.0), (0.1, 0.0)], radius_m=5e-3)
    dom = geometry.boundary(layout)
    assert dom.center == pytest.approx((0.05, 0.0))
    assert dom.radius_m == pytest.approx(0.05 + 0.015)


def test_overlap_detection():
    ok = geometry.ConductorLayout.from_points([(0.0, 0.0), (0.02, 0.0)],
                                              radius_m=5e-3)
    assert geometry.check_overlap(ok) == []

    bad = geometry.ConductorLayout.from_points([(0.0, 0.0), (0.009, 0.0)],
                                               radius_m=5e-3)
    assert geometry.check_overlap(bad) == [(0, 1)]


def test_tangent_conductors_count_as_overlapping():
    touching = geometry.ConductorLayout.from_points([(0.0, 0.0), (0.01, 0.0)],
                                                    radius_m=5e-3)
    assert geometry.check_overlap(touching) == [(0, 1)]


def test_overlap_reports_every_pair():
    layout = geometry.ConductorLayout.from_points(
        [(0.0, 0.0), (0.001, 0.0), (0.002, 0.0)], radius_m=5e-3)
    assert geometry.check_overlap(layout) == [(0, 1), (0, 2), (1, 2)]


def test_skin_depth_against_analytic_value():
    mat = geometry.MaterialSpec()
    exc = geometry.ExcitationSpec()
    delta = geometry.skin_depth(mat, exc)
    assert delta == pytest.approx(oracles.SKIN_DEPTH_50HZ_REF, rel=1e-14)


def test_skin_depth_edge_cases():
    mat = geometry.MaterialSpec()
    assert geometry.skin_depth(mat, geometry.ExcitationSpec(frequency_Hz=0.0)) \
        == math.inf
    with pytest.raises(NonConductive):
        geometry.skin_depth(geometry.MaterialSpec(conductivity_S_per_m=0.0),
                            geometry.ExcitationSpec())


def test_angular_frequency():
    exc = geometry.ExcitationSpec(frequency_Hz=50.0)
    assert exc.angular_frequency == pytest.approx(100.0 * math.pi)


def test_layout_json_round_trip(tmp_path):
    layout = geometry.ConductorLayout.from_points(
        [(0.001, -0.002), (0.02, 0.013)], radius_m=4e-3, boundary_margin_m=0.05)
    path = tmp_path / "layout.json"
    layout.save(path)
    data = json.loads(path.read_text())
    assert data["radius_m"] == 4e-3
    back = geometry.ConductorLayout.load(path)
    assert back == layout


def test_center_array_shape():
    layout = geometry.ConductorLayout.from_points([(1.0, 2.0), (3.0, 4.0)])
    arr = layout.center_array()
    assert arr.shape == (2, 2)
    assert np.array_equal(arr, [[1.0, 2.0], [3.0, 4.0]])
    assert layout.count == 2
