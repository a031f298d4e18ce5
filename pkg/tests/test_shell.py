from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leotopo.shell import (
    STARLINK_SHELL1, AngularOffset, SatelliteState, ShellConfig, d_los, d_los_km, d_stab,
    generate_synthetic_shell, instantaneous_distance, max_separation, plane_span, position_at,
)

SHELL1 = ShellConfig(**STARLINK_SHELL1)
R1 = 6371.0 + 550.0

angles = st.floats(min_value=0.0, max_value=360.0, allow_nan=False, exclude_max=True)
inclinations = st.floats(min_value=1.0, max_value=179.0)


def rotation_oracle(raan, u, inc, radius):
    """Independent construction: rotate an in-plane point by Rx(inc) then Rz(raan)."""
    o, i, a = math.radians(raan), math.radians(inc), math.radians(u)
    rz = np.array([[math.cos(o), -math.sin(o), 0], [math.sin(o), math.cos(o), 0], [0, 0, 1]])
    rx = np.array([[1, 0, 0], [0, math.cos(i), -math.sin(i)], [0, math.sin(i), math.cos(i)]])
    return rz @ rx @ np.array([radius * math.cos(a), radius * math.sin(a), 0.0])


# -- configuration ---------------------------------------------------------
def test_shell1_has_1584_satellites():
    assert len(generate_synthetic_shell(SHELL1)) == 1584


def test_single_satellite_shell_sits_at_origin_offsets():
    snap = generate_synthetic_shell(ShellConfig(1, 1, 550, 53))
    (s,) = snap.satellites
    assert (s.raan_deg, s.anomaly_deg) == (0.0, 0.0)


def test_toy_phasing_zero_slot():
    snap = generate_synthetic_shell(ShellConfig(12, 12, 550, 53, phasing_offset_deg=0.0))
    s = snap.get(3 * 12 + 0)
    assert s.plane_index == 3 and s.raan_deg == 90.0 and s.anomaly_deg == 0.0


def test_default_phasing_is_one_slot_over_all_satellites():
    assert SHELL1.phasing_offset_deg == pytest.approx(360.0 / 1584)


@pytest.mark.parametrize("kwargs", [
    dict(num_planes=0, sats_per_plane=1, altitude_km=550, inclination_deg=53),
    dict(num_planes=1, sats_per_plane=0, altitude_km=550, inclination_deg=53),
    dict(num_planes=1, sats_per_plane=1, altitude_km=550, inclination_deg=53, atmosphere_km=550),
    dict(num_planes=1, sats_per_plane=1, altitude_km=550, inclination_deg=53, atmosphere_km=0),
    dict(num_planes=1, sats_per_plane=1, altitude_km=550, inclination_deg=0),
    dict(num_planes=1, sats_per_plane=1, altitude_km=550, inclination_deg=180),
    dict(num_planes=1, sats_per_plane=1, altitude_km=550, inclination_deg=53, sweep_resolution_deg=7),
])
def test_invalid_configs_rejected(kwargs):
    with pytest.raises(ValueError):
        ShellConfig(**kwargs)


def test_angles_wrap():
    s = SatelliteState(1, 0, 400.0, -30.0)
    assert s.raan_deg == pytest.approx(40.0) and s.anomaly_deg == pytest.approx(330.0)
    off = AngularOffset.between(s, s)
    assert (off.d_raan_deg, off.d_anomaly_deg) == (0.0, 0.0)


# -- positions ---------------------------------------------------------------
def test_ascending_node_position():
    p = position_at(SatelliteState(0, 0, 0.0, 0.0), SHELL1)
    np.testing.assert_allclose(p, [R1, 0.0, 0.0], atol=1e-9)


@given(angles, angles, inclinations, st.floats(-720, 720))
def test_position_matches_rotation_oracle_and_norm(raan, u, inc, phase):
    cfg = ShellConfig(1, 1, 550.0, inc)
    p = position_at(SatelliteState(0, 0, raan, u), cfg, phase)
    np.testing.assert_allclose(p, rotation_oracle(raan, u + phase, inc, R1), atol=1e-6)
    assert abs(np.linalg.norm(p) - R1) < 1e-6


def test_equal_angles_equal_positions():
    a, b = SatelliteState(1, 0, 12.5, 99.0), SatelliteState(2, 0, 12.5, 99.0)
    assert instantaneous_distance(a, b, SHELL1, 33.0) == 0.0


# -- distances -------------------------------------------------------------------
def test_adjacent_intra_plane_spacing_is_the_chord_and_phase_invariant():
    a, b = SatelliteState(0, 0, 0, 0), SatelliteState(1, 0, 0, 360 / 22)
    chord = 2 * R1 * math.sin(math.radians(360 / 22 / 2))
    for phase in (0.0, 17.0, 123.0, 271.5):
        assert instantaneous_distance(a, b, SHELL1, phase) == pytest.approx(chord, abs=1e-6)
    assert chord == pytest.approx(1970, abs=1.0)
    # published spacing of roughly 1,950 km, 3% band
    assert abs(chord - 1950) / 1950 < 0.03


def test_antipodal_same_plane_is_a_diameter():
    a, b = SatelliteState(0, 0, 0, 0), SatelliteState(1, 0, 0, 180)
    assert instantaneous_distance(a, b, SHELL1) == pytest.approx(2 * R1)


@settings(max_examples=60)
@given(angles, angles, angles, angles, st.floats(0, 360))
def test_distance_symmetric_and_bounded(r1, u1, r2, u2, phase):
    a, b = SatelliteState(0, 0, r1, u1), SatelliteState(1, 0, r2, u2)
    d = instantaneous_distance(a, b, SHELL1, phase)
    assert d == pytest.approx(instantaneous_distance(b, a, SHELL1, phase), abs=1e-9)
    assert d <= 2 * R1 + 1e-6


def test_max_separation_examples():
    assert max_separation(AngularOffset(0, 0), SHELL1) == 0.0
    chord = 2 * R1 * math.sin(math.radians(360 / 22 / 2))
    assert max_separation(AngularOffset(0, 360 / 22), SHELL1) == pytest.approx(chord, abs=1e-6)


@settings(max_examples=40)
@given(angles, angles)
def test_max_separation_pair_symmetry(dr, du):
    a = max_separation(AngularOffset(dr, du), SHELL1)
    b = max_separation(AngularOffset(360 - dr, 360 - du), SHELL1)
    # mirrored offsets sample the orbit at shifted phases; stays within grid error
    assert a == pytest.approx(b, abs=1.0)


@settings(max_examples=40)
@given(angles, angles, angles, angles)
def test_max_separation_depends_only_on_offset(dr, du, raan_a, u_a):
    a = SatelliteState(0, 0, raan_a, u_a)
    b = SatelliteState(1, 0, raan_a + dr, u_a + du)
    sweep = max(instantaneous_distance(a, b, SHELL1, float(ph)) for ph in range(360))
    assert sweep == pytest.approx(max_separation(AngularOffset(dr, du), SHELL1), abs=1.0)


@settings(max_examples=40)
@given(angles, angles, st.floats(0, 360))
def test_instantaneous_never_exceeds_worst_case(dr, du, phase):
    a, b = SatelliteState(0, 0, 0, 0), SatelliteState(1, 0, dr, du)
    assert instantaneous_distance(a, b, SHELL1, phase) <= max_separation(AngularOffset(dr, du), SHELL1) + 1.0


# -- closed-form bounds ------------------------------------------------------------
def midpoint_altitude_oracle(altitude, atmosphere, earth=6371.0):
    """Bisect on chord length until the chord's lowest point grazes ``atmosphere``."""
    radius = earth + altitude

    def lowest_altitude(d):
        theta = 2 * math.asin(min(1.0, d / (2 * radius)))
        a = np.array([radius, 0.0])
        b = np.array([radius * math.cos(theta), radius * math.sin(theta)])
        seg = b - a
        t = np.clip(-a @ seg / (seg @ seg), 0, 1)
        return np.linalg.norm(a + t * seg) - earth

    lo, hi = 0.0, 2 * radius
    for _ in range(200):
        mid = (lo + hi) / 2
        if lowest_altitude(mid) > atmosphere:
            lo = mid
        else:
            hi = mid
    return lo


def test_d_los_shell1_against_closed_form_and_geometry():
    closed = 2 * math.sqrt((6371 + 550) ** 2 - (6371 + 80) ** 2)
    assert d_los(SHELL1) == pytest.approx(5013.9, abs=0.5)
    assert d_los(SHELL1) == pytest.approx(closed, abs=1e-9)
    assert abs(d_los(SHELL1) - midpoint_altitude_oracle(550, 80)) < 1e-3


def test_d_los_grazing_altitude_is_zero():
    assert d_los_km(550.0, 550.0) == 0.0
    with pytest.raises(ValueError):
        d_los_km(550.0, 600.0)


@given(st.floats(100, 3000), st.floats(10, 3000))
def test_d_los_increases_with_altitude(h, dh):
    assert d_los_km(h + dh, 80.0) > d_los_km(h, 80.0)


@settings(max_examples=25)
@given(st.floats(200, 3000), st.floats(20, 150))
def test_d_los_geometric_oracle(h, a):
    assert abs(d_los_km(h, a) - midpoint_altitude_oracle(h, a)) < 1e-3


def test_d_stab_examples():
    assert d_stab(SHELL1) == pytest.approx(d_los(SHELL1))
    assert d_stab(ShellConfig(72, 22, 550, 53, max_isl_range_km=1000.0)) == 1000.0
    same = ShellConfig(72, 22, 550, 53, max_isl_range_km=d_los(SHELL1))
    assert d_stab(same) == d_los(SHELL1)


def test_plane_span_examples():
    assert plane_span(0, 70, 72) == 2
    assert plane_span(5, 5, 72) == 0
    assert plane_span(0, 36, 72) == 36
    with pytest.raises(ValueError):
        plane_span(0, 72, 72)


@given(st.integers(1, 200).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n - 1), st.integers(0, n - 1))))
def test_plane_span_symmetric_and_bounded(args):
    n, i, j = args
    assert plane_span(i, j, n) == plane_span(j, i, n) <= n // 2
