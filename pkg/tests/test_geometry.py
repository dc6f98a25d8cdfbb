import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trilink._validation import DomainError, OutOfWindowError
from trilink.geometry import (
    EphemerisError,
    OrbitConfig,
    apply_ephemeris_error,
    orbital_velocity,
    pass_geometry,
    slant_range,
    visibility_half_window,
)

RE = 6371.0
MU = 398600.4418


def slant_range_oracle(h, elev_deg, re=RE):
    """Bisection on the central angle using explicit 2-D vectors."""
    r = re + h
    ground = np.array([0.0, re])

    def elevation(gamma):
        sat = np.array([r * math.sin(gamma), r * math.cos(gamma)])
        los = sat - ground
        return math.degrees(math.asin(los @ ground / (np.linalg.norm(los) * re)))

    lo, hi = 0.0, math.acos(re / r)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if elevation(mid) > elev_deg:
            lo = mid
        else:
            hi = mid
    gamma = 0.5 * (lo + hi)
    sat = np.array([r * math.sin(gamma), r * math.cos(gamma)])
    return float(np.linalg.norm(sat - ground))


def propagate_two_body(r0, v0, duration_s, dt=1e-3):
    """Plain RK4 integration of the point-mass equations of motion."""

    def acc(r):
        return -MU * r / np.linalg.norm(r) ** 3

    r, v = np.array(r0, float), np.array(v0, float)
    for _ in range(int(round(duration_s / dt))):
        k1r, k1v = v, acc(r)
        k2r, k2v = v + 0.5 * dt * k1v, acc(r + 0.5 * dt * k1r)
        k3r, k3v = v + 0.5 * dt * k2v, acc(r + 0.5 * dt * k2r)
        k4r, k4v = v + dt * k3v, acc(r + dt * k3r)
        r = r + dt / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r)
        v = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return r


# frozen from slant_range_oracle
ORACLE_500_0 = 2573.1304
ORACLE_500_30 = 909.4249


def test_oracle_values_are_frozen_correctly():
    assert slant_range_oracle(500, 0) == pytest.approx(ORACLE_500_0, abs=1e-3)
    assert slant_range_oracle(500, 30) == pytest.approx(ORACLE_500_30, abs=1e-3)


class TestOrbitalVelocity:
    def test_500km(self):
        assert orbital_velocity(OrbitConfig(500)) == pytest.approx(7.6166, abs=1e-4)
        assert orbital_velocity(OrbitConfig(500)) == pytest.approx(7.5, rel=0.05)

    def test_surface_grazing(self):
        # altitude must be > 0, so approach the limit; 7.9098 with the mean
        # radius, 7.9054 with the equatorial radius 6378.137 km
        assert orbital_velocity(OrbitConfig(1e-9)) == pytest.approx(7.9098, abs=1e-4)
        grazing = OrbitConfig(1e-9, earth_radius_km=6378.137)
        assert orbital_velocity(grazing) == pytest.approx(7.9054, abs=1e-4)

    def test_override(self):
        assert orbital_velocity(OrbitConfig(500, velocity_override_kms=7.5)) == 7.5

    @given(st.floats(400, 2000))
    def test_leo_band(self, h):
        assert 6.9 <= orbital_velocity(OrbitConfig(h)) <= 7.7

    @pytest.mark.parametrize("kwargs", [
        dict(altitude_km=0), dict(altitude_km=-1), dict(altitude_km=500, max_elevation_deg=0),
        dict(altitude_km=500, max_elevation_deg=91), dict(altitude_km=500, earth_radius_km=0),
    ])
    def test_invalid_config(self, kwargs):
        with pytest.raises(DomainError):
            OrbitConfig(**kwargs)


class TestSlantRange:
    def test_zenith(self):
        assert slant_range(500, 90) == pytest.approx(500.0, abs=1e-9)

    def test_horizon(self):
        assert slant_range(500, 0) == pytest.approx(ORACLE_500_0, abs=1e-3)
        assert round(slant_range(500, 0), 1) == 2573.1

    def test_thirty_degrees(self):
        d = slant_range(500, 30)
        assert d == pytest.approx(ORACLE_500_30, abs=1e-3)
        assert 400 <= d <= 2000

    @pytest.mark.parametrize("e", [-0.1, 90.1, float("nan")])
    def test_domain(self, e):
        with pytest.raises(DomainError):
            slant_range(500, e)

    @given(st.floats(200, 2000), st.floats(0, 89.9), st.floats(0.01, 5))
    def test_monotone_in_elevation(self, h, e, de):
        assert slant_range(h, min(90, e + de)) < slant_range(h, e)

    @settings(max_examples=25)
    @given(st.floats(300, 1500), st.floats(0, 90))
    def test_matches_oracle(self, h, e):
        assert slant_range(h, e) == pytest.approx(slant_range_oracle(h, e), rel=1e-6)


class TestPassGeometry:
    def test_culmination(self):
        s = pass_geometry(OrbitConfig(500), 0.0)
        assert s.elevation_deg == pytest.approx(90.0, abs=1e-6)
        assert s.slant_range_km == pytest.approx(500.0, abs=1e-9)
        assert s.range_rate_kms == 0.0
        assert s.los_angle_deg == pytest.approx(90.0)

    @given(st.floats(0, 300), st.floats(5, 90))
    def test_symmetry(self, t, emax):
        orbit = OrbitConfig(500, emax)
        t = min(t, visibility_half_window(orbit))
        a, b = pass_geometry(orbit, -t), pass_geometry(orbit, t)
        assert a.slant_range_km == pytest.approx(b.slant_range_km, rel=1e-12)
        assert a.range_rate_kms == pytest.approx(-b.range_rate_kms, rel=1e-9, abs=1e-12)

    def test_against_two_body_propagation(self):
        orbit = OrbitConfig(500)
        r = orbit.orbit_radius_km
        v = orbital_velocity(orbit)
        sat = propagate_two_body([r, 0.0, 0.0], [0.0, v, 0.0], 60.0)
        ground = np.array([RE, 0.0, 0.0])
        brute = float(np.linalg.norm(sat - ground))
        assert pass_geometry(orbit, 60.0).slant_range_km == pytest.approx(brute, abs=0.5)

    @settings(max_examples=40)
    @given(st.floats(-0.95, 0.95), st.floats(10, 90), st.floats(400, 2000))
    def test_range_rate_is_derivative(self, frac, emax, h):
        orbit = OrbitConfig(h, emax)
        t = frac * visibility_half_window(orbit)
        step = 1e-3
        num = (pass_geometry(orbit, t + step).slant_range_km
               - pass_geometry(orbit, t - step).slant_range_km) / (2 * step)
        s = pass_geometry(orbit, t)
        assert s.range_rate_kms == pytest.approx(num, rel=1e-3, abs=1e-6)

    @given(st.floats(-1, 1), st.floats(1, 90), st.floats(400, 2000))
    def test_los_angle_consistency(self, frac, emax, h):
        orbit = OrbitConfig(h, emax)
        s = pass_geometry(orbit, frac * visibility_half_window(orbit))
        v = orbital_velocity(orbit)
        lhs = math.cos(math.radians(s.los_angle_deg)) * v + s.range_rate_kms
        assert abs(lhs) <= 1e-6 * v
        assert 0 <= s.elevation_deg <= 90
        assert 0 <= s.los_angle_deg <= 180
        assert s.slant_range_km >= h - 1e-9

    @given(st.floats(1, 90), st.floats(300, 1500))
    def test_min_range_equals_altitude_iff_overhead(self, emax, h):
        s = pass_geometry(OrbitConfig(h, emax), 0.0)
        if emax == 90:
            assert s.slant_range_km == pytest.approx(h)
        elif emax < 89.999:
            assert s.slant_range_km > h
        assert s.elevation_deg == pytest.approx(emax, abs=1e-6)

    def test_out_of_window(self):
        orbit = OrbitConfig(500)
        half = visibility_half_window(orbit)
        assert pass_geometry(orbit, half).elevation_deg == pytest.approx(0, abs=1e-6)
        with pytest.raises(OutOfWindowError):
            pass_geometry(orbit, half + 1.0)


class TestEphemeris:
    def test_zero_is_identity(self):
        s = pass_geometry(OrbitConfig(500), 30.0)
        assert apply_ephemeris_error(s, EphemerisError(0.0)) == s

    def test_bounded_perturbation(self):
        orbit = OrbitConfig(500)
        s = pass_geometry(orbit, 0.0)
        p = apply_ephemeris_error(s, EphemerisError(2.0))
        assert s.slant_range_km == pytest.approx(500)
        assert abs(p.slant_range_km - s.slant_range_km) <= 2.0
        assert p.t_s == s.t_s

    def test_deterministic(self):
        s = pass_geometry(OrbitConfig(500), -120.0)
        e = EphemerisError(-1.5)
        assert apply_ephemeris_error(s, e) == apply_ephemeris_error(s, e)

    @given(st.floats(-1, 1), st.floats(-2, 2), st.floats(5, 90))
    def test_triangle_inequality(self, frac, err, emax):
        orbit = OrbitConfig(500, emax)
        s = pass_geometry(orbit, frac * visibility_half_window(orbit))
        p = apply_ephemeris_error(s, EphemerisError(err))
        assert abs(p.slant_range_km - s.slant_range_km) <= abs(err) + 1e-9
        assert 0 <= p.elevation_deg <= 90

    def test_bound_enforced(self):
        with pytest.raises(DomainError):
            EphemerisError(2.5)
