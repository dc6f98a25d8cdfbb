"""Circular-orbit LEO pass over a fixed ground point.

The Earth is a non-rotating sphere. The satellite moves on a great circle of
radius ``Re + h``; the ground point sits at a cross-track central angle chosen
so that the pass culminates at ``max_elevation_deg``. Time ``t = 0`` is the
culmination, negative times are the approaching half of the pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from trilink._validation import (
    DomainError,
    OutOfWindowError,
    check_finite,
    check_interval,
    check_positive,
)

EARTH_RADIUS_KM = 6371.0
MU_EARTH_KM3_S2 = 398600.4418
EPHEMERIS_BOUND_KM = 2.0


@dataclass(frozen=True)
class OrbitConfig:
    """Orbit and pass description.

    ``velocity_override_kms`` replaces the Keplerian speed (e.g. the nominal
    7.5 km/s figure); the pass is then flown at that speed on the same circle.
    """

    altitude_km: float
    max_elevation_deg: float = 90.0
    earth_radius_km: float = EARTH_RADIUS_KM
    mu_km3s2: float = MU_EARTH_KM3_S2
    velocity_override_kms: float | None = None

    def __post_init__(self):
        check_positive("altitude_km", self.altitude_km)
        check_positive("earth_radius_km", self.earth_radius_km)
        check_positive("mu_km3s2", self.mu_km3s2)
        elev = check_finite("max_elevation_deg", self.max_elevation_deg)
        if not 0.0 < elev <= 90.0:
            raise DomainError(f"max_elevation_deg must lie in (0, 90], got {elev!r}")
        if self.velocity_override_kms is not None:
            check_positive("velocity_override_kms", self.velocity_override_kms)

    @property
    def orbit_radius_km(self) -> float:
        return self.earth_radius_km + self.altitude_km


@dataclass(frozen=True)
class GeometrySample:
    """Instantaneous satellite/ground relationship at pass time ``t_s``.

    ``los_angle_deg`` is measured between the satellite velocity and the line
    of sight from satellite to ground, so ``cos(los) = -range_rate / speed``.
    """

    t_s: float
    slant_range_km: float
    elevation_deg: float
    los_angle_deg: float
    range_rate_kms: float
    speed_kms: float
    orbit: OrbitConfig


@dataclass(frozen=True)
class EphemerisError:
    along_track_km: float
    bound_km: float = EPHEMERIS_BOUND_KM

    def __post_init__(self):
        check_positive("bound_km", self.bound_km)
        offset = check_finite("along_track_km", self.along_track_km)
        if abs(offset) > self.bound_km:
            raise DomainError(
                f"|along_track_km| must be <= {self.bound_km}, got {offset!r}"
            )


def orbital_velocity(orbit: OrbitConfig) -> float:
    """Circular orbital speed in km/s (or the configured override)."""
    if orbit.velocity_override_kms is not None:
        return float(orbit.velocity_override_kms)
    return math.sqrt(orbit.mu_km3s2 / orbit.orbit_radius_km)


def angular_rate(orbit: OrbitConfig) -> float:
    """Rate of the satellite's central angle, rad/s."""
    return orbital_velocity(orbit) / orbit.orbit_radius_km


def slant_range(altitude_km, elevation_deg, earth_radius_km=EARTH_RADIUS_KM) -> float:
    """Ground-to-satellite distance (km) at a given elevation."""
    h = check_positive("altitude_km", altitude_km)
    re = check_positive("earth_radius_km", earth_radius_km)
    e = math.radians(check_interval("elevation_deg", elevation_deg, 0.0, 90.0))
    r = re + h
    return math.sqrt(r * r - (re * math.cos(e)) ** 2) - re * math.sin(e)


def central_angle(orbit: OrbitConfig, elevation_deg: float) -> float:
    """Earth-central angle (rad) between ground point and sub-satellite point."""
    e = math.radians(elevation_deg)
    ratio = orbit.earth_radius_km * math.cos(e) / orbit.orbit_radius_km
    return math.acos(ratio) - e


def _cross_track_angle(orbit: OrbitConfig) -> float:
    return central_angle(orbit, orbit.max_elevation_deg)


def visibility_half_window(orbit: OrbitConfig) -> float:
    """Half-duration (s) of the pass above 0 deg elevation."""
    beta = _cross_track_angle(orbit)
    cos_phase = orbit.earth_radius_km / (orbit.orbit_radius_km * math.cos(beta))
    return math.acos(min(1.0, cos_phase)) / angular_rate(orbit)


def _geometry_at(orbit: OrbitConfig, t_s: float) -> GeometrySample:
    re = orbit.earth_radius_km
    r = orbit.orbit_radius_km
    v = orbital_velocity(orbit)
    omega = v / r
    beta = _cross_track_angle(orbit)
    phase = omega * t_s
    # satellite r(cos wt, sin wt, 0); ground re(cos b, 0, sin b)
    k = r * re * math.cos(beta)
    d = math.sqrt(max(r * r + re * re - 2.0 * k * math.cos(phase), 0.0))
    rate = k * omega * math.sin(phase) / d
    # vertical and horizontal parts of the line of sight at the ground point
    up = r * math.cos(phase) * math.cos(beta) - re
    horizontal = r * math.hypot(math.cos(phase) * math.sin(beta), math.sin(phase))
    elevation = math.degrees(math.atan2(up, horizontal))
    cos_theta = max(-1.0, min(1.0, -rate / v))
    return GeometrySample(
        t_s=float(t_s),
        slant_range_km=d,
        elevation_deg=elevation,
        los_angle_deg=math.degrees(math.acos(cos_theta)),
        range_rate_kms=rate,
        speed_kms=v,
        orbit=orbit,
    )


def pass_geometry(orbit: OrbitConfig, t_s: float) -> GeometrySample:
    """Geometry of the pass at time ``t_s`` (0 = culmination).

    Raises OutOfWindowError when the satellite would be below the horizon.
    """
    t_s = check_finite("t_s", t_s)
    half = visibility_half_window(orbit)
    if abs(t_s) > half * (1.0 + 1e-12):
        raise OutOfWindowError(
            f"t_s={t_s!r} outside visibility window [-{half:.3f}, {half:.3f}] s"
        )
    sample = _geometry_at(orbit, t_s)
    if sample.elevation_deg < 0.0:
        sample = replace(sample, elevation_deg=0.0)
    return sample


def apply_ephemeris_error(sample: GeometrySample, err: EphemerisError) -> GeometrySample:
    """Geometry as predicted from ephemeris displaced along-track by ``err``.

    The satellite is moved along its orbit by the offset, so the predicted
    range differs from the true one by at most the chord, itself at most
    ``|along_track_km|``. ``t_s`` stays the true sample time.
    """
    if err.along_track_km == 0.0:
        return sample
    orbit = sample.orbit
    dt = err.along_track_km / sample.speed_kms
    predicted = _geometry_at(orbit, sample.t_s + dt)
    return replace(
        predicted,
        t_s=sample.t_s,
        elevation_deg=min(90.0, max(0.0, predicted.elevation_deg)),
    )


def pass_samples(orbit: OrbitConfig, times):
    """Samples for every time inside the window; out-of-window times are skipped.

    Returns ``(samples, n_skipped)``.
    """
    samples = []
    skipped = 0
    for t in times:
        try:
            samples.append(pass_geometry(orbit, t))
        except OutOfWindowError:
            skipped += 1
    return samples, skipped

