"""Doppler, compensation residuals, frequency tracking and timing advance."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from trilink._validation import (
    DomainError,
    OutOfWindowError,
    check_finite,
    check_interval,
    check_non_negative,
    check_positive,
)
from trilink.geometry import (
    EphemerisError,
    GeometrySample,
    OrbitConfig,
    pass_geometry,
    visibility_half_window,
)

SPEED_OF_LIGHT_MS = 2.998e8
L_BAND_HZ = 1.6e9

# acquisition / tracking envelope of a LEO-capable frequency loop
MAX_ACQUIRE_OFFSET_KHZ = 40.0
MAX_TRACK_RATE_KHZ_S = 1.0

# (residual kHz, penalty dB)
PENALTY_ANCHORS = ((0.0, 0.0), (0.2, 0.5), (0.5, 1.0), (1.0, 3.0))

DOPPLER_RATE_STEP_S = 0.1


class System(str, enum.Enum):
    D2C = "D2C"
    NTN = "NTN"


class StrategyKind(str, enum.Enum):
    D2C_PRECOMP = "D2C_PRECOMP"
    NTN_JOINT = "NTN_JOINT"


@dataclass(frozen=True)
class CarrierConfig:
    f_c_hz: float = L_BAND_HZ
    c_ms: float = SPEED_OF_LIGHT_MS
    min_hz: float = 1.0e9
    max_hz: float = 3.0e9

    def __post_init__(self):
        check_positive("c_ms", self.c_ms)
        check_interval("f_c_hz", self.f_c_hz, self.min_hz, self.max_hz)


@dataclass(frozen=True)
class DopplerProfile:
    shift_hz: float
    rate_hz_s: float
    t_s: float


@dataclass(frozen=True)
class CompensationStrategy:
    """Residual-error model for one compensation approach.

    The D2C residual is the quadrature sum of an ephemeris term (linear in the
    along-track error), the perpendicular user-motion Doppler, and a fixed
    atmospheric floor, capped at ``d2c_residual_bound_khz[1]``. The NTN
    residual is the post-convergence tracking jitter, bounded by
    ``ntn_residual_bound_khz`` whatever the ephemeris error.
    """

    kind: StrategyKind
    d2c_residual_bound_khz: tuple[float, float] = (0.5, 1.0)
    ntn_residual_bound_khz: float = 0.2
    ntn_convergence_ms: float = 100.0
    ephemeris_khz_per_km: float = 0.35
    atmospheric_floor_khz: float = 0.1

    def __post_init__(self):
        lo, hi = self.d2c_residual_bound_khz
        check_positive("d2c lower bound", lo)
        check_positive("d2c upper bound", hi)
        check_positive("ntn_residual_bound_khz", self.ntn_residual_bound_khz)
        check_positive("ntn_convergence_ms", self.ntn_convergence_ms)
        check_non_negative("ephemeris_khz_per_km", self.ephemeris_khz_per_km)
        check_non_negative("atmospheric_floor_khz", self.atmospheric_floor_khz)
        if lo > hi:
            raise DomainError("d2c residual bounds must be ordered")
        if self.ntn_residual_bound_khz >= lo:
            raise DomainError("NTN residual bound must be below the D2C lower bound")

    @property
    def bound_khz(self) -> float:
        if self.kind is StrategyKind.NTN_JOINT:
            return self.ntn_residual_bound_khz
        return self.d2c_residual_bound_khz[1]


@dataclass(frozen=True)
class ResidualError:
    """Post-compensation frequency error; ``residual_khz`` is signed."""

    residual_khz: float
    kind: StrategyKind
    ephemeris_khz: float = 0.0
    user_motion_khz: float = 0.0
    floor_khz: float = 0.0

    @property
    def magnitude_khz(self) -> float:
        return abs(self.residual_khz)


@dataclass(frozen=True)
class AcquireResult:
    success: bool
    convergence_ms: float | None


@dataclass(frozen=True)
class TimingAdvanceState:
    ta_s: float
    ta_rate_s_per_s: float

    @property
    def ta_ms(self) -> float:
        return self.ta_s * 1e3

    @property
    def ta_rate_us_per_s(self) -> float:
        return self.ta_rate_s_per_s * 1e6


@dataclass(frozen=True)
class SyncModel:
    system: System
    resync_ms: float

    def __post_init__(self):
        if self.system is System.D2C and self.resync_ms < 150.0:
            raise DomainError("D2C re-sync latency is at least 150 ms")
        if self.system is System.NTN and not 50.0 <= self.resync_ms <= 100.0:
            raise DomainError("NTN re-sync latency lies in [50, 100] ms")


def doppler_shift(carrier: CarrierConfig, v_kms, theta_deg) -> float:
    """Doppler shift in Hz; positive while the satellite approaches."""
    theta = check_interval("theta_deg", theta_deg, 0.0, 180.0)
    v = check_finite("v_kms", v_kms) * 1e3
    return carrier.f_c_hz * v * math.cos(math.radians(theta)) / carrier.c_ms


def doppler_at(carrier: CarrierConfig, sample: GeometrySample) -> float:
    return doppler_shift(carrier, sample.speed_kms, sample.los_angle_deg)


def doppler_rate(
    carrier: CarrierConfig,
    orbit: OrbitConfig,
    t_s,
    step_s: float = DOPPLER_RATE_STEP_S,
) -> float:
    """Doppler drift (Hz/s) by central difference of the shift along the pass.

    Falls back to a one-sided difference within ``step_s`` of the horizon.
    """
    centre = pass_geometry(orbit, t_s)  # raises when out of window
    half = visibility_half_window(orbit)
    lo, hi = t_s - step_s, t_s + step_s
    if lo < -half:
        lo = t_s
    if hi > half:
        hi = t_s
    if hi == lo:
        raise OutOfWindowError("visibility window shorter than the difference step")

    f0 = doppler_at(carrier, centre)
    f_lo = f0 if lo == t_s else doppler_at(carrier, pass_geometry(orbit, lo))
    f_hi = f0 if hi == t_s else doppler_at(carrier, pass_geometry(orbit, hi))
    return (f_hi - f_lo) / (hi - lo)


def doppler_profile(carrier: CarrierConfig, orbit: OrbitConfig, t_s) -> DopplerProfile:
    sample = pass_geometry(orbit, t_s)
    return DopplerProfile(
        shift_hz=doppler_at(carrier, sample),
        rate_hz_s=doppler_rate(carrier, orbit, t_s),
        t_s=float(t_s),
    )


def compensate(
    strategy: CompensationStrategy,
    true_doppler: DopplerProfile,
    ephem_err: EphemerisError,
    user_speed_ms,
    rng_seed,
    carrier: CarrierConfig | None = None,
) -> ResidualError:
    """Residual frequency error left by ``strategy``.

    The seed fixes the direction of user motion relative to the line of
    sight (D2C) or the tracking-jitter draw (NTN), and the residual's sign.
    ``true_doppler`` is what the compensator removes; the residual does not
    depend on its size because both approaches cancel the bulk shift.
    """
    del true_doppler
    speed = check_non_negative("user_speed_ms", user_speed_ms)
    carrier = carrier or CarrierConfig()
    rng = np.random.default_rng(rng_seed)
    direction = rng.uniform(0.0, 2.0 * math.pi)
    jitter = rng.uniform(-1.0, 1.0)
    sign = 1.0 if rng.random() < 0.5 else -1.0

    if strategy.kind is StrategyKind.NTN_JOINT:
        return ResidualError(
            residual_khz=strategy.ntn_residual_bound_khz * jitter,
            kind=strategy.kind,
        )

    ephem = strategy.ephemeris_khz_per_km * abs(ephem_err.along_track_km)
    motion = carrier.f_c_hz * speed * abs(math.sin(direction)) / carrier.c_ms / 1e3
    floor = strategy.atmospheric_floor_khz
    magnitude = min(math.sqrt(ephem**2 + motion**2 + floor**2), strategy.bound_khz)
    return ResidualError(
        residual_khz=sign * magnitude,
        kind=strategy.kind,
        ephemeris_khz=ephem,
        user_motion_khz=motion,
        floor_khz=floor,
    )


def margin_penalty(residual_khz) -> float:
    """Link-margin penalty (dB) caused by a residual frequency error (kHz)."""
    residual = check_non_negative("residual_khz", residual_khz)
    xs, ys = zip(*PENALTY_ANCHORS)
    return float(np.interp(residual, xs, ys))


def tracking_acquire(offset_khz, rate_khz_s, system: System) -> AcquireResult:
    offset = check_finite("offset_khz", offset_khz)
    rate = check_finite("rate_khz_s", rate_khz_s)
    ok = abs(offset) <= MAX_ACQUIRE_OFFSET_KHZ and abs(rate) <= MAX_TRACK_RATE_KHZ_S
    if not ok:
        return AcquireResult(False, None)
    return AcquireResult(True, 100.0 if System(system) is System.NTN else 150.0)


def timing_advance(sample: GeometrySample, c_ms: float = SPEED_OF_LIGHT_MS) -> TimingAdvanceState:
    """Two-way delay and its drift for one geometry sample."""
    return TimingAdvanceState(
        ta_s=2.0 * sample.slant_range_km * 1e3 / c_ms,
        ta_rate_s_per_s=2.0 * sample.range_rate_kms * 1e3 / c_ms,
    )


def resync_latency(system: System, predictive: bool = False, rng_seed=None) -> float:
    """Re-synchronisation latency (ms) after a handover.

    ``rng_seed`` may also be a ``numpy.random.Generator``; simcore passes its
    handover stream directly.
    """
    system = System(system)
    if system is System.NTN and predictive:
        return 100.0
    rng = np.random.default_rng(rng_seed)
    if system is System.D2C:
        return float(rng.uniform(150.0, 250.0))
    return float(rng.uniform(50.0, 100.0))
