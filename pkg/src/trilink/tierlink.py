"""Statistical models of the three connectivity tiers.

Latency is one-way service latency in ms. Throughput is carried in the
tier's native unit (Mbps for terrestrial and NTN, kbps for D2C);
``LinkInstance.throughput_kbps`` normalises it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from trilink._validation import (
    DomainError,
    MismatchError,
    check_interval,
    check_non_negative,
    check_probability,
)


class Tier(enum.IntEnum):
    """Tiers in priority order: a lower value is a higher priority."""

    T1_TERRESTRIAL = 1
    T2_NTN = 2
    T3_D2C = 3

    @property
    def short(self) -> str:
        return f"T{self.value}"

    @classmethod
    def parse(cls, text) -> "Tier":
        if isinstance(text, Tier):
            return text
        text = str(text).upper()
        for tier in cls:
            if text in (tier.name, tier.short):
                return tier
        raise ValueError(f"unknown tier {text!r}")


class D2cRouting(str, enum.Enum):
    GATEWAY = "GATEWAY"
    ISL = "ISL"


class NtnPayload(str, enum.Enum):
    TRANSPARENT = "TRANSPARENT"
    REGENERATIVE_ISL = "REGENERATIVE_ISL"


class ZoneKind(str, enum.Enum):
    URBAN = "URBAN"
    SUBURBAN = "SUBURBAN"
    RURAL = "RURAL"
    MARITIME = "MARITIME"


@dataclass(frozen=True)
class Range:
    lo: float
    hi: float

    def __post_init__(self):
        check_non_negative("range lower bound", self.lo)
        check_non_negative("range upper bound", self.hi)
        if self.lo > self.hi:
            raise DomainError(f"empty range [{self.lo}, {self.hi}]")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def __contains__(self, value) -> bool:
        return self.lo <= value <= self.hi

    def at(self, u: float) -> float:
        """Point at fraction ``u`` of the way from ``lo`` to ``hi``."""
        return self.lo + (self.hi - self.lo) * u

    def scaled(self, factor: float) -> "Range":
        return Range(self.lo * factor, self.hi * factor)

    def as_list(self):
        return [self.lo, self.hi]


@dataclass(frozen=True)
class LinkVariant:
    d2c_routing: D2cRouting = D2cRouting.GATEWAY
    ntn_payload: NtnPayload = NtnPayload.TRANSPARENT

    def __post_init__(self):
        object.__setattr__(self, "d2c_routing", D2cRouting(self.d2c_routing))
        object.__setattr__(self, "ntn_payload", NtnPayload(self.ntn_payload))


@dataclass(frozen=True)
class TierProfile:
    """Per-tier statistical model.

    ``availability`` is the probability the link is up while in coverage;
    coverage itself comes from the route. ``latency_ms`` of ``None`` means
    the variant table of ``effective_latency`` applies.
    """

    tier: Tier
    throughput: Range
    throughput_unit: str
    availability: float
    coverage_fraction: float
    power_multiplier: Range
    latency_ms: Range | None = None

    def __post_init__(self):
        check_probability("availability", self.availability)
        check_probability("coverage_fraction", self.coverage_fraction)
        if self.throughput_unit not in _KBPS_PER_UNIT:
            raise DomainError(f"unknown throughput unit {self.throughput_unit!r}")

    @property
    def declared_latency_ms(self) -> Range:
        return self.latency_ms or _DECLARED_LATENCY[self.tier]

    def latency_for(self, variant: LinkVariant) -> Range:
        if self.latency_ms is not None:
            return self.latency_ms
        return effective_latency(self.tier, variant)


_KBPS_PER_UNIT = {"kbps": 1.0, "Mbps": 1000.0}

_DECLARED_LATENCY = {
    Tier.T1_TERRESTRIAL: Range(5.0, 20.0),
    Tier.T2_NTN: Range(30.0, 60.0),
    Tier.T3_D2C: Range(150.0, 250.0),
}

DEFAULT_PROFILES = {
    Tier.T1_TERRESTRIAL: TierProfile(
        Tier.T1_TERRESTRIAL, Range(100.0, 300.0), "Mbps", 0.995, 0.80, Range(1.0, 1.0)
    ),
    Tier.T2_NTN: TierProfile(
        Tier.T2_NTN, Range(20.0, 50.0), "Mbps", 0.95, 0.15, Range(2.0, 3.0)
    ),
    Tier.T3_D2C: TierProfile(
        Tier.T3_D2C, Range(1.0, 10.0), "kbps", 0.85, 0.05, Range(5.0, 6.0)
    ),
}

_VARIANT_LATENCY = {
    (Tier.T2_NTN, NtnPayload.TRANSPARENT): Range(50.0, 70.0),
    (Tier.T2_NTN, NtnPayload.REGENERATIVE_ISL): Range(20.0, 30.0),
    (Tier.T3_D2C, D2cRouting.GATEWAY): Range(150.0, 250.0),
    (Tier.T3_D2C, D2cRouting.ISL): Range(50.0, 100.0),
}


def effective_latency(tier, variant=None) -> Range:
    """Latency range (ms) for a tier under a routing/payload variant.

    ``variant`` may be a full LinkVariant, the single enum relevant to the
    tier, or None for the default variant.
    """
    tier = Tier(tier)
    if tier is Tier.T1_TERRESTRIAL:
        if isinstance(variant, (D2cRouting, NtnPayload)):
            raise MismatchError(f"{variant!r} does not apply to {tier.name}")
        return _DECLARED_LATENCY[tier]
    if variant is None:
        variant = LinkVariant()
    if isinstance(variant, LinkVariant):
        variant = variant.ntn_payload if tier is Tier.T2_NTN else variant.d2c_routing
    key = (tier, variant)
    if key not in _VARIANT_LATENCY:
        raise MismatchError(f"{variant!r} does not apply to {tier.name}")
    return _VARIANT_LATENCY[key]


def power_multiplier(tier) -> Range:
    return DEFAULT_PROFILES[Tier(tier)].power_multiplier


def with_overrides(profile: TierProfile, **changes) -> TierProfile:
    """Copy of ``profile`` with fields replaced; ranges accept ``[lo, hi]``."""
    for name in ("throughput", "power_multiplier", "latency_ms"):
        value = changes.get(name)
        if value is not None and not isinstance(value, Range):
            changes[name] = Range(*value)
    return replace(profile, **changes)


@dataclass(frozen=True)
class LinkInstance:
    tier: Tier
    up: bool
    latency_ms: float
    throughput: float
    throughput_unit: str
    variant: LinkVariant
    rssi_dbm: float | None = None

    def __post_init__(self):
        if self.rssi_dbm is not None and self.tier is not Tier.T1_TERRESTRIAL:
            raise DomainError("rssi is only defined for the terrestrial tier")

    @property
    def throughput_kbps(self) -> float:
        return self.throughput * _KBPS_PER_UNIT[self.throughput_unit]


def link_from_draws(
    profile: TierProfile,
    variant: LinkVariant,
    in_coverage: bool,
    u_avail: float,
    u_latency: float,
    u_throughput: float,
    rssi_dbm: float | None = None,
) -> LinkInstance:
    """Build a link from three uniform [0, 1) draws.

    The simulator pre-draws its uniforms per stream and calls this directly.
    """
    up = bool(in_coverage and u_avail < profile.availability)
    return LinkInstance(
        tier=profile.tier,
        up=up,
        latency_ms=profile.latency_for(variant).at(u_latency),
        throughput=profile.throughput.at(u_throughput),
        throughput_unit=profile.throughput_unit,
        variant=variant,
        rssi_dbm=rssi_dbm if profile.tier is Tier.T1_TERRESTRIAL else None,
    )


def sample_link(
    profile: TierProfile,
    variant: LinkVariant,
    in_coverage: bool,
    rng_seed,
    rssi_dbm: float | None = None,
) -> LinkInstance:
    """Draw one link state; a pure function of its arguments.

    Availability, latency and throughput come from three independent child
    streams of ``rng_seed``.
    """
    children = np.random.SeedSequence(rng_seed).spawn(3)
    u_avail, u_lat, u_thr = (np.random.default_rng(s).random() for s in children)
    return link_from_draws(profile, variant, in_coverage, u_avail, u_lat, u_thr, rssi_dbm)


# Model anchors (dBm) at zone centre and edge. These are plumbing constants,
# chosen so urban never crosses -110 dBm and suburban edges do.
RSSI_ANCHORS = {
    ZoneKind.URBAN: (-85.0, -105.0),
    ZoneKind.SUBURBAN: (-95.0, -115.0),
    ZoneKind.RURAL: (-100.0, -120.0),
}


def rssi_model(zone, position_in_zone, t1_coverage: bool = True) -> float | None:
    """Terrestrial RSSI (dBm) from centre (0) to edge (1) of a zone.

    Maritime never has terrestrial signal; rural only when the route marks
    it as covered.
    """
    zone = ZoneKind(zone)
    pos = check_interval("position_in_zone", position_in_zone, 0.0, 1.0)
    if zone is ZoneKind.MARITIME or not t1_coverage:
        return None
    centre, edge = RSSI_ANCHORS[zone]
    return centre + (edge - centre) * pos
