import pytest
from hypothesis import given
from hypothesis import strategies as st

from trilink._validation import DomainError, MismatchError
from trilink.tierlink import (
    DEFAULT_PROFILES,
    D2cRouting,
    LinkVariant,
    NtnPayload,
    Range,
    Tier,
    ZoneKind,
    effective_latency,
    power_multiplier,
    rssi_model,
    sample_link,
    with_overrides,
)

T1, T2, T3 = Tier.T1_TERRESTRIAL, Tier.T2_NTN, Tier.T3_D2C
ALL_VARIANTS = [LinkVariant(r, p) for r in D2cRouting for p in NtnPayload]


class TestProfiles:
    def test_defaults(self):
        p1, p2, p3 = (DEFAULT_PROFILES[t] for t in (T1, T2, T3))
        assert (p1.declared_latency_ms, p1.throughput, p1.availability, p1.coverage_fraction) == (
            Range(5, 20), Range(100, 300), 0.995, 0.80)
        assert (p2.declared_latency_ms, p2.throughput, p2.availability, p2.coverage_fraction) == (
            Range(30, 60), Range(20, 50), 0.95, 0.15)
        assert (p3.declared_latency_ms, p3.throughput, p3.availability, p3.coverage_fraction) == (
            Range(150, 250), Range(1, 10), 0.85, 0.05)
        assert (p1.throughput_unit, p2.throughput_unit, p3.throughput_unit) == ("Mbps", "Mbps", "kbps")

    def test_invalid(self):
        with pytest.raises(DomainError):
            Range(5, 1)
        with pytest.raises(DomainError):
            Range(-1, 1)
        with pytest.raises(DomainError):
            with_overrides(DEFAULT_PROFILES[T2], availability=1.2)

    def test_override_accepts_lists(self):
        p = with_overrides(DEFAULT_PROFILES[T3], latency_ms=[1, 2], availability=1.0)
        assert p.latency_for(LinkVariant()) == Range(1, 2)


class TestEffectiveLatency:
    def test_table(self):
        assert effective_latency(T3, D2cRouting.ISL) == Range(50, 100)
        assert effective_latency(T3, D2cRouting.GATEWAY) == Range(150, 250)
        assert 25 in effective_latency(T2, NtnPayload.REGENERATIVE_ISL)
        assert effective_latency(T2, NtnPayload.TRANSPARENT) == Range(50, 70)
        assert effective_latency(T1).hi == 20

    def test_mismatch(self):
        with pytest.raises(MismatchError):
            effective_latency(T2, D2cRouting.ISL)
        with pytest.raises(MismatchError):
            effective_latency(T3, NtnPayload.TRANSPARENT)
        with pytest.raises(MismatchError):
            effective_latency(T1, D2cRouting.GATEWAY)

    def test_midpoint_ordering(self):
        m = lambda t, v=None: effective_latency(t, v).midpoint  # noqa: E731
        assert m(T1) < m(T2, NtnPayload.REGENERATIVE_ISL) < m(T2, NtnPayload.TRANSPARENT)
        assert m(T2, NtnPayload.TRANSPARENT) <= m(T3, D2cRouting.ISL) < m(T3, D2cRouting.GATEWAY)


class TestPower:
    def test_table(self):
        assert power_multiplier(T1) == Range(1, 1)
        assert power_multiplier(T2) == Range(2, 3)
        assert power_multiplier(T3) == Range(5, 6)
        assert power_multiplier(T1).midpoint < power_multiplier(T2).midpoint < power_multiplier(T3).midpoint


class TestSampleLink:
    def test_t3_ranges(self):
        link = sample_link(DEFAULT_PROFILES[T3], LinkVariant(), True, 17)
        assert 150 <= link.latency_ms <= 250
        assert 1 <= link.throughput <= 10
        assert link.rssi_dbm is None

    @given(st.sampled_from(list(Tier)), st.integers(0, 2**63))
    def test_no_coverage_is_down(self, tier, seed):
        assert not sample_link(DEFAULT_PROFILES[tier], LinkVariant(), False, seed).up

    def test_t2_availability(self):
        p = DEFAULT_PROFILES[T2]
        ups = sum(sample_link(p, LinkVariant(), True, s).up for s in range(10_000))
        assert ups / 10_000 == pytest.approx(0.95, abs=0.01)

    def test_bounds_over_many_draws(self):
        violations = 0
        for s in range(100_000):
            tier = Tier(s % 3 + 1)
            variant = ALL_VARIANTS[s % 4]
            p = DEFAULT_PROFILES[tier]
            link = sample_link(p, variant, True, s)
            violations += link.latency_ms not in p.latency_for(variant)
            violations += link.throughput not in p.throughput
        assert violations == 0

    @given(st.sampled_from(list(Tier)), st.sampled_from(ALL_VARIANTS), st.booleans(), st.integers(0, 2**63))
    def test_pure(self, tier, variant, cov, seed):
        p = DEFAULT_PROFILES[tier]
        assert sample_link(p, variant, cov, seed) == sample_link(p, variant, cov, seed)

    def test_rssi_only_for_terrestrial(self):
        t1 = sample_link(DEFAULT_PROFILES[T1], LinkVariant(), True, 0, rssi_dbm=-90)
        t2 = sample_link(DEFAULT_PROFILES[T2], LinkVariant(), True, 0, rssi_dbm=-90)
        assert t1.rssi_dbm == -90 and t2.rssi_dbm is None

    def test_throughput_units(self):
        assert sample_link(DEFAULT_PROFILES[T2], LinkVariant(), True, 1).throughput_kbps >= 20_000
        assert sample_link(DEFAULT_PROFILES[T3], LinkVariant(), True, 1).throughput_kbps <= 10


class TestRssi:
    def test_anchors(self):
        assert rssi_model(ZoneKind.URBAN, 0.0) == -85
        assert rssi_model(ZoneKind.URBAN, 1.0) == -105
        assert rssi_model(ZoneKind.SUBURBAN, 1.0) == -115
        assert rssi_model(ZoneKind.MARITIME, 0.3) is None
        assert rssi_model(ZoneKind.RURAL, 0.3, t1_coverage=False) is None

    @given(st.floats(0, 1))
    def test_urban_never_degrades(self, pos):
        assert rssi_model(ZoneKind.URBAN, pos) >= -105

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_monotone_towards_edge(self, a, b):
        lo, hi = sorted((a, b))
        assert rssi_model(ZoneKind.SUBURBAN, lo) >= rssi_model(ZoneKind.SUBURBAN, hi)

    def test_domain(self):
        with pytest.raises(DomainError):
            rssi_model(ZoneKind.URBAN, 1.5)
