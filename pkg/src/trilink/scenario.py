"""Scenario description, strict JSON (de)serialisation and bundled presets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from trilink._validation import ScenarioError
from trilink.selector import TrafficClass, TrafficKind
from trilink.tierlink import (
    DEFAULT_PROFILES,
    D2cRouting,
    LinkVariant,
    NtnPayload,
    Tier,
    ZoneKind,
    with_overrides,
)

TOP_LEVEL_KEYS = (
    "seed", "duration_s", "route", "workload", "variants", "tier_overrides", "sample_interval_ms",
)
SEGMENT_KEYS = ("zone", "fraction", "coverage")
WORKLOAD_KEYS = ("name", "kind", "max_latency_ms", "min_throughput_kbps", "period_ms", "size_bytes")
VARIANT_KEYS = ("d2c_routing", "ntn_payload", "ntn_predictive_ta")
OVERRIDE_KEYS = ("availability", "coverage_fraction", "throughput", "power_multiplier", "latency_ms")

BUNDLED = ("corridor", "maritime", "urban")

# Terrestrial coverage ends at the suburbs; satellites cover everywhere.
DEFAULT_COVERAGE = {
    ZoneKind.URBAN: {Tier.T1_TERRESTRIAL: True, Tier.T2_NTN: True, Tier.T3_D2C: True},
    ZoneKind.SUBURBAN: {Tier.T1_TERRESTRIAL: True, Tier.T2_NTN: True, Tier.T3_D2C: True},
    ZoneKind.RURAL: {Tier.T1_TERRESTRIAL: False, Tier.T2_NTN: True, Tier.T3_D2C: True},
    ZoneKind.MARITIME: {Tier.T1_TERRESTRIAL: False, Tier.T2_NTN: True, Tier.T3_D2C: True},
}


@dataclass(frozen=True)
class ZoneSegment:
    zone: ZoneKind
    fraction: float
    coverage: dict

    def covered(self, tier: Tier) -> bool:
        return bool(self.coverage.get(tier, False))


@dataclass(frozen=True)
class WorkloadItem:
    traffic_class: TrafficClass
    period_ms: float
    size_bytes: int


@dataclass(frozen=True)
class Scenario:
    seed: int
    duration_s: float
    route: tuple
    workload: tuple
    variants: LinkVariant = field(default_factory=LinkVariant)
    ntn_predictive_ta: bool = True
    tier_overrides: dict = field(default_factory=dict)
    sample_interval_ms: float = 100.0

    def violations(self) -> list[str]:
        """Every violated invariant, as human-readable strings."""
        found = []
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            found.append("seed: must be a non-negative integer")
        if not _finite(self.duration_s) or self.duration_s < 0:
            found.append("duration_s: must be >= 0")
        if not _finite(self.sample_interval_ms) or self.sample_interval_ms <= 0:
            found.append("sample_interval_ms: must be > 0")
        if not self.route:
            found.append("route: at least one segment is required")
        else:
            total = math.fsum(s.fraction for s in self.route)
            if abs(total - 1.0) > 1e-9:
                found.append(f"route: segment fractions sum to {total!r}, not 1")
            for i, seg in enumerate(self.route):
                if not _finite(seg.fraction) or seg.fraction <= 0:
                    found.append(f"route[{i}].fraction: must be > 0")
        if not self.workload:
            found.append("workload: at least one traffic class is required")
        names = [w.traffic_class.name for w in self.workload]
        if len(set(names)) != len(names):
            found.append("workload: class names must be unique")
        for i, item in enumerate(self.workload):
            if not _finite(item.period_ms) or item.period_ms <= 0:
                found.append(f"workload[{i}].period_ms: must be > 0")
            if item.size_bytes < 0:
                found.append(f"workload[{i}].size_bytes: must be >= 0")
        return found

    def validate(self) -> "Scenario":
        found = self.violations()
        if found:
            raise ScenarioError(found)
        return self

    def profiles(self) -> dict:
        out = {}
        for tier, base in DEFAULT_PROFILES.items():
            out[tier] = with_overrides(base, **self.tier_overrides.get(tier, {}))
        return out

    @property
    def classes(self) -> list[TrafficClass]:
        return [w.traffic_class for w in self.workload]


def _finite(x) -> bool:
    try:
        return math.isfinite(float(x))
    except (TypeError, ValueError):
        return False


# --- parsing ---------------------------------------------------------------


def _check_keys(obj, allowed, where, problems):
    if not isinstance(obj, dict):
        problems.append(f"{where}: expected an object")
        return False
    for key in obj:
        if key not in allowed:
            problems.append(f"{where}.{key}: unknown key")
    return True


def _get(obj, key, where, problems, required=True, default=None):
    if key in obj:
        return obj[key]
    if required:
        problems.append(f"{where}.{key}: missing")
    return default


def _enum(cls, value, where, problems):
    try:
        return cls(value)
    except (ValueError, TypeError):
        allowed = ", ".join(m.value for m in cls)
        problems.append(f"{where}: {value!r} is not one of {allowed}")
        return None


def scenario_from_dict(data) -> Scenario:
    """Build a scenario from parsed JSON, reporting every problem at once."""
    problems: list[str] = []
    if not _check_keys(data, TOP_LEVEL_KEYS, "scenario", problems):
        raise ScenarioError(problems)

    route = []
    for i, raw in enumerate(_get(data, "route", "scenario", problems, default=[]) or []):
        where = f"route[{i}]"
        if not _check_keys(raw, SEGMENT_KEYS, where, problems):
            continue
        zone = _enum(ZoneKind, _get(raw, "zone", where, problems), f"{where}.zone", problems)
        if zone is None:
            continue
        coverage = dict(DEFAULT_COVERAGE[zone])
        raw_cov = raw.get("coverage", {})
        if not isinstance(raw_cov, dict):
            problems.append(f"{where}.coverage: expected an object")
            raw_cov = {}
        for key, flag in raw_cov.items():
            try:
                tier = Tier.parse(key)
            except ValueError:
                problems.append(f"{where}.coverage.{key}: unknown tier")
                continue
            if not isinstance(flag, bool):
                problems.append(f"{where}.coverage.{key}: expected true/false")
                continue
            coverage[tier] = flag
        route.append(ZoneSegment(zone, _number(raw, "fraction", where, problems), coverage))

    workload = []
    for i, raw in enumerate(_get(data, "workload", "scenario", problems, default=[]) or []):
        where = f"workload[{i}]"
        if not _check_keys(raw, WORKLOAD_KEYS, where, problems):
            continue
        kind = _enum(TrafficKind, _get(raw, "kind", where, problems), f"{where}.kind", problems)
        name = _get(raw, "name", where, problems)
        max_lat = _number(raw, "max_latency_ms", where, problems)
        min_thr = _number(raw, "min_throughput_kbps", where, problems)
        period = _number(raw, "period_ms", where, problems)
        size = _get(raw, "size_bytes", where, problems, required=False, default=0)
        if kind is None or name is None or None in (max_lat, min_thr, period):
            continue
        try:
            cls = TrafficClass(str(name), kind, max_lat, min_thr)
        except ValueError as exc:
            problems.append(f"{where}: {exc}")
            continue
        workload.append(WorkloadItem(cls, period, int(size)))

    raw_var = data.get("variants", {})
    variants, predictive = LinkVariant(), True
    if _check_keys(raw_var, VARIANT_KEYS, "variants", problems):
        routing = _enum(D2cRouting, raw_var.get("d2c_routing", "GATEWAY"), "variants.d2c_routing", problems)
        payload = _enum(NtnPayload, raw_var.get("ntn_payload", "TRANSPARENT"), "variants.ntn_payload", problems)
        if routing and payload:
            variants = LinkVariant(routing, payload)
        predictive = raw_var.get("ntn_predictive_ta", True)
        if not isinstance(predictive, bool):
            problems.append("variants.ntn_predictive_ta: expected true/false")
            predictive = True

    overrides = {}
    raw_ov = data.get("tier_overrides", {}) or {}
    if isinstance(raw_ov, dict):
        for key, fields in raw_ov.items():
            where = f"tier_overrides.{key}"
            try:
                tier = Tier.parse(key)
            except ValueError:
                problems.append(f"{where}: unknown tier")
                continue
            if not _check_keys(fields, OVERRIDE_KEYS, where, problems):
                continue
            try:
                with_overrides(DEFAULT_PROFILES[tier], **fields)
            except (ValueError, TypeError) as exc:
                problems.append(f"{where}: {exc}")
                continue
            overrides[tier] = dict(fields)
    else:
        problems.append("tier_overrides: expected an object")

    seed = _get(data, "seed", "scenario", problems, default=0)
    duration = _number(data, "duration_s", "scenario", problems)
    interval = data.get("sample_interval_ms", 100.0)
    sc = Scenario(
        seed=seed,
        duration_s=0.0 if duration is None else duration,
        route=tuple(route),
        workload=tuple(workload),
        variants=variants,
        ntn_predictive_ta=predictive,
        tier_overrides=overrides,
        sample_interval_ms=interval,
    )
    # invariant checks on whatever parsed, skipping fields already reported
    reported = {p.split(":")[0].split(".")[0].split("[")[0] for p in problems}
    problems += [v for v in sc.violations() if v.split(":")[0].split(".")[0].split("[")[0] not in reported]
    if problems:
        raise ScenarioError(problems)
    return sc


def _number(obj, key, where, problems):
    value = _get(obj, key, where, problems)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"{where}.{key}: expected a number")
        return None
    return value


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "seed": sc.seed,
        "duration_s": sc.duration_s,
        "sample_interval_ms": sc.sample_interval_ms,
        "route": [
            {
                "zone": seg.zone.value,
                "fraction": seg.fraction,
                "coverage": {t.short: bool(seg.covered(t)) for t in Tier},
            }
            for seg in sc.route
        ],
        "workload": [
            {
                "name": w.traffic_class.name,
                "kind": w.traffic_class.kind.value,
                "max_latency_ms": w.traffic_class.max_latency_ms,
                "min_throughput_kbps": w.traffic_class.min_throughput_kbps,
                "period_ms": w.period_ms,
                "size_bytes": w.size_bytes,
            }
            for w in sc.workload
        ],
        "variants": {
            "d2c_routing": sc.variants.d2c_routing.value,
            "ntn_payload": sc.variants.ntn_payload.value,
            "ntn_predictive_ta": sc.ntn_predictive_ta,
        },
        "tier_overrides": {
            t.short: {k: list(v) if isinstance(v, (list, tuple)) else v for k, v in f.items()}
            for t, f in sorted(sc.tier_overrides.items())
        },
    }


class ScenarioParseError(ScenarioError):
    """Malformed JSON; the message carries line and column."""


def loads(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError([f"line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None
    return scenario_from_dict(data)


def dumps(sc: Scenario) -> str:
    return json.dumps(scenario_to_dict(sc), indent=2, sort_keys=True) + "\n"


def load(path_or_name) -> Scenario:
    """Load a scenario file, or a bundled preset by name."""
    if str(path_or_name) in BUNDLED:
        return bundled(str(path_or_name))
    return loads(Path(path_or_name).read_text(encoding="utf-8"))


def bundled(name: str) -> Scenario:
    if name not in BUNDLED:
        raise ScenarioError([f"unknown bundled scenario {name!r}; known: {', '.join(BUNDLED)}"])
    text = resources.files("trilink").joinpath(f"scenarios/{name}.json").read_text("utf-8")
    return loads(text)
