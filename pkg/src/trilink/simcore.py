"""Deterministic discrete-event engine for tri-link scenarios.

Links are re-sampled on a fixed tick. Between ticks the engine processes
message generation, deliveries and handover completions from a single
time-ordered queue. Every random quantity comes from a stream derived from
the scenario seed and a label, so adding a traffic class never shifts the
link draws.
"""

from __future__ import annotations

import enum
import heapq
import json
import math
import zlib
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from trilink._validation import DomainError, ScenarioError
from trilink.radio import System, resync_latency
from trilink.scenario import Scenario
from trilink.selector import (
    Admission,
    HandoverToken,
    TokenStatus,
    TrafficKind,
    TriLinkSelector,
    handover_budget,
    session_key_for,
    tier_label,
    validate_token,
)
from trilink.tierlink import Tier, link_from_draws, rssi_model

RSSI_NOISE_DB = 2.0
MEAN_OUTAGE_S = 2.0
NTN_SATELLITE_PERIOD_S = 180.0
MC_EXTRA_LINKS = 2
BETWEEN_TIER_SIGNALLING_MS = (20.0, 50.0)
WITHIN_TIER_SIGNALLING_MS = (10.0, 40.0)
PAPER_MC_BAND_MBPS = (50.0, 100.0)
LATENCY_BIN_EDGES_MS = (0, 10, 20, 30, 50, 70, 100, 150, 200, 250, 300, 500, 1000, 5000)

_SATELLITE_SYSTEM = {Tier.T2_NTN: System.NTN, Tier.T3_D2C: System.D2C}

# same-instant processing order
_END, _TICK, _GEN, _DELIVER = range(4)


class EventKind(str, enum.Enum):
    SAMPLE = "SAMPLE"
    ASSIGNMENT_CHANGE = "ASSIGNMENT_CHANGE"
    HANDOVER_START = "HANDOVER_START"
    HANDOVER_END = "HANDOVER_END"
    FREEZE_VIOLATION = "FREEZE_VIOLATION"
    MRM = "MRM"
    MSG_SENT = "MSG_SENT"
    MSG_DELIVERED = "MSG_DELIVERED"
    MSG_QUEUED = "MSG_QUEUED"


@dataclass(frozen=True)
class Event:
    seq: int
    t_ms: float
    kind: EventKind
    payload: dict

    def to_record(self) -> dict:
        return {"seq": self.seq, "t_ms": clean_number(self.t_ms), "kind": self.kind.value,
                **{k: jsonable(v) for k, v in self.payload.items()}}


def clean_number(x):
    if isinstance(x, float):
        x = round(x, 6)
        return 0.0 if x == 0 else x
    return x


def jsonable(v):
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, enum.Enum):
        return v.value
    return clean_number(v)


def dumps_events(events) -> str:
    """Newline-delimited JSON, one event per line."""
    return "".join(
        json.dumps(e.to_record(), sort_keys=True, separators=(",", ":")) + "\n" for e in events
    )


def dumps_report(report: dict) -> str:
    return json.dumps(jsonable(report), sort_keys=True, indent=2) + "\n"


def rng_stream(seed: int, label: str) -> np.random.Generator:
    """Independent generator for one labelled concern of one run."""
    key = zlib.crc32(label.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(key,)))


def availability_chain(u, availability: float, dt_ms: float,
                       mean_outage_s: float = MEAN_OUTAGE_S) -> np.ndarray:
    """Up/down state per tick from one uniform per tick.

    A two-state Markov chain whose stationary up-probability is
    ``availability`` and whose outages last ``mean_outage_s`` on average.
    The first tick is drawn from the stationary distribution.
    """
    n = len(u)
    up = np.zeros(n, dtype=bool)
    if n == 0 or availability <= 0.0:
        return up
    if availability >= 1.0:
        up[:] = True
        return up
    recover = min(1.0, dt_ms / (mean_outage_s * 1e3))
    fail = min(1.0, recover * (1.0 - availability) / availability)
    state = bool(u[0] < availability)
    up[0] = state
    for k in range(1, n):
        state = (u[k] >= fail) if state else (u[k] < recover)
        up[k] = state
    return up


def _segment_index(route, fraction: float) -> int:
    start = 0.0
    for i, seg in enumerate(route):
        end = start + seg.fraction
        if fraction < end and i < len(route) - 1:
            return i
        start = end
    return len(route) - 1


def zone_at(route, t_s: float, duration_s: float):
    """Segment containing time ``t_s``; a boundary belongs to the later segment."""
    if duration_s <= 0 or not 0.0 <= t_s <= duration_s:
        raise DomainError(f"t={t_s!r} outside [0, {duration_s!r}]")
    return route[_segment_index(route, t_s / duration_s)]


def _zone_position(route, fraction: float):
    """(segment index, distance from segment centre: 0 centre .. 1 edge)."""
    idx = _segment_index(route, fraction)
    start = math.fsum(s.fraction for s in route[:idx])
    within = (fraction - start) / route[idx].fraction
    return idx, min(1.0, abs(2.0 * within - 1.0))


@dataclass
class _ClassState:
    effective: Tier | None = None
    queue: deque = field(default_factory=deque)
    next_msg: int = 0
    generated: int = 0
    sent: int = 0
    delivered: int = 0
    on_time: int = 0
    latencies: list = field(default_factory=list)
    mrm_active: bool = False


@dataclass
class SimulationResult:
    report: dict
    events: list

    def report_json(self) -> str:
        return dumps_report(self.report)

    def events_ndjson(self) -> str:
        return dumps_events(self.events)


class _Engine:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.duration_ms = sc.duration_s * 1e3
        self.dt_ms = float(sc.sample_interval_ms)
        self.profiles = sc.profiles()
        self.classes = sc.classes
        self.periods = {w.traffic_class.name: float(w.period_ms) for w in sc.workload}
        self.sizes = {w.traffic_class.name: w.size_bytes for w in sc.workload}
        self.session_key = session_key_for(sc.seed)
        self.selector = TriLinkSelector(self.classes, self.session_key, f"run-{sc.seed}")
        self.cs = {c.name: _ClassState() for c in self.classes}
        self.events: list[Event] = []
        self.heap: list = []
        self._push_seq = 0
        self.latency_ranges = {t: p.latency_for(sc.variants) for t, p in self.profiles.items()}

        n = int(math.ceil(self.duration_ms / self.dt_ms - 1e-9)) if self.duration_ms > 0 else 0
        self.n_ticks = n
        seed = sc.seed
        self.draws = {}
        for tier in Tier:
            for concern in ("availability", "latency", "throughput"):
                self.draws[(tier, concern, 0)] = rng_stream(seed, f"{concern}/{tier.short}").random(n)
        for k in range(1, MC_EXTRA_LINKS + 1):
            for concern in ("availability", "throughput"):
                self.draws[(Tier.T2_NTN, concern, k)] = rng_stream(
                    seed, f"{concern}/T2/mc{k}").random(n)
        # link_from_draws takes uniforms; 0.0 always passes its availability test, 1.0 never does
        for key, u in list(self.draws.items()):
            if key[1] == "availability":
                up = availability_chain(u, self.profiles[key[0]].availability, self.dt_ms)
                self.draws[key] = np.where(up, 0.0, 1.0)
        self.rssi_noise = rng_stream(seed, "rssi").normal(0.0, RSSI_NOISE_DB, n)
        self.handover_rng = rng_stream(seed, "handover")
        # where in the serving satellite's pass the run starts
        self.ntn_phase_ms = float(rng_stream(seed, "ntn-phase").uniform(0.0, NTN_SATELLITE_PERIOD_S * 1e3))
        self.msg_rng = {c.name: rng_stream(seed, f"message/{c.name}") for c in self.classes}

        self.served_ms = {t: 0.0 for t in Tier}
        self.served_any_ms = 0.0
        # served ms per power multiplier; summed once so ratios stay exact
        self.energy_ms: dict = {}
        self.handovers = {"within_tier": 0, "between_tier": 0, "rejected": 0}
        self.violations = 0
        self.mrm_count = 0
        self.mc_aggregates: list[float] = []
        self.tier_transit: dict = {t: [] for t in Tier}

    # -- plumbing ---------------------------------------------------------

    def log(self, t, kind, **payload):
        self.events.append(Event(len(self.events), t, kind, payload))

    def push(self, t, order, kind, data):
        self._push_seq += 1
        heapq.heappush(self.heap, (t, order, self._push_seq, kind, data))

    # -- main loop --------------------------------------------------------

    def run(self) -> SimulationResult:
        if self.n_ticks:
            self.push(0.0, _TICK, "tick", 0)
            for c in self.classes:
                self.push(0.0, _GEN, "gen", c.name)
        while self.heap:
            t, _, _, kind, data = heapq.heappop(self.heap)
            if kind == "tick":
                self.on_tick(t, data)
            elif kind == "gen":
                self.on_generate(t, data)
            elif kind == "deliver":
                self.on_deliver(t, data)
            else:
                self.on_handover_end(t, data)
        return SimulationResult(self.report(), self.events)

    def on_tick(self, t, k):
        sc = self.sc
        idx, position = _zone_position(sc.route, t / self.duration_ms)
        seg = sc.route[idx]
        links = []
        rssi = None
        for tier in Tier:
            covered = seg.covered(tier)
            if tier is Tier.T1_TERRESTRIAL:
                rssi = rssi_model(seg.zone, position, covered)
                if rssi is not None:
                    rssi += float(self.rssi_noise[k])
            links.append(link_from_draws(
                self.profiles[tier], sc.variants, covered,
                self.draws[(tier, "availability", 0)][k],
                self.draws[(tier, "latency", 0)][k],
                self.draws[(tier, "throughput", 0)][k],
                rssi if tier is Tier.T1_TERRESTRIAL else None,
            ))
            if tier is Tier.T2_NTN:
                for j in range(1, MC_EXTRA_LINKS + 1):
                    links.append(link_from_draws(
                        self.profiles[tier], sc.variants, covered,
                        self.draws[(tier, "availability", j)][k], 0.5,
                        self.draws[(tier, "throughput", j)][k],
                    ))
        by_tier = {l.tier: l for l in reversed(links)}
        self.log(t, EventKind.SAMPLE, tick=k, zone=seg.zone.value, segment=idx,
                 up={tr.short: by_tier[tr].up for tr in Tier}, rssi_dbm=rssi)

        state = self.selector.update(links)
        period = NTN_SATELLITE_PERIOD_S * 1e3
        satellite_change = k > 0 and (
            math.floor((t + self.ntn_phase_ms) / period)
            != math.floor((t - self.dt_ms + self.ntn_phase_ms) / period)
        )

        for c in self.classes:
            cst = self.cs[c.name]
            if self.selector.is_frozen(c.name):
                continue
            desired = state.assignment[c.name]
            current = cst.effective
            if desired != current:
                if current is None or desired is None:
                    cst.effective = desired
                    self.log(t, EventKind.ASSIGNMENT_CHANGE, **{"class": c.name},
                             from_tier=tier_label(current), to_tier=tier_label(desired),
                             reason="attach" if current is None else "detach")
                else:
                    self.start_handover(t, c.name, current, desired, state.tier_latency_ms[desired])
            elif satellite_change and current is Tier.T2_NTN:
                self.start_handover(t, c.name, current, current, state.tier_latency_ms[current])

        for c in self.classes:
            if c.kind is not TrafficKind.LATENCY_CRITICAL:
                continue
            cst = self.cs[c.name]
            event = self.selector.mrm(c.name)
            if event is not None and not cst.mrm_active:
                self.mrm_count += 1
                self.log(t, EventKind.MRM, **{"class": c.name}, fallback_id=event.fallback_id,
                         assigned=tier_label(event.assigned), reason=event.reason)
            cst.mrm_active = event is not None

        group = state.mc_group
        if group is not None and any(
            c.kind is TrafficKind.BANDWIDTH and self.cs[c.name].effective is Tier.T2_NTN
            for c in self.classes
        ):
            self.mc_aggregates.append(group.aggregate_mbps)

        for c in self.classes:
            self.flush(t, c.name)

        span = min(self.dt_ms, self.duration_ms - t)
        active = {cs.effective for cs in self.cs.values() if cs.effective is not None}
        for tier in active:
            self.served_ms[tier] += span
        if active:
            self.served_any_ms += span
        multiplier = max((self.profiles[tr].power_multiplier.midpoint for tr in active), default=1.0)
        self.energy_ms[multiplier] = self.energy_ms.get(multiplier, 0.0) + span

        if k + 1 < self.n_ticks:
            self.push((k + 1) * self.dt_ms, _TICK, "tick", k + 1)

    # -- handovers --------------------------------------------------------

    def handover_duration(self, from_tier, to_tier) -> float:
        rng = self.handover_rng
        if from_tier is to_tier:
            base = rng.uniform(*WITHIN_TIER_SIGNALLING_MS)
            sat = from_tier
        else:
            base = rng.uniform(*BETWEEN_TIER_SIGNALLING_MS)
            sat = to_tier if to_tier in _SATELLITE_SYSTEM else from_tier
        resync = 0.0
        if sat in _SATELLITE_SYSTEM:
            resync = resync_latency(_SATELLITE_SYSTEM[sat], self.sc.ntn_predictive_ta, rng)
        return float(base + resync)

    def start_handover(self, t, name, from_tier, to_tier, target_latency):
        result = self.selector.request_handover(name, from_tier, to_tier, target_latency, t)
        if isinstance(result, Admission):
            self.handovers["rejected"] += 1
            self.cs[name].effective = None
            self.log(t, EventKind.ASSIGNMENT_CHANGE, **{"class": name},
                     from_tier=tier_label(from_tier), to_tier="UNSERVED",
                     reason=result.reason.value)
            return
        record = result
        check = validate_token(record.token, self.session_key, t)
        duration = self.handover_duration(from_tier, to_tier)
        self.handovers["within_tier" if record.within_tier else "between_tier"] += 1
        tok = record.token
        self.log(t, EventKind.HANDOVER_START, **{"class": name},
                 handover_id=record.handover_id, from_tier=tier_label(from_tier),
                 to_tier=tier_label(to_tier), budget_ms=record.budget_ms,
                 mrm_fallback_id=record.mrm_fallback_id, token_status=check.status.value,
                 token={"session_id": tok.session_id, "from_tier": tok.from_tier.short,
                        "to_tier": tok.to_tier.short, "issued_t_ms": tok.issued_t_ms,
                        "ttl_ms": tok.ttl_ms, "tag": tok.tag})
        self.push(t + duration, _END, "end", (name, duration))

    def on_handover_end(self, t, data):
        name, duration = data
        outcome = self.selector.complete_handover(name, duration)
        record = outcome.record
        self.cs[name].effective = record.to_tier
        self.log(t, EventKind.HANDOVER_END, **{"class": name},
                 handover_id=record.handover_id, from_tier=tier_label(record.from_tier),
                 to_tier=tier_label(record.to_tier), duration_ms=outcome.duration_ms,
                 violation=outcome.violation)
        if outcome.violation:
            self.violations += 1
            self.log(t, EventKind.FREEZE_VIOLATION, **{"class": name},
                     handover_id=record.handover_id, duration_ms=outcome.duration_ms,
                     budget_ms=record.budget_ms)
        self.flush(t, name)

    # -- messages ---------------------------------------------------------

    def can_transmit(self, t, name) -> bool:
        if t >= self.duration_ms or self.selector.is_frozen(name):
            return False
        tier = self.cs[name].effective
        state = self.selector.state
        return tier is not None and state is not None and state.assignment[name] is tier

    def on_generate(self, t, name):
        cst = self.cs[name]
        msg = cst.next_msg
        cst.next_msg += 1
        cst.generated += 1
        if self.can_transmit(t, name):
            self.transmit(t, name, msg, t)
        else:
            reason = "freeze" if self.selector.is_frozen(name) else "unserved"
            cst.queue.append((msg, t))
            self.log(t, EventKind.MSG_QUEUED, **{"class": name}, msg=msg, reason=reason)
        nxt = t + self.periods[name]
        if nxt < self.duration_ms:
            self.push(nxt, _GEN, "gen", name)

    def transmit(self, t, name, msg, created):
        cst = self.cs[name]
        tier = cst.effective
        transit = self.latency_ranges[tier].at(self.msg_rng[name].random())
        cst.sent += 1
        self.log(t, EventKind.MSG_SENT, **{"class": name}, msg=msg, tier=tier.short,
                 wait_ms=t - created, size_bytes=self.sizes[name])
        self.push(t + transit, _DELIVER, "deliver", (name, msg, tier, created, t, transit))

    def flush(self, t, name):
        cst = self.cs[name]
        while cst.queue and self.can_transmit(t, name):
            msg, created = cst.queue.popleft()
            self.transmit(t, name, msg, created)

    def on_deliver(self, t, data):
        name, msg, tier, created, sent_at, transit = data
        cst = self.cs[name]
        total = t - created
        cst.delivered += 1
        cst.latencies.append(total)
        cls = self.selector.classes[name]
        if total <= cls.max_latency_ms:
            cst.on_time += 1
        self.tier_transit[tier].append(transit)
        self.log(t, EventKind.MSG_DELIVERED, **{"class": name}, msg=msg, tier=tier.short,
                 transit_ms=transit, wait_ms=sent_at - created, latency_ms=total)

    # -- report -----------------------------------------------------------

    def report(self) -> dict:
        dur = self.duration_ms
        served = self.served_any_ms
        edges = list(LATENCY_BIN_EDGES_MS)
        classes = {}
        for c in self.classes:
            cst = self.cs[c.name]
            counts, _ = np.histogram(cst.latencies, bins=edges)
            classes[c.name] = {
                "kind": c.kind.value,
                "generated": cst.generated,
                "sent": cst.sent,
                "delivered": cst.delivered,
                "queued_unresolved": len(cst.queue),
                "availability": cst.on_time / cst.generated if cst.generated else 0.0,
                "mean_latency_ms": float(np.mean(cst.latencies)) if cst.latencies else 0.0,
                "latency_histogram_ms": {"edges": edges, "counts": [int(x) for x in counts]},
            }
        generated = sum(cs.generated for cs in self.cs.values())
        aggregates = self.mc_aggregates
        lo, hi = PAPER_MC_BAND_MBPS
        return {
            "seed": self.sc.seed,
            "duration_s": self.sc.duration_s,
            "tier_serving_fraction": {t.short: self.served_ms[t] / dur if dur else 0.0 for t in Tier},
            "tier_share_of_served": {t.short: self.served_ms[t] / served if served else 0.0 for t in Tier},
            "served_fraction": served / dur if dur else 0.0,
            "delivered_fraction": (
                sum(cs.delivered for cs in self.cs.values()) / generated if generated else 0.0
            ),
            "tier_mean_transit_latency_ms": {
                t.short: float(np.mean(v)) if v else 0.0 for t, v in self.tier_transit.items()
            },
            "tier_delivered_messages": {t.short: len(v) for t, v in self.tier_transit.items()},
            "classes": classes,
            "handovers": dict(self.handovers),
            "freeze_violations": self.violations,
            "mrm_events": self.mrm_count,
            "energy_units": math.fsum(m * ms for m, ms in sorted(self.energy_ms.items())) / 1e3,
            "multi_connectivity": {
                "samples": len(aggregates),
                "mean_aggregate_mbps": float(np.mean(aggregates)) if aggregates else 0.0,
                "min_aggregate_mbps": float(min(aggregates)) if aggregates else 0.0,
                "max_aggregate_mbps": float(max(aggregates)) if aggregates else 0.0,
                "fraction_in_50_100_mbps": (
                    sum(bool(lo <= a <= hi) for a in aggregates) / len(aggregates) if aggregates else 0.0
                ),
            },
        }


def run(scenario: Scenario) -> SimulationResult:
    """Run one scenario to completion; raises ScenarioError if it is invalid."""
    found = scenario.violations()
    if found:
        raise ScenarioError(found)
    return _Engine(scenario).run()


# --- audit -------------------------------------------------------------------


@dataclass(frozen=True)
class Finding:
    check: str
    seq: int
    detail: str


@dataclass
class AuditReport:
    findings: list = field(default_factory=list)
    handovers_checked: int = 0
    sends_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.findings

    def by_check(self, check: str) -> list:
        return [f for f in self.findings if f.check == check]


def audit(events, session_key: bytes | None = None) -> AuditReport:
    """Independent replay of an event log.

    Checks that (i) no message of a class is sent while that class is frozen,
    (ii) handover starts and ends pair up, (iii) every executed handover
    carries a valid token, re-verified here when ``session_key`` is given,
    and (iv) freeze-violation flags agree with durations recomputed from the
    start/end timestamps. Accepts Event objects or their record dicts.
    """
    rep = AuditReport()
    open_freeze: dict = {}  # class -> (handover_id, start record)
    starts: dict = {}
    flagged: set = set()
    ended: dict = {}
    last_t = -math.inf
    for ev in events:
        if isinstance(ev, Event):
            rec = {**ev.payload, "seq": ev.seq, "t_ms": ev.t_ms, "kind": ev.kind.value}
        else:
            rec = ev
        seq, t, kind = rec["seq"], rec["t_ms"], rec["kind"]
        if t < last_t:
            rep.findings.append(Finding("order", seq, "timestamp decreases"))
        last_t = t
        if kind == "HANDOVER_START":
            hid = rec["handover_id"]
            rep.handovers_checked += 1
            if rec["class"] in open_freeze:
                rep.findings.append(Finding("pairing", seq, f"class {rec['class']} already frozen"))
            open_freeze[rec["class"]] = hid
            starts[hid] = rec
            if rec.get("token_status") != TokenStatus.VALID.value or "token" not in rec:
                rep.findings.append(Finding("token", seq, f"handover {hid} without a valid token"))
            elif session_key is not None:
                tok = rec["token"]
                token = HandoverToken(tok["session_id"], Tier.parse(tok["from_tier"]),
                                      Tier.parse(tok["to_tier"]), tok["issued_t_ms"],
                                      tok["ttl_ms"], tok["tag"])
                status = validate_token(token, session_key, t).status
                if status is not TokenStatus.VALID:
                    rep.findings.append(Finding("token", seq, f"handover {hid}: {status.value}"))
        elif kind == "HANDOVER_END":
            hid = rec["handover_id"]
            start = starts.get(hid)
            if start is None or open_freeze.get(rec["class"]) != hid:
                rep.findings.append(Finding("pairing", seq, f"end of unknown handover {hid}"))
                continue
            del open_freeze[rec["class"]]
            duration = t - start["t_ms"]
            budget = handover_budget(Tier.parse(start["from_tier"]), Tier.parse(start["to_tier"]))
            expected = duration > budget + 1e-6
            ended[hid] = expected
            if bool(rec.get("violation")) != expected:
                rep.findings.append(Finding(
                    "violation", seq,
                    f"handover {hid}: flag {rec.get('violation')} but {duration:.3f} ms vs {budget} ms"))
        elif kind == "FREEZE_VIOLATION":
            flagged.add(rec["handover_id"])
        elif kind == "MSG_SENT":
            rep.sends_checked += 1
            if rec["class"] in open_freeze:
                rep.findings.append(Finding(
                    "freeze", seq, f"{rec['class']} message sent during handover {open_freeze[rec['class']]}"))
    for cls, hid in open_freeze.items():
        rep.findings.append(Finding("pairing", -1, f"handover {hid} of {cls} never ended"))
    for hid, expected in ended.items():
        if expected != (hid in flagged):
            rep.findings.append(Finding("violation", -1, f"handover {hid}: violation event mismatch"))
    return rep
