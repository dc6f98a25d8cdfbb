"""Priority-based tri-link selection with guarded handovers.

Tiers are tried in priority order (terrestrial, NTN, D2C) according to the
terrestrial status:

* AVAILABLE: every class rides the terrestrial link.
* DEGRADED (RSSI below threshold): latency-critical and emergency traffic
  stay terrestrial, bandwidth traffic moves to NTN when NTN is up.
* LOST with NTN up: everything moves to NTN, minus classes whose latency
  requirement NTN cannot meet.
* LOST with NTN down: only emergency traffic is served, over D2C.

A class that no tier can carry is UNSERVED (``None``). Handovers between
tiers need an authenticated token and a latency-admissible target, and
freeze the class's traffic until they complete.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import itertools
from dataclasses import dataclass, field

from trilink._validation import DomainError, check_positive
from trilink.tierlink import LinkInstance, Tier

UNSERVED = None

DEGRADE_THRESHOLD_DBM = -110.0
RECOVERY_THRESHOLD_DBM = -105.0
WITHIN_TIER_BUDGET_MS = 150.0
BETWEEN_TIER_BUDGET_MS = 500.0
TOKEN_TTL_MS = 2000.0


class TrafficKind(str, enum.Enum):
    LATENCY_CRITICAL = "LATENCY_CRITICAL"
    BANDWIDTH = "BANDWIDTH"
    EMERGENCY = "EMERGENCY"


class T1Status(str, enum.Enum):
    AVAILABLE = "AVAILABLE"
    DEGRADED = "DEGRADED"
    LOST = "LOST"


class RejectReason(str, enum.Enum):
    REJECT_LATENCY = "REJECT_LATENCY"
    REJECT_TOKEN = "REJECT_TOKEN"
    REJECT_BUSY = "REJECT_BUSY"


class TokenStatus(str, enum.Enum):
    VALID = "VALID"
    INVALID_TAG = "INVALID_TAG"
    EXPIRED = "EXPIRED"


def tier_label(tier) -> str:
    return "UNSERVED" if tier is None else Tier(tier).short


@dataclass(frozen=True)
class TrafficClass:
    name: str
    kind: TrafficKind
    max_latency_ms: float
    min_throughput_kbps: float

    def __post_init__(self):
        object.__setattr__(self, "kind", TrafficKind(self.kind))
        check_positive("max_latency_ms", self.max_latency_ms)
        check_positive("min_throughput_kbps", self.min_throughput_kbps)
        if self.kind is TrafficKind.EMERGENCY and self.max_latency_ms < 250.0:
            raise DomainError("emergency traffic must tolerate the D2C upper latency (250 ms)")


@dataclass(frozen=True)
class MultiConnectivityGroup:
    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        object.__setattr__(self, "members", members)
        if not 2 <= len(members) <= 3:
            raise DomainError(f"multi-connectivity needs 2-3 members, got {len(members)}")
        if any(m.tier is not Tier.T2_NTN for m in members):
            raise DomainError("multi-connectivity members must be NTN links")

    @property
    def aggregate_mbps(self) -> float:
        return sum(m.throughput for m in self.members)


def aggregate(group: MultiConnectivityGroup) -> float:
    """Aggregate downlink throughput (Mbps): the exact member sum."""
    if not 2 <= len(group.members) <= 3:
        raise DomainError(f"multi-connectivity needs 2-3 members, got {len(group.members)}")
    return group.aggregate_mbps


def form_group(links) -> MultiConnectivityGroup | None:
    """Group the visible NTN links, best three by throughput; None if < 2."""
    visible = [l for l in links if l.tier is Tier.T2_NTN and l.up]
    visible.sort(key=lambda l: l.throughput, reverse=True)
    if len(visible) < 2:
        return None
    return MultiConnectivityGroup(tuple(visible[:3]))


@dataclass(frozen=True)
class SelectorState:
    assignment: dict
    t1_status: T1Status
    tier_latency_ms: dict = field(default_factory=dict)
    active_handover: dict = field(default_factory=dict)
    mc_group: MultiConnectivityGroup | None = None

    def tier_of(self, cls) -> Tier | None:
        return self.assignment[cls.name if isinstance(cls, TrafficClass) else cls]


def _index_links(links):
    if isinstance(links, dict):
        links = list(links.values())
    by_tier: dict = {}
    for link in links:
        by_tier.setdefault(link.tier, []).append(link)
    if len(by_tier.get(Tier.T1_TERRESTRIAL, ())) > 1:
        raise DomainError("at most one terrestrial link")
    # the first listed link of a tier is its serving link; others only
    # contribute to multi-connectivity
    primary = {tier: group[0] for tier, group in by_tier.items()}
    return primary, by_tier


def terrestrial_status(link: LinkInstance | None, threshold_dbm, previous=None,
                       recovery_dbm=RECOVERY_THRESHOLD_DBM) -> T1Status:
    if link is None or not link.up:
        return T1Status.LOST
    rssi = link.rssi_dbm
    if rssi is None:
        return T1Status.AVAILABLE
    if rssi < threshold_dbm:
        return T1Status.DEGRADED
    if previous is T1Status.DEGRADED and rssi < recovery_dbm:
        return T1Status.DEGRADED
    return T1Status.AVAILABLE


def evaluate(links, classes, threshold_dbm=DEGRADE_THRESHOLD_DBM, previous=None,
             recovery_dbm=RECOVERY_THRESHOLD_DBM) -> SelectorState:
    """Assign every traffic class to a tier (or UNSERVED).

    ``previous`` (an earlier SelectorState) enables the recovery hysteresis:
    once degraded, the terrestrial link is only trusted again at
    ``recovery_dbm``.
    """
    classes = list(classes)
    if not classes:
        raise DomainError("at least one traffic class is required")
    primary, by_tier = _index_links(links)
    prev_status = previous.t1_status if previous is not None else None
    status = terrestrial_status(
        primary.get(Tier.T1_TERRESTRIAL), threshold_dbm, prev_status, recovery_dbm
    )

    def is_up(tier):
        link = primary.get(tier)
        return link is not None and link.up

    def serve(cls, tier):
        link = primary.get(tier)
        if link is None or not link.up:
            return UNSERVED
        if link.latency_ms > cls.max_latency_ms:
            return UNSERVED
        if link.throughput_kbps < cls.min_throughput_kbps:
            return UNSERVED
        return tier

    assignment = {}
    for cls in classes:
        if status is T1Status.AVAILABLE:
            tier = serve(cls, Tier.T1_TERRESTRIAL)
        elif status is T1Status.DEGRADED:
            if cls.kind is TrafficKind.BANDWIDTH and is_up(Tier.T2_NTN):
                tier = serve(cls, Tier.T2_NTN)
            else:
                tier = serve(cls, Tier.T1_TERRESTRIAL)
        elif is_up(Tier.T2_NTN):
            tier = serve(cls, Tier.T2_NTN)
        elif cls.kind is TrafficKind.EMERGENCY:
            tier = serve(cls, Tier.T3_D2C)
        else:
            tier = UNSERVED
        if tier is UNSERVED and cls.kind is TrafficKind.EMERGENCY:
            tier = serve(cls, Tier.T3_D2C)
        assignment[cls.name] = tier

    return SelectorState(
        assignment=assignment,
        t1_status=status,
        tier_latency_ms={t: l.latency_ms for t, l in primary.items() if l.up},
        mc_group=form_group(by_tier.get(Tier.T2_NTN, ())) if is_up(Tier.T2_NTN) else None,
    )


# --- tokens ----------------------------------------------------------------


@dataclass(frozen=True)
class HandoverToken:
    session_id: str
    from_tier: Tier
    to_tier: Tier
    issued_t_ms: float
    ttl_ms: float
    tag: str

    def canonical(self) -> bytes:
        return _canonical(self.session_id, self.from_tier, self.to_tier, self.issued_t_ms, self.ttl_ms)


def _canonical(session_id, from_tier, to_tier, issued_t_ms, ttl_ms) -> bytes:
    return "|".join(
        (session_id, Tier(from_tier).short, Tier(to_tier).short,
         f"{float(issued_t_ms):.6f}", f"{float(ttl_ms):.6f}")
    ).encode("utf-8")


def session_key_for(seed: int) -> bytes:
    """Per-run session key derived from the scenario seed."""
    return hashlib.sha256(f"trilink-session:{int(seed)}".encode()).digest()


def issue_token(session_key: bytes, session_id: str, from_tier, to_tier,
                issued_t_ms: float, ttl_ms: float = TOKEN_TTL_MS) -> HandoverToken:
    msg = _canonical(session_id, from_tier, to_tier, issued_t_ms, ttl_ms)
    tag = hmac.new(session_key, msg, hashlib.sha256).hexdigest()
    return HandoverToken(session_id, Tier(from_tier), Tier(to_tier),
                         float(issued_t_ms), float(ttl_ms), tag)


@dataclass(frozen=True)
class TokenCheck:
    status: TokenStatus

    @property
    def valid(self) -> bool:
        return self.status is TokenStatus.VALID


def validate_token(token: HandoverToken, session_key: bytes, now_ms: float) -> TokenCheck:
    expected = hmac.new(session_key, token.canonical(), hashlib.sha256).hexdigest()
    if not hmac.compare_digest(expected, token.tag):
        return TokenCheck(TokenStatus.INVALID_TAG)
    if now_ms > token.issued_t_ms + token.ttl_ms:
        return TokenCheck(TokenStatus.EXPIRED)
    return TokenCheck(TokenStatus.VALID)


# --- handovers -------------------------------------------------------------


@dataclass(frozen=True)
class Admission:
    admitted: bool
    reason: RejectReason | None = None


def admit_handover(cls: TrafficClass, target_tier, target_latency_ms, token: HandoverToken,
                   session_key: bytes, now_ms: float, busy: bool = False) -> Admission:
    """Admission check; causes are tested in the order latency, token, busy."""
    del target_tier
    if target_latency_ms > cls.max_latency_ms:
        return Admission(False, RejectReason.REJECT_LATENCY)
    if not validate_token(token, session_key, now_ms).valid:
        return Admission(False, RejectReason.REJECT_TOKEN)
    if busy:
        return Admission(False, RejectReason.REJECT_BUSY)
    return Admission(True)


def handover_budget(from_tier, to_tier) -> float:
    return WITHIN_TIER_BUDGET_MS if Tier(from_tier) is Tier(to_tier) else BETWEEN_TIER_BUDGET_MS


@dataclass(frozen=True)
class HandoverRecord:
    handover_id: int
    class_name: str
    from_tier: Tier
    to_tier: Tier
    start_t_ms: float
    token: HandoverToken
    mrm_fallback_id: str
    budget_ms: float = None
    freeze: bool = True

    def __post_init__(self):
        if self.budget_ms is None:
            object.__setattr__(self, "budget_ms", handover_budget(self.from_tier, self.to_tier))
        elif self.budget_ms != handover_budget(self.from_tier, self.to_tier):
            raise DomainError("budget does not match the within/between classification")

    @property
    def within_tier(self) -> bool:
        return self.from_tier is self.to_tier


@dataclass(frozen=True)
class HandoverOutcome:
    record: HandoverRecord
    freeze_start_ms: float
    freeze_end_ms: float
    violation: bool

    @property
    def duration_ms(self) -> float:
        return self.freeze_end_ms - self.freeze_start_ms


def execute_handover(record: HandoverRecord, actual_duration_ms) -> HandoverOutcome:
    duration = float(actual_duration_ms)
    if duration < 0:
        raise DomainError("handover duration cannot be negative")
    return HandoverOutcome(
        record=record,
        freeze_start_ms=record.start_t_ms,
        freeze_end_ms=record.start_t_ms + duration,
        violation=duration > record.budget_ms,
    )


# --- minimum-risk manoeuvre ------------------------------------------------


@dataclass(frozen=True)
class MrmEvent:
    class_name: str
    fallback_id: str
    assigned: Tier | None
    reason: str


def fallback_trajectory_id(cls: TrafficClass) -> str:
    digest = hashlib.sha256(
        f"{cls.name}|{cls.kind.value}|{cls.max_latency_ms:.3f}".encode()
    ).hexdigest()
    return f"mrm-{cls.name}-{digest[:8]}"


def mrm_check(state: SelectorState, cls: TrafficClass, fallback_ids=None) -> MrmEvent | None:
    if cls.kind is not TrafficKind.LATENCY_CRITICAL:
        raise DomainError("MRM checks apply to latency-critical classes")
    fallback = (fallback_ids or {}).get(cls.name) or fallback_trajectory_id(cls)
    tier = state.assignment.get(cls.name)
    if tier is UNSERVED:
        return MrmEvent(cls.name, fallback, None, "unserved")
    latency = state.tier_latency_ms.get(tier)
    if latency is not None and latency > cls.max_latency_ms:
        return MrmEvent(cls.name, fallback, tier, "latency")
    return None


class TriLinkSelector:
    """Single-owner selection state machine.

    Holds the last evaluated state (for hysteresis), the active handover per
    class, the session key used to mint and check switching tokens, and the
    fallback trajectories pre-computed for latency-critical classes.
    """

    def __init__(self, classes, session_key: bytes, session_id: str = "session-0",
                 threshold_dbm=DEGRADE_THRESHOLD_DBM, recovery_dbm=RECOVERY_THRESHOLD_DBM,
                 token_ttl_ms=TOKEN_TTL_MS):
        self.classes = {c.name: c for c in classes}
        self.session_key = session_key
        self.session_id = session_id
        self.threshold_dbm = threshold_dbm
        self.recovery_dbm = recovery_dbm
        self.token_ttl_ms = token_ttl_ms
        self.state: SelectorState | None = None
        self.active: dict[str, HandoverRecord] = {}
        self.fallback_ids = {
            c.name: fallback_trajectory_id(c)
            for c in classes
            if c.kind is TrafficKind.LATENCY_CRITICAL
        }
        self._ids = itertools.count(1)

    def update(self, links) -> SelectorState:
        self.state = evaluate(
            links, self.classes.values(), self.threshold_dbm, self.state, self.recovery_dbm
        )
        return self.state

    def is_frozen(self, class_name: str) -> bool:
        return class_name in self.active

    def request_handover(self, class_name, from_tier, to_tier, target_latency_ms, now_ms):
        """Mint a token and run admission; returns a record or an Admission rejection."""
        cls = self.classes[class_name]
        token = issue_token(self.session_key, self.session_id, from_tier, to_tier,
                            now_ms, self.token_ttl_ms)
        verdict = admit_handover(cls, to_tier, target_latency_ms, token, self.session_key,
                                 now_ms, busy=class_name in self.active)
        if not verdict.admitted:
            return verdict
        record = HandoverRecord(
            handover_id=next(self._ids),
            class_name=class_name,
            from_tier=Tier(from_tier),
            to_tier=Tier(to_tier),
            start_t_ms=float(now_ms),
            token=token,
            mrm_fallback_id=self.fallback_ids.get(class_name, ""),
        )
        self.active[class_name] = record
        return record

    def complete_handover(self, class_name, actual_duration_ms) -> HandoverOutcome:
        record = self.active.pop(class_name)
        return execute_handover(record, actual_duration_ms)

    def mrm(self, class_name) -> MrmEvent | None:
        cls = self.classes[class_name]
        if self.state is None or cls.kind is not TrafficKind.LATENCY_CRITICAL:
            return None
        return mrm_check(self.state, cls, self.fallback_ids)
