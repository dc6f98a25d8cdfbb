"""Downlink/uplink link budgets in the dB domain.

Path loss is carried with a negative sign, as in a budget table: received
power is ``EIRP + path_loss + gain``. ``fspl`` itself returns the positive
magnitude.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

from trilink._validation import ConfigurationError, check_finite, check_positive
from trilink.radio import SPEED_OF_LIGHT_MS

BOLTZMANN_DBW_PER_K_HZ = -228.6
REQUIRED_UPLINK_CNR_DB = 4.0


class Direction(str, enum.Enum):
    DOWNLINK = "DOWNLINK"
    UPLINK = "UPLINK"


def fspl(distance_km, f_c_hz, c_ms: float = SPEED_OF_LIGHT_MS) -> float:
    """Free-space path loss magnitude in dB."""
    d = check_positive("distance_km", distance_km) * 1e3
    f = check_positive("f_c_hz", f_c_hz)
    return 20.0 * math.log10(4.0 * math.pi * d * f / c_ms)


def noise_power(temp_k, bandwidth_hz) -> float:
    """Thermal noise power kTB in dBW."""
    t = check_positive("temp_k", temp_k)
    b = check_positive("bandwidth_hz", bandwidth_hz)
    return BOLTZMANN_DBW_PER_K_HZ + 10.0 * math.log10(t) + 10.0 * math.log10(b)


def dbm_to_dbw(p_dbm: float) -> float:
    return p_dbm - 30.0


@dataclass(frozen=True)
class BudgetInput:
    """One column of a budget table for one direction.

    Path loss is either given (``path_loss_db``, negative) or computed from
    ``distance_km`` and ``f_c_hz``. Noise is either ``noise_dbw`` or the
    ``temp_k``/``bandwidth_hz`` pair. ``rx_gain_dbi`` is the handset antenna
    gain and applies to both directions.
    """

    direction: Direction = Direction.DOWNLINK
    eirp_dbw: float | None = None
    path_loss_db: float | None = None
    distance_km: float | None = None
    f_c_hz: float | None = None
    rx_gain_dbi: float = 0.0
    noise_dbw: float | None = None
    temp_k: float | None = None
    bandwidth_hz: float | None = None
    tx_power_dbm: float | None = None
    sat_rx_gain_dbi: float | None = None
    waveform_adjust_db: float = 0.0
    required_cnr_db: float = REQUIRED_UPLINK_CNR_DB
    penalty_db: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        has_noise = self.noise_dbw is not None
        has_pair = self.temp_k is not None or self.bandwidth_hz is not None
        if has_noise == has_pair:
            raise ConfigurationError(
                "provide exactly one of noise_dbw or (temp_k, bandwidth_hz)"
            )
        if has_pair:
            if self.temp_k is None or self.bandwidth_hz is None:
                raise ConfigurationError("temp_k and bandwidth_hz go together")
            check_positive("bandwidth_hz", self.bandwidth_hz)
        if self.path_loss_db is None and (self.distance_km is None or self.f_c_hz is None):
            raise ConfigurationError(
                "path loss needs path_loss_db or both distance_km and f_c_hz"
            )

    def resolved_path_loss(self) -> float:
        if self.path_loss_db is not None:
            return float(self.path_loss_db)
        return -fspl(self.distance_km, self.f_c_hz)

    def resolved_noise(self) -> float:
        if self.noise_dbw is not None:
            return float(self.noise_dbw)
        return noise_power(self.temp_k, self.bandwidth_hz)


@dataclass(frozen=True)
class BudgetResult:
    direction: Direction
    p_rx_dbw: float
    cnr_db: float
    margin_db: float
    penalty_db: float
    noise_dbw: float
    path_loss_db: float


def link_margin(cnr_db, required_cnr_db=REQUIRED_UPLINK_CNR_DB, penalty_db=0.0) -> float:
    return float(cnr_db) - float(required_cnr_db) - float(penalty_db)


def budget(inp: BudgetInput) -> BudgetResult:
    loss = inp.resolved_path_loss()
    noise = inp.resolved_noise()
    if inp.direction is Direction.DOWNLINK:
        if inp.eirp_dbw is None:
            raise ConfigurationError("downlink budget needs eirp_dbw")
        p_rx = inp.eirp_dbw + loss + inp.rx_gain_dbi
    else:
        missing = [
            name
            for name in ("tx_power_dbm", "sat_rx_gain_dbi")
            if getattr(inp, name) is None
        ]
        if missing:
            raise ConfigurationError(f"uplink budget needs {', '.join(missing)}")
        p_rx = (
            dbm_to_dbw(inp.tx_power_dbm)
            + inp.rx_gain_dbi
            + loss
            + inp.sat_rx_gain_dbi
            + inp.waveform_adjust_db
        )
    cnr = p_rx - noise
    for name, value in (("p_rx_dbw", p_rx), ("cnr_db", cnr)):
        check_finite(name, value)
    return BudgetResult(
        direction=inp.direction,
        p_rx_dbw=p_rx,
        cnr_db=cnr,
        margin_db=link_margin(cnr, inp.required_cnr_db, inp.penalty_db),
        penalty_db=inp.penalty_db,
        noise_dbw=noise,
        path_loss_db=loss,
    )


@dataclass(frozen=True)
class ComparisonRecord:
    direction: Direction
    d2c: BudgetResult
    ntn: BudgetResult
    deltas: dict = field(default_factory=dict)


_COMPARED = ("p_rx_dbw", "cnr_db", "margin_db", "penalty_db", "noise_dbw", "path_loss_db")


def compare_systems(d2c: BudgetInput, ntn: BudgetInput) -> ComparisonRecord:
    """Side-by-side budgets; deltas are NTN minus D2C."""
    if d2c.direction is not ntn.direction:
        raise ConfigurationError("compared budgets must share a direction")
    a, b = budget(d2c), budget(ntn)
    deltas = {name: getattr(b, name) - getattr(a, name) for name in _COMPARED}
    return ComparisonRecord(direction=d2c.direction, d2c=a, ntn=b, deltas=deltas)


# Reference budget values; the uplink satellite gains and the 4 dB threshold are
# back-solved so the published columns close.
TABLE4_PATH_LOSS_DB = -185.5
TABLE4_DISTANCE_KM = 500.0
TABLE4_F_C_HZ = 1.6e9

_TABLE4 = {
    "table4-d2c": dict(eirp_dbw=52.0, rx_gain_dbi=-2.0, sat_rx_gain_dbi=49.4),
    "table4-ntn": dict(eirp_dbw=45.0, rx_gain_dbi=2.0, sat_rx_gain_dbi=48.4),
}
PRESETS = tuple(_TABLE4)


def preset(name: str, direction=Direction.DOWNLINK, fspl_computed: bool = False) -> BudgetInput:
    """Resolve a named preset to its budget input for ``direction``."""
    try:
        values = _TABLE4[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown preset {name!r}; known: {', '.join(PRESETS)}"
        ) from None
    inp = BudgetInput(
        direction=Direction(direction),
        path_loss_db=TABLE4_PATH_LOSS_DB,
        distance_km=TABLE4_DISTANCE_KM,
        f_c_hz=TABLE4_F_C_HZ,
        noise_dbw=-156.3,
        tx_power_dbm=23.0,
        **values,
    )
    if fspl_computed:
        inp = replace(inp, path_loss_db=None)
    return inp


def table4_rows(d2c_up: BudgetInput, d2c_down: BudgetInput, ntn_up: BudgetInput, ntn_down: BudgetInput):
    """Rows of the comparison table as ``(label, d2c, ntn, delta)`` floats."""
    down = compare_systems(d2c_down, ntn_down)
    up = compare_systems(d2c_up, ntn_up)

    def row(label, a, b):
        return (label, a, b, b - a)

    return [
        row("Satellite EIRP (dBW)", d2c_down.eirp_dbw, ntn_down.eirp_dbw),
        row("Free Space Path Loss (dB)", down.d2c.path_loss_db, down.ntn.path_loss_db),
        row("UE Antenna Gain (dBi)", d2c_down.rx_gain_dbi, ntn_down.rx_gain_dbi),
        row("Received Power (dBW)", down.d2c.p_rx_dbw, down.ntn.p_rx_dbw),
        row("Noise Power (dBW)", down.d2c.noise_dbw, down.ntn.noise_dbw),
        row("Carrier-to-Noise Ratio (dB)", down.d2c.cnr_db, down.ntn.cnr_db),
        row("UE Transmit Power (dBm)", d2c_up.tx_power_dbm, ntn_up.tx_power_dbm),
        row("Uplink C/N (dB)", up.d2c.cnr_db, up.ntn.cnr_db),
        row("Link Margin (Uplink) (dB)", up.d2c.margin_db, up.ntn.margin_db),
    ]
