"""Command-line entry point.

Exit codes: 0 success, 1 usage, 2 validation, 3 audit failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from trilink import scenario as scenario_io
from trilink import simcore
from trilink._validation import ConfigurationError, DomainError, ScenarioError
from trilink.geometry import OrbitConfig, pass_samples
from trilink.linkbudget import (
    TABLE4_DISTANCE_KM,
    TABLE4_F_C_HZ,
    BudgetInput,
    Direction,
    fspl,
    preset,
    table4_rows,
)
from trilink.radio import CarrierConfig, doppler_at, doppler_rate, timing_advance
from trilink.selector import session_key_for
from trilink.tierlink import D2cRouting, LinkVariant, NtnPayload, Tier

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_AUDIT = 0, 1, 2, 3

DOPPLER_COLUMNS = (
    "t_s", "elevation_deg", "slant_range_km", "doppler_hz", "doppler_rate_hz_s", "ta_ms", "ta_rate_us_s",
)
DOPPLER_FORMATS = ("{:.3f}", "{:.4f}", "{:.4f}", "{:.3f}", "{:.4f}", "{:.6f}", "{:.4f}")

COMPARE_AXES = ("d2c-routing", "ntn-payload", "tri-vs-single")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(x: float, spec: str = "{:.1f}") -> str:
    out = spec.format(x)
    # "-0.0" is a formatting artefact, not a value
    return out[1:] if out.startswith("-") and float(out) == 0 else out


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


# --- doppler -----------------------------------------------------------------


def doppler_table(f_c_hz, altitude_km, duration_s, step_s, max_elevation_deg=90.0,
                  velocity_kms=None):
    """Rows over a pass centred on culmination, plus the omitted-row count."""
    if step_s <= 0 or duration_s < 0:
        raise DomainError("step must be > 0 and duration >= 0")
    carrier = CarrierConfig(f_c_hz)
    orbit = OrbitConfig(altitude_km, max_elevation_deg, velocity_override_kms=velocity_kms)
    n = int(np.floor(duration_s / step_s + 1e-9))
    times = [-duration_s / 2.0 + i * step_s for i in range(n + 1)]
    samples, omitted = pass_samples(orbit, times)
    rows = []
    for s in samples:
        ta = timing_advance(s, carrier.c_ms)
        rows.append((
            s.t_s, s.elevation_deg, s.slant_range_km, doppler_at(carrier, s),
            doppler_rate(carrier, orbit, s.t_s), ta.ta_ms, ta.ta_rate_us_per_s,
        ))
    return rows, omitted


def cmd_doppler(args) -> int:
    rows, omitted = doppler_table(args.fc, args.altitude, args.duration, args.step,
                                  args.max_elevation, args.velocity)
    if args.format == "structured":
        text = json.dumps({
            "columns": list(DOPPLER_COLUMNS),
            "rows": [[round(v, 6) for v in r] for r in rows],
            "omitted_out_of_window": omitted,
        }, indent=2) + "\n"
    else:
        text = _csv_text(DOPPLER_COLUMNS, [
            [_fmt(v, spec) for v, spec in zip(r, DOPPLER_FORMATS)] for r in rows
        ])
        if omitted:
            text += f"# out_of_window_rows_omitted={omitted}\n"
    _emit(text, args.out)
    return EXIT_OK


# --- link budget -------------------------------------------------------------

_EXPLICIT = {
    "eirp": "eirp_dbw",
    "path_loss": "path_loss_db",
    "rx_gain": "rx_gain_dbi",
    "noise": "noise_dbw",
    "tx_power": "tx_power_dbm",
    "sat_rx_gain": "sat_rx_gain_dbi",
}


def _budget_inputs(args):
    """(d2c_up, d2c_down, ntn_up, ntn_down) from a preset and/or explicit pairs."""
    given = {k: getattr(args, k) for k in _EXPLICIT if getattr(args, k) is not None}
    if args.preset is None and len(given) < len(_EXPLICIT):
        missing = sorted(set(_EXPLICIT) - set(given))
        raise ConfigurationError(
            "explicit inputs incomplete; missing --" + ", --".join(m.replace("_", "-") for m in missing)
        )
    out = []
    for i, system in enumerate(("d2c", "ntn")):
        for direction in (Direction.UPLINK, Direction.DOWNLINK):
            if args.preset is not None:
                if args.preset != "table4":
                    raise ConfigurationError(f"unknown preset {args.preset!r}; known: table4")
                base = preset(f"table4-{system}", direction, args.fspl_computed)
            else:
                base = BudgetInput(direction=direction, path_loss_db=0.0, noise_dbw=0.0)
            fields = {_EXPLICIT[k]: v[i] for k, v in given.items()}
            if args.fspl_computed and "path_loss_db" not in fields:
                fields.update(path_loss_db=None, distance_km=TABLE4_DISTANCE_KM, f_c_hz=TABLE4_F_C_HZ)
            out.append(replace(base, **fields))
    return out


def cmd_linkbudget(args) -> int:
    d2c_up, d2c_down, ntn_up, ntn_down = _budget_inputs(args)
    rows = table4_rows(d2c_up, d2c_down, ntn_up, ntn_down)
    note = None
    if args.fspl_computed:
        note = (
            f"computed FSPL {fspl(TABLE4_DISTANCE_KM, TABLE4_F_C_HZ):.1f} dB at "
            f"{TABLE4_DISTANCE_KM:.0f} km, {TABLE4_F_C_HZ / 1e9:.1f} GHz; the table lists 185.5 dB"
        )
    if args.format == "structured":
        doc = {"rows": [
            {"parameter": p, "d2c": round(a, 1), "ntn": round(b, 1), "delta": round(d, 1)}
            for p, a, b, d in rows
        ]}
        if note:
            doc["note"] = note
        text = json.dumps(doc, indent=2) + "\n"
    else:
        text = _csv_text(("parameter", "d2c", "ntn", "delta_ntn_minus_d2c"),
                         [(p, _fmt(a), _fmt(b), _fmt(d)) for p, a, b, d in rows])
        if note:
            text += f"# note: {note}\n"
    _emit(text, args.out)
    return EXIT_OK


# --- simulate / compare --------------------------------------------------------


def _load_scenario(args):
    sc = scenario_io.load(args.scenario)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    return sc


def _flatten(prefix, value, rows):
    if isinstance(value, dict):
        for k in sorted(value):
            _flatten(f"{prefix}.{k}" if prefix else str(k), value[k], rows)
    elif isinstance(value, list):
        rows.append((prefix, " ".join(str(simcore.clean_number(v)) for v in value)))
    else:
        rows.append((prefix, str(simcore.clean_number(value))))


def report_text(report: dict, fmt: str) -> str:
    if fmt == "structured":
        return simcore.dumps_report(report)
    rows = []
    _flatten("", simcore.jsonable(report), rows)
    return _csv_text(("metric", "value"), rows)


def cmd_simulate(args) -> int:
    sc = _load_scenario(args)
    result = simcore.run(sc)
    _emit(report_text(result.report, args.format), args.out)
    if args.events:
        Path(args.events).write_text(result.events_ndjson(), encoding="utf-8")
    findings = simcore.audit(result.events, session_key_for(sc.seed))
    if not findings.ok:
        for f in findings.findings:
            print(f"audit: [{f.check}] seq={f.seq} {f.detail}", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


def compare_variants(sc, axis: str) -> dict:
    """Scenario variants for one comparison axis, keyed by label."""
    if axis == "d2c-routing":
        return {r.value: replace(sc, variants=LinkVariant(r, sc.variants.ntn_payload))
                for r in D2cRouting}
    if axis == "ntn-payload":
        return {p.value: replace(sc, variants=LinkVariant(sc.variants.d2c_routing, p))
                for p in NtnPayload}
    if axis == "tri-vs-single":
        single = tuple(
            replace(seg, coverage={**seg.coverage, Tier.T2_NTN: False, Tier.T3_D2C: False})
            for seg in sc.route
        )
        return {"TRI_LINK": sc, "T1_ONLY": replace(sc, route=single)}
    raise UsageError(f"unknown axis {axis!r}; choose from {', '.join(COMPARE_AXES)}")


SUMMARY_KEYS = (
    "delivered_fraction", "served_fraction", "energy_units", "freeze_violations", "mrm_events",
)


def cmd_compare(args) -> int:
    sc = _load_scenario(args)
    variants = compare_variants(sc, args.axis)
    results = {label: simcore.run(v) for label, v in variants.items()}
    failed = False
    for label, res in results.items():
        findings = simcore.audit(res.events, session_key_for(sc.seed))
        for f in findings.findings:
            failed = True
            print(f"audit[{label}]: [{f.check}] seq={f.seq} {f.detail}", file=sys.stderr)
    reports = {label: res.report for label, res in results.items()}
    if args.format == "structured":
        text = simcore.dumps_report({"axis": args.axis, "seed": sc.seed, "reports": reports})
    else:
        labels = list(reports)
        rows = []
        for key in SUMMARY_KEYS:
            rows.append([key] + [str(simcore.clean_number(reports[l][key])) for l in labels])
        for t in Tier:
            rows.append([f"tier_mean_transit_latency_ms.{t.short}"]
                        + [str(simcore.clean_number(reports[l]["tier_mean_transit_latency_ms"][t.short]))
                           for l in labels])
            rows.append([f"tier_serving_fraction.{t.short}"]
                        + [str(simcore.clean_number(reports[l]["tier_serving_fraction"][t.short]))
                           for l in labels])
        text = _csv_text(["metric"] + labels, rows)
    _emit(text, args.out)
    return EXIT_AUDIT if failed else EXIT_OK


# --- wiring --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trilink", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("doppler", help="Doppler / timing-advance profile over a pass")
    p.add_argument("--fc", type=float, default=1.6e9, help="carrier frequency, Hz")
    p.add_argument("--altitude", type=float, default=500.0, help="orbit altitude, km")
    p.add_argument("--max-elevation", type=float, default=90.0, help="culmination elevation, deg")
    p.add_argument("--velocity", type=float, default=None, help="override orbital speed, km/s")
    p.add_argument("--duration", type=float, default=600.0, help="span centred on culmination, s")
    p.add_argument("--step", type=float, default=1.0, help="sample step, s")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "structured"), default="csv")
    p.set_defaults(func=cmd_doppler)

    p = sub.add_parser("linkbudget", help="D2C vs NTN link budget table")
    p.add_argument("--preset", default=None, help="named input set (table4)")
    p.add_argument("--fspl-computed", action="store_true",
                   help="compute path loss from 500 km / 1.6 GHz instead of the table value")
    for flag in _EXPLICIT:
        p.add_argument("--" + flag.replace("_", "-"), type=float, nargs=2, metavar=("D2C", "NTN"))
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "structured"), default="csv")
    p.set_defaults(func=cmd_linkbudget)

    p = sub.add_parser("simulate", help="run a scenario and write its metrics report")
    p.add_argument("scenario", help="scenario JSON path or bundled name (corridor, maritime, urban)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--events", default=None, help="write the NDJSON event log here")
    p.add_argument("--format", choices=("csv", "structured"), default="structured")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run a scenario once per variant on one axis")
    p.add_argument("scenario")
    p.add_argument("--axis", required=True, choices=COMPARE_AXES)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "structured"), default="structured")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        for v in exc.violations:
            print(f"invalid scenario: {v}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConfigurationError, DomainError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
