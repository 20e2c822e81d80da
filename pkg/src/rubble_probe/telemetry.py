"""Sensor data model, serial-monitor text codecs, calibration statistics,
and the survivability rule table.

The parsers accept the probe firmware's serial output as captured, including
its irregularities (a label line missing its colon, one capitalized label,
timestamp prefixes, stray trailing spaces). The emitters write a normalized
form that the parsers also accept, so emit -> parse is the identity and
parse -> emit is canonicalizing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .labels import LABELS, SERIAL_LABELS, SERIAL_TO_LABEL

FIXTURES_DIR = Path(__file__).parent / "fixtures"

GOOD, MODERATE, POOR = "Good", "Moderate", "Poor"
_GRADE_RANK = {GOOD: 0, MODERATE: 1, POOR: 2}


class ParseError(ValueError):
    pass


class ZeroDenominator(ValueError):
    pass


@dataclass(frozen=True)
class SensorFrame:
    gas_raw: int
    temp_c: float
    humidity_pct: float
    pressure_kpa: float
    timestamp_ms: int = 0  # not part of the serial block; carried by transport

    def __post_init__(self):
        if not 0 <= self.gas_raw <= 1024:
            raise ValueError(f"gas_raw {self.gas_raw} outside [0, 1024]")
        if not 0.0 <= self.humidity_pct <= 100.0:
            raise ValueError(f"humidity {self.humidity_pct} outside [0, 100]")


@dataclass(frozen=True)
class PredictionBlock:
    dsp_ms: int
    classification_ms: int
    anomaly_ms: int
    probabilities: tuple  # ordered per LABELS

    def __post_init__(self):
        if len(self.probabilities) != len(LABELS):
            raise ValueError(f"need {len(LABELS)} probabilities, got {len(self.probabilities)}")
        total = sum(self.probabilities)
        # two-decimal serial rendering keeps only coarse mass balance
        if abs(total - 1.0) > 0.02:
            raise ValueError(f"probabilities sum to {total:.4f}, expected 1 +- 0.02")


_TS_PREFIX = re.compile(r"^\s*\d{2}:\d{2}:\d{2}\.\d{1,3}\s*->\s?")
_PRED_HEADER = re.compile(
    r"Predictions\s*\(\s*DSP:\s*(\d+)\s*ms\.?\s*,\s*Classification:\s*(\d+)\s*ms\.?\s*,\s*Anomaly:\s*(\d+)\s*ms\.?\s*\)\s*:?",
    re.IGNORECASE,
)
_FLOAT_LINE = re.compile(r"^[-+]?\d*\.\d+$|^[-+]?\d+\.?$")


def _clean_lines(text: str) -> list[str]:
    return [_TS_PREFIX.sub("", line).strip() for line in text.splitlines()]


def parse_prediction_block(text: str) -> PredictionBlock:
    """Read the classifier's serial block, tolerating captured irregularities."""
    lines = _clean_lines(text)
    header = None
    start = 0
    for i, line in enumerate(lines):
        m = _PRED_HEADER.search(line)
        if m:
            header, start = m, i + 1
            break
    if header is None:
        raise ParseError("missing Predictions header line")
    probs: dict[str, float] = {}
    pending: str | None = None
    for line in lines[start:]:
        if not line:
            continue
        if _FLOAT_LINE.match(line):
            if pending is None:
                raise ParseError(f"probability value {line!r} without a preceding label")
            probs[pending] = float(line)
            pending = None
            continue
        name, _, rest = line.partition(":")
        key = name.strip().lower()
        if key not in SERIAL_TO_LABEL:
            if len(probs) == len(LABELS):
                break  # block is complete; later traffic is not ours
            raise ParseError(f"unknown label line {line!r}")
        if pending is not None:
            raise ParseError(f"missing probability for {pending!r}")
        rest = rest.strip()
        if rest:
            if not _FLOAT_LINE.match(rest):
                raise ParseError(f"bad probability {rest!r} for {key!r}")
            probs[SERIAL_TO_LABEL[key]] = float(rest)
        else:
            pending = SERIAL_TO_LABEL[key]
    if pending is not None:
        raise ParseError(f"missing probability for {pending!r}")
    missing = [lbl for lbl in LABELS if lbl not in probs]
    if missing:
        raise ParseError(f"missing probability for {missing[0]!r}")
    return PredictionBlock(
        int(header.group(1)),
        int(header.group(2)),
        int(header.group(3)),
        tuple(probs[lbl] for lbl in LABELS),
    )


def emit_prediction_block(block: PredictionBlock) -> str:
    lines = [
        f"Predictions (DSP: {block.dsp_ms} ms., Classification: {block.classification_ms} ms.,"
        f" Anomaly: {block.anomaly_ms} ms.):"
    ]
    for label, p in zip(LABELS, block.probabilities):
        lines.append(f"{SERIAL_LABELS[label]}: {p:.2f}")
    return "\n".join(lines) + "\n"


_TEMP_RE = re.compile(r"Temperature\s*=?\s*([-+]?\d+(?:\.\d+)?)\s*°?\s*C", re.IGNORECASE)
_HUM_RE = re.compile(r"Humidity\s*=?\s*([-+]?\d+(?:\.\d+)?)\s*%", re.IGNORECASE)
_PRES_RE = re.compile(r"Pressure\s*=?\s*([-+]?\d+(?:\.\d+)?)\s*kPa", re.IGNORECASE)
_GAS_RE = re.compile(r"GAS\s+Sensor\s+Reading\s*:?\s*(\d+)?", re.IGNORECASE)


def parse_sensor_block(text: str) -> SensorFrame:
    """Read the sensor serial block; the block carries no timestamp."""
    lines = _clean_lines(text)
    gas = temp = hum = pres = None
    i = 0
    while i < len(lines):
        line = lines[i]
        m = _GAS_RE.search(line)
        if m and gas is None:
            if m.group(1):
                gas = int(m.group(1))
            else:
                for ahead in lines[i + 1 :]:
                    if ahead and re.fullmatch(r"\d+", ahead):
                        gas = int(ahead)
                        break
                    if ahead and not re.fullmatch(r"-+", ahead):
                        break
        for regex, slot in ((_TEMP_RE, "temp"), (_HUM_RE, "hum"), (_PRES_RE, "pres")):
            m = regex.search(line)
            if m:
                if slot == "temp":
                    temp = float(m.group(1))
                elif slot == "hum":
                    hum = float(m.group(1))
                else:
                    pres = float(m.group(1))
        i += 1
    for value, field in ((gas, "gas"), (temp, "temperature"), (hum, "humidity"), (pres, "pressure")):
        if value is None:
            raise ParseError(f"missing {field} field")
    return SensorFrame(gas, temp, hum, pres)


def emit_sensor_block(frame: SensorFrame) -> str:
    # field spellings and the blank pair after the gas value mirror the
    # probe firmware's serial output, quirks included
    return (
        "GAS Sensor Reading:\n"
        f"{frame.gas_raw}\n"
        "\n"
        "\n"
        f"Temperature = {frame.temp_c:.2f} °C\n"
        f"Humidity= {frame.humidity_pct:.2f} %\n"
        "-----\n"
        f"Pressure = {frame.pressure_kpa:.2f} kPa\n"
        "-----\n"
    )


# ---------------------------------------------------------------- calibration


def percentage_error(reference: float, measured: float, denominator: str = "reference") -> float:
    """100 * |measured - reference| / |denominator value|."""
    if denominator not in ("reference", "measured"):
        raise ValueError(f"denominator must be 'reference' or 'measured', got {denominator!r}")
    denom = reference if denominator == "reference" else measured
    if denom == 0:
        raise ZeroDenominator(f"{denominator} value is zero")
    return 100.0 * abs(measured - reference) / abs(denom)


@dataclass(frozen=True)
class CalibrationRecord:
    reference: float
    measured: float
    printed_pct: str | None = None  # as-printed percentage, kept verbatim

    @property
    def deviation(self) -> float:
        return self.measured - self.reference


@dataclass(frozen=True)
class CalibrationTable:
    sensor: str
    unit: str
    denominator: str
    stated_average_pct: str | None
    records: tuple


def _decimals(printed: str) -> int:
    _, _, frac = printed.partition(".")
    return len(frac)


def _round_to(x: float, decimals: int) -> float:
    scale = 10.0**decimals
    import math

    return math.floor(x * scale + 0.5 + 1e-9) / scale


def load_calibration_csv(path) -> CalibrationTable:
    """Fixture format: '# key: value' metadata lines, then a CSV body."""
    meta: dict[str, str] = {}
    rows: list[CalibrationRecord] = []
    header_seen = False
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
            continue
        if not header_seen:
            header_seen = True  # column header line
            continue
        cells = [c.strip() for c in line.split(",")]
        printed = cells[2] if len(cells) > 2 and cells[2] else None
        rows.append(CalibrationRecord(float(cells[0]), float(cells[1]), printed))
    if not rows:
        raise ValueError(f"no calibration rows in {path}")
    return CalibrationTable(
        meta.get("sensor", "unknown"),
        meta.get("unit", ""),
        meta.get("denominator", "reference"),
        meta.get("stated_average_pct"),
        tuple(rows),
    )


def bundled_calibration_tables() -> list[CalibrationTable]:
    return [
        load_calibration_csv(FIXTURES_DIR / f"calibration_{name}.csv")
        for name in ("temperature", "humidity", "pressure")
    ]


@dataclass(frozen=True)
class SensorSummary:
    sensor: str
    unit: str
    denominator: str
    computed_pcts: tuple
    printed_pcts: tuple  # floats; falls back to computed when not printed
    average_pct: float  # mean of the printed errors (publication chain)
    stated_average_pct: float | None
    accuracy_pct: float
    row_mismatches: tuple
    flags: tuple


@dataclass(frozen=True)
class CalibrationReport:
    sensors: tuple
    collective_accuracy_pct: float

    def render_text(self) -> str:
        out = []
        for s in self.sensors:
            out.append(f"{s.sensor} ({s.unit}), percentage error vs {s.denominator}:")
            for i, (c, p) in enumerate(zip(s.computed_pcts, s.printed_pcts), 1):
                out.append(f"  row {i}: computed {c:.5f}%  printed {p:g}%")
            out.append(f"  average error {s.average_pct:.5f}%  accuracy {s.accuracy_pct:.3f}%")
            for flag in s.flags:
                out.append(f"  NOTE: {flag}")
        out.append(f"collective accuracy {self.collective_accuracy_pct:.3f}%")
        return "\n".join(out) + "\n"


def summarize_table(table: CalibrationTable) -> SensorSummary:
    computed = tuple(percentage_error(r.reference, r.measured, table.denominator) for r in table.records)
    printed = tuple(
        float(r.printed_pct) if r.printed_pct is not None else c for r, c in zip(table.records, computed)
    )
    mismatches = []
    for i, (r, c, p) in enumerate(zip(table.records, computed, printed), 1):
        if r.printed_pct is None:
            continue
        if abs(_round_to(c, _decimals(r.printed_pct)) - p) > 0.001:
            mismatches.append(f"row {i}: computed {c:.5f}% != printed {p:g}%")
    average = sum(printed) / len(printed)
    flags = list(mismatches)
    stated = float(table.stated_average_pct) if table.stated_average_pct is not None else None
    if stated is not None and _round_to(average, _decimals(table.stated_average_pct)) != stated:
        flags.append(
            f"stated average {table.stated_average_pct}% does not match recomputed {average:.5f}%"
        )
    accuracy = 100.0 - (stated if stated is not None else average)
    return SensorSummary(
        table.sensor,
        table.unit,
        table.denominator,
        computed,
        printed,
        average,
        stated,
        accuracy,
        tuple(mismatches),
        tuple(flags),
    )


def calibration_report(tables) -> CalibrationReport:
    """Summaries per sensor plus the mean of sensor accuracies."""
    tables = list(tables)
    if not tables:
        raise ValueError("no calibration tables")
    sensors = tuple(summarize_table(t) for t in tables)
    collective = sum(s.accuracy_pct for s in sensors) / len(sensors)
    return CalibrationReport(sensors, collective)


# --------------------------------------------------------------- survivability


@dataclass(frozen=True)
class SurvivabilityReport:
    air: str
    thermal: str
    overall: str
    rationale: tuple


def survivability(frame: SensorFrame) -> SurvivabilityReport:
    """Rule-table assessment from gas counts and the thermal envelope."""
    if frame.gas_raw <= 400:
        air, air_why = GOOD, f"gas {frame.gas_raw} <= 400"
    elif frame.gas_raw <= 700:
        air, air_why = MODERATE, f"gas {frame.gas_raw} in 401..700"
    else:
        air, air_why = POOR, f"gas {frame.gas_raw} > 700"

    temp_good = 15.0 <= frame.temp_c <= 35.0
    hum_good = 20.0 <= frame.humidity_pct <= 80.0
    temp_near = 10.0 <= frame.temp_c <= 40.0
    hum_near = 10.0 <= frame.humidity_pct <= 90.0
    if temp_good and hum_good:
        thermal, thermal_why = GOOD, (
            f"temperature {frame.temp_c:g} degC in [15, 35] and humidity {frame.humidity_pct:g}% in [20, 80]"
        )
    elif temp_near and hum_near:
        thermal, thermal_why = MODERATE, (
            f"temperature {frame.temp_c:g} degC and humidity {frame.humidity_pct:g}% within the +-5 degC/+-10% margin"
        )
    else:
        thermal, thermal_why = POOR, (
            f"temperature {frame.temp_c:g} degC or humidity {frame.humidity_pct:g}% outside the margin bands"
        )
    overall = air if _GRADE_RANK[air] >= _GRADE_RANK[thermal] else thermal
    return SurvivabilityReport(air, thermal, overall, (air_why, thermal_why))
