"""Data model and ingestion for multimodal longitudinal event logs.

The event log is line-delimited JSON, one event per line::

    {"patient_id": "p1", "kind": "code", "channel": "lupus", "day": 120}
    {"patient_id": "p1", "kind": "measurement", "channel": "ana", "day": 121, "value": 2.5}
    {"patient_id": "p1", "kind": "medication", "channel": "hcq", "day": 121}

Medication lines carry the visit day, one line per drug per visit. A
medication line with an empty ``channel`` records a visit whose medication
list was empty. Demographics come from a separate CSV table with columns
``patient_id, sex, race, birth_day`` where ``race`` is a ``;``-separated
list (one-hot, usually a single entry).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from ._util import atomic_write_text

log = logging.getLogger(__name__)


class Kind(str, Enum):
    CODE = "code"
    MEASUREMENT = "measurement"
    MEDICATION = "medication"
    DEMOGRAPHIC = "demographic"


_KIND_ORDER = {Kind.CODE: 0, Kind.MEASUREMENT: 1, Kind.MEDICATION: 2, Kind.DEMOGRAPHIC: 3}

SEX = "sex"
AGE = "age"
RACE_PREFIX = "race:"


@dataclass(frozen=True)
class ChannelId:
    kind: Kind
    name: str

    @property
    def key(self) -> str:
        return f"{self.kind.value}:{self.name}"

    @classmethod
    def from_key(cls, key: str) -> "ChannelId":
        kind, _, name = key.partition(":")
        return cls(Kind(kind), name)

    def sort_key(self):
        return (_KIND_ORDER[self.kind], self.name)

    @property
    def is_binary(self) -> bool:
        """Medication, sex and race rows are 0/1 and left untouched by scaling."""
        if self.kind is Kind.MEDICATION:
            return True
        return self.kind is Kind.DEMOGRAPHIC and self.name != AGE


class ParseError(ValueError):
    """Malformed event-log or demographics input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Demographics:
    sex: int
    race: frozenset = frozenset()
    birth_day: int = 0


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    span: tuple
    code_events: tuple = ()
    measurements: tuple = ()
    visit_medication_lists: tuple = ()
    demographics: Demographics | None = None

    def __post_init__(self):
        first, last = self.span
        if first > last:
            raise ValueError(f"{self.patient_id}: first_day {first} > last_day {last}")
        for _, day in self.code_events:
            self._check_day(day)
        for _, day, value in self.measurements:
            self._check_day(day)
            if not math.isfinite(value):
                raise ValueError(f"{self.patient_id}: non-finite measurement value")
        for day, _ in self.visit_medication_lists:
            self._check_day(day)

    def _check_day(self, day):
        if not self.span[0] <= day <= self.span[1]:
            raise ValueError(f"{self.patient_id}: day {day} outside span {self.span}")

    @property
    def n_days(self) -> int:
        return self.span[1] - self.span[0] + 1

    def channel_counts(self) -> Counter:
        """Event count per non-demographic channel in this record."""
        counts: Counter = Counter()
        for name, _ in self.code_events:
            counts[ChannelId(Kind.CODE, name)] += 1
        for name, _, _ in self.measurements:
            counts[ChannelId(Kind.MEASUREMENT, name)] += 1
        for _, meds in self.visit_medication_lists:
            for name in meds:
                counts[ChannelId(Kind.MEDICATION, name)] += 1
        return counts


@dataclass(frozen=True)
class Cohort:
    records: tuple = ()
    catalog: tuple = ()
    _index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.catalog)})

    @property
    def p(self) -> int:
        return len(self.catalog)

    def index(self, channel: ChannelId) -> int:
        return self._index[channel]

    def record(self, patient_id: str) -> PatientRecord:
        for r in self.records:
            if r.patient_id == patient_id:
                return r
        raise KeyError(patient_id)


def demographic_channels(races: Iterable[str]) -> list[ChannelId]:
    chans = [ChannelId(Kind.DEMOGRAPHIC, SEX), ChannelId(Kind.DEMOGRAPHIC, AGE)]
    chans += [ChannelId(Kind.DEMOGRAPHIC, RACE_PREFIX + r) for r in sorted(set(races))]
    return chans


def _require(obj, key, lineno):
    if key not in obj:
        raise ParseError(f"missing field {key!r}", lineno)
    return obj[key]


def _as_day(value, lineno) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
        raise ParseError(f"day must be an integer, got {value!r}", lineno)
    return int(value)


def parse_demographics(rows: Iterable[Mapping]) -> dict[str, Demographics]:
    out = {}
    for i, row in enumerate(rows, start=2):
        try:
            pid = str(row["patient_id"])
            sex = int(row["sex"])
            birth = int(row["birth_day"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(f"bad demographics row: {exc}", i) from None
        if sex not in (0, 1):
            raise ParseError("sex must be 0 or 1", i)
        race_field = row.get("race") or ""
        race = frozenset(r for r in race_field.split(";") if r)
        out[pid] = Demographics(sex=sex, race=race, birth_day=birth)
    return out


def parse_event_log(lines: Iterable[str], demographics: Mapping[str, Demographics] | None = None) -> Cohort:
    """Parse a line-delimited JSON event stream into a :class:`Cohort`.

    Records are ordered by patient id and events within a record by
    ``(day, channel)``; duplicate identical events are kept.
    """
    codes = defaultdict(list)
    meas = defaultdict(list)
    visits = defaultdict(lambda: defaultdict(set))
    days = defaultdict(list)
    channels = set()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(obj, dict):
            raise ParseError("event must be a JSON object", lineno)
        pid = str(_require(obj, "patient_id", lineno))
        kind_s = _require(obj, "kind", lineno)
        try:
            kind = Kind(kind_s)
        except ValueError:
            raise ParseError(f"unknown kind {kind_s!r}", lineno) from None
        if kind is Kind.DEMOGRAPHIC:
            raise ParseError("demographics belong in the demographics table", lineno)
        channel = _require(obj, "channel", lineno)
        if not isinstance(channel, str):
            raise ParseError("channel must be a string", lineno)
        day = _as_day(_require(obj, "day", lineno), lineno)
        has_value = obj.get("value") is not None
        if kind is Kind.MEASUREMENT:
            if not has_value:
                raise ParseError("measurement requires a value", lineno)
            value = obj["value"]
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParseError(f"measurement value must be a finite number, got {value!r}", lineno)
            if not channel:
                raise ParseError("empty channel", lineno)
            meas[pid].append((channel, day, float(value)))
            channels.add(ChannelId(kind, channel))
        elif has_value:
            raise ParseError(f"value is not allowed for {kind.value} events", lineno)
        elif kind is Kind.CODE:
            if not channel:
                raise ParseError("empty channel", lineno)
            codes[pid].append((channel, day))
            channels.add(ChannelId(kind, channel))
        else:
            slot = visits[pid][day]
            if channel:
                slot.add(channel)
                channels.add(ChannelId(kind, channel))
        days[pid].append(day)

    races = set()
    if demographics is not None:
        for pid in days:
            if pid not in demographics:
                raise ParseError(f"patient {pid!r} has no demographics row")
        dropped = set(demographics) - set(days)
        if dropped:
            log.warning("%d demographics rows without events ignored", len(dropped))
        for pid in days:
            races |= demographics[pid].race

    records = []
    for pid in sorted(days):
        span = (min(days[pid]), max(days[pid]))
        records.append(
            PatientRecord(
                patient_id=pid,
                span=span,
                code_events=tuple(sorted(codes[pid], key=lambda e: (e[1], e[0]))),
                measurements=tuple(sorted(meas[pid], key=lambda e: (e[1], e[0]))),
                visit_medication_lists=tuple(
                    (d, frozenset(s)) for d, s in sorted(visits[pid].items())
                ),
                demographics=None if demographics is None else demographics[pid],
            )
        )
    catalog = sorted(channels, key=ChannelId.sort_key)
    if demographics is not None:
        catalog += demographic_channels(races)
    return Cohort(records=tuple(records), catalog=tuple(catalog))


def read_cohort(events_path, demographics_path=None) -> Cohort:
    demo = None
    if demographics_path is not None:
        with open(demographics_path, newline="") as fh:
            demo = parse_demographics(csv.DictReader(fh))
    with open(events_path) as fh:
        return parse_event_log(fh, demo)


def iter_event_lines(cohort: Cohort):
    """Serialize a cohort back to event-log lines (inverse of parsing)."""
    for rec in cohort.records:
        events = []
        for name, day in rec.code_events:
            events.append((day, 0, name, {"patient_id": rec.patient_id, "kind": "code", "channel": name, "day": day}))
        for name, day, value in rec.measurements:
            events.append((day, 1, name, {"patient_id": rec.patient_id, "kind": "measurement",
                                          "channel": name, "day": day, "value": value}))
        for day, meds in rec.visit_medication_lists:
            names = sorted(meds) or [""]
            for name in names:
                events.append((day, 2, name, {"patient_id": rec.patient_id, "kind": "medication",
                                              "channel": name, "day": day}))
        for *_, obj in sorted(events, key=lambda e: e[:3]):
            yield json.dumps(obj, sort_keys=True)


def serialize_event_log(cohort: Cohort) -> str:
    return "".join(line + "\n" for line in iter_event_lines(cohort))


def serialize_demographics(cohort: Cohort) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["patient_id", "sex", "race", "birth_day"])
    for rec in cohort.records:
        d = rec.demographics
        if d is not None:
            writer.writerow([rec.patient_id, d.sex, ";".join(sorted(d.race)), d.birth_day])
    return buf.getvalue()


def filter_channels(cohort: Cohort, min_total_events: int = 1000, min_records: int = 10) -> Cohort:
    """Drop channels with fewer than ``min_total_events`` events in total or
    present in fewer than ``min_records`` records. Demographics are kept."""
    if min_total_events < 0 or min_records < 0:
        raise ValueError("thresholds must be >= 0")
    totals: Counter = Counter()
    n_records: Counter = Counter()
    for rec in cohort.records:
        counts = rec.channel_counts()
        totals.update(counts)
        n_records.update(counts.keys())
    keep = {
        c for c in cohort.catalog
        if c.kind is Kind.DEMOGRAPHIC or (totals[c] >= min_total_events and n_records[c] >= min_records)
    }
    if len(keep) == len(cohort.catalog):
        return cohort
    keep_names = {k: {c.name for c in keep if c.kind is k} for k in Kind}
    records = []
    for rec in cohort.records:
        records.append(
            PatientRecord(
                patient_id=rec.patient_id,
                span=rec.span,
                code_events=tuple(e for e in rec.code_events if e[0] in keep_names[Kind.CODE]),
                measurements=tuple(e for e in rec.measurements if e[0] in keep_names[Kind.MEASUREMENT]),
                visit_medication_lists=tuple(
                    (d, frozenset(m for m in meds if m in keep_names[Kind.MEDICATION]))
                    for d, meds in rec.visit_medication_lists
                ),
                demographics=rec.demographics,
            )
        )
    catalog = tuple(c for c in cohort.catalog if c in keep)
    return Cohort(records=tuple(records), catalog=catalog)


def cohort_to_dict(cohort: Cohort) -> dict:
    """Full-fidelity JSON-able form (spans survive filtering)."""
    recs = []
    for r in cohort.records:
        d = r.demographics
        recs.append({
            "patient_id": r.patient_id,
            "span": list(r.span),
            "codes": [list(e) for e in r.code_events],
            "measurements": [list(e) for e in r.measurements],
            "visits": [[day, sorted(meds)] for day, meds in r.visit_medication_lists],
            "demographics": None if d is None else {
                "sex": d.sex, "race": sorted(d.race), "birth_day": d.birth_day},
        })
    return {"catalog": [c.key for c in cohort.catalog], "records": recs}


def cohort_from_dict(obj: dict) -> Cohort:
    records = []
    for r in obj["records"]:
        d = r["demographics"]
        records.append(PatientRecord(
            patient_id=r["patient_id"],
            span=tuple(r["span"]),
            code_events=tuple((c, int(day)) for c, day in r["codes"]),
            measurements=tuple((c, int(day), float(v)) for c, day, v in r["measurements"]),
            visit_medication_lists=tuple((int(day), frozenset(m)) for day, m in r["visits"]),
            demographics=None if d is None else Demographics(d["sex"], frozenset(d["race"]), d["birth_day"]),
        ))
    return Cohort(records=tuple(records), catalog=tuple(ChannelId.from_key(k) for k in obj["catalog"]))


def save_cohort(cohort: Cohort, path) -> None:
    atomic_write_text(path, json.dumps(cohort_to_dict(cohort)))


def load_cohort(path) -> Cohort:
    return cohort_from_dict(json.loads(Path(path).read_text()))


def cohort_manifest(cohort: Cohort) -> dict:
    """Catalog and per-patient spans, as written by the ingest stage."""
    kinds = Counter(c.kind.value for c in cohort.catalog)
    return {
        "p": cohort.p,
        "n_records": len(cohort.records),
        "channels_by_kind": dict(sorted(kinds.items())),
        "catalog": [{"kind": c.kind.value, "name": c.name} for c in cohort.catalog],
        "spans": {r.patient_id: list(r.span) for r in cohort.records},
    }
