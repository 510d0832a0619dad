"""NMEA 0183 AIVDM sentences and AIS position reports (message types 1-3).

Payloads use the ITU 6-bit armoring: each character carries six bits, with
``value = ord(c) - 48`` and a further ``-8`` when that exceeds 40.  Bit
sequences are numpy ``uint8`` arrays of 0/1, most significant bit first.
"""

from __future__ import annotations

import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

import numpy as np

from .errors import (
    ChecksumMismatch,
    FieldOutOfRange,
    InvalidPayloadChar,
    MalformedSentence,
    TruncatedPayload,
    UnsupportedMessageType,
    ValidationError,
)

log = logging.getLogger(__name__)

POSITION_TYPES = (1, 2, 3)
REPORT_BITS = 168
COORD_SCALE = 600_000.0  # 1/10000 minute units per degree

LAT_UNAVAILABLE = 91.0
LON_UNAVAILABLE = 181.0
SOG_UNAVAILABLE = 1023  # tenths of a knot
COG_UNAVAILABLE = 3600  # tenths of a degree

FRAGMENT_TIMEOUT_S = 5.0
_HEX_DIGITS = frozenset("0123456789ABCDEF")

CSV_HEADER = ("rx_time", "mmsi", "msg_type", "nav_status", "lat", "lon", "sog", "cog")

# (name, start, width, signed); offsets per ITU-R M.1371 for types 1-3
_LAYOUT = (
    ("msg_type", 0, 6, False),
    ("repeat", 6, 2, False),
    ("mmsi", 8, 30, False),
    ("nav_status", 38, 4, False),
    ("rot", 42, 8, True),
    ("sog", 50, 10, False),
    ("accuracy", 60, 1, False),
    ("lon", 61, 28, True),
    ("lat", 89, 27, True),
    ("cog", 116, 12, False),
    ("heading", 128, 9, False),
    ("second", 137, 6, False),
    ("maneuver", 143, 2, False),
    ("spare", 145, 3, False),
    ("raim", 148, 1, False),
    ("radio", 149, 19, False),
)
FIELD_SLICES = {name: (start, width, signed) for name, start, width, signed in _LAYOUT}


@dataclass(frozen=True)
class RawSentence:
    talker_tag: str
    fragment_count: int
    fragment_index: int
    message_id: int | None
    channel: str
    payload: str
    fill_bits: int
    checksum: int


@dataclass(frozen=True)
class PositionReport:
    """One decoded position report.

    ``lat``/``lon`` are degrees on the 1/600000 degree grid, ``sog`` knots on
    the 0.1 kn grid, ``cog`` degrees on the 0.1 degree grid.  ``rx_timestamp``
    is the receiver-side epoch time attached at ingestion.
    """

    msg_type: int
    mmsi: int
    nav_status: int
    lat: float
    lon: float
    sog: float
    cog: float
    rx_timestamp: float = 0.0

    @property
    def lat_raw(self) -> int:
        return round(self.lat * COORD_SCALE)

    @property
    def lon_raw(self) -> int:
        return round(self.lon * COORD_SCALE)

    @property
    def sog_tenths(self) -> int:
        return round(self.sog * 10)

    @property
    def cog_tenths(self) -> int:
        return round(self.cog * 10)

    @property
    def has_unavailable(self) -> bool:
        return (
            self.lat_raw == round(LAT_UNAVAILABLE * COORD_SCALE)
            or self.lon_raw == round(LON_UNAVAILABLE * COORD_SCALE)
            or self.sog_tenths == SOG_UNAVAILABLE
            or self.cog_tenths == COG_UNAVAILABLE
        )

    @classmethod
    def from_raw(cls, msg_type, mmsi, nav_status, lat_raw, lon_raw, sog_tenths, cog_tenths,
                 rx_timestamp=0.0) -> "PositionReport":
        return cls(
            msg_type=int(msg_type),
            mmsi=int(mmsi),
            nav_status=int(nav_status),
            lat=int(lat_raw) / COORD_SCALE,
            lon=int(lon_raw) / COORD_SCALE,
            sog=int(sog_tenths) / 10.0,
            cog=int(cog_tenths) / 10.0,
            rx_timestamp=float(rx_timestamp),
        )


# --------------------------------------------------------------------------
# sentence layer


def nmea_checksum(body: str) -> int:
    """XOR of all characters of ``body`` (the text between '!' and '*')."""
    value = 0
    for ch in body:
        value ^= ord(ch)
    return value


def _char_value(ch: str) -> int:
    code = ord(ch)
    if 48 <= code <= 87:
        return code - 48
    if 96 <= code <= 119:
        return code - 56
    raise InvalidPayloadChar(f"invalid payload character {ch!r}")


def parse_sentence(line: str) -> RawSentence:
    """Parse one AIVDM/AIVDO line and verify its checksum."""
    line = line.strip("\r\n")
    # AIS sentences are encapsulated, so they always open with '!'
    if not line or line[0] != "!":
        raise MalformedSentence(f"not an encapsulated NMEA sentence: {line!r}")
    star = line.rfind("*")
    digits = line[star + 1:]
    if star < 0 or len(digits) != 2 or any(c not in _HEX_DIGITS for c in digits):
        raise MalformedSentence(f"checksum must be two uppercase hex digits, got {digits!r}")
    body = line[1:star]
    stated = int(digits, 16)
    actual = nmea_checksum(body)
    if actual != stated:
        raise ChecksumMismatch(f"checksum {stated:02X} stated, {actual:02X} computed")

    parts = body.split(",")
    if len(parts) != 7:
        raise MalformedSentence(f"expected 7 fields, got {len(parts)}")
    tag, count, index, msg_id, channel, payload, fill = parts
    if not tag.endswith(("VDM", "VDO")):
        raise MalformedSentence(f"not an AIS sentence: {tag!r}")
    try:
        fragment_count = int(count)
        fragment_index = int(index)
        message_id = int(msg_id) if msg_id else None
        fill_bits = int(fill)
    except ValueError:
        raise MalformedSentence("non-numeric header field") from None
    if not 1 <= fragment_index <= fragment_count:
        raise MalformedSentence(f"fragment {fragment_index} of {fragment_count}")
    if not 0 <= fill_bits <= 5:
        raise MalformedSentence(f"fill bits {fill_bits} outside 0..5")
    for ch in payload:
        _char_value(ch)
    return RawSentence(
        talker_tag=line[0] + tag,
        fragment_count=fragment_count,
        fragment_index=fragment_index,
        message_id=message_id,
        channel=channel,
        payload=payload,
        fill_bits=fill_bits,
        checksum=stated,
    )


def payload_to_bits(payload: str, fill_bits: int = 0) -> np.ndarray:
    values = np.fromiter((_char_value(c) for c in payload), dtype=np.uint8, count=len(payload))
    bits = np.unpackbits(values[:, None], axis=1)[:, 2:].reshape(-1)
    if fill_bits:
        bits = bits[:-fill_bits]
    return bits


def bits_to_payload(bits) -> tuple[str, int]:
    """Armor a bit sequence; returns ``(payload, fill_bits)``."""
    bits = np.asarray(bits, dtype=np.uint8)
    fill = (-len(bits)) % 6
    if fill:
        bits = np.concatenate([bits, np.zeros(fill, dtype=np.uint8)])
    six = bits.reshape(-1, 6)
    values = six @ np.array([32, 16, 8, 4, 2, 1], dtype=np.int64)
    chars = [chr(v + 48) if v < 40 else chr(v + 56) for v in values.tolist()]
    return "".join(chars), fill


def _bits_to_int(bits: np.ndarray) -> int:
    n = len(bits)
    pad = (-n) % 8
    packed = np.packbits(bits)
    return int.from_bytes(packed.tobytes(), "big") >> pad


def _field(word: int, nbits: int, start: int, width: int, signed: bool) -> int:
    value = (word >> (nbits - start - width)) & ((1 << width) - 1)
    if signed and value >> (width - 1):
        value -= 1 << width
    return value


def message_type(bits: np.ndarray) -> int:
    if len(bits) < 6:
        raise TruncatedPayload("payload shorter than the message-type field")
    return _field(_bits_to_int(bits[:6]), 6, 0, 6, False)


def decode_position_report(bits, rx_timestamp: float = 0.0) -> PositionReport:
    bits = np.asarray(bits, dtype=np.uint8)
    msg_type = message_type(bits)
    if msg_type not in POSITION_TYPES:
        raise UnsupportedMessageType(msg_type)
    if len(bits) < REPORT_BITS:
        raise TruncatedPayload(f"{len(bits)} bits, need {REPORT_BITS}")
    bits = bits[:REPORT_BITS]
    word = _bits_to_int(bits)
    get = lambda name: _field(word, REPORT_BITS, *FIELD_SLICES[name])  # noqa: E731
    report = PositionReport.from_raw(
        msg_type,
        get("mmsi"),
        get("nav_status"),
        get("lat"),
        get("lon"),
        get("sog"),
        get("cog"),
        rx_timestamp,
    )
    lat, lon = abs(report.lat), abs(report.lon)
    if (lat > 90 and report.lat != LAT_UNAVAILABLE) or (lon > 180 and report.lon != LON_UNAVAILABLE):
        raise FieldOutOfRange(f"position ({report.lat}, {report.lon}) outside the globe")
    if report.cog_tenths > COG_UNAVAILABLE:
        raise FieldOutOfRange(f"cog {report.cog_tenths} tenths > 3600")
    return report


def _check_range(name, value, lo, hi):
    if not lo <= value <= hi:
        raise FieldOutOfRange(f"{name}={value} outside [{lo}, {hi}]")


def encode_bits(report: PositionReport) -> np.ndarray:
    """Pack ``report`` into the 168-bit type 1-3 layout."""
    lat_raw, lon_raw = report.lat_raw, report.lon_raw
    _check_range("msg_type", report.msg_type, 1, 3)
    _check_range("mmsi", report.mmsi, 0, (1 << 30) - 1)
    _check_range("nav_status", report.nav_status, 0, 15)
    if lat_raw != round(LAT_UNAVAILABLE * COORD_SCALE):
        _check_range("lat", lat_raw, -90 * 600_000, 90 * 600_000)
    if lon_raw != round(LON_UNAVAILABLE * COORD_SCALE):
        _check_range("lon", lon_raw, -180 * 600_000, 180 * 600_000)
    _check_range("sog_tenths", report.sog_tenths, 0, SOG_UNAVAILABLE)
    _check_range("cog_tenths", report.cog_tenths, 0, COG_UNAVAILABLE)

    values = {
        "msg_type": report.msg_type,
        "repeat": 0,
        "mmsi": report.mmsi,
        "nav_status": report.nav_status,
        "rot": -128,  # not available
        "sog": report.sog_tenths,
        "accuracy": 0,
        "lon": lon_raw,
        "lat": lat_raw,
        "cog": report.cog_tenths,
        "heading": 511,  # not available
        "second": int(report.rx_timestamp) % 60,
        "maneuver": 0,
        "spare": 0,
        "raim": 0,
        "radio": 0,
    }
    word = 0
    for name, start, width, _signed in _LAYOUT:
        word |= (values[name] & ((1 << width) - 1)) << (REPORT_BITS - start - width)
    packed = np.frombuffer(word.to_bytes(REPORT_BITS // 8, "big"), dtype=np.uint8)
    return np.unpackbits(packed)


def format_sentence(payload: str, fill_bits: int, channel: str = "A", talker: str = "!AIVDM",
                    count: int = 1, index: int = 1, message_id: int | None = None) -> str:
    mid = "" if message_id is None else str(message_id)
    body = f"{talker[1:]},{count},{index},{mid},{channel},{payload},{fill_bits}"
    return f"{talker[0]}{body}*{nmea_checksum(body):02X}"


def encode_position_report(report: PositionReport, channel: str = "A") -> str:
    """Encode ``report`` as a single-fragment ``!AIVDM`` line (no line terminator)."""
    payload, fill = bits_to_payload(encode_bits(report))
    return format_sentence(payload, fill, channel)


# --------------------------------------------------------------------------
# stream layer


class FragmentBuffer:
    """Reassembles multi-fragment sentences keyed by (message_id, channel).

    Incomplete groups older than ``timeout`` seconds of ingestion time are
    discarded and counted in ``expired``.
    """

    def __init__(self, timeout: float = FRAGMENT_TIMEOUT_S):
        self.timeout = timeout
        self._groups: dict[tuple, tuple[float, list[RawSentence]]] = {}
        self.expired = 0

    def _expire(self, now: float) -> None:
        stale = [k for k, (t0, _) in self._groups.items() if now - t0 > self.timeout]
        for key in stale:
            del self._groups[key]
        self.expired += len(stale)

    def feed(self, raw: RawSentence, now: float) -> tuple[str, int] | None:
        """Add one fragment; return ``(payload, fill_bits)`` once a message is complete."""
        self._expire(now)
        if raw.fragment_count == 1:
            return raw.payload, raw.fill_bits
        key = (raw.message_id, raw.channel)
        if raw.fragment_index == 1:
            if key in self._groups:
                self.expired += 1
            self._groups[key] = (now, [raw])
            return None
        if key not in self._groups:
            return None
        t0, parts = self._groups[key]
        if raw.fragment_index != len(parts) + 1 or raw.fragment_count != parts[0].fragment_count:
            del self._groups[key]
            self.expired += 1
            return None
        parts.append(raw)
        if len(parts) < raw.fragment_count:
            return None
        del self._groups[key]
        return "".join(p.payload for p in parts), parts[-1].fill_bits


@dataclass
class DecodeStats:
    lines: int = 0
    decoded: int = 0
    rejected: Counter = field(default_factory=Counter)
    skipped_types: Counter = field(default_factory=Counter)
    expired_fragments: int = 0

    @property
    def rejected_total(self) -> int:
        return sum(self.rejected.values())

    def as_dict(self) -> dict:
        return {
            "lines": self.lines,
            "decoded": self.decoded,
            "rejected": self.rejected_total,
            "rejected_by_reason": dict(sorted(self.rejected.items())),
            "skipped_types": {str(k): v for k, v in sorted(self.skipped_types.items())},
            "expired_fragments": self.expired_fragments,
        }


def split_timestamp(line: str) -> tuple[float | None, str]:
    """Split the optional ``<epoch_seconds>\\t<sentence>`` prefix."""
    if "\t" in line:
        stamp, _, sentence = line.partition("\t")
        try:
            return float(stamp), sentence
        except ValueError:
            raise MalformedSentence(f"bad timestamp prefix {stamp!r}") from None
    return None, line


def iter_reports(lines: Iterable[str], stats: DecodeStats | None = None,
                 clock: Callable[[], float] = time.time) -> Iterator[PositionReport]:
    """Decode position reports from NMEA lines, tallying problems in ``stats``.

    Bad lines are counted, never raised.  Non-position message types are
    counted under ``skipped_types``.
    """
    stats = stats if stats is not None else DecodeStats()
    buffer = FragmentBuffer()
    for line in lines:
        line = line.strip()
        if not line:
            continue
        stats.lines += 1
        try:
            stamp, sentence = split_timestamp(line)
            now = clock() if stamp is None else stamp
            raw = parse_sentence(sentence)
            done = buffer.feed(raw, now)
            if done is None:
                continue
            bits = payload_to_bits(*done)
            msg_type = message_type(bits)
            if msg_type not in POSITION_TYPES:
                stats.skipped_types[msg_type] += 1
                log.debug("skipping AIS message type %d", msg_type)
                continue
            report = decode_position_report(bits, now)
        except ValidationError as exc:
            stats.rejected[type(exc).__name__] += 1
            continue
        stats.decoded += 1
        yield report
    stats.expired_fragments = buffer.expired


def decode_lines(lines: Iterable[str], clock: Callable[[], float] = time.time
                 ) -> tuple[list[PositionReport], DecodeStats]:
    stats = DecodeStats()
    reports = list(iter_reports(lines, stats, clock))
    return reports, stats


def report_row(r: PositionReport) -> list:
    return [repr(float(r.rx_timestamp)), int(r.mmsi), int(r.msg_type), int(r.nav_status),
            repr(float(r.lat)), repr(float(r.lon)), repr(float(r.sog)), repr(float(r.cog))]


def write_reports_csv(reports: Iterable[PositionReport], fh) -> int:
    import csv

    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    n = 0
    for r in reports:
        writer.writerow(report_row(r))
        n += 1
    return n


def read_reports_csv(fh) -> list[PositionReport]:
    import csv

    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None:
        return []
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise MalformedSentence(f"unexpected report CSV header {header}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            t, mmsi, mt, ns, lat, lon, sog, cog = row
            out.append(PositionReport(int(mt), int(mmsi), int(ns), float(lat), float(lon),
                                      float(sog), float(cog), float(t)))
        except ValueError:
            raise MalformedSentence(f"report CSV line {lineno} is malformed: {row}") from None
    return out
